//! Discrete demand-side scheduling games.
//!
//! Users own fixed and shiftable electrical loads over a day of `H` slots.
//! A convex price function turns slot demand into cost, which is split
//! between users by one of two billing schemes. The only decision is the
//! start slot of each shiftable load. The crate provides exact evaluation,
//! best-response dynamics, exhaustive equilibrium search, seeded Monte Carlo
//! studies, small matrix-game analytics and two alternative mechanisms.

pub mod altsched;
pub mod dynamics;
pub mod engine;
pub mod equilibrium;
pub mod error;
pub mod model;
pub mod montecarlo;
pub mod numeric;
pub mod report;
pub mod scenarios;

pub use dynamics::{
    best_response, cournot_run, cournot_run_with, is_nash, DynamicsConfig, NashMode, RunRecord, RunStatus, Update,
};
pub use equilibrium::{
    enumerate_ne, enumerate_ne_with_cap, group_equilibria, EquilibriumRow, EquilibriumTable, HullReport, MatrixGame,
};
pub use error::{Error, Result};
pub use model::{
    Billing, JointSchedule, Load, LoadKind, LoadProfile, Owner, PricingFunction, PricingKind, Scenario, TimeSlot,
};
pub use montecarlo::{run_study, StudyConfig, StudyResult};
pub use numeric::{Money, Q};
