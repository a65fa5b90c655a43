use thiserror::Error;

use crate::model::TimeSlot;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("load `{load}`: start {start} is infeasible ({reason})")]
    InfeasibleStart {
        load: String,
        start: TimeSlot,
        reason: &'static str,
    },

    #[error("schedule does not match scenario: {0}")]
    ScheduleMismatch(String),

    #[error("scenario is invalid: {0}")]
    InvalidScenario(String),

    #[error("user {0} owns no shiftable load")]
    NoShiftableLoad(u32),

    #[error("total scheduled energy is zero")]
    ZeroEnergy,

    #[error("profile has no nonzero slot")]
    AllZeroProfile,

    #[error("joint action space of {size} outcomes exceeds the cap of {cap}")]
    CapExceeded { size: u128, cap: u128 },

    #[error("max_rounds must be at least 1")]
    ZeroRounds,

    #[error("equilibrium list is empty")]
    NoEquilibria,

    #[error("equilibria in cost group {cost} have different PARs ({first} vs {second})")]
    ParMismatch {
        cost: String,
        first: String,
        second: String,
    },

    #[error("matrix game precondition violated: {0}")]
    MatrixGame(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("arithmetic overflow in exact cost evaluation")]
    Overflow,

    #[error("cannot parse `{0}` as a rational number")]
    ParseRational(String),

    #[error("scenario file: {0}")]
    ScenarioFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
