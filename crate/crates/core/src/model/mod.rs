//! Domain types for the day-ahead scheduling game.
//!
//! A [`Scenario`] describes a day of `horizon` slots, a set of users and
//! their appliance [`Load`]s, a convex [`PricingFunction`] and a
//! [`Billing`] scheme. The only decision a user makes for a shiftable load
//! is its start slot, so a [`JointSchedule`] maps every shiftable load id
//! to a [`TimeSlot`].

mod file;
mod pricing;
mod profile;
mod validate;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Q;

pub use file::{load_scenario, parse_scenario, scenario_to_toml, write_scenario};
pub use pricing::{PricingFunction, PricingKind};
pub use profile::{
    background_share, expand, occupied_slots, par, par_f64, total_cost, user_bill, user_bill_daily,
    user_bill_hourly, Expansion, LoadProfile,
};
pub use validate::{validate_scenario, Violation};

/// A 1-based slot index within the scenario horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TimeSlot(pub u32);

impl TimeSlot {
    pub fn index(self) -> u32 {
        self.0
    }

    /// 0-based position, for indexing profile vectors.
    pub fn offset(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for TimeSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Who pays for a load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Owner {
    User(u32),
    /// Unowned base demand; only fixed loads may be background.
    Background,
}

impl Owner {
    pub fn user(self) -> Option<u32> {
        match self {
            Owner::User(k) => Some(k),
            Owner::Background => None,
        }
    }
}

impl fmt::Display for Owner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Owner::User(k) => write!(f, "{k}"),
            Owner::Background => f.write_str("background"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoadKind {
    Fixed,
    Shiftable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Billing {
    /// Per-slot split of `C(X^h)` by each user's share of that slot's demand.
    #[serde(rename = "hourly")]
    HourlyProportional,
    /// Split of the whole day's cost by each user's share of daily energy.
    #[serde(rename = "daily")]
    DailyProportional,
}

impl fmt::Display for Billing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Billing::HourlyProportional => "hourly",
            Billing::DailyProportional => "daily",
        })
    }
}

impl std::str::FromStr for Billing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hourly" => Ok(Billing::HourlyProportional),
            "daily" => Ok(Billing::DailyProportional),
            other => Err(Error::InvalidParameter(format!(
                "billing scheme must be `hourly` or `daily`, got `{other}`"
            ))),
        }
    }
}

/// One appliance demand: `rate` kWh in each of `duration` consecutive slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Load {
    pub id: String,
    pub owner: Owner,
    pub rate: Q,
    pub duration: u32,
    /// Inclusive `[start, end]`; may be cyclic (`start > end`) when wrap is allowed.
    pub window: (TimeSlot, TimeSlot),
    pub kind: LoadKind,
}

impl Load {
    pub fn energy(&self) -> Q {
        self.rate * Q::from_integer(self.duration as i128)
    }

    pub fn is_shiftable(&self) -> bool {
        self.kind == LoadKind::Shiftable
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub horizon: u32,
    pub users: u32,
    pub loads: Vec<Load>,
    pub pricing: PricingFunction,
    pub billing: Billing,
    pub wrap_allowed: bool,
}

impl Scenario {
    pub fn load(&self, id: &str) -> Option<&Load> {
        self.loads.iter().find(|l| l.id == id)
    }

    /// Shiftable loads in canonical (id) order.
    pub fn shiftable_loads(&self) -> Vec<&Load> {
        let mut out: Vec<&Load> = self.loads.iter().filter(|l| l.is_shiftable()).collect();
        out.sort_by(|a, b| a.id.cmp(&b.id));
        out
    }

    pub fn user_ids(&self) -> impl Iterator<Item = u32> {
        1..=self.users
    }

    pub fn with_billing(mut self, billing: Billing) -> Self {
        self.billing = billing;
        self
    }

    /// Number of slots covered by the window, honouring cyclic windows.
    pub fn window_len(&self, load: &Load) -> u32 {
        let (a, b) = (load.window.0 .0, load.window.1 .0);
        if a <= b {
            b - a + 1
        } else {
            self.horizon - a + 1 + b
        }
    }

    /// Every start slot that keeps the load inside its window.
    ///
    /// With wrap enabled a full-day window admits all `horizon` starts and the
    /// run continues past the last slot into the first ones.
    pub fn feasible_starts(&self, load: &Load) -> Vec<TimeSlot> {
        let h = self.horizon;
        let (a, b) = (load.window.0 .0, load.window.1 .0);
        if h == 0 || a == 0 || b == 0 || a > h || b > h || load.duration == 0 {
            return Vec::new();
        }
        if a > b && !self.wrap_allowed {
            return Vec::new();
        }
        let len = self.window_len(load);
        if load.kind == LoadKind::Fixed {
            return if len == load.duration { vec![TimeSlot(a)] } else { Vec::new() };
        }
        if self.wrap_allowed && len == h {
            if load.duration > h {
                return Vec::new();
            }
            return (1..=h).map(TimeSlot).collect();
        }
        if load.duration > len {
            return Vec::new();
        }
        let mut starts: Vec<TimeSlot> = (0..=len - load.duration)
            .map(|off| TimeSlot((a - 1 + off) % h + 1))
            .collect();
        starts.sort();
        starts
    }

    /// Checks that `schedule` covers exactly the shiftable loads with feasible starts.
    pub fn check_schedule(&self, schedule: &JointSchedule) -> Result<()> {
        let shiftable = self.shiftable_loads();
        if schedule.len() != shiftable.len() {
            return Err(Error::ScheduleMismatch(format!(
                "schedule has {} entries, scenario has {} shiftable loads",
                schedule.len(),
                shiftable.len()
            )));
        }
        for load in shiftable {
            let start = schedule.get(&load.id).ok_or_else(|| {
                Error::ScheduleMismatch(format!("no start for shiftable load `{}`", load.id))
            })?;
            if !self.feasible_starts(load).contains(&start) {
                return Err(Error::InfeasibleStart {
                    load: load.id.clone(),
                    start,
                    reason: "outside the load's feasible starts",
                });
            }
        }
        Ok(())
    }

    /// Start slot of any load: forced for fixed loads, taken from `schedule` otherwise.
    pub fn start_of(&self, load: &Load, schedule: &JointSchedule) -> Result<TimeSlot> {
        match load.kind {
            LoadKind::Fixed => Ok(load.window.0),
            LoadKind::Shiftable => schedule.get(&load.id).ok_or_else(|| {
                Error::ScheduleMismatch(format!("no start for shiftable load `{}`", load.id))
            }),
        }
    }

    /// Daily energy of `owner` including fixed loads.
    pub fn owner_energy(&self, owner: Owner) -> Q {
        self.loads.iter().filter(|l| l.owner == owner).map(Load::energy).sum()
    }

    pub fn total_energy(&self) -> Q {
        self.loads.iter().map(Load::energy).sum()
    }
}

/// Chosen start slot of every shiftable load, keyed (and ordered) by load id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointSchedule {
    starts: BTreeMap<String, TimeSlot>,
}

impl JointSchedule {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, u32)>,
        S: Into<String>,
    {
        JointSchedule {
            starts: pairs.into_iter().map(|(id, s)| (id.into(), TimeSlot(s))).collect(),
        }
    }

    pub fn get(&self, id: &str) -> Option<TimeSlot> {
        self.starts.get(id).copied()
    }

    pub fn set(&mut self, id: impl Into<String>, start: TimeSlot) {
        self.starts.insert(id.into(), start);
    }

    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, TimeSlot)> {
        self.starts.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Start slots in canonical load-id order.
    pub fn starts(&self) -> Vec<u32> {
        self.starts.values().map(|s| s.0).collect()
    }
}

impl fmt::Display for JointSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, s) in self.starts.values().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{s}")?;
        }
        f.write_str(")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::q;

    fn load(kind: LoadKind, duration: u32, window: (u32, u32)) -> Load {
        Load {
            id: "l".into(),
            owner: Owner::User(1),
            rate: q(1),
            duration,
            window: (TimeSlot(window.0), TimeSlot(window.1)),
            kind,
        }
    }

    fn scenario(h: u32, wrap: bool, l: Load) -> Scenario {
        Scenario {
            horizon: h,
            users: 1,
            loads: vec![l],
            pricing: PricingFunction::quadratic(q(1)),
            billing: Billing::DailyProportional,
            wrap_allowed: wrap,
        }
    }

    #[test]
    fn feasible_starts_without_wrap() {
        let s = scenario(6, false, load(LoadKind::Shiftable, 3, (2, 6)));
        let starts: Vec<u32> = s.feasible_starts(&s.loads[0]).iter().map(|t| t.0).collect();
        assert_eq!(starts, vec![2, 3, 4]);
    }

    #[test]
    fn full_window_with_wrap_admits_every_start() {
        let s = scenario(6, true, load(LoadKind::Shiftable, 3, (1, 6)));
        assert_eq!(s.feasible_starts(&s.loads[0]).len(), 6);
    }

    #[test]
    fn cyclic_window_with_wrap() {
        let s = scenario(6, true, load(LoadKind::Shiftable, 2, (5, 2)));
        let starts: Vec<u32> = s.feasible_starts(&s.loads[0]).iter().map(|t| t.0).collect();
        assert_eq!(starts, vec![1, 5, 6]);
    }

    #[test]
    fn fixed_load_has_single_start() {
        let s = scenario(6, false, load(LoadKind::Fixed, 3, (4, 6)));
        assert_eq!(s.feasible_starts(&s.loads[0]), vec![TimeSlot(4)]);
        let bad = scenario(6, false, load(LoadKind::Fixed, 2, (4, 6)));
        assert!(bad.feasible_starts(&bad.loads[0]).is_empty());
    }

    #[test]
    fn schedule_display_is_canonical() {
        let j = JointSchedule::from_pairs([("b", 3), ("a", 1)]);
        assert_eq!(j.to_string(), "(1,3)");
    }
}
