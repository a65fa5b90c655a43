use std::collections::BTreeSet;
use std::fmt;

use num_traits::Signed;
use serde::Serialize;

use super::{LoadKind, Owner, Scenario};

/// One broken invariant. `load` is `None` for scenario-level problems.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub load: Option<String>,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.load {
            Some(id) => write!(f, "load `{id}`: {}", self.reason),
            None => f.write_str(&self.reason),
        }
    }
}

/// Returns every invariant violation; an empty list means the scenario is valid.
pub fn validate_scenario(s: &Scenario) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut scenario_level = |reason: String| out.push(Violation { load: None, reason });

    if s.horizon == 0 {
        scenario_level("horizon must be at least 1".into());
    }
    if s.users == 0 {
        scenario_level("at least one user is required".into());
    }
    for reason in s.pricing.violations() {
        scenario_level(reason);
    }

    let mut seen = BTreeSet::new();
    for load in &s.loads {
        let mut bad = |reason: String| {
            out.push(Violation { load: Some(load.id.clone()), reason });
        };
        if load.id.is_empty() {
            bad("load id must not be empty".into());
        }
        if !seen.insert(load.id.as_str()) {
            bad("duplicate load id".into());
        }
        match load.owner {
            Owner::User(k) if k == 0 || k > s.users => {
                bad(format!("owner {k} is not in 1..={}", s.users))
            }
            Owner::Background if load.kind == LoadKind::Shiftable => {
                bad("background loads must be fixed".into())
            }
            _ => {}
        }
        if !load.rate.is_positive() {
            bad("rate must be positive".into());
        }
        if load.duration == 0 {
            bad("duration must be at least 1".into());
        } else if load.duration > s.horizon {
            bad(format!("duration {} exceeds horizon {}", load.duration, s.horizon));
        }
        let (a, b) = (load.window.0 .0, load.window.1 .0);
        let in_range = |t: u32| t >= 1 && t <= s.horizon;
        if !in_range(a) || !in_range(b) {
            bad(format!("window [{a}, {b}] is not inside [1, {}]", s.horizon));
            continue;
        }
        if a > b && !s.wrap_allowed {
            bad(format!("window [{a}, {b}] is reversed and wrap is disabled"));
            continue;
        }
        match load.kind {
            LoadKind::Fixed => {
                let len = s.window_len(load);
                if len != load.duration {
                    bad(format!(
                        "fixed load window length {len} differs from duration {}",
                        load.duration
                    ));
                }
            }
            LoadKind::Shiftable => {
                if load.duration >= 1 && s.feasible_starts(load).is_empty() {
                    bad("no feasible start inside the window".into());
                }
            }
        }
    }
    out
}
