//! Best responses over discrete start slots and round-robin Cournot adjustment.

use std::io::Write;

use serde::Serialize;

use crate::engine::{Engine, RunOptions};
use crate::error::{Error, Result};
use crate::model::{JointSchedule, Scenario, TimeSlot};
use crate::numeric::Money;

pub use crate::engine::RunStatus;

/// Default cap on a user's joint own-action space for [`NashMode::PerUserExact`].
pub const DEFAULT_USER_CAP: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NashMode {
    /// No single load can be moved to strictly lower its owner's bill.
    PerLoad,
    /// No user gains from any combination of their own loads' starts.
    PerUserExact,
}

/// One accepted load move.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Update {
    pub round: u32,
    pub user: u32,
    pub load: String,
    pub old_start: TimeSlot,
    pub new_start: TimeSlot,
    /// Acting user's bill after the move.
    pub user_bill: Money,
    pub total_cost: Money,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunRecord {
    pub initial: JointSchedule,
    pub trajectory: Vec<Update>,
    pub terminal: JointSchedule,
    pub status: RunStatus,
    pub rounds: u32,
    /// Total cost after each best-response turn that changed the schedule.
    pub potential_trace: Vec<Money>,
}

impl RunRecord {
    /// Writes the trace CSV: `round,user,load,old_start,new_start,user_bill_cents,total_cost_cents`.
    pub fn write_trace<W: Write>(&self, out: W) -> Result<()> {
        let mut w = crate::report::csv_writer(out);
        w.write_record([
            "round",
            "user",
            "load",
            "old_start",
            "new_start",
            "user_bill_cents",
            "total_cost_cents",
        ])?;
        for u in &self.trajectory {
            w.write_record([
                u.round.to_string(),
                u.user.to_string(),
                u.load.clone(),
                u.old_start.to_string(),
                u.new_start.to_string(),
                u.user_bill.to_string(),
                u.total_cost.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Knobs for [`cournot_run_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DynamicsConfig {
    pub max_rounds: u32,
    pub sweep_cap: usize,
    pub cycle_cap: usize,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        let d = RunOptions::default();
        DynamicsConfig { max_rounds: d.max_rounds, sweep_cap: d.sweep_cap, cycle_cap: d.cycle_cap }
    }
}

/// User `k`'s best response to `j`, everyone else held fixed.
pub fn best_response(s: &Scenario, j: &JointSchedule, k: u32) -> Result<JointSchedule> {
    best_response_with(s, j, k, DynamicsConfig::default().sweep_cap)
}

pub fn best_response_with(s: &Scenario, j: &JointSchedule, k: u32, sweep_cap: usize) -> Result<JointSchedule> {
    let engine = Engine::new(s)?;
    if k == 0 || k > s.users || engine.user_loads(k).is_empty() {
        return Err(Error::NoShiftableLoad(k));
    }
    let mut st = engine.state_from_schedule(j)?;
    engine.best_response_user(&mut st, k, sweep_cap);
    Ok(engine.schedule_of(&st))
}

pub fn is_nash(s: &Scenario, j: &JointSchedule, mode: NashMode) -> Result<bool> {
    is_nash_with_cap(s, j, mode, DEFAULT_USER_CAP)
}

pub fn is_nash_with_cap(s: &Scenario, j: &JointSchedule, mode: NashMode, cap: u128) -> Result<bool> {
    let engine = Engine::new(s)?;
    let st = engine.state_from_schedule(j)?;
    match mode {
        NashMode::PerLoad => Ok(engine.is_nash_per_load(&st)),
        NashMode::PerUserExact => engine.is_nash_per_user(&st, cap),
    }
}

/// Ascending user order, the default turn order.
pub fn ascending_order(s: &Scenario) -> Vec<u32> {
    s.user_ids().collect()
}

fn check_order(s: &Scenario, order: &[u32]) -> Result<()> {
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    if sorted != ascending_order(s) {
        return Err(Error::InvalidParameter(format!(
            "turn order {order:?} is not a permutation of users 1..={}",
            s.users
        )));
    }
    Ok(())
}

pub fn cournot_run(s: &Scenario, initial: &JointSchedule, order: &[u32], max_rounds: u32) -> Result<RunRecord> {
    cournot_run_with(s, initial, order, &DynamicsConfig { max_rounds, ..DynamicsConfig::default() })
}

/// Round-robin best responses from `initial` until a full round changes
/// nothing, a `(schedule, next actor)` state repeats, or `max_rounds` elapse.
pub fn cournot_run_with(
    s: &Scenario,
    initial: &JointSchedule,
    order: &[u32],
    cfg: &DynamicsConfig,
) -> Result<RunRecord> {
    if cfg.max_rounds < 1 {
        return Err(Error::ZeroRounds);
    }
    check_order(s, order)?;
    let engine = Engine::new(s)?;
    let mut st = engine.state_from_schedule(initial)?;
    let opts = RunOptions {
        max_rounds: cfg.max_rounds,
        sweep_cap: cfg.sweep_cap,
        cycle_detection: true,
        cycle_cap: cfg.cycle_cap,
    };
    let mut trajectory = Vec::new();
    let mut potential_trace = Vec::new();
    let (status, rounds) = engine.run_dynamics(&mut st, order, &opts, |round, user, moves, state| {
        let bill = engine.user_bill(state, user).expect("energy is positive when a load moves");
        let cost = engine.total_cost(state);
        for &(l, old, new) in moves {
            trajectory.push(Update {
                round,
                user,
                load: engine.loads()[l].id.clone(),
                old_start: TimeSlot(old),
                new_start: TimeSlot(new),
                user_bill: bill,
                total_cost: cost,
            });
        }
        potential_trace.push(cost);
    });
    Ok(RunRecord {
        initial: initial.clone(),
        trajectory,
        terminal: engine.schedule_of(&st),
        status,
        rounds,
        potential_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{user_bill, Billing, Load, LoadKind, Owner, PricingFunction};
    use crate::numeric::q;
    use crate::scenarios::scenario_one;

    fn sched(a: u32, b: u32) -> JointSchedule {
        JointSchedule::from_pairs([("u1_shift", a), ("u2_shift", b)])
    }

    #[test]
    fn best_response_examples() {
        let s = scenario_one();
        let j = best_response(&s, &sched(2, 3), 1).unwrap();
        assert_eq!(j.get("u1_shift"), Some(TimeSlot(1)));
        let j = best_response(&s, &sched(3, 2), 2).unwrap();
        assert_eq!(j.get("u2_shift"), Some(TimeSlot(1)));
    }

    #[test]
    fn best_response_with_single_start_is_identity() {
        let mut s = scenario_one();
        s.loads[1].window = (TimeSlot(2), TimeSlot(2));
        let j = sched(2, 1);
        assert_eq!(best_response(&s, &j, 1).unwrap(), j);
    }

    #[test]
    fn best_response_requires_shiftable_load() {
        let mut s = scenario_one();
        s.loads[1].kind = LoadKind::Fixed;
        s.loads[1].window = (TimeSlot(3), TimeSlot(3));
        let j = JointSchedule::from_pairs([("u2_shift", 1)]);
        assert!(matches!(best_response(&s, &j, 1), Err(Error::NoShiftableLoad(1))));
    }

    #[test]
    fn cournot_trap_examples() {
        let s = scenario_one();
        let r = cournot_run(&s, &sched(3, 1), &[1, 2], 100).unwrap();
        assert_eq!(r.status, RunStatus::Converged);
        assert_eq!(r.terminal, sched(3, 1));
        assert_eq!(r.rounds, 1);
        assert!(r.trajectory.is_empty());

        let r = cournot_run(&s, &sched(2, 2), &[1, 2], 100).unwrap();
        assert_eq!(r.status, RunStatus::Converged);
        assert_eq!(r.terminal, sched(3, 1));
        let path: Vec<(String, u32, u32)> = r
            .trajectory
            .iter()
            .map(|u| (u.load.clone(), u.old_start.0, u.new_start.0))
            .collect();
        assert_eq!(path, vec![("u1_shift".into(), 2, 3), ("u2_shift".into(), 2, 1)]);
        assert_eq!(r.trajectory[0].user_bill.to_string(), "17.50");
        assert!(r.potential_trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn single_user_reaches_global_minimum() {
        let s = Scenario {
            horizon: 4,
            users: 1,
            loads: vec![
                Load {
                    id: "base".into(),
                    owner: Owner::User(1),
                    rate: q(3),
                    duration: 2,
                    window: (TimeSlot(1), TimeSlot(2)),
                    kind: LoadKind::Fixed,
                },
                Load {
                    id: "a".into(),
                    owner: Owner::User(1),
                    rate: q(2),
                    duration: 2,
                    window: (TimeSlot(1), TimeSlot(4)),
                    kind: LoadKind::Shiftable,
                },
            ],
            pricing: PricingFunction::quadratic(q(1)),
            billing: Billing::HourlyProportional,
            wrap_allowed: false,
        };
        let r = cournot_run(&s, &JointSchedule::from_pairs([("a", 1)]), &[1], 10).unwrap();
        assert_eq!(r.status, RunStatus::Converged);
        assert!(r.rounds <= 2);
        let best = (1..=3)
            .map(|t| user_bill(&s, &JointSchedule::from_pairs([("a", t)]), 1).unwrap())
            .min()
            .unwrap();
        assert_eq!(user_bill(&s, &r.terminal, 1).unwrap(), best);
    }

    #[test]
    fn cournot_rejects_bad_arguments() {
        let s = scenario_one();
        assert!(matches!(cournot_run(&s, &sched(1, 1), &[1, 2], 0), Err(Error::ZeroRounds)));
        assert!(cournot_run(&s, &sched(1, 1), &[1, 1], 5).is_err());
    }

    #[test]
    fn nash_examples() {
        let s = scenario_one();
        assert!(is_nash(&s, &sched(1, 3), NashMode::PerLoad).unwrap());
        assert!(is_nash(&s, &sched(3, 1), NashMode::PerUserExact).unwrap());
        assert!(!is_nash(&s, &sched(2, 2), NashMode::PerLoad).unwrap());

        let mut fixed = scenario_one();
        fixed.loads.retain(|l| l.kind == LoadKind::Fixed);
        assert!(is_nash(&fixed, &JointSchedule::new(), NashMode::PerLoad).unwrap());
        assert!(is_nash(&fixed, &JointSchedule::new(), NashMode::PerUserExact).unwrap());
    }

    #[test]
    fn per_user_mode_respects_cap() {
        let s = scenario_one();
        assert!(matches!(
            is_nash_with_cap(&s, &sched(1, 3), NashMode::PerUserExact, 2),
            Err(Error::CapExceeded { .. })
        ));
    }
}
