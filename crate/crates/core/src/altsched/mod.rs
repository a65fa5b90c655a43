//! Alternatives to free play: central placement of large loads before the
//! game, and repeated play by per-load learning agents.

mod qlearn;

use std::io::Write;

use num_traits::ToPrimitive;
use serde::Serialize;

use crate::engine::{advance, Engine};
use crate::equilibrium::DEFAULT_ENUMERATION_CAP;
use crate::error::{Error, Result};
use crate::model::{JointSchedule, LoadKind, Scenario, TimeSlot};
use crate::montecarlo::{run_study, StudyConfig, StudyResult};
use crate::numeric::{Money, Q};

pub use qlearn::{q_learning_repeated, EpisodeRecord, QLearnerState, QLearningConfig, QLearningResult};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CentralSchedule {
    /// Starts of the centrally placed loads only.
    pub schedule: JointSchedule,
    /// False when the greedy fallback was used.
    pub exact: bool,
}

/// Ids of shiftable loads with total energy at least `threshold` kWh.
/// `None` stands for an infinite threshold.
pub fn large_loads(s: &Scenario, threshold: Option<&Q>) -> Vec<String> {
    let Some(t) = threshold else { return Vec::new() };
    s.shiftable_loads()
        .into_iter()
        .filter(|l| l.energy() >= *t)
        .map(|l| l.id.clone())
        .collect()
}

/// Places the large loads to minimize total cost against the fixed demand,
/// ignoring the remaining shiftable loads.
///
/// Exhaustive when the large loads' joint space is at most `cap`; ties go
/// to the lexicographically first schedule. Otherwise loads are placed one
/// at a time in order of descending energy, each at its cheapest start
/// (lowest start on ties).
pub fn central_schedule_large_with_cap(s: &Scenario, threshold: Option<&Q>, cap: u128) -> Result<CentralSchedule> {
    if threshold.is_some_and(|t| *t < Q::from_integer(0)) {
        return Err(Error::InvalidParameter("threshold must be non-negative".into()));
    }
    let large = large_loads(s, threshold);
    let mut reduced = s.clone();
    reduced.loads.retain(|l| l.kind == LoadKind::Fixed || large.contains(&l.id));
    let engine = Engine::new(&reduced)?;
    let n = engine.loads().len();
    if n == 0 {
        return Ok(CentralSchedule { schedule: JointSchedule::new(), exact: true });
    }

    if engine.joint_space() <= cap {
        let mut digits = vec![0usize; n];
        let mut best: Option<(i128, Vec<usize>)> = None;
        loop {
            let cost = engine.total_cost_units(&engine.state_from_digits(&digits));
            if best.as_ref().is_none_or(|(c, _)| cost < *c) {
                best = Some((cost, digits.clone()));
            }
            if !advance(&mut digits, |i| engine.loads()[i].starts.len()) {
                break;
            }
        }
        let st = engine.state_from_digits(&best.expect("space is non-empty").1);
        return Ok(CentralSchedule { schedule: engine.schedule_of(&st), exact: true });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let ea = engine.loads()[a].rate * engine.loads()[a].duration as i64;
        let eb = engine.loads()[b].rate * engine.loads()[b].duration as i64;
        eb.cmp(&ea).then(a.cmp(&b))
    });
    let mut st = engine.empty_state();
    for l in order {
        let mut best: Option<(i128, u32)> = None;
        for &t in &engine.loads()[l].starts {
            engine.place(&mut st, l, t, 1);
            let cost = engine.total_cost_units(&st);
            engine.place(&mut st, l, t, -1);
            if best.is_none_or(|(c, _)| cost < c) {
                best = Some((cost, t));
            }
        }
        let t = best.expect("feasible starts are non-empty").1;
        engine.place(&mut st, l, t, 1);
        st.starts[l] = t;
    }
    Ok(CentralSchedule { schedule: engine.schedule_of(&st), exact: false })
}

pub fn central_schedule_large(s: &Scenario, threshold: Option<&Q>) -> Result<CentralSchedule> {
    central_schedule_large_with_cap(s, threshold, DEFAULT_ENUMERATION_CAP)
}

/// `s` with every load in `central` turned into a fixed load at its start.
pub fn fix_loads(s: &Scenario, central: &JointSchedule) -> Result<Scenario> {
    let mut out = s.clone();
    let h = s.horizon;
    for load in &mut out.loads {
        if let Some(t) = central.get(&load.id) {
            let end = (t.0 - 1 + load.duration - 1) % h + 1;
            load.window = (t, TimeSlot(end));
            load.kind = LoadKind::Fixed;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudySummary {
    pub converged_pct: f64,
    pub mean_par: f64,
    pub mean_total_cost: f64,
    pub best_total_cost: Option<Money>,
}

impl StudySummary {
    pub fn of(r: &StudyResult) -> StudySummary {
        let converged = r.converged();
        let weight = |x: f64, n: u64| x * n as f64;
        let mean_par = r.par_counts.iter().map(|(p, &c)| weight(p.to_f64().unwrap_or(f64::NAN), c)).sum::<f64>()
            / converged.max(1) as f64;
        let mean_total_cost =
            r.groups.iter().map(|g| weight(g.total_cost.to_f64(), g.runs)).sum::<f64>() / converged.max(1) as f64;
        StudySummary {
            converged_pct: 100.0 * converged as f64 / r.runs as f64,
            mean_par,
            mean_total_cost,
            best_total_cost: r.groups.first().map(|g| g.total_cost),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoPhaseResult {
    pub central: CentralSchedule,
    /// Central starts merged with the cheapest terminal group's representative.
    pub final_schedule: Option<JointSchedule>,
    pub two_phase: StudyResult,
    pub plain: StudyResult,
    pub two_phase_summary: StudySummary,
    pub plain_summary: StudySummary,
}

impl TwoPhaseResult {
    /// Paired summary CSV `metric,plain,two_phase`.
    pub fn write_comparison_csv<W: Write>(&self, out: W) -> Result<()> {
        let (p, t) = (&self.plain_summary, &self.two_phase_summary);
        let cost = |m: &Option<Money>| m.map(|c| c.to_string()).unwrap_or_default();
        let mut w = crate::report::csv_writer(out);
        w.write_record(["metric", "plain", "two_phase"])?;
        w.write_record(["converged_pct".into(), format!("{:.2}", p.converged_pct), format!("{:.2}", t.converged_pct)])?;
        w.write_record(["mean_par".into(), format!("{:.4}", p.mean_par), format!("{:.4}", t.mean_par)])?;
        w.write_record([
            "mean_total_cost_cents".into(),
            format!("{:.2}", p.mean_total_cost),
            format!("{:.2}", t.mean_total_cost),
        ])?;
        w.write_record(["best_total_cost_cents".into(), cost(&p.best_total_cost), cost(&t.best_total_cost)])?;
        w.write_record([
            "terminal_groups".into(),
            self.plain.groups.len().to_string(),
            self.two_phase.groups.len().to_string(),
        ])?;
        w.flush()?;
        Ok(())
    }
}

/// Central placement of large loads followed by a seeded study of the rest,
/// paired with the plain study under the same configuration.
pub fn two_phase_study(s: &Scenario, threshold: Option<&Q>, cfg: &StudyConfig) -> Result<TwoPhaseResult> {
    let central = central_schedule_large(s, threshold)?;
    let phase_two = fix_loads(s, &central.schedule)?;
    let two_phase = run_study(&phase_two, cfg)?;
    let plain = run_study(s, cfg)?;
    let final_schedule = two_phase.groups.first().map(|g| {
        let mut j = g.representative.clone();
        for (id, t) in central.schedule.iter() {
            j.set(id, t);
        }
        j
    });
    Ok(TwoPhaseResult {
        two_phase_summary: StudySummary::of(&two_phase),
        plain_summary: StudySummary::of(&plain),
        central,
        final_schedule,
        two_phase,
        plain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::NashMode;
    use crate::equilibrium::enumerate_ne;
    use crate::model::{expand, total_cost};
    use crate::numeric::{parse_rational, q};
    use crate::scenarios::{scenario_one, scenario_two};

    #[test]
    fn threshold_selects_loads() {
        let s = scenario_two();
        assert_eq!(large_loads(&s, Some(&q(4))), vec!["u2", "u5"]);
        assert_eq!(large_loads(&s, Some(&parse_rational("4.5").unwrap())), vec!["u5"]);
        assert!(large_loads(&s, Some(&q(11))).is_empty());
        assert!(large_loads(&s, None).is_empty());
        assert_eq!(large_loads(&s, Some(&q(0))).len(), 6);
    }

    #[test]
    fn single_large_load_matches_brute_force() {
        let s = scenario_two();
        let c = central_schedule_large(&s, Some(&parse_rational("4.5").unwrap())).unwrap();
        assert!(c.exact);
        // five 5 kWh slots against 2 kWh of background in slots 4-6
        let mut best = (i64::MAX, 0);
        for t in 1..=6u32 {
            let mut x = [0i64, 0, 0, 2, 2, 2];
            for i in 0..2 {
                x[((t - 1 + i) % 6) as usize] += 5;
            }
            let cost = x.iter().map(|v| v * v).sum::<i64>();
            if cost < best.0 {
                best = (cost, t);
            }
        }
        assert_eq!(c.schedule, JointSchedule::from_pairs([("u5", best.1)]));
    }

    #[test]
    fn zero_threshold_beats_every_equilibrium() {
        let s = scenario_one();
        let c = central_schedule_large(&s, Some(&q(0))).unwrap();
        let central_cost = total_cost(&expand(&s, &c.schedule).unwrap().aggregate, &s.pricing);
        for j in enumerate_ne(&s, NashMode::PerLoad).unwrap() {
            assert!(central_cost <= total_cost(&expand(&s, &j).unwrap().aggregate, &s.pricing));
        }
    }

    #[test]
    fn greedy_fallback_places_all_loads() {
        let s = scenario_two();
        let c = central_schedule_large_with_cap(&s, Some(&q(0)), 10).unwrap();
        assert!(!c.exact);
        assert_eq!(c.schedule.len(), 6);
        assert_eq!(c.schedule.get("u5"), Some(TimeSlot(1)));
    }

    #[test]
    fn infinite_threshold_is_plain_study() {
        let s = scenario_two();
        let cfg = StudyConfig::new(300, 77);
        let r = two_phase_study(&s, None, &cfg).unwrap();
        assert!(r.central.schedule.is_empty());
        assert_eq!(
            serde_json::to_string(&r.two_phase).unwrap(),
            serde_json::to_string(&r.plain).unwrap()
        );
    }

    #[test]
    fn zero_threshold_converges_at_once() {
        let s = scenario_one();
        let r = two_phase_study(&s, Some(&q(0)), &StudyConfig::new(50, 5)).unwrap();
        assert_eq!(r.two_phase.groups.len(), 1);
        assert_eq!(r.two_phase.rounds.max, 1);
        let central = expand(&s, &r.central.schedule).unwrap().aggregate;
        assert_eq!(r.two_phase.groups[0].par, crate::model::par(&central).unwrap());
        assert_eq!(r.final_schedule.as_ref(), Some(&r.central.schedule));
    }

    #[test]
    fn comparison_csv_layout() {
        let r = two_phase_study(&scenario_one(), None, &StudyConfig::new(20, 5)).unwrap();
        let mut buf = Vec::new();
        r.write_comparison_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("metric,plain,two_phase\nconverged_pct,100.00,100.00\n"));
        assert_eq!(text.lines().count(), 6);
    }
}
