//! Seeded convergence studies over random initial schedules.
//!
//! Every run owns an independent random stream (see [`rng`]), so a study's
//! result depends only on the scenario and the [`StudyConfig`], never on how
//! runs are spread over worker threads.

mod generator;
pub mod rng;

use std::collections::BTreeMap;
use std::io::Write;

use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{Engine, RunOptions, RunStatus};
use crate::equilibrium::EquilibriumTable;
use crate::error::{Error, Result};
use crate::model::{Billing, JointSchedule, Scenario};
use crate::numeric::{format_fixed, format_rational, frac, round_half_away, Money, Q};

pub use generator::{generate_flat_scenario, FlatScenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum InitDistribution {
    UniformFeasibleStart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OrderPolicy {
    Ascending,
    RandomPerRun,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StudyConfig {
    pub runs: u64,
    pub master_seed: u64,
    pub init_distribution: InitDistribution,
    pub order_policy: OrderPolicy,
    pub max_rounds: u32,
}

impl StudyConfig {
    pub fn new(runs: u64, master_seed: u64) -> Self {
        StudyConfig {
            runs,
            master_seed,
            init_distribution: InitDistribution::UniformFeasibleStart,
            order_policy: OrderPolicy::Ascending,
            max_rounds: RunOptions::default().max_rounds,
        }
    }
}

/// Converged runs sharing a terminal total cost (0.01¢) and PAR.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TerminalGroup {
    pub total_cost: Money,
    #[serde(serialize_with = "ratio_str")]
    pub par: Q,
    pub runs: u64,
    /// Terminal schedule of the lowest-numbered run in the group.
    pub representative: JointSchedule,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundStats {
    pub min: u32,
    pub max: u32,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyResult {
    pub runs: u64,
    /// Sorted by ascending cost, then PAR.
    pub groups: Vec<TerminalGroup>,
    /// Runs that did not converge, by status.
    pub unconverged: BTreeMap<RunStatus, u64>,
    /// Exact terminal PARs of converged runs with multiplicities.
    #[serde(serialize_with = "par_counts_str")]
    pub par_counts: BTreeMap<Q, u64>,
    pub rounds: RoundStats,
}

fn ratio_str<S: serde::Serializer>(v: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_rational(v))
}

fn par_counts_str<S: serde::Serializer>(m: &BTreeMap<Q, u64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeMap;
    let mut map = s.serialize_map(Some(m.len()))?;
    for (k, v) in m {
        map.serialize_entry(&format_rational(k), v)?;
    }
    map.end()
}

impl StudyResult {
    pub fn converged(&self) -> u64 {
        self.groups.iter().map(|g| g.runs).sum()
    }

    /// Percentage of all runs that ended in `group`.
    pub fn share(&self, group: &TerminalGroup) -> f64 {
        100.0 * group.runs as f64 / self.runs as f64
    }

    pub fn group_for_cost(&self, cost: &Money) -> Option<&TerminalGroup> {
        let key = cost.rounded();
        self.groups.iter().find(|g| g.total_cost.0 == key)
    }

    /// Fraction of converged runs whose terminal PAR is at most `bound`.
    pub fn fraction_par_at_most(&self, bound: &Q) -> f64 {
        let within: u64 = self.par_counts.range(..=*bound).map(|(_, c)| c).sum();
        within as f64 / self.converged().max(1) as f64
    }

    /// Byte-stable JSON form.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Table CSV `ne_count,total_cost_cents,convergence_pct,par`. With an
    /// enumerated table, its rows come first (with their equilibrium counts)
    /// and any terminal group missing from it follows with an empty count.
    pub fn write_table_csv<W: Write>(&self, out: W, table: Option<&EquilibriumTable>) -> Result<()> {
        let mut w = crate::report::csv_writer(out);
        w.write_record(["ne_count", "total_cost_cents", "convergence_pct", "par"])?;
        let mut listed = vec![false; self.groups.len()];
        if let Some(t) = table {
            for row in &t.rows {
                let mut hits = 0u64;
                for (i, g) in self.groups.iter().enumerate() {
                    if g.total_cost == row.total_cost {
                        hits += g.runs;
                        listed[i] = true;
                    }
                }
                w.write_record([
                    row.ne_count.to_string(),
                    row.total_cost.to_string(),
                    format!("{:.2}", 100.0 * hits as f64 / self.runs as f64),
                    format_fixed(&row.par, 2),
                ])?;
            }
        }
        for (g, _) in self.groups.iter().zip(&listed).filter(|(_, &l)| !l) {
            w.write_record([
                String::new(),
                g.total_cost.to_string(),
                format!("{:.2}", self.share(g)),
                format_fixed(&g.par, 2),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Histogram CSV `bin_low,bin_high,count`.
    pub fn write_histogram_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = crate::report::csv_writer(out);
        w.write_record(["bin_low", "bin_high", "count"])?;
        for b in par_histogram(self)? {
            w.write_record([format_fixed(&b.low, 2), format_fixed(&b.high, 2), b.count.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Study rows joined with an enumerated table: sets `convergence_pct` on each row.
pub fn attach_convergence(table: &EquilibriumTable, result: &StudyResult) -> EquilibriumTable {
    let mut out = table.clone();
    for row in &mut out.rows {
        let hits: u64 = result
            .groups
            .iter()
            .filter(|g| g.total_cost == row.total_cost)
            .map(|g| g.runs)
            .sum();
        row.convergence_pct = Some(100.0 * hits as f64 / result.runs as f64);
    }
    out
}

struct RunOutcome {
    status: RunStatus,
    rounds: u32,
    cost: Q,
    par: Q,
    starts: Vec<u32>,
}

/// Draws run `index`'s initial starts and turn order.
pub fn initial_state(engine: &Engine, cfg: &StudyConfig, index: u64) -> (Vec<u32>, Vec<u32>) {
    let mut g = rng::run_stream(cfg.master_seed, index);
    let starts = engine
        .loads()
        .iter()
        .map(|l| match cfg.init_distribution {
            InitDistribution::UniformFeasibleStart => l.starts[rng::uniform_index(&mut g, l.starts.len())],
        })
        .collect();
    let mut order: Vec<u32> = (1..=engine.users).collect();
    if cfg.order_policy == OrderPolicy::RandomPerRun {
        rng::shuffle(&mut g, &mut order);
    }
    (starts, order)
}

fn one_run(engine: &Engine, cfg: &StudyConfig, opts: &RunOptions, index: u64) -> Result<RunOutcome> {
    let (starts, order) = initial_state(engine, cfg, index);
    let mut st = engine.state_from_starts(&starts);
    let (status, rounds) = engine.run_dynamics(&mut st, &order, opts, |_, _, _, _| {});
    Ok(RunOutcome {
        status,
        rounds,
        cost: engine.total_cost(&st).0,
        par: engine.par(&st)?,
        starts: st.starts,
    })
}

/// Runs `cfg.runs` independent Cournot adjustments from random starts.
///
/// Cycle detection is only enabled for hourly billing; the daily scheme is
/// an exact potential game and cannot cycle.
pub fn run_study(s: &Scenario, cfg: &StudyConfig) -> Result<StudyResult> {
    if cfg.runs < 1 {
        return Err(Error::InvalidParameter("runs must be at least 1".into()));
    }
    if cfg.max_rounds < 1 {
        return Err(Error::ZeroRounds);
    }
    let engine = Engine::new(s)?;
    let opts = RunOptions {
        max_rounds: cfg.max_rounds,
        cycle_detection: s.billing == Billing::HourlyProportional,
        ..RunOptions::default()
    };
    let outcomes = (0..cfg.runs)
        .into_par_iter()
        .map(|i| one_run(&engine, cfg, &opts, i))
        .collect::<Result<Vec<_>>>()?;

    let mut groups: BTreeMap<(Q, Q), TerminalGroup> = BTreeMap::new();
    let mut unconverged = BTreeMap::new();
    let mut par_counts = BTreeMap::new();
    let (mut min, mut max, mut sum) = (u32::MAX, 0u32, 0u64);
    for o in outcomes {
        min = min.min(o.rounds);
        max = max.max(o.rounds);
        sum += o.rounds as u64;
        if o.status != RunStatus::Converged {
            *unconverged.entry(o.status).or_insert(0) += 1;
            continue;
        }
        *par_counts.entry(o.par).or_insert(0) += 1;
        let cost = round_half_away(&o.cost, 2);
        groups
            .entry((cost, o.par))
            .or_insert_with(|| TerminalGroup {
                total_cost: Money(cost),
                par: o.par,
                runs: 0,
                representative: engine.schedule_of(&engine.state_from_starts(&o.starts)),
            })
            .runs += 1;
    }
    Ok(StudyResult {
        runs: cfg.runs,
        groups: groups.into_values().collect(),
        unconverged,
        par_counts,
        rounds: RoundStats { min, max, mean: sum as f64 / cfg.runs as f64 },
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HistogramBin {
    #[serde(serialize_with = "ratio_str")]
    pub low: Q,
    #[serde(serialize_with = "ratio_str")]
    pub high: Q,
    pub count: u64,
}

/// Terminal PARs of converged runs in 0.01-wide bins from 1.00 up to the
/// bin holding the largest observed value. Bins are closed below.
pub fn par_histogram(result: &StudyResult) -> Result<Vec<HistogramBin>> {
    let Some(max) = result.par_counts.keys().next_back() else {
        return Err(Error::InvalidParameter("study has no converged runs".into()));
    };
    let width = frac(1, 100);
    let bin_of = |p: &Q| ((p - Q::from_integer(1)) / width).floor().to_usize().unwrap_or(0);
    let mut bins: Vec<HistogramBin> = (0..=bin_of(max))
        .map(|i| {
            let low = Q::from_integer(1) + width * Q::from_integer(i as i128);
            HistogramBin { low, high: low + width, count: 0 }
        })
        .collect();
    for (p, c) in &result.par_counts {
        bins[bin_of(p)].count += c;
    }
    Ok(bins)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::scenario_one;

    #[test]
    fn scenario_one_study_partitions_runs() {
        let r = run_study(&scenario_one(), &StudyConfig::new(500, 42)).unwrap();
        assert_eq!(r.converged(), 500);
        assert!(r.unconverged.is_empty());
        let costs: Vec<String> = r.groups.iter().map(|g| g.total_cost.to_string()).collect();
        assert_eq!(costs, vec!["40.25", "41.25"]);
        let total: f64 = r.groups.iter().map(|g| r.share(g)).sum();
        assert!((total - 100.0).abs() < 1e-9);
    }

    #[test]
    fn study_is_reproducible() {
        let cfg = StudyConfig { order_policy: OrderPolicy::RandomPerRun, ..StudyConfig::new(200, 9) };
        let a = run_study(&scenario_one(), &cfg).unwrap();
        let b = run_study(&scenario_one(), &cfg).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }

    #[test]
    fn histogram_bins_cover_converged_runs() {
        let r = run_study(&scenario_one(), &StudyConfig::new(100, 1)).unwrap();
        let bins = par_histogram(&r).unwrap();
        assert_eq!(bins.iter().map(|b| b.count).sum::<u64>(), r.converged());
        assert_eq!(format_fixed(&bins[0].low, 2), "1.00");
        assert_eq!(bins.iter().filter(|b| b.count > 0).count(), 1);
        assert_eq!(format_fixed(&bins.last().unwrap().low, 2), "1.42");
    }

    #[test]
    fn histogram_of_empty_study_fails() {
        let r = StudyResult {
            runs: 1,
            groups: vec![],
            unconverged: BTreeMap::from([(RunStatus::MaxRounds, 1)]),
            par_counts: BTreeMap::new(),
            rounds: RoundStats { min: 1, max: 1, mean: 1.0 },
        };
        assert!(par_histogram(&r).is_err());
    }

    #[test]
    fn zero_runs_rejected() {
        assert!(run_study(&scenario_one(), &StudyConfig::new(0, 1)).is_err());
    }
}
