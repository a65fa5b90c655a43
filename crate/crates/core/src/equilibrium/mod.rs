//! Pure-strategy equilibria: exhaustive enumeration over the joint start
//! space, cost grouping, explicit two-player matrix games and payoff hulls.

mod hull;
mod matrix;

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{NashMode, DEFAULT_USER_CAP};
use crate::engine::{advance, Engine};
use crate::error::{Error, Result};
use crate::model::{JointSchedule, Scenario};
use crate::numeric::{format_fixed, round_half_away, Money, Q};

pub use hull::{convex_hull, hull_and_folk_region, polygon_contains, HullReport, Point};
pub use matrix::{
    augment_with_valuations, build_matrix_game, maximin_values, pure_ne_cells, MatrixGame, Orientation,
};

pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

/// Outcomes per independently evaluated chunk of the joint space.
const CHUNK: u128 = 4096;

pub fn enumerate_ne(s: &Scenario, mode: NashMode) -> Result<Vec<JointSchedule>> {
    enumerate_ne_with_cap(s, mode, DEFAULT_ENUMERATION_CAP)
}

/// Every joint schedule passing [`crate::dynamics::is_nash`] in `mode`, in
/// canonical lexicographic order of `(load id, start)`.
///
/// The space is split into contiguous chunks evaluated on the rayon pool;
/// chunk results are concatenated in order, so the output does not depend
/// on the number of workers.
pub fn enumerate_ne_with_cap(s: &Scenario, mode: NashMode, cap: u128) -> Result<Vec<JointSchedule>> {
    let engine = Engine::new(s)?;
    let size = engine.joint_space();
    if size > cap {
        return Err(Error::CapExceeded { size, cap });
    }
    let chunks: Vec<u128> = (0..size.div_ceil(CHUNK)).collect();
    let found = chunks
        .into_par_iter()
        .map(|c| scan_chunk(&engine, mode, c * CHUNK, ((c + 1) * CHUNK).min(size)))
        .collect::<Result<Vec<_>>>()?;
    Ok(found.into_iter().flatten().map(|st| engine.schedule_of(&st)).collect())
}

/// Single-threaded reference enumeration.
pub fn enumerate_ne_sequential(s: &Scenario, mode: NashMode, cap: u128) -> Result<Vec<JointSchedule>> {
    let engine = Engine::new(s)?;
    let size = engine.joint_space();
    if size > cap {
        return Err(Error::CapExceeded { size, cap });
    }
    Ok(scan_chunk(&engine, mode, 0, size)?
        .into_iter()
        .map(|st| engine.schedule_of(&st))
        .collect())
}

fn digits_of(engine: &Engine, mut index: u128) -> Vec<usize> {
    let loads = engine.loads();
    let mut digits = vec![0usize; loads.len()];
    for i in (0..loads.len()).rev() {
        let radix = loads[i].starts.len() as u128;
        digits[i] = (index % radix) as usize;
        index /= radix;
    }
    digits
}

fn scan_chunk(engine: &Engine, mode: NashMode, from: u128, to: u128) -> Result<Vec<crate::engine::State>> {
    let mut out = Vec::new();
    if from >= to {
        return Ok(out);
    }
    let mut digits = digits_of(engine, from);
    for _ in from..to {
        let st = engine.state_from_digits(&digits);
        let nash = match mode {
            NashMode::PerLoad => engine.is_nash_per_load(&st),
            NashMode::PerUserExact => engine.is_nash_per_user(&st, DEFAULT_USER_CAP)?,
        };
        if nash {
            out.push(st);
        }
        advance(&mut digits, |i| engine.loads()[i].starts.len());
    }
    Ok(out)
}

/// One group of equilibria sharing a total cost at 0.01¢ precision.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumRow {
    pub ne_count: usize,
    /// Group cost rounded to 0.01¢.
    pub total_cost: Money,
    /// Exact PAR of the first member.
    #[serde(serialize_with = "serialize_ratio")]
    pub par: Q,
    pub convergence_pct: Option<f64>,
    pub members: Vec<JointSchedule>,
}

fn serialize_ratio<S: serde::Serializer>(v: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&crate::numeric::format_rational(v))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumTable {
    /// Sorted by ascending total cost.
    pub rows: Vec<EquilibriumRow>,
}

impl EquilibriumTable {
    pub fn total_equilibria(&self) -> usize {
        self.rows.iter().map(|r| r.ne_count).sum()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.ne_count).collect()
    }

    /// Index of the row whose rounded cost equals `cost`.
    pub fn row_for_cost(&self, cost: &Money) -> Option<usize> {
        let key = cost.rounded();
        self.rows.iter().position(|r| r.total_cost.0 == key)
    }

    /// Writes `ne_count,total_cost_cents,convergence_pct,par`; the percentage
    /// column is empty when no study was attached.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = crate::report::csv_writer(out);
        w.write_record(["ne_count", "total_cost_cents", "convergence_pct", "par"])?;
        for r in &self.rows {
            w.write_record([
                r.ne_count.to_string(),
                r.total_cost.to_string(),
                r.convergence_pct.map(|p| format!("{p:.2}")).unwrap_or_default(),
                format_fixed(&r.par, 2),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Groups equilibria by total cost rounded to 0.01¢ and reports each group's PAR.
pub fn group_equilibria(s: &Scenario, nes: &[JointSchedule]) -> Result<EquilibriumTable> {
    if nes.is_empty() {
        return Err(Error::NoEquilibria);
    }
    let engine = Engine::new(s)?;
    let mut groups: BTreeMap<Q, EquilibriumRow> = BTreeMap::new();
    for j in nes {
        let st = engine.state_from_schedule(j)?;
        let cost = engine.total_cost(&st);
        let key = round_half_away(&cost.0, 2);
        let par = engine.par(&st)?;
        match groups.get_mut(&key) {
            Some(row) => {
                if format_fixed(&row.par, 2) != format_fixed(&par, 2) {
                    return Err(Error::ParMismatch {
                        cost: format_fixed(&key, 2),
                        first: format_fixed(&row.par, 2),
                        second: format_fixed(&par, 2),
                    });
                }
                row.ne_count += 1;
                row.members.push(j.clone());
            }
            None => {
                groups.insert(
                    key,
                    EquilibriumRow {
                        ne_count: 1,
                        total_cost: Money(key),
                        par,
                        convergence_pct: None,
                        members: vec![j.clone()],
                    },
                );
            }
        }
    }
    Ok(EquilibriumTable { rows: groups.into_values().collect() })
}
