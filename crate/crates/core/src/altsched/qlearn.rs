use std::io::Write;

use num_traits::ToPrimitive;
use serde::Serialize;

use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::model::{JointSchedule, Scenario};
use crate::montecarlo::rng::{stream, uniform_index, unit_f64};
use crate::numeric::{Money, Q};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QLearningConfig {
    pub episodes: u32,
    /// Initial exploration rate.
    pub epsilon: f64,
    /// Multiplier applied to ε after every episode.
    pub epsilon_decay: f64,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for QLearningConfig {
    fn default() -> Self {
        QLearningConfig { episodes: 2000, epsilon: 0.2, epsilon_decay: 0.998, learning_rate: 0.1, seed: 0 }
    }
}

impl QLearningConfig {
    fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.episodes < 1 {
            return bad("episodes must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad("epsilon must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.epsilon_decay) {
            return bad("epsilon decay must lie in [0, 1]");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning rate must lie in (0, 1]");
        }
        Ok(())
    }
}

/// Action values of one load's agent, in cents (negated bill shares).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QLearnerState {
    pub load: String,
    pub starts: Vec<u32>,
    pub values: Vec<f64>,
    /// Times each start was played.
    pub plays: Vec<u64>,
}

impl QLearnerState {
    /// Index of the highest value, lowest index on ties.
    pub fn greedy(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeRecord {
    pub episode: u32,
    pub total_cost: Money,
    pub par: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QLearningResult {
    pub trace: Vec<EpisodeRecord>,
    pub agents: Vec<QLearnerState>,
    /// Every agent's greedy start after the last episode.
    pub final_schedule: JointSchedule,
    pub final_total_cost: Money,
}

impl QLearningResult {
    /// Learning trace CSV `episode,total_cost_cents,par`.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = crate::report::csv_writer(out);
        w.write_record(["episode", "total_cost_cents", "par"])?;
        for r in &self.trace {
            w.write_record([r.episode.to_string(), r.total_cost.to_string(), format!("{:.4}", r.par)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Repeated play by one stateless ε-greedy learner per shiftable load.
///
/// Each episode every agent picks a start, all bills are settled, and each
/// agent moves the value of its chosen start towards the negated share of
/// its owner's bill, split by energy across the owner's loads.
pub fn q_learning_repeated(s: &Scenario, cfg: &QLearningConfig) -> Result<QLearningResult> {
    cfg.check()?;
    let engine = Engine::new(s)?;
    let loads = engine.loads();
    let mut agents: Vec<QLearnerState> = loads
        .iter()
        .map(|l| QLearnerState {
            load: l.id.clone(),
            starts: l.starts.clone(),
            values: vec![0.0; l.starts.len()],
            plays: vec![0; l.starts.len()],
        })
        .collect();
    // fraction of the owner's bill attributed to each load
    let weights: Vec<f64> = loads
        .iter()
        .map(|l| {
            let owner = s.owner_energy(crate::model::Owner::User(l.owner));
            let own = Q::new(l.rate as i128 * l.duration as i128, engine.energy_scale());
            (own / owner).to_f64().unwrap_or(0.0)
        })
        .collect();

    let mut g = stream(cfg.seed);
    let mut epsilon = cfg.epsilon;
    let mut trace = Vec::with_capacity(cfg.episodes as usize);
    let mut choice = vec![0usize; agents.len()];
    for episode in 1..=cfg.episodes {
        for (a, c) in agents.iter().zip(choice.iter_mut()) {
            *c = if unit_f64(&mut g) < epsilon { uniform_index(&mut g, a.starts.len()) } else { a.greedy() };
        }
        let starts: Vec<u32> = agents.iter().zip(&choice).map(|(a, &c)| a.starts[c]).collect();
        let st = engine.state_from_starts(&starts);
        let bills: Vec<f64> = (1..=engine.users)
            .map(|k| engine.user_bill(&st, k).map(|m| m.to_f64()).unwrap_or(0.0))
            .collect();
        for (i, a) in agents.iter_mut().enumerate() {
            let reward = -bills[loads[i].owner as usize - 1] * weights[i];
            let c = choice[i];
            a.values[c] += cfg.learning_rate * (reward - a.values[c]);
            a.plays[c] += 1;
        }
        trace.push(EpisodeRecord {
            episode,
            total_cost: engine.total_cost(&st),
            par: engine.par(&st)?.to_f64().unwrap_or(f64::NAN),
        });
        epsilon *= cfg.epsilon_decay;
    }

    let starts: Vec<u32> = agents.iter().map(|a| a.starts[a.greedy()]).collect();
    let st = engine.state_from_starts(&starts);
    Ok(QLearningResult {
        trace,
        final_schedule: engine.schedule_of(&st),
        final_total_cost: engine.total_cost(&st),
        agents,
    })
}
