use crate::error::{Error, Result};
use crate::model::{Billing, JointSchedule, Load, LoadKind, Owner, PricingFunction, Scenario, TimeSlot};
use crate::numeric::{frac, q};

use super::rng::{shuffle, stream, uniform_index};

/// A generated scenario together with a schedule whose aggregate is flat.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatScenario {
    pub scenario: Scenario,
    pub witness: JointSchedule,
}

/// Most segments a single lane is cut into.
const MAX_SEGMENTS: usize = 4;

/// Builds a scenario whose loads tile a flat profile.
///
/// The profile is stacked from horizontal lanes, each of constant rate
/// (0.5 to 2.5 kWh per slot) covering the whole day. Every lane is cut at
/// random points into 1 to 4 contiguous, possibly wrapping, segments, and
/// every segment becomes a shiftable load with a full-day window. Loads are
/// shuffled and dealt round-robin, so each user receives `loads_per_user`.
/// Placing each load at its original segment start gives PAR exactly 1.
pub fn generate_flat_scenario(users: u32, loads_per_user: u32, horizon: u32, seed: u64) -> Result<FlatScenario> {
    let n = users as usize * loads_per_user as usize;
    if n == 0 || horizon == 0 {
        return Err(Error::InvalidParameter(
            "users, loads per user and horizon must all be positive".into(),
        ));
    }
    let h = horizon as usize;
    let mut g = stream(seed);

    // (rate in half-kWh, start, duration)
    let mut blocks: Vec<(i128, u32, u32)> = Vec::with_capacity(n);
    while blocks.len() < n {
        let cap = MAX_SEGMENTS.min(n - blocks.len()).min(h);
        let m = 1 + uniform_index(&mut g, cap);
        let rate = 1 + uniform_index(&mut g, 5) as i128;
        let offset = uniform_index(&mut g, h);
        let mut cuts: Vec<usize> = (1..h).collect();
        shuffle(&mut g, &mut cuts);
        let mut cuts = cuts[..m - 1].to_vec();
        cuts.push(0);
        cuts.push(h);
        cuts.sort_unstable();
        for w in cuts.windows(2) {
            let start = (w[0] + offset) % h + 1;
            blocks.push((rate, start as u32, (w[1] - w[0]) as u32));
        }
    }
    shuffle(&mut g, &mut blocks);

    let uw = users.to_string().len();
    let lw = loads_per_user.to_string().len();
    let mut loads = Vec::with_capacity(n);
    let mut witness = JointSchedule::new();
    for (i, (rate, start, duration)) in blocks.into_iter().enumerate() {
        let user = (i % users as usize) as u32 + 1;
        let idx = i / users as usize + 1;
        let id = format!("u{user:0uw$}_l{idx:0lw$}");
        witness.set(id.clone(), TimeSlot(start));
        loads.push(Load {
            id,
            owner: Owner::User(user),
            rate: frac(rate, 2),
            duration,
            window: (TimeSlot(1), TimeSlot(horizon)),
            kind: LoadKind::Shiftable,
        });
    }
    loads.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(FlatScenario {
        scenario: Scenario {
            horizon,
            users,
            loads,
            pricing: PricingFunction::quadratic(q(1)),
            billing: Billing::DailyProportional,
            wrap_allowed: true,
        },
        witness,
    })
}
