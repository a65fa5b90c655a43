//! Reference implementations of profile expansion, costs, bills and PAR.
//!
//! Everything here works directly on rationals and is written for clarity;
//! the integer engine in [`crate::engine`] is the fast path and is
//! cross-checked against these functions in tests.

use num_traits::{Signed, Zero};

use super::{Load, Owner, PricingFunction, Scenario, TimeSlot};
use crate::error::{Error, Result};
use crate::model::JointSchedule;
use crate::numeric::{to_f64, Money, Q};

/// Aggregate energy per slot (kWh), index 0 is slot 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LoadProfile {
    pub energy: Vec<Q>,
}

impl LoadProfile {
    pub fn zeros(horizon: u32) -> Self {
        LoadProfile { energy: vec![Q::zero(); horizon as usize] }
    }

    pub fn from_values(values: Vec<Q>) -> Self {
        LoadProfile { energy: values }
    }

    pub fn total(&self) -> Q {
        self.energy.iter().sum()
    }

    pub fn peak(&self) -> Q {
        self.energy.iter().copied().max().unwrap_or_else(Q::zero)
    }

    pub fn is_flat(&self) -> bool {
        self.energy.windows(2).all(|w| w[0] == w[1])
    }
}

/// Slots occupied by `load` when started at `start`, in running order.
pub fn occupied_slots(load: &Load, start: TimeSlot, horizon: u32, wrap: bool) -> Result<Vec<TimeSlot>> {
    let infeasible = |reason| Error::InfeasibleStart { load: load.id.clone(), start, reason };
    if start.0 < 1 || start.0 > horizon {
        return Err(infeasible("start outside the horizon"));
    }
    if load.duration > horizon {
        return Err(infeasible("duration exceeds the horizon"));
    }
    let (alpha, beta) = (load.window.0 .0, load.window.1 .0);
    if !wrap {
        if alpha > beta || start.0 < alpha {
            return Err(infeasible("start precedes the window"));
        }
        if start.0 + load.duration - 1 > beta {
            return Err(infeasible("run overflows the window and wrap is disabled"));
        }
    }
    Ok((0..load.duration)
        .map(|i| TimeSlot((start.0 - 1 + i) % horizon + 1))
        .collect())
}

/// Per-user, background and aggregate profiles of a joint schedule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expansion {
    /// Index `k - 1` holds user `k`'s profile.
    pub per_user: Vec<LoadProfile>,
    pub background: LoadProfile,
    pub aggregate: LoadProfile,
}

impl Expansion {
    pub fn user(&self, k: u32) -> &LoadProfile {
        &self.per_user[k as usize - 1]
    }

    pub fn owner(&self, owner: Owner) -> &LoadProfile {
        match owner {
            Owner::User(k) => self.user(k),
            Owner::Background => &self.background,
        }
    }
}

pub fn expand(s: &Scenario, j: &JointSchedule) -> Result<Expansion> {
    s.check_schedule(j)?;
    let mut per_user = vec![LoadProfile::zeros(s.horizon); s.users as usize];
    let mut background = LoadProfile::zeros(s.horizon);
    let mut aggregate = LoadProfile::zeros(s.horizon);
    for load in &s.loads {
        let start = s.start_of(load, j)?;
        let target = match load.owner {
            Owner::User(k) if k >= 1 && k <= s.users => &mut per_user[k as usize - 1],
            Owner::User(k) => {
                return Err(Error::InvalidScenario(format!("load `{}` has unknown owner {k}", load.id)))
            }
            Owner::Background => &mut background,
        };
        for slot in occupied_slots(load, start, s.horizon, s.wrap_allowed)? {
            target.energy[slot.offset()] += load.rate;
            aggregate.energy[slot.offset()] += load.rate;
        }
    }
    Ok(Expansion { per_user, background, aggregate })
}

/// `Σ_h C(X^h)`.
pub fn total_cost(profile: &LoadProfile, pricing: &PricingFunction) -> Money {
    Money(profile.energy.iter().map(|x| pricing.eval(x)).sum())
}

fn hourly_share(part: &LoadProfile, aggregate: &LoadProfile, pricing: &PricingFunction) -> Money {
    Money(
        part.energy
            .iter()
            .zip(&aggregate.energy)
            .filter(|(_, total)| total.is_positive())
            .map(|(x, total)| x / total * pricing.eval(total))
            .sum(),
    )
}

/// Per-slot proportional bill: `Σ_h (x_k^h / X^h)·C(X^h)`, empty slots contribute 0.
pub fn user_bill_hourly(s: &Scenario, j: &JointSchedule, k: u32) -> Result<Money> {
    let e = expand(s, j)?;
    check_user(s, k)?;
    Ok(hourly_share(e.user(k), &e.aggregate, &s.pricing))
}

/// Daily-energy proportional bill: `(E_k / E_total)·Σ_h C(X^h)`.
pub fn user_bill_daily(s: &Scenario, j: &JointSchedule, k: u32) -> Result<Money> {
    check_user(s, k)?;
    let e = expand(s, j)?;
    daily_share(s, &e, Owner::User(k))
}

fn daily_share(s: &Scenario, e: &Expansion, owner: Owner) -> Result<Money> {
    let total = s.total_energy();
    if total.is_zero() {
        return Err(Error::ZeroEnergy);
    }
    let cost = total_cost(&e.aggregate, &s.pricing);
    Ok(Money(s.owner_energy(owner) / total * cost.0))
}

/// Bill of user `k` under the scenario's configured billing scheme.
pub fn user_bill(s: &Scenario, j: &JointSchedule, k: u32) -> Result<Money> {
    match s.billing {
        super::Billing::HourlyProportional => user_bill_hourly(s, j, k),
        super::Billing::DailyProportional => user_bill_daily(s, j, k),
    }
}

/// Portion of the total cost attributed to background loads.
pub fn background_share(s: &Scenario, j: &JointSchedule) -> Result<Money> {
    let e = expand(s, j)?;
    match s.billing {
        super::Billing::HourlyProportional => Ok(hourly_share(&e.background, &e.aggregate, &s.pricing)),
        super::Billing::DailyProportional => daily_share(s, &e, Owner::Background),
    }
}

fn check_user(s: &Scenario, k: u32) -> Result<()> {
    if k == 0 || k > s.users {
        return Err(Error::InvalidParameter(format!("user {k} is not in 1..={}", s.users)));
    }
    Ok(())
}

/// Peak-to-average ratio with the mean taken over all slots.
pub fn par(profile: &LoadProfile) -> Result<Q> {
    let total = profile.total();
    if !total.is_positive() {
        return Err(Error::AllZeroProfile);
    }
    let h = Q::from_integer(profile.energy.len() as i128);
    Ok(profile.peak() * h / total)
}

pub fn par_f64(profile: &LoadProfile) -> Result<f64> {
    par(profile).map(|p| to_f64(&p))
}
