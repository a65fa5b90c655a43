//! Integer evaluation engine.
//!
//! A scenario is compiled once: energies are rescaled to integer units of
//! `1/scale` kWh (the LCM of all rate denominators) and the pricing
//! polynomial to integer coefficients over a common denominator, so every
//! cost, bill and best-response comparison is exact integer arithmetic.
//!
//! For the hourly scheme `x·C(X)/X = x·P(X)` with `P(X) = C(X)/X`, which is
//! again a polynomial because `C(0) = 0`; hence hourly bills need no division
//! either.

use std::collections::HashSet;

use num_integer::Integer;
use num_traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::model::{
    validate_scenario, Billing, JointSchedule, LoadKind, LoadProfile, Owner, Scenario, TimeSlot,
};
use crate::numeric::{Money, Q};

#[derive(Debug, Clone)]
pub struct EngineLoad {
    pub id: String,
    /// 1-based user index.
    pub owner: u32,
    pub rate: i64,
    pub duration: usize,
    /// Feasible start slots, ascending.
    pub starts: Vec<u32>,
}

/// Compiled form of a [`Scenario`].
#[derive(Debug, Clone)]
pub struct Engine {
    pub horizon: usize,
    pub billing: Billing,
    pub users: u32,
    scale: i128,
    cost_denom: i128,
    /// `C(u/scale)·cost_denom = Σ coeffs[i]·uⁱ`.
    coeffs: Vec<i128>,
    loads: Vec<EngineLoad>,
    /// Fixed demand (including background) per slot.
    base: Vec<i64>,
    background: Vec<i64>,
    user_base: Vec<Vec<i64>>,
    user_loads: Vec<Vec<usize>>,
    user_energy: Vec<i64>,
    background_energy: i64,
    total_energy: i64,
}

/// Mutable joint state: start of every shiftable load plus the profiles it induces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct State {
    pub starts: Vec<u32>,
    agg: Vec<i64>,
    user: Vec<Vec<i64>>,
}

impl State {
    pub fn aggregate_units(&self) -> &[i64] {
        &self.agg
    }
}

fn lcm_all(values: impl Iterator<Item = i128>) -> i128 {
    values.fold(1, |acc, v| acc.lcm(&v))
}

impl Engine {
    pub fn new(s: &Scenario) -> Result<Engine> {
        let violations = validate_scenario(s);
        if let Some(v) = violations.first() {
            return Err(Error::InvalidScenario(format!(
                "{v}{}",
                if violations.len() > 1 {
                    format!(" (and {} more)", violations.len() - 1)
                } else {
                    String::new()
                }
            )));
        }
        let h = s.horizon as usize;
        let scale = lcm_all(s.loads.iter().map(|l| *l.rate.denom()));
        let units = |r: &Q| -> Result<i64> {
            (r * Q::from_integer(scale))
                .to_integer()
                .to_i64()
                .ok_or(Error::Overflow)
        };

        let power = s.pricing.power_coefficients();
        let coeff_lcm = lcm_all(power.iter().map(|c| *c.denom()));
        let degree = s.pricing.degree() as u32;
        let cost_denom = scale
            .checked_pow(degree)
            .and_then(|p| p.checked_mul(coeff_lcm))
            .ok_or(Error::Overflow)?;
        let coeffs = power
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let k = c * Q::from_integer(cost_denom) / Q::from_integer(scale.pow(i as u32));
                debug_assert!(k.is_integer());
                k.to_integer()
            })
            .collect::<Vec<_>>();

        let mut base = vec![0i64; h];
        let mut background = vec![0i64; h];
        let mut user_base = vec![vec![0i64; h]; s.users as usize];
        let mut user_energy = vec![0i64; s.users as usize];
        let mut background_energy = 0i64;
        let mut loads = Vec::new();
        for load in &s.loads {
            let rate = units(&load.rate)?;
            let energy = rate * load.duration as i64;
            match load.owner {
                Owner::User(k) => user_energy[k as usize - 1] += energy,
                Owner::Background => background_energy += energy,
            }
            if load.kind == LoadKind::Fixed {
                let start = load.window.0 .0 as usize - 1;
                for i in 0..load.duration as usize {
                    let slot = (start + i) % h;
                    base[slot] += rate;
                    match load.owner {
                        Owner::User(k) => user_base[k as usize - 1][slot] += rate,
                        Owner::Background => background[slot] += rate,
                    }
                }
            }
        }
        for load in s.shiftable_loads() {
            loads.push(EngineLoad {
                id: load.id.clone(),
                owner: load.owner.user().expect("shiftable loads are user-owned"),
                rate: units(&load.rate)?,
                duration: load.duration as usize,
                starts: s.feasible_starts(load).iter().map(|t| t.0).collect(),
            });
        }
        let mut user_loads = vec![Vec::new(); s.users as usize];
        for (i, l) in loads.iter().enumerate() {
            user_loads[l.owner as usize - 1].push(i);
        }
        let total_energy = user_energy.iter().sum::<i64>() + background_energy;

        let engine = Engine {
            horizon: h,
            billing: s.billing,
            users: s.users,
            scale,
            cost_denom,
            coeffs,
            loads,
            base,
            background,
            user_base,
            user_loads,
            user_energy,
            background_energy,
            total_energy,
        };
        engine.check_headroom()?;
        Ok(engine)
    }

    /// Verifies the worst-case slot total cannot overflow the cost polynomial.
    fn check_headroom(&self) -> Result<()> {
        let worst = self.total_energy as i128;
        let mut acc: i128 = 0;
        for c in self.coeffs.iter().rev() {
            acc = acc.checked_mul(worst).and_then(|v| v.checked_add(*c)).ok_or(Error::Overflow)?;
        }
        acc.checked_mul(self.horizon as i128 * 4)
            .and_then(|v| v.checked_mul(self.total_energy.max(1) as i128))
            .ok_or(Error::Overflow)?;
        Ok(())
    }

    pub fn loads(&self) -> &[EngineLoad] {
        &self.loads
    }

    pub fn user_loads(&self, user: u32) -> &[usize] {
        &self.user_loads[user as usize - 1]
    }

    /// Users that own at least one shiftable load, ascending.
    pub fn active_users(&self) -> Vec<u32> {
        (1..=self.users).filter(|&k| !self.user_loads(k).is_empty()).collect()
    }

    pub fn load_index(&self, id: &str) -> Option<usize> {
        self.loads.iter().position(|l| l.id == id)
    }

    /// Size of the joint shiftable action space (saturating).
    pub fn joint_space(&self) -> u128 {
        self.loads
            .iter()
            .fold(1u128, |acc, l| acc.saturating_mul(l.starts.len() as u128))
    }

    #[inline]
    pub fn price(&self, u: i64) -> i128 {
        let u = u as i128;
        self.coeffs.iter().rev().fold(0i128, |acc, c| acc * u + c)
    }

    /// `C(X)/X` in cost units per energy unit.
    #[inline]
    fn price_per_unit(&self, u: i64) -> i128 {
        let u = u as i128;
        self.coeffs[1..].iter().rev().fold(0i128, |acc, c| acc * u + c)
    }

    pub fn money(&self, cost_units: i128) -> Money {
        Money(Q::new(cost_units, self.cost_denom))
    }

    #[inline]
    fn slot(&self, start: u32, i: usize) -> usize {
        (start as usize - 1 + i) % self.horizon
    }

    /// Adds (`sign = 1`) or removes (`sign = -1`) load `l` at `start` without
    /// touching `st.starts`.
    pub fn place(&self, st: &mut State, l: usize, start: u32, sign: i64) {
        let load = &self.loads[l];
        let owner = load.owner as usize - 1;
        let delta = sign * load.rate;
        for i in 0..load.duration {
            let h = self.slot(start, i);
            st.agg[h] += delta;
            st.user[owner][h] += delta;
        }
    }

    pub fn empty_state(&self) -> State {
        State {
            starts: vec![0; self.loads.len()],
            agg: self.base.clone(),
            user: self.user_base.clone(),
        }
    }

    /// Builds a state from one start per shiftable load (canonical order).
    pub fn state_from_starts(&self, starts: &[u32]) -> State {
        let mut st = self.empty_state();
        for (l, &s) in starts.iter().enumerate() {
            st.starts[l] = s;
            self.place(&mut st, l, s, 1);
        }
        st
    }

    /// State from feasible-start indices (mixed-radix digits).
    pub fn state_from_digits(&self, digits: &[usize]) -> State {
        let starts: Vec<u32> = digits.iter().enumerate().map(|(l, &d)| self.loads[l].starts[d]).collect();
        self.state_from_starts(&starts)
    }

    pub fn state_from_schedule(&self, j: &JointSchedule) -> Result<State> {
        if j.len() != self.loads.len() {
            return Err(Error::ScheduleMismatch(format!(
                "schedule has {} entries, scenario has {} shiftable loads",
                j.len(),
                self.loads.len()
            )));
        }
        let mut starts = Vec::with_capacity(self.loads.len());
        for load in &self.loads {
            let s = j.get(&load.id).ok_or_else(|| {
                Error::ScheduleMismatch(format!("no start for shiftable load `{}`", load.id))
            })?;
            if !load.starts.contains(&s.0) {
                return Err(Error::InfeasibleStart {
                    load: load.id.clone(),
                    start: s,
                    reason: "outside the load's feasible starts",
                });
            }
            starts.push(s.0);
        }
        Ok(self.state_from_starts(&starts))
    }

    pub fn schedule_of(&self, st: &State) -> JointSchedule {
        let mut j = JointSchedule::new();
        for (load, &s) in self.loads.iter().zip(&st.starts) {
            j.set(load.id.clone(), TimeSlot(s));
        }
        j
    }

    pub fn total_cost_units(&self, st: &State) -> i128 {
        st.agg.iter().map(|&x| self.price(x)).sum()
    }

    pub fn total_cost(&self, st: &State) -> Money {
        self.money(self.total_cost_units(st))
    }

    pub fn aggregate(&self, st: &State) -> LoadProfile {
        LoadProfile::from_values(st.agg.iter().map(|&u| Q::new(u as i128, self.scale)).collect())
    }

    /// Exact PAR of the aggregate profile.
    pub fn par(&self, st: &State) -> Result<Q> {
        let total: i64 = st.agg.iter().sum();
        if total <= 0 {
            return Err(Error::AllZeroProfile);
        }
        let peak = *st.agg.iter().max().expect("horizon >= 1");
        Ok(Q::new(peak as i128 * self.horizon as i128, total as i128))
    }

    fn hourly_units(&self, part: &[i64], agg: &[i64]) -> i128 {
        part.iter()
            .zip(agg)
            .map(|(&x, &total)| x as i128 * self.price_per_unit(total))
            .sum()
    }

    pub fn user_bill(&self, st: &State, k: u32) -> Result<Money> {
        match self.billing {
            Billing::HourlyProportional => {
                Ok(self.money(self.hourly_units(&st.user[k as usize - 1], &st.agg)))
            }
            Billing::DailyProportional => self.daily_share(st, self.user_energy[k as usize - 1]),
        }
    }

    pub fn background_share(&self, st: &State) -> Result<Money> {
        match self.billing {
            Billing::HourlyProportional => Ok(self.money(self.hourly_units(&self.background, &st.agg))),
            Billing::DailyProportional => self.daily_share(st, self.background_energy),
        }
    }

    fn daily_share(&self, st: &State, energy: i64) -> Result<Money> {
        if self.total_energy == 0 {
            return Err(Error::ZeroEnergy);
        }
        let cost = self.money(self.total_cost_units(st));
        Ok(Money(cost.0 * Q::new(energy as i128, self.total_energy as i128)))
    }

    /// Comparison key for starting load `l` at `start` while it is removed
    /// from `st`. Lower is better for the load's owner; only differences
    /// between starts of the same load are meaningful.
    #[inline]
    fn move_key(&self, st: &State, l: usize, start: u32) -> i128 {
        let load = &self.loads[l];
        let r = load.rate;
        let mut key = 0i128;
        match self.billing {
            Billing::DailyProportional => {
                for i in 0..load.duration {
                    let x = st.agg[self.slot(start, i)];
                    key += self.price(x + r) - self.price(x);
                }
            }
            Billing::HourlyProportional => {
                let own = &st.user[load.owner as usize - 1];
                for i in 0..load.duration {
                    let h = self.slot(start, i);
                    let (x, total) = (own[h], st.agg[h]);
                    key += (x + r) as i128 * self.price_per_unit(total + r)
                        - x as i128 * self.price_per_unit(total);
                }
            }
        }
        key
    }

    /// Re-places load `l` at its exact best response. Ties keep the current
    /// start, otherwise the lowest feasible start wins. Returns the old start
    /// when the load moved.
    pub fn best_start(&self, st: &mut State, l: usize) -> Option<u32> {
        let current = st.starts[l];
        self.place(st, l, current, -1);
        let current_key = self.move_key(st, l, current);
        // starts are ascending, so strict `<` keeps the lowest index among ties
        let mut best = (current, current_key);
        for &s in &self.loads[l].starts {
            let key = self.move_key(st, l, s);
            if key < best.1 {
                best = (s, key);
            }
        }
        self.place(st, l, best.0, 1);
        st.starts[l] = best.0;
        (best.0 != current).then_some(current)
    }

    /// True when some start of load `l` strictly lowers its owner's bill.
    pub fn has_improving_move(&self, st: &mut State, l: usize) -> bool {
        let current = st.starts[l];
        self.place(st, l, current, -1);
        let current_key = self.move_key(st, l, current);
        let improves = self.loads[l]
            .starts
            .iter()
            .any(|&s| s != current && self.move_key(st, l, s) < current_key);
        self.place(st, l, current, 1);
        improves
    }

    /// Per-load coordinate descent for user `k`; returns `(load, old, new)` per move.
    pub fn best_response_user(&self, st: &mut State, k: u32, sweep_cap: usize) -> Vec<(usize, u32, u32)> {
        let mut moves = Vec::new();
        for _ in 0..sweep_cap.max(1) {
            let mut changed = false;
            for &l in self.user_loads(k) {
                if let Some(old) = self.best_start(st, l) {
                    moves.push((l, old, st.starts[l]));
                    changed = true;
                }
            }
            if !changed || self.user_loads(k).len() == 1 {
                break;
            }
        }
        moves
    }

    pub fn is_nash_per_load(&self, st: &State) -> bool {
        let mut scratch = st.clone();
        (0..self.loads.len()).all(|l| !self.has_improving_move(&mut scratch, l))
    }

    fn user_bill_key(&self, st: &State, k: u32) -> i128 {
        match self.billing {
            Billing::HourlyProportional => self.hourly_units(&st.user[k as usize - 1], &st.agg),
            // proportional to total cost for a fixed user
            Billing::DailyProportional => self.total_cost_units(st),
        }
    }

    /// No user can lower their bill with any combination of their own starts.
    pub fn is_nash_per_user(&self, st: &State, cap: u128) -> Result<bool> {
        for k in self.active_users() {
            let own = self.user_loads(k);
            let space = own
                .iter()
                .fold(1u128, |acc, &l| acc.saturating_mul(self.loads[l].starts.len() as u128));
            if space > cap {
                return Err(Error::CapExceeded { size: space, cap });
            }
            let current = self.user_bill_key(st, k);
            let mut scratch = st.clone();
            for &l in own {
                let start = scratch.starts[l];
                self.place(&mut scratch, l, start, -1);
            }
            let mut digits = vec![0usize; own.len()];
            loop {
                for (i, &l) in own.iter().enumerate() {
                    self.place(&mut scratch, l, self.loads[l].starts[digits[i]], 1);
                }
                let key = self.user_bill_key(&scratch, k);
                for (i, &l) in own.iter().enumerate() {
                    self.place(&mut scratch, l, self.loads[l].starts[digits[i]], -1);
                }
                if key < current {
                    return Ok(false);
                }
                if !advance(&mut digits, |i| self.loads[own[i]].starts.len()) {
                    break;
                }
            }
        }
        Ok(true)
    }

    /// Round-robin best-response dynamics over `order` (1-based users).
    ///
    /// `observer` sees every accepted move as `(round, user, load, old, new, state)`.
    pub fn run_dynamics(
        &self,
        st: &mut State,
        order: &[u32],
        opts: &RunOptions,
        mut observer: impl FnMut(u32, u32, &[(usize, u32, u32)], &State),
    ) -> (RunStatus, u32) {
        let actors: Vec<u32> = order
            .iter()
            .copied()
            .filter(|&k| !self.user_loads(k).is_empty())
            .collect();
        let mut seen: HashSet<(Vec<u32>, usize)> = HashSet::new();
        let mut round = 0u32;
        while round < opts.max_rounds {
            round += 1;
            let mut changed = false;
            for (pos, &k) in actors.iter().enumerate() {
                let moves = self.best_response_user(st, k, opts.sweep_cap);
                if moves.is_empty() {
                    continue;
                }
                changed = true;
                observer(round, k, &moves, st);
                if opts.cycle_detection {
                    let key = (st.starts.clone(), (pos + 1) % actors.len());
                    if seen.contains(&key) {
                        return (RunStatus::CycleDetected, round);
                    }
                    if seen.len() < opts.cycle_cap {
                        seen.insert(key);
                    }
                }
            }
            if !changed {
                return (RunStatus::Converged, round);
            }
        }
        (RunStatus::MaxRounds, round)
    }

    pub fn energy_scale(&self) -> i128 {
        self.scale
    }
}

/// Increments mixed-radix `digits` (last digit fastest); false after the last value.
pub fn advance(digits: &mut [usize], radix: impl Fn(usize) -> usize) -> bool {
    for i in (0..digits.len()).rev() {
        digits[i] += 1;
        if digits[i] < radix(i) {
            return true;
        }
        digits[i] = 0;
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RunStatus {
    Converged,
    CycleDetected,
    MaxRounds,
}

impl std::fmt::Display for RunStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RunStatus::Converged => "CONVERGED",
            RunStatus::CycleDetected => "CYCLE_DETECTED",
            RunStatus::MaxRounds => "MAX_ROUNDS",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub max_rounds: u32,
    /// Cap on coordinate-descent sweeps inside one multi-load best response.
    pub sweep_cap: usize,
    pub cycle_detection: bool,
    /// Maximum number of remembered states for cycle detection.
    pub cycle_cap: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { max_rounds: 1000, sweep_cap: 1000, cycle_detection: true, cycle_cap: 1_000_000 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{expand, total_cost, user_bill_daily, user_bill_hourly};
    use crate::scenarios;

    #[test]
    fn engine_matches_reference_bills_on_scenario_one() {
        for billing in [Billing::DailyProportional, Billing::HourlyProportional] {
            let s = scenarios::scenario_one().with_billing(billing);
            let e = Engine::new(&s).unwrap();
            for a in 1..=3 {
                for b in 1..=3 {
                    let st = e.state_from_starts(&[a, b]);
                    let j = e.schedule_of(&st);
                    let reference = expand(&s, &j).unwrap().aggregate;
                    assert_eq!(e.aggregate(&st), reference);
                    assert_eq!(e.total_cost(&st), total_cost(&reference, &s.pricing));
                    for k in 1..=2 {
                        let expected = match billing {
                            Billing::DailyProportional => user_bill_daily(&s, &j, k).unwrap(),
                            Billing::HourlyProportional => user_bill_hourly(&s, &j, k).unwrap(),
                        };
                        assert_eq!(e.user_bill(&st, k).unwrap(), expected);
                    }
                }
            }
        }
    }

    #[test]
    fn fractional_rates_are_rescaled() {
        let s = scenarios::scenario_two_thirds();
        let e = Engine::new(&s).unwrap();
        assert_eq!(e.energy_scale(), 6);
        assert_eq!(e.joint_space(), 46_656);
    }

    #[test]
    fn mixed_radix_advance() {
        let mut d = vec![0, 0];
        let mut n = 1;
        while advance(&mut d, |i| [2, 3][i]) {
            n += 1;
        }
        assert_eq!(n, 6);
        assert_eq!(d, vec![0, 0]);
    }
}
