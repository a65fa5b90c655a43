//! Brute-force reference implementation used to cross-check the engine.
//! Works directly on scenario fields with exact rationals.

#![allow(dead_code)]

use std::collections::BTreeMap;

use dsm_core::model::{Billing, LoadKind, Owner, Scenario};
use dsm_core::numeric::Q;
use num_traits::Zero;

/// Shiftable load ids in id order with every start whose occupied slots stay in the window.
pub fn choices(s: &Scenario) -> Vec<(String, Vec<u32>)> {
    let mut loads: Vec<_> = s.loads.iter().filter(|l| l.kind == LoadKind::Shiftable).collect();
    loads.sort_by(|a, b| a.id.cmp(&b.id));
    let h = s.horizon;
    loads
        .into_iter()
        .map(|l| {
            let (a, b) = (l.window.0 .0, l.window.1 .0);
            let in_window = |slot: u32| if a <= b { a <= slot && slot <= b } else { slot >= a || slot <= b };
            let full = a <= b && a == 1 && b == h || a > b && a == b + 1;
            let starts = (1..=h)
                .filter(|&t| {
                    if !s.wrap_allowed && t + l.duration - 1 > h {
                        return false;
                    }
                    if full && s.wrap_allowed {
                        return true;
                    }
                    // contiguous run inside the window without passing its end
                    let mut slot = t;
                    for i in 0..l.duration {
                        if !in_window(slot) || (i > 0 && slot == a) {
                            return false;
                        }
                        slot = slot % h + 1;
                    }
                    true
                })
                .collect();
            (l.id.clone(), starts)
        })
        .collect()
}

/// Per-owner slot profiles for `starts` (aligned with [`choices`]).
pub fn profiles(s: &Scenario, starts: &[u32]) -> BTreeMap<Owner, Vec<Q>> {
    let ids: Vec<String> = choices(s).into_iter().map(|c| c.0).collect();
    let h = s.horizon as usize;
    let mut out: BTreeMap<Owner, Vec<Q>> = BTreeMap::new();
    for k in 1..=s.users {
        out.insert(Owner::User(k), vec![Q::zero(); h]);
    }
    out.insert(Owner::Background, vec![Q::zero(); h]);
    for l in &s.loads {
        let start = match l.kind {
            LoadKind::Fixed => l.window.0 .0,
            LoadKind::Shiftable => starts[ids.iter().position(|i| *i == l.id).unwrap()],
        };
        let p = out.get_mut(&l.owner).unwrap();
        for i in 0..l.duration as usize {
            p[(start as usize - 1 + i) % h] += l.rate;
        }
    }
    out
}

pub fn aggregate(s: &Scenario, starts: &[u32]) -> Vec<Q> {
    let mut agg = vec![Q::zero(); s.horizon as usize];
    for p in profiles(s, starts).values() {
        for (a, x) in agg.iter_mut().zip(p) {
            *a += x;
        }
    }
    agg
}

pub fn price(s: &Scenario, x: &Q) -> Q {
    let mut acc = Q::zero();
    let mut power = Q::from_integer(1);
    let coeffs = s.pricing.power_coefficients();
    for c in coeffs {
        acc += c * power;
        power *= x;
    }
    acc
}

pub fn total_cost(s: &Scenario, starts: &[u32]) -> Q {
    aggregate(s, starts).iter().map(|x| price(s, x)).sum()
}

pub fn bill(s: &Scenario, starts: &[u32], k: u32) -> Q {
    let prof = profiles(s, starts);
    let agg = aggregate(s, starts);
    let own = &prof[&Owner::User(k)];
    match s.billing {
        Billing::HourlyProportional => own
            .iter()
            .zip(&agg)
            .filter(|(_, x)| !x.is_zero())
            .map(|(o, x)| o / x * price(s, x))
            .sum(),
        Billing::DailyProportional => {
            let total: Q = agg.iter().sum();
            let mine: Q = own.iter().sum();
            mine / total * agg.iter().map(|x| price(s, x)).sum::<Q>()
        }
    }
}

pub fn owner_of(s: &Scenario, id: &str) -> u32 {
    match s.loads.iter().find(|l| l.id == id).unwrap().owner {
        Owner::User(k) => k,
        Owner::Background => unreachable!("shiftable loads are user-owned"),
    }
}

/// No single shiftable load can move to strictly lower its owner's bill.
pub fn is_nash(s: &Scenario, starts: &[u32]) -> bool {
    let ch = choices(s);
    ch.iter().enumerate().all(|(i, (id, options))| {
        let k = owner_of(s, id);
        let now = bill(s, starts, k);
        options.iter().all(|&t| {
            let mut dev = starts.to_vec();
            dev[i] = t;
            bill(s, &dev, k) >= now
        })
    })
}

/// Every joint start vector in lexicographic order.
pub fn all_profiles(s: &Scenario) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for (_, options) in choices(s) {
        out = out
            .into_iter()
            .flat_map(|p| {
                options.iter().map(move |&t| {
                    let mut q = p.clone();
                    q.push(t);
                    q
                })
            })
            .collect();
    }
    out
}

pub fn all_nash(s: &Scenario) -> Vec<Vec<u32>> {
    all_profiles(s).into_iter().filter(|p| is_nash(s, p)).collect()
}

/// Small random scenario: up to 3 users with one shiftable load each, up to
/// 4 slots, optional fixed and background demand, random billing and wrap.
pub fn random_tiny(seed: u64) -> Scenario {
    use dsm_core::model::{Load, PricingFunction, TimeSlot};
    use dsm_core::montecarlo::rng::{stream, uniform_index};
    use dsm_core::numeric::frac;

    let mut g = stream(seed);
    let mut pick = |n: usize| uniform_index(&mut g, n) as u32;
    let h = 1 + pick(4);
    let users = 1 + pick(3);
    let wrap = pick(2) == 1;
    let rates = [frac(1, 2), frac(1, 1), frac(3, 2), frac(2, 1), frac(3, 1)];
    let mut loads = Vec::new();
    for k in 1..=users {
        let duration = 1 + pick(h as usize);
        let (a, b) = if wrap && pick(2) == 1 {
            (1, h)
        } else {
            let a = 1 + pick((h - duration + 1) as usize);
            let b = a + duration - 1 + pick((h - (a + duration - 1) + 1) as usize);
            (a, b)
        };
        loads.push(Load {
            id: format!("s{k}"),
            owner: Owner::User(k),
            rate: rates[pick(rates.len()) as usize],
            duration,
            window: (TimeSlot(a), TimeSlot(b)),
            kind: LoadKind::Shiftable,
        });
        if pick(2) == 1 {
            let t = 1 + pick(h as usize);
            loads.push(Load {
                id: format!("f{k}"),
                owner: Owner::User(k),
                rate: rates[pick(rates.len()) as usize],
                duration: 1,
                window: (TimeSlot(t), TimeSlot(t)),
                kind: LoadKind::Fixed,
            });
        }
    }
    if pick(3) == 0 {
        let t = 1 + pick(h as usize);
        loads.push(Load {
            id: "bg".into(),
            owner: Owner::Background,
            rate: rates[pick(rates.len()) as usize],
            duration: 1,
            window: (TimeSlot(t), TimeSlot(t)),
            kind: LoadKind::Fixed,
        });
    }
    let pricing = match pick(3) {
        0 => PricingFunction::quadratic(frac(1, 1)),
        1 => PricingFunction::quadratic(frac(1, 2)),
        _ => PricingFunction::polynomial(vec![frac(0, 1), frac(1 + pick(3) as i128, 1), frac(1, 1)]),
    };
    Scenario {
        horizon: h,
        users,
        loads,
        pricing,
        billing: if pick(2) == 0 { Billing::DailyProportional } else { Billing::HourlyProportional },
        wrap_allowed: wrap,
    }
}
