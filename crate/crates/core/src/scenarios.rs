//! Built-in reference scenarios. The files under `scenarios/` in the
//! repository are serialized copies of these values.

use crate::model::{Billing, Load, LoadKind, Owner, PricingFunction, Scenario, TimeSlot};
use crate::numeric::{frac, parse_rational, q, Q};

fn load(id: &str, owner: Owner, rate: Q, duration: u32, window: (u32, u32), kind: LoadKind) -> Load {
    Load {
        id: id.into(),
        owner,
        rate,
        duration,
        window: (TimeSlot(window.0), TimeSlot(window.1)),
        kind,
    }
}

/// Two users, three slots, `C(x) = x²`.
///
/// User 1: fixed 1 kWh in slot 1, shiftable 2 kWh for one slot.
/// User 2: fixed 5 kWh in slot 2, shiftable 2.5 kWh for one slot.
pub fn scenario_one() -> Scenario {
    Scenario {
        horizon: 3,
        users: 2,
        loads: vec![
            load("u1_fixed", Owner::User(1), q(1), 1, (1, 1), LoadKind::Fixed),
            load("u1_shift", Owner::User(1), q(2), 1, (1, 3), LoadKind::Shiftable),
            load("u2_fixed", Owner::User(2), q(5), 1, (2, 2), LoadKind::Fixed),
            load("u2_shift", Owner::User(2), frac(5, 2), 1, (1, 3), LoadKind::Shiftable),
        ],
        pricing: PricingFunction::quadratic(q(1)),
        billing: Billing::DailyProportional,
        wrap_allowed: false,
    }
}

fn six_user(rates: [Q; 6], durations: [u32; 6], background_rate: Q) -> Scenario {
    let mut loads = vec![load("bg", Owner::Background, background_rate, 3, (4, 6), LoadKind::Fixed)];
    for (i, (rate, d)) in rates.into_iter().zip(durations).enumerate() {
        let k = i as u32 + 1;
        loads.push(load(&format!("u{k}"), Owner::User(k), rate, d, (1, 6), LoadKind::Shiftable));
    }
    Scenario {
        horizon: 6,
        users: 6,
        loads,
        pricing: PricingFunction::quadratic(q(1)),
        billing: Billing::DailyProportional,
        wrap_allowed: true,
    }
}

fn dec(text: &str) -> Q {
    parse_rational(text).expect("literal rational")
}

/// Six users, six slots with wrap: shiftable rates
/// `[1.5, 2, 0.67, 2, 5, 0.33]` kWh/slot for `[1, 2, 3, 1, 2, 3]` slots and
/// 2 kWh/slot of background demand in slots 4–6, taken literally.
pub fn scenario_two() -> Scenario {
    six_user(
        [dec("1.5"), q(2), dec("0.67"), q(2), q(5), dec("0.33")],
        [1, 2, 3, 1, 2, 3],
        q(2),
    )
}

/// [`scenario_two`] with the rounded rates read as exact thirds.
pub fn scenario_two_thirds() -> Scenario {
    six_user(
        [dec("1.5"), q(2), frac(2, 3), q(2), q(5), frac(1, 3)],
        [1, 2, 3, 1, 2, 3],
        q(2),
    )
}

/// Six-user variant with seven equilibrium groups costing 157.58 to 163.58
/// cents: durations `[1, 3, 4, 1, 3, 4]`, exact thirds,
/// and 2 kWh of background demand spread evenly over slots 4–6.
pub fn scenario_two_table() -> Scenario {
    six_user(
        [dec("1.5"), q(2), frac(2, 3), q(2), q(5), frac(1, 3)],
        [1, 3, 4, 1, 3, 4],
        frac(2, 3),
    )
}
