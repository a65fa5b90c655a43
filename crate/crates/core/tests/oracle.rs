mod common;

use std::collections::BTreeSet;

use dsm_core::dynamics::{ascending_order, cournot_run, is_nash, NashMode, RunStatus};
use dsm_core::engine::Engine;
use dsm_core::equilibrium::{enumerate_ne, enumerate_ne_sequential, DEFAULT_ENUMERATION_CAP};
use dsm_core::model::{user_bill, validate_scenario, JointSchedule};
use dsm_core::scenarios::{scenario_one, scenario_two_table};

fn schedule(s: &dsm_core::Scenario, starts: &[u32]) -> JointSchedule {
    let ids = common::choices(s).into_iter().map(|c| c.0);
    JointSchedule::from_pairs(ids.zip(starts.iter().copied()))
}

#[test]
fn generated_scenarios_are_valid() {
    for seed in 0..300 {
        let s = common::random_tiny(seed);
        assert_eq!(validate_scenario(&s), vec![], "seed {seed}");
        let engine = Engine::new(&s).unwrap();
        let ours: Vec<Vec<u32>> = engine.loads().iter().map(|l| l.starts.clone()).collect();
        let theirs: Vec<Vec<u32>> = common::choices(&s).into_iter().map(|c| c.1).collect();
        assert_eq!(ours, theirs, "seed {seed}");
    }
}

#[test]
fn bills_match_the_oracle() {
    for seed in 0..150 {
        let s = common::random_tiny(seed);
        for p in common::all_profiles(&s) {
            let j = schedule(&s, &p);
            for k in 1..=s.users {
                assert_eq!(user_bill(&s, &j, k).unwrap().0, common::bill(&s, &p, k), "seed {seed} {p:?} user {k}");
            }
        }
    }
}

#[test]
fn enumeration_matches_the_oracle() {
    for seed in 0..300 {
        let s = common::random_tiny(seed);
        let ours: Vec<Vec<u32>> = enumerate_ne(&s, NashMode::PerLoad).unwrap().iter().map(|j| j.starts()).collect();
        assert_eq!(ours, common::all_nash(&s), "seed {seed}");
    }
}

#[test]
fn scenario_one_equilibria_match_the_oracle() {
    let s = scenario_one();
    let ours: Vec<Vec<u32>> = enumerate_ne(&s, NashMode::PerLoad).unwrap().iter().map(|j| j.starts()).collect();
    assert_eq!(ours, common::all_nash(&s));
    assert_eq!(ours, vec![vec![1, 3], vec![3, 1]]);
}

#[test]
fn converged_runs_end_in_equilibria() {
    for seed in 0..120 {
        let s = common::random_tiny(seed);
        let nes: BTreeSet<Vec<u32>> = common::all_nash(&s).into_iter().collect();
        for p in common::all_profiles(&s) {
            let r = cournot_run(&s, &schedule(&s, &p), &ascending_order(&s), 200).unwrap();
            if r.status == RunStatus::Converged {
                assert!(nes.contains(&r.terminal.starts()), "seed {seed} from {p:?}");
            }
        }
    }
}

#[test]
fn per_user_mode_agrees_for_single_load_users() {
    for seed in 0..100 {
        let s = common::random_tiny(seed);
        for p in common::all_profiles(&s) {
            let j = schedule(&s, &p);
            assert_eq!(
                is_nash(&s, &j, NashMode::PerLoad).unwrap(),
                is_nash(&s, &j, NashMode::PerUserExact).unwrap()
            );
        }
    }
}

#[test]
fn parallel_enumeration_equals_sequential() {
    let s = scenario_two_table();
    let par = enumerate_ne(&s, NashMode::PerLoad).unwrap();
    let seq = enumerate_ne_sequential(&s, NashMode::PerLoad, DEFAULT_ENUMERATION_CAP).unwrap();
    assert_eq!(par, seq);
    assert_eq!(par.len(), 56);
}
