mod common;

use std::sync::Arc;

use ace_core::advisor::{oracle_action, rank_by_simulated_reward};
use ace_core::grid::env::pick_attack_target;
use ace_core::grid::powerflow::{node_id, ElectricalNetwork};
use ace_core::grid::topology::{WCCI2020_LIKE_SUBSTATION_SIZES, WCCI2020_N_LINES};
use ace_core::grid::{
    action_family_count, action_space_size, dc_power_flow, nominal_scenario, ring3, toy5, Action, ActionTable,
    EnvConfig, GridEnv, GridTopology,
};
use common::random_topology;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest nodal imbalance `|P_n − Σ out-flows + Σ in-flows|`.
fn balance_residual(net: &ElectricalNetwork, injections: &[f64], flows: &[f64]) -> f64 {
    let mut residual = injections.to_vec();
    for (l, ends) in net.line_nodes.iter().enumerate() {
        if let Some((from, to)) = *ends {
            residual[from] -= flows[l];
            residual[to] += flows[l];
        }
    }
    residual.iter().fold(0.0, |m, r| m.max(r.abs()))
}

/// Random zero-sum injections on every island.
fn island_injections(net: &ElectricalNetwork, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut inj = vec![0.0; net.n_nodes];
    for nodes in &net.islands {
        for &n in nodes {
            inj[n] = rng.random_range(-200.0..200.0);
        }
        let mean = nodes.iter().map(|&n| inj[n]).sum::<f64>() / nodes.len() as f64;
        for &n in nodes {
            inj[n] -= mean;
        }
    }
    inj
}

fn random_configuration(t: &GridTopology, rng: &mut ChaCha8Rng) -> (Vec<u8>, Vec<bool>) {
    let bus = (0..t.n_elements()).map(|_| rng.random_bool(0.3) as u8).collect();
    let status = (0..t.n_lines()).map(|_| rng.random_bool(0.85)).collect();
    (bus, status)
}

#[test]
fn nodal_balance_on_random_configurations() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for k in 0..1000 {
        let t = if k % 2 == 0 { toy5() } else { random_topology(&mut rng) };
        let (bus, status) = random_configuration(&t, &mut rng);
        let net = ElectricalNetwork::build(&t, &bus, &status);
        let inj = island_injections(&net, &mut rng);
        let flows = dc_power_flow(&t, &bus, &status, &inj).expect("balanced islands solve");
        worst = worst.max(balance_residual(&net, &inj, &flows));
        for (l, ends) in net.line_nodes.iter().enumerate() {
            if ends.is_none() {
                assert_eq!(flows[l], 0.0);
            }
        }
    }
    assert!(worst < 1e-8, "worst residual {worst}");
}

#[test]
fn ring3_matches_reduced_system_by_cramer() {
    let t = ring3();
    let y: Vec<f64> = t.lines().iter().map(|l| l.susceptance).collect();
    let mut inj = vec![0.0; 6];
    inj[node_id(0, 0)] = 1.0;
    inj[node_id(1, 0)] = -1.0;
    let flows = dc_power_flow(&t, &[0; 9], &[true; 3], &inj).unwrap();
    // Angle of A fixed at zero; unknowns (θB, θC). Lines: A-B (y0), A-C (y1), C-B (y2).
    let (a11, a12, a22) = (y[0] + y[2], -y[2], y[1] + y[2]);
    let (p_b, p_c) = (-1.0, 0.0);
    let det = a11 * a22 - a12 * a12;
    let th_b = (p_b * a22 - a12 * p_c) / det;
    let th_c = (a11 * p_c - a12 * p_b) / det;
    let oracle = [y[0] * (0.0 - th_b), y[1] * (0.0 - th_c), y[2] * (th_c - th_b)];
    for l in 0..3 {
        assert!((flows[l] - oracle[l]).abs() < 1e-10);
    }
    for (f, expected) in flows.iter().zip([2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]) {
        assert!((f - expected).abs() < 1e-10, "{f} vs {expected}");
    }
}

/// Counts the three families by walking every line and every bus vector of every substation.
fn brute_family_count(t: &GridTopology) -> usize {
    let mut count = 0;
    for _line in 0..t.n_lines() {
        count += 1;
        for _o in 0..2 {
            for _x in 0..2 {
                count += 1;
            }
        }
    }
    for size in t.substation_sizes() {
        let mut vectors = vec![Vec::<u8>::new()];
        for _ in 0..size {
            vectors = vectors
                .into_iter()
                .flat_map(|v| {
                    (0..2u8).map(move |b| {
                        let mut w = v.clone();
                        w.push(b);
                        w
                    })
                })
                .collect();
        }
        count += vectors.len();
    }
    count
}

#[test]
fn cardinality_matches_brute_enumeration_on_random_topologies() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..20 {
        let t = random_topology(&mut rng);
        let brute = brute_family_count(&t);
        assert_eq!(action_space_size(&t), brute + 1);
        assert_eq!(ActionTable::new(&t).len(), brute + 1);
    }
}

#[test]
fn small_family_example() {
    assert_eq!(action_family_count(4, &[3, 4, 3]), 4 + 16 + (8 + 16 + 8));
}

#[test]
fn wcci_shape_exceeds_sixty_thousand() {
    assert_eq!(WCCI2020_LIKE_SUBSTATION_SIZES.len(), 36);
    assert!(action_family_count(WCCI2020_N_LINES, &WCCI2020_LIKE_SUBSTATION_SIZES) > 60_000);
}

#[test]
fn nominal_reset_is_within_limits() {
    let t = Arc::new(toy5());
    let mut env = GridEnv::new(t.clone(), EnvConfig::default());
    let s = env.reset(Arc::new(nominal_scenario(&t)), 42).unwrap();
    let (max_rho, _) = s.max_rho();
    assert!(max_rho < 1.0, "{max_rho}");
}

#[test]
fn substation_cooldown_masks_every_assignment() {
    let t = Arc::new(toy5());
    let mut env = GridEnv::new(t.clone(), EnvConfig::default());
    let mut s = env.reset(Arc::new(nominal_scenario(&t)), 0).unwrap();
    s.cooldown_sub[1] = 2;
    let table = ActionTable::new(&t);
    let mask = env.legal_actions(&s);
    let masked = table
        .actions()
        .iter()
        .zip(&mask)
        .filter(|(a, &m)| matches!(a, Action::SubstationAssign { substation: 1, .. }) && !m)
        .count();
    assert_eq!(masked, 1 << t.substation_sizes()[1]);
    let other_masked = mask.iter().filter(|m| !**m).count() - masked;
    assert_eq!(other_masked, 0);
}

#[test]
fn overload_relief_beats_noop_in_simulation() {
    let t = Arc::new(toy5());
    let mut env = GridEnv::new(t.clone(), EnvConfig::default());
    let scenario = Arc::new(nominal_scenario(&t));
    let mut s = env.reset(scenario.clone(), 0).unwrap();
    // Losing line 1 (0-2) pushes its transfer onto the neighbours.
    s.line_status[1] = false;
    let sim = env.simulator_for(scenario);
    let ranked = rank_by_simulated_reward(&sim, &s);
    let noop = sim.simulate(&s, 0).reward;
    let (best, best_reward) = ranked[0];
    let brute = (0..ActionTable::new(&t).len())
        .filter(|&i| env.legal_actions(&s)[i])
        .map(|i| sim.simulate(&s, i).reward)
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(best_reward, brute);
    assert!(best_reward > noop, "best {best} {best_reward} vs noop {noop}");
}

#[test]
fn attack_targets_are_uniform_over_top_three() {
    let t = Arc::new(toy5());
    let mut env = GridEnv::new(t.clone(), EnvConfig::default());
    let s = env.reset(Arc::new(nominal_scenario(&t)), 0).unwrap();
    let mut order: Vec<usize> = (0..t.n_lines()).collect();
    order.sort_by(|&a, &b| s.rho[b].total_cmp(&s.rho[a]));
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut counts = vec![0usize; t.n_lines()];
    let n = 10_000;
    for _ in 0..n {
        counts[pick_attack_target(3, &s, &mut rng).unwrap()] += 1;
    }
    for (rank, &line) in order.iter().enumerate() {
        let f = counts[line] as f64 / n as f64;
        if rank < 3 {
            assert!((f - 1.0 / 3.0).abs() < 0.02, "line {line}: {f}");
        } else {
            assert_eq!(counts[line], 0);
        }
    }
}

#[test]
fn scripted_greedy_survives_nominal_day() {
    let t = Arc::new(toy5());
    let mut env = GridEnv::new(t.clone(), EnvConfig::default());
    let scenario = Arc::new(nominal_scenario(&t));
    let mut s = env.reset(scenario.clone(), 0).unwrap();
    let sim = env.simulator_for(scenario.clone());
    let mut steps = 0;
    loop {
        let (a, _, _) = oracle_action(&sim, &s, &[], 0).unwrap();
        let out = env.step(a).unwrap();
        steps += 1;
        assert!(!out.failed());
        if out.done {
            break;
        }
        s = out.next_state;
    }
    assert_eq!(steps, scenario.horizon);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flows_scale_linearly(seed in any::<u64>(), k in -5.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_topology(&mut rng);
        let (bus, status) = random_configuration(&t, &mut rng);
        let net = ElectricalNetwork::build(&t, &bus, &status);
        let inj = island_injections(&net, &mut rng);
        let f1 = dc_power_flow(&t, &bus, &status, &inj).unwrap();
        let scaled: Vec<f64> = inj.iter().map(|x| k * x).collect();
        let fk = dc_power_flow(&t, &bus, &status, &scaled).unwrap();
        for (a, b) in f1.iter().zip(&fk) {
            prop_assert!((k * a - b).abs() < 1e-7 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn table_index_round_trips(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_topology(&mut rng);
        let table = ActionTable::new(&t);
        for (i, a) in table.actions().iter().enumerate() {
            prop_assert_eq!(table.index_of(a), Some(i));
        }
    }
}
