//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use ace_core::experience::{record_episode, Transition};
use ace_core::grid::topology::{Generator, Line, Load};
use ace_core::grid::{
    build_topology, gen_scenarios, toy5, EnvConfig, GridEnv, GridTopology, Scenario, ScenarioOptions, TopologySpec,
};
use ace_core::rl::Encoder;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Connected random grid: a ring plus chords, with generators and loads scattered.
pub fn random_topology(rng: &mut ChaCha8Rng) -> GridTopology {
    let n = rng.random_range(3..=7);
    let mut lines: Vec<Line> = (0..n)
        .map(|i| Line {
            from: i,
            to: (i + 1) % n,
            susceptance: rng.random_range(1.0..20.0),
            thermal_limit: rng.random_range(50.0..300.0),
        })
        .collect();
    for _ in 0..rng.random_range(0..=n) {
        let from = rng.random_range(0..n);
        let to = (from + rng.random_range(1..n)) % n;
        lines.push(Line {
            from,
            to,
            susceptance: rng.random_range(1.0..20.0),
            thermal_limit: rng.random_range(50.0..300.0),
        });
    }
    let generators = (0..rng.random_range(1..=3))
        .map(|_| Generator {
            substation: rng.random_range(0..n),
            p_max: rng.random_range(50.0..300.0),
        })
        .collect();
    let loads = (0..rng.random_range(1..=n))
        .map(|_| Load {
            substation: rng.random_range(0..n),
            nominal_mw: rng.random_range(10.0..80.0),
        })
        .collect();
    build_topology(&TopologySpec {
        name: "random".into(),
        substations: n,
        lines,
        generators,
        loads,
    })
    .expect("ring-based spec is valid")
}

pub fn toy5_arc() -> Arc<GridTopology> {
    Arc::new(toy5())
}

pub fn attacked_scenarios(topology: &GridTopology, count: usize, seed: u64) -> Vec<Arc<Scenario>> {
    let options = ScenarioOptions {
        opponent_enabled: true,
        ..ScenarioOptions::default()
    };
    gen_scenarios(topology, count, 96, seed, &options)
        .unwrap()
        .into_iter()
        .map(Arc::new)
        .collect()
}

/// Uniformly random legal action.
pub fn random_policy(rng: &mut ChaCha8Rng) -> impl FnMut(&[f64], &[bool]) -> usize + '_ {
    move |_, mask| {
        let legal: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
        legal[rng.random_range(0..legal.len())]
    }
}

/// Random-policy episodes on attacked toy5 days; `(episode, scenario)` pairs.
pub fn random_episodes(n: usize, seed: u64) -> (Arc<GridTopology>, Vec<(Vec<Transition>, Arc<Scenario>)>) {
    let topology = toy5_arc();
    let scenarios = attacked_scenarios(&topology, n, seed);
    let mut env = GridEnv::new(topology.clone(), EnvConfig::default());
    let encoder = Encoder::new(&topology, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out = scenarios
        .into_iter()
        .enumerate()
        .map(|(e, s)| {
            let ep = record_episode(&mut env, s.clone(), seed + e as u64, e as u64, &encoder, random_policy(&mut rng))
                .unwrap();
            (ep, s)
        })
        .collect();
    (topology, out)
}
