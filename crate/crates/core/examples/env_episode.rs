//! One synthetic day on toy5 under two fixed policies, with the opponent active.

use std::sync::Arc;

use ace_core::grid::{gen_scenarios, toy5, EnvConfig, GridEnv, ScenarioOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let topology = Arc::new(toy5());
    let options = ScenarioOptions {
        opponent_enabled: true,
        ..ScenarioOptions::default()
    };
    let scenarios = gen_scenarios(&topology, 4, 96, 3, &options).expect("scenarios");
    let mut env = GridEnv::new(topology.clone(), EnvConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(0);

    for scenario in scenarios.into_iter().map(Arc::new) {
        for policy in ["noop", "random"] {
            let mut state = env.reset(scenario.clone(), 17).expect("reset");
            let (mut reward, mut steps, mut attacks) = (0.0, 0, 0);
            let end = loop {
                let mask = env.legal_actions(&state);
                let action = match policy {
                    "noop" => 0,
                    _ => {
                        let legal: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
                        legal[rng.random_range(0..legal.len())]
                    }
                };
                let out = env.step(action).expect("step");
                reward += out.reward;
                steps += 1;
                attacks += out.info.attacked_line.is_some() as usize;
                if out.done {
                    break out.info.failure.unwrap_or_else(|| "horizon reached".into());
                }
                state = out.next_state;
            };
            println!(
                "{} {policy:>6}: {steps:>2}/{} steps, reward {reward:7.2}, {attacks} attacks, {end}",
                scenario.id, scenario.horizon
            );
        }
    }
}
