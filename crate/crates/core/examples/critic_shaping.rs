//! Key-step selection and critic reward shaping on a finished episode.

use std::sync::Arc;

use ace_core::advisor::{select_key_steps, shape_rewards, summarize_episode, KeyStepConfig, KeyStepCriterion, ScriptedOracleCritic};
use ace_core::experience::{record_episode, ReplayBuffers, Transition};
use ace_core::grid::{gen_scenarios, toy5, EnvConfig, GridEnv, ScenarioOptions};
use ace_core::rl::Encoder;
use ace_core::textio::ReasonThresholds;

fn main() {
    let topology = Arc::new(toy5());
    let options = ScenarioOptions {
        opponent_enabled: true,
        ..ScenarioOptions::default()
    };
    let scenario = Arc::new(gen_scenarios(&topology, 1, 96, 8, &options).unwrap().remove(0));
    let mut env = GridEnv::new(topology.clone(), EnvConfig::default());
    let encoder = Encoder::new(&topology, 1);
    let mut buffers = ReplayBuffers::new(1000, 64);
    let mut episode = Vec::new();
    for seed in 0..50 {
        episode = record_episode(&mut env, scenario.clone(), seed, 0, &encoder, |_, _| 0).unwrap();
        if episode.last().is_some_and(|t| t.done) {
            break;
        }
    }
    println!("episode of {} steps, failed: {}", episode.len(), episode.last().unwrap().done);
    for t in &episode {
        buffers.push_rl(t.clone());
    }
    let steps: Vec<&Transition> = buffers.rl().iter().collect();
    let summaries = summarize_episode(&topology, env.table(), &steps);
    let thresholds = ReasonThresholds::default();
    for criterion in [KeyStepCriterion::Reward, KeyStepCriterion::State, KeyStepCriterion::Action] {
        let config = KeyStepConfig {
            criterion,
            ..KeyStepConfig::default()
        };
        println!("{criterion:?} key steps: {:?}", select_key_steps(&summaries, &config));
    }
    let keys = select_key_steps(&summaries, &KeyStepConfig::default());
    let mut critic = ScriptedOracleCritic::new(0.99, 0.1);
    let result = shape_rewards(&mut buffers, 0, &summaries, &keys, &mut critic, 0.2, 4, &thresholds);
    println!("\n--- critic prompt ---\n{}", result.exchange.prompt);
    println!("--- critic response ---\n{}", result.exchange.response);
    for (step, adj) in &result.applied {
        let t = buffers.rl().iter().find(|t| t.step_index == *step).unwrap();
        println!("step {step}: {adj:+.1} -> stored reward {:.3} (was {:.3})", t.reward, t.original_reward);
    }
}
