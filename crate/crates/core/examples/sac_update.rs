//! Discrete SAC updates on recorded toy5 experience.

use std::sync::Arc;

use ace_core::experience::{record_episode, ReplayBuffers, MixConfig};
use ace_core::grid::{gen_scenarios, toy5, ActionTable, EnvConfig, GridEnv, ScenarioOptions};
use ace_core::rl::{Encoder, SacAgent, SacHyperparams, SacSample};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let topology = Arc::new(toy5());
    let hyper = SacHyperparams {
        lr: 1e-3,
        batch_size: 32,
        hidden_sizes: vec![64, 64],
        history_window: 1,
        ..SacHyperparams::default()
    };
    let encoder = Encoder::new(&topology, hyper.history_window);
    let n_actions = ActionTable::new(&topology).len();
    let mut agent = SacAgent::new(hyper.clone(), encoder.input_len(), n_actions, 0).expect("agent");
    let options = ScenarioOptions {
        opponent_enabled: true,
        ..ScenarioOptions::default()
    };
    let scenarios = gen_scenarios(&topology, 8, 96, 5, &options).expect("scenarios");
    let mut env = GridEnv::new(topology.clone(), EnvConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mix = MixConfig {
        beta_mix: 0.0,
        ..MixConfig::default()
    };
    let mut buffers = ReplayBuffers::from_config(&mix);
    for (e, s) in scenarios.into_iter().enumerate() {
        let behaviour = agent.clone();
        let mut act_rng = ChaCha8Rng::seed_from_u64(e as u64);
        for t in record_episode(&mut env, Arc::new(s), e as u64, e as u64, &encoder, |obs, mask| {
            behaviour.act(obs, mask, &mut act_rng)
        })
        .expect("episode")
        {
            buffers.push_rl(t);
        }
    }
    println!("{} transitions recorded, {} actions, {} inputs", buffers.rl().len(), n_actions, encoder.input_len());
    for update in 1..=300 {
        let batch = buffers.sample_mixed(hyper.batch_size, &mix, &mut rng).expect("batch");
        let samples: Vec<SacSample> = batch.draws.iter().map(|&d| buffers.get(d).sample()).collect();
        let q = agent.update_q(&samples).expect("q update");
        let pi = agent.update_policy_weighted(&samples, &batch.weights).expect("policy update");
        if update % 50 == 0 {
            println!("update {update:>3}: q loss {q:8.4}, policy loss {pi:8.4}, entropy {:.3}", agent.mean_entropy(&samples));
        }
    }
}
