//! Mixed draws from the agent and advisor buffers against the exact law.

use std::sync::Arc;

use ace_core::experience::{record_episode, MixConfig, ReplayBuffers, Source, BufferKind};
use ace_core::grid::{nominal_scenario, toy5, EnvConfig, GridEnv};
use ace_core::rl::Encoder;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let topology = Arc::new(toy5());
    let mut env = GridEnv::new(topology.clone(), EnvConfig::default());
    let encoder = Encoder::new(&topology, 1);
    let episode = record_episode(&mut env, Arc::new(nominal_scenario(&topology)), 0, 0, &encoder, |_, _| 0).unwrap();
    let mix = MixConfig::default();
    let mut buffers = ReplayBuffers::new(50, 8);
    for t in episode.iter().take(50).cloned() {
        buffers.push_rl(t);
    }
    for (k, gain) in [0.4, 0.2, 0.1, 0.0, -0.1].into_iter().enumerate() {
        let mut t = episode[k].clone();
        t.source = Source::LlmActor;
        t.refined_reward = t.original_reward + gain;
        t.reward = t.refined_reward;
        buffers.push_llm(t).unwrap();
    }
    let (p_rl, p_llm) = buffers.mix_probabilities(&mix);
    let n = 200_000;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let batch = buffers.sample_mixed(n, &mix, &mut rng).unwrap();
    let mut hits = vec![0usize; p_llm.len()];
    let mut rl_hits = 0usize;
    for d in &batch.draws {
        match d.buffer {
            BufferKind::Llm => hits[d.index] += 1,
            BufferKind::Rl => rl_hits += 1,
        }
    }
    println!("D_RL total mass: exact {:.4}, empirical {:.4}", p_rl.iter().sum::<f64>(), rl_hits as f64 / n as f64);
    for (i, t) in buffers.llm().iter().enumerate() {
        println!(
            "D_LLM[{i}] gain {:+.2}: weight {:7.3}, exact {:.4}, empirical {:.4}",
            t.refined_reward - t.original_reward,
            buffers.llm_weights(mix.beta_temp)[i],
            p_llm[i],
            hits[i] as f64 / n as f64
        );
    }
}
