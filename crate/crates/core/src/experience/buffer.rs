//! The two replay buffers and the mixed sampling law over them.
//!
//! A draw lands in `D_RL` with probability `1 − β_mix` and is then uniform;
//! otherwise it lands in `D_LLM` with probability proportional to
//! `Iv · w_r`, where `Iv` is the validity indicator and
//! `w_r = exp((r̂ − r)/β_temp)`. When no stored LLM transition is valid the
//! whole mass falls back to `D_RL`.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::transition::{Source, Transition};

pub const W_MIN: f64 = 1e-3;
pub const W_MAX: f64 = 1e3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BufferError {
    #[error("RL-sourced transition cannot enter the LLM buffer")]
    RlIntoLlm,
    #[error("the RL buffer is empty")]
    EmptyRl,
    #[error("invalid mix setting {name}: {value}")]
    InvalidConfig { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixConfig {
    /// Share of draws taken from the LLM buffer.
    pub beta_mix: f64,
    /// Temperature of the importance weight exponent.
    pub beta_temp: f64,
    /// Transitions rewarded below this are refinement candidates.
    pub r_lower: f64,
    /// Key-step reward magnitude threshold.
    pub r_bar: f64,
    /// Key-step max-ρ change threshold.
    pub rho_bar: f64,
    /// Critic adjustment scale `K`.
    pub k_adjust: f64,
    pub max_adjustments_per_episode: usize,
    pub llm_buffer_capacity: usize,
    pub rl_buffer_capacity: usize,
}

impl Default for MixConfig {
    fn default() -> Self {
        MixConfig {
            beta_mix: 0.5,
            beta_temp: 0.5,
            r_lower: 0.1,
            r_bar: 0.5,
            rho_bar: 0.1,
            k_adjust: 0.2,
            max_adjustments_per_episode: 4,
            llm_buffer_capacity: 256,
            rl_buffer_capacity: 50_000,
        }
    }
}

impl MixConfig {
    pub fn validate(&self) -> Result<(), BufferError> {
        let bad = |name, value| Err(BufferError::InvalidConfig { name, value });
        if !(0.0..=1.0).contains(&self.beta_mix) {
            return bad("beta_mix", self.beta_mix);
        }
        if !(self.beta_temp > 0.0) {
            return bad("beta_temp", self.beta_temp);
        }
        if !(self.k_adjust > 0.0) {
            return bad("k_adjust", self.k_adjust);
        }
        if self.llm_buffer_capacity == 0 {
            return bad("llm_buffer_capacity", 0.0);
        }
        if self.rl_buffer_capacity == 0 {
            return bad("rl_buffer_capacity", 0.0);
        }
        Ok(())
    }
}

/// `Iv = 𝕀[r̂ ≥ 0 ∧ ¬d]`
pub fn validity(t: &Transition) -> bool {
    t.refined_reward >= 0.0 && !t.done
}

/// `w_r = exp((r̂ − r)/β_temp)`, clamped to `[W_MIN, W_MAX]`.
pub fn weight(t: &Transition, beta_temp: f64) -> f64 {
    ((t.refined_reward - t.original_reward) / beta_temp).exp().clamp(W_MIN, W_MAX)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BufferKind {
    Rl,
    Llm,
}

/// Position of a drawn transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Draw {
    pub buffer: BufferKind,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixedBatch {
    pub draws: Vec<Draw>,
    /// Policy-loss weight per draw: `w_r` of the transition, 1 for RL-sourced ones.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplayBuffers {
    rl: VecDeque<Transition>,
    llm: VecDeque<Transition>,
    rl_capacity: usize,
    llm_capacity: usize,
}

impl ReplayBuffers {
    pub fn new(rl_capacity: usize, llm_capacity: usize) -> Self {
        ReplayBuffers {
            rl: VecDeque::with_capacity(rl_capacity.min(1 << 16)),
            llm: VecDeque::with_capacity(llm_capacity.min(1 << 16)),
            rl_capacity: rl_capacity.max(1),
            llm_capacity: llm_capacity.max(1),
        }
    }

    pub fn from_config(config: &MixConfig) -> Self {
        Self::new(config.rl_buffer_capacity, config.llm_buffer_capacity)
    }

    pub fn rl(&self) -> &VecDeque<Transition> {
        &self.rl
    }

    pub fn llm(&self) -> &VecDeque<Transition> {
        &self.llm
    }

    pub fn llm_capacity(&self) -> usize {
        self.llm_capacity
    }

    pub fn llm_is_full(&self) -> bool {
        self.llm.len() >= self.llm_capacity
    }

    pub fn get(&self, draw: Draw) -> &Transition {
        match draw.buffer {
            BufferKind::Rl => &self.rl[draw.index],
            BufferKind::Llm => &self.llm[draw.index],
        }
    }

    pub fn push_rl(&mut self, t: Transition) {
        if self.rl.len() == self.rl_capacity {
            self.rl.pop_front();
        }
        self.rl.push_back(t);
    }

    pub fn push_llm(&mut self, t: Transition) -> Result<(), BufferError> {
        if t.source == Source::Rl {
            return Err(BufferError::RlIntoLlm);
        }
        if self.llm.len() == self.llm_capacity {
            self.llm.pop_front();
        }
        self.llm.push_back(t);
        Ok(())
    }

    /// LLM-side sampling weights `Iv · w_r` for the current contents.
    pub fn llm_weights(&self, beta_temp: f64) -> Vec<f64> {
        self.llm
            .iter()
            .map(|t| if validity(t) { weight(t, beta_temp) } else { 0.0 })
            .collect()
    }

    /// Exact per-transition probabilities of one draw, `(D_RL, D_LLM)`.
    pub fn mix_probabilities(&self, config: &MixConfig) -> (Vec<f64>, Vec<f64>) {
        let w = self.llm_weights(config.beta_temp);
        let total: f64 = w.iter().sum();
        let beta = if total > 0.0 { config.beta_mix } else { 0.0 };
        let n = self.rl.len() as f64;
        let rl = vec![(1.0 - beta) / n; self.rl.len()];
        let llm = w
            .iter()
            .map(|x| if total > 0.0 { beta * x / total } else { 0.0 })
            .collect();
        (rl, llm)
    }

    /// Two-stage draw: branch on `β_mix`, then uniform on `D_RL` or
    /// proportional to `Iv · w_r` on `D_LLM`. The LLM normalizer is
    /// computed once per batch.
    pub fn sample_mixed<R: Rng + ?Sized>(
        &self,
        batch_size: usize,
        config: &MixConfig,
        rng: &mut R,
    ) -> Result<MixedBatch, BufferError> {
        if self.rl.is_empty() {
            return Err(BufferError::EmptyRl);
        }
        let w = self.llm_weights(config.beta_temp);
        let total: f64 = w.iter().sum();
        let beta = if total > 0.0 { config.beta_mix } else { 0.0 };
        let mut draws = Vec::with_capacity(batch_size);
        let mut weights = Vec::with_capacity(batch_size);
        for _ in 0..batch_size {
            if beta > 0.0 && rng.random_bool(beta) {
                let u = rng.random::<f64>() * total;
                let mut acc = 0.0;
                let mut pick = None;
                for (i, &x) in w.iter().enumerate() {
                    if x <= 0.0 {
                        continue;
                    }
                    acc += x;
                    pick = Some(i);
                    if u < acc {
                        break;
                    }
                }
                let index = pick.expect("positive LLM mass");
                draws.push(Draw {
                    buffer: BufferKind::Llm,
                    index,
                });
                weights.push(w[index]);
            } else {
                let index = rng.random_range(0..self.rl.len());
                let t = &self.rl[index];
                draws.push(Draw {
                    buffer: BufferKind::Rl,
                    index,
                });
                weights.push(match t.source {
                    Source::Rl => 1.0,
                    _ => weight(t, config.beta_temp),
                });
            }
        }
        Ok(MixedBatch { draws, weights })
    }

    /// Adds a critic adjustment to the stored reward of `(episode, step)` in
    /// `D_RL`. Returns `false` (and warns) when the transition is gone.
    pub fn replace_reward(&mut self, episode_id: u64, step_index: usize, adjustment: f64) -> bool {
        let Some(t) = self
            .rl
            .iter_mut()
            .rev()
            .find(|t| t.episode_id == episode_id && t.step_index == step_index)
        else {
            log::warn!("reward replacement target (episode {episode_id}, step {step_index}) no longer stored");
            return false;
        };
        t.reward = t.original_reward + adjustment;
        t.refined_reward = t.reward;
        t.source = Source::LlmCritic;
        true
    }

    /// Links the stored `D_RL` transition of `(episode, step)` to an archived
    /// advisor exchange.
    pub fn set_exchange(&mut self, episode_id: u64, step_index: usize, exchange_id: u64) -> bool {
        match self
            .rl
            .iter_mut()
            .rev()
            .find(|t| t.episode_id == episode_id && t.step_index == step_index)
        {
            Some(t) => {
                t.exchange_id = Some(exchange_id);
                true
            }
            None => false,
        }
    }
}
