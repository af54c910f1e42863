//! Discrete soft actor-critic with an optional per-sample weighting of the
//! policy objective.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::nn::{Adam, Mlp};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SacError {
    #[error("invalid hyperparameter {name}: {value}")]
    InvalidHyper { name: &'static str, value: f64 },
    #[error("empty batch")]
    EmptyBatch,
    #[error("non-finite {what} loss ({value}); update skipped")]
    NonFinite { what: &'static str, value: f64 },
    #[error("weight {index} is not positive and finite ({value})")]
    InvalidWeight { index: usize, value: f64 },
    #[error("observation width {got}, network expects {expected}")]
    Shape { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SacHyperparams {
    pub gamma: f64,
    pub alpha: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub tau_soft: f64,
    pub target_update_interval: u64,
    pub hidden_sizes: Vec<usize>,
    pub history_window: usize,
}

impl Default for SacHyperparams {
    fn default() -> Self {
        SacHyperparams {
            gamma: 0.995,
            alpha: 0.2,
            lr: 5e-5,
            batch_size: 64,
            tau_soft: 1e-3,
            target_update_interval: 2,
            hidden_sizes: vec![128, 128],
            history_window: 6,
        }
    }
}

impl SacHyperparams {
    pub fn validate(&self) -> Result<(), SacError> {
        let bad = |name, value| Err(SacError::InvalidHyper { name, value });
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma", self.gamma);
        }
        if !(self.alpha > 0.0) {
            return bad("alpha", self.alpha);
        }
        if !(self.lr > 0.0) {
            return bad("lr", self.lr);
        }
        if self.batch_size == 0 {
            return bad("batch_size", 0.0);
        }
        if !(self.tau_soft > 0.0 && self.tau_soft <= 1.0) {
            return bad("tau_soft", self.tau_soft);
        }
        if self.target_update_interval == 0 {
            return bad("target_update_interval", 0.0);
        }
        if self.history_window == 0 {
            return bad("history_window", 0.0);
        }
        if self.hidden_sizes.contains(&0) {
            return bad("hidden_sizes", 0.0);
        }
        Ok(())
    }
}

/// Softmax restricted to legal entries; illegal entries get exactly 0.
pub fn masked_softmax(logits: &[f64], mask: &[bool]) -> Vec<f64> {
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&z, _)| z)
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(max > f64::NEG_INFINITY, "at least one legal action");
    let mut probs: Vec<f64> = logits
        .iter()
        .zip(mask)
        .map(|(&z, &m)| if m { (z - max).exp() } else { 0.0 })
        .collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    probs
}

/// `log π` for legal entries (`-∞` elsewhere).
pub fn masked_log_softmax(logits: &[f64], mask: &[bool]) -> Vec<f64> {
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&z, _)| z)
        .fold(f64::NEG_INFINITY, f64::max);
    let lse = max
        + logits
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|(&z, _)| (z - max).exp())
            .sum::<f64>()
            .ln();
    logits
        .iter()
        .zip(mask)
        .map(|(&z, &m)| if m { z - lse } else { f64::NEG_INFINITY })
        .collect()
}

/// Shannon entropy in nats.
pub fn entropy(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

pub fn sample_action<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

pub fn argmax_legal(values: &[f64], mask: &[bool]) -> usize {
    let mut best = None;
    for (i, (&v, &m)) in values.iter().zip(mask).enumerate() {
        if m && best.is_none_or(|(_, bv)| v > bv) {
            best = Some((i, v));
        }
    }
    best.map_or(0, |(i, _)| i)
}

/// `φ′ ← τ·φ + (1−τ)·φ′`
pub fn soft_update(phi: &[f64], phi_target: &mut [f64], tau: f64) {
    for (t, &p) in phi_target.iter_mut().zip(phi) {
        *t = tau * p + (1.0 - tau) * *t;
    }
}

/// Soft Bellman target; terminal transitions keep only the reward.
pub fn q_target(reward: f64, done: bool, gamma: f64, alpha: f64, q_next: f64, log_pi_next: f64) -> f64 {
    if done {
        reward
    } else {
        reward + gamma * (q_next - alpha * log_pi_next)
    }
}

/// One training sample as seen by the networks.
#[derive(Debug, Clone, Copy)]
pub struct SacSample<'a> {
    pub obs: &'a [f64],
    pub mask: &'a [bool],
    pub action: usize,
    pub reward: f64,
    pub done: bool,
    pub next_obs: &'a [f64],
    pub next_mask: &'a [bool],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SacAgent {
    pub hyper: SacHyperparams,
    pub policy: Mlp,
    pub q: Mlp,
    pub q_target: Mlp,
    pub policy_opt: Adam,
    pub q_opt: Adam,
    /// Critic updates performed.
    pub q_updates: u64,
    /// Draws the bootstrap actions `a′`.
    pub rng: ChaCha8Rng,
}

impl SacAgent {
    pub fn new(hyper: SacHyperparams, obs_len: usize, n_actions: usize, seed: u64) -> Result<Self, SacError> {
        hyper.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![obs_len];
        sizes.extend(&hyper.hidden_sizes);
        sizes.push(n_actions);
        let policy = Mlp::new(&sizes, &mut rng);
        let q = Mlp::new(&sizes, &mut rng);
        let q_target = q.clone();
        Ok(SacAgent {
            policy_opt: Adam::new(policy.n_params(), hyper.lr),
            q_opt: Adam::new(q.n_params(), hyper.lr),
            hyper,
            policy,
            q,
            q_target,
            q_updates: 0,
            rng,
        })
    }

    pub fn obs_len(&self) -> usize {
        self.policy.input_len()
    }

    pub fn n_actions(&self) -> usize {
        self.policy.output_len()
    }

    pub fn policy_forward(&self, obs: &[f64], mask: &[bool]) -> Vec<f64> {
        masked_softmax(&self.policy.forward(obs), mask)
    }

    pub fn q_forward(&self, obs: &[f64]) -> Vec<f64> {
        self.q.forward(obs)
    }

    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64], mask: &[bool], rng: &mut R) -> usize {
        sample_action(&self.policy_forward(obs, mask), rng)
    }

    /// Most probable legal action.
    pub fn greedy(&self, obs: &[f64], mask: &[bool]) -> usize {
        argmax_legal(&self.policy.forward(obs), mask)
    }

    fn check(&self, batch: &[SacSample]) -> Result<(), SacError> {
        if batch.is_empty() {
            return Err(SacError::EmptyBatch);
        }
        for s in batch {
            for w in [s.obs.len(), s.next_obs.len()] {
                if w != self.obs_len() {
                    return Err(SacError::Shape {
                        expected: self.obs_len(),
                        got: w,
                    });
                }
            }
        }
        Ok(())
    }

    /// Bootstrap targets for given next actions `a′`.
    pub fn targets(&self, batch: &[SacSample], next_actions: &[usize]) -> Vec<f64> {
        batch
            .iter()
            .zip(next_actions)
            .map(|(s, &a2)| {
                if s.done {
                    return s.reward;
                }
                let logp = masked_log_softmax(&self.policy.forward(s.next_obs), s.next_mask);
                let qn = self.q_target.forward(s.next_obs)[a2];
                q_target(s.reward, false, self.hyper.gamma, self.hyper.alpha, qn, logp[a2])
            })
            .collect()
    }

    /// Mean squared Bellman error against fixed targets, and its gradient in φ.
    pub fn q_loss_and_grad(&self, batch: &[SacSample], targets: &[f64]) -> (f64, Vec<f64>) {
        let n = batch.len() as f64;
        let mut grad = vec![0.0; self.q.n_params()];
        let mut loss = 0.0;
        for (s, &y) in batch.iter().zip(targets) {
            let cache = self.q.forward_cached(s.obs);
            let diff = cache.output()[s.action] - y;
            loss += diff * diff / n;
            let mut dout = vec![0.0; self.n_actions()];
            dout[s.action] = 2.0 * diff / n;
            self.q.backward(&cache, &dout, &mut grad);
        }
        (loss, grad)
    }

    /// `(1/N) Σ w_i Σ_a π(a|s_i) (α log π(a|s_i) − Q(s_i, a))`, Q held fixed, and its gradient in θ.
    pub fn policy_loss_and_grad(&self, batch: &[SacSample], weights: &[f64]) -> (f64, Vec<f64>) {
        let n = batch.len() as f64;
        let alpha = self.hyper.alpha;
        let mut grad = vec![0.0; self.policy.n_params()];
        let mut loss = 0.0;
        for (s, &w) in batch.iter().zip(weights) {
            let q = self.q.forward(s.obs);
            let cache = self.policy.forward_cached(s.obs);
            let logp = masked_log_softmax(cache.output(), s.mask);
            let probs: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
            let f: Vec<f64> = (0..probs.len())
                .map(|a| if s.mask[a] { alpha * logp[a] - q[a] } else { 0.0 })
                .collect();
            let j: f64 = probs.iter().zip(&f).map(|(p, fa)| p * fa).sum();
            loss += w * j / n;
            let dout: Vec<f64> = (0..probs.len())
                .map(|a| if s.mask[a] { w / n * probs[a] * (f[a] - j) } else { 0.0 })
                .collect();
            self.policy.backward(&cache, &dout, &mut grad);
        }
        (loss, grad)
    }

    /// One Adam step on φ; the target network follows every
    /// `target_update_interval` critic updates.
    pub fn update_q(&mut self, batch: &[SacSample]) -> Result<f64, SacError> {
        self.check(batch)?;
        let gamma = self.hyper.gamma;
        let alpha = self.hyper.alpha;
        let mut targets = Vec::with_capacity(batch.len());
        for s in batch {
            if s.done {
                targets.push(s.reward);
                continue;
            }
            let logp = masked_log_softmax(&self.policy.forward(s.next_obs), s.next_mask);
            let probs: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
            let a2 = sample_action(&probs, &mut self.rng);
            let qn = self.q_target.forward(s.next_obs)[a2];
            targets.push(q_target(s.reward, false, gamma, alpha, qn, logp[a2]));
        }
        let (loss, grad) = self.q_loss_and_grad(batch, &targets);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(SacError::NonFinite { what: "q", value: loss });
        }
        self.q_opt.step(self.q.params_mut(), &grad);
        self.q_updates += 1;
        if self.q_updates % self.hyper.target_update_interval == 0 {
            soft_update(self.q.params(), self.q_target.params_mut(), self.hyper.tau_soft);
        }
        Ok(loss)
    }

    pub fn update_policy_weighted(&mut self, batch: &[SacSample], weights: &[f64]) -> Result<f64, SacError> {
        self.check(batch)?;
        for (index, &value) in weights.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(SacError::InvalidWeight { index, value });
            }
        }
        let (loss, grad) = self.policy_loss_and_grad(batch, weights);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(SacError::NonFinite {
                what: "policy",
                value: loss,
            });
        }
        self.policy_opt.step(self.policy.params_mut(), &grad);
        Ok(loss)
    }

    pub fn update_policy(&mut self, batch: &[SacSample]) -> Result<f64, SacError> {
        self.update_policy_weighted(batch, &vec![1.0; batch.len()])
    }

    /// Mean policy entropy over a batch of states.
    pub fn mean_entropy(&self, batch: &[SacSample]) -> f64 {
        if batch.is_empty() {
            return 0.0;
        }
        batch
            .iter()
            .map(|s| entropy(&self.policy_forward(s.obs, s.mask)))
            .sum::<f64>()
            / batch.len() as f64
    }
}
