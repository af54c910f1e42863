use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::grid::{EnvError, GridEnv, GridState, Scenario};
use crate::rl::{Encoder, ObsHistory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Rl,
    LlmActor,
    LlmCritic,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Rl => "rl",
            Source::LlmActor => "llm_actor",
            Source::LlmCritic => "llm_critic",
        }
    }
}

/// One stored step `(s, a, r, s′, d)` plus refinement bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: GridState,
    pub action: usize,
    pub reward: f64,
    pub next_state: GridState,
    /// Grid failure at `next_state`; reaching the horizon is not terminal.
    pub done: bool,
    pub source: Source,
    /// Reward the RL agent actually received for its own action.
    pub original_reward: f64,
    /// Reward of the stored action after refinement.
    pub refined_reward: f64,
    pub episode_id: u64,
    pub step_index: usize,
    pub scenario_id: String,
    /// Network inputs at `state` and `next_state`.
    pub obs: Vec<f64>,
    pub next_obs: Vec<f64>,
    /// Legal-action masks at `state` and `next_state`.
    pub mask: Vec<bool>,
    pub next_mask: Vec<bool>,
    /// Index of the advisor exchange that produced this transition.
    pub exchange_id: Option<u64>,
}

impl Transition {
    pub fn sample(&self) -> crate::rl::SacSample<'_> {
        crate::rl::SacSample {
            obs: &self.obs,
            mask: &self.mask,
            action: self.action,
            reward: self.reward,
            done: self.done,
            next_obs: &self.next_obs,
            next_mask: &self.next_mask,
        }
    }
}

/// Plays one episode with `policy` and returns its RL-sourced transitions.
pub fn record_episode<F>(
    env: &mut GridEnv,
    scenario: Arc<Scenario>,
    seed: u64,
    episode_id: u64,
    encoder: &Encoder,
    mut policy: F,
) -> Result<Vec<Transition>, EnvError>
where
    F: FnMut(&[f64], &[bool]) -> usize,
{
    let scenario_id = scenario.id.clone();
    let first = env.reset(scenario, seed)?;
    let mut history = ObsHistory::start(encoder.clone(), &first);
    let mut out = Vec::new();
    loop {
        let state = env.state().expect("reset").clone();
        let obs = history.encoding();
        let mask = env.legal_actions(&state);
        let action = policy(&obs, &mask);
        let step = env.step(action)?;
        let next = history.advance(&step.next_state);
        let failed = step.failed();
        out.push(Transition {
            state,
            action,
            reward: step.reward,
            next_mask: env.legal_actions(&step.next_state),
            next_state: step.next_state,
            done: failed,
            source: Source::Rl,
            original_reward: step.reward,
            refined_reward: step.reward,
            episode_id,
            step_index: out.len(),
            scenario_id: scenario_id.clone(),
            obs,
            next_obs: next.encoding(),
            mask,
            exchange_id: None,
        });
        if step.done {
            return Ok(out);
        }
        history = next;
    }
}
