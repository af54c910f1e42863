//! Critic shaping: re-score key decisions of a finished episode.

use serde::{Deserialize, Serialize};

use super::backend::{AdvisorExchange, CriticBackend, CriticQuery, Role};
use crate::experience::{ReplayBuffers, Transition};
use crate::grid::{line_changes, GridTopology, ActionTable};
use crate::textio::{
    critic_task_prefix, parse_critic_lists, serialize_critic_prompt, snap_adjustment, ReasonThresholds,
    StepSummary, MAX_KEY_POINTS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyStepCriterion {
    /// `|r| > r̄`
    Reward,
    /// `|Δ max ρ| > ρ̄`
    State,
    /// The action changed the topology.
    Action,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyStepConfig {
    pub criterion: KeyStepCriterion,
    pub r_bar: f64,
    pub rho_bar: f64,
    /// Most key steps shown to the critic.
    pub max_input: usize,
}

impl Default for KeyStepConfig {
    fn default() -> Self {
        KeyStepConfig {
            criterion: KeyStepCriterion::Reward,
            r_bar: 0.5,
            rho_bar: 0.1,
            max_input: 8,
        }
    }
}

/// Critic-facing view of an episode's transitions, in step order.
pub fn summarize_episode(topology: &GridTopology, table: &ActionTable, episode: &[&Transition]) -> Vec<StepSummary> {
    episode
        .iter()
        .enumerate()
        .map(|(index, t)| {
            let (max_rho, max_rho_line) = t.next_state.max_rho();
            StepSummary {
                index,
                clock: t.state.clock,
                changes: line_changes(topology, &t.state, &table.get(t.action)),
                reward: t.reward,
                max_rho,
                max_rho_line,
                overloaded: t.next_state.overloaded_lines(),
                max_rho_before: t.state.max_rho().0,
                overloaded_before: t.state.overloaded_lines(),
            }
        })
        .collect()
}

/// Steps passing the configured criterion, capped at `max_input` by larger
/// `|r|` then earlier step; returned in step order.
pub fn select_key_steps(steps: &[StepSummary], config: &KeyStepConfig) -> Vec<usize> {
    let mut picked: Vec<usize> = steps
        .iter()
        .filter(|s| match config.criterion {
            KeyStepCriterion::Reward => s.reward.abs() > config.r_bar,
            KeyStepCriterion::State => (s.max_rho - s.max_rho_before).abs() > config.rho_bar,
            KeyStepCriterion::Action => !s.changes.is_empty(),
        })
        .map(|s| s.index)
        .collect();
    picked.sort_by(|&a, &b| steps[b].reward.abs().total_cmp(&steps[a].reward.abs()).then(a.cmp(&b)));
    picked.truncate(config.max_input);
    picked.sort_unstable();
    picked
}

#[derive(Debug, Clone)]
pub struct ShapingResult {
    /// Adjustments written to the buffer, `(step, adjustment)`.
    pub applied: Vec<(usize, f64)>,
    /// Entries dropped by the filters.
    pub rejected: usize,
    pub exchange: AdvisorExchange,
}

/// Queries the critic about `key_steps` of a finished episode and applies
/// the surviving adjustments to `D_RL`. Responses with more than four points
/// or mismatched lists are rejected wholesale; individual entries outside
/// the four-level set or outside the key set are dropped.
#[allow(clippy::too_many_arguments)]
pub fn shape_rewards(
    buffers: &mut ReplayBuffers,
    episode_id: u64,
    steps: &[StepSummary],
    key_steps: &[usize],
    backend: &mut dyn CriticBackend,
    k: f64,
    max_adjustments: usize,
    thresholds: &ReasonThresholds,
) -> ShapingResult {
    let system = critic_task_prefix(k);
    let prompt = serialize_critic_prompt(steps, key_steps, thresholds);
    let mut exchange = AdvisorExchange {
        id: 0,
        role: Role::Critic,
        episode_id,
        step_index: None,
        round: 1,
        system: system.clone(),
        prompt: prompt.clone(),
        response: String::new(),
        parse_error: None,
        simulated_reward: None,
        accepted: false,
    };
    let query = CriticQuery {
        system: &system,
        prompt: &prompt,
        steps,
        key_steps,
        k,
    };
    let response = match backend.assess(&query) {
        Ok(r) => r,
        Err(e) => {
            exchange.parse_error = Some(format!("backend failure: {e}"));
            return ShapingResult {
                applied: Vec::new(),
                rejected: 0,
                exchange,
            };
        }
    };
    exchange.response = response;
    let (indices, adjustments) = match parse_critic_lists(&exchange.response) {
        Ok(lists) => lists,
        Err(e) => {
            exchange.parse_error = Some(e.to_string());
            return ShapingResult {
                applied: Vec::new(),
                rejected: 0,
                exchange,
            };
        }
    };
    if indices.len() != adjustments.len() || indices.len() > MAX_KEY_POINTS {
        exchange.parse_error = Some(format!(
            "rejected: {} indices, {} adjustments",
            indices.len(),
            adjustments.len()
        ));
        return ShapingResult {
            applied: Vec::new(),
            rejected: indices.len(),
            exchange,
        };
    }
    let mut applied = Vec::new();
    let mut rejected = 0;
    for (i, a) in indices.into_iter().zip(adjustments) {
        let level = snap_adjustment(a, k);
        let usable = level.is_some()
            && i < steps.len()
            && key_steps.contains(&i)
            && !applied.iter().any(|&(j, _)| j == i)
            && applied.len() < max_adjustments;
        match level {
            Some(level) if usable && buffers.replace_reward(episode_id, i, level) => applied.push((i, level)),
            _ => rejected += 1,
        }
    }
    exchange.accepted = !applied.is_empty();
    ShapingResult {
        applied,
        rejected,
        exchange,
    }
}
