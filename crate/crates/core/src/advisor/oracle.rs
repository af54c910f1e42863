//! Deterministic stand-ins for the two language-model advisors.

use super::backend::{ActorBackend, ActorQuery, BackendError, CriticBackend, CriticQuery};
use crate::grid::{line_changes, GridState, LineChangeMap, Simulator};
use crate::textio::{format_actor_response, format_critic_response, BadAction, MAX_KEY_POINTS};

/// Legal actions ranked by simulated one-step reward (ties: lower index first).
pub fn rank_by_simulated_reward(simulator: &Simulator, state: &GridState) -> Vec<(usize, f64)> {
    let mask = simulator.legal_actions(state);
    let mut ranked: Vec<(usize, f64)> = (0..mask.len())
        .filter(|&i| mask[i])
        .map(|i| (i, simulator.simulate(state, i).reward))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked
}

/// Best legal action whose line changes are not on the bad list, among the
/// `candidate_k` best by simulated reward (`0` = whole table).
pub fn oracle_action(
    simulator: &Simulator,
    state: &GridState,
    bad_actions: &[BadAction],
    candidate_k: usize,
) -> Option<(usize, f64, LineChangeMap)> {
    let mut ranked = rank_by_simulated_reward(simulator, state);
    if candidate_k > 0 {
        ranked.truncate(candidate_k);
    }
    ranked.into_iter().find_map(|(i, r)| {
        let changes = line_changes(simulator.topology(), state, &simulator.table().get(i));
        (!bad_actions.iter().any(|b| b.changes == changes)).then_some((i, r, changes))
    })
}

/// Proposes the line changes of the one-step simulated-reward argmax.
#[derive(Debug, Clone)]
pub struct ScriptedOracleActor {
    pub candidate_k: usize,
}

impl ScriptedOracleActor {
    pub fn new(candidate_k: usize) -> Self {
        ScriptedOracleActor { candidate_k }
    }
}

impl ActorBackend for ScriptedOracleActor {
    fn propose(&mut self, query: &ActorQuery) -> Result<String, BackendError> {
        Ok(match oracle_action(query.simulator, query.state, query.bad_actions, self.candidate_k) {
            Some((_, reward, changes)) => format_actor_response(
                &changes,
                &format!("simulation ranks these line changes best, with a one-step reward of {reward:.4}."),
            ),
            None => format_actor_response(&LineChangeMap::new(), "every candidate is a known bad action."),
        })
    }
}

/// Per-step discounted return-to-go, normalized by the discount mass of the
/// remaining horizon so that constant rewards give constant values.
pub fn normalized_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let n = rewards.len();
    let mut g = vec![0.0; n];
    let mut mass = vec![0.0; n];
    let (mut acc, mut m) = (0.0, 0.0);
    for t in (0..n).rev() {
        acc = rewards[t] + gamma * acc;
        m = 1.0 + gamma * m;
        g[t] = acc;
        mass[t] = m;
    }
    g.iter().zip(&mass).map(|(a, b)| a / b).collect()
}

/// Adjustments the scripted critic assigns: `±2K` when a key step's
/// normalized return-to-go deviates from the trajectory mean by more than
/// `2·margin`, `±K` beyond `margin`; at most four, largest deviations first.
pub fn oracle_adjustments(rewards: &[f64], key_steps: &[usize], gamma: f64, margin: f64, k: f64) -> Vec<(usize, f64)> {
    if rewards.is_empty() {
        return Vec::new();
    }
    let norm = normalized_returns(rewards, gamma);
    let mean = norm.iter().sum::<f64>() / norm.len() as f64;
    let mut scored: Vec<(usize, f64)> = key_steps
        .iter()
        .filter(|&&i| i < rewards.len())
        .map(|&i| (i, norm[i] - mean))
        .filter(|(_, d)| d.abs() > margin)
        .collect();
    scored.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
    scored.truncate(MAX_KEY_POINTS);
    scored.sort_by_key(|&(i, _)| i);
    scored
        .into_iter()
        .map(|(i, d)| {
            let level = if d.abs() > 2.0 * margin { 2.0 * k } else { k };
            (i, level.copysign(d))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ScriptedOracleCritic {
    pub gamma: f64,
    pub margin: f64,
}

impl ScriptedOracleCritic {
    pub fn new(gamma: f64, margin: f64) -> Self {
        ScriptedOracleCritic { gamma, margin }
    }
}

impl CriticBackend for ScriptedOracleCritic {
    fn assess(&mut self, query: &CriticQuery) -> Result<String, BackendError> {
        let rewards: Vec<f64> = query.steps.iter().map(|s| s.reward).collect();
        Ok(format_critic_response(&oracle_adjustments(
            &rewards,
            query.key_steps,
            self.gamma,
            self.margin,
            query.k,
        )))
    }
}
