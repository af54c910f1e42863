//! Actor refinement: rewrite poorly rewarded RL decisions.

use serde::{Deserialize, Serialize};

use super::backend::{ActorBackend, ActorQuery, AdvisorExchange, Role};
use crate::experience::{Source, Transition};
use crate::grid::{line_changes, GridState, LineChangeMap, Simulator};
use crate::rl::Encoder;
use crate::textio::{
    parse_actor_response, serialize_actor_prompt, validate_line_ids, ActorPromptConfig, BadAction,
    ACTOR_TASK_PREFIX,
};

pub const MAX_ROUNDS: usize = 5;

/// RL-born transitions of `batch` rewarded strictly below `r_lower`.
pub fn select_refinement_candidates<'a>(batch: &[&'a Transition], r_lower: f64) -> Vec<&'a Transition> {
    batch
        .iter()
        .copied()
        .filter(|t| t.source == Source::Rl && t.original_reward < r_lower)
        .collect()
}

/// Table index realizing a proposed `{line: bus}` map at `state`.
///
/// Legal actions with exactly the proposed line changes win (best simulated
/// reward, then lowest index); otherwise the legal action matching the most
/// proposed entries. `None` when no legal action matches any entry.
pub fn map_proposal(simulator: &Simulator, state: &GridState, proposal: &LineChangeMap) -> Option<usize> {
    let mask = simulator.legal_actions(state);
    let table = simulator.table();
    let mut exact = Vec::new();
    let mut best_overlap = 0;
    let mut overlapping = Vec::new();
    for i in (0..table.len()).filter(|&i| mask[i]) {
        let changes = line_changes(simulator.topology(), state, &table.get(i));
        if &changes == proposal {
            exact.push(i);
            continue;
        }
        let overlap = proposal.iter().filter(|(l, b)| changes.get(l) == Some(b)).count();
        if overlap > best_overlap {
            best_overlap = overlap;
            overlapping.clear();
        }
        if overlap == best_overlap && overlap > 0 {
            overlapping.push(i);
        }
    }
    let pool = if exact.is_empty() { overlapping } else { exact };
    let mut best: Option<(usize, f64)> = None;
    for i in pool {
        let r = simulator.simulate(state, i).reward;
        if best.is_none_or(|(_, br)| r > br) {
            best = Some((i, r));
        }
    }
    best.map(|(i, _)| i)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RefineFailure {
    /// Every round was rejected or unusable.
    RoundsExhausted,
    /// The backend could not be reached.
    Backend(String),
}

#[derive(Debug, Clone)]
pub struct RefinementResult {
    pub outcome: Result<Transition, RefineFailure>,
    pub exchanges: Vec<AdvisorExchange>,
    /// Bad list as it stood when the loop ended, seed entry first.
    pub bad_actions: Vec<BadAction>,
}

/// Multi-round actor loop for one candidate. Each round the backend sees
/// the state and every bad action so far (the first being the RL agent's
/// own); the proposal is mapped onto the action table and simulated, and is
/// accepted only if it strictly beats the original reward.
pub fn refine_action(
    transition: &Transition,
    simulator: &Simulator,
    encoder: &Encoder,
    backend: &mut dyn ActorBackend,
    prompt_config: &ActorPromptConfig,
    max_rounds: usize,
) -> RefinementResult {
    let topology = simulator.topology();
    let state = &transition.state;
    let rl_action = simulator.table().get(transition.action);
    let mut bad = vec![BadAction {
        changes: line_changes(topology, state, &rl_action),
        reward: transition.original_reward,
    }];
    let mut exchanges = Vec::new();
    for round in 1..=max_rounds.min(MAX_ROUNDS) {
        let prompt = serialize_actor_prompt(topology, state, &bad, prompt_config);
        let query = ActorQuery {
            system: ACTOR_TASK_PREFIX,
            prompt: &prompt,
            state,
            bad_actions: &bad,
            simulator,
        };
        let mut exchange = AdvisorExchange {
            id: 0,
            role: Role::Actor,
            episode_id: transition.episode_id,
            step_index: Some(transition.step_index),
            round,
            system: ACTOR_TASK_PREFIX.to_string(),
            prompt: prompt.clone(),
            response: String::new(),
            parse_error: None,
            simulated_reward: None,
            accepted: false,
        };
        let response = match backend.propose(&query) {
            Ok(r) => r,
            Err(e) => {
                exchange.parse_error = Some(format!("backend failure: {e}"));
                exchanges.push(exchange);
                return RefinementResult {
                    outcome: Err(RefineFailure::Backend(e.to_string())),
                    exchanges,
                    bad_actions: bad,
                };
            }
        };
        exchange.response = response;
        let proposal = match parse_actor_response(&exchange.response)
            .and_then(|p| validate_line_ids(&p, topology.n_lines()).map(|_| p))
        {
            Ok(p) => p,
            Err(e) => {
                exchange.parse_error = Some(e.to_string());
                exchanges.push(exchange);
                continue;
            }
        };
        let Some(index) = map_proposal(simulator, state, &proposal) else {
            exchange.parse_error = Some("no legal action realizes the proposed line changes".into());
            exchanges.push(exchange);
            continue;
        };
        let changes = line_changes(topology, state, &simulator.table().get(index));
        if bad.iter().any(|b| b.changes == changes) {
            exchange.simulated_reward = bad.iter().find(|b| b.changes == changes).map(|b| b.reward);
            exchanges.push(exchange);
            continue;
        }
        let sim = simulator.simulate(state, index);
        exchange.simulated_reward = Some(sim.reward);
        if sim.reward > transition.original_reward {
            exchange.accepted = true;
            exchanges.push(exchange);
            let next_obs = encoder.advance_encoding(&transition.obs, &sim.next_state);
            let next_mask = simulator.legal_actions(&sim.next_state);
            let refined = Transition {
                state: state.clone(),
                action: index,
                reward: sim.reward,
                done: sim.failed(),
                next_state: sim.next_state,
                source: Source::LlmActor,
                original_reward: transition.original_reward,
                refined_reward: sim.reward,
                episode_id: transition.episode_id,
                step_index: transition.step_index,
                scenario_id: transition.scenario_id.clone(),
                obs: transition.obs.clone(),
                next_obs,
                mask: transition.mask.clone(),
                next_mask,
                exchange_id: None,
            };
            return RefinementResult {
                outcome: Ok(refined),
                exchanges,
                bad_actions: bad,
            };
        }
        exchanges.push(exchange);
        bad.push(BadAction {
            changes,
            reward: sim.reward,
        });
    }
    RefinementResult {
        outcome: Err(RefineFailure::RoundsExhausted),
        exchanges,
        bad_actions: bad,
    }
}
