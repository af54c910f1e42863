//! Greedy evaluation of a trained policy. No advisor is reachable from here.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{EnvConfig, EnvError, GridEnv, GridTopology, Scenario};
use crate::rl::{Encoder, ObsHistory, SacAgent};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no evaluation scenarios")]
    NoScenarios,
    #[error("no evaluation seeds")]
    NoSeeds,
    #[error("policy expects {expected} inputs, encoder produces {got}")]
    Shape { expected: usize, got: usize },
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// One evaluation episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeEval {
    pub scenario_id: String,
    pub seed: u64,
    /// Undiscounted sum of rewards.
    pub reward: f64,
    pub steps: usize,
    pub horizon: usize,
    /// `steps / horizon`
    pub survival: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEval {
    pub scenario_id: String,
    pub mean_reward: f64,
    pub std_reward: f64,
    pub mean_survival: f64,
    pub std_survival: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub episodes: Vec<EpisodeEval>,
    pub per_scenario: Vec<ScenarioEval>,
    pub mean_reward: f64,
    pub std_reward: f64,
    pub mean_survival: f64,
    pub std_survival: f64,
    pub wall_clock_s: f64,
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Runs `policy` once per (scenario, seed) pair.
pub fn evaluate_with<F>(
    topology: &Arc<GridTopology>,
    env_config: &EnvConfig,
    scenarios: &[Arc<Scenario>],
    seeds: &[u64],
    history_window: usize,
    mut policy: F,
) -> Result<EvalReport, EvalError>
where
    F: FnMut(&[f64], &[bool]) -> usize,
{
    if scenarios.is_empty() {
        return Err(EvalError::NoScenarios);
    }
    if seeds.is_empty() {
        return Err(EvalError::NoSeeds);
    }
    let started = Instant::now();
    let encoder = Encoder::new(topology, history_window);
    let mut env = GridEnv::new(topology.clone(), env_config.clone());
    let mut episodes = Vec::new();
    let mut per_scenario = Vec::new();
    for scenario in scenarios {
        let first = episodes.len();
        for &seed in seeds {
            let state = env.reset(scenario.clone(), seed)?;
            let mut history = ObsHistory::start(encoder.clone(), &state);
            let (mut reward, mut steps) = (0.0, 0);
            loop {
                let state = env.state().expect("reset").clone();
                let mask = env.legal_actions(&state);
                let action = policy(&history.encoding(), &mask);
                let out = env.step(action)?;
                reward += out.reward;
                steps += 1;
                if out.done {
                    break;
                }
                history.push(&out.next_state);
            }
            episodes.push(EpisodeEval {
                scenario_id: scenario.id.clone(),
                seed,
                reward,
                steps,
                horizon: scenario.horizon,
                survival: steps as f64 / scenario.horizon as f64,
            });
        }
        let group = &episodes[first..];
        let (mean_reward, std_reward) = mean_std(&group.iter().map(|e| e.reward).collect::<Vec<_>>());
        let (mean_survival, std_survival) = mean_std(&group.iter().map(|e| e.survival).collect::<Vec<_>>());
        per_scenario.push(ScenarioEval {
            scenario_id: scenario.id.clone(),
            mean_reward,
            std_reward,
            mean_survival,
            std_survival,
        });
    }
    let (mean_reward, std_reward) = mean_std(&episodes.iter().map(|e| e.reward).collect::<Vec<_>>());
    let (mean_survival, std_survival) = mean_std(&episodes.iter().map(|e| e.survival).collect::<Vec<_>>());
    Ok(EvalReport {
        episodes,
        per_scenario,
        mean_reward,
        std_reward,
        mean_survival,
        std_survival,
        wall_clock_s: started.elapsed().as_secs_f64(),
    })
}

/// Greedy rollout of `agent`: the most probable legal action every step.
pub fn evaluate(
    agent: &SacAgent,
    topology: &Arc<GridTopology>,
    env_config: &EnvConfig,
    scenarios: &[Arc<Scenario>],
    seeds: &[u64],
) -> Result<EvalReport, EvalError> {
    let window = agent.hyper.history_window;
    let got = Encoder::new(topology, window).input_len();
    if got != agent.obs_len() {
        return Err(EvalError::Shape {
            expected: agent.obs_len(),
            got,
        });
    }
    evaluate_with(topology, env_config, scenarios, seeds, window, |obs, mask| agent.greedy(obs, mask))
}
