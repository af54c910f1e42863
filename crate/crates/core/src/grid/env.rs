//! Episode dynamics: action application, overflow protection, opponent and reward.

use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::action::{apply_topology, Action, ActionTable};
use super::powerflow::{dispatch_and_solve, FlowFailure};
use super::scenario::{Scenario, ScenarioError};
use super::state::GridState;
use super::topology::GridTopology;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("initial operating point is infeasible: {0}")]
    InfeasibleStart(FlowFailure),
    #[error("episode is over; call reset")]
    EpisodeOver,
    #[error("environment has not been reset")]
    NotReset,
    #[error("action index {index} outside table of {len}")]
    UnknownAction { index: usize, len: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpponentConfig {
    /// Per-step attack probability.
    pub probability: f64,
    /// Attacks pick uniformly among the `top_k` most loaded in-service lines.
    pub top_k: usize,
    /// Cooldown applied to the attacked line.
    pub cooldown: u32,
}

impl Default for OpponentConfig {
    fn default() -> Self {
        OpponentConfig {
            probability: 0.05,
            top_k: 3,
            cooldown: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    /// Consecutive overflowed steps before a line trips.
    pub overflow_steps_to_trip: u32,
    /// A line above this ratio trips immediately.
    pub hard_overflow_rho: f64,
    /// Cooldown after acting on a line or substation.
    pub action_cooldown: u32,
    /// Cooldown of a line tripped by overflow protection.
    pub trip_cooldown: u32,
    pub lambda_fail: f64,
    pub loss_factor: f64,
    pub opponent: OpponentConfig,
    /// Restricts the legal action set to these table indices (do-nothing always stays legal).
    #[serde(default)]
    pub action_whitelist: Option<Vec<usize>>,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            overflow_steps_to_trip: 3,
            hard_overflow_rho: 2.0,
            action_cooldown: 3,
            trip_cooldown: 3,
            lambda_fail: 1.0,
            loss_factor: 0.003,
            opponent: OpponentConfig::default(),
            action_whitelist: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    /// Why the grid collapsed, if it did.
    pub failure: Option<String>,
    /// Horizon reached.
    pub truncated: bool,
    /// The requested action violated a cooldown and was replaced by do-nothing.
    pub illegal_action: bool,
    pub attacked_line: Option<usize>,
    pub tripped_lines: Vec<usize>,
    pub load_mw: f64,
    pub production_mw: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: GridState,
    pub reward: f64,
    /// Failure or horizon end.
    pub done: bool,
    pub info: StepInfo,
}

impl StepOutcome {
    pub fn failed(&self) -> bool {
        self.info.failure.is_some()
    }
}

/// `load / production` while alive, `-λ_fail` on failure.
pub fn reward(load_mw: f64, production_mw: f64, failed: bool, lambda_fail: f64) -> f64 {
    if failed {
        -lambda_fail
    } else if production_mw <= 0.0 {
        1.0
    } else {
        load_mw / production_mw
    }
}

/// Disconnects one of the `top_k` most loaded in-service lines with the
/// configured probability. Returns the attacked line.
pub fn opponent_step<R: Rng + ?Sized>(
    config: &OpponentConfig,
    state: &mut GridState,
    rng: &mut R,
) -> Option<usize> {
    if !rng.random_bool(config.probability.clamp(0.0, 1.0)) {
        return None;
    }
    let line = pick_attack_target(config.top_k, state, rng)?;
    state.line_status[line] = false;
    state.flow_mw[line] = 0.0;
    state.rho[line] = 0.0;
    state.overflow_steps[line] = 0;
    state.cooldown_line[line] = config.cooldown;
    Some(line)
}

/// Uniform pick among the `top_k` in-service lines with the highest ρ (ties by id).
pub fn pick_attack_target<R: Rng + ?Sized>(top_k: usize, state: &GridState, rng: &mut R) -> Option<usize> {
    let mut candidates: Vec<usize> = (0..state.rho.len()).filter(|&l| state.line_status[l]).collect();
    candidates.sort_by(|&a, &b| state.rho[b].total_cmp(&state.rho[a]).then(a.cmp(&b)));
    candidates.truncate(top_k.max(1));
    candidates.choose(rng).copied()
}

fn initial_state(topology: &GridTopology, scenario: &Scenario) -> GridState {
    let (loads, gens) = scenario.row(0);
    GridState {
        timestep: 0,
        clock: scenario.clock_at(0),
        load_mw: loads.to_vec(),
        gen_mw: gens.to_vec(),
        flow_mw: vec![0.0; topology.n_lines()],
        rho: vec![0.0; topology.n_lines()],
        bus_assignment: vec![0; topology.n_elements()],
        line_status: vec![true; topology.n_lines()],
        overflow_steps: vec![0; topology.n_lines()],
        cooldown_line: vec![0; topology.n_lines()],
        cooldown_sub: vec![0; topology.n_substations()],
        time_next_maintenance: vec![-1; topology.n_lines()],
        duration_next_maintenance: vec![0; topology.n_lines()],
    }
}

/// Read-only one-step predictor bound to a scenario; never draws opponent attacks.
#[derive(Debug, Clone)]
pub struct Simulator {
    topology: Arc<GridTopology>,
    table: Arc<ActionTable>,
    config: Arc<EnvConfig>,
    scenario: Arc<Scenario>,
}

impl Simulator {
    pub fn new(
        topology: Arc<GridTopology>,
        table: Arc<ActionTable>,
        config: Arc<EnvConfig>,
        scenario: Arc<Scenario>,
    ) -> Self {
        Simulator {
            topology,
            table,
            config,
            scenario,
        }
    }

    pub fn topology(&self) -> &GridTopology {
        &self.topology
    }

    pub fn table(&self) -> &ActionTable {
        &self.table
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn legal_actions(&self, state: &GridState) -> Vec<bool> {
        legal_mask(&self.table, &self.config, state)
    }

    pub fn simulate(&self, state: &GridState, action_index: usize) -> StepOutcome {
        transition::<ChaCha8Rng>(
            &self.topology,
            &self.table,
            &self.config,
            &self.scenario,
            state,
            action_index,
            None,
        )
    }
}

fn legal_mask(table: &ActionTable, config: &EnvConfig, state: &GridState) -> Vec<bool> {
    let mut mask = table.legal_mask(state);
    if let Some(allowed) = &config.action_whitelist {
        let mut keep = vec![false; mask.len()];
        keep[0] = true;
        for &i in allowed {
            if i < keep.len() {
                keep[i] = true;
            }
        }
        for (m, k) in mask.iter_mut().zip(keep) {
            *m &= k;
        }
    }
    mask
}

/// The transition function shared by `step` and `simulate`; the opponent acts
/// only when an RNG is supplied.
fn transition<R: Rng>(
    topology: &GridTopology,
    table: &ActionTable,
    config: &EnvConfig,
    scenario: &Scenario,
    state: &GridState,
    action_index: usize,
    opponent_rng: Option<&mut R>,
) -> StepOutcome {
    let mut info = StepInfo::default();
    let legal = action_index < table.len() && legal_mask(table, config, state)[action_index];
    let action = if legal {
        table.get(action_index)
    } else {
        info.illegal_action = true;
        Action::NoOp
    };

    let mut next = state.clone();
    for c in next.cooldown_line.iter_mut().chain(next.cooldown_sub.iter_mut()) {
        *c = c.saturating_sub(1);
    }
    apply_topology(topology, &mut next, &action);
    match action {
        Action::NoOp => {}
        Action::LineSwitch { line } | Action::LineBusSet { line, .. } => {
            next.cooldown_line[line] = config.action_cooldown;
            if !next.line_status[line] {
                next.overflow_steps[line] = 0;
            }
        }
        Action::SubstationAssign { substation, .. } => {
            next.cooldown_sub[substation] = config.action_cooldown;
        }
    }

    let t = state.timestep + 1;
    info.truncated = t >= scenario.horizon;
    let (loads, gens) = scenario.row(t);
    next.timestep = t;
    next.clock = scenario.clock_at(t);
    next.load_mw = loads.to_vec();

    if let Some(rng) = opponent_rng {
        if scenario.opponent_enabled {
            info.attacked_line = opponent_step(&config.opponent, &mut next, rng);
        }
    }

    let mut first_pass = true;
    let solved = loop {
        let sol = match dispatch_and_solve(
            topology,
            &next.bus_assignment,
            &next.line_status,
            &next.load_mw,
            gens,
            config.loss_factor,
        ) {
            Ok(sol) => sol,
            Err(failure) => break Err(failure),
        };
        next.flow_mw = sol.flow_mw.clone();
        next.rho = sol.rho.clone();
        next.gen_mw = sol.gen_mw.clone();
        let mut trips = Vec::new();
        for line in 0..topology.n_lines() {
            if !next.line_status[line] {
                next.overflow_steps[line] = 0;
                continue;
            }
            if first_pass {
                if next.rho[line] > 1.0 {
                    next.overflow_steps[line] += 1;
                } else {
                    next.overflow_steps[line] = 0;
                }
            }
            if next.rho[line] > config.hard_overflow_rho
                || next.overflow_steps[line] >= config.overflow_steps_to_trip
            {
                trips.push(line);
            }
        }
        first_pass = false;
        if trips.is_empty() {
            break Ok(sol);
        }
        for &line in &trips {
            next.line_status[line] = false;
            next.overflow_steps[line] = 0;
            next.cooldown_line[line] = next.cooldown_line[line].max(config.trip_cooldown);
        }
        info.tripped_lines.extend(trips);
    };

    let outcome_reward = match solved {
        Ok(sol) => {
            info.load_mw = sol.total_load;
            info.production_mw = sol.total_production;
            if sol.total_load > sol.total_production + 1e-9 {
                info.failure = Some("demand exceeds production".into());
                -config.lambda_fail
            } else {
                reward(sol.total_load, sol.total_production, false, config.lambda_fail)
            }
        }
        Err(failure) => {
            info.failure = Some(failure.to_string());
            info.load_mw = next.total_load();
            next.flow_mw.iter_mut().for_each(|f| *f = 0.0);
            next.rho.iter_mut().for_each(|r| *r = 0.0);
            -config.lambda_fail
        }
    };
    let done = info.failure.is_some() || info.truncated;
    StepOutcome {
        next_state: next,
        reward: outcome_reward,
        done,
        info,
    }
}

/// A single-threaded environment instance.
#[derive(Debug, Clone)]
pub struct GridEnv {
    topology: Arc<GridTopology>,
    table: Arc<ActionTable>,
    config: Arc<EnvConfig>,
    scenario: Option<Arc<Scenario>>,
    state: Option<GridState>,
    rng: ChaCha8Rng,
    done: bool,
}

impl GridEnv {
    pub fn new(topology: Arc<GridTopology>, config: EnvConfig) -> Self {
        let table = Arc::new(ActionTable::new(&topology));
        GridEnv {
            topology,
            table,
            config: Arc::new(config),
            scenario: None,
            state: None,
            rng: ChaCha8Rng::seed_from_u64(0),
            done: true,
        }
    }

    pub fn topology(&self) -> &Arc<GridTopology> {
        &self.topology
    }

    pub fn table(&self) -> &Arc<ActionTable> {
        &self.table
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn scenario(&self) -> Option<&Arc<Scenario>> {
        self.scenario.as_ref()
    }

    pub fn state(&self) -> Option<&GridState> {
        self.state.as_ref()
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn reset(&mut self, scenario: Arc<Scenario>, seed: u64) -> Result<GridState, EnvError> {
        scenario.validate_for(&self.topology)?;
        let mut state = initial_state(&self.topology, &scenario);
        let (_, gens) = scenario.row(0);
        let sol = dispatch_and_solve(
            &self.topology,
            &state.bus_assignment,
            &state.line_status,
            &state.load_mw,
            gens,
            self.config.loss_factor,
        )
        .map_err(EnvError::InfeasibleStart)?;
        state.flow_mw = sol.flow_mw;
        state.rho = sol.rho;
        state.gen_mw = sol.gen_mw;
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.scenario = Some(scenario);
        self.state = Some(state.clone());
        self.done = false;
        Ok(state)
    }

    pub fn legal_actions(&self, state: &GridState) -> Vec<bool> {
        legal_mask(&self.table, &self.config, state)
    }

    pub fn step(&mut self, action_index: usize) -> Result<StepOutcome, EnvError> {
        if action_index >= self.table.len() {
            return Err(EnvError::UnknownAction {
                index: action_index,
                len: self.table.len(),
            });
        }
        let (Some(scenario), Some(state)) = (&self.scenario, &self.state) else {
            return Err(EnvError::NotReset);
        };
        if self.done {
            return Err(EnvError::EpisodeOver);
        }
        let out = transition(
            &self.topology,
            &self.table,
            &self.config,
            scenario,
            state,
            action_index,
            Some(&mut self.rng),
        );
        self.state = Some(out.next_state.clone());
        self.done = out.done;
        Ok(out)
    }

    /// One-step prediction from an arbitrary state of the current scenario.
    pub fn simulate(&self, state: &GridState, action_index: usize) -> Result<StepOutcome, EnvError> {
        Ok(self.simulator()?.simulate(state, action_index))
    }

    pub fn simulator(&self) -> Result<Simulator, EnvError> {
        let scenario = self.scenario.clone().ok_or(EnvError::NotReset)?;
        Ok(Simulator::new(
            self.topology.clone(),
            self.table.clone(),
            self.config.clone(),
            scenario,
        ))
    }

    pub fn simulator_for(&self, scenario: Arc<Scenario>) -> Simulator {
        Simulator::new(self.topology.clone(), self.table.clone(), self.config.clone(), scenario)
    }
}
