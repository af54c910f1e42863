//! Desk-scale power-grid environment.

pub mod action;
pub mod env;
pub mod powerflow;
pub mod scenario;
pub mod state;
pub mod topology;

pub use action::{action_family_count, action_space_size, line_changes, Action, ActionTable, LineChangeMap};
pub use env::{EnvConfig, EnvError, GridEnv, OpponentConfig, Simulator, StepInfo, StepOutcome};
pub use powerflow::{dc_power_flow, dispatch_and_solve, FlowFailure, FlowSolution, PowerFlowError};
pub use scenario::{
    gen_scenarios, nominal_scenario, read_scenarios, write_scenarios, Scenario, ScenarioError, ScenarioOptions, DAY_HORIZON,
};
pub use state::{Clock, GridState};
pub use topology::{build_topology, ring3, toy5, GridTopology, TopologyError, TopologySpec};
