//! Actor and critic advisors that refine stored experience.

pub mod actor;
pub mod backend;
pub mod critic;
pub mod http;
pub mod oracle;

pub use actor::{map_proposal, refine_action, select_refinement_candidates, RefineFailure, RefinementResult, MAX_ROUNDS};
pub use backend::{
    ActorBackend, ActorQuery, AdvisorExchange, BackendError, Canned, Counting, CriticBackend, CriticQuery, Role,
};
pub use critic::{select_key_steps, shape_rewards, summarize_episode, KeyStepConfig, KeyStepCriterion, ShapingResult};
pub use http::{HttpChat, HttpChatConfig};
pub use oracle::{
    normalized_returns, oracle_action, oracle_adjustments, rank_by_simulated_reward, ScriptedOracleActor,
    ScriptedOracleCritic,
};
