//! Training orchestration, evaluation and the command-line surface.

pub mod cli;
pub mod config;
pub mod eval;
pub mod trainer;

pub use config::{BackendConfig, BackendKind, ConfigError, CriticActivation, ScenarioSetConfig, TrainConfig};
pub use eval::{evaluate, evaluate_with, mean_std, EpisodeEval, EvalError, EvalReport, ScenarioEval};
pub use trainer::{
    build_backends, build_scenarios, Activation, EvalPoint, ReplaySnapshot, TrainCheckpoint, TrainError, TrainStats,
    TrainSummary, Trainer, SURVIVAL_TARGET,
};
