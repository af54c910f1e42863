//! Training configuration, read from TOML. Every field is required.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::advisor::{HttpChatConfig, KeyStepConfig, KeyStepCriterion};
use crate::experience::MixConfig;
use crate::grid::{EnvConfig, ScenarioOptions};
use crate::rl::SacHyperparams;
use crate::textio::ReasonThresholds;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {msg}")]
    Io { path: String, msg: String },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// When the critic starts being queried.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticActivation {
    LlmBufferFull,
    Always,
    Never,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Scripted,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSetConfig {
    pub train_count: usize,
    pub eval_count: usize,
    pub horizon: usize,
    /// Seed of the training scenarios; evaluation uses `seed + 1`.
    pub seed: u64,
    /// Opponent seeds of the evaluation episodes, one episode per seed and scenario.
    pub eval_seeds: Vec<u64>,
    pub options: ScenarioOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub actor: BackendKind,
    pub critic: BackendKind,
    /// Candidates examined by the scripted actor (`0` = whole table).
    pub oracle_candidate_k: usize,
    pub oracle_critic_gamma: f64,
    pub oracle_critic_margin: f64,
    pub actor_http: Option<HttpChatConfig>,
    pub critic_http: Option<HttpChatConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub run_name: String,
    /// `toy5`, `ring3` or a topology file.
    pub topology: String,
    pub seed: u64,
    pub total_steps: u64,
    /// Environment steps before the first network update.
    pub learning_starts: u64,
    pub update_every: u64,
    pub eval_every: u64,
    pub log_every: u64,
    pub checkpoint_every: u64,
    pub actor_enabled: bool,
    pub actor_query_interval: u64,
    pub critic_query_interval: u64,
    pub critic_activation: CriticActivation,
    pub max_rounds: usize,
    /// Refinement batches are drawn from the newest `batch_size × factor` RL transitions.
    pub refine_window_factor: usize,
    pub display_threshold: f64,
    /// Refined samples between SFT exports.
    pub sft_export_every: u64,
    pub sft_sample_size: usize,
    pub record_wall_clock: bool,
    pub scenarios: ScenarioSetConfig,
    pub env: EnvConfig,
    pub sac: SacHyperparams,
    pub mix: MixConfig,
    pub key_step_criterion: KeyStepCriterion,
    /// Most key steps shown to the critic per episode.
    pub key_step_max_input: usize,
    pub reasons: ReasonThresholds,
    pub backend: BackendConfig,
}

impl TrainConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: TrainConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        for (name, v) in [
            ("total_steps", self.total_steps),
            ("update_every", self.update_every),
            ("eval_every", self.eval_every),
            ("log_every", self.log_every),
            ("checkpoint_every", self.checkpoint_every),
            ("actor_query_interval", self.actor_query_interval),
            ("critic_query_interval", self.critic_query_interval),
            ("sft_export_every", self.sft_export_every),
        ] {
            if v == 0 {
                return invalid(&format!("{name} must be positive"));
            }
        }
        if self.max_rounds == 0 || self.max_rounds > crate::advisor::MAX_ROUNDS {
            return invalid(&format!("max_rounds must be in 1..={}", crate::advisor::MAX_ROUNDS));
        }
        if self.refine_window_factor == 0 {
            return invalid("refine_window_factor must be positive");
        }
        if self.scenarios.train_count == 0 || self.scenarios.eval_count == 0 {
            return invalid("scenario counts must be positive");
        }
        if self.scenarios.horizon == 0 {
            return invalid("scenarios.horizon must be positive");
        }
        if self.scenarios.eval_seeds.is_empty() {
            return invalid("scenarios.eval_seeds must not be empty");
        }
        if self.backend.actor == BackendKind::Http && self.backend.actor_http.is_none() {
            return invalid("backend.actor = \"http\" needs a [backend.actor_http] table");
        }
        if self.backend.critic == BackendKind::Http && self.backend.critic_http.is_none() {
            return invalid("backend.critic = \"http\" needs a [backend.critic_http] table");
        }
        self.sac.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.mix.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    /// Key-step selection, thresholds taken from the mix settings.
    pub fn key_steps(&self) -> KeyStepConfig {
        KeyStepConfig {
            criterion: self.key_step_criterion,
            r_bar: self.mix.r_bar,
            rho_bar: self.mix.rho_bar,
            max_input: self.key_step_max_input,
        }
    }

    /// Plain SAC: no advisors and no draws from the LLM buffer.
    pub fn plain_sac(mut self) -> Self {
        self.actor_enabled = false;
        self.critic_activation = CriticActivation::Never;
        self.mix.beta_mix = 0.0;
        self
    }

    /// Full loop with the critic switched off.
    pub fn without_critic(mut self) -> Self {
        self.critic_activation = CriticActivation::Never;
        self
    }

    /// Desk-scale toy5 run with scripted advisors.
    pub fn desk() -> Self {
        Self::from_toml_str(DESK_CONFIG).expect("bundled desk config is valid")
    }

    /// Full-length toy5 run with the published hyperparameters.
    pub fn full_default() -> Self {
        Self::from_toml_str(DEFAULT_CONFIG).expect("bundled default config is valid")
    }
}

/// The bundled desk configuration, also shipped as `configs/desk.toml`.
pub const DESK_CONFIG: &str = include_str!("../../../../configs/desk.toml");
/// `configs/default.toml`
pub const DEFAULT_CONFIG: &str = include_str!("../../../../configs/default.toml");
