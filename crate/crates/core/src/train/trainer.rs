//! The training loop: act once into `D_RL`, think twice through the actor
//! and critic advisors, update on mixed batches.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{BackendKind, ConfigError, CriticActivation, TrainConfig};
use super::eval::{evaluate, EvalError, EvalReport};
use crate::advisor::{
    refine_action, select_key_steps, select_refinement_candidates, shape_rewards, summarize_episode, ActorBackend,
    AdvisorExchange, BackendError, CriticBackend, HttpChat, Role, ScriptedOracleActor, ScriptedOracleCritic,
};
use crate::experience::{sample_sft, write_sft, ReplayBuffers, SftError, Transition};
use crate::grid::{
    gen_scenarios, EnvError, GridEnv, GridTopology, Scenario, ScenarioError, Simulator, TopologyError,
};
use crate::rl::{save_checkpoint, CheckpointError, Encoder, ObsHistory, SacAgent, SacError, SacSample};
use crate::textio::ActorPromptConfig;

pub const METRICS_HEADER: &str = "step,episode,episode_reward,survival,q_loss,policy_loss,entropy,d_llm_size,actor_accept_rate,critic_edits,wall_clock";
pub const EVAL_HEADER: &str = "step,mean_reward,std_reward,mean_survival,std_survival";

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("environment failure at step {step}: {source}")]
    Env {
        step: u64,
        #[source]
        source: EnvError,
    },
    #[error("update failed at step {step}: {source}")]
    Update {
        step: u64,
        #[source]
        source: SacError,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Sft(#[from] SftError),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// One advisor activation tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Activation {
    pub step: u64,
    pub role: Role,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub episodes_completed: u64,
    pub last_episode_reward: f64,
    pub last_survival: f64,
    pub last_q_loss: f64,
    pub last_policy_loss: f64,
    pub last_entropy: f64,
    pub actor_candidates: u64,
    pub actor_accepted: u64,
    pub actor_queries: u64,
    pub critic_queries: u64,
    pub critic_edits: u64,
    pub refined_since_export: u64,
    pub sft_exports: u64,
}

impl TrainStats {
    pub fn actor_accept_rate(&self) -> f64 {
        if self.actor_candidates == 0 {
            0.0
        } else {
            self.actor_accepted as f64 / self.actor_candidates as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub step: u64,
    pub mean_reward: f64,
    pub std_reward: f64,
    pub mean_survival: f64,
    pub std_survival: f64,
}

/// Resumable training state. Replay contents are not part of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainCheckpoint {
    pub config: TrainConfig,
    pub step: u64,
    pub next_episode: u64,
    pub scenario_cursor: usize,
    pub agent: SacAgent,
    pub rng: ChaCha8Rng,
    pub stats: TrainStats,
    pub evals: Vec<EvalPoint>,
}

/// Both buffers plus every archived exchange, for offline SFT export.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplaySnapshot {
    pub topology: String,
    pub step: u64,
    pub buffers: ReplayBuffers,
    pub exchanges: Vec<AdvisorExchange>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub steps: u64,
    pub stats: TrainStats,
    pub evals: Vec<EvalPoint>,
    /// First evaluation step whose mean survival reached the target.
    pub steps_to_target: Option<u64>,
    pub final_eval: Option<EvalReport>,
}

impl TrainSummary {
    pub fn steps_to(evals: &[EvalPoint], target: f64) -> Option<u64> {
        evals.iter().find(|e| e.mean_survival >= target).map(|e| e.step)
    }
}

pub const SURVIVAL_TARGET: f64 = 0.9;

/// Backends named by the config.
pub fn build_backends(
    config: &TrainConfig,
) -> Result<(Box<dyn ActorBackend>, Box<dyn CriticBackend>), TrainError> {
    let b = &config.backend;
    let actor: Box<dyn ActorBackend> = match b.actor {
        BackendKind::Scripted => Box::new(ScriptedOracleActor::new(b.oracle_candidate_k)),
        BackendKind::Http => Box::new(HttpChat::new(b.actor_http.clone().expect("validated"))?),
    };
    let critic: Box<dyn CriticBackend> = match b.critic {
        BackendKind::Scripted => Box::new(ScriptedOracleCritic::new(b.oracle_critic_gamma, b.oracle_critic_margin)),
        BackendKind::Http => Box::new(HttpChat::new(b.critic_http.clone().expect("validated"))?),
    };
    Ok((actor, critic))
}

/// Training and evaluation scenario sets named by the config.
pub fn build_scenarios(
    config: &TrainConfig,
    topology: &GridTopology,
) -> Result<(Vec<Arc<Scenario>>, Vec<Arc<Scenario>>), ScenarioError> {
    let s = &config.scenarios;
    let train = gen_scenarios(topology, s.train_count, s.horizon, s.seed, &s.options)?;
    let mut eval = gen_scenarios(topology, s.eval_count, s.horizon, s.seed + 1, &s.options)?;
    for e in &mut eval {
        e.id = format!("eval-{}", e.id);
    }
    let wrap = |v: Vec<Scenario>| v.into_iter().map(Arc::new).collect();
    Ok((wrap(train), wrap(eval)))
}

struct Outputs {
    dir: PathBuf,
    metrics: BufWriter<File>,
    evals: BufWriter<File>,
    activations: BufWriter<File>,
    exchanges: BufWriter<File>,
}

impl Outputs {
    fn open(dir: &Path, append: bool) -> Result<Self, TrainError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| TrainError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let open = |name: &str, header: Option<&str>| -> Result<BufWriter<File>, TrainError> {
            let path = dir.join(name);
            let exists = path.exists();
            let file = if append {
                OpenOptions::new().create(true).append(true).open(&path)
            } else {
                File::create(&path)
            }
            .map_err(io(&path))?;
            let mut w = BufWriter::new(file);
            if let Some(h) = header {
                if !(append && exists) {
                    writeln!(w, "{h}").map_err(io(&path))?;
                }
            }
            Ok(w)
        };
        Ok(Outputs {
            metrics: open("metrics.csv", Some(METRICS_HEADER))?,
            evals: open("eval.csv", Some(EVAL_HEADER))?,
            activations: open("activations.csv", Some("step,role"))?,
            exchanges: open("exchanges.jsonl", None)?,
            dir: dir.to_path_buf(),
        })
    }

    fn flush(&mut self) -> Result<(), TrainError> {
        for w in [&mut self.metrics, &mut self.evals, &mut self.activations, &mut self.exchanges] {
            w.flush().map_err(|source| TrainError::Io {
                path: self.dir.clone(),
                source,
            })?;
        }
        Ok(())
    }
}

fn write_line(w: &mut BufWriter<File>, dir: &Path, line: &str) -> Result<(), TrainError> {
    writeln!(w, "{line}").map_err(|source| TrainError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

pub struct Trainer {
    config: TrainConfig,
    topology: Arc<GridTopology>,
    env: GridEnv,
    encoder: Encoder,
    agent: SacAgent,
    buffers: ReplayBuffers,
    rng: ChaCha8Rng,
    train_scenarios: Vec<Arc<Scenario>>,
    eval_scenarios: Vec<Arc<Scenario>>,
    simulators: HashMap<String, Simulator>,
    actor: Box<dyn ActorBackend>,
    critic: Box<dyn CriticBackend>,
    step: u64,
    next_episode: u64,
    episode: u64,
    scenario_cursor: usize,
    history: Option<ObsHistory>,
    episode_reward: f64,
    episode_steps: usize,
    last_completed: Option<u64>,
    last_critiqued: Option<u64>,
    stats: TrainStats,
    evals: Vec<EvalPoint>,
    activations: Vec<Activation>,
    exchanges: HashMap<u64, AdvisorExchange>,
    next_exchange_id: u64,
    prompt_config: ActorPromptConfig,
    outputs: Option<Outputs>,
    started: Instant,
}

impl Trainer {
    pub fn new(
        config: TrainConfig,
        actor: Box<dyn ActorBackend>,
        critic: Box<dyn CriticBackend>,
        out_dir: Option<&Path>,
    ) -> Result<Self, TrainError> {
        config.validate()?;
        let topology = Arc::new(GridTopology::resolve(&config.topology)?);
        let encoder = Encoder::new(&topology, config.sac.history_window);
        let n_actions = crate::grid::ActionTable::new(&topology).len();
        let agent = SacAgent::new(config.sac.clone(), encoder.input_len(), n_actions, config.seed)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0xACE);
        Self::assemble(config, topology, encoder, agent, rng, actor, critic, out_dir, false)
    }

    /// Scripted or HTTP backends as the config names them.
    pub fn from_config(config: TrainConfig, out_dir: Option<&Path>) -> Result<Self, TrainError> {
        let (actor, critic) = build_backends(&config)?;
        Self::new(config, actor, critic, out_dir)
    }

    /// Continues from `checkpoint` at `step + 1`. Replay buffers start empty.
    pub fn resume(
        checkpoint: TrainCheckpoint,
        actor: Box<dyn ActorBackend>,
        critic: Box<dyn CriticBackend>,
        out_dir: Option<&Path>,
    ) -> Result<Self, TrainError> {
        let topology = Arc::new(GridTopology::resolve(&checkpoint.config.topology)?);
        let encoder = Encoder::new(&topology, checkpoint.config.sac.history_window);
        let mut t = Self::assemble(
            checkpoint.config,
            topology,
            encoder,
            checkpoint.agent,
            checkpoint.rng,
            actor,
            critic,
            out_dir,
            true,
        )?;
        t.step = checkpoint.step;
        t.next_episode = checkpoint.next_episode;
        t.scenario_cursor = checkpoint.scenario_cursor;
        t.stats = checkpoint.stats;
        t.evals = checkpoint.evals;
        Ok(t)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        config: TrainConfig,
        topology: Arc<GridTopology>,
        encoder: Encoder,
        agent: SacAgent,
        rng: ChaCha8Rng,
        actor: Box<dyn ActorBackend>,
        critic: Box<dyn CriticBackend>,
        out_dir: Option<&Path>,
        append: bool,
    ) -> Result<Self, TrainError> {
        let (train_scenarios, eval_scenarios) = build_scenarios(&config, &topology)?;
        let env = GridEnv::new(topology.clone(), config.env.clone());
        let simulators = train_scenarios
            .iter()
            .map(|s| (s.id.clone(), env.simulator_for(s.clone())))
            .collect();
        let outputs = out_dir.map(|d| Outputs::open(d, append)).transpose()?;
        Ok(Trainer {
            buffers: ReplayBuffers::from_config(&config.mix),
            prompt_config: ActorPromptConfig {
                display_threshold: config.display_threshold,
            },
            config,
            topology,
            env,
            encoder,
            agent,
            rng,
            train_scenarios,
            eval_scenarios,
            simulators,
            actor,
            critic,
            step: 0,
            next_episode: 0,
            episode: 0,
            scenario_cursor: 0,
            history: None,
            episode_reward: 0.0,
            episode_steps: 0,
            last_completed: None,
            last_critiqued: None,
            stats: TrainStats::default(),
            evals: Vec::new(),
            activations: Vec::new(),
            exchanges: HashMap::new(),
            next_exchange_id: 0,
            outputs,
            started: Instant::now(),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn topology(&self) -> &Arc<GridTopology> {
        &self.topology
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn agent(&self) -> &SacAgent {
        &self.agent
    }

    pub fn buffers(&self) -> &ReplayBuffers {
        &self.buffers
    }

    pub fn stats(&self) -> &TrainStats {
        &self.stats
    }

    pub fn evals(&self) -> &[EvalPoint] {
        &self.evals
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn activation_count(&self, role: Role) -> usize {
        self.activations.iter().filter(|a| a.role == role).count()
    }

    pub fn exchanges(&self) -> &HashMap<u64, AdvisorExchange> {
        &self.exchanges
    }

    pub fn eval_scenarios(&self) -> &[Arc<Scenario>] {
        &self.eval_scenarios
    }

    /// Greedy evaluation of the current policy on the evaluation set.
    pub fn evaluate(&self) -> Result<EvalReport, EvalError> {
        evaluate(
            &self.agent,
            &self.topology,
            &self.config.env,
            &self.eval_scenarios,
            &self.config.scenarios.eval_seeds,
        )
    }

    pub fn checkpoint(&self) -> TrainCheckpoint {
        TrainCheckpoint {
            config: self.config.clone(),
            step: self.step,
            next_episode: self.next_episode,
            scenario_cursor: self.scenario_cursor,
            agent: self.agent.clone(),
            rng: self.rng.clone(),
            stats: self.stats.clone(),
            evals: self.evals.clone(),
        }
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<(), TrainError> {
        Ok(save_checkpoint(path, &self.checkpoint())?)
    }

    pub fn replay_snapshot(&self) -> ReplaySnapshot {
        let mut exchanges: Vec<AdvisorExchange> = self.exchanges.values().cloned().collect();
        exchanges.sort_by_key(|e| e.id);
        ReplaySnapshot {
            topology: self.config.topology.clone(),
            step: self.step,
            buffers: self.buffers.clone(),
            exchanges,
        }
    }

    fn env_error(&self, source: EnvError) -> TrainError {
        TrainError::Env { step: self.step, source }
    }

    fn start_episode(&mut self) -> Result<(), TrainError> {
        let scenario = self.train_scenarios[self.scenario_cursor % self.train_scenarios.len()].clone();
        self.scenario_cursor = (self.scenario_cursor + 1) % self.train_scenarios.len();
        let seed = self.rng.random::<u64>();
        let state = self.env.reset(scenario, seed).map_err(|e| self.env_error(e))?;
        self.history = Some(ObsHistory::start(self.encoder.clone(), &state));
        self.episode = self.next_episode;
        self.next_episode += 1;
        self.episode_reward = 0.0;
        self.episode_steps = 0;
        Ok(())
    }

    /// Runs until `total_steps` environment steps have been taken.
    pub fn run(&mut self) -> Result<TrainSummary, TrainError> {
        while self.step < self.config.total_steps {
            self.train_step()?;
        }
        let final_eval = Some(self.evaluate()?);
        if let Some(out) = &mut self.outputs {
            out.flush()?;
        }
        if let Some(dir) = self.outputs.as_ref().map(|o| o.dir.clone()) {
            self.save_checkpoint(&dir.join("checkpoint.ckpt"))?;
            let path = dir.join("replay.json");
            let text = serde_json::to_string(&self.replay_snapshot()).expect("snapshot serializes");
            std::fs::write(&path, text).map_err(|source| TrainError::Io { path, source })?;
            let path = dir.join("eval_report.json");
            let text = serde_json::to_string_pretty(&final_eval).expect("report serializes");
            std::fs::write(&path, text).map_err(|source| TrainError::Io { path, source })?;
        }
        Ok(TrainSummary {
            steps: self.step,
            stats: self.stats.clone(),
            steps_to_target: TrainSummary::steps_to(&self.evals, SURVIVAL_TARGET),
            evals: self.evals.clone(),
            final_eval,
        })
    }

    /// One environment step followed by whatever the schedule calls for.
    pub fn train_step(&mut self) -> Result<(), TrainError> {
        if self.history.is_none() || self.env.is_done() {
            self.start_episode()?;
        }
        self.step += 1;
        self.interact()?;
        let step = self.step;
        if self.config.actor_enabled && step % self.config.actor_query_interval == 0 {
            self.actor_tick()?;
        }
        if step % self.config.critic_query_interval == 0 && self.critic_active() {
            self.critic_tick()?;
        }
        if step >= self.config.learning_starts
            && step % self.config.update_every == 0
            && self.buffers.rl().len() >= self.config.sac.batch_size
        {
            self.update()?;
        }
        if self.stats.refined_since_export >= self.config.sft_export_every {
            self.export_sft()?;
        }
        if step % self.config.eval_every == 0 {
            self.periodic_eval()?;
        }
        if step % self.config.log_every == 0 {
            self.log_metrics()?;
        }
        if step % self.config.checkpoint_every == 0 {
            if let Some(dir) = self.outputs.as_ref().map(|o| o.dir.clone()) {
                self.save_checkpoint(&dir.join("checkpoint.ckpt"))?;
            }
        }
        Ok(())
    }

    fn critic_active(&self) -> bool {
        match self.config.critic_activation {
            CriticActivation::Always => true,
            CriticActivation::Never => false,
            CriticActivation::LlmBufferFull => self.buffers.llm_is_full(),
        }
    }

    fn interact(&mut self) -> Result<(), TrainError> {
        let state = self.env.state().expect("episode started").clone();
        let history = self.history.as_ref().expect("episode started");
        let obs = history.encoding();
        let mask = self.env.legal_actions(&state);
        let action = self.agent.act(&obs, &mask, &mut self.rng);
        let out = self.env.step(action).map_err(|e| self.env_error(e))?;
        let next_history = history.advance(&out.next_state);
        let next_obs = next_history.encoding();
        let next_mask = self.env.legal_actions(&out.next_state);
        let failed = out.failed();
        self.buffers.push_rl(Transition {
            state,
            action,
            reward: out.reward,
            next_state: out.next_state,
            done: failed,
            source: crate::experience::Source::Rl,
            original_reward: out.reward,
            refined_reward: out.reward,
            episode_id: self.episode,
            step_index: self.episode_steps,
            scenario_id: self.env.scenario().expect("reset").id.clone(),
            obs,
            next_obs,
            mask,
            next_mask,
            exchange_id: None,
        });
        self.history = Some(next_history);
        self.episode_reward += out.reward;
        self.episode_steps += 1;
        if out.done {
            let horizon = self.env.scenario().expect("reset").horizon;
            self.stats.episodes_completed += 1;
            self.stats.last_episode_reward = self.episode_reward;
            self.stats.last_survival = self.episode_steps as f64 / horizon as f64;
            self.last_completed = Some(self.episode);
        }
        Ok(())
    }

    fn archive(&mut self, mut exchange: AdvisorExchange) -> Result<u64, TrainError> {
        let id = self.next_exchange_id;
        self.next_exchange_id += 1;
        exchange.id = id;
        if let Some(out) = &mut self.outputs {
            let line = serde_json::to_string(&exchange).expect("exchange serializes");
            let dir = out.dir.clone();
            write_line(&mut out.exchanges, &dir, &line)?;
        }
        self.exchanges.insert(id, exchange);
        Ok(id)
    }

    fn log_activation(&mut self, role: Role) -> Result<(), TrainError> {
        let a = Activation { step: self.step, role };
        self.activations.push(a);
        if let Some(out) = &mut self.outputs {
            let dir = out.dir.clone();
            let role = match role {
                Role::Actor => "actor",
                Role::Critic => "critic",
            };
            write_line(&mut out.activations, &dir, &format!("{},{role}", a.step))?;
        }
        Ok(())
    }

    /// Refines low-reward agent decisions drawn from the recent window of `D_RL`.
    fn actor_tick(&mut self) -> Result<(), TrainError> {
        self.log_activation(Role::Actor)?;
        let rl = self.buffers.rl();
        if rl.is_empty() {
            return Ok(());
        }
        let window = rl.len().min(self.config.sac.batch_size * self.config.refine_window_factor);
        let offset = rl.len() - window;
        let amount = self.config.sac.batch_size.min(window);
        let mut picks = rand::seq::index::sample(&mut self.rng, window, amount).into_vec();
        picks.sort_unstable();
        let batch: Vec<&Transition> = picks.iter().map(|&i| &rl[offset + i]).collect();
        let candidates: Vec<Transition> = select_refinement_candidates(&batch, self.config.mix.r_lower)
            .into_iter()
            .cloned()
            .collect();
        for candidate in candidates {
            let Some(simulator) = self.simulators.get(&candidate.scenario_id) else {
                continue;
            };
            self.stats.actor_candidates += 1;
            let result = refine_action(
                &candidate,
                simulator,
                &self.encoder,
                self.actor.as_mut(),
                &self.prompt_config,
                self.config.max_rounds,
            );
            self.stats.actor_queries += result.exchanges.len() as u64;
            let mut accepted_id = None;
            for ex in result.exchanges {
                let accepted = ex.accepted;
                let id = self.archive(ex)?;
                if accepted {
                    accepted_id = Some(id);
                }
            }
            if let Ok(mut refined) = result.outcome {
                refined.exchange_id = accepted_id;
                self.buffers.push_llm(refined).expect("refined transitions are advisor-sourced");
                self.stats.actor_accepted += 1;
                self.stats.refined_since_export += 1;
            }
        }
        Ok(())
    }

    /// Reviews the most recent finished episode, once per episode.
    fn critic_tick(&mut self) -> Result<(), TrainError> {
        self.log_activation(Role::Critic)?;
        let Some(episode) = self.last_completed else {
            return Ok(());
        };
        if self.last_critiqued == Some(episode) {
            return Ok(());
        }
        self.last_critiqued = Some(episode);
        let mut steps: Vec<&Transition> = self.buffers.rl().iter().filter(|t| t.episode_id == episode).collect();
        steps.sort_by_key(|t| t.step_index);
        if steps.is_empty() || steps.iter().enumerate().any(|(i, t)| t.step_index != i) {
            return Ok(());
        }
        let summaries = summarize_episode(&self.topology, self.env.table(), &steps);
        let keys = select_key_steps(&summaries, &self.config.key_steps());
        if keys.is_empty() {
            return Ok(());
        }
        let result = shape_rewards(
            &mut self.buffers,
            episode,
            &summaries,
            &keys,
            self.critic.as_mut(),
            self.config.mix.k_adjust,
            self.config.mix.max_adjustments_per_episode,
            &self.config.reasons,
        );
        self.stats.critic_queries += 1;
        self.stats.critic_edits += result.applied.len() as u64;
        let id = self.archive(result.exchange)?;
        for (step, _) in result.applied {
            self.buffers.set_exchange(episode, step, id);
        }
        Ok(())
    }

    fn update(&mut self) -> Result<(), TrainError> {
        let batch = self
            .buffers
            .sample_mixed(self.config.sac.batch_size, &self.config.mix, &mut self.rng)
            .expect("RL buffer holds a batch");
        let samples: Vec<SacSample> = batch.draws.iter().map(|&d| self.buffers.get(d).sample()).collect();
        let step = self.step;
        let wrap = |source| TrainError::Update { step, source };
        let q_loss = self.agent.update_q(&samples).map_err(wrap)?;
        let policy_loss = self.agent.update_policy_weighted(&samples, &batch.weights).map_err(wrap)?;
        self.stats.last_q_loss = q_loss;
        self.stats.last_policy_loss = policy_loss;
        self.stats.last_entropy = self.agent.mean_entropy(&samples);
        Ok(())
    }

    fn export_sft(&mut self) -> Result<(), TrainError> {
        self.stats.refined_since_export = 0;
        self.stats.sft_exports += 1;
        let Some(dir) = self.outputs.as_ref().map(|o| o.dir.join("sft")) else {
            return Ok(());
        };
        std::fs::create_dir_all(&dir).map_err(|source| TrainError::Io {
            path: dir.clone(),
            source,
        })?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ (self.stats.sft_exports << 20));
        let records = sample_sft(
            &self.buffers,
            &self.exchanges,
            &self.topology,
            self.env.table(),
            &self.config.mix,
            self.config.sft_sample_size,
            &mut rng,
        );
        write_sft(&dir.join(format!("sft-{:04}.jsonl", self.stats.sft_exports)), &records)?;
        Ok(())
    }

    fn periodic_eval(&mut self) -> Result<(), TrainError> {
        let report = self.evaluate()?;
        let point = EvalPoint {
            step: self.step,
            mean_reward: report.mean_reward,
            std_reward: report.std_reward,
            mean_survival: report.mean_survival,
            std_survival: report.std_survival,
        };
        log::info!(
            "step {}: eval reward {:.3}, survival {:.3}",
            point.step,
            point.mean_reward,
            point.mean_survival
        );
        if let Some(out) = &mut self.outputs {
            let dir = out.dir.clone();
            let line = format!(
                "{},{},{},{},{}",
                point.step, point.mean_reward, point.std_reward, point.mean_survival, point.std_survival
            );
            write_line(&mut out.evals, &dir, &line)?;
        }
        self.evals.push(point);
        Ok(())
    }

    /// Current metrics row, without trailing newline.
    pub fn metrics_row(&self) -> String {
        let s = &self.stats;
        let wall = if self.config.record_wall_clock {
            self.started.elapsed().as_secs_f64()
        } else {
            0.0
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.step,
            s.episodes_completed,
            s.last_episode_reward,
            s.last_survival,
            s.last_q_loss,
            s.last_policy_loss,
            s.last_entropy,
            self.buffers.llm().len(),
            s.actor_accept_rate(),
            s.critic_edits,
            wall
        )
    }

    fn log_metrics(&mut self) -> Result<(), TrainError> {
        let row = self.metrics_row();
        if let Some(out) = &mut self.outputs {
            let dir = out.dir.clone();
            write_line(&mut out.metrics, &dir, &row)?;
        }
        Ok(())
    }
}

impl Drop for Trainer {
    fn drop(&mut self) {
        if let Some(out) = &mut self.outputs {
            let _ = out.flush();
        }
    }
}
