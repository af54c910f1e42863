//! The `ace` command line.
//!
//! Exit codes: 0 success, 1 config or validation failure, 2 usage error,
//! 3 runtime failure.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{BackendKind, TrainConfig};
use super::eval::evaluate;
use super::trainer::{build_backends, build_scenarios, ReplaySnapshot, TrainCheckpoint, Trainer};
use crate::advisor::{AdvisorExchange, Role};
use crate::experience::{sample_sft, write_sft};
use crate::grid::{gen_scenarios, write_scenarios, ActionTable, GridTopology, ScenarioOptions};
use crate::rl::load_checkpoint;
use crate::textio::{parse_actor_response, parse_critic_lists};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Bearer token for HTTP advisors when the config names no variable.
pub const API_KEY_ENV: &str = "ACE_API_KEY";

#[derive(Debug, Parser)]
#[command(name = "ace", version, about = "Grid topology control with advisor-refined soft actor-critic")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BackendArg {
    Scripted,
    Http,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train an agent from a config file.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides both advisor backends.
        #[arg(long, value_enum)]
        backend: Option<BackendArg>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Overrides `total_steps`.
        #[arg(long)]
        steps: Option<u64>,
        /// Continue from a checkpoint instead of starting fresh.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Greedy evaluation of a checkpoint; writes `eval_report.json`.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Evaluation seeds; defaults to the checkpoint's config.
        #[arg(long = "seed")]
        seeds: Vec<u64>,
        /// Replaces the checkpoint's config (scenarios and environment).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Sample an SFT file from a saved replay snapshot.
    ExportSft {
        #[arg(long)]
        replay: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        sample_size: Option<usize>,
    },
    /// Write synthetic scenarios to a directory.
    GenScenarios {
        #[arg(long, default_value = "toy5")]
        topology: String,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = crate::grid::DAY_HORIZON)]
        horizon: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        opponent: bool,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Re-parse archived advisor transcripts and report parse statistics.
    ReplayExchanges {
        #[arg(long)]
        input: PathBuf,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Runtime(_) => EXIT_RUNTIME,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Runtime(m) => m,
        }
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

fn config_err<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Config(e.to_string())
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Train {
            config,
            seed,
            backend,
            out_dir,
            steps,
            resume,
        } => train(&config, seed, backend, &out_dir, steps, resume.as_deref()),
        Command::Evaluate {
            checkpoint,
            seeds,
            config,
            out_dir,
        } => evaluate_checkpoint(&checkpoint, seeds, config.as_deref(), &out_dir),
        Command::ExportSft {
            replay,
            config,
            output,
            seed,
            sample_size,
        } => export_sft(&replay, &config, &output, seed, sample_size),
        Command::GenScenarios {
            topology,
            count,
            horizon,
            seed,
            opponent,
            out_dir,
        } => gen(&topology, count, horizon, seed, opponent, &out_dir),
        Command::ReplayExchanges { input } => replay_exchanges(&input),
    }
}

/// Applies command-line overrides and fills in the default credential variable.
fn apply_overrides(config: &mut TrainConfig, seed: Option<u64>, backend: Option<BackendArg>, steps: Option<u64>) {
    if let Some(s) = seed {
        config.seed = s;
    }
    if let Some(n) = steps {
        config.total_steps = n;
    }
    if let Some(b) = backend {
        let kind = match b {
            BackendArg::Scripted => BackendKind::Scripted,
            BackendArg::Http => BackendKind::Http,
        };
        config.backend.actor = kind;
        config.backend.critic = kind;
    }
    for http in [&mut config.backend.actor_http, &mut config.backend.critic_http].into_iter().flatten() {
        if http.api_key_env.is_none() {
            http.api_key_env = Some(API_KEY_ENV.into());
        }
    }
}

fn train(
    config_path: &Path,
    seed: Option<u64>,
    backend: Option<BackendArg>,
    out_dir: &Path,
    steps: Option<u64>,
    resume: Option<&Path>,
) -> Result<(), Failure> {
    let mut config = TrainConfig::load(config_path).map_err(config_err)?;
    apply_overrides(&mut config, seed, backend, steps);
    config.validate().map_err(config_err)?;
    let mut trainer = match resume {
        Some(path) => {
            let mut ckpt: TrainCheckpoint = load_checkpoint(path).map_err(runtime)?;
            ckpt.config.total_steps = config.total_steps;
            let (actor, critic) = build_backends(&ckpt.config).map_err(runtime)?;
            Trainer::resume(ckpt, actor, critic, Some(out_dir)).map_err(runtime)?
        }
        None => Trainer::from_config(config, Some(out_dir)).map_err(runtime)?,
    };
    let summary = trainer.run().map_err(runtime)?;
    let final_eval = summary.final_eval.as_ref().expect("run evaluates");
    println!(
        "trained {} steps: mean reward {:.3}, mean survival {:.3}, steps to target {}",
        summary.steps,
        final_eval.mean_reward,
        final_eval.mean_survival,
        summary
            .steps_to_target
            .map_or_else(|| "not reached".to_string(), |s| s.to_string())
    );
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(runtime)?;
    }
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    std::fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn evaluate_checkpoint(
    checkpoint: &Path,
    seeds: Vec<u64>,
    config_path: Option<&Path>,
    out_dir: &Path,
) -> Result<(), Failure> {
    let ckpt: TrainCheckpoint = load_checkpoint(checkpoint).map_err(runtime)?;
    let config = match config_path {
        Some(p) => TrainConfig::load(p).map_err(config_err)?,
        None => ckpt.config.clone(),
    };
    let topology = Arc::new(GridTopology::resolve(&config.topology).map_err(config_err)?);
    let (_, scenarios) = build_scenarios(&config, &topology).map_err(runtime)?;
    let seeds = if seeds.is_empty() {
        config.scenarios.eval_seeds.clone()
    } else {
        seeds
    };
    let report = evaluate(&ckpt.agent, &topology, &config.env, &scenarios, &seeds).map_err(runtime)?;
    let path = out_dir.join("eval_report.json");
    write_json(&path, &report)?;
    println!(
        "evaluated {} episodes: mean reward {:.3}, mean survival {:.3} -> {}",
        report.episodes.len(),
        report.mean_reward,
        report.mean_survival,
        path.display()
    );
    Ok(())
}

fn export_sft(
    replay: &Path,
    config_path: &Path,
    output: &Path,
    seed: Option<u64>,
    sample_size: Option<usize>,
) -> Result<(), Failure> {
    let config = TrainConfig::load(config_path).map_err(config_err)?;
    let text = std::fs::read_to_string(replay).map_err(|e| Failure::Runtime(format!("{}: {e}", replay.display())))?;
    let snapshot: ReplaySnapshot = serde_json::from_str(&text).map_err(runtime)?;
    let topology = GridTopology::resolve(&snapshot.topology).map_err(config_err)?;
    let table = ActionTable::new(&topology);
    let exchanges: HashMap<u64, AdvisorExchange> = snapshot.exchanges.into_iter().map(|e| (e.id, e)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(config.seed));
    let records = sample_sft(
        &snapshot.buffers,
        &exchanges,
        &topology,
        &table,
        &config.mix,
        sample_size.unwrap_or(config.sft_sample_size),
        &mut rng,
    );
    write_sft(output, &records).map_err(runtime)?;
    println!("wrote {} SFT records to {}", records.len(), output.display());
    Ok(())
}

fn gen(topology: &str, count: usize, horizon: usize, seed: u64, opponent: bool, out_dir: &Path) -> Result<(), Failure> {
    let topology = GridTopology::resolve(topology).map_err(config_err)?;
    let options = ScenarioOptions {
        opponent_enabled: opponent,
        ..ScenarioOptions::default()
    };
    let scenarios = gen_scenarios(&topology, count, horizon, seed, &options).map_err(config_err)?;
    std::fs::create_dir_all(out_dir).map_err(runtime)?;
    let paths = write_scenarios(out_dir, &scenarios).map_err(runtime)?;
    println!("wrote {} scenarios to {}", paths.len(), out_dir.display());
    Ok(())
}

/// Parse statistics over an archived transcript file.
#[derive(Debug, Default, Clone, PartialEq, Eq, Serialize)]
pub struct ReplayStats {
    pub exchanges: usize,
    pub actor: usize,
    pub critic: usize,
    pub parsed: usize,
    pub failed: usize,
    pub accepted: usize,
    /// Exchanges whose re-parse outcome differs from the archived one.
    pub mismatched: usize,
}

/// Re-parses every exchange in a JSON-lines transcript.
pub fn replay_stats(path: &Path) -> Result<ReplayStats, String> {
    let file = std::fs::File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut stats = ReplayStats::default();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        if line.trim().is_empty() {
            continue;
        }
        let ex: AdvisorExchange = serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", i + 1))?;
        stats.exchanges += 1;
        let ok = match ex.role {
            Role::Actor => {
                stats.actor += 1;
                parse_actor_response(&ex.response).is_ok()
            }
            Role::Critic => {
                stats.critic += 1;
                parse_critic_lists(&ex.response).is_ok()
            }
        };
        if ok {
            stats.parsed += 1;
        } else {
            stats.failed += 1;
        }
        if ok != ex.parse_error.is_none() {
            stats.mismatched += 1;
        }
        if ex.accepted {
            stats.accepted += 1;
        }
    }
    Ok(stats)
}

fn replay_exchanges(input: &Path) -> Result<(), Failure> {
    let stats = replay_stats(input).map_err(Failure::Runtime)?;
    println!("{}", serde_json::to_string_pretty(&stats).expect("stats serialize"));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_subcommand_is_usage_error() {
        assert_eq!(run(["ace", "fly"]), EXIT_USAGE);
        assert_eq!(run(["ace", "train", "--bogus"]), EXIT_USAGE);
    }

    #[test]
    fn help_exits_cleanly() {
        assert_eq!(run(["ace", "--help"]), EXIT_OK);
    }

    #[test]
    fn missing_config_file_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let code = run([
            "ace",
            "train",
            "--config",
            dir.path().join("nope.toml").to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_CONFIG);
    }

    #[test]
    fn default_credential_variable_is_filled_in() {
        let mut c = TrainConfig::desk();
        c.backend.actor_http = Some(crate::advisor::HttpChatConfig {
            api_key_env: None,
            ..crate::advisor::HttpChatConfig::actor_default("http://127.0.0.1:1/v1", "m")
        });
        apply_overrides(&mut c, Some(9), Some(BackendArg::Http), None);
        assert_eq!(c.seed, 9);
        assert_eq!(c.backend.actor, BackendKind::Http);
        assert_eq!(c.backend.actor_http.as_ref().unwrap().api_key_env.as_deref(), Some(API_KEY_ENV));
        assert!(c.validate().is_err(), "critic http table is still missing");
    }
}
