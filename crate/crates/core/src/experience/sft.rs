//! Supervised fine-tuning export drawn from the mixed sampling law.
//!
//! Line-delimited JSON. The first line is a header
//! `{"schema":"ace-sft-v1","records":N}`; each following line is one record
//! with fields in the order `role, source, prompt, response, reward,
//! original_reward, episode_id, step_index`.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::buffer::{MixConfig, ReplayBuffers};
use super::transition::{Source, Transition};
use crate::advisor::{AdvisorExchange, Role};
use crate::grid::{line_changes, ActionTable, GridTopology};
use crate::textio::{format_actor_response, serialize_actor_prompt, ActorPromptConfig, ACTOR_TASK_PREFIX};

pub const SFT_SCHEMA: &str = "ace-sft-v1";

#[derive(Debug, Error)]
pub enum SftError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed SFT file, line {line}: {msg}")]
    Format { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftHeader {
    pub schema: String,
    pub records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftRecord {
    pub role: Role,
    pub source: Source,
    pub prompt: String,
    pub response: String,
    pub reward: f64,
    pub original_reward: f64,
    pub episode_id: u64,
    pub step_index: usize,
}

/// Pairs a transition with the exchange that produced it; agent-born
/// transitions get a synthesized actor prompt and their own action as response.
pub fn sft_record(
    t: &Transition,
    exchanges: &HashMap<u64, AdvisorExchange>,
    topology: &GridTopology,
    table: &ActionTable,
    prompt_config: &ActorPromptConfig,
) -> SftRecord {
    let linked = t.exchange_id.and_then(|id| exchanges.get(&id));
    let (role, prompt, response) = match linked {
        Some(ex) => (ex.role, format!("{}\n{}", ex.system, ex.prompt), ex.response.clone()),
        None => {
            let changes = line_changes(topology, &t.state, &table.get(t.action));
            (
                Role::Actor,
                format!(
                    "{ACTOR_TASK_PREFIX}\n{}",
                    serialize_actor_prompt(topology, &t.state, &[], prompt_config)
                ),
                format_actor_response(&changes, "action taken by the agent."),
            )
        }
    };
    SftRecord {
        role,
        source: t.source,
        prompt,
        response,
        reward: t.reward,
        original_reward: t.original_reward,
        episode_id: t.episode_id,
        step_index: t.step_index,
    }
}

/// Draws `sample_size` transitions from the mixed law and builds their records.
pub fn sample_sft<R: Rng + ?Sized>(
    buffers: &ReplayBuffers,
    exchanges: &HashMap<u64, AdvisorExchange>,
    topology: &GridTopology,
    table: &ActionTable,
    mix: &MixConfig,
    sample_size: usize,
    rng: &mut R,
) -> Vec<SftRecord> {
    if buffers.rl().is_empty() {
        return Vec::new();
    }
    let batch = buffers
        .sample_mixed(sample_size, mix, rng)
        .expect("non-empty RL buffer");
    let prompt_config = ActorPromptConfig::default();
    batch
        .draws
        .iter()
        .map(|&d| sft_record(buffers.get(d), exchanges, topology, table, &prompt_config))
        .collect()
}

pub fn write_sft(path: &Path, records: &[SftRecord]) -> Result<(), SftError> {
    let io = |source| SftError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    let header = SftHeader {
        schema: SFT_SCHEMA.into(),
        records: records.len(),
    };
    writeln!(out, "{}", serde_json::to_string(&header).expect("header serializes")).map_err(io)?;
    for r in records {
        writeln!(out, "{}", serde_json::to_string(r).expect("record serializes")).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_sft(path: &Path) -> Result<(SftHeader, Vec<SftRecord>), SftError> {
    let file = std::fs::File::open(path).map_err(|source| SftError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = BufReader::new(file).lines();
    let format = |line: usize, msg: String| SftError::Format { line, msg };
    let first = lines
        .next()
        .ok_or_else(|| format(1, "missing header".into()))?
        .map_err(|e| format(1, e.to_string()))?;
    let header: SftHeader = serde_json::from_str(&first).map_err(|e| format(1, e.to_string()))?;
    if header.schema != SFT_SCHEMA {
        return Err(format(1, format!("unknown schema `{}`", header.schema)));
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| format(i + 2, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(|e| format(i + 2, e.to_string()))?);
    }
    if records.len() != header.records {
        return Err(format(1, format!("header announces {} records, found {}", header.records, records.len())));
    }
    Ok((header, records))
}
