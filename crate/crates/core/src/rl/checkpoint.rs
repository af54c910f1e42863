//! Versioned checkpoint container.
//!
//! The first line is `ACE-CHECKPOINT <version> <sha256 of body>`; the body
//! is JSON. Floats round-trip exactly, so a loaded network reproduces the
//! saved forward passes bit for bit.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const CHECKPOINT_MAGIC: &str = "ACE-CHECKPOINT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not a checkpoint file (bad header)")]
    BadHeader,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint digest mismatch: file is corrupt")]
    Digest,
    #[error("checkpoint body: {0}")]
    Body(#[from] serde_json::Error),
}

pub fn encode_checkpoint<T: Serialize>(payload: &T) -> Result<String, CheckpointError> {
    let body = serde_json::to_string(payload)?;
    let digest = hex::encode(Sha256::digest(body.as_bytes()));
    Ok(format!("{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION} {digest}\n{body}"))
}

pub fn decode_checkpoint<T: DeserializeOwned>(text: &str) -> Result<T, CheckpointError> {
    let (header, body) = text.split_once('\n').ok_or(CheckpointError::BadHeader)?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some(CHECKPOINT_MAGIC) {
        return Err(CheckpointError::BadHeader);
    }
    let version: u32 = parts
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or(CheckpointError::BadHeader)?;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version(version));
    }
    let digest = parts.next().ok_or(CheckpointError::BadHeader)?;
    if hex::encode(Sha256::digest(body.as_bytes())) != digest {
        return Err(CheckpointError::Digest);
    }
    Ok(serde_json::from_str(body)?)
}

pub fn save_checkpoint<T: Serialize>(path: &Path, payload: &T) -> Result<(), CheckpointError> {
    let text = encode_checkpoint(payload)?;
    std::fs::write(path, text).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_checkpoint<T: DeserializeOwned>(path: &Path) -> Result<T, CheckpointError> {
    let text = std::fs::read_to_string(path).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_checkpoint(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rl::sac::{SacAgent, SacHyperparams};

    #[test]
    fn agent_round_trip_is_bit_exact() {
        let agent = SacAgent::new(SacHyperparams::default(), 7, 5, 3).unwrap();
        let back: SacAgent = decode_checkpoint(&encode_checkpoint(&agent).unwrap()).unwrap();
        assert_eq!(back, agent);
        let x = [0.1, -0.2, 0.3, 0.4, -0.5, 0.6, 0.7];
        let (a, b) = (agent.q_forward(&x), back.q_forward(&x));
        assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn tampering_detected() {
        let text = encode_checkpoint(&vec![1.0f64, 2.0]).unwrap();
        let bad = text.replace("2.0", "3.0");
        assert!(matches!(decode_checkpoint::<Vec<f64>>(&bad), Err(CheckpointError::Digest)));
        assert!(matches!(decode_checkpoint::<Vec<f64>>("hello\n[]"), Err(CheckpointError::BadHeader)));
    }
}
