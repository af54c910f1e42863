//! Advisor backend interfaces and the exchange record.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{GridState, Simulator};
use crate::textio::{BadAction, StepSummary};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("request failed after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: String },
    #[error("endpoint answered with status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response body: {0}")]
    Malformed(String),
    #[error("backend misconfigured: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Actor,
    Critic,
}

/// Everything an actor backend may look at for one round.
pub struct ActorQuery<'a> {
    /// Task prefix (system message).
    pub system: &'a str,
    /// State-action parsing (user message).
    pub prompt: &'a str,
    pub state: &'a GridState,
    pub bad_actions: &'a [BadAction],
    pub simulator: &'a Simulator,
}

/// Everything a critic backend may look at for one episode.
pub struct CriticQuery<'a> {
    pub system: &'a str,
    pub prompt: &'a str,
    pub steps: &'a [StepSummary],
    pub key_steps: &'a [usize],
    pub k: f64,
}

pub trait ActorBackend {
    fn propose(&mut self, query: &ActorQuery) -> Result<String, BackendError>;
}

pub trait CriticBackend {
    fn assess(&mut self, query: &CriticQuery) -> Result<String, BackendError>;
}

impl<B: ActorBackend + ?Sized> ActorBackend for Box<B> {
    fn propose(&mut self, query: &ActorQuery) -> Result<String, BackendError> {
        (**self).propose(query)
    }
}

impl<B: CriticBackend + ?Sized> CriticBackend for Box<B> {
    fn assess(&mut self, query: &CriticQuery) -> Result<String, BackendError> {
        (**self).assess(query)
    }
}

/// Counts the queries forwarded to the wrapped backend. Clones of
/// [`Counting::counter`] observe the count after the wrapper is boxed away.
#[derive(Debug, Clone, Default)]
pub struct Counting<B> {
    pub inner: B,
    calls: Arc<AtomicUsize>,
}

impl<B> Counting<B> {
    pub fn new(inner: B) -> Self {
        Counting {
            inner,
            calls: Arc::new(AtomicUsize::new(0)),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn counter(&self) -> Arc<AtomicUsize> {
        self.calls.clone()
    }
}

impl<B: ActorBackend> ActorBackend for Counting<B> {
    fn propose(&mut self, query: &ActorQuery) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.propose(query)
    }
}

impl<B: CriticBackend> CriticBackend for Counting<B> {
    fn assess(&mut self, query: &CriticQuery) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.assess(query)
    }
}

/// Replays fixed responses in order, repeating the last one.
#[derive(Debug, Clone)]
pub struct Canned {
    responses: Vec<Result<String, BackendError>>,
    next: usize,
}

impl Canned {
    pub fn new(responses: Vec<Result<String, BackendError>>) -> Self {
        assert!(!responses.is_empty(), "at least one canned response");
        Canned { responses, next: 0 }
    }

    pub fn always(text: &str) -> Self {
        Self::new(vec![Ok(text.to_string())])
    }

    fn pop(&mut self) -> Result<String, BackendError> {
        let i = self.next.min(self.responses.len() - 1);
        self.next += 1;
        self.responses[i].clone()
    }
}

impl ActorBackend for Canned {
    fn propose(&mut self, _query: &ActorQuery) -> Result<String, BackendError> {
        self.pop()
    }
}

impl CriticBackend for Canned {
    fn assess(&mut self, _query: &CriticQuery) -> Result<String, BackendError> {
        self.pop()
    }
}

/// One prompt/response round with an advisor, archived verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvisorExchange {
    pub id: u64,
    pub role: Role,
    pub episode_id: u64,
    /// Transition step for the actor, `None` for whole-episode critic queries.
    pub step_index: Option<usize>,
    /// 1-based round.
    pub round: usize,
    pub system: String,
    pub prompt: String,
    pub response: String,
    /// `None` when the response parsed; the error text otherwise.
    pub parse_error: Option<String>,
    pub simulated_reward: Option<f64>,
    pub accepted: bool,
}
