//! Flat numeric encoding of grid states, stacked over a short history.

use std::collections::VecDeque;
use std::f64::consts::TAU;

use crate::grid::{GridState, GridTopology};

/// Scale applied to MW quantities.
const MW_SCALE: f64 = 100.0;
/// Counters are divided by this before entering the network.
const COUNTER_SCALE: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    n_lines: usize,
    n_subs: usize,
    n_elements: usize,
    n_loads: usize,
    n_gens: usize,
    history_window: usize,
}

impl Encoder {
    pub fn new(topology: &GridTopology, history_window: usize) -> Self {
        Encoder {
            n_lines: topology.n_lines(),
            n_subs: topology.n_substations(),
            n_elements: topology.n_elements(),
            n_loads: topology.loads().len(),
            n_gens: topology.generators().len(),
            history_window: history_window.max(1),
        }
    }

    pub fn history_window(&self) -> usize {
        self.history_window
    }

    pub fn frame_len(&self) -> usize {
        4 * self.n_lines + self.n_elements + self.n_subs + self.n_loads + self.n_gens + 4
    }

    pub fn input_len(&self) -> usize {
        self.frame_len() * self.history_window
    }

    /// Features of a single state: per line ρ, status, overflow counter and
    /// cooldown; per element bus; per substation cooldown; loads and
    /// generation; time of day (sin, cos), weekday and month.
    pub fn frame(&self, state: &GridState) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.frame_len());
        out.extend(state.rho.iter().copied());
        out.extend(state.line_status.iter().map(|&s| if s { 1.0 } else { 0.0 }));
        out.extend(state.overflow_steps.iter().map(|&c| c as f64 / COUNTER_SCALE));
        out.extend(state.cooldown_line.iter().map(|&c| c as f64 / COUNTER_SCALE));
        out.extend(state.bus_assignment.iter().map(|&b| b as f64));
        out.extend(state.cooldown_sub.iter().map(|&c| c as f64 / COUNTER_SCALE));
        out.extend(state.load_mw.iter().map(|&x| x / MW_SCALE));
        out.extend(state.gen_mw.iter().map(|&x| x / MW_SCALE));
        let day = (state.clock.hour as f64 * 60.0 + state.clock.minute as f64) / (24.0 * 60.0);
        out.push((TAU * day).sin());
        out.push((TAU * day).cos());
        out.push(state.clock.weekday as f64 / 6.0);
        out.push((state.clock.month as f64 - 1.0) / 11.0);
        debug_assert_eq!(out.len(), self.frame_len());
        out
    }

    /// Encoding one step later: `next` becomes the newest frame and the
    /// oldest frame of `encoding` drops out.
    pub fn advance_encoding(&self, encoding: &[f64], next: &GridState) -> Vec<f64> {
        let n = self.frame_len();
        let mut out = self.frame(next);
        out.extend_from_slice(&encoding[..n * (self.history_window - 1)]);
        out
    }

    /// Encoding of `state` with `history` (oldest first) in front of it.
    pub fn encode(&self, state: &GridState, history: &[GridState]) -> Vec<f64> {
        let mut h = ObsHistory::new(self.clone());
        for s in history {
            h.push(s);
        }
        h.push(state);
        h.encoding()
    }
}

/// Rolling window of encoded frames, newest first in the encoding.
#[derive(Debug, Clone)]
pub struct ObsHistory {
    encoder: Encoder,
    frames: VecDeque<Vec<f64>>,
}

impl ObsHistory {
    pub fn new(encoder: Encoder) -> Self {
        ObsHistory {
            frames: VecDeque::with_capacity(encoder.history_window),
            encoder,
        }
    }

    pub fn start(encoder: Encoder, state: &GridState) -> Self {
        let mut h = Self::new(encoder);
        h.push(state);
        h
    }

    pub fn push(&mut self, state: &GridState) {
        if self.frames.len() == self.encoder.history_window {
            self.frames.pop_front();
        }
        self.frames.push_back(self.encoder.frame(state));
    }

    /// History after moving to `next`, leaving `self` untouched.
    pub fn advance(&self, next: &GridState) -> Self {
        let mut h = self.clone();
        h.push(next);
        h
    }

    /// Missing history is padded with the oldest available frame.
    pub fn encoding(&self) -> Vec<f64> {
        let oldest = self.frames.front().expect("history holds at least one frame");
        let mut out = Vec::with_capacity(self.encoder.input_len());
        for f in self.frames.iter().rev() {
            out.extend_from_slice(f);
        }
        for _ in self.frames.len()..self.encoder.history_window {
            out.extend_from_slice(oldest);
        }
        out
    }
}
