use std::hash::{Hash, Hasher};

use chrono::{Datelike, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

/// Wall-calendar position of a timestep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clock {
    pub year: i32,
    pub month: u32,
    pub day: u32,
    pub hour: u32,
    pub minute: u32,
    /// 0 = Monday.
    pub weekday: u32,
}

impl Clock {
    pub fn from_datetime(dt: NaiveDateTime) -> Self {
        Clock {
            year: dt.year(),
            month: dt.month(),
            day: dt.day(),
            hour: dt.hour(),
            minute: dt.minute(),
            weekday: dt.weekday().num_days_from_monday(),
        }
    }

    /// `2012-1-15 00:30`
    pub fn display_short(&self) -> String {
        format!(
            "{}-{}-{} {:02}:{:02}",
            self.year, self.month, self.day, self.hour, self.minute
        )
    }

    /// `2012-4-23-6-55`
    pub fn display_dashed(&self) -> String {
        format!(
            "{}-{}-{}-{}-{}",
            self.year, self.month, self.day, self.hour, self.minute
        )
    }
}

/// Dynamic observation of the grid at one timestep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridState {
    pub timestep: usize,
    pub clock: Clock,
    pub load_mw: Vec<f64>,
    pub gen_mw: Vec<f64>,
    pub flow_mw: Vec<f64>,
    pub rho: Vec<f64>,
    pub bus_assignment: Vec<u8>,
    pub line_status: Vec<bool>,
    pub overflow_steps: Vec<u32>,
    pub cooldown_line: Vec<u32>,
    pub cooldown_sub: Vec<u32>,
    /// Maintenance is not modelled: always -1 ("never").
    pub time_next_maintenance: Vec<i32>,
    pub duration_next_maintenance: Vec<u32>,
}

impl GridState {
    pub fn total_load(&self) -> f64 {
        self.load_mw.iter().sum()
    }

    pub fn total_gen(&self) -> f64 {
        self.gen_mw.iter().sum()
    }

    /// Highest capacity ratio and the line carrying it.
    pub fn max_rho(&self) -> (f64, usize) {
        self.rho
            .iter()
            .copied()
            .enumerate()
            .fold((0.0, 0), |best, (i, r)| if r > best.0 { (r, i) } else { best })
    }

    pub fn overloaded_lines(&self) -> usize {
        self.rho.iter().filter(|&&r| r > 1.0).count()
    }

    /// Bit-exact fingerprint, used to check that read-only calls leave a state untouched.
    pub fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.timestep.hash(&mut h);
        self.clock.hash(&mut h);
        for v in [&self.load_mw, &self.gen_mw, &self.flow_mw, &self.rho] {
            for x in v.iter() {
                x.to_bits().hash(&mut h);
            }
        }
        self.bus_assignment.hash(&mut h);
        self.line_status.hash(&mut h);
        self.overflow_steps.hash(&mut h);
        self.cooldown_line.hash(&mut h);
        self.cooldown_sub.hash(&mut h);
        self.time_next_maintenance.hash(&mut h);
        self.duration_next_maintenance.hash(&mut h);
        h.finish()
    }
}
