//! Load and generation time series ("chronics") and their text format.
//!
//! File layout, one scenario per file:
//!
//! ```text
//! # ace scenario v1
//! id: toy5-000
//! horizon: 96
//! seed: 7
//! opponent: false
//! start: 2012-01-15T00:00
//! step_minutes: 15
//! columns: t,load_0,...,load_{L-1},gen_0,...,gen_{G-1}
//! 0,55.000000,...
//! ```
//!
//! Rows are in timestep order; values are MW with six decimals.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use super::state::Clock;
use super::topology::GridTopology;

const HEADER: &str = "# ace scenario v1";
const DATE_FORMAT: &str = "%Y-%m-%dT%H:%M";

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario horizon must be at least 1")]
    EmptyHorizon,
    #[error("scenario `{id}`: {msg}")]
    Invalid { id: String, msg: String },
    #[error("malformed scenario file, line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub horizon: usize,
    pub seed: u64,
    pub opponent_enabled: bool,
    pub start: NaiveDateTime,
    pub step_minutes: u32,
    /// `horizon × loads`
    pub load_series: Vec<Vec<f64>>,
    /// `horizon × generators`
    pub gen_series: Vec<Vec<f64>>,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |msg: String| ScenarioError::Invalid {
            id: self.id.clone(),
            msg,
        };
        if self.horizon == 0 {
            return Err(ScenarioError::EmptyHorizon);
        }
        if self.load_series.len() != self.horizon || self.gen_series.len() != self.horizon {
            return Err(invalid(format!(
                "horizon {} but series have {} / {} rows",
                self.horizon,
                self.load_series.len(),
                self.gen_series.len()
            )));
        }
        for (t, row) in self.load_series.iter().chain(&self.gen_series).enumerate() {
            if row.iter().any(|&x| !(x >= 0.0)) {
                return Err(invalid(format!("negative or non-finite entry in row {t}")));
            }
        }
        Ok(())
    }

    pub fn validate_for(&self, topology: &GridTopology) -> Result<(), ScenarioError> {
        self.validate()?;
        let (nl, ng) = (topology.loads().len(), topology.generators().len());
        if self.load_series.iter().any(|r| r.len() != nl)
            || self.gen_series.iter().any(|r| r.len() != ng)
        {
            return Err(ScenarioError::Invalid {
                id: self.id.clone(),
                msg: format!("series widths do not match topology ({nl} loads, {ng} generators)"),
            });
        }
        Ok(())
    }

    pub fn clock_at(&self, timestep: usize) -> Clock {
        Clock::from_datetime(self.start + Duration::minutes(self.step_minutes as i64 * timestep as i64))
    }

    /// Series row used at a timestep (the last row repeats past the horizon).
    pub fn row(&self, timestep: usize) -> (&[f64], &[f64]) {
        let t = timestep.min(self.horizon - 1);
        (&self.load_series[t], &self.gen_series[t])
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let nl = self.load_series.first().map_or(0, Vec::len);
        let ng = self.gen_series.first().map_or(0, Vec::len);
        writeln!(s, "{HEADER}").unwrap();
        writeln!(s, "id: {}", self.id).unwrap();
        writeln!(s, "horizon: {}", self.horizon).unwrap();
        writeln!(s, "seed: {}", self.seed).unwrap();
        writeln!(s, "opponent: {}", self.opponent_enabled).unwrap();
        writeln!(s, "start: {}", self.start.format(DATE_FORMAT)).unwrap();
        writeln!(s, "step_minutes: {}", self.step_minutes).unwrap();
        let mut cols = vec!["t".to_string()];
        cols.extend((0..nl).map(|i| format!("load_{i}")));
        cols.extend((0..ng).map(|i| format!("gen_{i}")));
        writeln!(s, "columns: {}", cols.join(",")).unwrap();
        for t in 0..self.horizon {
            s.push_str(&t.to_string());
            for x in self.load_series[t].iter().chain(&self.gen_series[t]) {
                write!(s, ",{x:.6}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, ScenarioError> {
        let mut lines = text.lines().enumerate();
        let perr = |line: usize, msg: &str| ScenarioError::Parse {
            line: line + 1,
            msg: msg.to_string(),
        };
        match lines.next() {
            Some((_, l)) if l.trim() == HEADER => {}
            _ => return Err(perr(0, "missing header")),
        }
        let mut field = |name: &str| -> Result<(usize, String), ScenarioError> {
            let (n, l) = lines.next().ok_or_else(|| perr(0, "truncated header"))?;
            let value = l
                .strip_prefix(name)
                .and_then(|r| r.strip_prefix(':'))
                .ok_or_else(|| perr(n, &format!("expected `{name}:`")))?;
            Ok((n, value.trim().to_string()))
        };
        let (_, id) = field("id")?;
        let (n, horizon) = field("horizon")?;
        let horizon: usize = horizon.parse().map_err(|_| perr(n, "bad horizon"))?;
        let (n, seed) = field("seed")?;
        let seed: u64 = seed.parse().map_err(|_| perr(n, "bad seed"))?;
        let (n, opp) = field("opponent")?;
        let opponent_enabled: bool = opp.parse().map_err(|_| perr(n, "bad opponent flag"))?;
        let (n, start) = field("start")?;
        let start =
            NaiveDateTime::parse_from_str(&start, DATE_FORMAT).map_err(|_| perr(n, "bad start"))?;
        let (n, step) = field("step_minutes")?;
        let step_minutes: u32 = step.parse().map_err(|_| perr(n, "bad step_minutes"))?;
        let (n, cols) = field("columns")?;
        let cols: Vec<&str> = cols.split(',').collect();
        let nl = cols.iter().filter(|c| c.starts_with("load_")).count();
        let ng = cols.iter().filter(|c| c.starts_with("gen_")).count();
        if cols.first() != Some(&"t") || nl + ng + 1 != cols.len() {
            return Err(perr(n, "bad column list"));
        }
        let mut load_series = Vec::new();
        let mut gen_series = Vec::new();
        for (n, l) in lines {
            if l.trim().is_empty() {
                continue;
            }
            let vals: Vec<&str> = l.split(',').collect();
            if vals.len() != cols.len() {
                return Err(perr(n, "wrong number of columns"));
            }
            let t: usize = vals[0].parse().map_err(|_| perr(n, "bad timestep"))?;
            if t != load_series.len() {
                return Err(perr(n, "rows out of order"));
            }
            let nums: Result<Vec<f64>, _> = vals[1..].iter().map(|v| v.trim().parse::<f64>()).collect();
            let nums = nums.map_err(|_| perr(n, "bad number"))?;
            load_series.push(nums[..nl].to_vec());
            gen_series.push(nums[nl..].to_vec());
        }
        let s = Scenario {
            id,
            horizon,
            seed,
            opponent_enabled,
            start,
            step_minutes,
            load_series,
            gen_series,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn write(&self, path: &Path) -> Result<(), ScenarioError> {
        std::fs::write(path, self.to_text()).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_text(&text)
    }
}

/// Knobs of the synthetic chronics generator.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioOptions {
    pub step_minutes: u32,
    /// Relative amplitude of the daily sinusoid.
    pub daily_amplitude: f64,
    /// Relative standard deviation of the per-step noise.
    pub noise: f64,
    /// Scheduled generation over load.
    pub generation_margin: f64,
    /// Per-scenario demand level is drawn from this range.
    pub level_range: (f64, f64),
    pub opponent_enabled: bool,
    /// Year/month/day of the first scenario's start.
    pub start: String,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        ScenarioOptions {
            step_minutes: 15,
            daily_amplitude: 0.15,
            noise: 0.02,
            generation_margin: 1.05,
            level_range: (0.9, 1.05),
            opponent_enabled: false,
            start: "2012-01-15T00:00".into(),
        }
    }
}

fn quantize(x: f64) -> f64 {
    format!("{x:.6}").parse().expect("formatted float parses")
}

/// Synthesizes `count` scenarios: each load follows a daily sinusoid with
/// seeded noise, and generation is scheduled in proportion to capacity with
/// a fixed margin over total load.
pub fn gen_scenarios(
    topology: &GridTopology,
    count: usize,
    horizon: usize,
    seed: u64,
    options: &ScenarioOptions,
) -> Result<Vec<Scenario>, ScenarioError> {
    if horizon == 0 {
        return Err(ScenarioError::EmptyHorizon);
    }
    let base_start = NaiveDateTime::parse_from_str(&options.start, DATE_FORMAT).map_err(|_| {
        ScenarioError::Invalid {
            id: "options".into(),
            msg: format!("bad start `{}`", options.start),
        }
    })?;
    let capacity: f64 = topology.generators().iter().map(|g| g.p_max).sum();
    let steps_per_day = (24 * 60) as f64 / options.step_minutes as f64;
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let scen_seed = seed.wrapping_mul(1_000_003).wrapping_add(k as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(scen_seed);
        let level = rng.random_range(options.level_range.0..=options.level_range.1);
        let phase = rng.random_range(0.0..1.0);
        let noise = Normal::new(0.0, options.noise.max(0.0)).expect("finite noise");
        let start = base_start + Duration::days(7 * k as i64);
        let mut load_series = Vec::with_capacity(horizon);
        let mut gen_series = Vec::with_capacity(horizon);
        for t in 0..horizon {
            let day_frac = t as f64 / steps_per_day + phase;
            let shape = 1.0 + options.daily_amplitude * (2.0 * std::f64::consts::PI * (day_frac - 0.25)).sin();
            let loads: Vec<f64> = topology
                .loads()
                .iter()
                .map(|l| quantize((l.nominal_mw * level * shape * (1.0 + noise.sample(&mut rng))).max(0.0)))
                .collect();
            let total: f64 = loads.iter().sum();
            let scheduled = (total * options.generation_margin).min(capacity);
            let gens: Vec<f64> = topology
                .generators()
                .iter()
                .map(|g| quantize(scheduled * g.p_max / capacity))
                .collect();
            load_series.push(loads);
            gen_series.push(gens);
        }
        out.push(Scenario {
            id: format!("{}-{k:03}", topology.name()),
            horizon,
            seed: scen_seed,
            opponent_enabled: options.opponent_enabled,
            start,
            step_minutes: options.step_minutes,
            load_series,
            gen_series,
        });
    }
    Ok(out)
}

/// Steps in one simulated day at the default resolution.
pub const DAY_HORIZON: usize = 96;

/// The shipped reference scenario of a topology: one day, seed 0.
pub fn nominal_scenario(topology: &GridTopology) -> Scenario {
    let mut s = gen_scenarios(topology, 1, DAY_HORIZON, 0, &ScenarioOptions::default())
        .expect("non-empty horizon")
        .remove(0);
    s.id = format!("{}-nominal", topology.name());
    s
}

/// Writes scenarios as `<dir>/<id>.scenario`, returning the paths.
pub fn write_scenarios(dir: &Path, scenarios: &[Scenario]) -> Result<Vec<PathBuf>, ScenarioError> {
    std::fs::create_dir_all(dir).map_err(|source| ScenarioError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    scenarios
        .iter()
        .map(|s| {
            let path = dir.join(format!("{}.scenario", s.id));
            s.write(&path).map(|_| path)
        })
        .collect()
}

/// Reads every `*.scenario` file of a directory, sorted by file name.
pub fn read_scenarios(dir: &Path) -> Result<Vec<Scenario>, ScenarioError> {
    let entries = std::fs::read_dir(dir).map_err(|source| ScenarioError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "scenario"))
        .collect();
    paths.sort();
    paths.iter().map(|p| Scenario::read(p)).collect()
}
