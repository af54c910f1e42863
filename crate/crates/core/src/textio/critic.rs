//! Critic-advisor prompt and response format.

use std::fmt::Write as _;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::format_changes;
use crate::grid::{Clock, LineChangeMap};

/// Most decision points one critic response may adjust.
pub const MAX_KEY_POINTS: usize = 4;

/// Summary of one trajectory step, as the critic sees it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub index: usize,
    pub clock: Clock,
    pub changes: LineChangeMap,
    pub reward: f64,
    /// Highest ρ after the step, and its line.
    pub max_rho: f64,
    pub max_rho_line: usize,
    pub overloaded: usize,
    /// Highest ρ and overload count before the step.
    pub max_rho_before: f64,
    pub overloaded_before: usize,
}

/// Thresholds of the mechanical key-reason tags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReasonThresholds {
    pub reward_change: f64,
    pub usage_change: f64,
}

impl Default for ReasonThresholds {
    fn default() -> Self {
        ReasonThresholds {
            reward_change: 0.1,
            usage_change: 0.1,
        }
    }
}

/// Tags explaining why a step matters.
pub fn key_reasons(steps: &[StepSummary], index: usize, thresholds: &ReasonThresholds) -> Vec<&'static str> {
    let step = &steps[index];
    let mut tags = Vec::new();
    if index == 0 || index + 1 == steps.len() {
        tags.push("First/Last step");
    }
    let prev_reward = if index > 0 { steps[index - 1].reward } else { step.reward };
    if (step.reward - prev_reward).abs() > thresholds.reward_change {
        tags.push("Significant reward change");
    }
    if (step.max_rho - step.max_rho_before).abs() > thresholds.usage_change {
        tags.push("Significant change in highest usage");
    }
    if step.overloaded != step.overloaded_before {
        tags.push("Change in number of overloaded lines");
    }
    if !step.changes.is_empty() {
        tags.push("Topology change");
    }
    if tags.is_empty() {
        tags.push("Reward magnitude");
    }
    tags
}

/// Task prefix for adjustment scale `k`.
pub fn critic_task_prefix(k: f64) -> String {
    format!(
        "Remember:

1. Key decision point indices are the time step indices in the episode (starting from 0), select up to 4 most important decision points

2. Reward adjustments can only be one of {}, {}, {}, {}

3. Both lists must be of the same length and correspond in order

Response Format:

Please analyze the below information and select decision points where the reward estimation might be erroneous. Provide your analysis results in the following format:

Key Decision Point Indices: [X, Y, A, B]

Reward Adjustments: [W, V, T, S]

1. Index X (Adjustment W): [Explain why this decision point is important and why this adjustment value was chosen]

2. Index Y (Adjustment V): [Explain why this decision point is important and why this adjustment value was chosen]

3. Index A (Adjustment T): [Explain why this decision point is important and why this adjustment value was chosen]

4. Index B (Adjustment S): [Explain why this decision point is important and why this adjustment value was chosen]
",
        signed(2.0 * k),
        signed(k),
        signed(-k),
        signed(-2.0 * k)
    )
}

fn signed(x: f64) -> String {
    let s = format!("{x}");
    if x >= 0.0 {
        format!("+{s}")
    } else {
        s
    }
}

/// Trajectory overview followed by one block per key step.
pub fn serialize_critic_prompt(steps: &[StepSummary], key_steps: &[usize], thresholds: &ReasonThresholds) -> String {
    let mut s = String::new();
    let cumulative: f64 = steps.iter().map(|st| st.reward).sum();
    writeln!(s, "Episode Overview:\n").unwrap();
    writeln!(s, "    - Total steps: {}\n", steps.len()).unwrap();
    if let (Some(first), Some(last)) = (steps.first(), steps.last()) {
        writeln!(s, "    - Initial time step: {}\n", first.clock.display_dashed()).unwrap();
        writeln!(s, "    - Final time step: {}\n", last.clock.display_dashed()).unwrap();
    }
    writeln!(s, "    - Cumulative reward: {cumulative:.2}").unwrap();
    if key_steps.is_empty() {
        return s;
    }
    writeln!(s, "\nKey Timestep Analysis:\n").unwrap();
    for (i, st) in key_steps.iter().filter_map(|&i| steps.get(i).map(|st| (i, st))) {
        writeln!(s, "    - Time step {i} ({}):\n", st.clock.display_dashed()).unwrap();
        writeln!(s, "        Action: {} Reward: {:.2}\n", format_changes(&st.changes), st.reward).unwrap();
        writeln!(
            s,
            "        Highest line usage: {:.2}% (Line {}) Overloaded lines: {}\n",
            st.max_rho * 100.0,
            st.max_rho_line,
            st.overloaded
        )
        .unwrap();
        writeln!(s, "        Key reason: {}\n", key_reasons(steps, i, thresholds).join(", ")).unwrap();
    }
    s
}

/// Response in the template's format, as the scripted oracle writes it.
pub fn format_critic_response(entries: &[(usize, f64)]) -> String {
    let idx: Vec<String> = entries.iter().map(|(i, _)| i.to_string()).collect();
    let adj: Vec<String> = entries.iter().map(|(_, a)| signed(*a)).collect();
    let mut s = format!(
        "Key Decision Point Indices: [{}]\n\nReward Adjustments: [{}]\n",
        idx.join(", "),
        adj.join(", ")
    );
    for (n, (i, a)) in entries.iter().enumerate() {
        let direction = if *a > 0.0 { "better" } else { "worse" };
        writeln!(
            s,
            "\n{}. Index {i} (Adjustment {}): its long-run outcome is {direction} than the trajectory average.",
            n + 1,
            signed(*a)
        )
        .unwrap();
    }
    s
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CriticParseError {
    #[error("no `Key Decision Point Indices` list found")]
    MissingIndices,
    #[error("no `Reward Adjustments` list found")]
    MissingAdjustments,
    #[error("malformed list entry `{0}`")]
    Malformed(String),
    #[error("{indices} indices but {adjustments} adjustments")]
    LengthMismatch { indices: usize, adjustments: usize },
    #[error("{0} decision points, at most 4 allowed")]
    TooMany(usize),
    #[error("adjustment {value} is not one of ±{k}, ±{}", 2.0 * k)]
    IllegalAdjustment { value: f64, k: f64 },
}

static INDICES: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)key\s+decision\s+point\s+indices\s*:\s*\[([^\[\]]*)\]").unwrap());
static ADJUSTMENTS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)reward\s+adjustments\s*:\s*\[([^\[\]]*)\]").unwrap());
static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[+-]?(\d+\.?\d*|\.\d+)$").unwrap());

fn last_list<'a>(re: &Regex, text: &'a str) -> Option<Vec<&'a str>> {
    let body = re.captures_iter(text).last()?.get(1)?.as_str();
    if body.trim().is_empty() {
        return Some(Vec::new());
    }
    Some(body.split(',').map(str::trim).collect())
}

/// The two raw lists, without any shape or value checks.
pub fn parse_critic_lists(text: &str) -> Result<(Vec<usize>, Vec<f64>), CriticParseError> {
    let idx = last_list(&INDICES, text).ok_or(CriticParseError::MissingIndices)?;
    let adj = last_list(&ADJUSTMENTS, text).ok_or(CriticParseError::MissingAdjustments)?;
    let indices = idx
        .iter()
        .map(|s| s.parse::<usize>().map_err(|_| CriticParseError::Malformed(s.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let adjustments = adj
        .iter()
        .map(|s| {
            if !NUMBER.is_match(s) {
                return Err(CriticParseError::Malformed(s.to_string()));
            }
            s.trim_start_matches('+')
                .parse::<f64>()
                .map_err(|_| CriticParseError::Malformed(s.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((indices, adjustments))
}

/// Snaps `value` onto the four-level set `{−2K, −K, +K, +2K}`.
pub fn snap_adjustment(value: f64, k: f64) -> Option<f64> {
    [2.0 * k, k, -k, -2.0 * k]
        .into_iter()
        .find(|level| (value - level).abs() <= 1e-9 * (1.0 + k.abs()))
}

/// Strict parse: equal lengths, at most four points, every adjustment in the four-level set.
pub fn parse_critic_response(text: &str, k: f64) -> Result<Vec<(usize, f64)>, CriticParseError> {
    let (indices, adjustments) = parse_critic_lists(text)?;
    if indices.len() != adjustments.len() {
        return Err(CriticParseError::LengthMismatch {
            indices: indices.len(),
            adjustments: adjustments.len(),
        });
    }
    if indices.len() > MAX_KEY_POINTS {
        return Err(CriticParseError::TooMany(indices.len()));
    }
    indices
        .into_iter()
        .zip(adjustments)
        .map(|(i, a)| {
            snap_adjustment(a, k)
                .map(|level| (i, level))
                .ok_or(CriticParseError::IllegalAdjustment { value: a, k })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clock() -> Clock {
        Clock {
            year: 2012,
            month: 4,
            day: 23,
            hour: 6,
            minute: 55,
            weekday: 0,
        }
    }

    fn steps(rewards: &[f64]) -> Vec<StepSummary> {
        rewards
            .iter()
            .enumerate()
            .map(|(index, &reward)| StepSummary {
                index,
                clock: clock(),
                changes: LineChangeMap::new(),
                reward,
                max_rho: 0.5,
                max_rho_line: 0,
                overloaded: 0,
                max_rho_before: 0.5,
                overloaded_before: 0,
            })
            .collect()
    }

    #[test]
    fn overview_reports_count_and_cumulative() {
        let mut rewards = vec![2.0; 13];
        rewards.push(8.46);
        let st = steps(&rewards);
        let text = serialize_critic_prompt(&st, &[], &ReasonThresholds::default());
        assert!(text.contains("Total steps: 14"));
        assert!(text.contains("Cumulative reward: 34.46"));
        assert!(text.contains("Initial time step: 2012-4-23-6-55"));
        assert!(!text.contains("Key Timestep Analysis"));
    }

    #[test]
    fn key_step_blocks() {
        let mut st = steps(&[0.9, -1.0]);
        st[1].changes = LineChangeMap::from([(73, 1)]);
        st[1].max_rho = 0.9068;
        st[1].max_rho_line = 39;
        let text = serialize_critic_prompt(&st, &[1], &ReasonThresholds::default());
        assert!(text.contains("Time step 1 (2012-4-23-6-55):"));
        assert!(text.contains("Action: {73: 1} Reward: -1.00"));
        assert!(text.contains("Highest line usage: 90.68% (Line 39) Overloaded lines: 0"));
        assert!(text.contains("Key reason: First/Last step, Significant reward change, Significant change in highest usage, Topology change"));
    }

    #[test]
    fn prefix_lists_scaled_levels() {
        assert!(critic_task_prefix(0.2).contains("one of +0.4, +0.2, -0.2, -0.4"));
    }

    #[test]
    fn parser_cases() {
        let text = "Key Decision Point Indices: [2, 5]\nReward Adjustments: [+0.2, -0.4]";
        assert_eq!(parse_critic_response(text, 0.2).unwrap(), vec![(2, 0.2), (5, -0.4)]);
        assert!(matches!(
            parse_critic_response("Key Decision Point Indices: [1,2,3]\nReward Adjustments: [+0.2]", 0.2),
            Err(CriticParseError::LengthMismatch { .. })
        ));
        assert!(matches!(
            parse_critic_response("Key Decision Point Indices: [1]\nReward Adjustments: [+0.5]", 0.2),
            Err(CriticParseError::IllegalAdjustment { .. })
        ));
        assert!(matches!(
            parse_critic_response(
                "Key Decision Point Indices: [1,2,3,4,5]\nReward Adjustments: [0.2,0.2,0.2,0.2,0.2]",
                0.2
            ),
            Err(CriticParseError::TooMany(5))
        ));
        assert_eq!(
            parse_critic_response("Reward Adjustments: [0.2]", 0.2),
            Err(CriticParseError::MissingIndices)
        );
        let loose = "  key decision POINT indices :[ 0 ]\n reward   adjustments:[-.2]";
        assert_eq!(parse_critic_response(loose, 0.2).unwrap(), vec![(0, -0.2)]);
    }

    #[test]
    fn oracle_format_round_trips() {
        let entries = vec![(3, 0.4), (7, -0.2)];
        assert_eq!(parse_critic_response(&format_critic_response(&entries), 0.2).unwrap(), entries);
        assert_eq!(parse_critic_response(&format_critic_response(&[]), 0.2).unwrap(), vec![]);
    }
}
