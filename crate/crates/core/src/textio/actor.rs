//! Actor-advisor prompt and response format.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use super::format_changes;
use crate::grid::{GridState, GridTopology, LineChangeMap};

/// Most line changes a proposal may carry.
pub const MAX_PROPOSED_LINES: usize = 5;

/// Task prefix sent as the system message.
pub const ACTOR_TASK_PREFIX: &str = "Important Notes:

1. Limit your changes no more than 5 lines id.

2. Consider adjusting the topology of their shared (connected) lines. This indirect approach may help redistribute the load and reduce stress on overloaded lines.

3. Reason from the example line changes, and avoid outputting the BAD line change.

Response Format:

Please analyze the situation and provide your response in the following format:

1. Analysis of critical issues.

2. Reason and analysis why the provided line change examples are BAD if provided.

3. Propose your response to target line changes (Use ONLY values 0 or 1 in bus_id.)] proposed line changes: {line_id: new_bus_id, line_id: new_bus_id }

Remember:

1. Use exactly the format shown above. Do not add any bold formatting, asterisks, or other special characters.

3. For proposed line changes, only include the chosen lines and the target topology.

4. Use ONLY values 0 or 1 in new_bus_id.

5. Consider line cooldown constraints.
";

#[derive(Debug, Clone, PartialEq)]
pub struct ActorPromptConfig {
    /// Lines at or above this ρ are listed as overloaded.
    pub display_threshold: f64,
}

impl Default for ActorPromptConfig {
    fn default() -> Self {
        ActorPromptConfig { display_threshold: 0.9 }
    }
}

/// A rejected proposal and the reward it earned.
#[derive(Debug, Clone, PartialEq)]
pub struct BadAction {
    pub changes: LineChangeMap,
    pub reward: f64,
}

fn usage(rho: f64) -> String {
    format!("{:.2}%", rho * 100.0)
}

fn incident_max_rho(topology: &GridTopology, state: &GridState, sub: usize) -> f64 {
    topology
        .lines_at(sub)
        .iter()
        .map(|&(l, _)| state.rho[l])
        .fold(0.0, f64::max)
}

/// Lines listed in the overload section, in id order.
pub fn displayed_overloads(state: &GridState, config: &ActorPromptConfig) -> Vec<usize> {
    (0..state.rho.len())
        .filter(|&l| state.line_status[l] && state.rho[l] >= config.display_threshold)
        .collect()
}

/// Endpoints of the displayed overloaded lines, ascending.
pub fn crucial_substations(topology: &GridTopology, state: &GridState, config: &ActorPromptConfig) -> Vec<usize> {
    let mut subs = BTreeSet::new();
    for l in displayed_overloads(state, config) {
        subs.insert(topology.lines()[l].from);
        subs.insert(topology.lines()[l].to);
    }
    subs.into_iter().collect()
}

/// State-action parsing sent as the user message.
pub fn serialize_actor_prompt(
    topology: &GridTopology,
    state: &GridState,
    bad_actions: &[BadAction],
    config: &ActorPromptConfig,
) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "You are an expert power grid operator. Now, Let's analyze the current situation ({}) step by step:\n",
        state.clock.display_short()
    )
    .unwrap();

    let mut operable: Vec<usize> = (0..topology.n_substations())
        .filter(|&i| state.cooldown_sub[i] == 0)
        .collect();
    operable.sort_by(|&a, &b| {
        incident_max_rho(topology, state, b)
            .total_cmp(&incident_max_rho(topology, state, a))
            .then(a.cmp(&b))
    });
    writeln!(s, "Grid Overview:\n").unwrap();
    writeln!(s, "    Total elements: {}\n", topology.n_elements()).unwrap();
    writeln!(s, "    Operable substations: {}\n", list(&operable)).unwrap();
    writeln!(s, "    Total lines: {}\n", topology.n_lines()).unwrap();

    writeln!(s, "Overload Lines:\n").unwrap();
    let overloads = displayed_overloads(state, config);
    if overloads.is_empty() {
        writeln!(s, "    No overloaded lines!\n").unwrap();
    }
    for &l in &overloads {
        let line = &topology.lines()[l];
        writeln!(
            s,
            "    - Line id {l} (Usage: {}) connects Substation {} and Substation {}\n",
            usage(state.rho[l]),
            line.from,
            line.to
        )
        .unwrap();
    }
    let disconnected: Vec<usize> = (0..topology.n_lines()).filter(|&l| !state.line_status[l]).collect();
    if disconnected.is_empty() {
        writeln!(s, "    No disconnected line!\n").unwrap();
    } else {
        writeln!(s, "    Disconnected lines: {}\n", list(&disconnected)).unwrap();
    }

    writeln!(s, "Crucial Substations:\n").unwrap();
    let crucial = crucial_substations(topology, state, config);
    if crucial.is_empty() {
        writeln!(s, "    None\n").unwrap();
    }
    for sub in crucial {
        writeln!(s, "    Substation id {sub} current topology:\n").unwrap();
        let mut buses: [Vec<String>; 2] = [Vec::new(), Vec::new()];
        let mut off = Vec::new();
        for (l, element) in topology.lines_at(sub) {
            if state.line_status[l] {
                buses[state.bus_assignment[element] as usize]
                    .push(format!("{l} (Usage: {})", usage(state.rho[l])));
            } else {
                off.push(l.to_string());
            }
        }
        for (b, entries) in buses.iter().enumerate() {
            writeln!(s, "        - Lines connected in Bus {b}: {{{}}}\n", entries.join(", ")).unwrap();
        }
        writeln!(s, "        - Lines disconnected: {{{}}}\n", off.join(", ")).unwrap();
    }

    writeln!(s, "Bad Line Change Examples:\n").unwrap();
    if bad_actions.is_empty() {
        writeln!(s, "    None\n").unwrap();
    }
    for bad in bad_actions {
        writeln!(
            s,
            "    Please AVOID the Line change: {} as it is a BAD action because it results in a reward of {:.1}.\n",
            format_changes(&bad.changes),
            bad.reward
        )
        .unwrap();
    }

    writeln!(s, "Operational Constraints\n").unwrap();
    let line_cd: Vec<String> = (0..topology.n_lines())
        .filter(|&l| state.cooldown_line[l] > 0)
        .map(|l| format!("{l}: {}", state.cooldown_line[l]))
        .collect();
    let sub_cd: Vec<String> = (0..topology.n_substations())
        .filter(|&i| state.cooldown_sub[i] > 0)
        .map(|i| format!("{i}: {}", state.cooldown_sub[i]))
        .collect();
    if line_cd.is_empty() {
        writeln!(s, "    No lines in cooldown").unwrap();
    } else {
        writeln!(s, "    Lines in cooldown (steps remaining): {{{}}}", line_cd.join(", ")).unwrap();
    }
    if !sub_cd.is_empty() {
        writeln!(s, "    Substations in cooldown (steps remaining): {{{}}}", sub_cd.join(", ")).unwrap();
    }
    s
}

fn list(ids: &[usize]) -> String {
    let items: Vec<String> = ids.iter().map(|i| i.to_string()).collect();
    format!("[{}]", items.join(", "))
}

/// Response in the template's format, as the scripted oracle writes it.
pub fn format_actor_response(changes: &LineChangeMap, analysis: &str) -> String {
    format!(
        "1. Analysis of critical issues: {analysis}\n\n2. The provided BAD line changes lower the simulated reward.\n\n3. proposed line changes: {}\n",
        format_changes(changes)
    )
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ActorParseError {
    #[error("no `proposed line changes` map found")]
    MissingAnchor,
    #[error("malformed line change map: {0}")]
    Malformed(String),
    #[error("line {line} assigned to bus {bus}; only 0 or 1 allowed")]
    InvalidBus { line: usize, bus: u64 },
    #[error("{0} line changes proposed, at most 5 allowed")]
    TooManyLines(usize),
    #[error("line {line} is listed twice")]
    DuplicateLine { line: usize },
    #[error("line {line} does not exist")]
    UnknownLine { line: usize },
}

static ANCHOR: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)proposed\s+line\s+changes\s*:\s*\{([^{}]*)\}").unwrap());
static ENTRY: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*(\d+)\s*:\s*(\d+)\s*$").unwrap());

/// Extracts the last `proposed line changes: {...}` map of a response.
pub fn parse_actor_response(text: &str) -> Result<LineChangeMap, ActorParseError> {
    let body = ANCHOR
        .captures_iter(text)
        .last()
        .ok_or(ActorParseError::MissingAnchor)?
        .get(1)
        .unwrap()
        .as_str();
    let mut out = LineChangeMap::new();
    if body.trim().is_empty() {
        return Ok(out);
    }
    let entries: Vec<&str> = body.split(',').collect();
    for entry in &entries {
        let caps = ENTRY
            .captures(entry)
            .ok_or_else(|| ActorParseError::Malformed(entry.trim().to_string()))?;
        let line: usize = caps[1]
            .parse()
            .map_err(|_| ActorParseError::Malformed(entry.trim().to_string()))?;
        let bus: u64 = caps[2]
            .parse()
            .map_err(|_| ActorParseError::Malformed(entry.trim().to_string()))?;
        if bus > 1 {
            return Err(ActorParseError::InvalidBus { line, bus });
        }
        if out.insert(line, bus as u8).is_some() {
            return Err(ActorParseError::DuplicateLine { line });
        }
    }
    if out.len() > MAX_PROPOSED_LINES {
        return Err(ActorParseError::TooManyLines(out.len()));
    }
    Ok(out)
}

/// Caller-side check that every proposed line exists.
pub fn validate_line_ids(changes: &LineChangeMap, n_lines: usize) -> Result<(), ActorParseError> {
    match changes.keys().find(|&&l| l >= n_lines) {
        Some(&line) => Err(ActorParseError::UnknownLine { line }),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{nominal_scenario, toy5, EnvConfig, GridEnv};
    use std::sync::Arc;

    fn state() -> (GridTopology, GridState) {
        let t = toy5();
        let mut env = GridEnv::new(Arc::new(t.clone()), EnvConfig::default());
        let s = env.reset(Arc::new(nominal_scenario(&t)), 0).unwrap();
        (t, s)
    }

    #[test]
    fn usage_is_printed_to_two_decimals() {
        let (t, mut s) = state();
        s.rho[5] = 1.6369;
        let text = serialize_actor_prompt(&t, &s, &[], &ActorPromptConfig::default());
        assert!(text.contains("Line id 5 (Usage: 163.69%) connects Substation 2 and Substation 4"));
        assert!(text.contains("Substation id 2 current topology:"));
        assert!(text.contains("Substation id 4 current topology:"));
    }

    #[test]
    fn calm_state_has_empty_sections() {
        let (t, s) = state();
        let text = serialize_actor_prompt(&t, &s, &[], &ActorPromptConfig::default());
        assert!(text.contains("No overloaded lines!"));
        assert!(text.contains("Crucial Substations:\n\n    None"));
        assert!(text.contains("No lines in cooldown"));
        assert!(text.contains("(2012-1-15 00:00)"));
        assert_eq!(text, serialize_actor_prompt(&t, &s, &[], &ActorPromptConfig::default()));
    }

    #[test]
    fn bad_examples_listed() {
        let (t, s) = state();
        let bad = BadAction {
            changes: LineChangeMap::new(),
            reward: -1.0,
        };
        let text = serialize_actor_prompt(&t, &s, &[bad], &ActorPromptConfig::default());
        assert!(text.contains(
            "Please AVOID the Line change: {} as it is a BAD action because it results in a reward of -1.0."
        ));
    }

    #[test]
    fn parser_cases() {
        let m = parse_actor_response("blah ... proposed line changes: {21: 1, 38: 0}").unwrap();
        assert_eq!(m, LineChangeMap::from([(21, 1), (38, 0)]));
        assert_eq!(
            parse_actor_response("proposed line changes: {21: 2}"),
            Err(ActorParseError::InvalidBus { line: 21, bus: 2 })
        );
        assert_eq!(
            parse_actor_response("I think we should reconnect line 3."),
            Err(ActorParseError::MissingAnchor)
        );
        let m = parse_actor_response("PROPOSED  Line Changes :{ 4 :1 }").unwrap();
        assert_eq!(m, LineChangeMap::from([(4, 1)]));
        assert!(matches!(
            parse_actor_response("proposed line changes: {1: 0, 2: 0, 3: 0, 4: 0, 5: 0, 6: 1}"),
            Err(ActorParseError::TooManyLines(6))
        ));
        assert!(matches!(
            parse_actor_response("proposed line changes: {a: 0}"),
            Err(ActorParseError::Malformed(_))
        ));
    }

    #[test]
    fn oracle_format_round_trips() {
        let m = LineChangeMap::from([(0, 1), (7, 0)]);
        assert_eq!(parse_actor_response(&format_actor_response(&m, "x")).unwrap(), m);
        let empty = LineChangeMap::new();
        assert_eq!(parse_actor_response(&format_actor_response(&empty, "x")).unwrap(), empty);
    }
}
