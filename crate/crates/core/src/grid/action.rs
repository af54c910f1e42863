//! Enumerated discrete control actions.
//!
//! Table layout: index 0 is the explicit do-nothing action, followed by one
//! status toggle per line, four bus settings per line, and every bus mask of
//! every substation. The three families follow
//! `|A| = N_line + 4·N_line + Σ 2^Sub(i)`; the do-nothing entry is extra.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::state::GridState;
use super::topology::GridTopology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    NoOp,
    /// Toggles the line status.
    LineSwitch { line: usize },
    /// Sets both endpoint buses and (re)connects the line.
    LineBusSet {
        line: usize,
        origin_bus: u8,
        extremity_bus: u8,
    },
    /// Bit `k` gives the bus of the substation's `k`-th element.
    SubstationAssign { substation: usize, mask: u64 },
}

impl Action {
    pub fn touched_line(&self) -> Option<usize> {
        match *self {
            Action::LineSwitch { line } | Action::LineBusSet { line, .. } => Some(line),
            _ => None,
        }
    }
}

/// `{line_id: bus_id}` map, the textual currency of actor proposals.
pub type LineChangeMap = BTreeMap<usize, u8>;

/// Size of the three action families, exactly as the cardinality formula counts them.
pub fn action_family_count(n_lines: usize, substation_sizes: &[usize]) -> u128 {
    let lines = n_lines as u128;
    lines + 4 * lines + substation_sizes.iter().map(|&n| 1u128 << n).sum::<u128>()
}

/// Length of the enumerated action table: the three families plus do-nothing.
pub fn action_space_size(topology: &GridTopology) -> usize {
    (action_family_count(topology.n_lines(), &topology.substation_sizes()) + 1) as usize
}

#[derive(Debug, Clone)]
pub struct ActionTable {
    actions: Vec<Action>,
    line_bus_start: usize,
    sub_start: Vec<usize>,
}

impl ActionTable {
    pub fn new(topology: &GridTopology) -> Self {
        let n_lines = topology.n_lines();
        let mut actions = vec![Action::NoOp];
        actions.extend((0..n_lines).map(|line| Action::LineSwitch { line }));
        let line_bus_start = actions.len();
        for line in 0..n_lines {
            for origin_bus in 0..2u8 {
                for extremity_bus in 0..2u8 {
                    actions.push(Action::LineBusSet {
                        line,
                        origin_bus,
                        extremity_bus,
                    });
                }
            }
        }
        let mut sub_start = Vec::with_capacity(topology.n_substations());
        for (substation, size) in topology.substation_sizes().into_iter().enumerate() {
            sub_start.push(actions.len());
            actions.extend((0..1u64 << size).map(|mask| Action::SubstationAssign { substation, mask }));
        }
        ActionTable {
            actions,
            line_bus_start,
            sub_start,
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn get(&self, index: usize) -> Action {
        self.actions[index]
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn index_of(&self, action: &Action) -> Option<usize> {
        let idx = match *action {
            Action::NoOp => 0,
            Action::LineSwitch { line } => 1 + line,
            Action::LineBusSet {
                line,
                origin_bus,
                extremity_bus,
            } => {
                if origin_bus > 1 || extremity_bus > 1 {
                    return None;
                }
                self.line_bus_start + 4 * line + 2 * origin_bus as usize + extremity_bus as usize
            }
            Action::SubstationAssign { substation, mask } => {
                let start = *self.sub_start.get(substation)?;
                start + usize::try_from(mask).ok()?
            }
        };
        (self.actions.get(idx) == Some(action)).then_some(idx)
    }

    /// Cooldown legality; the do-nothing action is always legal.
    pub fn legal_mask(&self, state: &GridState) -> Vec<bool> {
        self.actions
            .iter()
            .map(|a| match *a {
                Action::NoOp => true,
                Action::LineSwitch { line } | Action::LineBusSet { line, .. } => {
                    state.cooldown_line[line] == 0
                }
                Action::SubstationAssign { substation, .. } => state.cooldown_sub[substation] == 0,
            })
            .collect()
    }
}

/// Applies the topology part of an action to a state (buses and line status only).
pub(crate) fn apply_topology(topology: &GridTopology, state: &mut GridState, action: &Action) {
    match *action {
        Action::NoOp => {}
        Action::LineSwitch { line } => {
            state.line_status[line] = !state.line_status[line];
            if !state.line_status[line] {
                state.flow_mw[line] = 0.0;
                state.rho[line] = 0.0;
            }
        }
        Action::LineBusSet {
            line,
            origin_bus,
            extremity_bus,
        } => {
            state.bus_assignment[topology.line_origin_element(line)] = origin_bus;
            state.bus_assignment[topology.line_extremity_element(line)] = extremity_bus;
            state.line_status[line] = true;
        }
        Action::SubstationAssign { substation, mask } => {
            for (k, e) in topology.substation_elements(substation).into_iter().enumerate() {
                state.bus_assignment[e] = ((mask >> k) & 1) as u8;
            }
        }
    }
}

/// Lines whose connectivity an action changes at `state`, mapped to the new
/// bus of the endpoint that moves (origin first). A disconnected line keeps
/// the bus its origin sat on. Distinct actions may share a map.
pub fn line_changes(topology: &GridTopology, state: &GridState, action: &Action) -> LineChangeMap {
    let mut after = state.clone();
    apply_topology(topology, &mut after, action);
    let mut out = LineChangeMap::new();
    for line in 0..topology.n_lines() {
        let o = topology.line_origin_element(line);
        let x = topology.line_extremity_element(line);
        let status_changed = after.line_status[line] != state.line_status[line];
        let origin_moved = after.bus_assignment[o] != state.bus_assignment[o];
        let extremity_moved = after.bus_assignment[x] != state.bus_assignment[x];
        if origin_moved {
            out.insert(line, after.bus_assignment[o]);
        } else if extremity_moved {
            out.insert(line, after.bus_assignment[x]);
        } else if status_changed {
            out.insert(line, after.bus_assignment[o]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::topology::{build_topology, ring3, toy5, Line, TopologySpec};

    #[test]
    fn family_count_examples() {
        assert_eq!(action_family_count(4, &[3, 4, 3]), 52);
        assert_eq!(action_family_count(0, &[1]), 2);
    }

    #[test]
    fn table_length_is_formula_plus_noop() {
        let t = toy5();
        let table = ActionTable::new(&t);
        assert_eq!(table.len(), action_space_size(&t));
        assert_eq!(table.len(), 1 + 8 + 32 + 128);
        assert_eq!(ActionTable::new(&ring3()).len(), 1 + 3 + 12 + 24);
    }

    #[test]
    fn index_is_a_bijection() {
        let table = ActionTable::new(&toy5());
        for (i, a) in table.actions().iter().enumerate() {
            assert_eq!(table.index_of(a), Some(i));
        }
        assert_eq!(
            table.index_of(&Action::SubstationAssign {
                substation: 0,
                mask: 1 << 20
            }),
            None
        );
    }

    #[test]
    fn substation_sizes_feed_the_table() {
        let spec = TopologySpec {
            name: "x".into(),
            substations: 2,
            lines: vec![Line {
                from: 0,
                to: 1,
                susceptance: 1.0,
                thermal_limit: 1.0,
            }],
            generators: vec![],
            loads: vec![],
        };
        let t = build_topology(&spec).unwrap();
        // 1 + 4 + (2 + 2) families, plus do-nothing.
        assert_eq!(ActionTable::new(&t).len(), 10);
    }
}
