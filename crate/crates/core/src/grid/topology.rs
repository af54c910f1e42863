//! Static network description: substations, lines, generators and loads.
//!
//! Element endpoints are indexed globally in a fixed order: generators,
//! loads, line origins, line extremities. Each substation keeps its own
//! ordered element list; bit `k` of a substation bus mask refers to the
//! `k`-th element of that list.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("{what} {index} references unknown substation {substation}")]
    UnknownSubstation {
        what: &'static str,
        index: usize,
        substation: usize,
    },
    #[error("line {line} has non-positive {field} ({value})")]
    NonPositive {
        line: usize,
        field: &'static str,
        value: f64,
    },
    #[error("generator {generator} has non-positive p_max ({value})")]
    NonPositiveCapacity { generator: usize, value: f64 },
    #[error("line {line} connects substation {substation} to itself")]
    SelfLoop { line: usize, substation: usize },
    #[error("topology has no substations")]
    Empty,
    #[error("substation {substation} has {count} elements, more than the supported 63")]
    SubstationTooLarge { substation: usize, count: usize },
    #[error("line graph is disconnected: substation {substation} unreachable from substation 0")]
    Disconnected { substation: usize },
    #[error("cannot read topology file: {0}")]
    Io(String),
    #[error("malformed topology file: {0}")]
    Parse(String),
    #[error("unknown built-in topology `{0}`")]
    UnknownBuiltin(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ElementKind {
    Generator(usize),
    Load(usize),
    LineOrigin(usize),
    LineExtremity(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    /// Per-unit susceptance.
    pub susceptance: f64,
    /// MW.
    pub thermal_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub substation: usize,
    pub p_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Load {
    pub substation: usize,
    /// Reference demand used when synthesizing scenarios.
    #[serde(default)]
    pub nominal_mw: f64,
}

/// Serialized form of a topology (TOML).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub name: String,
    pub substations: usize,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    pub loads: Vec<Load>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Substation {
    pub elements: Vec<ElementKind>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridTopology {
    name: String,
    substations: Vec<Substation>,
    lines: Vec<Line>,
    generators: Vec<Generator>,
    loads: Vec<Load>,
    /// (substation, position within the substation) per global element.
    element_location: Vec<(usize, usize)>,
}

impl GridTopology {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn substations(&self) -> &[Substation] {
        &self.substations
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn loads(&self) -> &[Load] {
        &self.loads
    }

    pub fn n_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn n_substations(&self) -> usize {
        self.substations.len()
    }

    pub fn n_elements(&self) -> usize {
        self.element_location.len()
    }

    /// Element counts per substation, `Sub(i)`.
    pub fn substation_sizes(&self) -> Vec<usize> {
        self.substations.iter().map(|s| s.elements.len()).collect()
    }

    pub fn generator_element(&self, g: usize) -> usize {
        g
    }

    pub fn load_element(&self, l: usize) -> usize {
        self.generators.len() + l
    }

    pub fn line_origin_element(&self, line: usize) -> usize {
        self.generators.len() + self.loads.len() + line
    }

    pub fn line_extremity_element(&self, line: usize) -> usize {
        self.generators.len() + self.loads.len() + self.lines.len() + line
    }

    pub fn element_kind(&self, element: usize) -> ElementKind {
        let g = self.generators.len();
        let l = self.loads.len();
        let n = self.lines.len();
        match element {
            e if e < g => ElementKind::Generator(e),
            e if e < g + l => ElementKind::Load(e - g),
            e if e < g + l + n => ElementKind::LineOrigin(e - g - l),
            e => ElementKind::LineExtremity(e - g - l - n),
        }
    }

    pub fn element_index(&self, kind: ElementKind) -> usize {
        match kind {
            ElementKind::Generator(i) => self.generator_element(i),
            ElementKind::Load(i) => self.load_element(i),
            ElementKind::LineOrigin(i) => self.line_origin_element(i),
            ElementKind::LineExtremity(i) => self.line_extremity_element(i),
        }
    }

    pub fn element_substation(&self, element: usize) -> usize {
        self.element_location[element].0
    }

    /// Position of the element inside its substation's element list.
    pub fn element_position(&self, element: usize) -> usize {
        self.element_location[element].1
    }

    /// Global element indices attached to a substation, in substation order.
    pub fn substation_elements(&self, sub: usize) -> Vec<usize> {
        self.substations[sub]
            .elements
            .iter()
            .map(|&k| self.element_index(k))
            .collect()
    }

    /// Lines with an endpoint at `sub`, paired with the endpoint's element index.
    pub fn lines_at(&self, sub: usize) -> Vec<(usize, usize)> {
        self.substations[sub]
            .elements
            .iter()
            .filter_map(|&k| match k {
                ElementKind::LineOrigin(l) | ElementKind::LineExtremity(l) => {
                    Some((l, self.element_index(k)))
                }
                _ => None,
            })
            .collect()
    }

    pub fn to_spec(&self) -> TopologySpec {
        TopologySpec {
            name: self.name.clone(),
            substations: self.substations.len(),
            lines: self.lines.clone(),
            generators: self.generators.clone(),
            loads: self.loads.clone(),
        }
    }

    pub fn load_file(path: &Path) -> Result<Self, TopologyError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TopologyError::Io(format!("{}: {e}", path.display())))?;
        let spec: TopologySpec =
            toml::from_str(&text).map_err(|e| TopologyError::Parse(e.to_string()))?;
        build_topology(&spec)
    }

    /// Resolves a built-in name (`toy5`, `ring3`) or a path to a topology file.
    pub fn resolve(name_or_path: &str) -> Result<Self, TopologyError> {
        match name_or_path {
            "toy5" => Ok(toy5()),
            "ring3" => Ok(ring3()),
            other => {
                let path = Path::new(other);
                if path.exists() {
                    Self::load_file(path)
                } else {
                    Err(TopologyError::UnknownBuiltin(other.to_string()))
                }
            }
        }
    }
}

pub fn build_topology(spec: &TopologySpec) -> Result<GridTopology, TopologyError> {
    let n_sub = spec.substations;
    if n_sub == 0 {
        return Err(TopologyError::Empty);
    }
    for (i, line) in spec.lines.iter().enumerate() {
        for sub in [line.from, line.to] {
            if sub >= n_sub {
                return Err(TopologyError::UnknownSubstation {
                    what: "line",
                    index: i,
                    substation: sub,
                });
            }
        }
        if line.from == line.to {
            return Err(TopologyError::SelfLoop {
                line: i,
                substation: line.from,
            });
        }
        if !(line.susceptance > 0.0) {
            return Err(TopologyError::NonPositive {
                line: i,
                field: "susceptance",
                value: line.susceptance,
            });
        }
        if !(line.thermal_limit > 0.0) {
            return Err(TopologyError::NonPositive {
                line: i,
                field: "thermal_limit",
                value: line.thermal_limit,
            });
        }
    }
    for (i, g) in spec.generators.iter().enumerate() {
        if g.substation >= n_sub {
            return Err(TopologyError::UnknownSubstation {
                what: "generator",
                index: i,
                substation: g.substation,
            });
        }
        if !(g.p_max > 0.0) {
            return Err(TopologyError::NonPositiveCapacity {
                generator: i,
                value: g.p_max,
            });
        }
    }
    for (i, l) in spec.loads.iter().enumerate() {
        if l.substation >= n_sub {
            return Err(TopologyError::UnknownSubstation {
                what: "load",
                index: i,
                substation: l.substation,
            });
        }
    }

    // Connectivity over substations with every line in service.
    let mut parent: Vec<usize> = (0..n_sub).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for line in &spec.lines {
        let (a, b) = (find(&mut parent, line.from), find(&mut parent, line.to));
        if a != b {
            parent[a] = b;
        }
    }
    let root = find(&mut parent, 0);
    for sub in 1..n_sub {
        if find(&mut parent, sub) != root {
            return Err(TopologyError::Disconnected { substation: sub });
        }
    }

    let mut substations = vec![Substation { elements: Vec::new() }; n_sub];
    let mut kinds: Vec<(ElementKind, usize)> = Vec::new();
    kinds.extend(
        spec.generators
            .iter()
            .enumerate()
            .map(|(i, g)| (ElementKind::Generator(i), g.substation)),
    );
    kinds.extend(
        spec.loads
            .iter()
            .enumerate()
            .map(|(i, l)| (ElementKind::Load(i), l.substation)),
    );
    kinds.extend(
        spec.lines
            .iter()
            .enumerate()
            .map(|(i, l)| (ElementKind::LineOrigin(i), l.from)),
    );
    kinds.extend(
        spec.lines
            .iter()
            .enumerate()
            .map(|(i, l)| (ElementKind::LineExtremity(i), l.to)),
    );
    let mut element_location = Vec::with_capacity(kinds.len());
    for (kind, sub) in kinds {
        element_location.push((sub, substations[sub].elements.len()));
        substations[sub].elements.push(kind);
    }
    for (i, s) in substations.iter().enumerate() {
        if s.elements.len() > 63 {
            return Err(TopologyError::SubstationTooLarge {
                substation: i,
                count: s.elements.len(),
            });
        }
    }

    Ok(GridTopology {
        name: spec.name.clone(),
        substations,
        lines: spec.lines.clone(),
        generators: spec.generators.clone(),
        loads: spec.loads.clone(),
        element_location,
    })
}

fn line(from: usize, to: usize, susceptance: f64, thermal_limit: f64) -> Line {
    Line {
        from,
        to,
        susceptance,
        thermal_limit,
    }
}

/// Five substations, eight lines, three generators, four loads.
pub fn toy5_spec() -> TopologySpec {
    TopologySpec {
        name: "toy5".into(),
        substations: 5,
        lines: vec![
            line(0, 1, 12.0, 170.0),
            line(0, 2, 8.0, 140.0),
            line(1, 2, 10.0, 110.0),
            line(1, 3, 9.0, 120.0),
            line(2, 3, 7.0, 100.0),
            line(2, 4, 8.0, 110.0),
            line(3, 4, 10.0, 110.0),
            line(0, 4, 6.0, 120.0),
        ],
        generators: vec![
            Generator {
                substation: 0,
                p_max: 260.0,
            },
            Generator {
                substation: 1,
                p_max: 120.0,
            },
            Generator {
                substation: 4,
                p_max: 140.0,
            },
        ],
        loads: vec![
            Load {
                substation: 1,
                nominal_mw: 55.0,
            },
            Load {
                substation: 2,
                nominal_mw: 95.0,
            },
            Load {
                substation: 3,
                nominal_mw: 80.0,
            },
            Load {
                substation: 4,
                nominal_mw: 60.0,
            },
        ],
    }
}

pub fn toy5() -> GridTopology {
    build_topology(&toy5_spec()).expect("built-in toy5 topology is valid")
}

/// Three substations in a ring: A(0)-B(1), A(0)-C(2), C(2)-B(1).
pub fn ring3_spec() -> TopologySpec {
    TopologySpec {
        name: "ring3".into(),
        substations: 3,
        lines: vec![
            line(0, 1, 10.0, 100.0),
            line(0, 2, 10.0, 100.0),
            line(2, 1, 10.0, 100.0),
        ],
        generators: vec![Generator {
            substation: 0,
            p_max: 200.0,
        }],
        loads: vec![
            Load {
                substation: 1,
                nominal_mw: 60.0,
            },
            Load {
                substation: 2,
                nominal_mw: 40.0,
            },
        ],
    }
}

pub fn ring3() -> GridTopology {
    build_topology(&ring3_spec()).expect("built-in ring3 topology is valid")
}

/// Substation element counts for a 36-substation, 59-line grid with 22
/// generators and 37 loads (177 elements), shaped after the L2RPN WCCI 2020
/// network: one 17-element hub substation and a long tail of small ones.
pub const WCCI2020_LIKE_SUBSTATION_SIZES: [usize; 36] = [
    3, 6, 4, 6, 3, 5, 3, 6, 3, 4, 4, 4, 6, 3, 4, 6, 17, 4, 6, 4, 4, 6, 9, 6, 4, 3, 8, 4, 4, 3, 5,
    4, 3, 5, 4, 4,
];
pub const WCCI2020_N_LINES: usize = 59;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring3_counts() {
        let t = ring3();
        assert_eq!(t.n_lines(), 3);
        assert_eq!(t.n_substations(), 3);
    }

    #[test]
    fn unknown_substation_rejected() {
        let mut spec = ring3_spec();
        spec.lines.push(line(0, 9, 1.0, 1.0));
        assert_eq!(
            build_topology(&spec),
            Err(TopologyError::UnknownSubstation {
                what: "line",
                index: 3,
                substation: 9
            })
        );
    }

    #[test]
    fn non_positive_values_rejected() {
        let mut spec = ring3_spec();
        spec.lines[1].susceptance = 0.0;
        assert!(matches!(
            build_topology(&spec),
            Err(TopologyError::NonPositive {
                field: "susceptance",
                ..
            })
        ));
        let mut spec = ring3_spec();
        spec.lines[2].thermal_limit = -5.0;
        assert!(matches!(
            build_topology(&spec),
            Err(TopologyError::NonPositive {
                field: "thermal_limit",
                ..
            })
        ));
    }

    #[test]
    fn disconnected_rejected() {
        let spec = TopologySpec {
            name: "split".into(),
            substations: 4,
            lines: vec![line(0, 1, 1.0, 1.0), line(2, 3, 1.0, 1.0)],
            generators: vec![],
            loads: vec![],
        };
        assert!(matches!(
            build_topology(&spec),
            Err(TopologyError::Disconnected { .. })
        ));
    }

    #[test]
    fn toy5_connected_by_independent_union_find() {
        let t = toy5();
        // Independent connectivity check: iterative graph search from substation 0.
        let mut seen = vec![false; t.n_substations()];
        let mut stack = vec![0usize];
        while let Some(s) = stack.pop() {
            if std::mem::replace(&mut seen[s], true) {
                continue;
            }
            for l in t.lines() {
                if l.from == s && !seen[l.to] {
                    stack.push(l.to);
                }
                if l.to == s && !seen[l.from] {
                    stack.push(l.from);
                }
            }
        }
        assert!(seen.iter().all(|&v| v));
        assert_eq!(t.n_lines(), 8);
        assert_eq!(t.generators().len(), 3);
        assert_eq!(t.loads().len(), 4);
    }

    #[test]
    fn every_element_in_exactly_one_substation() {
        let t = toy5();
        let mut count = vec![0; t.n_elements()];
        for (s, sub) in t.substations().iter().enumerate() {
            for &k in &sub.elements {
                let e = t.element_index(k);
                count[e] += 1;
                assert_eq!(t.element_substation(e), s);
                assert_eq!(t.element_kind(e), k);
            }
        }
        assert!(count.iter().all(|&c| c == 1));
        assert_eq!(t.substation_sizes().iter().sum::<usize>(), 23);
    }

    #[test]
    fn wcci_shape_totals() {
        assert_eq!(WCCI2020_LIKE_SUBSTATION_SIZES.iter().sum::<usize>(), 177);
        assert_eq!(22 + 37 + 2 * WCCI2020_N_LINES, 177);
    }

    #[test]
    fn spec_round_trips_through_toml() {
        let spec = toy5_spec();
        let text = toml::to_string(&spec).unwrap();
        let back: TopologySpec = toml::from_str(&text).unwrap();
        assert_eq!(build_topology(&back).unwrap(), toy5());
    }
}
