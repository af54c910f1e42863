//! DC power flow over bus-split substations.
//!
//! Every substation owns two busbars; electrical node `2·sub + bus`. A node
//! is active when at least one connected element sits on it. Islands are the
//! connected components of active nodes over in-service lines; each island
//! pins its lowest node as angle reference and solves `B·θ = P`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use super::topology::{ElementKind, GridTopology};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PowerFlowError {
    #[error("expected {expected} nodal injections, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("island {island} injections do not balance (net {net} MW)")]
    UnbalancedIsland { island: usize, net: f64 },
    #[error("reduced susceptance matrix of island {island} is singular")]
    Singular { island: usize },
}

/// Physical reason an operating point cannot be established.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowFailure {
    #[error("load {load} is islanded without generation")]
    IslandedLoad { load: usize },
    #[error("island demand {demand} MW exceeds generation capacity {capacity} MW")]
    InsufficientGeneration { demand: f64, capacity: f64 },
    #[error(transparent)]
    Numerical(#[from] PowerFlowError),
}

pub fn node_id(substation: usize, bus: u8) -> usize {
    2 * substation + bus as usize
}

#[derive(Debug, Clone)]
pub struct ElectricalNetwork {
    pub n_nodes: usize,
    /// Node of each element; `None` for endpoints of out-of-service lines.
    pub element_node: Vec<Option<usize>>,
    pub line_nodes: Vec<Option<(usize, usize)>>,
    pub island_of: Vec<Option<usize>>,
    pub islands: Vec<Vec<usize>>,
}

impl ElectricalNetwork {
    pub fn build(topology: &GridTopology, bus_assignment: &[u8], line_status: &[bool]) -> Self {
        let n_nodes = 2 * topology.n_substations();
        let mut element_node = vec![None; topology.n_elements()];
        for (e, node) in element_node.iter_mut().enumerate() {
            let connected = match topology.element_kind(e) {
                ElementKind::LineOrigin(l) | ElementKind::LineExtremity(l) => line_status[l],
                _ => true,
            };
            if connected {
                *node = Some(node_id(topology.element_substation(e), bus_assignment[e]));
            }
        }
        let line_nodes: Vec<Option<(usize, usize)>> = (0..topology.n_lines())
            .map(|l| {
                let o = element_node[topology.line_origin_element(l)]?;
                let x = element_node[topology.line_extremity_element(l)]?;
                Some((o, x))
            })
            .collect();

        let mut active = vec![false; n_nodes];
        for n in element_node.iter().flatten() {
            active[*n] = true;
        }
        let mut parent: Vec<usize> = (0..n_nodes).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for &(a, b) in line_nodes.iter().flatten() {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        let mut island_of = vec![None; n_nodes];
        let mut islands: Vec<Vec<usize>> = Vec::new();
        let mut root_island = vec![usize::MAX; n_nodes];
        for node in 0..n_nodes {
            if !active[node] {
                continue;
            }
            let r = find(&mut parent, node);
            if root_island[r] == usize::MAX {
                root_island[r] = islands.len();
                islands.push(Vec::new());
            }
            island_of[node] = Some(root_island[r]);
            islands[root_island[r]].push(node);
        }
        ElectricalNetwork {
            n_nodes,
            element_node,
            line_nodes,
            island_of,
            islands,
        }
    }
}

/// Line flows (MW, origin → extremity) for balanced nodal injections.
///
/// `injections` has one entry per electrical node (`2·N_sub`). Every island
/// must balance; injections on inactive nodes must be zero.
pub fn dc_power_flow(
    topology: &GridTopology,
    bus_assignment: &[u8],
    line_status: &[bool],
    injections: &[f64],
) -> Result<Vec<f64>, PowerFlowError> {
    let net = ElectricalNetwork::build(topology, bus_assignment, line_status);
    solve_network(topology, &net, injections)
}

pub fn solve_network(
    topology: &GridTopology,
    net: &ElectricalNetwork,
    injections: &[f64],
) -> Result<Vec<f64>, PowerFlowError> {
    if injections.len() != net.n_nodes {
        return Err(PowerFlowError::LengthMismatch {
            expected: net.n_nodes,
            got: injections.len(),
        });
    }
    let scale = 1.0 + injections.iter().map(|x| x.abs()).sum::<f64>();
    for (node, &p) in injections.iter().enumerate() {
        if net.island_of[node].is_none() && p.abs() > 1e-9 * scale {
            return Err(PowerFlowError::UnbalancedIsland {
                island: usize::MAX,
                net: p,
            });
        }
    }

    let mut theta = vec![0.0; net.n_nodes];
    let mut local = vec![usize::MAX; net.n_nodes];
    for (island, nodes) in net.islands.iter().enumerate() {
        let total: f64 = nodes.iter().map(|&n| injections[n]).sum();
        if total.abs() > 1e-9 * scale {
            return Err(PowerFlowError::UnbalancedIsland { island, net: total });
        }
        if nodes.len() < 2 {
            continue;
        }
        // nodes[0] is the reference angle.
        for (i, &n) in nodes.iter().enumerate().skip(1) {
            local[n] = i - 1;
        }
        let dim = nodes.len() - 1;
        let mut b = DMatrix::<f64>::zeros(dim, dim);
        for (l, ends) in net.line_nodes.iter().enumerate() {
            let Some((from, to)) = *ends else { continue };
            if net.island_of[from] != Some(island) || from == to {
                continue;
            }
            let y = topology.lines()[l].susceptance;
            let (i, j) = (local[from], local[to]);
            if i != usize::MAX {
                b[(i, i)] += y;
            }
            if j != usize::MAX {
                b[(j, j)] += y;
            }
            if i != usize::MAX && j != usize::MAX {
                b[(i, j)] -= y;
                b[(j, i)] -= y;
            }
        }
        let p = DVector::from_iterator(dim, nodes[1..].iter().map(|&n| injections[n]));
        let chol = b.cholesky().ok_or(PowerFlowError::Singular { island })?;
        let solution = chol.solve(&p);
        for (i, &n) in nodes.iter().enumerate().skip(1) {
            theta[n] = solution[i - 1];
        }
    }

    Ok(net
        .line_nodes
        .iter()
        .enumerate()
        .map(|(l, ends)| match *ends {
            Some((from, to)) => topology.lines()[l].susceptance * (theta[from] - theta[to]),
            None => 0.0,
        })
        .collect())
}

/// A solved operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSolution {
    pub gen_mw: Vec<f64>,
    pub flow_mw: Vec<f64>,
    pub rho: Vec<f64>,
    pub total_load: f64,
    /// Served load plus line losses.
    pub total_production: f64,
    pub losses: f64,
}

/// Balances generation to load on every island, solves the flows and
/// accounts quadratic line losses (`loss_factor · flow² / susceptance`).
pub fn dispatch_and_solve(
    topology: &GridTopology,
    bus_assignment: &[u8],
    line_status: &[bool],
    load_mw: &[f64],
    gen_schedule: &[f64],
    loss_factor: f64,
) -> Result<FlowSolution, FlowFailure> {
    let net = ElectricalNetwork::build(topology, bus_assignment, line_status);
    let mut island_loads = vec![Vec::new(); net.islands.len()];
    let mut island_gens = vec![Vec::new(); net.islands.len()];
    for (i, _) in topology.loads().iter().enumerate() {
        let node = net.element_node[topology.load_element(i)].expect("loads are always connected");
        island_loads[net.island_of[node].expect("active node")].push(i);
    }
    for (g, _) in topology.generators().iter().enumerate() {
        let node = net.element_node[topology.generator_element(g)].expect("generators are always connected");
        island_gens[net.island_of[node].expect("active node")].push(g);
    }

    let mut gen_mw = vec![0.0; topology.generators().len()];
    for island in 0..net.islands.len() {
        let loads = &island_loads[island];
        let gens = &island_gens[island];
        if gens.is_empty() {
            if let Some(&load) = loads.first() {
                return Err(FlowFailure::IslandedLoad { load });
            }
            continue;
        }
        let demand: f64 = loads.iter().map(|&i| load_mw[i]).sum();
        let capacity: f64 = gens.iter().map(|&g| topology.generators()[g].p_max).sum();
        if demand > capacity {
            return Err(FlowFailure::InsufficientGeneration { demand, capacity });
        }
        let caps: Vec<f64> = gens.iter().map(|&g| topology.generators()[g].p_max).collect();
        let sched: Vec<f64> = gens.iter().map(|&g| gen_schedule[g].max(0.0)).collect();
        for (k, out) in water_fill(demand, &sched, &caps).into_iter().enumerate() {
            gen_mw[gens[k]] = out;
        }
    }

    let mut injections = vec![0.0; net.n_nodes];
    for (g, out) in gen_mw.iter().enumerate() {
        injections[net.element_node[topology.generator_element(g)].unwrap()] += out;
    }
    for (i, l) in load_mw.iter().enumerate() {
        injections[net.element_node[topology.load_element(i)].unwrap()] -= l;
    }
    // Remove floating-point drift so each island balances exactly enough.
    for (island, nodes) in net.islands.iter().enumerate() {
        let total: f64 = nodes.iter().map(|&n| injections[n]).sum();
        if let Some(&g) = island_gens[island].first() {
            let node = net.element_node[topology.generator_element(g)].unwrap();
            injections[node] -= total;
            gen_mw[g] -= total;
        }
    }
    let flow_mw = solve_network(topology, &net, &injections)?;
    let rho: Vec<f64> = flow_mw
        .iter()
        .zip(topology.lines())
        .zip(line_status)
        .map(|((f, l), &on)| if on { f.abs() / l.thermal_limit } else { 0.0 })
        .collect();
    let losses: f64 = flow_mw
        .iter()
        .zip(topology.lines())
        .map(|(f, l)| loss_factor * f * f / l.susceptance)
        .sum();
    let total_load: f64 = load_mw.iter().sum();
    let total_production = total_load + losses;
    if total_load > 0.0 {
        let scale = total_production / total_load;
        for g in gen_mw.iter_mut() {
            *g *= scale;
        }
    }
    Ok(FlowSolution {
        gen_mw,
        flow_mw,
        rho,
        total_load,
        total_production,
        losses,
    })
}

/// Splits `demand` proportionally to `weights`, capping at `caps` and
/// redistributing the excess. Callers guarantee `demand ≤ Σ caps`.
fn water_fill(demand: f64, weights: &[f64], caps: &[f64]) -> Vec<f64> {
    let n = weights.len();
    let mut out = vec![0.0; n];
    let mut free: Vec<usize> = (0..n).collect();
    let mut remaining = demand;
    while !free.is_empty() && remaining > 0.0 {
        let mut w: Vec<f64> = free.iter().map(|&i| weights[i]).collect();
        if w.iter().sum::<f64>() <= 0.0 {
            w = free.iter().map(|&i| caps[i]).collect();
        }
        let total: f64 = w.iter().sum();
        let mut capped = Vec::new();
        for (k, &i) in free.iter().enumerate() {
            let share = remaining * w[k] / total;
            if share > caps[i] {
                capped.push(i);
            }
        }
        if capped.is_empty() {
            for (k, &i) in free.iter().enumerate() {
                out[i] = remaining * w[k] / total;
            }
            break;
        }
        for &i in &capped {
            out[i] = caps[i];
            remaining -= caps[i];
        }
        free.retain(|i| !capped.contains(i));
    }
    out
}
