//! DC power flow on the three-bus ring and a dispatched operating point on toy5.

use ace_core::grid::powerflow::node_id;
use ace_core::grid::{dc_power_flow, dispatch_and_solve, ring3, toy5};

fn main() {
    let ring = ring3();
    let bus = vec![0u8; ring.n_elements()];
    let status = vec![true; ring.n_lines()];
    let mut injections = vec![0.0; 2 * ring.n_substations()];
    injections[node_id(0, 0)] = 1.0;
    injections[node_id(1, 0)] = -1.0;
    let flows = dc_power_flow(&ring, &bus, &status, &injections).expect("ring3 solves");
    println!("ring3, 1 MW from bus 0 to bus 1:");
    for (l, f) in flows.iter().enumerate() {
        println!("  line {l}: {f:+.6} MW");
    }

    let grid = toy5();
    let bus = vec![0u8; grid.n_elements()];
    let status = vec![true; grid.n_lines()];
    let loads: Vec<f64> = grid.loads().iter().map(|l| l.nominal_mw).collect();
    let schedule: Vec<f64> = grid.generators().iter().map(|g| 0.6 * g.p_max).collect();
    let sol = dispatch_and_solve(&grid, &bus, &status, &loads, &schedule, 0.003).expect("toy5 solves");
    println!("\ntoy5 nominal point: load {:.2} MW, production {:.2} MW, losses {:.3} MW", sol.total_load, sol.total_production, sol.losses);
    for (l, (f, r)) in sol.flow_mw.iter().zip(&sol.rho).enumerate() {
        println!("  line {l}: flow {f:+8.3} MW, rho {r:.3}");
    }
}
