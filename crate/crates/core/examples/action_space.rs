//! Size and layout of the discrete topology action space.

use ace_core::grid::topology::{WCCI2020_LIKE_SUBSTATION_SIZES, WCCI2020_N_LINES};
use ace_core::grid::{action_family_count, action_space_size, Action, ActionTable, GridTopology};

fn main() {
    for name in ["ring3", "toy5"] {
        let t = GridTopology::resolve(name).expect("bundled topology");
        let family = action_family_count(t.n_lines(), &t.substation_sizes());
        println!(
            "{name:>14}: {} substations, {} lines, {} elements, family count {family}, table size {}",
            t.n_substations(),
            t.n_lines(),
            t.n_elements(),
            action_space_size(&t)
        );
    }

    println!(
        "WCCI-2020-like shape: 36 substations, {WCCI2020_N_LINES} lines, family count {}",
        action_family_count(WCCI2020_N_LINES, &WCCI2020_LIKE_SUBSTATION_SIZES)
    );

    let t = GridTopology::resolve("toy5").unwrap();
    let table = ActionTable::new(&t);
    let mut counts = [0usize; 4];
    for a in table.actions() {
        counts[match a {
            Action::NoOp => 0,
            Action::LineSwitch { .. } => 1,
            Action::LineBusSet { .. } => 2,
            Action::SubstationAssign { .. } => 3,
        }] += 1;
    }
    println!("\ntoy5 table: {} no-op, {} line switches, {} line bus sets, {} substation assignments", counts[0], counts[1], counts[2], counts[3]);
    for i in [0, 1, 9, table.len() - 1] {
        println!("  #{i:<4} {:?}", table.get(i));
    }
}
