//! Topology control of a simulated power grid with soft actor-critic agents
//! whose experience is refined by actor and critic advisors.

pub mod grid;
pub mod rl;
pub mod experience;
pub mod textio;
pub mod advisor;
pub mod train;
