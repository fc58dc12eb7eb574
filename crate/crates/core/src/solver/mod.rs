//! Vectorized Liouville equation and its steady state.
//!
//! ρ is flattened row-major (ρ_lm at `l * dim + m`) and all rates are
//! divided by the largest decay rate before assembly, so the stored matrix
//! is O(1) even though Γ and γ_p differ by about seven orders of magnitude.

mod density;
mod evolve;
mod liouvillian;
mod steady;

pub use density::DensityMatrix;
pub use evolve::{time_evolve, time_evolve_traced, Evolution};
pub use liouvillian::{assemble, Liouvillian, LiouvillianParts};
pub use steady::{steady_state, steady_state_with, SolveOptions, SteadyStateSolver};
