//! Minimization: weak-membrane alternation for `F_{ε,g}`, exact min-cut and
//! ICM for the Ising energy, and exhaustive oracles for tiny instances.

mod brute;
pub mod cg;
mod ising;
pub mod maxflow;
mod membrane;

pub use brute::{brute_force_min, MAX_SEARCH};
pub use ising::{
    brute_force_binary, icm_binary, min_cut_binary, minimize_ising, IsingResult, ICM_RESTARTS, MAX_BINARY_FREE,
};
pub use membrane::{minimize_weak_membrane, SegmentationResult, SolveConfig};
