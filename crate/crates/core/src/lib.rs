//! Quasi-stationary distributions and Lyapunov criteria for Markov processes
//! absorbed when a coordinate vanishes.
//!
//! The crate covers two model families: multitype birth-death chains and
//! competitive Feller diffusions. For each it builds an explicit Lyapunov
//! pair `(V, phi)`, checks the criteria on finite domains, and estimates the
//! quasi-stationary distribution and its convergence rate.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments, clippy::needless_range_loop)]

pub mod birth_death;
pub mod error;
pub mod feller;
pub mod grid;
pub mod lyapunov;
pub mod measure;
pub mod qsd;
pub mod reproduce;
pub mod rng;
pub mod sim;
pub mod state;
pub mod stats;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use grid::TimeGrid;
pub use measure::{tv_distance, tv_half_l1, BinGrid, BinIndex, EmpiricalMeasure};
pub use rng::{RngStream, SimRng};
pub use sim::{simulate_batch, AbsorbedProcess, SimBatchConfig, TrajectoryBatch};
pub use state::{ContinuousState, DiscreteState, State};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/lyapunov.md")]
    mod lyapunov {}
    #[doc = include_str!("../../../book/src/qsd.md")]
    mod qsd {}
    #[doc = include_str!("../../../book/src/reproducibility.md")]
    mod reproducibility {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/acceptance.md")]
    mod acceptance {}
}
