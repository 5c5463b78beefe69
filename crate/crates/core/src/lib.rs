//! Exact couplings of random walks on countable discrete groups.
//!
//! The crate is organised bottom-up:
//!
//! * [`group`]: concrete groups (lattices, cyclic groups, products, free
//!   groups) with canonical element encodings;
//! * [`measure`]: finitely supported measures with convolution, shifts,
//!   meets and total variation;
//! * [`coupling`]: the block-splitting coupling of a walk started at `e`
//!   with one started at `x`, and its simulation;
//! * [`analysis`]: exact hitting-time laws, total variation curves, decay
//!   fits and the coupling inequality;
//! * [`solver`]: membership tests for the sets of shifts admitting
//!   possible or successful exact couplings.

pub mod analysis;
pub mod coupling;
pub mod group;
pub mod mass;
pub mod measure;
pub mod rng;
pub mod solver;
pub mod stats;

pub use coupling::{build_plan, multi_couple, run_coupling, CouplingPlan, CouplingRun, CouplingTime, NuStrategy, RunOptions};
pub use group::{ElementOrder, GroupCtx, GroupElement, GroupError};
pub use mass::{Mass, Rational};
pub use measure::{AtomGuard, AtomicMeasure, MeasureError};
pub use rng::RunSeed;
