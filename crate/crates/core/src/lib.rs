//! Green operators for hyperbolic lattice operators with compactly supported
//! nonlocal interactions.
//!
//! The crate builds causal inverses of discrete Klein–Gordon and null-wave
//! stencils, perturbs them by an interaction family `A(λ)` supported in a
//! compact region `K`, and reduces every question about the perturbed problem
//! to a `|K| x |K|` matrix `I + A(λ)E±`.

pub mod error;
pub mod fredholm;
pub mod green;
pub mod lattice;
pub mod linalg;
pub mod lusys;
pub mod moller;
pub mod operators;
pub mod par;
pub mod profiles;
pub mod report;
pub mod sampling;
pub mod scenarios;

pub use error::{Error, Result};
pub use fredholm::{Fredholm, KBlock, ScanReport, ScanWindow, TAU_SING};
pub use green::{CausalSolver, Sign};
pub use lattice::{Cell, CellSet, Direction, GridFunction, GridSpec, Region, Topology};
pub use operators::{DiffOp, InteractionFamily, KernelFamily, KernelOp, LinearMap, NihiloFamily, NihiloOp};
pub use report::VerifyReport;
