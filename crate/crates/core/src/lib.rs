//! Even/odd preconditioned Wilson-fermion conjugate gradient over a 4D domain
//! decomposition with explicit halo exchange.
//!
//! Ranks are threads (or a single in-process rank) that communicate only
//! through [`comm::Comm`]; the local kernels use a rayon executor unless the
//! `parallel` feature is disabled.

pub mod algebra;
pub mod comm;
pub mod exec;
pub mod geometry;
pub mod hopping;
pub mod layout;
pub mod solver;

pub use algebra::{FermionField, GaugeField, Spinor};
pub use comm::{run_ranks, Comm, CommError, TransportKind};
pub use exec::Executor;
pub use geometry::{decompose, Decomposition, Dims, GlobalLattice, Parity, ProcessGrid};
pub use hopping::{EvenOddOperator, HoppingParams, RankCtx};
pub use layout::Layout;
pub use solver::{cg_solve, CGConfig, CGResult, SolverError};
