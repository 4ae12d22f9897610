//! Numerical core for periodic magnetic Schrödinger operators
//! `H = (ih d + A)*(ih d + A)` on the plane with a `Z²`-periodic magnetic
//! field `B = b(x) dx₁∧dx₂`.
//!
//! The crate is `no_std` (it needs `alloc`) and carries no IO. It provides:
//!
//! * [`field`]: field models, the intensity `Tr⁺B`, its minimum `b₀`,
//!   magnetic wells and gauge potentials with their line integrals.
//! * [`lattice`]: masked uniform grids and the Peierls (gauge covariant)
//!   five-point discretization of `H` with Dirichlet conditions.
//! * [`eigensolve`]: envelope `LDLᴴ` factorization with inertia counts,
//!   shift-invert Lanczos and a dense Hermitian eigensolver.
//! * [`quasimode`]: localized approximate eigenfunctions and their residuals.
//! * [`agmon`]: distances in the degenerate Agmon metric, conjugation weights
//!   and the weighted energy identity.
//! * [`spectra`]: clustering, gap census, spacing and counting checks built
//!   on top of computed spectra.
#![no_std]
#![deny(missing_debug_implementations)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod agmon;
pub mod eigensolve;
pub mod field;
pub mod lattice;
pub mod quadrature;
pub mod quasimode;
pub mod spectra;

/// Double precision complex scalar used throughout.
pub type C64 = num_complex::Complex64;

/// A point of the plane.
pub type Point = [f64; 2];

pub use agmon::{AgmonError, AgmonField, Stencil, WeightFunction};
pub use eigensolve::{EigenError, EigenResult, SolverOptions};
pub use field::{FieldError, FieldModel, GaugeField, GaugeKind, WellSet};
pub use lattice::{BoundaryCondition, DomainMask, Grid, LatticeError, MagneticOperator};
pub use quasimode::{Quasimode, QuasimodeError};
pub use spectra::{ClusterReport, GapCensus, SpectraError};
