//! Spectral Lagrangian-Eulerian solver kit for viscoelastic (Oldroyd-B) and
//! non-resistive MHD flows on periodic boxes, together with a verification
//! harness that audits the operator, kernel, and commutator estimates the
//! local-existence argument rests on.
//!
//! The crate is organized around the objects of that argument:
//!
//! - [`grid`], [`field`], [`spectral`], [`interp`]: the periodic-box
//!   substrate (transforms, derivatives, interpolation).
//! - [`spaces`]: discrete estimators for Holder/Lebesgue norms and the
//!   path-space norms.
//! - [`kernels`]: closed-form heat kernel family, its derivatives, the
//!   two-time kernel, and quadrature audits of their L1 bounds.
//! - [`operators`]: Leray projection, Riesz products, heat semigroup, and
//!   the Duhamel operators with exact exponential time integration.
//! - [`flowmap`]: volume-preserving maps, inversion, composition.
//! - [`commutators`]: advective commutators in direct and decomposed forms.
//! - [`solver`]: the Lagrangian fixed-point system, Picard iteration, and
//!   contraction/Lipschitz probes.
//! - [`harness`], [`manifest`]: manifest-driven experiments backing the CLI.
//!
//! Data-parallel inner loops use rayon when the default `parallel` feature
//! is enabled and fall back to sequential loops otherwise; either way all
//! reductions are bit-reproducible (see [`par`]).

pub mod analytic;
pub mod audit;
pub mod calibration;
pub mod commutators;
pub mod error;
pub mod field;
pub mod fld;
pub mod flowmap;
pub mod grid;
pub mod harness;
pub mod interp;
pub mod kernels;
pub mod manifest;
pub mod operators;
pub mod par;
pub mod path;
pub mod quadrature;
pub mod solver;
pub mod spaces;
pub mod spectral;

pub use error::{Error, Result};
pub use field::{Field, FieldKind};
pub use grid::Grid;
