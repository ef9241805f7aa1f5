//! Finite-difference laboratory for entire graphical Lagrangian mean curvature
//! flow at the potential level.
//!
//! The state of every computation is a potential `u` sampled on a truncated
//! tensor-product lattice. The Lagrangian angle `G(D²u) = Σ arctan λᵢ(D²u)`
//! drives three flows:
//!
//! * the physical flow `∂u/∂t = G(D²u)`,
//! * the rescaled expander flow `∂v/∂s = G(D²v) − v + ½ x·∇v`,
//! * the normalized shrinker flow `∂w/∂s = G(D²w) + w − ½ y·∇w`,
//!
//! whose stationary points are self-expanding and self-shrinking solitons.
//! The [`soliton`] module builds and certifies solitons on top of them, and
//! [`diagnostics`] holds the derivative and spectrum monitors that every run
//! records in its [`report::FlowReport`].

pub mod closure;
pub mod cone;
pub mod config;
pub mod diagnostics;
mod error;
pub mod field;
pub mod flow;
pub mod grid;
pub mod interp;
pub mod numfmt;
pub mod operator;
mod parallel;
pub mod report;
pub mod soliton;
pub mod stencil;
pub mod sym;

pub use closure::{BoundaryClosure, ClosureKind};
pub use cone::{ConeSpec, Sector};
pub use config::{DriftScheme, Integrator, RunConfig};
pub use error::{Error, Result};
pub use field::ScalarField;
pub use flow::{FlowKind, FlowState};
pub use grid::Grid;
pub use report::{FlowReport, ReportRow};
pub use sym::SymMatrix;
