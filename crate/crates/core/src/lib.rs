//! Homogenized bending models for multiscale shells.
//!
//! The crate computes effective bending quadratic forms of periodically
//! heterogeneous thin shells in the three regimes where the fine scale `ε²`
//! is much smaller than the thickness, evaluates the resulting limit energies,
//! and provides a numerical harness for the underlying asymptotic statements.
//!
//! Module map:
//!
//! - [`geometry`]: charts, frames, Weingarten maps, shell coordinates.
//! - [`material`]: stored energy densities, coefficient expressions,
//!   quadratic extraction.
//! - [`relaxation`]: normal relaxation and spectral differential operators.
//! - [`cellform`]: cell problems and effective bending matrices.
//! - [`energy`]: the limit bending functional.
//! - [`harness`]: three-scale pairings, recovery sequences, energy convergence.
//! - [`config`] and [`io`]: run configuration and output formats used by the
//!   `shellhom` executable.

pub mod cellform;
pub mod cg;
pub mod config;
pub mod energy;
pub mod expr;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod mandel;
pub mod material;
pub mod quadrature;
pub mod relaxation;
pub mod suites;

pub use cellform::{CellForm, Discretization, Regime};
pub use expr::{CellPoint, CoeffExpr};
pub use geometry::{build_surface, Frame, Immersion, SurfacePatch};
pub use material::{Material, QuadraticDensity};


#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/geometry.md")]
    pub struct Geometry;
    #[doc = include_str!("../../../book/src/material.md")]
    pub struct Material;
    #[doc = include_str!("../../../book/src/relaxation.md")]
    pub struct Relaxation;
    #[doc = include_str!("../../../book/src/cell-forms.md")]
    pub struct CellForms;
    #[doc = include_str!("../../../book/src/energy.md")]
    pub struct Energy;
    #[doc = include_str!("../../../book/src/harness.md")]
    pub struct Harness;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
