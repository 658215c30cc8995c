//! Mid-surface geometry.
//!
//! A surface is a single global chart `ξ: ω → ℝ³`. The unit normal is
//! `n = ∂₁ξ × ∂₂ξ / |∂₁ξ × ∂₂ξ|` and the shape operator is the differential
//! of the normal, `S τ = ∇_τ n`, extended by `S n = 0`. With this convention
//! the outward-oriented sphere of radius `R` has `S = T_S / R`.
//!
//! Tensor coefficients are always taken in the dual frame: a tangential
//! symmetric tensor is `q_αβ τ^α ⊗ τ^β`.

mod chart;
mod immersion;
mod shell;
mod surface;

pub use chart::{ChartJet, Domain, SurfaceSpec};
pub(crate) use chart::reparametrize;
pub use immersion::{relative_weingarten, Immersion, ImmersionKind};
pub use shell::{
    check_thickness, grad_theta_formula, project, scaled_gradient, scaled_gradient_ambient,
    shell_identity_residuals, shell_map, shell_map_jacobian, theta_h, ShellResiduals,
};
pub use surface::{build_surface, BuildReport, Frame, SurfacePatch};

use thiserror::Error;

use crate::expr::{EvalError, ParseError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("malformed surface spec `{spec}`: {reason}")]
    Spec { spec: String, reason: String },
    #[error("chart is not an immersion at {point:?}")]
    DegenerateChart { point: [f64; 2] },
    #[error("point {point:?} lies outside the parameter domain")]
    OutOfDomain { point: [f64; 2] },
    #[error("immersion drops rank at {point:?}")]
    DegenerateImmersion { point: [f64; 2] },
    #[error("finite-difference step {step:e} is not small against h = {h:e}")]
    StepTooLarge { step: f64, h: f64 },
    #[error("I + t S has eigenvalue {eigenvalue} outside (1/2, 3/2) at t = {t}")]
    SingularFactor { t: f64, eigenvalue: f64 },
    #[error("nearest-point projection did not converge")]
    ProjectionFailed,
    #[error("Gauss curvature {gauss} is not positive at {point:?}")]
    NonPositiveCurvature { point: [f64; 2], gauss: f64 },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}
