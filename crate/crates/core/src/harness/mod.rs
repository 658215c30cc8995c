//! Numerical realizations of the asymptotic statements: three-scale
//! pairings, recovery sequences and the convergence of the rescaled energy.
//!
//! Points of the unit-thickness shell `S¹` are written `ξ(p) + s n(p)` with
//! `p` in the parameter domain and `s ∈ (-1/2, 1/2)`. The fast variables are
//! `y = p/ε` and `z = p/ε²`, so expressions see `x1, x2` (parameters),
//! `y1, y2`, `z1, z2` and `t` (the coordinate `s`).

mod pairing;
mod recovery;

pub use pairing::{osc_z_pairing, strong_norm_check, three_scale_pairing, PairingRow, ThreeScaleExperiment};
pub use recovery::{
    build_recovery, limit_integral, limsup_check, strain_expansion_check, LimsupRow, Profiles, Recovery,
    RecoveryConfig, RecoveryPoint, StrainRow,
};

use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::cellform::Regime;
use crate::energy::EnergyError;
use crate::expr::{CellPoint, CoeffExpr, EvalError, ParseError, Y1, Y2, Z1, Z2};
use crate::geometry::{Domain, GeometryError};
use crate::material::MaterialError;
use crate::quadrature::{gauss_legendre, Rule1d, Rule2d};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("quadrature has {points} points per fastest period, at least {required} are required")]
    UnderResolved { points: usize, required: usize },
    #[error("run needs {evaluations} integrand evaluations, above the limit of {limit}")]
    CostGuard { evaluations: f64, limit: f64 },
    #[error("test factor rho has mean {mean:e} over the z-cell")]
    NonZeroMeanRho { mean: f64 },
    #[error("profile `{0}` is incomplete")]
    MissingProfile(String),
    #[error("profile `{profile}` does not belong to the regime gamma1 = {regime}: {reason}")]
    WrongRegimeProfile { profile: String, regime: String, reason: String },
    #[error("profile `{profile}` has mean {mean:e}, it must have zero mean")]
    NonZeroMeanProfile { profile: String, mean: f64 },
    #[error("epsilon law {law} is inconsistent with gamma1 = {regime}: {reason}")]
    InconsistentEpsLaw { law: String, regime: String, reason: String },
    #[error("empty h-sequence or non-positive h")]
    BadSequence,
    #[error("`{field}` is not 1-periodic in the fast variables (defect {defect:.3e})")]
    NotPeriodic { field: String, defect: f64 },
}

/// `ε(h)` for the harness experiments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EpsLaw {
    /// `ε = h/γ₁`.
    Linear { gamma1: f64 },
    /// `ε = h^a`.
    Power { exponent: f64 },
    /// `ε = h / ln(1/h)`.
    LogCorrected,
}

impl EpsLaw {
    /// Parses `linear:<γ₁>`, `power:<a>` or `log`.
    pub fn parse(s: &str) -> Option<EpsLaw> {
        let s = s.trim();
        if s == "log" {
            return Some(EpsLaw::LogCorrected);
        }
        let (kind, val) = s.split_once(':')?;
        let v: f64 = val.trim().parse().ok()?;
        match kind.trim() {
            "linear" => Some(EpsLaw::Linear { gamma1: v }),
            "power" => Some(EpsLaw::Power { exponent: v }),
            _ => None,
        }
    }

    pub fn eval(&self, h: f64) -> f64 {
        match *self {
            EpsLaw::Linear { gamma1 } => h / gamma1,
            EpsLaw::Power { exponent } => h.powf(exponent),
            EpsLaw::LogCorrected => h / (1.0 / h).ln(),
        }
    }

    /// `(lim h/ε, lim h/ε²)` as `h → 0`.
    pub fn limits(&self) -> (f64, f64) {
        match *self {
            EpsLaw::Linear { gamma1 } => (gamma1, f64::INFINITY),
            EpsLaw::Power { exponent: a } => {
                let g1 = if a < 1.0 {
                    0.0
                } else if a > 1.0 {
                    f64::INFINITY
                } else {
                    1.0
                };
                let g2 = if a > 0.5 {
                    f64::INFINITY
                } else if a < 0.5 {
                    0.0
                } else {
                    1.0
                };
                (g1, g2)
            }
            EpsLaw::LogCorrected => (f64::INFINITY, f64::INFINITY),
        }
    }

    /// Checks that the law produces the regime's `(γ₁, ∞)` limits and that
    /// the sequence shows the expected trends.
    pub fn validate(&self, regime: Regime, hs: &[f64]) -> Result<(), HarnessError> {
        let fail = |reason: &str| HarnessError::InconsistentEpsLaw {
            law: self.to_string(),
            regime: regime.to_string(),
            reason: reason.to_string(),
        };
        let (g1, g2) = self.limits();
        if g2 != f64::INFINITY {
            return Err(fail("h/eps^2 does not diverge"));
        }
        let ok = match regime {
            Regime::Zero => g1 == 0.0,
            Regime::Infinite => g1 == f64::INFINITY,
            Regime::Finite(g) => (g1 - g).abs() <= 1e-12 * g,
        };
        if !ok {
            return Err(fail("h/eps does not tend to gamma1"));
        }
        let mut sorted: Vec<f64> = hs.to_vec();
        sorted.sort_by(|a, b| b.total_cmp(a));
        for &h in &sorted {
            let e = self.eval(h);
            if !(e > 0.0 && e < 1.0) {
                return Err(fail(&format!("eps({h}) = {e} is outside (0, 1)")));
            }
        }
        for w in sorted.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (ea, eb) = (self.eval(a), self.eval(b));
            if b / (eb * eb) <= a / (ea * ea) {
                return Err(fail("h/eps^2 is not increasing along the sequence"));
            }
            let (ra, rb) = (a / ea, b / eb);
            let trend = match regime {
                Regime::Zero => rb < ra,
                Regime::Infinite => rb > ra,
                Regime::Finite(_) => (rb - ra).abs() <= 1e-12 * ra,
            };
            if !trend {
                return Err(fail("h/eps has the wrong trend along the sequence"));
            }
        }
        Ok(())
    }
}

impl fmt::Display for EpsLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EpsLaw::Linear { gamma1 } => write!(f, "linear:{gamma1}"),
            EpsLaw::Power { exponent } => write!(f, "power:{exponent}"),
            EpsLaw::LogCorrected => write!(f, "log"),
        }
    }
}

/// `count` terms `start, start·ratio, …`.
pub fn h_sequence(start: f64, ratio: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| start * ratio.powi(k as i32)).collect()
}

/// Rejects fields that are not 1-periodic in `y` and `z`, sampled on a
/// fixed lattice.
pub(crate) fn check_periodic(fields: &[(&str, &CoeffExpr)]) -> Result<(), HarnessError> {
    const TOL: f64 = crate::material::PERIODICITY_TOL;
    let samples = [0.0, 0.137, 0.5, 0.731];
    for &(name, f) in fields {
        for a in samples {
            for b in samples {
                let base = CellPoint::new([0.3, 0.6], [a, b], [b, a], 0.2 * a - 0.1);
                let v = f.eval(&base.vars())?;
                for k in 0..4 {
                    let mut q = base;
                    match k {
                        0 => q.y[0] += 1.0,
                        1 => q.y[1] += 1.0,
                        2 => q.z[0] += 1.0,
                        _ => q.z[1] += 1.0,
                    }
                    let defect = (f.eval(&q.vars())? - v).abs();
                    if defect > TOL * (1.0 + v.abs()) {
                        return Err(HarnessError::NotPeriodic { field: name.into(), defect });
                    }
                }
            }
        }
    }
    Ok(())
}

pub(crate) fn check_sequence(hs: &[f64]) -> Result<(), HarnessError> {
    if hs.is_empty() || hs.iter().any(|h| !(*h > 0.0 && *h < 1.0)) {
        return Err(HarnessError::BadSequence);
    }
    Ok(())
}

/// Quadrature parameters of an experiment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureSpec {
    /// Points per period of the fastest oscillation along each axis.
    pub points_per_period: usize,
    /// Gauss points per axis when nothing oscillates along it.
    pub base_nodes: usize,
    pub thickness_nodes: usize,
    /// Panels of the composite rule on each used cell variable.
    pub cell_panels: usize,
    pub max_evaluations: f64,
}

/// Fewest points per fastest period accepted.
pub const MIN_POINTS_PER_PERIOD: usize = 8;
/// Energies are quadratic in oscillating fields, so the default doubles the
/// minimum.
pub const DEFAULT_POINTS_PER_PERIOD: usize = 16;

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            points_per_period: DEFAULT_POINTS_PER_PERIOD,
            base_nodes: 12,
            thickness_nodes: 8,
            cell_panels: 16,
            max_evaluations: 1e8,
        }
    }
}

/// Which fast variables an integrand depends on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FastUse {
    pub y: [bool; 2],
    pub z: [bool; 2],
}

impl FastUse {
    pub fn of(exprs: &[&CoeffExpr]) -> FastUse {
        let any = |v: usize| exprs.iter().any(|e| e.uses(v));
        FastUse { y: [any(Y1), any(Y2)], z: [any(Z1), any(Z2)] }
    }

    pub fn union(self, o: FastUse) -> FastUse {
        FastUse { y: [self.y[0] || o.y[0], self.y[1] || o.y[1]], z: [self.z[0] || o.z[0], self.z[1] || o.z[1]] }
    }

    /// Fastest period along each parameter axis.
    pub fn periods(&self, eps: f64) -> [Option<f64>; 2] {
        [0, 1].map(|a| {
            if self.z[a] {
                Some(eps * eps)
            } else if self.y[a] {
                Some(eps)
            } else {
                None
            }
        })
    }
}

impl QuadratureSpec {
    fn check(&self) -> Result<(), HarnessError> {
        if self.points_per_period < MIN_POINTS_PER_PERIOD {
            return Err(HarnessError::UnderResolved { points: self.points_per_period, required: MIN_POINTS_PER_PERIOD });
        }
        Ok(())
    }

    fn per_panel(&self) -> usize {
        self.points_per_period.div_ceil(2)
    }

    /// Parameter rule with two Gauss panels per period on oscillating axes.
    pub fn parameter_rule(&self, domain: Domain, periods: [Option<f64>; 2]) -> Result<Rule2d, HarnessError> {
        self.check()?;
        let k = self.per_panel();
        let count = |len: f64, p: f64| (2.0 * len / p - 1e-9).ceil();
        let estimate = match domain {
            Domain::Rect { u, v } => {
                let n = |len: f64, p: Option<f64>| p.map_or(self.base_nodes as f64, |p| count(len, p) * k as f64);
                n(u[1] - u[0], periods[0]) * n(v[1] - v[0], periods[1])
            }
            Domain::Disk { radius } => match periods.iter().flatten().copied().reduce(f64::min) {
                None => (2 * self.base_nodes * self.base_nodes) as f64,
                Some(p) => count(radius, p) * count(2.0 * std::f64::consts::PI * radius, p) * (k * k) as f64,
            },
        };
        self.guard(estimate * self.thickness_nodes as f64)?;
        Ok(match domain {
            Domain::Rect { u, v } => {
                let axis = |a: [f64; 2], p: Option<f64>| match p {
                    None => gauss_legendre(self.base_nodes).mapped(a[0], a[1]),
                    Some(p) => composite(a[0], a[1], count(a[1] - a[0], p) as usize, k),
                };
                Rule2d::tensor(&axis(u, periods[0]), &axis(v, periods[1]))
            }
            Domain::Disk { radius } => match periods.iter().flatten().copied().reduce(f64::min) {
                None => Rule2d::disk(self.base_nodes, 2 * self.base_nodes, radius),
                Some(p) => {
                    let rr = composite(0.0, radius, count(radius, p) as usize, k);
                    let th = composite(0.0, 2.0 * std::f64::consts::PI, count(2.0 * std::f64::consts::PI * radius, p) as usize, k);
                    let mut points = Vec::with_capacity(rr.len() * th.len());
                    let mut weights = Vec::with_capacity(rr.len() * th.len());
                    for (r, wr) in rr.nodes.iter().zip(&rr.weights) {
                        for (a, wa) in th.nodes.iter().zip(&th.weights) {
                            points.push([r * a.cos(), r * a.sin()]);
                            weights.push(wr * wa * r);
                        }
                    }
                    Rule2d { points, weights }
                }
            },
        })
    }

    pub fn thickness(&self) -> Rule1d {
        gauss_legendre(self.thickness_nodes).mapped(-0.5, 0.5)
    }

    /// Rule on the unit cell interval, or the single point `0` when the
    /// variable is unused.
    pub fn cell_axis(&self, used: bool) -> Rule1d {
        if used {
            composite(0.0, 1.0, self.cell_panels, 4)
        } else {
            Rule1d { nodes: vec![0.0], weights: vec![1.0] }
        }
    }

    pub(crate) fn guard(&self, evaluations: f64) -> Result<(), HarnessError> {
        if evaluations > self.max_evaluations {
            return Err(HarnessError::CostGuard { evaluations, limit: self.max_evaluations });
        }
        Ok(())
    }
}

/// Composite Gauss–Legendre rule with `panels` equal panels of `k` points.
pub fn composite(a: f64, b: f64, panels: usize, k: usize) -> Rule1d {
    let base = gauss_legendre(k);
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * k);
    let mut weights = Vec::with_capacity(panels * k);
    for i in 0..panels {
        let r = base.mapped(a + i as f64 * h, a + (i + 1) as f64 * h);
        nodes.extend(r.nodes);
        weights.extend(r.weights);
    }
    Rule1d { nodes, weights }
}

/// Points of a fast cell: the tensor product of the per-variable rules.
pub(crate) struct CellRule {
    pub points: Vec<([f64; 2], [f64; 2])>,
    pub weights: Vec<f64>,
}

impl CellRule {
    pub fn new(spec: &QuadratureSpec, used: FastUse) -> CellRule {
        let axes = [
            spec.cell_axis(used.y[0]),
            spec.cell_axis(used.y[1]),
            spec.cell_axis(used.z[0]),
            spec.cell_axis(used.z[1]),
        ];
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (a, wa) in axes[0].nodes.iter().zip(&axes[0].weights) {
            for (b, wb) in axes[1].nodes.iter().zip(&axes[1].weights) {
                for (c, wc) in axes[2].nodes.iter().zip(&axes[2].weights) {
                    for (d, wd) in axes[3].nodes.iter().zip(&axes[3].weights) {
                        points.push(([*a, *b], [*c, *d]));
                        weights.push(wa * wb * wc * wd);
                    }
                }
            }
        }
        CellRule { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }
}

/// Sums `f(i)` over `0..n` in fixed chunks, in parallel, with a fixed
/// reduction order so the result does not depend on the thread count.
pub(crate) fn ordered_sum<const K: usize, E: Send>(
    n: usize,
    f: impl Fn(usize) -> Result<[f64; K], E> + Sync,
) -> Result<[f64; K], E> {
    const CHUNK: usize = 256;
    let parts: Vec<Result<[f64; K], E>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = [0.0; K];
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let v = f(i)?;
                for k in 0..K {
                    acc[k] += v[k];
                }
            }
            Ok(acc)
        })
        .collect();
    let mut total = [0.0; K];
    for p in parts {
        let p = p?;
        for k in 0..K {
            total[k] += p[k];
        }
    }
    Ok(total)
}
