use crate::expr::{CellPoint, CoeffExpr};
use crate::geometry::{project, Frame, SurfacePatch};

use super::{check_sequence, ordered_sum, CellRule, EpsLaw, FastUse, HarnessError, QuadratureSpec};

/// A sequence `f^h` paired with a test function `φ(x, y, z)` on `S¹`.
#[derive(Clone, Debug)]
pub struct ThreeScaleExperiment {
    pub surface: SurfacePatch,
    /// `f^h` as an expression of `x, y = r/ε, z = r/ε², t`.
    pub sequence: CoeffExpr,
    /// The declared limit `f(x, y, z, t)`.
    pub limit: CoeffExpr,
    pub test: CoeffExpr,
    pub eps: EpsLaw,
    pub hs: Vec<f64>,
    pub quadrature: QuadratureSpec,
    /// Also evaluate the flat pullback on `ω × I` at every `h`.
    pub cross_check: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairingRow {
    pub h: f64,
    pub eps: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    /// The same pairing computed on `ω × I` with the pulled-back test function.
    pub flat: Option<f64>,
    pub points: usize,
}

fn det_factor(frame: &Frame, s: f64) -> f64 {
    let [k1, k2] = frame.principal_curvatures();
    (1.0 + s * k1) * (1.0 + s * k2)
}

fn vars(p: [f64; 2], s: f64, eps: f64) -> [f64; 7] {
    CellPoint::new(p, [p[0] / eps, p[1] / eps], [p[0] / (eps * eps), p[1] / (eps * eps)], s).vars()
}

type Integrand<'a> = dyn Fn(&[f64; 7]) -> Result<f64, HarnessError> + Sync + 'a;

fn run(
    e: &ThreeScaleExperiment,
    sequence_side: &Integrand<'_>,
    limit_side: &Integrand<'_>,
    used_sequence: FastUse,
    used_limit: FastUse,
) -> Result<Vec<PairingRow>, HarnessError> {
    check_sequence(&e.hs)?;
    let surface = &e.surface;
    let trule = e.quadrature.thickness();

    // right-hand side: surface rule × thickness × fast cell
    let cell = CellRule::new(&e.quadrature, used_limit);
    let base = surface.quadrature();
    e.quadrature.guard((base.len() * trule.len() * cell.len()) as f64)?;
    let n = base.len() * trule.len();
    let [rhs] = ordered_sum(n, |i| {
        let (pi, ti) = (i / trule.len(), i % trule.len());
        let p = base.points[pi];
        let s = trule.nodes[ti];
        let f = surface.frame(p)?;
        let dv = base.weights[pi] * trule.weights[ti] * f.area_element() * det_factor(&f, s);
        let mut acc = 0.0;
        for ((y, z), w) in cell.points.iter().zip(&cell.weights) {
            let v = CellPoint::new(p, *y, *z, s).vars();
            acc += w * limit_side(&v)?;
        }
        Ok::<_, HarnessError>([dv * acc])
    })?;

    let mut rows = Vec::with_capacity(e.hs.len());
    for &h in &e.hs {
        let eps = e.eps.eval(h);
        let rule = e.quadrature.parameter_rule(surface.domain(), used_sequence.periods(eps))?;
        let n = rule.len() * trule.len();
        // shell side: sample x ∈ S¹, recover (r(x), t(x)) by projection
        let [lhs] = ordered_sum(n, |i| {
            let (pi, ti) = (i / trule.len(), i % trule.len());
            let (p, s) = (rule.points[pi], trule.nodes[ti]);
            let f = surface.frame(p)?;
            let x = f.point + s * f.normal;
            let (r, t) = project(surface, &x, (p, 0.0))?;
            let fr = surface.frame(r)?;
            let dv = rule.weights[pi] * trule.weights[ti] * fr.area_element() * det_factor(&fr, t);
            Ok::<_, HarnessError>([dv * sequence_side(&vars(r, t, eps))?])
        })?;
        let flat = if e.cross_check {
            let [v] = ordered_sum(n, |i| {
                let (pi, ti) = (i / trule.len(), i % trule.len());
                let (p, s) = (rule.points[pi], trule.nodes[ti]);
                let j = surface.frame(p)?.offset_jacobian(s);
                let jac = (j.transpose() * j).determinant().sqrt();
                Ok::<_, HarnessError>([rule.weights[pi] * trule.weights[ti] * jac * sequence_side(&vars(p, s, eps))?])
            })?;
            Some(v)
        } else {
            None
        };
        rows.push(PairingRow { h, eps, lhs, rhs, gap: (lhs - rhs).abs(), flat, points: n });
    }
    Ok(rows)
}

/// `∫_{S¹} f^h φ(x, r/ε, r/ε²) dx` against `∫∫∫ f φ` along the h-sequence.
pub fn three_scale_pairing(e: &ThreeScaleExperiment) -> Result<Vec<PairingRow>, HarnessError> {
    let seq = |v: &[f64; 7]| Ok(e.sequence.eval(v)? * e.test.eval(v)?);
    let lim = |v: &[f64; 7]| Ok(e.limit.eval(v)? * e.test.eval(v)?);
    run(
        e,
        &seq,
        &lim,
        FastUse::of(&[&e.sequence, &e.test]),
        FastUse::of(&[&e.limit, &e.test]),
    )
}

/// `‖f^h‖²` on `S¹` against `‖f‖²` on `S¹ × 𝒴 × 𝒴`.
pub fn strong_norm_check(e: &ThreeScaleExperiment) -> Result<Vec<PairingRow>, HarnessError> {
    let seq = |v: &[f64; 7]| Ok(e.sequence.eval(v)?.powi(2));
    let lim = |v: &[f64; 7]| Ok(e.limit.eval(v)?.powi(2));
    run(e, &seq, &lim, FastUse::of(&[&e.sequence]), FastUse::of(&[&e.limit]))
}

/// Pairing with `φ(x, r/ε) ρ(r/ε²)`, where `e.test` is `φ` and `ρ` has zero
/// mean over the cell.
pub fn osc_z_pairing(e: &ThreeScaleExperiment, rho: &CoeffExpr) -> Result<Vec<PairingRow>, HarnessError> {
    let cell = CellRule::new(&e.quadrature, FastUse::of(&[rho]));
    let mut mean = 0.0;
    for ((_, z), w) in cell.points.iter().zip(&cell.weights) {
        mean += w * rho.eval(&CellPoint::new([0.0; 2], [0.0; 2], *z, 0.0).vars())?;
    }
    if mean.abs() > 1e-8 {
        return Err(HarnessError::NonZeroMeanRho { mean });
    }
    let seq = |v: &[f64; 7]| Ok(e.sequence.eval(v)? * e.test.eval(v)? * rho.eval(v)?);
    let lim = |v: &[f64; 7]| Ok(e.limit.eval(v)? * e.test.eval(v)? * rho.eval(v)?);
    run(
        e,
        &seq,
        &lim,
        FastUse::of(&[&e.sequence, &e.test, rho]),
        FastUse::of(&[&e.limit, &e.test, rho]),
    )
}
