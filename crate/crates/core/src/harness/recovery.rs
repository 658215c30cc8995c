//! Recovery sequences `y^h` on `S¹` built from an isometric immersion `u`,
//! a displacement `w` and relaxation profiles, with their analytic scaled
//! gradients.
//!
//! With `t = hs` and `v^h = u + tν + h(w + tμ)`, the sequences are
//!
//! - `γ₁ ∈ (0, ∞)`: `v^h + hε ζ_α σ^α + hε ρ ν + hε² (η_α σ^α + η₃ ν)`,
//! - `γ₁ = ∞`: the same plus `2h² (∫₀^s c_α) σ^α + h² (∫₀^s c₃) ν`,
//! - `γ₁ = 0`: `v^h + hε ζ_α σ^α + ε² φ ν − tε ∂_{y_α}φ σ^α
//!   + hε² (η_α σ^α + η₃ ν) + 2h² (∫₀^s μ_α) σ^α + h² (∫₀^s μ₃) ν`,
//!
//! where `σ^α = ∇_{τ^α} u`, `ν` is the normal of `u`, and the displacement
//! correction is `μ = −(ν · ∂_β w) σ^β`, which removes the first-order
//! shear of `v^h`.

use nalgebra::{Matrix2, Matrix3, Vector3};

use crate::cellform::Regime;
use crate::energy::Displacement;
use crate::expr::{CellPoint, CoeffExpr, T, X1, X2, Y1, Y2, Z1, Z2};
use crate::geometry::{check_thickness, relative_weingarten, scaled_gradient, Frame, Immersion, SurfacePatch};
use crate::mandel::{quad, to_mandel6};
use crate::material::{Material, StoredEnergy};
use crate::quadrature::{gauss_legendre, Rule1d};
use crate::relaxation::coefficient_stiffness;

use super::{check_periodic, check_sequence, ordered_sum, CellRule, EpsLaw, FastUse, HarnessError, QuadratureSpec};

/// Relaxation profiles as expressions of `x1, x2, y1, y2, z1, z2, t`.
/// Absent profiles are zero.
#[derive(Clone, Debug, Default)]
pub struct Profiles {
    pub zeta: Option<[CoeffExpr; 2]>,
    pub rho: Option<CoeffExpr>,
    pub phi: Option<CoeffExpr>,
    pub eta: Option<[CoeffExpr; 3]>,
    pub mu: Option<[CoeffExpr; 3]>,
    pub c: Option<[CoeffExpr; 3]>,
}

fn parse_n<const N: usize>(name: &str, parts: &[String]) -> Result<[CoeffExpr; N], HarnessError> {
    if parts.len() != N {
        return Err(HarnessError::MissingProfile(format!("{name} needs {N} components, got {}", parts.len())));
    }
    let v: Vec<CoeffExpr> = parts.iter().map(|s| CoeffExpr::parse(s)).collect::<Result<_, _>>()?;
    Ok(v.try_into().expect("length checked"))
}

impl Profiles {
    /// Builds profiles from named component lists (`zeta`: 2, `rho`: 1,
    /// `phi`: 1, `eta`: 3, `mu`: 3, `c`: 3).
    pub fn from_components<'a>(
        entries: impl IntoIterator<Item = (&'a str, &'a [String])>,
    ) -> Result<Profiles, HarnessError> {
        let mut p = Profiles::default();
        for (name, parts) in entries {
            match name {
                "zeta" => p.zeta = Some(parse_n::<2>(name, parts)?),
                "rho" => p.rho = Some(parse_n::<1>(name, parts)?[0].clone()),
                "phi" => p.phi = Some(parse_n::<1>(name, parts)?[0].clone()),
                "eta" => p.eta = Some(parse_n::<3>(name, parts)?),
                "mu" => p.mu = Some(parse_n::<3>(name, parts)?),
                "c" => p.c = Some(parse_n::<3>(name, parts)?),
                other => return Err(HarnessError::MissingProfile(format!("unknown profile `{other}`"))),
            }
        }
        Ok(p)
    }

    fn all(&self) -> Vec<(&'static str, &CoeffExpr)> {
        let lists: [(&'static str, Option<&[CoeffExpr]>); 6] = [
            ("zeta", self.zeta.as_ref().map(|a| a.as_slice())),
            ("rho", self.rho.as_ref().map(std::slice::from_ref)),
            ("phi", self.phi.as_ref().map(std::slice::from_ref)),
            ("eta", self.eta.as_ref().map(|a| a.as_slice())),
            ("mu", self.mu.as_ref().map(|a| a.as_slice())),
            ("c", self.c.as_ref().map(|a| a.as_slice())),
        ];
        lists
            .into_iter()
            .flat_map(|(name, list)| list.into_iter().flatten().map(move |e| (name, e)))
            .collect()
    }

    pub fn fast_use(&self) -> FastUse {
        let all: Vec<&CoeffExpr> = self.all().into_iter().map(|(_, e)| e).collect();
        FastUse::of(&all)
    }

    /// Names of the profiles that are present.
    pub fn present(&self) -> Vec<&'static str> {
        let mut names: Vec<&'static str> = self.all().into_iter().map(|(n, _)| n).collect();
        names.dedup();
        names
    }
}

/// A recovery-sequence experiment.
#[derive(Clone, Debug)]
pub struct RecoveryConfig {
    pub surface: SurfacePatch,
    pub immersion: Immersion,
    pub displacement: Displacement,
    pub regime: Regime,
    pub eps: EpsLaw,
    pub profiles: Profiles,
    pub hs: Vec<f64>,
    pub quadrature: QuadratureSpec,
}

const MEAN_TOL: f64 = 1e-8;

impl RecoveryConfig {
    /// Checks the ε-law, the thicknesses, and that the profiles belong to
    /// the regime's relaxation space.
    pub fn validate(&self) -> Result<(), HarnessError> {
        check_sequence(&self.hs)?;
        self.eps.validate(self.regime, &self.hs)?;
        for &h in &self.hs {
            check_thickness(&self.surface, h)?;
        }
        let wrong = |profile: &str, reason: &str| HarnessError::WrongRegimeProfile {
            profile: profile.into(),
            regime: self.regime.to_string(),
            reason: reason.into(),
        };
        let allowed: &[&str] = match self.regime {
            Regime::Finite(_) => &["zeta", "rho", "eta"],
            Regime::Infinite => &["zeta", "rho", "eta", "c"],
            Regime::Zero => &["zeta", "phi", "eta", "mu"],
        };
        for name in self.profiles.present() {
            if !allowed.contains(&name) {
                return Err(wrong(name, "not a relaxation field of this regime"));
            }
        }
        for (name, e) in self.profiles.all() {
            let z = e.uses(Z1) || e.uses(Z2);
            let y = e.uses(Y1) || e.uses(Y2);
            match name {
                "zeta" | "rho" | "phi" if z => return Err(wrong(name, "must not depend on z")),
                "zeta" | "phi" if self.regime == Regime::Zero && e.uses(T) => {
                    return Err(wrong(name, "must not depend on t"))
                }
                "mu" if z => return Err(wrong(name, "must not depend on z")),
                "c" if y || z => return Err(wrong(name, "must not depend on y or z")),
                _ => {}
            }
        }
        check_periodic(&self.profiles.all())?;
        self.check_means()
    }

    fn check_means(&self) -> Result<(), HarnessError> {
        let q = &self.quadrature;
        let trule = q.thickness();
        let fail = |profile: &str, mean: f64| HarnessError::NonZeroMeanProfile { profile: profile.into(), mean };
        let p = &self.profiles;
        let joint_t = matches!(self.regime, Regime::Finite(_));
        let base = self.surface.quadrature();
        let xs: Vec<[f64; 2]> = [0, base.len() / 2, base.len() - 1].iter().map(|&i| base.points[i]).collect();
        let slow_y = [[0.0, 0.0], [0.137, 0.731], [0.5, 0.25], [0.9, 0.6]];
        for x in &xs {
            let mut y_checked: Vec<(&str, &CoeffExpr)> = Vec::new();
            for e in p.zeta.iter().flatten() {
                y_checked.push(("zeta", e));
            }
            y_checked.extend(p.rho.iter().map(|e| ("rho", e)));
            y_checked.extend(p.phi.iter().map(|e| ("phi", e)));
            for (name, e) in y_checked {
                let used = FastUse::of(&[e]);
                let ycell = CellRule::new(q, FastUse { y: used.y, z: [false; 2] });
                let joint = joint_t && name == "zeta";
                let (mut total, mut scale) = (0.0, 1.0f64);
                for (s, ws) in trule.nodes.iter().zip(&trule.weights) {
                    let (mut m, mut sc) = (0.0, 1.0f64);
                    for ((y, _), w) in ycell.points.iter().zip(&ycell.weights) {
                        let v = e.eval(&CellPoint::new(*x, *y, [0.0; 2], *s).vars())?;
                        m += w * v;
                        sc = sc.max(v.abs());
                    }
                    scale = scale.max(sc);
                    if joint {
                        total += ws * m;
                    } else if m.abs() > MEAN_TOL * sc {
                        return Err(fail(name, m));
                    }
                }
                if joint && total.abs() > MEAN_TOL * scale {
                    return Err(fail(name, total));
                }
            }
            for e in p.eta.iter().flatten() {
                let used = FastUse::of(&[e]);
                let zcell = CellRule::new(q, FastUse { y: [false; 2], z: used.z });
                for s in &trule.nodes {
                    for y in &slow_y {
                        let (mut m, mut sc) = (0.0, 1.0f64);
                        for ((_, z), w) in zcell.points.iter().zip(&zcell.weights) {
                            let v = e.eval(&CellPoint::new(*x, *y, *z, *s).vars())?;
                            m += w * v;
                            sc = sc.max(v.abs());
                        }
                        if m.abs() > MEAN_TOL * sc {
                            return Err(fail("eta", m));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// A scalar with its total derivatives along `p₁, p₂, s`.
#[derive(Clone, Copy, Debug, Default)]
struct Scalar {
    v: f64,
    dp: [f64; 2],
    ds: f64,
}

impl Scalar {
    fn constant(c: f64) -> Scalar {
        Scalar { v: c, ..Default::default() }
    }

    /// `c s`.
    fn linear(c: f64, s: f64) -> Scalar {
        Scalar { v: c * s, dp: [0.0; 2], ds: c }
    }

    fn scale(self, k: f64) -> Scalar {
        Scalar { v: k * self.v, dp: [k * self.dp[0], k * self.dp[1]], ds: k * self.ds }
    }

    fn times_s(self, s: f64) -> Scalar {
        Scalar { v: s * self.v, dp: [s * self.dp[0], s * self.dp[1]], ds: self.v + s * self.ds }
    }
}

/// A vector field on the mid-surface with its parameter derivatives.
#[derive(Clone, Copy, Debug)]
struct Field {
    v: Vector3<f64>,
    d: [Vector3<f64>; 2],
}

#[derive(Default)]
struct Acc {
    v: Vector3<f64>,
    d: [Vector3<f64>; 3],
}

impl Acc {
    fn add(&mut self, a: Scalar, e: &Field) {
        self.v += a.v * e.v;
        for b in 0..2 {
            self.d[b] += a.dp[b] * e.v + a.v * e.d[b];
        }
        self.d[2] += a.ds * e.v;
    }
}

/// A profile expression with its partial derivatives.
#[derive(Clone, Debug)]
struct Prof {
    f: CoeffExpr,
    d: Vec<CoeffExpr>,
}

impl Prof {
    fn new(f: &CoeffExpr) -> Prof {
        Prof { f: f.clone(), d: (0..7).map(|k| f.derivative(k)).collect() }
    }

    fn partial(&self, var: usize, v: &[f64; 7]) -> Result<f64, HarnessError> {
        Ok(self.d[var].eval(v)?)
    }

    /// Value and total derivatives of `f(p, p/ε, p/ε², s)`.
    fn total(&self, v: &[f64; 7], eps: f64) -> Result<Scalar, HarnessError> {
        let (e1, e2) = (1.0 / eps, 1.0 / (eps * eps));
        let dp = [
            self.d[X1].eval(v)? + e1 * self.d[Y1].eval(v)? + e2 * self.d[Z1].eval(v)?,
            self.d[X2].eval(v)? + e1 * self.d[Y2].eval(v)? + e2 * self.d[Z2].eval(v)?,
        ];
        Ok(Scalar { v: self.f.eval(v)?, dp, ds: self.d[T].eval(v)? })
    }
}

fn fast_vars(p: [f64; 2], s: f64, eps: f64) -> [f64; 7] {
    CellPoint::new(p, [p[0] / eps, p[1] / eps], [p[0] / (eps * eps), p[1] / (eps * eps)], s).vars()
}

/// Geometric fields of the recovery at one parameter point.
struct Geo {
    frame: Frame,
    u: Field,
    nu: Field,
    sigma: [Field; 2],
    w: Field,
    mu: Field,
    /// `R = ∇u T_S + ν ⊗ n`.
    rot: Matrix3<f64>,
    /// `B + s S^r` is assembled from these dual-frame coefficients.
    b: Matrix2<f64>,
    sr: Matrix2<f64>,
}

fn geo(cfg: &RecoveryConfig, p: [f64; 2]) -> Result<Geo, HarnessError> {
    let surface = &cfg.surface;
    let frame = surface.frame(p)?;
    let xi = surface.jet(p)?;
    let ju = cfg.immersion.jet(surface, p)?;
    let jw = cfg.displacement.jet(p)?;
    let gi = frame.metric_inverse();
    let dg = surface.metric_derivatives(&xi);
    let dgi = [0, 1].map(|b| -gi * dg[b] * gi);
    let sigma = [0, 1].map(|a| Field {
        v: gi[(a, 0)] * ju.d[0] + gi[(a, 1)] * ju.d[1],
        d: [0, 1].map(|b| {
            dgi[b][(a, 0)] * ju.d[0] + dgi[b][(a, 1)] * ju.d[1] + gi[(a, 0)] * ju.dd[0][b] + gi[(a, 1)] * ju.dd[1][b]
        }),
    });
    let c = ju.d[0].cross(&ju.d[1]);
    let len = c.norm();
    let n = c / len;
    let proj = Matrix3::identity() - n * n.transpose();
    let nu = Field {
        v: n,
        d: [0, 1].map(|b| proj * (ju.dd[0][b].cross(&ju.d[1]) + ju.d[0].cross(&ju.dd[1][b])) / len),
    };
    let mut mu = Field { v: Vector3::zeros(), d: [Vector3::zeros(); 2] };
    for be in 0..2 {
        let k = n.dot(&jw.d[be]);
        mu.v -= k * sigma[be].v;
        for g in 0..2 {
            let dk = nu.d[g].dot(&jw.d[be]) + n.dot(&jw.dd[be][g]);
            mu.d[g] -= dk * sigma[be].v + k * sigma[be].d[g];
        }
    }
    let rot = ju.d[0] * frame.dual[0].transpose() + ju.d[1] * frame.dual[1].transpose() + n * frame.normal.transpose();
    let mut b = Matrix2::zeros();
    for i in 0..2 {
        for j in 0..2 {
            b[(i, j)] = 0.5 * (ju.d[i].dot(&jw.d[j]) + ju.d[j].dot(&jw.d[i]));
        }
    }
    let sr = relative_weingarten(surface, &cfg.immersion, p)?;
    Ok(Geo {
        frame,
        u: Field { v: ju.value, d: ju.d },
        nu,
        sigma,
        w: Field { v: jw.value, d: jw.d },
        mu,
        rot,
        b,
        sr,
    })
}

/// `y^h` for one thickness `h`.
pub struct Recovery<'a> {
    cfg: &'a RecoveryConfig,
    h: f64,
    eps: f64,
    zeta: Option<[Prof; 2]>,
    rho: Option<Prof>,
    phi: Option<Prof>,
    dphi: Option<[Prof; 2]>,
    eta: Option<[Prof; 3]>,
    /// `c` for `γ₁ = ∞`, `μ` for `γ₁ = 0`.
    anti: Option<[Prof; 3]>,
    anti_rule: Rule1d,
}

/// `y^h` and its derivatives `[∂₁, ∂₂, ∂_s]` at a point `(p, s)` of `S¹`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecoveryPoint {
    pub value: Vector3<f64>,
    pub d: [Vector3<f64>; 3],
}

/// Builds `y^h` after validating the configuration.
pub fn build_recovery(cfg: &RecoveryConfig, h: f64) -> Result<Recovery<'_>, HarnessError> {
    let single = RecoveryConfig { hs: vec![h], ..cfg.clone() };
    single.validate()?;
    Ok(Recovery::unchecked(cfg, h))
}

impl<'a> Recovery<'a> {
    fn unchecked(cfg: &'a RecoveryConfig, h: f64) -> Recovery<'a> {
        let p = &cfg.profiles;
        let anti = match cfg.regime {
            Regime::Infinite => p.c.as_ref(),
            Regime::Zero => p.mu.as_ref(),
            Regime::Finite(_) => None,
        };
        Recovery {
            cfg,
            h,
            eps: cfg.eps.eval(h),
            zeta: p.zeta.as_ref().map(|z| [Prof::new(&z[0]), Prof::new(&z[1])]),
            rho: p.rho.as_ref().map(Prof::new),
            phi: p.phi.as_ref().map(Prof::new),
            dphi: p.phi.as_ref().map(|f| [Prof::new(&f.derivative(Y1)), Prof::new(&f.derivative(Y2))]),
            eta: p.eta.as_ref().map(|e| [Prof::new(&e[0]), Prof::new(&e[1]), Prof::new(&e[2])]),
            anti: anti.map(|e| [Prof::new(&e[0]), Prof::new(&e[1]), Prof::new(&e[2])]),
            anti_rule: gauss_legendre(8),
        }
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// `∫₀^s f(p, s', p/ε, p/ε²) ds'` with its total derivatives.
    fn antiderivative(&self, f: &Prof, p: [f64; 2], s: f64) -> Result<Scalar, HarnessError> {
        let mut out = Scalar::default();
        for (x, w) in self.anti_rule.nodes.iter().zip(&self.anti_rule.weights) {
            let sk = 0.5 * s * (x + 1.0);
            let g = f.total(&fast_vars(p, sk, self.eps), self.eps)?;
            let wk = 0.5 * s * w;
            out.v += wk * g.v;
            out.dp[0] += wk * g.dp[0];
            out.dp[1] += wk * g.dp[1];
        }
        out.ds = f.f.eval(&fast_vars(p, s, self.eps))?;
        Ok(out)
    }

    fn eval_with(&self, g: &Geo, p: [f64; 2], s: f64) -> Result<RecoveryPoint, HarnessError> {
        let (h, e) = (self.h, self.eps);
        let v = fast_vars(p, s, e);
        let mut acc = Acc::default();
        acc.add(Scalar::constant(1.0), &g.u);
        acc.add(Scalar::linear(h, s), &g.nu);
        acc.add(Scalar::constant(h), &g.w);
        acc.add(Scalar::linear(h * h, s), &g.mu);
        if let Some(z) = &self.zeta {
            for a in 0..2 {
                acc.add(z[a].total(&v, e)?.scale(h * e), &g.sigma[a]);
            }
        }
        if let Some(r) = &self.rho {
            acc.add(r.total(&v, e)?.scale(h * e), &g.nu);
        }
        if let (Some(phi), Some(dphi)) = (&self.phi, &self.dphi) {
            acc.add(phi.total(&v, e)?.scale(e * e), &g.nu);
            for a in 0..2 {
                acc.add(dphi[a].total(&v, e)?.times_s(s).scale(-h * e), &g.sigma[a]);
            }
        }
        if let Some(eta) = &self.eta {
            for a in 0..2 {
                acc.add(eta[a].total(&v, e)?.scale(h * e * e), &g.sigma[a]);
            }
            acc.add(eta[2].total(&v, e)?.scale(h * e * e), &g.nu);
        }
        if let Some(anti) = &self.anti {
            for a in 0..2 {
                acc.add(self.antiderivative(&anti[a], p, s)?.scale(2.0 * h * h), &g.sigma[a]);
            }
            acc.add(self.antiderivative(&anti[2], p, s)?.scale(h * h), &g.nu);
        }
        Ok(RecoveryPoint { value: acc.v, d: acc.d })
    }

    /// `y^h(ξ(p) + s n(p))` with its parameter derivatives.
    pub fn eval(&self, p: [f64; 2], s: f64) -> Result<RecoveryPoint, HarnessError> {
        self.eval_with(&geo(self.cfg, p)?, p, s)
    }

    /// The scaled gradient `∇_h y^h` at `(p, s)`.
    pub fn gradient(&self, p: [f64; 2], s: f64) -> Result<Matrix3<f64>, HarnessError> {
        let g = geo(self.cfg, p)?;
        let r = self.eval_with(&g, p, s)?;
        Ok(scaled_gradient(&g.frame, &r.d, self.h, s)?)
    }

    /// `v^h` alone, the leading part of the recovery.
    pub fn leading(&self, p: [f64; 2], s: f64) -> Result<Vector3<f64>, HarnessError> {
        let g = geo(self.cfg, p)?;
        let h = self.h;
        Ok(g.u.v + h * s * g.nu.v + h * g.w.v + h * h * s * g.mu.v)
    }
}

/// Dual-frame coefficients of the relaxation strain generated by the
/// profiles at `(p, s, y, z)`.
fn relaxation_strain(rec: &Recovery<'_>, v: &[f64; 7]) -> Result<Matrix3<f64>, HarnessError> {
    let mut u = Matrix3::zeros();
    let sym_add = |u: &mut Matrix3<f64>, i: usize, j: usize, val: f64| {
        u[(i, j)] += val;
        if i != j {
            u[(j, i)] += val;
        }
    };
    let gamma = rec.cfg.regime.gamma1();
    if let Some(z) = &rec.zeta {
        for a in 0..2 {
            for b in 0..2 {
                u[(a, b)] += 0.5 * z[a].partial([Y1, Y2][b], v)?;
                u[(b, a)] += 0.5 * z[a].partial([Y1, Y2][b], v)?;
            }
            if let Regime::Finite(_) = rec.cfg.regime {
                sym_add(&mut u, a, 2, z[a].partial(T, v)? / (2.0 * gamma));
            }
        }
    }
    if let Some(r) = &rec.rho {
        for a in 0..2 {
            sym_add(&mut u, a, 2, 0.5 * r.partial([Y1, Y2][a], v)?);
        }
        if let Regime::Finite(_) = rec.cfg.regime {
            u[(2, 2)] += r.partial(T, v)? / gamma;
        }
    }
    if let Some(phi) = &rec.phi {
        let s = v[T];
        u[(0, 0)] -= s * Prof::new(&phi.d[Y1]).partial(Y1, v)?;
        u[(1, 1)] -= s * Prof::new(&phi.d[Y2]).partial(Y2, v)?;
        let m = Prof::new(&phi.d[Y1]).partial(Y2, v)?;
        u[(0, 1)] -= s * m;
        u[(1, 0)] -= s * m;
    }
    if let Some(eta) = &rec.eta {
        for a in 0..2 {
            for b in 0..2 {
                u[(a, b)] += 0.5 * eta[a].partial([Z1, Z2][b], v)?;
                u[(b, a)] += 0.5 * eta[a].partial([Z1, Z2][b], v)?;
            }
            sym_add(&mut u, a, 2, 0.5 * eta[2].partial([Z1, Z2][a], v)?);
        }
    }
    if let Some(anti) = &rec.anti {
        for a in 0..2 {
            sym_add(&mut u, a, 2, anti[a].f.eval(v)?);
        }
        u[(2, 2)] += anti[2].f.eval(v)?;
    }
    Ok(u)
}

fn embed(m: &Matrix2<f64>) -> Matrix3<f64> {
    let mut out = Matrix3::zeros();
    out.fixed_view_mut::<2, 2>(0, 0).copy_from(m);
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct StrainRow {
    pub h: f64,
    pub eps: f64,
    /// `‖sym(Rᵀ∇_h y^h) − I − hB − thS^r − h𝒰‖_{L²(S¹)} / h`.
    pub residual_over_h: f64,
    pub points: usize,
}

/// The parameter rule for an experiment at one `h`.
fn rule_for(cfg: &RecoveryConfig, eps: f64, extra: FastUse) -> Result<crate::quadrature::Rule2d, HarnessError> {
    let used = cfg.profiles.fast_use().union(extra);
    cfg.quadrature.parameter_rule(cfg.surface.domain(), used.periods(eps))
}

/// Residual of the first-order strain expansion along the h-sequence.
pub fn strain_expansion_check(cfg: &RecoveryConfig) -> Result<Vec<StrainRow>, HarnessError> {
    cfg.validate()?;
    let trule = cfg.quadrature.thickness();
    let mut rows = Vec::with_capacity(cfg.hs.len());
    for &h in &cfg.hs {
        let rec = Recovery::unchecked(cfg, h);
        let eps = rec.eps;
        let rule = rule_for(cfg, eps, FastUse::default())?;
        let [sum] = ordered_sum(rule.len(), |i| {
            let p = rule.points[i];
            let g = geo(cfg, p)?;
            let mut acc = 0.0;
            for (s, ws) in trule.nodes.iter().zip(&trule.weights) {
                let r = rec.eval_with(&g, p, *s)?;
                let grad = scaled_gradient(&g.frame, &r.d, h, *s)?;
                let a = g.rot.transpose() * grad;
                let k = embed(&(g.b + *s * g.sr)) + relaxation_strain(&rec, &fast_vars(p, *s, eps))?;
                let res = 0.5 * (a + a.transpose()) - Matrix3::identity() - h * g.frame.frame_tensor(&k);
                let [k1, k2] = g.frame.principal_curvatures();
                let dv = g.frame.area_element() * (1.0 + s * k1) * (1.0 + s * k2);
                acc += ws * dv * res.norm_squared();
            }
            Ok::<_, HarnessError>([rule.weights[i] * acc])
        })?;
        rows.push(StrainRow { h, eps, residual_over_h: sum.sqrt() / h, points: rule.len() * trule.len() });
    }
    Ok(rows)
}

/// `∫_S ∫_I ∫∫ 𝒬(x, t, y, z, B + tS^r + 𝒰(profiles)) dz dy dt dvol_S`.
pub fn limit_integral(cfg: &RecoveryConfig, material: &Material) -> Result<f64, HarnessError> {
    let rec = Recovery::unchecked(cfg, cfg.hs.first().copied().unwrap_or(0.1));
    let q = &cfg.quadrature;
    let trule = q.thickness();
    let used = cfg.profiles.fast_use().union(material_use(material));
    let cell = CellRule::new(q, used);
    let base = cfg.surface.quadrature();
    q.guard((base.len() * trule.len() * cell.len()) as f64)?;
    let [sum] = ordered_sum(base.len(), |i| {
        let p = base.points[i];
        let g = geo(cfg, p)?;
        let mut acc = 0.0;
        for (s, ws) in trule.nodes.iter().zip(&trule.weights) {
            let macro_part = embed(&(g.b + *s * g.sr));
            for ((y, z), wc) in cell.points.iter().zip(&cell.weights) {
                let pt = CellPoint::new(p, *y, *z, *s);
                let k = macro_part + relaxation_strain(&rec, &pt.vars())?;
                let c = coefficient_stiffness(&material.stiffness(&pt)?, &g.frame);
                acc += ws * wc * quad(&c, &to_mandel6(&k));
            }
        }
        Ok::<_, HarnessError>([base.weights[i] * g.frame.area_element() * acc])
    })?;
    Ok(sum)
}

fn material_use(material: &Material) -> FastUse {
    let fields: Vec<&CoeffExpr> = material.fields().map(|(_, e)| e).collect();
    FastUse::of(&fields)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LimsupRow {
    pub h: f64,
    pub eps: f64,
    pub energy_over_h2: f64,
    pub limit: f64,
    pub gap: f64,
    /// `|J^h − I^h| / (h I^h)`.
    pub jh_vs_ih: f64,
    pub points: usize,
}

/// `h⁻² I^h(y^h)` against the limit integral with the same profiles.
pub fn limsup_check(cfg: &RecoveryConfig, material: &Material) -> Result<Vec<LimsupRow>, HarnessError> {
    cfg.validate()?;
    check_periodic(&material.fields().collect::<Vec<_>>())?;
    let limit = limit_integral(cfg, material)?;
    let trule = cfg.quadrature.thickness();
    let mut rows = Vec::with_capacity(cfg.hs.len());
    for &h in &cfg.hs {
        let rec = Recovery::unchecked(cfg, h);
        let eps = rec.eps;
        let rule = rule_for(cfg, eps, material_use(material))?;
        let [ih, jh] = ordered_sum(rule.len(), |i| {
            let p = rule.points[i];
            let g = geo(cfg, p)?;
            let [k1, k2] = g.frame.principal_curvatures();
            let (mut ai, mut aj) = (0.0, 0.0);
            for (s, ws) in trule.nodes.iter().zip(&trule.weights) {
                let r = rec.eval_with(&g, p, *s)?;
                let grad = scaled_gradient(&g.frame, &r.d, h, *s)?;
                let v = fast_vars(p, *s, eps);
                let at = CellPoint::new(p, [v[Y1], v[Y2]], [v[Z1], v[Z2]], *s);
                let w = material.energy(&at, &grad)?;
                ai += ws * w;
                aj += ws * w * (1.0 + h * s * k1) * (1.0 + h * s * k2);
            }
            let dv = rule.weights[i] * g.frame.area_element();
            Ok::<_, HarnessError>([dv * ai, dv * aj])
        })?;
        let e = ih / (h * h);
        let jh_vs_ih = if ih > 0.0 { (jh - ih).abs() / (h * ih) } else { 0.0 };
        rows.push(LimsupRow {
            h,
            eps,
            energy_over_h2: e,
            limit,
            gap: (e - limit).abs(),
            jh_vs_ih,
            points: rule.len() * trule.len(),
        });
    }
    Ok(rows)
}
