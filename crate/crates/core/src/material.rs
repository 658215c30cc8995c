//! Stored energy densities `W(x, y, z, F)` and their quadratic part at the
//! identity.
//!
//! All shipped densities are of Saint Venant–Kirchhoff type,
//! `W(F) = e(E)ᵀ ℂ e(E)` with `E = (FᵀF − I)/2` and `e` the Mandel vector,
//! so `W(I + sG) = s² 𝒬(G) + O(s³)` with `𝒬(G) = e(sym G)ᵀ ℂ e(sym G)`.
//! For isotropic coefficients `ℂ = μ I₆ + (λ/2) m mᵀ` with `m = (1,1,1,0,0,0)`,
//! that is `W = μ|E|² + (λ/2)(tr E)²`.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::expr::{CellPoint, CoeffExpr, EvalError, ParseError, T, X1, X2, Y1, Y2, Z1, Z2};
use crate::mandel::{basis6, to_mandel6, Stiffness6};

/// Absolute tolerance of the periodicity check. Coefficients written with a
/// truncated `2π` literal are periodic only to about `1e-7`.
pub const PERIODICITY_TOL: f64 = 1e-6;
/// Richardson step ladder of the quadratic extraction.
pub const EXTRACTION_STEPS: [f64; 3] = [1e-3, 5e-4, 2.5e-4];
/// Relative size of the last Richardson correction above which the density
/// is declared not quadratic at the identity.
pub const NON_QUADRATIC_TOL: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaterialError {
    #[error("coefficient `{field}`: {source}")]
    Parse { field: String, source: ParseError },
    #[error("coefficient evaluation: {0}")]
    Eval(#[from] EvalError),
    #[error("Richardson ladder does not contract: last correction {correction:e} against matrix norm {norm:e}")]
    NonQuadraticResidual { correction: f64, norm: f64 },
    #[error("unknown material kind `{0}`")]
    UnknownKind(String),
    #[error("material needs {expected} coefficient fields, got {got}")]
    FieldCount { expected: usize, got: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaterialKind {
    SvkIsotropic,
    SvkOrthotropic,
    UserQuadratic,
}

impl MaterialKind {
    pub fn parse(s: &str) -> Result<Self, MaterialError> {
        match s {
            "svk" | "svk-isotropic" => Ok(MaterialKind::SvkIsotropic),
            "svk-orthotropic" => Ok(MaterialKind::SvkOrthotropic),
            "user-quadratic" => Ok(MaterialKind::UserQuadratic),
            other => Err(MaterialError::UnknownKind(other.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MaterialKind::SvkIsotropic => "svk",
            MaterialKind::SvkOrthotropic => "svk-orthotropic",
            MaterialKind::UserQuadratic => "user-quadratic",
        }
    }

    /// Names of the coefficient fields, in storage order.
    pub fn field_names(self) -> &'static [&'static str] {
        match self {
            MaterialKind::SvkIsotropic => &["mu", "lambda"],
            MaterialKind::SvkOrthotropic => &["c11", "c22", "c33", "c12", "c13", "c23", "c44", "c55", "c66"],
            MaterialKind::UserQuadratic => &[
                "c11", "c12", "c13", "c14", "c15", "c16", "c22", "c23", "c24", "c25", "c26", "c33", "c34", "c35",
                "c36", "c44", "c45", "c46", "c55", "c56", "c66",
            ],
        }
    }
}

/// Declared growth constants: `α dist² ≤ W ≤ β dist²` for `dist ≤ ρ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GrowthConstants {
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
}

/// Anything that can be evaluated as a stored energy density.
pub trait StoredEnergy: Sync {
    fn energy(&self, at: &CellPoint, f: &Matrix3<f64>) -> Result<f64, MaterialError>;

    /// Closed-form Mandel matrix of `𝒬`, when known.
    fn analytic_quadratic(&self, _at: &CellPoint) -> Result<Option<Stiffness6>, MaterialError> {
        Ok(None)
    }

    /// Coefficient fields subject to the periodicity check.
    fn coefficient_fields(&self) -> Vec<(&str, &CoeffExpr)> {
        Vec::new()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Material {
    kind: MaterialKind,
    fields: Vec<CoeffExpr>,
    pub growth: Option<GrowthConstants>,
}

impl Material {
    pub fn new(kind: MaterialKind, fields: &[&str]) -> Result<Material, MaterialError> {
        let names = kind.field_names();
        if fields.len() != names.len() {
            return Err(MaterialError::FieldCount { expected: names.len(), got: fields.len() });
        }
        let fields = fields
            .iter()
            .zip(names)
            .map(|(src, name)| {
                CoeffExpr::parse(src).map_err(|source| MaterialError::Parse { field: name.to_string(), source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Material { kind, fields, growth: None })
    }

    /// Isotropic Saint Venant–Kirchhoff material with Lamé fields.
    pub fn svk(mu: &str, lambda: &str) -> Result<Material, MaterialError> {
        Self::new(MaterialKind::SvkIsotropic, &[mu, lambda])
    }

    pub fn with_growth(mut self, alpha: f64, beta: f64, rho: f64) -> Material {
        self.growth = Some(GrowthConstants { alpha, beta, rho });
        self
    }

    pub fn kind(&self) -> MaterialKind {
        self.kind
    }

    pub fn fields(&self) -> impl Iterator<Item = (&'static str, &CoeffExpr)> {
        self.kind.field_names().iter().copied().zip(self.fields.iter())
    }

    pub fn uses(&self, var: usize) -> bool {
        self.fields.iter().any(|f| f.uses(var))
    }

    pub fn depends_on_x(&self) -> bool {
        self.uses(X1) || self.uses(X2)
    }

    pub fn depends_on_y(&self) -> bool {
        self.uses(Y1) || self.uses(Y2)
    }

    pub fn depends_on_z(&self) -> bool {
        self.uses(Z1) || self.uses(Z2)
    }

    pub fn depends_on_t(&self) -> bool {
        self.uses(T)
    }

    fn values(&self, at: &CellPoint) -> Result<Vec<f64>, MaterialError> {
        let v = at.vars();
        self.fields.iter().map(|f| f.eval(&v).map_err(MaterialError::from)).collect()
    }

    /// Mandel matrix `ℂ` of the quadratic form.
    pub fn stiffness(&self, at: &CellPoint) -> Result<Stiffness6, MaterialError> {
        let c = self.values(at)?;
        Ok(stiffness_from(self.kind, &c))
    }

    /// Lamé fields of an isotropic material.
    pub fn lame(&self, at: &CellPoint) -> Result<Option<(f64, f64)>, MaterialError> {
        if self.kind != MaterialKind::SvkIsotropic {
            return Ok(None);
        }
        let c = self.values(at)?;
        Ok(Some((c[0], c[1])))
    }
}

fn stiffness_from(kind: MaterialKind, c: &[f64]) -> Stiffness6 {
    let mut m = Stiffness6::zeros();
    match kind {
        MaterialKind::SvkIsotropic => {
            let (mu, la) = (c[0], c[1]);
            for i in 0..6 {
                m[(i, i)] = mu;
            }
            for i in 0..3 {
                for j in 0..3 {
                    m[(i, j)] += 0.5 * la;
                }
            }
        }
        MaterialKind::SvkOrthotropic => {
            m[(0, 0)] = c[0];
            m[(1, 1)] = c[1];
            m[(2, 2)] = c[2];
            m[(0, 1)] = c[3];
            m[(1, 0)] = c[3];
            m[(0, 2)] = c[4];
            m[(2, 0)] = c[4];
            m[(1, 2)] = c[5];
            m[(2, 1)] = c[5];
            m[(3, 3)] = c[6];
            m[(4, 4)] = c[7];
            m[(5, 5)] = c[8];
        }
        MaterialKind::UserQuadratic => {
            let mut k = 0;
            for i in 0..6 {
                for j in i..6 {
                    m[(i, j)] = c[k];
                    m[(j, i)] = c[k];
                    k += 1;
                }
            }
        }
    }
    m
}

impl StoredEnergy for Material {
    fn energy(&self, at: &CellPoint, f: &Matrix3<f64>) -> Result<f64, MaterialError> {
        let c = self.values(at)?;
        let e = 0.5 * (f.transpose() * f - Matrix3::identity());
        if self.kind == MaterialKind::SvkIsotropic {
            let (mu, la) = (c[0], c[1]);
            let tr = e.trace();
            return Ok(mu * e.norm_squared() + 0.5 * la * tr * tr);
        }
        let v = to_mandel6(&e);
        Ok((v.transpose() * stiffness_from(self.kind, &c) * v)[(0, 0)])
    }

    fn analytic_quadratic(&self, at: &CellPoint) -> Result<Option<Stiffness6>, MaterialError> {
        self.stiffness(at).map(Some)
    }

    fn coefficient_fields(&self) -> Vec<(&str, &CoeffExpr)> {
        self.fields().collect()
    }
}

/// The quadratic form `𝒬` at one point, as a Mandel matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticDensity {
    pub at: CellPoint,
    pub matrix: Stiffness6,
    /// Closed-form matrix and max-entry discrepancy, for SVK kinds.
    pub analytic: Option<(Stiffness6, f64)>,
}

impl QuadraticDensity {
    pub fn eval(&self, g: &Matrix3<f64>) -> f64 {
        let v = to_mandel6(g);
        (v.transpose() * self.matrix * v)[(0, 0)]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.matrix).eigenvalues.min()
    }
}

/// `lim W(I + sG)/s²` along one direction, Richardson-extrapolated over
/// [`EXTRACTION_STEPS`]. Returns the value and the last correction.
fn directional_quadratic(w: &dyn StoredEnergy, at: &CellPoint, g: &Matrix3<f64>) -> Result<(f64, f64), MaterialError> {
    let f = |s: f64| -> Result<f64, MaterialError> { Ok(w.energy(at, &(Matrix3::identity() + s * g))? / (s * s)) };
    let [s0, s1, s2] = EXTRACTION_STEPS;
    let (f0, f1, f2) = (f(s0)?, f(s1)?, f(s2)?);
    // halving steps: remove the O(s) then the O(s²) term
    let r01 = 2.0 * f1 - f0;
    let r12 = 2.0 * f2 - f1;
    let r = (4.0 * r12 - r01) / 3.0;
    Ok((r, (r - r12).abs()))
}

/// Mandel matrix of `𝒬` by polarization over the six Mandel directions.
pub fn extract_q(w: &dyn StoredEnergy, at: &CellPoint) -> Result<QuadraticDensity, MaterialError> {
    let mut m = Stiffness6::zeros();
    let mut diag = [0.0; 6];
    let mut worst = 0.0f64;
    for (k, d) in diag.iter_mut().enumerate() {
        let (v, c) = directional_quadratic(w, at, &basis6(k))?;
        *d = v;
        m[(k, k)] = v;
        worst = worst.max(c);
    }
    for k in 0..6 {
        for l in (k + 1)..6 {
            let (v, c) = directional_quadratic(w, at, &(basis6(k) + basis6(l)))?;
            worst = worst.max(c);
            let off = 0.5 * (v - diag[k] - diag[l]);
            m[(k, l)] = off;
            m[(l, k)] = off;
        }
    }
    let norm = m.norm();
    if worst > NON_QUADRATIC_TOL * norm.max(f64::EPSILON.sqrt()) {
        return Err(MaterialError::NonQuadraticResidual { correction: worst, norm });
    }
    let analytic = w.analytic_quadratic(at)?.map(|a| {
        let d = (a - m).amax();
        (a, d)
    });
    Ok(QuadraticDensity { at: *at, matrix: m, analytic })
}

/// `dist(F, SO(3)) = |√(FᵀF) − I|` for `det F > 0`.
pub fn dist_so3(f: &Matrix3<f64>) -> f64 {
    let e = SymmetricEigen::new(f.transpose() * f);
    e.eigenvalues.iter().map(|l| (l.max(0.0).sqrt() - 1.0).powi(2)).sum::<f64>().sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SampleCounts {
    pub points: usize,
    pub rotations: usize,
    pub growth: usize,
}

impl Default for SampleCounts {
    fn default() -> Self {
        SampleCounts { points: 32, rotations: 8, growth: 400 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AxiomCheck {
    pub name: String,
    pub pass: bool,
    /// Worst sampled value of the checked quantity.
    pub worst: f64,
    /// Threshold it is compared against.
    pub limit: f64,
    pub at: Option<[f64; 7]>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AxiomReport {
    pub checks: Vec<AxiomCheck>,
    pub alpha_hat: f64,
    pub beta_hat: f64,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&AxiomCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub(crate) fn random_rotation(rng: &mut impl Rng) -> Matrix3<f64> {
    let axis = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let angle = rng.gen_range(-3.0..3.0);
    nalgebra::Rotation3::from_scaled_axis(axis.normalize() * angle).into_inner()
}

fn random_point(rng: &mut impl Rng) -> CellPoint {
    CellPoint::new(
        [rng.gen(), rng.gen()],
        [rng.gen(), rng.gen()],
        [rng.gen(), rng.gen()],
        rng.gen_range(-0.5..0.5),
    )
}

fn random_sym_unit(rng: &mut impl Rng) -> Matrix3<f64> {
    let a = Matrix3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
    let s = a + a.transpose();
    s / s.norm()
}

/// Samples the axioms of a stored energy. `declared` growth constants are
/// compared against the sampled ratios `W / dist²`.
pub fn verify_material_axioms(
    w: &dyn StoredEnergy,
    declared: Option<GrowthConstants>,
    counts: SampleCounts,
    seed: u64,
) -> Result<AxiomReport, MaterialError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<CellPoint> = (0..counts.points.max(1)).map(|_| random_point(&mut rng)).collect();
    let mut checks = Vec::new();

    let mut worst = 0.0f64;
    let mut at = None;
    for p in &points {
        let v = w.energy(p, &Matrix3::identity())?.abs();
        if v > worst || at.is_none() {
            worst = worst.max(v);
            at = Some(p.vars());
        }
    }
    checks.push(AxiomCheck { name: "identity".into(), pass: worst <= 1e-14, worst, limit: 1e-14, at });

    let mut worst = 0.0f64;
    let mut at = None;
    for p in &points {
        for _ in 0..counts.rotations.max(1) {
            let f = Matrix3::identity() + 0.3 * Matrix3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            let r = random_rotation(&mut rng);
            let a = w.energy(p, &f)?;
            let b = w.energy(p, &(r * f))?;
            let d = (a - b).abs() / (1.0 + a.abs());
            if d >= worst {
                worst = d;
                at = Some(p.vars());
            }
        }
    }
    checks.push(AxiomCheck { name: "frame-indifference".into(), pass: worst <= 1e-12, worst, limit: 1e-12, at });

    let rho = declared.map(|g| g.rho).unwrap_or(0.1);
    let mut dirs: Vec<Matrix3<f64>> = (0..6).map(basis6).collect();
    dirs.push(Matrix3::identity() / 3f64.sqrt());
    dirs.push(-Matrix3::identity() / 3f64.sqrt());
    let (mut alpha_hat, mut beta_hat) = (f64::INFINITY, 0.0f64);
    let (mut amin_at, mut bmax_at) = (None, None);
    for i in 0..counts.growth.max(1) {
        let p = &points[i % points.len()];
        let g = if i < dirs.len() { dirs[i] } else { random_sym_unit(&mut rng) };
        let s = rho * rng.gen_range(0.05..1.0);
        let f = random_rotation(&mut rng) * (Matrix3::identity() + s * g);
        let d = dist_so3(&f);
        if d <= 0.0 {
            continue;
        }
        let ratio = w.energy(p, &f)? / (d * d);
        if ratio < alpha_hat {
            alpha_hat = ratio;
            amin_at = Some(p.vars());
        }
        if ratio > beta_hat {
            beta_hat = ratio;
            bmax_at = Some(p.vars());
        }
    }
    if let Some(g) = declared {
        checks.push(AxiomCheck {
            name: "growth-lower".into(),
            pass: alpha_hat >= g.alpha,
            worst: alpha_hat,
            limit: g.alpha,
            at: amin_at,
        });
        checks.push(AxiomCheck {
            name: "growth-upper".into(),
            pass: beta_hat <= g.beta,
            worst: beta_hat,
            limit: g.beta,
            at: bmax_at,
        });
    } else {
        checks.push(AxiomCheck {
            name: "growth-lower".into(),
            pass: alpha_hat > 0.0,
            worst: alpha_hat,
            limit: 0.0,
            at: amin_at,
        });
    }

    let mut worst = 0.0f64;
    let mut at = None;
    for (_, field) in w.coefficient_fields() {
        for p in &points {
            let base = field.eval(&p.vars())?;
            let shifts = [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]];
            for sh in shifts {
                let q = CellPoint {
                    y: [p.y[0] + sh[0], p.y[1] + sh[1]],
                    z: [p.z[0] + sh[2], p.z[1] + sh[3]],
                    ..*p
                };
                let d = (field.eval(&q.vars())? - base).abs();
                if d >= worst {
                    worst = d;
                    at = Some(p.vars());
                }
            }
        }
    }
    checks.push(AxiomCheck { name: "periodicity".into(), pass: worst <= PERIODICITY_TOL, worst, limit: PERIODICITY_TOL, at });

    let mut worst = f64::INFINITY;
    let mut at = None;
    for p in &points {
        let q = match w.analytic_quadratic(p)? {
            Some(m) => m,
            None => extract_q(w, p)?.matrix,
        };
        let e = SymmetricEigen::new(q).eigenvalues.min();
        if e < worst {
            worst = e;
            at = Some(p.vars());
        }
    }
    checks.push(AxiomCheck { name: "positive-definite".into(), pass: worst > 0.0, worst, limit: 0.0, at });

    Ok(AxiomReport { checks, alpha_hat, beta_hat })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn origin() -> CellPoint {
        CellPoint::default()
    }

    #[test]
    fn svk_energy_values() {
        let m = Material::svk("1", "1").unwrap();
        assert_eq!(m.energy(&origin(), &Matrix3::identity()).unwrap(), 0.0);
        let f = Matrix3::from_diagonal(&Vector3::new(1.1, 1.0, 1.0));
        // E11 = (1.21 - 1)/2 = 0.105
        let want = 0.105f64.powi(2) * 1.5;
        assert!((m.energy(&origin(), &f).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn rotations_cost_nothing() {
        let m = Material::svk("2+cos(6.2831853*y1)", "0.5").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let r = random_rotation(&mut rng);
            assert!(m.energy(&origin(), &r).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn quadratic_extraction_examples() {
        let m = Material::svk("1", "1").unwrap();
        let q = extract_q(&m, &origin()).unwrap();
        let e11 = basis6(0);
        assert!((q.eval(&e11) - 1.5).abs() < 1e-6);
        let skew = Matrix3::new(0.0, 1.0, -2.0, -1.0, 0.0, 0.5, 2.0, -0.5, 0.0);
        assert!(q.eval(&skew).abs() < 1e-12);
        let m2 = Material::svk("2", "0").unwrap();
        let q2 = extract_q(&m2, &origin()).unwrap();
        let g = Matrix3::new(0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert!((q2.eval(&g) - 4.0).abs() < 1e-6);
        assert!(q2.analytic.unwrap().1 < 1e-6);
    }

    #[test]
    fn orthotropic_and_general_kinds() {
        let o = Material::new(
            MaterialKind::SvkOrthotropic,
            &["3", "2", "1.5", "0.5", "0.2", "0.1", "0.7", "0.8", "0.9"],
        )
        .unwrap();
        let q = extract_q(&o, &origin()).unwrap();
        assert!(q.analytic.as_ref().unwrap().1 < 1e-6);
        let names = MaterialKind::UserQuadratic.field_names();
        let vals: Vec<String> = names
            .iter()
            .enumerate()
            .map(|(i, n)| if n.as_bytes()[1] == n.as_bytes()[2] { "2".to_string() } else { format!("{}", 0.01 * i as f64) })
            .collect();
        let refs: Vec<&str> = vals.iter().map(|s| s.as_str()).collect();
        let u = Material::new(MaterialKind::UserQuadratic, &refs).unwrap();
        assert!(extract_q(&u, &origin()).unwrap().analytic.unwrap().1 < 1e-6);
        assert!(Material::new(MaterialKind::SvkIsotropic, &["1"]).is_err());
    }

    struct Cubic;
    impl StoredEnergy for Cubic {
        fn energy(&self, _: &CellPoint, f: &Matrix3<f64>) -> Result<f64, MaterialError> {
            Ok(dist_so3(f).powi(3))
        }
    }

    struct Quartic;
    impl StoredEnergy for Quartic {
        // not twice differentiable in the quadratic sense: |E| instead of |E|²
        fn energy(&self, _: &CellPoint, f: &Matrix3<f64>) -> Result<f64, MaterialError> {
            let e = 0.5 * (f.transpose() * f - Matrix3::identity());
            Ok(e.norm().powf(1.5))
        }
    }

    #[test]
    fn axioms_for_homogeneous_svk() {
        let m = Material::svk("1", "1").unwrap().with_growth(0.49, 3.0, 0.1);
        let r = verify_material_axioms(&m, m.growth, SampleCounts::default(), 7).unwrap();
        assert!(r.passed(), "{r:?}");
        assert!(r.alpha_hat >= 0.49);
        // the dilation direction reaches μ + 3λ/2 plus higher-order terms
        assert!(r.beta_hat > 2.4 && r.beta_hat < 3.0, "{}", r.beta_hat);
    }

    #[test]
    fn period_three_coefficient_fails() {
        let m = Material::svk("2+sin(6.2831853*y1/3)", "1").unwrap();
        let r = verify_material_axioms(&m, None, SampleCounts::default(), 1).unwrap();
        assert!(!r.check("periodicity").unwrap().pass);
    }

    #[test]
    fn cubic_stub_fails_lower_growth() {
        let g = GrowthConstants { alpha: 0.1, beta: 1.0, rho: 0.1 };
        let r = verify_material_axioms(&Cubic, Some(g), SampleCounts::default(), 2).unwrap();
        assert!(!r.check("growth-lower").unwrap().pass);
    }

    #[test]
    fn non_quadratic_density_is_rejected() {
        assert!(matches!(extract_q(&Quartic, &origin()), Err(MaterialError::NonQuadraticResidual { .. })));
    }

    #[test]
    fn dist_of_stretch() {
        let f = Matrix3::from_diagonal(&Vector3::new(1.1, 1.0, 1.0));
        assert!((dist_so3(&f) - 0.1).abs() < 1e-14);
        let r = nalgebra::Rotation3::from_euler_angles(0.1, 0.2, 0.3).into_inner();
        assert!((dist_so3(&(r * f)) - 0.1).abs() < 1e-13);
    }
}
