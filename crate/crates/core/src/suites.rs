//! Invariant suites behind `shellhom verify`.

use nalgebra::{Matrix2, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::expr::CellPoint;
use crate::geometry::{relative_weingarten, reparametrize, shell_identity_residuals, Frame, GeometryError, Immersion, SurfacePatch};
use crate::mandel::{embed_tangential, quad, to_mandel3, Mandel3};
use crate::material::{extract_q, verify_material_axioms, Material, MaterialError, SampleCounts};
use crate::relaxation::{apply_def_y, apply_hess_y, grid_norm2, relax_normal, RelaxationError, TrigBasis};

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("unknown suite `{0}` (expected geometry, material or relaxation)")]
    Unknown(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error(transparent)]
    Relaxation(#[from] RelaxationError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Geometry,
    Material,
    Relaxation,
}

impl Suite {
    pub fn parse(s: &str) -> Result<Suite, SuiteError> {
        match s {
            "geometry" => Ok(Suite::Geometry),
            "material" => Ok(Suite::Material),
            "relaxation" => Ok(Suite::Relaxation),
            other => Err(SuiteError::Unknown(other.into())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Suite::Geometry => "geometry",
            Suite::Material => "material",
            Suite::Relaxation => "relaxation",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteCheck {
    pub name: String,
    pub pass: bool,
    pub worst: f64,
    pub limit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub checks: Vec<SuiteCheck>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn check(name: &str, worst: f64, limit: f64) -> SuiteCheck {
    SuiteCheck { name: name.into(), pass: worst <= limit, worst, limit }
}

fn random_rotation(rng: &mut impl Rng) -> Matrix3<f64> {
    let axis: Vector3<f64> = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    nalgebra::Rotation3::new(axis * (rng.gen_range(0.1..3.0) / axis.norm().max(1e-3))).into_inner()
}

/// Runs one suite on the configured surface and material.
pub fn run_suite(suite: Suite, surface: &SurfacePatch, material: &Material, seed: u64) -> Result<SuiteReport, SuiteError> {
    let checks = match suite {
        Suite::Geometry => geometry_checks(surface, seed)?,
        Suite::Material => material_checks(material, seed)?,
        Suite::Relaxation => relaxation_checks(surface, material, seed)?,
    };
    Ok(SuiteReport { suite: suite.name(), checks })
}

fn geometry_checks(surface: &SurfacePatch, seed: u64) -> Result<Vec<SuiteCheck>, SuiteError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames = surface.node_frames()?;
    let (mut duality, mut adjoint, mut gauss) = (0.0f64, 0.0f64, 0.0f64);
    for f in &frames {
        for a in 0..2 {
            for b in 0..2 {
                let d = if a == b { 1.0 } else { 0.0 };
                duality = duality.max((f.dual[a].dot(&f.tangent[b]) - d).abs());
            }
        }
        let s = &f.shape;
        adjoint = adjoint.max((f.tangent[0].dot(&(s * f.tangent[1])) - f.tangent[1].dot(&(s * f.tangent[0]))).abs());
        let [k1, k2] = f.principal_curvatures();
        gauss = gauss.max((k1 * k2 - f.gauss).abs());
    }
    let mut out = vec![check("frame-duality", duality, 1e-12), check("shape-self-adjoint", adjoint, 1e-8)];
    if surface.is_analytic() {
        out.push(check("gauss-curvature", gauss, 1e-6));
    }

    let mut indifference = 0.0f64;
    let base = Immersion::identity();
    for f in frames.iter().step_by(frames.len().div_ceil(6).max(1)) {
        let s0 = relative_weingarten(surface, &base, f.param)?;
        let moved = base.then_rigid(random_rotation(&mut rng), Vector3::new(0.3, -1.0, 2.0));
        let s1 = relative_weingarten(surface, &moved, f.param)?;
        indifference = indifference.max((s1 - s0).amax()).max(s0.amax());
    }
    out.push(check("rigid-relative-weingarten", indifference, 1e-8));

    let h = 0.1;
    let mut theta = 0.0f64;
    let mut ratios = Vec::new();
    let mut noise_level = true;
    let p = frames[frames.len() / 2].param;
    for k in 0..3 {
        let t = 0.04 * h / f64::from(1 << k);
        let r = shell_identity_residuals(surface, h, p, t, 1e-7 * h)?;
        theta = theta.max(r.theta);
        ratios.push(r.projection_ratio);
        noise_level &= r.projection_ratio * t * t <= 1e-8;
    }
    out.push(check("shell-gradient-identity", theta, 1e-6));
    let spread = ratios.iter().cloned().fold(0.0, f64::max) / ratios.iter().cloned().fold(f64::INFINITY, f64::min).max(1e-300);
    let bounded = if noise_level { 1.0 } else { spread };
    out.push(check("projection-ratio-bounded", bounded, 4.0));
    Ok(out)
}

fn sample_point(rng: &mut impl Rng) -> CellPoint {
    let mut u = || rng.gen_range(0.0..1.0);
    CellPoint::new([u(), u()], [u(), u()], [u(), u()], u() - 0.5)
}

fn material_checks(material: &Material, seed: u64) -> Result<Vec<SuiteCheck>, SuiteError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let report = verify_material_axioms(material, material.growth, SampleCounts::default(), seed)?;
    let mut out: Vec<SuiteCheck> = report
        .checks
        .iter()
        .map(|c| SuiteCheck { name: c.name.clone(), pass: c.pass, worst: c.worst, limit: c.limit })
        .collect();

    let mut extraction = 0.0f64;
    for _ in 0..50 {
        let (mu, la) = (rng.gen_range(0.5..2.0), rng.gen_range(0.0..2.0));
        let m = Material::svk(&format!("{mu:e}"), &format!("{la:e}"))?;
        let q = extract_q(&m, &CellPoint::default())?;
        extraction = extraction.max(q.analytic.map(|a| a.1).unwrap_or(f64::INFINITY));
    }
    out.push(check("extraction-vs-analytic", extraction, 1e-6));

    let (mut skew, mut symmetry) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let at = sample_point(&mut rng);
        let q = extract_q(material, &at)?;
        let a = Matrix3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let k = Matrix3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let (g, k) = (a + a.transpose(), k - k.transpose());
        skew = skew.max((q.eval(&(g + k)) - q.eval(&g)).abs() / (1.0 + g.norm_squared()));
        symmetry = symmetry.max((q.matrix - q.matrix.transpose()).amax());
    }
    out.push(check("skew-invariance", skew, 1e-8));
    out.push(check("mandel-symmetry", symmetry, 1e-12));
    let mut deficit = 0.0f64;
    for _ in 0..20 {
        let at = sample_point(&mut rng);
        if let Some((mu, _)) = material.lame(&at)? {
            let q = extract_q(material, &at)?;
            // 𝒬 = lim W(I + sG)/s² puts the SVK shear eigenvalue at μ
            deficit = deficit.max(mu * (1.0 - 1e-6) - q.min_eigenvalue());
        }
    }
    out.push(check("mandel-positive-definite", deficit, 0.0));
    Ok(out)
}

fn relaxation_checks(surface: &SurfacePatch, material: &Material, seed: u64) -> Result<Vec<SuiteCheck>, SuiteError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames = surface.node_frames()?;
    let (sn, cs) = 0.7f64.sin_cos();
    let rot = Matrix2::new(cs, -sn, sn, cs);
    let (mut monotone, mut covariance) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let at = sample_point(&mut rng);
        let q = extract_q(material, &at)?;
        let f = &frames[rng.gen_range(0..frames.len())];
        let r = relax_normal(&q, f)?;
        let c = crate::relaxation::coefficient_stiffness(&q.matrix, f);
        let v = Mandel3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        monotone = monotone.max(quad(&r.matrix, &v) - quad(&c, &embed_tangential(&v)));

        // the same ambient tangential tensor in a rotated parameter frame
        let f2 = Frame::from_jet(f.param, &reparametrize(&surface.jet(f.param)?, &rot))?;
        let r2 = relax_normal(&q, &f2)?;
        let a = f.tangential_tensor(&crate::mandel::from_mandel3(&v));
        let t2 = f2.coefficient_basis().try_inverse().expect("frame basis is invertible");
        let k2 = t2 * a * t2.transpose();
        let v2 = to_mandel3(&Matrix2::new(k2[(0, 0)], k2[(0, 1)], k2[(1, 0)], k2[(1, 1)]));
        let (x, y) = (quad(&r.matrix, &v), quad(&r2.matrix, &v2));
        covariance = covariance.max((x - y).abs() / (1.0 + x.abs()));
    }
    let mut out = vec![check("relaxation-monotone", monotone, 1e-12), check("relaxation-frame-covariance", covariance, 1e-10)];

    let basis = TrigBasis::new(3);
    let mut constants = 0.0f64;
    let mut means = 0.0f64;
    let mut parseval = 0.0f64;
    let one = {
        let mut a = vec![0.0; basis.len()];
        let zero = basis.modes().iter().position(|k| *k == [0, 0]);
        if let Some(m) = zero {
            a[2 * m] = 1.0;
        }
        a
    };
    let zero = vec![0.0; basis.len()];
    for f in apply_def_y(&basis, [&one, &one])?.iter().chain(apply_hess_y(&basis, &one)?.iter()) {
        constants = constants.max(f.amax());
    }
    for _ in 0..5 {
        let a: Vec<f64> = (0..basis.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let def = apply_def_y(&basis, [&a, &zero])?;
        let hess = apply_hess_y(&basis, &a)?;
        for fields in [&def, &hess] {
            let mean: Mandel3 = fields.iter().sum::<Mandel3>() / fields.len() as f64;
            means = means.max(mean.amax());
        }
        for d in [[0u8, 0u8], [1, 0], [1, 1], [0, 2]] {
            let grid = grid_norm2(&[&basis.synth(&a, d)]);
            let spec = basis.spectral_norm2(&a, d);
            parseval = parseval.max((grid - spec).abs() / spec.max(1e-300));
        }
    }
    out.push(check("operators-annihilate-constants", constants, 1e-12));
    out.push(check("operators-preserve-zero-mean", means, 1e-12));
    out.push(check("parseval", parseval, 1e-10));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_surface;

    #[test]
    fn suites_pass_on_reference_inputs() {
        let s = build_surface("sphere:R=2,cap=30", [4, 8]).unwrap();
        let m = Material::svk("2 + cos(6.283185307179586*y1)", "1").unwrap();
        for suite in [Suite::Geometry, Suite::Material, Suite::Relaxation] {
            let r = run_suite(suite, &s, &m, 3).unwrap();
            assert!(r.passed(), "{r:?}");
        }
    }

    #[test]
    fn unknown_suite() {
        assert!(matches!(Suite::parse("energy"), Err(SuiteError::Unknown(_))));
    }
}
