use nalgebra::{Matrix2, Matrix3, SymmetricEigen, Vector3};

use super::chart::{apply2, reparametrize, ChartJet, Domain, SurfaceSpec};
use super::GeometryError;
use crate::quadrature::Rule2d;

/// Local frame of the mid-surface at one parameter point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub param: [f64; 2],
    pub point: Vector3<f64>,
    /// `τ_α = ∂_α ξ`.
    pub tangent: [Vector3<f64>; 2],
    /// Dual basis `τ^α` with `τ^α · τ_β = δ_αβ`, tangent to the surface.
    pub dual: [Vector3<f64>; 2],
    pub normal: Vector3<f64>,
    /// Orthogonal projection onto the tangent plane.
    pub projection: Matrix3<f64>,
    pub metric: Matrix2<f64>,
    /// Second fundamental form `b_αβ = ∂_α∂_β ξ · n`.
    pub second_form: Matrix2<f64>,
    /// Shape operator `S = dn`, with `S n = 0`.
    pub shape: Matrix3<f64>,
    pub gauss: f64,
}

impl Frame {
    pub fn from_jet(param: [f64; 2], jet: &ChartJet) -> Result<Frame, GeometryError> {
        let [t1, t2] = jet.d;
        let cross = t1.cross(&t2);
        let len = cross.norm();
        let scale = t1.norm() * t2.norm();
        if !(len > 1e-12 * scale.max(1e-300)) || !len.is_finite() {
            return Err(GeometryError::DegenerateChart { point: param });
        }
        let normal = cross / len;
        let metric = Matrix2::new(t1.dot(&t1), t1.dot(&t2), t2.dot(&t1), t2.dot(&t2));
        let inv = metric.try_inverse().ok_or(GeometryError::DegenerateChart { point: param })?;
        if metric[(0, 0)] <= 0.0 || metric.determinant() <= 0.0 {
            return Err(GeometryError::DegenerateChart { point: param });
        }
        let dual = [t1 * inv[(0, 0)] + t2 * inv[(0, 1)], t1 * inv[(1, 0)] + t2 * inv[(1, 1)]];
        let mut b = Matrix2::zeros();
        for i in 0..2 {
            for j in 0..2 {
                b[(i, j)] = jet.dd[i][j].dot(&normal);
            }
        }
        b = 0.5 * (b + b.transpose());
        let mut shape = Matrix3::zeros();
        for i in 0..2 {
            for j in 0..2 {
                shape -= b[(i, j)] * dual[i] * dual[j].transpose();
            }
        }
        let gauss = b.determinant() / metric.determinant();
        Ok(Frame {
            param,
            point: jet.value,
            tangent: [t1, t2],
            dual,
            normal,
            projection: Matrix3::identity() - normal * normal.transpose(),
            metric,
            second_form: b,
            shape,
            gauss,
        })
    }

    pub fn area_element(&self) -> f64 {
        self.metric.determinant().sqrt()
    }

    pub fn metric_inverse(&self) -> Matrix2<f64> {
        self.metric.try_inverse().expect("metric is positive definite")
    }

    /// Coefficient frame `[τ¹ τ² n]` as matrix columns.
    pub fn coefficient_basis(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&[self.dual[0], self.dual[1], self.normal])
    }

    /// Ambient tensor `Σ q_αβ τ^α ⊗ τ^β`.
    pub fn tangential_tensor(&self, q: &Matrix2<f64>) -> Matrix3<f64> {
        let mut out = Matrix3::zeros();
        for i in 0..2 {
            for j in 0..2 {
                out += q[(i, j)] * self.dual[i] * self.dual[j].transpose();
            }
        }
        out
    }

    /// Ambient tensor `Σ a_ij τ^i ⊗ τ^j` with `τ³ = n`.
    pub fn frame_tensor(&self, a: &Matrix3<f64>) -> Matrix3<f64> {
        let t = self.coefficient_basis();
        t * a * t.transpose()
    }

    /// `∇Ξ` at normal offset `t`: columns `(I + tS)τ₁, (I + tS)τ₂, n`.
    pub fn offset_jacobian(&self, t: f64) -> Matrix3<f64> {
        let a = Matrix3::identity() + t * self.shape;
        Matrix3::from_columns(&[a * self.tangent[0], a * self.tangent[1], self.normal])
    }

    /// Principal curvatures (eigenvalues of `S` on the tangent plane), ascending.
    pub fn principal_curvatures(&self) -> [f64; 2] {
        // symmetric form L⁻¹(−b)L⁻ᵀ with g = LLᵀ keeps repeated roots accurate
        let l = self.metric.cholesky().expect("metric is positive definite").l();
        let li = l.try_inverse().expect("metric is positive definite");
        let m = -li * self.second_form * li.transpose();
        let e = SymmetricEigen::new(0.5 * (m + m.transpose())).eigenvalues;
        [e.min(), e.max()]
    }

    pub fn mean_curvature_sum(&self) -> f64 {
        self.shape.trace()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BuildReport {
    pub min_gauss: f64,
    pub max_gauss: f64,
    pub nonpositive_curvature: bool,
    pub min_area_element: f64,
}

/// A chart with its parameter domain and quadrature.
#[derive(Clone, Debug)]
pub struct SurfacePatch {
    spec: SurfaceSpec,
    domain: Domain,
    nodes: [usize; 2],
    rule: Rule2d,
    rotation: Option<Matrix2<f64>>,
    report: BuildReport,
}

/// Parses a surface spec, builds the quadrature and checks the immersion
/// invariants at every node. Non-positive curvature is reported, not fatal.
pub fn build_surface(spec: &str, nodes: [usize; 2]) -> Result<SurfacePatch, GeometryError> {
    SurfacePatch::new(SurfaceSpec::parse(spec)?, nodes)
}

impl SurfacePatch {
    pub fn new(spec: SurfaceSpec, nodes: [usize; 2]) -> Result<SurfacePatch, GeometryError> {
        if nodes[0] < 2 || nodes[1] < 2 {
            return Err(GeometryError::Spec { spec: spec.to_string(), reason: "at least 2 nodes per axis".into() });
        }
        let domain = spec.domain();
        let rule = domain.rule(nodes);
        let mut patch = SurfacePatch {
            spec,
            domain,
            nodes,
            rule,
            rotation: None,
            report: BuildReport { min_gauss: 0.0, max_gauss: 0.0, nonpositive_curvature: false, min_area_element: 0.0 },
        };
        patch.report = patch.check_nodes()?;
        Ok(patch)
    }

    /// Same surface with parameters rotated by `angle` (radians). Only disk
    /// domains are invariant under this, so rectangles are rejected.
    pub fn rotated_parameters(&self, angle: f64) -> Result<SurfacePatch, GeometryError> {
        if self.domain.is_rect() {
            return Err(GeometryError::Spec {
                spec: self.spec.to_string(),
                reason: "parameter rotation needs a disk domain".into(),
            });
        }
        let (s, c) = angle.sin_cos();
        let r = Matrix2::new(c, -s, s, c);
        let mut out = self.clone();
        out.rotation = Some(match self.rotation {
            Some(old) => old * r,
            None => r,
        });
        out.report = out.check_nodes()?;
        Ok(out)
    }

    fn check_nodes(&self) -> Result<BuildReport, GeometryError> {
        let mut rep = BuildReport {
            min_gauss: f64::INFINITY,
            max_gauss: f64::NEG_INFINITY,
            nonpositive_curvature: false,
            min_area_element: f64::INFINITY,
        };
        for p in &self.rule.points {
            let f = self.frame(*p)?;
            rep.min_gauss = rep.min_gauss.min(f.gauss);
            rep.max_gauss = rep.max_gauss.max(f.gauss);
            rep.min_area_element = rep.min_area_element.min(f.area_element());
        }
        rep.nonpositive_curvature = rep.min_gauss <= 0.0;
        Ok(rep)
    }

    pub fn spec(&self) -> &SurfaceSpec {
        &self.spec
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn nodes(&self) -> [usize; 2] {
        self.nodes
    }

    pub fn quadrature(&self) -> &Rule2d {
        &self.rule
    }

    pub fn report(&self) -> &BuildReport {
        &self.report
    }

    pub fn is_analytic(&self) -> bool {
        self.spec.is_analytic()
    }

    pub fn jet(&self, p: [f64; 2]) -> Result<ChartJet, GeometryError> {
        match &self.rotation {
            None => self.spec.jet(p),
            Some(r) => Ok(reparametrize(&self.spec.jet(apply2(r, p))?, r)),
        }
    }

    /// Frame at `p` without the domain check.
    pub fn frame(&self, p: [f64; 2]) -> Result<Frame, GeometryError> {
        Frame::from_jet(p, &self.jet(p)?)
    }

    pub fn frame_at(&self, p: [f64; 2]) -> Result<Frame, GeometryError> {
        if !self.domain.contains(p) {
            return Err(GeometryError::OutOfDomain { point: p });
        }
        self.frame(p)
    }

    pub fn node_frames(&self) -> Result<Vec<Frame>, GeometryError> {
        self.rule.points.iter().map(|p| self.frame(*p)).collect()
    }

    pub fn area(&self) -> Result<f64, GeometryError> {
        let mut a = 0.0;
        for (p, w) in self.rule.points.iter().zip(&self.rule.weights) {
            a += w * self.frame(*p)?.area_element();
        }
        Ok(a)
    }

    /// Positive Gauss curvature at every node.
    pub fn require_convex(&self) -> Result<(), GeometryError> {
        for p in &self.rule.points {
            let f = self.frame(*p)?;
            if f.gauss <= 0.0 {
                return Err(GeometryError::NonPositiveCurvature { point: *p, gauss: f.gauss });
            }
        }
        Ok(())
    }

    /// Derivatives `∂_β g_αγ` of the metric, indexed `[β][α][γ]`.
    pub fn metric_derivatives(&self, jet: &ChartJet) -> [Matrix2<f64>; 2] {
        let mut out = [Matrix2::zeros(); 2];
        for (be, o) in out.iter_mut().enumerate() {
            for a in 0..2 {
                for c in 0..2 {
                    o[(a, c)] = jet.dd[be][a].dot(&jet.d[c]) + jet.d[a].dot(&jet.dd[be][c]);
                }
            }
        }
        out
    }
}

/// Largest absolute eigenvalue of a symmetric 2x2 matrix.
pub(crate) fn max_abs_eig(m: &Matrix2<f64>) -> f64 {
    let e = SymmetricEigen::new(0.5 * (m + m.transpose()));
    e.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_plate_has_trivial_frame() {
        let s = build_surface("flat:Lx=1,Ly=1", [8, 8]).unwrap();
        for p in &s.quadrature().points {
            let f = s.frame_at(*p).unwrap();
            assert_eq!(f.gauss, 0.0);
            assert_eq!(f.shape, Matrix3::zeros());
            assert_eq!(f.normal, Vector3::z());
            assert_eq!(f.projection, Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 0.0)));
            assert_eq!(f.dual, [Vector3::x(), Vector3::y()]);
        }
        assert!((s.area().unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sphere_cap_curvature() {
        let s = build_surface("sphere:R=2,cap=30", [10, 12]).unwrap();
        for f in s.node_frames().unwrap() {
            assert!((f.gauss - 0.25).abs() < 1e-12);
            let k = f.principal_curvatures();
            assert!((k[0] - 0.5).abs() < 1e-12 && (k[1] - 0.5).abs() < 1e-12);
            assert!((f.shape - 0.5 * f.projection).norm() < 1e-12);
            assert!((f.shape * f.normal).norm() < 1e-14);
        }
        assert!(!s.report().nonpositive_curvature);
        // cap area 2πR²(1 - cos θ)
        let exact = 2.0 * std::f64::consts::PI * 4.0 * (1.0 - 30f64.to_radians().cos());
        assert!((s.area().unwrap() - exact).abs() < 1e-9);
    }

    #[test]
    fn unit_sphere_pole_shape_is_identity() {
        let s = build_surface("sphere:R=1,cap=40", [4, 8]).unwrap();
        let f = s.frame_at([0.0, 0.0]).unwrap();
        assert!((f.shape - Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 0.0))).norm() < 1e-14);
    }

    #[test]
    fn out_of_domain_and_degenerate() {
        let s = build_surface("flat:Lx=1,Ly=1", [4, 4]).unwrap();
        assert!(matches!(s.frame_at([1.5, 0.5]), Err(GeometryError::OutOfDomain { .. })));
        assert!(matches!(
            build_surface("expr:u;u;0", [4, 4]),
            Err(GeometryError::DegenerateChart { .. })
        ));
        assert!(build_surface("flat:Lx=1,Ly=1", [1, 4]).is_err());
    }

    #[test]
    fn saddle_flags_curvature_without_failing() {
        let s = build_surface("expr:u;v;0.2*(u*u-v*v)|rect=-0.5,0.5,-0.5,0.5", [4, 4]).unwrap();
        assert!(s.report().nonpositive_curvature);
        assert!(s.require_convex().is_err());
    }

    #[test]
    fn parameter_rotation_needs_disk() {
        let s = build_surface("flat:Lx=1,Ly=1", [4, 4]).unwrap();
        assert!(s.rotated_parameters(0.3).is_err());
        let sp = build_surface("sphere:R=2,cap=30", [4, 8]).unwrap();
        let r = sp.rotated_parameters(0.3).unwrap();
        let f = r.frame_at([0.3, -0.2]).unwrap();
        assert!((f.gauss - 0.25).abs() < 1e-12);
    }
}
