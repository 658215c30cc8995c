use nalgebra::{Matrix2, Matrix3, Vector3};

use super::chart::{fd_jet, ChartJet};
use super::surface::{max_abs_eig, SurfacePatch};
use super::GeometryError;
use crate::expr::{CoeffExpr, CHART_VARS};

/// Map applied to the mid-surface.
#[derive(Clone, Debug, PartialEq)]
pub enum ImmersionKind {
    Identity,
    /// Rolls the `x₁` direction onto a circle of radius `radius`, curling
    /// towards `-e₃`: `(R sin(x₁/R), x₂, R cos(x₁/R) - R + x₃)`.
    Roll { radius: f64 },
    /// Reflection across the plane `x₃ = 0`.
    Reflect,
    /// Uniform dilation.
    Scale { factor: f64 },
    /// Components given in parameter coordinates `u, v`.
    Expr { map: [CoeffExpr; 3] },
}

/// `x ↦ rotation · kind(x) + translation`, evaluated on the chart.
#[derive(Clone, Debug, PartialEq)]
pub struct Immersion {
    pub kind: ImmersionKind,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Immersion {
    pub fn new(kind: ImmersionKind) -> Self {
        Immersion { kind, rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn identity() -> Self {
        Self::new(ImmersionKind::Identity)
    }

    pub fn roll(radius: f64) -> Self {
        Self::new(ImmersionKind::Roll { radius })
    }

    pub fn reflect() -> Self {
        Self::new(ImmersionKind::Reflect)
    }

    pub fn scale(factor: f64) -> Self {
        Self::new(ImmersionKind::Scale { factor })
    }

    pub fn expr(x: &str, y: &str, z: &str) -> Result<Self, GeometryError> {
        Ok(Self::new(ImmersionKind::Expr {
            map: [
                CoeffExpr::parse_with(x, CHART_VARS)?,
                CoeffExpr::parse_with(y, CHART_VARS)?,
                CoeffExpr::parse_with(z, CHART_VARS)?,
            ],
        }))
    }

    pub fn rigid(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Immersion { kind: ImmersionKind::Identity, rotation, translation }
    }

    /// Composes a rigid motion after this immersion.
    pub fn then_rigid(&self, rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Immersion {
            kind: self.kind.clone(),
            rotation: rotation * self.rotation,
            translation: rotation * self.translation + translation,
        }
    }

    pub fn is_analytic(&self) -> bool {
        !matches!(self.kind, ImmersionKind::Expr { .. })
    }

    /// Jet of `u ∘ ξ` in parameter coordinates.
    pub fn jet(&self, surface: &SurfacePatch, p: [f64; 2]) -> Result<ChartJet, GeometryError> {
        let base = match &self.kind {
            ImmersionKind::Expr { map } => {
                let eval = |q: [f64; 2]| -> Result<Vector3<f64>, GeometryError> {
                    Ok(Vector3::new(map[0].eval(&q)?, map[1].eval(&q)?, map[2].eval(&q)?))
                };
                fd_jet(eval, p)?
            }
            kind => {
                let xi = surface.jet(p)?;
                ambient_jet(kind, &xi)
            }
        };
        let r = &self.rotation;
        Ok(ChartJet {
            value: r * base.value + self.translation,
            d: [r * base.d[0], r * base.d[1]],
            dd: [[r * base.dd[0][0], r * base.dd[0][1]], [r * base.dd[1][0], r * base.dd[1][1]]],
        })
    }

    /// Pulled-back metric `∂_α u · ∂_β u`.
    pub fn metric(&self, surface: &SurfacePatch, p: [f64; 2]) -> Result<Matrix2<f64>, GeometryError> {
        let j = self.jet(surface, p)?;
        Ok(Matrix2::new(j.d[0].dot(&j.d[0]), j.d[0].dot(&j.d[1]), j.d[1].dot(&j.d[0]), j.d[1].dot(&j.d[1])))
    }

    /// Largest eigenvalue magnitude of `g_u - g` over the surface nodes.
    pub fn isometry_violation(&self, surface: &SurfacePatch) -> Result<f64, GeometryError> {
        let mut worst = 0.0f64;
        for p in &surface.quadrature().points {
            let g = surface.frame(*p)?.metric;
            worst = worst.max(max_abs_eig(&(self.metric(surface, *p)? - g)));
        }
        Ok(worst)
    }

    /// Push-forward normal `ν = ∂₁u × ∂₂u / |∂₁u × ∂₂u|`.
    pub fn normal(&self, surface: &SurfacePatch, p: [f64; 2]) -> Result<Vector3<f64>, GeometryError> {
        let j = self.jet(surface, p)?;
        unit_normal(&j, p)
    }
}

pub(crate) fn unit_normal(j: &ChartJet, p: [f64; 2]) -> Result<Vector3<f64>, GeometryError> {
    let c = j.d[0].cross(&j.d[1]);
    let n = c.norm();
    if !(n > 1e-12 * (j.d[0].norm() * j.d[1].norm()).max(1e-300)) || !n.is_finite() {
        return Err(GeometryError::DegenerateImmersion { point: p });
    }
    Ok(c / n)
}

fn ambient_jet(kind: &ImmersionKind, xi: &ChartJet) -> ChartJet {
    match kind {
        ImmersionKind::Identity => *xi,
        ImmersionKind::Reflect => {
            let m = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
            ChartJet {
                value: m * xi.value,
                d: [m * xi.d[0], m * xi.d[1]],
                dd: [[m * xi.dd[0][0], m * xi.dd[0][1]], [m * xi.dd[1][0], m * xi.dd[1][1]]],
            }
        }
        ImmersionKind::Scale { factor } => ChartJet {
            value: xi.value * *factor,
            d: [xi.d[0] * *factor, xi.d[1] * *factor],
            dd: [
                [xi.dd[0][0] * *factor, xi.dd[0][1] * *factor],
                [xi.dd[1][0] * *factor, xi.dd[1][1] * *factor],
            ],
        },
        ImmersionKind::Roll { radius } => {
            let r = *radius;
            let x = xi.value;
            let (s, c) = (x[0] / r).sin_cos();
            let value = Vector3::new(r * s, x[1], r * c - r + x[2]);
            let dm = Matrix3::new(c, 0.0, 0.0, 0.0, 1.0, 0.0, -s, 0.0, 1.0);
            // only ∂²m/∂x₁² is nonzero
            let d2 = Vector3::new(-s / r, 0.0, -c / r);
            let mut dd = [[Vector3::zeros(); 2]; 2];
            for a in 0..2 {
                for b in 0..2 {
                    dd[a][b] = dm * xi.dd[a][b] + d2 * (xi.d[a][0] * xi.d[b][0]);
                }
            }
            ChartJet { value, d: [dm * xi.d[0], dm * xi.d[1]], dd }
        }
        ImmersionKind::Expr { .. } => unreachable!("expression immersions are evaluated in parameters"),
    }
}

/// Coefficients `q_αβ` of the relative Weingarten map `u*S_u − S` in the
/// dual frame `τ^α ⊗ τ^β`.
pub fn relative_weingarten(
    surface: &SurfacePatch,
    immersion: &Immersion,
    p: [f64; 2],
) -> Result<Matrix2<f64>, GeometryError> {
    let frame = surface.frame(p)?;
    let ju = immersion.jet(surface, p)?;
    let nu = unit_normal(&ju, p)?;
    let gu = Matrix2::new(ju.d[0].dot(&ju.d[0]), ju.d[0].dot(&ju.d[1]), ju.d[1].dot(&ju.d[0]), ju.d[1].dot(&ju.d[1]));
    let gu_inv = gu.try_inverse().ok_or(GeometryError::DegenerateImmersion { point: p })?;
    let mut second = Matrix2::zeros();
    for a in 0..2 {
        for b in 0..2 {
            second[(a, b)] = ju.dd[a][b].dot(&nu);
        }
    }
    // τ_δ · (u*S_u) τ_γ = −(II_u g_u⁻¹ g)_γδ
    let pulled = -(second * gu_inv * frame.metric).transpose();
    let q = pulled + frame.second_form;
    Ok(0.5 * (q + q.transpose()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_surface;
    use nalgebra::Rotation3;

    #[test]
    fn rigid_motion_has_zero_relative_weingarten() {
        let s = build_surface("ellipsoid:a=1,b=1.5,c=2,cap=30", [4, 8]).unwrap();
        let rot = Rotation3::from_euler_angles(0.4, -1.0, 2.0).into_inner();
        let u = Immersion::rigid(rot, Vector3::new(1.0, 2.0, -3.0));
        for p in &s.quadrature().points {
            assert!(relative_weingarten(&s, &u, *p).unwrap().norm() < 1e-12);
        }
    }

    #[test]
    fn scaled_plate_is_not_isometric() {
        let s = build_surface("flat:Lx=1,Ly=1", [3, 3]).unwrap();
        let v = Immersion::scale(1.1).isometry_violation(&s).unwrap();
        assert!((v - 0.21).abs() < 1e-12);
        assert!(Immersion::roll(0.7).isometry_violation(&s).unwrap() < 1e-14);
    }

    #[test]
    fn expression_immersion_matches_roll() {
        let s = build_surface("flat:Lx=1,Ly=1", [3, 3]).unwrap();
        let a = Immersion::roll(2.0);
        let b = Immersion::expr("2*sin(u/2)", "v", "2*cos(u/2)-2").unwrap();
        for p in &s.quadrature().points {
            let qa = relative_weingarten(&s, &a, *p).unwrap();
            let qb = relative_weingarten(&s, &b, *p).unwrap();
            assert!((qa - qb).norm() < 1e-7);
        }
    }
}
