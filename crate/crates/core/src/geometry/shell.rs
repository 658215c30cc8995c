//! Shell coordinates `x = ξ(p) + t n(p)` and the maps built on them.

use nalgebra::{Matrix3, Vector3};

use super::surface::{Frame, SurfacePatch};
use super::GeometryError;

/// `Ξ(p, t) = ξ(p) + t n(p)`.
pub fn shell_map(surface: &SurfacePatch, p: [f64; 2], t: f64) -> Result<Vector3<f64>, GeometryError> {
    let f = surface.frame(p)?;
    Ok(f.point + t * f.normal)
}

pub fn shell_map_jacobian(frame: &Frame, t: f64) -> Matrix3<f64> {
    frame.offset_jacobian(t)
}

/// Nearest-point coordinates `(p, t)` of an ambient point, by Newton
/// iteration on `Ξ(p, t) = x` from `guess`.
pub fn project(
    surface: &SurfacePatch,
    x: &Vector3<f64>,
    guess: ([f64; 2], f64),
) -> Result<([f64; 2], f64), GeometryError> {
    let (mut p, mut t) = guess;
    for _ in 0..50 {
        let f = surface.frame(p)?;
        let r = f.point + t * f.normal - x;
        if r.norm() < 1e-15 * (1.0 + x.norm()) {
            return Ok((p, t));
        }
        let j = f.offset_jacobian(t);
        let step = j.lu().solve(&r).ok_or(GeometryError::ProjectionFailed)?;
        p = [p[0] - step[0], p[1] - step[1]];
        t -= step[2];
        if step.norm() < 1e-16 {
            return Ok((p, t));
        }
    }
    let f = surface.frame(p)?;
    if (f.point + t * f.normal - x).norm() < 1e-12 {
        Ok((p, t))
    } else {
        Err(GeometryError::ProjectionFailed)
    }
}

/// `Θ^h(x) = π(x) + t(x)/h n(π(x))`.
pub fn theta_h(
    surface: &SurfacePatch,
    x: &Vector3<f64>,
    h: f64,
    guess: ([f64; 2], f64),
) -> Result<Vector3<f64>, GeometryError> {
    let (p, t) = project(surface, x, guess)?;
    shell_map(surface, p, t / h)
}

/// Closed form of `∇Θ^h` at normal offset `t`:
/// `(T_S + (n⊗n + tS)/h)(I + tS)⁻¹`.
pub fn grad_theta_formula(frame: &Frame, h: f64, t: f64) -> Result<Matrix3<f64>, GeometryError> {
    let n = frame.normal;
    let a = frame.projection + (n * n.transpose() + t * frame.shape) / h;
    Ok(a * inverse_factor(frame, t)?)
}

fn inverse_factor(frame: &Frame, t: f64) -> Result<Matrix3<f64>, GeometryError> {
    for k in frame.principal_curvatures() {
        let e = 1.0 + t * k;
        if !(e > 0.5 && e < 1.5) {
            return Err(GeometryError::SingularFactor { t, eigenvalue: e });
        }
    }
    (Matrix3::identity() + t * frame.shape)
        .try_inverse()
        .ok_or(GeometryError::SingularFactor { t, eigenvalue: 0.0 })
}

/// Rejects thicknesses for which `I + h t S` leaves `(1/2, 3/2)` on the
/// surface nodes for some `|t| ≤ 1/2`.
pub fn check_thickness(surface: &SurfacePatch, h: f64) -> Result<(), GeometryError> {
    for f in surface.node_frames()? {
        for k in f.principal_curvatures() {
            for t in [-0.5 * h, 0.5 * h] {
                let e = 1.0 + t * k;
                if !(e > 0.5 && e < 1.5) {
                    return Err(GeometryError::SingularFactor { t, eigenvalue: e });
                }
            }
        }
    }
    Ok(())
}

/// Rescaled gradient from the parameter derivatives `[∂₁Y, ∂₂Y, ∂_sY]` of
/// `Y(p, s) = y(ξ(p) + s n(p))`: `[∂₁Y, ∂₂Y, ∂_sY/h] (∇Ξ(p, hs))⁻¹`.
pub fn scaled_gradient(frame: &Frame, d: &[Vector3<f64>; 3], h: f64, s: f64) -> Result<Matrix3<f64>, GeometryError> {
    inverse_factor(frame, h * s)?;
    let j = frame.offset_jacobian(h * s);
    let inv = j.try_inverse().ok_or(GeometryError::SingularFactor { t: h * s, eigenvalue: 0.0 })?;
    Ok(Matrix3::from_columns(&[d[0], d[1], d[2] / h]) * inv)
}

/// Rescaled gradient from the ambient gradient of `y` at `ξ(p) + s n(p)`:
/// `∇y (T_S + (n⊗n)/h + s S)(I + h s S)⁻¹`.
pub fn scaled_gradient_ambient(frame: &Frame, grad: &Matrix3<f64>, h: f64, s: f64) -> Result<Matrix3<f64>, GeometryError> {
    let n = frame.normal;
    let a = frame.projection + n * n.transpose() / h + s * frame.shape;
    Ok(grad * a * inverse_factor(frame, h * s)?)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShellResiduals {
    /// `‖∇Θ^h_FD − closed form‖` (max-entry norm).
    pub theta: f64,
    /// `‖dπ_FD − (T_S − tS)‖ / t²`.
    pub projection_ratio: f64,
}

/// Central finite differences of `Θ^h` and `π` at `ξ(p) + t n(p)` with
/// ambient step `step`, compared with their closed forms.
pub fn shell_identity_residuals(
    surface: &SurfacePatch,
    h: f64,
    p: [f64; 2],
    t: f64,
    step: f64,
) -> Result<ShellResiduals, GeometryError> {
    if !(step > 0.0) || step > 1e-2 * h {
        return Err(GeometryError::StepTooLarge { step, h });
    }
    let frame = surface.frame_at(p)?;
    let x = frame.point + t * frame.normal;
    let mut fd_theta = Matrix3::zeros();
    let mut fd_pi = Matrix3::zeros();
    for k in 0..3 {
        let e = Vector3::ith(k, step);
        let tp = theta_h(surface, &(x + e), h, (p, t))?;
        let tm = theta_h(surface, &(x - e), h, (p, t))?;
        fd_theta.set_column(k, &((tp - tm) / (2.0 * step)));
        let (pp, _) = project(surface, &(x + e), (p, t))?;
        let (pm, _) = project(surface, &(x - e), (p, t))?;
        let xp = surface.frame(pp)?.point;
        let xm = surface.frame(pm)?.point;
        fd_pi.set_column(k, &((xp - xm) / (2.0 * step)));
    }
    let theta = (fd_theta - grad_theta_formula(&frame, h, t)?).amax();
    let first = frame.projection - t * frame.shape;
    let projection_ratio = if t == 0.0 { 0.0 } else { (fd_pi - first).norm() / (t * t) };
    Ok(ShellResiduals { theta, projection_ratio })
}
