//! Jacobi-preconditioned conjugate gradients for symmetric positive
//! definite operators given as closures.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CgError {
    #[error("conjugate gradients did not converge: {iterations} iterations, relative residual {residual:e}")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("operator is not positive definite: curvature {curvature:e} at iteration {iteration}")]
    Indefinite { iteration: usize, curvature: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgSettings {
    pub tolerance: f64,
    /// Iteration cap as a multiple of the system size.
    pub max_factor: usize,
}

impl Default for CgSettings {
    fn default() -> Self {
        CgSettings { tolerance: 1e-10, max_factor: 10 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CgResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final residual norm relative to the right-hand side.
    pub residual: f64,
    /// Absolute residual norm.
    pub residual_abs: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b`. `apply(v, out)` overwrites `out` with `A v`.
pub fn solve(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    diag: &[f64],
    settings: CgSettings,
) -> Result<CgResult, CgError> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let bnorm = dot(b, b).sqrt();
    if n == 0 || bnorm == 0.0 {
        return Ok(CgResult { x, iterations: 0, residual: 0.0, residual_abs: 0.0 });
    }
    let inv: Vec<f64> = diag.iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let max = (settings.max_factor * n).max(1);
    for it in 1..=max {
        apply(&p, &mut ap);
        let curv = dot(&p, &ap);
        if !(curv > 0.0) {
            return Err(CgError::Indefinite { iteration: it, curvature: curv });
        }
        let alpha = rz / curv;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rn = dot(&r, &r).sqrt();
        if rn <= settings.tolerance * bnorm {
            return Ok(CgResult { x, iterations: it, residual: rn / bnorm, residual_abs: rn });
        }
        for i in 0..n {
            z[i] = r[i] * inv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let rn = dot(&r, &r).sqrt();
    Err(CgError::NoConvergence { iterations: max, residual: rn / bnorm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn solves_spd_system() {
        let n = 30;
        let a = DMatrix::from_fn(n, n, |i, j| if i == j { 4.0 + i as f64 } else { 1.0 / (1.0 + (i + j) as f64) });
        let a = &a * a.transpose();
        let b = DVector::from_fn(n, |i, _| (i as f64).sin());
        let diag: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        let res = solve(
            |v, out| {
                let y = &a * DVector::from_column_slice(v);
                out.copy_from_slice(y.as_slice());
            },
            b.as_slice(),
            &diag,
            CgSettings::default(),
        )
        .unwrap();
        let want = a.clone().lu().solve(&b).unwrap();
        assert!((DVector::from_vec(res.x) - want).amax() < 1e-8);
    }

    #[test]
    fn flags_indefinite() {
        let err = solve(|v, out| out.iter_mut().zip(v).for_each(|(o, x)| *o = -x), &[1.0, 2.0], &[1.0, 1.0], CgSettings::default());
        assert!(matches!(err, Err(CgError::Indefinite { .. })));
    }
}
