//! Normal relaxation of the quadratic density and pseudo-spectral
//! differential operators on the periodic cell.
//!
//! Tensors here are written in coefficients with respect to the frame
//! `τ¹, τ², n`: a symmetric `A` stands for `A_ij τ^i ⊗ τ^j`. The Mandel
//! matrix of `𝒬` in these coefficients is `Lᵀ ℂ L` with `L` the congruence
//! by `[τ¹ τ² n]`.
//!
//! Periodic fields use the real orthonormal basis `√2 cos(2πk·y)`,
//! `√2 sin(2πk·y)` over the half lattice `k₁ > 0` or `k₁ = 0, k₂ > 0`
//! with `|k|∞ ≤ N`, so constants are excluded and every field has zero mean.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use num_complex::Complex64;
use thiserror::Error;

use crate::geometry::Frame;
use crate::mandel::{congruence, schur_complement, to_mandel3, Mandel3, Mandel6, Stiffness3, Stiffness6, NORMAL, SQRT_2, TANGENTIAL};
use crate::material::QuadraticDensity;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RelaxationError {
    #[error("normal block of the quadratic form is not positive definite")]
    SingularNormalBlock,
    #[error("sampling grid of {grid} points cannot carry modes up to {n}")]
    GridTooCoarse { n: usize, grid: usize },
    #[error("coefficient vector has length {got}, basis expects {expected}")]
    LengthMismatch { expected: usize, got: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    NormalRelaxed,
    ZThenNormalRelaxed,
}

/// `Q̃` as a 3×3 Mandel matrix on `(q₁₁, q₂₂, √2 q₁₂)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RelaxedDensity {
    pub matrix: Stiffness3,
    pub provenance: Provenance,
}

impl RelaxedDensity {
    pub fn eval(&self, q: &Matrix2<f64>) -> f64 {
        let v = to_mandel3(q);
        (v.transpose() * self.matrix * v)[(0, 0)]
    }
}

/// The Mandel matrix of `𝒬` written in frame coefficients.
pub fn coefficient_stiffness(c: &Stiffness6, frame: &Frame) -> Stiffness6 {
    let l = congruence(&frame.coefficient_basis());
    let m = l.transpose() * c * l;
    0.5 * (m + m.transpose())
}

/// Minimizes a coefficient-frame Mandel matrix over the shear and normal
/// components.
pub fn relax_normal_matrix(c: &Stiffness6) -> Result<Stiffness3, RelaxationError> {
    schur_complement(c, TANGENTIAL, NORMAL).ok_or(RelaxationError::SingularNormalBlock)
}

/// `Q̃(q) = min { 𝒬(M) : M(T_S, T_S) = q }` at one point.
pub fn relax_normal(q: &QuadraticDensity, frame: &Frame) -> Result<RelaxedDensity, RelaxationError> {
    let c = coefficient_stiffness(&q.matrix, frame);
    Ok(RelaxedDensity { matrix: relax_normal_matrix(&c)?, provenance: Provenance::NormalRelaxed })
}

/// Multi-index of a derivative in the two periodic variables.
pub type DerivIndex = [u8; 2];

/// Truncated real trigonometric basis on the unit cell with its sampling
/// grid of `grid × grid` points `g/grid`.
#[derive(Clone, Debug)]
pub struct TrigBasis {
    n: usize,
    grid: usize,
    modes: Vec<[i32; 2]>,
    // exp(2πi k g / grid) at [g * (2n+1) + k + n]
    table: Vec<Complex64>,
}

impl TrigBasis {
    /// Modes up to `n` on the default grid of `2(2n+1)` points per axis.
    pub fn new(n: usize) -> TrigBasis {
        Self::with_grid(n, 2 * (2 * n + 1)).expect("default grid is fine")
    }

    pub fn with_grid(n: usize, grid: usize) -> Result<TrigBasis, RelaxationError> {
        if grid < 2 * n + 1 || grid == 0 {
            return Err(RelaxationError::GridTooCoarse { n, grid });
        }
        let ni = n as i32;
        let mut modes = Vec::new();
        for k1 in 0..=ni {
            for k2 in -ni..=ni {
                if k1 > 0 || k2 > 0 {
                    modes.push([k1, k2]);
                }
            }
        }
        let w = 2 * n + 1;
        let mut table = Vec::with_capacity(grid * w);
        for g in 0..grid {
            for k in -ni..=ni {
                let th = 2.0 * PI * (k as f64) * (g as f64) / grid as f64;
                table.push(Complex64::new(th.cos(), th.sin()));
            }
        }
        Ok(TrigBasis { n, grid, modes, table })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn modes(&self) -> &[[i32; 2]] {
        &self.modes
    }

    /// Number of real coefficients (a cosine and a sine per mode).
    pub fn len(&self) -> usize {
        2 * self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn points(&self) -> usize {
        self.grid * self.grid
    }

    /// Grid point `g` as a cell coordinate.
    pub fn point(&self, g: usize) -> [f64; 2] {
        [(g / self.grid) as f64 / self.grid as f64, (g % self.grid) as f64 / self.grid as f64]
    }

    fn multiplier(k: [i32; 2], d: DerivIndex) -> Complex64 {
        let order = (d[0] + d[1]) as i32;
        let scale = (2.0 * PI).powi(order) * (k[0] as f64).powi(d[0] as i32) * (k[1] as f64).powi(d[1] as i32);
        Complex64::new(0.0, 1.0).powi(order) * scale
    }

    fn check(&self, len: usize) -> Result<(), RelaxationError> {
        if len != self.len() {
            return Err(RelaxationError::LengthMismatch { expected: self.len(), got: len });
        }
        Ok(())
    }

    /// Samples `∂^d f` on the grid, adding into `out`.
    pub fn synth_add(&self, a: &[f64], d: DerivIndex, out: &mut [f64]) {
        let (n, g) = (self.n, self.grid);
        let w = 2 * n + 1;
        // stage 1: tmp[k1][g2] = Σ_k2 c[k1][k2] e(k2 g2)
        let mut tmp = vec![Complex64::new(0.0, 0.0); (n + 1) * g];
        for (m, &k) in self.modes.iter().enumerate() {
            let c = SQRT_2 * Complex64::new(a[2 * m], -a[2 * m + 1]) * Self::multiplier(k, d);
            if c == Complex64::new(0.0, 0.0) {
                continue;
            }
            let k1 = k[0] as usize;
            let k2 = (k[1] + n as i32) as usize;
            let row = &mut tmp[k1 * g..(k1 + 1) * g];
            for (g2, r) in row.iter_mut().enumerate() {
                *r += c * self.table[g2 * w + k2];
            }
        }
        // stage 2: out[g1][g2] = Re Σ_k1 e(k1 g1) tmp[k1][g2]
        for g1 in 0..g {
            let dst = &mut out[g1 * g..(g1 + 1) * g];
            for k1 in 0..=n {
                let e = self.table[g1 * w + k1 + n];
                let row = &tmp[k1 * g..(k1 + 1) * g];
                for (o, t) in dst.iter_mut().zip(row) {
                    *o += e.re * t.re - e.im * t.im;
                }
            }
        }
    }

    pub fn synth(&self, a: &[f64], d: DerivIndex) -> Vec<f64> {
        let mut out = vec![0.0; self.points()];
        self.synth_add(a, d, &mut out);
        out
    }

    /// Transpose of [`TrigBasis::synth_add`]: adds `Σ_g r_g ∂^d ψ(y_g)` into `grad`.
    pub fn adjoint_add(&self, r: &[f64], d: DerivIndex, grad: &mut [f64]) {
        let (n, g) = (self.n, self.grid);
        let w = 2 * n + 1;
        // u[g1][k2] = Σ_g2 r[g1][g2] e(k2 g2)
        let mut u = vec![Complex64::new(0.0, 0.0); g * w];
        for g1 in 0..g {
            let row = &r[g1 * g..(g1 + 1) * g];
            let dst = &mut u[g1 * w..(g1 + 1) * w];
            for (g2, &rv) in row.iter().enumerate() {
                if rv == 0.0 {
                    continue;
                }
                let e = &self.table[g2 * w..(g2 + 1) * w];
                for (o, ev) in dst.iter_mut().zip(e) {
                    *o += ev * rv;
                }
            }
        }
        // big[k1][k2] = Σ_g1 e(k1 g1) u[g1][k2]
        let mut big = vec![Complex64::new(0.0, 0.0); (n + 1) * w];
        for g1 in 0..g {
            let src = &u[g1 * w..(g1 + 1) * w];
            for k1 in 0..=n {
                let e = self.table[g1 * w + k1 + n];
                let dst = &mut big[k1 * w..(k1 + 1) * w];
                for (o, s) in dst.iter_mut().zip(src) {
                    *o += e * s;
                }
            }
        }
        for (m, &k) in self.modes.iter().enumerate() {
            let rk = big[k[0] as usize * w + (k[1] + n as i32) as usize];
            let v = Self::multiplier(k, d) * rk;
            grad[2 * m] += SQRT_2 * v.re;
            grad[2 * m + 1] += SQRT_2 * v.im;
        }
    }

    /// Cell average of `∂^d ψ ∂^e ψ` for either basis function of mode `m`.
    pub fn moment(&self, m: usize, d: DerivIndex, e: DerivIndex) -> f64 {
        let k = self.modes[m];
        let od = (d[0] + d[1]) as i32;
        let oe = (e[0] + e[1]) as i32;
        let pd = (k[0] as f64).powi(d[0] as i32 + e[0] as i32) * (k[1] as f64).powi(d[1] as i32 + e[1] as i32);
        let phase = match (od - oe).rem_euclid(4) {
            0 => 1.0,
            2 => -1.0,
            _ => 0.0,
        };
        (2.0 * PI).powi(od + oe) * pd * phase
    }

    /// `‖∂^d f‖²` over the cell from the coefficients.
    pub fn spectral_norm2(&self, a: &[f64], d: DerivIndex) -> f64 {
        (0..self.modes.len()).map(|m| self.moment(m, d, d) * (a[2 * m].powi(2) + a[2 * m + 1].powi(2))).sum()
    }
}

/// Grid average of `Σ_i |f_i|²` over a list of sampled components.
pub fn grid_norm2(fields: &[&[f64]]) -> f64 {
    let n = fields.first().map(|f| f.len()).unwrap_or(0);
    if n == 0 {
        return 0.0;
    }
    fields.iter().map(|f| f.iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / n as f64
}

/// `Def_𝒴 ζ` as tangential Mandel vectors on the grid.
pub fn apply_def_y(basis: &TrigBasis, zeta: [&[f64]; 2]) -> Result<Vec<Mandel3>, RelaxationError> {
    basis.check(zeta[0].len())?;
    basis.check(zeta[1].len())?;
    let d11 = basis.synth(zeta[0], [1, 0]);
    let d22 = basis.synth(zeta[1], [0, 1]);
    let d12 = basis.synth(zeta[0], [0, 1]);
    let d21 = basis.synth(zeta[1], [1, 0]);
    Ok((0..basis.points())
        .map(|g| Mandel3::new(d11[g], d22[g], SQRT_2 * 0.5 * (d12[g] + d21[g])))
        .collect())
}

/// `Hess_𝒴 φ` as tangential Mandel vectors on the grid.
pub fn apply_hess_y(basis: &TrigBasis, phi: &[f64]) -> Result<Vec<Mandel3>, RelaxationError> {
    basis.check(phi.len())?;
    let a = basis.synth(phi, [2, 0]);
    let b = basis.synth(phi, [0, 2]);
    let c = basis.synth(phi, [1, 1]);
    Ok((0..basis.points()).map(|g| Mandel3::new(a[g], b[g], SQRT_2 * c[g])).collect())
}

/// `(sym ∇_z η | 0)` as frame-coefficient Mandel vectors on the grid.
pub fn apply_def_z(basis: &TrigBasis, eta: [&[f64]; 3]) -> Result<Vec<Mandel6>, RelaxationError> {
    for e in eta {
        basis.check(e.len())?;
    }
    let d = |i: usize, dir: DerivIndex| basis.synth(eta[i], dir);
    let (e11, e12) = (d(0, [1, 0]), d(0, [0, 1]));
    let (e21, e22) = (d(1, [1, 0]), d(1, [0, 1]));
    let (e31, e32) = (d(2, [1, 0]), d(2, [0, 1]));
    let h = SQRT_2 * 0.5;
    Ok((0..basis.points())
        .map(|g| Mandel6::new(e11[g], e22[g], 0.0, h * e32[g], h * e31[g], h * (e12[g] + e21[g])))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mandel::{embed_tangential, quad};
    use crate::material::Material;
    use crate::CellPoint;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn flat_frame() -> Frame {
        crate::build_surface("flat:Lx=1,Ly=1", [2, 2]).unwrap().frame_at([0.5, 0.5]).unwrap()
    }

    fn relaxed(mu: f64, la: f64) -> Stiffness3 {
        let m = Material::svk(&mu.to_string(), &la.to_string()).unwrap();
        let q = crate::material::extract_q(&m, &CellPoint::default()).unwrap();
        let q = QuadraticDensity { matrix: q.analytic.unwrap().0, ..q };
        relax_normal(&q, &flat_frame()).unwrap().matrix
    }

    #[test]
    fn isotropic_relaxation_examples() {
        let m = relaxed(1.0, 1.0);
        let i2 = Mandel3::new(1.0, 1.0, 0.0);
        assert!((quad(&m, &i2) - 10.0 / 3.0).abs() < 1e-13);
        let m0 = relaxed(1.0, 0.0);
        assert!((quad(&m0, &Mandel3::new(0.0, 0.0, SQRT_2)) - 2.0).abs() < 1e-13);
        assert_eq!(quad(&m0, &Mandel3::zeros()), 0.0);
    }

    #[test]
    fn relaxation_never_increases() {
        let m = Material::svk("1.3", "0.7").unwrap();
        let c = m.stiffness(&CellPoint::default()).unwrap();
        let r = relax_normal_matrix(&c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let v = Mandel3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            assert!(quad(&r, &v) <= quad(&c, &embed_tangential(&v)) + 1e-14);
        }
    }

    #[test]
    fn singular_normal_block() {
        let c = Stiffness6::identity() - Stiffness6::from_diagonal(&Mandel6::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0));
        assert_eq!(relax_normal_matrix(&c), Err(RelaxationError::SingularNormalBlock));
    }

    #[test]
    fn single_mode_derivatives() {
        let b = TrigBasis::new(2);
        // ζ₁ = sin(2πy₁)/(2π) is √2 sin / (2π√2) on mode (1, 0)
        let m = b.modes().iter().position(|k| *k == [1, 0]).unwrap();
        let mut z1 = vec![0.0; b.len()];
        z1[2 * m + 1] = 1.0 / (2.0 * PI * SQRT_2);
        let z2 = vec![0.0; b.len()];
        let f = apply_def_y(&b, [&z1, &z2]).unwrap();
        for (g, v) in f.iter().enumerate() {
            let y = b.point(g);
            assert!((v[0] - (2.0 * PI * y[0]).cos()).abs() < 1e-13);
            assert!(v[1].abs() < 1e-13 && v[2].abs() < 1e-13);
        }
        let mut phi = vec![0.0; b.len()];
        phi[2 * m] = 1.0 / ((2.0 * PI).powi(2) * SQRT_2);
        let h = apply_hess_y(&b, &phi).unwrap();
        for (g, v) in h.iter().enumerate() {
            let y = b.point(g);
            assert!((v[0] + (2.0 * PI * y[0]).cos()).abs() < 1e-13);
        }
    }

    #[test]
    fn adjoint_is_transpose() {
        let b = TrigBasis::with_grid(3, 11).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a: Vec<f64> = (0..b.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r: Vec<f64> = (0..b.points()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for d in [[0, 0], [1, 0], [0, 1], [1, 1], [2, 0]] {
            let f = b.synth(&a, d);
            let lhs: f64 = f.iter().zip(&r).map(|(x, y)| x * y).sum();
            let mut g = vec![0.0; b.len()];
            b.adjoint_add(&r, d, &mut g);
            let rhs: f64 = g.iter().zip(&a).map(|(x, y)| x * y).sum();
            assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()), "{d:?}");
        }
    }

    #[test]
    fn parseval_in_band() {
        let b = TrigBasis::new(3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a: Vec<f64> = (0..b.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for d in [[0, 0], [1, 0], [1, 1]] {
            let f = b.synth(&a, d);
            let grid = grid_norm2(&[&f]);
            let spec = b.spectral_norm2(&a, d);
            assert!((grid - spec).abs() < 1e-10 * spec, "{d:?}");
        }
    }

    #[test]
    fn coarse_grid_is_rejected() {
        assert!(TrigBasis::with_grid(4, 8).is_err());
        assert!(TrigBasis::with_grid(4, 9).is_ok());
    }
}
