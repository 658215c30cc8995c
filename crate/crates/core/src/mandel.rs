//! Mandel coordinates for symmetric tensors.
//!
//! A symmetric 3x3 tensor `A` is stored as the 6-vector
//!
//! ```text
//! (A11, A22, A33, √2 A23, √2 A13, √2 A12)
//! ```
//!
//! and a symmetric 2x2 tangential tensor as `(A11, A22, √2 A12)`. With this
//! scaling the Frobenius product of tensors is the Euclidean product of their
//! Mandel vectors, so orthogonal changes of frame act by orthogonal 6x6
//! (resp. 3x3) matrices.
//!
//! Tensors on a surface are expressed in the frame `(τ¹, τ², n)`:
//! `A = Σ A_ij τⁱ ⊗ τʲ` with `τ³ = n`. The first three Mandel slots 0, 1, 5
//! are the tangential block; slots 2, 3, 4 are the normal/shear directions.

use nalgebra::{Matrix2, Matrix3, Matrix6, SMatrix, SVector, Vector3, Vector6};

pub const SQRT_2: f64 = std::f64::consts::SQRT_2;

pub type Mandel6 = Vector6<f64>;
pub type Mandel3 = Vector3<f64>;
pub type Stiffness6 = Matrix6<f64>;
pub type Stiffness3 = Matrix3<f64>;

/// Mandel slots of the tangential block, in `(11, 22, 12)` order.
pub const TANGENTIAL: [usize; 3] = [0, 1, 5];
/// Mandel slots of the normal directions `(33, 23, 13)`.
pub const NORMAL: [usize; 3] = [2, 3, 4];

const PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)];

pub fn to_mandel6(a: &Matrix3<f64>) -> Mandel6 {
    let s = 0.5 * (a + a.transpose());
    Vector6::new(
        s[(0, 0)],
        s[(1, 1)],
        s[(2, 2)],
        SQRT_2 * s[(1, 2)],
        SQRT_2 * s[(0, 2)],
        SQRT_2 * s[(0, 1)],
    )
}

pub fn from_mandel6(v: &Mandel6) -> Matrix3<f64> {
    let r = 1.0 / SQRT_2;
    Matrix3::new(
        v[0],
        r * v[5],
        r * v[4],
        r * v[5],
        v[1],
        r * v[3],
        r * v[4],
        r * v[3],
        v[2],
    )
}

pub fn to_mandel3(a: &Matrix2<f64>) -> Mandel3 {
    Vector3::new(a[(0, 0)], a[(1, 1)], SQRT_2 * 0.5 * (a[(0, 1)] + a[(1, 0)]))
}

pub fn from_mandel3(v: &Mandel3) -> Matrix2<f64> {
    let off = v[2] / SQRT_2;
    Matrix2::new(v[0], off, off, v[1])
}

/// Embeds a tangential Mandel 3-vector into the 6-slot layout.
pub fn embed_tangential(v: &Mandel3) -> Mandel6 {
    let mut out = Mandel6::zeros();
    for (k, &slot) in TANGENTIAL.iter().enumerate() {
        out[slot] = v[k];
    }
    out
}

/// The `k`-th orthonormal Mandel basis tensor.
pub fn basis6(k: usize) -> Matrix3<f64> {
    let mut v = Mandel6::zeros();
    v[k] = 1.0;
    from_mandel6(&v)
}

/// Matrix of the linear map `A ↦ T A Tᵀ` on symmetric tensors, in Mandel
/// coordinates. For orthogonal `T` the result is orthogonal.
pub fn congruence(t: &Matrix3<f64>) -> Stiffness6 {
    let mut out = Stiffness6::zeros();
    for j in 0..6 {
        let col = to_mandel6(&(t * basis6(j) * t.transpose()));
        out.set_column(j, &col);
    }
    out
}

/// Frobenius product through Mandel vectors; tested against the tensor form.
pub fn ddot(a: &Mandel6, b: &Mandel6) -> f64 {
    a.dot(b)
}

/// Index pair `(i, j)` with `i <= j` carried by Mandel slot `k`.
pub fn slot_pair(k: usize) -> (usize, usize) {
    PAIRS[k]
}

/// Schur complement of a symmetric matrix onto the `keep` slots, eliminating
/// the remaining ones. Returns `None` if the eliminated block is singular.
pub fn schur_complement<const N: usize, const K: usize, const E: usize>(
    m: &SMatrix<f64, N, N>,
    keep: [usize; K],
    elim: [usize; E],
) -> Option<SMatrix<f64, K, K>> {
    let mut kk = SMatrix::<f64, K, K>::zeros();
    let mut ke = SMatrix::<f64, K, E>::zeros();
    let mut ee = SMatrix::<f64, E, E>::zeros();
    for (a, &i) in keep.iter().enumerate() {
        for (b, &j) in keep.iter().enumerate() {
            kk[(a, b)] = m[(i, j)];
        }
        for (b, &j) in elim.iter().enumerate() {
            ke[(a, b)] = m[(i, j)];
        }
    }
    for (a, &i) in elim.iter().enumerate() {
        for (b, &j) in elim.iter().enumerate() {
            ee[(a, b)] = m[(i, j)];
        }
    }
    let chol = ee.cholesky()?;
    let x = chol.solve(&ke.transpose());
    let s = kk - ke * x;
    Some(0.5 * (s + s.transpose()))
}

/// Quadratic form `vᵀ M v`.
pub fn quad<const N: usize>(m: &SMatrix<f64, N, N>, v: &SVector<f64, N>) -> f64 {
    (v.transpose() * m * v)[(0, 0)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;

    #[test]
    fn round_trip_and_frobenius() {
        let a = Matrix3::new(1.0, 2.0, 3.0, 2.0, -1.0, 0.5, 3.0, 0.5, 4.0);
        let v = to_mandel6(&a);
        assert!((from_mandel6(&v) - a).norm() < 1e-15);
        let b = Matrix3::new(0.3, -1.0, 2.0, -1.0, 0.7, 1.5, 2.0, 1.5, -2.0);
        assert!((ddot(&v, &to_mandel6(&b)) - a.component_mul(&b).sum()).abs() < 1e-13);
        let q = Matrix2::new(1.0, 0.25, 0.25, -2.0);
        assert!((from_mandel3(&to_mandel3(&q)) - q).norm() < 1e-15);
    }

    #[test]
    fn skew_part_is_dropped() {
        let k = Matrix3::new(0.0, 1.0, -2.0, -1.0, 0.0, 3.0, 2.0, -3.0, 0.0);
        assert!(to_mandel6(&k).norm() < 1e-15);
    }

    #[test]
    fn rotations_act_orthogonally() {
        let r = Rotation3::from_euler_angles(0.3, -0.7, 1.1).into_inner();
        let p = congruence(&r);
        assert!((p.transpose() * p - Stiffness6::identity()).norm() < 1e-13);
    }

    #[test]
    fn schur_matches_direct_minimization() {
        // 2x2 example: min_y [x y] M [x y]^T = (m00 - m01^2/m11) x^2
        let m = nalgebra::Matrix2::new(3.0, 1.0, 1.0, 2.0);
        let s = schur_complement(&m, [0], [1]).unwrap();
        assert!((s[(0, 0)] - 2.5).abs() < 1e-15);
    }
}
