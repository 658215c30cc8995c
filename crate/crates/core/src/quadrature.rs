//! Gauss–Legendre rules and Legendre polynomials.

use std::f64::consts::PI;

/// A one-dimensional quadrature rule.
#[derive(Clone, Debug, PartialEq)]
pub struct Rule1d {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule1d {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Affinely maps the rule from `[-1, 1]` (or wherever it lives) onto `[a, b]`,
    /// assuming the current rule is on `[-1, 1]`.
    pub fn mapped(&self, a: f64, b: f64) -> Rule1d {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        Rule1d {
            nodes: self.nodes.iter().map(|x| mid + half * x).collect(),
            weights: self.weights.iter().map(|w| w * half).collect(),
        }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Legendre polynomial `P_n(x)` and its derivative, by the three-term recurrence.
pub fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = if (1.0 - x * x).abs() < 1e-300 {
        // endpoint limit P_n'(±1) = ±n(n+1)/2
        let s = if x > 0.0 || n % 2 == 1 { 1.0 } else { -1.0 };
        s * nf * (nf + 1.0) / 2.0
    } else {
        nf * (x * p1 - p0) / (x * x - 1.0)
    };
    (p1, dp)
}

/// `n`-point Gauss–Legendre rule on `[-1, 1]` (Newton iteration on `P_n`).
pub fn gauss_legendre(n: usize) -> Rule1d {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Rule1d { nodes, weights }
}

/// Gauss–Legendre rule on the thickness interval `I = (-1/2, 1/2)`.
pub fn thickness_rule(n: usize) -> Rule1d {
    gauss_legendre(n).mapped(-0.5, 0.5)
}

/// Legendre polynomials orthonormal on `I = (-1/2, 1/2)`:
/// `L_j(t) = sqrt(2j+1) P_j(2t)`. Returns `(value, d/dt)`.
pub fn thickness_legendre(j: usize, t: f64) -> (f64, f64) {
    let s = (2.0 * j as f64 + 1.0).sqrt();
    let (p, dp) = legendre(j, 2.0 * t);
    (s * p, 2.0 * s * dp)
}

/// Composite midpoint rule with `n` equal cells on `[a, b]`.
pub fn midpoint(n: usize, a: f64, b: f64) -> Rule1d {
    let h = (b - a) / n as f64;
    Rule1d {
        nodes: (0..n).map(|i| a + (i as f64 + 0.5) * h).collect(),
        weights: vec![h; n],
    }
}

/// Tensor-product rule over the rectangle `[a0,b0] x [a1,b1]`.
#[derive(Clone, Debug)]
pub struct Rule2d {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl Rule2d {
    pub fn tensor(r0: &Rule1d, r1: &Rule1d) -> Rule2d {
        let mut points = Vec::with_capacity(r0.len() * r1.len());
        let mut weights = Vec::with_capacity(r0.len() * r1.len());
        for (x, wx) in r0.nodes.iter().zip(&r0.weights) {
            for (y, wy) in r1.nodes.iter().zip(&r1.weights) {
                points.push([*x, *y]);
                weights.push(wx * wy);
            }
        }
        Rule2d { points, weights }
    }

    /// Polar rule on the disk of radius `r`: Gauss–Legendre in the radius
    /// (with the Jacobian folded into the weights), equispaced in the angle.
    pub fn disk(radial: usize, angular: usize, r: f64) -> Rule2d {
        let rr = gauss_legendre(radial).mapped(0.0, r);
        let dth = 2.0 * PI / angular as f64;
        let mut points = Vec::with_capacity(radial * angular);
        let mut weights = Vec::with_capacity(radial * angular);
        for (rho, w) in rr.nodes.iter().zip(&rr.weights) {
            for k in 0..angular {
                let th = (k as f64 + 0.5) * dth;
                points.push([rho * th.cos(), rho * th.sin()]);
                weights.push(w * rho * dth);
            }
        }
        Rule2d { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_to_degree_2n_minus_1() {
        for n in 1..12 {
            let r = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                let got = r.integrate(|x| x.powi(deg as i32));
                assert!((got - exact).abs() < 1e-13, "n={n} deg={deg}: {got} vs {exact}");
            }
        }
    }

    #[test]
    fn thickness_moments() {
        let r = thickness_rule(3);
        assert!((r.integrate(|_| 1.0) - 1.0).abs() < 1e-15);
        assert!(r.integrate(|t| t).abs() < 1e-15);
        assert!((r.integrate(|t| t * t) - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn thickness_legendre_is_orthonormal() {
        let r = thickness_rule(8);
        for i in 0..5 {
            for j in 0..5 {
                let ip = r.integrate(|t| thickness_legendre(i, t).0 * thickness_legendre(j, t).0);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((ip - want).abs() < 1e-13);
            }
        }
        // derivative against a central difference
        let (t, d) = (0.17, 1e-6);
        for j in 0..5 {
            let fd = (thickness_legendre(j, t + d).0 - thickness_legendre(j, t - d).0) / (2.0 * d);
            assert!((fd - thickness_legendre(j, t).1).abs() < 1e-7);
        }
    }

    #[test]
    fn disk_rule_area_and_moment() {
        let r = Rule2d::disk(6, 16, 0.7);
        let area: f64 = r.weights.iter().sum();
        assert!((area - PI * 0.49).abs() < 1e-12);
        let m2: f64 = r.points.iter().zip(&r.weights).map(|(p, w)| w * (p[0] * p[0] + p[1] * p[1])).sum();
        assert!((m2 - PI * 0.7f64.powi(4) / 2.0).abs() < 1e-12);
    }
}
