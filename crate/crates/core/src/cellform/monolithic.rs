//! All unknowns of a cell problem in one system, without the nested
//! eliminations. Used to check that the eliminations are exact.

use crate::cg::{self, CgSettings};
use crate::expr::CellPoint;
use crate::geometry::SurfacePatch;
use crate::mandel::{Mandel3, Stiffness6, SQRT_2, TANGENTIAL};
use crate::material::Material;
use crate::relaxation::coefficient_stiffness;

use super::engine::{Layout, StiffnessField, StrainMap};
use super::{eta_blocks, polarization_loads, polarize, regime_blocks, CellForm, CellFormError, Discretization, Regime, SolverRecord};

/// `μ` contributions `2μ_α τ^α ⊙ n + μ₃ n ⊙ n` as (slot, coefficient).
const MU: [(usize, f64); 3] = [(4, SQRT_2), (3, SQRT_2), (2, 1.0)];

struct System<'a> {
    macro_map: StrainMap<'a>,
    zmap: StrainMap<'a>,
    c: StiffnessField,
    weights: Vec<f64>,
    cells: usize,
    npy: usize,
    npz: usize,
    with_mu: bool,
}

impl System<'_> {
    fn n_macro(&self) -> usize {
        self.macro_map.ndof()
    }

    fn n_mu(&self) -> usize {
        if self.with_mu {
            3 * self.cells
        } else {
            0
        }
    }

    fn n_eta(&self) -> usize {
        self.zmap.ndof()
    }

    fn ndof(&self) -> usize {
        self.n_macro() + self.n_mu() + self.n_eta() * self.cells
    }

    fn scale(&self, p: usize) -> f64 {
        let cell = p / self.npz;
        self.weights[cell / self.npy] / (self.npy * self.npz) as f64
    }

    fn strain_add(&self, x: &[f64], out: &mut [f64]) {
        let macro_f = self.macro_map.apply(&x[..self.n_macro()]);
        let (mu0, eta0) = (self.n_macro(), self.n_macro() + self.n_mu());
        for c in 0..self.cells {
            let mut base = [0.0; 6];
            base.copy_from_slice(&macro_f[c * 6..c * 6 + 6]);
            if self.with_mu {
                for (k, (s, coef)) in MU.iter().enumerate() {
                    base[*s] += coef * x[mu0 + 3 * c + k];
                }
            }
            let ne = self.n_eta();
            let eta = self.zmap.apply(&x[eta0 + c * ne..eta0 + (c + 1) * ne]);
            for h in 0..self.npz {
                let o = (c * self.npz + h) * 6;
                for s in 0..6 {
                    out[o + s] += base[s] + eta[h * 6 + s];
                }
            }
        }
    }

    fn adjoint(&self, r: &[f64], grad: &mut [f64]) {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut macro_r = vec![0.0; self.cells * 6];
        let (mu0, eta0, ne) = (self.n_macro(), self.n_macro() + self.n_mu(), self.n_eta());
        for c in 0..self.cells {
            let slice = &r[c * self.npz * 6..(c + 1) * self.npz * 6];
            for h in 0..self.npz {
                for s in 0..6 {
                    macro_r[c * 6 + s] += slice[h * 6 + s];
                }
            }
            if self.with_mu {
                for (k, (s, coef)) in MU.iter().enumerate() {
                    grad[mu0 + 3 * c + k] += coef * macro_r[c * 6 + s];
                }
            }
            self.zmap.adjoint_add(slice, &mut grad[eta0 + c * ne..eta0 + (c + 1) * ne]);
        }
        self.macro_map.adjoint_add(&macro_r, &mut grad[..mu0]);
    }

    fn diagonal(&self) -> Vec<f64> {
        let (mu0, eta0, ne) = (self.n_macro(), self.n_macro() + self.n_mu(), self.n_eta());
        let nodes = self.weights.len();
        let per_node = self.c.node_averages(nodes, self.npy * self.npz);
        let mut diag = vec![0.0; self.ndof()];
        diag[..mu0].copy_from_slice(&self.macro_map.averaged_diagonal(&per_node, &self.weights));
        let per_cell = self.c.node_averages(self.cells, self.npz);
        for c in 0..self.cells {
            let w = self.weights[c / self.npy] / self.npy as f64;
            if self.with_mu {
                for (k, (s, coef)) in MU.iter().enumerate() {
                    diag[mu0 + 3 * c + k] = w * coef * coef * per_cell[c][s * 6 + s];
                }
            }
            let d = self.zmap.averaged_diagonal(&per_cell[c..c + 1], &[w]);
            diag[eta0 + c * ne..eta0 + (c + 1) * ne].copy_from_slice(&d);
        }
        diag
    }
}

/// Cell form from one monolithic system over `(t, y, z)`.
pub fn monolithic_form(
    x: [f64; 2],
    surface: &SurfacePatch,
    material: &Material,
    regime: Regime,
    disc: Discretization,
    settings: CgSettings,
) -> Result<CellForm, CellFormError> {
    let frame = surface.frame_at(x)?;
    let ybasis = disc.y_basis()?;
    let zbasis = disc.z_basis()?;
    let rule = disc.t_rule();
    let (npy, npz) = (ybasis.points(), zbasis.points());
    let mut samples: Vec<Stiffness6> = Vec::with_capacity(rule.len() * npy * npz);
    for &t in &rule.nodes {
        for g in 0..npy {
            for h in 0..npz {
                let pt = CellPoint::new(x, ybasis.point(g), zbasis.point(h), t);
                samples.push(coefficient_stiffness(&material.stiffness(&pt)?, &frame));
            }
        }
    }
    let sys = System {
        macro_map: StrainMap::new(&ybasis, rule.nodes.clone(), Layout::Full, regime_blocks(regime, &rule.nodes, disc.nt)),
        zmap: StrainMap::new(&zbasis, vec![0.0], Layout::Full, eta_blocks()),
        c: StiffnessField::from_full(&samples),
        weights: rule.weights.clone(),
        cells: rule.len() * npy,
        npy,
        npz,
        with_mu: regime == Regime::Zero,
    };
    let n_field = sys.cells * npz * 6;
    let diag = sys.diagonal();
    let mut values = [0.0; 6];
    let mut p_star = [Mandel3::zeros(); 6];
    let mut iterations = [0; 6];
    let (mut residual, mut gap) = (0.0f64, 0.0f64);
    for (k, q) in polarization_loads().iter().enumerate() {
        let mut f0 = vec![0.0; n_field];
        for c in 0..sys.cells {
            let t = rule.nodes[c / npy];
            for h in 0..npz {
                for (j, &s) in TANGENTIAL.iter().enumerate() {
                    f0[(c * npz + h) * 6 + s] = t * q[j];
                }
            }
        }
        let mut stress = vec![0.0; n_field];
        sys.c.apply_weighted(&f0, |p| sys.scale(p), &mut stress);
        let mut b = vec![0.0; sys.ndof()];
        sys.adjoint(&stress, &mut b);
        b.iter_mut().for_each(|v| *v = -*v);
        let res = cg::solve(
            |v, out| {
                let mut f = vec![0.0; n_field];
                sys.strain_add(v, &mut f);
                let mut s = vec![0.0; n_field];
                sys.c.apply_weighted(&f, |p| sys.scale(p), &mut s);
                sys.adjoint(&s, out);
            },
            &b,
            &diag,
            settings,
        )
        .map_err(|source| CellFormError::Solver { load: k, source })?;
        let mut f = f0;
        sys.strain_add(&res.x, &mut f);
        let mut s = vec![0.0; n_field];
        sys.c.apply_weighted(&f, |p| sys.scale(p), &mut s);
        values[k] = f.iter().zip(&s).map(|(a, b)| a * b).sum();
        for (j, name) in ["p11", "p22", "p12"].iter().enumerate() {
            let r = sys.macro_map.range(sys.macro_map.block_index(name).unwrap());
            p_star[k][j] = res.x[r.start];
        }
        iterations[k] = res.iterations;
        residual = residual.max(res.residual);
        gap = gap.max(res.residual_abs * res.x.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    Ok(CellForm {
        x,
        regime,
        matrix: polarize(&values),
        values,
        p_star,
        discretization: disc,
        t_nodes: rule.nodes.clone(),
        solver: SolverRecord { iterations, residual, gap, z_cells: 0 },
    })
}
