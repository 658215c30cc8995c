//! Effective bending forms from the cell problems.
//!
//! For a point `x` of the mid-surface and `q ∈ Sym(2)` the cell value is
//! `inf ∫_I ∫_𝒴 ∫_𝒴 𝒬(x + t n, y, z, p + t q + U) dz dy dt` over `p ∈ Sym(2)`
//! and the relaxation fields `U` of the regime. The infimum is computed by
//! nesting exact eliminations:
//!
//! 1. the `η` fields only enter through `z`-derivatives, so each
//!    `(t, y)` quadrature node carries an independent `z`-cell problem whose
//!    value map is a homogenized `6 × 6` matrix;
//! 2. for `γ₁ = 0` the shear/normal multiplier `μ` is pointwise, leaving the
//!    normal relaxation of that matrix;
//! 3. the remaining coupled problem is solved by preconditioned conjugate
//!    gradients, once per polarization load.
//!
//! Matrices are reported in tangential Mandel coordinates
//! `(q₁₁, q₂₂, √2 q₁₂)` of `q = q_αβ τ^α ⊗ τ^β`.

pub mod engine;
mod monolithic;

use std::collections::HashMap;
use std::fmt;

use nalgebra::Matrix2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cg::{self, CgError, CgSettings};
use crate::expr::CellPoint;
use crate::geometry::{Frame, GeometryError, SurfacePatch};
use crate::mandel::{to_mandel3, Mandel3, Stiffness3, Stiffness6, SQRT_2, TANGENTIAL};
use crate::material::{Material, MaterialError};
use crate::quadrature::{thickness_legendre, thickness_rule, Rule1d};
use crate::relaxation::{coefficient_stiffness, relax_normal_matrix, RelaxationError, TrigBasis};

use engine::{Block, Contrib, Layout, StiffnessField, StrainMap, TMode, YKind};

pub use monolithic::monolithic_form;

const H: f64 = SQRT_2 * 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CellFormError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error(transparent)]
    Relaxation(#[from] RelaxationError),
    #[error("load {load}: {source}")]
    Solver { load: usize, source: CgError },
    #[error("z-cell problem: {0}")]
    ZCell(CgError),
    #[error("material depends on the thickness variable; the thickness-homogeneous formula does not apply")]
    MaterialNotThicknessHomogeneous,
    #[error("gamma1 must be positive and finite, got {0}")]
    InvalidGamma(f64),
    #[error("sweep grid must be sorted, positive and finite")]
    InvalidGrid,
    #[error("sweep point gamma1 = {gamma1}: {source}")]
    Sweep { gamma1: String, source: Box<CellFormError> },
}

/// Ratio `γ₁ = lim h/ε` of the thickness to the coarse period.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Regime {
    Zero,
    Finite(f64),
    Infinite,
}

impl Regime {
    pub fn finite(gamma1: f64) -> Result<Regime, CellFormError> {
        if gamma1 > 0.0 && gamma1.is_finite() {
            Ok(Regime::Finite(gamma1))
        } else {
            Err(CellFormError::InvalidGamma(gamma1))
        }
    }

    /// `0`, `inf` or a positive number.
    pub fn parse(s: &str) -> Result<Regime, CellFormError> {
        let s = s.trim();
        match s {
            "inf" | "infinity" | "+inf" => return Ok(Regime::Infinite),
            _ => {}
        }
        let v: f64 = s.parse().map_err(|_| CellFormError::InvalidGamma(f64::NAN))?;
        if v == 0.0 {
            Ok(Regime::Zero)
        } else if v.is_infinite() && v > 0.0 {
            Ok(Regime::Infinite)
        } else {
            Regime::finite(v)
        }
    }

    pub fn gamma1(self) -> f64 {
        match self {
            Regime::Zero => 0.0,
            Regime::Finite(g) => g,
            Regime::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regime::Zero => write!(f, "0"),
            Regime::Finite(g) => write!(f, "{g}"),
            Regime::Infinite => write!(f, "inf"),
        }
    }
}

/// Mode counts per axis and optional sampling-grid overrides.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discretization {
    pub ny: usize,
    pub nz: usize,
    pub nt: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_y: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_z: Option<usize>,
}

impl Default for Discretization {
    fn default() -> Self {
        Discretization { ny: 2, nz: 2, nt: 2, grid_y: None, grid_z: None }
    }
}

impl Discretization {
    pub fn new(ny: usize, nz: usize, nt: usize) -> Discretization {
        Discretization { ny, nz, nt, grid_y: None, grid_z: None }
    }

    pub fn with_grids(mut self, grid_y: Option<usize>, grid_z: Option<usize>) -> Discretization {
        self.grid_y = grid_y;
        self.grid_z = grid_z;
        self
    }

    pub fn y_basis(&self) -> Result<TrigBasis, RelaxationError> {
        TrigBasis::with_grid(self.ny, self.grid_y.unwrap_or(2 * (2 * self.ny + 1)))
    }

    pub fn z_basis(&self) -> Result<TrigBasis, RelaxationError> {
        TrigBasis::with_grid(self.nz, self.grid_z.unwrap_or(2 * (2 * self.nz + 1)))
    }

    pub fn t_rule(&self) -> Rule1d {
        thickness_rule(self.nt + 1)
    }
}

/// The six polarization loads `e₁, e₂, e₃, e₁+e₂, e₁+e₃, e₂+e₃`.
pub fn polarization_loads() -> [Mandel3; 6] {
    [
        Mandel3::new(1.0, 0.0, 0.0),
        Mandel3::new(0.0, 1.0, 0.0),
        Mandel3::new(0.0, 0.0, 1.0),
        Mandel3::new(1.0, 1.0, 0.0),
        Mandel3::new(1.0, 0.0, 1.0),
        Mandel3::new(0.0, 1.0, 1.0),
    ]
}

/// Symmetric matrix from the six polarization values.
pub fn polarize(v: &[f64; 6]) -> Stiffness3 {
    let mut m = Stiffness3::from_diagonal(&Mandel3::new(v[0], v[1], v[2]));
    for (k, (a, b)) in [(0, 1), (0, 2), (1, 2)].into_iter().enumerate() {
        let off = 0.5 * (v[3 + k] - v[a] - v[b]);
        m[(a, b)] = off;
        m[(b, a)] = off;
    }
    m
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverRecord {
    pub iterations: [usize; 6],
    /// Largest relative residual over the loads.
    pub residual: f64,
    /// Largest duality-gap estimate `‖residual‖ · ‖solution‖`.
    pub gap: f64,
    /// Number of distinct `z`-cell problems solved.
    pub z_cells: usize,
}

/// The effective form `Q(x, q) = v(q)ᵀ M v(q)` at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct CellForm {
    pub x: [f64; 2],
    pub regime: Regime,
    pub matrix: Stiffness3,
    /// Cell value per polarization load.
    pub values: [f64; 6],
    /// Optimal offset `p` per load.
    pub p_star: [Mandel3; 6],
    pub discretization: Discretization,
    pub t_nodes: Vec<f64>,
    pub solver: SolverRecord,
}

impl CellForm {
    pub fn eval(&self, v: &Mandel3) -> f64 {
        (v.transpose() * self.matrix * v)[(0, 0)]
    }

    /// Value on a possibly non-symmetric coefficient matrix.
    pub fn eval_tensor(&self, q: &Matrix2<f64>) -> f64 {
        self.eval(&to_mandel3(&(0.5 * (q + q.transpose()))))
    }

    pub fn eigenvalues(&self) -> [f64; 3] {
        let e = nalgebra::SymmetricEigen::new(self.matrix).eigenvalues;
        let mut v = [e[0], e[1], e[2]];
        v.sort_by(|a, b| a.total_cmp(b));
        v
    }
}

/// Solution of one quadratic minimization `min Σ w (f₀ + Dx)ᵀ C (f₀ + Dx)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Minimizer {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub residual: f64,
    pub gap: f64,
}

pub(crate) fn minimize(
    map: &StrainMap<'_>,
    c: &StiffnessField,
    weights: &[f64],
    f0: &[f64],
    settings: CgSettings,
) -> Result<Minimizer, CgError> {
    let np = map.points();
    let scale = |p: usize| weights[p / np] / np as f64;
    let mut stress = vec![0.0; f0.len()];
    c.apply_weighted(f0, scale, &mut stress);
    let mut b = vec![0.0; map.ndof()];
    map.adjoint_add(&stress, &mut b);
    b.iter_mut().for_each(|v| *v = -*v);
    let cbar = c.node_averages(weights.len(), np);
    let diag = map.averaged_diagonal(&cbar, weights);
    let res = cg::solve(
        |v, out| {
            let f = map.apply(v);
            let mut s = vec![0.0; f.len()];
            c.apply_weighted(&f, scale, &mut s);
            out.iter_mut().for_each(|o| *o = 0.0);
            map.adjoint_add(&s, out);
        },
        &b,
        &diag,
        settings,
    )?;
    let mut strain = f0.to_vec();
    map.apply_add(&res.x, &mut strain);
    let mut s = vec![0.0; strain.len()];
    c.apply_weighted(&strain, scale, &mut s);
    let value = strain.iter().zip(&s).map(|(a, b)| a * b).sum();
    let xn = res.x.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(Minimizer { value, iterations: res.iterations, residual: res.residual, gap: res.residual_abs * xn, x: res.x })
}

fn unit_t(nodes: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    (vec![vec![1.0; nodes]], vec![vec![0.0; nodes]])
}

fn trig(name: &'static str, tv: Vec<Vec<f64>>, td: Vec<Vec<f64>>, contribs: Vec<Contrib>) -> Block {
    Block { name, y: YKind::Trig, tv, td, contribs }
}

fn constant(name: &'static str, tv: Vec<Vec<f64>>, td: Vec<Vec<f64>>, contribs: Vec<Contrib>) -> Block {
    Block { name, y: YKind::Const, tv, td, contribs }
}

fn v(slot: usize, coef: f64, dy: [u8; 2]) -> Contrib {
    Contrib::new(slot, coef, dy, TMode::Value)
}

fn deriv(slot: usize, coef: f64) -> Contrib {
    Contrib::new(slot, coef, [0, 0], TMode::Deriv)
}

/// `Def ζ` contributions of the two in-plane components.
fn def_contribs() -> [Vec<Contrib>; 2] {
    [vec![v(0, 1.0, [1, 0]), v(5, H, [0, 1])], vec![v(1, 1.0, [0, 1]), v(5, H, [1, 0])]]
}

fn offset_blocks(nodes: usize) -> Vec<Block> {
    let (tv, td) = unit_t(nodes);
    TANGENTIAL
        .iter()
        .zip(["p11", "p22", "p12"])
        .map(|(&s, name)| constant(name, tv.clone(), td.clone(), vec![v(s, 1.0, [0, 0])]))
        .collect()
}

/// Unknown blocks of a regime at the given thickness nodes. Slots are
/// 6-slot Mandel indices.
pub(crate) fn regime_blocks(regime: Regime, nodes: &[f64], nt: usize) -> Vec<Block> {
    let n = nodes.len();
    let [d1, d2] = def_contribs();
    let mut blocks = Vec::new();
    match regime {
        Regime::Zero => {
            let (tv, td) = unit_t(n);
            blocks.push(trig("zeta1", tv.clone(), td.clone(), d1));
            blocks.push(trig("zeta2", tv.clone(), td.clone(), d2));
            blocks.push(trig(
                "phi",
                tv,
                td,
                vec![
                    Contrib::new(0, -1.0, [2, 0], TMode::TimesT),
                    Contrib::new(1, -1.0, [0, 2], TMode::TimesT),
                    Contrib::new(5, -SQRT_2, [1, 1], TMode::TimesT),
                ],
            ));
        }
        Regime::Finite(g) => {
            let leg = |j: usize| -> (Vec<f64>, Vec<f64>) {
                nodes.iter().map(|&t| thickness_legendre(j, t)).unzip()
            };
            let (mut tv, mut td) = (Vec::new(), Vec::new());
            for j in 0..=nt {
                let (a, b) = leg(j);
                tv.push(a);
                td.push(b);
            }
            let (tv1, td1) = (tv[1..].to_vec(), td[1..].to_vec());
            let mut z1 = d1;
            z1.push(deriv(4, H / g));
            let mut z2 = d2;
            z2.push(deriv(3, H / g));
            let rho = vec![v(4, H, [1, 0]), v(3, H, [0, 1]), deriv(2, 1.0 / g)];
            blocks.push(trig("zeta1", tv.clone(), td.clone(), z1));
            blocks.push(trig("zeta2", tv.clone(), td.clone(), z2));
            blocks.push(trig("rho", tv, td, rho));
            if nt >= 1 {
                blocks.push(constant("zeta1_t", tv1.clone(), td1.clone(), vec![deriv(4, H / g)]));
                blocks.push(constant("zeta2_t", tv1.clone(), td1.clone(), vec![deriv(3, H / g)]));
                blocks.push(constant("rho_t", tv1, td1, vec![deriv(2, 1.0 / g)]));
            }
        }
        Regime::Infinite => {
            let tv: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect()).collect();
            let td = vec![vec![0.0; n]; n];
            blocks.push(trig("zeta1", tv.clone(), td.clone(), d1));
            blocks.push(trig("zeta2", tv.clone(), td.clone(), d2));
            blocks.push(trig("rho", tv.clone(), td.clone(), vec![v(4, SQRT_2, [1, 0]), v(3, SQRT_2, [0, 1])]));
            blocks.push(constant("c1", tv.clone(), td.clone(), vec![v(4, SQRT_2, [0, 0])]));
            blocks.push(constant("c2", tv.clone(), td.clone(), vec![v(3, SQRT_2, [0, 0])]));
            blocks.push(constant("c3", tv, td, vec![v(2, 1.0, [0, 0])]));
        }
    }
    blocks.extend(offset_blocks(n));
    blocks
}

/// `η` blocks on the `z`-cell: `(sym ∇_z η | 0)`.
pub(crate) fn eta_blocks() -> Vec<Block> {
    let (tv, td) = unit_t(1);
    let [d1, d2] = def_contribs();
    vec![
        trig("eta1", tv.clone(), td.clone(), d1),
        trig("eta2", tv.clone(), td.clone(), d2),
        trig("eta3", tv, td, vec![v(4, H, [1, 0]), v(3, H, [0, 1])]),
    ]
}

/// Result of one `z`-cell homogenization.
#[derive(Clone, Debug, PartialEq)]
pub struct ZCell {
    pub matrix: Stiffness6,
    /// Largest coefficient norm of the `η` minimizers over the six unit loads.
    pub eta_norm: f64,
    pub iterations: usize,
}

/// Homogenizes a `z`-sampled coefficient-frame stiffness over the `η`
/// fields: `C_hom e·e = min_η ⟨C (e + Def_𝒵 η), e + Def_𝒵 η⟩`.
pub fn homogenize_z(basis: &TrigBasis, samples: &[Stiffness6], settings: CgSettings) -> Result<ZCell, CgError> {
    let map = StrainMap::new(basis, vec![0.0], Layout::Full, eta_blocks());
    let field = StiffnessField::from_full(samples);
    let np = basis.points();
    let mut strains = Vec::with_capacity(6);
    let (mut eta_norm, mut iterations) = (0.0f64, 0);
    for k in 0..6 {
        let mut f0 = vec![0.0; np * 6];
        for g in 0..np {
            f0[g * 6 + k] = 1.0;
        }
        let m = minimize(&map, &field, &[1.0], &f0, settings)?;
        eta_norm = eta_norm.max(m.x.iter().map(|v| v * v).sum::<f64>().sqrt());
        iterations += m.iterations;
        let mut s = f0;
        map.apply_add(&m.x, &mut s);
        strains.push(s);
    }
    let mut out = Stiffness6::zeros();
    for k in 0..6 {
        let mut cs = vec![0.0; np * 6];
        field.apply_weighted(&strains[k], |_| 1.0 / np as f64, &mut cs);
        for l in 0..6 {
            out[(k, l)] = cs.iter().zip(&strains[l]).map(|(a, b)| a * b).sum();
        }
    }
    Ok(ZCell { matrix: 0.5 * (out + out.transpose()), eta_norm, iterations })
}

/// Sampled and `z`-homogenized coefficient-frame stiffness at one point of
/// the mid-surface, shared by all regimes.
pub struct CellProblem<'a> {
    material: &'a Material,
    frame: Frame,
    x: [f64; 2],
    disc: Discretization,
    ybasis: TrigBasis,
    zbasis: TrigBasis,
    rule: Rule1d,
    settings: CgSettings,
    /// `C(t_i, y_g)` at `[i * points + g]`.
    field: Vec<Stiffness6>,
    z_cells: usize,
}

impl<'a> CellProblem<'a> {
    pub fn new(
        x: [f64; 2],
        surface: &SurfacePatch,
        material: &'a Material,
        disc: Discretization,
    ) -> Result<CellProblem<'a>, CellFormError> {
        Self::with_settings(x, surface, material, disc, CgSettings::default())
    }

    pub fn with_settings(
        x: [f64; 2],
        surface: &SurfacePatch,
        material: &'a Material,
        disc: Discretization,
        settings: CgSettings,
    ) -> Result<CellProblem<'a>, CellFormError> {
        let frame = surface.frame_at(x)?;
        let ybasis = disc.y_basis()?;
        let zbasis = disc.z_basis()?;
        let rule = disc.t_rule();
        let (field, z_cells) = sample_field(material, &frame, x, &rule.nodes, &ybasis, &zbasis, settings)?;
        Ok(CellProblem { material, frame, x, disc, ybasis, zbasis, rule, settings, field, z_cells })
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn discretization(&self) -> Discretization {
        self.disc
    }

    pub fn material(&self) -> &Material {
        self.material
    }

    pub fn y_basis(&self) -> &TrigBasis {
        &self.ybasis
    }

    pub fn z_basis(&self) -> &TrigBasis {
        &self.zbasis
    }

    pub fn rule(&self) -> &Rule1d {
        &self.rule
    }

    pub fn settings(&self) -> CgSettings {
        self.settings
    }

    /// The `z`-homogenized field `C(t_i, y_g)` at `[i * points + g]`.
    pub fn homogenized_field(&self) -> &[Stiffness6] {
        &self.field
    }

    fn map(&self, regime: Regime) -> (StrainMap<'_>, StiffnessField) {
        let blocks = regime_blocks(regime, &self.rule.nodes, self.disc.nt);
        match regime {
            Regime::Zero => {
                let relaxed: Vec<Stiffness3> =
                    self.field.iter().map(|c| relax_normal_matrix(c).expect("checked when sampling")).collect();
                (
                    StrainMap::new(&self.ybasis, self.rule.nodes.clone(), Layout::Tangential, blocks),
                    StiffnessField::from_tangential(&relaxed),
                )
            }
            _ => (
                StrainMap::new(&self.ybasis, self.rule.nodes.clone(), Layout::Full, blocks),
                StiffnessField::from_full(&self.field),
            ),
        }
    }

    fn load_field(&self, map: &StrainMap<'_>, q: &Mandel3) -> Vec<f64> {
        let (np, w) = (map.points(), map.width());
        let layout = if w == 6 { Layout::Full } else { Layout::Tangential };
        let mut f0 = vec![0.0; map.field_len()];
        for (i, &t) in map.nodes().iter().enumerate() {
            for g in 0..np {
                for (k, &s) in TANGENTIAL.iter().enumerate() {
                    let pos = layout.position(s).unwrap();
                    f0[(i * np + g) * w + pos] = t * q[k];
                }
            }
        }
        f0
    }

    /// Cell value for one load, with the optimal offset.
    pub fn solve_load(&self, regime: Regime, q: &Mandel3) -> Result<(Minimizer, Mandel3), CgError> {
        let (map, field) = self.map(regime);
        let f0 = self.load_field(&map, q);
        let m = minimize(&map, &field, &self.rule.weights, &f0, self.settings)?;
        let mut p = Mandel3::zeros();
        for (k, name) in ["p11", "p22", "p12"].iter().enumerate() {
            let r = map.range(map.block_index(name).unwrap());
            p[k] = m.x[r.start];
        }
        Ok((m, p))
    }

    /// Solves the six polarization loads.
    pub fn solve(&self, regime: Regime) -> Result<CellForm, CellFormError> {
        if let Regime::Finite(g) = regime {
            Regime::finite(g)?;
        }
        let loads = polarization_loads();
        let sols: Vec<Result<(Minimizer, Mandel3), CellFormError>> = loads
            .par_iter()
            .enumerate()
            .map(|(k, q)| self.solve_load(regime, q).map_err(|source| CellFormError::Solver { load: k, source }))
            .collect();
        let mut values = [0.0; 6];
        let mut p_star = [Mandel3::zeros(); 6];
        let mut iterations = [0; 6];
        let (mut residual, mut gap) = (0.0f64, 0.0f64);
        for (k, s) in sols.into_iter().enumerate() {
            let (m, p) = s?;
            values[k] = m.value;
            p_star[k] = p;
            iterations[k] = m.iterations;
            residual = residual.max(m.residual);
            gap = gap.max(m.gap);
        }
        Ok(CellForm {
            x: self.x,
            regime,
            matrix: polarize(&values),
            values,
            p_star,
            discretization: self.disc,
            t_nodes: self.rule.nodes.clone(),
            solver: SolverRecord { iterations, residual, gap, z_cells: self.z_cells },
        })
    }
}

fn sample_point(material: &Material, frame: &Frame, pt: &CellPoint) -> Result<Stiffness6, CellFormError> {
    Ok(coefficient_stiffness(&material.stiffness(pt)?, frame))
}

type FieldSample = (Vec<Stiffness6>, usize);

fn sample_field(
    material: &Material,
    frame: &Frame,
    x: [f64; 2],
    nodes: &[f64],
    ybasis: &TrigBasis,
    zbasis: &TrigBasis,
    settings: CgSettings,
) -> Result<FieldSample, CellFormError> {
    let np = ybasis.points();
    let (uses_t, uses_y, uses_z) = (material.depends_on_t(), material.depends_on_y(), material.depends_on_z());
    // raw samples per (i, g): one matrix, or the z-grid when z matters
    let mut cells: Vec<Vec<Stiffness6>> = Vec::with_capacity(nodes.len() * np);
    for (i, &t) in nodes.iter().enumerate() {
        for g in 0..np {
            if (i > 0 && !uses_t) || (g > 0 && !uses_y) {
                let src = if i > 0 && !uses_t { g } else { i * np };
                let copy = cells[src].clone();
                cells.push(copy);
                continue;
            }
            let y = ybasis.point(g);
            let zs: Vec<Stiffness6> = if uses_z {
                (0..zbasis.points())
                    .map(|h| sample_point(material, frame, &CellPoint::new(x, y, zbasis.point(h), t)))
                    .collect::<Result<_, _>>()?
            } else {
                vec![sample_point(material, frame, &CellPoint::new(x, y, [0.0, 0.0], t))?]
            };
            cells.push(zs);
        }
    }
    let mut field = Vec::with_capacity(cells.len());
    let mut z_cells = 0;
    if uses_z {
        let mut cache: HashMap<Vec<u64>, Stiffness6> = HashMap::new();
        for zs in &cells {
            let key: Vec<u64> = zs.iter().flat_map(|m| m.iter().map(|v| v.to_bits())).collect();
            if let Some(m) = cache.get(&key) {
                field.push(*m);
                continue;
            }
            let m = homogenize_z(zbasis, zs, settings).map_err(CellFormError::ZCell)?.matrix;
            z_cells += 1;
            cache.insert(key, m);
            field.push(m);
        }
    } else {
        field.extend(cells.iter().map(|zs| zs[0]));
    }
    for c in &field {
        relax_normal_matrix(c)?;
    }
    Ok((field, z_cells))
}

/// One cell form at `x`.
pub fn solve_cell_form(
    x: [f64; 2],
    surface: &SurfacePatch,
    material: &Material,
    regime: Regime,
    disc: Discretization,
) -> Result<CellForm, CellFormError> {
    CellProblem::new(x, surface, material, disc)?.solve(regime)
}

/// `(1/12) min_φ ∫∫ Q̂(q − Hess_𝒴 φ)` with `Q̂` the normal relaxation of the
/// `z`-homogenized density, for materials that do not depend on `t`.
pub fn thickness_homogeneous_form(
    x: [f64; 2],
    surface: &SurfacePatch,
    material: &Material,
    disc: Discretization,
) -> Result<CellForm, CellFormError> {
    if material.depends_on_t() {
        return Err(CellFormError::MaterialNotThicknessHomogeneous);
    }
    let frame = surface.frame_at(x)?;
    let ybasis = disc.y_basis()?;
    let zbasis = disc.z_basis()?;
    let settings = CgSettings::default();
    let (field, z_cells) = sample_field(material, &frame, x, &[0.0], &ybasis, &zbasis, settings)?;
    let relaxed: Vec<Stiffness3> = field.iter().map(relax_normal_matrix).collect::<Result<_, _>>()?;
    let c = StiffnessField::from_tangential(&relaxed);
    let (tv, td) = unit_t(1);
    let phi = trig(
        "phi",
        tv,
        td,
        vec![
            Contrib::new(0, -1.0, [2, 0], TMode::TimesT),
            Contrib::new(1, -1.0, [0, 2], TMode::TimesT),
            Contrib::new(5, -SQRT_2, [1, 1], TMode::TimesT),
        ],
    );
    let map = StrainMap::new(&ybasis, vec![1.0], Layout::Tangential, vec![phi]);
    let np = ybasis.points();
    let loads = polarization_loads();
    let mut values = [0.0; 6];
    let mut iterations = [0; 6];
    let (mut residual, mut gap) = (0.0f64, 0.0f64);
    for (k, q) in loads.iter().enumerate() {
        let mut f0 = vec![0.0; np * 3];
        for g in 0..np {
            f0[g * 3..g * 3 + 3].copy_from_slice(q.as_slice());
        }
        let m = minimize(&map, &c, &[1.0], &f0, settings).map_err(|source| CellFormError::Solver { load: k, source })?;
        values[k] = m.value / 12.0;
        iterations[k] = m.iterations;
        residual = residual.max(m.residual);
        gap = gap.max(m.gap);
    }
    Ok(CellForm {
        x,
        regime: Regime::Zero,
        matrix: polarize(&values),
        values,
        p_star: [Mandel3::zeros(); 6],
        discretization: disc,
        t_nodes: vec![0.0],
        solver: SolverRecord { iterations, residual, gap, z_cells },
    })
}

/// Cell forms at `γ₁ = 0`, at each grid value, and at `γ₁ = ∞`, in that
/// order.
pub fn gamma_sweep(problem: &CellProblem<'_>, grid: &[f64]) -> Result<Vec<CellForm>, CellFormError> {
    if grid.iter().any(|g| !(*g > 0.0 && g.is_finite())) || grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(CellFormError::InvalidGrid);
    }
    let mut regimes = vec![Regime::Zero];
    regimes.extend(grid.iter().map(|&g| Regime::Finite(g)));
    regimes.push(Regime::Infinite);
    regimes
        .par_iter()
        .map(|&r| problem.solve(r).map_err(|e| CellFormError::Sweep { gamma1: r.to_string(), source: Box::new(e) }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::build_surface;

    fn flat() -> SurfacePatch {
        build_surface("flat:Lx=1,Ly=1", [2, 2]).unwrap()
    }

    fn relaxed_iso(mu: f64, la: f64, q: &Mandel3) -> f64 {
        let (a, b, c) = (q[0], q[1], q[2] / SQRT_2);
        mu * (a * a + b * b + 2.0 * c * c) + la * mu / (2.0 * mu + la) * (a + b).powi(2)
    }

    #[test]
    fn homogeneous_identity_all_regimes() {
        let s = flat();
        let m = Material::svk("1", "1").unwrap();
        let p = CellProblem::new([0.5, 0.5], &s, &m, Discretization::default()).unwrap();
        for r in [Regime::Zero, Regime::Finite(1.0), Regime::Infinite] {
            let cf = p.solve(r).unwrap();
            for (k, q) in polarization_loads().iter().enumerate() {
                let want = relaxed_iso(1.0, 1.0, q) / 12.0;
                assert!((cf.values[k] - want).abs() < 1e-10 * want, "{r}: {} vs {want}", cf.values[k]);
                assert!(cf.p_star[k].norm() < 1e-10);
            }
            assert!((cf.matrix[(0, 0)] - 1.0 / 9.0).abs() < 1e-10);
        }
        let th = thickness_homogeneous_form([0.5, 0.5], &s, &m, Discretization::default()).unwrap();
        assert!((th.matrix[(0, 0)] - 1.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn zero_load_gives_zero() {
        let s = flat();
        let m = Material::svk("1+0.5*cos(6.283185307179586*y1)", "1").unwrap();
        let p = CellProblem::new([0.5, 0.5], &s, &m, Discretization::default()).unwrap();
        let (sol, ps) = p.solve_load(Regime::Finite(1.0), &Mandel3::zeros()).unwrap();
        assert_eq!(sol.value, 0.0);
        assert_eq!(ps, Mandel3::zeros());
        assert!(sol.x.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn thickness_dependence_disables_shortcut() {
        let m = Material::svk("1+t", "1").unwrap();
        assert_eq!(
            thickness_homogeneous_form([0.5, 0.5], &flat(), &m, Discretization::default()),
            Err(CellFormError::MaterialNotThicknessHomogeneous)
        );
    }

    #[test]
    fn empty_phi_space_gives_averaged_relaxation() {
        let m = Material::svk("1+0.5*cos(6.283185307179586*y1)", "0").unwrap();
        let d = Discretization::new(0, 1, 1).with_grids(Some(8), None);
        let cf = thickness_homogeneous_form([0.5, 0.5], &flat(), &m, d).unwrap();
        // mean of μ over the grid is 1; λ = 0 gives Q̃(q) = μ|q|²
        assert!((cf.matrix - Stiffness3::identity() / 12.0).norm() < 1e-14);
    }

    #[test]
    fn z_independent_eta_vanishes() {
        let b = TrigBasis::new(2);
        let c = Material::svk("1.5", "0.3").unwrap().stiffness(&CellPoint::default()).unwrap();
        let z = homogenize_z(&b, &vec![c; b.points()], CgSettings::default()).unwrap();
        assert!(z.eta_norm < 1e-14);
        assert!((z.matrix - c).norm() < 1e-14);
    }

    #[test]
    fn regime_parsing() {
        assert_eq!(Regime::parse("inf").unwrap(), Regime::Infinite);
        assert_eq!(Regime::parse("0").unwrap(), Regime::Zero);
        assert_eq!(Regime::parse("2.5").unwrap(), Regime::Finite(2.5));
        assert!(Regime::parse("-1").is_err());
        assert_eq!(Regime::Finite(0.001).to_string(), "0.001");
    }
}
