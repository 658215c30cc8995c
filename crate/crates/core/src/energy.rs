//! The limit bending functional
//! `I(u) = ∫_S Q(x, S^r_u(x)) dvol_S` for isometric immersions, `+∞` otherwise.

use nalgebra::{Matrix2, Vector3};
use rayon::prelude::*;
use thiserror::Error;

use crate::cellform::{solve_cell_form, CellForm, CellFormError, Discretization, Regime};
use crate::expr::{CoeffExpr, EvalError, ParseError, CHART_VARS};
use crate::geometry::{relative_weingarten, GeometryError, Immersion, SurfacePatch};
use crate::mandel::{quad, to_mandel3, Mandel3, Stiffness3};
use crate::material::Material;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    CellForm(#[from] CellFormError),
    #[error("no cell form for quadrature node {node}")]
    MissingCellForm { node: usize },
    #[error("field has {got} entries, quadrature has {expected} nodes")]
    SizeMismatch { expected: usize, got: usize },
    #[error("displacement: {0}")]
    Parse(#[from] ParseError),
    #[error("displacement: {0}")]
    Eval(#[from] EvalError),
}

/// Isometry tolerance for analytic immersions on analytic charts.
pub const ISO_TOL_ANALYTIC: f64 = 1e-6;
/// Isometry tolerance when finite differences are involved.
pub const ISO_TOL_EXPRESSION: f64 = 1e-4;

/// A smooth displacement `w` given by three expressions in the chart
/// parameters `u, v`.
#[derive(Clone, Debug, PartialEq)]
pub struct Displacement {
    map: [CoeffExpr; 3],
    d: [[CoeffExpr; 3]; 2],
    dd: [[[CoeffExpr; 3]; 2]; 2],
}

/// Value, first and second parameter derivatives of a displacement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DisplacementJet {
    pub value: Vector3<f64>,
    pub d: [Vector3<f64>; 2],
    pub dd: [[Vector3<f64>; 2]; 2],
}

impl Displacement {
    pub fn new(components: [&str; 3]) -> Result<Displacement, EnergyError> {
        let map = [
            CoeffExpr::parse_with(components[0], CHART_VARS)?,
            CoeffExpr::parse_with(components[1], CHART_VARS)?,
            CoeffExpr::parse_with(components[2], CHART_VARS)?,
        ];
        let d = [0, 1].map(|a| map.clone().map(|m| m.derivative(a)));
        let dd = [0, 1].map(|a| [0, 1].map(|b| d[a].clone().map(|m| m.derivative(b))));
        Ok(Displacement { map, d, dd })
    }

    pub fn zero() -> Displacement {
        Self::new(["0", "0", "0"]).expect("constant expressions parse")
    }

    pub fn components(&self) -> [&str; 3] {
        [self.map[0].source(), self.map[1].source(), self.map[2].source()]
    }

    pub fn jet(&self, p: [f64; 2]) -> Result<DisplacementJet, EnergyError> {
        let v = |e: &[CoeffExpr; 3]| -> Result<Vector3<f64>, EnergyError> {
            Ok(Vector3::new(e[0].eval(&p)?, e[1].eval(&p)?, e[2].eval(&p)?))
        };
        Ok(DisplacementJet {
            value: v(&self.map)?,
            d: [v(&self.d[0])?, v(&self.d[1])?],
            dd: [[v(&self.dd[0][0])?, v(&self.dd[0][1])?], [v(&self.dd[1][0])?, v(&self.dd[1][1])?]],
        })
    }
}

/// Dual-frame coefficients of `B = du ⊙ dw`.
pub fn membrane_strain(
    surface: &SurfacePatch,
    immersion: &Immersion,
    w: &Displacement,
    p: [f64; 2],
) -> Result<Matrix2<f64>, EnergyError> {
    let ju = immersion.jet(surface, p)?;
    let jw = w.jet(p)?;
    let mut b = Matrix2::zeros();
    for a in 0..2 {
        for c in 0..2 {
            b[(a, c)] = 0.5 * (ju.d[a].dot(&jw.d[c]) + ju.d[c].dot(&jw.d[a]));
        }
    }
    Ok(b)
}

/// Nodal data of the functional for one immersion.
#[derive(Clone, Debug)]
pub struct BendingState<'a> {
    pub surface: &'a SurfacePatch,
    pub immersion: &'a Immersion,
    pub displacement: Option<&'a Displacement>,
    /// `S^r_u` at the quadrature nodes, as tangential Mandel vectors.
    pub weingarten: Vec<Mandel3>,
    /// `B = du ⊙ dw` at the nodes when a displacement is attached.
    pub membrane: Option<Vec<Mandel3>>,
    pub iso_violation: f64,
    pub iso_tol: f64,
}

impl<'a> BendingState<'a> {
    pub fn new(surface: &'a SurfacePatch, immersion: &'a Immersion) -> Result<BendingState<'a>, EnergyError> {
        let tol = if surface.is_analytic() && immersion.is_analytic() { ISO_TOL_ANALYTIC } else { ISO_TOL_EXPRESSION };
        Self::with_tolerance(surface, immersion, tol)
    }

    pub fn with_tolerance(
        surface: &'a SurfacePatch,
        immersion: &'a Immersion,
        iso_tol: f64,
    ) -> Result<BendingState<'a>, EnergyError> {
        let iso_violation = immersion.isometry_violation(surface)?;
        let weingarten = surface
            .quadrature()
            .points
            .iter()
            .map(|p| relative_weingarten(surface, immersion, *p).map(|q| to_mandel3(&q)))
            .collect::<Result<_, _>>()?;
        Ok(BendingState { surface, immersion, displacement: None, weingarten, membrane: None, iso_violation, iso_tol })
    }

    pub fn with_displacement(mut self, w: &'a Displacement) -> Result<BendingState<'a>, EnergyError> {
        let b = self
            .surface
            .quadrature()
            .points
            .iter()
            .map(|p| membrane_strain(self.surface, self.immersion, w, *p).map(|m| to_mandel3(&m)))
            .collect::<Result<_, _>>()?;
        self.displacement = Some(w);
        self.membrane = Some(b);
        Ok(self)
    }

    pub fn is_isometric(&self) -> bool {
        self.iso_violation <= self.iso_tol
    }

    pub fn nodes(&self) -> usize {
        self.weingarten.len()
    }
}

/// Cell forms for the quadrature nodes of a surface.
#[derive(Clone, Debug)]
pub enum CellForms {
    /// One form valid at every node.
    Shared(CellForm),
    PerNode(Vec<CellForm>),
}

impl CellForms {
    pub fn matrix(&self, node: usize) -> Result<&Stiffness3, EnergyError> {
        match self {
            CellForms::Shared(f) => Ok(&f.matrix),
            CellForms::PerNode(v) => v.get(node).map(|f| &f.matrix).ok_or(EnergyError::MissingCellForm { node }),
        }
    }

    pub fn scaled(&self, s: f64) -> CellForms {
        let scale = |f: &CellForm| CellForm { matrix: f.matrix * s, ..f.clone() };
        match self {
            CellForms::Shared(f) => CellForms::Shared(scale(f)),
            CellForms::PerNode(v) => CellForms::PerNode(v.iter().map(scale).collect()),
        }
    }
}

/// Solves the cell problems needed on `surface`. A single solve suffices
/// when the material ignores `x` and the coefficient frame is the same at
/// every node; otherwise every node is solved, in parallel.
pub fn cell_forms_for(
    surface: &SurfacePatch,
    material: &Material,
    regime: Regime,
    disc: Discretization,
) -> Result<CellForms, EnergyError> {
    let points = &surface.quadrature().points;
    let frames = surface.node_frames()?;
    let first = frames[0].coefficient_basis();
    let scale = first.amax();
    let uniform = frames.iter().all(|f| (f.coefficient_basis() - first).amax() <= 1e-14 * scale);
    if uniform && !material.depends_on_x() {
        return Ok(CellForms::Shared(solve_cell_form(points[0], surface, material, regime, disc)?));
    }
    let forms = points
        .par_iter()
        .map(|p| solve_cell_form(*p, surface, material, regime, disc))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CellForms::PerNode(forms))
}

/// Value of the functional; `value` is `+∞` when the isometry test fails.
#[derive(Clone, Debug, PartialEq)]
pub struct BendingEnergy {
    pub value: f64,
    pub finite: bool,
    pub iso_violation: f64,
    pub nodes: usize,
}

/// `Σ w √det g · v(S^r_u)ᵀ M v(S^r_u)` over the surface nodes.
pub fn bending_energy(state: &BendingState<'_>, forms: &CellForms) -> Result<BendingEnergy, EnergyError> {
    let nodes = state.nodes();
    if let CellForms::PerNode(v) = forms {
        if v.len() != nodes {
            return Err(EnergyError::MissingCellForm { node: v.len().min(nodes) });
        }
    }
    if !state.is_isometric() {
        return Ok(BendingEnergy { value: f64::INFINITY, finite: false, iso_violation: state.iso_violation, nodes });
    }
    let matrices: Vec<Stiffness3> = (0..nodes).map(|i| forms.matrix(i).copied()).collect::<Result<_, _>>()?;
    let value = synthetic_energy(&state.weingarten, &matrices, state.surface)?;
    Ok(BendingEnergy { value, finite: true, iso_violation: state.iso_violation, nodes })
}

/// The quadrature sum of `vᵀ M v √det g` without geometric checks.
pub fn synthetic_energy(vectors: &[Mandel3], matrices: &[Stiffness3], surface: &SurfacePatch) -> Result<f64, EnergyError> {
    let rule = surface.quadrature();
    for len in [vectors.len(), matrices.len()] {
        if len != rule.len() {
            return Err(EnergyError::SizeMismatch { expected: rule.len(), got: len });
        }
    }
    let mut sum = 0.0;
    for (i, (p, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
        sum += w * surface.frame(*p)?.area_element() * quad(&matrices[i], &vectors[i]);
    }
    Ok(sum)
}
