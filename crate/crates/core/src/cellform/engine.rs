//! Matrix-free strain maps for the cell problems.
//!
//! Unknowns are grouped in blocks. A block is one scalar field family
//! `Σ_f T_f(t) Y_f(y)` where `T_f` runs over a list of thickness functions
//! sampled at the quadrature nodes and `Y_f` is either a trigonometric
//! polynomial or a constant. Each block contributes to Mandel slots through
//! a list of [`Contrib`]s.

use crate::mandel::{Stiffness3, Stiffness6, TANGENTIAL};
use crate::relaxation::{DerivIndex, TrigBasis};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TMode {
    Value,
    Deriv,
    /// `t · T_f(t)`.
    TimesT,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Contrib {
    /// Mandel 6-slot index.
    pub slot: usize,
    pub coef: f64,
    pub dy: DerivIndex,
    pub tmode: TMode,
}

impl Contrib {
    pub const fn new(slot: usize, coef: f64, dy: DerivIndex, tmode: TMode) -> Contrib {
        Contrib { slot, coef, dy, tmode }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum YKind {
    Trig,
    Const,
}

#[derive(Clone, Debug)]
pub struct Block {
    pub name: &'static str,
    pub y: YKind,
    /// `tv[f][i] = T_f(t_i)`.
    pub tv: Vec<Vec<f64>>,
    /// `td[f][i] = T_f'(t_i)`.
    pub td: Vec<Vec<f64>>,
    pub contribs: Vec<Contrib>,
}

impl Block {
    pub fn tfns(&self) -> usize {
        self.tv.len()
    }
}

/// Slot layout of a field: the full six Mandel slots, or only the
/// tangential ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    Full,
    Tangential,
}

impl Layout {
    pub fn width(self) -> usize {
        match self {
            Layout::Full => 6,
            Layout::Tangential => 3,
        }
    }

    pub fn position(self, slot: usize) -> Option<usize> {
        match self {
            Layout::Full => Some(slot),
            Layout::Tangential => TANGENTIAL.iter().position(|&s| s == slot),
        }
    }
}

struct Resolved {
    pos: usize,
    coef: f64,
    dy: DerivIndex,
    tmode: TMode,
}

/// Linear map from block coefficients to a field sampled at
/// `(t_i, y_g)` with `width` slots per point, stored at
/// `[(i * points + g) * width + slot]`.
pub struct StrainMap<'a> {
    basis: &'a TrigBasis,
    nodes: Vec<f64>,
    layout: Layout,
    blocks: Vec<Block>,
    resolved: Vec<Vec<Resolved>>,
    offsets: Vec<usize>,
    ndof: usize,
}

impl<'a> StrainMap<'a> {
    pub fn new(basis: &'a TrigBasis, nodes: Vec<f64>, layout: Layout, blocks: Vec<Block>) -> StrainMap<'a> {
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut ndof = 0;
        let mut resolved = Vec::with_capacity(blocks.len());
        for b in &blocks {
            offsets.push(ndof);
            ndof += b.tfns() * Self::ylen_of(basis, b.y);
            assert!(b.tv.iter().all(|v| v.len() == nodes.len()));
            let r = b
                .contribs
                .iter()
                .map(|c| {
                    assert!(b.y == YKind::Trig || c.dy == [0, 0], "constant block with a y-derivative");
                    Resolved {
                        pos: layout.position(c.slot).expect("contribution outside the field layout"),
                        coef: c.coef,
                        dy: c.dy,
                        tmode: c.tmode,
                    }
                })
                .collect();
            resolved.push(r);
        }
        StrainMap { basis, nodes, layout, blocks, resolved, offsets, ndof }
    }

    fn ylen_of(basis: &TrigBasis, y: YKind) -> usize {
        match y {
            YKind::Trig => basis.len(),
            YKind::Const => 1,
        }
    }

    pub fn ndof(&self) -> usize {
        self.ndof
    }

    pub fn width(&self) -> usize {
        self.layout.width()
    }

    pub fn points(&self) -> usize {
        self.basis.points()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn field_len(&self) -> usize {
        self.nodes.len() * self.points() * self.width()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Coefficient range of block `b`.
    pub fn range(&self, b: usize) -> std::ops::Range<usize> {
        let len = self.blocks[b].tfns() * Self::ylen_of(self.basis, self.blocks[b].y);
        self.offsets[b]..self.offsets[b] + len
    }

    pub fn block_index(&self, name: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.name == name)
    }

    fn tfac(&self, b: usize, f: usize, i: usize, mode: TMode) -> f64 {
        let blk = &self.blocks[b];
        match mode {
            TMode::Value => blk.tv[f][i],
            TMode::Deriv => blk.td[f][i],
            TMode::TimesT => self.nodes[i] * blk.tv[f][i],
        }
    }

    fn dys(&self, b: usize) -> Vec<DerivIndex> {
        let mut out: Vec<DerivIndex> = Vec::new();
        for c in &self.resolved[b] {
            if !out.contains(&c.dy) {
                out.push(c.dy);
            }
        }
        out
    }

    /// `out += D x`.
    pub fn apply_add(&self, x: &[f64], out: &mut [f64]) {
        let (np, w) = (self.points(), self.width());
        let mut buf = vec![0.0; np];
        for b in 0..self.blocks.len() {
            let ylen = Self::ylen_of(self.basis, self.blocks[b].y);
            let dys = self.dys(b);
            for f in 0..self.blocks[b].tfns() {
                let xs = &x[self.offsets[b] + f * ylen..self.offsets[b] + (f + 1) * ylen];
                if xs.iter().all(|&v| v == 0.0) {
                    continue;
                }
                for &dy in &dys {
                    match self.blocks[b].y {
                        YKind::Trig => {
                            buf.iter_mut().for_each(|v| *v = 0.0);
                            self.basis.synth_add(xs, dy, &mut buf);
                        }
                        YKind::Const => buf.iter_mut().for_each(|v| *v = xs[0]),
                    }
                    for c in self.resolved[b].iter().filter(|c| c.dy == dy) {
                        for i in 0..self.nodes.len() {
                            let fac = c.coef * self.tfac(b, f, i, c.tmode);
                            if fac == 0.0 {
                                continue;
                            }
                            let base = i * np * w + c.pos;
                            for (g, v) in buf.iter().enumerate() {
                                out[base + g * w] += fac * v;
                            }
                        }
                    }
                }
            }
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.field_len()];
        self.apply_add(x, &mut out);
        out
    }

    /// `grad += Dᵀ r`.
    pub fn adjoint_add(&self, r: &[f64], grad: &mut [f64]) {
        let (np, w) = (self.points(), self.width());
        let mut buf = vec![0.0; np];
        for b in 0..self.blocks.len() {
            let ylen = Self::ylen_of(self.basis, self.blocks[b].y);
            let dys = self.dys(b);
            for f in 0..self.blocks[b].tfns() {
                let lo = self.offsets[b] + f * ylen;
                for &dy in &dys {
                    buf.iter_mut().for_each(|v| *v = 0.0);
                    let mut any = false;
                    for c in self.resolved[b].iter().filter(|c| c.dy == dy) {
                        for i in 0..self.nodes.len() {
                            let fac = c.coef * self.tfac(b, f, i, c.tmode);
                            if fac == 0.0 {
                                continue;
                            }
                            any = true;
                            let base = i * np * w + c.pos;
                            for (g, v) in buf.iter_mut().enumerate() {
                                *v += fac * r[base + g * w];
                            }
                        }
                    }
                    if !any {
                        continue;
                    }
                    match self.blocks[b].y {
                        YKind::Trig => self.basis.adjoint_add(&buf, dy, &mut grad[lo..lo + ylen]),
                        YKind::Const => grad[lo] += buf.iter().sum::<f64>(),
                    }
                }
            }
        }
    }

    /// Diagonal of `Dᵀ W C D` with `C` replaced by its cell average
    /// `cbar[i]` at each node (flattened `width × width`), and node weights
    /// `weights[i]`. The grid weight `1/points` is included.
    pub fn averaged_diagonal(&self, cbar: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
        let w = self.width();
        let mut diag = vec![0.0; self.ndof];
        for b in 0..self.blocks.len() {
            let blk = &self.blocks[b];
            let ylen = Self::ylen_of(self.basis, blk.y);
            for f in 0..blk.tfns() {
                for j in 0..ylen {
                    let mut acc = 0.0;
                    for (i, wi) in weights.iter().enumerate() {
                        for c in &self.resolved[b] {
                            let fc = c.coef * self.tfac(b, f, i, c.tmode);
                            if fc == 0.0 {
                                continue;
                            }
                            for d in &self.resolved[b] {
                                let fd = d.coef * self.tfac(b, f, i, d.tmode);
                                if fd == 0.0 {
                                    continue;
                                }
                                let mom = match blk.y {
                                    YKind::Trig => self.basis.moment(j / 2, c.dy, d.dy),
                                    YKind::Const => 1.0,
                                };
                                acc += wi * fc * fd * cbar[i][c.pos * w + d.pos] * mom;
                            }
                        }
                    }
                    diag[self.offsets[b] + f * ylen + j] = acc;
                }
            }
        }
        diag
    }
}

/// Pointwise stiffness field in a given layout, flattened per point.
#[derive(Clone, Debug, PartialEq)]
pub struct StiffnessField {
    pub width: usize,
    pub data: Vec<f64>,
}

impl StiffnessField {
    pub fn from_full(m: &[Stiffness6]) -> StiffnessField {
        let mut data = Vec::with_capacity(m.len() * 36);
        for c in m {
            for i in 0..6 {
                for j in 0..6 {
                    data.push(c[(i, j)]);
                }
            }
        }
        StiffnessField { width: 6, data }
    }

    pub fn from_tangential(m: &[Stiffness3]) -> StiffnessField {
        let mut data = Vec::with_capacity(m.len() * 9);
        for c in m {
            for i in 0..3 {
                for j in 0..3 {
                    data.push(c[(i, j)]);
                }
            }
        }
        StiffnessField { width: 3, data }
    }

    pub fn len(&self) -> usize {
        self.data.len() / (self.width * self.width)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// `out[p] = scale_p · C_p · v[p]` for every point.
    pub fn apply_weighted(&self, v: &[f64], scale: impl Fn(usize) -> f64, out: &mut [f64]) {
        let w = self.width;
        for p in 0..self.len() {
            let c = &self.data[p * w * w..(p + 1) * w * w];
            let s = scale(p);
            let vp = &v[p * w..(p + 1) * w];
            for r in 0..w {
                let row = &c[r * w..(r + 1) * w];
                out[p * w + r] = s * row.iter().zip(vp).map(|(a, b)| a * b).sum::<f64>();
            }
        }
    }

    /// Average over the points of each node block of `points` points.
    pub fn node_averages(&self, nodes: usize, points: usize) -> Vec<Vec<f64>> {
        let ww = self.width * self.width;
        (0..nodes)
            .map(|i| {
                let mut acc = vec![0.0; ww];
                for g in 0..points {
                    let p = i * points + g;
                    for (a, v) in acc.iter_mut().zip(&self.data[p * ww..(p + 1) * ww]) {
                        *a += v;
                    }
                }
                acc.iter_mut().for_each(|a| *a /= points as f64);
                acc
            })
            .collect()
    }
}
