//! JSON and CSV output with every number written to 17 significant digits.

use std::io;

use serde::ser::Serialize;
use serde::Serialize as DeriveSerialize;
use serde_json::ser::{Formatter, Serializer};

use crate::cellform::{CellForm, Regime};
use crate::energy::BendingEnergy;
use crate::harness::{LimsupRow, PairingRow, StrainRow};
use crate::mandel::Stiffness3;

/// `x` with 17 significant digits, in a form valid for both JSON and CSV.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

struct Digits17;

impl Formatter for Digits17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            w.write_all(fmt_f64(value).as_bytes())
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }
}

/// Compact JSON with 17-digit floats and a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, Digits17);
    value.serialize(&mut ser).expect("records serialize");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

/// A CSV document with a fixed header.
pub fn to_csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

fn matrix_rows(m: &Stiffness3) -> [[f64; 3]; 3] {
    [0, 1, 2].map(|i| [0, 1, 2].map(|j| m[(i, j)]))
}

#[derive(DeriveSerialize)]
#[serde(untagged)]
enum GammaValue {
    Inf(&'static str),
    Number(f64),
}

#[derive(DeriveSerialize)]
struct RegimeRecord {
    gamma1: GammaValue,
}

#[derive(DeriveSerialize)]
struct DiscretizationRecord {
    ny: usize,
    nz: usize,
    nt: usize,
}

#[derive(DeriveSerialize)]
struct SolverRecordOut {
    iters: [usize; 6],
    residual: f64,
}

#[derive(DeriveSerialize)]
struct CellFormRecord {
    x: [f64; 2],
    regime: RegimeRecord,
    basis: &'static str,
    matrix: [[f64; 3]; 3],
    p_star: Vec<[f64; 3]>,
    discretization: DiscretizationRecord,
    solver: SolverRecordOut,
}

fn regime_record(r: Regime) -> RegimeRecord {
    RegimeRecord {
        gamma1: match r {
            Regime::Infinite => GammaValue::Inf("inf"),
            other => GammaValue::Number(other.gamma1()),
        },
    }
}

/// The JSON record of one cell form.
pub fn cellform_json(f: &CellForm) -> String {
    to_json(&CellFormRecord {
        x: f.x,
        regime: regime_record(f.regime),
        basis: "mandel-dual-frame",
        matrix: matrix_rows(&f.matrix),
        p_star: f.p_star.iter().map(|p| [p[0], p[1], p[2]]).collect(),
        discretization: DiscretizationRecord { ny: f.discretization.ny, nz: f.discretization.nz, nt: f.discretization.nt },
        solver: SolverRecordOut { iters: f.solver.iterations, residual: f.solver.residual },
    })
}

#[derive(DeriveSerialize)]
struct EnergyRecord {
    value: f64,
    finite: bool,
    iso_violation: f64,
    nodes: usize,
}

/// The JSON record of a bending energy; `value` is `null` when infinite.
pub fn energy_json(e: &BendingEnergy) -> String {
    to_json(&EnergyRecord { value: e.value, finite: e.finite, iso_violation: e.iso_violation, nodes: e.nodes })
}

pub const SWEEP_HEADER: [&str; 7] = ["gamma1", "M11", "M22", "M33", "M12", "M13", "M23"];
pub const PAIRING_HEADER: [&str; 4] = ["h", "lhs", "rhs", "gap"];
pub const LIMSUP_HEADER: [&str; 5] = ["h", "energy_over_h2", "limit", "gap", "Jh_vs_Ih"];
pub const STRAIN_HEADER: [&str; 3] = ["h", "eps", "residual_over_h"];

pub fn sweep_csv(forms: &[CellForm]) -> String {
    let rows: Vec<Vec<f64>> = forms
        .iter()
        .map(|f| {
            let m = &f.matrix;
            vec![f.regime.gamma1(), m[(0, 0)], m[(1, 1)], m[(2, 2)], m[(0, 1)], m[(0, 2)], m[(1, 2)]]
        })
        .collect();
    to_csv(&SWEEP_HEADER, &rows)
}

pub fn pairing_csv(rows: &[PairingRow]) -> String {
    to_csv(&PAIRING_HEADER, &rows.iter().map(|r| vec![r.h, r.lhs, r.rhs, r.gap]).collect::<Vec<_>>())
}

pub fn limsup_csv(rows: &[LimsupRow]) -> String {
    to_csv(
        &LIMSUP_HEADER,
        &rows.iter().map(|r| vec![r.h, r.energy_over_h2, r.limit, r.gap, r.jh_vs_ih]).collect::<Vec<_>>(),
    )
}

pub fn strain_csv(rows: &[StrainRow]) -> String {
    to_csv(&STRAIN_HEADER, &rows.iter().map(|r| vec![r.h, r.eps, r.residual_over_h]).collect::<Vec<_>>())
}
