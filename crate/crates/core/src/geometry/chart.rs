use std::f64::consts::PI;
use std::fmt;

use nalgebra::{Matrix2, Vector2, Vector3};

use super::GeometryError;
use crate::expr::{CoeffExpr, CHART_VARS};
use crate::quadrature::{gauss_legendre, Rule2d};

/// Value, first and second parameter derivatives of a map `ω → ℝ³`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChartJet {
    pub value: Vector3<f64>,
    pub d: [Vector3<f64>; 2],
    pub dd: [[Vector3<f64>; 2]; 2],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Domain {
    Rect { u: [f64; 2], v: [f64; 2] },
    /// Disk centred at the parameter origin.
    Disk { radius: f64 },
}

impl Domain {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let tol = 1e-12;
        match *self {
            Domain::Rect { u, v } => {
                p[0] >= u[0] - tol && p[0] <= u[1] + tol && p[1] >= v[0] - tol && p[1] <= v[1] + tol
            }
            Domain::Disk { radius } => p[0].hypot(p[1]) <= radius * (1.0 + tol),
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Domain::Rect { u, v } => (u[1] - u[0]) * (v[1] - v[0]),
            Domain::Disk { radius } => PI * radius * radius,
        }
    }

    /// Tensor Gauss–Legendre on rectangles; polar Gauss on disks
    /// (`nodes = [radial, angular]`).
    pub fn rule(&self, nodes: [usize; 2]) -> Rule2d {
        match *self {
            Domain::Rect { u, v } => Rule2d::tensor(
                &gauss_legendre(nodes[0]).mapped(u[0], u[1]),
                &gauss_legendre(nodes[1]).mapped(v[0], v[1]),
            ),
            Domain::Disk { radius } => Rule2d::disk(nodes[0], nodes[1], radius),
        }
    }

    pub fn is_rect(&self) -> bool {
        matches!(self, Domain::Rect { .. })
    }
}

/// Surface description, parsed from strings such as `sphere:R=2,cap=30`.
#[derive(Clone, Debug, PartialEq)]
pub enum SurfaceSpec {
    Flat { lx: f64, ly: f64 },
    Sphere { radius: f64, cap_deg: f64 },
    Ellipsoid { a: f64, b: f64, c: f64, cap_deg: f64 },
    Cylinder { radius: f64, arc_deg: f64, length: f64 },
    Expr { map: [CoeffExpr; 3], domain: Domain },
}

fn spec_err(spec: &str, reason: impl Into<String>) -> GeometryError {
    GeometryError::Spec { spec: spec.to_string(), reason: reason.into() }
}

fn parse_params<'a>(
    spec: &str,
    body: &str,
    allowed: &[&'a str],
) -> Result<Vec<(&'a str, f64)>, GeometryError> {
    let mut out = Vec::new();
    if body.trim().is_empty() {
        return Ok(out);
    }
    for item in body.split(',') {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| spec_err(spec, format!("expected key=value, found `{item}`")))?;
        let key = allowed
            .iter()
            .find(|a| **a == k.trim())
            .ok_or_else(|| spec_err(spec, format!("unknown key `{}`", k.trim())))?;
        let val: f64 = v
            .trim()
            .parse()
            .map_err(|_| spec_err(spec, format!("`{}` is not a number", v.trim())))?;
        if !val.is_finite() {
            return Err(spec_err(spec, format!("`{k}` must be finite")));
        }
        out.push((*key, val));
    }
    Ok(out)
}

fn get(params: &[(&str, f64)], key: &str, default: Option<f64>, spec: &str) -> Result<f64, GeometryError> {
    params
        .iter()
        .rev()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| *v)
        .or(default)
        .ok_or_else(|| spec_err(spec, format!("missing `{key}`")))
}

fn positive(v: f64, what: &str, spec: &str) -> Result<f64, GeometryError> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(spec_err(spec, format!("`{what}` must be positive")))
    }
}

impl SurfaceSpec {
    pub fn parse(spec: &str) -> Result<SurfaceSpec, GeometryError> {
        let (kind, body) = spec.split_once(':').ok_or_else(|| spec_err(spec, "missing `kind:`"))?;
        match kind.trim() {
            "flat" => {
                let p = parse_params(spec, body, &["Lx", "Ly"])?;
                Ok(SurfaceSpec::Flat {
                    lx: positive(get(&p, "Lx", Some(1.0), spec)?, "Lx", spec)?,
                    ly: positive(get(&p, "Ly", Some(1.0), spec)?, "Ly", spec)?,
                })
            }
            "sphere" => {
                let p = parse_params(spec, body, &["R", "cap"])?;
                let cap = get(&p, "cap", None, spec)?;
                if !(cap > 0.0 && cap < 90.0) {
                    return Err(spec_err(spec, "`cap` must lie in (0, 90) degrees"));
                }
                Ok(SurfaceSpec::Sphere { radius: positive(get(&p, "R", None, spec)?, "R", spec)?, cap_deg: cap })
            }
            "ellipsoid" => {
                let p = parse_params(spec, body, &["a", "b", "c", "cap"])?;
                let cap = get(&p, "cap", Some(30.0), spec)?;
                if !(cap > 0.0 && cap < 90.0) {
                    return Err(spec_err(spec, "`cap` must lie in (0, 90) degrees"));
                }
                Ok(SurfaceSpec::Ellipsoid {
                    a: positive(get(&p, "a", None, spec)?, "a", spec)?,
                    b: positive(get(&p, "b", None, spec)?, "b", spec)?,
                    c: positive(get(&p, "c", None, spec)?, "c", spec)?,
                    cap_deg: cap,
                })
            }
            "cyl" => {
                let p = parse_params(spec, body, &["R", "arc", "L"])?;
                let arc = get(&p, "arc", None, spec)?;
                if !(arc > 0.0 && arc < 360.0) {
                    return Err(spec_err(spec, "`arc` must lie in (0, 360) degrees"));
                }
                Ok(SurfaceSpec::Cylinder {
                    radius: positive(get(&p, "R", None, spec)?, "R", spec)?,
                    arc_deg: arc,
                    length: positive(get(&p, "L", Some(1.0), spec)?, "L", spec)?,
                })
            }
            "expr" => {
                let (maps, dom) = match body.split_once('|') {
                    Some((m, d)) => (m, Some(d)),
                    None => (body, None),
                };
                let parts: Vec<&str> = maps.split(';').collect();
                if parts.len() != 3 {
                    return Err(spec_err(spec, "expected three `;`-separated component expressions"));
                }
                let map = [
                    CoeffExpr::parse_with(parts[0].trim(), CHART_VARS)?,
                    CoeffExpr::parse_with(parts[1].trim(), CHART_VARS)?,
                    CoeffExpr::parse_with(parts[2].trim(), CHART_VARS)?,
                ];
                let domain = match dom {
                    None => Domain::Rect { u: [0.0, 1.0], v: [0.0, 1.0] },
                    Some(d) => parse_domain(spec, d)?,
                };
                Ok(SurfaceSpec::Expr { map, domain })
            }
            other => Err(spec_err(spec, format!("unknown surface kind `{other}`"))),
        }
    }

    pub fn domain(&self) -> Domain {
        match self {
            SurfaceSpec::Flat { lx, ly } => Domain::Rect { u: [0.0, *lx], v: [0.0, *ly] },
            SurfaceSpec::Sphere { radius, cap_deg } => Domain::Disk { radius: radius * cap_deg.to_radians().sin() },
            SurfaceSpec::Ellipsoid { cap_deg, .. } => Domain::Disk { radius: cap_deg.to_radians().sin() },
            SurfaceSpec::Cylinder { arc_deg, length, .. } => {
                let half = 0.5 * arc_deg.to_radians();
                Domain::Rect { u: [-half, half], v: [0.0, *length] }
            }
            SurfaceSpec::Expr { domain, .. } => *domain,
        }
    }

    pub fn is_analytic(&self) -> bool {
        !matches!(self, SurfaceSpec::Expr { .. })
    }

    pub fn jet(&self, p: [f64; 2]) -> Result<ChartJet, GeometryError> {
        let [u, v] = p;
        let z = Vector3::zeros();
        Ok(match self {
            SurfaceSpec::Flat { .. } => ChartJet {
                value: Vector3::new(u, v, 0.0),
                d: [Vector3::x(), Vector3::y()],
                dd: [[z; 2]; 2],
            },
            SurfaceSpec::Sphere { radius, .. } => {
                let w = (radius * radius - u * u - v * v).sqrt();
                let w3 = w * w * w;
                ChartJet {
                    value: Vector3::new(u, v, w),
                    d: [Vector3::new(1.0, 0.0, -u / w), Vector3::new(0.0, 1.0, -v / w)],
                    dd: [
                        [Vector3::new(0.0, 0.0, -(w * w + u * u) / w3), Vector3::new(0.0, 0.0, -u * v / w3)],
                        [Vector3::new(0.0, 0.0, -u * v / w3), Vector3::new(0.0, 0.0, -(w * w + v * v) / w3)],
                    ],
                }
            }
            SurfaceSpec::Ellipsoid { a, b, c, .. } => {
                let s = (1.0 - u * u - v * v).sqrt();
                let s3 = s * s * s;
                ChartJet {
                    value: Vector3::new(a * u, b * v, c * s),
                    d: [Vector3::new(*a, 0.0, -c * u / s), Vector3::new(0.0, *b, -c * v / s)],
                    dd: [
                        [Vector3::new(0.0, 0.0, -c * (s * s + u * u) / s3), Vector3::new(0.0, 0.0, -c * u * v / s3)],
                        [Vector3::new(0.0, 0.0, -c * u * v / s3), Vector3::new(0.0, 0.0, -c * (s * s + v * v) / s3)],
                    ],
                }
            }
            SurfaceSpec::Cylinder { radius: r, .. } => {
                let (sn, cs) = u.sin_cos();
                ChartJet {
                    value: Vector3::new(r * sn, v, r * cs),
                    d: [Vector3::new(r * cs, 0.0, -r * sn), Vector3::y()],
                    dd: [[Vector3::new(-r * sn, 0.0, -r * cs), z], [z, z]],
                }
            }
            SurfaceSpec::Expr { map, .. } => {
                let eval = |q: [f64; 2]| -> Result<Vector3<f64>, GeometryError> {
                    Ok(Vector3::new(map[0].eval(&q)?, map[1].eval(&q)?, map[2].eval(&q)?))
                };
                fd_jet(eval, p)?
            }
        })
    }
}

fn parse_domain(spec: &str, d: &str) -> Result<Domain, GeometryError> {
    let (kind, vals) = d.split_once('=').ok_or_else(|| spec_err(spec, "domain must be `rect=u0,u1,v0,v1` or `disk=r`"))?;
    let nums: Result<Vec<f64>, _> = vals.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let nums = nums.map_err(|_| spec_err(spec, "domain bounds must be numbers"))?;
    match (kind.trim(), nums.as_slice()) {
        ("rect", [u0, u1, v0, v1]) if u1 > u0 && v1 > v0 => Ok(Domain::Rect { u: [*u0, *u1], v: [*v0, *v1] }),
        ("disk", [r]) if *r > 0.0 => Ok(Domain::Disk { radius: *r }),
        _ => Err(spec_err(spec, "invalid domain")),
    }
}

impl fmt::Display for SurfaceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SurfaceSpec::Flat { lx, ly } => write!(f, "flat:Lx={lx:?},Ly={ly:?}"),
            SurfaceSpec::Sphere { radius, cap_deg } => write!(f, "sphere:R={radius:?},cap={cap_deg:?}"),
            SurfaceSpec::Ellipsoid { a, b, c, cap_deg } => {
                write!(f, "ellipsoid:a={a:?},b={b:?},c={c:?},cap={cap_deg:?}")
            }
            SurfaceSpec::Cylinder { radius, arc_deg, length } => {
                write!(f, "cyl:R={radius:?},arc={arc_deg:?},L={length:?}")
            }
            SurfaceSpec::Expr { map, domain } => {
                write!(f, "expr:{};{};{}", map[0], map[1], map[2])?;
                match domain {
                    Domain::Rect { u, v } if *u == [0.0, 1.0] && *v == [0.0, 1.0] => Ok(()),
                    Domain::Rect { u, v } => write!(f, "|rect={:?},{:?},{:?},{:?}", u[0], u[1], v[0], v[1]),
                    Domain::Disk { radius } => write!(f, "|disk={radius:?}"),
                }
            }
        }
    }
}

const FD_FIRST: f64 = 1e-5;
const FD_SECOND: f64 = 1e-3;

/// Finite-difference jet with one Richardson level per derivative order.
pub(crate) fn fd_jet<F>(f: F, p: [f64; 2]) -> Result<ChartJet, GeometryError>
where
    F: Fn([f64; 2]) -> Result<Vector3<f64>, GeometryError>,
{
    let at = |du: f64, dv: f64| f([p[0] + du, p[1] + dv]);
    let value = at(0.0, 0.0)?;
    let first = |axis: usize, h: f64| -> Result<Vector3<f64>, GeometryError> {
        let (a, b) = if axis == 0 { (at(h, 0.0)?, at(-h, 0.0)?) } else { (at(0.0, h)?, at(0.0, -h)?) };
        Ok((a - b) / (2.0 * h))
    };
    let second = |i: usize, j: usize, h: f64| -> Result<Vector3<f64>, GeometryError> {
        if i == j {
            let (a, b) = if i == 0 { (at(h, 0.0)?, at(-h, 0.0)?) } else { (at(0.0, h)?, at(0.0, -h)?) };
            Ok((a - 2.0 * value + b) / (h * h))
        } else {
            Ok((at(h, h)? - at(h, -h)? - at(-h, h)? + at(-h, -h)?) / (4.0 * h * h))
        }
    };
    let rich = |coarse: Vector3<f64>, fine: Vector3<f64>| (4.0 * fine - coarse) / 3.0;
    let d = [
        rich(first(0, FD_FIRST)?, first(0, 0.5 * FD_FIRST)?),
        rich(first(1, FD_FIRST)?, first(1, 0.5 * FD_FIRST)?),
    ];
    let mut dd = [[Vector3::zeros(); 2]; 2];
    for i in 0..2 {
        for j in i..2 {
            let v = rich(second(i, j, FD_SECOND)?, second(i, j, 0.5 * FD_SECOND)?);
            dd[i][j] = v;
            dd[j][i] = v;
        }
    }
    Ok(ChartJet { value, d, dd })
}

/// Reparametrizes a jet by the linear map `p = A p'`.
pub(crate) fn reparametrize(jet: &ChartJet, a: &Matrix2<f64>) -> ChartJet {
    let mut d = [Vector3::zeros(); 2];
    let mut dd = [[Vector3::zeros(); 2]; 2];
    for al in 0..2 {
        d[al] = jet.d[0] * a[(0, al)] + jet.d[1] * a[(1, al)];
        for be in 0..2 {
            let mut s = Vector3::zeros();
            for i in 0..2 {
                for j in 0..2 {
                    s += jet.dd[i][j] * (a[(i, al)] * a[(j, be)]);
                }
            }
            dd[al][be] = s;
        }
    }
    ChartJet { value: jet.value, d, dd }
}

pub(crate) fn apply2(a: &Matrix2<f64>, p: [f64; 2]) -> [f64; 2] {
    let q = a * Vector2::new(p[0], p[1]);
    [q[0], q[1]]
}
