//! Run configuration for the `shellhom` executable.
//!
//! ```toml
//! seed = 7
//! output = "out"
//!
//! [surface]
//! spec = "flat:Lx=1,Ly=1"
//! nodes = [8, 8]
//!
//! [material]
//! kind = "svk"
//! mu = "2 + cos(6.283185307179586*y1)"
//! lambda = "1"
//!
//! [discretization]
//! ny = 4
//! nz = 2
//! nt = 2
//!
//! [regime]
//! gamma1 = "1"
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cellform::{Discretization, Regime};
use crate::energy::Displacement;
use crate::expr::CoeffExpr;
use crate::geometry::{build_surface, Immersion, SurfacePatch};
use crate::harness::{h_sequence, EpsLaw, Profiles, QuadratureSpec, RecoveryConfig, ThreeScaleExperiment};
use crate::material::{GrowthConstants, Material, MaterialKind};

pub const MAX_MODES: usize = 32;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Toml(String),
    #[error("missing [{0}] section")]
    MissingSection(&'static str),
    #[error("[{section}] {reason}")]
    Invalid { section: String, reason: String },
}

fn invalid(section: &str, reason: impl std::fmt::Display) -> ConfigError {
    ConfigError::Invalid { section: section.into(), reason: reason.to_string() }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSection {
    pub spec: String,
    #[serde(default = "default_nodes")]
    pub nodes: [usize; 2],
}

fn default_nodes() -> [usize; 2] {
    [8, 8]
}

/// `kind` plus the coefficient fields of that kind, and optional growth
/// constants `alpha`, `beta`, `rho`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialSection {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(flatten)]
    pub fields: BTreeMap<String, FieldValue>,
}

/// A coefficient given as an expression or a plain number.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldValue {
    Text(String),
    Number(f64),
}

impl FieldValue {
    fn text(&self) -> String {
        match self {
            FieldValue::Text(s) => s.clone(),
            FieldValue::Number(v) => format!("{v:?}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeSection {
    /// `0`, `inf` or a positive number.
    pub gamma1: FieldValue,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImmersionSection {
    /// `identity`, `roll`, `scale`, `reflect` or `expr`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor: Option<f64>,
    /// `[x(u, v), y(u, v), z(u, v)]` for `expr`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<[String; 3]>,
    /// Displacement `w(u, v)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub displacement: Option<[String; 3]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Threescale,
    Strong,
    OscZ,
    Limsup,
    Strain,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: String,
    pub kind: ExperimentKind,
    /// `linear:<γ₁>`, `power:<a>` or `log`.
    pub eps: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hs: Option<Vec<f64>>,
    #[serde(default = "default_h0")]
    pub h0: f64,
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points_per_period: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<String>,
    #[serde(default)]
    pub cross_check: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub profiles: BTreeMap<String, Vec<String>>,
}

fn default_h0() -> f64 {
    0.1
}

fn default_count() -> usize {
    5
}

impl ExperimentSection {
    pub fn sequence_of_h(&self) -> Vec<f64> {
        self.hs.clone().unwrap_or_else(|| h_sequence(self.h0, 0.5, self.count))
    }

    pub fn quadrature(&self) -> QuadratureSpec {
        let mut q = QuadratureSpec::default();
        if let Some(p) = self.points_per_period {
            q.points_per_period = p;
        }
        q
    }

    fn eps_law(&self) -> Result<EpsLaw, ConfigError> {
        EpsLaw::parse(&self.eps).ok_or_else(|| invalid(&self.section(), format!("bad eps law `{}`", self.eps)))
    }

    fn section(&self) -> String {
        format!("experiment {}", self.name)
    }

    fn expr(&self, name: &str, v: &Option<String>) -> Result<CoeffExpr, ConfigError> {
        let s = v.as_deref().ok_or_else(|| invalid(&self.section(), format!("missing `{name}`")))?;
        CoeffExpr::parse(s).map_err(|e| invalid(&self.section(), format!("{name}: {e}")))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface: Option<SurfaceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<MaterialSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discretization: Option<Discretization>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<RegimeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub immersion: Option<ImmersionSection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub experiment: Vec<ExperimentSection>,
}

fn default_output() -> String {
    "out".into()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Toml(e.to_string()))?;
        cfg.check_bounds()?;
        Ok(cfg)
    }

    /// The configuration with every default written out.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config is representable in TOML")
    }

    fn check_bounds(&self) -> Result<(), ConfigError> {
        if let Some(d) = &self.discretization {
            for (axis, n) in [("ny", d.ny), ("nz", d.nz), ("nt", d.nt)] {
                if !(1..=MAX_MODES).contains(&n) {
                    return Err(invalid("discretization", format!("{axis} = {n} is outside 1..={MAX_MODES}")));
                }
            }
        }
        Ok(())
    }

    pub fn surface(&self) -> Result<SurfacePatch, ConfigError> {
        let s = self.surface.as_ref().ok_or(ConfigError::MissingSection("surface"))?;
        build_surface(&s.spec, s.nodes).map_err(|e| invalid("surface", e))
    }

    pub fn material(&self) -> Result<Material, ConfigError> {
        let m = self.material.as_ref().ok_or(ConfigError::MissingSection("material"))?;
        let kind = MaterialKind::parse(&m.kind).map_err(|e| invalid("material", e))?;
        let names = kind.field_names();
        if let Some(extra) = m.fields.keys().find(|k| !names.contains(&k.as_str())) {
            return Err(invalid("material", format!("unknown key `{extra}` for kind {}", kind.name())));
        }
        let texts = names
            .iter()
            .map(|n| m.fields.get(*n).map(FieldValue::text).ok_or_else(|| invalid("material", format!("missing `{n}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let mut mat = Material::new(kind, &refs).map_err(|e| invalid("material", e))?;
        match (m.alpha, m.beta) {
            (Some(alpha), Some(beta)) => mat.growth = Some(GrowthConstants { alpha, beta, rho: m.rho.unwrap_or(0.1) }),
            (None, None) => {}
            _ => return Err(invalid("material", "alpha and beta must be given together")),
        }
        Ok(mat)
    }

    pub fn discretization(&self) -> Result<Discretization, ConfigError> {
        self.discretization.ok_or(ConfigError::MissingSection("discretization"))
    }

    pub fn regime(&self) -> Result<Regime, ConfigError> {
        let r = self.regime.as_ref().ok_or(ConfigError::MissingSection("regime"))?;
        Regime::parse(&r.gamma1.text()).map_err(|e| invalid("regime", e))
    }

    pub fn immersion(&self) -> Result<(Immersion, Displacement), ConfigError> {
        let s = self.immersion.as_ref().ok_or(ConfigError::MissingSection("immersion"))?;
        let need = |v: Option<f64>, key: &str| v.ok_or_else(|| invalid("immersion", format!("`{}` needs `{key}`", s.kind)));
        let imm = match s.kind.as_str() {
            "identity" => Immersion::identity(),
            "roll" => Immersion::roll(need(s.radius, "radius")?),
            "scale" => Immersion::scale(need(s.factor, "factor")?),
            "reflect" => Immersion::reflect(),
            "expr" => {
                let m = s.map.as_ref().ok_or_else(|| invalid("immersion", "`expr` needs `map`"))?;
                Immersion::expr(&m[0], &m[1], &m[2]).map_err(|e| invalid("immersion", e))?
            }
            other => return Err(invalid("immersion", format!("unknown kind `{other}`"))),
        };
        let w = match &s.displacement {
            Some(c) => Displacement::new([&c[0], &c[1], &c[2]]).map_err(|e| invalid("immersion", e))?,
            None => Displacement::zero(),
        };
        Ok((imm, w))
    }

    /// A pairing experiment (`threescale`, `strong` or `osc-z`).
    pub fn pairing(&self, e: &ExperimentSection) -> Result<(ThreeScaleExperiment, Option<CoeffExpr>), ConfigError> {
        let rho = match e.kind {
            ExperimentKind::OscZ => Some(e.expr("rho", &e.rho)?),
            ExperimentKind::Threescale | ExperimentKind::Strong => None,
            _ => return Err(invalid(&e.section(), "not a pairing experiment")),
        };
        let test = match e.kind {
            ExperimentKind::Strong => CoeffExpr::constant(1.0),
            _ => e.expr("test", &e.test)?,
        };
        let exp = ThreeScaleExperiment {
            surface: self.surface()?,
            sequence: e.expr("sequence", &e.sequence)?,
            limit: e.expr("limit", &e.limit)?,
            test,
            eps: e.eps_law()?,
            hs: e.sequence_of_h(),
            quadrature: e.quadrature(),
            cross_check: e.cross_check,
        };
        Ok((exp, rho))
    }

    /// A recovery experiment (`limsup` or `strain`).
    pub fn recovery(&self, e: &ExperimentSection) -> Result<RecoveryConfig, ConfigError> {
        if !matches!(e.kind, ExperimentKind::Limsup | ExperimentKind::Strain) {
            return Err(invalid(&e.section(), "not a recovery experiment"));
        }
        let (immersion, displacement) = self.immersion()?;
        let profiles = Profiles::from_components(e.profiles.iter().map(|(k, v)| (k.as_str(), v.as_slice())))
            .map_err(|err| invalid(&e.section(), err))?;
        Ok(RecoveryConfig {
            surface: self.surface()?,
            immersion,
            displacement,
            regime: self.regime()?,
            eps: e.eps_law()?,
            profiles,
            hs: e.sequence_of_h(),
            quadrature: e.quadrature(),
        })
    }
}
