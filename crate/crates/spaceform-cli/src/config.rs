//! Experiment configuration files.
//!
//! Parsing is strict: unknown keys are rejected, and every error carries a
//! JSON pointer to the offending value.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_path_to_error::Segment;
use spaceform_core::diff::Stencil;
use spaceform_core::gallery::PhiBranch;
use spaceform_core::grid::ParameterGrid;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: SeedConfig,
    #[serde(default)]
    pub ambient: Option<AmbientConfig>,
    /// Expected target space form of a pair check.
    #[serde(default)]
    pub target: Option<AmbientConfig>,
    pub grid: GridConfig,
    #[serde(default)]
    pub ribaucour: Option<RibaucourConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub rng_seed: u64,
}

/// Either a gallery name or an inline constant triple.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedConfig {
    #[serde(default)]
    pub gallery: Option<String>,
    /// Value of the first integral C for the trivial seeds.
    #[serde(default)]
    pub c_const: Option<f64>,
    /// Family angle for the closed-form gallery transforms.
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub inline: Option<InlineTriple>,
}

/// Constant data (v, h, V). With h = 0 this is holonomic exactly when the
/// Gauss equations εVᵢVⱼ + c vᵢvⱼ = 0 hold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineTriple {
    pub delta: [f64; 3],
    pub v: [f64; 3],
    #[serde(rename = "V")]
    pub big_v: [f64; 3],
    #[serde(default)]
    pub h: Option<[[f64; 3]; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmbientConfig {
    pub c: f64,
    #[serde(default)]
    pub s: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StencilName {
    Order2,
    Order4,
    #[default]
    Order6,
}

impl From<StencilName> for Stencil {
    fn from(s: StencilName) -> Self {
        match s {
            StencilName::Order2 => Stencil::Order2,
            StencilName::Order4 => Stencil::Order4,
            StencilName::Order6 => Stencil::Order6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub n: [usize; 3],
    /// Node carrying the initial data; the central node by default.
    #[serde(default)]
    pub base: Option<[usize; 3]>,
    #[serde(default)]
    pub stencil: StencilName,
}

impl GridConfig {
    pub fn build(&self) -> Result<ParameterGrid> {
        let g = ParameterGrid::new(self.lo, self.hi, self.n).map_err(|e| CliError::schema("/grid", e.to_string()))?;
        match self.base {
            None => Ok(g.centered()),
            Some(b) => g.with_base(b).map_err(|e| CliError::schema("/grid/base", e.to_string())),
        }
    }
}

/// Exactly one of `family`, `preset` and `state`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RibaucourConfig {
    #[serde(default)]
    pub family: Option<FamilyConfig>,
    #[serde(default)]
    pub preset: Option<PresetConfig>,
    #[serde(default)]
    pub state: Option<StateConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub branch: PhiBranch,
    pub k: f64,
    pub c: f64,
    #[serde(default = "one")]
    pub eps: f64,
    /// (φᵢ(0), φᵢ′(0)) per axis.
    pub initial: [[f64; 2]; 3],
    /// Replace the slope of this φ so that the constraint holds.
    #[serde(default)]
    pub solve_slope: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PresetName {
    R4,
    S4,
    Cflat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetConfig {
    pub name: PresetName,
    #[serde(default = "one")]
    pub rho: f64,
    pub theta: f64,
    /// Only used by `cflat`.
    #[serde(default = "minus_one")]
    pub k: f64,
    #[serde(default)]
    pub phases: [f64; 3],
}

/// Raw initial data, completed so that K₁ = 0, K₂ = `k2` and Ω = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateConfig {
    pub gamma: [f64; 3],
    pub beta: f64,
    pub phi: f64,
    pub vprime: [f64; 3],
    pub k2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Integrability residual accepted for input data.
    pub integrability: f64,
    /// Threshold applied to the residuals of each report.
    pub report: f64,
    /// Masking threshold for |φ| and |ψ|; relative to the box when absent.
    pub mask: Option<f64>,
    pub classify: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { integrability: 1e-8, report: 1e-6, mask: None, classify: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub obj: Option<ObjOutput>,
    #[serde(default)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjOutput {
    pub path: PathBuf,
    pub axis: usize,
    pub value: f64,
    #[serde(default = "default_projection")]
    pub projection: Vec<usize>,
}

fn one() -> f64 {
    1.0
}

fn minus_one() -> f64 {
    -1.0
}

fn default_projection() -> Vec<usize> {
    vec![0, 1, 2]
}

fn pointer(path: &serde_path_to_error::Path) -> String {
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
            Segment::Enum { variant } => out.push_str(&format!("/{variant}")),
            Segment::Unknown => out.push_str("/?"),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let p = pointer(e.path());
        CliError::schema(p, e.into_inner().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text)
}

impl ExperimentConfig {
    fn validate(&self) -> Result<()> {
        match (&self.seed.gallery, &self.seed.inline) {
            (Some(_), Some(_)) => {
                return Err(CliError::schema("/seed", "`gallery` and `inline` are mutually exclusive"))
            }
            (None, None) => return Err(CliError::schema("/seed", "one of `gallery` or `inline` is required")),
            _ => {}
        }
        self.grid.build()?;
        if let Some(r) = &self.ribaucour {
            let given = [r.family.is_some(), r.preset.is_some(), r.state.is_some()].iter().filter(|x| **x).count();
            if given != 1 {
                return Err(CliError::schema("/ribaucour", "exactly one of `family`, `preset` or `state` is required"));
            }
        }
        let t = &self.tolerances;
        for (name, v) in [("integrability", t.integrability), ("report", t.report), ("classify", t.classify)] {
            if !(v >= 0.0) {
                return Err(CliError::schema(format!("/tolerances/{name}"), "must be non-negative"));
            }
        }
        if let Some(m) = t.mask {
            if !(m >= 0.0) {
                return Err(CliError::schema("/tolerances/mask", "must be non-negative"));
            }
        }
        Ok(())
    }
}
