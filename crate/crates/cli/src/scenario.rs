//! Scenario files: a TOML document with a mandatory `schema_version`.
//!
//! Parsing (syntax, types, unknown keys) fails with line/column diagnostics;
//! validation (references, required task inputs, positive tolerances) runs
//! afterwards on the typed tree.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::str::FromStr;

use num_rational::BigRational;
use osc_core::stability::{shipped_spec, DegenerationSpec, Flag};
use osc_core::{FibrationModel, LogGrid};
use serde::Deserialize;

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: Option<String>,
    pub description: Option<String>,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub models: BTreeMap<String, ModelConfig>,
    #[serde(default)]
    pub sections: BTreeMap<String, SectionConfig>,
    #[serde(default)]
    pub potentials: BTreeMap<String, PotentialConfig>,
    #[serde(default)]
    pub specs: BTreeMap<String, SpecConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Default node counts for tasks that refine.
    pub refinement: Option<Vec<usize>>,
    #[serde(default)]
    pub tasks: Vec<TaskConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// `X = P(O ⊕ O(a))`.
    #[serde(default)]
    pub a: i64,
    /// Class volume `β` of `L`, as an integer or a `"p/q"` string.
    #[serde(default = "one")]
    pub base_volume: Volume,
    #[serde(default)]
    pub grid: GridConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { a: 0, base_volume: one(), grid: GridConfig::default() }
    }
}

fn one() -> Volume {
    Volume::Int(1)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Volume {
    Int(i64),
    Text(String),
}

impl std::fmt::Display for Volume {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Volume::Int(n) => write!(f, "{n}"),
            Volume::Text(s) => f.write_str(s),
        }
    }
}

impl Volume {
    fn rational(&self) -> Option<BigRational> {
        match self {
            Volume::Int(n) => Some(BigRational::from_integer((*n).into())),
            Volume::Text(s) => BigRational::from_str(s.trim()).ok(),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub s_range: f64,
    pub t_range: f64,
    pub ns: usize,
    pub nt: usize,
    pub order: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        let g = LogGrid::standard();
        GridConfig { s_range: g.s_range, t_range: g.t_range, ns: g.ns, nt: g.nt, order: g.stencil_order }
    }
}

/// Holomorphy-potential section with coefficient
/// `amp · exp(−(s − centre)²/width)`, or the constant `amp` when `width` is
/// absent (an automorphism flow).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionConfig {
    pub amp: f64,
    #[serde(default)]
    pub centre: f64,
    pub width: Option<f64>,
}

impl SectionConfig {
    pub fn coefficient(&self) -> impl Fn(f64) -> f64 + Copy {
        let (amp, centre, width) = (self.amp, self.centre, self.width);
        move |s| match width {
            Some(w) => amp * (-(s - centre).powi(2) / w).exp(),
            None => amp,
        }
    }
}

/// Relatively cscK potential moving the fiber centres by
/// `shift · exp(−(s − centre)²/width)` and adding `base · exp(−s²/base_width)`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub shift: f64,
    #[serde(default)]
    pub centre: f64,
    #[serde(default = "four")]
    pub width: f64,
    #[serde(default)]
    pub base: f64,
    #[serde(default = "three")]
    pub base_width: f64,
}

fn four() -> f64 {
    4.0
}

fn three() -> f64 {
    3.0
}

impl PotentialConfig {
    /// `(δ, f)` scaled by `t` and `t²` respectively.
    pub fn at(&self, t: f64) -> (impl Fn(f64) -> f64 + Sync, impl Fn(f64) -> f64 + Sync) {
        let p = self.clone();
        let q = self.clone();
        (
            move |s: f64| t * p.shift * (-(s - p.centre).powi(2) / p.width).exp(),
            move |s: f64| t * t * q.base * (-(s * s) / q.base_width).exp(),
        )
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecConfig {
    pub bundle: Vec<i64>,
    pub flag: FlagConfig,
    pub weights: [i64; 2],
    #[serde(default = "one_i")]
    pub exponent: i64,
    #[serde(default)]
    pub h_twist_base: i64,
    #[serde(default)]
    pub h_twist_time: i64,
    #[serde(default = "one_i")]
    pub base_degree: i64,
}

fn one_i() -> i64 {
    1
}

/// Either `{ summand = i }` or `{ degree = d, sections = [[..], [..]] }`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlagConfig {
    pub summand: Option<usize>,
    pub degree: Option<i64>,
    pub sections: Option<Vec<Vec<i64>>>,
}

impl SpecConfig {
    fn build(&self, name: &str) -> std::result::Result<DegenerationSpec, String> {
        let flag = match (&self.flag.summand, &self.flag.degree, &self.flag.sections) {
            (Some(i), None, None) => Flag::Summand(*i),
            (None, Some(d), Some(s)) => Flag::SubLine { degree: *d, sections: s.clone() },
            _ => return Err("flag must be either { summand } or { degree, sections }".into()),
        };
        let spec = DegenerationSpec {
            name: name.into(),
            bundle: self.bundle.clone(),
            flag,
            weights: (self.weights[0], self.weights[1]),
            exponent: self.exponent,
            h_twist_base: self.h_twist_base,
            h_twist_time: self.h_twist_time,
            base_degree: self.base_degree,
        };
        spec.validate().map_err(|e| e.to_string())?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "t_scalar")]
    pub scalar_curvature: f64,
    #[serde(default = "t_sc_order")]
    pub scalar_curvature_order: f64,
    #[serde(default = "t_residual")]
    pub residual: f64,
    #[serde(default = "t_res_order")]
    pub residual_order: f64,
    #[serde(default = "t_duality")]
    pub duality: f64,
    #[serde(default = "t_expansion")]
    pub expansion: f64,
    #[serde(default = "t_expansion_slope")]
    pub expansion_slope: f64,
    #[serde(default = "t_convexity")]
    pub convexity: f64,
    #[serde(default = "t_slope")]
    pub slope: f64,
    #[serde(default = "t_curvature")]
    pub curvature: f64,
}

fn t_scalar() -> f64 {
    1e-6
}
fn t_sc_order() -> f64 {
    3.5
}
fn t_residual() -> f64 {
    1e-5
}
fn t_res_order() -> f64 {
    4.0
}
fn t_duality() -> f64 {
    1e-6
}
fn t_expansion() -> f64 {
    0.02
}
fn t_expansion_slope() -> f64 {
    0.3
}
fn t_convexity() -> f64 {
    osc_core::geodesics::CONVEXITY_TOL
}
fn t_slope() -> f64 {
    osc_core::slope::SLOPE_TOL
}
fn t_curvature() -> f64 {
    1e-10
}

impl Default for Tolerances {
    fn default() -> Self {
        toml::from_str("").expect("all tolerances have defaults")
    }
}

impl Tolerances {
    pub const KEYS: [&'static str; 10] = [
        "scalar_curvature",
        "scalar_curvature_order",
        "residual",
        "residual_order",
        "duality",
        "expansion",
        "expansion_slope",
        "convexity",
        "slope",
        "curvature",
    ];

    fn slot(&mut self, key: &str) -> Option<&mut f64> {
        Some(match key {
            "scalar_curvature" => &mut self.scalar_curvature,
            "scalar_curvature_order" => &mut self.scalar_curvature_order,
            "residual" => &mut self.residual,
            "residual_order" => &mut self.residual_order,
            "duality" => &mut self.duality,
            "expansion" => &mut self.expansion,
            "expansion_slope" => &mut self.expansion_slope,
            "convexity" => &mut self.convexity,
            "slope" => &mut self.slope,
            "curvature" => &mut self.curvature,
            _ => return None,
        })
    }

    pub fn entries(&self) -> [(&'static str, f64); 10] {
        let mut copy = *self;
        Self::KEYS.map(|k| (k, *copy.slot(k).expect("listed key")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    ScalarCurvature,
    GeodesicResidual,
    Convexity,
    LogNormDuality,
    MabuchiExpansion,
    Stability,
    SlopeLimit,
    DeligneSlope,
    SectionalCurvature,
}

impl TaskKind {
    pub fn tag(&self) -> &'static str {
        match self {
            TaskKind::ScalarCurvature => "scalar-curvature",
            TaskKind::GeodesicResidual => "geodesic-residual",
            TaskKind::Convexity => "convexity",
            TaskKind::LogNormDuality => "log-norm-duality",
            TaskKind::MabuchiExpansion => "mabuchi-expansion",
            TaskKind::Stability => "stability",
            TaskKind::SlopeLimit => "slope-limit",
            TaskKind::DeligneSlope => "deligne-slope",
            TaskKind::SectionalCurvature => "sectional-curvature",
        }
    }

    /// (required, optional) task inputs besides `name`, `kind`,
    /// `acceptance` and `model`.
    fn inputs(&self) -> (&'static [&'static str], &'static [&'static str]) {
        match self {
            TaskKind::ScalarCurvature => (&[], &["nodes"]),
            TaskKind::GeodesicResidual => (&["section"], &["horizon", "steps", "nodes"]),
            TaskKind::Convexity => (&["section"], &["horizon", "steps", "expect"]),
            TaskKind::LogNormDuality => (&["potential"], &["steps"]),
            TaskKind::MabuchiExpansion => (&["potential"], &["ks"]),
            TaskKind::Stability => (&[], &["specs"]),
            TaskKind::SlopeLimit => (&["spec"], &["nodes"]),
            TaskKind::DeligneSlope => (&["spec"], &[]),
            TaskKind::SectionalCurvature => (&[], &["samples", "seed"]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expect {
    /// Second differences ≥ −tol.
    Convex,
    /// Convex and not affine.
    StrictlyConvex,
    /// |second differences| ≤ tol and ‖ℛφ̇‖² ≤ tol.
    Affine,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub name: String,
    pub kind: TaskKind,
    /// Acceptance-tagged failures always make the run fail.
    #[serde(default)]
    pub acceptance: bool,
    pub model: Option<String>,
    pub spec: Option<String>,
    pub specs: Option<Vec<String>>,
    pub section: Option<String>,
    pub potential: Option<String>,
    pub horizon: Option<f64>,
    pub steps: Option<usize>,
    pub nodes: Option<Vec<usize>>,
    pub ks: Option<Vec<f64>>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub expect: Option<Expect>,
}

impl TaskConfig {
    fn given(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        let mut mark = |present: bool, name: &'static str| {
            if present {
                v.push(name)
            }
        };
        mark(self.spec.is_some(), "spec");
        mark(self.specs.is_some(), "specs");
        mark(self.section.is_some(), "section");
        mark(self.potential.is_some(), "potential");
        mark(self.horizon.is_some(), "horizon");
        mark(self.steps.is_some(), "steps");
        mark(self.nodes.is_some(), "nodes");
        mark(self.ks.is_some(), "ks");
        mark(self.samples.is_some(), "samples");
        mark(self.seed.is_some(), "seed");
        mark(self.expect.is_some(), "expect");
        v
    }
}

/// Overrides from the command line, applied after parsing and before
/// validation.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub tolerances: Vec<(String, f64)>,
    pub grid: Vec<(String, f64)>,
}

fn parse_pairs(text: &str) -> Result<Vec<(String, f64)>> {
    text.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (k, v) = p.split_once('=').ok_or_else(|| CliError::Override(p.into()))?;
            let v: f64 = v.trim().parse().map_err(|_| CliError::Override(p.into()))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

impl Overrides {
    /// `key=value[,key=value…]` for tolerances.
    pub fn add_tolerances(&mut self, text: &str) -> Result<()> {
        self.tolerances.extend(parse_pairs(text)?);
        Ok(())
    }

    /// `key=value[,key=value…]` with keys `s_range, t_range, ns, nt, order`
    /// (`nodes` sets both `ns` and `nt`).
    pub fn add_grid(&mut self, text: &str) -> Result<()> {
        self.grid.extend(parse_pairs(text)?);
        Ok(())
    }
}

/// 1-based line and column of a byte offset.
pub fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

impl Scenario {
    /// Parse without validating.
    pub fn parse(text: &str, origin: &str) -> Result<Scenario> {
        toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((1, 1), |s| line_col(text, s.start));
            CliError::Parse { origin: origin.into(), line, column, message: e.message().trim().to_string() }
        })
    }

    /// Parse, apply overrides, validate.
    pub fn load(text: &str, origin: &str, overrides: &Overrides) -> Result<Scenario> {
        let mut s = Scenario::parse(text, origin)?;
        s.apply(overrides, origin)?;
        s.validate(origin)?;
        Ok(s)
    }

    pub fn apply(&mut self, o: &Overrides, origin: &str) -> Result<()> {
        let invalid = |message: String| CliError::Validation { origin: origin.into(), message };
        for (k, v) in &o.tolerances {
            *self.tolerances.slot(k).ok_or_else(|| invalid(format!("unknown tolerance {k:?}")))? = *v;
        }
        let grids = std::iter::once(&mut self.model.grid).chain(self.models.values_mut().map(|m| &mut m.grid));
        for g in grids {
            for (k, v) in &o.grid {
                let count = || {
                    if *v >= 1.0 && v.fract() == 0.0 {
                        Ok(*v as usize)
                    } else {
                        Err(invalid(format!("grid override {k} must be a positive integer")))
                    }
                };
                match k.as_str() {
                    "s_range" => g.s_range = *v,
                    "t_range" => g.t_range = *v,
                    "ns" => g.ns = count()?,
                    "nt" => g.nt = count()?,
                    "nodes" => {
                        g.ns = count()?;
                        g.nt = count()?;
                    }
                    "order" => g.order = count()?,
                    _ => return Err(invalid(format!("unknown grid key {k:?}"))),
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self, origin: &str) -> Result<()> {
        let fail = |message: String| Err(CliError::Validation { origin: origin.into(), message });
        if self.schema_version != SCHEMA_VERSION {
            return fail(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        for (name, t) in self.tolerances.entries() {
            if !(t > 0.0 && t.is_finite()) {
                return fail(format!("tolerance {name} must be positive, got {t}"));
            }
        }
        let models = std::iter::once(("<default>", &self.model)).chain(self.models.iter().map(|(k, v)| (k.as_str(), v)));
        for (name, m) in models {
            if let Err(e) = self.build_model_config(m) {
                return fail(format!("model {name}: {e}"));
            }
        }
        for (name, s) in &self.specs {
            if shipped_spec(name).is_some() {
                return fail(format!("spec {name:?} shadows a shipped spec"));
            }
            if let Err(e) = s.build(name) {
                return fail(format!("spec {name}: {e}"));
            }
        }
        for (name, s) in &self.sections {
            if s.width.is_some_and(|w| !(w > 0.0)) {
                return fail(format!("section {name}: width must be positive"));
            }
        }
        for (name, p) in &self.potentials {
            if !(p.width > 0.0 && p.base_width > 0.0) {
                return fail(format!("potential {name}: widths must be positive"));
            }
        }
        if let Some(r) = &self.refinement {
            if let Err(e) = check_nodes(r) {
                return fail(format!("refinement: {e}"));
            }
        }
        let mut names = BTreeSet::new();
        for t in &self.tasks {
            let ctx = |m: String| format!("task {:?}: {m}", t.name);
            if t.name.is_empty() || !t.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
                return fail(ctx("name must be non-empty and use only [A-Za-z0-9_-]".into()));
            }
            if t.name == "summary" || !names.insert(t.name.as_str()) {
                return fail(ctx("duplicate or reserved task name".into()));
            }
            let (required, optional) = t.kind.inputs();
            let given = t.given();
            for r in required {
                if !given.contains(r) {
                    return fail(ctx(format!("{} requires `{r}`", t.kind.tag())));
                }
            }
            for g in &given {
                if !required.contains(g) && !optional.contains(g) {
                    return fail(ctx(format!("`{g}` does not apply to {}", t.kind.tag())));
                }
            }
            if let Some(m) = &t.model {
                if !self.models.contains_key(m) {
                    return fail(ctx(format!("undefined model {m:?}")));
                }
            }
            if let Some(s) = &t.section {
                if !self.sections.contains_key(s) {
                    return fail(ctx(format!("undefined section {s:?}")));
                }
            }
            if let Some(p) = &t.potential {
                if !self.potentials.contains_key(p) {
                    return fail(ctx(format!("undefined potential {p:?}")));
                }
            }
            for s in t.spec.iter().chain(t.specs.iter().flatten()) {
                if self.resolve_spec(s).is_none() {
                    return fail(ctx(format!("undefined spec {s:?}")));
                }
            }
            if let Some(n) = &t.nodes {
                if let Err(e) = check_nodes(n) {
                    return fail(ctx(format!("nodes: {e}")));
                }
            }
            if let Some(ks) = &t.ks {
                if ks.len() < 4 || ks.iter().any(|k| !(*k > 0.0)) || ks.windows(2).any(|w| w[1] <= w[0]) {
                    return fail(ctx("ks must be at least 4 increasing positive values".into()));
                }
            }
            if t.horizon.is_some_and(|h| !(h > 0.0)) {
                return fail(ctx("horizon must be positive".into()));
            }
            if t.steps.is_some_and(|s| s < 2) || t.samples == Some(0) {
                return fail(ctx("steps must be >= 2 and samples >= 1".into()));
            }
        }
        Ok(())
    }

    fn build_model_config(&self, m: &ModelConfig) -> std::result::Result<FibrationModel, String> {
        let beta = m.base_volume.rational().ok_or("base_volume must be an integer or \"p/q\"")?;
        let g = &m.grid;
        let grid = LogGrid::new(g.s_range, g.t_range, g.ns, g.nt, g.order).map_err(|e| e.to_string())?;
        FibrationModel::new(m.a, beta, grid).map_err(|e| e.to_string())
    }

    /// The model a task runs on.
    pub fn model_for(&self, task: &TaskConfig) -> osc_core::Result<FibrationModel> {
        let cfg = task.model.as_ref().map_or(&self.model, |m| &self.models[m]);
        self.build_model_config(cfg).map_err(osc_core::Error::Degenerate)
    }

    /// Scenario-defined specs first, then the shipped ones.
    pub fn resolve_spec(&self, name: &str) -> Option<DegenerationSpec> {
        match self.specs.get(name) {
            Some(c) => c.build(name).ok(),
            None => shipped_spec(name),
        }
    }

    pub fn refinement_or(&self, task: &TaskConfig, default: &[usize]) -> Vec<usize> {
        task.nodes.clone().or_else(|| self.refinement.clone()).unwrap_or_else(|| default.to_vec())
    }
}

fn check_nodes(nodes: &[usize]) -> std::result::Result<(), String> {
    if nodes.len() < 2 || nodes[0] < 16 || nodes.windows(2).any(|w| w[1] <= w[0]) {
        return Err("need at least 2 increasing node counts, each >= 16".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_col_counts_from_one() {
        assert_eq!(line_col("ab\ncd", 0), (1, 1));
        assert_eq!(line_col("ab\ncd", 4), (2, 2));
    }

    #[test]
    fn default_tolerances() {
        let t = Tolerances::default();
        assert_eq!(t.slope, 0.05);
        assert_eq!(t.convexity, 1e-7);
    }
}
