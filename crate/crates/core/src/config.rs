//! Run configuration: one JSON file with a model section and optional sections per subcommand.

use crate::dde::Rect;
use crate::error::{Error, Result};
use crate::hilbert::{Atom, DensityPiece, StieltjesKernel};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    MackeyGlass {
        #[serde(default = "mg_gamma")]
        gamma: f64,
        #[serde(default = "mg_beta")]
        beta: f64,
        #[serde(default = "mg_kappa")]
        kappa: f64,
        #[serde(default = "one")]
        tau: f64,
    },
    /// Linearization at the positive equilibrium (constant gain).
    MackeyGlassEquilibrium {
        #[serde(default = "mg_gamma")]
        gamma: f64,
        #[serde(default = "mg_beta")]
        beta: f64,
        #[serde(default = "mg_kappa")]
        kappa: f64,
        #[serde(default = "one")]
        tau: f64,
    },
    SuarezSchopf {
        #[serde(default = "ss_alpha")]
        alpha: f64,
        #[serde(default = "ss_tau")]
        tau: f64,
        #[serde(default)]
        x_max: Option<f64>,
    },
    /// `x' = -rate x`, input `B = 1`, measurement `x(t - tau)`.
    Toy {
        #[serde(default = "one")]
        rate: f64,
        #[serde(default = "one")]
        tau: f64,
    },
    Custom {
        tau: f64,
        alpha: KernelLiteral,
        /// `n x r1`, row lists.
        b: Vec<Vec<f64>>,
        c: KernelLiteral,
        lambda: f64,
    },
}

fn mg_gamma() -> f64 {
    0.1
}
fn mg_beta() -> f64 {
    0.2
}
fn mg_kappa() -> f64 {
    10.0
}
fn ss_alpha() -> f64 {
    0.75
}
fn ss_tau() -> f64 {
    0.6
}
fn one() -> f64 {
    1.0
}

impl ModelConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ModelConfig::MackeyGlass { .. } => "mackey-glass",
            ModelConfig::MackeyGlassEquilibrium { .. } => "mackey-glass-equilibrium",
            ModelConfig::SuarezSchopf { .. } => "suarez-schopf",
            ModelConfig::Toy { .. } => "toy",
            ModelConfig::Custom { .. } => "custom",
        }
    }

    pub fn tau(&self) -> f64 {
        match *self {
            ModelConfig::MackeyGlass { tau, .. }
            | ModelConfig::MackeyGlassEquilibrium { tau, .. }
            | ModelConfig::SuarezSchopf { tau, .. }
            | ModelConfig::Toy { tau, .. }
            | ModelConfig::Custom { tau, .. } => tau,
        }
    }

    /// Preset default for `nu0` when the sweep section asks for it.
    pub fn default_nu0(&self) -> Nu0 {
        match self {
            ModelConfig::MackeyGlass { .. } | ModelConfig::SuarezSchopf { .. } => Nu0::Value(0.05),
            _ => Nu0::Auto,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomLiteral {
    pub theta: f64,
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityLiteral {
    pub from: f64,
    pub to: f64,
    pub matrix: Vec<Vec<f64>>,
}

/// Kernel as written in the config: atoms plus an optional density table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelLiteral {
    pub atoms: Vec<AtomLiteral>,
    #[serde(default)]
    pub density: Vec<DensityLiteral>,
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, |x| x.len());
    if r == 0 || c == 0 || rows.iter().any(|x| x.len() != c) {
        return Err(Error::Config(
            "matrices must be nonempty lists of equal-length rows".into(),
        ));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

impl KernelLiteral {
    pub fn to_kernel(&self) -> Result<StieltjesKernel> {
        let atoms = self
            .atoms
            .iter()
            .map(|a| {
                Ok(Atom {
                    theta: a.theta,
                    matrix: matrix_from_rows(&a.matrix)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let density = self
            .density
            .iter()
            .map(|d| {
                Ok(DensityPiece {
                    from: d.from,
                    to: d.to,
                    matrix: matrix_from_rows(&d.matrix)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let first = atoms
            .first()
            .map(|a| a.matrix.shape())
            .or_else(|| density.first().map(|d| d.matrix.shape()))
            .ok_or_else(|| {
                Error::Config("kernel needs at least one atom or density piece".into())
            })?;
        if atoms
            .iter()
            .map(|a| a.matrix.shape())
            .chain(density.iter().map(|d| d.matrix.shape()))
            .any(|s| s != first)
        {
            return Err(Error::Config("kernel matrices differ in shape".into()));
        }
        Ok(StieltjesKernel {
            out_dim: first.0,
            in_dim: first.1,
            atoms,
            density,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Discretization {
    #[serde(default = "default_ng")]
    pub ng: usize,
    /// Integrator steps per grid cell.
    #[serde(default = "one_usize")]
    pub substeps: usize,
}

fn default_ng() -> usize {
    100
}
fn one_usize() -> usize {
    1
}

impl Default for Discretization {
    fn default() -> Self {
        Discretization {
            ng: default_ng(),
            substeps: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    #[serde(default = "default_window")]
    pub root_window: Rect,
    /// Defaults to the root window.
    #[serde(default)]
    pub compound_window: Option<Rect>,
    #[serde(default = "default_max_roots")]
    pub max_roots: usize,
}

fn default_window() -> Rect {
    Rect::new(-6.0, 3.0, -80.0, 80.0)
}
fn default_max_roots() -> usize {
    400
}

impl Default for SpectrumSection {
    fn default() -> Self {
        SpectrumSection {
            root_window: default_window(),
            compound_window: None,
            max_roots: default_max_roots(),
        }
    }
}

/// A number or the string `"auto"`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Nu0 {
    Value(f64),
    Auto,
}

/// A number or the string `"auto-from-preset"`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Lambda {
    Value(f64),
    FromPreset,
}

mod keyword {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn parse<'de, D: Deserializer<'de>, T>(
        d: D,
        word: &str,
        num: fn(f64) -> T,
        kw: T,
    ) -> Result<T, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(f64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(x) => Ok(num(x)),
            Raw::S(s) if s == word => Ok(kw),
            Raw::S(s) => Err(de::Error::custom(format!(
                "expected a number or \"{word}\", got \"{s}\""
            ))),
        }
    }

    pub fn write<S: Serializer>(s: S, value: Option<f64>, word: &str) -> Result<S::Ok, S::Error> {
        match value {
            Some(x) => s.serialize_f64(x),
            None => s.serialize_str(word),
        }
    }
}

fn de_nu0<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Option<Nu0>, D::Error> {
    keyword::parse(d, "auto", Nu0::Value, Nu0::Auto).map(Some)
}

fn ser_nu0<S: serde::Serializer>(v: &Option<Nu0>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(Nu0::Value(x)) => keyword::write(s, Some(*x), "auto"),
        Some(Nu0::Auto) => keyword::write(s, None, "auto"),
        None => s.serialize_none(),
    }
}

fn de_lambda<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Lambda, D::Error> {
    keyword::parse(d, "auto-from-preset", Lambda::Value, Lambda::FromPreset)
}

fn ser_lambda<S: serde::Serializer>(v: &Lambda, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Lambda::Value(x) => keyword::write(s, Some(*x), "auto-from-preset"),
        Lambda::FromPreset => keyword::write(s, None, "auto-from-preset"),
    }
}

fn default_lambda() -> Lambda {
    Lambda::FromPreset
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// `None`: preset default.
    #[serde(default, deserialize_with = "de_nu0", serialize_with = "ser_nu0")]
    pub nu0: Option<Nu0>,
    #[serde(default)]
    pub omega_max: Option<f64>,
    #[serde(default = "d_omega")]
    pub d_omega: f64,
    #[serde(default = "eight")]
    pub n_u: usize,
    #[serde(default = "eight")]
    pub n_m: usize,
    #[serde(default = "horizon")]
    pub horizon: f64,
    #[serde(
        default = "default_lambda",
        deserialize_with = "de_lambda",
        serialize_with = "ser_lambda"
    )]
    pub lambda: Lambda,
    #[serde(default = "two")]
    pub safety: f64,
    #[serde(default)]
    pub refine: bool,
}

fn d_omega() -> f64 {
    0.05
}
fn eight() -> usize {
    8
}
fn horizon() -> f64 {
    120.0
}
fn two() -> f64 {
    2.0
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            nu0: None,
            omega_max: None,
            d_omega: d_omega(),
            n_u: 8,
            n_m: 8,
            horizon: horizon(),
            lambda: Lambda::FromPreset,
            safety: 2.0,
            refine: false,
        }
    }
}

/// Initial history `x(theta) = a + b theta + c sin(omega theta)` in every component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    #[serde(default = "sim_t")]
    pub t_end: f64,
    #[serde(default = "half")]
    pub a: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default)]
    pub c: f64,
    #[serde(default = "one")]
    pub omega: f64,
    /// Write every `every`-th integrator step.
    #[serde(default = "one_usize")]
    pub every: usize,
    #[serde(default)]
    pub with_gain: bool,
}

fn sim_t() -> f64 {
    20.0
}
fn half() -> f64 {
    0.5
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection {
            t_end: sim_t(),
            a: 0.5,
            b: 0.0,
            c: 0.0,
            omega: 1.0,
            every: 1,
            with_gain: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructuralSection {
    #[serde(default = "structural_grids")]
    pub grids: Vec<usize>,
    /// Defaults to `tau`.
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default = "nu_small")]
    pub nu: f64,
}

fn structural_grids() -> Vec<usize> {
    vec![50, 100, 200]
}
fn nu_small() -> f64 {
    0.05
}

impl Default for StructuralSection {
    fn default() -> Self {
        StructuralSection {
            grids: structural_grids(),
            t_end: None,
            nu: nu_small(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    #[serde(default = "oracle_ng")]
    pub ng: usize,
    #[serde(default = "oracle_pairs")]
    pub pairs: usize,
    /// Test fixture: drops the head coupling of the generator check on purpose.
    #[serde(default)]
    pub break_trace_coupling: bool,
}

fn oracle_ng() -> usize {
    32
}
fn oracle_pairs() -> usize {
    5
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection {
            ng: oracle_ng(),
            pairs: oracle_pairs(),
            break_trace_coupling: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub discretization: Discretization,
    #[serde(default = "two_usize")]
    pub m: usize,
    #[serde(default)]
    pub spectrum: SpectrumSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub structural: StructuralSection,
    #[serde(default)]
    pub oracle: OracleSection,
    /// Output directory; the CLI flag wins.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Worker threads; `None` lets rayon decide.
    #[serde(default)]
    pub jobs: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

fn two_usize() -> usize {
    2
}

impl RunConfig {
    /// Defaults around a model section.
    pub fn for_model(model: ModelConfig) -> Self {
        RunConfig {
            model,
            discretization: Discretization::default(),
            m: 2,
            spectrum: SpectrumSection::default(),
            sweep: SweepSection::default(),
            simulate: SimulateSection::default(),
            structural: StructuralSection::default(),
            oracle: OracleSection::default(),
            output: None,
            jobs: None,
            seed: 0,
        }
    }

    /// Parses and validates; syntax errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("{what} must be positive")));
        if !(self.model.tau() > 0.0) {
            return bad("tau");
        }
        if self.discretization.ng < 2 {
            return Err(Error::Config("ng must be at least 2".into()));
        }
        if self.discretization.substeps == 0 {
            return bad("substeps");
        }
        if self.m == 0 {
            return bad("m");
        }
        let s = &self.sweep;
        if !(s.d_omega > 0.0) || !(s.horizon > 0.0) || s.n_u == 0 || s.n_m == 0 {
            return bad("sweep d_omega, horizon, n_u and n_m");
        }
        if s.omega_max.is_some_and(|w| !(w > 0.0)) {
            return bad("omega_max");
        }
        if let Lambda::Value(l) = s.lambda {
            if !(l >= 0.0) {
                return Err(Error::Config("lambda must be nonnegative".into()));
            }
        }
        if !(s.safety >= 1.0) {
            return Err(Error::Config("safety factor must be at least 1".into()));
        }
        if !(self.simulate.t_end > 0.0) || self.simulate.every == 0 {
            return bad("simulate t_end and every");
        }
        if self.structural.grids.len() < 2 || self.structural.grids.iter().any(|&g| g < 2) {
            return Err(Error::Config(
                "structural check needs at least two grids with ng >= 2".into(),
            ));
        }
        if self.structural.t_end.is_some_and(|t| !(t > 0.0)) {
            return bad("structural t_end");
        }
        if self.oracle.ng < 4 || self.oracle.pairs == 0 {
            return Err(Error::Config(
                "oracle needs ng >= 4 and at least one pair".into(),
            ));
        }
        if self.jobs == Some(0) {
            return bad("jobs");
        }
        if let ModelConfig::Custom { alpha, c, b, .. } = &self.model {
            alpha.to_kernel()?;
            c.to_kernel()?;
            matrix_from_rows(b)?;
        }
        Ok(())
    }
}
