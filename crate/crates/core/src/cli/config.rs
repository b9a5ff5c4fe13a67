//! TOML experiment configuration.
//!
//! ```toml
//! experiment = "linear-decay"   # optional; must match the subcommand if present
//! group = "torus3"              # torus1 | torus2 | torus3 | su2-central
//! K = 8
//! b = 1.0
//! m_sq = 1.0
//! p = 2.0
//! T = 20.0
//! dt = 0.01953125               # optional, defaults to T / 1024
//! output = "results"            # optional, overridden by --output
//!
//! [data]
//! seed = 7
//! profile = "random"            # zero | single-mode | random
//! decay_exponent = 1.0          # random only
//! mode = [1, 0, 0]              # single-mode only
//! amplitude = 1.0               # ||u0||_{H^1} + ||u1||_{L^2}
//! ```
//!
//! Optional tables: `[tolerances]`, `[decay]`, `[sweep]`, `[gn]`,
//! `[epsilon]`, `[propagator]`. Unknown keys anywhere are errors.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{DataSpec, Profile};
use crate::gn::theta;
use crate::groups::{GroupKind, GroupSpec};
use crate::semilinear::EpsilonSearch;

/// Experiment selected by the subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    LinearDecay,
    RegimeSweep,
    SemilinearExistence,
    EpsilonThreshold,
    #[serde(rename = "gn-probe")]
    GNProbe,
    PropagatorTable,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::LinearDecay => "linear-decay",
            Experiment::RegimeSweep => "regime-sweep",
            Experiment::SemilinearExistence => "semilinear-existence",
            Experiment::EpsilonThreshold => "epsilon-threshold",
            Experiment::GNProbe => "gn-probe",
            Experiment::PropagatorTable => "propagator-table",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub seed: u64,
    pub profile: String,
    pub decay_exponent: Option<f64>,
    pub mode: Option<Vec<i64>>,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative tolerance on fitted decay rates.
    pub rate: f64,
    /// Allowed factor for the `t e^{-bt/2}` ratio check.
    pub ratio_factor: f64,
    pub picard: f64,
    pub picard_max_iter: usize,
    /// Allowed relative change of the GN max ratio under sample doubling.
    pub gn_stability: f64,
    /// Relative change bound for the `L^q` grid refinement study.
    pub gn_refinement: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rate: 0.02,
            ratio_factor: 2.0,
            picard: 1e-10,
            picard_max_iter: 50,
            gn_stability: 0.05,
            gn_refinement: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecaySection {
    /// Fit window `[start, end]`.
    pub window: [f64; 2],
    /// Number of sample times on `(0, T]`.
    pub samples: usize,
}

impl Default for DecaySection {
    fn default() -> Self {
        DecaySection {
            window: [5.0, 20.0],
            samples: 240,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub b: Vec<f64>,
    pub m_sq: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            b: vec![1.0, 2.0, 3.0],
            m_sq: vec![1.0, 1.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GNSection {
    pub q: f64,
    /// Ensemble size before doubling.
    pub fields: usize,
    /// Decay exponents cycled through the ensemble.
    pub decay_exponents: Vec<f64>,
}

impl Default for GNSection {
    fn default() -> Self {
        GNSection {
            q: 4.0,
            fields: 1000,
            decay_exponents: vec![1.0, 2.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsilonSection {
    pub start: f64,
    pub growth_factor: f64,
    pub max_expansions: usize,
    pub bisection_steps: usize,
}

impl Default for EpsilonSection {
    fn default() -> Self {
        let s = EpsilonSearch::default();
        EpsilonSection {
            start: s.start,
            growth_factor: s.growth_factor,
            max_expansions: s.max_expansions,
            bisection_steps: s.bisection_steps,
        }
    }
}

impl From<EpsilonSection> for EpsilonSearch {
    fn from(s: EpsilonSection) -> Self {
        EpsilonSearch {
            start: s.start,
            growth_factor: s.growth_factor,
            max_expansions: s.max_expansions,
            bisection_steps: s.bisection_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagatorSection {
    /// Eigenvalues to tabulate; defaults to the distinct eigenvalues up to `K`.
    pub lambda_sq: Vec<f64>,
    /// Times to tabulate; defaults to 11 points on `[0, T]`.
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<Experiment>,
    pub group: GroupKind,
    #[serde(rename = "K")]
    pub truncation: u32,
    pub b: f64,
    pub m_sq: f64,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub dt: Option<f64>,
    pub output: Option<PathBuf>,
    pub data: DataSection,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub decay: DecaySection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub gn: GNSection,
    #[serde(default)]
    pub epsilon: EpsilonSection,
    #[serde(default)]
    pub propagator: PropagatorSection,
}

fn default_p() -> f64 {
    2.0
}

/// A configuration problem, anchored to a line of the source when possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// 1-based line of `key = ...` inside `[section]` (top level for `None`).
fn locate(text: &str, section: Option<&str>, key: &str) -> Option<usize> {
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('[') {
            current = rest.split(']').next().map(|s| s.trim().to_string());
            continue;
        }
        if current.as_deref() != section {
            continue;
        }
        if let Some(rest) = line.strip_prefix(key) {
            if rest.trim_start().starts_with('=') {
                return Some(i + 1);
            }
        }
    }
    None
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<(Self, String), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            line: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        let cfg = Self::parse(&text)?;
        Ok((cfg, text))
    }

    /// Parses and validates a TOML document.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            ConfigError {
                line,
                message: e.message().to_string(),
            }
        })?;
        cfg.validate(text)?;
        Ok(cfg)
    }

    fn validate(&self, text: &str) -> Result<(), ConfigError> {
        let fail = |section: Option<&str>, key: &str, message: String| ConfigError {
            line: locate(text, section, key),
            message,
        };
        let positive = |section: Option<&str>, key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(fail(section, key, format!("`{key}` must be positive and finite, got {v}")))
            }
        };
        positive(None, "b", self.b)?;
        positive(None, "m_sq", self.m_sq)?;
        positive(None, "T", self.horizon)?;
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(fail(None, "p", format!("`p` must exceed 1, got {}", self.p)));
        }
        if let Some(dt) = self.dt {
            positive(None, "dt", dt)?;
            if dt > self.horizon {
                return Err(fail(None, "dt", format!("`dt` = {dt} exceeds T = {}", self.horizon)));
            }
            let steps = (self.horizon / dt).round();
            if (steps * dt - self.horizon).abs() > 1e-9 * self.horizon {
                return Err(fail(None, "dt", format!("T = {} is not an integer multiple of dt = {dt}", self.horizon)));
            }
        }
        self.data_spec().map_err(|(key, msg)| fail(Some("data"), key, msg))?;

        let tol = &self.tolerances;
        for (key, v) in [
            ("rate", tol.rate),
            ("ratio_factor", tol.ratio_factor),
            ("picard", tol.picard),
            ("gn_stability", tol.gn_stability),
            ("gn_refinement", tol.gn_refinement),
        ] {
            positive(Some("tolerances"), key, v)?;
        }
        if tol.picard_max_iter == 0 {
            return Err(fail(Some("tolerances"), "picard_max_iter", "`picard_max_iter` must be at least 1".into()));
        }

        let [w0, w1] = self.decay.window;
        if !(w0 >= 0.0 && w0 < w1 && w1 <= self.horizon) {
            return Err(fail(
                Some("decay"),
                "window",
                format!("window [{w0}, {w1}] must satisfy 0 <= start < end <= T = {}", self.horizon),
            ));
        }
        if self.decay.samples < 5 {
            return Err(fail(Some("decay"), "samples", "need at least 5 sample times".into()));
        }

        if self.sweep.b.len() != self.sweep.m_sq.len() || self.sweep.b.is_empty() {
            return Err(fail(Some("sweep"), "b", "`b` and `m_sq` must be nonempty lists of equal length".into()));
        }
        for &v in &self.sweep.b {
            positive(Some("sweep"), "b", v)?;
        }
        for &v in &self.sweep.m_sq {
            positive(Some("sweep"), "m_sq", v)?;
        }

        if self.experiment == Some(Experiment::GNProbe) {
            let n = GroupSpec::new(self.group).topological_dimension();
            theta(n, self.gn.q).map_err(|e| fail(Some("gn"), "q", e.to_string()))?;
        }
        if self.gn.fields == 0 {
            return Err(fail(Some("gn"), "fields", "need at least one field".into()));
        }
        if self.gn.decay_exponents.is_empty() || self.gn.decay_exponents.iter().any(|r| !r.is_finite()) {
            return Err(fail(Some("gn"), "decay_exponents", "need a nonempty list of finite exponents".into()));
        }

        let eps = &self.epsilon;
        positive(Some("epsilon"), "start", eps.start)?;
        if !(eps.growth_factor > 1.0 && eps.growth_factor.is_finite()) {
            return Err(fail(Some("epsilon"), "growth_factor", "`growth_factor` must exceed 1".into()));
        }

        for &l in &self.propagator.lambda_sq {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(fail(Some("propagator"), "lambda_sq", format!("eigenvalues must be >= 0, got {l}")));
            }
        }
        for &t in &self.propagator.times {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(fail(Some("propagator"), "times", format!("times must be >= 0, got {t}")));
            }
        }
        Ok(())
    }

    pub fn group_spec(&self) -> GroupSpec {
        GroupSpec::new(self.group)
    }

    /// Number of Duhamel steps, `T / dt` (1024 when `dt` is absent).
    pub fn steps(&self) -> usize {
        match self.dt {
            Some(dt) => (self.horizon / dt).round() as usize,
            None => 1024,
        }
    }

    /// The `[data]` table as a [`DataSpec`]; errors name the offending key.
    pub fn data_spec(&self) -> Result<DataSpec, (&'static str, String)> {
        let d = &self.data;
        if !(d.amplitude >= 0.0 && d.amplitude.is_finite()) {
            return Err(("amplitude", format!("`amplitude` must be finite and >= 0, got {}", d.amplitude)));
        }
        let profile = match d.profile.as_str() {
            "zero" => Profile::Zero,
            "single-mode" => Profile::SingleMode {
                mode: d
                    .mode
                    .clone()
                    .ok_or(("profile", "profile `single-mode` needs `mode`".to_string()))?,
            },
            "random" => {
                let r = d
                    .decay_exponent
                    .ok_or(("profile", "profile `random` needs `decay_exponent`".to_string()))?;
                if !r.is_finite() {
                    return Err(("decay_exponent", "`decay_exponent` must be finite".into()));
                }
                Profile::Random { decay_exponent: r }
            }
            other => {
                return Err((
                    "profile",
                    format!("unknown profile `{other}`; expected zero, single-mode or random"),
                ))
            }
        };
        Ok(DataSpec {
            seed: d.seed,
            profile,
            amplitude: d.amplitude,
        })
    }
}
