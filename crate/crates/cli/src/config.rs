use serde::{Deserialize, Serialize};
use std::path::Path;
use vwave_core::perturb::Pattern;
use vwave_core::singular::DegeneracyScales;

fn zero() -> String {
    "0".into()
}

/// A run document. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// wave speed as a function of `u`
    pub c: String,
    /// initial data in `x` (and `lambda` for sweeps)
    #[serde(default = "zero")]
    pub u0: String,
    #[serde(default = "zero")]
    pub u1: String,
    #[serde(rename = "M")]
    pub m: f64,
    pub h: f64,
    #[serde(default)]
    pub kappa: f64,
    /// time horizon; with no `t_samples`, five equally spaced times in `[0, T]`
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default)]
    pub t_samples: Vec<f64>,
    /// accept a wave speed failing the Morse condition
    #[serde(default)]
    pub morse_override: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_range: Option<[f64; 2]>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub relabel: RelabelConfig,
    #[serde(default)]
    pub perturb: PerturbConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// vertex classification tolerance; default `10 h^2`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub singular: Option<f64>,
    /// residual level that opens a sweep bracket
    pub threshold: f64,
    pub lambda_tol: f64,
    pub scales: DegeneracyScales,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { singular: None, threshold: 0.05, lambda_tol: 1e-3, scales: DegeneracyScales::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RelabelConfig {
    /// `X = phi(X~)`, in the variable `s`
    pub phi: String,
    pub psi: String,
}

impl Default for RelabelConfig {
    fn default() -> Self {
        RelabelConfig { phi: "2*s".into(), psi: "1.5*s".into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbBase {
    /// polynomial profile built to hit the pattern's degenerate point
    Engineered,
    /// the configured initial data
    Data,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbConfig {
    pub pattern: Pattern,
    pub base: PerturbBase,
    /// `X0` of the centre on the initial line
    pub center: f64,
    pub radius: f64,
    pub delta: f64,
    /// zero of `c'` used by the engineered P3 base
    pub u_root: f64,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        PerturbConfig { pattern: Pattern::P1, base: PerturbBase::Engineered, center: 0.0, radius: 0.5, delta: 1e-3, u_root: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    /// `u0`, `u1` as expressions in `x` and `lambda`
    Expr,
    /// polynomial line profile through `(w, z, w_X) = (pi, pi, 0)` at `lambda_star`
    Crossing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub family: FamilyKind,
    pub n_lambda: usize,
    pub lambda_star: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { family: FamilyKind::Expr, n_lambda: 33, lambda_star: 0.5 }
    }
}

#[derive(Debug)]
pub enum ConfigError {
    Io(String),
    Parse(String),
    Invalid(String),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Io(m) => write!(f, "cannot read config: {m}"),
            ConfigError::Parse(m) => write!(f, "invalid config: {m}"),
            ConfigError::Invalid(m) => write!(f, "invalid config: {m}"),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Schema checks that do not need the solver.
    pub fn check(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(self.h > 0.0) || !(self.m > 0.0) {
            return bad(format!("M = {} and h = {} must be positive", self.m, self.h));
        }
        let k = self.m / self.h;
        if (k - k.round()).abs() > 1e-9 * k.max(1.0) {
            return bad(format!("h = {} does not divide M = {}", self.h, self.m));
        }
        if let Some(t) = self.t_max {
            if !(t >= 0.0) {
                return bad(format!("T = {t} must be non-negative"));
            }
        }
        if self.t_samples.iter().any(|t| !t.is_finite()) {
            return bad("t_samples must be finite".into());
        }
        if self.sweep.n_lambda < 2 {
            return bad("sweep.n_lambda must be at least 2".into());
        }
        if !(self.tolerances.lambda_tol > 0.0) || !(self.tolerances.threshold > 0.0) {
            return bad("tolerances.lambda_tol and tolerances.threshold must be positive".into());
        }
        Ok(())
    }

    /// The sampled times: `t_samples`, or five points spanning `[0, T]`.
    pub fn times(&self) -> Vec<f64> {
        if !self.t_samples.is_empty() {
            return self.t_samples.clone();
        }
        match self.t_max {
            Some(t) => (0..5).map(|k| t * k as f64 / 4.0).collect(),
            None => Vec::new(),
        }
    }
}
