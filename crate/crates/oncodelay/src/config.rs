//! Run configuration: flat TOML with dotted section prefixes, e.g.
//!
//! ```toml
//! model.preset = "oscillatory"
//! grid.n = 199
//! analysis.dose = 0.4
//! simulation.tau = 1.75
//! simulation.horizon = 300.0
//! ```

use std::path::PathBuf;

use oncodelay_core::{BoundaryCondition, ModelParams};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Low-proliferation set, stable for every delay.
    Stable,
    /// Strong-proliferation set with delay-induced oscillations.
    Oscillatory,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub preset: Option<Preset>,
    pub d: Option<f64>,
    pub a1: Option<f64>,
    pub a2: Option<f64>,
    pub u_max: Option<f64>,
    pub r0: Option<f64>,
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BcName {
    #[default]
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub bc: BcName,
}

fn default_n() -> usize {
    199
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            n: default_n(),
            bc: BcName::Dirichlet,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    pub beta: Option<f64>,
    pub dose: Option<f64>,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default = "default_m")]
    pub collocation_m: usize,
    /// Delay bracket for the numerical crossing search; defaults to
    /// `[0, simulation.tau]`.
    pub tau_lo: Option<f64>,
    pub tau_hi: Option<f64>,
}

fn default_k_max() -> usize {
    3
}

fn default_m() -> usize {
    oncodelay_core::char_spectrum::DEFAULT_COLLOCATION_ORDER
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            beta: None,
            dose: None,
            k_max: default_k_max(),
            collocation_m: default_m(),
            tau_lo: None,
            tau_hi: None,
        }
    }
}

/// `simulation.history` is either a constant or `"steady"` (the Newton
/// steady state at the configured treatment rate).
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum HistorySpec {
    Constant(f64),
    Named(String),
}

impl Default for HistorySpec {
    fn default() -> Self {
        HistorySpec::Constant(oncodelay_core::dde_sim::DEFAULT_HISTORY)
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub tau: Option<f64>,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    pub dt: Option<f64>,
    #[serde(default)]
    pub history: HistorySpec,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default = "default_tail")]
    pub tail_fraction: f64,
}

fn default_horizon() -> f64 {
    oncodelay_core::dde_sim::DEFAULT_HORIZON
}

fn default_stride() -> usize {
    100
}

fn default_tail() -> f64 {
    oncodelay_core::dde_sim::DEFAULT_TAIL_FRACTION
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            tau: None,
            horizon: default_horizon(),
            dt: None,
            history: HistorySpec::default(),
            stride: default_stride(),
            tail_fraction: default_tail(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParameter {
    Dose,
    Beta,
    Tau,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Dose => "dose",
            SweepParameter::Beta => "beta",
            SweepParameter::Tau => "tau",
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: SweepParameter,
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
    /// Add a `max_re_lambda` column (one spectrum per point).
    #[serde(default)]
    pub spectrum: bool,
}

impl SweepSection {
    /// Evenly spaced points from `lo` to `hi`; one point means `lo`.
    pub fn points(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.lo];
        }
        let span = self.hi - self.lo;
        (0..self.steps)
            .map(|i| self.lo + span * i as f64 / (self.steps - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub svg: bool,
}

/// Treatment rate with the dose it came from, when known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Treatment {
    pub beta: f64,
    pub dose: f64,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn params(&self) -> Result<ModelParams, CliError> {
        let m = &self.model;
        let base = match m.preset {
            Some(Preset::Stable) => Some(ModelParams::stable_regime()),
            Some(Preset::Oscillatory) => Some(ModelParams::oscillatory_regime()),
            None => None,
        };
        let pick = |name: &str, v: Option<f64>, from: Option<f64>| {
            v.or(from)
                .ok_or_else(|| CliError::Config(format!("model.{name} is required without model.preset")))
        };
        let mut p = ModelParams {
            d: pick("d", m.d, base.map(|b| b.d))?,
            a1: pick("a1", m.a1, base.map(|b| b.a1))?,
            a2: pick("a2", m.a2, base.map(|b| b.a2))?,
            u_max: m.u_max.or(base.map(|b| b.u_max)).unwrap_or(1.0),
            r0: pick("r0", m.r0, base.map(|b| b.r0))?,
            alpha1: pick("alpha1", m.alpha1, base.map(|b| b.alpha1))?,
            alpha2: pick("alpha2", m.alpha2, base.map(|b| b.alpha2))?,
            tau: 0.0,
            bc: match self.grid.bc {
                BcName::Dirichlet => BoundaryCondition::Dirichlet,
                BcName::Neumann => BoundaryCondition::Neumann,
            },
        };
        p.tau = self.tau()?;
        p.validate().map_err(CliError::Core)?;
        Ok(p)
    }

    /// `simulation.tau`, falling back to the preset's delay.
    pub fn tau(&self) -> Result<f64, CliError> {
        let preset = match self.model.preset {
            Some(Preset::Stable) => Some(ModelParams::stable_regime().tau),
            Some(Preset::Oscillatory) => Some(ModelParams::oscillatory_regime().tau),
            None => None,
        };
        self.simulation
            .tau
            .or(preset)
            .ok_or_else(|| CliError::Config("simulation.tau is required without model.preset".into()))
    }

    pub fn treatment(&self) -> Result<Treatment, CliError> {
        let p = self.params()?;
        match (self.analysis.beta, self.analysis.dose) {
            (Some(beta), None) => Ok(Treatment {
                beta,
                dose: p.beta_to_dose(beta).unwrap_or(f64::NAN),
            }),
            (None, Some(dose)) => Ok(Treatment {
                beta: p.dose_to_beta(dose).map_err(CliError::Core)?,
                dose,
            }),
            _ => Err(CliError::Config(
                "exactly one of analysis.beta and analysis.dose must be set".into(),
            )),
        }
    }

    /// Checks everything that can be checked without numerics.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let m = &self.model;
        let mut numbers: Vec<(&str, Option<f64>)> = vec![
            ("model.d", m.d),
            ("model.a1", m.a1),
            ("model.a2", m.a2),
            ("model.u_max", m.u_max),
            ("model.r0", m.r0),
            ("model.alpha1", m.alpha1),
            ("model.alpha2", m.alpha2),
            ("analysis.beta", self.analysis.beta),
            ("analysis.dose", self.analysis.dose),
            ("analysis.tau_lo", self.analysis.tau_lo),
            ("analysis.tau_hi", self.analysis.tau_hi),
            ("simulation.tau", self.simulation.tau),
            ("simulation.horizon", Some(self.simulation.horizon)),
            ("simulation.dt", self.simulation.dt),
            ("simulation.tail_fraction", Some(self.simulation.tail_fraction)),
        ];
        if let HistorySpec::Constant(c) = self.simulation.history {
            numbers.push(("simulation.history", Some(c)));
        }
        if let Some(s) = &self.sweep {
            numbers.push(("sweep.lo", Some(s.lo)));
            numbers.push(("sweep.hi", Some(s.hi)));
        }
        for (name, v) in numbers {
            if let Some(v) = v {
                if !v.is_finite() {
                    return bad(format!("{name} must be finite, got {v}"));
                }
            }
        }

        if let HistorySpec::Named(name) = &self.simulation.history {
            if name != "steady" {
                return bad(format!("simulation.history must be a number or \"steady\", got {name:?}"));
            }
        }
        match (self.analysis.beta, self.analysis.dose) {
            (Some(_), Some(_)) | (None, None) => {
                return bad("exactly one of analysis.beta and analysis.dose must be set".into())
            }
            (Some(b), None) if !(0.0..1.0).contains(&b) => {
                return bad(format!("analysis.beta must lie in [0, 1), got {b}"))
            }
            (None, Some(d)) if d < 0.0 => return bad(format!("analysis.dose must be >= 0, got {d}")),
            _ => {}
        }
        if let Some(t) = self.simulation.tau {
            if t < 0.0 {
                return bad(format!("simulation.tau must be >= 0, got {t}"));
            }
        }
        if !(self.simulation.tail_fraction > 0.0 && self.simulation.tail_fraction <= 1.0) {
            return bad("simulation.tail_fraction must lie in (0, 1]".into());
        }
        if let Some(s) = &self.sweep {
            if s.steps == 0 || s.lo > s.hi || (s.steps > 1 && s.lo == s.hi) {
                return bad(format!(
                    "empty sweep range: lo = {}, hi = {}, steps = {}",
                    s.lo, s.hi, s.steps
                ));
            }
            let ok = match s.parameter {
                SweepParameter::Beta => s.lo >= 0.0 && s.hi < 1.0,
                SweepParameter::Dose | SweepParameter::Tau => s.lo >= 0.0,
            };
            if !ok {
                return bad(format!("sweep range [{}, {}] is outside the {} domain", s.lo, s.hi, s.parameter.name()));
            }
        }
        self.params()?;
        self.treatment()?;
        Ok(())
    }

    /// Sweeps need a treatment only for the delay sweep.
    pub fn validate_sweep(&self) -> Result<&SweepSection, CliError> {
        self.sweep
            .as_ref()
            .ok_or_else(|| CliError::Config("sweep.parameter, sweep.lo, sweep.hi, sweep.steps are required".into()))
    }
}
