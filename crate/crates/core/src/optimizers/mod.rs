//! Step rules and the iteration loop.
//!
//! The AEGD family keeps an auxiliary energy `r`, initialised to
//! `sqrt(f(theta_0) + c)` and updated by
//!
//! ```text
//! v       = grad f(theta_k) / (2 sqrt(f(theta_k) + c))
//! r_{k+1} = r_k / (1 + 2 eta v^2)
//! theta_{k+1} = theta_k - 2 eta r_{k+1} v
//! ```
//!
//! either with one scalar `r` (`v^2` read as `|v|^2`) or per coordinate.
//! Whatever `eta > 0`, each step satisfies
//! `r_{k+1}^2 = r_k^2 - (r_{k+1} - r_k)^2 - |theta_{k+1} - theta_k|^2 / eta`.

mod run;
mod step;

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use run::{
    run, run_recorded, run_with_rng, DecayStage, Recording, RunStatus, StepDetail, StoppingRule,
    Trace, TraceRecord, DIVERGENCE_GUARD,
};
pub use step::{
    adam_step, aegd_step_elementwise, aegd_step_global, aegdw_step, gd_step, gdm_step, init_energy,
    init_energy_from_value, saegd_step, AdamState,
};

use crate::error::{Error, Result};
use crate::objectives::SamplingScheme;

/// The iterate. Always non-empty with finite components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidConfig(
                "parameter vector must be non-empty".into(),
            ));
        }
        if let Some(i) = components.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "parameter component {i} is not finite"
            )));
        }
        Ok(Self(components))
    }

    pub(crate) fn from_finite(components: Vec<f64>) -> Result<Self> {
        if components.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteIterate);
        }
        Ok(Self(components))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Energy variable: one scalar, or one value per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EnergyState {
    Global(f64),
    Elementwise(Vec<f64>),
}

impl EnergyState {
    pub fn values(&self) -> &[f64] {
        match self {
            EnergyState::Global(r) => std::slice::from_ref(r),
            EnergyState::Elementwise(r) => r,
        }
    }

    pub fn min(&self) -> f64 {
        self.values().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values()
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mode(&self) -> EnergyMode {
        match self {
            EnergyState::Global(_) => EnergyMode::Global,
            EnergyState::Elementwise(_) => EnergyMode::Elementwise,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnergyMode {
    Global,
    Elementwise,
}

impl FromStr for EnergyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(EnergyMode::Global),
            "elementwise" | "element-wise" => Ok(EnergyMode::Elementwise),
            other => Err(Error::InvalidConfig(format!(
                "unknown energy mode `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    /// Deterministic AEGD; global or element-wise per `OptimizerConfig::mode`.
    Aegd,
    /// Stochastic element-wise AEGD on sampled components.
    Saegd,
    /// Stochastic AEGD with decoupled weight decay.
    Aegdw,
    Gd,
    /// Heavy-ball momentum.
    Gdm,
    Adam,
}

impl OptimizerKind {
    pub fn has_energy(self) -> bool {
        matches!(
            self,
            OptimizerKind::Aegd | OptimizerKind::Saegd | OptimizerKind::Aegdw
        )
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, OptimizerKind::Saegd | OptimizerKind::Aegdw)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            OptimizerKind::Aegd => "aegd",
            OptimizerKind::Saegd => "saegd",
            OptimizerKind::Aegdw => "aegdw",
            OptimizerKind::Gd => "gd",
            OptimizerKind::Gdm => "gdm",
            OptimizerKind::Adam => "adam",
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "aegd" => OptimizerKind::Aegd,
            "saegd" => OptimizerKind::Saegd,
            "aegdw" => OptimizerKind::Aegdw,
            "gd" => OptimizerKind::Gd,
            "gdm" => OptimizerKind::Gdm,
            "adam" => OptimizerKind::Adam,
            other => return Err(Error::InvalidConfig(format!("unknown optimizer `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Base step size.
    pub eta: f64,
    /// Energy shift `c`; `f + c` must stay positive.
    pub shift: f64,
    pub mode: EnergyMode,
    pub momentum: f64,
    pub weight_decay: f64,
    pub adam: AdamParams,
    pub sampling: SamplingScheme,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            eta: 0.1,
            shift: 1.0,
            mode: EnergyMode::Elementwise,
            momentum: 0.9,
            weight_decay: 0.0,
            adam: AdamParams::default(),
            sampling: SamplingScheme::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_shift(mut self, c: f64) -> Self {
        self.shift = c;
        self
    }

    pub fn with_mode(mut self, mode: EnergyMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_momentum(mut self, mu: f64) -> Self {
        self.momentum = mu;
        self
    }

    pub fn with_weight_decay(mut self, lambda: f64) -> Self {
        self.weight_decay = lambda;
        self
    }

    pub fn with_sampling(mut self, sampling: SamplingScheme) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "step size must be positive and finite, got {}",
                self.eta
            )));
        }
        if !self.shift.is_finite() {
            return Err(Error::InvalidConfig("energy shift must be finite".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidConfig(
                "weight decay must be non-negative".into(),
            ));
        }
        let AdamParams {
            beta1,
            beta2,
            epsilon,
        } = self.adam;
        if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(epsilon > 0.0) {
            return Err(Error::InvalidConfig(
                "adam needs beta1, beta2 in [0, 1) and epsilon > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Result of one AEGD-family step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub new_params: ParamVector,
    pub new_energy: EnergyState,
    /// `eta r_{k+1} / sqrt(f + c)`, scalar in global mode.
    pub effective_steps: Vec<f64>,
    /// The computed increment `d`; `new_params` is `theta_k + d` rounded.
    pub increment: Vec<f64>,
    pub displacement_sq: f64,
}
