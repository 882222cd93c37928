use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::objectives::{Objective, SmoothnessProfile};
use crate::optimizers::{
    run_recorded, OptimizerConfig, OptimizerKind, Recording, RunStatus, StoppingRule,
};

/// Smoothness constant of `g = sqrt(f + c)`:
/// `L_g = (L + G^2 / (2 g*^2)) / (2 g*)` with `g* = sqrt(f* + c)`.
pub fn compute_lg(profile: &SmoothnessProfile, c: f64) -> Result<f64> {
    let s = profile.f_star + c;
    if !(s > 0.0) {
        return Err(Error::EnergyShiftViolation(s));
    }
    let l = profile
        .lipschitz
        .ok_or_else(|| Error::InvalidConfig("profile has no smoothness constant".into()))?;
    let g_inf = profile
        .grad_bound
        .ok_or_else(|| Error::InvalidConfig("profile has no gradient bound".into()))?;
    let g_star = s.sqrt();
    Ok((l + g_inf * g_inf / (2.0 * s)) / (2.0 * g_star))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "variant")]
pub enum TauVariant {
    Global,
    /// Element-wise bound, `tau / n`.
    Elementwise {
        n: usize,
    },
    /// Restart bound from the state at some `k0`.
    LateStage {
        r_k0: f64,
        f_k0: f64,
    },
}

/// Step-size bound below which the terminal energy is guaranteed positive.
pub fn compute_tau(
    profile: &SmoothnessProfile,
    c: f64,
    f_theta0: f64,
    variant: TauVariant,
) -> Result<f64> {
    let lg = compute_lg(profile, c)?;
    let g_star = (profile.f_star + c).sqrt();
    let g0_sq = f_theta0 + c;
    if !(g0_sq > 0.0) {
        return Err(Error::EnergyShiftViolation(g0_sq));
    }
    let tau = 2.0 * g_star / (lg * g0_sq);
    match variant {
        TauVariant::Global => Ok(tau),
        TauVariant::Elementwise { n } => {
            if n == 0 {
                return Err(Error::InvalidConfig("dimension must be positive".into()));
            }
            Ok(tau / n as f64)
        }
        TauVariant::LateStage { r_k0, f_k0 } => {
            let s = f_k0 + c;
            if !(s > 0.0) {
                return Err(Error::EnergyShiftViolation(s));
            }
            Ok(2.0 * (g_star + r_k0 - s.sqrt()) / (lg * r_k0 * r_k0))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnergyClass {
    /// Terminal energy above the collapse threshold.
    Positive,
    /// Energy collapsed to (numerically) zero, or the run diverged.
    Collapsed,
}

impl EnergyClass {
    pub fn as_str(self) -> &'static str {
        match self {
            EnergyClass::Positive => "positive",
            EnergyClass::Collapsed => "collapsed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EtaEvaluation {
    pub eta: f64,
    pub r0: f64,
    pub terminal_r_min: f64,
    pub final_f: f64,
    pub status: RunStatus,
    pub class: EnergyClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdOptions {
    pub budget: usize,
    /// Collapse threshold relative to `r0`.
    pub rel_eps: f64,
    /// Stop once `(high - low) / eta_tilde` is at most this.
    pub rel_width: f64,
    /// Interior candidates evaluated concurrently per round.
    pub fan_out: usize,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        Self {
            budget: 100_000,
            rel_eps: 1e-6,
            rel_width: 0.01,
            fan_out: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub tau: Option<f64>,
    pub tau_tilde: Option<f64>,
    pub tau_late: Option<f64>,
    /// Largest evaluated step with positive terminal energy.
    pub eta_low: f64,
    /// Smallest evaluated step with collapsed energy.
    pub eta_high: f64,
    /// Geometric midpoint of the final bracket.
    pub eta_tilde: f64,
    pub evaluations: Vec<EtaEvaluation>,
}

/// Runs AEGD at `eta` for `budget` iterations and classifies the terminal
/// energy against `rel_eps * r0`.
pub fn classify_eta(
    objective: &dyn Objective,
    theta0: &[f64],
    config: &OptimizerConfig,
    eta: f64,
    budget: usize,
    rel_eps: f64,
) -> Result<EtaEvaluation> {
    let cfg = config.clone().with_eta(eta);
    let trace = run_recorded(
        OptimizerKind::Aegd,
        objective,
        theta0,
        &cfg,
        &StoppingRule::iterations(budget),
        0,
        Recording::Endpoints,
    )?;
    let r0 = trace.records[0].r_min;
    let last = trace.last();
    let class = if trace.status != RunStatus::Diverged && last.r_min > rel_eps * r0 {
        EnergyClass::Positive
    } else {
        EnergyClass::Collapsed
    };
    Ok(EtaEvaluation {
        eta,
        r0,
        terminal_r_min: last.r_min,
        final_f: last.f,
        status: trace.status,
        class,
    })
}

/// Locates the step size where AEGD's terminal energy collapses. Each round
/// splits the bracket geometrically at `fan_out` interior points, evaluated
/// concurrently.
pub fn find_eta_threshold(
    objective: &dyn Objective,
    theta0: &[f64],
    config: &OptimizerConfig,
    interval: (f64, f64),
    options: &ThresholdOptions,
) -> Result<ThresholdReport> {
    let (mut lo, mut hi) = interval;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "search interval must satisfy 0 < low < high, got [{lo}, {hi}]"
        )));
    }
    if options.fan_out == 0 || !(options.rel_width > 0.0) {
        return Err(Error::InvalidConfig(
            "bisection needs fan_out >= 1 and a positive width".into(),
        ));
    }
    let classify = |eta: f64| {
        classify_eta(
            objective,
            theta0,
            config,
            eta,
            options.budget,
            options.rel_eps,
        )
    };

    let ends: Vec<EtaEvaluation> = [lo, hi]
        .par_iter()
        .map(|&e| classify(e))
        .collect::<Result<_>>()?;
    if ends[0].class == ends[1].class {
        return Err(Error::BracketInvalid {
            low: lo,
            high: hi,
            class: ends[0].class.as_str(),
        });
    }
    if ends[0].class == EnergyClass::Collapsed {
        return Err(Error::InvalidConfig(format!(
            "bracket [{lo}, {hi}] is inverted: energy collapses only at the low end"
        )));
    }
    let mut evaluations = ends;
    while (hi - lo) / (lo * hi).sqrt() > options.rel_width {
        let ratio = (hi / lo).ln();
        let parts = options.fan_out + 1;
        let probes: Vec<f64> = (1..parts)
            .map(|j| lo * (ratio * j as f64 / parts as f64).exp())
            .collect();
        let results: Vec<EtaEvaluation> = probes
            .par_iter()
            .map(|&e| classify(e))
            .collect::<Result<_>>()?;
        // first collapse from below bounds the new bracket
        let first_collapse = results
            .iter()
            .position(|r| r.class == EnergyClass::Collapsed);
        match first_collapse {
            Some(0) => hi = results[0].eta,
            Some(j) => {
                lo = results[j - 1].eta;
                hi = results[j].eta;
            }
            None => lo = results[results.len() - 1].eta,
        }
        evaluations.extend(results);
    }
    evaluations.sort_by(|a, b| a.eta.total_cmp(&b.eta));

    let mut report = ThresholdReport {
        tau: None,
        tau_tilde: None,
        tau_late: None,
        eta_low: lo,
        eta_high: hi,
        eta_tilde: (lo * hi).sqrt(),
        evaluations,
    };
    if let Some(profile) = objective.profile() {
        let f0 = objective.value(theta0);
        report.tau = compute_tau(profile, config.shift, f0, TauVariant::Global).ok();
        report.tau_tilde = compute_tau(
            profile,
            config.shift,
            f0,
            TauVariant::Elementwise { n: theta0.len() },
        )
        .ok();
    }
    Ok(report)
}
