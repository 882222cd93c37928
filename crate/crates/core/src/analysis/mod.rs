//! Checks of the theory on realized runs: the energy identity and its floor,
//! step-size thresholds, fitted convergence rates and Monte Carlo estimates
//! for the stochastic method. All checks are pure functions of traces or of
//! seeded simulations.

mod energy;
mod rates;
mod stochastic;
mod threshold;

use serde::Serialize;

pub use energy::{
    audit_energy_identity, verify_energy_floor, EnergyAudit, FloorCheck, STABLE_TOL, STABLE_WINDOW,
};
pub use rates::{
    fit_convergence_rate, least_squares, linear_rate_bound, FitOptions, RateBound, RateCase,
    RateFit, RateKind,
};
pub use stochastic::{
    check_direction_estimate, check_stochastic_stability, direction_factor, mean_se,
    DirectionReport, DirectionRow, EnergyCheckpoint, MonteCarlo, RegionBounds, StabilityReport,
    SE_BAND,
};
pub use threshold::{
    classify_eta, compute_lg, compute_tau, find_eta_threshold, EnergyClass, EtaEvaluation,
    TauVariant, ThresholdOptions, ThresholdReport,
};

pub use crate::optimizers::{Trace, TraceRecord};

/// Shape of the effective step sequence `eta_k` (largest coordinate).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectiveStepShape {
    /// Iteration at which the running maximum is attained.
    pub peak_k: usize,
    pub peak: f64,
    /// Largest rise `eta_{k+1} - eta_k` after `peak_k + transient`,
    /// relative to the peak.
    pub max_rise_after: f64,
}

impl EffectiveStepShape {
    /// Rises, peaks strictly after the first step, then stays non-increasing
    /// up to `tol`.
    pub fn rises_then_decays(&self, tol: f64) -> bool {
        self.peak_k > 1 && self.max_rise_after <= tol
    }
}

pub fn effective_step_shape(trace: &Trace, transient: usize) -> Option<EffectiveStepShape> {
    let steps: Vec<(usize, f64)> = trace
        .records
        .iter()
        .skip(1)
        .map(|r| (r.k, r.eta_eff_max))
        .collect();
    let &(peak_k, peak) = steps
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))?;
    let max_rise_after = steps
        .windows(2)
        .filter(|w| w[0].0 > peak_k + transient)
        .map(|w| (w[1].1 - w[0].1) / peak)
        .fold(0.0, f64::max);
    Some(EffectiveStepShape {
        peak_k,
        peak,
        max_rise_after,
    })
}
