use serde::Serialize;

use crate::error::{Error, Result};
use crate::objectives::SmoothnessProfile;
use crate::optimizers::{EnergyMode, OptimizerKind, Trace, TraceRecord};

use super::threshold::{compute_tau, TauVariant};

/// Outcome of replaying the energy identity over a trace.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EnergyAudit {
    pub steps: usize,
    /// Largest `|r1^2 - r0^2 + (r1 - r0)^2 + d^2 / eta| / r0^2` seen.
    pub max_relative_residual: f64,
    /// Coordinates skipped because `r_k` had underflowed below the normal
    /// range, where relative precision is gone.
    pub underflowed: usize,
    /// Coordinates whose energy increased.
    pub increases: usize,
    /// Coordinates that moved while their energy stayed exactly equal
    /// (`2 eta v^2` below rounding).
    pub stalls: usize,
    /// `sum_k |theta_{k+1} - theta_k|^2 / eta_k`.
    pub weighted_displacement: f64,
    /// `sum_i (r_{0,i}^2 - r_{K,i}^2)`.
    pub energy_drop: f64,
}

impl EnergyAudit {
    /// The telescoped identity: displacement never exceeds the energy drop.
    pub fn displacement_bounded(&self, rel_tol: f64) -> bool {
        self.weighted_displacement <= self.energy_drop * (1.0 + rel_tol) + f64::MIN_POSITIVE
    }
}

/// Identity residual of one step divided by `r0^2`; `None` once `r0` has
/// left the normal range.
pub(crate) fn relative_residual(r0: f64, r1: f64, increment: &[f64], eta: f64) -> Option<f64> {
    if r0 < f64::MIN_POSITIVE {
        return None;
    }
    let rho = r1 / r0;
    let scaled: f64 = increment.iter().map(|x| (x / r0) * (x / r0)).sum();
    Some((rho * rho - 1.0 + (rho - 1.0) * (rho - 1.0) + scaled / eta).abs())
}

fn detail(rec: &TraceRecord) -> Result<&crate::optimizers::StepDetail> {
    rec.detail
        .as_ref()
        .ok_or_else(|| Error::NotEnergyTrace("record without per-coordinate detail".into()))
}

/// Replays `r_{k+1}^2 = r_k^2 - (r_{k+1} - r_k)^2 - |theta_{k+1} - theta_k|^2 / eta`
/// step by step, per coordinate in element-wise mode. The residual is
/// evaluated on `r_k`-scaled quantities so it stays meaningful as `r` decays.
pub fn audit_energy_identity(trace: &Trace) -> Result<EnergyAudit> {
    if !matches!(trace.kind, OptimizerKind::Aegd | OptimizerKind::Saegd) {
        return Err(Error::NotEnergyTrace(format!("optimizer `{}`", trace.kind)));
    }
    let mut audit = EnergyAudit::default();
    for pair in trace.records.windows(2) {
        let (before, after) = (detail(&pair[0])?, detail(&pair[1])?);
        let eta = pair[1].eta;
        let inc = &after.increment;
        audit.weighted_displacement += inc.iter().map(|d| d * d).sum::<f64>() / eta;
        let groups: Vec<(f64, f64, Vec<f64>)> = match trace.mode {
            EnergyMode::Global => vec![(before.r[0], after.r[0], inc.clone())],
            EnergyMode::Elementwise => (0..inc.len())
                .map(|i| (before.r[i], after.r[i], vec![inc[i]]))
                .collect(),
        };
        for (r0, r1, d) in groups {
            if r1 > r0 {
                audit.increases += 1;
            }
            if r1 == r0 && d.iter().any(|x| *x != 0.0) && r0 > 0.0 {
                audit.stalls += 1;
            }
            match relative_residual(r0, r1, &d, eta) {
                Some(res) => audit.max_relative_residual = audit.max_relative_residual.max(res),
                None => audit.underflowed += 1,
            }
        }
        audit.steps += 1;
    }
    if let (Some(first), Some(last)) = (trace.records.first(), trace.records.last()) {
        let (a, b) = (detail(first)?, detail(last)?);
        audit.energy_drop = a.r.iter().zip(&b.r).map(|(x, y)| x * x - y * y).sum();
    }
    Ok(audit)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FloorCheck {
    pub tau: f64,
    pub eta: f64,
    /// `g(theta*) (1 - eta / tau)`.
    pub bound: f64,
    pub terminal_r_min: f64,
    pub passed: bool,
}

/// Window over which the energy must have settled before the floor is judged.
pub const STABLE_WINDOW: usize = 100;
pub const STABLE_TOL: f64 = 1e-10;

/// Checks the terminal energy against `g(theta*) (1 - eta / tau)`, using
/// `tau` in global mode and `tau / n` in element-wise mode.
pub fn verify_energy_floor(
    trace: &Trace,
    profile: &SmoothnessProfile,
    f_theta0: f64,
) -> Result<FloorCheck> {
    if !trace.kind.has_energy() {
        return Err(Error::NotEnergyTrace(format!("optimizer `{}`", trace.kind)));
    }
    let recs = &trace.records;
    if recs.len() <= STABLE_WINDOW {
        return Err(Error::NotConverged(f64::INFINITY));
    }
    let last = &recs[recs.len() - 1];
    let earlier = &recs[recs.len() - 1 - STABLE_WINDOW];
    let drift = match (&last.detail, &earlier.detail) {
        (Some(a), Some(b)) => {
            a.r.iter()
                .zip(&b.r)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        }
        _ => (last.r_min - earlier.r_min)
            .abs()
            .max((last.r_max - earlier.r_max).abs()),
    };
    if !(drift < STABLE_TOL) {
        return Err(Error::NotConverged(drift));
    }
    let n = trace.final_params.len();
    let variant = match trace.mode {
        EnergyMode::Global => TauVariant::Global,
        EnergyMode::Elementwise => TauVariant::Elementwise { n },
    };
    let tau = compute_tau(profile, trace.shift, f_theta0, variant)?;
    let g_star = (profile.f_star + trace.shift).sqrt();
    let bound = g_star * (1.0 - trace.eta / tau);
    Ok(FloorCheck {
        tau,
        eta: trace.eta,
        bound,
        terminal_r_min: last.r_min,
        passed: last.r_min > bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{rosenbrock2d, square1d, FnObjective, Objective};
    use crate::optimizers::{run_recorded, OptimizerConfig, Recording, StoppingRule};

    fn full(
        kind: OptimizerKind,
        obj: &dyn Objective,
        theta0: &[f64],
        eta: f64,
        iters: usize,
    ) -> Trace {
        let cfg = OptimizerConfig::default().with_eta(eta);
        run_recorded(
            kind,
            obj,
            theta0,
            &cfg,
            &StoppingRule::iterations(iters),
            0,
            Recording::Full,
        )
        .unwrap()
    }

    #[test]
    fn single_step_on_square() {
        let t = full(OptimizerKind::Aegd, &square1d(), &[1.0], 1.0, 1);
        let audit = audit_energy_identity(&t).unwrap();
        assert_eq!(audit.steps, 1);
        assert!(audit.max_relative_residual < 1e-15);
        // r: sqrt(2) -> sqrt(2)/2, theta: 1 -> 0
        assert!((audit.energy_drop - 1.5).abs() < 1e-15);
        assert!((audit.weighted_displacement - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rosenbrock_identity_across_scales() {
        for eta in [1e-4, 1.0, 100.0] {
            let t = full(
                OptimizerKind::Aegd,
                &rosenbrock2d(),
                &[-3.0, -4.0],
                eta,
                1000,
            );
            let audit = audit_energy_identity(&t).unwrap();
            assert!(
                audit.max_relative_residual < 1e-12,
                "eta {eta}: {}",
                audit.max_relative_residual
            );
            assert_eq!(audit.increases, 0);
            assert!(audit.displacement_bounded(1e-12));
        }
    }

    #[test]
    fn zero_gradient_has_exact_identity() {
        let flat = FnObjective::new(3, |_| 2.0, |_, g| g.fill(0.0));
        let t = full(OptimizerKind::Aegd, &flat, &[1.0, -2.0, 0.5], 0.3, 50);
        let audit = audit_energy_identity(&t).unwrap();
        assert_eq!(audit.max_relative_residual, 0.0);
        assert_eq!(audit.energy_drop, 0.0);
    }

    #[test]
    fn rejects_non_energy_traces() {
        let t = full(OptimizerKind::Gd, &square1d(), &[1.0], 0.1, 5);
        assert!(matches!(
            audit_energy_identity(&t),
            Err(Error::NotEnergyTrace(_))
        ));
        let cfg = OptimizerConfig::default();
        let summary = run_recorded(
            OptimizerKind::Aegd,
            &square1d(),
            &[1.0],
            &cfg,
            &StoppingRule::iterations(5),
            0,
            Recording::Summary,
        )
        .unwrap();
        assert!(matches!(
            audit_energy_identity(&summary),
            Err(Error::NotEnergyTrace(_))
        ));
    }

    #[test]
    fn floor_on_square() {
        let x2 = square1d();
        let t = full(OptimizerKind::Aegd, &x2, &[1.0], 0.1, 5000);
        let check = verify_energy_floor(&t, x2.profile().unwrap(), 1.0).unwrap();
        assert!((check.tau - 0.5).abs() < 1e-15);
        assert!((check.bound - 0.8).abs() < 1e-15);
        assert!(check.passed);
    }

    #[test]
    fn floor_needs_settled_energy() {
        let x2 = square1d();
        let t = full(OptimizerKind::Aegd, &x2, &[1.0], 1e-3, 150);
        assert!(matches!(
            verify_energy_floor(&t, x2.profile().unwrap(), 1.0),
            Err(Error::NotConverged(_))
        ));
    }
}
