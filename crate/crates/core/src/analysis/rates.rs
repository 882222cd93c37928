use serde::Serialize;

use crate::error::{Error, Result};
use crate::objectives::SmoothnessProfile;
use crate::optimizers::Trace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RateKind {
    /// `log(f - f*)` against `k`.
    Linear,
    /// `log(f - f*)` against `log k`.
    Sublinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitOptions {
    /// Gaps below this count as numerical floor and end the fitted segment.
    pub floor: f64,
    /// Fewest records the tail half may hold.
    pub min_records: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            floor: 1e-14,
            min_records: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub kind: RateKind,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// First and last iteration inside the fitted window.
    pub first_k: usize,
    pub last_k: usize,
    pub points: usize,
}

impl RateFit {
    /// Per-step contraction factor of `f - f*` for a linear fit.
    pub fn contraction(&self) -> f64 {
        self.slope.exp()
    }
}

/// Least-squares line through `(x, y)`: slope, intercept and `R^2`.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).min(1.0)
    };
    (slope, intercept, r2)
}

/// Fits the decay of `f - f*` over the tail half of the segment that
/// precedes the numerical floor.
pub fn fit_convergence_rate(
    trace: &Trace,
    kind: RateKind,
    f_star: f64,
    options: &FitOptions,
) -> Result<RateFit> {
    let recs = &trace.records;
    let end = recs
        .iter()
        .position(|r| !(r.f - f_star >= options.floor) || !r.f.is_finite())
        .unwrap_or(recs.len());
    let start = (end / 2).max(usize::from(kind == RateKind::Sublinear));
    let window = &recs[start.min(end)..end];
    if window.len() < options.min_records.max(2) {
        return Err(Error::InsufficientDecay(window.len()));
    }
    let x: Vec<f64> = window
        .iter()
        .map(|r| match kind {
            RateKind::Linear => r.k as f64,
            RateKind::Sublinear => (r.k as f64).ln(),
        })
        .collect();
    let y: Vec<f64> = window.iter().map(|r| (r.f - f_star).ln()).collect();
    let (slope, intercept, r_squared) = least_squares(&x, &y);
    Ok(RateFit {
        kind,
        slope,
        intercept,
        r_squared,
        first_k: window[0].k,
        last_k: window[window.len() - 1].k,
        points: window.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateCase {
    /// `f - f* <= exp(-c0 (k - k0) r_k) (f(theta_k0) - f*)`.
    Pl,
    /// `|theta_k - theta*| <= exp(-c2 (k - k0) r_k) |theta_k0 - theta*|`.
    StronglyConvex,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateBound {
    pub case: RateCase,
    /// `c0` or `c2`.
    pub constant: f64,
    /// Smallest energy coordinate at the end of the window.
    pub r_end: f64,
    /// Guaranteed slope of `log(f - f*)`. The distance bound is doubled, as
    /// `f - f*` is squeezed between `alpha/2` and `L/2` times `|theta - theta*|^2`.
    pub bound_slope: f64,
    pub max_eta_eff: f64,
    /// `1/L` or `2/(alpha + L)`.
    pub eta_limit: f64,
    pub hypothesis_holds: bool,
}

impl RateBound {
    /// The fitted decay is at least as fast as guaranteed.
    pub fn satisfied_by(&self, fit: &RateFit) -> bool {
        fit.slope <= self.bound_slope
    }
}

/// Evaluates the linear-rate guarantee on the window of `fit`, together with
/// its step-size hypothesis read off the realized effective steps.
pub fn linear_rate_bound(
    trace: &Trace,
    fit: &RateFit,
    profile: &SmoothnessProfile,
    case: RateCase,
) -> Result<RateBound> {
    let l = profile
        .lipschitz
        .ok_or_else(|| Error::InvalidConfig("rate bound needs a smoothness constant".into()))?;
    let at = |k: usize| {
        trace
            .records
            .iter()
            .find(|r| r.k == k)
            .ok_or(Error::InsufficientDecay(0))
    };
    let (first, last) = (at(fit.first_k)?, at(fit.last_k)?);
    let g0 = (first.f + trace.shift).sqrt();
    let max_eta_eff = trace
        .records
        .iter()
        .filter(|r| r.k > fit.first_k && r.k <= fit.last_k)
        .map(|r| r.eta_eff_max)
        .fold(f64::NEG_INFINITY, f64::max);
    let (constant, bound_slope, eta_limit) = match case {
        RateCase::Pl => {
            let c0 = profile.pl_constant * trace.eta / g0;
            (c0, -c0 * last.r_min, 1.0 / l)
        }
        RateCase::StronglyConvex => {
            let alpha = profile.strong_convexity;
            let c2 = alpha * trace.eta / g0;
            (c2, -2.0 * c2 * last.r_min, 2.0 / (alpha + l))
        }
    };
    Ok(RateBound {
        case,
        constant,
        r_end: last.r_min,
        bound_slope,
        max_eta_eff,
        eta_limit,
        hypothesis_holds: max_eta_eff <= eta_limit,
    })
}
