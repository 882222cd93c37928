//! Monte Carlo checks of the stochastic energy estimates.
//!
//! Every trial replays stochastic element-wise AEGD on its own random stream,
//! so results do not depend on how trials are scheduled across threads.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::objectives::{
    sampled_value_and_grad, FiniteSumObjective, Objective, Sampler, SamplingKind,
};
use crate::optimizers::{saegd_step, OptimizerConfig};
use crate::rng::stream_rng;

use super::energy::relative_residual;

/// Width of the Monte Carlo error bands, in standard errors.
pub const SE_BAND: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarlo {
    pub trials: usize,
    pub steps: usize,
    pub seed: u64,
}

/// Bounds assumed to hold on the visited region: `f_l + c >= a` and
/// `|grad f_l|_inf <= g_inf` for every component `l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionBounds {
    pub a: f64,
    pub g_inf: f64,
}

struct TrialPath {
    /// `(steps + 1) x n`, row-major.
    r: Vec<f64>,
    v_sq: Vec<f64>,
    cumulative_disp: Vec<f64>,
    max_residual: f64,
}

fn simulate(
    fs: &FiniteSumObjective,
    config: &OptimizerConfig,
    theta0: &[f64],
    steps: usize,
    seed: u64,
    trial: usize,
    region: Option<RegionBounds>,
) -> Result<TrialPath> {
    let n = theta0.len();
    let c = config.shift;
    let mut rng = stream_rng(seed, trial as u64);
    let mut sampler = Sampler::new(config.sampling, fs.len())?;
    let mut theta = theta0.to_vec();
    let mut path = TrialPath {
        r: Vec::with_capacity((steps + 1) * n),
        v_sq: Vec::with_capacity((steps + 1) * n),
        cumulative_disp: vec![0.0; n],
        max_residual: 0.0,
    };
    let mut r: Vec<f64> = Vec::new();
    let mut comp_grad = vec![0.0; n];
    for j in 0..=steps {
        if let Some(b) = region {
            for l in 0..fs.len() {
                let fl = fs.component(l).value_and_gradient(&theta, &mut comp_grad);
                let g_max = comp_grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
                if !(fl + c >= b.a) || !(g_max <= b.g_inf) {
                    return Err(Error::RegionViolation(format!(
                        "trial {trial}, step {j}, component {l}: f_l + c = {}, |grad f_l|_inf = {g_max}",
                        fl + c
                    )));
                }
            }
        }
        let batch = sampler.next_batch(&mut rng)?;
        let (fv, gv) = sampled_value_and_grad(fs, &batch.xi, &theta);
        let s = fv + c;
        if !(s > 0.0) {
            return Err(Error::EnergyShiftViolation(s));
        }
        if j == 0 {
            r = vec![s.sqrt(); n];
        }
        path.r.extend_from_slice(&r);
        let g = s.sqrt();
        path.v_sq.extend(gv.iter().map(|x| (x / (2.0 * g)).powi(2)));
        if j == steps {
            break;
        }
        let out = saegd_step(&theta, &r, fv, &gv, config)?;
        let next_r = out.new_energy.values().to_vec();
        for i in 0..n {
            let d = out.increment[i];
            path.cumulative_disp[i] += d * d;
            if let Some(res) = relative_residual(r[i], next_r[i], &[d], config.eta) {
                path.max_residual = path.max_residual.max(res);
            }
        }
        r = next_r;
        theta = out.new_params.into_inner();
    }
    Ok(path)
}

fn run_trials(
    fs: &FiniteSumObjective,
    config: &OptimizerConfig,
    theta0: &[f64],
    mc: &MonteCarlo,
    region: Option<RegionBounds>,
) -> Result<Vec<TrialPath>> {
    config.validate()?;
    if config.sampling.kind != SamplingKind::Iid {
        return Err(Error::InvalidConfig(
            "stochastic checks need i.i.d. sampling".into(),
        ));
    }
    if mc.trials < 2 {
        return Err(Error::InvalidConfig(
            "Monte Carlo checks need at least two trials".into(),
        ));
    }
    if theta0.len() != fs.dim() {
        return Err(Error::DimensionMismatch {
            expected: fs.dim(),
            found: theta0.len(),
        });
    }
    (0..mc.trials)
        .into_par_iter()
        .map(|t| simulate(fs, config, theta0, mc.steps, mc.seed, t, region))
        .collect()
}

/// Sample mean and standard error of the mean.
pub fn mean_se(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = xs.collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyCheckpoint {
    pub k: usize,
    /// Per coordinate.
    pub mean_r: Vec<f64>,
    pub se_r: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub trials: usize,
    pub steps: usize,
    pub eta: f64,
    pub checkpoints: Vec<EnergyCheckpoint>,
    /// Per coordinate `E[sum_j (theta_{j+1,i} - theta_{j,i})^2]`.
    pub cumulative_disp: Vec<f64>,
    pub cumulative_disp_se: Vec<f64>,
    /// `eta (f(theta_0) + c)`.
    pub disp_bound: f64,
    /// Largest per-step identity residual over all trials.
    pub max_identity_residual: f64,
    /// Mean energy never rises by more than the band between checkpoints.
    pub monotone: bool,
    pub within_bound: bool,
}

impl StabilityReport {
    pub fn passed(&self) -> bool {
        self.monotone && self.within_bound
    }
}

/// Estimates `E[r_k]` at `checkpoints` and the expected cumulative squared
/// displacement, and checks them against monotonicity and the
/// `eta (f(theta_0) + c)` budget.
pub fn check_stochastic_stability(
    fs: &FiniteSumObjective,
    config: &OptimizerConfig,
    theta0: &[f64],
    mc: &MonteCarlo,
    checkpoints: &[usize],
) -> Result<StabilityReport> {
    if let Some(&k) = checkpoints.iter().find(|&&k| k > mc.steps) {
        return Err(Error::InvalidConfig(format!(
            "checkpoint {k} is past the last step {}",
            mc.steps
        )));
    }
    let paths = run_trials(fs, config, theta0, mc, None)?;
    let n = theta0.len();
    let mut ks = checkpoints.to_vec();
    ks.sort_unstable();
    ks.dedup();

    let r_at = |p: &TrialPath, k: usize, i: usize| p.r[k * n + i];
    let points: Vec<EnergyCheckpoint> = ks
        .iter()
        .map(|&k| {
            let (mean_r, se_r) = (0..n)
                .map(|i| mean_se(paths.iter().map(|p| r_at(p, k, i))))
                .unzip();
            EnergyCheckpoint { k, mean_r, se_r }
        })
        .collect();
    let monotone = ks.windows(2).all(|w| {
        (0..n).all(|i| {
            let (rise, se) = mean_se(paths.iter().map(|p| r_at(p, w[1], i) - r_at(p, w[0], i)));
            rise <= SE_BAND * se
        })
    });
    let (cumulative_disp, cumulative_disp_se): (Vec<f64>, Vec<f64>) = (0..n)
        .map(|i| mean_se(paths.iter().map(|p| p.cumulative_disp[i])))
        .unzip();
    let disp_bound = config.eta * (fs.value(theta0) + config.shift);
    let within_bound = cumulative_disp
        .iter()
        .zip(&cumulative_disp_se)
        .all(|(m, se)| *m <= disp_bound + SE_BAND * se);
    Ok(StabilityReport {
        trials: mc.trials,
        steps: mc.steps,
        eta: config.eta,
        checkpoints: points,
        cumulative_disp,
        cumulative_disp_se,
        disp_bound,
        max_identity_residual: paths.iter().map(|p| p.max_residual).fold(0.0, f64::max),
        monotone,
        within_bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionRow {
    pub k: usize,
    pub coordinate: usize,
    /// `(1/k) sum_{j=0}^{k} E[v_{j,i}^2]`.
    pub lhs: f64,
    pub lhs_se: f64,
    pub mean_r_k: f64,
    /// `C_i / (k E[r_{k,i}])`.
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionReport {
    pub bounds: RegionBounds,
    /// `C_i` per coordinate.
    pub constants: Vec<f64>,
    pub rows: Vec<DirectionRow>,
}

impl DirectionReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.holds)
    }
}

/// `(2a + eta G^2) / (4 a eta)`, the factor multiplying `E[r_0]` in `C_i`.
pub fn direction_factor(a: f64, g_inf: f64, eta: f64) -> f64 {
    (2.0 * a + eta * g_inf * g_inf) / (4.0 * a * eta)
}

/// Compares the running mean of `E[v_{j,i}^2]` against `C_i / (k E[r_{k,i}])`
/// at each `k`. The assumed bounds are verified on every visited iterate.
pub fn check_direction_estimate(
    fs: &FiniteSumObjective,
    config: &OptimizerConfig,
    theta0: &[f64],
    mc: &MonteCarlo,
    ks: &[usize],
    bounds: RegionBounds,
) -> Result<DirectionReport> {
    if !(bounds.a > 0.0) {
        return Err(Error::InvalidConfig(
            "lower bound a must be positive".into(),
        ));
    }
    if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > mc.steps) {
        return Err(Error::InvalidConfig(format!(
            "k = {k} must lie in 1..={}",
            mc.steps
        )));
    }
    let paths = run_trials(fs, config, theta0, mc, Some(bounds))?;
    let n = theta0.len();
    let factor = direction_factor(bounds.a, bounds.g_inf, config.eta);
    let constants: Vec<f64> = (0..n)
        .map(|i| mean_se(paths.iter().map(|p| p.r[i])).0 * factor)
        .collect();
    let mut rows = Vec::new();
    for &k in ks {
        for (i, &c_i) in constants.iter().enumerate() {
            let (lhs, lhs_se) = mean_se(
                paths
                    .iter()
                    .map(|p| (0..=k).map(|j| p.v_sq[j * n + i]).sum::<f64>() / k as f64),
            );
            let mean_r_k = mean_se(paths.iter().map(|p| p.r[k * n + i])).0;
            let rhs = c_i / (k as f64 * mean_r_k);
            rows.push(DirectionRow {
                k,
                coordinate: i,
                lhs,
                lhs_se,
                mean_r_k,
                rhs,
                holds: lhs - SE_BAND * lhs_se <= rhs,
            });
        }
    }
    Ok(DirectionReport {
        bounds,
        constants,
        rows,
    })
}
