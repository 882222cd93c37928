//! Built-in verification suites over the preset problems.

use std::path::Path;
use std::str::FromStr;

use serde::Serialize;
use serde_json::{json, Value};

use super::{emit, EXIT_CHECK_FAILED, EXIT_OK};
use crate::analysis::{
    audit_energy_identity, check_direction_estimate, check_stochastic_stability, compute_tau,
    find_eta_threshold, fit_convergence_rate, linear_rate_bound, verify_energy_floor, FitOptions,
    MonteCarlo, RateCase, RateKind, RegionBounds, TauVariant, ThresholdOptions,
};
use crate::error::{Error, Result};
use crate::objectives::{
    pl_example1d, quadratic100, rosenbrock2d, square1d, two_well_sum, Objective, SamplingKind,
    SamplingScheme,
};
use crate::optimizers::{
    run_recorded, EnergyMode, OptimizerConfig, OptimizerKind, Recording, RunStatus, StoppingRule,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Identity,
    Thresholds,
    Rates,
    Stochastic,
    All,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "identity" => Suite::Identity,
            "thresholds" => Suite::Thresholds,
            "rates" => Suite::Rates,
            "stochastic" => Suite::Stochastic,
            "all" => Suite::All,
            other => {
                return Err(Error::InvalidConfig(format!(
                "unknown suite `{other}` (expected identity, thresholds, rates, stochastic or all)"
            )))
            }
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifySummary {
    pub suite: Suite,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

fn check(name: impl Into<String>, passed: bool, detail: Value) -> CheckResult {
    CheckResult {
        name: name.into(),
        passed,
        detail,
    }
}

fn trace(
    kind: OptimizerKind,
    obj: &dyn Objective,
    theta0: &[f64],
    cfg: &OptimizerConfig,
    iters: usize,
    recording: Recording,
) -> Result<crate::optimizers::Trace> {
    run_recorded(
        kind,
        obj,
        theta0,
        cfg,
        &StoppingRule::iterations(iters),
        0,
        recording,
    )
}

type IdentityCase = (
    String,
    OptimizerKind,
    Box<dyn Objective>,
    Vec<f64>,
    OptimizerConfig,
);

fn identity() -> Result<Vec<CheckResult>> {
    let iid = SamplingScheme::new(SamplingKind::Iid, 1);
    let cases: Vec<IdentityCase> = vec![
        (
            "rosen2d eta=1e-4".into(),
            OptimizerKind::Aegd,
            Box::new(rosenbrock2d()),
            vec![-3.0, -4.0],
            OptimizerConfig::default().with_eta(1e-4),
        ),
        (
            "rosen2d eta=1".into(),
            OptimizerKind::Aegd,
            Box::new(rosenbrock2d()),
            vec![-3.0, -4.0],
            OptimizerConfig::default().with_eta(1.0),
        ),
        (
            "rosen2d eta=100".into(),
            OptimizerKind::Aegd,
            Box::new(rosenbrock2d()),
            vec![-3.0, -4.0],
            OptimizerConfig::default().with_eta(100.0),
        ),
        (
            "quad100 global eta=1".into(),
            OptimizerKind::Aegd,
            Box::new(quadratic100()),
            vec![1.0; 100],
            OptimizerConfig::default()
                .with_eta(1.0)
                .with_mode(EnergyMode::Global),
        ),
        (
            "quad100 eta=30".into(),
            OptimizerKind::Aegd,
            Box::new(quadratic100()),
            vec![1.0; 100],
            OptimizerConfig::default().with_eta(30.0),
        ),
        (
            "pl1d eta=0.1".into(),
            OptimizerKind::Aegd,
            Box::new(pl_example1d()),
            vec![3.0],
            OptimizerConfig::default(),
        ),
        (
            "two-well saegd eta=0.1".into(),
            OptimizerKind::Saegd,
            Box::new(two_well_sum()),
            vec![1.0],
            OptimizerConfig::default().with_sampling(iid),
        ),
    ];
    cases
        .into_iter()
        .map(|(name, kind, obj, theta0, cfg)| {
            let t = trace(kind, obj.as_ref(), &theta0, &cfg, 1000, Recording::Full)?;
            let a = audit_energy_identity(&t)?;
            let passed = a.max_relative_residual < 1e-12
                && a.increases == 0
                && a.displacement_bounded(1e-12);
            Ok(check(
                format!("energy identity: {name}"),
                passed,
                serde_json::to_value(&a)?,
            ))
        })
        .collect()
}

fn thresholds() -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    let x2 = square1d();
    let p = x2.profile().expect("preset profile");
    let tau = compute_tau(p, 1.0, 1.0, TauVariant::Global)?;
    out.push(check(
        "tau on x^2, c = 1, theta0 = 1",
        (tau - 0.5).abs() < 1e-15,
        json!({ "tau": tau }),
    ));
    for eta in [0.05, 0.1, 0.25] {
        let t = trace(
            OptimizerKind::Aegd,
            &x2,
            &[1.0],
            &OptimizerConfig::default().with_eta(eta),
            5000,
            Recording::Summary,
        )?;
        let floor = verify_energy_floor(&t, p, 1.0)?;
        out.push(check(
            format!("energy floor on x^2 at eta = {eta}"),
            floor.passed,
            serde_json::to_value(&floor)?,
        ));
    }

    let q = quadratic100();
    let theta0 = vec![1.0; 100];
    let f0 = q.value(&theta0);
    let qp = q.profile().expect("preset profile");
    let tau = compute_tau(qp, 1.0, f0, TauVariant::Global)?;
    let tau_tilde = compute_tau(qp, 1.0, f0, TauVariant::Elementwise { n: 100 })?;
    let report = find_eta_threshold(
        &q,
        &theta0,
        &OptimizerConfig::default(),
        (1.0, 100.0),
        &ThresholdOptions::default(),
    )?;
    out.push(check(
        "quad100 threshold lies within 10% of 26.51 and above tau",
        (report.eta_tilde / 26.51 - 1.0).abs() <= 0.1 && tau <= report.eta_tilde && (tau_tilde * 100.0 - tau).abs() <= 1e-15 * tau,
        json!({ "eta_low": report.eta_low, "eta_high": report.eta_high, "tau": tau, "tau_tilde": tau_tilde }),
    ));
    let r = rosenbrock2d();
    let report = find_eta_threshold(
        &r,
        &[-3.0, -4.0],
        &OptimizerConfig::default(),
        (1e-5, 1e-2),
        &ThresholdOptions::default(),
    )?;
    out.push(check(
        "rosen2d threshold lies within 10% of 8.4e-4",
        (report.eta_tilde / 8.4e-4 - 1.0).abs() <= 0.1,
        json!({ "eta_low": report.eta_low, "eta_high": report.eta_high }),
    ));

    let gd = |eta: f64| -> Result<RunStatus> {
        let stop = StoppingRule::iterations(50_000).with_target(1e-8);
        Ok(run_recorded(
            OptimizerKind::Gd,
            &q,
            &theta0,
            &OptimizerConfig::default().with_eta(eta),
            &stop,
            0,
            Recording::Endpoints,
        )?
        .status)
    };
    let (below, above) = (gd(0.99)?, gd(1.01)?);
    out.push(check(
        "GD on quad100 converges at 0.99 and diverges at 1.01",
        below == RunStatus::Converged && above == RunStatus::Diverged,
        json!({ "eta_0.99": below.as_str(), "eta_1.01": above.as_str() }),
    ));
    Ok(out)
}

fn rates() -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    let cfg = OptimizerConfig::default().with_eta(0.1);
    let q = quadratic100();
    let t = trace(
        OptimizerKind::Aegd,
        &q,
        &[1.0; 100],
        &cfg,
        20_000,
        Recording::Summary,
    )?;
    let fit = fit_convergence_rate(&t, RateKind::Linear, 0.0, &FitOptions::default())?;
    let bound = linear_rate_bound(
        &t,
        &fit,
        q.profile().expect("preset profile"),
        RateCase::StronglyConvex,
    )?;
    out.push(check(
        "AEGD linear rate on quad100",
        fit.r_squared > 0.99 && bound.satisfied_by(&fit) && bound.hypothesis_holds,
        json!({ "fit": fit, "bound": bound }),
    ));

    let p = pl_example1d();
    let t = trace(
        OptimizerKind::Aegd,
        &p,
        &[3.0],
        &cfg,
        2000,
        Recording::Summary,
    )?;
    let fit = fit_convergence_rate(
        &t,
        RateKind::Linear,
        0.0,
        &FitOptions {
            floor: 1e-200,
            ..FitOptions::default()
        },
    )?;
    let bound = linear_rate_bound(&t, &fit, p.profile().expect("preset profile"), RateCase::Pl)?;
    out.push(check(
        "AEGD linear rate on pl1d",
        fit.r_squared > 0.99 && bound.satisfied_by(&fit) && bound.hypothesis_holds,
        json!({ "fit": fit, "bound": bound }),
    ));

    let t = trace(
        OptimizerKind::Gd,
        &q,
        &[1.0; 100],
        &cfg.clone().with_eta(0.9),
        3000,
        Recording::Summary,
    )?;
    let fit = fit_convergence_rate(&t, RateKind::Linear, 0.0, &FitOptions::default())?;
    let want = (1.0 - 0.9 * 0.02_f64).powi(2);
    out.push(check(
        "GD contraction on quad100 at eta = 0.9",
        (fit.contraction() / want - 1.0).abs() < 5e-4,
        json!({ "fitted": fit.contraction(), "closed_form": want }),
    ));
    Ok(out)
}

fn stochastic() -> Result<Vec<CheckResult>> {
    let fs = two_well_sum();
    let cfg = OptimizerConfig::default().with_sampling(SamplingScheme::new(SamplingKind::Iid, 1));
    let mc = MonteCarlo {
        trials: 1000,
        steps: 1000,
        seed: 0,
    };
    let rep =
        check_stochastic_stability(&fs, &cfg, &[1.0], &mc, &[0, 1, 10, 50, 100, 250, 500, 1000])?;
    let stable = check(
        "stochastic energy stability on the two-well sum",
        rep.passed(),
        serde_json::to_value(&rep)?,
    );
    let mc = MonteCarlo {
        trials: 1000,
        steps: 100,
        seed: 1,
    };
    let dir = check_direction_estimate(
        &fs,
        &cfg,
        &[1.0],
        &mc,
        &[10, 100],
        RegionBounds { a: 1.0, g_inf: 4.0 },
    )?;
    let direction = check(
        "direction-wise estimate on the two-well sum",
        dir.passed(),
        serde_json::to_value(&dir)?,
    );
    Ok(vec![stable, direction])
}

/// Runs `suite`, writes the JSON summary and returns 0 when every check passed.
pub fn cmd_verify(suite: Suite, out: Option<&Path>) -> Result<u8> {
    let checks = match suite {
        Suite::Identity => identity()?,
        Suite::Thresholds => thresholds()?,
        Suite::Rates => rates()?,
        Suite::Stochastic => stochastic()?,
        Suite::All => [identity()?, thresholds()?, rates()?, stochastic()?].concat(),
    };
    for c in &checks {
        eprintln!("{} {}", if c.passed { "PASS" } else { "FAIL" }, c.name);
    }
    let summary = VerifySummary {
        suite,
        passed: checks.iter().all(|c| c.passed),
        checks,
    };
    let mut bytes = serde_json::to_vec_pretty(&summary)?;
    bytes.push(b'\n');
    emit(out, &bytes)?;
    Ok(if summary.passed {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    })
}
