//! Fits the linear rate of AEGD on a strongly convex quadratic and on a
//! non-convex function satisfying the PL inequality, and compares each fit
//! with the guaranteed contraction.

use aegd::analysis::{fit_convergence_rate, linear_rate_bound, FitOptions, RateCase, RateKind};
use aegd::objectives::{pl_example1d, quadratic100, Objective};
use aegd::optimizers::{run, OptimizerConfig, OptimizerKind, StoppingRule};

fn report(
    name: &str,
    f: &dyn Objective,
    theta0: &[f64],
    iters: usize,
    floor: f64,
    case: RateCase,
) -> aegd::Result<()> {
    let cfg = OptimizerConfig::default().with_eta(0.1);
    let trace = run(
        OptimizerKind::Aegd,
        f,
        theta0,
        &cfg,
        &StoppingRule::iterations(iters),
        0,
    )?;
    let fit = fit_convergence_rate(
        &trace,
        RateKind::Linear,
        0.0,
        &FitOptions {
            floor,
            ..FitOptions::default()
        },
    )?;
    let bound = linear_rate_bound(&trace, &fit, f.profile().expect("preset profile"), case)?;
    println!(
        "{name}: slope {:.4e} (R^2 {:.5}) vs bound {:.4e}; satisfied {}",
        fit.slope,
        fit.r_squared,
        bound.bound_slope,
        bound.satisfied_by(&fit)
    );
    Ok(())
}

fn main() -> aegd::Result<()> {
    report(
        "quad100",
        &quadratic100(),
        &[1.0; 100],
        20_000,
        1e-14,
        RateCase::StronglyConvex,
    )?;
    report("pl1d", &pl_example1d(), &[3.0], 2000, 1e-200, RateCase::Pl)
}
