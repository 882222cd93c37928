//! Locates the step size at which AEGD's terminal energy collapses on the
//! two-dimensional Rosenbrock function started at `(-3, -4)`.

use aegd::analysis::{find_eta_threshold, ThresholdOptions};
use aegd::objectives::rosenbrock2d;
use aegd::optimizers::OptimizerConfig;

fn main() -> aegd::Result<()> {
    let f = rosenbrock2d();
    let report = find_eta_threshold(
        &f,
        &[-3.0, -4.0],
        &OptimizerConfig::default(),
        (1e-5, 1e-2),
        &ThresholdOptions::default(),
    )?;
    let mut evaluations = report.evaluations.clone();
    evaluations.sort_by(|a, b| a.eta.total_cmp(&b.eta));
    for e in &evaluations {
        println!(
            "eta {:>12.6e}  r_min {:>12.4e}  f {:>12.4e}  {:?}",
            e.eta, e.terminal_r_min, e.final_f, e.class
        );
    }
    println!(
        "threshold in [{:.4e}, {:.4e}]",
        report.eta_low, report.eta_high
    );
    Ok(())
}
