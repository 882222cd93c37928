//! AEGD, GD and heavy-ball GD on the 100-dimensional diagonal quadratic.
//!
//! Prints the number of iterations each method needs to bring `f` below
//! `1e-8` from `theta0 = 1`.

use aegd::objectives::quadratic100;
use aegd::optimizers::{run, OptimizerConfig, OptimizerKind, StoppingRule};

fn main() -> aegd::Result<()> {
    let q = quadratic100();
    let theta0 = vec![1.0; 100];
    let stop = StoppingRule::iterations(50_000).with_target(1e-8);
    let cases = [
        (
            "gd",
            OptimizerKind::Gd,
            OptimizerConfig::default().with_eta(0.99),
        ),
        (
            "gdm",
            OptimizerKind::Gdm,
            OptimizerConfig::default().with_eta(1.0).with_momentum(0.9),
        ),
        (
            "aegd",
            OptimizerKind::Aegd,
            OptimizerConfig::default().with_eta(5.0),
        ),
    ];
    println!(
        "{:<6} {:>8} {:>12} {:>10}",
        "method", "eta", "iterations", "status"
    );
    for (name, kind, cfg) in cases {
        let trace = run(kind, &q, &theta0, &cfg, &stop, 0)?;
        println!(
            "{name:<6} {:>8} {:>12} {:>10}",
            cfg.eta,
            trace.iterations,
            trace.status.as_str()
        );
    }
    Ok(())
}
