//! Replays an AEGD run on Rosenbrock and checks the discrete energy law on
//! every step, for a small, a moderate and a very large step size.

use aegd::analysis::audit_energy_identity;
use aegd::objectives::rosenbrock2d;
use aegd::optimizers::{run_recorded, OptimizerConfig, OptimizerKind, Recording, StoppingRule};

fn main() -> aegd::Result<()> {
    let f = rosenbrock2d();
    for eta in [1e-4, 1.0, 100.0] {
        let cfg = OptimizerConfig::default().with_eta(eta);
        let trace = run_recorded(
            OptimizerKind::Aegd,
            &f,
            &[-3.0, -4.0],
            &cfg,
            &StoppingRule::iterations(5000),
            0,
            Recording::Full,
        )?;
        let audit = audit_energy_identity(&trace)?;
        println!(
            "eta {eta:>8}: {} steps, max residual {:.2e}, energy increases {}, displacement/eta {:.6} <= energy drop {:.6}",
            audit.steps, audit.max_relative_residual, audit.increases, audit.weighted_displacement, audit.energy_drop
        );
    }
    Ok(())
}
