//! Monte Carlo checks of stochastic AEGD on `((x)^2 + (x - 2)^2) / 2` with
//! one component sampled per step.

use aegd::analysis::{
    check_direction_estimate, check_stochastic_stability, MonteCarlo, RegionBounds,
};
use aegd::objectives::{two_well_sum, SamplingKind, SamplingScheme};
use aegd::optimizers::OptimizerConfig;

fn main() -> aegd::Result<()> {
    let fs = two_well_sum();
    let cfg = OptimizerConfig::default().with_sampling(SamplingScheme::new(SamplingKind::Iid, 1));
    let mc = MonteCarlo {
        trials: 1000,
        steps: 1000,
        seed: 0,
    };
    let rep = check_stochastic_stability(&fs, &cfg, &[1.0], &mc, &[0, 10, 100, 1000])?;
    for c in &rep.checkpoints {
        println!("E[r_{}] = {:.5} +- {:.5}", c.k, c.mean_r[0], c.se_r[0]);
    }
    println!(
        "E[sum |dtheta|^2] = {:.4} (bound {:.4}); monotone {}, within bound {}",
        rep.cumulative_disp[0], rep.disp_bound, rep.monotone, rep.within_bound
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
    for row in &dir.rows {
        println!(
            "k = {:>3}: mean v^2 {:.5} <= {:.5}: {}",
            row.k, row.lhs, row.rhs, row.holds
        );
    }
    Ok(())
}
