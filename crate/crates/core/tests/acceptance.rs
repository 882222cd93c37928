//! Acceptance suite. Prints one PASS/FAIL line per criterion, including the
//! runtime against its budget, and exits non-zero if any criterion fails.
//!
//! Run with `cargo test --release --test acceptance`; positional arguments
//! select criteria by number (`cargo test --test acceptance -- 3 5`).

use std::sync::Arc;
use std::time::{Duration, Instant};

use aegd::analysis::{
    check_direction_estimate, check_stochastic_stability, compute_lg, compute_tau,
    find_eta_threshold, fit_convergence_rate, linear_rate_bound, verify_energy_floor, FitOptions,
    MonteCarlo, RateCase, RateKind, RegionBounds, TauVariant, ThresholdOptions,
};
use aegd::kmeans::{
    kmeans_gradient, load_iris, quantization_error, run_kmeans_experiment, CentroidSet,
    KMeansMethod,
};
use aegd::objectives::{
    gradient_check, pl_example1d, preset, quadratic100, rosenbrock2d, sample_batch,
    sampled_value_and_grad, square1d, two_well_sum, FiniteSumObjective, FnObjective, Objective,
    Quadratic, SamplingKind, SamplingScheme, PRESETS,
};
use aegd::optimizers::{
    aegd_step_elementwise, aegd_step_global, run, run_recorded, saegd_step, EnergyMode,
    OptimizerConfig, OptimizerKind, Recording, RunStatus, StoppingRule, Trace,
};
use aegd::rng::stream_rng;
use rand::Rng;

type Check = Result<(bool, String), String>;

struct Criterion {
    id: u32,
    title: &'static str,
    budget: Duration,
    check: fn() -> Check,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

// ---------------------------------------------------------------- 1

/// Replays AEGD-family steps on random problems. Each step is checked against
/// the update written out here, then the energy identity and the strict
/// energy decrease are checked on the library's output. The identity is
/// evaluated on the computed increment `d` with `theta_{k+1} = fl(theta_k + d)`;
/// recovering `d` as `theta_{k+1} - theta_k` would cancel digits once
/// `|d| << |theta_k|`.
fn criterion_1() -> Check {
    let mut rng = stream_rng(2024, 0);
    let mut worst = 0.0_f64;
    let mut worst_update = 0.0_f64;
    let (mut steps, mut underflowed, mut decrease_failures, mut rounding_stalls) =
        (0usize, 0usize, 0usize, 0usize);
    let mut iterate_mismatches = 0usize;
    for trial in 0..100 {
        let eta = 10f64.powf(rng.gen_range(-4.0..3.0));
        let family = trial % 4;
        let (obj, stochastic): (Arc<dyn Objective>, bool) = match family {
            0 => {
                let n = rng.gen_range(1..=20);
                let w = (0..n)
                    .map(|_| 10f64.powf(rng.gen_range(-3.0..3.0)))
                    .collect();
                let c = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
                (Arc::new(Quadratic::new(w, c).map_err(e)?), false)
            }
            1 => (Arc::new(rosenbrock2d()), false),
            2 => (Arc::new(pl_example1d()), false),
            _ => {
                let n = rng.gen_range(1..=5);
                let comps: Vec<Arc<dyn Objective>> = (0..3)
                    .map(|_| {
                        let w = (0..n).map(|_| rng.gen_range(0.1..10.0)).collect();
                        let c = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
                        Arc::new(Quadratic::new(w, c).expect("valid")) as Arc<dyn Objective>
                    })
                    .collect();
                (Arc::new(FiniteSumObjective::new(comps).map_err(e)?), true)
            }
        };
        let global = !stochastic && trial % 8 < 4;
        let n = obj.dim();
        let cfg = OptimizerConfig::default().with_eta(eta);
        let c = cfg.shift;
        let mut theta: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let scheme = SamplingScheme::new(SamplingKind::Iid, 1);
        let mut r: Vec<f64> = Vec::new();
        for k in 0..200 {
            let (f, g) = if stochastic {
                let fs = obj.as_finite_sum().expect("finite sum");
                let batch = sample_batch(&scheme, fs.len(), &mut rng).map_err(e)?;
                sampled_value_and_grad(fs, &batch.xi, &theta)
            } else {
                let mut g = vec![0.0; n];
                let f = obj.value_and_gradient(&theta, &mut g);
                (f, g)
            };
            let gk = (f + c).sqrt();
            if k == 0 {
                r = vec![gk; if global { 1 } else { n }];
            }
            let v: Vec<f64> = g.iter().map(|gi| gi / (2.0 * gk)).collect();
            let out = if stochastic {
                saegd_step(&theta, &r, f, &g, &cfg)
            } else if global {
                aegd_step_global(&theta, r[0], &g, f, &cfg)
            } else {
                aegd_step_elementwise(&theta, &r, &g, f, &cfg)
            }
            .map_err(e)?;
            let r_next = out.new_energy.values().to_vec();
            let next = out.new_params.to_vec();

            let v2: Vec<f64> = if global {
                vec![v.iter().map(|x| x * x).sum()]
            } else {
                v.iter().map(|x| x * x).collect()
            };
            for (j, v2j) in v2.iter().enumerate() {
                let expect_r = r[j] / (1.0 + 2.0 * eta * v2j);
                if expect_r > 0.0 {
                    worst_update = worst_update.max(rel(r_next[j], expect_r));
                }
                let moved: Vec<f64> = if global {
                    (0..n).collect::<Vec<_>>()
                } else {
                    vec![j]
                }
                .into_iter()
                .map(|i| out.increment[i])
                .collect();
                if r[j] < f64::MIN_POSITIVE {
                    underflowed += 1;
                } else {
                    let rho = r_next[j] / r[j];
                    let d2: f64 = moved.iter().map(|d| (d / r[j]) * (d / r[j])).sum();
                    let res = (rho * rho - 1.0 + (rho - 1.0) * (rho - 1.0) + d2 / eta).abs();
                    worst = worst.max(res);
                    let denominator = 1.0 + 2.0 * eta * v2j;
                    if *v2j > 0.0 && denominator > 1.0 && r_next[j] >= r[j] {
                        decrease_failures += 1;
                    }
                    if *v2j > 0.0 && denominator == 1.0 {
                        rounding_stalls += 1;
                    }
                }
            }
            for i in 0..n {
                let j = if global { 0 } else { i };
                let expect = -2.0 * eta * r_next[j] * v[i];
                if expect != 0.0 {
                    worst_update = worst_update.max(rel(out.increment[i], expect));
                }
                if next[i] != theta[i] + out.increment[i] {
                    iterate_mismatches += 1;
                }
            }
            theta = next;
            r = r_next;
            steps += 1;
        }
    }
    let passed =
        worst < 1e-12 && decrease_failures == 0 && worst_update < 1e-14 && iterate_mismatches == 0;
    Ok((
        passed,
        format!(
            "{steps} steps, max relative residual {worst:.2e} (< 1e-12), update mismatch {worst_update:.1e}, \
             non-decreasing energy with nonzero gradient {decrease_failures}, \
             steps with 2*eta*v^2 below rounding {rounding_stalls}, underflowed energies skipped {underflowed}"
        ),
    ))
}

// ---------------------------------------------------------------- 2

fn iterations_to(
    kind: OptimizerKind,
    obj: &dyn Objective,
    theta0: &[f64],
    cfg: &OptimizerConfig,
    target: f64,
) -> Option<usize> {
    let stop = StoppingRule::iterations(100_000).with_target(target);
    let t = run_recorded(kind, obj, theta0, cfg, &stop, 0, Recording::Endpoints).ok()?;
    (t.status == RunStatus::Converged).then_some(t.iterations)
}

fn criterion_2() -> Check {
    let q = quadratic100();
    let x0 = vec![1.0; 100];
    let target = 1e-8;
    let base = OptimizerConfig::default();
    let gd = iterations_to(
        OptimizerKind::Gd,
        &q,
        &x0,
        &base.clone().with_eta(0.99),
        target,
    )
    .ok_or("GD did not converge")?;
    let best = |kind: OptimizerKind, grid: &[f64]| {
        grid.iter()
            .filter_map(|&eta| {
                iterations_to(kind, &q, &x0, &base.clone().with_eta(eta), target).map(|k| (k, eta))
            })
            .min_by_key(|p| p.0)
    };
    let gdm_grid: Vec<f64> = (1..=18).map(|i| 0.1 * i as f64).collect();
    let (gdm, gdm_eta) = best(OptimizerKind::Gdm, &gdm_grid).ok_or("GDM did not converge")?;
    let (aegd, aegd_eta) = best(OptimizerKind::Aegd, &[0.5, 1.0, 2.0, 5.0, 10.0, 20.0])
        .ok_or("AEGD did not converge")?;
    Ok((
        aegd < gd && aegd < gdm,
        format!("iterations to f < 1e-8: AEGD {aegd} (eta {aegd_eta}), GDM {gdm} (eta {gdm_eta:.1}, mu 0.9), GD {gd} (eta 0.99)"),
    ))
}

// ---------------------------------------------------------------- 3

fn gd_status(
    obj: &dyn Objective,
    theta0: &[f64],
    eta: f64,
    budget: usize,
    target: f64,
) -> Result<RunStatus, String> {
    let stop = StoppingRule::iterations(budget).with_target(target);
    let cfg = OptimizerConfig::default().with_eta(eta);
    Ok(run_recorded(
        OptimizerKind::Gd,
        obj,
        theta0,
        &cfg,
        &stop,
        0,
        Recording::Endpoints,
    )
    .map_err(e)?
    .status)
}

fn criterion_3() -> Check {
    let q = quadratic100();
    let x0 = vec![1.0; 100];
    let report = find_eta_threshold(
        &q,
        &x0,
        &OptimizerConfig::default(),
        (1.0, 100.0),
        &ThresholdOptions::default(),
    )
    .map_err(e)?;
    let within = rel(report.eta_tilde, 26.51) <= 0.10;
    let width = (report.eta_high - report.eta_low) / report.eta_tilde;
    let below = gd_status(&q, &x0, 0.99, 50_000, 1e-8)?;
    let above = gd_status(&q, &x0, 1.01, 50_000, 1e-8)?;
    Ok((
        within && width <= 0.01 && below == RunStatus::Converged && above == RunStatus::Diverged,
        format!(
            "eta~ in [{:.3}, {:.3}] (width {:.2}%), target 26.51 +/- 10%; GD at 0.99 {}, at 1.01 {}",
            report.eta_low,
            report.eta_high,
            100.0 * width,
            below.as_str(),
            above.as_str()
        ),
    ))
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Check {
    let r = rosenbrock2d();
    let x0 = [-3.0, -4.0];
    let report = find_eta_threshold(
        &r,
        &x0,
        &OptimizerConfig::default(),
        (1e-5, 1e-2),
        &ThresholdOptions::default(),
    )
    .map_err(e)?;
    let within = rel(report.eta_tilde, 8.4e-4) <= 0.10;
    let gd_converges =
        |eta: f64| gd_status(&r, &x0, eta, 300_000, 1e-8).map(|s| s == RunStatus::Converged);
    // largest converging GD step, bisected to 0.5%
    let (mut lo, mut hi) = (1e-4, 1e-3);
    if !gd_converges(lo)? || gd_converges(hi)? {
        return Err("GD bracket [1e-4, 1e-3] does not straddle its stability limit".into());
    }
    while (hi - lo) / lo > 0.005 {
        let mid = (lo * hi).sqrt();
        if gd_converges(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let gd_limit = (lo * hi).sqrt();
    let below = gd_converges(0.9 * 3.94e-4)?;
    let above = gd_status(&r, &x0, 1.1 * 3.94e-4, 300_000, 1e-8)?;
    Ok((
        within && rel(gd_limit, 3.94e-4) <= 0.10 && below && above == RunStatus::Diverged,
        format!(
            "eta~ in [{:.4e}, {:.4e}], target 8.4e-4 +/- 10%; GD limit {:.3e} (target 3.94e-4 +/- 10%), \
             GD at 0.9x {}, at 1.1x {}",
            report.eta_low,
            report.eta_high,
            gd_limit,
            if below { "converged" } else { "did not converge" },
            above.as_str()
        ),
    ))
}

// ---------------------------------------------------------------- 5

fn criterion_5() -> Check {
    let x2 = square1d();
    let profile = x2.profile().ok_or("missing profile")?;
    // L = 2, G = 2, g* = 1: L_g = (2 + 4/2)/2 = 2 and tau = 2 / (2 * 2) = 0.5
    let lg = compute_lg(profile, 1.0).map_err(e)?;
    let tau = compute_tau(profile, 1.0, 1.0, TauVariant::Global).map_err(e)?;
    let mut ok = (lg - 2.0).abs() < 1e-15 && (tau - 0.5).abs() < 1e-15;
    let mut parts = vec![format!("tau = {tau}")];
    for (eta, bound) in [(0.05, 0.9), (0.1, 0.8), (0.25, 0.5)] {
        let cfg = OptimizerConfig::default().with_eta(eta);
        let t = run(
            OptimizerKind::Aegd,
            &x2,
            &[1.0],
            &cfg,
            &StoppingRule::iterations(5000),
            0,
        )
        .map_err(e)?;
        let check = verify_energy_floor(&t, profile, 1.0).map_err(e)?;
        ok &= check.passed && (check.bound - bound).abs() < 1e-12;
        parts.push(format!(
            "eta {eta}: r* = {:.4} > {bound}",
            check.terminal_r_min
        ));
    }
    Ok((ok, parts.join("; ")))
}

// ---------------------------------------------------------------- 6

fn criterion_6() -> Check {
    let cfg = OptimizerConfig::default().with_eta(0.1);
    let q = quadratic100();
    let tq = run(
        OptimizerKind::Aegd,
        &q,
        &[1.0; 100],
        &cfg,
        &StoppingRule::iterations(20_000),
        0,
    )
    .map_err(e)?;
    let fq = fit_convergence_rate(&tq, RateKind::Linear, 0.0, &FitOptions::default()).map_err(e)?;
    let bq = linear_rate_bound(
        &tq,
        &fq,
        q.profile().ok_or("profile")?,
        RateCase::StronglyConvex,
    )
    .map_err(e)?;
    // c2 = alpha eta / sqrt(f(theta_k0) + c), doubled for f ~ |theta - theta*|^2
    let f_k0 = tq.records[fq.first_k].f;
    let c2 = 0.02 * 0.1 / (f_k0 + 1.0).sqrt();
    let oracle_q = -2.0 * c2 * tq.records[fq.last_k].r_min;

    let p = pl_example1d();
    let tp = run(
        OptimizerKind::Aegd,
        &p,
        &[3.0],
        &cfg,
        &StoppingRule::iterations(2000),
        0,
    )
    .map_err(e)?;
    let fp = fit_convergence_rate(
        &tp,
        RateKind::Linear,
        0.0,
        &FitOptions {
            floor: 1e-200,
            min_records: 50,
        },
    )
    .map_err(e)?;
    let bp = linear_rate_bound(&tp, &fp, p.profile().ok_or("profile")?, RateCase::Pl).map_err(e)?;
    let c0 = 0.1 / 32.0 / (tp.records[fp.first_k].f + 1.0).sqrt();
    let oracle_p = -c0 * tp.records[fp.last_k].r_min;

    let ok_q = fq.r_squared > 0.99
        && fq.slope <= oracle_q
        && rel(bq.bound_slope, oracle_q) < 1e-12
        && bq.max_eta_eff <= 2.0 / 2.02;
    let ok_p = fp.r_squared > 0.99
        && fp.slope <= oracle_p
        && rel(bp.bound_slope, oracle_p) < 1e-12
        && bp.max_eta_eff <= 1.0 / 8.0;
    Ok((
        ok_q && ok_p,
        format!(
            "quad100: R^2 {:.6}, slope {:.5} <= bound {:.5}, max eta_eff {:.3} <= 2/(alpha+L); \
             pl1d: R^2 {:.6}, slope {:.4} <= bound {:.5}, max eta_eff {:.4} <= 1/L",
            fq.r_squared,
            fq.slope,
            oracle_q,
            bq.max_eta_eff,
            fp.r_squared,
            fp.slope,
            oracle_p,
            bp.max_eta_eff
        ),
    ))
}

// ---------------------------------------------------------------- 7

fn iid_config() -> OptimizerConfig {
    OptimizerConfig::default().with_sampling(SamplingScheme::new(SamplingKind::Iid, 1))
}

fn criterion_7() -> Check {
    let fs = two_well_sum();
    let mc = MonteCarlo {
        trials: 1000,
        steps: 1000,
        seed: 7,
    };
    let checkpoints = [0, 1, 2, 5, 10, 20, 50, 100, 200, 500, 1000];
    let rep =
        check_stochastic_stability(&fs, &iid_config(), &[1.0], &mc, &checkpoints).map_err(e)?;
    // f(1) = 1, c = 1
    let bound = 0.1 * (1.0 + 1.0);
    let means: Vec<f64> = rep.checkpoints.iter().map(|c| c.mean_r[0]).collect();
    let monotone_raw = means.windows(2).all(|w| w[1] <= w[0]);
    let within = rep.cumulative_disp[0] <= bound + 3.0 * rep.cumulative_disp_se[0];
    Ok((
        rep.monotone && monotone_raw && within && (rep.disp_bound - bound).abs() < 1e-15,
        format!(
            "E[r_k] at k = 0..1000: {:.3e} -> {:.3e}, monotone {}; sum E[dtheta^2] = {:.4} +/- {:.4} <= {bound}",
            means[0],
            means[means.len() - 1],
            rep.monotone,
            rep.cumulative_disp[0],
            rep.cumulative_disp_se[0]
        ),
    ))
}

// ---------------------------------------------------------------- 8

fn criterion_8() -> Check {
    let fs = two_well_sum();
    let mc = MonteCarlo {
        trials: 1000,
        steps: 100,
        seed: 8,
    };
    // on [0, 2] both f_l + 1 >= 1 and |f_l'| <= 4; checked on every visited point
    let bounds = RegionBounds { a: 1.0, g_inf: 4.0 };
    let rep =
        check_direction_estimate(&fs, &iid_config(), &[1.0], &mc, &[10, 100], bounds).map_err(e)?;
    let eta = 0.1;
    let c_oracle = 2.0_f64.sqrt() * (2.0 * 1.0 + eta * 16.0) / (4.0 * 1.0 * eta);
    let mut ok = rel(rep.constants[0], c_oracle) < 1e-12;
    let mut parts = vec![format!("C = {:.4}", rep.constants[0])];
    for row in &rep.rows {
        let rhs = c_oracle / (row.k as f64 * row.mean_r_k);
        ok &= row.lhs - 3.0 * row.lhs_se <= rhs;
        parts.push(format!(
            "k = {}: {:.4} +/- {:.4} <= {:.4}",
            row.k, row.lhs, row.lhs_se, rhs
        ));
    }
    Ok((ok, parts.join("; ")))
}

// ---------------------------------------------------------------- 9

fn criterion_9() -> Check {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/iris.csv");
    let data = load_iris(path).map_err(e)?;
    let (trials, seed) = (100, 0);
    let em = run_kmeans_experiment(&data, 3, KMeansMethod::Em, 0.0, trials, seed).map_err(e)?;
    let aegd = run_kmeans_experiment(&data, 3, KMeansMethod::Aegd, 6.5, trials, seed).map_err(e)?;
    let grid: Vec<f64> = (1..=20).map(|i| 0.5 * i as f64).collect();
    let mut gd_best = (0.0, 0.0);
    for &eta in &grid {
        let r = run_kmeans_experiment(&data, 3, KMeansMethod::Gd, eta, trials, seed).map_err(e)?;
        if r.improved_frequency > gd_best.0 {
            gd_best = (r.improved_frequency, eta);
        }
    }
    let mut basins_ok = true;
    for rep in [&em, &aegd] {
        let (low, high) = rep.basin_means();
        basins_ok &= low.is_some_and(|m| (m - 0.26).abs() <= 0.05)
            && high.is_some_and(|m| (m - 0.48).abs() <= 0.05);
    }
    let ordering =
        aegd.improved_frequency > gd_best.0 && aegd.improved_frequency > em.improved_frequency;
    let (lo, hi) = aegd.basin_means();
    Ok((
        basins_ok && ordering,
        format!(
            "improved-basin frequency: AEGD(6.5) {:.2}, GD best {:.2} (eta {}), EM {:.2}; AEGD basins {:.3} / {:.3}",
            aegd.improved_frequency,
            gd_best.0,
            gd_best.1,
            em.improved_frequency,
            lo.unwrap_or(f64::NAN),
            hi.unwrap_or(f64::NAN)
        ),
    ))
}

// ---------------------------------------------------------------- 10

fn final_params(
    kind: OptimizerKind,
    obj: &dyn Objective,
    x0: &[f64],
    cfg: &OptimizerConfig,
    iters: usize,
) -> Result<Trace, String> {
    run_recorded(
        kind,
        obj,
        x0,
        cfg,
        &StoppingRule::iterations(iters),
        3,
        Recording::Full,
    )
    .map_err(e)
}

fn criterion_10() -> Check {
    let mut failures = Vec::new();
    let mut rng = stream_rng(10, 0);

    // zero-gradient fixed points
    let flat = FnObjective::new(3, |_| 0.7, |_, g| g.fill(0.0));
    let x0 = [0.3, -1.2, 4.0];
    for kind in [
        OptimizerKind::Aegd,
        OptimizerKind::Saegd,
        OptimizerKind::Aegdw,
        OptimizerKind::Gd,
        OptimizerKind::Gdm,
        OptimizerKind::Adam,
    ] {
        for mode in [EnergyMode::Global, EnergyMode::Elementwise] {
            let t = final_params(
                kind,
                &flat,
                &x0,
                &OptimizerConfig::default().with_eta(0.5).with_mode(mode),
                50,
            )?;
            if t.final_params != x0 {
                failures.push(format!("{kind} moved on a flat objective"));
            }
        }
    }

    // one-dimensional problems: both energy modes coincide
    for _ in 0..50 {
        let w = 10f64.powf(rng.gen_range(-2.0..2.0));
        let q = Quadratic::new(vec![w], vec![rng.gen_range(-3.0..3.0)]).map_err(e)?;
        let x = [rng.gen_range(-5.0..5.0)];
        let cfg = OptimizerConfig::default().with_eta(10f64.powf(rng.gen_range(-3.0..2.0)));
        let g = final_params(
            OptimizerKind::Aegd,
            &q,
            &x,
            &cfg.clone().with_mode(EnergyMode::Global),
            100,
        )?;
        let el = final_params(
            OptimizerKind::Aegd,
            &q,
            &x,
            &cfg.with_mode(EnergyMode::Elementwise),
            100,
        )?;
        if g.final_params != el.final_params
            || g.final_energy.as_ref().map(|s| s.values().to_vec())
                != el.final_energy.as_ref().map(|s| s.values().to_vec())
        {
            failures.push("1-D global and element-wise runs differ".into());
        }
    }

    // full-batch stochastic steps reduce to deterministic element-wise AEGD
    let fs = two_well_sum();
    let full = SamplingScheme::new(SamplingKind::Minibatch, 2);
    let cfg = OptimizerConfig::default().with_eta(0.3);
    let s = final_params(
        OptimizerKind::Saegd,
        &fs,
        &[0.2],
        &cfg.clone().with_sampling(full),
        200,
    )?;
    let d = final_params(OptimizerKind::Aegd, &fs, &[0.2], &cfg, 200)?;
    let max_gap = s
        .records
        .iter()
        .zip(&d.records)
        .map(|(a, b)| rel(a.f, b.f).max((a.r_min - b.r_min).abs() / b.r_min))
        .fold(0.0, f64::max);
    if max_gap > 1e-14 {
        failures.push(format!("full-batch stochastic run deviates by {max_gap:e}"));
    }

    // sampling vectors have unit mean
    for (kind, b, m) in [
        (SamplingKind::Minibatch, 1, 5),
        (SamplingKind::Minibatch, 3, 7),
        (SamplingKind::Iid, 2, 4),
        (SamplingKind::Iid, 5, 3),
    ] {
        let scheme = SamplingScheme::new(kind, b);
        let draws = 100_000;
        let mut sum = vec![0.0; m];
        let mut sum_sq = vec![0.0; m];
        for _ in 0..draws {
            let batch = sample_batch(&scheme, m, &mut rng).map_err(e)?;
            for (j, x) in batch.xi.iter().enumerate() {
                sum[j] += x;
                sum_sq[j] += x * x;
            }
        }
        for j in 0..m {
            let mean = sum[j] / draws as f64;
            let se = ((sum_sq[j] / draws as f64 - mean * mean) / draws as f64).sqrt();
            if (mean - 1.0).abs() > 3.0 * se {
                failures.push(format!(
                    "{kind:?} b={b}: E[xi_{j}] = {mean} outside 1 +/- 3 SE ({se:e})"
                ));
            }
        }
    }

    // analytic gradients against central differences
    for name in PRESETS {
        let (obj, _) = preset(name).ok_or("preset")?;
        for _ in 0..20 {
            let x: Vec<f64> = (0..obj.dim()).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let err = gradient_check(obj.as_ref(), &x);
            if err > 1e-6 {
                failures.push(format!("{name}: gradient check error {err:e}"));
            }
        }
    }
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/iris.csv");
    let data = load_iris(path).map_err(e)?;
    for _ in 0..10 {
        let coords: Vec<f64> = (0..12)
            .map(|i| rng.gen_range(0.0..8.0) + 0.01 * i as f64)
            .collect();
        let x = CentroidSet::from_flat(coords.clone(), 4).map_err(e)?;
        let g = kmeans_gradient(&data, &x, &mut rng).map_err(e)?;
        for i in 0..coords.len() {
            let h = 1e-6;
            let mut up = coords.clone();
            up[i] += h;
            let mut down = coords.clone();
            down[i] -= h;
            let fu =
                quantization_error(&data, &CentroidSet::from_flat(up, 4).map_err(e)?).map_err(e)?;
            let fd = quantization_error(&data, &CentroidSet::from_flat(down, 4).map_err(e)?)
                .map_err(e)?;
            let num = (fu - fd) / (2.0 * h);
            if (num - g[i]).abs() > 1e-6 * g[i].abs().max(1.0) {
                failures.push(format!("k-means gradient component {i}: {} vs {num}", g[i]));
            }
        }
    }

    Ok((
        failures.is_empty(),
        if failures.is_empty() {
            "all property checks hold".into()
        } else {
            failures.join("; ")
        },
    ))
}

fn main() {
    let criteria = [
        Criterion {
            id: 1,
            title: "energy identity on random problems",
            budget: Duration::from_secs(10),
            check: criterion_1,
        },
        Criterion {
            id: 2,
            title: "quadratic benchmark ordering",
            budget: Duration::from_secs(30),
            check: criterion_2,
        },
        Criterion {
            id: 3,
            title: "empirical threshold, quadratic",
            budget: Duration::from_secs(300),
            check: criterion_3,
        },
        Criterion {
            id: 4,
            title: "empirical threshold, Rosenbrock",
            budget: Duration::from_secs(300),
            check: criterion_4,
        },
        Criterion {
            id: 5,
            title: "theoretical energy floor",
            budget: Duration::from_secs(10),
            check: criterion_5,
        },
        Criterion {
            id: 6,
            title: "linear convergence rates",
            budget: Duration::from_secs(30),
            check: criterion_6,
        },
        Criterion {
            id: 7,
            title: "stochastic energy stability",
            budget: Duration::from_secs(120),
            check: criterion_7,
        },
        Criterion {
            id: 8,
            title: "direction-wise estimate",
            budget: Duration::from_secs(120),
            check: criterion_8,
        },
        Criterion {
            id: 9,
            title: "k-means on Iris",
            budget: Duration::from_secs(120),
            check: criterion_9,
        },
        Criterion {
            id: 10,
            title: "property suites",
            budget: Duration::from_secs(60),
            check: criterion_10,
        },
    ];
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        for c in &criteria {
            println!("criterion_{}: test", c.id);
        }
        return;
    }
    let selected: Vec<u32> = args
        .iter()
        .filter_map(|a| a.trim_start_matches("criterion_").parse().ok())
        .collect();
    let mut failed = 0;
    for c in criteria
        .iter()
        .filter(|c| selected.is_empty() || selected.contains(&c.id))
    {
        let start = Instant::now();
        let outcome = (c.check)();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok((ok, detail)) => (ok && elapsed <= c.budget, detail),
            Err(msg) => (false, format!("error: {msg}")),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {}: {} [{:.1}s of {}s]",
            c.id,
            if ok { "PASS" } else { "FAIL" },
            c.title,
            detail,
            elapsed.as_secs_f64(),
            c.budget.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
