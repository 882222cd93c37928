use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{parse_list, Settings};
use super::{emit, EXIT_DIVERGED, EXIT_OK};
use crate::analysis::{
    classify_eta, find_eta_threshold, EtaEvaluation, ThresholdOptions, ThresholdReport,
};
use crate::error::{Error, Result};
use crate::kmeans::{load_features, run_kmeans_experiment, KMeansMethod, KMeansReport};
use crate::objectives::{preset, Objective, SamplingKind, SamplingScheme, PRESETS};
use crate::optimizers::{
    run_recorded, AdamParams, EnergyMode, OptimizerConfig, OptimizerKind, Recording, RunStatus,
    StoppingRule, Trace,
};

pub const TRACE_HEADER: [&str; 9] = [
    "k",
    "f",
    "grad_norm",
    "r_min",
    "r_max",
    "eta_eff_min",
    "eta_eff_max",
    "disp_sq",
    "status",
];

/// One row per record. Energy columns are `NaN` for optimizers without one.
pub fn write_trace_csv<W: Write>(trace: &Trace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in &trace.records {
        w.write_record([
            r.k.to_string(),
            r.f.to_string(),
            r.grad_norm.to_string(),
            r.r_min.to_string(),
            r.r_max.to_string(),
            r.eta_eff_min.to_string(),
            r.eta_eff_max.to_string(),
            r.disp_sq.to_string(),
            r.status.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn problem(s: &Settings) -> Result<(std::sync::Arc<dyn Objective>, Vec<f64>)> {
    let name: String = s.require("problem")?;
    let (obj, default_theta) = preset(&name).ok_or_else(|| {
        Error::InvalidConfig(format!(
            "unknown problem `{name}` (presets: {})",
            PRESETS.join(", ")
        ))
    })?;
    let theta0 = s.list("theta0")?.unwrap_or(default_theta);
    if theta0.len() != obj.dim() {
        return Err(Error::DimensionMismatch {
            expected: obj.dim(),
            found: theta0.len(),
        });
    }
    Ok((obj, theta0))
}

fn sampling_kind(s: &str) -> Result<SamplingKind> {
    match s {
        "iid" => Ok(SamplingKind::Iid),
        "minibatch" => Ok(SamplingKind::Minibatch),
        "shuffled-epoch" | "shuffled" => Ok(SamplingKind::ShuffledEpoch),
        other => Err(Error::InvalidConfig(format!("unknown sampling `{other}`"))),
    }
}

fn optimizer_config(s: &Settings) -> Result<OptimizerConfig> {
    let base = OptimizerConfig::default();
    let adam = AdamParams {
        beta1: s.get_or("beta1", base.adam.beta1)?,
        beta2: s.get_or("beta2", base.adam.beta2)?,
        epsilon: s.get_or("epsilon", base.adam.epsilon)?,
    };
    let sampling = SamplingScheme::new(
        s.raw("sampling")
            .map(sampling_kind)
            .transpose()?
            .unwrap_or(base.sampling.kind),
        s.get_or("batch", base.sampling.batch_size)?,
    );
    let cfg = OptimizerConfig {
        eta: s.get_or("eta", base.eta)?,
        shift: s.get_or("shift", base.shift)?,
        mode: s.get_or("mode", base.mode)?,
        momentum: s.get_or("momentum", base.momentum)?,
        weight_decay: s.get_or("weight_decay", base.weight_decay)?,
        adam,
        sampling,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn stopping_rule(s: &Settings) -> Result<StoppingRule> {
    let mut stop = StoppingRule::iterations(s.get_or("iters", 1000usize)?);
    stop.grad_tol = s.get("grad_tol")?;
    stop.target_f = s.get("target_f")?;
    if let Some(spec) = s.raw("decay") {
        for stage in spec.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let parsed = stage
                .split_once(':')
                .and_then(|(k, f)| Some((k.trim().parse().ok()?, f.trim().parse().ok()?)));
            let (at, factor) = parsed.ok_or_else(|| {
                Error::InvalidConfig(format!("decay stage `{stage}` is not `k0:factor`"))
            })?;
            stop = stop.with_decay(at, factor);
        }
    }
    Ok(stop)
}

/// Runs one optimizer and writes the CSV trace. Exit 2 when it diverged.
pub fn cmd_run(s: &Settings) -> Result<u8> {
    let (obj, theta0) = problem(s)?;
    let kind: OptimizerKind = s.get_or("optimizer", OptimizerKind::Aegd)?;
    let config = optimizer_config(s)?;
    let stop = stopping_rule(s)?;
    let seed = match s.get::<u64>("seed")? {
        Some(seed) => seed,
        None if kind.is_stochastic() => {
            return Err(Error::InvalidConfig(format!(
                "optimizer `{kind}` is stochastic and needs a seed"
            )));
        }
        None => 0,
    };
    let trace = run_recorded(
        kind,
        obj.as_ref(),
        &theta0,
        &config,
        &stop,
        seed,
        Recording::Summary,
    )?;
    let mut buf = Vec::new();
    write_trace_csv(&trace, &mut buf)?;
    emit(s.raw("out").map(Path::new), &buf)?;
    eprintln!(
        "{kind} on {}: status={} iterations={} f={}",
        obj.name(),
        trace.status.as_str(),
        trace.iterations,
        trace.final_f()
    );
    Ok(if trace.status == RunStatus::Diverged {
        EXIT_DIVERGED
    } else {
        EXIT_OK
    })
}

#[derive(Debug, Serialize)]
struct SweepRow {
    #[serde(flatten)]
    evaluation: EtaEvaluation,
    /// Energy trace file, relative to the output directory.
    trace: Option<String>,
}

#[derive(Debug, Serialize)]
struct SweepReport {
    problem: String,
    theta0: Vec<f64>,
    mode: EnergyMode,
    shift: f64,
    budget: usize,
    rel_eps: f64,
    grid: Vec<SweepRow>,
    bisection: Option<ThresholdReport>,
}

fn energy_trace_csv(
    obj: &dyn Objective,
    theta0: &[f64],
    config: &OptimizerConfig,
    iters: usize,
) -> Result<Vec<u8>> {
    let trace = run_recorded(
        OptimizerKind::Aegd,
        obj,
        theta0,
        config,
        &StoppingRule::iterations(iters),
        0,
        Recording::Full,
    )?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["k", "f", "r_1", "r_min", "r_max"])?;
    for r in &trace.records {
        let r1 = r.detail.as_ref().map_or(f64::NAN, |d| d.r[0]);
        w.write_record([
            r.k.to_string(),
            r.f.to_string(),
            r1.to_string(),
            r.r_min.to_string(),
            r.r_max.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Classifies each grid step size and, when a bracket is given, bisects for
/// the threshold. Writes `report.json` and one energy trace per grid value.
pub fn cmd_sweep(s: &Settings) -> Result<u8> {
    let name: String = s.require("problem")?;
    let (obj, theta0) = problem(s)?;
    let out: PathBuf = s.require::<String>("out")?.into();
    let config = OptimizerConfig::default()
        .with_shift(s.get_or("shift", 1.0)?)
        .with_mode(s.get_or("mode", EnergyMode::Elementwise)?);
    let options = ThresholdOptions {
        budget: s.get_or("budget", ThresholdOptions::default().budget)?,
        rel_eps: s.get_or("rel_eps", ThresholdOptions::default().rel_eps)?,
        rel_width: s.get_or("rel_width", ThresholdOptions::default().rel_width)?,
        ..ThresholdOptions::default()
    };
    let trace_iters: usize = s.get_or("trace_iters", 10_000)?;
    let grid = s.list("grid")?.unwrap_or_default();
    let bracket = s
        .raw("bisect")
        .map(|b| parse_list("bisect", b))
        .transpose()?;
    if grid.is_empty() && bracket.is_none() {
        return Err(Error::InvalidConfig(
            "sweep needs a grid, a bisect bracket, or both".into(),
        ));
    }
    if let Some(eta) = grid.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidConfig(format!(
            "grid step sizes must be positive, got {eta}"
        )));
    }
    let mut grid_sorted = grid.clone();
    grid_sorted.sort_by(f64::total_cmp);
    grid_sorted.dedup();

    std::fs::create_dir_all(&out)?;
    let rows: Vec<SweepRow> = grid_sorted
        .par_iter()
        .map(|&eta| {
            let evaluation = classify_eta(
                obj.as_ref(),
                &theta0,
                &config,
                eta,
                options.budget,
                options.rel_eps,
            )?;
            let trace = if trace_iters > 0 {
                let file = format!("r_eta_{eta}.csv");
                let bytes = energy_trace_csv(
                    obj.as_ref(),
                    &theta0,
                    &config.clone().with_eta(eta),
                    trace_iters,
                )?;
                std::fs::write(out.join(&file), bytes)?;
                Some(file)
            } else {
                None
            };
            Ok(SweepRow { evaluation, trace })
        })
        .collect::<Result<_>>()?;

    let bisection = match bracket {
        Some(b) if b.len() == 2 => Some(find_eta_threshold(
            obj.as_ref(),
            &theta0,
            &config,
            (b[0], b[1]),
            &options,
        )?),
        Some(_) => return Err(Error::InvalidConfig("bisect expects `low,high`".into())),
        None => None,
    };
    if let Some(b) = &bisection {
        eprintln!("{name}: eta~ in [{}, {}]", b.eta_low, b.eta_high);
    }
    let report = SweepReport {
        problem: name,
        theta0,
        mode: config.mode,
        shift: config.shift,
        budget: options.budget,
        rel_eps: options.rel_eps,
        grid: rows,
        bisection,
    };
    std::fs::write(out.join("report.json"), serde_json::to_vec_pretty(&report)?)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct KMeansOutput {
    data: String,
    #[serde(flatten)]
    report: KMeansReport,
    improved_basin_mean: Option<f64>,
    other_basin_mean: Option<f64>,
}

/// Repeated k-means runs; writes the error histogram as JSON.
pub fn cmd_kmeans(s: &Settings) -> Result<u8> {
    let data_path: String = s.require("data")?;
    let data = load_features(&data_path, s.get_or("dims", 4)?)?;
    let method: KMeansMethod = s.get_or("method", KMeansMethod::Aegd)?;
    let eta = match method {
        KMeansMethod::Em => s.get_or("eta", 0.0)?,
        _ => s.require("eta")?,
    };
    let report = run_kmeans_experiment(
        &data,
        s.get_or("k", 3)?,
        method,
        eta,
        s.get_or("trials", 100)?,
        s.get_or("seed", 0)?,
    )?;
    let (improved, other) = report.basin_means();
    eprintln!(
        "{:?} eta={eta}: improved basin {}/{} (diverged {})",
        report.method, report.improved_count, report.trials, report.diverged
    );
    let output = KMeansOutput {
        data: data_path,
        report,
        improved_basin_mean: improved,
        other_basin_mean: other,
    };
    let mut bytes = serde_json::to_vec_pretty(&output)?;
    bytes.push(b'\n');
    emit(s.raw("out").map(Path::new), &bytes)?;
    Ok(EXIT_OK)
}
