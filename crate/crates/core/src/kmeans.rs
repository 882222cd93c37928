//! K-means as an optimisation problem over the flattened centroid vector.
//!
//! The objective is the quantization error
//! `f(x) = (1 / 2m) sum_i min_j |x_j - p_i|^2`; its "gradient" on cluster
//! `j` is `(1/m) sum_{i in C_j} (x_j - p_i)`, with ties between equally near
//! centroids broken uniformly at random.

use std::fs;
use std::path::Path;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizers::{aegd_step_elementwise, gd_step, OptimizerConfig};
use crate::rng::stream_rng;

/// Terminal errors below this belong to the improved basin (~0.26 on Iris);
/// the other reported basin sits near 0.48.
pub const IMPROVED_BASIN_THRESHOLD: f64 = 0.37;
/// Runs stop once the error changes by less than this between iterations.
pub const ERROR_TOLERANCE: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 10_000;
const DIVERGENCE_GUARD: f64 = 1e300;

/// `m` points in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Vec<f64>,
    m: usize,
    d: usize,
}

impl Dataset {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let d = points
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidConfig("dataset is empty".into()))?;
        if d == 0 {
            return Err(Error::InvalidConfig(
                "points need at least one coordinate".into(),
            ));
        }
        if let Some(bad) = points.iter().find(|p| p.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.len(),
            });
        }
        let m = points.len();
        Ok(Self {
            points: points.into_iter().flatten().collect(),
            m,
            d,
        })
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }
}

/// `K` centroids in `R^d`, flattened to a vector in `R^{Kd}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidSet {
    coords: Vec<f64>,
    k: usize,
    d: usize,
}

impl CentroidSet {
    pub fn new(centroids: Vec<Vec<f64>>) -> Result<Self> {
        let d = centroids
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidConfig("need at least one centroid".into()))?;
        if let Some(bad) = centroids.iter().find(|c| c.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.len(),
            });
        }
        let k = centroids.len();
        Ok(Self {
            coords: centroids.into_iter().flatten().collect(),
            k,
            d,
        })
    }

    pub fn from_flat(coords: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 || coords.is_empty() || !coords.len().is_multiple_of(d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: coords.len(),
            });
        }
        Ok(Self {
            k: coords.len() / d,
            coords,
            d,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn centroid(&self, j: usize) -> &[f64] {
        &self.coords[j * self.d..(j + 1) * self.d]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    fn check(&self, data: &Dataset) -> Result<()> {
        if self.d != data.d {
            return Err(Error::DimensionMismatch {
                expected: data.d,
                found: self.d,
            });
        }
        Ok(())
    }
}

/// Cluster index of every data point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment(pub Vec<usize>);

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest-centroid assignment with uniform random tie-breaking, plus the
/// quantization error it implies.
pub fn assign<R: Rng + ?Sized>(
    data: &Dataset,
    x: &CentroidSet,
    rng: &mut R,
) -> Result<(Assignment, f64)> {
    x.check(data)?;
    let mut labels = Vec::with_capacity(data.m);
    let mut total = 0.0;
    for i in 0..data.m {
        let p = data.point(i);
        let mut best = f64::INFINITY;
        let mut label = 0;
        let mut ties = 0u32;
        for j in 0..x.k {
            let dist = sq_dist(x.centroid(j), p);
            if dist < best {
                best = dist;
                label = j;
                ties = 1;
            } else if dist == best {
                // reservoir pick keeps every tied centroid equally likely
                ties += 1;
                if rng.gen_range(0..ties) == 0 {
                    label = j;
                }
            }
        }
        labels.push(label);
        total += best;
    }
    Ok((Assignment(labels), total / (2.0 * data.m as f64)))
}

pub fn quantization_error(data: &Dataset, x: &CentroidSet) -> Result<f64> {
    x.check(data)?;
    let total: f64 = (0..data.m)
        .map(|i| {
            let p = data.point(i);
            (0..x.k)
                .map(|j| sq_dist(x.centroid(j), p))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Ok(total / (2.0 * data.m as f64))
}

fn gradient_for(data: &Dataset, x: &CentroidSet, labels: &Assignment) -> Vec<f64> {
    let mut grad = vec![0.0; x.coords.len()];
    for (i, &j) in labels.0.iter().enumerate() {
        let block = &mut grad[j * x.d..(j + 1) * x.d];
        for ((g, c), p) in block.iter_mut().zip(x.centroid(j)).zip(data.point(i)) {
            *g += c - p;
        }
    }
    let m = data.m as f64;
    grad.iter_mut().for_each(|g| *g /= m);
    grad
}

/// Block gradient `(1/m) [sum_{i in C_1} (x_1 - p_i), ..., sum_{i in C_K} (x_K - p_i)]`.
/// Empty clusters get a zero block.
pub fn kmeans_gradient<R: Rng + ?Sized>(
    data: &Dataset,
    x: &CentroidSet,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let (labels, _) = assign(data, x, rng)?;
    Ok(gradient_for(data, x, &labels))
}

/// One Lloyd iteration: move every non-empty cluster's centroid to its mean.
pub fn em_step<R: Rng + ?Sized>(
    data: &Dataset,
    x: &CentroidSet,
    rng: &mut R,
) -> Result<CentroidSet> {
    let (labels, _) = assign(data, x, rng)?;
    Ok(lloyd_update(data, x, &labels))
}

fn lloyd_update(data: &Dataset, x: &CentroidSet, labels: &Assignment) -> CentroidSet {
    let mut sums = vec![0.0; x.coords.len()];
    let mut counts = vec![0usize; x.k];
    for (i, &j) in labels.0.iter().enumerate() {
        counts[j] += 1;
        sums[j * x.d..(j + 1) * x.d]
            .iter_mut()
            .zip(data.point(i))
            .for_each(|(s, p)| *s += p);
    }
    let mut coords = x.coords.clone();
    for j in 0..x.k {
        if counts[j] > 0 {
            let n = counts[j] as f64;
            coords[j * x.d..(j + 1) * x.d]
                .iter_mut()
                .zip(&sums[j * x.d..(j + 1) * x.d])
                .for_each(|(c, s)| *c = s / n);
        }
    }
    CentroidSet {
        coords,
        k: x.k,
        d: x.d,
    }
}

/// Reads the first four numeric columns of a comma-separated file. A first
/// row whose leading fields are not numeric is treated as a header; any
/// columns after the fourth are ignored.
pub fn load_iris(path: impl AsRef<Path>) -> Result<Dataset> {
    load_features(path, 4)
}

pub fn load_features(path: impl AsRef<Path>, d: usize) -> Result<Dataset> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::DatasetNotFound(path.to_path_buf()));
    }
    let text = fs::read_to_string(path)?;
    parse_features(&text, d)
}

pub fn parse_features(text: &str, d: usize) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut points = Vec::new();
    let mut width = None;
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| Error::MalformedRow {
            row,
            reason: e.to_string(),
        })?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if width.is_some_and(|w| w != record.len()) {
            return Err(Error::MalformedRow {
                row,
                reason: format!(
                    "dimension mismatch: {} fields, expected {}",
                    record.len(),
                    width.unwrap_or(0)
                ),
            });
        }
        if record.len() < d {
            return Err(Error::MalformedRow {
                row,
                reason: format!("dimension mismatch: {} fields, need {d}", record.len()),
            });
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().take(d).map(str::parse::<f64>).collect();
        match parsed {
            Ok(p) if p.iter().all(|v| v.is_finite()) => {
                width = Some(record.len());
                points.push(p);
            }
            _ if row == 1 => {
                width = Some(record.len());
            }
            _ => {
                return Err(Error::MalformedRow {
                    row,
                    reason: "non-numeric feature".into(),
                })
            }
        }
    }
    if points.is_empty() {
        return Err(Error::MalformedRow {
            row: 1,
            reason: "no data rows".into(),
        });
    }
    Dataset::new(points)
}

/// `K` distinct data points drawn uniformly without replacement.
pub fn random_init<R: Rng + ?Sized>(data: &Dataset, k: usize, rng: &mut R) -> Result<CentroidSet> {
    if k == 0 || k > data.m {
        return Err(Error::InvalidConfig(format!(
            "need 1 <= K <= m, got K = {k}, m = {}",
            data.m
        )));
    }
    let picks = index::sample(rng, data.m, k);
    let coords = picks.iter().flat_map(|i| data.point(i).to_vec()).collect();
    Ok(CentroidSet {
        coords,
        k,
        d: data.d,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KMeansMethod {
    Em,
    Gd,
    Aegd,
}

impl std::str::FromStr for KMeansMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "em" => Ok(KMeansMethod::Em),
            "gd" => Ok(KMeansMethod::Gd),
            "aegd" => Ok(KMeansMethod::Aegd),
            other => Err(Error::InvalidConfig(format!(
                "unknown k-means method `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KMeansRun {
    /// Terminal quantization error; infinite for a diverged run.
    pub error: f64,
    pub iterations: usize,
    pub diverged: bool,
}

/// Optimises from `init` until the error stalls or the iteration cap.
/// AEGD runs element-wise with `c = 1`. A run whose centroids blow up is
/// reported as diverged rather than as an error.
pub fn optimize<R: Rng + ?Sized>(
    data: &Dataset,
    init: CentroidSet,
    method: KMeansMethod,
    eta: f64,
    rng: &mut R,
) -> Result<(CentroidSet, KMeansRun)> {
    let d = init.d;
    let mut x = init;
    let config = OptimizerConfig::default().with_eta(eta).with_shift(1.0);
    let mut energy: Option<Vec<f64>> = None;
    let mut prev = f64::NAN;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        let (labels, err) = assign(data, &x, rng)?;
        if !(err <= DIVERGENCE_GUARD) {
            return Ok((
                x,
                KMeansRun {
                    error: f64::INFINITY,
                    iterations,
                    diverged: true,
                },
            ));
        }
        if (prev - err).abs() < ERROR_TOLERANCE {
            break;
        }
        prev = err;
        let next = match method {
            KMeansMethod::Em => Ok(lloyd_update(data, &x, &labels)),
            KMeansMethod::Gd => {
                let grad = gradient_for(data, &x, &labels);
                gd_step(&x.coords, &grad, eta)
                    .and_then(|p| CentroidSet::from_flat(p.into_inner(), d))
            }
            KMeansMethod::Aegd => {
                let grad = gradient_for(data, &x, &labels);
                let r = energy.get_or_insert_with(|| vec![(err + 1.0).sqrt(); grad.len()]);
                aegd_step_elementwise(&x.coords, r, &grad, err, &config).and_then(|out| {
                    *r = out.new_energy.values().to_vec();
                    CentroidSet::from_flat(out.new_params.into_inner(), d)
                })
            }
        };
        iterations += 1;
        x = match next {
            Ok(next) => next,
            Err(Error::NonFiniteGradient(_) | Error::NonFiniteIterate) => {
                return Ok((
                    x,
                    KMeansRun {
                        error: f64::INFINITY,
                        iterations,
                        diverged: true,
                    },
                ));
            }
            Err(e) => return Err(e),
        };
    }
    let error = quantization_error(data, &x)?;
    Ok((
        x,
        KMeansRun {
            error,
            iterations,
            diverged: false,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KMeansReport {
    pub method: KMeansMethod,
    pub k: usize,
    pub eta: f64,
    pub trials: usize,
    pub seed: u64,
    /// Terminal error of every trial, in trial order.
    pub errors: Vec<f64>,
    pub diverged: usize,
    pub improved_count: usize,
    pub improved_frequency: f64,
    pub bins: Vec<HistogramBin>,
}

impl KMeansReport {
    /// Mean terminal error of the trials landing in the improved basin and in
    /// the other one.
    pub fn basin_means(&self) -> (Option<f64>, Option<f64>) {
        let mean = |sel: &dyn Fn(f64) -> bool| {
            let v: Vec<f64> = self.errors.iter().cloned().filter(|e| sel(*e)).collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        };
        (
            mean(&|e| e < IMPROVED_BASIN_THRESHOLD),
            mean(&|e| e >= IMPROVED_BASIN_THRESHOLD),
        )
    }
}

const BIN_WIDTH: f64 = 0.02;

fn histogram(errors: &[f64]) -> Vec<HistogramBin> {
    let mut bins: Vec<HistogramBin> = Vec::new();
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    for e in sorted.into_iter().filter(|e| e.is_finite()) {
        let idx = (e / BIN_WIDTH).floor();
        let lo = idx * BIN_WIDTH;
        match bins.last_mut() {
            Some(b) if b.lo == lo => b.count += 1,
            _ => bins.push(HistogramBin {
                lo,
                hi: lo + BIN_WIDTH,
                count: 1,
            }),
        }
    }
    bins
}

/// Runs `trials` independent optimisations from random data-point
/// initialisations. Trial `t` draws from stream `t` of `seed`, so results do
/// not depend on scheduling.
pub fn run_kmeans_experiment(
    data: &Dataset,
    k: usize,
    method: KMeansMethod,
    eta: f64,
    trials: usize,
    seed: u64,
) -> Result<KMeansReport> {
    if method != KMeansMethod::Em && !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "step size must be positive, got {eta}"
        )));
    }
    let runs: Vec<KMeansRun> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(seed, t as u64);
            let init = random_init(data, k, &mut rng)?;
            optimize(data, init, method, eta, &mut rng).map(|(_, run)| run)
        })
        .collect::<Result<_>>()?;
    let errors: Vec<f64> = runs.iter().map(|r| r.error).collect();
    let improved_count = errors
        .iter()
        .filter(|e| **e < IMPROVED_BASIN_THRESHOLD)
        .count();
    Ok(KMeansReport {
        method,
        k,
        eta,
        trials,
        seed,
        improved_frequency: if trials == 0 {
            0.0
        } else {
            improved_count as f64 / trials as f64
        },
        improved_count,
        diverged: runs.iter().filter(|r| r.diverged).count(),
        bins: histogram(&errors),
        errors,
    })
}
