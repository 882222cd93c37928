//! Benchmark objectives with analytic gradients.
//!
//! Everything here is immutable after construction, so objectives can be
//! shared across threads and evaluated concurrently.

mod sampling;

use std::fmt;
use std::sync::Arc;

pub use sampling::{
    sample_batch, sampled_value_and_grad, Batch, Sampler, SamplingKind, SamplingScheme,
};

use crate::error::{Error, Result};

/// A differentiable function `f: R^n -> R`.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, theta: &[f64]) -> f64;

    /// Writes `grad f(theta)` into `out` (length `dim()`).
    fn gradient_into(&self, theta: &[f64], out: &mut [f64]);

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.gradient_into(theta, &mut g);
        g
    }

    fn value_and_gradient(&self, theta: &[f64], out: &mut [f64]) -> f64 {
        self.gradient_into(theta, out);
        self.value(theta)
    }

    fn profile(&self) -> Option<&SmoothnessProfile> {
        None
    }

    fn name(&self) -> &str {
        "objective"
    }

    /// Finite-sum structure, if any. Stochastic optimizers treat objectives
    /// without it as a single-component sum.
    fn as_finite_sum(&self) -> Option<&FiniteSumObjective> {
        None
    }
}

/// Analytic constants of a test problem.
///
/// `strong_convexity` and `pl_constant` are 0 when the property is absent or
/// unknown. `grad_bound` bounds the Euclidean gradient norm and
/// `shift_lower_bound` bounds `f` from below; both only on `region`, a
/// per-coordinate box `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothnessProfile {
    pub lipschitz: Option<f64>,
    pub strong_convexity: f64,
    pub pl_constant: f64,
    pub grad_bound: Option<f64>,
    pub shift_lower_bound: Option<f64>,
    pub f_star: f64,
    pub minimizer: Option<Vec<f64>>,
    pub region: Option<(f64, f64)>,
}

impl SmoothnessProfile {
    pub fn new(f_star: f64) -> Self {
        Self {
            lipschitz: None,
            strong_convexity: 0.0,
            pl_constant: 0.0,
            grad_bound: None,
            shift_lower_bound: None,
            f_star,
            minimizer: None,
            region: None,
        }
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }

    pub fn with_strong_convexity(mut self, alpha: f64) -> Self {
        self.strong_convexity = alpha;
        self
    }

    pub fn with_pl_constant(mut self, mu: f64) -> Self {
        self.pl_constant = mu;
        self
    }

    pub fn with_minimizer(mut self, theta: Vec<f64>) -> Self {
        self.minimizer = Some(theta);
        self
    }

    /// Declares the box on which `grad_bound` and `shift_lower_bound` hold.
    pub fn on_region(
        mut self,
        lo: f64,
        hi: f64,
        grad_bound: f64,
        shift_lower_bound: Option<f64>,
    ) -> Self {
        self.region = Some((lo, hi));
        self.grad_bound = Some(grad_bound);
        self.shift_lower_bound = shift_lower_bound;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(l) = self.lipschitz {
            if self.strong_convexity > 0.0 && l > 0.0 && self.strong_convexity > l {
                return Err(Error::InvalidConfig(format!(
                    "strong convexity {} exceeds smoothness {}",
                    self.strong_convexity, l
                )));
            }
        }
        Ok(())
    }
}

/// `f(x) = sum_i w_i (x_i - center_i)^2` with positive weights.
#[derive(Debug, Clone)]
pub struct Quadratic {
    weights: Vec<f64>,
    center: Vec<f64>,
    profile: SmoothnessProfile,
    name: String,
}

impl Quadratic {
    pub fn new(weights: Vec<f64>, center: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidConfig(
                "quadratic needs at least one coordinate".into(),
            ));
        }
        if weights.len() != center.len() {
            return Err(Error::DimensionMismatch {
                expected: weights.len(),
                found: center.len(),
            });
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidConfig(
                "quadratic weights must be positive and finite".into(),
            ));
        }
        let w_max = weights.iter().cloned().fold(f64::MIN, f64::max);
        let w_min = weights.iter().cloned().fold(f64::MAX, f64::min);
        let profile = SmoothnessProfile::new(0.0)
            .with_lipschitz(2.0 * w_max)
            .with_strong_convexity(2.0 * w_min)
            .with_pl_constant(2.0 * w_min)
            .with_minimizer(center.clone());
        Ok(Self {
            weights,
            center,
            profile,
            name: "quadratic".into(),
        })
    }

    pub fn centered(weights: Vec<f64>) -> Result<Self> {
        let n = weights.len();
        Self::new(weights, vec![0.0; n])
    }

    pub fn named(mut self, name: &str) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_profile(mut self, profile: SmoothnessProfile) -> Self {
        self.profile = profile;
        self
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn value(&self, theta: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(&self.center)
            .zip(theta)
            .map(|((w, c), x)| w * (x - c) * (x - c))
            .sum()
    }

    fn gradient_into(&self, theta: &[f64], out: &mut [f64]) {
        for (((o, w), c), x) in out
            .iter_mut()
            .zip(&self.weights)
            .zip(&self.center)
            .zip(theta)
        {
            *o = 2.0 * w * (x - c);
        }
    }

    fn profile(&self) -> Option<&SmoothnessProfile> {
        Some(&self.profile)
    }

    fn name(&self) -> &str {
        &self.name
    }
}

/// The 100-dimensional ill-conditioned quadratic
/// `sum_{i<=50} x_{2i-1}^2 + sum_{i<=50} x_{2i}^2 / 100`, with `L = 2` and
/// `alpha = 0.02`. The gradient bound holds on the box `[-1, 1]^100`.
pub fn quadratic100() -> Quadratic {
    let weights = (0..100)
        .map(|i| if i % 2 == 0 { 1.0 } else { 0.01 })
        .collect();
    let q = Quadratic::centered(weights)
        .expect("static weights")
        .named("quad100");
    let profile = q.profile.clone().on_region(
        -1.0,
        1.0,
        (50.0 * 4.0 + 50.0 * 0.02 * 0.02_f64).sqrt(),
        None,
    );
    q.with_profile(profile)
}

/// `f(x) = x^2` with its constants on `[-1, 1]`: `L = 2`, `|f'| <= 2`.
pub fn square1d() -> Quadratic {
    let q = Quadratic::centered(vec![1.0]).expect("static").named("x2");
    let profile = q.profile.clone().on_region(-1.0, 1.0, 2.0, None);
    q.with_profile(profile)
}

/// Two-dimensional Rosenbrock function `(1 - x1)^2 + 100 (x2 - x1^2)^2`.
///
/// No global smoothness constant is attached: the Hessian is unbounded.
#[derive(Debug, Clone)]
pub struct Rosenbrock {
    profile: SmoothnessProfile,
}

pub fn rosenbrock2d() -> Rosenbrock {
    Rosenbrock {
        profile: SmoothnessProfile::new(0.0).with_minimizer(vec![1.0, 1.0]),
    }
}

impl Objective for Rosenbrock {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, theta: &[f64]) -> f64 {
        let (x, y) = (theta[0], theta[1]);
        let a = 1.0 - x;
        let b = y - x * x;
        a * a + 100.0 * b * b
    }

    fn gradient_into(&self, theta: &[f64], out: &mut [f64]) {
        let (x, y) = (theta[0], theta[1]);
        let b = y - x * x;
        out[0] = -2.0 * (1.0 - x) - 400.0 * x * b;
        out[1] = 200.0 * b;
    }

    fn profile(&self) -> Option<&SmoothnessProfile> {
        Some(&self.profile)
    }

    fn name(&self) -> &str {
        "rosen2d"
    }
}

/// `f(x) = x^2 + 3 sin^2(x)`: non-convex, PL with `mu = 1/32`, `f* = 0`.
#[derive(Debug, Clone)]
pub struct PlExample {
    profile: SmoothnessProfile,
}

pub fn pl_example1d() -> PlExample {
    PlExample {
        profile: SmoothnessProfile::new(0.0)
            .with_lipschitz(8.0)
            .with_pl_constant(1.0 / 32.0)
            .with_minimizer(vec![0.0]),
    }
}

impl Objective for PlExample {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, theta: &[f64]) -> f64 {
        let x = theta[0];
        let s = x.sin();
        x * x + 3.0 * s * s
    }

    fn gradient_into(&self, theta: &[f64], out: &mut [f64]) {
        let x = theta[0];
        out[0] = 2.0 * x + 3.0 * (2.0 * x).sin();
    }

    fn profile(&self) -> Option<&SmoothnessProfile> {
        Some(&self.profile)
    }

    fn name(&self) -> &str {
        "pl1d"
    }
}

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// Objective assembled from closures.
pub struct FnObjective {
    dim: usize,
    value: Box<ValueFn>,
    grad: Box<GradFn>,
    profile: Option<SmoothnessProfile>,
    name: String,
}

impl FnObjective {
    pub fn new<F, G>(dim: usize, value: F, grad: G) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            dim,
            value: Box::new(value),
            grad: Box::new(grad),
            profile: None,
            name: "fn".into(),
        }
    }

    pub fn with_profile(mut self, profile: SmoothnessProfile) -> Self {
        self.profile = Some(profile);
        self
    }

    pub fn named(mut self, name: &str) -> Self {
        self.name = name.into();
        self
    }
}

impl fmt::Debug for FnObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnObjective")
            .field("dim", &self.dim)
            .field("name", &self.name)
            .finish()
    }
}

impl Objective for FnObjective {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, theta: &[f64]) -> f64 {
        (self.value)(theta)
    }

    fn gradient_into(&self, theta: &[f64], out: &mut [f64]) {
        (self.grad)(theta, out)
    }

    fn profile(&self) -> Option<&SmoothnessProfile> {
        self.profile.as_ref()
    }

    fn name(&self) -> &str {
        &self.name
    }
}

/// `f(theta) = (1/m) sum_i f_i(theta)`.
#[derive(Clone)]
pub struct FiniteSumObjective {
    components: Vec<Arc<dyn Objective>>,
    profile: Option<SmoothnessProfile>,
}

impl FiniteSumObjective {
    pub fn new(components: Vec<Arc<dyn Objective>>) -> Result<Self> {
        let first = components.first().ok_or_else(|| {
            Error::InvalidConfig("finite sum needs at least one component".into())
        })?;
        let n = first.dim();
        if let Some(bad) = components.iter().find(|c| c.dim() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.dim(),
            });
        }
        Ok(Self {
            components,
            profile: None,
        })
    }

    pub fn with_profile(mut self, profile: SmoothnessProfile) -> Self {
        self.profile = Some(profile);
        self
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn component(&self, i: usize) -> &dyn Objective {
        self.components[i].as_ref()
    }
}

impl fmt::Debug for FiniteSumObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiniteSumObjective")
            .field("components", &self.components.len())
            .finish()
    }
}

impl Objective for FiniteSumObjective {
    fn dim(&self) -> usize {
        self.components[0].dim()
    }

    fn value(&self, theta: &[f64]) -> f64 {
        let m = self.components.len() as f64;
        self.components.iter().map(|c| c.value(theta)).sum::<f64>() / m
    }

    fn gradient_into(&self, theta: &[f64], out: &mut [f64]) {
        let m = self.components.len() as f64;
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut buf = vec![0.0; out.len()];
        for c in &self.components {
            c.gradient_into(theta, &mut buf);
            out.iter_mut().zip(&buf).for_each(|(o, g)| *o += g);
        }
        out.iter_mut().for_each(|o| *o /= m);
    }

    fn profile(&self) -> Option<&SmoothnessProfile> {
        self.profile.as_ref()
    }

    fn name(&self) -> &str {
        "finite-sum"
    }

    fn as_finite_sum(&self) -> Option<&FiniteSumObjective> {
        Some(self)
    }
}

/// The two-component sum `((x)^2 + (x - 2)^2) / 2` on the real line.
pub fn two_well_sum() -> FiniteSumObjective {
    let left: Arc<dyn Objective> = Arc::new(Quadratic::new(vec![1.0], vec![0.0]).expect("static"));
    let right: Arc<dyn Objective> = Arc::new(Quadratic::new(vec![1.0], vec![2.0]).expect("static"));
    FiniteSumObjective::new(vec![left, right])
        .expect("static")
        .with_profile(
            SmoothnessProfile::new(1.0)
                .with_lipschitz(2.0)
                .with_strong_convexity(2.0)
                .with_minimizer(vec![1.0]),
        )
}

/// Largest relative discrepancy between the analytic gradient and central
/// differences with step `1e-6 * max(1, |theta_i|)`, measured against
/// `max(1, |grad_i|)`.
pub fn gradient_check(objective: &dyn Objective, theta: &[f64]) -> f64 {
    let analytic = objective.gradient(theta);
    let mut probe = theta.to_vec();
    let mut worst = 0.0_f64;
    for i in 0..theta.len() {
        let h = 1e-6 * theta[i].abs().max(1.0);
        probe[i] = theta[i] + h;
        let up = objective.value(&probe);
        probe[i] = theta[i] - h;
        let down = objective.value(&probe);
        probe[i] = theta[i];
        let fd = (up - down) / (2.0 * h);
        let err = (fd - analytic[i]).abs() / analytic[i].abs().max(1.0);
        worst = worst.max(err);
    }
    worst
}

/// Named problem presets with their customary starting points.
pub fn preset(name: &str) -> Option<(Arc<dyn Objective>, Vec<f64>)> {
    match name {
        "quad100" => Some((Arc::new(quadratic100()), vec![1.0; 100])),
        "rosen2d" => Some((Arc::new(rosenbrock2d()), vec![-3.0, -4.0])),
        "pl1d" => Some((Arc::new(pl_example1d()), vec![3.0])),
        "x2" => Some((Arc::new(square1d()), vec![1.0])),
        "two-well" => Some((Arc::new(two_well_sum()), vec![1.0])),
        _ => None,
    }
}

pub const PRESETS: &[&str] = &["quad100", "rosen2d", "pl1d", "x2", "two-well"];

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn quadratic100_values() {
        let q = quadratic100();
        let ones = vec![1.0; 100];
        assert!((q.value(&ones) - 50.5).abs() < 1e-12);
        let g = q.gradient(&ones);
        for (i, gi) in g.iter().enumerate() {
            let want = if i % 2 == 0 { 2.0 } else { 0.02 };
            assert!((gi - want).abs() < 1e-15);
        }
        assert_eq!(q.value(&vec![0.0; 100]), 0.0);
        let p = q.profile().unwrap();
        assert_eq!(p.lipschitz, Some(2.0));
        assert!((p.strong_convexity - 0.02).abs() < 1e-15);
    }

    #[test]
    fn quadratic100_curvature_bounds() {
        let q = quadratic100();
        let mut rng = crate::rng::stream_rng(3, 0);
        for _ in 0..50 {
            let d: Vec<f64> = (0..100).map(|_| rng.gen_range(-1.0..1.0)).collect();
            // Hessian is diag(2 w_i)
            let quad_form: f64 = d
                .iter()
                .zip(q.weights())
                .map(|(x, w)| 2.0 * w * x * x)
                .sum();
            let norm2: f64 = d.iter().map(|x| x * x).sum();
            assert!(quad_form >= 0.02 * norm2 - 1e-12);
            assert!(quad_form <= 2.0 * norm2 + 1e-12);
        }
    }

    #[test]
    fn rosenbrock_values() {
        let r = rosenbrock2d();
        assert_eq!(r.value(&[-3.0, -4.0]), 16916.0);
        assert_eq!(r.value(&[1.0, 1.0]), 0.0);
        assert_eq!(r.gradient(&[1.0, 1.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn pl_example_values_and_inequality() {
        let p = pl_example1d();
        assert_eq!(p.value(&[0.0]), 0.0);
        let pi = std::f64::consts::PI;
        assert!((p.value(&[pi]) - pi * pi).abs() < 1e-12);
        let mut rng = crate::rng::stream_rng(11, 0);
        for _ in 0..100 {
            let x = rng.gen_range(-5.0..5.0);
            let g = p.gradient(&[x])[0];
            assert!(0.5 * g * g >= p.value(&[x]) / 32.0, "PL fails at {x}");
        }
    }

    #[test]
    fn builtins_pass_gradient_check() {
        let mut rng = crate::rng::stream_rng(5, 0);
        for name in PRESETS {
            let (obj, _) = preset(name).unwrap();
            for _ in 0..20 {
                let theta: Vec<f64> = (0..obj.dim()).map(|_| rng.gen_range(-5.0..5.0)).collect();
                let err = gradient_check(obj.as_ref(), &theta);
                assert!(err <= 1e-6, "{name}: {err}");
            }
        }
    }

    #[test]
    fn finite_sum_gradient_is_component_mean() {
        let fs = two_well_sum();
        assert_eq!(fs.value(&[1.0]), 1.0);
        assert_eq!(fs.gradient(&[1.0]), vec![0.0]);
        let x = [0.3];
        let mean = (fs.component(0).gradient(&x)[0] + fs.component(1).gradient(&x)[0]) / 2.0;
        assert!((fs.gradient(&x)[0] - mean).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(Quadratic::new(vec![], vec![]).is_err());
        assert!(Quadratic::new(vec![1.0, -1.0], vec![0.0, 0.0]).is_err());
        assert!(FiniteSumObjective::new(vec![]).is_err());
        let a: Arc<dyn Objective> = Arc::new(quadratic100());
        let b: Arc<dyn Objective> = Arc::new(rosenbrock2d());
        assert!(matches!(
            FiniteSumObjective::new(vec![a, b]),
            Err(Error::DimensionMismatch { .. })
        ));
        let bad = SmoothnessProfile::new(0.0)
            .with_lipschitz(1.0)
            .with_strong_convexity(2.0);
        assert!(bad.validate().is_err());
    }
}
