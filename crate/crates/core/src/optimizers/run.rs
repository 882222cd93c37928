use serde::{Deserialize, Serialize};

use super::step::{
    adam_step, aegd_step_elementwise, aegd_step_global, aegdw_step, gd_step, gdm_step, saegd_step,
    AdamState,
};
use super::{EnergyMode, EnergyState, OptimizerConfig, OptimizerKind, ParamVector};
use crate::error::{Error, Result};
use crate::objectives::{sampled_value_and_grad, FiniteSumObjective, Objective, Sampler};
use crate::rng::{stream_rng, Rng};

/// Runs stop with status `diverged` once `|f|` or `|theta|_inf` passes this.
pub const DIVERGENCE_GUARD: f64 = 1e300;

/// Multiply the base step by `factor` from iteration `at` on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayStage {
    pub at: usize,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StoppingRule {
    pub max_iter: usize,
    pub grad_tol: Option<f64>,
    pub target_f: Option<f64>,
    pub decay: Vec<DecayStage>,
}

impl StoppingRule {
    pub fn iterations(max_iter: usize) -> Self {
        Self {
            max_iter,
            ..Self::default()
        }
    }

    pub fn with_grad_tol(mut self, tol: f64) -> Self {
        self.grad_tol = Some(tol);
        self
    }

    pub fn with_target(mut self, f: f64) -> Self {
        self.target_f = Some(f);
        self
    }

    pub fn with_decay(mut self, at: usize, factor: f64) -> Self {
        self.decay.push(DecayStage { at, factor });
        self.decay.sort_by_key(|d| d.at);
        self
    }

    fn eta_at(&self, base: f64, k: usize) -> f64 {
        self.decay
            .iter()
            .filter(|d| d.at <= k)
            .fold(base, |eta, d| eta * d.factor)
    }
}

/// How much of a run is kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recording {
    /// Every record, with per-coordinate detail.
    Full,
    /// Every record, scalars only.
    Summary,
    /// First and last record only.
    Endpoints,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Converged,
    Budget,
    Diverged,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Running => "running",
            RunStatus::Converged => "converged",
            RunStatus::Budget => "budget",
            RunStatus::Diverged => "diverged",
        }
    }
}

/// Per-coordinate detail of a record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDetail {
    pub r: Vec<f64>,
    pub eta_eff: Vec<f64>,
    pub increment: Vec<f64>,
}

/// State after `k` steps. `f`, `grad_norm` and the energy describe
/// `theta_k`; `eta`, `eta_eff_*`, `disp_sq` and `detail.increment` describe
/// the step that produced it and are zero on the initial record. Energy
/// columns are NaN for optimizers without an energy variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: usize,
    pub f: f64,
    pub grad_norm: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub eta: f64,
    pub eta_eff_min: f64,
    pub eta_eff_max: f64,
    pub disp_sq: f64,
    pub status: RunStatus,
    pub detail: Option<StepDetail>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub kind: OptimizerKind,
    pub mode: EnergyMode,
    pub eta: f64,
    pub shift: f64,
    pub records: Vec<TraceRecord>,
    pub status: RunStatus,
    pub iterations: usize,
    pub final_params: Vec<f64>,
    pub final_energy: Option<EnergyState>,
}

impl Trace {
    pub fn last(&self) -> &TraceRecord {
        self.records
            .last()
            .expect("a trace always holds the initial record")
    }

    pub fn final_f(&self) -> f64 {
        self.last().f
    }
}

enum State {
    Energy(EnergyState),
    Momentum(Vec<f64>),
    Adam(AdamState),
    Plain,
}

struct Incoming {
    eta: f64,
    eta_eff: Vec<f64>,
    increment: Vec<f64>,
    disp_sq: f64,
}

/// Runs `kind` from `theta0` with summary recording.
pub fn run(
    kind: OptimizerKind,
    objective: &dyn Objective,
    theta0: &[f64],
    config: &OptimizerConfig,
    stop: &StoppingRule,
    seed: u64,
) -> Result<Trace> {
    run_recorded(
        kind,
        objective,
        theta0,
        config,
        stop,
        seed,
        Recording::Summary,
    )
}

pub fn run_recorded(
    kind: OptimizerKind,
    objective: &dyn Objective,
    theta0: &[f64],
    config: &OptimizerConfig,
    stop: &StoppingRule,
    seed: u64,
    recording: Recording,
) -> Result<Trace> {
    run_with_rng(
        kind,
        objective,
        theta0,
        config,
        stop,
        stream_rng(seed, 0),
        recording,
    )
}

/// As `run_recorded`, drawing samples from `rng`. Independent trials pass
/// distinct streams of one seed.
pub fn run_with_rng(
    kind: OptimizerKind,
    objective: &dyn Objective,
    theta0: &[f64],
    config: &OptimizerConfig,
    stop: &StoppingRule,
    mut rng: Rng,
    recording: Recording,
) -> Result<Trace> {
    config.validate()?;
    let mut theta = ParamVector::new(theta0.to_vec())?.into_inner();
    let n = objective.dim();
    if theta.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: theta.len(),
        });
    }
    if stop.decay.iter().any(|d| !(d.factor > 0.0)) {
        return Err(Error::InvalidConfig(
            "decay factors must be positive".into(),
        ));
    }

    let source = match objective.as_finite_sum() {
        Some(fs) => Source::Sum(fs),
        None => Source::Single(objective),
    };
    let mut sampler = if kind.is_stochastic() {
        Some(Sampler::new(config.sampling, source.len())?)
    } else {
        None
    };

    let mut grad = vec![0.0; n];
    let mut f = objective.value_and_gradient(&theta, &mut grad);
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        if f.is_finite() {
            return Err(Error::NonFiniteGradient(i));
        }
    }

    let mut pending: Option<(f64, Vec<f64>)> = None;
    let mut state = match kind {
        OptimizerKind::Aegd => State::Energy(super::step::init_energy_from_value(f, n, config)?),
        OptimizerKind::Saegd | OptimizerKind::Aegdw => {
            let (fv, gv) = source.sample(&mut sampler, &mut rng, &theta)?;
            let r0 = shifted(fv, config.shift)?;
            pending = Some((fv, gv));
            State::Energy(EnergyState::Elementwise(vec![r0; n]))
        }
        OptimizerKind::Gdm => State::Momentum(theta.clone()),
        OptimizerKind::Adam => State::Adam(AdamState::new(n)),
        OptimizerKind::Gd => State::Plain,
    };

    let mut records: Vec<TraceRecord> = Vec::new();
    let mut incoming = Incoming {
        eta: 0.0,
        eta_eff: vec![0.0; n],
        increment: vec![0.0; n],
        disp_sq: 0.0,
    };
    let mut status;
    let mut k = 0usize;
    loop {
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let blown = !f.is_finite()
            || f.abs() > DIVERGENCE_GUARD
            || theta.iter().any(|t| !(t.abs() <= DIVERGENCE_GUARD))
            || !grad_norm.is_finite();
        status = if blown {
            RunStatus::Diverged
        } else if stop.target_f.is_some_and(|t| f <= t)
            || stop.grad_tol.is_some_and(|t| grad_norm <= t)
        {
            RunStatus::Converged
        } else if k >= stop.max_iter {
            RunStatus::Budget
        } else {
            RunStatus::Running
        };
        let record = make_record(k, f, grad_norm, &state, &incoming, status, recording);
        match recording {
            Recording::Endpoints if records.len() == 2 => records[1] = record,
            _ => records.push(record),
        }
        if status != RunStatus::Running {
            break;
        }

        let eta = stop.eta_at(config.eta, k);
        let step_config = OptimizerConfig {
            eta,
            ..config.clone()
        };
        match take_step(
            kind,
            &theta,
            &grad,
            f,
            &mut state,
            &step_config,
            &source,
            &mut sampler,
            &mut rng,
            &mut pending,
        ) {
            Ok((next, info)) => {
                theta = next;
                incoming = Incoming { eta, ..info };
            }
            Err(Error::NonFiniteIterate) => {
                status = RunStatus::Diverged;
                if let Some(last) = records.last_mut() {
                    last.status = status;
                }
                break;
            }
            Err(e) => return Err(e),
        }
        k += 1;
        f = objective.value_and_gradient(&theta, &mut grad);
    }

    let final_energy = match state {
        State::Energy(e) => Some(e),
        _ => None,
    };
    Ok(Trace {
        kind,
        mode: if kind.is_stochastic() {
            EnergyMode::Elementwise
        } else {
            config.mode
        },
        eta: config.eta,
        shift: config.shift,
        records,
        status,
        iterations: k,
        final_params: theta,
        final_energy,
    })
}

fn shifted(f: f64, c: f64) -> Result<f64> {
    let s = f + c;
    if !(s > 0.0) {
        return Err(Error::EnergyShiftViolation(s));
    }
    Ok(s.sqrt())
}

/// What stochastic steps draw from. A plain objective is a one-component sum.
enum Source<'a> {
    Sum(&'a FiniteSumObjective),
    Single(&'a dyn Objective),
}

impl Source<'_> {
    fn len(&self) -> usize {
        match self {
            Source::Sum(fs) => fs.len(),
            Source::Single(_) => 1,
        }
    }

    fn sample(
        &self,
        sampler: &mut Option<Sampler>,
        rng: &mut Rng,
        theta: &[f64],
    ) -> Result<(f64, Vec<f64>)> {
        let batch = sampler
            .as_mut()
            .expect("stochastic runs own a sampler")
            .next_batch(rng)?;
        Ok(match self {
            Source::Sum(fs) => sampled_value_and_grad(fs, &batch.xi, theta),
            Source::Single(obj) => {
                let mut g = vec![0.0; obj.dim()];
                let v = obj.value_and_gradient(theta, &mut g);
                (v, g)
            }
        })
    }
}

#[allow(clippy::too_many_arguments)]
fn take_step(
    kind: OptimizerKind,
    theta: &[f64],
    grad: &[f64],
    f: f64,
    state: &mut State,
    config: &OptimizerConfig,
    source: &Source<'_>,
    sampler: &mut Option<Sampler>,
    rng: &mut Rng,
    pending: &mut Option<(f64, Vec<f64>)>,
) -> Result<(Vec<f64>, Incoming)> {
    let eta = config.eta;
    let n = theta.len();
    let plain = |next: ParamVector| {
        let increment: Vec<f64> = next.iter().zip(theta).map(|(a, b)| a - b).collect();
        let disp_sq = increment.iter().map(|d| d * d).sum();
        (
            next.into_inner(),
            Incoming {
                eta,
                eta_eff: vec![eta; n],
                increment,
                disp_sq,
            },
        )
    };
    match (kind, state) {
        (OptimizerKind::Aegd, State::Energy(energy)) => {
            let out = match energy {
                EnergyState::Global(r) => aegd_step_global(theta, *r, grad, f, config)?,
                EnergyState::Elementwise(r) => aegd_step_elementwise(theta, r, grad, f, config)?,
            };
            *energy = out.new_energy;
            Ok((
                out.new_params.into_inner(),
                Incoming {
                    eta,
                    eta_eff: out.effective_steps,
                    increment: out.increment,
                    disp_sq: out.displacement_sq,
                },
            ))
        }
        (
            OptimizerKind::Saegd | OptimizerKind::Aegdw,
            State::Energy(EnergyState::Elementwise(r)),
        ) => {
            let (fv, gv) = match pending.take() {
                Some(p) => p,
                None => source.sample(sampler, rng, theta)?,
            };
            let out = if kind == OptimizerKind::Saegd {
                saegd_step(theta, r, fv, &gv, config)?
            } else {
                aegdw_step(theta, r, fv, &gv, config)?
            };
            if let EnergyState::Elementwise(next_r) = out.new_energy {
                *r = next_r;
            }
            Ok((
                out.new_params.into_inner(),
                Incoming {
                    eta,
                    eta_eff: out.effective_steps,
                    increment: out.increment,
                    disp_sq: out.displacement_sq,
                },
            ))
        }
        (OptimizerKind::Gd, State::Plain) => Ok(plain(gd_step(theta, grad, eta)?)),
        (OptimizerKind::Gdm, State::Momentum(prev)) => {
            let next = gdm_step(theta, prev, grad, eta, config.momentum)?;
            prev.copy_from_slice(theta);
            Ok(plain(next))
        }
        (OptimizerKind::Adam, State::Adam(adam)) => {
            let (next, s) = adam_step(theta, adam, grad, eta, &config.adam)?;
            *adam = s;
            Ok(plain(next))
        }
        _ => unreachable!("optimizer state always matches its kind"),
    }
}

fn make_record(
    k: usize,
    f: f64,
    grad_norm: f64,
    state: &State,
    incoming: &Incoming,
    status: RunStatus,
    recording: Recording,
) -> TraceRecord {
    let (r_min, r_max, r) = match state {
        State::Energy(e) => (e.min(), e.max(), e.values().to_vec()),
        _ => (f64::NAN, f64::NAN, Vec::new()),
    };
    let fold = |init: f64, op: fn(f64, f64) -> f64| incoming.eta_eff.iter().cloned().fold(init, op);
    let detail = (recording == Recording::Full).then(|| StepDetail {
        r,
        eta_eff: incoming.eta_eff.clone(),
        increment: incoming.increment.clone(),
    });
    TraceRecord {
        k,
        f,
        grad_norm,
        r_min,
        r_max,
        eta: incoming.eta,
        eta_eff_min: fold(f64::INFINITY, f64::min),
        eta_eff_max: fold(f64::NEG_INFINITY, f64::max),
        disp_sq: incoming.disp_sq,
        status,
        detail,
    }
}
