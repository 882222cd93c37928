use super::{EnergyMode, EnergyState, OptimizerConfig, ParamVector, StepOutcome};
use crate::error::{Error, Result};
use crate::objectives::Objective;

fn shifted_root(f_val: f64, c: f64) -> Result<f64> {
    let s = f_val + c;
    if !(s > 0.0) {
        return Err(Error::EnergyShiftViolation(s));
    }
    Ok(s.sqrt())
}

fn check_gradient(grad: &[f64]) -> Result<()> {
    match grad.iter().position(|g| !g.is_finite()) {
        Some(i) => Err(Error::NonFiniteGradient(i)),
        None => Ok(()),
    }
}

fn check_dims(theta: &[f64], other: usize) -> Result<()> {
    if theta.len() != other {
        return Err(Error::DimensionMismatch {
            expected: theta.len(),
            found: other,
        });
    }
    Ok(())
}

/// `r_0 = sqrt(f_0 + c)`, replicated over `n` coordinates in element-wise mode.
pub fn init_energy_from_value(f0: f64, n: usize, config: &OptimizerConfig) -> Result<EnergyState> {
    let r0 = shifted_root(f0, config.shift)?;
    Ok(match config.mode {
        EnergyMode::Global => EnergyState::Global(r0),
        EnergyMode::Elementwise => EnergyState::Elementwise(vec![r0; n]),
    })
}

pub fn init_energy(
    objective: &dyn Objective,
    theta0: &[f64],
    config: &OptimizerConfig,
) -> Result<EnergyState> {
    check_dims(theta0, objective.dim())?;
    init_energy_from_value(objective.value(theta0), theta0.len(), config)
}

pub fn aegd_step_global(
    theta: &[f64],
    r: f64,
    grad: &[f64],
    f_val: f64,
    config: &OptimizerConfig,
) -> Result<StepOutcome> {
    check_dims(theta, grad.len())?;
    check_gradient(grad)?;
    let g = shifted_root(f_val, config.shift)?;
    let eta = config.eta;
    let v: Vec<f64> = grad.iter().map(|d| d / (2.0 * g)).collect();
    let v_sq: f64 = v.iter().map(|x| x * x).sum();
    let r_next = r / (1.0 + 2.0 * eta * v_sq);
    let increment: Vec<f64> = v.iter().map(|vi| -2.0 * eta * r_next * vi).collect();
    finish(
        theta,
        increment,
        EnergyState::Global(r_next),
        vec![eta * r_next / g],
    )
}

pub fn aegd_step_elementwise(
    theta: &[f64],
    r: &[f64],
    grad: &[f64],
    f_val: f64,
    config: &OptimizerConfig,
) -> Result<StepOutcome> {
    elementwise(theta, r, grad, f_val, config, 0.0)
}

/// Stochastic element-wise step on a sampled value and gradient.
pub fn saegd_step(
    theta: &[f64],
    r: &[f64],
    sampled_f_val: f64,
    sampled_grad: &[f64],
    config: &OptimizerConfig,
) -> Result<StepOutcome> {
    elementwise(theta, r, sampled_grad, sampled_f_val, config, 0.0)
}

/// Stochastic step with decoupled weight decay: the parameter update also
/// subtracts `eta * weight_decay * theta_k`.
pub fn aegdw_step(
    theta: &[f64],
    r: &[f64],
    sampled_f_val: f64,
    sampled_grad: &[f64],
    config: &OptimizerConfig,
) -> Result<StepOutcome> {
    elementwise(
        theta,
        r,
        sampled_grad,
        sampled_f_val,
        config,
        config.weight_decay,
    )
}

fn elementwise(
    theta: &[f64],
    r: &[f64],
    grad: &[f64],
    f_val: f64,
    config: &OptimizerConfig,
    decay: f64,
) -> Result<StepOutcome> {
    check_dims(theta, grad.len())?;
    check_dims(theta, r.len())?;
    check_gradient(grad)?;
    let g = shifted_root(f_val, config.shift)?;
    let eta = config.eta;
    let n = theta.len();
    let mut r_next = Vec::with_capacity(n);
    let mut increment = Vec::with_capacity(n);
    let mut effective = Vec::with_capacity(n);
    for i in 0..n {
        let v = grad[i] / (2.0 * g);
        let ri = r[i] / (1.0 + 2.0 * eta * (v * v));
        let mut d = -2.0 * eta * ri * v;
        if decay != 0.0 {
            d -= eta * decay * theta[i];
        }
        r_next.push(ri);
        increment.push(d);
        effective.push(eta * ri / g);
    }
    finish(
        theta,
        increment,
        EnergyState::Elementwise(r_next),
        effective,
    )
}

fn finish(
    theta: &[f64],
    increment: Vec<f64>,
    new_energy: EnergyState,
    effective_steps: Vec<f64>,
) -> Result<StepOutcome> {
    let new_params =
        ParamVector::from_finite(theta.iter().zip(&increment).map(|(t, d)| t + d).collect())?;
    let displacement_sq = increment.iter().map(|d| d * d).sum();
    Ok(StepOutcome {
        new_params,
        new_energy,
        effective_steps,
        increment,
        displacement_sq,
    })
}

pub fn gd_step(theta: &[f64], grad: &[f64], eta: f64) -> Result<ParamVector> {
    check_dims(theta, grad.len())?;
    check_gradient(grad)?;
    ParamVector::from_finite(theta.iter().zip(grad).map(|(t, g)| t - eta * g).collect())
}

/// Heavy ball: `theta_k - eta grad + mu (theta_k - theta_{k-1})`.
pub fn gdm_step(
    theta: &[f64],
    prev: &[f64],
    grad: &[f64],
    eta: f64,
    mu: f64,
) -> Result<ParamVector> {
    check_dims(theta, grad.len())?;
    check_dims(theta, prev.len())?;
    check_gradient(grad)?;
    ParamVector::from_finite(
        theta
            .iter()
            .zip(prev)
            .zip(grad)
            .map(|((t, p), g)| t - eta * g + mu * (t - p))
            .collect(),
    )
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u32,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }
}

pub fn adam_step(
    theta: &[f64],
    state: &AdamState,
    grad: &[f64],
    eta: f64,
    params: &super::AdamParams,
) -> Result<(ParamVector, AdamState)> {
    check_dims(theta, grad.len())?;
    check_gradient(grad)?;
    let t = state.t + 1;
    let bc1 = 1.0 - params.beta1.powi(t as i32);
    let bc2 = 1.0 - params.beta2.powi(t as i32);
    let mut next = AdamState {
        m: state.m.clone(),
        v: state.v.clone(),
        t,
    };
    let mut out = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        let g = grad[i];
        next.m[i] = params.beta1 * state.m[i] + (1.0 - params.beta1) * g;
        next.v[i] = params.beta2 * state.v[i] + (1.0 - params.beta2) * g * g;
        let m_hat = next.m[i] / bc1;
        let v_hat = next.v[i] / bc2;
        out.push(theta[i] - eta * m_hat / (v_hat.sqrt() + params.epsilon));
    }
    Ok((ParamVector::from_finite(out)?, next))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::Quadratic;
    use crate::optimizers::AdamParams;

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    fn cfg(eta: f64) -> OptimizerConfig {
        OptimizerConfig::default().with_eta(eta).with_shift(1.0)
    }

    #[test]
    fn init_energy_examples() {
        let sq = Quadratic::centered(vec![1.0]).unwrap();
        let r = init_energy(&sq, &[1.0], &cfg(1.0)).unwrap();
        assert!((r.values()[0] - SQRT2).abs() < 1e-15);
        let r = init_energy(&sq, &[0.0], &cfg(1.0)).unwrap();
        assert_eq!(r.values(), &[1.0]);
        let err = init_energy(&sq, &[0.0], &cfg(1.0).with_shift(0.0));
        assert!(matches!(err, Err(Error::EnergyShiftViolation(_))));
        let global = init_energy(&sq, &[1.0], &cfg(1.0).with_mode(EnergyMode::Global)).unwrap();
        assert!(matches!(global, EnergyState::Global(_)));
    }

    #[test]
    fn global_step_hand_example() {
        // f = x^2 at x = 1: grad 2, f 1
        let out = aegd_step_global(&[1.0], SQRT2, &[2.0], 1.0, &cfg(1.0)).unwrap();
        let r1 = out.new_energy.values()[0];
        assert!((r1 - SQRT2 / 2.0).abs() < 1e-15);
        assert!(out.new_params[0].abs() < 1e-15);
        // 0.5 = 2 - 0.5 - 1
        let lhs = r1 * r1;
        let rhs = 2.0 - (r1 - SQRT2).powi(2) - out.displacement_sq;
        assert!((lhs - rhs).abs() < 1e-15);
        assert!((lhs - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let out = aegd_step_global(&[0.3, -2.0], 1.7, &[0.0, 0.0], 4.0, &cfg(3.0)).unwrap();
        assert_eq!(out.new_params.as_slice(), &[0.3, -2.0]);
        assert_eq!(out.new_energy, EnergyState::Global(1.7));
        let out =
            aegd_step_elementwise(&[0.3, -2.0], &[1.7, 1.1], &[0.0, 0.0], 4.0, &cfg(3.0)).unwrap();
        assert_eq!(out.new_params.as_slice(), &[0.3, -2.0]);
        assert_eq!(out.new_energy.values(), &[1.7, 1.1]);
        assert_eq!(gd_step(&[0.5], &[0.0], 0.1).unwrap().as_slice(), &[0.5]);
        assert_eq!(
            gdm_step(&[0.5], &[0.5], &[0.0], 0.1, 0.9)
                .unwrap()
                .as_slice(),
            &[0.5]
        );
        let (p, _) = adam_step(
            &[0.5],
            &AdamState::new(1),
            &[0.0],
            0.1,
            &AdamParams::default(),
        )
        .unwrap();
        assert_eq!(p.as_slice(), &[0.5]);
        let w = aegdw_step(
            &[0.0],
            &[1.0],
            1.0,
            &[0.0],
            &cfg(1.0).with_weight_decay(0.3),
        )
        .unwrap();
        assert_eq!(w.new_params.as_slice(), &[0.0]);
    }

    #[test]
    fn elementwise_hand_example() {
        // f = x^2 + y^2 at (1, 0): f 1, grad (2, 0)
        let out = aegd_step_elementwise(&[1.0, 0.0], &[SQRT2, SQRT2], &[2.0, 0.0], 1.0, &cfg(1.0))
            .unwrap();
        let r = out.new_energy.values();
        assert!((r[0] - SQRT2 / 2.0).abs() < 1e-15);
        assert_eq!(r[1], SQRT2);
        assert!(out.new_params[0].abs() < 1e-15);
        assert_eq!(out.new_params[1], 0.0);
    }

    #[test]
    fn elementwise_matches_global_in_one_dimension() {
        for &(x, r, d, f, eta) in &[
            (1.0, SQRT2, 2.0, 1.0, 1.0),
            (-0.7, 3.1, -5.3, 2.2, 0.013),
            (4.0, 0.2, 9.0, 16.0, 250.0),
        ] {
            let g = aegd_step_global(&[x], r, &[d], f, &cfg(eta)).unwrap();
            let e = aegd_step_elementwise(&[x], &[r], &[d], f, &cfg(eta)).unwrap();
            assert_eq!(g.new_params, e.new_params);
            assert_eq!(g.new_energy.values(), e.new_energy.values());
            assert_eq!(g.effective_steps, e.effective_steps);
        }
    }

    #[test]
    fn stochastic_step_examples() {
        // component f1 = x^2 sampled at x = 1
        let out = saegd_step(&[1.0], &[SQRT2], 1.0, &[2.0], &cfg(1.0)).unwrap();
        assert!(out.new_params[0].abs() < 1e-15);
        let out = saegd_step(&[1.0], &[SQRT2], 1.0, &[0.0], &cfg(1.0)).unwrap();
        assert_eq!(out.new_params.as_slice(), &[1.0]);
        assert_eq!(out.new_energy.values(), &[SQRT2]);
        assert!(matches!(
            saegd_step(&[1.0], &[1.0], -1.0, &[2.0], &cfg(1.0)),
            Err(Error::EnergyShiftViolation(_))
        ));
    }

    #[test]
    fn aegdw_examples() {
        let plain = saegd_step(&[0.4, -1.3], &[1.2, 0.9], 2.0, &[0.5, 3.0], &cfg(0.7)).unwrap();
        let no_decay = aegdw_step(
            &[0.4, -1.3],
            &[1.2, 0.9],
            2.0,
            &[0.5, 3.0],
            &cfg(0.7).with_weight_decay(0.0),
        )
        .unwrap();
        assert_eq!(plain, no_decay);
        let out = aegdw_step(
            &[1.0],
            &[SQRT2],
            1.0,
            &[2.0],
            &cfg(1.0).with_weight_decay(0.1),
        )
        .unwrap();
        assert!((out.new_params[0] + 0.1).abs() < 1e-15);
        assert_eq!(out.new_energy, plain_energy(&[SQRT2], 1.0, &[2.0]));
    }

    fn plain_energy(r: &[f64], f: f64, g: &[f64]) -> EnergyState {
        saegd_step(&[1.0], r, f, g, &cfg(1.0)).unwrap().new_energy
    }

    #[test]
    fn gd_and_gdm_examples() {
        assert!((gd_step(&[1.0], &[2.0], 0.1).unwrap()[0] - 0.8).abs() < 1e-15);
        assert_eq!(gd_step(&[1.0], &[2.0], 1.0).unwrap()[0], -1.0);
        let t1 = gdm_step(&[1.0], &[1.0], &[2.0], 0.1, 0.9).unwrap();
        assert!((t1[0] - 0.8).abs() < 1e-15);
        let t2 = gdm_step(&t1, &[1.0], &[2.0 * t1[0]], 0.1, 0.9).unwrap();
        assert!((t2[0] - 0.46).abs() < 1e-15);
        let plain = gd_step(&[0.37, 2.0], &[1.5, -0.25], 0.3).unwrap();
        let heavy = gdm_step(&[0.37, 2.0], &[0.1, 7.0], &[1.5, -0.25], 0.3, 0.0).unwrap();
        assert_eq!(plain, heavy);
    }

    #[test]
    fn adam_first_step_and_steady_state() {
        let (p, _) = adam_step(
            &[1.0],
            &AdamState::new(1),
            &[2.0],
            0.001,
            &AdamParams::default(),
        )
        .unwrap();
        assert!((p[0] - 0.999).abs() < 1e-9);
        let mut theta = vec![0.0];
        let mut state = AdamState::new(1);
        let mut last = 0.0;
        for _ in 0..10_000 {
            let (p, s) = adam_step(&theta, &state, &[-3.0], 0.01, &AdamParams::default()).unwrap();
            last = p[0] - theta[0];
            theta = p.into_inner();
            state = s;
        }
        assert!((last - 0.01).abs() < 1e-6, "{last}");
    }

    #[test]
    fn rejects_non_finite_gradient() {
        assert!(matches!(
            gd_step(&[1.0], &[f64::NAN], 0.1),
            Err(Error::NonFiniteGradient(0))
        ));
        assert!(matches!(
            aegd_step_global(&[1.0, 1.0], 1.0, &[0.0, f64::INFINITY], 1.0, &cfg(1.0)),
            Err(Error::NonFiniteGradient(1))
        ));
        assert!(matches!(
            aegd_step_global(&[1.0], 1.0, &[2.0], -1.0, &cfg(1.0)),
            Err(Error::EnergyShiftViolation(_))
        ));
    }
}
