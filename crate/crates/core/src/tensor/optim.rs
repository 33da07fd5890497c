use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::dense::Tensor;

/// Hyperparameters of the decoupled-weight-decay Adam update.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// First and second moment estimates, one pair per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Applied,
    /// A gradient contained NaN or infinity; parameters and state are untouched.
    SkippedNonFinite,
}

impl AdamState {
    pub fn zeros_like(params: &[Tensor]) -> Self {
        AdamState {
            step: 0,
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
        }
    }
}

/// One AdamW step: `p <- p - lr * wd * p - lr * m_hat / (sqrt(v_hat) + eps)`.
pub fn adam_step(
    params: &mut [Tensor],
    grads: &[Tensor],
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<StepOutcome> {
    if params.len() != grads.len() || params.len() != state.m.len() || params.len() != state.v.len() {
        return Err(Error::invalid(format!(
            "adam_step: {} params, {} grads, {} moment tensors",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || p.shape() != state.m[i].shape() || p.shape() != state.v[i].shape() {
            return Err(Error::Shape {
                op: "adam_step",
                lhs: p.shape().to_vec(),
                rhs: g.shape().to_vec(),
            });
        }
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Ok(StepOutcome::SkippedNonFinite);
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        let decay = 1.0 - cfg.lr * cfg.weight_decay;
        for (((pv, &gv), mv), vv) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut().iter_mut())
            .zip(v.data_mut().iter_mut())
        {
            *mv = cfg.beta1 * *mv + (1.0 - cfg.beta1) * gv;
            *vv = cfg.beta2 * *vv + (1.0 - cfg.beta2) * gv * gv;
            let mhat = *mv / bc1;
            let vhat = *vv / bc2;
            *pv = *pv * decay - cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
        }
    }
    Ok(StepOutcome::Applied)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(lr: f64, wd: f64) -> AdamConfig {
        AdamConfig {
            lr,
            weight_decay: wd,
            ..AdamConfig::default()
        }
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = vec![Tensor::scalar(1.0)];
        let g = vec![Tensor::scalar(1.0)];
        let mut st = AdamState::zeros_like(&p);
        adam_step(&mut p, &g, &mut st, &cfg(0.1, 0.0)).unwrap();
        // m_hat = v_hat = 1 after bias correction, so the step is lr / (1 + eps).
        assert!((p[0].item() - (1.0 - 0.1 / (1.0 + 1e-8))).abs() < 1e-15);
        assert!((p[0].item() - 0.9).abs() < 1e-8);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn zero_grad_zero_decay_is_fixed_point() {
        let mut p = vec![Tensor::new(vec![3], vec![0.5, -2.0, 7.0]).unwrap()];
        let before = p.clone();
        let g = vec![Tensor::zeros(&[3])];
        let mut st = AdamState::zeros_like(&p);
        for _ in 0..5 {
            adam_step(&mut p, &g, &mut st, &cfg(0.1, 0.0)).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn decoupled_decay_scales_params() {
        let mut p = vec![Tensor::new(vec![2], vec![2.0, -4.0]).unwrap()];
        let g = vec![Tensor::zeros(&[2])];
        let mut st = AdamState::zeros_like(&p);
        adam_step(&mut p, &g, &mut st, &cfg(0.1, 0.1)).unwrap();
        assert!((p[0].data()[0] - 2.0 * 0.99).abs() < 1e-15);
        assert!((p[0].data()[1] + 4.0 * 0.99).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_skips() {
        let mut p = vec![Tensor::scalar(1.0)];
        let g = vec![Tensor::scalar(f64::NAN)];
        let mut st = AdamState::zeros_like(&p);
        let out = adam_step(&mut p, &g, &mut st, &cfg(0.1, 0.0)).unwrap();
        assert_eq!(out, StepOutcome::SkippedNonFinite);
        assert_eq!(p[0].item(), 1.0);
        assert_eq!(st.step, 0);
    }

    #[test]
    fn mismatched_state_rejected() {
        let mut p = vec![Tensor::scalar(1.0)];
        let g = vec![Tensor::zeros(&[2])];
        let mut st = AdamState::zeros_like(&p);
        assert!(adam_step(&mut p, &g, &mut st, &cfg(0.1, 0.0)).is_err());
    }
}
