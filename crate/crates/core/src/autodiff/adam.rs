use super::{AutodiffError, Gradients, ParameterStore};

/// Adam optimizer state aligned with a [`ParameterStore`]'s flattening order.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step_count: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    /// Zero moments with the usual defaults (β₁ 0.9, β₂ 0.999, ε 1e-8).
    pub fn new(param_count: usize, lr: f64) -> Self {
        Self {
            first_moment: vec![0.0; param_count],
            second_moment: vec![0.0; param_count],
            step_count: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn len(&self) -> usize {
        self.first_moment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first_moment.is_empty()
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(params: &mut ParameterStore, grads: &Gradients, state: &mut AdamState) -> Result<(), AutodiffError> {
    let n = params.total_count();
    for found in [grads.len(), state.len()] {
        if found != n {
            return Err(AutodiffError::Misaligned { expected: n, found });
        }
    }
    if !(0.0..1.0).contains(&state.beta1) || !(0.0..1.0).contains(&state.beta2) {
        return Err(AutodiffError::InvalidOptimizer("betas must lie in [0, 1)".into()));
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let (b1, b2) = (state.beta1, state.beta2);
    for (((p, &g), m), v) in params
        .values_mut()
        .zip(grads.as_slice())
        .zip(state.first_moment.iter_mut())
        .zip(state.second_moment.iter_mut())
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}
