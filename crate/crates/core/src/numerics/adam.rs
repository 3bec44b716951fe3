use super::{NumericError, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    /// Bias-corrected Adam update of every parameter, then zero the gradients.
    ///
    /// Gradients are checked before anything is touched, so a non-finite
    /// gradient leaves the store unchanged (apart from its gradients).
    pub fn step(&self, store: &mut ParamStore) -> Result<(), NumericError> {
        if let Some(p) = store.iter().find(|p| !p.grad.is_finite()) {
            return Err(NumericError::NonFinite(format!("gradient of `{}` is not finite", p.name)));
        }
        for p in store.iter_mut() {
            p.step_count += 1;
            let t = p.step_count as i32;
            let c1 = 1.0 - self.beta1.powi(t);
            let c2 = 1.0 - self.beta2.powi(t);
            let g = p.grad.data();
            let m = p.adam_m.data_mut();
            for (m, g) in m.iter_mut().zip(g) {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            }
            let v = p.adam_v.data_mut();
            for (v, g) in v.iter_mut().zip(g) {
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            }
            let (m, v) = (p.adam_m.data(), p.adam_v.data());
            for ((x, m), v) in p.value.data_mut().iter_mut().zip(m).zip(v) {
                let m_hat = m / c1;
                let v_hat = v / c2;
                *x -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
            p.grad.fill(0.0);
        }
        Ok(())
    }
}
