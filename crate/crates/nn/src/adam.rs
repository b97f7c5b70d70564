use crate::error::{NnError, Result};
use crate::params::ParamSet;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

/// First/second moment estimates per parameter plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    m: ParamSet<T>,
    v: ParamSet<T>,
    step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(config: AdamConfig, params: &ParamSet<T>) -> Self {
        Self {
            config,
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update. Parameters are left untouched when any
    /// gradient is non-finite.
    pub fn step(&mut self, params: &mut ParamSet<T>, grads: &ParamSet<T>) -> Result<()> {
        if !params.same_layout(grads) || !params.same_layout(&self.m) {
            return Err(NnError::Invalid("adam: parameter/gradient layouts differ".into()));
        }
        if let Some(name) = grads.first_non_finite() {
            return Err(NnError::NonFiniteGradient(name.to_string()));
        }
        self.step += 1;
        let c = self.config;
        let b1 = T::from_f64_lossy(c.beta1);
        let b2 = T::from_f64_lossy(c.beta2);
        let one = T::one();
        let t = i32::try_from(self.step).unwrap_or(i32::MAX);
        let bc1 = one - b1.powi(t);
        let bc2 = one - b2.powi(t);
        let lr = T::from_f64_lossy(c.lr);
        let eps = T::from_f64_lossy(c.eps);
        let grad_iter = grads.iter();
        for (((p, (_, g)), m), v) in params
            .tensors_mut()
            .zip(grad_iter)
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut())
        {
            for (((pi, &gi), mi), vi) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mi = b1 * *mi + (one - b1) * gi;
                *vi = b2 * *vi + (one - b2) * gi * gi;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *pi -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Tensor;

    fn scalar_param(v: f64) -> ParamSet<f64> {
        let mut p = ParamSet::new();
        p.push("w", Tensor::from_vec(&[1], vec![v]).unwrap());
        p
    }

    #[test]
    fn zero_gradient_keeps_params_and_counts_step() {
        let mut p = scalar_param(0.7);
        let mut st = AdamState::new(AdamConfig::default(), &p);
        st.step(&mut p, &scalar_param(0.0)).unwrap();
        assert_eq!(p.get("w").unwrap().data()[0], 0.7);
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = scalar_param(0.0);
        let mut st = AdamState::new(AdamConfig::default(), &p);
        st.step(&mut p, &scalar_param(3.0)).unwrap();
        let w = p.get("w").unwrap().data()[0];
        assert!((w + 1e-5).abs() < 1e-12);
    }

    #[test]
    fn three_steps_on_square_match_hand_computation() {
        let cfg = AdamConfig::with_lr(0.1);
        let mut p = scalar_param(1.0);
        let mut st = AdamState::new(cfg, &p);
        for _ in 0..3 {
            let w = p.get("w").unwrap().data()[0];
            st.step(&mut p, &scalar_param(2.0 * w)).unwrap();
        }
        // Oracle: Adam on f(w) = w^2 from w = 1 unrolled by hand.
        let (b1, b2, lr, eps) = (0.9f64, 0.999f64, 0.1f64, 1e-8f64);
        let mut w = 1.0f64;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        for t in 1..=3 {
            let g = 2.0 * w;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            w -= lr * mh / (vh.sqrt() + eps);
        }
        assert!((p.get("w").unwrap().data()[0] - w).abs() < 1e-12);
    }

    #[test]
    fn non_finite_gradient_is_an_error() {
        let mut p = scalar_param(1.0);
        let mut st = AdamState::new(AdamConfig::default(), &p);
        let err = st.step(&mut p, &scalar_param(f64::NAN)).unwrap_err();
        assert_eq!(err, NnError::NonFiniteGradient("w".into()));
        assert_eq!(p.get("w").unwrap().data()[0], 1.0);
    }
}
