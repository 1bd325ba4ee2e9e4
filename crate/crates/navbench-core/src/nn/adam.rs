//! Adaptive-moment optimizer over a [`ParameterStore`].

use super::{NnError, ParameterStore};

/// Optimizer hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamParams {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Optimizer state: first/second moments mirroring the parameter layout,
/// plus the bias-correction step count.
#[derive(Debug, Clone)]
pub struct Adam {
    pub hyper: AdamParams,
    pub m: ParameterStore,
    pub v: ParameterStore,
    pub t: u64,
}

impl Adam {
    pub fn new(params: &ParameterStore, hyper: AdamParams) -> Self {
        Self {
            hyper,
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }

    /// One update with bias correction. Rejects the step (parameters and
    /// moments untouched) when any gradient is non-finite.
    pub fn step(&mut self, params: &mut ParameterStore, grads: &ParameterStore) -> Result<(), NnError> {
        if !grads.all_finite() {
            return Err(NnError::NonFinite {
                context: "gradients passed to optimizer".into(),
            });
        }
        self.t += 1;
        let b1 = self.hyper.beta1;
        let b2 = self.hyper.beta2;
        let bc1 = 1.0 - b1.powi(self.t as i32);
        let bc2 = 1.0 - b2.powi(self.t as i32);
        for idx in 0..params.len() {
            let g = grads.by_idx(idx);
            let m = self.m.by_idx_mut(idx);
            for (mv, gv) in m.iter_mut().zip(g) {
                *mv = b1 * *mv + (1.0 - b1) * gv;
            }
            let v = self.v.by_idx_mut(idx);
            for (vv, gv) in v.iter_mut().zip(g) {
                *vv = b2 * *vv + (1.0 - b2) * gv * gv;
            }
            let m = self.m.by_idx(idx);
            let v = self.v.by_idx(idx);
            let p = params.by_idx_mut(idx);
            for ((pv, mv), vv) in p.iter_mut().zip(m).zip(v) {
                let m_hat = mv / bc1;
                let v_hat = vv / bc2;
                *pv -= self.hyper.lr * m_hat / (v_hat.sqrt() + self.hyper.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_param(value: f64) -> ParameterStore {
        let mut store = ParameterStore::new();
        store.register("w", vec![1], vec![value]);
        store
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut params = single_param(0.7);
        let grads = params.zeros_like();
        let mut adam = Adam::new(&params, AdamParams::with_lr(1e-3));
        adam.step(&mut params, &grads).unwrap();
        assert_eq!(params.get("w").unwrap()[0], 0.7);
        assert_eq!(adam.t, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // From zero state with g = 1, the bias-corrected update is
        // lr * 1 / (1 + eps), i.e. almost exactly -lr.
        let mut params = single_param(0.0);
        let mut grads = params.zeros_like();
        grads.get_mut("w").unwrap()[0] = 1.0;
        let mut adam = Adam::new(&params, AdamParams::with_lr(1e-3));
        adam.step(&mut params, &grads).unwrap();
        let w = params.get("w").unwrap()[0];
        assert!((w + 1e-3).abs() < 1e-9, "got {w}");
    }

    #[test]
    fn constant_gradient_descends() {
        let mut params = single_param(0.0);
        let mut grads = params.zeros_like();
        grads.get_mut("w").unwrap()[0] = 2.5;
        let mut adam = Adam::new(&params, AdamParams::with_lr(1e-3));
        for _ in 0..100 {
            adam.step(&mut params, &grads).unwrap();
        }
        assert!(params.get("w").unwrap()[0] < -0.05);
    }

    #[test]
    fn non_finite_gradient_rejects_step() {
        let mut params = single_param(0.3);
        let mut grads = params.zeros_like();
        grads.get_mut("w").unwrap()[0] = f64::NAN;
        let mut adam = Adam::new(&params, AdamParams::with_lr(1e-3));
        assert!(adam.step(&mut params, &grads).is_err());
        assert_eq!(params.get("w").unwrap()[0], 0.3);
        assert_eq!(adam.t, 0);
    }
}
