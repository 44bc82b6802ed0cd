use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{AutodiffError, ParamStore, Real};

/// Adam with decoupled weight decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamW {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.01 }
    }
}

/// Moment accumulators, one pair per parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimState<T> {
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    pub step: u64,
}

impl<T: Real> OptimState<T> {
    pub fn for_params(p: &ParamStore<T>) -> Self {
        let m: Vec<Vec<T>> = p.iter().map(|(_, t)| vec![T::zero(); t.len()]).collect();
        Self { v: m.clone(), m, step: 0 }
    }
}

impl AdamW {
    /// One update. Parameters whose gradient is `None` still decay and
    /// see a zero gradient.
    pub fn step<T: Real>(&self, params: &mut ParamStore<T>, grads: &[Option<&[T]>], state: &mut OptimState<T>) -> Result<(), AutodiffError> {
        if grads.len() != params.len() || state.m.len() != params.len() {
            return Err(AutodiffError::ShapeMismatch("optimizer state does not match parameters"));
        }
        state.step += 1;
        let t = state.step as f64;
        let bc1 = 1.0 - libm::pow(self.beta1, t);
        let bc2 = 1.0 - libm::pow(self.beta2, t);
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let decay = T::of(1.0 - self.lr * self.weight_decay);
        let step_size = T::of(self.lr / bc1);
        let (bc2_sqrt, eps) = (T::of(libm::sqrt(bc2)), T::of(self.eps));
        for i in 0..params.len() {
            let p = &mut params.get_mut(i).data;
            let (m, v) = (&mut state.m[i], &mut state.v[i]);
            if m.len() != p.len() || grads[i].is_some_and(|g| g.len() != p.len()) {
                return Err(AutodiffError::ShapeMismatch("gradient length differs from parameter"));
            }
            for j in 0..p.len() {
                let g = grads[i].map_or(T::zero(), |g| g[j]);
                p[j] = p[j] * decay;
                m[j] = b1 * m[j] + (T::one() - b1) * g;
                v[j] = b2 * v[j] + (T::one() - b2) * g * g;
                p[j] = p[j] - step_size * m[j] / (v[j].sqrt() / bc2_sqrt + eps);
            }
        }
        Ok(())
    }
}

/// Multiplies the learning rate by `factor` once the best validation loss
/// has gone `patience` epochs without improving.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateauScheduler {
    pub lr: f64,
    pub factor: f64,
    pub patience: usize,
    pub min_lr: f64,
    pub best: Option<f64>,
    pub bad_epochs: usize,
}

impl PlateauScheduler {
    pub fn new(lr: f64, factor: f64, patience: usize, min_lr: f64) -> Self {
        assert!(patience >= 1 && factor > 0.0 && factor < 1.0, "patience >= 1 and 0 < factor < 1");
        Self { lr, factor, patience, min_lr, best: None, bad_epochs: 0 }
    }

    /// Records one epoch's validation loss and returns the learning rate
    /// for the next epoch.
    pub fn observe(&mut self, val_loss: f64) -> f64 {
        match self.best {
            Some(b) if !(val_loss < b) => {
                self.bad_epochs += 1;
                if self.bad_epochs >= self.patience {
                    self.lr = (self.lr * self.factor).max(self.min_lr);
                    self.bad_epochs = 0;
                }
            }
            _ => {
                self.best = Some(val_loss);
                self.bad_epochs = 0;
            }
        }
        self.lr
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;

    fn scalar(v: f64) -> ParamStore<f64> {
        let mut p = ParamStore::new(0);
        p.push("x", Tensor::full(&[1], v));
        p
    }

    #[test]
    fn first_step_is_lr_sized() {
        let mut p = scalar(0.0);
        let mut s = OptimState::for_params(&p);
        let opt = AdamW { lr: 0.1, weight_decay: 0.0, ..AdamW::default() };
        opt.step(&mut p, &[Some(&[1.0])], &mut s).unwrap();
        let expected = -0.1 / (1.0 + 1e-8);
        assert!((p.get(0).data[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn decoupled_decay_and_zero_gradient() {
        let mut p = scalar(1.0);
        let mut s = OptimState::for_params(&p);
        AdamW { lr: 0.1, weight_decay: 0.01, ..AdamW::default() }.step(&mut p, &[Some(&[0.0])], &mut s).unwrap();
        assert!((p.get(0).data[0] - 0.999).abs() < 1e-15);
        let mut p = scalar(1.0);
        AdamW { weight_decay: 0.0, ..AdamW::default() }.step(&mut p, &[None], &mut s).unwrap();
        assert_eq!(p.get(0).data[0], 1.0);
    }

    #[test]
    fn plateau_rule() {
        let mut s = PlateauScheduler::new(1e-3, 0.5, 2, 1e-5);
        for l in [5.0, 4.0, 3.0, 2.0] {
            assert_eq!(s.observe(l), 1e-3);
        }
        let mut s = PlateauScheduler::new(1e-3, 0.5, 2, 1e-5);
        let lrs: Vec<f64> = (0..3).map(|_| s.observe(1.0)).collect();
        assert_eq!(lrs, vec![1e-3, 1e-3, 5e-4]);
        let mut s = PlateauScheduler::new(1e-5, 0.5, 1, 1e-5);
        for _ in 0..4 {
            assert_eq!(s.observe(1.0), 1e-5);
        }
    }
}
