//! Adam and the reduce-on-plateau learning-rate schedule.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::layers::ParamStore;
use super::Real;

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<Array2<T>>,
    v: Vec<Array2<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(store: &ParamStore<T>, lr: f64) -> Self {
        let zeros = || store.values().iter().map(|p| Array2::zeros(p.dim())).collect::<Vec<_>>();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    /// Applies one update. `grads[i]` may be `None` for parameters that
    /// received no gradient; they are treated as zero.
    pub fn step(&mut self, store: &mut ParamStore<T>, grads: &[Option<Array2<T>>]) {
        self.step += 1;
        let b1 = T::of(self.beta1);
        let b2 = T::of(self.beta2);
        let one = T::one();
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        let step_size = T::of(self.lr / c1);
        let c2 = T::of(c2.sqrt());
        let eps = T::of(self.eps);
        for (i, p) in store.values_mut().iter_mut().enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            match grads.get(i).and_then(Option::as_ref) {
                Some(g) => {
                    ndarray::Zip::from(&mut *m).and(&mut *v).and(g).for_each(|m, v, &g| {
                        *m = b1 * *m + (one - b1) * g;
                        *v = b2 * *v + (one - b2) * g * g;
                    });
                }
                None => {
                    m.mapv_inplace(|x| b1 * x);
                    v.mapv_inplace(|x| b2 * x);
                }
            }
            ndarray::Zip::from(p).and(&*m).and(&*v).for_each(|p, &m, &v| {
                *p -= step_size * m / (v.sqrt() / c2 + eps);
            });
        }
    }

    pub fn moments(&self) -> (&[Array2<T>], &[Array2<T>]) {
        (&self.m, &self.v)
    }

    pub fn from_parts(lr: f64, step: u64, m: Vec<Array2<T>>, v: Vec<Array2<T>>) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step,
            m,
            v,
        }
    }
}

/// Halves the learning rate after `patience` epochs without strict
/// improvement and signals a stop once a reduction takes it below `min_lr`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauSchedule {
    pub lr: f64,
    pub factor: f64,
    pub patience: usize,
    pub min_lr: f64,
    pub min_epochs: usize,
    pub best: Option<f64>,
    pub bad_epochs: usize,
    pub epochs: usize,
    pub reductions: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateauStep {
    pub lr: f64,
    pub reduced: bool,
    pub stop: bool,
}

impl PlateauSchedule {
    pub fn new(lr: f64, min_epochs: usize) -> Self {
        Self {
            lr,
            factor: 0.5,
            patience: 10,
            min_lr: 1e-6,
            min_epochs,
            best: None,
            bad_epochs: 0,
            epochs: 0,
            reductions: 0,
        }
    }

    pub fn step(&mut self, val_loss: f64) -> PlateauStep {
        self.epochs += 1;
        let improved = match self.best {
            None => true,
            Some(b) => val_loss < b,
        };
        let mut reduced = false;
        if improved {
            self.best = Some(val_loss);
            self.bad_epochs = 0;
        } else {
            self.bad_epochs += 1;
            if self.bad_epochs >= self.patience {
                self.lr *= self.factor;
                self.bad_epochs = 0;
                self.reductions += 1;
                reduced = true;
            }
        }
        PlateauStep {
            lr: self.lr,
            reduced,
            stop: self.reductions > 0 && self.lr < self.min_lr && self.epochs >= self.min_epochs,
        }
    }
}

/// Everything needed to resume training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub step: u64,
    pub lr: f64,
    pub first_moments: Vec<Vec<f64>>,
    pub second_moments: Vec<Vec<f64>>,
    pub schedule: PlateauSchedule,
}

impl OptimizerState {
    pub fn capture<T: Real>(adam: &Adam<T>, schedule: &PlateauSchedule) -> Self {
        let flat = |xs: &[Array2<T>]| xs.iter().map(|a| a.iter().map(|x| x.as_f64()).collect()).collect();
        let (m, v) = adam.moments();
        Self {
            step: adam.step,
            lr: adam.lr,
            first_moments: flat(m),
            second_moments: flat(v),
            schedule: schedule.clone(),
        }
    }

    /// Rebuilds the optimizer; `None` if the moment shapes do not match `store`.
    pub fn restore<T: Real>(&self, store: &ParamStore<T>) -> Option<(Adam<T>, PlateauSchedule)> {
        let unflat = |xs: &[Vec<f64>]| -> Option<Vec<Array2<T>>> {
            if xs.len() != store.len() {
                return None;
            }
            xs.iter()
                .zip(store.values())
                .map(|(x, p)| Array2::from_shape_vec(p.dim(), x.iter().map(|&v| T::of(v)).collect()).ok())
                .collect()
        };
        let m = unflat(&self.first_moments)?;
        let v = unflat(&self.second_moments)?;
        Some((Adam::from_parts(self.lr, self.step, m, v), self.schedule.clone()))
    }
}
