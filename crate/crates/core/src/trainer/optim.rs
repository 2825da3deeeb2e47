use crate::error::{Error, Result};
use crate::params::Parameters;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    /// Adaptive first/second-moment method with bias correction.
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
    Sgd { lr: f64 },
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl OptimizerKind {
    pub fn learning_rate(&self) -> f64 {
        match *self {
            OptimizerKind::Adam { lr, .. } | OptimizerKind::Sgd { lr } => lr,
        }
    }
}

/// Per-tensor moment accumulators, congruent with the parameter registry.
#[derive(Debug, Clone)]
pub struct OptimizerState<T> {
    pub first: Vec<Vec<T>>,
    pub second: Vec<Vec<T>>,
    pub step: u64,
}

#[derive(Debug, Clone)]
pub struct Optimizer<T> {
    kind: OptimizerKind,
    state: OptimizerState<T>,
}

impl<T: Scalar> Optimizer<T> {
    pub fn new<P: Parameters<T>>(kind: OptimizerKind, params: &P) -> Self {
        let shapes: Vec<usize> = params.params().iter().map(|p| p.data.len()).collect();
        let zeros = |with: bool| -> Vec<Vec<T>> {
            if with {
                shapes.iter().map(|&n| vec![T::zero(); n]).collect()
            } else {
                Vec::new()
            }
        };
        let adam = matches!(kind, OptimizerKind::Adam { .. });
        Self {
            kind,
            state: OptimizerState {
                first: zeros(adam),
                second: zeros(adam),
                step: 0,
            },
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn state(&self) -> &OptimizerState<T> {
        &self.state
    }

    /// Applies one update of `params` along `grads`.
    pub fn step<P: Parameters<T>>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        self.state.step += 1;
        match self.kind {
            OptimizerKind::Sgd { lr } => {
                let lr = T::of(lr);
                for (p, g) in params.params_mut().into_iter().zip(grads.params()) {
                    for (x, &d) in p.data.iter_mut().zip(g.data) {
                        *x -= lr * d;
                    }
                }
            }
            OptimizerKind::Adam { lr, beta1, beta2, eps } => {
                if self.state.first.len() != grads.params().len() {
                    return Err(Error::InvalidArgument("optimizer state does not match the parameter registry".into()));
                }
                let t = self.state.step as i32;
                let correct1 = T::of(1.0 - beta1.powi(t));
                let correct2 = T::of(1.0 - beta2.powi(t));
                let (lr, b1, b2, eps) = (T::of(lr), T::of(beta1), T::of(beta2), T::of(eps));
                let one = T::one();
                let tensors = params.params_mut().into_iter().zip(grads.params());
                for ((p, g), (m, v)) in tensors.zip(self.state.first.iter_mut().zip(self.state.second.iter_mut())) {
                    for (((x, &d), mk), vk) in p.data.iter_mut().zip(g.data).zip(m.iter_mut()).zip(v.iter_mut()) {
                        *mk = b1 * *mk + (one - b1) * d;
                        *vk = b2 * *vk + (one - b2) * d * d;
                        let m_hat = *mk / correct1;
                        let v_hat = *vk / correct2;
                        *x -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Rescales `grads` so their global L2 norm is at most `threshold`; returns
/// the norm before clipping.
pub fn clip_global_norm<T: Scalar, P: Parameters<T>>(grads: &mut P, threshold: f64) -> f64 {
    let norm = grads.sq_norm().to_f64_lossy().sqrt();
    if norm > threshold && norm > 0.0 {
        grads.scale_all(T::of(threshold / norm));
    }
    norm
}
