use crate::error::{Error, Result};
use crate::numerics::{softmax, Matrix, ProbVector, Rng, Vector};
use crate::params::{matrix_view, matrix_view_mut, vector_view, vector_view_mut, ParamView, ParamViewMut, Parameters};
use crate::scalar::Scalar;

/// Fully-connected layer followed by softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseHead<T> {
    pub w: Matrix<T>,
    pub b: Vector<T>,
}

impl<T: Scalar> DenseHead<T> {
    pub fn zeros(classes: usize, input: usize) -> Self {
        Self {
            w: Matrix::zeros(classes, input),
            b: Vector::zeros(classes),
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn init(classes: usize, input: usize, rng: &mut Rng) -> Result<Self> {
        if classes == 0 || input == 0 {
            return Err(Error::InvalidArgument(format!(
                "dense head sizes must be positive ({classes} x {input})"
            )));
        }
        let limit = (6.0 / (classes + input) as f64).sqrt();
        let mut head = Self::zeros(classes, input);
        for x in head.w.as_mut_slice() {
            *x = T::of(rng.uniform(-limit, limit));
        }
        Ok(head)
    }

    pub fn classes(&self) -> usize {
        self.w.rows()
    }

    pub fn input(&self) -> usize {
        self.w.cols()
    }

    pub fn probs(&self, h: &Vector<T>) -> Result<ProbVector<T>> {
        let logits = crate::numerics::affine(&self.w, h, &self.b)?;
        Ok(softmax(&logits))
    }

    /// Adds this head's gradients for upstream logit gradient `dlogits` at
    /// input `h` into `grads`; returns the gradient on `h`.
    pub fn backward(&self, h: &Vector<T>, dlogits: &Vector<T>, grads: &mut Self) -> Vector<T> {
        grads.w.add_outer(dlogits.as_slice(), h.as_slice());
        grads.b.add_assign(dlogits);
        let mut dh = Vector::zeros(self.input());
        self.w.tr_mul_vec_acc(dlogits.as_slice(), dh.as_mut_slice());
        dh
    }
}

/// `p - onehot(target)`, the logit gradient of softmax cross-entropy.
pub(crate) fn softmax_ce_grad<T: Scalar>(p: &ProbVector<T>, target: usize) -> Vector<T> {
    let mut g: Vector<T> = p.iter().copied().collect();
    g[target] -= T::one();
    g
}

impl<T: Scalar> Parameters<T> for DenseHead<T> {
    fn params(&self) -> Vec<ParamView<'_, T>> {
        vec![matrix_view("w", &self.w), vector_view("b", &self.b)]
    }

    fn params_mut(&mut self) -> Vec<ParamViewMut<'_, T>> {
        vec![matrix_view_mut("w", &mut self.w), vector_view_mut("b", &mut self.b)]
    }
}
