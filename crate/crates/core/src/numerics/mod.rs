//! Dense linear algebra, activations, losses, random numbers and the
//! finite-difference gradient oracle.

mod activation;
mod finite_diff;
mod loss;
mod rng;
mod tensor;

use std::ops::Deref;

pub use activation::{sigmoid, sigmoid_scalar, softmax, tanh_act};
pub use finite_diff::{finite_diff_grad, relative_error};
pub use loss::{cross_entropy, mean_cross_entropy, ClassTarget, PROB_FLOOR};
pub use rng::Rng;
pub use tensor::{affine, Matrix, Vector};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Tolerance on `|Σp - 1|` for a valid probability vector.
pub const PROB_SUM_TOLERANCE: f64 = 1e-9;

/// Probability distribution over classes; entries in `[0, 1]` summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector<T>(Vector<T>);

impl<T: Scalar> ProbVector<T> {
    pub fn new(v: Vector<T>) -> Result<Self> {
        let p = ProbVector(v);
        if !p.is_valid() {
            return Err(Error::InvalidArgument("not a probability vector".into()));
        }
        Ok(p)
    }

    pub fn uniform(len: usize) -> Self {
        ProbVector(Vector::filled(len, T::one() / T::of(len as f64)))
    }

    pub fn is_valid(&self) -> bool {
        let in_range = self.0.iter().all(|&x| x >= T::zero() && x <= T::one());
        let sum = self.0.sum().to_f64_lossy();
        // f32 rounding grows with length; f64 vectors meet the fixed tolerance.
        let tol = PROB_SUM_TOLERANCE.max(4.0 * self.0.len() as f64 * T::epsilon().to_f64_lossy());
        in_range && !self.0.is_empty() && (sum - 1.0).abs() <= tol
    }

    pub fn into_vector(self) -> Vector<T> {
        self.0
    }
}

impl<T> Deref for ProbVector<T> {
    type Target = Vector<T>;

    fn deref(&self) -> &Vector<T> {
        &self.0
    }
}

impl<T: Scalar> FromIterator<T> for ProbVector<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        ProbVector(iter.into_iter().collect())
    }
}
