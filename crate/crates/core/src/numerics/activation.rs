use super::{ProbVector, Vector};
use crate::scalar::Scalar;

/// Logistic sigmoid evaluated without overflowing for large `|x|`.
#[inline]
pub fn sigmoid_scalar<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn sigmoid<T: Scalar>(x: &Vector<T>) -> Vector<T> {
    x.map(sigmoid_scalar)
}

pub fn tanh_act<T: Scalar>(x: &Vector<T>) -> Vector<T> {
    x.map(|v| v.tanh())
}

/// Max-shifted softmax.
pub fn softmax<T: Scalar>(z: &Vector<T>) -> ProbVector<T> {
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = z.iter().map(|&v| (v - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    ProbVector(exps.into_iter().map(|e| e / total).collect())
}
