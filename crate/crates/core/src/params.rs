//! Named-tensor registry shared by the optimizer, the gradient checker and
//! the model container.

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Vector};
use crate::scalar::Scalar;

#[derive(Debug)]
pub struct ParamView<'a, T> {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: &'a [T],
}

#[derive(Debug)]
pub struct ParamViewMut<'a, T> {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: &'a mut [T],
}

impl<'a, T> ParamView<'a, T> {
    pub fn prefixed(mut self, prefix: &str) -> Self {
        self.name = format!("{prefix}.{}", self.name);
        self
    }
}

impl<'a, T> ParamViewMut<'a, T> {
    pub fn prefixed(mut self, prefix: &str) -> Self {
        self.name = format!("{prefix}.{}", self.name);
        self
    }
}

pub fn matrix_view<'a, T: Scalar>(name: &str, m: &'a Matrix<T>) -> ParamView<'a, T> {
    ParamView {
        name: name.to_string(),
        dims: vec![m.rows(), m.cols()],
        data: m.as_slice(),
    }
}

pub fn matrix_view_mut<'a, T: Scalar>(name: &str, m: &'a mut Matrix<T>) -> ParamViewMut<'a, T> {
    ParamViewMut {
        name: name.to_string(),
        dims: vec![m.rows(), m.cols()],
        data: m.as_mut_slice(),
    }
}

pub fn vector_view<'a, T: Scalar>(name: &str, v: &'a Vector<T>) -> ParamView<'a, T> {
    ParamView {
        name: name.to_string(),
        dims: vec![v.len()],
        data: v.as_slice(),
    }
}

pub fn vector_view_mut<'a, T: Scalar>(name: &str, v: &'a mut Vector<T>) -> ParamViewMut<'a, T> {
    ParamViewMut {
        name: name.to_string(),
        dims: vec![v.len()],
        data: v.as_mut_slice(),
    }
}

/// A set of trainable tensors with stable names and ordering.
///
/// Gradients are stored in a value of the same type, so two registries of the
/// same model iterate in lockstep.
pub trait Parameters<T: Scalar> {
    fn params(&self) -> Vec<ParamView<'_, T>>;

    fn params_mut(&mut self) -> Vec<ParamViewMut<'_, T>>;

    fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.data.len()).sum()
    }

    fn param_names(&self) -> Vec<String> {
        self.params().into_iter().map(|p| p.name).collect()
    }

    fn flatten(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.num_params());
        for p in self.params() {
            out.extend_from_slice(p.data);
        }
        out
    }

    fn assign_flat(&mut self, values: &[T]) -> Result<()> {
        let expected = self.num_params();
        if values.len() != expected {
            return Err(Error::shape(
                "assign_flat",
                format!("{expected} parameters"),
                format!("{} values", values.len()),
            ));
        }
        let mut offset = 0;
        for p in self.params_mut() {
            let n = p.data.len();
            p.data.copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    fn fill_zero(&mut self) {
        for p in self.params_mut() {
            p.data.fill(T::zero());
        }
    }

    fn scale_all(&mut self, factor: T) {
        for p in self.params_mut() {
            for x in p.data.iter_mut() {
                *x *= factor;
            }
        }
    }

    fn sq_norm(&self) -> T {
        self.params().iter().flat_map(|p| p.data.iter()).map(|&x| x * x).sum()
    }

    fn all_finite(&self) -> bool {
        self.params().iter().all(|p| p.data.iter().all(|x| x.is_finite()))
    }
}

/// `dst += src`, tensor by tensor.
pub fn accumulate<T: Scalar, P: Parameters<T>>(dst: &mut P, src: &P) {
    for (d, s) in dst.params_mut().into_iter().zip(src.params()) {
        debug_assert_eq!(d.dims, s.dims);
        for (a, &b) in d.data.iter_mut().zip(s.data) {
            *a += b;
        }
    }
}
