use super::ProbVector;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Probabilities are floored here before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Index of the true class among `num_classes`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ClassTarget {
    index: usize,
    num_classes: usize,
}

impl ClassTarget {
    pub fn new(index: usize, num_classes: usize) -> Result<Self> {
        if index >= num_classes {
            return Err(Error::InvalidArgument(format!(
                "class index {index} out of range for {num_classes} classes"
            )));
        }
        Ok(Self { index, num_classes })
    }

    #[inline]
    pub fn index(self) -> usize {
        self.index
    }

    #[inline]
    pub fn num_classes(self) -> usize {
        self.num_classes
    }

    pub fn one_hot<T: Scalar>(self) -> super::Vector<T> {
        super::Vector::one_hot(self.num_classes, self.index)
    }
}

/// Categorical cross-entropy `-ln p[j]` of a single example.
pub fn cross_entropy<T: Scalar>(target: ClassTarget, p: &ProbVector<T>) -> Result<T> {
    if p.len() != target.num_classes {
        return Err(Error::shape(
            "cross_entropy",
            format!("{} classes", target.num_classes),
            format!("probability vector of length {}", p.len()),
        ));
    }
    Ok(-p[target.index].max(T::of(PROB_FLOOR)).ln())
}

/// Mean cross-entropy over a batch of `(target, prediction)` pairs.
pub fn mean_cross_entropy<'a, T: Scalar>(
    pairs: impl IntoIterator<Item = (ClassTarget, &'a ProbVector<T>)>,
) -> Result<T> {
    let mut total = T::zero();
    let mut n = 0usize;
    for (target, p) in pairs {
        total += cross_entropy(target, p)?;
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptySequence("mean_cross_entropy"));
    }
    Ok(total / T::of(n as f64))
}
