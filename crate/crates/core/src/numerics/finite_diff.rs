use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Central-difference gradient of `f` at `params`.
///
/// Each coordinate is perturbed by `±eps` in turn; `f` sees the perturbed
/// vector and must be deterministic.
pub fn finite_diff_grad<T, F>(mut f: F, params: &[T], eps: T) -> Result<Vec<T>>
where
    T: Scalar,
    F: FnMut(&[T]) -> T,
{
    if eps.is_nan() || eps <= T::zero() {
        return Err(Error::InvalidArgument(format!("finite difference step must be positive, got {eps}")));
    }
    let mut theta = params.to_vec();
    let mut grad = Vec::with_capacity(params.len());
    let two_eps = eps + eps;
    for k in 0..theta.len() {
        let original = theta[k];
        theta[k] = original + eps;
        let plus = f(&theta);
        theta[k] = original - eps;
        let minus = f(&theta);
        theta[k] = original;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!("objective evaluated to {plus} / {minus} at coordinate {k}")));
        }
        grad.push((plus - minus) / two_eps);
    }
    Ok(grad)
}

/// Relative error with an absolute floor: `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error<T: Scalar>(a: T, b: T, floor: T) -> T {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
