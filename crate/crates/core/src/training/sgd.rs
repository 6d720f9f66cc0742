use crate::error::{Error, Result};
use crate::params::ParamSet;
use crate::scalar::Scalar;

/// Something plain SGD can update: pairs each parameter slice with its
/// gradient slice, in a fixed order.
pub trait SgdTarget<T: Scalar> {
    type Grad;

    fn param_grad_pairs<'a>(&'a mut self, grads: &'a Self::Grad) -> Vec<(&'a mut [T], &'a [T])>;
}

/// Pairs every tensor of `params` with the same-named tensor of `grads`.
pub fn dense_pairs<'a, T: Scalar, P: ParamSet<T>>(params: &'a mut P, grads: &'a P) -> Vec<(&'a mut [T], &'a [T])> {
    params
        .tensors_mut()
        .into_iter()
        .zip(grads.tensors())
        .map(|(p, g)| {
            debug_assert_eq!(p.name, g.name);
            (p.data, g.data)
        })
        .collect()
}

/// Global-norm clipping followed by `p ← p − lr·g`. Returns the gradient
/// norm before clipping. A `clip` of zero or less disables clipping.
pub fn sgd_update<T: Scalar>(pairs: &mut [(&mut [T], &[T])], lr: T, clip: T) -> Result<T> {
    if lr.is_nan() || lr <= T::zero() {
        return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
    }
    let norm_sq: T = pairs.iter().flat_map(|(_, g)| g.iter()).map(|&g| g * g).sum();
    let norm = norm_sq.sqrt();
    if !norm.is_finite() {
        return Err(Error::NonFinite(format!("gradient (norm {norm})")));
    }
    let scale = if clip > T::zero() && norm > clip { clip / norm } else { T::one() };
    let step = lr * scale;
    for (p, g) in pairs.iter_mut() {
        for (x, &d) in p.iter_mut().zip(g.iter()) {
            if d != T::zero() {
                *x -= step * d;
            }
        }
    }
    Ok(norm)
}

pub fn sgd_step<T: Scalar, P: SgdTarget<T>>(params: &mut P, grads: &P::Grad, lr: T, clip: T) -> Result<T> {
    let mut pairs = params.param_grad_pairs(grads);
    sgd_update(&mut pairs, lr, clip)
}
