//! Named views over parameter tensors, shared by the optimizer and the
//! checkpoint format.

use crate::scalar::Scalar;

pub struct TensorView<'a, T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [T],
}

pub struct TensorViewMut<'a, T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a mut [T],
}

/// A fixed, ordered collection of named tensors.
///
/// Implementors must return the same names and shapes, in the same order,
/// from both methods. Gradient containers reuse the parameter types, so a
/// model and its gradient line up tensor by tensor.
pub trait ParamSet<T: Scalar> {
    fn tensors(&self) -> Vec<TensorView<'_, T>>;
    fn tensors_mut(&mut self) -> Vec<TensorViewMut<'_, T>>;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }
}

pub(crate) fn prefixed<'a, T>(
    prefix: &str,
    views: Vec<TensorView<'a, T>>,
) -> impl Iterator<Item = TensorView<'a, T>> + 'a {
    let prefix = prefix.to_string();
    views.into_iter().map(move |mut v| {
        v.name = format!("{prefix}.{}", v.name);
        v
    })
}

pub(crate) fn prefixed_mut<'a, T>(
    prefix: &str,
    views: Vec<TensorViewMut<'a, T>>,
) -> impl Iterator<Item = TensorViewMut<'a, T>> + 'a {
    let prefix = prefix.to_string();
    views.into_iter().map(move |mut v| {
        v.name = format!("{prefix}.{}", v.name);
        v
    })
}

pub(crate) fn view<'a, T>(name: &str, shape: &[usize], data: &'a [T]) -> TensorView<'a, T> {
    TensorView { name: name.to_string(), shape: shape.to_vec(), data }
}

pub(crate) fn view_mut<'a, T>(name: &str, shape: &[usize], data: &'a mut [T]) -> TensorViewMut<'a, T> {
    TensorViewMut { name: name.to_string(), shape: shape.to_vec(), data }
}
