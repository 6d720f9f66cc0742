use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `true` marks a token whose whole vector is dropped.
pub fn dropout_mask<R: Rng + ?Sized>(len: usize, p: f64, rng: &mut R) -> Result<Vec<bool>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Config(format!("dropout probability {p} outside [0, 1]")));
    }
    Ok((0..len).map(|_| rng.random::<f64>() < p).collect())
}

/// Replaces each token vector by zeros with probability `p` in training
/// mode; identity otherwise.
pub fn word_dropout<T: Scalar, R: Rng + ?Sized>(
    mut vectors: Vec<Vec<T>>,
    p: f64,
    rng: &mut R,
    training: bool,
) -> Result<Vec<Vec<T>>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Config(format!("dropout probability {p} outside [0, 1]")));
    }
    if training {
        let mask = dropout_mask(vectors.len(), p, rng)?;
        apply_mask(&mut vectors, &mask);
    }
    Ok(vectors)
}

pub fn apply_mask<T: Scalar>(vectors: &mut [Vec<T>], mask: &[bool]) {
    for (v, &drop) in vectors.iter_mut().zip(mask) {
        if drop {
            v.iter_mut().for_each(|x| *x = T::zero());
        }
    }
}
