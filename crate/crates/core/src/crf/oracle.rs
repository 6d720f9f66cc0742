//! Exhaustive path enumeration, used to check the dynamic programs.

use super::{path_score, TagPath, TransitionMatrix};
use crate::error::{Error, Result};
use crate::scalar::{log_sum_exp, Scalar};
use crate::tensor::Matrix;

pub const MAX_PATHS: u128 = 1_000_000;

fn all_paths(num_steps: usize, num_tags: usize) -> Result<impl Iterator<Item = Vec<usize>>> {
    let count = (num_tags as u128).checked_pow(num_steps as u32).unwrap_or(u128::MAX);
    if count > MAX_PATHS {
        return Err(Error::TooLarge { paths: count, limit: MAX_PATHS });
    }
    Ok((0..count).map(move |mut code| {
        // most significant digit first, so enumeration is lexicographic
        let mut path = vec![0; num_steps];
        for slot in path.iter_mut().rev() {
            *slot = (code % num_tags as u128) as usize;
            code /= num_tags as u128;
        }
        path
    }))
}

pub fn brute_force_partition<T: Scalar>(emissions: &Matrix<T>, trans: &TransitionMatrix<T>) -> Result<T> {
    let scores = all_paths(emissions.rows(), emissions.cols())?
        .map(|p| path_score(emissions, trans, &p))
        .collect::<Result<Vec<T>>>()?;
    if scores.is_empty() {
        return Err(Error::Empty("emission matrix has no timesteps"));
    }
    Ok(log_sum_exp(&scores))
}

/// Best path by enumeration; the lexicographically smallest wins ties.
pub fn brute_force_decode<T: Scalar>(emissions: &Matrix<T>, trans: &TransitionMatrix<T>) -> Result<TagPath<T>> {
    let mut best: Option<TagPath<T>> = None;
    for p in all_paths(emissions.rows(), emissions.cols())? {
        let score = path_score(emissions, trans, &p)?;
        if best.as_ref().is_none_or(|b| score > b.score) {
            best = Some(TagPath { tags: p, score });
        }
    }
    best.ok_or(Error::Empty("emission matrix has no timesteps"))
}
