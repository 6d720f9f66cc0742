//! Linear-chain CRF over emission scores.
//!
//! Tags `0..K` are the real tags; `K` and `K + 1` are the start and stop
//! states, which only appear as the source (start) or target (stop) of a
//! transition.

mod constrain;
pub mod oracle;

use serde::{Deserialize, Serialize};

pub use constrain::constrain_transitions;
pub use oracle::{brute_force_decode, brute_force_partition};

use crate::error::{Error, Result};
use crate::params::{view, view_mut, ParamSet, TensorView, TensorViewMut};
use crate::scalar::{log_sum_exp, Scalar};
use crate::tensor::Matrix;

/// Training objective over a gold path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrfLoss {
    /// Negative log-likelihood: `log Z − score(gold)`.
    #[default]
    Nll,
    /// Structured hinge with Hamming cost:
    /// `max_y [score(y) + Δ(y, gold)] − score(gold)`.
    Hinge,
}

/// `(K+2) × (K+2)` transition scores; entry `(a, b)` scores `a → b`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix<T> {
    num_tags: usize,
    scores: Matrix<T>,
}

impl<T: Scalar> TransitionMatrix<T> {
    /// All free entries zero; transitions into start and out of stop are −∞.
    pub fn zeros(num_tags: usize) -> Self {
        let n = num_tags + 2;
        let mut scores = Matrix::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                if Self::fixed(num_tags, a, b) {
                    scores.set(a, b, T::neg_infinity());
                }
            }
        }
        TransitionMatrix { num_tags, scores }
    }

    /// Builds from a `K × K` block of tag-to-tag scores plus start and stop
    /// vectors.
    pub fn from_parts(tag_to_tag: &Matrix<T>, start: &[T], stop: &[T]) -> Result<Self> {
        let k = tag_to_tag.rows();
        if tag_to_tag.cols() != k {
            return Err(Error::shape("tag transitions", format!("{k}×{k}"), format!("{:?}", tag_to_tag.shape())));
        }
        if start.len() != k {
            return Err(Error::shape("start transitions", k, start.len()));
        }
        if stop.len() != k {
            return Err(Error::shape("stop transitions", k, stop.len()));
        }
        let mut t = Self::zeros(k);
        for a in 0..k {
            for b in 0..k {
                t.set(a, b, tag_to_tag.get(a, b));
            }
            t.set(t.start(), a, start[a]);
            t.set(a, t.stop(), stop[a]);
        }
        Ok(t)
    }

    /// Wraps a full `(K+2) × (K+2)` matrix, re-imposing the fixed entries.
    pub fn from_matrix(scores: Matrix<T>) -> Result<Self> {
        let (r, c) = scores.shape();
        if r != c || r < 2 {
            return Err(Error::shape("transition matrix", "(K+2)×(K+2)", format!("{r}×{c}")));
        }
        let mut t = TransitionMatrix { num_tags: r - 2, scores };
        t.reimpose_fixed();
        Ok(t)
    }

    fn fixed(num_tags: usize, a: usize, b: usize) -> bool {
        b == num_tags || a == num_tags + 1
    }

    pub fn is_fixed(&self, a: usize, b: usize) -> bool {
        Self::fixed(self.num_tags, a, b)
    }

    pub(crate) fn reimpose_fixed(&mut self) {
        let n = self.num_tags + 2;
        for a in 0..n {
            for b in 0..n {
                if self.is_fixed(a, b) {
                    self.scores.set(a, b, T::neg_infinity());
                }
            }
        }
    }

    pub fn num_tags(&self) -> usize {
        self.num_tags
    }

    pub fn start(&self) -> usize {
        self.num_tags
    }

    pub fn stop(&self) -> usize {
        self.num_tags + 1
    }

    #[inline]
    pub fn get(&self, from: usize, to: usize) -> T {
        self.scores.get(from, to)
    }

    /// Panics when writing a fixed entry.
    pub fn set(&mut self, from: usize, to: usize, v: T) {
        assert!(!self.is_fixed(from, to), "transition {from}→{to} is fixed");
        self.scores.set(from, to, v);
    }

    /// Sets an entry to −∞, including otherwise free ones.
    pub fn forbid(&mut self, from: usize, to: usize) {
        self.scores.set(from, to, T::neg_infinity());
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.scores
    }

    /// Every free entry is finite.
    pub fn is_finite(&self) -> bool {
        let n = self.num_tags + 2;
        (0..n).all(|a| (0..n).all(|b| self.is_fixed(a, b) || self.get(a, b).is_finite()))
    }
}

impl<T: Scalar> ParamSet<T> for TransitionMatrix<T> {
    fn tensors(&self) -> Vec<TensorView<'_, T>> {
        let n = self.num_tags + 2;
        vec![view("transitions", &[n, n], self.scores.as_slice())]
    }

    fn tensors_mut(&mut self) -> Vec<TensorViewMut<'_, T>> {
        let n = self.num_tags + 2;
        vec![view_mut("transitions", &[n, n], self.scores.as_mut_slice())]
    }
}

/// A tag sequence with its score under some (emissions, transitions).
#[derive(Debug, Clone, PartialEq)]
pub struct TagPath<T> {
    pub tags: Vec<usize>,
    pub score: T,
}

fn check<T: Scalar>(emissions: &Matrix<T>, trans: &TransitionMatrix<T>) -> Result<()> {
    if emissions.rows() == 0 {
        return Err(Error::Empty("emission matrix has no timesteps"));
    }
    if emissions.cols() != trans.num_tags() {
        return Err(Error::shape("emission columns", trans.num_tags(), emissions.cols()));
    }
    Ok(())
}

/// Unnormalized log-score of `path`.
pub fn path_score<T: Scalar>(emissions: &Matrix<T>, trans: &TransitionMatrix<T>, path: &[usize]) -> Result<T> {
    check(emissions, trans)?;
    if path.len() != emissions.rows() {
        return Err(Error::shape("tag path", emissions.rows(), path.len()));
    }
    if let Some(&bad) = path.iter().find(|&&y| y >= trans.num_tags()) {
        return Err(Error::shape("tag id", format!("< {}", trans.num_tags()), bad));
    }
    let mut score = trans.get(trans.start(), path[0]);
    for (t, &y) in path.iter().enumerate() {
        score += emissions.get(t, y);
        if t > 0 {
            score += trans.get(path[t - 1], y);
        }
    }
    Ok(score + trans.get(path[path.len() - 1], trans.stop()))
}

/// `alpha[t][k]`: log-sum of scores of all prefixes ending in tag `k` at `t`.
fn forward_scores<T: Scalar>(emissions: &Matrix<T>, trans: &TransitionMatrix<T>) -> Matrix<T> {
    let (n, k) = emissions.shape();
    let mut alpha = Matrix::zeros(n, k);
    for y in 0..k {
        alpha.set(0, y, trans.get(trans.start(), y) + emissions.get(0, y));
    }
    let mut buf = vec![T::zero(); k];
    for t in 1..n {
        for y in 0..k {
            for (j, b) in buf.iter_mut().enumerate() {
                *b = alpha.get(t - 1, j) + trans.get(j, y);
            }
            alpha.set(t, y, log_sum_exp(&buf) + emissions.get(t, y));
        }
    }
    alpha
}

/// `beta[t][k]`: log-sum of scores of all suffixes after tag `k` at `t`,
/// including the stop transition.
fn backward_scores<T: Scalar>(emissions: &Matrix<T>, trans: &TransitionMatrix<T>) -> Matrix<T> {
    let (n, k) = emissions.shape();
    let mut beta = Matrix::zeros(n, k);
    for y in 0..k {
        beta.set(n - 1, y, trans.get(y, trans.stop()));
    }
    let mut buf = vec![T::zero(); k];
    for t in (0..n - 1).rev() {
        for y in 0..k {
            for (j, b) in buf.iter_mut().enumerate() {
                *b = trans.get(y, j) + emissions.get(t + 1, j) + beta.get(t + 1, j);
            }
            beta.set(t, y, log_sum_exp(&buf));
        }
    }
    beta
}

fn final_log_z<T: Scalar>(alpha: &Matrix<T>, trans: &TransitionMatrix<T>) -> T {
    let last = alpha.rows() - 1;
    let terms: Vec<T> = (0..alpha.cols()).map(|y| alpha.get(last, y) + trans.get(y, trans.stop())).collect();
    log_sum_exp(&terms)
}

/// Log partition function by the forward algorithm.
pub fn log_partition<T: Scalar>(emissions: &Matrix<T>, trans: &TransitionMatrix<T>) -> Result<T> {
    check(emissions, trans)?;
    Ok(final_log_z(&forward_scores(emissions, trans), trans))
}

/// Negative log-likelihood of `gold`.
pub fn nll_loss<T: Scalar>(emissions: &Matrix<T>, trans: &TransitionMatrix<T>, gold: &[usize]) -> Result<T> {
    let gold_score = path_score(emissions, trans, gold)?;
    Ok(log_partition(emissions, trans)? - gold_score)
}

/// Loss value with its gradients w.r.t. emissions and the full transition
/// matrix (fixed entries get zero gradient).
#[derive(Debug, Clone)]
pub struct LossGrad<T> {
    pub loss: T,
    pub d_emissions: Matrix<T>,
    pub d_transitions: Matrix<T>,
}

/// NLL and its gradient via forward-backward marginals.
pub fn nll_loss_grad<T: Scalar>(
    emissions: &Matrix<T>,
    trans: &TransitionMatrix<T>,
    gold: &[usize],
) -> Result<LossGrad<T>> {
    let gold_score = path_score(emissions, trans, gold)?;
    let (n, k) = emissions.shape();
    let alpha = forward_scores(emissions, trans);
    let beta = backward_scores(emissions, trans);
    let log_z = final_log_z(&alpha, trans);

    let mut d_em = Matrix::zeros(n, k);
    let mut d_tr = Matrix::zeros(k + 2, k + 2);
    for t in 0..n {
        for y in 0..k {
            let p = (alpha.get(t, y) + beta.get(t, y) - log_z).exp();
            d_em.set(t, y, p);
        }
    }
    for y in 0..k {
        d_tr.add_at(trans.start(), y, d_em.get(0, y));
        d_tr.add_at(y, trans.stop(), d_em.get(n - 1, y));
    }
    for t in 0..n.saturating_sub(1) {
        for a in 0..k {
            let base = alpha.get(t, a) - log_z;
            for b in 0..k {
                let lp = base + trans.get(a, b) + emissions.get(t + 1, b) + beta.get(t + 1, b);
                d_tr.add_at(a, b, lp.exp());
            }
        }
    }
    subtract_path(&mut d_em, &mut d_tr, trans, gold);
    Ok(LossGrad { loss: log_z - gold_score, d_emissions: d_em, d_transitions: d_tr })
}

/// Structured hinge loss with Hamming cost and its subgradient.
pub fn hinge_loss_grad<T: Scalar>(
    emissions: &Matrix<T>,
    trans: &TransitionMatrix<T>,
    gold: &[usize],
) -> Result<LossGrad<T>> {
    let gold_score = path_score(emissions, trans, gold)?;
    let (n, k) = emissions.shape();
    let augmented = Matrix::from_fn(n, k, |t, y| emissions.get(t, y) + if y == gold[t] { T::zero() } else { T::one() });
    let best = viterbi_decode(&augmented, trans)?;
    let mut d_em = Matrix::zeros(n, k);
    let mut d_tr = Matrix::zeros(k + 2, k + 2);
    add_path(&mut d_em, &mut d_tr, trans, &best.tags, T::one());
    subtract_path(&mut d_em, &mut d_tr, trans, gold);
    Ok(LossGrad { loss: (best.score - gold_score).max(T::zero()), d_emissions: d_em, d_transitions: d_tr })
}

pub fn loss_grad<T: Scalar>(
    kind: CrfLoss,
    emissions: &Matrix<T>,
    trans: &TransitionMatrix<T>,
    gold: &[usize],
) -> Result<LossGrad<T>> {
    match kind {
        CrfLoss::Nll => nll_loss_grad(emissions, trans, gold),
        CrfLoss::Hinge => hinge_loss_grad(emissions, trans, gold),
    }
}

fn add_path<T: Scalar>(d_em: &mut Matrix<T>, d_tr: &mut Matrix<T>, trans: &TransitionMatrix<T>, path: &[usize], w: T) {
    d_tr.add_at(trans.start(), path[0], w);
    for (t, &y) in path.iter().enumerate() {
        d_em.add_at(t, y, w);
        if t > 0 {
            d_tr.add_at(path[t - 1], y, w);
        }
    }
    d_tr.add_at(path[path.len() - 1], trans.stop(), w);
}

fn subtract_path<T: Scalar>(d_em: &mut Matrix<T>, d_tr: &mut Matrix<T>, trans: &TransitionMatrix<T>, path: &[usize]) {
    add_path(d_em, d_tr, trans, path, -T::one());
}

/// Highest-scoring path. Ties go to the lowest tag index.
#[allow(clippy::needless_range_loop)]
pub fn viterbi_decode<T: Scalar>(emissions: &Matrix<T>, trans: &TransitionMatrix<T>) -> Result<TagPath<T>> {
    check(emissions, trans)?;
    let (n, k) = emissions.shape();
    let mut delta = Matrix::zeros(n, k);
    let mut back = vec![vec![0usize; k]; n];
    for y in 0..k {
        delta.set(0, y, trans.get(trans.start(), y) + emissions.get(0, y));
    }
    for t in 1..n {
        for y in 0..k {
            let mut best = T::neg_infinity();
            let mut arg = 0;
            for j in 0..k {
                let s = delta.get(t - 1, j) + trans.get(j, y);
                if s > best {
                    best = s;
                    arg = j;
                }
            }
            delta.set(t, y, best + emissions.get(t, y));
            back[t][y] = arg;
        }
    }
    let mut best = T::neg_infinity();
    let mut last = 0;
    for y in 0..k {
        let s = delta.get(n - 1, y) + trans.get(y, trans.stop());
        if s > best {
            best = s;
            last = y;
        }
    }
    let mut tags = vec![0; n];
    tags[n - 1] = last;
    for t in (1..n).rev() {
        tags[t - 1] = back[t][tags[t]];
    }
    let score = path_score(emissions, trans, &tags)?;
    Ok(TagPath { tags, score })
}
