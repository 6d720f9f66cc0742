//! Character-level bidirectional language model and the contextual string
//! embeddings read off its hidden states.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::encoder::{Direction, LstmCell};
use crate::error::{Error, Result};
use crate::params::{prefixed, prefixed_mut, view, view_mut, ParamSet, TensorView, TensorViewMut};
use crate::scalar::{log_sum_exp, Scalar};
use crate::tensor::Matrix;
use crate::training::sgd::{dense_pairs, sgd_step, SgdTarget};

#[derive(Debug, Clone, PartialEq)]
pub struct CharLm<T> {
    pub chars: Vocabulary,
    /// `|chars| × char_dim`
    pub char_emb: Matrix<T>,
    pub forward_cell: LstmCell<T>,
    pub backward_cell: LstmCell<T>,
    /// Next-character softmax for the forward model, `|chars| × hidden`.
    pub fwd_out: Matrix<T>,
    pub fwd_out_bias: Vec<T>,
    /// Previous-character softmax for the backward model.
    pub bwd_out: Matrix<T>,
    pub bwd_out_bias: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmTrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub clip: f64,
    /// Training windows are at most this many characters.
    pub seq_len: usize,
}

impl Default for LmTrainConfig {
    fn default() -> Self {
        LmTrainConfig { epochs: 5, learning_rate: 0.5, clip: 5.0, seq_len: 100 }
    }
}

/// Character vocabulary over `corpus` (line breaks excluded, the space
/// separator always included).
pub fn char_vocab(corpus: &str) -> Vocabulary {
    let chars: Vec<String> = corpus.chars().filter(|&c| c != '\n' && c != '\r').map(|c| c.to_string()).collect();
    Vocabulary::build(chars.iter().map(String::as_str).chain(std::iter::once(" ")), 1, false)
}

impl<T: Scalar> CharLm<T> {
    pub fn zeros(chars: Vocabulary, char_dim: usize, hidden_dim: usize) -> Self {
        let c = chars.len();
        CharLm {
            chars,
            char_emb: Matrix::zeros(c, char_dim),
            forward_cell: LstmCell::zeros(char_dim, hidden_dim),
            backward_cell: LstmCell::zeros(char_dim, hidden_dim),
            fwd_out: Matrix::zeros(c, hidden_dim),
            fwd_out_bias: vec![T::zero(); c],
            bwd_out: Matrix::zeros(c, hidden_dim),
            bwd_out_bias: vec![T::zero(); c],
        }
    }

    pub fn random<R: Rng + ?Sized>(chars: Vocabulary, char_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let c = chars.len();
        let char_emb = Matrix::from_fn(c, char_dim, |_, _| T::of(rng.random_range(-0.1..=0.1)));
        let forward_cell = LstmCell::random(char_dim, hidden_dim, 1.0, rng);
        let backward_cell = LstmCell::random(char_dim, hidden_dim, 1.0, rng);
        let bound = (1.0 / hidden_dim.max(1) as f64).sqrt();
        let fwd_out = Matrix::from_fn(c, hidden_dim, |_, _| T::of(rng.random_range(-bound..=bound)));
        let bwd_out = Matrix::from_fn(c, hidden_dim, |_, _| T::of(rng.random_range(-bound..=bound)));
        CharLm {
            chars,
            char_emb,
            forward_cell,
            backward_cell,
            fwd_out,
            fwd_out_bias: vec![T::zero(); c],
            bwd_out,
            bwd_out_bias: vec![T::zero(); c],
        }
    }

    pub fn char_dim(&self) -> usize {
        self.char_emb.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.forward_cell.hidden_dim()
    }

    /// Width of a contextual embedding: both directions' hidden states.
    pub fn output_dim(&self) -> usize {
        2 * self.hidden_dim()
    }

    pub fn char_ids(&self, text: &str) -> Vec<usize> {
        let mut buf = [0u8; 4];
        text.chars().map(|c| self.chars.id(c.encode_utf8(&mut buf))).collect()
    }

    fn inputs(&self, ids: &[usize]) -> Vec<Vec<T>> {
        ids.iter().map(|&id| self.char_emb.row(id).to_vec()).collect()
    }

    fn cell(&self, direction: Direction) -> &LstmCell<T> {
        match direction {
            Direction::Forward => &self.forward_cell,
            Direction::Backward => &self.backward_cell,
        }
    }

    /// Hidden state of the directional model at every character position.
    pub fn char_lm_forward(&self, text: &str, direction: Direction) -> Result<Vec<Vec<T>>> {
        if text.is_empty() {
            return Err(Error::Empty("character sequence"));
        }
        let inputs = self.inputs(&self.char_ids(text));
        let states = self.cell(direction).forward(&inputs, direction)?;
        Ok(states.into_iter().map(|s| s.h).collect())
    }

    /// For each token: forward state at its last character followed by the
    /// backward state at its first character, over the tokens joined by
    /// single spaces.
    pub fn contextual_embed<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<Vec<T>>> {
        if tokens.is_empty() {
            return Err(Error::Empty("sentence"));
        }
        let mut stream = String::new();
        let mut bounds = Vec::with_capacity(tokens.len());
        let mut pos = 0;
        for (i, tok) in tokens.iter().enumerate() {
            if i > 0 {
                stream.push(' ');
                pos += 1;
            }
            let n = tok.as_ref().chars().count();
            if n == 0 {
                return Err(Error::Empty("token text"));
            }
            stream.push_str(tok.as_ref());
            bounds.push((pos, pos + n - 1));
            pos += n;
        }
        let fwd = self.char_lm_forward(&stream, Direction::Forward)?;
        let bwd = self.char_lm_forward(&stream, Direction::Backward)?;
        Ok(bounds.into_iter().map(|(first, last)| [fwd[last].as_slice(), bwd[first].as_slice()].concat()).collect())
    }

    /// Mean next-character (forward) and previous-character (backward)
    /// cross-entropy over one window, with gradients accumulated in `grads`.
    /// Returns `(summed loss, number of predictions)`.
    fn window_loss(&self, ids: &[usize], grads: Option<&mut CharLm<T>>) -> Result<(T, usize)> {
        let n = ids.len();
        if n < 2 {
            return Ok((T::zero(), 0));
        }
        let inputs = self.inputs(ids);
        let count = 2 * (n - 1);
        let norm = T::one() / T::of(count as f64);
        let mut total = T::zero();
        let mut grads = grads;
        for direction in [Direction::Forward, Direction::Backward] {
            let cell = self.cell(direction);
            let (states, trace) = cell.forward_traced(&inputs, direction)?;
            let (out, bias) = match direction {
                Direction::Forward => (&self.fwd_out, &self.fwd_out_bias),
                Direction::Backward => (&self.bwd_out, &self.bwd_out_bias),
            };
            let mut d_h = vec![vec![T::zero(); self.hidden_dim()]; n];
            let mut d_out = Matrix::zeros(out.rows(), out.cols());
            let mut d_bias = vec![T::zero(); bias.len()];
            for t in 0..n {
                let target = match direction {
                    Direction::Forward if t + 1 < n => ids[t + 1],
                    Direction::Backward if t > 0 => ids[t - 1],
                    _ => continue,
                };
                let h = &states[t].h;
                let mut logits = bias.clone();
                out.matvec_acc(h, &mut logits);
                let lse = log_sum_exp(&logits);
                total += lse - logits[target];
                if grads.is_some() {
                    let mut dl: Vec<T> = logits.iter().map(|&l| (l - lse).exp() * norm).collect();
                    dl[target] -= norm;
                    d_out.add_outer(&dl, h);
                    for (b, &d) in d_bias.iter_mut().zip(&dl) {
                        *b += d;
                    }
                    out.matvec_t_acc(&dl, &mut d_h[t]);
                }
            }
            if let Some(g) = grads.as_deref_mut() {
                let (g_cell, g_out, g_bias) = match direction {
                    Direction::Forward => (&mut g.forward_cell, &mut g.fwd_out, &mut g.fwd_out_bias),
                    Direction::Backward => (&mut g.backward_cell, &mut g.bwd_out, &mut g.bwd_out_bias),
                };
                for (a, &b) in g_out.as_mut_slice().iter_mut().zip(d_out.as_slice()) {
                    *a += b;
                }
                for (a, &b) in g_bias.iter_mut().zip(&d_bias) {
                    *a += b;
                }
                let d_x = cell.backward(&trace, &d_h, g_cell);
                for (&id, dx) in ids.iter().zip(&d_x) {
                    for (a, &b) in g.char_emb.row_mut(id).iter_mut().zip(dx) {
                        *a += b;
                    }
                }
            }
        }
        Ok((total, count))
    }

    fn windows(&self, corpus: &str, seq_len: usize) -> Vec<Vec<usize>> {
        let seq_len = seq_len.max(2);
        corpus
            .lines()
            .filter(|l| !l.trim().is_empty())
            .flat_map(|line| {
                let ids = self.char_ids(line);
                ids.chunks(seq_len).map(<[usize]>::to_vec).collect::<Vec<_>>()
            })
            .filter(|w| w.len() >= 2)
            .collect()
    }

    /// Average per-character cross-entropy (nats) of both directions.
    pub fn average_log_loss(&self, corpus: &str, seq_len: usize) -> Result<f64> {
        let mut total = 0.0;
        let mut count = 0;
        for w in self.windows(corpus, seq_len) {
            let (l, c) = self.window_loss(&w, None)?;
            total += l.as_f64();
            count += c;
        }
        if count == 0 {
            return Err(Error::Empty("language-model corpus"));
        }
        Ok(total / count as f64)
    }

    /// Trains on `corpus` one window at a time with clipped SGD. Returns the
    /// mean training loss of each epoch.
    pub fn pretrain<R: Rng + ?Sized>(&mut self, corpus: &str, config: &LmTrainConfig, rng: &mut R) -> Result<Vec<f64>> {
        let mut windows = self.windows(corpus, config.seq_len);
        if windows.is_empty() {
            return Err(Error::Empty("language-model corpus"));
        }
        let mut history = Vec::with_capacity(config.epochs);
        for epoch in 0..config.epochs {
            windows.shuffle(rng);
            let mut total = 0.0;
            let mut count = 0;
            for (batch, w) in windows.iter().enumerate() {
                let mut grads = self.zeros_like();
                let (l, c) = self.window_loss(w, Some(&mut grads))?;
                if !l.is_finite() {
                    return Err(Error::Divergence { epoch, batch, detail: "language-model loss".into() });
                }
                total += l.as_f64();
                count += c;
                sgd_step(self, &grads, T::of(config.learning_rate), T::of(config.clip)).map_err(|e| match e {
                    Error::NonFinite(detail) => Error::Divergence { epoch, batch, detail },
                    other => other,
                })?;
            }
            let mean = total / count as f64;
            log::debug!("char LM epoch {epoch}: loss {mean:.4}");
            history.push(mean);
        }
        Ok(history)
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.chars.clone(), self.char_dim(), self.hidden_dim())
    }
}

impl<T: Scalar> ParamSet<T> for CharLm<T> {
    fn tensors(&self) -> Vec<TensorView<'_, T>> {
        let (c, h) = (self.chars.len(), self.hidden_dim());
        std::iter::once(view("char_emb", &[c, self.char_dim()], self.char_emb.as_slice()))
            .chain(prefixed("fwd", self.forward_cell.tensors()))
            .chain(prefixed("bwd", self.backward_cell.tensors()))
            .chain([
                view("fwd_out", &[c, h], self.fwd_out.as_slice()),
                view("fwd_out_bias", &[c], &self.fwd_out_bias),
                view("bwd_out", &[c, h], self.bwd_out.as_slice()),
                view("bwd_out_bias", &[c], &self.bwd_out_bias),
            ])
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<TensorViewMut<'_, T>> {
        let (c, h, d) = (self.chars.len(), self.hidden_dim(), self.char_dim());
        std::iter::once(view_mut("char_emb", &[c, d], self.char_emb.as_mut_slice()))
            .chain(prefixed_mut("fwd", self.forward_cell.tensors_mut()))
            .chain(prefixed_mut("bwd", self.backward_cell.tensors_mut()))
            .chain([
                view_mut("fwd_out", &[c, h], self.fwd_out.as_mut_slice()),
                view_mut("fwd_out_bias", &[c], &mut self.fwd_out_bias),
                view_mut("bwd_out", &[c, h], self.bwd_out.as_mut_slice()),
                view_mut("bwd_out_bias", &[c], &mut self.bwd_out_bias),
            ])
            .collect()
    }
}

impl<T: Scalar> SgdTarget<T> for CharLm<T> {
    type Grad = CharLm<T>;

    fn param_grad_pairs<'a>(&'a mut self, grads: &'a CharLm<T>) -> Vec<(&'a mut [T], &'a [T])> {
        dense_pairs(self, grads)
    }
}

/// Free-function form of [`CharLm::char_lm_forward`].
pub fn char_lm_forward<T: Scalar>(lm: &CharLm<T>, text: &str, direction: Direction) -> Result<Vec<Vec<T>>> {
    lm.char_lm_forward(text, direction)
}

/// Free-function form of [`CharLm::contextual_embed`].
pub fn contextual_embed<T: Scalar, S: AsRef<str>>(lm: &CharLm<T>, tokens: &[S]) -> Result<Vec<Vec<T>>> {
    lm.contextual_embed(tokens)
}
