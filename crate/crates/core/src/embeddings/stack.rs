use std::collections::BTreeMap;

use super::charlm::CharLm;
use super::table::{lookup, EmbeddingTable};
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::params::{prefixed, prefixed_mut, view, view_mut, ParamSet, TensorView, TensorViewMut};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct WordEmbedding<T> {
    pub vocab: Vocabulary,
    pub table: EmbeddingTable<T>,
}

impl<T: Scalar> WordEmbedding<T> {
    pub fn new(vocab: Vocabulary, table: EmbeddingTable<T>) -> Result<Self> {
        if table.rows() != vocab.len() {
            return Err(Error::shape("embedding table rows", vocab.len(), table.rows()));
        }
        Ok(WordEmbedding { vocab, table })
    }
}

// Few parts exist per model, so the size gap between variants is harmless.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq)]
pub enum EmbedderPart<T> {
    Word(WordEmbedding<T>),
    Contextual(CharLm<T>),
}

impl<T: Scalar> EmbedderPart<T> {
    pub fn dim(&self) -> usize {
        match self {
            EmbedderPart::Word(w) => w.table.dim(),
            EmbedderPart::Contextual(lm) => lm.output_dim(),
        }
    }

    pub fn embed<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<Vec<T>>> {
        match self {
            EmbedderPart::Word(w) => {
                Ok(tokens.iter().map(|t| lookup(&w.table, &w.vocab, t.as_ref()).to_vec()).collect())
            }
            EmbedderPart::Contextual(lm) => lm.contextual_embed(tokens),
        }
    }

    fn trainable(&self) -> bool {
        matches!(self, EmbedderPart::Word(w) if w.table.trainable)
    }
}

/// Per-token concatenation of several embedders' outputs, in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedEmbedder<T> {
    parts: Vec<EmbedderPart<T>>,
    dims: Vec<usize>,
}

/// Gradient rows for the trainable word tables, keyed by row id.
pub type SparseRows<T> = BTreeMap<usize, Vec<T>>;

impl<T: Scalar> StackedEmbedder<T> {
    pub fn new(parts: Vec<EmbedderPart<T>>) -> Self {
        let dims = parts.iter().map(EmbedderPart::dim).collect();
        StackedEmbedder { parts, dims }
    }

    pub fn parts(&self) -> &[EmbedderPart<T>] {
        &self.parts
    }

    pub fn parts_mut(&mut self) -> &mut [EmbedderPart<T>] {
        &mut self.parts
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    pub fn stack<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<Vec<T>>> {
        let mut out: Vec<Vec<T>> = vec![Vec::with_capacity(self.total_dim()); tokens.len()];
        for (part, &dim) in self.parts.iter().zip(&self.dims) {
            let vecs = part.embed(tokens)?;
            if vecs.len() != tokens.len() {
                return Err(Error::shape("embedder output count", tokens.len(), vecs.len()));
            }
            for (acc, v) in out.iter_mut().zip(vecs) {
                if v.len() != dim {
                    return Err(Error::shape("embedder part width", dim, v.len()));
                }
                acc.extend(v);
            }
        }
        Ok(out)
    }

    pub fn zero_grads(&self) -> Vec<SparseRows<T>> {
        vec![SparseRows::new(); self.parts.len()]
    }

    /// Routes the gradient w.r.t. each stacked vector to the rows of the
    /// trainable word tables that produced it.
    pub fn backward<S: AsRef<str>>(&self, tokens: &[S], d_inputs: &[Vec<T>], grads: &mut [SparseRows<T>]) {
        let mut offset = 0;
        for ((part, &dim), rows) in self.parts.iter().zip(&self.dims).zip(grads.iter_mut()) {
            if let (EmbedderPart::Word(w), true) = (part, part.trainable()) {
                for (tok, d) in tokens.iter().zip(d_inputs) {
                    let id = w.vocab.id(tok.as_ref());
                    let row = rows.entry(id).or_insert_with(|| vec![T::zero(); dim]);
                    for (a, &b) in row.iter_mut().zip(&d[offset..offset + dim]) {
                        *a += b;
                    }
                }
            }
            offset += dim;
        }
    }
}

/// Free-function form of [`StackedEmbedder::stack`].
pub fn stack<T: Scalar, S: AsRef<str>>(embedder: &StackedEmbedder<T>, tokens: &[S]) -> Result<Vec<Vec<T>>> {
    embedder.stack(tokens)
}

impl<T: Scalar> ParamSet<T> for StackedEmbedder<T> {
    fn tensors(&self) -> Vec<TensorView<'_, T>> {
        let mut out = Vec::new();
        for (i, part) in self.parts.iter().enumerate() {
            match part {
                EmbedderPart::Word(w) => {
                    let shape = [w.table.rows(), w.table.dim()];
                    out.push(view(&format!("{i}.word"), &shape, w.table.matrix.as_slice()));
                }
                EmbedderPart::Contextual(lm) => out.extend(prefixed(&format!("{i}.char_lm"), lm.tensors())),
            }
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<TensorViewMut<'_, T>> {
        let mut out = Vec::new();
        for (i, part) in self.parts.iter_mut().enumerate() {
            match part {
                EmbedderPart::Word(w) => {
                    let shape = [w.table.rows(), w.table.dim()];
                    out.push(view_mut(&format!("{i}.word"), &shape, w.table.matrix.as_mut_slice()));
                }
                EmbedderPart::Contextual(lm) => out.extend(prefixed_mut(&format!("{i}.char_lm"), lm.tensors_mut())),
            }
        }
        out
    }
}
