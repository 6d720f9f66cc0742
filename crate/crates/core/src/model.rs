//! The complete tagger: stacked embeddings → Bi-LSTM → emissions → CRF.

use rand::Rng;

use crate::corpus::{bio_to_spans, BioMode, EntitySpan, TagSet};
use crate::crf::{self, constrain_transitions, CrfLoss, TagPath, TransitionMatrix};
use crate::embeddings::{apply_mask, EmbedderPart, SparseRows, StackedEmbedder};
use crate::encoder::BiLstmEncoder;
use crate::error::{Error, Result};
use crate::params::{prefixed, prefixed_mut, ParamSet, TensorView, TensorViewMut};
use crate::scalar::Scalar;
use crate::tensor::Matrix;
use crate::training::sgd::{dense_pairs, SgdTarget};

#[derive(Debug, Clone, PartialEq)]
pub struct Tagger<T> {
    pub tagset: TagSet,
    pub embedder: StackedEmbedder<T>,
    pub encoder: BiLstmEncoder<T>,
    pub transitions: TransitionMatrix<T>,
}

/// Gradient of the loss w.r.t. every trainable parameter of a [`Tagger`].
/// Word-table gradients are sparse; frozen parts have none.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggerGrads<T> {
    pub embed: Vec<SparseRows<T>>,
    pub encoder: BiLstmEncoder<T>,
    pub transitions: Matrix<T>,
}

impl<T: Scalar> TaggerGrads<T> {
    pub fn zeros(model: &Tagger<T>) -> Self {
        let n = model.tagset.len() + 2;
        TaggerGrads {
            embed: model.embedder.zero_grads(),
            encoder: model.encoder.zeros_like(),
            transitions: Matrix::zeros(n, n),
        }
    }

    /// `self += w · other`
    pub fn add_scaled(&mut self, other: &TaggerGrads<T>, w: T) {
        for (mine, theirs) in self.embed.iter_mut().zip(&other.embed) {
            for (id, row) in theirs {
                let acc = mine.entry(*id).or_insert_with(|| vec![T::zero(); row.len()]);
                for (a, &b) in acc.iter_mut().zip(row) {
                    *a += w * b;
                }
            }
        }
        let mut enc = self.encoder.tensors_mut();
        for (a, b) in enc.iter_mut().zip(other.encoder.tensors()) {
            for (x, &y) in a.data.iter_mut().zip(b.data) {
                *x += w * y;
            }
        }
        for (x, &y) in self.transitions.as_mut_slice().iter_mut().zip(other.transitions.as_slice()) {
            *x += w * y;
        }
    }

    /// Dense copy aligned tensor-by-tensor with `model.tensors()`; frozen
    /// parameters get zeros.
    pub fn to_dense(&self, model: &Tagger<T>) -> Vec<Vec<T>> {
        let mut out = Vec::new();
        for (part, rows) in model.embedder.parts().iter().zip(&self.embed) {
            match part {
                EmbedderPart::Word(w) => {
                    let dim = w.table.dim();
                    let mut dense = vec![T::zero(); w.table.rows() * dim];
                    for (&id, row) in rows {
                        dense[id * dim..(id + 1) * dim].copy_from_slice(row);
                    }
                    out.push(dense);
                }
                EmbedderPart::Contextual(lm) => {
                    out.extend(lm.tensors().iter().map(|t| vec![T::zero(); t.data.len()]));
                }
            }
        }
        out.extend(self.encoder.tensors().iter().map(|t| t.data.to_vec()));
        out.push(self.transitions.as_slice().to_vec());
        out
    }
}

impl<T: Scalar> Tagger<T> {
    pub fn new(
        tagset: TagSet,
        embedder: StackedEmbedder<T>,
        encoder: BiLstmEncoder<T>,
        transitions: TransitionMatrix<T>,
    ) -> Result<Self> {
        if encoder.input_dim() != embedder.total_dim() {
            return Err(Error::shape("encoder input", embedder.total_dim(), encoder.input_dim()));
        }
        if encoder.num_tags() != tagset.len() {
            return Err(Error::shape("emission projection rows", tagset.len(), encoder.num_tags()));
        }
        if transitions.num_tags() != tagset.len() {
            return Err(Error::shape("transition matrix", tagset.len(), transitions.num_tags()));
        }
        Ok(Tagger { tagset, embedder, encoder, transitions })
    }

    /// Random encoder and zero transitions on top of a prepared embedder.
    pub fn random<R: Rng + ?Sized>(
        tagset: TagSet,
        embedder: StackedEmbedder<T>,
        hidden_dim: usize,
        forget_bias: f64,
        rng: &mut R,
    ) -> Self {
        let encoder = BiLstmEncoder::random(embedder.total_dim(), hidden_dim, tagset.len(), forget_bias, rng);
        let transitions = TransitionMatrix::zeros(tagset.len());
        Tagger { tagset, embedder, encoder, transitions }
    }

    pub fn emissions<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Matrix<T>> {
        self.encoder.emissions(&self.embedder.stack(tokens)?)
    }

    /// Best tag path; with `constrained`, BIO-invalid transitions are masked.
    pub fn predict<S: AsRef<str>>(&self, tokens: &[S], constrained: bool) -> Result<TagPath<T>> {
        if tokens.is_empty() {
            return Ok(TagPath { tags: Vec::new(), score: T::zero() });
        }
        let em = self.emissions(tokens)?;
        if constrained {
            crf::viterbi_decode(&em, &constrain_transitions(&self.transitions, &self.tagset))
        } else {
            crf::viterbi_decode(&em, &self.transitions)
        }
    }

    pub fn predict_spans<S: AsRef<str>>(&self, tokens: &[S], constrained: bool) -> Result<Vec<EntitySpan>> {
        let path = self.predict(tokens, constrained)?;
        bio_to_spans(&path.tags, &self.tagset, BioMode::Repair)
    }

    fn inputs<S: AsRef<str>>(&self, tokens: &[S], dropped: Option<&[bool]>) -> Result<Vec<Vec<T>>> {
        let mut inputs = self.embedder.stack(tokens)?;
        if let Some(mask) = dropped {
            apply_mask(&mut inputs, mask);
        }
        Ok(inputs)
    }

    /// Loss on one sentence. `dropped` marks tokens whose input vector is
    /// zeroed (word dropout).
    pub fn loss<S: AsRef<str>>(
        &self,
        tokens: &[S],
        gold: &[usize],
        dropped: Option<&[bool]>,
        kind: CrfLoss,
    ) -> Result<T> {
        let em = self.encoder.emissions(&self.inputs(tokens, dropped)?)?;
        Ok(crf::loss_grad(kind, &em, &self.transitions, gold)?.loss)
    }

    /// Loss and full gradient on one sentence.
    pub fn loss_grad<S: AsRef<str>>(
        &self,
        tokens: &[S],
        gold: &[usize],
        dropped: Option<&[bool]>,
        kind: CrfLoss,
    ) -> Result<(T, TaggerGrads<T>)> {
        if gold.len() != tokens.len() {
            return Err(Error::shape("gold tags", tokens.len(), gold.len()));
        }
        let inputs = self.inputs(tokens, dropped)?;
        let (em, trace) = self.encoder.emissions_traced(&inputs)?;
        let lg = crf::loss_grad(kind, &em, &self.transitions, gold)?;
        let mut grads = TaggerGrads::zeros(self);
        let mut d_inputs = self.encoder.backward(&trace, &lg.d_emissions, &mut grads.encoder);
        if let Some(mask) = dropped {
            apply_mask(&mut d_inputs, mask);
        }
        self.embedder.backward(tokens, &d_inputs, &mut grads.embed);
        grads.transitions = lg.d_transitions;
        Ok((lg.loss, grads))
    }

    /// Per-tensor L2 norms over finite entries, for divergence reports.
    pub fn param_norms(&self) -> Vec<(String, f64)> {
        self.tensors()
            .into_iter()
            .map(|t| {
                let sq: f64 = t.data.iter().map(|x| x.as_f64()).filter(|x| x.is_finite()).map(|x| x * x).sum();
                (t.name, sq.sqrt())
            })
            .collect()
    }
}

impl<T: Scalar> ParamSet<T> for Tagger<T> {
    fn tensors(&self) -> Vec<TensorView<'_, T>> {
        prefixed("embed", self.embedder.tensors())
            .chain(prefixed("encoder", self.encoder.tensors()))
            .chain(prefixed("crf", self.transitions.tensors()))
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<TensorViewMut<'_, T>> {
        prefixed_mut("embed", self.embedder.tensors_mut())
            .chain(prefixed_mut("encoder", self.encoder.tensors_mut()))
            .chain(prefixed_mut("crf", self.transitions.tensors_mut()))
            .collect()
    }
}

impl<T: Scalar> SgdTarget<T> for Tagger<T> {
    type Grad = TaggerGrads<T>;

    fn param_grad_pairs<'a>(&'a mut self, grads: &'a TaggerGrads<T>) -> Vec<(&'a mut [T], &'a [T])> {
        let mut pairs = Vec::new();
        for (part, rows) in self.embedder.parts_mut().iter_mut().zip(&grads.embed) {
            if let EmbedderPart::Word(w) = part {
                if !w.table.trainable || rows.is_empty() {
                    continue;
                }
                let dim = w.table.dim();
                for (id, chunk) in w.table.matrix.as_mut_slice().chunks_mut(dim).enumerate() {
                    if let Some(g) = rows.get(&id) {
                        pairs.push((chunk, g.as_slice()));
                    }
                }
            }
        }
        pairs.extend(dense_pairs(&mut self.encoder, &grads.encoder));
        pairs.extend(self.transitions.tensors_mut().into_iter().map(|t| (t.data, grads.transitions.as_slice())));
        pairs
    }
}
