//! On-disk model format: `meta.json` (structure, vocabularies, config,
//! history) next to `tensors.bin` (every parameter as little-endian f64, in
//! the order listed by the meta file's tensor index).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::hyper::Hyperparameters;
use super::trainer::EpochRecord;
use crate::corpus::{TagSet, Vocabulary};
use crate::crf::TransitionMatrix;
use crate::embeddings::{CharLm, EmbedderPart, EmbeddingTable, StackedEmbedder, WordEmbedding};
use crate::encoder::BiLstmEncoder;
use crate::error::{Error, Result};
use crate::model::Tagger;
use crate::params::ParamSet;
use crate::rng::RngState;
use crate::scalar::Scalar;

pub const FORMAT_VERSION: u32 = 1;

/// A trained tagger plus everything needed to audit or resume the run.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub tagger: Tagger<T>,
    pub hyperparameters: Hyperparameters,
    pub history: Vec<EpochRecord>,
    /// Epoch whose weights were kept; `None` when no dev set was scored.
    pub best_epoch: Option<usize>,
    pub rng: RngState,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum PartMeta {
    Word { vocab: Vocabulary, dim: usize, trainable: bool },
    Contextual { chars: Vocabulary, char_dim: usize, hidden_dim: usize },
}

#[derive(Serialize, Deserialize)]
struct EncoderMeta {
    input_dim: usize,
    hidden_dim: usize,
    num_tags: usize,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
    len: usize,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    format_version: u32,
    tagset: TagSet,
    embedder: Vec<PartMeta>,
    encoder: EncoderMeta,
    hyperparameters: Hyperparameters,
    history: Vec<EpochRecord>,
    best_epoch: Option<usize>,
    rng: RngState,
    tensors: Vec<TensorEntry>,
}

const META: &str = "meta.json";
const TENSORS: &str = "tensors.bin";

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

impl<T: Scalar> Checkpoint<T> {
    /// Writes `meta.json` and `tensors.bin` into `dir`, creating it if needed.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let model = &self.tagger;
        let embedder = model
            .embedder
            .parts()
            .iter()
            .map(|p| match p {
                EmbedderPart::Word(w) => {
                    PartMeta::Word { vocab: w.vocab.clone(), dim: w.table.dim(), trainable: w.table.trainable }
                }
                EmbedderPart::Contextual(lm) => PartMeta::Contextual {
                    chars: lm.chars.clone(),
                    char_dim: lm.char_dim(),
                    hidden_dim: lm.hidden_dim(),
                },
            })
            .collect();

        let mut blob = Vec::new();
        let mut index = Vec::new();
        let mut offset = 0;
        for t in model.tensors() {
            for x in t.data {
                blob.extend_from_slice(&x.as_f64().to_le_bytes());
            }
            index.push(TensorEntry { name: t.name, shape: t.shape, offset, len: t.data.len() });
            offset += t.data.len();
        }

        let meta = Meta {
            format_version: FORMAT_VERSION,
            tagset: model.tagset.clone(),
            embedder,
            encoder: EncoderMeta {
                input_dim: model.encoder.input_dim(),
                hidden_dim: model.encoder.hidden_dim(),
                num_tags: model.encoder.num_tags(),
            },
            hyperparameters: self.hyperparameters.clone(),
            history: self.history.clone(),
            best_epoch: self.best_epoch,
            rng: self.rng,
            tensors: index,
        };
        let json = serde_json::to_string_pretty(&meta).map_err(|e| bad(e.to_string()))?;
        let meta_path = dir.join(META);
        fs::write(&meta_path, json + "\n").map_err(|e| Error::io(&meta_path, e))?;
        let bin_path = dir.join(TENSORS);
        fs::write(&bin_path, blob).map_err(|e| Error::io(&bin_path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let meta_path = dir.join(META);
        let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: Meta = serde_json::from_str(&text).map_err(|e| bad(format!("{}: {e}", meta_path.display())))?;
        if meta.format_version != FORMAT_VERSION {
            return Err(bad(format!("unsupported format version {} (expected {FORMAT_VERSION})", meta.format_version)));
        }
        let bin_path = dir.join(TENSORS);
        let bytes = fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
        if bytes.len() % 8 != 0 {
            return Err(bad(format!("{} is not a whole number of f64 values", bin_path.display())));
        }
        let values: Vec<f64> =
            bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();

        let parts = meta
            .embedder
            .into_iter()
            .map(|p| match p {
                PartMeta::Word { vocab, dim, trainable } => {
                    let mut table = EmbeddingTable::zeros(vocab.len(), dim);
                    table.trainable = trainable;
                    WordEmbedding::new(vocab, table).map(EmbedderPart::Word)
                }
                PartMeta::Contextual { chars, char_dim, hidden_dim } => {
                    Ok(EmbedderPart::Contextual(CharLm::zeros(chars, char_dim, hidden_dim)))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let e = &meta.encoder;
        let mut tagger = Tagger::new(
            meta.tagset,
            StackedEmbedder::new(parts),
            BiLstmEncoder::zeros(e.input_dim, e.hidden_dim, e.num_tags),
            TransitionMatrix::zeros(e.num_tags),
        )?;

        let mut views = tagger.tensors_mut();
        if views.len() != meta.tensors.len() {
            return Err(bad(format!("expected {} tensors, index lists {}", views.len(), meta.tensors.len())));
        }
        for (view, entry) in views.iter_mut().zip(&meta.tensors) {
            if view.name != entry.name || view.shape != entry.shape || view.data.len() != entry.len {
                return Err(bad(format!(
                    "tensor {} {:?} does not match index entry {} {:?}",
                    view.name, view.shape, entry.name, entry.shape
                )));
            }
            let src = values
                .get(entry.offset..entry.offset + entry.len)
                .ok_or_else(|| bad(format!("tensor {} runs past the end of {TENSORS}", entry.name)))?;
            for (dst, &v) in view.data.iter_mut().zip(src) {
                *dst = T::of(v);
            }
        }
        drop(views);
        tagger.transitions.reimpose_fixed();

        Ok(Checkpoint {
            tagger,
            hyperparameters: meta.hyperparameters,
            history: meta.history,
            best_epoch: meta.best_epoch,
            rng: meta.rng,
        })
    }
}
