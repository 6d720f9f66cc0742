use std::path::Path;

use rand::Rng;

use super::hyper::Hyperparameters;
use crate::corpus::{bio_to_spans, BioMode, ConllSentence, EntitySpan, TagSet, Vocabulary};
use crate::embeddings::{
    char_vocab, load_pretrained, CharLm, EmbedderPart, EmbeddingTable, StackedEmbedder, WordEmbedding,
};
use crate::error::Result;
use crate::model::Tagger;
use crate::scalar::Scalar;

/// Tokens with gold tag ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingSentence {
    pub tokens: Vec<String>,
    pub tags: Vec<usize>,
}

impl TrainingSentence {
    pub fn from_conll(s: &ConllSentence, tagset: &TagSet) -> Result<Self> {
        Ok(TrainingSentence { tokens: s.tokens.clone(), tags: s.tag_ids(tagset)? })
    }

    pub fn gold_spans(&self, tagset: &TagSet) -> Result<Vec<EntitySpan>> {
        bio_to_spans(&self.tags, tagset, BioMode::Repair)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Raw text of a dataset: one sentence per line, tokens space-separated.
pub fn corpus_text(sentences: &[TrainingSentence]) -> String {
    sentences.iter().map(|s| s.tokens.join(" ") + "\n").collect()
}

#[derive(Debug, Clone, Default)]
pub struct SetupReport {
    pub vocab_size: usize,
    pub glove_coverage: Option<f64>,
    /// Per-epoch mean loss of character-LM pretraining, if any.
    pub lm_history: Vec<f64>,
}

/// Builds an untrained tagger for `train`: word vocabulary and table
/// (from GloVe when given), an optional pretrained and frozen character LM
/// (trained on `lm_corpus`, or on the training text), and a random encoder.
pub fn build_model<T: Scalar, R: Rng + ?Sized>(
    config: &Hyperparameters,
    tagset: &TagSet,
    train: &[TrainingSentence],
    glove: Option<&Path>,
    lm_corpus: Option<&str>,
    rng: &mut R,
) -> Result<(Tagger<T>, SetupReport)> {
    config.validate()?;
    let vocab = Vocabulary::build(
        train.iter().flat_map(|s| s.tokens.iter().map(String::as_str)),
        config.min_freq,
        config.case_folding,
    );
    let mut report = SetupReport { vocab_size: vocab.len(), ..Default::default() };
    let table = match glove {
        Some(path) => {
            let p = load_pretrained(path, &vocab, config.glove_dim, rng)?;
            log::info!("pretrained vectors cover {:.1}% of the vocabulary", 100.0 * p.coverage);
            report.glove_coverage = Some(p.coverage);
            p.table
        }
        None => EmbeddingTable::random(vocab.len(), config.glove_dim, rng),
    };
    let mut parts = vec![EmbedderPart::Word(WordEmbedding::new(vocab, table)?)];

    if config.char_lm {
        let owned;
        let text = match lm_corpus {
            Some(t) => t,
            None => {
                owned = corpus_text(train);
                &owned
            }
        };
        let mut lm = CharLm::random(char_vocab(text), config.char_dim, config.char_lm_hidden, rng);
        report.lm_history = lm.pretrain(text, &config.char_lm_training, rng)?;
        parts.push(EmbedderPart::Contextual(lm));
    }

    let embedder = StackedEmbedder::new(parts);
    let model = Tagger::random(tagset.clone(), embedder, config.lstm_hidden, config.forget_bias, rng);
    Ok((model, report))
}
