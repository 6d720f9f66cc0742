use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::crf::CrfLoss;
use crate::embeddings::LmTrainConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Optimizer {
    #[serde(rename = "SGD")]
    Sgd,
}

/// Training configuration. The first eleven fields are required in config
/// files; the rest default as documented.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparameters {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    /// Word-embedding width (GloVe vectors when a file is supplied).
    pub glove_dim: usize,
    pub word_dropout: f64,
    /// Per-direction hidden width of the Bi-LSTM.
    pub lstm_hidden: usize,
    pub patience: usize,
    pub anneal_factor: f64,
    pub seed: u64,
    /// Global gradient-norm bound; 0 disables clipping.
    pub gradient_clip: f64,

    #[serde(default = "one")]
    pub min_freq: usize,
    #[serde(default)]
    pub case_folding: bool,
    /// Stop once annealing takes the learning rate below this.
    #[serde(default = "default_min_lr")]
    pub min_learning_rate: f64,
    #[serde(default = "default_forget_bias")]
    pub forget_bias: f64,
    #[serde(default)]
    pub loss: CrfLoss,
    /// Stack a contextual character-LM embedding after the word table.
    #[serde(default = "yes")]
    pub char_lm: bool,
    #[serde(default = "default_char_dim")]
    pub char_dim: usize,
    #[serde(default = "default_char_hidden")]
    pub char_lm_hidden: usize,
    #[serde(default)]
    pub char_lm_training: LmTrainConfig,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

fn default_min_lr() -> f64 {
    1e-4
}

fn default_forget_bias() -> f64 {
    1.0
}

fn default_char_dim() -> usize {
    25
}

fn default_char_hidden() -> usize {
    256
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            epochs: 50,
            learning_rate: 0.1,
            batch_size: 32,
            optimizer: Optimizer::Sgd,
            glove_dim: 100,
            word_dropout: 0.5,
            lstm_hidden: 256,
            patience: 3,
            anneal_factor: 0.5,
            seed: 42,
            gradient_clip: 5.0,
            min_freq: 1,
            case_folding: false,
            min_learning_rate: default_min_lr(),
            forget_bias: default_forget_bias(),
            loss: CrfLoss::Nll,
            char_lm: true,
            char_dim: default_char_dim(),
            char_lm_hidden: default_char_hidden(),
            char_lm_training: LmTrainConfig::default(),
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return fail(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if !(0.0..=1.0).contains(&self.word_dropout) {
            return fail(format!("word_dropout must be in [0, 1], got {}", self.word_dropout));
        }
        if self.batch_size == 0 {
            return fail("batch_size must be >= 1".into());
        }
        if self.patience == 0 {
            return fail("patience must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.anneal_factor) || self.anneal_factor == 0.0 {
            return fail(format!("anneal_factor must be in (0, 1], got {}", self.anneal_factor));
        }
        if self.glove_dim == 0 || self.lstm_hidden == 0 {
            return fail("glove_dim and lstm_hidden must be >= 1".into());
        }
        if self.char_lm && (self.char_dim == 0 || self.char_lm_hidden == 0) {
            return fail("char_dim and char_lm_hidden must be >= 1".into());
        }
        if self.gradient_clip.is_nan() || self.gradient_clip < 0.0 {
            return fail(format!("gradient_clip must be >= 0, got {}", self.gradient_clip));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let h: Hyperparameters = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        h.validate()?;
        Ok(h)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}
