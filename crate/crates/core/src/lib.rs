//! Bi-LSTM-CRF sequence labeling for legal named-entity recognition.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix it to `f64`, which is what training and
//! checkpoints use.

pub mod corpus;
pub mod crf;
pub mod embeddings;
pub mod encoder;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod params;
pub mod rng;
pub mod scalar;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix = tensor::Matrix<f64>;
pub type LstmCell = encoder::LstmCell<f64>;
pub type BiLstmEncoder = encoder::BiLstmEncoder<f64>;
pub type TransitionMatrix = crf::TransitionMatrix<f64>;
pub type CharLm = embeddings::CharLm<f64>;
pub type StackedEmbedder = embeddings::StackedEmbedder<f64>;
pub type Tagger = model::Tagger<f64>;
