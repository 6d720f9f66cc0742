//! Token input vectors: word tables, contextual character-LM embeddings,
//! stacking and word dropout.

mod charlm;
mod dropout;
mod stack;
mod table;

pub use charlm::{char_lm_forward, char_vocab, contextual_embed, CharLm, LmTrainConfig};
pub use dropout::{apply_mask, dropout_mask, word_dropout};
pub use stack::{stack, EmbedderPart, SparseRows, StackedEmbedder, WordEmbedding};
pub use table::{load_pretrained, lookup, parse_pretrained, EmbeddingTable, Pretrained};
