use std::fs;
use std::path::Path;

use rand::Rng;

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Matrix;

/// `|V| × d` lookup table; row `Vocabulary::UNK_ID` serves unknown tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable<T> {
    pub matrix: Matrix<T>,
    pub trainable: bool,
}

impl<T: Scalar> EmbeddingTable<T> {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        EmbeddingTable { matrix: Matrix::zeros(rows, dim), trainable: true }
    }

    /// Uniform(−0.5/d, 0.5/d) rows.
    pub fn random<R: Rng + ?Sized>(rows: usize, dim: usize, rng: &mut R) -> Self {
        let mut table = Self::zeros(rows, dim);
        for r in 0..rows {
            init_row(table.matrix.row_mut(r), rng);
        }
        table
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn row(&self, id: usize) -> &[T] {
        self.matrix.row(id)
    }
}

fn init_row<T: Scalar, R: Rng + ?Sized>(row: &mut [T], rng: &mut R) {
    let bound = 0.5 / row.len().max(1) as f64;
    for x in row {
        *x = T::of(rng.random_range(-bound..=bound));
    }
}

/// Vector for `token`, falling back to the unknown row.
pub fn lookup<'a, T: Scalar>(table: &'a EmbeddingTable<T>, vocab: &Vocabulary, token: &str) -> &'a [T] {
    table.row(vocab.id(token))
}

/// Result of reading a GloVe-format file against a vocabulary.
#[derive(Debug, Clone)]
pub struct Pretrained<T> {
    pub table: EmbeddingTable<T>,
    /// Vocabulary entries (excluding the unknown id) found in the file.
    pub found: usize,
    /// Fraction of vocabulary entries (excluding the unknown id) found.
    pub coverage: f64,
}

pub fn load_pretrained<T: Scalar, R: Rng + ?Sized>(
    path: impl AsRef<Path>,
    vocab: &Vocabulary,
    dim: usize,
    rng: &mut R,
) -> Result<Pretrained<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pretrained(&text, vocab, dim, rng, &path.display().to_string())
}

/// GloVe text format: `word f1 … fd`, space separated, one word per line.
/// Words not in the file get the seeded uniform initializer; the first
/// occurrence of a word wins.
pub fn parse_pretrained<T: Scalar, R: Rng + ?Sized>(
    text: &str,
    vocab: &Vocabulary,
    dim: usize,
    rng: &mut R,
    source: &str,
) -> Result<Pretrained<T>> {
    let mut table = EmbeddingTable::random(vocab.len(), dim, rng);
    let mut filled = vec![false; vocab.len()];
    let mut found = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(' ').filter(|f| !f.is_empty());
        let word = fields.next().unwrap_or_default();
        let values: Vec<&str> = fields.collect();
        if values.len() != dim {
            if found == 0 && i == 0 {
                return Err(Error::Config(format!(
                    "{source}: vectors have {} dimensions but {dim} are configured",
                    values.len()
                )));
            }
            return Err(Error::Parse {
                path: source.to_string(),
                line: i + 1,
                reason: format!("expected word plus {dim} values, found {} values", values.len()),
            });
        }
        let id = vocab.id(word);
        if id == Vocabulary::UNK_ID || filled[id] {
            continue;
        }
        let row = table.matrix.row_mut(id);
        for (slot, v) in row.iter_mut().zip(&values) {
            let x: f64 = v.parse().map_err(|_| Error::Parse {
                path: source.to_string(),
                line: i + 1,
                reason: format!("invalid number {v:?}"),
            })?;
            *slot = T::of(x);
        }
        filled[id] = true;
        found += 1;
    }
    let known = vocab.len().saturating_sub(1);
    let coverage = if known == 0 { 0.0 } else { found as f64 / known as f64 };
    Ok(Pretrained { table, found, coverage })
}
