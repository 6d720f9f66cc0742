use std::collections::HashSet;

use serde::{Deserialize, Serialize};

/// A whitespace-delimited token with character (not byte) offsets into the
/// source text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub char_start: usize,
    pub char_end: usize,
}

/// A labeled entity over the token range `token_start..token_end`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntitySpan {
    pub label: String,
    pub token_start: usize,
    pub token_end: usize,
}

impl EntitySpan {
    pub fn new(label: impl Into<String>, token_start: usize, token_end: usize) -> Self {
        EntitySpan { label: label.into(), token_start, token_end }
    }

    pub fn len(&self) -> usize {
        self.token_end - self.token_start
    }

    pub fn is_empty(&self) -> bool {
        self.token_end <= self.token_start
    }

    pub fn overlaps(&self, other: &EntitySpan) -> bool {
        self.token_start < other.token_end && other.token_start < self.token_end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Section {
    Preamble,
    Judgement,
}

/// One annotation sample: tokens plus gold spans.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSentence {
    pub tokens: Vec<Token>,
    pub spans: Vec<EntitySpan>,
    pub doc_id: String,
    pub section: Option<Section>,
}

impl LabeledSentence {
    pub fn token_texts(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.text.as_str())
    }

    /// Spans sorted, non-empty, disjoint and within the token range.
    pub fn spans_are_valid(&self) -> bool {
        spans_are_valid(&self.spans, self.tokens.len())
    }
}

pub(crate) fn spans_are_valid(spans: &[EntitySpan], len: usize) -> bool {
    spans.iter().all(|s| s.token_start < s.token_end && s.token_end <= len)
        && spans.windows(2).all(|w| w[0].token_end <= w[1].token_start)
}

/// Splits on Unicode whitespace; tokens are maximal non-whitespace runs.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut current: Option<(usize, String)> = None;
    let mut pos = 0;
    for ch in text.chars() {
        if ch.is_whitespace() {
            if let Some((start, tok)) = current.take() {
                tokens.push(Token { text: tok, char_start: start, char_end: pos });
            }
        } else {
            current.get_or_insert_with(|| (pos, String::new())).1.push(ch);
        }
        pos += 1;
    }
    if let Some((start, tok)) = current {
        tokens.push(Token { text: tok, char_start: start, char_end: pos });
    }
    tokens
}

/// Drops stop-word tokens that are not covered by any entity span and
/// re-indexes the spans. Matching is on the lowercased token text.
pub fn remove_stopwords(sentence: &LabeledSentence, stoplist: &HashSet<String>) -> LabeledSentence {
    if stoplist.is_empty() {
        return sentence.clone();
    }
    let mut protected = vec![false; sentence.tokens.len()];
    for span in &sentence.spans {
        protected[span.token_start..span.token_end].iter_mut().for_each(|p| *p = true);
    }
    // new_index[i] = index of token i after removal (or of the next kept token)
    let mut new_index = Vec::with_capacity(sentence.tokens.len() + 1);
    let mut tokens = Vec::new();
    for (i, tok) in sentence.tokens.iter().enumerate() {
        new_index.push(tokens.len());
        if protected[i] || !stoplist.contains(&tok.text.to_lowercase()) {
            tokens.push(tok.clone());
        }
    }
    new_index.push(tokens.len());
    let spans = sentence
        .spans
        .iter()
        .map(|s| EntitySpan {
            label: s.label.clone(),
            token_start: new_index[s.token_start],
            token_end: new_index[s.token_end],
        })
        .collect();
    LabeledSentence { tokens, spans, doc_id: sentence.doc_id.clone(), section: sentence.section }
}

/// Reads a stoplist: one lowercase token per line, blank lines ignored.
pub fn parse_stoplist(text: &str) -> HashSet<String> {
    text.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_lowercase).collect()
}
