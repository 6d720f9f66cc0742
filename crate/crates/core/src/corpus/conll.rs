//! Two-column CoNLL files: `token<SPACE>tag` per line, blank line between
//! sentences.

use std::fs;
use std::path::Path;

use super::bio::spans_to_bio;
use super::sentence::LabeledSentence;
use super::tagset::TagSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConllSentence {
    pub tokens: Vec<String>,
    pub tags: Vec<String>,
}

impl ConllSentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tag_ids(&self, tagset: &TagSet) -> Result<Vec<usize>> {
        self.tags.iter().map(|t| tagset.require_tag(t)).collect()
    }

    pub fn from_labeled(sentence: &LabeledSentence, tagset: &TagSet) -> Result<Self> {
        let tags = spans_to_bio(sentence, tagset)?;
        Ok(ConllSentence {
            tokens: sentence.token_texts().map(str::to_string).collect(),
            tags: tags.into_iter().map(|id| tagset.tag_name(id).to_string()).collect(),
        })
    }
}

pub fn parse_conll(text: &str, tagset: &TagSet, source: &str) -> Result<Vec<ConllSentence>> {
    let mut sentences = Vec::new();
    let mut current = ConllSentence::default();
    for (i, raw) in text.split('\n').enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            if !current.is_empty() {
                sentences.push(std::mem::take(&mut current));
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                path: source.to_string(),
                line: i + 1,
                reason: format!("expected 2 fields, found {}", fields.len()),
            });
        }
        if tagset.tag_id(fields[1]).is_none() {
            return Err(Error::Parse {
                path: source.to_string(),
                line: i + 1,
                reason: format!("unknown tag {}", fields[1]),
            });
        }
        current.tokens.push(fields[0].to_string());
        current.tags.push(fields[1].to_string());
    }
    if !current.is_empty() {
        sentences.push(current);
    }
    Ok(sentences)
}

pub fn read_conll(path: impl AsRef<Path>, tagset: &TagSet) -> Result<Vec<ConllSentence>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_conll(&text, tagset, &path.display().to_string())
}

/// Canonical rendering. Empty sentences are skipped since the format cannot
/// represent them.
pub fn to_conll_string(sentences: &[ConllSentence]) -> String {
    let mut out = String::new();
    for s in sentences.iter().filter(|s| !s.is_empty()) {
        for (tok, tag) in s.tokens.iter().zip(&s.tags) {
            out.push_str(tok);
            out.push(' ');
            out.push_str(tag);
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

pub fn write_conll(sentences: &[ConllSentence], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_conll_string(sentences)).map_err(|e| Error::io(path, e))
}
