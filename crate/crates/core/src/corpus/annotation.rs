//! Character-offset annotation documents (the JSON interchange format).

use serde::{Deserialize, Serialize};

use super::sentence::{tokenize, EntitySpan, LabeledSentence, Section, Token};
use super::tagset::TagSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Annotation {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section: Option<Section>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<DocumentMeta>,
    pub annotations: Vec<Annotation>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    Many(Vec<Document>),
    One(Document),
}

/// What to do with an annotation whose boundaries fall inside a token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlignMode {
    #[default]
    Strict,
    /// Widen the span to whole tokens and record a warning.
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignWarning {
    pub doc_id: String,
    pub index: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct Parsed {
    pub sentences: Vec<LabeledSentence>,
    pub warnings: Vec<AlignWarning>,
}

/// Parses either a JSON array of documents or a single document object.
pub fn parse_documents(json: &str) -> Result<Vec<Document>> {
    match serde_json::from_str::<OneOrMany>(json) {
        Ok(OneOrMany::Many(docs)) => Ok(docs),
        Ok(OneOrMany::One(doc)) => Ok(vec![doc]),
        // the untagged error carries no position; re-parse for a precise one
        Err(_) => match serde_json::from_str::<Vec<Document>>(json) {
            Err(e) if !json.trim_start().starts_with('{') => Err(json_error(json, &e)),
            _ => match serde_json::from_str::<Document>(json) {
                Err(e) => Err(json_error(json, &e)),
                Ok(doc) => Ok(vec![doc]),
            },
        },
    }
}

fn json_error(json: &str, e: &serde_json::Error) -> Error {
    // serde_json reports 1-based line and column (column in bytes)
    let mut offset = 0;
    for (i, line) in json.split_inclusive('\n').enumerate() {
        if i + 1 == e.line() {
            offset += e.column().saturating_sub(1).min(line.len());
            break;
        }
        offset += line.len();
    }
    Error::Json { offset, message: e.to_string() }
}

/// Tokenizes each document and maps its character-offset annotations onto
/// token-index spans. One document becomes one sentence.
pub fn parse_annotations(json: &str, tagset: &TagSet, mode: AlignMode) -> Result<Parsed> {
    let docs = parse_documents(json)?;
    let mut parsed = Parsed::default();
    for doc in &docs {
        let sentence = align_document(doc, tagset, mode, &mut parsed.warnings)?;
        parsed.sentences.push(sentence);
    }
    Ok(parsed)
}

pub fn align_document(
    doc: &Document,
    tagset: &TagSet,
    mode: AlignMode,
    warnings: &mut Vec<AlignWarning>,
) -> Result<LabeledSentence> {
    let n_chars = doc.text.chars().count();
    let tokens = tokenize(&doc.text);
    let err = |index: usize, reason: String| Error::Annotation { doc_id: doc.id.clone(), index, reason };

    let mut spans: Vec<(usize, EntitySpan)> = Vec::new();
    for (index, ann) in doc.annotations.iter().enumerate() {
        if ann.start >= ann.end || ann.end > n_chars {
            return Err(err(
                index,
                format!("offsets {}..{} out of range for text of {n_chars} characters", ann.start, ann.end),
            ));
        }
        if tagset.class_id(&ann.label).is_none() {
            return Err(err(index, format!("unknown entity class {:?}", ann.label)));
        }
        let Some((first, last)) = covered_tokens(&tokens, ann.start, ann.end) else {
            if mode == AlignMode::Strict {
                return Err(err(index, "annotation covers no token".into()));
            }
            warnings.push(AlignWarning {
                doc_id: doc.id.clone(),
                index,
                message: "annotation covers no token; dropped".into(),
            });
            continue;
        };
        let aligned = tokens[first].char_start == ann.start && tokens[last].char_end == ann.end;
        if !aligned {
            let msg = format!(
                "offsets {}..{} do not align to token boundaries {}..{}",
                ann.start, ann.end, tokens[first].char_start, tokens[last].char_end
            );
            if mode == AlignMode::Strict {
                return Err(err(index, msg));
            }
            warnings.push(AlignWarning { doc_id: doc.id.clone(), index, message: format!("{msg}; widened") });
        }
        spans.push((index, EntitySpan::new(ann.label.clone(), first, last + 1)));
    }

    spans.sort_by_key(|(_, s)| (s.token_start, s.token_end));
    for w in spans.windows(2) {
        if w[0].1.overlaps(&w[1].1) {
            return Err(err(w[1].0, format!("overlaps annotation {}", w[0].0)));
        }
    }

    Ok(LabeledSentence {
        tokens,
        spans: spans.into_iter().map(|(_, s)| s).collect(),
        doc_id: doc.id.clone(),
        section: doc.meta.as_ref().and_then(|m| m.section),
    })
}

/// First and last token index intersecting `[start, end)`.
fn covered_tokens(tokens: &[Token], start: usize, end: usize) -> Option<(usize, usize)> {
    let first = tokens.iter().position(|t| t.char_end > start)?;
    let last = tokens.iter().rposition(|t| t.char_start < end)?;
    (first <= last).then_some((first, last))
}

/// Renders spans back to character-offset annotations on the sentence's
/// own tokens.
pub fn spans_to_annotations(tokens: &[Token], spans: &[EntitySpan]) -> Vec<Annotation> {
    spans
        .iter()
        .map(|s| Annotation {
            start: tokens[s.token_start].char_start,
            end: tokens[s.token_end - 1].char_end,
            label: s.label.clone(),
        })
        .collect()
}
