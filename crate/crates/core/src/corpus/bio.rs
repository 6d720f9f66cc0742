//! Conversion between entity spans and BIO2 tag sequences.

use serde::Serialize;

use super::sentence::{EntitySpan, LabeledSentence};
use super::tagset::{Tag, TagSet};
use crate::error::{Error, Result};

/// How [`bio_to_spans`] treats an `I-` tag that does not continue a span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BioMode {
    /// Orphan `I-` tags are an error.
    #[default]
    Strict,
    /// Orphan `I-` tags open a new span as if they were `B-`.
    Repair,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub position: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BioReport {
    pub violations: Vec<Violation>,
}

impl BioReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// BIO2 encoding of a sentence's spans: every span starts with `B-`.
pub fn spans_to_bio(sentence: &LabeledSentence, tagset: &TagSet) -> Result<Vec<usize>> {
    spans_to_tags(&sentence.spans, sentence.tokens.len(), tagset)
}

pub fn spans_to_tags(spans: &[EntitySpan], len: usize, tagset: &TagSet) -> Result<Vec<usize>> {
    let mut tags = vec![0; len];
    let mut filled = vec![false; len];
    for (index, span) in spans.iter().enumerate() {
        let class = tagset.class_id(&span.label).ok_or_else(|| Error::Labeling { index, label: span.label.clone() })?;
        if span.token_start >= span.token_end || span.token_end > len {
            return Err(Error::shape(
                "span range",
                format!("non-empty range within 0..{len}"),
                format!("{}..{}", span.token_start, span.token_end),
            ));
        }
        for i in span.token_start..span.token_end {
            if filled[i] {
                return Err(Error::Validation {
                    position: i,
                    reason: format!("span {index} overlaps an earlier span"),
                });
            }
            filled[i] = true;
            tags[i] = if i == span.token_start { tagset.begin(class) } else { tagset.inside(class) };
        }
    }
    Ok(tags)
}

/// Decodes a tag sequence into maximal `B-c (I-c)*` spans.
pub fn bio_to_spans(tags: &[usize], tagset: &TagSet, mode: BioMode) -> Result<Vec<EntitySpan>> {
    let mut spans = Vec::new();
    let mut open: Option<(usize, usize)> = None; // (class, start)
    for (pos, &id) in tags.iter().enumerate() {
        if id >= tagset.len() {
            return Err(Error::Validation { position: pos, reason: format!("tag id {id} out of range") });
        }
        match tagset.decode(id) {
            Tag::Outside => {
                close(&mut spans, &mut open, pos, tagset);
            }
            Tag::Begin(c) => {
                close(&mut spans, &mut open, pos, tagset);
                open = Some((c, pos));
            }
            Tag::Inside(c) => match open {
                Some((oc, _)) if oc == c => {}
                _ => {
                    if mode == BioMode::Strict {
                        return Err(Error::Validation {
                            position: pos,
                            reason: format!("{} does not continue a span", tagset.tag_name(id)),
                        });
                    }
                    close(&mut spans, &mut open, pos, tagset);
                    open = Some((c, pos));
                }
            },
        }
    }
    close(&mut spans, &mut open, tags.len(), tagset);
    Ok(spans)
}

fn close(spans: &mut Vec<EntitySpan>, open: &mut Option<(usize, usize)>, end: usize, tagset: &TagSet) {
    if let Some((class, start)) = open.take() {
        spans.push(EntitySpan::new(tagset.classes()[class].clone(), start, end));
    }
}

/// Flags every `I-c` not preceded by `B-c` or `I-c`, and any id that is
/// not a real tag.
pub fn validate_bio(tags: &[usize], tagset: &TagSet) -> BioReport {
    let mut violations = Vec::new();
    let mut prev: Option<Tag> = None;
    for (position, &id) in tags.iter().enumerate() {
        if id >= tagset.len() {
            violations.push(Violation { position, reason: format!("tag id {id} out of range") });
            prev = None;
            continue;
        }
        let tag = tagset.decode(id);
        if let Tag::Inside(c) = tag {
            let continues = matches!(prev, Some(Tag::Begin(p)) | Some(Tag::Inside(p)) if p == c);
            if !continues {
                let reason = match prev {
                    Some(Tag::Begin(p)) | Some(Tag::Inside(p)) => {
                        format!("{} follows a {} span without a B- tag", tagset.tag_name(id), tagset.classes()[p])
                    }
                    _ => format!("orphan {}", tagset.tag_name(id)),
                };
                violations.push(Violation { position, reason });
            }
        }
        prev = Some(tag);
    }
    BioReport { violations }
}
