//! Data preparation: tag sets, BIO conversion, annotation parsing,
//! vocabularies and CoNLL files.

pub mod annotation;
pub mod bio;
pub mod conll;
pub mod sentence;
pub mod tagset;
pub mod vocab;

pub use annotation::{
    align_document, parse_annotations, parse_documents, spans_to_annotations, AlignMode, AlignWarning, Annotation,
    Document, DocumentMeta, Parsed,
};
pub use bio::{bio_to_spans, spans_to_bio, spans_to_tags, validate_bio, BioMode, BioReport, Violation};
pub use conll::{parse_conll, read_conll, to_conll_string, write_conll, ConllSentence};
pub use sentence::{parse_stoplist, remove_stopwords, tokenize, EntitySpan, LabeledSentence, Section, Token};
pub use tagset::{Tag, TagSet, LEGAL_CLASSES};
pub use vocab::{build_vocab, Vocabulary};
