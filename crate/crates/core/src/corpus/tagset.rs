use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The fourteen legal entity classes, in canonical order.
pub const LEGAL_CLASSES: [&str; 14] = [
    "COURT",
    "PETITIONER",
    "RESPONDENT",
    "JUDGE",
    "LAWYER",
    "DATE",
    "ORG",
    "GPE",
    "STATUTE",
    "PROVISION",
    "PRECEDENT",
    "CASENUMBER",
    "WITNESS",
    "OTHERPERSON",
];

/// Decoded form of a tag id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tag {
    Outside,
    Begin(usize),
    Inside(usize),
}

/// Entity classes expanded to BIO tags.
///
/// Tag 0 is `O`; class `c` owns `B-c` at `1 + 2c` and `I-c` at `2 + 2c`.
/// Two more ids past the last tag are reserved for the CRF start and stop
/// states and never appear in files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TagSetRepr", into = "TagSetRepr")]
pub struct TagSet {
    classes: Vec<String>,
    tags: Vec<String>,
    class_index: HashMap<String, usize>,
    tag_index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct TagSetRepr {
    classes: Vec<String>,
}

impl TryFrom<TagSetRepr> for TagSet {
    type Error = Error;

    fn try_from(repr: TagSetRepr) -> Result<Self> {
        TagSet::new(repr.classes)
    }
}

impl From<TagSet> for TagSetRepr {
    fn from(ts: TagSet) -> Self {
        TagSetRepr { classes: ts.classes }
    }
}

impl Default for TagSet {
    fn default() -> Self {
        Self::legal()
    }
}

impl TagSet {
    /// The fourteen-class legal tag set (29 BIO tags).
    pub fn legal() -> Self {
        Self::new(LEGAL_CLASSES.iter().map(|s| s.to_string())).expect("canonical classes are valid")
    }

    pub fn new<I, S>(classes: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let classes: Vec<String> = classes.into_iter().map(Into::into).collect();
        let mut class_index = HashMap::new();
        for (i, c) in classes.iter().enumerate() {
            if c.is_empty() || c.chars().any(char::is_whitespace) || c == "O" {
                return Err(Error::Config(format!("invalid entity class name {c:?}")));
            }
            if class_index.insert(c.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate entity class {c:?}")));
            }
        }
        let mut tags = vec!["O".to_string()];
        for c in &classes {
            tags.push(format!("B-{c}"));
            tags.push(format!("I-{c}"));
        }
        let tag_index = tags.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(TagSet { classes, tags, class_index, tag_index })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    /// Number of real (emittable) tags.
    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn start_id(&self) -> usize {
        self.tags.len()
    }

    pub fn stop_id(&self) -> usize {
        self.tags.len() + 1
    }

    pub fn class_id(&self, class: &str) -> Option<usize> {
        self.class_index.get(class).copied()
    }

    pub fn tag_id(&self, tag: &str) -> Option<usize> {
        self.tag_index.get(tag).copied()
    }

    /// Like [`TagSet::tag_id`] but failing with an error naming the tag.
    pub fn require_tag(&self, tag: &str) -> Result<usize> {
        self.tag_id(tag).ok_or_else(|| Error::UnknownTag(tag.to_string()))
    }

    pub fn tag_name(&self, id: usize) -> &str {
        &self.tags[id]
    }

    pub fn begin(&self, class: usize) -> usize {
        1 + 2 * class
    }

    pub fn inside(&self, class: usize) -> usize {
        2 + 2 * class
    }

    /// Panics if `id` is not a real tag.
    pub fn decode(&self, id: usize) -> Tag {
        assert!(id < self.tags.len(), "tag id {id} out of range");
        match id {
            0 => Tag::Outside,
            _ if id % 2 == 1 => Tag::Begin((id - 1) / 2),
            _ => Tag::Inside((id - 2) / 2),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legal_tagset_has_29_tags() {
        let ts = TagSet::legal();
        assert_eq!(ts.classes().len(), 14);
        assert_eq!(ts.len(), 29);
        assert_eq!(ts.tag_name(0), "O");
        assert_eq!(ts.start_id(), 29);
        assert_eq!(ts.stop_id(), 30);
    }

    #[test]
    fn ids_decode_consistently() {
        let ts = TagSet::legal();
        for (i, name) in ts.tags().iter().enumerate() {
            assert_eq!(ts.tag_id(name), Some(i));
            match ts.decode(i) {
                Tag::Outside => assert_eq!(name, "O"),
                Tag::Begin(c) => assert_eq!(name, &format!("B-{}", ts.classes()[c])),
                Tag::Inside(c) => assert_eq!(name, &format!("I-{}", ts.classes()[c])),
            }
        }
    }

    #[test]
    fn serde_keeps_indices() {
        let ts = TagSet::new(["A", "B"]).unwrap();
        let json = serde_json::to_string(&ts).unwrap();
        assert_eq!(json, r#"{"classes":["A","B"]}"#);
        let back: TagSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, ts);
    }

    #[test]
    fn rejects_duplicates() {
        assert!(TagSet::new(["A", "A"]).is_err());
        assert!(TagSet::new(["O"]).is_err());
    }
}
