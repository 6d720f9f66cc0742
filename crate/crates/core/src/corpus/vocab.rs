use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::sentence::LabeledSentence;

pub const UNK: &str = "<unk>";

/// Dense surface-form → id map with a reserved unknown id 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabRepr", into = "VocabRepr")]
pub struct Vocabulary {
    items: Vec<String>,
    index: HashMap<String, usize>,
    min_freq: usize,
    case_folding: bool,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    min_freq: usize,
    case_folding: bool,
    items: Vec<String>,
}

impl From<VocabRepr> for Vocabulary {
    fn from(r: VocabRepr) -> Self {
        let index = r.items.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Vocabulary { items: r.items, index, min_freq: r.min_freq, case_folding: r.case_folding }
    }
}

impl From<Vocabulary> for VocabRepr {
    fn from(v: Vocabulary) -> Self {
        VocabRepr { min_freq: v.min_freq, case_folding: v.case_folding, items: v.items }
    }
}

impl Vocabulary {
    pub const UNK_ID: usize = 0;

    /// Counts surface forms and assigns ids by (frequency desc, text asc).
    /// A `min_freq` of 0 is treated as 1.
    pub fn build<'a>(tokens: impl IntoIterator<Item = &'a str>, min_freq: usize, case_folding: bool) -> Self {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for t in tokens {
            let key = if case_folding { t.to_lowercase() } else { t.to_string() };
            *counts.entry(key).or_default() += 1;
        }
        counts.remove(UNK);
        let mut entries: Vec<(String, usize)> = counts.into_iter().filter(|(_, c)| *c >= min_freq.max(1)).collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let items: Vec<String> = std::iter::once(UNK.to_string()).chain(entries.into_iter().map(|(s, _)| s)).collect();
        VocabRepr { min_freq: min_freq.max(1), case_folding, items }.into()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    /// Only the unknown entry is present.
    pub fn is_empty(&self) -> bool {
        self.items.len() <= 1
    }

    pub fn case_folding(&self) -> bool {
        self.case_folding
    }

    pub fn min_freq(&self) -> usize {
        self.min_freq
    }

    /// Id of `token`, or [`Vocabulary::UNK_ID`].
    pub fn id(&self, token: &str) -> usize {
        let hit = if self.case_folding { self.index.get(&token.to_lowercase()) } else { self.index.get(token) };
        hit.copied().unwrap_or(Self::UNK_ID)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.id(token) != Self::UNK_ID
    }

    pub fn item(&self, id: usize) -> &str {
        &self.items[id]
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }
}

pub fn build_vocab(dataset: &[LabeledSentence], min_freq: usize, case_folding: bool) -> Vocabulary {
    Vocabulary::build(dataset.iter().flat_map(|s| s.token_texts()), min_freq, case_folding)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_rule() {
        let v = Vocabulary::build(["a", "a", "b"], 1, false);
        assert_eq!(v.items(), &["<unk>", "a", "b"]);
        assert_eq!(v.id("a"), 1);
        assert_eq!(v.id("b"), 2);
        assert_eq!(v.id("zzz"), 0);
    }

    #[test]
    fn min_freq_threshold() {
        let v = Vocabulary::build(["a", "a", "b"], 2, false);
        assert_eq!(v.items(), &["<unk>", "a"]);
    }

    #[test]
    fn case_folding() {
        let v = Vocabulary::build(["A", "a"], 1, true);
        assert_eq!(v.items(), &["<unk>", "a"]);
        assert_eq!(v.id("A"), 1);
    }

    #[test]
    fn ties_are_lexicographic() {
        let v = Vocabulary::build(["c", "b", "a", "c"], 1, false);
        assert_eq!(v.items(), &["<unk>", "c", "a", "b"]);
    }

    #[test]
    fn empty_dataset_unk_only() {
        let v = build_vocab(&[], 1, false);
        assert_eq!(v.len(), 1);
        assert!(v.is_empty());
    }

    #[test]
    fn serde_round_trip() {
        let v = Vocabulary::build(["x", "y", "y"], 1, true);
        let back: Vocabulary = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
        assert_eq!(back, v);
    }
}
