//! Span-level scoring: per-class precision/recall/F1 with micro, macro and
//! support-weighted aggregates.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{EntitySpan, TagSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    /// Label and both boundaries must agree.
    #[default]
    Strict,
    /// Same label and any token overlap.
    Relaxed,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    fn add(&mut self, other: Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

/// Per-class counts for one sentence. Each gold span matches at most one
/// prediction.
pub fn match_spans(gold: &[EntitySpan], pred: &[EntitySpan], mode: MatchMode) -> BTreeMap<String, Counts> {
    let mut counts: BTreeMap<String, Counts> = BTreeMap::new();
    let mut used = vec![false; gold.len()];
    for p in pred {
        let hit = gold.iter().enumerate().position(|(i, g)| {
            !used[i]
                && g.label == p.label
                && match mode {
                    MatchMode::Strict => g.token_start == p.token_start && g.token_end == p.token_end,
                    MatchMode::Relaxed => g.overlaps(p),
                }
        });
        let c = counts.entry(p.label.clone()).or_default();
        match hit {
            Some(i) => {
                used[i] = true;
                c.tp += 1;
            }
            None => c.fp += 1,
        }
    }
    for (g, _) in gold.iter().zip(&used).filter(|(_, &u)| !u) {
        counts.entry(g.label.clone()).or_default().fn_ += 1;
    }
    counts
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

impl ClassMetrics {
    pub fn from_counts(label: impl Into<String>, c: Counts) -> Self {
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        ClassMetrics {
            label: label.into(),
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
            precision,
            recall,
            f1: harmonic(precision, recall),
            support: c.tp + c.fn_,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub per_class: Vec<ClassMetrics>,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
}

/// Scores aligned `(gold, predicted)` span lists, one pair per sentence.
/// Classes are reported in tag-set order.
pub fn classification_report(
    pairs: &[(Vec<EntitySpan>, Vec<EntitySpan>)],
    tagset: &TagSet,
    mode: MatchMode,
) -> Result<Report> {
    let mut totals: BTreeMap<String, Counts> = BTreeMap::new();
    for (gold, pred) in pairs {
        for (label, c) in match_spans(gold, pred, mode) {
            totals.entry(label).or_default().add(c);
        }
    }
    if let Some(unknown) = totals.keys().find(|l| tagset.class_id(l).is_none()) {
        return Err(Error::UnknownClass(unknown.clone()));
    }
    Ok(report_from_counts(tagset, &totals))
}

pub fn report_from_counts(tagset: &TagSet, totals: &BTreeMap<String, Counts>) -> Report {
    let per_class: Vec<ClassMetrics> = tagset
        .classes()
        .iter()
        .map(|c| ClassMetrics::from_counts(c.clone(), totals.get(c).copied().unwrap_or_default()))
        .collect();
    let mut pooled = Counts::default();
    per_class.iter().for_each(|m| pooled.add(Counts { tp: m.tp, fp: m.fp, fn_: m.fn_ }));
    let micro_precision = ratio(pooled.tp, pooled.tp + pooled.fp);
    let micro_recall = ratio(pooled.tp, pooled.tp + pooled.fn_);
    let macro_f1 =
        if per_class.is_empty() { 0.0 } else { per_class.iter().map(|m| m.f1).sum::<f64>() / per_class.len() as f64 };
    let support: usize = per_class.iter().map(|m| m.support).sum();
    let weighted_f1 = if support == 0 {
        0.0
    } else {
        per_class.iter().map(|m| m.f1 * m.support as f64).sum::<f64>() / support as f64
    };
    Report {
        per_class,
        micro_precision,
        micro_recall,
        micro_f1: harmonic(micro_precision, micro_recall),
        macro_f1,
        weighted_f1,
    }
}

impl Report {
    /// Plain-text table: one row per class, then the aggregate footer.
    pub fn to_table(&self) -> String {
        let width = self.per_class.iter().map(|m| m.label.len()).max().unwrap_or(5).max(11);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>9}  {:>9}  {:>9}  {:>7}",
            "Class", "Precision", "Recall", "F1-score", "Support"
        );
        for m in &self.per_class {
            let _ = writeln!(
                out,
                "{:<width$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>7}",
                m.label, m.precision, m.recall, m.f1, m.support
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<width$}  {:>9.4}", "Micro F1", self.micro_f1);
        let _ = writeln!(out, "{:<width$}  {:>9.4}", "Weighted F1", self.weighted_f1);
        let _ = writeln!(out, "{:<width$}  {:>9.4}", "Macro Avg", self.macro_f1);
        out
    }
}

/// Fraction of positions with identical tags, pooled over all sentences.
pub fn token_accuracy(gold: &[Vec<usize>], pred: &[Vec<usize>]) -> Result<f64> {
    if gold.len() != pred.len() {
        return Err(Error::shape("sentence count", gold.len(), pred.len()));
    }
    let mut total = 0;
    let mut correct = 0;
    for (i, (g, p)) in gold.iter().zip(pred).enumerate() {
        if g.len() != p.len() {
            return Err(Error::shape("sentence length", format!("{} (sentence {i})", g.len()), p.len()));
        }
        total += g.len();
        correct += g.iter().zip(p).filter(|(a, b)| a == b).count();
    }
    if total == 0 {
        return Err(Error::Empty("token accuracy over an empty dataset"));
    }
    Ok(correct as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn span(l: &str, s: usize, e: usize) -> EntitySpan {
        EntitySpan::new(l, s, e)
    }

    #[test]
    fn exact_match() {
        let c = match_spans(&[span("COURT", 1, 5)], &[span("COURT", 1, 5)], MatchMode::Strict);
        assert_eq!(c["COURT"], Counts { tp: 1, fp: 0, fn_: 0 });
    }

    #[test]
    fn boundary_error_counts_twice() {
        let c = match_spans(&[span("COURT", 1, 5)], &[span("COURT", 1, 4)], MatchMode::Strict);
        assert_eq!(c["COURT"], Counts { tp: 0, fp: 1, fn_: 1 });
        let c = match_spans(&[span("COURT", 1, 5)], &[span("COURT", 1, 4)], MatchMode::Relaxed);
        assert_eq!(c["COURT"], Counts { tp: 1, fp: 0, fn_: 0 });
    }

    #[test]
    fn label_error() {
        let gold = [span("DATE", 0, 1), span("COURT", 2, 4)];
        let pred = [span("DATE", 0, 1), span("JUDGE", 2, 4)];
        let c = match_spans(&gold, &pred, MatchMode::Strict);
        assert_eq!(c["DATE"], Counts { tp: 1, fp: 0, fn_: 0 });
        assert_eq!(c["COURT"], Counts { tp: 0, fp: 0, fn_: 1 });
        assert_eq!(c["JUDGE"], Counts { tp: 0, fp: 1, fn_: 0 });
    }

    #[test]
    fn duplicate_prediction_matches_once() {
        let c = match_spans(&[span("ORG", 0, 2)], &[span("ORG", 0, 2), span("ORG", 0, 2)], MatchMode::Strict);
        assert_eq!(c["ORG"], Counts { tp: 1, fp: 1, fn_: 0 });
    }

    #[test]
    fn perfect_report() {
        let ts = TagSet::legal();
        let gold = vec![span("COURT", 0, 2), span("DATE", 3, 4)];
        let r = classification_report(&[(gold.clone(), gold)], &ts, MatchMode::Strict).unwrap();
        assert_eq!(r.per_class.len(), 14);
        assert_eq!((r.micro_f1, r.weighted_f1), (1.0, 1.0));
        let court = &r.per_class[0];
        assert_eq!((court.precision, court.recall, court.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn empty_predictions_zero_convention() {
        let ts = TagSet::legal();
        let r = classification_report(&[(vec![span("COURT", 0, 2)], vec![])], &ts, MatchMode::Strict).unwrap();
        for m in &r.per_class {
            assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        }
        assert_eq!((r.micro_f1, r.macro_f1, r.weighted_f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn unknown_class_named() {
        let e = classification_report(&[(vec![], vec![span("FOO", 0, 1)])], &TagSet::legal(), MatchMode::Strict)
            .unwrap_err();
        assert!(e.to_string().contains("FOO"));
    }

    #[test]
    fn token_accuracy_cases() {
        assert_eq!(token_accuracy(&[vec![1, 2, 0]], &[vec![1, 2, 0]]).unwrap(), 1.0);
        let gold = vec![vec![0, 1, 2, 2, 0, 0, 0, 0, 0, 0]];
        assert!((token_accuracy(&gold, &[vec![0; 10]]).unwrap() - 0.7).abs() < 1e-15);
        assert!(token_accuracy(&[], &[]).is_err());
        assert!(token_accuracy(&[vec![0]], &[vec![0, 0]]).is_err());
    }

    #[test]
    fn table_lists_footer() {
        let r = classification_report(&[], &TagSet::legal(), MatchMode::Strict).unwrap();
        let t = r.to_table();
        assert!(t.contains("LAWYER"));
        assert!(t.contains("Micro F1"));
        assert!(t.contains("Macro Avg"));
    }
}
