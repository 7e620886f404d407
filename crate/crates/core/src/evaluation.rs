//! Binary classification metrics and error-analysis reports.
//!
//! The positive class for ROC analysis is [`Label::NonIdiomatic`], matching
//! the `p_nonidiomatic` scores exchanged at the model boundary. Any 0/0
//! precision, recall or F1 is defined as 0.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;
use crate::locality::{Feature, LocalityVector};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("gold has {gold} labels but predictions have {pred}")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error("only one class present in gold labels")]
    SingleClass,
    #[error("score {0} is not a finite number")]
    NonFiniteScore(String),
    #[error("no feature vector for sample {0:?}")]
    MissingVector(String),
    #[error("no prediction for sample {0:?}")]
    MissingPrediction(String),
}

/// Counts indexed `[gold][pred]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 2]; 2],
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[u64; 2]; 2]) -> Self {
        ConfusionMatrix { counts }
    }

    pub fn add(&mut self, gold: Label, pred: Label) {
        self.counts[gold.index()][pred.index()] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        self.counts[0][0] + self.counts[1][1]
    }

    pub fn transpose_labels(&self) -> Self {
        let c = self.counts;
        ConfusionMatrix {
            counts: [[c[1][1], c[1][0]], [c[0][1], c[0][0]]],
        }
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.counts;
        let w = c.iter().flatten().map(|n| n.to_string().len()).max().unwrap_or(1).max(6);
        writeln!(f, "{:<24} {:>w$} {:>w$}", "", "Pred 0", "Pred 1")?;
        writeln!(f, "{:<24} {:>w$} {:>w$}", "Label 0 (Idiomatic)", c[0][0], c[0][1])?;
        write!(f, "{:<24} {:>w$} {:>w$}", "Label 1 (Non-idiomatic)", c[1][0], c[1][1])
    }
}

pub fn confusion(gold: &[Label], pred: &[Label]) -> Result<ConfusionMatrix, EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    if gold.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut m = ConfusionMatrix::default();
    for (&g, &p) in gold.iter().zip(pred) {
        m.add(g, p);
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F1Report {
    /// Indexed by [`Label::index`].
    pub per_class: [ClassScores; 2],
    pub macro_f1: f64,
    pub micro_f1: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum F1Average {
    #[default]
    Macro,
    Micro,
}

impl F1Report {
    pub fn score(&self, average: F1Average) -> f64 {
        match average {
            F1Average::Macro => self.macro_f1,
            F1Average::Micro => self.micro_f1,
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn f1_scores(matrix: &ConfusionMatrix) -> Result<F1Report, EvalError> {
    let total = matrix.total();
    if total == 0 {
        return Err(EvalError::Empty);
    }
    let c = matrix.counts;
    let class = |k: usize| {
        let tp = c[k][k];
        let predicted = c[0][k] + c[1][k];
        let actual = c[k][0] + c[k][1];
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, actual);
        let f1 = ratio(2 * tp, predicted + actual);
        ClassScores {
            precision,
            recall,
            f1,
            support: actual,
        }
    };
    let per_class = [class(0), class(1)];
    Ok(F1Report {
        per_class,
        macro_f1: (per_class[0].f1 + per_class[1].f1) / 2.0,
        micro_f1: ratio(matrix.trace(), total),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureF1Row {
    pub feature: Feature,
    pub count: u64,
    /// Micro F1 on the subset, as a percentage.
    pub micro_f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureF1Table {
    pub rows: Vec<FeatureF1Row>,
    /// Features that fired on no evaluated sample.
    pub omitted: Vec<Feature>,
}

impl fmt::Display for FeatureF1Table {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<20} {:>8}", "Feature", "Micro F1")?;
        for row in &self.rows {
            let name = format!("{} ({})", row.feature.name(), row.count);
            writeln!(f, "{:<20} {:>8.1}", name, row.micro_f1)?;
        }
        if !self.omitted.is_empty() {
            let names: Vec<_> = self.omitted.iter().map(|f| f.name()).collect();
            writeln!(f, "no samples: {}", names.join(", "))?;
        }
        Ok(())
    }
}

/// Micro F1 restricted to the samples on which each feature fires.
/// Rows are ordered by subset size, largest first.
pub fn per_feature_f1(
    gold: &BTreeMap<String, Label>,
    pred: &BTreeMap<String, Label>,
    vectors: &BTreeMap<String, LocalityVector>,
) -> Result<FeatureF1Table, EvalError> {
    let mut matrices = [ConfusionMatrix::default(); 6];
    for (id, &g) in gold {
        let p = *pred.get(id).ok_or_else(|| EvalError::MissingPrediction(id.clone()))?;
        let v = vectors.get(id).ok_or_else(|| EvalError::MissingVector(id.clone()))?;
        for f in Feature::ALL {
            if v.get(f) {
                matrices[f.slot()].add(g, p);
            }
        }
    }
    let mut rows = Vec::new();
    let mut omitted = Vec::new();
    for f in Feature::ALL {
        let m = &matrices[f.slot()];
        match f1_scores(m) {
            Ok(report) => rows.push(FeatureF1Row {
                feature: f,
                count: m.total(),
                micro_f1: report.micro_f1 * 100.0,
            }),
            Err(_) => omitted.push(f),
        }
    }
    rows.sort_by(|a, b| b.count.cmp(&a.count).then(a.feature.cmp(&b.feature)));
    Ok(FeatureF1Table { rows, omitted })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    /// Samples scoring at or above this threshold are predicted positive.
    pub threshold: f64,
    pub false_positive_rate: f64,
    pub true_positive_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

impl RocCurve {
    /// CSV with columns threshold,fpr,tpr. The first threshold is `inf`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["threshold", "fpr", "tpr"])?;
        for p in &self.points {
            w.write_record([
                p.threshold.to_string(),
                p.false_positive_rate.to_string(),
                p.true_positive_rate.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Trapezoidal area under the curve points.
    pub fn trapezoid_area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| {
                (w[1].false_positive_rate - w[0].false_positive_rate)
                    * (w[1].true_positive_rate + w[0].true_positive_rate)
                    / 2.0
            })
            .sum()
    }
}

/// ROC curve over every distinct score, with AUC as the probability that a
/// random positive outscores a random negative (ties count one half).
pub fn roc_auc(gold: &[Label], scores: &[f64]) -> Result<RocCurve, EvalError> {
    if gold.len() != scores.len() {
        return Err(EvalError::LengthMismatch {
            gold: gold.len(),
            pred: scores.len(),
        });
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(EvalError::NonFiniteScore(bad.to_string()));
    }
    let positives = gold.iter().filter(|&&l| l == Label::NonIdiomatic).count() as u64;
    let negatives = gold.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(EvalError::SingleClass);
    }

    let mut ranked: Vec<(f64, Label)> = scores.iter().copied().zip(gold.iter().copied()).collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        false_positive_rate: 0.0,
        true_positive_rate: 0.0,
    }];
    // Twice the Mann-Whitney count, kept integral so the result is exact.
    let mut twice_wins: u64 = 0;
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < ranked.len() {
        let threshold = ranked[i].0;
        let (mut group_pos, mut group_neg) = (0u64, 0u64);
        while i < ranked.len() && ranked[i].0 == threshold {
            match ranked[i].1 {
                Label::NonIdiomatic => group_pos += 1,
                Label::Idiomatic => group_neg += 1,
            }
            i += 1;
        }
        // Positives in this group beat every negative not yet seen (below),
        // and tie with the negatives in the group.
        let negatives_below = negatives - fp - group_neg;
        twice_wins += 2 * group_pos * negatives_below + group_pos * group_neg;
        tp += group_pos;
        fp += group_neg;
        points.push(RocPoint {
            threshold,
            false_positive_rate: fp as f64 / negatives as f64,
            true_positive_rate: tp as f64 / positives as f64,
        });
    }
    let auc = twice_wins as f64 / (2 * positives * negatives) as f64;
    Ok(RocCurve { points, auc })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub tag: String,
    pub seed: u64,
    pub best_f1: f64,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRow {
    pub tag: String,
    pub attempts: usize,
    pub successes: usize,
}

impl StabilityRow {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.attempts as f64
    }

    /// Success percentage with one decimal, e.g. `55.6%`.
    pub fn rendered(&self) -> String {
        format!("{:.1}%", 100.0 * self.success_rate())
    }
}

/// Success percentage per model tag, tags in first-seen order.
pub fn stability_report(runs: &[RunSummary]) -> Vec<StabilityRow> {
    let mut rows: Vec<StabilityRow> = Vec::new();
    for run in runs {
        let row = match rows.iter_mut().find(|r| r.tag == run.tag) {
            Some(r) => r,
            None => {
                rows.push(StabilityRow {
                    tag: run.tag.clone(),
                    attempts: 0,
                    successes: 0,
                });
                rows.last_mut().expect("just pushed")
            }
        };
        row.attempts += 1;
        row.successes += usize::from(!run.failed);
    }
    rows
}

pub fn render_stability(rows: &[StabilityRow]) -> String {
    let width = rows.iter().map(|r| r.tag.len()).max().unwrap_or(5).max(5);
    let mut out = format!("{:<width$} | {:>8} | {:>7}\n", "Model", "Attempts", "Success");
    for r in rows {
        out.push_str(&format!("{:<width$} | {:>8} | {:>7}\n", r.tag, r.attempts, r.rendered()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(bits: &[u8]) -> Vec<Label> {
        bits.iter().map(|&b| Label::from_index(b as usize).unwrap()).collect()
    }

    fn matrix_from(gold0pred0: u64, gold0pred1: u64, gold1pred0: u64, gold1pred1: u64) -> ConfusionMatrix {
        ConfusionMatrix::from_counts([[gold0pred0, gold0pred1], [gold1pred0, gold1pred1]])
    }

    #[test]
    fn entity_matrices_and_recall_drop() {
        let mut gold = vec![0u8; 14];
        gold.extend(vec![1u8; 117]);
        let mut pred = vec![0u8; 5];
        pred.extend(vec![1u8; 9 + 117]);
        let m = confusion(&labels(&gold), &labels(&pred)).unwrap();
        assert_eq!(m.counts, [[5, 9], [0, 117]]);

        let before = f1_scores(&m).unwrap().per_class[0].recall;
        let after = f1_scores(&matrix_from(2, 12, 0, 117)).unwrap().per_class[0].recall;
        assert!((before - 0.357).abs() < 1e-3);
        assert!((after - 0.143).abs() < 1e-3);
        assert!((before - after - 0.214).abs() < 1e-3);
    }

    #[test]
    fn perfect_and_balanced_matrices() {
        let g = labels(&[0, 1, 1, 0, 1]);
        let m = confusion(&g, &g).unwrap();
        assert_eq!(m.counts[0][1] + m.counts[1][0], 0);
        let r = f1_scores(&m).unwrap();
        assert_eq!((r.macro_f1, r.micro_f1), (1.0, 1.0));

        let r = f1_scores(&matrix_from(1, 1, 1, 1)).unwrap();
        assert_eq!(r.per_class[0].f1, 0.5);
        assert_eq!(r.per_class[1].f1, 0.5);
        assert_eq!(r.macro_f1, 0.5);
    }

    #[test]
    fn four_hand_labeled_pairs() {
        // (0,0) (0,1) (1,1) (1,1)
        let m = confusion(&labels(&[0, 0, 1, 1]), &labels(&[0, 1, 1, 1])).unwrap();
        assert_eq!(m.counts, [[1, 1], [0, 2]]);
        let r = f1_scores(&m).unwrap();
        // class 0: p=1, r=1/2, f1=2/3; class 1: p=2/3, r=1, f1=4/5
        assert!((r.per_class[0].f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.per_class[1].f1 - 0.8).abs() < 1e-12);
        assert!((r.macro_f1 - (2.0 / 3.0 + 0.8) / 2.0).abs() < 1e-12);
        assert_eq!(r.micro_f1, 0.75);
    }

    #[test]
    fn degenerate_class_scores_are_zero() {
        let r = f1_scores(&matrix_from(0, 0, 0, 5)).unwrap();
        assert_eq!(r.per_class[0], ClassScores { precision: 0.0, recall: 0.0, f1: 0.0, support: 0 });
        assert_eq!(r.per_class[1].f1, 1.0);
        assert_eq!(r.macro_f1, 0.5);
        assert_eq!(f1_scores(&ConfusionMatrix::default()), Err(EvalError::Empty));
    }

    #[test]
    fn confusion_errors() {
        assert_eq!(
            confusion(&labels(&[0]), &labels(&[0, 1])),
            Err(EvalError::LengthMismatch { gold: 1, pred: 2 })
        );
        assert_eq!(confusion(&[], &[]), Err(EvalError::Empty));
    }

    #[test]
    fn roc_edge_cases() {
        let g = labels(&[0, 0, 1, 1]);
        let c = roc_auc(&g, &[0.1, 0.2, 0.8, 0.9]).unwrap();
        assert_eq!(c.auc, 1.0);
        let c = roc_auc(&g, &[0.5; 4]).unwrap();
        assert_eq!(c.auc, 0.5);
        assert_eq!(c.points.len(), 2);
        assert_eq!(roc_auc(&labels(&[1, 1]), &[0.1, 0.2]), Err(EvalError::SingleClass));
        assert!(matches!(roc_auc(&g, &[0.1, f64::NAN, 0.2, 0.3]), Err(EvalError::NonFiniteScore(_))));
    }

    #[test]
    fn roc_six_pairs_against_pair_count() {
        // positives: 0.9, 0.6, 0.4 ; negatives: 0.7, 0.4, 0.1
        // 0.9 beats 3; 0.6 beats 2; 0.4 beats 1 and ties 1 -> 6.5 / 9
        let g = labels(&[1, 0, 1, 1, 0, 0]);
        let s = [0.9, 0.7, 0.6, 0.4, 0.4, 0.1];
        let c = roc_auc(&g, &s).unwrap();
        assert_eq!(c.auc, 6.5 / 9.0);
        assert!((c.trapezoid_area() - c.auc).abs() < 1e-12);
        let first = c.points.first().unwrap();
        let last = c.points.last().unwrap();
        assert_eq!((first.false_positive_rate, first.true_positive_rate), (0.0, 0.0));
        assert_eq!((last.false_positive_rate, last.true_positive_rate), (1.0, 1.0));
        let mut out = Vec::new();
        c.write_csv(&mut out).unwrap();
        assert!(String::from_utf8(out).unwrap().starts_with("threshold,fpr,tpr\ninf,0,0\n0.9,0,"));
    }

    #[test]
    fn per_feature_subsets() {
        let ids = ["a", "b", "c"];
        let gold: BTreeMap<String, Label> = ids.iter().zip(labels(&[0, 1, 1])).map(|(i, l)| (i.to_string(), l)).collect();
        let mut pred = gold.clone();
        pred.insert("c".into(), Label::Idiomatic);
        let vectors: BTreeMap<String, LocalityVector> = [
            ("a", LocalityVector { be_a: true, ..Default::default() }),
            ("b", LocalityVector::default()),
            ("c", LocalityVector { capitalized: true, the_star: true, ..Default::default() }),
        ]
        .into_iter()
        .map(|(i, v)| (i.to_string(), v))
        .collect();
        let t = per_feature_f1(&gold, &pred, &vectors).unwrap();
        let be_a = t.rows.iter().find(|r| r.feature == Feature::BeA).unwrap();
        assert_eq!((be_a.count, be_a.micro_f1), (1, 100.0));
        let cap = t.rows.iter().find(|r| r.feature == Feature::Capitalized).unwrap();
        assert_eq!((cap.count, cap.micro_f1), (1, 0.0));
        assert_eq!(t.omitted, vec![Feature::Entity, Feature::Quotation, Feature::Parenthesis]);
        assert!(t.to_string().contains("no samples: Entity, Quotation, Parenthesis"));

        let t = per_feature_f1(&gold, &gold, &vectors).unwrap();
        assert!(t.rows.iter().all(|r| r.micro_f1 == 100.0));

        let mut missing = vectors.clone();
        missing.remove("b");
        assert_eq!(per_feature_f1(&gold, &gold, &missing), Err(EvalError::MissingVector("b".into())));
    }

    fn runs(tag: &str, successes: usize, attempts: usize) -> Vec<RunSummary> {
        (0..attempts)
            .map(|i| RunSummary { tag: tag.into(), seed: i as u64, best_f1: 0.9, failed: i >= successes })
            .collect()
    }

    #[test]
    fn stability_percentages() {
        let mut all = runs("XLM-R", 5, 9);
        all.extend(runs("XLM-R-EngNER", 9, 9));
        all.extend(runs("XLM-R-GermanNER", 8, 9));
        all.extend(runs("five-of-nine-failed", 4, 9));
        let rendered: Vec<_> = stability_report(&all).iter().map(|r| (r.tag.clone(), r.rendered())).collect();
        assert_eq!(
            rendered,
            vec![
                ("XLM-R".to_string(), "55.6%".to_string()),
                ("XLM-R-EngNER".to_string(), "100.0%".to_string()),
                ("XLM-R-GermanNER".to_string(), "88.9%".to_string()),
                ("five-of-nine-failed".to_string(), "44.4%".to_string()),
            ]
        );
    }

    proptest! {
        #[test]
        fn label_swap_transposes(pairs in prop::collection::vec((0u8..2, 0u8..2), 1..50)) {
            let g: Vec<Label> = pairs.iter().map(|p| Label::from_index(p.0 as usize).unwrap()).collect();
            let p: Vec<Label> = pairs.iter().map(|p| Label::from_index(p.1 as usize).unwrap()).collect();
            let m = confusion(&g, &p).unwrap();
            let gs: Vec<Label> = g.iter().map(|l| l.flip()).collect();
            let ps: Vec<Label> = p.iter().map(|l| l.flip()).collect();
            prop_assert_eq!(confusion(&gs, &ps).unwrap(), m.transpose_labels());
            prop_assert_eq!(m.total(), pairs.len() as u64);
            let r = f1_scores(&m).unwrap();
            prop_assert_eq!(r.micro_f1, m.trace() as f64 / m.total() as f64);

            let mut rev_g = g.clone();
            let mut rev_p = p.clone();
            rev_g.reverse();
            rev_p.reverse();
            prop_assert_eq!(f1_scores(&confusion(&rev_g, &rev_p).unwrap()).unwrap(), r);
        }

        #[test]
        fn roc_points_are_monotone(pairs in prop::collection::vec((0u8..2, 0u8..10), 2..60)) {
            let g: Vec<Label> = pairs.iter().map(|p| Label::from_index(p.0 as usize).unwrap()).collect();
            prop_assume!(g.contains(&Label::Idiomatic) && g.contains(&Label::NonIdiomatic));
            let s: Vec<f64> = pairs.iter().map(|p| p.1 as f64 / 10.0).collect();
            let c = roc_auc(&g, &s).unwrap();
            for w in c.points.windows(2) {
                prop_assert!(w[0].false_positive_rate <= w[1].false_positive_rate);
                prop_assert!(w[0].true_positive_rate <= w[1].true_positive_rate);
                prop_assert!(w[0].threshold > w[1].threshold);
            }
            let last = c.points.last().unwrap();
            prop_assert_eq!((last.false_positive_rate, last.true_positive_rate), (1.0, 1.0));
            prop_assert!((c.trapezoid_area() - c.auc).abs() < 1e-9);
        }
    }
}
