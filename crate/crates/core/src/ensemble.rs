//! Checkpoint selection and score combination.
//!
//! Score records cross the model boundary as JSON-lines; checkpoint
//! metadata is a JSON array. Combined labels are decided with exact
//! arithmetic so that reordering records can never flip a prediction.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, Read, Write};
use std::str::FromStr;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Label, Language, Split};
use crate::locality::LocalityVector;

pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub sample_id: String,
    pub model_id: String,
    pub p_nonidiomatic: f64,
    pub language: Language,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub model_id: String,
    pub language_target: Language,
    pub validation_f1: f64,
    #[serde(default)]
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    MajorityVote,
    MeanScore,
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vote" | "majority" | "majority_vote" => Ok(Strategy::MajorityVote),
            "mean" | "mean_score" => Ok(Strategy::MeanScore),
            other => Err(format!("unknown combination strategy {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: Label,
    /// Mean `p_nonidiomatic` over the group.
    pub score: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum EnsembleError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("{language} needs {k} checkpoints but only {available} target {routed}")]
    NotEnoughCheckpoints {
        language: Language,
        routed: Language,
        k: usize,
        available: usize,
    },
    #[error("sample {0:?} has no score records")]
    EmptyGroup(String),
    #[error("records for sample {sample_id:?} mix splits {first} and {second}")]
    MixedSplit { sample_id: String, first: Split, second: Split },
    #[error("line {line}: {message}")]
    BadRecord { line: usize, message: String },
    #[error("line {line}: duplicate record for sample {sample_id:?} model {model_id:?}")]
    DuplicateRecord { line: usize, sample_id: String, model_id: String },
    #[error("sample ids differ between predictions and gold: {0:?}")]
    IdMismatch(Vec<String>),
    #[error("gold sample {0:?} has no label")]
    MissingLabel(String),
    #[error("{0}")]
    Io(String),
}

impl From<std::io::Error> for EnsembleError {
    fn from(e: std::io::Error) -> Self {
        EnsembleError::Io(e.to_string())
    }
}

/// Galician has no checkpoints of its own and is served by Portuguese ones.
pub fn route_language(language: Language) -> Language {
    match language {
        Language::Gl => Language::Pt,
        other => other,
    }
}

/// The `k` checkpoints for `language` with the best validation F1. Ties go
/// to the lexicographically smaller model id.
pub fn select_topk(metas: &[CheckpointMeta], k: usize, language: Language) -> Result<Vec<String>, EnsembleError> {
    if k == 0 {
        return Err(EnsembleError::ZeroK);
    }
    let routed = route_language(language);
    let mut pool: Vec<&CheckpointMeta> = metas.iter().filter(|m| m.language_target == routed).collect();
    if pool.len() < k {
        return Err(EnsembleError::NotEnoughCheckpoints {
            language,
            routed,
            k,
            available: pool.len(),
        });
    }
    pool.sort_by(|a, b| {
        b.validation_f1
            .total_cmp(&a.validation_f1)
            .then_with(|| a.model_id.cmp(&b.model_id))
    });
    Ok(pool.into_iter().take(k).map(|m| m.model_id.clone()).collect())
}

/// Exact value of a finite double as `mantissa * 2^exponent`, rescaled to a
/// common exponent so sums are exact.
fn exact_scaled(value: f64) -> BigInt {
    const MIN_EXP: i32 = -1074;
    let bits = value.to_bits();
    let sign = if bits >> 63 == 1 { -1 } else { 1 };
    let exp_bits = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    let (mantissa, exp) = if exp_bits == 0 {
        (frac, MIN_EXP)
    } else {
        (frac | (1u64 << 52), exp_bits - 1075)
    };
    BigInt::from(sign) * (BigInt::from(mantissa) << (exp - MIN_EXP) as usize)
}

/// True iff the exact mean of `scores` is at least 0.5.
fn mean_at_least_half(scores: &[f64]) -> bool {
    let sum: BigInt = scores.iter().map(|&s| exact_scaled(s)).sum();
    let half_n = exact_scaled(DECISION_THRESHOLD) * BigInt::from(scores.len());
    sum >= half_n
}

/// Mean in a fixed (sorted) order so the reported score ignores record order.
fn sorted_mean(scores: &[f64]) -> f64 {
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.iter().sum::<f64>() / sorted.len() as f64
}

fn label_of(at_least_half: bool) -> Label {
    if at_least_half {
        Label::NonIdiomatic
    } else {
        Label::Idiomatic
    }
}

pub fn combine_group(scores: &[f64], strategy: Strategy) -> Option<Prediction> {
    if scores.is_empty() {
        return None;
    }
    let mean_label = || label_of(mean_at_least_half(scores));
    let label = match strategy {
        Strategy::MeanScore => mean_label(),
        Strategy::MajorityVote => {
            let votes = scores.iter().filter(|&&s| s >= DECISION_THRESHOLD).count();
            match (2 * votes).cmp(&scores.len()) {
                std::cmp::Ordering::Greater => Label::NonIdiomatic,
                std::cmp::Ordering::Less => Label::Idiomatic,
                std::cmp::Ordering::Equal => mean_label(),
            }
        }
    };
    Some(Prediction {
        label,
        score: sorted_mean(scores),
    })
}

pub fn group_by_sample(records: &[ScoreRecord]) -> BTreeMap<String, Vec<&ScoreRecord>> {
    let mut groups: BTreeMap<String, Vec<&ScoreRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.sample_id.clone()).or_default().push(r);
    }
    groups
}

pub fn combine(
    groups: &BTreeMap<String, Vec<&ScoreRecord>>,
    strategy: Strategy,
) -> Result<BTreeMap<String, Prediction>, EnsembleError> {
    let mut out = BTreeMap::new();
    for (sample_id, records) in groups {
        let first = records.first().ok_or_else(|| EnsembleError::EmptyGroup(sample_id.clone()))?;
        if let Some(other) = records.iter().find(|r| r.split != first.split) {
            return Err(EnsembleError::MixedSplit {
                sample_id: sample_id.clone(),
                first: first.split,
                second: other.split,
            });
        }
        let scores: Vec<f64> = records.iter().map(|r| r.p_nonidiomatic).collect();
        let prediction = combine_group(&scores, strategy).ok_or_else(|| EnsembleError::EmptyGroup(sample_id.clone()))?;
        out.insert(sample_id.clone(), prediction);
    }
    Ok(out)
}

/// Selects the top `k` checkpoints per language (with Galician routed to
/// Portuguese models) and combines only their records.
pub fn combine_topk(
    records: &[ScoreRecord],
    metas: &[CheckpointMeta],
    k: usize,
    strategy: Strategy,
) -> Result<BTreeMap<String, Prediction>, EnsembleError> {
    let languages: BTreeSet<Language> = records.iter().map(|r| r.language).collect();
    let mut chosen: BTreeMap<Language, HashSet<String>> = BTreeMap::new();
    for lang in languages {
        chosen.insert(lang, select_topk(metas, k, lang)?.into_iter().collect());
    }
    let kept: Vec<ScoreRecord> = records
        .iter()
        .filter(|r| chosen[&r.language].contains(&r.model_id))
        .cloned()
        .collect();
    let all_ids: BTreeSet<&str> = records.iter().map(|r| r.sample_id.as_str()).collect();
    let groups = group_by_sample(&kept);
    if let Some(missing) = all_ids.iter().find(|id| !groups.contains_key(**id)) {
        return Err(EnsembleError::EmptyGroup(missing.to_string()));
    }
    combine(&groups, strategy)
}

pub fn read_scores_jsonl<R: BufRead>(reader: R) -> Result<Vec<ScoreRecord>, EnsembleError> {
    let mut out = Vec::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ScoreRecord = serde_json::from_str(&line).map_err(|e| EnsembleError::BadRecord {
            line: i + 1,
            message: e.to_string(),
        })?;
        if !(0.0..=1.0).contains(&rec.p_nonidiomatic) {
            return Err(EnsembleError::BadRecord {
                line: i + 1,
                message: format!("p_nonidiomatic {} outside [0, 1]", rec.p_nonidiomatic),
            });
        }
        if !seen.insert((rec.sample_id.clone(), rec.model_id.clone())) {
            return Err(EnsembleError::DuplicateRecord {
                line: i + 1,
                sample_id: rec.sample_id,
                model_id: rec.model_id,
            });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn write_scores_jsonl<W: Write>(mut writer: W, records: &[ScoreRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_checkpoint_metas<R: Read>(reader: R) -> Result<Vec<CheckpointMeta>, EnsembleError> {
    let metas: Vec<CheckpointMeta> = serde_json::from_reader(reader).map_err(|e| EnsembleError::BadRecord {
        line: e.line(),
        message: e.to_string(),
    })?;
    let mut ids = HashSet::new();
    for m in &metas {
        if !(0.0..=1.0).contains(&m.validation_f1) {
            return Err(EnsembleError::BadRecord {
                line: 0,
                message: format!("{}: validation_f1 {} outside [0, 1]", m.model_id, m.validation_f1),
            });
        }
        if !ids.insert(m.model_id.as_str()) {
            return Err(EnsembleError::BadRecord {
                line: 0,
                message: format!("duplicate model_id {:?}", m.model_id),
            });
        }
    }
    Ok(metas)
}

pub fn write_checkpoint_metas<W: Write>(writer: W, metas: &[CheckpointMeta]) -> std::io::Result<()> {
    serde_json::to_writer_pretty(writer, metas).map_err(std::io::Error::other)
}

/// One line of a combined-prediction file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub sample_id: String,
    pub label: Label,
    pub score: f64,
}

pub fn write_predictions_jsonl<W: Write>(mut writer: W, predictions: &BTreeMap<String, Prediction>) -> std::io::Result<()> {
    for (id, p) in predictions {
        let rec = PredictionRecord {
            sample_id: id.clone(),
            label: p.label,
            score: p.score,
        };
        serde_json::to_writer(&mut writer, &rec)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_predictions_jsonl<R: BufRead>(reader: R) -> Result<BTreeMap<String, Prediction>, EnsembleError> {
    let mut out = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PredictionRecord = serde_json::from_str(&line).map_err(|e| EnsembleError::BadRecord {
            line: i + 1,
            message: e.to_string(),
        })?;
        if out
            .insert(rec.sample_id.clone(), Prediction { label: rec.label, score: rec.score })
            .is_some()
        {
            return Err(EnsembleError::BadRecord {
                line: i + 1,
                message: format!("duplicate sample_id {:?}", rec.sample_id),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffEntry {
    pub sample_id: String,
    pub mwe: String,
    pub target: String,
    pub gold: Label,
    pub vector: Option<LocalityVector>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiffReport {
    /// Wrong in `a`, right in `b`.
    pub improvements: Vec<DiffEntry>,
    /// Right in `a`, wrong in `b`.
    pub regressions: Vec<DiffEntry>,
}

impl DiffReport {
    pub fn improved_ids(&self) -> BTreeSet<String> {
        self.improvements.iter().map(|e| e.sample_id.clone()).collect()
    }
}

fn feature_names(v: &LocalityVector) -> String {
    let names: Vec<&str> = crate::locality::Feature::ALL
        .into_iter()
        .filter(|f| v.get(*f))
        .map(|f| f.name())
        .collect();
    if names.is_empty() {
        "-".to_string()
    } else {
        names.join(", ")
    }
}

impl fmt::Display for DiffReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (title, entries) in [("Improvements", &self.improvements), ("Regressions", &self.regressions)] {
            writeln!(f, "{title} ({})", entries.len())?;
            for e in entries {
                let feats = e.vector.as_ref().map(feature_names).unwrap_or_else(|| "-".into());
                writeln!(f, "  {} | {} | {} | gold {} | {}", e.sample_id, e.mwe, e.target, e.gold.index(), feats)?;
            }
        }
        Ok(())
    }
}

/// Samples where `a` and `b` disagree on correctness against `gold`.
pub fn diff_predictions(
    a: &BTreeMap<String, Prediction>,
    b: &BTreeMap<String, Prediction>,
    gold: &Corpus,
    vectors: Option<&BTreeMap<String, LocalityVector>>,
) -> Result<DiffReport, EnsembleError> {
    let gold_ids: BTreeSet<&str> = gold.iter().map(|s| s.id.as_str()).collect();
    let a_ids: BTreeSet<&str> = a.keys().map(String::as_str).collect();
    let b_ids: BTreeSet<&str> = b.keys().map(String::as_str).collect();
    if a_ids != gold_ids || b_ids != gold_ids {
        let mismatched: BTreeSet<&str> = gold_ids
            .symmetric_difference(&a_ids)
            .chain(gold_ids.symmetric_difference(&b_ids))
            .copied()
            .collect();
        return Err(EnsembleError::IdMismatch(mismatched.into_iter().map(String::from).collect()));
    }
    let mut report = DiffReport::default();
    for sample in gold {
        let g = sample.label.ok_or_else(|| EnsembleError::MissingLabel(sample.id.clone()))?;
        let a_right = a[&sample.id].label == g;
        let b_right = b[&sample.id].label == g;
        if a_right == b_right {
            continue;
        }
        let entry = DiffEntry {
            sample_id: sample.id.clone(),
            mwe: sample.mwe.clone(),
            target: sample.target.clone(),
            gold: g,
            vector: vectors.and_then(|v| v.get(&sample.id).copied()),
        };
        if b_right {
            report.improvements.push(entry);
        } else {
            report.regressions.push(entry);
        }
    }
    Ok(report)
}

/// Improvements present in every report.
pub fn shared_improvements(reports: &[DiffReport]) -> BTreeSet<String> {
    let mut iter = reports.iter().map(DiffReport::improved_ids);
    let first = iter.next().unwrap_or_default();
    iter.fold(first, |acc, ids| acc.intersection(&ids).cloned().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Provenance, Sample};
    use proptest::prelude::{any, prop, prop_assert, prop_assert_eq, prop_oneof, proptest, Strategy as PropStrategy};

    fn meta(id: &str, lang: Language, f1: f64) -> CheckpointMeta {
        CheckpointMeta { model_id: id.into(), language_target: lang, validation_f1: f1, tags: vec![] }
    }

    fn record(sample: &str, model: &str, p: f64) -> ScoreRecord {
        ScoreRecord {
            sample_id: sample.into(),
            model_id: model.into(),
            p_nonidiomatic: p,
            language: Language::En,
            split: Split::Validation,
        }
    }

    #[test]
    fn topk_by_f1_with_ties_and_routing() {
        let metas = vec![meta("a", Language::En, 0.93), meta("b", Language::En, 0.91), meta("c", Language::En, 0.95)];
        assert_eq!(select_topk(&metas, 2, Language::En).unwrap(), vec!["c", "a"]);
        assert_eq!(select_topk(&metas, 3, Language::En).unwrap().len(), 3);

        let tied = vec![meta("z", Language::En, 0.94), meta("m", Language::En, 0.94)];
        assert_eq!(select_topk(&tied, 1, Language::En).unwrap(), vec!["m"]);

        let mixed = vec![meta("pt1", Language::Pt, 0.8), meta("en1", Language::En, 0.99)];
        assert_eq!(select_topk(&mixed, 1, Language::Gl).unwrap(), vec!["pt1"]);
        assert!(matches!(
            select_topk(&mixed, 2, Language::Gl),
            Err(EnsembleError::NotEnoughCheckpoints { routed: Language::Pt, available: 1, .. })
        ));
        assert_eq!(select_topk(&mixed, 0, Language::En), Err(EnsembleError::ZeroK));
    }

    #[test]
    fn combination_rules() {
        let vote = combine_group(&[0.9, 0.8, 0.1], Strategy::MajorityVote).unwrap();
        assert_eq!(vote.label, Label::NonIdiomatic);
        let mean = combine_group(&[0.2, 0.4, 0.9], Strategy::MeanScore).unwrap();
        assert_eq!(mean.label, Label::NonIdiomatic);
        assert!((mean.score - 0.5).abs() < 1e-12);
        // 1-1 tie falls back to the mean rule
        assert_eq!(combine_group(&[0.9, 0.3], Strategy::MajorityVote).unwrap().label, Label::NonIdiomatic);
        assert_eq!(combine_group(&[0.6, 0.1], Strategy::MajorityVote).unwrap().label, Label::Idiomatic);
        for p in [0.0, 0.49, 0.5, 0.51, 1.0] {
            for s in [Strategy::MeanScore, Strategy::MajorityVote] {
                assert_eq!(combine_group(&[p], s).unwrap().label, label_of(p >= 0.5));
            }
        }
        assert_eq!(combine_group(&[], Strategy::MeanScore), None);
    }

    #[test]
    fn exact_mean_decision_is_immune_to_rounding() {
        let just_below = 0.5f64.next_down();
        assert!(!mean_at_least_half(&[just_below; 3]));
        assert!(mean_at_least_half(&[0.1, 0.9]));
        assert!(mean_at_least_half(&[0.0, 1.0]));
        assert!(!mean_at_least_half(&[1.0f64.next_down(), 5e-324]));
    }

    #[test]
    fn combine_rejects_mixed_split() {
        let mut r2 = record("s", "m2", 0.4);
        r2.split = Split::Test;
        let recs = vec![record("s", "m1", 0.4), r2];
        assert!(matches!(combine(&group_by_sample(&recs), Strategy::MeanScore), Err(EnsembleError::MixedSplit { .. })));
        let mut empty = BTreeMap::new();
        empty.insert("x".to_string(), vec![]);
        assert_eq!(combine(&empty, Strategy::MeanScore), Err(EnsembleError::EmptyGroup("x".into())));
    }

    #[test]
    fn topk_combination_uses_only_selected_models() {
        let metas = vec![meta("good", Language::En, 0.95), meta("bad", Language::En, 0.40)];
        let recs = vec![record("s", "good", 0.9), record("s", "bad", 0.0)];
        let out = combine_topk(&recs, &metas, 1, Strategy::MeanScore).unwrap();
        assert_eq!(out["s"].label, Label::NonIdiomatic);
        let out = combine_topk(&recs, &metas, 2, Strategy::MeanScore).unwrap();
        assert_eq!(out["s"].label, Label::Idiomatic);
    }

    #[test]
    fn score_file_validation() {
        let good = "{\"sample_id\":\"s\",\"model_id\":\"m\",\"p_nonidiomatic\":0.25,\"language\":\"EN\",\"split\":\"validation\"}\n";
        let recs = read_scores_jsonl(good.as_bytes()).unwrap();
        assert_eq!(recs, vec![record("s", "m", 0.25)]);
        let mut buf = Vec::new();
        write_scores_jsonl(&mut buf, &recs).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), good);

        let dup = format!("{good}{good}");
        assert!(matches!(read_scores_jsonl(dup.as_bytes()), Err(EnsembleError::DuplicateRecord { line: 2, .. })));
        let out_of_range = good.replace("0.25", "1.5");
        assert!(matches!(read_scores_jsonl(out_of_range.as_bytes()), Err(EnsembleError::BadRecord { line: 1, .. })));
        let missing_field = "{\"sample_id\":\"s\",\"p_nonidiomatic\":0.25,\"language\":\"EN\",\"split\":\"validation\"}";
        assert!(read_scores_jsonl(missing_field.as_bytes()).is_err());
    }

    #[test]
    fn meta_file_validation() {
        let text = r#"[{"model_id":"a","language_target":"PT","validation_f1":0.9,"tags":["EngNER","epochs=36"]},
                       {"model_id":"b","language_target":"EN","validation_f1":0.8}]"#;
        let metas = read_checkpoint_metas(text.as_bytes()).unwrap();
        assert_eq!(metas[0].tags, vec!["EngNER", "epochs=36"]);
        assert!(metas[1].tags.is_empty());
        let bad = r#"[{"model_id":"a","language_target":"PT","validation_f1":1.2}]"#;
        assert!(read_checkpoint_metas(bad.as_bytes()).is_err());
    }

    fn gold_corpus(labels: &[u8]) -> Corpus {
        let samples = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| Sample {
                id: format!("s{}", i + 1),
                language: Language::En,
                mwe: "home run".into(),
                previous: None,
                target: "home runs".into(),
                next: None,
                label: Label::from_index(l as usize),
                split: Split::Validation,
            })
            .collect();
        Corpus::new(samples, Provenance { path: "mem".into(), mapping: Default::default() })
    }

    fn preds(labels: &[u8]) -> BTreeMap<String, Prediction> {
        labels
            .iter()
            .enumerate()
            .map(|(i, &l)| (format!("s{}", i + 1), Prediction { label: Label::from_index(l as usize).unwrap(), score: l as f64 }))
            .collect()
    }

    #[test]
    fn diff_improvements_and_regressions() {
        let gold = gold_corpus(&[0, 1, 1]);
        let perfect = preds(&[0, 1, 1]);
        let r = diff_predictions(&perfect, &preds(&[1, 0, 0]), &gold, None).unwrap();
        assert!(r.improvements.is_empty());
        assert_eq!(r.regressions.len(), 3);

        // a wrong on s1, s2; b right on s2 only
        let r = diff_predictions(&preds(&[1, 0, 1]), &preds(&[1, 1, 1]), &gold, None).unwrap();
        assert_eq!(r.improved_ids(), BTreeSet::from(["s2".to_string()]));
        assert!(r.regressions.is_empty());

        let mut short = preds(&[0, 1]);
        short.insert("zz".into(), Prediction { label: Label::Idiomatic, score: 0.0 });
        assert!(matches!(diff_predictions(&short, &perfect, &gold, None), Err(EnsembleError::IdMismatch(_))));
    }

    #[test]
    fn diff_annotates_vectors() {
        let gold = gold_corpus(&[0]);
        let mut vectors = BTreeMap::new();
        vectors.insert("s1".to_string(), LocalityVector { the_star: true, ..Default::default() });
        let r = diff_predictions(&preds(&[1]), &preds(&[0]), &gold, Some(&vectors)).unwrap();
        assert_eq!(r.improvements[0].vector, Some(vectors["s1"]));
        assert!(r.to_string().contains("The *"));
    }

    #[test]
    fn shared_improvement_count() {
        // base model wrong on all 9 samples; three variants fix 9, 7 and 8 of them
        // with exactly 6 fixed by all three.
        let gold = gold_corpus(&[0; 10]);
        let base = preds(&[1, 1, 1, 1, 1, 1, 1, 1, 1, 0]);
        let english = preds(&[0, 0, 0, 0, 0, 0, 0, 0, 0, 0]);
        let german = preds(&[0, 0, 0, 0, 0, 0, 0, 1, 1, 0]);
        let hrl = preds(&[0, 0, 0, 0, 0, 0, 1, 0, 0, 0]);
        let reports: Vec<DiffReport> = [english, german, hrl]
            .iter()
            .map(|b| diff_predictions(&base, b, &gold, None).unwrap())
            .collect();
        assert_eq!(reports[0].improvements.len(), 9);
        let shared = shared_improvements(&reports);
        assert_eq!(shared.len(), 6);
        assert_eq!(format!("{:.1}", 100.0 * shared.len() as f64 / 9.0), "66.7");
    }

    fn scores() -> impl PropStrategy<Value = Vec<f64>> {
        let p = prop_oneof![0.0f64..=1.0, prop::sample::select(vec![0.0, 0.25, 0.5, 0.75, 1.0])];
        prop::collection::vec(p, 1..12)
    }

    proptest! {
        #[test]
        fn combination_invariants(s in scores(), seed in any::<u64>(), bump in 0usize..12, delta in 0.0f64..1.0) {
            for strategy in [Strategy::MeanScore, Strategy::MajorityVote] {
                let base = combine_group(&s, strategy).unwrap();
                let mut shuffled = s.clone();
                let n = shuffled.len();
                for i in 0..n {
                    let j = (seed.wrapping_mul(i as u64 + 7) % n as u64) as usize;
                    shuffled.swap(i, j);
                }
                prop_assert_eq!(combine_group(&shuffled, strategy).unwrap(), base);
                if s.iter().all(|&p| p >= 0.5) {
                    prop_assert_eq!(base.label, Label::NonIdiomatic);
                }
                if s.iter().all(|&p| p < 0.5) {
                    prop_assert_eq!(base.label, Label::Idiomatic);
                }
            }
            let before = combine_group(&s, Strategy::MeanScore).unwrap().label;
            let mut raised = s.clone();
            let i = bump % raised.len();
            raised[i] = (raised[i] + delta).min(1.0);
            let after = combine_group(&raised, Strategy::MeanScore).unwrap().label;
            prop_assert!(!(before == Label::NonIdiomatic && after == Label::Idiomatic));
        }
    }
}
