//! Per-feature label counts over a labeled corpus.

use std::collections::BTreeMap;
use std::io::Write;

use thiserror::Error;

use crate::corpus::{Corpus, Label};
use crate::locality::{Feature, LocalityVector};

pub const ALL_ROW: &str = "All";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureStats {
    pub feature: String,
    pub total: u64,
    pub idiomatic: u64,
    pub non_idiomatic: u64,
}

impl FeatureStats {
    fn empty(name: &str) -> Self {
        FeatureStats {
            feature: name.to_string(),
            total: 0,
            idiomatic: 0,
            non_idiomatic: 0,
        }
    }

    fn add(&mut self, label: Label) {
        self.total += 1;
        match label {
            Label::Idiomatic => self.idiomatic += 1,
            Label::NonIdiomatic => self.non_idiomatic += 1,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("no feature vector for sample {0:?}")]
    MissingVector(String),
    #[error("sample {0:?} has no gold label")]
    MissingLabel(String),
}

/// The "All" row followed by one row per feature that fires at least once,
/// sorted by total descending, then by feature name.
pub fn label_statistics(
    corpus: &Corpus,
    vectors: &BTreeMap<String, LocalityVector>,
) -> Result<Vec<FeatureStats>, StatsError> {
    let mut all = FeatureStats::empty(ALL_ROW);
    let mut per_feature: Vec<FeatureStats> = Feature::ALL.iter().map(|f| FeatureStats::empty(f.name())).collect();

    for sample in corpus {
        let label = sample.label.ok_or_else(|| StatsError::MissingLabel(sample.id.clone()))?;
        let vector = vectors
            .get(&sample.id)
            .ok_or_else(|| StatsError::MissingVector(sample.id.clone()))?;
        all.add(label);
        for f in Feature::ALL {
            if vector.get(f) {
                per_feature[f.slot()].add(label);
            }
        }
    }

    per_feature.retain(|row| row.total > 0);
    per_feature.sort_by(|a, b| b.total.cmp(&a.total).then_with(|| a.feature.cmp(&b.feature)));
    let mut rows = Vec::with_capacity(per_feature.len() + 1);
    rows.push(all);
    rows.extend(per_feature);
    Ok(rows)
}

pub fn render_table(rows: &[FeatureStats]) -> String {
    let headers = ["Feature", "Total", "0 (Idiomatic)", "1 (Not-idiomatic)"];
    let body: Vec<[String; 4]> = rows
        .iter()
        .map(|r| {
            [
                r.feature.clone(),
                r.total.to_string(),
                r.idiomatic.to_string(),
                r.non_idiomatic.to_string(),
            ]
        })
        .collect();
    let mut widths = headers.map(|h| h.chars().count());
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: [&str; 4]| {
        let mut s = format!("{:<w$}", cells[0], w = widths[0]);
        for (cell, w) in cells[1..].iter().zip(&widths[1..]) {
            s.push_str(&format!(" | {cell:>w$}"));
        }
        s.trim_end().to_string()
    };
    let mut out = line(headers);
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 9));
    out.push('\n');
    for row in &body {
        out.push_str(&line([&row[0], &row[1], &row[2], &row[3]]));
        out.push('\n');
    }
    out
}

pub fn write_csv<W: Write>(writer: W, rows: &[FeatureStats]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["feature", "total", "idiomatic", "non_idiomatic"])?;
    for r in rows {
        w.write_record([
            r.feature.clone(),
            r.total.to_string(),
            r.idiomatic.to_string(),
            r.non_idiomatic.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
