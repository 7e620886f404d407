//! Idiomaticity dataset rows and CSV ingestion.
//!
//! Rows are validated one at a time. Strict ingestion stops at the first
//! rejected row; [`ingest_csv_lenient`] keeps going and returns every
//! rejection next to the accepted samples so nothing disappears silently.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Language {
    #[serde(rename = "EN", alias = "en")]
    En,
    #[serde(rename = "PT", alias = "pt")]
    Pt,
    #[serde(rename = "GL", alias = "gl")]
    Gl,
}

impl Language {
    pub const ALL: [Language; 3] = [Language::En, Language::Pt, Language::Gl];

    pub fn code(self) -> &'static str {
        match self {
            Language::En => "EN",
            Language::Pt => "PT",
            Language::Gl => "GL",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Language {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "EN" => Ok(Language::En),
            "PT" => Ok(Language::Pt),
            "GL" => Ok(Language::Gl),
            other => Err(format!("unknown language code {other:?}")),
        }
    }
}

/// Gold idiomaticity label. `0` is idiomatic usage, `1` literal usage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Label {
    Idiomatic = 0,
    NonIdiomatic = 1,
}

impl Label {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Label> {
        match index {
            0 => Some(Label::Idiomatic),
            1 => Some(Label::NonIdiomatic),
            _ => None,
        }
    }

    pub fn flip(self) -> Label {
        match self {
            Label::Idiomatic => Label::NonIdiomatic,
            Label::NonIdiomatic => Label::Idiomatic,
        }
    }
}

impl From<Label> for u8 {
    fn from(label: Label) -> u8 {
        label as u8
    }
}

impl TryFrom<u8> for Label {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Label::from_index(value as usize).ok_or_else(|| format!("label {value} is not 0 or 1"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    ZeroShotTrain,
    OneShotTrain,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 4] = [
        Split::ZeroShotTrain,
        Split::OneShotTrain,
        Split::Validation,
        Split::Test,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Split::ZeroShotTrain => "zero_shot_train",
            Split::OneShotTrain => "one_shot_train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }

    pub fn is_labeled(self) -> bool {
        self != Split::Test
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .chars()
            .filter(|c| !matches!(c, '_' | '-' | ' '))
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "zeroshottrain" | "zeroshot" => Ok(Split::ZeroShotTrain),
            "oneshottrain" | "oneshot" => Ok(Split::OneShotTrain),
            "validation" | "valid" | "dev" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            _ => Err(format!("unknown split {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub language: Language,
    pub mwe: String,
    pub previous: Option<String>,
    pub target: String,
    pub next: Option<String>,
    pub label: Option<Label>,
    pub split: Split,
}

impl Sample {
    /// Text fed to a classifier. With `include_context` the previous and
    /// next sentences are joined around the target with single spaces.
    pub fn text(&self, include_context: bool) -> String {
        if !include_context {
            return self.target.clone();
        }
        let mut parts: Vec<&str> = Vec::with_capacity(3);
        if let Some(p) = self.previous.as_deref() {
            parts.push(p);
        }
        parts.push(&self.target);
        if let Some(n) = self.next.as_deref() {
            parts.push(n);
        }
        parts.join(" ")
    }

    /// Character offset of the target inside [`Sample::text`].
    pub fn target_offset(&self, include_context: bool) -> usize {
        match (include_context, self.previous.as_deref()) {
            (true, Some(p)) => p.chars().count() + 1,
            _ => 0,
        }
    }
}

/// Header names for each sample field. `previous`, `next` and `label` are
/// optional columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMapping {
    pub id: String,
    pub language: String,
    pub mwe: String,
    pub previous: Option<String>,
    pub target: String,
    pub next: Option<String>,
    pub label: Option<String>,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            id: "ID".into(),
            language: "Language".into(),
            mwe: "MWE".into(),
            previous: Some("Previous".into()),
            target: "Target".into(),
            next: Some("Next".into()),
            label: Some("Label".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub path: PathBuf,
    pub mapping: ColumnMapping,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    samples: Vec<Sample>,
    provenance: Provenance,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("column {column:?} named in the mapping is not in the header")]
    MissingColumn { column: String },
    #[error("line {line}: label {value:?} is not 0 or 1")]
    BadLabel { line: u64, value: String },
    #[error("line {line}: {split} row has no label")]
    MissingLabel { line: u64, split: Split },
    #[error("line {line}: test row carries label {value:?}")]
    UnexpectedLabel { line: u64, value: String },
    #[error("line {line}: field is not valid UTF-8")]
    BadEncoding { line: u64 },
    #[error("line {line}: {message}")]
    BadLanguage { line: u64, message: String },
    #[error("line {line}: required field {field:?} is empty")]
    EmptyField { line: u64, field: &'static str },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: u64, id: String },
    #[error("line {line}: malformed CSV: {message}")]
    Malformed { line: u64, message: String },
}

impl CorpusError {
    /// Line number of the offending row, for row-level rejections.
    pub fn line(&self) -> Option<u64> {
        match self {
            CorpusError::BadLabel { line, .. }
            | CorpusError::MissingLabel { line, .. }
            | CorpusError::UnexpectedLabel { line, .. }
            | CorpusError::BadEncoding { line }
            | CorpusError::BadLanguage { line, .. }
            | CorpusError::EmptyField { line, .. }
            | CorpusError::DuplicateId { line, .. }
            | CorpusError::Malformed { line, .. } => Some(*line),
            _ => None,
        }
    }
}

impl Corpus {
    pub fn new(samples: Vec<Sample>, provenance: Provenance) -> Self {
        Corpus {
            samples,
            provenance,
        }
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Sample> {
        self.samples.iter().find(|s| s.id == id)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Sample> {
        self.samples.iter()
    }

    /// Writes the corpus back as CSV under the provenance column mapping.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let m = &self.provenance.mapping;
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec![m.id.as_str(), m.language.as_str(), m.mwe.as_str()];
        header.extend(m.previous.as_deref());
        header.push(m.target.as_str());
        header.extend(m.next.as_deref());
        header.extend(m.label.as_deref());
        out.write_record(&header)?;

        for s in &self.samples {
            let mut row: Vec<String> = vec![s.id.clone(), s.language.to_string(), s.mwe.clone()];
            if m.previous.is_some() {
                row.push(s.previous.clone().unwrap_or_default());
            }
            row.push(s.target.clone());
            if m.next.is_some() {
                row.push(s.next.clone().unwrap_or_default());
            }
            if m.label.is_some() {
                row.push(s.label.map(|l| l.index().to_string()).unwrap_or_default());
            }
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a Sample;
    type IntoIter = std::slice::Iter<'a, Sample>;

    fn into_iter(self) -> Self::IntoIter {
        self.samples.iter()
    }
}

/// Accepted samples plus every rejected row.
#[derive(Debug)]
pub struct IngestReport {
    pub corpus: Corpus,
    pub rejected: Vec<CorpusError>,
}

pub fn ingest_csv(path: &Path, mapping: &ColumnMapping, split: Split) -> Result<Corpus, CorpusError> {
    let report = ingest_csv_lenient(path, mapping, split)?;
    match report.rejected.into_iter().next() {
        Some(err) => Err(err),
        None => Ok(report.corpus),
    }
}

/// Ingests every valid row. Header-level problems (I/O, missing columns)
/// are still hard errors.
pub fn ingest_csv_lenient(
    path: &Path,
    mapping: &ColumnMapping,
    split: Split,
) -> Result<IngestReport, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let (samples, rejected) = read_rows(file, mapping, split).map_err(|e| match e {
        CorpusError::Io { source, .. } => CorpusError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })?;
    Ok(IngestReport {
        corpus: Corpus::new(
            samples,
            Provenance {
                path: path.to_path_buf(),
                mapping: mapping.clone(),
            },
        ),
        rejected,
    })
}

/// Same as [`ingest_csv_lenient`] over an in-memory reader.
pub fn ingest_reader<R: Read>(
    reader: R,
    origin: &Path,
    mapping: &ColumnMapping,
    split: Split,
) -> Result<IngestReport, CorpusError> {
    let (samples, rejected) = read_rows(reader, mapping, split)?;
    Ok(IngestReport {
        corpus: Corpus::new(
            samples,
            Provenance {
                path: origin.to_path_buf(),
                mapping: mapping.clone(),
            },
        ),
        rejected,
    })
}

struct ColumnIndex {
    id: usize,
    language: usize,
    mwe: usize,
    previous: Option<usize>,
    target: usize,
    next: Option<usize>,
    label: Option<usize>,
}

fn resolve_columns(header: &[String], mapping: &ColumnMapping, split: Split) -> Result<ColumnIndex, CorpusError> {
    let find = |name: &str| -> Result<usize, CorpusError> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CorpusError::MissingColumn {
                column: name.to_string(),
            })
    };
    let optional = |name: &Option<String>| -> Result<Option<usize>, CorpusError> {
        name.as_deref().map(find).transpose()
    };
    let label = match (&mapping.label, split.is_labeled()) {
        (Some(name), true) => Some(find(name)?),
        (None, true) => {
            return Err(CorpusError::MissingColumn {
                column: "<label>".to_string(),
            })
        }
        // A test file may or may not carry the label column.
        (Some(name), false) => header.iter().position(|h| h == name),
        (None, false) => None,
    };
    Ok(ColumnIndex {
        id: find(&mapping.id)?,
        language: find(&mapping.language)?,
        mwe: find(&mapping.mwe)?,
        previous: optional(&mapping.previous)?,
        target: find(&mapping.target)?,
        next: optional(&mapping.next)?,
        label,
    })
}

fn read_rows<R: Read>(
    reader: R,
    mapping: &ColumnMapping,
    split: Split,
) -> Result<(Vec<Sample>, Vec<CorpusError>), CorpusError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);

    let header_bytes = rdr.byte_headers().map_err(|e| csv_error(e, 1))?.clone();
    let header = header_bytes
        .iter()
        .map(|h| {
            std::str::from_utf8(h)
                .map(|s| s.trim_start_matches('\u{feff}').to_string())
                .map_err(|_| CorpusError::BadEncoding { line: 1 })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let cols = resolve_columns(&header, mapping, split)?;

    let mut samples = Vec::new();
    let mut rejected = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    let mut record = csv::ByteRecord::new();
    loop {
        let line = rdr.position().line();
        match rdr.read_byte_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                let err = csv_error(e, line);
                if matches!(err, CorpusError::Io { .. }) {
                    return Err(err);
                }
                rejected.push(err);
                continue;
            }
        }
        let line = record.position().map(|p| p.line()).unwrap_or(line);
        match parse_row(&record, &cols, split, line) {
            Ok(sample) => {
                if seen.insert(sample.id.clone()) {
                    samples.push(sample);
                } else {
                    rejected.push(CorpusError::DuplicateId { line, id: sample.id });
                }
            }
            Err(e) => rejected.push(e),
        }
    }
    Ok((samples, rejected))
}

fn csv_error(e: csv::Error, line: u64) -> CorpusError {
    let line = e.position().map(|p| p.line()).unwrap_or(line);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => CorpusError::Io {
            path: PathBuf::new(),
            source,
        },
        csv::ErrorKind::Utf8 { .. } => CorpusError::BadEncoding { line },
        other => CorpusError::Malformed {
            line,
            message: format!("{other:?}"),
        },
    }
}

fn parse_row(record: &csv::ByteRecord, cols: &ColumnIndex, split: Split, line: u64) -> Result<Sample, CorpusError> {
    let field = |idx: usize| -> Result<&str, CorpusError> {
        std::str::from_utf8(record.get(idx).unwrap_or_default()).map_err(|_| CorpusError::BadEncoding { line })
    };
    let required = |idx: usize, name: &'static str| -> Result<String, CorpusError> {
        let value = field(idx)?;
        if value.trim().is_empty() {
            Err(CorpusError::EmptyField { line, field: name })
        } else {
            Ok(value.to_string())
        }
    };
    let optional = |idx: Option<usize>| -> Result<Option<String>, CorpusError> {
        match idx {
            Some(i) => {
                let value = field(i)?;
                Ok((!value.is_empty()).then(|| value.to_string()))
            }
            None => Ok(None),
        }
    };

    let id = required(cols.id, "id")?;
    let language = field(cols.language)?
        .parse::<Language>()
        .map_err(|message| CorpusError::BadLanguage { line, message })?;
    let mwe = required(cols.mwe, "mwe")?;
    let target = required(cols.target, "target")?;
    let previous = optional(cols.previous)?;
    let next = optional(cols.next)?;

    let raw_label = cols.label.map(field).transpose()?.map(str::trim);
    let label = match (split.is_labeled(), raw_label) {
        (true, None) | (true, Some("")) => return Err(CorpusError::MissingLabel { line, split }),
        (true, Some("0")) => Some(Label::Idiomatic),
        (true, Some("1")) => Some(Label::NonIdiomatic),
        (true, Some(other)) => {
            return Err(CorpusError::BadLabel {
                line,
                value: other.to_string(),
            })
        }
        (false, None) | (false, Some("")) => None,
        (false, Some(other)) => {
            return Err(CorpusError::UnexpectedLabel {
                line,
                value: other.to_string(),
            })
        }
    };

    Ok(Sample {
        id,
        language,
        mwe,
        previous,
        target,
        next,
        label,
        split,
    })
}
