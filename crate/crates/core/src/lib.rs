//! Idiomaticity detection for multiword expressions: corpus ingestion,
//! MWE location, locality features, a feature-augmented baseline
//! classifier, checkpoint ensembling and evaluation reports.

pub mod baseline;
pub mod corpus;
pub mod ensemble;
pub mod evaluation;
pub mod locality;
pub mod locator;
pub mod stats;
pub mod synthetic;

pub use corpus::{ingest_csv, ColumnMapping, Corpus, CorpusError, Label, Language, Sample, Split};
pub use ensemble::{CheckpointMeta, ScoreRecord, Strategy};
pub use evaluation::{F1Average, F1Report};
pub use locality::{featurize, Feature, LocalityVector, NerSpan, WordLists};
pub use locator::{locate, Locator, Occurrence};
