//! TOML run configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use neamer_core::baseline::ModelConfig;
use neamer_core::corpus::{ColumnMapping, Split};
use neamer_core::locality::WordLists;
use serde::Deserialize;

use crate::ValidationError;

pub const DEFAULT_OUT_DIR: &str = "neamer-out";

/// Paths keyed by split name (`zero_shot_train`, `one_shot_train`,
/// `validation`, `test`).
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitPaths {
    pub zero_shot_train: Option<PathBuf>,
    pub one_shot_train: Option<PathBuf>,
    pub validation: Option<PathBuf>,
    pub test: Option<PathBuf>,
}

impl SplitPaths {
    pub fn get(&self, split: Split) -> Option<&PathBuf> {
        match split {
            Split::ZeroShotTrain => self.zero_shot_train.as_ref(),
            Split::OneShotTrain => self.one_shot_train.as_ref(),
            Split::Validation => self.validation.as_ref(),
            Split::Test => self.test.as_ref(),
        }
    }

    fn entries(&self) -> BTreeMap<Split, &PathBuf> {
        Split::ALL.into_iter().filter_map(|s| self.get(s).map(|p| (s, p))).collect()
    }

    fn rebase(&mut self, base: &Path) {
        for p in [&mut self.zero_shot_train, &mut self.one_shot_train, &mut self.validation, &mut self.test]
            .into_iter()
            .flatten()
        {
            *p = base.join(&*p);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: SplitPaths,
    pub columns: ColumnMapping,
    pub ner: SplitPaths,
    pub wordlists: WordLists,
    pub model: ModelConfig,
    pub checkpoint_meta: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: SplitPaths::default(),
            columns: ColumnMapping::default(),
            ner: SplitPaths::default(),
            wordlists: WordLists::default(),
            model: ModelConfig::default(),
            checkpoint_meta: None,
            out_dir: PathBuf::from(DEFAULT_OUT_DIR),
        }
    }
}

impl RunConfig {
    /// Reads and validates a config file. Relative paths inside it are
    /// resolved against the file's directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut config: RunConfig = toml::from_str(&text)
            .map_err(|e| ValidationError(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.data.rebase(base);
        config.ner.rebase(base);
        if let Some(p) = config.checkpoint_meta.as_mut() {
            *p = base.join(&*p);
        }
        config.out_dir = base.join(&config.out_dir);
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let mut missing = Vec::new();
        for (kind, paths) in [("data", &self.data), ("ner", &self.ner)] {
            for (split, p) in paths.entries() {
                if !p.is_file() {
                    missing.push(format!("{kind}.{split} = {}", p.display()));
                }
            }
        }
        if let Some(p) = &self.checkpoint_meta {
            if !p.is_file() {
                missing.push(format!("checkpoint_meta = {}", p.display()));
            }
        }
        if !missing.is_empty() {
            bail!(ValidationError(format!("config references missing files: {}", missing.join(", "))));
        }
        let empty = self.wordlists.empty_lists();
        if !empty.is_empty() {
            let names: Vec<&str> = empty.iter().map(|l| l.code()).collect();
            bail!(ValidationError(format!("word lists are empty for {}", names.join(", "))));
        }
        self.model
            .validate()
            .map_err(|e| ValidationError(e.to_string()))?;
        Ok(())
    }
}
