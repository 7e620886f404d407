//! Feature-augmented sentence classifier at desk scale.
//!
//! The text path averages hashed character n-gram embeddings into a
//! `text_dim` vector. The locality path runs the 6-slot feature vector
//! through two ReLU layers of width `feat_hidden` and `feat_out`. Both are
//! concatenated and passed to a linear head with a softmax over the two
//! labels.

mod io;
mod retry;
mod train;

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Label, Sample};
use crate::evaluation::F1Average;
use crate::locality::{LocalityVector, FEATURE_COUNT};
use crate::locator::{Locator, Occurrence};

pub use io::{read_f1_log, read_params, write_f1_log, write_params, PARAMS_MAGIC, PARAMS_VERSION};
pub use retry::{train_with_retry, RetryError, RetryPolicy, SeedRun, SeedSchedule, SeedTrainer};
pub use train::{evaluate, label_for, predict_dataset, score_records, train, AdamState, TrainOutcome};

/// Learning rate used for transformer fine-tuning.
pub const PAPER_LEARNING_RATE: f64 = 2e-5;
/// Multiplier applied to [`PAPER_LEARNING_RATE`] for the n-gram encoder.
pub const NGRAM_LR_SCALE: f64 = 100.0;

pub const CLASSES: usize = 2;

/// Wraps each MWE occurrence before hashing so n-grams see its position.
pub const OCCURRENCE_OPEN: char = '\u{27E6}';
pub const OCCURRENCE_CLOSE: char = '\u{27E7}';
const WORD_PAD_OPEN: char = '<';
const WORD_PAD_CLOSE: char = '>';

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub text_dim: usize,
    pub hash_buckets: usize,
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub feat_hidden: usize,
    pub feat_out: usize,
    /// Rate actually used by the baseline optimizer.
    pub learning_rate: f64,
    /// Transformer-scale rate, recorded for the fine-tuning harness.
    pub paper_learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seeds: Vec<u64>,
    pub retry_seeds: Vec<u64>,
    pub failure_threshold: f64,
    pub retry_policy: RetryPolicy,
    pub adam: AdamConfig,
    pub mark_occurrence: bool,
    pub include_context: bool,
    pub f1_average: F1Average,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            text_dim: 768,
            hash_buckets: 2048,
            ngram_min: 3,
            ngram_max: 5,
            feat_hidden: 200,
            feat_out: 200,
            learning_rate: PAPER_LEARNING_RATE * NGRAM_LR_SCALE,
            paper_learning_rate: PAPER_LEARNING_RATE,
            batch_size: 16,
            epochs: 24,
            seeds: vec![0, 1, 3, 5, 42],
            retry_seeds: vec![49, 81, 100, 121],
            failure_threshold: 0.5,
            retry_policy: RetryPolicy::OnFailure,
            adam: AdamConfig::default(),
            mark_occurrence: true,
            include_context: false,
            f1_average: F1Average::Macro,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: &str| Err(ModelError::InvalidConfig(msg.to_string()));
        if self.text_dim == 0 || self.hash_buckets == 0 || self.feat_hidden == 0 || self.feat_out == 0 {
            return bad("all dimensions must be positive");
        }
        if self.ngram_min == 0 || self.ngram_min > self.ngram_max {
            return bad("n-gram range must satisfy 1 <= ngram_min <= ngram_max");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive and finite");
        }
        if !(self.failure_threshold > 0.0 && self.failure_threshold < 1.0) {
            return bad("failure_threshold must lie strictly between 0 and 1");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        if self.seeds.iter().any(|s| self.retry_seeds.contains(s)) {
            return bad("seeds and retry_seeds must be disjoint");
        }
        let a = &self.adam;
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || a.epsilon <= 0.0 {
            return bad("adam betas must lie in [0, 1) and epsilon must be positive");
        }
        Ok(())
    }

    pub fn seed_schedule(&self) -> SeedSchedule {
        SeedSchedule {
            seeds: self.seeds.clone(),
            retry_seeds: self.retry_seeds.clone(),
            failure_threshold: self.failure_threshold,
            policy: self.retry_policy,
        }
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("non-finite activation in {0}")]
    NonFiniteActivation(&'static str),
    #[error("loss diverged at epoch {epoch}, step {step}")]
    DivergedLoss { epoch: usize, step: usize },
    #[error("{0} dataset is empty")]
    EmptyDataset(&'static str),
    #[error("no feature vector for sample {0:?}")]
    MissingVector(String),
    #[error("sample {0:?} has no gold label")]
    MissingLabel(String),
    #[error("parameter file: {0}")]
    BadParams(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Row-major `outputs x inputs` weights plus a bias per output.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn uniform<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let mut d = Dense::zeros(inputs, outputs);
        for w in d.weights.iter_mut().chain(d.bias.iter_mut()) {
            *w = rng.gen_range(-bound..=bound);
        }
        d
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.inputs);
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }
}

/// Hash-bucket embedding table, `buckets x dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub buckets: usize,
    pub dim: usize,
    pub table: Vec<f64>,
}

impl Embedding {
    pub fn row(&self, bucket: usize) -> &[f64] {
        &self.table[bucket * self.dim..(bucket + 1) * self.dim]
    }

    pub fn row_mut(&mut self, bucket: usize) -> &mut [f64] {
        &mut self.table[bucket * self.dim..(bucket + 1) * self.dim]
    }

    /// Mean of the rows for `buckets` (with multiplicity).
    pub fn mean(&self, buckets: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &b in buckets {
            for (o, v) in out.iter_mut().zip(self.row(b)) {
                *o += v;
            }
        }
        let scale = 1.0 / buckets.len().max(1) as f64;
        out.iter_mut().for_each(|o| *o *= scale);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub text_embed: Embedding,
    pub feat1: Dense,
    pub feat2: Dense,
    pub head: Dense,
}

/// Parameter tensor names, in serialization order.
pub const TENSOR_NAMES: [&str; 7] = ["text_embed", "feat_w1", "feat_b1", "feat_w2", "feat_b2", "head_w", "head_b"];

impl ModelParams {
    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every dense layer;
    /// embedding rows are lookups with fan-in 1.
    pub fn init<R: Rng>(config: &ModelConfig, rng: &mut R) -> Self {
        let mut table = vec![0.0; config.hash_buckets * config.text_dim];
        for v in table.iter_mut() {
            *v = rng.gen_range(-1.0..=1.0);
        }
        let text_embed = Embedding {
            buckets: config.hash_buckets,
            dim: config.text_dim,
            table,
        };
        let feat1 = Dense::uniform(FEATURE_COUNT, config.feat_hidden, rng);
        let feat2 = Dense::uniform(config.feat_hidden, config.feat_out, rng);
        let head = Dense::uniform(config.text_dim + config.feat_out, CLASSES, rng);
        ModelParams {
            text_embed,
            feat1,
            feat2,
            head,
        }
    }

    pub fn tensors(&self) -> [(&'static str, &[f64]); 7] {
        [
            (TENSOR_NAMES[0], &self.text_embed.table),
            (TENSOR_NAMES[1], &self.feat1.weights),
            (TENSOR_NAMES[2], &self.feat1.bias),
            (TENSOR_NAMES[3], &self.feat2.weights),
            (TENSOR_NAMES[4], &self.feat2.bias),
            (TENSOR_NAMES[5], &self.head.weights),
            (TENSOR_NAMES[6], &self.head.bias),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut [f64]); 7] {
        [
            (TENSOR_NAMES[0], &mut self.text_embed.table),
            (TENSOR_NAMES[1], &mut self.feat1.weights),
            (TENSOR_NAMES[2], &mut self.feat1.bias),
            (TENSOR_NAMES[3], &mut self.feat2.weights),
            (TENSOR_NAMES[4], &mut self.feat2.bias),
            (TENSOR_NAMES[5], &mut self.head.weights),
            (TENSOR_NAMES[6], &mut self.head.bias),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    /// Checks that all shapes agree with one another.
    pub fn check_shapes(&self) -> Result<(), ModelError> {
        let e = &self.text_embed;
        let ok = e.table.len() == e.buckets * e.dim
            && self.feat1.inputs == FEATURE_COUNT
            && self.feat2.inputs == self.feat1.outputs
            && self.head.inputs == e.dim + self.feat2.outputs
            && self.head.outputs == CLASSES
            && [&self.feat1, &self.feat2, &self.head]
                .iter()
                .all(|d| d.weights.len() == d.inputs * d.outputs && d.bias.len() == d.outputs);
        if ok {
            Ok(())
        } else {
            Err(ModelError::BadParams("inconsistent tensor shapes".into()))
        }
    }

    pub fn forward(&self, buckets: &[usize], vector: &LocalityVector) -> Result<Activations, ModelError> {
        let text = self.text_embed.mean(buckets);
        let features = vector.as_f64();
        let pre1 = self.feat1.apply(&features);
        let hidden1: Vec<f64> = pre1.iter().map(|&z| z.max(0.0)).collect();
        let pre2 = self.feat2.apply(&hidden1);
        let hidden2: Vec<f64> = pre2.iter().map(|&z| z.max(0.0)).collect();
        let mut joint = text;
        joint.extend_from_slice(&hidden2);
        let logits = self.head.apply(&joint);
        if !logits.iter().all(|v| v.is_finite()) {
            return Err(ModelError::NonFiniteActivation("logits"));
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let norm: f64 = exps.iter().sum();
        let probs = [exps[0] / norm, exps[1] / norm];
        let log_norm = max + norm.ln();
        let log_probs = [logits[0] - log_norm, logits[1] - log_norm];
        Ok(Activations {
            features,
            pre1,
            hidden1,
            pre2,
            joint,
            probs,
            log_probs,
        })
    }
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone, PartialEq)]
pub struct Activations {
    pub features: [f64; FEATURE_COUNT],
    pub pre1: Vec<f64>,
    pub hidden1: Vec<f64>,
    pub pre2: Vec<f64>,
    /// Text encoding followed by the feature encoding.
    pub joint: Vec<f64>,
    pub probs: [f64; CLASSES],
    pub log_probs: [f64; CLASSES],
}

/// Gradients matching [`ModelParams`]; embedding rows are stored sparsely.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub text_embed: BTreeMap<usize, Vec<f64>>,
    pub feat1: Dense,
    pub feat2: Dense,
    pub head: Dense,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Gradients {
            text_embed: BTreeMap::new(),
            feat1: Dense::zeros(params.feat1.inputs, params.feat1.outputs),
            feat2: Dense::zeros(params.feat2.inputs, params.feat2.outputs),
            head: Dense::zeros(params.head.inputs, params.head.outputs),
        }
    }

    /// Dense copy of the embedding gradient, shaped like the table.
    pub fn dense_text_embed(&self, params: &ModelParams) -> Vec<f64> {
        let dim = params.text_embed.dim;
        let mut out = vec![0.0; params.text_embed.table.len()];
        for (&b, row) in &self.text_embed {
            out[b * dim..(b + 1) * dim].copy_from_slice(row);
        }
        out
    }

    /// Dense tensors in [`TENSOR_NAMES`] order.
    pub fn dense_tensors(&self, params: &ModelParams) -> [(&'static str, Vec<f64>); 7] {
        [
            (TENSOR_NAMES[0], self.dense_text_embed(params)),
            (TENSOR_NAMES[1], self.feat1.weights.clone()),
            (TENSOR_NAMES[2], self.feat1.bias.clone()),
            (TENSOR_NAMES[3], self.feat2.weights.clone()),
            (TENSOR_NAMES[4], self.feat2.bias.clone()),
            (TENSOR_NAMES[5], self.head.weights.clone()),
            (TENSOR_NAMES[6], self.head.bias.clone()),
        ]
    }
}

fn accumulate_dense(grad: &mut Dense, layer: &Dense, input: &[f64], delta: &[f64]) -> Vec<f64> {
    let mut d_input = vec![0.0; layer.inputs];
    for (o, &d) in delta.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        grad.bias[o] += d;
        let g_row = &mut grad.weights[o * layer.inputs..(o + 1) * layer.inputs];
        let w_row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
        for i in 0..layer.inputs {
            g_row[i] += d * input[i];
            d_input[i] += d * w_row[i];
        }
    }
    d_input
}

/// Adds `weight * d(-log p[label])/d(params)` for one example into `grads`.
pub fn backward(
    params: &ModelParams,
    acts: &Activations,
    buckets: &[usize],
    label: Label,
    weight: f64,
    grads: &mut Gradients,
) {
    let mut d_logits = [acts.probs[0] * weight, acts.probs[1] * weight];
    d_logits[label.index()] -= weight;

    let d_joint = accumulate_dense(&mut grads.head, &params.head, &acts.joint, &d_logits);
    let text_dim = params.text_embed.dim;
    let (d_text, d_hidden2) = d_joint.split_at(text_dim);

    let d_pre2: Vec<f64> = d_hidden2
        .iter()
        .zip(&acts.pre2)
        .map(|(&d, &z)| if z > 0.0 { d } else { 0.0 })
        .collect();
    let d_hidden1 = accumulate_dense(&mut grads.feat2, &params.feat2, &acts.hidden1, &d_pre2);
    let d_pre1: Vec<f64> = d_hidden1
        .iter()
        .zip(&acts.pre1)
        .map(|(&d, &z)| if z > 0.0 { d } else { 0.0 })
        .collect();
    accumulate_dense(&mut grads.feat1, &params.feat1, &acts.features, &d_pre1);

    if buckets.is_empty() {
        return;
    }
    let scale = 1.0 / buckets.len() as f64;
    for &b in buckets {
        let row = grads.text_embed.entry(b).or_insert_with(|| vec![0.0; text_dim]);
        for (r, d) in row.iter_mut().zip(d_text) {
            *r += d * scale;
        }
    }
}

/// FNV-1a, 64-bit.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Hashes the character n-grams of a text into embedding buckets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NgramHasher {
    pub buckets: usize,
    pub min_n: usize,
    pub max_n: usize,
}

impl NgramHasher {
    pub fn from_config(config: &ModelConfig) -> Self {
        NgramHasher {
            buckets: config.hash_buckets,
            min_n: config.ngram_min,
            max_n: config.ngram_max,
        }
    }

    /// Bucket of every n-gram of the padded text, with multiplicity. Never
    /// empty for non-empty input since padding gives at least one trigram.
    pub fn buckets(&self, text: &str) -> Vec<usize> {
        let mut chars = Vec::with_capacity(text.len() + 2);
        chars.push(WORD_PAD_OPEN);
        chars.extend(text.chars());
        chars.push(WORD_PAD_CLOSE);
        let mut out = Vec::new();
        let mut buf = String::new();
        for n in self.min_n..=self.max_n {
            for window in chars.windows(n) {
                buf.clear();
                buf.extend(window);
                out.push((fnv1a(buf.as_bytes()) % self.buckets as u64) as usize);
            }
        }
        if out.is_empty() {
            buf.clear();
            buf.extend(&chars);
            out.push((fnv1a(buf.as_bytes()) % self.buckets as u64) as usize);
        }
        out
    }
}

/// Inserts occurrence sentinels around each span (character offsets).
pub fn mark_occurrences(text: &str, occurrences: &[Occurrence], offset: usize) -> String {
    let mut out = String::with_capacity(text.len() + 8 * occurrences.len());
    for (i, c) in text.chars().enumerate() {
        if occurrences.iter().any(|o| o.start_char + offset == i) {
            out.push(OCCURRENCE_OPEN);
        }
        if occurrences.iter().any(|o| o.end_char + offset == i) {
            out.push(OCCURRENCE_CLOSE);
        }
        out.push(c);
    }
    let len = text.chars().count();
    if occurrences.iter().any(|o| o.end_char + offset == len) {
        out.push(OCCURRENCE_CLOSE);
    }
    out
}

/// The string a sample contributes to the text encoder.
pub fn encoder_input(sample: &Sample, config: &ModelConfig) -> String {
    let text = sample.text(config.include_context);
    if !config.mark_occurrence {
        return text;
    }
    let occurrences = Locator::default().locate(&sample.mwe, &sample.target);
    mark_occurrences(&text, &occurrences, sample.target_offset(config.include_context))
}

/// Text-path vector for a string.
pub fn encode_text(params: &ModelParams, hasher: &NgramHasher, text: &str) -> Vec<f64> {
    params.text_embed.mean(&hasher.buckets(text))
}

/// One prepared example: hashed text, locality vector and (optional) label.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: String,
    pub buckets: Vec<usize>,
    pub vector: LocalityVector,
    pub label: Option<Label>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub examples: Vec<Example>,
}

impl Dataset {
    /// Hashes every sample's text. With `require_labels` unlabeled samples are errors.
    pub fn prepare(
        corpus: &Corpus,
        vectors: &BTreeMap<String, LocalityVector>,
        config: &ModelConfig,
        require_labels: bool,
    ) -> Result<Self, ModelError> {
        let hasher = NgramHasher::from_config(config);
        let examples = corpus
            .iter()
            .map(|s| {
                let vector = *vectors.get(&s.id).ok_or_else(|| ModelError::MissingVector(s.id.clone()))?;
                if require_labels && s.label.is_none() {
                    return Err(ModelError::MissingLabel(s.id.clone()));
                }
                Ok(Example {
                    id: s.id.clone(),
                    buckets: hasher.buckets(&encoder_input(s, config)),
                    vector,
                    label: s.label,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Dataset { examples })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn labels(&self) -> Option<Vec<Label>> {
        self.examples.iter().map(|e| e.label).collect()
    }
}

/// Mean cross-entropy over `indices` of `data`, plus its gradient.
pub fn batch_loss_and_gradients(
    params: &ModelParams,
    data: &Dataset,
    indices: &[usize],
) -> Result<(f64, Gradients), ModelError> {
    let mut grads = Gradients::zeros_like(params);
    let weight = 1.0 / indices.len().max(1) as f64;
    let mut loss = 0.0;
    for &i in indices {
        let ex = &data.examples[i];
        let label = ex.label.ok_or_else(|| ModelError::MissingLabel(ex.id.clone()))?;
        let acts = params.forward(&ex.buckets, &ex.vector)?;
        loss -= acts.log_probs[label.index()] * weight;
        backward(params, &acts, &ex.buckets, label, weight, &mut grads);
    }
    Ok((loss, grads))
}

/// Mean cross-entropy only, for finite-difference checks.
pub fn batch_loss(params: &ModelParams, data: &Dataset, indices: &[usize]) -> Result<f64, ModelError> {
    let weight = 1.0 / indices.len().max(1) as f64;
    let mut loss = 0.0;
    for &i in indices {
        let ex = &data.examples[i];
        let label = ex.label.ok_or_else(|| ModelError::MissingLabel(ex.id.clone()))?;
        loss -= params.forward(&ex.buckets, &ex.vector)?.log_probs[label.index()] * weight;
    }
    Ok(loss)
}

/// Trained parameters bundled with the settings needed to encode new text.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub config: ModelConfig,
    pub params: ModelParams,
}

impl Classifier {
    pub fn predict_proba(&self, sample: &Sample, vector: &LocalityVector) -> Result<[f64; CLASSES], ModelError> {
        let buckets = NgramHasher::from_config(&self.config).buckets(&encoder_input(sample, &self.config));
        Ok(self.params.forward(&buckets, vector)?.probs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Language, Split};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn small_config() -> ModelConfig {
        ModelConfig {
            text_dim: 6,
            hash_buckets: 16,
            feat_hidden: 5,
            feat_out: 4,
            ..ModelConfig::default()
        }
    }

    fn sample(target: &str) -> Sample {
        Sample {
            id: "x".into(),
            language: Language::En,
            mwe: "gold mine".into(),
            previous: None,
            target: target.into(),
            next: None,
            label: Some(Label::Idiomatic),
            split: Split::Validation,
        }
    }

    #[test]
    fn default_config_is_valid_and_records_paper_values() {
        let c = ModelConfig::default();
        c.validate().unwrap();
        assert_eq!((c.text_dim, c.feat_hidden, c.feat_out, c.batch_size, c.epochs), (768, 200, 200, 16, 24));
        assert_eq!(c.paper_learning_rate, 2e-5);
        assert!((c.learning_rate - 2e-3).abs() < 1e-15);
        assert_eq!(c.seeds, vec![0, 1, 3, 5, 42]);
        assert_eq!(c.retry_seeds, vec![49, 81, 100, 121]);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = ModelConfig::default();
        c.retry_seeds.push(42);
        assert!(c.validate().is_err());
        for threshold in [0.0, 1.0, -0.1] {
            let c = ModelConfig { failure_threshold: threshold, ..ModelConfig::default() };
            assert!(c.validate().is_err());
        }
        assert!(ModelConfig { feat_out: 0, ..ModelConfig::default() }.validate().is_err());
        assert!(ModelConfig { ngram_min: 6, ..ModelConfig::default() }.validate().is_err());
    }

    #[test]
    fn encoding_is_deterministic_and_position_aware() {
        let config = ModelConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let params = ModelParams::init(&config, &mut rng);
        let hasher = NgramHasher::from_config(&config);
        let a = encoder_input(&sample("search data is a gold mine today"), &config);
        assert!(a.contains("\u{27E6}gold mine\u{27E7}"));
        assert_eq!(encode_text(&params, &hasher, &a), encode_text(&params, &hasher, &a));

        let b = "\u{27E6}gold mine\u{27E7} x".to_string();
        let c = "\u{27E6}gold mane\u{27E7} x".to_string();
        assert_ne!(encode_text(&params, &hasher, &b), encode_text(&params, &hasher, &c));

        for s in ["qwertyuiopasdfghjklz", "zxcvbnm,./;'[]\\=-09", "a"] {
            assert!(encode_text(&params, &hasher, s).iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn marking_handles_end_of_text_and_context() {
        let occ = crate::locator::locate("gold mine", "a gold mine");
        assert_eq!(mark_occurrences("a gold mine", &occ, 0), "a \u{27E6}gold mine\u{27E7}");
        assert_eq!(mark_occurrences("p. a gold mine", &occ, 3), "p. a \u{27E6}gold mine\u{27E7}");
    }

    #[test]
    fn zero_head_gives_uniform_output() {
        let config = small_config();
        let mut params = ModelParams::init(&config, &mut ChaCha8Rng::seed_from_u64(1));
        params.head = Dense::zeros(params.head.inputs, params.head.outputs);
        let acts = params.forward(&[1, 2, 3], &LocalityVector::from_bits(13)).unwrap();
        assert_eq!(acts.probs, [0.5, 0.5]);
    }

    #[test]
    fn zero_feature_weights_leave_bias_image() {
        let config = small_config();
        let mut params = ModelParams::init(&config, &mut ChaCha8Rng::seed_from_u64(2));
        params.feat1.weights.iter_mut().for_each(|w| *w = 0.0);
        params.feat2.weights.iter_mut().for_each(|w| *w = 0.0);
        let acts = params.forward(&[4], &LocalityVector::default()).unwrap();
        let expected: Vec<f64> = params.feat2.bias.iter().map(|b| b.max(0.0)).collect();
        assert_eq!(&acts.joint[config.text_dim..], &expected[..]);
        assert_eq!(&acts.joint[..config.text_dim], params.text_embed.row(4));
    }

    #[test]
    fn non_finite_params_are_reported() {
        let config = small_config();
        let mut params = ModelParams::init(&config, &mut ChaCha8Rng::seed_from_u64(3));
        params.head.bias[0] = f64::NAN;
        assert!(matches!(params.forward(&[0], &LocalityVector::default()), Err(ModelError::NonFiniteActivation(_))));
    }

    /// Straight-line re-implementation of the forward arithmetic.
    fn reference_probability(params: &ModelParams, buckets: &[usize], slots: [u8; 6]) -> f64 {
        let dim = params.text_embed.dim;
        let mut text = vec![0.0; dim];
        for &b in buckets {
            for j in 0..dim {
                text[j] += params.text_embed.table[b * dim + j];
            }
        }
        for t in text.iter_mut() {
            *t /= buckets.len() as f64;
        }
        let dense_relu = |layer: &Dense, x: &[f64]| -> Vec<f64> {
            let mut y = Vec::new();
            for o in 0..layer.outputs {
                let mut z = layer.bias[o];
                for i in 0..layer.inputs {
                    z += layer.weights[o * layer.inputs + i] * x[i];
                }
                y.push(if z > 0.0 { z } else { 0.0 });
            }
            y
        };
        let x: Vec<f64> = slots.iter().map(|&s| s as f64).collect();
        let h1 = dense_relu(&params.feat1, &x);
        let h2 = dense_relu(&params.feat2, &h1);
        let joint: Vec<f64> = text.into_iter().chain(h2).collect();
        let mut logit = [0.0; 2];
        for c in 0..2 {
            logit[c] = params.head.bias[c];
            for j in 0..joint.len() {
                logit[c] += params.head.weights[c * joint.len() + j] * joint[j];
            }
        }
        1.0 / (1.0 + (logit[0] - logit[1]).exp())
    }

    #[test]
    fn forward_matches_reference_and_golden_value() {
        let config = small_config();
        let params = ModelParams::init(&config, &mut ChaCha8Rng::seed_from_u64(2024));
        let buckets = NgramHasher::from_config(&config).buckets("the gold mine");
        let vector = LocalityVector { capitalized: true, the_star: true, ..Default::default() };
        let p = params.forward(&buckets, &vector).unwrap().probs[1];
        let reference = reference_probability(&params, &buckets, vector.slots());
        assert!((p - reference).abs() < 1e-12, "{p} vs {reference}");
        assert!((reference - GOLDEN_P_NONIDIOMATIC).abs() < 1e-12, "reference {reference:.17}");
    }

    // Produced by `reference_probability` for ChaCha8 seed 2024, small_config,
    // text "the gold mine", vector [0,1,0,1,0,0].
    const GOLDEN_P_NONIDIOMATIC: f64 = 0.522_528_390_529_412_25;

    #[test]
    fn feature_path_ablation_ignores_vector() {
        let config = small_config();
        let mut params = ModelParams::init(&config, &mut ChaCha8Rng::seed_from_u64(5));
        params.feat2.weights.iter_mut().for_each(|w| *w = 0.0);
        params.feat2.bias.iter_mut().for_each(|w| *w = 0.0);
        let base = params.forward(&[3, 9], &LocalityVector::default()).unwrap().probs;
        for bits in 0..64 {
            assert_eq!(params.forward(&[3, 9], &LocalityVector::from_bits(bits)).unwrap().probs, base);
        }
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one(seed in any::<u64>(), bits in 0u8..64, buckets in prop::collection::vec(0usize..16, 1..20)) {
            let config = small_config();
            let params = ModelParams::init(&config, &mut ChaCha8Rng::seed_from_u64(seed));
            let p = params.forward(&buckets, &LocalityVector::from_bits(bits)).unwrap().probs;
            prop_assert!((p[0] + p[1] - 1.0).abs() <= 1e-9);
            prop_assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }
}
