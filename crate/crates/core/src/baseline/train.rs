use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{batch_loss_and_gradients, AdamConfig, Dataset, Gradients, ModelConfig, ModelError, ModelParams};
use crate::corpus::{Corpus, Label, Language, Split};
use crate::ensemble::ScoreRecord;
use crate::evaluation::{confusion, f1_scores, F1Average};

/// First and second moment estimates, shaped like [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub learning_rate: f64,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &ModelParams, config: AdamConfig, learning_rate: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|(_, t)| vec![0.0; t.len()]).collect();
        AdamState {
            config,
            learning_rate,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// One Adam step. Embedding rows without gradient in this batch keep
    /// their parameters and moments untouched.
    pub fn apply(&mut self, params: &mut ModelParams, grads: &Gradients) {
        self.step += 1;
        let AdamConfig { beta1, beta2, epsilon } = self.config;
        let t = self.step as i32;
        let lr = self.learning_rate * (1.0 - beta2.powi(t)).sqrt() / (1.0 - beta1.powi(t));
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= lr * *m / (v.sqrt() + epsilon);
        };

        let dim = params.text_embed.dim;
        for (&row, g_row) in &grads.text_embed {
            let range = row * dim..(row + 1) * dim;
            let p_row = &mut params.text_embed.table[range.clone()];
            let (m_row, v_row) = (&mut self.m[0][range.clone()], &mut self.v[0][range]);
            for j in 0..dim {
                update(&mut p_row[j], &mut m_row[j], &mut v_row[j], g_row[j]);
            }
        }

        let dense = [
            &grads.feat1.weights,
            &grads.feat1.bias,
            &grads.feat2.weights,
            &grads.feat2.bias,
            &grads.head.weights,
            &grads.head.bias,
        ];
        for (k, ((_, p), g)) in params.tensors_mut().into_iter().skip(1).zip(dense).enumerate() {
            let (m, v) = (&mut self.m[k + 1], &mut self.v[k + 1]);
            for j in 0..p.len() {
                update(&mut p[j], &mut m[j], &mut v[j], g[j]);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Parameters after the best-scoring epoch.
    pub params: ModelParams,
    /// Validation F1 after each epoch; index 0 is the initialization.
    pub epoch_f1: Vec<f64>,
    /// Mean training loss per epoch, starting at epoch 1.
    pub epoch_loss: Vec<f64>,
    pub best_epoch: usize,
    pub best_f1: f64,
}

/// NonIdiomatic when its probability is at least one half.
pub fn label_for(p_nonidiomatic: f64) -> Label {
    if p_nonidiomatic >= 0.5 {
        Label::NonIdiomatic
    } else {
        Label::Idiomatic
    }
}

/// `p_nonidiomatic` for every example, in dataset order.
pub fn predict_dataset(params: &ModelParams, data: &Dataset) -> Result<Vec<f64>, ModelError> {
    data.examples
        .iter()
        .map(|ex| Ok(params.forward(&ex.buckets, &ex.vector)?.probs[Label::NonIdiomatic.index()]))
        .collect()
}

/// F1 of the thresholded predictions against the dataset labels.
pub fn evaluate(params: &ModelParams, data: &Dataset, average: F1Average) -> Result<f64, ModelError> {
    let gold = data.labels().ok_or_else(|| {
        let id = data.examples.iter().find(|e| e.label.is_none()).map(|e| e.id.clone());
        ModelError::MissingLabel(id.unwrap_or_default())
    })?;
    let pred: Vec<Label> = predict_dataset(params, data)?.into_iter().map(label_for).collect();
    let matrix = confusion(&gold, &pred).map_err(|_| ModelError::EmptyDataset("validation"))?;
    let report = f1_scores(&matrix).map_err(|_| ModelError::EmptyDataset("validation"))?;
    Ok(report.score(average))
}

fn check_labeled(data: &Dataset, which: &'static str) -> Result<(), ModelError> {
    if data.is_empty() {
        return Err(ModelError::EmptyDataset(which));
    }
    match data.examples.iter().find(|e| e.label.is_none()) {
        Some(e) => Err(ModelError::MissingLabel(e.id.clone())),
        None => Ok(()),
    }
}

/// Mini-batch Adam on cross-entropy. Initialization and shuffling both draw
/// from one ChaCha8 stream seeded with `seed`.
pub fn train(config: &ModelConfig, train: &Dataset, valid: &Dataset, seed: u64) -> Result<TrainOutcome, ModelError> {
    config.validate()?;
    check_labeled(train, "training")?;
    check_labeled(valid, "validation")?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ModelParams::init(config, &mut rng);
    let mut adam = AdamState::new(&params, config.adam, config.learning_rate);

    let initial_f1 = evaluate(&params, valid, config.f1_average)?;
    let mut epoch_f1 = vec![initial_f1];
    let mut epoch_loss = Vec::with_capacity(config.epochs);
    let mut best = (0, initial_f1, params.clone());

    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (step, batch) in order.chunks(config.batch_size).enumerate() {
            let diverged = |e| match e {
                ModelError::NonFiniteActivation(_) => ModelError::DivergedLoss { epoch, step },
                e => e,
            };
            let (loss, grads) = batch_loss_and_gradients(&params, train, batch).map_err(diverged)?;
            if !loss.is_finite() {
                return Err(ModelError::DivergedLoss { epoch, step });
            }
            total += loss * batch.len() as f64;
            adam.apply(&mut params, &grads);
        }
        epoch_loss.push(total / train.len() as f64);

        let f1 = evaluate(&params, valid, config.f1_average).map_err(|e| match e {
            ModelError::NonFiniteActivation(_) => ModelError::DivergedLoss { epoch, step: order.len().div_ceil(config.batch_size) },
            e => e,
        })?;
        epoch_f1.push(f1);
        if best.0 == 0 || f1 > best.1 {
            best = (epoch, f1, params.clone());
        }
    }

    let (best_epoch, best_f1, params) = best;
    Ok(TrainOutcome {
        params,
        epoch_f1,
        epoch_loss,
        best_epoch,
        best_f1,
    })
}

/// One [`ScoreRecord`] per example, taking language and split from the
/// sample of the same id in `corpus`.
pub fn score_records(
    params: &ModelParams,
    data: &Dataset,
    corpus: &Corpus,
    model_id: &str,
) -> Result<Vec<ScoreRecord>, ModelError> {
    let meta: BTreeMap<&str, (Language, Split)> =
        corpus.iter().map(|s| (s.id.as_str(), (s.language, s.split))).collect();
    let scores = predict_dataset(params, data)?;
    Ok(data
        .examples
        .iter()
        .zip(scores)
        .filter_map(|(ex, p)| {
            meta.get(ex.id.as_str()).map(|&(language, split)| ScoreRecord {
                sample_id: ex.id.clone(),
                model_id: model_id.to_string(),
                p_nonidiomatic: p,
                language,
                split,
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::super::tests::small_config;
    use super::super::{batch_loss, Example};
    use super::*;
    use crate::locality::LocalityVector;

    fn toy_dataset(n: usize) -> Dataset {
        let examples = (0..n)
            .map(|i| {
                let the_star = i % 2 == 0;
                Example {
                    id: format!("t{i}"),
                    buckets: vec![i % 16, (i * 7) % 16, 3],
                    vector: LocalityVector { the_star, ..Default::default() },
                    label: Some(if the_star { Label::NonIdiomatic } else { Label::Idiomatic }),
                }
            })
            .collect();
        Dataset { examples }
    }

    #[test]
    fn zero_epochs_returns_initial_params() {
        let config = ModelConfig { epochs: 0, ..small_config() };
        let data = toy_dataset(8);
        let out = train(&config, &data, &data, 11).unwrap();
        let init = ModelParams::init(&config, &mut ChaCha8Rng::seed_from_u64(11));
        assert_eq!(out.params, init);
        assert_eq!(out.best_epoch, 0);
        assert_eq!(out.epoch_f1.len(), 1);
        assert_eq!(out.best_f1, evaluate(&init, &data, F1Average::Macro).unwrap());
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let config = ModelConfig { epochs: 3, batch_size: 3, ..small_config() };
        let data = toy_dataset(10);
        let a = train(&config, &data, &data, 5).unwrap();
        let b = train(&config, &data, &data, 5).unwrap();
        assert_eq!(a, b);
        let c = train(&config, &data, &data, 6).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn one_small_step_lowers_loss() {
        let config = small_config();
        let data = toy_dataset(6);
        let batch: Vec<usize> = (0..6).collect();
        let mut params = ModelParams::init(&config, &mut ChaCha8Rng::seed_from_u64(9));
        let (before, grads) = batch_loss_and_gradients(&params, &data, &batch).unwrap();
        let mut adam = AdamState::new(&params, config.adam, 1e-4);
        adam.apply(&mut params, &grads);
        let after = batch_loss(&params, &data, &batch).unwrap();
        assert!(after < before, "{after} >= {before}");
    }

    #[test]
    fn lazy_adam_skips_untouched_rows() {
        let config = small_config();
        let data = toy_dataset(1);
        let mut params = ModelParams::init(&config, &mut ChaCha8Rng::seed_from_u64(4));
        let before = params.clone();
        let (_, grads) = batch_loss_and_gradients(&params, &data, &[0]).unwrap();
        AdamState::new(&params, config.adam, 1e-2).apply(&mut params, &grads);
        for row in 0..config.hash_buckets {
            let touched = grads.text_embed.contains_key(&row);
            assert_eq!(params.text_embed.row(row) != before.text_embed.row(row), touched, "row {row}");
        }
    }

    #[test]
    fn unlabeled_or_empty_data_is_rejected() {
        let config = small_config();
        let data = toy_dataset(4);
        assert!(matches!(train(&config, &Dataset::default(), &data, 0), Err(ModelError::EmptyDataset(_))));
        let mut unlabeled = toy_dataset(4);
        unlabeled.examples[2].label = None;
        assert!(matches!(train(&config, &data, &unlabeled, 0), Err(ModelError::MissingLabel(id)) if id == "t2"));
    }

    #[test]
    fn divergence_is_reported() {
        let config = ModelConfig { epochs: 1, learning_rate: 1e308, ..small_config() };
        let data = toy_dataset(40);
        match train(&config, &data, &data, 0) {
            Err(ModelError::DivergedLoss { epoch: 1, .. }) => {}
            other => panic!("expected divergence, got {:?}", other.map(|o| o.best_f1)),
        }
    }
}
