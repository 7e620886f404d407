//! Seeded toy corpus whose label is decided by the "The *" feature alone.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Label, Language, Provenance, Sample, Split};
use crate::locality::{featurize, LocalityVector, WordLists};
use crate::locator::Locator;

const MWES: [&str; 8] = [
    "gold mine",
    "home run",
    "cold feet",
    "big fish",
    "night owl",
    "red tape",
    "hot potato",
    "wild card",
];
const OTHER_DETERMINERS: [&str; 5] = ["my", "his", "our", "this", "every"];
const FILLER: [&str; 12] = [
    "yesterday", "someone", "found", "near", "quite", "city", "people", "talked", "about", "again", "over", "river",
];

/// A labeled corpus and its feature vectors.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub corpus: Corpus,
    pub vectors: BTreeMap<String, LocalityVector>,
}

impl SyntheticData {
    /// The first `n` samples and the rest, each with their vectors.
    pub fn split_at(&self, n: usize, first: Split, second: Split) -> (SyntheticData, SyntheticData) {
        let part = |samples: &[Sample], split: Split| {
            let samples: Vec<Sample> = samples.iter().cloned().map(|s| Sample { split, ..s }).collect();
            let vectors = samples.iter().map(|s| (s.id.clone(), self.vectors[&s.id])).collect();
            SyntheticData {
                corpus: Corpus::new(samples, self.corpus.provenance().clone()),
                vectors,
            }
        };
        let n = n.min(self.corpus.len());
        let (a, b) = self.corpus.samples().split_at(n);
        (part(a, first), part(b, second))
    }
}

/// `n` English samples with balanced labels. NonIdiomatic samples put "the"
/// directly before the MWE; Idiomatic ones use another determiner and may
/// still contain "the" elsewhere.
pub fn the_star_corpus(n: usize, seed: u64) -> SyntheticData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words = WordLists::default();
    let locator = Locator::default();
    let mut samples = Vec::with_capacity(n);
    let mut vectors = BTreeMap::new();
    for i in 0..n {
        let non_idiomatic = i % 2 == 1;
        let mwe = *MWES.choose(&mut rng).expect("non-empty");
        let det = if non_idiomatic {
            "the"
        } else {
            *OTHER_DETERMINERS.choose(&mut rng).expect("non-empty")
        };
        let mut words_before: Vec<&str> = (0..rng.gen_range(1..4)).map(|_| *FILLER.choose(&mut rng).expect("non-empty")).collect();
        if !non_idiomatic && rng.gen_bool(0.5) {
            words_before.insert(0, "the");
        }
        let after: Vec<&str> = (0..rng.gen_range(1..4)).map(|_| *FILLER.choose(&mut rng).expect("non-empty")).collect();
        let target = format!("{} {det} {mwe} {}.", words_before.join(" "), after.join(" "));
        let sample = Sample {
            id: format!("syn{i:04}"),
            language: Language::En,
            mwe: mwe.to_string(),
            previous: None,
            target,
            next: None,
            label: Some(if non_idiomatic { Label::NonIdiomatic } else { Label::Idiomatic }),
            split: Split::ZeroShotTrain,
        };
        let vector = featurize(&sample, &[], &words, &locator)
            .expect("no NER spans to validate")
            .vector;
        vectors.insert(sample.id.clone(), vector);
        samples.push(sample);
    }
    SyntheticData {
        corpus: Corpus::new(
            samples,
            Provenance {
                path: format!("synthetic:the_star:{seed}").into(),
                mapping: Default::default(),
            },
        ),
        vectors,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_equals_the_star() {
        let data = the_star_corpus(200, 3);
        assert_eq!(data.corpus.len(), 200);
        for s in &data.corpus {
            let v = data.vectors[&s.id];
            assert_eq!(v.the_star, s.label == Some(Label::NonIdiomatic), "{}", s.target);
        }
    }

    #[test]
    fn deterministic_and_splittable() {
        let a = the_star_corpus(50, 1);
        let b = the_star_corpus(50, 1);
        assert_eq!(a.corpus.samples(), b.corpus.samples());
        let (train, valid) = a.split_at(40, Split::ZeroShotTrain, Split::Validation);
        assert_eq!((train.corpus.len(), valid.corpus.len()), (40, 10));
        assert!(valid.corpus.iter().all(|s| s.split == Split::Validation));
        assert_eq!(valid.vectors.len(), 10);
    }
}
