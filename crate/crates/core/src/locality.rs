//! Locality features: boolean cues read off the one or two tokens and
//! characters around an MWE occurrence.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Language, Sample};
use crate::locator::{strip_edges, tokenize, Locator, Occurrence, Token};

pub const FEATURE_COUNT: usize = 6;

pub const QUOTE_CHARS: &[char] = &['\'', '"', '“', '”', '‘', '’'];

/// One locality feature. Declaration order is the slot order of the encoded vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Feature {
    Entity,
    Capitalized,
    BeA,
    TheStar,
    Quotation,
    Parenthesis,
}

impl Feature {
    pub const ALL: [Feature; FEATURE_COUNT] = [
        Feature::Entity,
        Feature::Capitalized,
        Feature::BeA,
        Feature::TheStar,
        Feature::Quotation,
        Feature::Parenthesis,
    ];

    pub fn slot(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Feature::Entity => "Entity",
            Feature::Capitalized => "Capitalized",
            Feature::BeA => "Be a *",
            Feature::TheStar => "The *",
            Feature::Quotation => "Quotation",
            Feature::Parenthesis => "Parenthesis",
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NerSpan {
    #[serde(rename = "start")]
    pub start_char: usize,
    #[serde(rename = "end")]
    pub end_char: usize,
    pub tag: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct LocalityVector {
    pub entity: bool,
    pub capitalized: bool,
    pub be_a: bool,
    pub the_star: bool,
    pub quotation: bool,
    pub parenthesis: bool,
}

impl LocalityVector {
    pub fn get(&self, feature: Feature) -> bool {
        match feature {
            Feature::Entity => self.entity,
            Feature::Capitalized => self.capitalized,
            Feature::BeA => self.be_a,
            Feature::TheStar => self.the_star,
            Feature::Quotation => self.quotation,
            Feature::Parenthesis => self.parenthesis,
        }
    }

    pub fn set(&mut self, feature: Feature, value: bool) {
        let slot = match feature {
            Feature::Entity => &mut self.entity,
            Feature::Capitalized => &mut self.capitalized,
            Feature::BeA => &mut self.be_a,
            Feature::TheStar => &mut self.the_star,
            Feature::Quotation => &mut self.quotation,
            Feature::Parenthesis => &mut self.parenthesis,
        };
        *slot = value;
    }

    pub fn slots(&self) -> [u8; FEATURE_COUNT] {
        Feature::ALL.map(|f| self.get(f) as u8)
    }

    pub fn from_slots(slots: [u8; FEATURE_COUNT]) -> Option<Self> {
        let mut v = LocalityVector::default();
        for (f, s) in Feature::ALL.into_iter().zip(slots) {
            match s {
                0 => {}
                1 => v.set(f, true),
                _ => return None,
            }
        }
        Some(v)
    }

    /// The vector whose slot `i` is bit `i` of `bits`; covers all 64 vectors for `bits < 64`.
    pub fn from_bits(bits: u8) -> Self {
        let mut v = LocalityVector::default();
        for f in Feature::ALL {
            v.set(f, bits >> f.slot() & 1 == 1);
        }
        v
    }

    pub fn as_f64(&self) -> [f64; FEATURE_COUNT] {
        self.slots().map(f64::from)
    }

    pub fn union(self, other: LocalityVector) -> LocalityVector {
        let mut out = self;
        for f in Feature::ALL {
            out.set(f, self.get(f) || other.get(f));
        }
        out
    }
}

/// Function words consulted by the "Be a *" and "The *" features.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageWords {
    pub be_verbs: Vec<String>,
    pub indefinite_articles: Vec<String>,
    pub definite_articles: Vec<String>,
    /// Preposition+article contractions ("do", "na", ...). Consulted by
    /// "The *" only when `include_contractions` is set.
    #[serde(default)]
    pub contractions: Vec<String>,
    #[serde(default)]
    pub include_contractions: bool,
}

fn owned(words: &[&str]) -> Vec<String> {
    words.iter().map(|w| w.to_string()).collect()
}

impl LanguageWords {
    pub fn english() -> Self {
        LanguageWords {
            be_verbs: owned(&["am", "is", "are", "was", "were", "be", "been", "being"]),
            indefinite_articles: owned(&["a", "an"]),
            definite_articles: owned(&["the"]),
            contractions: Vec::new(),
            include_contractions: false,
        }
    }

    pub fn portuguese() -> Self {
        LanguageWords {
            be_verbs: owned(&[
                "ser", "sou", "és", "é", "somos", "sois", "são", "era", "eras", "éramos", "eram", "fui", "foste", "foi",
                "fomos", "foram", "seja", "sejam", "será", "serão", "seria", "sendo", "sido", "estar", "estou", "estás",
                "está", "estamos", "estão", "estava", "estavam", "esteve", "estiveram", "esteja", "estará", "estaria",
                "estando", "estado",
            ]),
            indefinite_articles: owned(&["um", "uma"]),
            definite_articles: owned(&["o", "a", "os", "as"]),
            contractions: owned(&["do", "da", "dos", "das", "no", "na", "nos", "nas", "ao", "à", "aos", "às"]),
            include_contractions: false,
        }
    }

    pub fn galician() -> Self {
        LanguageWords {
            be_verbs: owned(&[
                "ser", "son", "es", "é", "somos", "sodes", "era", "eras", "eramos", "eran", "fun", "foi", "fomos",
                "foron", "sexa", "sexan", "será", "serán", "sería", "sendo", "sido", "estar", "estou", "estás", "está",
                "estamos", "estades", "están", "estaba", "estaban", "estivo", "estiveron", "estea", "estará",
                "estaría", "estando", "estado",
            ]),
            indefinite_articles: owned(&["un", "unha"]),
            definite_articles: owned(&["o", "a", "os", "as"]),
            contractions: owned(&["do", "da", "dos", "das", "no", "na", "nos", "nas", "ao", "á", "aos", "ás"]),
            include_contractions: false,
        }
    }

    fn is_be_verb(&self, word: &str) -> bool {
        self.be_verbs.iter().any(|w| w == word)
    }

    fn is_indefinite(&self, word: &str) -> bool {
        self.indefinite_articles.iter().any(|w| w == word)
    }

    fn is_definite(&self, word: &str) -> bool {
        self.definite_articles.iter().any(|w| w == word)
            || (self.include_contractions && self.contractions.iter().any(|w| w == word))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WordLists {
    #[serde(rename = "en")]
    pub english: LanguageWords,
    #[serde(rename = "pt")]
    pub portuguese: LanguageWords,
    #[serde(rename = "gl")]
    pub galician: LanguageWords,
}

impl Default for WordLists {
    fn default() -> Self {
        WordLists {
            english: LanguageWords::english(),
            portuguese: LanguageWords::portuguese(),
            galician: LanguageWords::galician(),
        }
    }
}

impl WordLists {
    pub fn for_language(&self, language: Language) -> &LanguageWords {
        match language {
            Language::En => &self.english,
            Language::Pt => &self.portuguese,
            Language::Gl => &self.galician,
        }
    }

    /// Names of languages whose lists are unusable (a required list is empty).
    pub fn empty_lists(&self) -> Vec<Language> {
        Language::ALL
            .into_iter()
            .filter(|&l| {
                let w = self.for_language(l);
                w.be_verbs.is_empty() || w.indefinite_articles.is_empty() || w.definite_articles.is_empty()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LocalityWarning {
    /// The MWE was not found in the target; every feature is false.
    EmptyOccurrences { id: String },
}

impl fmt::Display for LocalityWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LocalityWarning::EmptyOccurrences { id } => write!(f, "{id}: MWE not found in target, all features false"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub vector: LocalityVector,
    pub occurrences: Vec<Occurrence>,
    pub warning: Option<LocalityWarning>,
}

#[derive(Debug, Error)]
pub enum LocalityError {
    #[error("{id}: NER span {start}..{end} is outside the {len}-character target")]
    SpanOutOfRange { id: String, start: usize, end: usize, len: usize },
    #[error("line {line}: {message}")]
    BadJson { line: usize, message: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Computes the locality vector from occurrences already located in `sample.target`.
///
/// Each feature is the OR of its predicate over all occurrences.
pub fn extract(sample: &Sample, occurrences: &[Occurrence], ner: &[NerSpan], words: &WordLists) -> Extraction {
    if occurrences.is_empty() {
        return Extraction {
            vector: LocalityVector::default(),
            occurrences: Vec::new(),
            warning: Some(LocalityWarning::EmptyOccurrences { id: sample.id.clone() }),
        };
    }
    let chars: Vec<char> = sample.target.chars().collect();
    let tokens = tokenize(&sample.target);
    let words = words.for_language(sample.language);
    let mwe_tokens: Vec<&str> = sample
        .mwe
        .split_whitespace()
        .map(strip_edges)
        .filter(|t| !t.is_empty())
        .collect();
    let first_word = tokens.iter().find(|t| !t.is_empty()).map(|t| t.index);

    let mut vector = LocalityVector::default();
    for occ in occurrences {
        let one = LocalityVector {
            entity: has_entity(occ, ner),
            capitalized: is_capitalized(occ, &tokens, &mwe_tokens, first_word),
            be_a: preceded_by_be_a(occ, &tokens, words),
            the_star: preceded_by_the(occ, &tokens, words),
            quotation: surrounded_by(occ, &chars, QUOTE_CHARS, QUOTE_CHARS),
            parenthesis: surrounded_by(occ, &chars, &['('], &[')']),
        };
        vector = vector.union(one);
    }
    Extraction {
        vector,
        occurrences: occurrences.to_vec(),
        warning: None,
    }
}

/// Locates the sample's MWE and extracts its features. NER spans are checked
/// against the target length first.
pub fn featurize(
    sample: &Sample,
    ner: &[NerSpan],
    words: &WordLists,
    locator: &Locator,
) -> Result<Extraction, LocalityError> {
    let len = sample.target.chars().count();
    if let Some(bad) = ner.iter().find(|s| s.start_char >= s.end_char || s.end_char > len) {
        return Err(LocalityError::SpanOutOfRange {
            id: sample.id.clone(),
            start: bad.start_char,
            end: bad.end_char,
            len,
        });
    }
    let occurrences = locator.locate(&sample.mwe, &sample.target);
    Ok(extract(sample, &occurrences, ner, words))
}

fn has_entity(occ: &Occurrence, ner: &[NerSpan]) -> bool {
    ner.iter().any(|s| {
        let ner_in_occ = occ.start_char <= s.start_char && s.end_char <= occ.end_char;
        let occ_in_ner = s.start_char <= occ.start_char && occ.end_char <= s.end_char;
        ner_in_occ || occ_in_ner
    })
}

fn starts_uppercase(word: &str) -> bool {
    word.chars().next().is_some_and(char::is_uppercase)
}

fn is_capitalized(occ: &Occurrence, tokens: &[Token], mwe_tokens: &[&str], first_word: Option<usize>) -> bool {
    occ.token_indices.iter().enumerate().any(|(k, &idx)| {
        let dataset_capitalized = mwe_tokens.get(k).is_some_and(|w| starts_uppercase(w));
        Some(idx) != first_word && !dataset_capitalized && starts_uppercase(&tokens[idx].core)
    })
}

fn preceding_word(tokens: &[Token], occ: &Occurrence, back: usize) -> Option<String> {
    let first = *occ.token_indices.first()?;
    first.checked_sub(back).map(|i| tokens[i].lowercase())
}

fn preceded_by_be_a(occ: &Occurrence, tokens: &[Token], words: &LanguageWords) -> bool {
    match (preceding_word(tokens, occ, 2), preceding_word(tokens, occ, 1)) {
        (Some(verb), Some(article)) => words.is_be_verb(&verb) && words.is_indefinite(&article),
        _ => false,
    }
}

fn preceded_by_the(occ: &Occurrence, tokens: &[Token], words: &LanguageWords) -> bool {
    preceding_word(tokens, occ, 1).is_some_and(|w| words.is_definite(&w))
}

fn surrounded_by(occ: &Occurrence, chars: &[char], before: &[char], after: &[char]) -> bool {
    let prev = match occ.start_char.checked_sub(1).map(|i| (i, chars[i])) {
        Some((i, ' ')) => i.checked_sub(1).map(|j| chars[j]),
        Some((_, c)) => Some(c),
        None => None,
    };
    let next = chars.get(occ.end_char).copied();
    matches!((prev, next), (Some(p), Some(n)) if before.contains(&p) && after.contains(&n))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NerRecord {
    pub id: String,
    pub spans: Vec<NerSpan>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub id: String,
    pub features: [u8; FEATURE_COUNT],
}

fn read_jsonl<T: serde::de::DeserializeOwned, R: BufRead>(reader: R) -> Result<Vec<(usize, T)>, LocalityError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| LocalityError::BadJson {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push((i + 1, value));
    }
    Ok(out)
}

/// Reads NER span JSON-lines into a map keyed by sample id.
pub fn read_ner_jsonl<R: BufRead>(reader: R) -> Result<BTreeMap<String, Vec<NerSpan>>, LocalityError> {
    let mut map = BTreeMap::new();
    for (line, rec) in read_jsonl::<NerRecord, _>(reader)? {
        if let Some(bad) = rec.spans.iter().find(|s| s.start_char >= s.end_char) {
            return Err(LocalityError::BadJson {
                line,
                message: format!("empty or inverted span {}..{}", bad.start_char, bad.end_char),
            });
        }
        if map.insert(rec.id.clone(), rec.spans).is_some() {
            return Err(LocalityError::DuplicateId { line, id: rec.id });
        }
    }
    Ok(map)
}

pub fn read_features_jsonl<R: BufRead>(reader: R) -> Result<BTreeMap<String, LocalityVector>, LocalityError> {
    let mut map = BTreeMap::new();
    for (line, rec) in read_jsonl::<FeatureRecord, _>(reader)? {
        let v = LocalityVector::from_slots(rec.features).ok_or_else(|| LocalityError::BadJson {
            line,
            message: "feature slots must be 0 or 1".into(),
        })?;
        if map.insert(rec.id.clone(), v).is_some() {
            return Err(LocalityError::DuplicateId { line, id: rec.id });
        }
    }
    Ok(map)
}

pub fn write_features_jsonl<'a, W, I>(mut writer: W, rows: I) -> std::io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = (&'a str, &'a LocalityVector)>,
{
    for (id, v) in rows {
        let rec = FeatureRecord {
            id: id.to_string(),
            features: v.slots(),
        };
        serde_json::to_writer(&mut writer, &rec)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Split;
    use crate::locator::locate;
    use proptest::prelude::*;

    fn sample(mwe: &str, target: &str) -> Sample {
        Sample {
            id: "s".into(),
            language: Language::En,
            mwe: mwe.into(),
            previous: None,
            target: target.into(),
            next: None,
            label: None,
            split: Split::Validation,
        }
    }

    fn features(mwe: &str, target: &str, ner: &[NerSpan]) -> LocalityVector {
        let s = sample(mwe, target);
        featurize(&s, ner, &WordLists::default(), &Locator::default()).unwrap().vector
    }

    #[test]
    fn be_a_row() {
        let v = features("gold mine", "This means that search data is a gold mine for marketing strategy.", &[]);
        assert_eq!(v, LocalityVector { be_a: true, ..Default::default() });
    }

    #[test]
    fn capitalized_the_row() {
        let v = features(
            "gold mine",
            "The Gold Mine’s plain frontage & sparse, white-walled dining room suggest that it’s a quick-fix refuelling stop rather than a place to linger.",
            &[],
        );
        assert_eq!(v, LocalityVector { capitalized: true, the_star: true, ..Default::default() });
    }

    #[test]
    fn hashtag_row_has_no_adjacent_quotes() {
        let v = features(
            "gold mine",
            "The hashtag “Qixia gold mine incident” has been viewed many million of times on the social media site Weibo.",
            &[],
        );
        assert_eq!(v, LocalityVector::default());
    }

    #[test]
    fn adjacent_quotes_and_parentheses() {
        assert!(features("gold mine", "He said \"gold mine\" twice.", &[]).quotation);
        assert!(features("gold mine", "He said “gold mine” twice.", &[]).quotation);
        assert!(features("gold mine", "He said ' gold mine' twice.", &[]).quotation);
        assert!(!features("gold mine", "He said \"gold mine twice.", &[]).quotation);
        let v = features("gold mine", "A mine (gold mine) here.", &[]);
        assert!(v.parenthesis && !v.quotation);
    }

    #[test]
    fn no_occurrence_warns_and_is_all_false() {
        let s = sample("dry land", "no water anywhere");
        let ex = featurize(&s, &[], &WordLists::default(), &Locator::default()).unwrap();
        assert_eq!(ex.vector, LocalityVector::default());
        assert_eq!(ex.warning, Some(LocalityWarning::EmptyOccurrences { id: "s".into() }));
    }

    #[test]
    fn entity_uses_two_way_containment() {
        let target = "The Gold Mine’s plain frontage";
        let span = |s, e| NerSpan { start_char: s, end_char: e, tag: "ORG".into() };
        assert!(features("gold mine", target, &[span(4, 13)]).entity);
        assert!(features("gold mine", target, &[span(0, 15)]).entity);
        assert!(features("gold mine", target, &[span(4, 8)]).entity);
        assert!(!features("gold mine", target, &[span(0, 8)]).entity);
    }

    #[test]
    fn sentence_initial_and_dataset_capitals_are_exempt() {
        assert!(!features("gold mine", "Gold mine workers struck.", &[]).capitalized);
        assert!(features("gold mine", "Gold Mine workers struck.", &[]).capitalized);
        assert!(!features("Big Apple", "I love the Big Apple.", &[]).capitalized);
        assert!(!features("gold mine", "\" Gold mine\" was said.", &[]).capitalized);
    }

    #[test]
    fn portuguese_lists_apply() {
        let mut s = sample("mina de ouro", "Isto é uma mina de ouro para nós.");
        s.language = Language::Pt;
        let v = featurize(&s, &[], &WordLists::default(), &Locator::default()).unwrap().vector;
        assert!(v.be_a);
        s.target = "Visitamos a mina de ouro.".into();
        let v = featurize(&s, &[], &WordLists::default(), &Locator::default()).unwrap().vector;
        assert!(v.the_star);
        s.target = "O trabalho na mina de ouro.".into();
        let mut lists = WordLists::default();
        assert!(!featurize(&s, &[], &lists, &Locator::default()).unwrap().vector.the_star);
        lists.portuguese.include_contractions = true;
        assert!(featurize(&s, &[], &lists, &Locator::default()).unwrap().vector.the_star);
    }

    #[test]
    fn out_of_range_ner_span_is_rejected() {
        let s = sample("gold mine", "gold mine");
        let ner = [NerSpan { start_char: 2, end_char: 40, tag: "X".into() }];
        assert!(matches!(
            featurize(&s, &ner, &WordLists::default(), &Locator::default()),
            Err(LocalityError::SpanOutOfRange { .. })
        ));
    }

    #[test]
    fn slot_encoding_is_fixed() {
        let v = LocalityVector { be_a: true, parenthesis: true, ..Default::default() };
        assert_eq!(v.slots(), [0, 0, 1, 0, 0, 1]);
        assert_eq!(LocalityVector::from_slots(v.slots()), Some(v));
        assert_eq!(LocalityVector::from_slots([0, 0, 2, 0, 0, 0]), None);
        let all: std::collections::HashSet<_> = (0..64).map(LocalityVector::from_bits).collect();
        assert_eq!(all.len(), 64);
    }

    #[test]
    fn jsonl_formats() {
        let input = "{\"id\": \"a\", \"spans\": [{\"start\": 0, \"end\": 4, \"tag\": \"ORG\"}]}\n\n{\"id\": \"b\", \"spans\": []}\n";
        let map = read_ner_jsonl(input.as_bytes()).unwrap();
        assert_eq!(map["a"][0], NerSpan { start_char: 0, end_char: 4, tag: "ORG".into() });
        assert!(map["b"].is_empty());

        let dup = "{\"id\": \"a\", \"spans\": []}\n{\"id\": \"a\", \"spans\": []}\n";
        assert!(matches!(read_ner_jsonl(dup.as_bytes()), Err(LocalityError::DuplicateId { line: 2, .. })));
        assert!(matches!(read_ner_jsonl("{oops".as_bytes()), Err(LocalityError::BadJson { line: 1, .. })));

        let v = LocalityVector { entity: true, quotation: true, ..Default::default() };
        let mut buf = Vec::new();
        write_features_jsonl(&mut buf, [("x", &v)]).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "{\"id\":\"x\",\"features\":[1,0,0,0,1,0]}\n");
        assert_eq!(read_features_jsonl(&buf[..]).unwrap()["x"], v);
    }

    fn sentences() -> impl Strategy<Value = String> {
        let word = prop::sample::select(vec![
            "gold", "Gold", "mine", "Mine's", "the", "The", "is", "was", "a", "an", "\"gold", "mine\"", "(gold", "mine)", "x", "Y",
        ]);
        prop::collection::vec(word, 1..10).prop_map(|w| w.join(" "))
    }

    fn span_strategy() -> impl Strategy<Value = (usize, usize)> {
        (0usize..60, 1usize..20).prop_map(|(s, l)| (s, s + l))
    }

    proptest! {
        #[test]
        fn adding_ner_span_never_clears_entity(target in sentences(), spans in prop::collection::vec(span_strategy(), 0..4), extra in span_strategy()) {
            let len = target.chars().count();
            let to_span = |(s, e): (usize, usize)| NerSpan { start_char: s.min(len.saturating_sub(1)), end_char: e.min(len), tag: "X".into() };
            let mut ner: Vec<NerSpan> = spans.into_iter().map(to_span).filter(|s| s.start_char < s.end_char).collect();
            let before = features("gold mine", &target, &ner);
            let extra = to_span(extra);
            prop_assume!(extra.start_char < extra.end_char);
            ner.push(extra);
            let after = features("gold mine", &target, &ner);
            prop_assert!(!before.entity || after.entity);
            prop_assert_eq!(LocalityVector { entity: false, ..before }, LocalityVector { entity: false, ..after });
        }

        #[test]
        fn lowercasing_first_token_keeps_capitalized(target in sentences()) {
            let mut parts: Vec<String> = target.split(' ').map(str::to_string).collect();
            let before = features("gold mine", &target, &[]).capitalized;
            parts[0] = parts[0].to_lowercase();
            let after = features("gold mine", &parts.join(" "), &[]).capitalized;
            prop_assert_eq!(before, after);
        }

        #[test]
        fn disjoint_ner_spans_equal_no_spans(target in sentences(), spans in prop::collection::vec(span_strategy(), 0..4)) {
            let len = target.chars().count();
            let occ = locate("gold mine", &target);
            let disjoint: Vec<NerSpan> = spans
                .into_iter()
                .map(|(s, e)| NerSpan { start_char: s, end_char: e.min(len), tag: "X".into() })
                .filter(|s| s.start_char < s.end_char)
                .filter(|s| occ.iter().all(|o| s.end_char <= o.start_char || o.end_char <= s.start_char))
                .collect();
            prop_assert_eq!(features("gold mine", &target, &[]), features("gold mine", &target, &disjoint));
        }
    }
}
