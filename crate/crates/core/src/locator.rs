//! Finds MWE occurrences in a sentence.
//!
//! Matching is token-by-token over whitespace tokens whose edge punctuation
//! has been stripped. A sentence token matches an MWE token when, ignoring
//! case, it starts with the MWE token and is at most [`DEFAULT_SUFFIX_TOLERANCE`]
//! characters longer ("runs" for "run", "Mine's" for "mine").
//!
//! All offsets are character (Unicode scalar) indices, not byte offsets.

use serde::{Deserialize, Serialize};

pub const DEFAULT_SUFFIX_TOLERANCE: usize = 3;

/// Characters stripped from both ends of a whitespace token.
pub const EDGE_PUNCTUATION: &[char] = &[
    '.', ',', ';', ':', '!', '?', '"', '\'', '“', '”', '‘', '’', '(', ')', '[', ']',
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Occurrence {
    pub start_char: usize,
    /// Exclusive.
    pub end_char: usize,
    pub matched_text: String,
    pub token_indices: Vec<usize>,
}

/// A whitespace token of a sentence, reduced to its punctuation-stripped core.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub index: usize,
    /// Character span of the stripped core.
    pub start_char: usize,
    pub end_char: usize,
    pub core: String,
}

impl Token {
    pub fn is_empty(&self) -> bool {
        self.core.is_empty()
    }

    pub fn lowercase(&self) -> String {
        self.core.to_lowercase()
    }
}

pub fn strip_edges(token: &str) -> &str {
    token.trim_matches(EDGE_PUNCTUATION)
}

/// Splits on whitespace and strips edge punctuation from every token.
/// Tokens made only of punctuation are kept with an empty core so that
/// token indices stay aligned with plain whitespace splitting.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let raw_start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        let raw_end = i;
        let mut start = raw_start;
        let mut end = raw_end;
        while start < end && EDGE_PUNCTUATION.contains(&chars[start]) {
            start += 1;
        }
        while end > start && EDGE_PUNCTUATION.contains(&chars[end - 1]) {
            end -= 1;
        }
        tokens.push(Token {
            index: tokens.len(),
            start_char: start,
            end_char: end,
            core: chars[start..end].iter().collect(),
        });
    }
    tokens
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Locator {
    pub suffix_tolerance: usize,
}

impl Default for Locator {
    fn default() -> Self {
        Locator {
            suffix_tolerance: DEFAULT_SUFFIX_TOLERANCE,
        }
    }
}

impl Locator {
    pub fn new(suffix_tolerance: usize) -> Self {
        Locator { suffix_tolerance }
    }

    fn token_matches(&self, sentence_token: &str, mwe_token: &str) -> bool {
        if mwe_token.is_empty() {
            return false;
        }
        match sentence_token.strip_prefix(mwe_token) {
            Some(rest) => rest.chars().count() <= self.suffix_tolerance,
            None => false,
        }
    }

    /// All non-overlapping occurrences of `mwe` in `target`, left to right.
    pub fn locate(&self, mwe: &str, target: &str) -> Vec<Occurrence> {
        let mwe_tokens: Vec<String> = mwe
            .split_whitespace()
            .map(|t| strip_edges(t).to_lowercase())
            .filter(|t| !t.is_empty())
            .collect();
        if mwe_tokens.is_empty() {
            return Vec::new();
        }
        let tokens = tokenize(target);
        let lowered: Vec<String> = tokens.iter().map(Token::lowercase).collect();
        let chars: Vec<char> = target.chars().collect();

        let n = mwe_tokens.len();
        let mut found = Vec::new();
        let mut i = 0;
        while i + n <= tokens.len() {
            let hit = (0..n).all(|k| self.token_matches(&lowered[i + k], &mwe_tokens[k]));
            if hit {
                let start = tokens[i].start_char;
                let end = tokens[i + n - 1].end_char;
                found.push(Occurrence {
                    start_char: start,
                    end_char: end,
                    matched_text: chars[start..end].iter().collect(),
                    token_indices: (i..i + n).collect(),
                });
                i += n;
            } else {
                i += 1;
            }
        }
        found
    }
}

/// [`Locator::locate`] with the default suffix tolerance.
pub fn locate(mwe: &str, target: &str) -> Vec<Occurrence> {
    Locator::default().locate(mwe, target)
}
