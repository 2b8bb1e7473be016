//! Reference word-piece style tokenizer.
//!
//! A word whose core (edge punctuation stripped, lowercased) is present in a
//! fixed vocabulary stays a single token. Any other word of at least two
//! characters is split into two sub-tokens, the second carrying a `##` prefix.
//! The split is deterministic, so the same word always produces the same
//! sub-tokens wherever it appears.

use std::collections::HashSet;

pub const SUBWORD_PREFIX: &str = "##";

const DEFAULT_VOCAB: &str = include_str!("../data/vocab.txt");

/// A tokenized word sequence. `word_spans[w] = (start, end)` gives the
/// half-open token index range of source word `w`; spans are contiguous,
/// ordered, and cover every token exactly once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
    pub word_spans: Vec<(usize, usize)>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Strip non-alphanumeric characters from both edges of a word.
pub fn strip_edge_punct(word: &str) -> &str {
    word.trim_matches(|c: char| !c.is_alphanumeric())
}

/// Character length of a word, edge punctuation excluded.
pub fn word_len(word: &str) -> usize {
    strip_edge_punct(word).chars().count()
}

#[derive(Debug, Clone)]
pub struct Tokenizer {
    vocab: HashSet<String>,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Self::new(
            DEFAULT_VOCAB
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_string),
        )
    }
}

impl Tokenizer {
    pub fn new(vocab: impl IntoIterator<Item = String>) -> Self {
        Self {
            vocab: vocab.into_iter().map(|w| w.to_lowercase()).collect(),
        }
    }

    /// Tokenize a single word. In-vocabulary words and words whose core is
    /// shorter than two characters stay whole; everything else splits into
    /// a first half and a `##`-prefixed remainder.
    pub fn tokenize_word(&self, word: &str) -> Vec<String> {
        let core = strip_edge_punct(word);
        let core_len = core.chars().count();
        if core_len < 2 || self.vocab.contains(&core.to_lowercase()) {
            return vec![word.to_string()];
        }
        let chars: Vec<char> = word.chars().collect();
        let half = chars.len().div_ceil(2);
        let head: String = chars[..half].iter().collect();
        let tail: String = chars[half..].iter().collect();
        vec![head, format!("{SUBWORD_PREFIX}{tail}")]
    }

    /// Whether the tokenizer splits this word into two or more tokens.
    pub fn is_composite(&self, word: &str) -> bool {
        self.tokenize_word(word).len() > 1
    }

    pub fn sequence(&self, words: &[&str]) -> TokenSequence {
        let mut tokens = Vec::with_capacity(words.len());
        let mut word_spans = Vec::with_capacity(words.len());
        for word in words {
            let start = tokens.len();
            tokens.extend(self.tokenize_word(word));
            word_spans.push((start, tokens.len()));
        }
        TokenSequence { tokens, word_spans }
    }

    pub fn sequence_from_text(&self, text: &str) -> TokenSequence {
        let words: Vec<&str> = text.split_whitespace().collect();
        self.sequence(&words)
    }
}
