//! Vocabulary construction and token bookkeeping.

use std::collections::HashMap;

use regex::Regex;
use std::sync::OnceLock;

use crate::corpus::TrainingCorpus;
use crate::error::{Error, Result};

/// Token identifier; index into the vocabulary order.
pub type TokenId = u32;

/// An ordered token -> id map with corpus frequencies.
///
/// Order is descending frequency with lexicographic tie-breaking, so the same
/// corpus always yields the same vocabulary and therefore the same
/// negative-sampling tables and output files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, TokenId>,
}

impl Vocabulary {
    /// Builds a vocabulary from explicit (token, count) pairs, re-sorting them
    /// into canonical order.
    pub fn from_counts(counts: impl IntoIterator<Item = (String, u64)>) -> Result<Self> {
        let mut pairs: Vec<(String, u64)> = counts.into_iter().collect();
        if pairs.is_empty() {
            return Err(Error::EmptyCorpus("no tokens".into()));
        }
        pairs.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut tokens = Vec::with_capacity(pairs.len());
        let mut freqs = Vec::with_capacity(pairs.len());
        let mut index = HashMap::with_capacity(pairs.len());
        for (token, count) in pairs {
            if index.insert(token.clone(), tokens.len() as TokenId).is_some() {
                return Err(Error::DuplicateToken(token));
            }
            tokens.push(token);
            freqs.push(count);
        }
        Ok(Vocabulary {
            tokens,
            counts: freqs,
            index,
        })
    }

    /// Builds a vocabulary of tokens with unit counts, preserving the given order.
    ///
    /// Used when loading vector files, where no frequency information exists.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptyCorpus("no tokens".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, token) in tokens.iter().enumerate() {
            if index.insert(token.clone(), i as TokenId).is_some() {
                return Err(Error::DuplicateToken(token.clone()));
            }
        }
        let counts = vec![1; tokens.len()];
        Ok(Vocabulary {
            tokens,
            counts,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Id of `token`, or `None` when out of vocabulary. Lookups never fall
    /// back to a default id: a silent placeholder would leak into covariance
    /// statistics.
    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn count(&self, id: TokenId) -> u64 {
        self.counts[id as usize]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn iter(&self) -> impl Iterator<Item = (TokenId, &str, u64)> {
        self.tokens
            .iter()
            .zip(&self.counts)
            .enumerate()
            .map(|(i, (t, &c))| (i as TokenId, t.as_str(), c))
    }

    pub fn total_count(&self) -> u64 {
        self.counts.iter().sum()
    }
}

fn token_pattern() -> &'static Regex {
    static PATTERN: OnceLock<Regex> = OnceLock::new();
    // A token is a maximal run of characters that are neither Unicode
    // whitespace nor Unicode punctuation.
    PATTERN.get_or_init(|| Regex::new(r"[^\s\p{P}]+").unwrap())
}

/// Lowercases `text` and splits it on Unicode whitespace and punctuation.
pub fn tokenize(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    token_pattern()
        .find_iter(&lowered)
        .map(|m| m.as_str().to_owned())
        .collect()
}

/// Counts tokens across the corpus and keeps those occurring at least
/// `min_count` times.
pub fn build_vocabulary(corpus: &TrainingCorpus, min_count: u64) -> Result<Vocabulary> {
    if min_count < 1 {
        return Err(Error::InvalidConfig("min_count must be >= 1".into()));
    }
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for doc in corpus.documents() {
        for token in &doc.tokens {
            *counts.entry(token.as_str()).or_insert(0) += 1;
        }
    }
    if counts.is_empty() {
        return Err(Error::EmptyCorpus("corpus contains no tokens".into()));
    }
    let kept = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .map(|(t, c)| (t.to_owned(), c));
    Vocabulary::from_counts(kept).map_err(|e| match e {
        Error::EmptyCorpus(_) => {
            Error::EmptyCorpus(format!("no token occurs at least {min_count} times"))
        }
        other => other,
    })
}
