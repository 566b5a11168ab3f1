//! Whitespace tokenization and token dictionaries.
//!
//! Tokens are maximal runs of non-separator characters; special characters
//! like `.` `;` `<` `>` `=` `/` stay inside tokens because crafted input is
//! exactly what the downstream ranking should see. Separators are the ASCII
//! space produced by canonicalization plus tab, CR and LF from raw requests.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::preprocess::{canonicalize, CanonicalText, PreprocessConfig};
use crate::request::Corpus;

fn is_separator(c: char) -> bool {
    matches!(c, ' ' | '\t' | '\r' | '\n')
}

/// Splits canonical text on whitespace runs. Never yields an empty token.
pub fn tokenize(text: &str) -> Vec<&str> {
    text.split(is_separator).filter(|t| !t.is_empty()).collect()
}

/// Tokenizes a [`CanonicalText`] directly.
pub fn tokenize_canonical(text: &CanonicalText) -> Vec<&str> {
    tokenize(text.as_str())
}

/// Ordered set of unique tokens with stable index assignment, iterated in
/// lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenDictionary {
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl TokenDictionary {
    /// Builds a dictionary from any token iterator; duplicates collapse and
    /// the result is sorted.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let set: BTreeSet<String> = tokens
            .into_iter()
            .map(|t| t.as_ref().to_string())
            .collect();
        let tokens: Vec<String> = set.into_iter().collect();
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        TokenDictionary { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }
}

/// Builds the token dictionary over the union of an attack corpus and a
/// normal corpus, canonicalizing every request with `cfg`.
///
/// Set semantics make the result independent of corpus order and request
/// order.
pub fn build_dictionary(
    attacks: &Corpus,
    normals: &Corpus,
    cfg: &PreprocessConfig,
) -> Result<TokenDictionary> {
    if attacks.is_empty() || normals.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut set: BTreeSet<String> = BTreeSet::new();
    for req in attacks.requests.iter().chain(normals.requests.iter()) {
        let text = canonicalize(req, cfg);
        for token in tokenize(text.as_str()) {
            if !set.contains(token) {
                set.insert(token.to_string());
            }
        }
    }
    Ok(TokenDictionary::from_tokens(set))
}
