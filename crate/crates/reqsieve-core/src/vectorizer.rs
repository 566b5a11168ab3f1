//! Bag-of-words and TF-IDF vectorization against a fixed vocabulary.
//!
//! TF is the in-document occurrence ratio (count over total token count of
//! the document, out-of-vocabulary tokens included), IDF is the raw natural
//! logarithm `ln(n_docs / df)` with no smoothing and no row normalization.
//! Terms absent from the corpus being vectorized get IDF 0 so the function
//! stays total over any vocabulary.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tokenizer::TokenDictionary;

/// Sparse vector with strictly increasing indices and strictly positive
/// values.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    dim: usize,
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn new(dim: usize, entries: Vec<(usize, f64)>) -> Result<Self> {
        let mut prev: Option<usize> = None;
        for &(idx, value) in &entries {
            if idx >= dim {
                return Err(Error::InvalidParameter("sparse index out of bounds"));
            }
            if prev.is_some_and(|p| p >= idx) {
                return Err(Error::InvalidParameter("sparse indices must be strictly increasing"));
            }
            if value <= 0.0 || !value.is_finite() {
                return Err(Error::InvalidParameter("sparse values must be positive and finite"));
            }
            prev = Some(idx);
        }
        Ok(SparseVector { dim, entries })
    }

    pub fn zeros(dim: usize) -> Self {
        SparseVector {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn value_at(&self, idx: usize) -> f64 {
        self.entries
            .iter()
            .find(|(i, _)| *i == idx)
            .map(|(_, v)| *v)
            .unwrap_or(0.0)
    }

    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v).sum()
    }

    pub fn squared_norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum()
    }

    /// Squared Euclidean distance via a merge walk over both entry lists.
    pub fn squared_distance(&self, other: &SparseVector) -> Result<f64> {
        if self.dim != other.dim {
            return Err(Error::DimMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j) = (0usize, 0usize);
        let mut acc = 0.0;
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                core::cmp::Ordering::Less => {
                    acc += a[i].1 * a[i].1;
                    i += 1;
                }
                core::cmp::Ordering::Greater => {
                    acc += b[j].1 * b[j].1;
                    j += 1;
                }
                core::cmp::Ordering::Equal => {
                    let d = a[i].1 - b[j].1;
                    acc += d * d;
                    i += 1;
                    j += 1;
                }
            }
        }
        for &(_, v) in &a[i..] {
            acc += v * v;
        }
        for &(_, v) in &b[j..] {
            acc += v * v;
        }
        Ok(acc)
    }
}

/// How raw BoW counts are transformed before they reach the one-class SVM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VectorScaling {
    /// Raw occurrence counts.
    #[default]
    None,
    /// Presence indicators: every nonzero count becomes 1.
    Binary,
    /// Euclidean unit length; zero vectors stay zero.
    L2,
}

impl VectorScaling {
    pub fn apply(self, v: &SparseVector) -> SparseVector {
        match self {
            VectorScaling::None => v.clone(),
            VectorScaling::Binary => SparseVector {
                dim: v.dim,
                entries: v.entries.iter().map(|&(i, _)| (i, 1.0)).collect(),
            },
            VectorScaling::L2 => {
                let norm = libm::sqrt(v.squared_norm());
                if norm == 0.0 {
                    return v.clone();
                }
                SparseVector {
                    dim: v.dim,
                    entries: v.entries.iter().map(|&(i, x)| (i, x / norm)).collect(),
                }
            }
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            VectorScaling::None => "none",
            VectorScaling::Binary => "binary",
            VectorScaling::L2 => "l2",
        }
    }
}

/// Token list with positional lookup. Order is the caller's (lexicographic
/// for a full dictionary, rank order for a selected subset).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Vocabulary {
    pub fn new<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(|t| t.as_ref().to_string()).collect();
        let mut index = BTreeMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::InvalidParameter("vocabulary tokens must be unique"));
            }
        }
        Ok(Vocabulary { tokens, index })
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
}

impl From<&TokenDictionary> for Vocabulary {
    fn from(dict: &TokenDictionary) -> Self {
        // A dictionary is already unique, so this cannot fail.
        Vocabulary::new(dict.tokens()).expect("dictionary tokens are unique")
    }
}

/// Rows of sparse vectors sharing one vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: Vec<SparseVector>,
    pub vocab: Vocabulary,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        self.vocab.len()
    }
}

/// Occurrence counts of vocabulary tokens; out-of-vocabulary tokens are
/// ignored.
pub fn bow_vector(tokens: &[&str], vocab: &Vocabulary) -> SparseVector {
    let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
    for token in tokens {
        if let Some(idx) = vocab.index_of(token) {
            *counts.entry(idx).or_insert(0) += 1;
        }
    }
    let entries = counts.into_iter().map(|(i, c)| (i, c as f64)).collect();
    SparseVector {
        dim: vocab.len(),
        entries,
    }
}

/// TF-IDF matrix over tokenized documents. Document frequencies come from
/// `docs` itself; empty documents yield zero rows.
pub fn tfidf_matrix(docs: &[Vec<&str>], vocab: &Vocabulary) -> Result<FeatureMatrix> {
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let n_docs = docs.len() as f64;
    let counts: Vec<(SparseVector, usize)> = docs
        .iter()
        .map(|tokens| (bow_vector(tokens, vocab), tokens.len()))
        .collect();

    let mut df = alloc::vec![0u64; vocab.len()];
    for (bow, _) in &counts {
        for &(idx, _) in bow.entries() {
            df[idx] += 1;
        }
    }
    let idf: Vec<f64> = df
        .iter()
        .map(|&d| if d == 0 { 0.0 } else { libm::log(n_docs / d as f64) })
        .collect();

    let rows = counts
        .into_iter()
        .map(|(bow, total)| {
            if total == 0 {
                return SparseVector::zeros(vocab.len());
            }
            let entries: Vec<(usize, f64)> = bow
                .entries()
                .iter()
                .filter_map(|&(idx, count)| {
                    let cell = count / total as f64 * idf[idx];
                    (cell != 0.0).then_some((idx, cell))
                })
                .collect();
            SparseVector {
                dim: vocab.len(),
                entries,
            }
        })
        .collect();

    Ok(FeatureMatrix {
        rows,
        vocab: vocab.clone(),
    })
}
