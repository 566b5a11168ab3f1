//! Raw HTTP request records and corpus containers.

use alloc::string::String;
use alloc::vec::Vec;

/// Class assigned to a request, when known.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassLabel {
    Normal,
    Attack,
    /// Permitted in scoring and evaluation inputs only; ranking inputs must
    /// carry a concrete class.
    Unlabeled,
}

impl ClassLabel {
    pub fn is_labeled(self) -> bool {
        !matches!(self, ClassLabel::Unlabeled)
    }
}

/// One HTTP request as captured, before canonicalization.
///
/// `target` keeps the percent-encoding it arrived with; `body` is raw bytes
/// and may contain invalid UTF-8. Header names are expected to be unique
/// after case-folding (loaders merge duplicates with a comma join).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRequest {
    pub method: String,
    pub target: String,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
    pub label: ClassLabel,
}

impl RawRequest {
    pub fn new(method: impl Into<String>, target: impl Into<String>) -> Self {
        RawRequest {
            method: method.into(),
            target: target.into(),
            headers: Vec::new(),
            body: Vec::new(),
            label: ClassLabel::Unlabeled,
        }
    }

    pub fn with_label(mut self, label: ClassLabel) -> Self {
        self.label = label;
        self
    }

    pub fn with_header(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.headers.push((name.into(), value.into()));
        self
    }

    pub fn with_body(mut self, body: impl Into<Vec<u8>>) -> Self {
        self.body = body.into();
        self
    }
}

/// An ordered set of requests from one source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub requests: Vec<RawRequest>,
    pub source_name: String,
}

impl Corpus {
    pub fn new(source_name: impl Into<String>, requests: Vec<RawRequest>) -> Self {
        Corpus {
            requests,
            source_name: source_name.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }

    pub fn labels(&self) -> Vec<ClassLabel> {
        self.requests.iter().map(|r| r.label).collect()
    }
}
