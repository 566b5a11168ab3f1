//! The deployable detector artifact: a trained one-class SVM plus everything
//! needed to score a raw request the same way training did — the selected
//! feature list in rank order, the preprocessing configuration and the
//! vector scaling.

use std::collections::BTreeMap;

use reqsieve_core::ocsvm::OcsvmModel;
use reqsieve_core::preprocess::{canonicalize, PreprocessConfig};
use reqsieve_core::request::{ClassLabel, RawRequest};
use reqsieve_core::tokenizer::tokenize;
use reqsieve_core::vectorizer::{bow_vector, SparseVector, Vocabulary, VectorScaling};
use reqsieve_core::Error as CoreError;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorModel {
    svm: OcsvmModel,
    selected_features: Vec<String>,
    vocab: Vocabulary,
    pub preprocess: PreprocessConfig,
    pub scaling: VectorScaling,
    /// Content hashes of the inputs this model was built from.
    pub inputs: BTreeMap<String, String>,
}

impl DetectorModel {
    pub fn new(
        svm: OcsvmModel,
        selected_features: Vec<String>,
        preprocess: PreprocessConfig,
        scaling: VectorScaling,
    ) -> Result<Self> {
        if selected_features.is_empty() {
            return Err(CoreError::InvalidParameter("selected feature list is empty").into());
        }
        if selected_features.len() != svm.dim() {
            return Err(CoreError::DimMismatch {
                left: selected_features.len(),
                right: svm.dim(),
            }
            .into());
        }
        let vocab = Vocabulary::new(&selected_features)?;
        Ok(DetectorModel {
            svm,
            selected_features,
            vocab,
            preprocess,
            scaling,
            inputs: BTreeMap::new(),
        })
    }

    pub fn with_inputs(mut self, inputs: BTreeMap<String, String>) -> Self {
        self.inputs = inputs;
        self
    }

    pub fn svm(&self) -> &OcsvmModel {
        &self.svm
    }

    pub fn svm_mut(&mut self) -> &mut OcsvmModel {
        &mut self.svm
    }

    pub fn selected_features(&self) -> &[String] {
        &self.selected_features
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn theta(&self) -> f64 {
        self.svm.theta()
    }

    pub fn n_features(&self) -> usize {
        self.selected_features.len()
    }

    /// Canonicalize, tokenize, count against the selected features, scale.
    pub fn vectorize(&self, req: &RawRequest) -> SparseVector {
        let text = canonicalize(req, &self.preprocess);
        let tokens = tokenize(text.as_str());
        let bow = bow_vector(&tokens, &self.vocab);
        self.scaling.apply(&bow)
    }

    /// Decision value of a raw request.
    pub fn score(&self, req: &RawRequest) -> f64 {
        self.svm
            .decision(&self.vectorize(req))
            .expect("vectorize produces the model dimension")
    }

    /// Normal/attack call at the model's θ.
    pub fn classify(&self, req: &RawRequest) -> ClassLabel {
        if self.score(req) >= self.svm.theta() {
            ClassLabel::Normal
        } else {
            ClassLabel::Attack
        }
    }
}
