//! End-to-end orchestration: rank features over the corpus union, train on
//! the normal split only, pick θ on a validation ROC, evaluate, and score
//! streams. Attacks never enter OCSVM training; they are used for ranking,
//! for the F̂ grid-search mix and for operating-point selection.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use reqsieve_core::evaluate::{confusion, grid_search, pick_theta, roc, RocCurve};
use reqsieve_core::feature_select::{rank_features_with, select_top, FeatureRanking};
use reqsieve_core::ocsvm;
use reqsieve_core::preprocess::{canonicalize, PreprocessConfig};
use reqsieve_core::request::{ClassLabel, Corpus, RawRequest};
use reqsieve_core::tokenizer::{build_dictionary, tokenize};
use reqsieve_core::vectorizer::{bow_vector, tfidf_matrix, SparseVector, VectorScaling, Vocabulary};
use reqsieve_core::Error as CoreError;

use crate::artifacts::{sha256_file, ConfusionDto, MetricsReport, RankingMeta};
use crate::config::{RunConfig, SplitFractions};
use crate::corpus::{load_corpus_auto, parse_jsonl_request};
use crate::error::{Error, Result};
use crate::model::DetectorModel;

// ChaCha stream ids so the seeded draws stay independent per purpose
const STREAM_SPLIT: u64 = 0;
const STREAM_MIX: u64 = 1;
const STREAM_SUBSAMPLE: u64 = 2;

fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn shuffled_indices(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut indices: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        indices.swap(i, j);
    }
    indices
}

/// Deterministic seeded shuffle into train/validation/test. Train and
/// validation take the floor of their fractions; everything left over lands
/// in test, so no request is dropped.
pub fn split_corpus(
    corpus: &Corpus,
    fractions: &SplitFractions,
    seed: u64,
) -> (Corpus, Corpus, Corpus) {
    let n = corpus.len();
    let indices = shuffled_indices(n, &mut seeded(seed, STREAM_SPLIT));
    let n_train = (n as f64 * fractions.train).floor() as usize;
    let n_val = (n as f64 * fractions.validation).floor() as usize;
    let pick = |range: &[usize], part: &str| {
        let requests = range.iter().map(|&i| corpus.requests[i].clone()).collect();
        Corpus::new(format!("{}/{part}", corpus.source_name), requests)
    };
    (
        pick(&indices[..n_train], "train"),
        pick(&indices[n_train..n_train + n_val], "validation"),
        pick(&indices[n_train + n_val..], "test"),
    )
}

/// Seeded subsample of a fraction of the corpus (at least one request),
/// keeping original order.
pub fn subsample(corpus: &Corpus, fraction: f64, seed: u64) -> Result<Corpus> {
    if fraction.is_nan() || fraction <= 0.0 || fraction > 1.0 {
        return Err(Error::Config("subsample fraction must lie in (0, 1]".into()));
    }
    let n = corpus.len();
    let k = ((n as f64 * fraction).round() as usize).clamp(1, n);
    let mut picked = shuffled_indices(n, &mut seeded(seed, STREAM_SUBSAMPLE));
    picked.truncate(k);
    picked.sort_unstable();
    let requests = picked.iter().map(|&i| corpus.requests[i].clone()).collect();
    Ok(Corpus::new(
        format!("{}/subsample", corpus.source_name),
        requests,
    ))
}

/// Copy of the corpus with every request forced to one label.
pub fn relabeled(corpus: &Corpus, label: ClassLabel) -> Corpus {
    let requests = corpus
        .requests
        .iter()
        .map(|r| r.clone().with_label(label))
        .collect();
    Corpus::new(corpus.source_name.clone(), requests)
}

fn doc_tokens(corpus: &Corpus, cfg: &PreprocessConfig) -> Vec<Vec<String>> {
    corpus
        .requests
        .iter()
        .map(|req| {
            let text = canonicalize(req, cfg);
            tokenize(text.as_str())
                .into_iter()
                .map(str::to_string)
                .collect()
        })
        .collect()
}

fn corpus_vectors(
    corpus: &Corpus,
    vocab: &Vocabulary,
    preprocess: &PreprocessConfig,
    scaling: VectorScaling,
) -> Vec<SparseVector> {
    corpus
        .requests
        .iter()
        .map(|req| {
            let text = canonicalize(req, preprocess);
            let tokens = tokenize(text.as_str());
            scaling.apply(&bow_vector(&tokens, vocab))
        })
        .collect()
}

/// A persisted-ready ranking plus its provenance.
#[derive(Debug, Clone)]
pub struct RankArtifact {
    pub ranking: FeatureRanking,
    pub meta: RankingMeta,
}

/// Vectorized corpus splits shared by training and the grid sweep.
pub struct PreparedSets {
    pub train: Vec<SparseVector>,
    pub validation: Vec<SparseVector>,
    pub attacks: Vec<SparseVector>,
    /// Validation normals blended with attacks at `attack_mix_ratio`.
    pub unlabeled_mix: Vec<SparseVector>,
}

/// Loads both corpora, splits the normals by the seeded shuffle and
/// vectorizes everything against the selected features.
pub fn prepare_sets(cfg: &RunConfig, selected: &[String]) -> Result<PreparedSets> {
    let vocab = Vocabulary::new(selected)?;
    let normals = load_corpus_auto(&cfg.normal_corpus)?;
    let attacks = load_corpus_auto(&cfg.attack_corpus)?;
    let (train_split, validation_split, _) = split_corpus(&normals, &cfg.split, cfg.seed);
    if train_split.len() < 2 {
        return Err(CoreError::DegenerateInput("training split has fewer than 2 requests").into());
    }
    if validation_split.is_empty() {
        return Err(Error::Config(
            "validation split is empty; adjust the split fractions".into(),
        ));
    }
    let train = corpus_vectors(&train_split, &vocab, &cfg.preprocess, cfg.scaling);
    let validation = corpus_vectors(&validation_split, &vocab, &cfg.preprocess, cfg.scaling);
    let attack_vecs = corpus_vectors(&attacks, &vocab, &cfg.preprocess, cfg.scaling);

    let want = (cfg.attack_mix_ratio * validation.len() as f64).round() as usize;
    let take = want.clamp(1, attack_vecs.len());
    let order = shuffled_indices(attack_vecs.len(), &mut seeded(cfg.seed, STREAM_MIX));
    let mut unlabeled_mix = validation.clone();
    unlabeled_mix.extend(order[..take].iter().map(|&i| attack_vecs[i].clone()));

    Ok(PreparedSets {
        train,
        validation,
        attacks: attack_vecs,
        unlabeled_mix,
    })
}

/// Label used for ranking: the file's label when present, the corpus role
/// otherwise.
fn effective_label(req: &RawRequest, role: ClassLabel) -> ClassLabel {
    if req.label.is_labeled() {
        req.label
    } else {
        role
    }
}

/// Dictionary over the union of both corpora, TF-IDF vectorization, and the
/// MI ranking of every dictionary token.
pub fn run_rank(cfg: &RunConfig) -> Result<RankArtifact> {
    cfg.validate()?;
    let normals = load_corpus_auto(&cfg.normal_corpus)?;
    let attacks = load_corpus_auto(&cfg.attack_corpus)?;

    let dict = build_dictionary(&attacks, &normals, &cfg.preprocess)?;
    let vocab = Vocabulary::from(&dict);

    let mut docs = doc_tokens(&attacks, &cfg.preprocess);
    docs.extend(doc_tokens(&normals, &cfg.preprocess));
    let mut labels: Vec<ClassLabel> = attacks
        .requests
        .iter()
        .map(|r| effective_label(r, ClassLabel::Attack))
        .collect();
    labels.extend(
        normals
            .requests
            .iter()
            .map(|r| effective_label(r, ClassLabel::Normal)),
    );

    let borrowed: Vec<Vec<&str>> = docs
        .iter()
        .map(|d| d.iter().map(String::as_str).collect())
        .collect();
    let matrix = tfidf_matrix(&borrowed, &vocab)?;
    let ranking = rank_features_with(cfg.estimator, &matrix, &labels)?;

    Ok(RankArtifact {
        ranking,
        meta: RankingMeta {
            normals_sha256: sha256_file(&cfg.normal_corpus)?,
            attacks_sha256: sha256_file(&cfg.attack_corpus)?,
            n_docs: borrowed.len(),
        },
    })
}

/// Trains on the training split of the normals only, optionally sweeping
/// (ν, γ) with F̂ over validation normals plus an attack mix, then sets θ
/// from a validation ROC.
pub fn run_train(cfg: &RunConfig, ranking: &FeatureRanking) -> Result<DetectorModel> {
    cfg.validate()?;
    let selected = select_top(ranking, cfg.n_features)?;
    let sets = prepare_sets(cfg, &selected)?;

    let (nu, gamma) = if cfg.wants_grid() {
        let result = grid_search(
            &sets.train,
            &sets.validation,
            &sets.unlabeled_mix,
            &cfg.nu_grid,
            &cfg.gamma_grid,
            &cfg.solver,
        )?;
        result.best
    } else {
        (cfg.nu, cfg.gamma)
    };

    let mut svm = ocsvm::train(&sets.train, nu, gamma, &cfg.solver)?;

    // operating point from the validation ROC: held-out normals vs attacks
    let mut scores: Vec<(f64, ClassLabel)> =
        Vec::with_capacity(sets.validation.len() + sets.attacks.len());
    for v in &sets.validation {
        scores.push((svm.decision(v)?, ClassLabel::Normal));
    }
    for v in &sets.attacks {
        scores.push((svm.decision(v)?, ClassLabel::Attack));
    }
    let curve = roc(&scores)?;
    svm.set_theta(pick_theta(&curve, cfg.theta_policy)?);

    let inputs = BTreeMap::from([
        ("normals_sha256".to_string(), sha256_file(&cfg.normal_corpus)?),
        ("attacks_sha256".to_string(), sha256_file(&cfg.attack_corpus)?),
    ]);
    Ok(
        DetectorModel::new(svm, selected, cfg.preprocess.clone(), cfg.scaling)?
            .with_inputs(inputs),
    )
}

/// Scores a labeled test corpus: Table-shaped metrics at the model's θ plus
/// the full ROC curve. Unlabeled requests are skipped.
pub fn run_eval(model: &DetectorModel, test: &Corpus) -> Result<(MetricsReport, RocCurve)> {
    let scores: Vec<(f64, ClassLabel)> = test
        .requests
        .iter()
        .filter(|r| r.label.is_labeled())
        .map(|r| (model.score(r), r.label))
        .collect();
    let curve = roc(&scores)?;
    let counts = confusion(&scores, model.theta())?;
    let report = MetricsReport {
        acc: counts.accuracy(),
        tpr: counts.tpr(),
        fpr: counts.fpr(),
        auc: curve.auc,
        theta: model.theta(),
        n_features: model.n_features(),
        counts: ConfusionDto {
            tp: counts.true_positives,
            fp: counts.false_positives,
            tn: counts.true_negatives,
            fn_: counts.false_negatives,
        },
        inputs: model.inputs.clone(),
    };
    Ok((report, curve))
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct StreamStats {
    pub lines: usize,
    pub scored: usize,
    pub malformed: usize,
}

#[derive(Serialize)]
struct ScoreRecord<'a> {
    id: usize,
    decision: f64,
    label: &'a str,
}

/// Scores a JSONL request stream line by line: one output line per input
/// line, order preserved, constant memory. Malformed lines go to the
/// diagnostic writer and do not stop the stream.
pub fn run_score_stream(
    model: &DetectorModel,
    input: impl BufRead,
    mut output: impl Write,
    mut diag: impl Write,
) -> Result<StreamStats> {
    let stream_err = |e| Error::io("<stream>", e);
    let mut stats = StreamStats::default();
    for (idx, line) in input.lines().enumerate() {
        let line = line.map_err(stream_err)?;
        stats.lines += 1;
        if line.trim().is_empty() {
            continue;
        }
        match parse_jsonl_request(&line) {
            Ok(req) => {
                let decision = model.score(&req);
                let record = ScoreRecord {
                    id: idx + 1,
                    decision,
                    label: if decision >= model.theta() {
                        "normal"
                    } else {
                        "attack"
                    },
                };
                let json = serde_json::to_string(&record).expect("score record serializes");
                writeln!(output, "{json}").map_err(stream_err)?;
                stats.scored += 1;
            }
            Err(reason) => {
                stats.malformed += 1;
                writeln!(diag, "line {}: {reason}", idx + 1).map_err(stream_err)?;
            }
        }
    }
    output.flush().map_err(stream_err)?;
    Ok(stats)
}
