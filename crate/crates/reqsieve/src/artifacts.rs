//! Persisted artifacts: token dictionary, feature ranking, model file, ROC
//! CSV, metrics report and grid-search table. Every artifact is versioned
//! and carries content hashes of its inputs where that makes sense.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use reqsieve_core::evaluate::{GridSearchResult, RocCurve};
use reqsieve_core::feature_select::{FeatureRanking, RankedFeature};
use reqsieve_core::ocsvm::{KernelParams, OcsvmModel};
use reqsieve_core::preprocess::{HeaderFilter, PreprocessConfig};
use reqsieve_core::tokenizer::TokenDictionary;
use reqsieve_core::vectorizer::{SparseVector, VectorScaling};

use crate::config::{parse_scaling, scaling_id};
use crate::error::{Error, Result};
use crate::escape::{escape_str, unescape_str};
use crate::model::DetectorModel;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

const DICTIONARY_HEADER: &str = "# reqsieve token dictionary v1";

pub fn write_dictionary(dict: &TokenDictionary, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{DICTIONARY_HEADER}").map_err(|e| Error::io(path, e))?;
    for token in dict.iter() {
        writeln!(w, "{}", escape_str(token)).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_dictionary(path: impl AsRef<Path>) -> Result<TokenDictionary> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(line) if line == DICTIONARY_HEADER => {}
        other => {
            return Err(Error::artifact(
                path,
                format!("expected {DICTIONARY_HEADER:?}, found {other:?}"),
            ))
        }
    }
    let mut tokens = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            return Err(Error::artifact(path, format!("empty token at line {}", idx + 2)));
        }
        let token = unescape_str(line)
            .map_err(|e| Error::artifact(path, format!("line {}: {e}", idx + 2)))?;
        tokens.push(token);
    }
    Ok(TokenDictionary::from_tokens(tokens))
}

const RANKING_HEADER: &str = "# reqsieve feature ranking v1";

/// Provenance recorded alongside a ranking.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankingMeta {
    pub normals_sha256: String,
    pub attacks_sha256: String,
    pub n_docs: usize,
}

pub fn write_ranking(
    ranking: &FeatureRanking,
    meta: &RankingMeta,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{RANKING_HEADER}").map_err(io)?;
    writeln!(w, "# estimator: {}", ranking.estimator_id).map_err(io)?;
    writeln!(w, "# normals_sha256: {}", meta.normals_sha256).map_err(io)?;
    writeln!(w, "# attacks_sha256: {}", meta.attacks_sha256).map_err(io)?;
    writeln!(w, "# n_docs: {}", meta.n_docs).map_err(io)?;
    writeln!(w, "rank\ttoken\tmi_score").map_err(io)?;
    for entry in &ranking.entries {
        // 12 significant digits keep scores stable across platforms
        writeln!(
            w,
            "{}\t{}\t{:.11e}",
            entry.rank,
            escape_str(&entry.token),
            entry.mi_score
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_ranking(path: impl AsRef<Path>) -> Result<(FeatureRanking, RankingMeta)> {
    let path = path.as_ref();
    let bad = |reason: String| Error::artifact(path, reason);
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(line) if line == RANKING_HEADER => {}
        other => return Err(bad(format!("expected {RANKING_HEADER:?}, found {other:?}"))),
    }

    let mut comments = BTreeMap::new();
    let mut header_seen = false;
    let mut entries = Vec::new();
    for line in lines.by_ref() {
        if let Some(rest) = line.strip_prefix("# ") {
            let (key, value) = rest
                .split_once(": ")
                .ok_or_else(|| bad(format!("bad comment line {line:?}")))?;
            comments.insert(key.to_string(), value.to_string());
            continue;
        }
        if line == "rank\ttoken\tmi_score" {
            header_seen = true;
            break;
        }
        return Err(bad(format!("unexpected line before header: {line:?}")));
    }
    if !header_seen {
        return Err(bad("missing column header".to_string()));
    }
    for line in lines {
        let mut cols = line.split('\t');
        let (Some(rank), Some(token), Some(score), None) =
            (cols.next(), cols.next(), cols.next(), cols.next())
        else {
            return Err(bad(format!("expected 3 tab-separated columns: {line:?}")));
        };
        let rank: usize = rank.parse().map_err(|_| bad(format!("bad rank {rank:?}")))?;
        let token = unescape_str(token).map_err(|e| bad(format!("token: {e}")))?;
        let mi_score: f64 = score
            .parse()
            .map_err(|_| bad(format!("bad score {score:?}")))?;
        entries.push(RankedFeature {
            token,
            mi_score,
            rank,
        });
    }

    let required = |key: &str| {
        comments
            .get(key)
            .cloned()
            .ok_or_else(|| bad(format!("missing comment key {key:?}")))
    };
    let estimator_id = required("estimator")?;
    let meta = RankingMeta {
        normals_sha256: required("normals_sha256")?,
        attacks_sha256: required("attacks_sha256")?,
        n_docs: required("n_docs")?
            .parse()
            .map_err(|_| bad("bad n_docs".to_string()))?,
    };
    Ok((
        FeatureRanking {
            entries,
            estimator_id,
        },
        meta,
    ))
}

const MODEL_FORMAT: &str = "reqsieve-model";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct PreprocessDto {
    filter_mode: String,
    filter_names: Vec<String>,
    include_body: bool,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    selected_features: Vec<String>,
    preprocess: PreprocessDto,
    scaling: String,
    nu: f64,
    gamma: f64,
    rho: f64,
    theta: f64,
    alphas: Vec<f64>,
    support_vectors: Vec<Vec<f64>>,
    inputs: BTreeMap<String, String>,
}

fn dense(v: &SparseVector) -> Vec<f64> {
    let mut row = vec![0.0; v.dim()];
    for &(idx, value) in v.entries() {
        row[idx] = value;
    }
    row
}

fn sparse(row: &[f64]) -> std::result::Result<SparseVector, reqsieve_core::Error> {
    let entries: Vec<(usize, f64)> = row
        .iter()
        .enumerate()
        .filter(|&(_, v)| *v != 0.0)
        .map(|(i, v)| (i, *v))
        .collect();
    SparseVector::new(row.len(), entries)
}

pub fn write_model(model: &DetectorModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (filter_mode, filter_names) = match &model.preprocess.filter {
        HeaderFilter::Allow(names) => ("allow", names.clone()),
        HeaderFilter::Deny(names) => ("deny", names.clone()),
    };
    let svm = model.svm();
    let file = ModelFile {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        selected_features: model.selected_features().to_vec(),
        preprocess: PreprocessDto {
            filter_mode: filter_mode.to_string(),
            filter_names,
            include_body: model.preprocess.include_body,
        },
        scaling: scaling_id(model.scaling).to_string(),
        nu: svm.nu(),
        gamma: svm.gamma(),
        rho: svm.rho(),
        theta: svm.theta(),
        alphas: svm.alphas().to_vec(),
        support_vectors: svm.support_vectors().iter().map(dense).collect(),
        inputs: model.inputs.clone(),
    };
    let json = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::artifact(path, e.to_string()))?;
    fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_model(path: impl AsRef<Path>) -> Result<DetectorModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ModelFile =
        serde_json::from_str(&text).map_err(|e| Error::artifact(path, e.to_string()))?;
    if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
        return Err(Error::artifact(
            path,
            format!(
                "unsupported artifact {}/{} (expected {MODEL_FORMAT}/{MODEL_VERSION})",
                file.format, file.version
            ),
        ));
    }

    let filter = match file.preprocess.filter_mode.as_str() {
        "allow" => HeaderFilter::allowlist(file.preprocess.filter_names)
            .map_err(|e| Error::artifact(path, e.to_string()))?,
        "deny" => HeaderFilter::denylist(file.preprocess.filter_names),
        other => return Err(Error::artifact(path, format!("bad filter_mode {other:?}"))),
    };
    let preprocess = PreprocessConfig {
        filter,
        include_body: file.preprocess.include_body,
    };
    let scaling: VectorScaling =
        parse_scaling(&file.scaling).map_err(|e| Error::artifact(path, e))?;

    let support_vectors = file
        .support_vectors
        .iter()
        .map(|row| sparse(row))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::artifact(path, e.to_string()))?;
    let params = KernelParams::new(file.gamma).map_err(|e| Error::artifact(path, e.to_string()))?;
    let svm = OcsvmModel::from_parts(
        support_vectors,
        file.alphas,
        file.rho,
        params,
        file.nu,
        file.theta,
    )
    .map_err(|e| Error::artifact(path, e.to_string()))?;

    Ok(
        DetectorModel::new(svm, file.selected_features, preprocess, scaling)?
            .with_inputs(file.inputs),
    )
}

/// `theta,tpr,fpr` rows plus a trailing `# auc=` comment; ready for plotting.
pub fn write_roc_csv(curve: &RocCurve, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "theta,tpr,fpr").map_err(io)?;
    for point in &curve.points {
        writeln!(w, "{},{},{}", point.theta, point.tpr, point.fpr).map_err(io)?;
    }
    writeln!(w, "# auc={}", curve.auc).map_err(io)?;
    w.flush().map_err(io)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConfusionDto {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// The Table-1/2-shaped metrics record.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MetricsReport {
    pub acc: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub auc: f64,
    pub theta: f64,
    pub n_features: usize,
    pub counts: ConfusionDto,
    pub inputs: BTreeMap<String, String>,
}

pub fn write_metrics(report: &MetricsReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let json =
        serde_json::to_string_pretty(report).map_err(|e| Error::artifact(path, e.to_string()))?;
    fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_metrics(path: impl AsRef<Path>) -> Result<MetricsReport> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::artifact(path, e.to_string()))
}

/// Grid table as CSV with the winning cell and the F̂ definition recorded in
/// trailing comments.
pub fn write_grid_csv(result: &GridSearchResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "nu,gamma,f_hat").map_err(io)?;
    for cell in &result.table {
        writeln!(w, "{},{},{}", cell.nu, cell.gamma, cell.f_hat).map_err(io)?;
    }
    writeln!(w, "# f_hat=r^2/q at theta=0").map_err(io)?;
    writeln!(w, "# best_nu={} best_gamma={}", result.best.0, result.best.1).map_err(io)?;
    w.flush().map_err(io)
}
