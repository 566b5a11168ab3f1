//! Run configuration: defaults, the TOML config file, and CLI-facing parse
//! helpers. Flag values override config-file values, which override the
//! built-in defaults.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use reqsieve_core::evaluate::ThetaPolicy;
use reqsieve_core::feature_select::MiEstimator;
use reqsieve_core::ocsvm::TrainOptions;
use reqsieve_core::preprocess::{HeaderFilter, PreprocessConfig};
use reqsieve_core::vectorizer::VectorScaling;

use crate::error::{Error, Result};

/// Grids used when a sweep is requested without explicit values; they
/// include the (0.05, 0.5) operating pair.
pub const DEFAULT_NU_GRID: [f64; 4] = [0.01, 0.05, 0.1, 0.2];
pub const DEFAULT_GAMMA_GRID: [f64; 4] = [0.1, 0.5, 1.0, 2.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.7,
            validation: 0.15,
            test: 0.15,
        }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|f| f.is_nan() || *f <= 0.0) {
            return Err(Error::Config("split fractions must be positive".into()));
        }
        if parts.iter().sum::<f64>() > 1.0 + 1e-9 {
            return Err(Error::Config("split fractions must sum to at most 1".into()));
        }
        Ok(())
    }

    /// Parses "0.7,0.15,0.15".
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("bad split fractions {s:?}")))?;
        if parts.len() != 3 {
            return Err(Error::Config("split needs train,validation,test".into()));
        }
        let fractions = SplitFractions {
            train: parts[0],
            validation: parts[1],
            test: parts[2],
        };
        fractions.validate()?;
        Ok(fractions)
    }
}

/// Everything one end-to-end run depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub normal_corpus: PathBuf,
    pub attack_corpus: PathBuf,
    pub preprocess: PreprocessConfig,
    pub scaling: VectorScaling,
    pub estimator: MiEstimator,
    pub n_features: usize,
    pub nu: f64,
    pub gamma: f64,
    /// Non-empty grids switch training to a sweep over (ν, γ).
    pub nu_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    pub seed: u64,
    pub split: SplitFractions,
    /// Attacks blended per validation normal in the F̂/θ mix.
    pub attack_mix_ratio: f64,
    pub theta_policy: ThetaPolicy,
    pub solver: TrainOptions,
}

impl RunConfig {
    pub fn new(normal_corpus: impl Into<PathBuf>, attack_corpus: impl Into<PathBuf>) -> Self {
        RunConfig {
            normal_corpus: normal_corpus.into(),
            attack_corpus: attack_corpus.into(),
            preprocess: PreprocessConfig::default(),
            scaling: VectorScaling::None,
            estimator: MiEstimator::default(),
            n_features: 100,
            nu: 0.05,
            gamma: 0.5,
            nu_grid: Vec::new(),
            gamma_grid: Vec::new(),
            seed: 0,
            split: SplitFractions::default(),
            attack_mix_ratio: 1.0,
            theta_policy: ThetaPolicy::MaxYouden,
            solver: TrainOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_features == 0 {
            return Err(Error::Config("n_features must be at least 1".into()));
        }
        if self.nu.is_nan() || self.nu <= 0.0 || self.nu > 1.0 {
            return Err(Error::Config("nu must lie in (0, 1]".into()));
        }
        if self.gamma.is_nan() || self.gamma <= 0.0 {
            return Err(Error::Config("gamma must be positive".into()));
        }
        if self.attack_mix_ratio.is_nan() || self.attack_mix_ratio <= 0.0 {
            return Err(Error::Config("attack_mix_ratio must be positive".into()));
        }
        if self.nu_grid.is_empty() != self.gamma_grid.is_empty() {
            return Err(Error::Config(
                "nu_grid and gamma_grid must be given together".into(),
            ));
        }
        self.split.validate()
    }

    pub fn wants_grid(&self) -> bool {
        !self.nu_grid.is_empty()
    }
}

pub fn scaling_id(scaling: VectorScaling) -> &'static str {
    scaling.id()
}

pub fn parse_scaling(s: &str) -> std::result::Result<VectorScaling, String> {
    match s {
        "none" => Ok(VectorScaling::None),
        "binary" => Ok(VectorScaling::Binary),
        "l2" => Ok(VectorScaling::L2),
        other => Err(format!("unknown vector scaling {other:?} (none|binary|l2)")),
    }
}

pub fn parse_estimator(s: &str) -> std::result::Result<MiEstimator, String> {
    match s {
        "presence" => Ok(MiEstimator::BinaryPresence),
        "binned" => Ok(MiEstimator::EqualFrequencyBins { bins: 4 }),
        other => Err(format!("unknown estimator {other:?} (presence|binned)")),
    }
}

/// `max-youden` or `fpr-cap:<x>`.
pub fn parse_theta_policy(s: &str) -> std::result::Result<ThetaPolicy, String> {
    if s == "max-youden" {
        return Ok(ThetaPolicy::MaxYouden);
    }
    if let Some(cap) = s.strip_prefix("fpr-cap:") {
        let cap: f64 = cap
            .parse()
            .map_err(|_| format!("bad fpr cap in {s:?}"))?;
        return Ok(ThetaPolicy::FprCap(cap));
    }
    Err(format!("unknown theta policy {s:?} (max-youden|fpr-cap:<x>)"))
}

pub fn parse_grid(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad grid value {p:?}")))
        .collect()
}

/// The TOML config file; every key is optional and CLI flags win.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub normal_corpus: Option<PathBuf>,
    pub attack_corpus: Option<PathBuf>,
    pub seed: Option<u64>,
    pub n_features: Option<usize>,
    pub nu: Option<f64>,
    pub gamma: Option<f64>,
    pub nu_grid: Option<Vec<f64>>,
    pub gamma_grid: Option<Vec<f64>>,
    pub include_body: Option<bool>,
    pub header_denylist: Option<Vec<String>>,
    pub header_allowlist: Option<Vec<String>>,
    pub vector_scaling: Option<String>,
    pub estimator: Option<String>,
    pub split: Option<[f64; 3]>,
    pub attack_mix_ratio: Option<f64>,
    pub theta_policy: Option<String>,
    pub tol: Option<f64>,
}

impl ConfigFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Folds the file's values into a config; explicit CLI values are
    /// applied on top by the caller.
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(p) = &self.normal_corpus {
            cfg.normal_corpus = p.clone();
        }
        if let Some(p) = &self.attack_corpus {
            cfg.attack_corpus = p.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(n) = self.n_features {
            cfg.n_features = n;
        }
        if let Some(nu) = self.nu {
            cfg.nu = nu;
        }
        if let Some(gamma) = self.gamma {
            cfg.gamma = gamma;
        }
        if let Some(grid) = &self.nu_grid {
            cfg.nu_grid = grid.clone();
        }
        if let Some(grid) = &self.gamma_grid {
            cfg.gamma_grid = grid.clone();
        }
        if let Some(include_body) = self.include_body {
            cfg.preprocess.include_body = include_body;
        }
        if self.header_denylist.is_some() && self.header_allowlist.is_some() {
            return Err(Error::Config(
                "header_denylist and header_allowlist are mutually exclusive".into(),
            ));
        }
        if let Some(names) = &self.header_denylist {
            cfg.preprocess.filter = HeaderFilter::denylist(names);
        }
        if let Some(names) = &self.header_allowlist {
            cfg.preprocess.filter =
                HeaderFilter::allowlist(names).map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(s) = &self.vector_scaling {
            cfg.scaling = parse_scaling(s).map_err(Error::Config)?;
        }
        if let Some(s) = &self.estimator {
            cfg.estimator = parse_estimator(s).map_err(Error::Config)?;
        }
        if let Some([train, validation, test]) = self.split {
            cfg.split = SplitFractions {
                train,
                validation,
                test,
            };
        }
        if let Some(r) = self.attack_mix_ratio {
            cfg.attack_mix_ratio = r;
        }
        if let Some(s) = &self.theta_policy {
            cfg.theta_policy = parse_theta_policy(s).map_err(Error::Config)?;
        }
        if let Some(tol) = self.tol {
            cfg.solver.tol = tol;
        }
        Ok(())
    }
}
