//! The `reqsieve` command line: corpus synthesis, dictionary construction,
//! feature ranking, training, grid search, evaluation and stream scoring.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 non-convergence.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use reqsieve_core::evaluate::grid_search;
use reqsieve_core::preprocess::HeaderFilter;
use reqsieve_core::tokenizer::build_dictionary;
use reqsieve_core::vectorizer::{tfidf_matrix, Vocabulary};

use crate::artifacts::{
    read_model, read_ranking, sha256_file, write_dictionary, write_grid_csv, write_metrics,
    write_model, write_ranking, write_roc_csv,
};
use crate::config::{
    parse_estimator, parse_grid, parse_scaling, parse_theta_policy, ConfigFile, RunConfig,
    SplitFractions, DEFAULT_GAMMA_GRID, DEFAULT_NU_GRID,
};
use crate::corpus::{load_corpus_auto, save_corpus};
use crate::error::{Error, Result};
use crate::pipeline::{self, run_eval, run_rank, run_score_stream, run_train};
use crate::synthgen::{self, PayloadFamily, SynthSpec};

#[derive(Debug, Parser)]
#[command(name = "reqsieve", version, about = "HTTP request anomaly detection pipeline")]
pub struct Cli {
    /// TOML config file; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Comma-separated header names to drop during canonicalization.
    #[arg(long, global = true, value_delimiter = ',', conflicts_with = "header_allowlist")]
    header_denylist: Option<Vec<String>>,
    /// Comma-separated header names to keep (everything else is dropped).
    #[arg(long, global = true, value_delimiter = ',')]
    header_allowlist: Option<Vec<String>>,
    /// Include request bodies in canonical text (default true).
    #[arg(long, global = true)]
    include_body: Option<bool>,
    #[arg(long, global = true)]
    n_features: Option<usize>,
    #[arg(long, global = true)]
    nu: Option<f64>,
    #[arg(long, global = true)]
    gamma: Option<f64>,
    /// BoW scaling before the SVM: none, binary or l2.
    #[arg(long, global = true)]
    vector_scaling: Option<String>,
    /// Train,validation,test fractions over the normals, e.g. 0.7,0.15,0.15.
    #[arg(long, global = true)]
    split: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a seeded synthetic corpus.
    Synth(SynthArgs),
    /// Token dictionary operations.
    Dict {
        #[command(subcommand)]
        command: DictCommand,
    },
    /// Feature ranking operations.
    Features {
        #[command(subcommand)]
        command: FeaturesCommand,
    },
    /// Split a corpus into train/validation/test files.
    Split(SplitArgs),
    /// Train a detector from a persisted ranking.
    Train(TrainArgs),
    /// Sweep (nu, gamma) with the F-hat criterion.
    Grid(GridArgs),
    /// Evaluate a model on a labeled test corpus.
    Eval(EvalArgs),
    /// Score a JSONL request stream.
    Score(ScoreArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 1000)]
    n_normal: usize,
    #[arg(long, default_value_t = 100)]
    n_attack: usize,
    /// Payload families to draw from.
    #[arg(long, default_value = "sqli,xss,cmdi,traversal")]
    families: String,
    /// Extra target template (repeatable); defaults to the built-in set.
    #[arg(long = "template")]
    templates: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum DictCommand {
    /// Build the token dictionary over an attack and a normal corpus.
    Build(CorpusPairArgs),
}

#[derive(Debug, Subcommand)]
enum FeaturesCommand {
    /// Rank dictionary tokens by mutual information with the class label.
    Rank(RankArgs),
}

#[derive(Debug, Args)]
struct CorpusPairArgs {
    /// Attack corpus; may also come from the config file.
    #[arg(long)]
    attacks: Option<PathBuf>,
    /// Normal corpus; may also come from the config file.
    #[arg(long)]
    normals: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RankArgs {
    #[command(flatten)]
    pair: CorpusPairArgs,
    /// MI estimator: presence (default) or binned.
    #[arg(long)]
    estimator: Option<String>,
    /// Debug dump of the TF-IDF matrix as CSV.
    #[arg(long)]
    dump_matrix: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SplitArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    normals: Option<PathBuf>,
    #[arg(long)]
    attacks: Option<PathBuf>,
    #[arg(long)]
    ranking: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Operating-point policy: max-youden or fpr-cap:<x>.
    #[arg(long)]
    theta_policy: Option<String>,
    /// Comma-separated nu grid; with --gamma-grid, enables the sweep.
    #[arg(long)]
    nu_grid: Option<String>,
    #[arg(long)]
    gamma_grid: Option<String>,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[arg(long)]
    normals: Option<PathBuf>,
    #[arg(long)]
    attacks: Option<PathBuf>,
    #[arg(long)]
    ranking: PathBuf,
    /// Defaults to 0.01,0.05,0.1,0.2.
    #[arg(long)]
    nu_grid: Option<String>,
    /// Defaults to 0.1,0.5,1.0,2.0.
    #[arg(long)]
    gamma_grid: Option<String>,
    /// Write the sweep table as CSV instead of printing it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    metrics_out: PathBuf,
    #[arg(long)]
    roc_out: PathBuf,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[arg(long)]
    model: PathBuf,
    /// JSONL input; stdin when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
}

impl Cli {
    /// Folds defaults, the config file and global flags into a run config;
    /// explicit flags win over config-file values.
    fn resolve(&self, normals: Option<&PathBuf>, attacks: Option<&PathBuf>) -> Result<RunConfig> {
        let mut cfg = RunConfig::new("", "");
        if let Some(path) = &self.config {
            ConfigFile::load(path)?.apply(&mut cfg)?;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if self.header_denylist.is_some() && self.header_allowlist.is_some() {
            return Err(Error::Config(
                "--header-denylist and --header-allowlist are mutually exclusive".into(),
            ));
        }
        if let Some(names) = &self.header_denylist {
            cfg.preprocess.filter = HeaderFilter::denylist(names);
        }
        if let Some(names) = &self.header_allowlist {
            cfg.preprocess.filter =
                HeaderFilter::allowlist(names).map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(include_body) = self.include_body {
            cfg.preprocess.include_body = include_body;
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
        if let Some(scaling) = &self.vector_scaling {
            cfg.scaling = parse_scaling(scaling).map_err(Error::Config)?;
        }
        if let Some(split) = &self.split {
            cfg.split = SplitFractions::parse(split)?;
        }
        if let Some(path) = normals {
            cfg.normal_corpus = path.clone();
        }
        if let Some(path) = attacks {
            cfg.attack_corpus = path.clone();
        }
        if cfg.normal_corpus.as_os_str().is_empty() {
            return Err(Error::Config(
                "normal corpus path missing (pass --normals or set normal_corpus in the config)"
                    .into(),
            ));
        }
        if cfg.attack_corpus.as_os_str().is_empty() {
            return Err(Error::Config(
                "attack corpus path missing (pass --attacks or set attack_corpus in the config)"
                    .into(),
            ));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn run(self) -> Result<()> {
        match &self.command {
            Command::Synth(args) => self.cmd_synth(args),
            Command::Dict {
                command: DictCommand::Build(args),
            } => self.cmd_dict_build(args),
            Command::Features {
                command: FeaturesCommand::Rank(args),
            } => self.cmd_rank(args),
            Command::Split(args) => self.cmd_split(args),
            Command::Train(args) => self.cmd_train(args),
            Command::Grid(args) => self.cmd_grid(args),
            Command::Eval(args) => self.cmd_eval(args),
            Command::Score(args) => self.cmd_score(args),
        }
    }

    fn cmd_synth(&self, args: &SynthArgs) -> Result<()> {
        let families =
            PayloadFamily::parse_list(&args.families).map_err(Error::Config)?;
        let mut spec = SynthSpec::new(args.n_normal, args.n_attack, self.seed.unwrap_or(0));
        spec.payload_families = families;
        if !args.templates.is_empty() {
            spec.path_templates = args.templates.clone();
        }
        let corpus = synthgen::generate(&spec)?;
        save_corpus(&corpus, &args.out)?;
        println!(
            "wrote {} ({} normal / {} attack)",
            args.out.display(),
            spec.n_normal,
            spec.n_attack
        );
        Ok(())
    }

    fn cmd_dict_build(&self, args: &CorpusPairArgs) -> Result<()> {
        let cfg = self.resolve(args.normals.as_ref(), args.attacks.as_ref())?;
        let attacks = load_corpus_auto(&cfg.attack_corpus)?;
        let normals = load_corpus_auto(&cfg.normal_corpus)?;
        let dict = build_dictionary(&attacks, &normals, &cfg.preprocess)?;
        write_dictionary(&dict, &args.out)?;
        println!("wrote {} ({} tokens)", args.out.display(), dict.len());
        Ok(())
    }

    fn cmd_rank(&self, args: &RankArgs) -> Result<()> {
        let mut cfg = self.resolve(args.pair.normals.as_ref(), args.pair.attacks.as_ref())?;
        if let Some(estimator) = &args.estimator {
            cfg.estimator = parse_estimator(estimator).map_err(Error::Config)?;
        }
        let artifact = run_rank(&cfg)?;
        write_ranking(&artifact.ranking, &artifact.meta, &args.pair.out)?;
        println!(
            "wrote {} ({} tokens, estimator {})",
            args.pair.out.display(),
            artifact.ranking.len(),
            artifact.ranking.estimator_id
        );
        if let Some(dump) = &args.dump_matrix {
            self.dump_matrix(&cfg, dump)?;
        }
        Ok(())
    }

    fn dump_matrix(&self, cfg: &RunConfig, path: &PathBuf) -> Result<()> {
        use reqsieve_core::preprocess::canonicalize;
        use reqsieve_core::tokenizer::tokenize;

        let attacks = load_corpus_auto(&cfg.attack_corpus)?;
        let normals = load_corpus_auto(&cfg.normal_corpus)?;
        let dict = build_dictionary(&attacks, &normals, &cfg.preprocess)?;
        let vocab = Vocabulary::from(&dict);
        let docs: Vec<Vec<String>> = attacks
            .requests
            .iter()
            .chain(&normals.requests)
            .map(|req| {
                let text = canonicalize(req, &cfg.preprocess);
                tokenize(text.as_str()).into_iter().map(str::to_string).collect()
            })
            .collect();
        let borrowed: Vec<Vec<&str>> = docs
            .iter()
            .map(|d| d.iter().map(String::as_str).collect())
            .collect();
        let matrix = tfidf_matrix(&borrowed, &vocab)?;

        let mut writer = csv::Writer::from_path(path).map_err(|e| {
            Error::artifact(path, e.to_string())
        })?;
        writer
            .write_record(vocab.tokens())
            .map_err(|e| Error::artifact(path, e.to_string()))?;
        for row in &matrix.rows {
            let mut dense = vec![0.0; vocab.len()];
            for &(idx, value) in row.entries() {
                dense[idx] = value;
            }
            let cells: Vec<String> = dense.iter().map(|v| v.to_string()).collect();
            writer
                .write_record(&cells)
                .map_err(|e| Error::artifact(path, e.to_string()))?;
        }
        writer.flush().map_err(|e| Error::io(path, e))?;
        println!("wrote {}", path.display());
        Ok(())
    }

    fn cmd_split(&self, args: &SplitArgs) -> Result<()> {
        // the input doubles as a placeholder attack path; only split fields
        // of the config are used here
        let cfg = self.resolve(Some(&args.input), Some(&args.input))?;
        let corpus = load_corpus_auto(&args.input)?;
        let (train, validation, test) = pipeline::split_corpus(&corpus, &cfg.split, cfg.seed);
        fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;
        for (part, name) in [
            (&train, "train.jsonl"),
            (&validation, "validation.jsonl"),
            (&test, "test.jsonl"),
        ] {
            save_corpus(part, args.out_dir.join(name))?;
        }
        println!(
            "wrote {}/{{train,validation,test}}.jsonl ({}/{}/{})",
            args.out_dir.display(),
            train.len(),
            validation.len(),
            test.len()
        );
        Ok(())
    }

    fn cmd_train(&self, args: &TrainArgs) -> Result<()> {
        let mut cfg = self.resolve(args.normals.as_ref(), args.attacks.as_ref())?;
        if let Some(policy) = &args.theta_policy {
            cfg.theta_policy = parse_theta_policy(policy).map_err(Error::Config)?;
        }
        if let Some(grid) = &args.nu_grid {
            cfg.nu_grid = parse_grid(grid).map_err(Error::Config)?;
        }
        if let Some(grid) = &args.gamma_grid {
            cfg.gamma_grid = parse_grid(grid).map_err(Error::Config)?;
        }
        cfg.validate()?;
        let (ranking, _) = read_ranking(&args.ranking)?;
        let model = run_train(&cfg, &ranking)?;
        write_model(&model, &args.out)?;
        let svm = model.svm();
        println!(
            "wrote {} (n_features={}, nu={}, gamma={}, theta={}, support vectors={})",
            args.out.display(),
            model.n_features(),
            svm.nu(),
            svm.gamma(),
            svm.theta(),
            svm.support_vectors().len()
        );
        Ok(())
    }

    fn cmd_grid(&self, args: &GridArgs) -> Result<()> {
        let mut cfg = self.resolve(args.normals.as_ref(), args.attacks.as_ref())?;
        cfg.nu_grid = match &args.nu_grid {
            Some(grid) => parse_grid(grid).map_err(Error::Config)?,
            None => DEFAULT_NU_GRID.to_vec(),
        };
        cfg.gamma_grid = match &args.gamma_grid {
            Some(grid) => parse_grid(grid).map_err(Error::Config)?,
            None => DEFAULT_GAMMA_GRID.to_vec(),
        };
        cfg.validate()?;
        let (ranking, _) = read_ranking(&args.ranking)?;

        // same data plumbing as run_train, but report the sweep itself
        let selected = reqsieve_core::feature_select::select_top(&ranking, cfg.n_features)?;
        let sets = pipeline::prepare_sets(&cfg, &selected)?;
        let result = grid_search(
            &sets.train,
            &sets.validation,
            &sets.unlabeled_mix,
            &cfg.nu_grid,
            &cfg.gamma_grid,
            &cfg.solver,
        )?;

        match &args.out {
            Some(path) => {
                write_grid_csv(&result, path)?;
                println!("wrote {}", path.display());
            }
            None => {
                println!("nu\tgamma\tf_hat");
                for cell in &result.table {
                    println!("{}\t{}\t{}", cell.nu, cell.gamma, cell.f_hat);
                }
            }
        }
        println!("best: nu={} gamma={}", result.best.0, result.best.1);
        Ok(())
    }

    fn cmd_eval(&self, args: &EvalArgs) -> Result<()> {
        let model = read_model(&args.model)?;
        let test = load_corpus_auto(&args.test)?;
        let (mut report, curve) = run_eval(&model, &test)?;
        report
            .inputs
            .insert("test_sha256".to_string(), sha256_file(&args.test)?);
        write_metrics(&report, &args.metrics_out)?;
        write_roc_csv(&curve, &args.roc_out)?;
        println!(
            "acc={:.4} tpr={:.4} fpr={:.4} auc={:.4} theta={} (metrics: {}, roc: {})",
            report.acc,
            report.tpr,
            report.fpr,
            report.auc,
            report.theta,
            args.metrics_out.display(),
            args.roc_out.display()
        );
        Ok(())
    }

    fn cmd_score(&self, args: &ScoreArgs) -> Result<()> {
        let model = read_model(&args.model)?;
        let stdout = std::io::stdout();
        let stderr = std::io::stderr();
        let stats = match &args.input {
            Some(path) => {
                let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
                run_score_stream(
                    &model,
                    BufReader::new(file),
                    BufWriter::new(stdout.lock()),
                    stderr.lock(),
                )?
            }
            None => {
                let stdin = std::io::stdin();
                run_score_stream(
                    &model,
                    stdin.lock(),
                    BufWriter::new(stdout.lock()),
                    stderr.lock(),
                )?
            }
        };
        let mut err = stderr.lock();
        let _ = writeln!(
            err,
            "scored {} of {} lines ({} malformed)",
            stats.scored, stats.lines, stats.malformed
        );
        Ok(())
    }
}
