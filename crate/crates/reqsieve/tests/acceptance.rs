//! Acceptance suite: one test per criterion, each printing a single
//! PASS/FAIL line (visible with `cargo test -- --nocapture`) and holding the
//! stated runtime budget. Oracles here are written independently of the
//! library code paths they check.

use std::collections::BTreeSet;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

use reqsieve::artifacts::{write_metrics, write_model, write_ranking};
use reqsieve::config::RunConfig;
use reqsieve::corpus::{load_corpus_auto, save_corpus};
use reqsieve::pipeline::{relabeled, run_eval, run_rank, run_train, split_corpus};
use reqsieve::synthgen::{generate, SynthSpec};
use reqsieve_core::evaluate::roc;
use reqsieve_core::feature_select::mi_binary;
use reqsieve_core::ocsvm::{train, TrainOptions};
use reqsieve_core::preprocess::{canonicalize, lowercase, PreprocessConfig};
use reqsieve_core::request::{ClassLabel, Corpus, RawRequest};
use reqsieve_core::vectorizer::SparseVector;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn run_criterion(
    id: &str,
    budget: Option<Duration>,
    body: impl FnOnce() -> Result<(), String>,
) {
    let start = Instant::now();
    let outcome = body();
    let elapsed = start.elapsed();
    let within = budget.is_none_or(|b| elapsed <= b);
    match (&outcome, within) {
        (Ok(()), true) => println!("ACCEPTANCE {id}: PASS ({elapsed:.2?})"),
        (Ok(()), false) => println!(
            "ACCEPTANCE {id}: FAIL (over budget: {elapsed:.2?} > {:?})",
            budget.unwrap()
        ),
        (Err(reason), _) => println!("ACCEPTANCE {id}: FAIL ({reason})"),
    }
    if let Err(reason) = outcome {
        panic!("{id}: {reason}");
    }
    if !within {
        panic!("{id}: exceeded runtime budget ({elapsed:?})");
    }
}

// --- criterion 1: MI oracle -------------------------------------------------

/// Literal double sum Σ p(a,b) ln(p(a,b)/(p(a)p(b))) over a 2×2 table.
fn mi_double_sum(table: [[u64; 2]; 2]) -> f64 {
    let total = (table[0][0] + table[0][1] + table[1][0] + table[1][1]) as f64;
    let mut acc = 0.0;
    for (a, row) in table.iter().enumerate() {
        let p_a = (table[a][0] + table[a][1]) as f64 / total;
        for (b, &n_ab) in row.iter().enumerate() {
            let p_ab = n_ab as f64 / total;
            if p_ab == 0.0 {
                continue;
            }
            let p_b = (table[0][b] + table[1][b]) as f64 / total;
            acc += p_ab * (p_ab / (p_a * p_b)).ln();
        }
    }
    acc
}

#[test]
fn criterion_1_mi_oracle() {
    run_criterion("1 (MI oracle)", Some(Duration::from_secs(5)), || {
        let mut tables = 0usize;
        for n00 in 0..=12u64 {
            for n01 in 0..=12 - n00 {
                for n10 in 0..=12 - n00 - n01 {
                    for n11 in 0..=12 - n00 - n01 - n10 {
                        if n00 + n01 + n10 + n11 == 0 {
                            continue;
                        }
                        let table = [[n00, n01], [n10, n11]];
                        let mut x = Vec::new();
                        let mut y = Vec::new();
                        for (a, row) in table.iter().enumerate() {
                            for (b, &count) in row.iter().enumerate() {
                                for _ in 0..count {
                                    x.push(a == 1);
                                    y.push(b == 1);
                                }
                            }
                        }
                        let got = mi_binary(&x, &y).map_err(|e| e.to_string())?;
                        let expected = mi_double_sum(table);
                        ensure(
                            (got - expected).abs() < 1e-12,
                            format!("table {table:?}: {got} vs {expected}"),
                        )?;
                        tables += 1;
                    }
                }
            }
        }
        ensure(tables == 1819, format!("enumerated {tables} tables"))?;

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let n = rng.random_range(1..50);
            let x: Vec<bool> = (0..n).map(|_| rng.random()).collect();
            let y: Vec<bool> = (0..n).map(|_| rng.random()).collect();
            let xy = mi_binary(&x, &y).map_err(|e| e.to_string())?;
            let yx = mi_binary(&y, &x).map_err(|e| e.to_string())?;
            ensure((xy - yx).abs() < 1e-12, "symmetry violated")?;
            ensure(xy >= 0.0, "negative MI")?;
        }
        Ok(())
    });
}

// --- criterion 2: preprocessing ----------------------------------------------

#[test]
fn criterion_2_preprocessing() {
    run_criterion("2 (preprocessing)", Some(Duration::from_secs(5)), || {
        let cfg = PreprocessConfig::default();
        let vectors = [
            ("%2527", "get '"),
            ("%253Cscript%253E", "get <script>"),
            ("a%2520b", "get a b"),
            ("%27", "get '"),
            ("plain", "get plain"),
        ];
        for (target, expected) in vectors {
            let got = canonicalize(&RawRequest::new("GET", target), &cfg);
            ensure(
                got.as_str() == expected,
                format!("{target:?} -> {:?}, wanted {expected:?}", got.as_str()),
            )?;
        }
        // lossy UTF-8: invalid bytes become U+FFFD, never a failure
        let lossy = canonicalize(
            &RawRequest::new("GET", "/").with_body(vec![0xff, b'a', 0xc3]),
            &cfg,
        );
        ensure(
            lossy.as_str().contains('\u{fffd}'),
            "replacement character missing",
        )?;

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let len = rng.random_range(0..64);
            let body: Vec<u8> = (0..len).map(|_| rng.random()).collect();
            let target_bytes: Vec<u8> = (0..rng.random_range(1..48)).map(|_| rng.random()).collect();
            let target = String::from_utf8_lossy(&target_bytes).into_owned();
            let req = RawRequest::new("GET", target)
                .with_header("X-Fuzz", "1")
                .with_body(body);
            let text = canonicalize(&req, &cfg);
            ensure(
                lowercase(text.as_str()) == text.as_str(),
                "canonical text not a lowercase fixed point",
            )?;
        }
        Ok(())
    });
}

// --- criterion 3: OCSVM KKT and ν-property ----------------------------------

fn clustered_vectors(rng: &mut ChaCha8Rng, m: usize, dim: usize) -> Vec<SparseVector> {
    let n_clusters = 4;
    let prototypes: Vec<Vec<f64>> = (0..n_clusters)
        .map(|_| {
            let mut proto = vec![0.0; dim];
            for slot in proto.iter_mut().take(10) {
                *slot = rng.random_range(1.0..3.0);
            }
            proto
        })
        .collect();
    (0..m)
        .map(|_| {
            let mut dense = prototypes[rng.random_range(0..n_clusters)].clone();
            for _ in 0..2 {
                let at = rng.random_range(0..dim);
                dense[at] = (dense[at] + rng.random_range(-0.5..0.5)).max(0.0);
            }
            if rng.random::<f64>() < 0.1 {
                let at = rng.random_range(0..dim);
                dense[at] += rng.random_range(0.5..2.0);
            }
            let entries: Vec<(usize, f64)> = dense
                .into_iter()
                .enumerate()
                .filter(|&(_, v)| v > 0.0)
                .collect();
            SparseVector::new(dim, entries).unwrap()
        })
        .collect()
}

#[test]
fn criterion_3_ocsvm_kkt_and_nu_property() {
    run_criterion("3 (OCSVM KKT + nu)", Some(Duration::from_secs(120)), || {
        let m = 400usize;
        let slack = 2.0 / (m as f64).sqrt();
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
            let data = clustered_vectors(&mut rng, m, 50);
            for nu in [0.05, 0.2] {
                let model = train(&data, nu, 0.5, &TrainOptions::default())
                    .map_err(|e| format!("seed {seed} nu {nu}: {e}"))?;
                let c = 1.0 / (nu * m as f64);
                let sum: f64 = model.alphas().iter().sum();
                ensure(
                    (sum - 1.0).abs() <= 1e-8,
                    format!("seed {seed} nu {nu}: alpha sum {sum}"),
                )?;
                for &a in model.alphas() {
                    ensure(
                        a > 0.0 && a <= c + 1e-10,
                        format!("seed {seed} nu {nu}: alpha {a} outside (0, {c}]"),
                    )?;
                }
                let outliers = data
                    .iter()
                    .map(|v| model.decision(v).map_err(|e| e.to_string()))
                    .collect::<Result<Vec<f64>, _>>()?
                    .iter()
                    .filter(|&&f| f < 0.0)
                    .count() as f64
                    / m as f64;
                let sv_fraction = model.support_vectors().len() as f64 / m as f64;
                ensure(
                    outliers <= nu + slack,
                    format!("seed {seed} nu {nu}: outlier fraction {outliers}"),
                )?;
                ensure(
                    sv_fraction >= nu - slack,
                    format!("seed {seed} nu {nu}: sv fraction {sv_fraction}"),
                )?;
            }
        }
        Ok(())
    });
}

// --- criterion 4: AUC oracle --------------------------------------------------

fn pairwise_auc(scores: &[(f64, ClassLabel)]) -> f64 {
    let attacks: Vec<f64> = scores
        .iter()
        .filter(|(_, l)| *l == ClassLabel::Attack)
        .map(|(s, _)| *s)
        .collect();
    let normals: Vec<f64> = scores
        .iter()
        .filter(|(_, l)| *l == ClassLabel::Normal)
        .map(|(s, _)| *s)
        .collect();
    let mut acc = 0.0;
    for &a in &attacks {
        for &n in &normals {
            if a < n {
                acc += 1.0;
            } else if a == n {
                acc += 0.5;
            }
        }
    }
    acc / (attacks.len() * normals.len()) as f64
}

#[test]
fn criterion_4_auc_oracle() {
    run_criterion("4 (AUC oracle)", Some(Duration::from_secs(10)), || {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut checked = 0usize;
        while checked < 100 {
            let n = rng.random_range(2..=200);
            let scores: Vec<(f64, ClassLabel)> = (0..n)
                .map(|_| {
                    let label = if rng.random() {
                        ClassLabel::Attack
                    } else {
                        ClassLabel::Normal
                    };
                    // coarse quantization forces tied scores
                    (rng.random_range(-6i32..=6) as f64 / 2.0, label)
                })
                .collect();
            let has_both = scores.iter().any(|(_, l)| *l == ClassLabel::Attack)
                && scores.iter().any(|(_, l)| *l == ClassLabel::Normal);
            if !has_both {
                continue;
            }
            let curve = roc(&scores).map_err(|e| e.to_string())?;
            let oracle = pairwise_auc(&scores);
            ensure(
                (curve.auc - oracle).abs() < 1e-9,
                format!("set {checked}: trapezoid {} vs pairwise {oracle}", curve.auc),
            )?;
            checked += 1;
        }
        Ok(())
    });
}

// --- criteria 5-7: end-to-end runs -------------------------------------------

/// Writes role-pure corpus files for a generated corpus and returns the run
/// config pointing at them.
fn write_split_corpora(dir: &Path, corpus: &Corpus, seed: u64) -> Result<RunConfig, String> {
    let normals = Corpus::new(
        "normals",
        corpus
            .requests
            .iter()
            .filter(|r| r.label == ClassLabel::Normal)
            .cloned()
            .collect(),
    );
    let attacks = Corpus::new(
        "attacks",
        corpus
            .requests
            .iter()
            .filter(|r| r.label == ClassLabel::Attack)
            .cloned()
            .collect(),
    );
    let normal_path = dir.join("normals.jsonl");
    let attack_path = dir.join("attacks.jsonl");
    save_corpus(&normals, &normal_path).map_err(|e| e.to_string())?;
    save_corpus(&attacks, &attack_path).map_err(|e| e.to_string())?;
    let mut cfg = RunConfig::new(&normal_path, &attack_path);
    cfg.seed = seed;
    Ok(cfg)
}

fn eval_on_test_split(
    cfg: &RunConfig,
    model: &reqsieve::DetectorModel,
) -> Result<reqsieve::artifacts::MetricsReport, String> {
    let normals = load_corpus_auto(&cfg.normal_corpus).map_err(|e| e.to_string())?;
    let attacks = load_corpus_auto(&cfg.attack_corpus).map_err(|e| e.to_string())?;
    let (_, _, test_normals) = split_corpus(&normals, &cfg.split, cfg.seed);
    let mut test = relabeled(&test_normals, ClassLabel::Normal);
    test.requests
        .extend(relabeled(&attacks, ClassLabel::Attack).requests);
    let (report, _) = run_eval(model, &test).map_err(|e| e.to_string())?;
    Ok(report)
}

#[test]
fn criterion_5_end_to_end_separable_run() {
    run_criterion("5 (e2e separable)", Some(Duration::from_secs(120)), || {
        let dir = TempDir::new().map_err(|e| e.to_string())?;
        let corpus = generate(&SynthSpec::new(2000, 200, 50)).map_err(|e| e.to_string())?;
        let mut cfg = write_split_corpora(dir.path(), &corpus, 50)?;
        cfg.n_features = 100;
        cfg.nu = 0.05;
        cfg.gamma = 0.5;

        let artifact = run_rank(&cfg).map_err(|e| e.to_string())?;
        let model = run_train(&cfg, &artifact.ranking).map_err(|e| e.to_string())?;
        let report = eval_on_test_split(&cfg, &model)?;
        ensure(report.auc >= 0.99, format!("auc {}", report.auc))?;
        ensure(report.tpr >= 0.95, format!("tpr {}", report.tpr))?;
        ensure(report.fpr <= 0.05, format!("fpr {}", report.fpr))?;
        Ok(())
    });
}

/// Corpus with exactly 80 informative payload tokens plus noise: normals
/// carry 6 noise words from a 400-word pool, attacks add 2 payload tokens.
fn eighty_token_corpus(dir: &Path, seed: u64) -> Result<RunConfig, String> {
    let payload_tokens: Vec<String> = (0..80).map(|i| format!("pwn{i:02}")).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut requests = Vec::new();
    let body_of = |rng: &mut ChaCha8Rng| {
        let words: Vec<String> = (0..6)
            .map(|_| format!("w{:03}", rng.random_range(0..400)))
            .collect();
        words.join(" ")
    };
    for _ in 0..2000 {
        let target = format!("/app?id=i{}", rng.random_range(0..20));
        requests.push(
            RawRequest::new("GET", target)
                .with_body(body_of(&mut rng).into_bytes())
                .with_label(ClassLabel::Normal),
        );
    }
    for k in 0..200usize {
        let target = format!("/app?id=i{}", rng.random_range(0..20));
        // round-robin assignment keeps every payload token genuinely
        // informative (several occurrences each)
        let first = k % 80;
        let second = (k + 41) % 80;
        let body = format!(
            "{} {} {}",
            body_of(&mut rng),
            payload_tokens[first],
            payload_tokens[second]
        );
        requests.push(
            RawRequest::new("GET", target)
                .with_body(body.into_bytes())
                .with_label(ClassLabel::Attack),
        );
    }
    write_split_corpora(dir, &Corpus::new("eighty", requests), seed)
}

#[test]
fn criterion_6_feature_count_sweep_shape() {
    run_criterion("6 (sweep shape)", Some(Duration::from_secs(180)), || {
        let dir = TempDir::new().map_err(|e| e.to_string())?;
        let cfg = eighty_token_corpus(dir.path(), 60)?;

        let artifact = run_rank(&cfg).map_err(|e| e.to_string())?;
        // the 80 payload tokens are the informative block and must fill the
        // head of the ranking
        let top100: BTreeSet<&str> = artifact.ranking.entries[..100]
            .iter()
            .map(|e| e.token.as_str())
            .collect();
        let covered = (0..80)
            .filter(|i| top100.contains(format!("pwn{i:02}").as_str()))
            .count();
        ensure(covered == 80, format!("only {covered}/80 payload tokens in top-100"))?;

        let mut cfg100 = cfg.clone();
        cfg100.n_features = 100;
        let mut cfg25 = cfg.clone();
        cfg25.n_features = 25;

        let model100 = run_train(&cfg100, &artifact.ranking).map_err(|e| e.to_string())?;
        let model25 = run_train(&cfg25, &artifact.ranking).map_err(|e| e.to_string())?;
        let auc100 = eval_on_test_split(&cfg100, &model100)?.auc;
        let auc25 = eval_on_test_split(&cfg25, &model25)?.auc;
        ensure(
            auc100 >= auc25,
            format!("auc at 100 features {auc100} < auc at 25 features {auc25}"),
        )?;
        Ok(())
    });
}

#[test]
fn criterion_7_run_determinism() {
    run_criterion("7 (determinism)", None, || {
        let dir = TempDir::new().map_err(|e| e.to_string())?;
        let corpus = generate(&SynthSpec::new(500, 100, 70)).map_err(|e| e.to_string())?;
        let mut cfg = write_split_corpora(dir.path(), &corpus, 70)?;
        cfg.n_features = 60;

        let produce = |out_dir: &Path| -> Result<(), String> {
            std::fs::create_dir_all(out_dir).map_err(|e| e.to_string())?;
            let artifact = run_rank(&cfg).map_err(|e| e.to_string())?;
            write_ranking(&artifact.ranking, &artifact.meta, out_dir.join("ranking.tsv"))
                .map_err(|e| e.to_string())?;
            let model = run_train(&cfg, &artifact.ranking).map_err(|e| e.to_string())?;
            write_model(&model, out_dir.join("model.json")).map_err(|e| e.to_string())?;
            let report = eval_on_test_split(&cfg, &model)?;
            write_metrics(&report, out_dir.join("metrics.json")).map_err(|e| e.to_string())?;
            Ok(())
        };
        let run1 = dir.path().join("run1");
        let run2 = dir.path().join("run2");
        produce(&run1)?;
        produce(&run2)?;
        for name in ["ranking.tsv", "model.json", "metrics.json"] {
            let a = std::fs::read(run1.join(name)).map_err(|e| e.to_string())?;
            let b = std::fs::read(run2.join(name)).map_err(|e| e.to_string())?;
            ensure(a == b, format!("{name} differs between identical runs"))?;
        }
        Ok(())
    });
}

// --- criterion 8: optional SR-BH 2020 ----------------------------------------

/// Best effort: runs only when REQSIEVE_SRBH_DIR points at a directory with
/// normals.jsonl, attacks.jsonl and test.jsonl (or .csv). The reference
/// result for this dataset at 100 features is AUC 0.84; estimator and
/// preprocessing choices vary between implementations, so ±0.07 is accepted.
#[test]
fn criterion_8_srbh_best_effort() {
    let Some(dataset_dir) = std::env::var_os("REQSIEVE_SRBH_DIR") else {
        println!("ACCEPTANCE 8 (SR-BH 2020): SKIP (REQSIEVE_SRBH_DIR not set)");
        return;
    };
    run_criterion("8 (SR-BH 2020)", None, || {
        let dataset_dir = std::path::PathBuf::from(dataset_dir);
        let locate = |stem: &str| -> Result<std::path::PathBuf, String> {
            for ext in ["jsonl", "csv"] {
                let candidate = dataset_dir.join(format!("{stem}.{ext}"));
                if candidate.exists() {
                    return Ok(candidate);
                }
            }
            Err(format!("{stem}.jsonl|csv not found in {}", dataset_dir.display()))
        };
        let mut cfg = RunConfig::new(locate("normals")?, locate("attacks")?);
        cfg.n_features = 100;
        cfg.seed = 100;
        let artifact = run_rank(&cfg).map_err(|e| e.to_string())?;
        let model = run_train(&cfg, &artifact.ranking).map_err(|e| e.to_string())?;
        let test = load_corpus_auto(locate("test")?).map_err(|e| e.to_string())?;
        let (report, _) = run_eval(&model, &test).map_err(|e| e.to_string())?;
        ensure(
            (report.auc - 0.84).abs() <= 0.07,
            format!("auc {} outside 0.84 +/- 0.07", report.auc),
        )?;
        Ok(())
    });
}
