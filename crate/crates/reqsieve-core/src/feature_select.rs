//! Mutual-information ranking of dictionary tokens against class labels.
//!
//! Scores use the discrete plug-in estimator in nats. The default estimator
//! binarizes TF-IDF cells to presence/absence, which is deterministic and
//! directly checkable against a brute-force evaluation of the defining
//! double sum. An equal-frequency binned estimator is available for
//! sensitivity studies and is never the default.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::request::ClassLabel;
use crate::vectorizer::FeatureMatrix;

/// Plug-in estimator variants. The id string is recorded in every ranking
/// artifact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MiEstimator {
    /// Presence/absence binarization of matrix cells (cell > 0).
    #[default]
    BinaryPresence,
    /// Equal-frequency bins over the nonzero values of each column, plus a
    /// dedicated zero bin.
    EqualFrequencyBins { bins: usize },
}

impl MiEstimator {
    pub fn id(self) -> &'static str {
        match self {
            MiEstimator::BinaryPresence => "mi-presence-plugin-v1",
            MiEstimator::EqualFrequencyBins { .. } => "mi-binned-ef-plugin-v1",
        }
    }
}

/// Tokens paired with MI scores, sorted descending with lexicographic
/// tie-break.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRanking {
    pub entries: Vec<RankedFeature>,
    pub estimator_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedFeature {
    pub token: String,
    pub mi_score: f64,
    /// 1-based position in the ranking.
    pub rank: usize,
}

impl FeatureRanking {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn xlnx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * libm::log(x)
    }
}

/// Plug-in entropy of a count vector, in nats. Zero counts contribute zero.
fn entropy_of_counts<I: IntoIterator<Item = u64>>(counts: I, total: u64) -> f64 {
    let n = total as f64;
    let mut acc = 0.0;
    for c in counts {
        acc += xlnx(c as f64 / n);
    }
    -acc
}

/// Plug-in MI from a joint count table (rows: X outcomes, columns: Y
/// outcomes), computed as H(X) + H(Y) - H(X,Y) and clamped at zero against
/// rounding.
fn mi_from_joint(joint: &[[u64; 2]]) -> f64 {
    let total: u64 = joint.iter().map(|row| row[0] + row[1]).sum();
    if total == 0 {
        return 0.0;
    }
    let hx = entropy_of_counts(joint.iter().map(|row| row[0] + row[1]), total);
    let hy = entropy_of_counts(
        [
            joint.iter().map(|row| row[0]).sum::<u64>(),
            joint.iter().map(|row| row[1]).sum::<u64>(),
        ],
        total,
    );
    let hxy = entropy_of_counts(joint.iter().flat_map(|row| [row[0], row[1]]), total);
    let mi = hx + hy - hxy;
    if mi > 0.0 {
        mi
    } else {
        0.0
    }
}

/// Mutual information between two binary sequences, in nats.
pub fn mi_binary(x: &[bool], y: &[bool]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::EmptySet("mi input"));
    }
    let mut joint = [[0u64; 2]; 2];
    for (&a, &b) in x.iter().zip(y) {
        joint[usize::from(a)][usize::from(b)] += 1;
    }
    Ok(mi_from_joint(&joint))
}

fn class_bit(label: ClassLabel) -> usize {
    // Attack is the positive class.
    usize::from(label == ClassLabel::Attack)
}

fn validate_labels(matrix: &FeatureMatrix, labels: &[ClassLabel]) -> Result<(u64, u64)> {
    if matrix.n_rows() != labels.len() {
        return Err(Error::LengthMismatch {
            left: matrix.n_rows(),
            right: labels.len(),
        });
    }
    if let Some(row) = labels.iter().position(|l| !l.is_labeled()) {
        return Err(Error::UnlabeledInput(row));
    }
    let attacks = labels.iter().filter(|l| **l == ClassLabel::Attack).count() as u64;
    let normals = labels.len() as u64 - attacks;
    if attacks == 0 || normals == 0 {
        return Err(Error::SingleClass);
    }
    Ok((normals, attacks))
}

/// Ranks every vocabulary token by MI between its column and the labels,
/// using the default presence estimator.
pub fn rank_features(matrix: &FeatureMatrix, labels: &[ClassLabel]) -> Result<FeatureRanking> {
    rank_features_with(MiEstimator::default(), matrix, labels)
}

/// Ranking with an explicit estimator choice.
pub fn rank_features_with(
    estimator: MiEstimator,
    matrix: &FeatureMatrix,
    labels: &[ClassLabel],
) -> Result<FeatureRanking> {
    let class_totals = validate_labels(matrix, labels)?;
    let scores = match estimator {
        MiEstimator::BinaryPresence => presence_scores(matrix, labels, class_totals),
        MiEstimator::EqualFrequencyBins { bins } => {
            if bins < 2 {
                return Err(Error::InvalidParameter("binned estimator needs at least 2 bins"));
            }
            binned_scores(matrix, labels, class_totals, bins)
        }
    };

    let mut entries: Vec<RankedFeature> = matrix
        .vocab
        .tokens()
        .iter()
        .zip(scores)
        .map(|(token, mi_score)| RankedFeature {
            token: token.clone(),
            mi_score,
            rank: 0,
        })
        .collect();
    entries.sort_by(|a, b| {
        b.mi_score
            .total_cmp(&a.mi_score)
            .then_with(|| a.token.cmp(&b.token))
    });
    for (i, entry) in entries.iter_mut().enumerate() {
        entry.rank = i + 1;
    }
    Ok(FeatureRanking {
        entries,
        estimator_id: String::from(estimator.id()),
    })
}

fn presence_scores(
    matrix: &FeatureMatrix,
    labels: &[ClassLabel],
    (normals, attacks): (u64, u64),
) -> Vec<f64> {
    let dim = matrix.dim();
    // present[j][class] counted in one pass over the sparse rows
    let mut present = alloc::vec![[0u64; 2]; dim];
    for (row, &label) in matrix.rows.iter().zip(labels) {
        let class = class_bit(label);
        for &(idx, _) in row.entries() {
            present[idx][class] += 1;
        }
    }
    present
        .into_iter()
        .map(|p| {
            let absent = [normals - p[0], attacks - p[1]];
            mi_from_joint(&[absent, p])
        })
        .collect()
}

fn binned_scores(
    matrix: &FeatureMatrix,
    labels: &[ClassLabel],
    (normals, attacks): (u64, u64),
    bins: usize,
) -> Vec<f64> {
    let dim = matrix.dim();
    let mut columns: Vec<Vec<(f64, usize)>> = alloc::vec![Vec::new(); dim];
    for (row, &label) in matrix.rows.iter().zip(labels) {
        let class = class_bit(label);
        for &(idx, value) in row.entries() {
            columns[idx].push((value, class));
        }
    }
    columns
        .into_iter()
        .map(|mut col| {
            let mut joint = alloc::vec![[0u64; 2]; bins + 1];
            let nonzero_by_class = col.iter().fold([0u64; 2], |mut acc, &(_, c)| {
                acc[c] += 1;
                acc
            });
            joint[0] = [normals - nonzero_by_class[0], attacks - nonzero_by_class[1]];
            if !col.is_empty() {
                let mut sorted: Vec<f64> = col.iter().map(|&(v, _)| v).collect();
                sorted.sort_by(f64::total_cmp);
                let n = sorted.len();
                let edges: Vec<f64> = (1..bins)
                    .map(|t| sorted[t * n / bins])
                    .collect();
                col.sort_by(|a, b| a.0.total_cmp(&b.0));
                for (value, class) in col {
                    let bin = edges.iter().filter(|e| value >= **e).count();
                    joint[1 + bin][class] += 1;
                }
            }
            mi_from_joint(&joint)
        })
        .collect()
}

/// First `n` tokens of the ranking, in rank order.
pub fn select_top(ranking: &FeatureRanking, n: usize) -> Result<Vec<String>> {
    if n == 0 || n > ranking.len() {
        return Err(Error::OutOfRange {
            n,
            max: ranking.len(),
        });
    }
    Ok(ranking.entries[..n].iter().map(|e| e.token.clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vectorizer::{tfidf_matrix, Vocabulary};

    const LN_2: f64 = core::f64::consts::LN_2;

    #[test]
    fn perfect_dependence_is_ln2() {
        let x = [false, false, true, true];
        let mi = mi_binary(&x, &x).unwrap();
        assert!((mi - LN_2).abs() < 1e-12);
    }

    #[test]
    fn constant_input_has_zero_information() {
        let x = [true; 6];
        let y = [true, false, true, false, true, false];
        assert_eq!(mi_binary(&x, &y).unwrap(), 0.0);
    }

    #[test]
    fn empirically_independent_pairs_score_zero() {
        let x = [false, false, true, true];
        let y = [false, true, false, true];
        assert!(mi_binary(&x, &y).unwrap().abs() < 1e-15);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let err = mi_binary(&[true], &[true, false]).unwrap_err();
        assert_eq!(err, Error::LengthMismatch { left: 1, right: 2 });
        assert!(mi_binary(&[], &[]).is_err());
    }

    #[test]
    fn symmetry_on_a_skewed_table() {
        let x = [true, true, true, false, false, true, false, true];
        let y = [true, false, true, false, true, true, false, false];
        let a = mi_binary(&x, &y).unwrap();
        let b = mi_binary(&y, &x).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    fn labels(pattern: &[u8]) -> Vec<ClassLabel> {
        pattern
            .iter()
            .map(|&b| {
                if b == 1 {
                    ClassLabel::Attack
                } else {
                    ClassLabel::Normal
                }
            })
            .collect()
    }

    #[test]
    fn discriminative_token_ranks_first() {
        let vocab = Vocabulary::new(["/home", "attack-only", "everywhere"]).unwrap();
        let docs = vec![
            vec!["everywhere", "attack-only"],
            vec!["everywhere", "attack-only"],
            vec!["everywhere", "/home"],
            vec!["everywhere"],
        ];
        let matrix = tfidf_matrix(&docs, &vocab).unwrap();
        let ranking = rank_features(&matrix, &labels(&[1, 1, 0, 0])).unwrap();
        assert_eq!(ranking.entries[0].token, "attack-only");
        assert!((ranking.entries[0].mi_score - LN_2).abs() < 1e-12);
        // "everywhere" is in every document: zero column, zero score.
        let everywhere = ranking
            .entries
            .iter()
            .find(|e| e.token == "everywhere")
            .unwrap();
        assert_eq!(everywhere.mi_score, 0.0);
    }

    #[test]
    fn duplicate_columns_break_ties_lexicographically() {
        let vocab = Vocabulary::new(["zeta", "alpha"]).unwrap();
        let docs = vec![vec!["zeta", "alpha"], vec![]];
        let matrix = tfidf_matrix(&docs, &vocab).unwrap();
        let ranking = rank_features(&matrix, &labels(&[1, 0])).unwrap();
        assert_eq!(ranking.entries[0].mi_score, ranking.entries[1].mi_score);
        assert_eq!(ranking.entries[0].token, "alpha");
        assert_eq!(ranking.entries[0].rank, 1);
        assert_eq!(ranking.entries[1].rank, 2);
    }

    #[test]
    fn single_class_and_unlabeled_are_rejected() {
        let vocab = Vocabulary::new(["a"]).unwrap();
        let docs = vec![vec!["a"], vec![]];
        let matrix = tfidf_matrix(&docs, &vocab).unwrap();
        assert_eq!(
            rank_features(&matrix, &labels(&[0, 0])).unwrap_err(),
            Error::SingleClass
        );
        let mixed = vec![ClassLabel::Attack, ClassLabel::Unlabeled];
        assert_eq!(
            rank_features(&matrix, &mixed).unwrap_err(),
            Error::UnlabeledInput(1)
        );
    }

    #[test]
    fn select_top_bounds() {
        let vocab = Vocabulary::new(["a", "b"]).unwrap();
        let docs = vec![vec!["a"], vec!["b"]];
        let matrix = tfidf_matrix(&docs, &vocab).unwrap();
        let ranking = rank_features(&matrix, &labels(&[1, 0])).unwrap();
        assert_eq!(select_top(&ranking, 2).unwrap().len(), 2);
        assert_eq!(select_top(&ranking, 1).unwrap()[0], ranking.entries[0].token);
        assert!(select_top(&ranking, 0).is_err());
        assert!(select_top(&ranking, 3).is_err());
    }

    #[test]
    fn binned_estimator_matches_presence_on_binary_data() {
        // With 0/1 cells the equal-frequency bins collapse to presence.
        let vocab = Vocabulary::new(["a", "b"]).unwrap();
        let docs = vec![vec!["a"], vec!["b"], vec!["a"], vec!["b"]];
        let matrix = tfidf_matrix(&docs, &vocab).unwrap();
        let y = labels(&[1, 0, 1, 0]);
        let presence = rank_features(&matrix, &y).unwrap();
        let binned =
            rank_features_with(MiEstimator::EqualFrequencyBins { bins: 4 }, &matrix, &y).unwrap();
        for (p, b) in presence.entries.iter().zip(&binned.entries) {
            assert_eq!(p.token, b.token);
            assert!((p.mi_score - b.mi_score).abs() < 1e-12);
        }
    }
}
