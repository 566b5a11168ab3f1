//! Metrics, ROC sweep, F̂ model selection and the (ν, γ) grid search.
//!
//! Attack is the positive class throughout, and a request is predicted as
//! attack exactly when its decision value falls below θ. Raising θ therefore
//! flags more requests, so TPR and FPR are both non-decreasing in θ.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::ocsvm::{self, OcsvmModel, TrainOptions};
use crate::request::ClassLabel;
use crate::vectorizer::SparseVector;

/// Confusion counts with attack as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.true_positives + self.false_positives + self.true_negatives + self.false_negatives
    }

    fn ratio(num: usize, den: usize) -> f64 {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    }

    pub fn tpr(&self) -> f64 {
        Self::ratio(self.true_positives, self.true_positives + self.false_negatives)
    }

    pub fn fpr(&self) -> f64 {
        Self::ratio(self.false_positives, self.false_positives + self.true_negatives)
    }

    pub fn accuracy(&self) -> f64 {
        Self::ratio(self.true_positives + self.true_negatives, self.total())
    }
}

/// Counts outcomes at one threshold. Unlabeled entries are skipped; at least
/// one labeled entry is required.
pub fn confusion(scores: &[(f64, ClassLabel)], theta: f64) -> Result<ConfusionCounts> {
    let mut counts = ConfusionCounts::default();
    for &(score, label) in scores {
        let predicted_attack = score < theta;
        match label {
            ClassLabel::Attack if predicted_attack => counts.true_positives += 1,
            ClassLabel::Attack => counts.false_negatives += 1,
            ClassLabel::Normal if predicted_attack => counts.false_positives += 1,
            ClassLabel::Normal => counts.true_negatives += 1,
            ClassLabel::Unlabeled => {}
        }
    }
    if counts.total() == 0 {
        return Err(Error::NoLabeledData);
    }
    Ok(counts)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub theta: f64,
    pub tpr: f64,
    pub fpr: f64,
}

/// Swept operating points, sorted by θ, with trapezoidal AUC over
/// (FPR, TPR).
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// Sweeps θ over every distinct score: sentinels below the minimum and above
/// the maximum, plus midpoints between consecutive distinct scores. Tied
/// scores move between operating points as one group.
pub fn roc(scores: &[(f64, ClassLabel)]) -> Result<RocCurve> {
    let mut labeled: Vec<(f64, bool)> = scores
        .iter()
        .filter(|(_, l)| l.is_labeled())
        .map(|&(s, l)| (s, l == ClassLabel::Attack))
        .collect();
    if labeled.is_empty() {
        return Err(Error::NoLabeledData);
    }
    let attacks = labeled.iter().filter(|(_, a)| *a).count();
    let normals = labeled.len() - attacks;
    if attacks == 0 || normals == 0 {
        return Err(Error::SingleClass);
    }
    labeled.sort_by(|a, b| a.0.total_cmp(&b.0));

    // (score, attack count, normal count) per distinct score, ascending
    let mut groups: Vec<(f64, usize, usize)> = Vec::new();
    for (score, is_attack) in labeled {
        match groups.last_mut() {
            Some((s, a, n)) if *s == score => {
                *a += usize::from(is_attack);
                *n += usize::from(!is_attack);
            }
            _ => groups.push((score, usize::from(is_attack), usize::from(!is_attack))),
        }
    }

    let mut points = Vec::with_capacity(groups.len() + 1);
    let mut cum_attacks = 0usize;
    let mut cum_normals = 0usize;
    for (g, &(score, a, n)) in groups.iter().enumerate() {
        let theta = if g == 0 {
            score - 1.0
        } else {
            0.5 * (groups[g - 1].0 + score)
        };
        points.push(RocPoint {
            theta,
            tpr: cum_attacks as f64 / attacks as f64,
            fpr: cum_normals as f64 / normals as f64,
        });
        cum_attacks += a;
        cum_normals += n;
    }
    points.push(RocPoint {
        theta: groups.last().expect("non-empty").0 + 1.0,
        tpr: 1.0,
        fpr: 1.0,
    });

    let auc = points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) * 0.5)
        .sum();
    Ok(RocCurve { points, auc })
}

/// Operating-point policies over a swept curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaPolicy {
    /// Maximize TPR − FPR (Youden's J); ties prefer smaller FPR, then
    /// smaller θ.
    MaxYouden,
    /// Maximal TPR subject to FPR ≤ cap; same tie-breaking.
    FprCap(f64),
}

pub fn pick_theta(curve: &RocCurve, policy: ThetaPolicy) -> Result<f64> {
    if curve.points.is_empty() {
        return Err(Error::EmptySet("roc curve"));
    }
    // points are sorted by θ, so keeping the first strict winner also
    // settles the final θ tie-break
    let mut best: Option<&RocPoint> = None;
    for p in &curve.points {
        if let ThetaPolicy::FprCap(cap) = policy {
            // a NaN cap admits nothing and surfaces as Infeasible
            if cap.is_nan() || p.fpr > cap {
                continue;
            }
        }
        let better = match best {
            None => true,
            Some(b) => {
                let (key_p, key_b) = match policy {
                    ThetaPolicy::MaxYouden => (p.tpr - p.fpr, b.tpr - b.fpr),
                    ThetaPolicy::FprCap(_) => (p.tpr, b.tpr),
                };
                key_p > key_b || (key_p == key_b && p.fpr < b.fpr)
            }
        };
        if better {
            best = Some(p);
        }
    }
    best.map(|p| p.theta).ok_or(Error::Infeasible)
}

/// F̂ = r²/q, the positive-unlabeled selection score: r is the acceptance
/// rate on held-out normals, q the acceptance rate on an unlabeled mix, both
/// at the model's current θ. q = 0 yields 0.
pub fn f_hat(
    model: &OcsvmModel,
    validation_normals: &[SparseVector],
    unlabeled_mix: &[SparseVector],
) -> Result<f64> {
    if validation_normals.is_empty() {
        return Err(Error::EmptySet("validation normals"));
    }
    if unlabeled_mix.is_empty() {
        return Err(Error::EmptySet("unlabeled mix"));
    }
    let theta = model.theta();
    let accept_rate = |set: &[SparseVector]| -> Result<f64> {
        let mut accepted = 0usize;
        for v in set {
            if model.decision(v)? >= theta {
                accepted += 1;
            }
        }
        Ok(accepted as f64 / set.len() as f64)
    };
    let r = accept_rate(validation_normals)?;
    let q = accept_rate(unlabeled_mix)?;
    Ok(if q == 0.0 { 0.0 } else { r * r / q })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub nu: f64,
    pub gamma: f64,
    pub f_hat: f64,
}

/// Full sweep table in ascending (ν, γ) order plus the winning pair.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchResult {
    pub table: Vec<GridCell>,
    pub best: (f64, f64),
}

/// Trains one model per (ν, γ) cell at θ = 0 and scores each with
/// [`f_hat`]. A failing cell is recorded as f_hat = −1 instead of aborting
/// the sweep. Ties prefer smaller ν, then smaller γ.
pub fn grid_search(
    train_normals: &[SparseVector],
    validation_normals: &[SparseVector],
    unlabeled_mix: &[SparseVector],
    nu_grid: &[f64],
    gamma_grid: &[f64],
    opts: &TrainOptions,
) -> Result<GridSearchResult> {
    if nu_grid.is_empty() || gamma_grid.is_empty() {
        return Err(Error::InvalidParameter("parameter grids must be non-empty"));
    }
    if train_normals.is_empty() {
        return Err(Error::EmptySet("training normals"));
    }
    if validation_normals.is_empty() {
        return Err(Error::EmptySet("validation normals"));
    }
    if unlabeled_mix.is_empty() {
        return Err(Error::EmptySet("unlabeled mix"));
    }

    let mut nus = nu_grid.to_vec();
    nus.sort_by(f64::total_cmp);
    nus.dedup();
    let mut gammas = gamma_grid.to_vec();
    gammas.sort_by(f64::total_cmp);
    gammas.dedup();

    let mut table = Vec::with_capacity(nus.len() * gammas.len());
    for &nu in &nus {
        for &gamma in &gammas {
            let score = ocsvm::train(train_normals, nu, gamma, opts)
                .and_then(|model| f_hat(&model, validation_normals, unlabeled_mix))
                .unwrap_or(-1.0);
            table.push(GridCell {
                nu,
                gamma,
                f_hat: score,
            });
        }
    }
    // ascending (ν, γ) order makes "keep the first strict maximum" equal to
    // the smaller-ν-then-smaller-γ tie-break
    let mut best = &table[0];
    for cell in &table[1..] {
        if cell.f_hat > best.f_hat {
            best = cell;
        }
    }
    Ok(GridSearchResult {
        best: (best.nu, best.gamma),
        table,
    })
}
