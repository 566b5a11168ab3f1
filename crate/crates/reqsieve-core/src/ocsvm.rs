//! ν-one-class SVM with RBF kernel.
//!
//! The dual problem is
//!
//! ```text
//! minimize   1/2 Σ_i Σ_j α_i α_j K(x_i, x_j)
//! subject to 0 ≤ α_i ≤ 1/(νm),  Σ_i α_i = 1
//! ```
//!
//! solved by pairwise coordinate descent (SMO) with maximal-violating-pair
//! selection and an LRU cache of kernel rows. The decision function is
//! `f(x) = Σ α_i K(x_i, x) − ρ`, with ρ chosen so that f vanishes on margin
//! support vectors. A request is accepted as normal when f(x) ≥ θ; θ is an
//! operating point picked downstream, 0 until then.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::request::ClassLabel;
use crate::vectorizer::SparseVector;

/// RBF kernel parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    gamma: f64,
}

impl KernelParams {
    pub fn new(gamma: f64) -> Result<Self> {
        if gamma <= 0.0 || !gamma.is_finite() {
            return Err(Error::InvalidParameter("gamma must be positive and finite"));
        }
        Ok(KernelParams { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

fn rbf(a: &SparseVector, b: &SparseVector, gamma: f64) -> f64 {
    // dims are validated by callers
    let d2 = a
        .squared_distance(b)
        .expect("kernel operands share dimensionality");
    libm::exp(-gamma * d2)
}

/// `exp(−γ‖a−b‖²)`; always in (0, 1], and 1 exactly when a == b.
pub fn rbf_kernel(a: &SparseVector, b: &SparseVector, gamma: f64) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    KernelParams::new(gamma)?;
    Ok(rbf(a, b, gamma))
}

/// Solver knobs. `max_iter` defaults to 100·m when unset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    /// KKT gap at which the solver stops.
    pub tol: f64,
    pub max_iter: Option<usize>,
    /// Kernel rows kept resident; eviction is least-recently-used.
    pub cache_rows: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            tol: 1e-4,
            max_iter: None,
            cache_rows: 1024,
        }
    }
}

/// LRU cache of full kernel rows over the training set.
struct KernelCache<'a> {
    vectors: &'a [SparseVector],
    gamma: f64,
    rows: Vec<Option<Box<[f64]>>>,
    stamp: Vec<u64>,
    clock: u64,
    resident: usize,
    capacity: usize,
}

impl<'a> KernelCache<'a> {
    fn new(vectors: &'a [SparseVector], gamma: f64, capacity: usize) -> Self {
        let m = vectors.len();
        KernelCache {
            vectors,
            gamma,
            rows: alloc::vec![None; m],
            stamp: alloc::vec![0; m],
            clock: 0,
            resident: 0,
            capacity: capacity.max(2).min(m),
        }
    }

    fn touch(&mut self, i: usize) {
        self.clock += 1;
        self.stamp[i] = self.clock;
    }

    fn ensure(&mut self, i: usize, pinned: usize) {
        if self.rows[i].is_some() {
            self.touch(i);
            return;
        }
        if self.resident >= self.capacity {
            // evict the least recently used row, never the pinned one
            let victim = (0..self.rows.len())
                .filter(|&k| k != pinned && k != i && self.rows[k].is_some())
                .min_by_key(|&k| self.stamp[k])
                .expect("capacity >= 2 leaves an evictable row");
            self.rows[victim] = None;
            self.resident -= 1;
        }
        let base = &self.vectors[i];
        let row: Vec<f64> = self
            .vectors
            .iter()
            .map(|v| rbf(base, v, self.gamma))
            .collect();
        self.rows[i] = Some(row.into_boxed_slice());
        self.resident += 1;
        self.touch(i);
    }

    fn pair(&mut self, i: usize, j: usize) -> (&[f64], &[f64]) {
        self.ensure(i, j);
        self.ensure(j, i);
        (
            self.rows[i].as_deref().expect("row i resident"),
            self.rows[j].as_deref().expect("row j resident"),
        )
    }
}

/// A trained one-class model: support vectors, dual coefficients, offset ρ
/// and the operating threshold θ.
#[derive(Debug, Clone, PartialEq)]
pub struct OcsvmModel {
    support_vectors: Vec<SparseVector>,
    alphas: Vec<f64>,
    rho: f64,
    params: KernelParams,
    nu: f64,
    theta: f64,
    dim: usize,
}

impl OcsvmModel {
    /// Reassembles a model, e.g. from a persisted artifact. Checks the
    /// structural invariants but cannot re-check the training-time box
    /// constraint (the training size is not part of the model).
    pub fn from_parts(
        support_vectors: Vec<SparseVector>,
        alphas: Vec<f64>,
        rho: f64,
        params: KernelParams,
        nu: f64,
        theta: f64,
    ) -> Result<Self> {
        if support_vectors.is_empty() || support_vectors.len() != alphas.len() {
            return Err(Error::InvalidParameter(
                "support vectors and alphas must be non-empty and equal length",
            ));
        }
        if nu.is_nan() || nu <= 0.0 || nu > 1.0 {
            return Err(Error::InvalidParameter("nu must lie in (0, 1]"));
        }
        let dim = support_vectors[0].dim();
        if support_vectors.iter().any(|v| v.dim() != dim) {
            return Err(Error::InvalidParameter("support vector dims differ"));
        }
        if alphas.iter().any(|&a| a <= 0.0 || !a.is_finite()) {
            return Err(Error::InvalidParameter("alphas must be positive and finite"));
        }
        let sum: f64 = alphas.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidParameter("alphas must sum to 1"));
        }
        Ok(OcsvmModel {
            support_vectors,
            alphas,
            rho,
            params,
            nu,
            theta,
            dim,
        })
    }

    pub fn support_vectors(&self) -> &[SparseVector] {
        &self.support_vectors
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn gamma(&self) -> f64 {
        self.params.gamma()
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn set_theta(&mut self, theta: f64) {
        self.theta = theta;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `f(v) = Σ α_i K(sv_i, v) − ρ`.
    pub fn decision(&self, v: &SparseVector) -> Result<f64> {
        if v.dim() != self.dim {
            return Err(Error::DimMismatch {
                left: self.dim,
                right: v.dim(),
            });
        }
        let gamma = self.params.gamma();
        let acc: f64 = self
            .support_vectors
            .iter()
            .zip(&self.alphas)
            .map(|(sv, &a)| a * rbf(sv, v, gamma))
            .sum();
        Ok(acc - self.rho)
    }

    /// Normal when the decision value reaches θ, attack otherwise.
    pub fn predict(&self, v: &SparseVector) -> Result<ClassLabel> {
        Ok(if self.decision(v)? >= self.theta {
            ClassLabel::Normal
        } else {
            ClassLabel::Attack
        })
    }
}

/// Trains the ν-OCSVM on `vectors` (normal traffic only).
///
/// Identical training vectors are not an error: the uniform feasible point
/// is already optimal there and is returned as-is (every point becomes a
/// support vector). Duplicates are kept deliberately; they encode density.
pub fn train(
    vectors: &[SparseVector],
    nu: f64,
    gamma: f64,
    opts: &TrainOptions,
) -> Result<OcsvmModel> {
    let m = vectors.len();
    if m < 2 {
        return Err(Error::DegenerateInput("training needs at least 2 vectors"));
    }
    if nu.is_nan() || nu <= 0.0 || nu > 1.0 {
        return Err(Error::InvalidParameter("nu must lie in (0, 1]"));
    }
    let params = KernelParams::new(gamma)?;
    let dim = vectors[0].dim();
    for v in vectors {
        if v.dim() != dim {
            return Err(Error::DimMismatch {
                left: dim,
                right: v.dim(),
            });
        }
    }

    let c = 1.0 / (nu * m as f64);
    // Uniform start: feasible for both constraints since 1/m <= 1/(νm).
    let mut alpha = alloc::vec![1.0 / m as f64; m];

    // g = Kα via one symmetric pass; K_ii = 1 for the RBF kernel.
    let w = 1.0 / m as f64;
    let mut g = alloc::vec![w; m];
    for i in 0..m {
        for j in (i + 1)..m {
            let k = rbf(&vectors[i], &vectors[j], gamma);
            g[i] += w * k;
            g[j] += w * k;
        }
    }

    let mut dual_obj = 0.5 * alpha.iter().zip(&g).map(|(a, gi)| a * gi).sum::<f64>();
    let mut cache = KernelCache::new(vectors, gamma, opts.cache_rows);
    let max_iter = opts.max_iter.unwrap_or(100 * m);
    let tau = 1e-12;
    let mut converged = false;

    for _ in 0..max_iter {
        // maximal violating pair: receiver i (can grow), donor j (can shrink)
        let mut up: Option<usize> = None;
        let mut down: Option<usize> = None;
        for k in 0..m {
            if alpha[k] < c && up.is_none_or(|u| g[k] < g[u]) {
                up = Some(k);
            }
            if alpha[k] > 0.0 && down.is_none_or(|d| g[k] > g[d]) {
                down = Some(k);
            }
        }
        let (Some(i), Some(j)) = (up, down) else {
            converged = true;
            break;
        };
        if g[j] - g[i] <= opts.tol || i == j {
            converged = true;
            break;
        }

        let (row_i, row_j) = cache.pair(i, j);
        let quad = row_i[i] + row_j[j] - 2.0 * row_i[j];
        let step = ((g[j] - g[i]) / quad.max(tau))
            .min(c - alpha[i])
            .min(alpha[j]);

        let delta_obj = step * (g[i] - g[j]) + 0.5 * step * step * quad;
        debug_assert!(
            delta_obj <= 1e-9,
            "dual objective must not increase: delta {delta_obj}"
        );
        dual_obj += delta_obj;
        debug_assert!(dual_obj.is_finite());

        // transfer mass from j to i, snapping exactly onto bounds so the
        // equality constraint cannot drift
        if step >= alpha[j] {
            alpha[i] += alpha[j];
            alpha[j] = 0.0;
        } else if step >= c - alpha[i] {
            alpha[j] -= c - alpha[i];
            alpha[i] = c;
        } else {
            alpha[i] += step;
            alpha[j] -= step;
        }

        for k in 0..m {
            g[k] += step * (row_i[k] - row_j[k]);
        }
    }

    if !converged {
        return Err(Error::NonConvergence(max_iter));
    }

    // ρ: average of g over margin support vectors; if none exist, midpoint
    // between the bound side and the zero side.
    let mut free_sum = 0.0;
    let mut n_free = 0usize;
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for k in 0..m {
        if alpha[k] >= c {
            lo = lo.max(g[k]);
        } else if alpha[k] > 0.0 {
            free_sum += g[k];
            n_free += 1;
        } else {
            hi = hi.min(g[k]);
        }
    }
    let rho = if n_free > 0 {
        free_sum / n_free as f64
    } else if lo.is_finite() && hi.is_finite() {
        0.5 * (lo + hi)
    } else if lo.is_finite() {
        lo
    } else {
        hi
    };

    let mut support_vectors = Vec::new();
    let mut alphas = Vec::new();
    for (k, &a) in alpha.iter().enumerate() {
        if a > 1e-12 {
            support_vectors.push(vectors[k].clone());
            alphas.push(a);
        }
    }

    Ok(OcsvmModel {
        support_vectors,
        alphas,
        rho,
        params,
        nu,
        theta: 0.0,
        dim,
    })
}
