//! Kernel weight learning: the separability objective, kernel truncation,
//! simplex-constrained optimization of the weight matrix, thresholding and
//! the best-kernel rule.
//!
//! Every quantity here is computed from projections of an evaluation set
//! onto the class bases. Those projections are gathered once into a
//! [`ProjectionCache`] and reduced to small per-class `K x K` Gram matrices
//! ([`QuadraticStats`]), so the objective and its gradient cost `O(C K^2)`
//! per evaluation regardless of the sample size.

use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::data::{split_stratified_indices, Dataset};
use crate::error::{Error, Result};
use crate::kernel::KernelSet;
use crate::subspace::{BasisBank, BasisOptions};

/// Tolerance for row sums and nonnegativity of a weight matrix.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Weights are floored here before square roots so the gradient stays finite.
pub const SQRT_FLOOR: f64 = 1e-12;

/// A `C x K` matrix of kernel weights whose rows lie on the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    nu: DMatrix<f64>,
}

impl WeightMatrix {
    /// Validates nonnegativity and unit row sums.
    pub fn from_matrix(nu: DMatrix<f64>) -> Result<Self> {
        let w = Self { nu };
        if !w.is_feasible(FEASIBILITY_TOL) {
            return Err(Error::InvalidParameter(
                "weight rows must be nonnegative and sum to 1".into(),
            ));
        }
        Ok(w)
    }

    pub fn uniform(n_classes: usize, n_kernels: usize) -> Self {
        Self::uniform_over(n_classes, &vec![true; n_kernels])
    }

    /// Uniform weights over the kernels flagged in `active`, zero elsewhere.
    ///
    /// # Panics
    ///
    /// If no kernel is active.
    pub fn uniform_over(n_classes: usize, active: &[bool]) -> Self {
        let n_active = active.iter().filter(|&&a| a).count();
        assert!(n_active > 0, "at least one kernel must be active");
        let w = 1.0 / n_active as f64;
        Self {
            nu: DMatrix::from_fn(n_classes, active.len(), |_, k| if active[k] { w } else { 0.0 }),
        }
    }

    /// Row `c` puts all mass on kernel `choice[c]`.
    pub fn one_hot(choice: &[usize], n_kernels: usize) -> Result<Self> {
        if let Some(&k) = choice.iter().find(|&&k| k >= n_kernels) {
            return Err(Error::InvalidParameter(format!(
                "kernel index {k} out of range for {n_kernels} kernels"
            )));
        }
        Ok(Self {
            nu: DMatrix::from_fn(choice.len(), n_kernels, |c, k| if choice[c] == k { 1.0 } else { 0.0 }),
        })
    }

    pub fn n_classes(&self) -> usize {
        self.nu.nrows()
    }

    pub fn n_kernels(&self) -> usize {
        self.nu.ncols()
    }

    pub fn get(&self, class: usize, kernel: usize) -> f64 {
        self.nu[(class, kernel)]
    }

    pub fn row(&self, class: usize) -> Vec<f64> {
        self.nu.row(class).iter().copied().collect()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.nu
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.nu.iter().all(|v| v.is_finite() && *v >= -tol)
            && self.nu.row_iter().all(|r| (r.sum() - 1.0).abs() <= tol)
    }

    /// Kernels carrying weight in at least one row.
    pub fn support(&self) -> Vec<bool> {
        self.nu.column_iter().map(|c| c.iter().any(|v| *v > 0.0)).collect()
    }

    pub fn frobenius_distance(&self, other: &Self) -> f64 {
        (&self.nu - &other.nu).norm()
    }

    /// One line per class, `class,w_0,...,w_{K-1}`, below a `#` header naming
    /// the kernels. The header is a comment so the output reads back with
    /// the CSV dataset loader.
    pub fn to_csv(&self, kernels: &KernelSet) -> String {
        let mut out = String::from("# class");
        for spec in kernels.iter() {
            let _ = write!(out, ",{spec}");
        }
        out.push('\n');
        for c in 0..self.n_classes() {
            let _ = write!(out, "{c}");
            for v in self.nu.row(c).iter() {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    fn sqrt_rows(&self) -> DMatrix<f64> {
        self.nu.map(|v| v.max(SQRT_FLOOR).sqrt())
    }
}

/// Between-class numerator, within-class denominator and their ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveParts {
    pub h_b: f64,
    pub h_w: f64,
    pub h: f64,
}

/// Projections of a list of point sets onto the bases of a bank.
///
/// Block `(owner, kernel, set)` holds one row per point of `set`, projected
/// onto the basis of class `owner` under `kernel`.
#[derive(Debug, Clone)]
pub struct ProjectionCache {
    n_classes: usize,
    n_kernels: usize,
    set_sizes: Vec<usize>,
    blocks: Vec<Option<DMatrix<f64>>>,
}

impl ProjectionCache {
    /// Projects every set onto every fitted basis whose kernel is flagged in `kernels_used`.
    pub fn compute(
        bank: &BasisBank,
        kernels: &KernelSet,
        sets: &[DMatrix<f64>],
        kernels_used: &[bool],
    ) -> Result<Self> {
        let (n_classes, n_kernels) = (bank.n_classes(), bank.n_kernels());
        if kernels.len() != n_kernels || kernels_used.len() != n_kernels {
            return Err(Error::DimensionMismatch {
                expected: n_kernels,
                found: kernels.len().min(kernels_used.len()),
            });
        }
        let n_sets = sets.len();
        let jobs: Vec<(usize, usize, usize)> = (0..n_classes)
            .flat_map(|c| (0..n_kernels).flat_map(move |k| (0..n_sets).map(move |s| (c, k, s))))
            .collect();
        let blocks = jobs
            .par_iter()
            .map(|&(c, k, s)| {
                // missing bases surface as errors only where a block is read
                let Some(basis) = bank.get(c, k).filter(|_| kernels_used[k]) else {
                    return Ok(None);
                };
                let spec = kernels.get(k).expect("kernel count checked above");
                if sets[s].nrows() == 0 {
                    return Ok(Some(DMatrix::zeros(0, basis.rank())));
                }
                basis.project_many(spec, &sets[s]).map(Some)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n_classes,
            n_kernels,
            set_sizes: sets.iter().map(|s| s.nrows()).collect(),
            blocks,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_kernels(&self) -> usize {
        self.n_kernels
    }

    pub fn n_sets(&self) -> usize {
        self.set_sizes.len()
    }

    pub fn set_size(&self, set: usize) -> usize {
        self.set_sizes[set]
    }

    pub fn block(&self, owner: usize, kernel: usize, set: usize) -> Option<&DMatrix<f64>> {
        self.blocks[(owner * self.n_kernels + kernel) * self.n_sets() + set].as_ref()
    }

    fn require(&self, owner: usize, kernel: usize, set: usize) -> Result<&DMatrix<f64>> {
        self.block(owner, kernel, set).ok_or(Error::MissingBasis {
            class: owner,
            kernel,
        })
    }
}

/// Class-`owner` block of the combined embedding for the points of `set`:
/// the `sqrt(nu)`-weighted sum of that class's kernel projections, each
/// zero-padded to the widest kernel carrying weight in the row.
pub fn weighted_block(cache: &ProjectionCache, nu: &WeightMatrix, owner: usize, set: usize) -> Result<DMatrix<f64>> {
    let mut parts = Vec::new();
    for k in 0..cache.n_kernels() {
        let w = nu.get(owner, k);
        if w > 0.0 {
            parts.push((w.sqrt(), cache.require(owner, k, set)?));
        }
    }
    let width = parts.iter().map(|(_, p)| p.ncols()).max().unwrap_or(0);
    let mut out = DMatrix::zeros(cache.set_size(set), width);
    for (w, p) in parts {
        let mut view = out.columns_mut(0, p.ncols());
        view += p * w;
    }
    Ok(out)
}

/// Inner product of two projection blocks after zero-padding to equal width.
fn padded_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let r = a.ncols().min(b.ncols());
    a.columns(0, r).dot(&b.columns(0, r))
}

/// Per-class `K x K` matrices that make the objective a pair of quadratic
/// forms in `s = sqrt(nu)`:
///
/// * `own[c][(k, l)]` is the mean over class-`c` points of the padded inner
///   product of their projections onto `U_{c,k}` and `U_{c,l}`;
/// * `cross[c]` is the same quantity summed over every other class's points
///   (each class averaged separately), still projected onto class `c`'s bases.
#[derive(Debug, Clone)]
pub struct QuadraticStats {
    pub own: Vec<DMatrix<f64>>,
    pub cross: Vec<DMatrix<f64>>,
}

impl QuadraticStats {
    /// Needs a cache built over one set per class, in class order.
    pub fn from_cache(cache: &ProjectionCache, kernels_used: &[bool]) -> Result<Self> {
        let (n_classes, n_kernels) = (cache.n_classes(), cache.n_kernels());
        if cache.n_sets() != n_classes {
            return Err(Error::DimensionMismatch {
                expected: n_classes,
                found: cache.n_sets(),
            });
        }
        if let Some(c) = (0..n_classes).find(|&c| cache.set_size(c) == 0) {
            return Err(Error::InvalidParameter(format!("class {c} has no evaluation points")));
        }
        let per_owner = (0..n_classes)
            .into_par_iter()
            .map(|owner| {
                let mut own = DMatrix::zeros(n_kernels, n_kernels);
                let mut cross = DMatrix::zeros(n_kernels, n_kernels);
                for set in 0..n_classes {
                    let inv_n = 1.0 / cache.set_size(set) as f64;
                    let target = if set == owner { &mut own } else { &mut cross };
                    for k in (0..n_kernels).filter(|&k| kernels_used[k]) {
                        let pk = cache.require(owner, k, set)?;
                        for l in (k..n_kernels).filter(|&l| kernels_used[l]) {
                            let pl = cache.require(owner, l, set)?;
                            let v = padded_inner(pk, pl) * inv_n;
                            target[(k, l)] += v;
                            if l != k {
                                target[(l, k)] += v;
                            }
                        }
                    }
                }
                Ok((own, cross))
            })
            .collect::<Result<Vec<_>>>()?;
        let (own, cross) = per_owner.into_iter().unzip();
        Ok(Self { own, cross })
    }

    pub fn n_classes(&self) -> usize {
        self.own.len()
    }

    fn between_scale(&self) -> f64 {
        if self.n_classes() > 1 {
            1.0 / (self.n_classes() - 1) as f64
        } else {
            0.0
        }
    }

    pub fn evaluate(&self, nu: &WeightMatrix) -> ObjectiveParts {
        let s = nu.sqrt_rows();
        let mut h_w = 0.0;
        let mut h_b = 0.0;
        for c in 0..self.n_classes() {
            let sc: DVector<f64> = s.row(c).transpose();
            h_w += sc.dot(&(&self.own[c] * &sc));
            h_b += sc.dot(&(&self.cross[c] * &sc));
        }
        h_b *= self.between_scale();
        ObjectiveParts {
            h_b,
            h_w,
            h: if h_w > 0.0 { h_b / h_w } else { f64::NAN },
        }
    }

    /// Gradient of `h` with respect to the entries of `nu`.
    pub fn gradient(&self, nu: &WeightMatrix) -> (ObjectiveParts, DMatrix<f64>) {
        let parts = self.evaluate(nu);
        let s = nu.sqrt_rows();
        let scale = self.between_scale();
        let mut g = DMatrix::zeros(nu.n_classes(), nu.n_kernels());
        for c in 0..self.n_classes() {
            let sc: DVector<f64> = s.row(c).transpose();
            let ws = &self.own[c] * &sc;
            let bs = &self.cross[c] * &sc;
            for k in 0..nu.n_kernels() {
                // d(s^T M s)/d nu = (M s)_k / s_k
                let dw = ws[k] / sc[k];
                let db = scale * bs[k] / sc[k];
                g[(c, k)] = (db * parts.h_w - parts.h_b * dw) / (parts.h_w * parts.h_w);
            }
        }
        (parts, g)
    }
}

fn check_eval_sets(bank: &BasisBank, eval_set: &[DMatrix<f64>]) -> Result<()> {
    if eval_set.len() != bank.n_classes() {
        return Err(Error::DimensionMismatch {
            expected: bank.n_classes(),
            found: eval_set.len(),
        });
    }
    Ok(())
}

fn check_h_w(parts: ObjectiveParts) -> Result<ObjectiveParts> {
    if !(parts.h_w > 1e-12) {
        return Err(Error::NonRepresentativeModel(parts.h_w));
    }
    Ok(parts)
}

/// The separability ratio of `nu` measured on `eval_set` (one point set per class).
pub fn empirical_objective(
    nu: &WeightMatrix,
    bank: &BasisBank,
    kernels: &KernelSet,
    eval_set: &[DMatrix<f64>],
) -> Result<ObjectiveParts> {
    check_eval_sets(bank, eval_set)?;
    let used = nu.support();
    let cache = ProjectionCache::compute(bank, kernels, eval_set, &used)?;
    let stats = QuadraticStats::from_cache(&cache, &used)?;
    check_h_w(stats.evaluate(nu))
}

/// Representativeness of each kernel and the ones at or below `eta`.
#[derive(Debug, Clone, PartialEq)]
pub struct Truncation {
    pub scores: Vec<f64>,
    pub removed: Vec<usize>,
}

impl Truncation {
    pub fn survivors(&self) -> Vec<bool> {
        let mut keep = vec![true; self.scores.len()];
        for &k in &self.removed {
            keep[k] = false;
        }
        keep
    }
}

/// Scores a kernel by the own-class projection energy it captures, summed
/// over classes, and removes those scoring at most `eta`.
pub fn truncate_from_cache(cache: &ProjectionCache, eta: f64) -> Result<Truncation> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidParameter(format!("eta must lie in (0, 1], got {eta}")));
    }
    let scores: Vec<f64> = (0..cache.n_kernels())
        .map(|k| {
            (0..cache.n_classes())
                .map(|c| {
                    let p = cache.require(c, k, c)?;
                    Ok(p.norm_squared() / cache.set_size(c).max(1) as f64)
                })
                .sum::<Result<f64>>()
        })
        .collect::<Result<_>>()?;
    let removed: Vec<usize> = (0..scores.len()).filter(|&k| scores[k] <= eta).collect();
    if removed.len() == scores.len() {
        return Err(Error::NoRepresentativeKernel);
    }
    Ok(Truncation { scores, removed })
}

pub fn truncate_kernels(
    bank: &BasisBank,
    kernels: &KernelSet,
    eval_set: &[DMatrix<f64>],
    eta: f64,
) -> Result<Truncation> {
    check_eval_sets(bank, eval_set)?;
    let cache = ProjectionCache::compute(bank, kernels, eval_set, &vec![true; kernels.len()])?;
    truncate_from_cache(&cache, eta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOptions {
    /// Stop once an accepted step improves the objective by less than this.
    pub f_tol: f64,
    pub max_iters: usize,
    /// Sufficient-decrease constant of the backtracking line search.
    pub armijo: f64,
    pub initial_step: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            f_tol: 1e-8,
            max_iters: 500,
            armijo: 1e-4,
            initial_step: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub nu: WeightMatrix,
    /// Objective at the initial point followed by every accepted iterate.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Euclidean projection of `v` onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Projects each row onto the simplex over the kernels in `active`.
fn project_rows(m: &DMatrix<f64>, active: &[bool]) -> DMatrix<f64> {
    let idx: Vec<usize> = (0..active.len()).filter(|&k| active[k]).collect();
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for c in 0..m.nrows() {
        let sub: Vec<f64> = idx.iter().map(|&k| m[(c, k)]).collect();
        for (&k, v) in idx.iter().zip(project_simplex(&sub)) {
            out[(c, k)] = v;
        }
    }
    out
}

/// Projected gradient descent with backtracking on precomputed statistics.
///
/// Kernels whose column is zero in `init` stay at zero.
pub fn optimize_stats(stats: &QuadraticStats, init: &WeightMatrix, opts: &OptimizeOptions) -> Result<OptimizeResult> {
    if !init.is_feasible(FEASIBILITY_TOL) {
        return Err(Error::InvalidParameter("initial weights are not feasible".into()));
    }
    if init.n_classes() != stats.n_classes() {
        return Err(Error::DimensionMismatch {
            expected: stats.n_classes(),
            found: init.n_classes(),
        });
    }
    let active = init.support();
    let mut nu = init.clone();
    let (mut parts, mut grad) = stats.gradient(&nu);
    check_h_w(parts)?;
    if !parts.h.is_finite() {
        return Err(Error::NonFiniteObjective {
            last_feasible: Box::new(nu),
        });
    }
    let mut trace = vec![parts.h];
    let mut alpha = opts.initial_step;
    let mut converged = false;
    let mut iterations = 0;
    if active.iter().filter(|&&a| a).count() == 1 {
        return Ok(OptimizeResult {
            nu,
            trace,
            iterations,
            converged: true,
        });
    }
    while iterations < opts.max_iters {
        let mut accepted = None;
        for _ in 0..60 {
            let cand = WeightMatrix {
                nu: project_rows(&(nu.as_matrix() - alpha * &grad), &active),
            };
            let step = cand.as_matrix() - nu.as_matrix();
            if step.norm() <= 1e-15 {
                break;
            }
            let cand_parts = stats.evaluate(&cand);
            if !cand_parts.h.is_finite() {
                return Err(Error::NonFiniteObjective {
                    last_feasible: Box::new(nu),
                });
            }
            if cand_parts.h <= parts.h + opts.armijo * grad.dot(&step) {
                accepted = Some((cand, cand_parts));
                break;
            }
            alpha *= 0.5;
        }
        let Some((cand, cand_parts)) = accepted else {
            converged = true;
            break;
        };
        iterations += 1;
        let improvement = parts.h - cand_parts.h;
        nu = cand;
        (parts, grad) = stats.gradient(&nu);
        trace.push(parts.h);
        alpha *= 2.0;
        if improvement < opts.f_tol {
            converged = true;
            break;
        }
    }
    log::debug!("weight optimization: {iterations} iterations, h = {:.6e}", parts.h);
    Ok(OptimizeResult {
        nu,
        trace,
        iterations,
        converged,
    })
}

/// Minimizes the separability ratio over simplex-constrained weights,
/// starting from `init`.
pub fn optimize_weights(
    bank: &BasisBank,
    kernels: &KernelSet,
    eval_set: &[DMatrix<f64>],
    init: &WeightMatrix,
    opts: &OptimizeOptions,
) -> Result<OptimizeResult> {
    check_eval_sets(bank, eval_set)?;
    let used = init.support();
    let cache = ProjectionCache::compute(bank, kernels, eval_set, &used)?;
    let stats = QuadraticStats::from_cache(&cache, &used)?;
    optimize_stats(&stats, init, opts)
}

/// Zeroes entries below `t` times their row maximum and renormalizes.
///
/// # Panics
///
/// If `t` is outside `[0, 1)`.
pub fn threshold_weights(nu: &WeightMatrix, t: f64) -> WeightMatrix {
    assert!((0.0..1.0).contains(&t), "threshold must lie in [0, 1), got {t}");
    let mut out = nu.nu.clone();
    for mut row in out.row_iter_mut() {
        let cutoff = t * row.max();
        let mut removed = false;
        row.apply(|v| {
            if *v > 0.0 && *v < cutoff {
                *v = 0.0;
                removed = true;
            }
        });
        // leaving untouched rows alone keeps a second pass bit-identical
        if removed {
            let sum = row.sum();
            row /= sum;
        }
    }
    WeightMatrix { nu: out }
}

/// The heaviest kernel of each row, lowest index on ties.
pub fn select_best_kernels(nu: &WeightMatrix) -> Vec<usize> {
    (0..nu.n_classes())
        .map(|c| {
            let mut best = 0;
            for k in 1..nu.n_kernels() {
                if nu.get(c, k) > nu.get(c, best) {
                    best = k;
                }
            }
            best
        })
        .collect()
}

/// Per-class selection ratio for kernel `k`: the mean energy other classes
/// leave in class `c`'s subspace, over the squared norm of class `c`'s own
/// mean projection. Smaller is better.
pub fn classwise_criterion(
    bank: &BasisBank,
    kernels: &KernelSet,
    eval_set: &[DMatrix<f64>],
    class: usize,
    kernel: usize,
) -> Result<f64> {
    check_eval_sets(bank, eval_set)?;
    let basis = bank.require(class, kernel)?;
    let spec = kernels.get(kernel).ok_or(Error::MissingBasis { class, kernel })?;
    let n_classes = eval_set.len();
    let own = basis.project_many(spec, &eval_set[class])?;
    if own.nrows() == 0 {
        return Err(Error::Empty("class evaluation set"));
    }
    let mean_sq = own.row_mean().norm_squared();
    if mean_sq <= 1e-12 {
        return Err(Error::MeanCollapse { class, kernel });
    }
    let mut cross = 0.0;
    for (other, points) in eval_set.iter().enumerate() {
        if other == class || points.nrows() == 0 {
            continue;
        }
        let p = basis.project_many(spec, points)?;
        cross += p.norm_squared() / points.nrows() as f64;
    }
    if n_classes > 1 {
        cross /= (n_classes - 1) as f64;
    }
    Ok(cross / mean_sq)
}

/// Hyperparameters of the single-layer learning procedure.
#[derive(Debug, Clone, PartialEq)]
pub struct ClasmkHyper {
    pub eta: f64,
    pub t: f64,
    /// Fraction of each class used to fit the bases; the rest fits the weights.
    pub split_fraction: f64,
    pub split_seed: u64,
    pub basis: BasisOptions,
    pub optimize: OptimizeOptions,
}

impl Default for ClasmkHyper {
    fn default() -> Self {
        Self {
            eta: 0.1,
            t: 0.1,
            split_fraction: 0.5,
            split_seed: 0,
            basis: BasisOptions::default(),
            optimize: OptimizeOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClasmkModel {
    /// Bases for every class and kernel, truncated kernels included.
    pub bank: BasisBank,
    /// Final weights after thresholding.
    pub nu: WeightMatrix,
    /// Optimized weights before thresholding.
    pub nu_optimized: WeightMatrix,
    pub truncation: Truncation,
    pub objective_initial: ObjectiveParts,
    pub objective_optimized: ObjectiveParts,
    pub objective_final: ObjectiveParts,
    pub trace: Vec<f64>,
    pub iterations: usize,
    /// Wall time of projecting the weight-fitting subset, building the
    /// statistics and running the optimizer.
    pub optimize_seconds: f64,
}

impl ClasmkModel {
    pub fn best_kernels(&self) -> Vec<usize> {
        select_best_kernels(&self.nu)
    }
}

/// Splits the data per class, fits all bases on the first part, truncates and
/// optimizes the weights on the second part, then thresholds them.
pub fn train_clasmk(train: &Dataset, kernels: &KernelSet, hyper: &ClasmkHyper) -> Result<ClasmkModel> {
    if let Some((c, n)) = train.class_counts().into_iter().enumerate().find(|&(_, n)| n < 2) {
        return Err(Error::InvalidParameter(format!(
            "class {c} has {n} samples; at least 2 are needed"
        )));
    }
    let (basis_idx, weight_idx) = split_stratified_indices(train, hyper.split_fraction, hyper.split_seed)?;
    let basis_part = train.subset(&basis_idx);
    let weight_part = train.subset(&weight_idx);
    let bank = BasisBank::fit(&basis_part.per_class(), kernels, &hyper.basis)?;
    let eval_set = weight_part.per_class();

    let started = Instant::now();
    let all = vec![true; kernels.len()];
    let cache = ProjectionCache::compute(&bank, kernels, &eval_set, &all)?;
    let truncation = truncate_from_cache(&cache, hyper.eta)?;
    let survivors = truncation.survivors();
    let stats = QuadraticStats::from_cache(&cache, &survivors)?;
    let init = WeightMatrix::uniform_over(train.n_classes(), &survivors);
    let objective_initial = check_h_w(stats.evaluate(&init))?;
    let result = optimize_stats(&stats, &init, &hyper.optimize)?;
    let optimize_seconds = started.elapsed().as_secs_f64();

    let objective_optimized = stats.evaluate(&result.nu);
    let nu = threshold_weights(&result.nu, hyper.t);
    let objective_final = stats.evaluate(&nu);
    log::info!(
        "kernels removed: {:?}; h {:.5} -> {:.5} ({} iterations, {:.3}s)",
        truncation.removed,
        objective_initial.h,
        objective_final.h,
        result.iterations,
        optimize_seconds
    );
    Ok(ClasmkModel {
        bank,
        nu,
        nu_optimized: result.nu,
        truncation,
        objective_initial,
        objective_optimized,
        objective_final,
        trace: result.trace,
        iterations: result.iterations,
        optimize_seconds,
    })
}
