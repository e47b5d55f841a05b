//! Per-class kernel subspace estimation.
//!
//! A [`ClassBasis`] stores a landmark set `X_B` sub-sampled from one class
//! and a transform `A` with `A^T K(X_B, X_B) A = I`. The columns of
//! `Phi(X_B) A` are an orthonormal basis of the estimated class subspace in
//! the kernel feature space, and the coordinates of any point in that basis
//! are `A^T k(X_B, x)`.
//!
//! Landmarks are chosen greedily: a point is admitted when the squared
//! residual of its feature image, after projection onto the span of the
//! current landmarks, exceeds a tolerance. The residual is tracked with an
//! incremental Cholesky factor of the landmark Gram.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{gram, KernelSet, KernelSpec};

pub const DEFAULT_TOL: f64 = 1e-3;
pub const DEFAULT_MAX_RANK: usize = 256;
/// Eigenvalues of the landmark Gram below this fraction of the largest are
/// treated as null directions.
pub const RANK_EPS: f64 = 1e-10;
// Residuals below this are rounding noise, whatever the tolerance.
const ADMIT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisOptions {
    pub tol: f64,
    pub max_rank: usize,
    /// Seed for the admission order; `None` keeps the data order.
    pub seed: Option<u64>,
}

impl Default for BasisOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_rank: DEFAULT_MAX_RANK,
            seed: Some(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassBasis {
    pub class_id: usize,
    pub kernel_index: usize,
    /// Landmark points, one per row.
    pub landmarks: DMatrix<f64>,
    /// `m x r` transform; `r` is the rank of the basis.
    pub transform: DMatrix<f64>,
}

impl ClassBasis {
    pub fn rank(&self) -> usize {
        self.transform.ncols()
    }

    pub fn n_landmarks(&self) -> usize {
        self.landmarks.nrows()
    }

    pub fn dim(&self) -> usize {
        self.landmarks.ncols()
    }

    /// Coordinates `A^T k(X_B, x)` of `phi(x)` in the basis.
    pub fn project(&self, spec: &KernelSpec, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let point = DMatrix::from_row_slice(1, x.len(), x);
        Ok(self.project_many(spec, &point)?.row(0).iter().copied().collect())
    }

    /// Projects every row of `points`; returns an `N x r` matrix.
    pub fn project_many(&self, spec: &KernelSpec, points: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if points.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: points.ncols(),
            });
        }
        if points.nrows() == 0 {
            return Ok(DMatrix::zeros(0, self.rank()));
        }
        let k = gram(spec, points, &self.landmarks)?;
        Ok(&k * &self.transform)
    }

    /// `A^T K(X_B, X_B) A`, which is the identity for a well-formed basis.
    pub fn orthonormality(&self, spec: &KernelSpec) -> Result<DMatrix<f64>> {
        let k = gram(spec, &self.landmarks, &self.landmarks)?;
        let at = self.transform.transpose();
        Ok(&at * &k * &self.transform)
    }
}

/// Greedy landmark selection followed by eigen-orthonormalization.
pub fn fit_class_basis(
    class_id: usize,
    kernel_index: usize,
    data: &DMatrix<f64>,
    spec: &KernelSpec,
    opts: &BasisOptions,
) -> Result<ClassBasis> {
    let n = data.nrows();
    if n == 0 {
        return Err(Error::Empty("class data"));
    }
    if !(opts.tol >= 0.0 && opts.tol < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "basis tolerance must lie in [0, 1), got {}",
            opts.tol
        )));
    }
    if opts.max_rank == 0 {
        return Err(Error::InvalidParameter("max_rank must be at least 1".into()));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("class data"));
    }

    let mut order: Vec<usize> = (0..n).collect();
    if let Some(seed) = opts.seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let budget = opts.max_rank.min(n);
    let threshold = opts.tol.max(ADMIT_FLOOR);

    let rows: Vec<Vec<f64>> = (0..n).map(|i| data.row(i).iter().copied().collect()).collect();
    // Lower-triangular Cholesky factor of the landmark Gram, stored by rows.
    let mut chol: Vec<Vec<f64>> = Vec::with_capacity(budget);
    let mut chosen: Vec<usize> = Vec::with_capacity(budget);
    let mut kb = Vec::with_capacity(budget);
    let mut z = Vec::with_capacity(budget);
    for &i in &order {
        if chosen.len() == budget {
            break;
        }
        kb.clear();
        for &j in &chosen {
            kb.push(crate::kernel::eval_kernel(spec, &rows[j], &rows[i])?);
        }
        // Forward substitution L z = k_B.
        z.clear();
        for (r, lrow) in chol.iter().enumerate() {
            let s: f64 = lrow[..r].iter().zip(&z).map(|(a, b)| a * b).sum();
            z.push((kb[r] - s) / lrow[r]);
        }
        let residual = 1.0 - z.iter().map(|v| v * v).sum::<f64>();
        if residual > threshold {
            let mut lrow = z.clone();
            lrow.push(residual.sqrt());
            chol.push(lrow);
            chosen.push(i);
        }
    }
    if chosen.is_empty() {
        // Only reachable when every residual is below the threshold, which
        // cannot happen for the first point of a normalized kernel.
        return Err(Error::DegenerateGram);
    }

    let p = data.ncols();
    let landmarks = DMatrix::from_fn(chosen.len(), p, |r, c| data[(chosen[r], c)]);
    let transform = orthonormalizing_transform(&gram(spec, &landmarks, &landmarks)?)?;
    Ok(ClassBasis {
        class_id,
        kernel_index,
        landmarks,
        transform,
    })
}

/// `A = V Lambda^{-1/2}` over the eigenpairs above `RANK_EPS * lambda_max`,
/// ordered by decreasing eigenvalue.
fn orthonormalizing_transform(k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(k.clone());
    let lambda_max = eig.eigenvalues.max();
    if !(lambda_max.is_finite() && lambda_max > 0.0) {
        return Err(Error::DegenerateGram);
    }
    let cutoff = RANK_EPS * lambda_max;
    let mut keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] > cutoff)
        .collect();
    if keep.is_empty() {
        return Err(Error::DegenerateGram);
    }
    keep.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let m = k.nrows();
    let mut a = DMatrix::zeros(m, keep.len());
    for (col, &i) in keep.iter().enumerate() {
        let scale = eig.eigenvalues[i].sqrt().recip();
        // Fix the sign so the largest-magnitude entry is positive.
        let v = eig.eigenvectors.column(i);
        let pivot = v.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        a.set_column(col, &(v * (scale * sign)));
    }
    Ok(a)
}

/// Bases for every (class, kernel) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisBank {
    n_classes: usize,
    n_kernels: usize,
    bases: Vec<Option<ClassBasis>>,
}

impl BasisBank {
    pub fn new(n_classes: usize, n_kernels: usize) -> Self {
        Self {
            n_classes,
            n_kernels,
            bases: vec![None; n_classes * n_kernels],
        }
    }

    /// Fits one basis per class per kernel. `per_class[c]` holds the rows of
    /// class `c`. Each class gets its own admission-order seed, shared by all
    /// kernels.
    pub fn fit(per_class: &[DMatrix<f64>], kernels: &KernelSet, opts: &BasisOptions) -> Result<Self> {
        let n_classes = per_class.len();
        let n_kernels = kernels.len();
        let jobs: Vec<(usize, usize)> = (0..n_classes)
            .flat_map(|c| (0..n_kernels).map(move |k| (c, k)))
            .collect();
        let fitted: Vec<Result<ClassBasis>> = jobs
            .par_iter()
            .map(|&(c, k)| {
                let class_opts = BasisOptions {
                    seed: opts.seed.map(|s| class_seed(s, c)),
                    ..*opts
                };
                fit_class_basis(c, k, &per_class[c], &kernels.as_slice()[k], &class_opts)
            })
            .collect();
        let mut bank = Self::new(n_classes, n_kernels);
        for basis in fitted {
            bank.insert(basis?);
        }
        Ok(bank)
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_kernels(&self) -> usize {
        self.n_kernels
    }

    pub fn get(&self, class: usize, kernel: usize) -> Option<&ClassBasis> {
        if class >= self.n_classes || kernel >= self.n_kernels {
            return None;
        }
        self.bases[class * self.n_kernels + kernel].as_ref()
    }

    pub fn require(&self, class: usize, kernel: usize) -> Result<&ClassBasis> {
        self.get(class, kernel)
            .ok_or(Error::MissingBasis { class, kernel })
    }

    pub fn insert(&mut self, basis: ClassBasis) {
        let idx = basis.class_id * self.n_kernels + basis.kernel_index;
        self.bases[idx] = Some(basis);
    }

    pub fn remove(&mut self, class: usize, kernel: usize) -> Option<ClassBasis> {
        self.bases
            .get_mut(class * self.n_kernels + kernel)
            .and_then(Option::take)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ClassBasis> {
        self.bases.iter().flatten()
    }
}

pub(crate) fn class_seed(seed: u64, class: usize) -> u64 {
    seed ^ (class as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Low-rank surrogate `L = P P^T` of the Gram over `points`, with `P` the
/// projections, together with the exact Gram and `|K - L|_F`.
#[derive(Debug, Clone)]
pub struct ApproxGram {
    pub approx: DMatrix<f64>,
    pub exact: DMatrix<f64>,
    pub frobenius_error: f64,
}

pub fn approx_gram(basis: &ClassBasis, spec: &KernelSpec, points: &DMatrix<f64>) -> Result<ApproxGram> {
    let p = basis.project_many(spec, points)?;
    let approx = &p * p.transpose();
    let exact = gram(spec, points, points)?;
    let frobenius_error = (&exact - &approx).norm();
    Ok(ApproxGram {
        approx,
        exact,
        frobenius_error,
    })
}

/// `Q = A_a^T K(X_a, X_b) A_b`, the cross-Gram of two orthonormal bases that
/// live in the same feature space.
pub fn subspace_overlap(a: &ClassBasis, b: &ClassBasis, kernels: &KernelSet) -> Result<DMatrix<f64>> {
    if a.kernel_index != b.kernel_index {
        return Err(Error::KernelMismatch(a.kernel_index, b.kernel_index));
    }
    let spec = kernels.get(a.kernel_index).ok_or(Error::MissingBasis {
        class: a.class_id,
        kernel: a.kernel_index,
    })?;
    let k = gram(spec, &a.landmarks, &b.landmarks)?;
    Ok(a.transform.transpose() * k * &b.transform)
}

#[cfg(test)]
/// Squared norm of each row.
pub(crate) fn row_norms_sq(m: &DMatrix<f64>) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_iterator(m.nrows(), m.row_iter().map(|r| r.norm_squared()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_points(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, p, |_, _| rng.gen_range(-1.5..1.5))
    }

    fn opts(tol: f64) -> BasisOptions {
        BasisOptions {
            tol,
            max_rank: 256,
            seed: Some(3),
        }
    }

    fn identity_error(m: &DMatrix<f64>) -> f64 {
        (m - DMatrix::identity(m.nrows(), m.ncols())).abs().max()
    }

    #[test]
    fn single_point_basis() {
        let x = DMatrix::from_row_slice(1, 2, &[0.4, 0.9]);
        let spec = KernelSpec::rbf(0.5).unwrap();
        let b = fit_class_basis(0, 0, &x, &spec, &opts(1e-3)).unwrap();
        assert_eq!(b.rank(), 1);
        assert!((b.transform[(0, 0)] - 1.0).abs() < 1e-12);
        let p = b.project(&spec, &[0.4, 0.9]).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_points_under_linear_kernel() {
        // Feature images of poly:1 are (1, x) / |(1, x)|: three collinear
        // 2-D points lift to a rank-2 set.
        let x = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 1.0, 2.0, 2.0]);
        let spec = KernelSpec::polynomial(1).unwrap();
        let full = gram(&spec, &x, &x).unwrap();
        let eig = SymmetricEigen::new(full).eigenvalues;
        let oracle_rank = eig.iter().filter(|&&v| v > 1e-10 * eig.max()).count();
        assert_eq!(oracle_rank, 2);
        let b = fit_class_basis(0, 0, &x, &spec, &opts(1e-6)).unwrap();
        assert_eq!(b.n_landmarks(), 2);
        assert_eq!(b.rank(), 2);
    }

    #[test]
    fn zero_tolerance_reaches_full_rank() {
        let spec = KernelSpec::polynomial(2).unwrap();
        // poly:2 on 2-D data spans at most 6 dimensions.
        let x = random_points(15, 2, 11);
        let full = gram(&spec, &x, &x).unwrap();
        let eig = SymmetricEigen::new(full).eigenvalues;
        let oracle_rank = eig.iter().filter(|&&v| v > 1e-10 * eig.max()).count();
        let b = fit_class_basis(0, 0, &x, &spec, &opts(0.0)).unwrap();
        assert_eq!(b.rank(), oracle_rank);
        assert_eq!(oracle_rank, 6);
    }

    #[test]
    fn basis_is_orthonormal() {
        let x = random_points(80, 3, 5);
        for spec in [
            KernelSpec::rbf(0.3).unwrap(),
            KernelSpec::rbf(2.0).unwrap(),
            KernelSpec::polynomial(8).unwrap(),
        ] {
            let b = fit_class_basis(0, 0, &x, &spec, &opts(1e-3)).unwrap();
            assert!(identity_error(&b.orthonormality(&spec).unwrap()) < 1e-6);
        }
    }

    #[test]
    fn max_rank_caps_landmarks() {
        let x = random_points(60, 2, 9);
        let spec = KernelSpec::rbf(0.1).unwrap();
        let b = fit_class_basis(
            0,
            0,
            &x,
            &spec,
            &BasisOptions {
                tol: 1e-3,
                max_rank: 7,
                seed: None,
            },
        )
        .unwrap();
        assert_eq!(b.n_landmarks(), 7);
    }

    #[test]
    fn projection_of_landmarks_has_unit_norm() {
        let x = random_points(12, 2, 1);
        let spec = KernelSpec::rbf(0.8).unwrap();
        let b = fit_class_basis(0, 0, &x, &spec, &opts(0.0)).unwrap();
        let p = b.project_many(&spec, &b.landmarks).unwrap();
        for n in row_norms_sq(&p).iter() {
            assert!((n - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn orthogonal_point_projects_to_zero() {
        let x = DMatrix::from_row_slice(2, 1, &[0.0, 0.5]);
        let spec = KernelSpec::rbf(0.01).unwrap();
        let b = fit_class_basis(0, 0, &x, &spec, &opts(1e-3)).unwrap();
        let p = b.project(&spec, &[100.0]).unwrap();
        assert!(p.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn approx_gram_is_exact_on_full_rank_landmarks() {
        let x = random_points(10, 2, 4);
        let spec = KernelSpec::rbf(0.7).unwrap();
        let b = fit_class_basis(0, 0, &x, &spec, &opts(0.0)).unwrap();
        let a = approx_gram(&b, &spec, &b.landmarks).unwrap();
        assert!((&a.approx - &a.exact).abs().max() < 1e-8);
    }

    #[test]
    fn approx_gram_shrinks_diagonal_and_tightens_with_tol() {
        let x = random_points(20, 2, 8);
        let spec = KernelSpec::rbf(1.5).unwrap();
        let fine = fit_class_basis(0, 0, &x, &spec, &opts(1e-3)).unwrap();
        let coarse = fit_class_basis(0, 0, &x, &spec, &opts(1e-1)).unwrap();
        let a_fine = approx_gram(&fine, &spec, &x).unwrap();
        let a_coarse = approx_gram(&coarse, &spec, &x).unwrap();
        for i in 0..x.nrows() {
            assert!(a_fine.approx[(i, i)] <= a_fine.exact[(i, i)] + 1e-8);
            assert!(a_coarse.approx[(i, i)] <= a_coarse.exact[(i, i)] + 1e-8);
        }
        assert!(a_fine.frobenius_error < a_coarse.frobenius_error);
    }

    #[test]
    fn overlap_properties() {
        let spec = KernelSpec::rbf(0.6).unwrap();
        let kernels = KernelSet::new(vec![spec, KernelSpec::polynomial(3).unwrap()]).unwrap();
        let xa = random_points(25, 2, 21);
        let xb = random_points(25, 2, 22);
        let a = fit_class_basis(0, 0, &xa, &spec, &opts(1e-3)).unwrap();
        let b = fit_class_basis(1, 0, &xb, &spec, &opts(1e-3)).unwrap();
        assert!(identity_error(&subspace_overlap(&a, &a, &kernels).unwrap()) < 1e-6);
        let q = subspace_overlap(&a, &b, &kernels).unwrap();
        let smax = q.singular_values().max();
        assert!(smax <= 1.0 + 1e-6, "sigma_max = {smax}");

        let far = xb.map(|v| v + 1000.0);
        let c = fit_class_basis(1, 0, &far, &spec, &opts(1e-3)).unwrap();
        assert_eq!(subspace_overlap(&a, &c, &kernels).unwrap().abs().max(), 0.0);

        let d = fit_class_basis(1, 1, &xb, &kernels.as_slice()[1], &opts(1e-3)).unwrap();
        assert!(matches!(
            subspace_overlap(&a, &d, &kernels),
            Err(Error::KernelMismatch(0, 1))
        ));
    }

    #[test]
    fn monotone_in_tolerance() {
        let x = random_points(30, 2, 13);
        let spec = KernelSpec::rbf(0.4).unwrap();
        let mut last = f64::INFINITY;
        for tol in [0.5, 0.1, 1e-2, 1e-3, 1e-5] {
            let b = fit_class_basis(0, 0, &x, &spec, &opts(tol)).unwrap();
            let err = approx_gram(&b, &spec, &x).unwrap().frobenius_error;
            assert!(err <= last + 1e-12, "tol {tol}: {err} > {last}");
            last = err;
        }
    }

    #[test]
    fn rejects_bad_options() {
        let x = random_points(3, 2, 0);
        let spec = KernelSpec::rbf(1.0).unwrap();
        assert!(fit_class_basis(0, 0, &x, &spec, &opts(1.0)).is_err());
        assert!(fit_class_basis(0, 0, &DMatrix::zeros(0, 2), &spec, &opts(0.1)).is_err());
        let b = fit_class_basis(0, 0, &x, &spec, &opts(0.1)).unwrap();
        assert!(matches!(
            b.project(&spec, &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
