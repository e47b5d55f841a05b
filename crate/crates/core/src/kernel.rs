//! Normalized kernel functions, Gram blocks and kernel-induced distances.
//!
//! Every kernel in this crate is used in normalized form, so the implicit
//! feature image of any point lies on the unit sphere: `k(x, x) = 1`.
//!
//! * RBF: `exp(-|x - y|^2 / sigma^2)`, already normalized.
//! * Polynomial: `(1 + x.y)^d`, cosine-normalized to
//!   `((1 + x.y) / sqrt((1 + |x|^2)(1 + |y|^2)))^d`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metric::WeightMatrix;
use crate::subspace::BasisBank;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelFamily {
    Rbf,
    Polynomial,
}

/// One parameterized kernel. `param` is the width `sigma` for RBF and the
/// integer degree for polynomial kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    param: f64,
}

impl KernelSpec {
    pub fn rbf(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "rbf width must be positive, got {sigma}"
            )));
        }
        Ok(Self {
            family: KernelFamily::Rbf,
            param: sigma,
        })
    }

    pub fn polynomial(degree: u32) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidParameter(
                "polynomial degree must be a positive integer".into(),
            ));
        }
        Ok(Self {
            family: KernelFamily::Polynomial,
            param: f64::from(degree),
        })
    }

    /// Rebuilds a spec from its stored family and parameter, validating both.
    pub fn from_parts(family: KernelFamily, param: f64) -> Result<Self> {
        match family {
            KernelFamily::Rbf => Self::rbf(param),
            KernelFamily::Polynomial => {
                if param.fract() != 0.0 || param < 1.0 || param > f64::from(u32::MAX) {
                    return Err(Error::InvalidParameter(format!(
                        "polynomial degree must be a positive integer, got {param}"
                    )));
                }
                Self::polynomial(param as u32)
            }
        }
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn param(&self) -> f64 {
        self.param
    }

    fn degree(&self) -> i32 {
        self.param as i32
    }

    /// Kernel value from precomputed sufficient statistics of the pair.
    #[inline]
    fn from_stats(&self, dot: f64, sq_x: f64, sq_y: f64) -> f64 {
        match self.family {
            KernelFamily::Rbf => {
                let d2 = (sq_x + sq_y - 2.0 * dot).max(0.0);
                (-d2 / (self.param * self.param)).exp()
            }
            KernelFamily::Polynomial => {
                let cos = (1.0 + dot) / ((1.0 + sq_x) * (1.0 + sq_y)).sqrt();
                cos.clamp(-1.0, 1.0).powi(self.degree())
            }
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            KernelFamily::Rbf => write!(f, "rbf:{}", self.param),
            KernelFamily::Polynomial => write!(f, "poly:{}", self.degree()),
        }
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    /// Parses `rbf:<sigma>` or `poly:<degree>`.
    fn from_str(s: &str) -> Result<Self> {
        let (family, value) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::InvalidParameter(format!("kernel `{s}`: expected family:param")))?;
        let bad = || Error::InvalidParameter(format!("kernel `{s}`: bad parameter"));
        match family.trim().to_ascii_lowercase().as_str() {
            "rbf" => Self::rbf(value.trim().parse::<f64>().map_err(|_| bad())?),
            "poly" | "polynomial" => Self::polynomial(value.trim().parse::<u32>().map_err(|_| bad())?),
            other => Err(Error::InvalidParameter(format!("unknown kernel family `{other}`"))),
        }
    }
}

/// Ordered kernel set; positions match the columns of a [`WeightMatrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSet {
    kernels: Vec<KernelSpec>,
}

impl KernelSet {
    pub fn new(kernels: Vec<KernelSpec>) -> Result<Self> {
        if kernels.is_empty() {
            return Err(Error::Empty("kernel set"));
        }
        Ok(Self { kernels })
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&KernelSpec> {
        self.kernels.get(index)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, KernelSpec> {
        self.kernels.iter()
    }

    pub fn as_slice(&self) -> &[KernelSpec] {
        &self.kernels
    }

    pub fn gram_block(&self, kernel_index: usize, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<GramBlock> {
        let spec = self.kernels.get(kernel_index).ok_or_else(|| {
            Error::InvalidParameter(format!("kernel index {kernel_index} out of range"))
        })?;
        Ok(GramBlock {
            values: gram(spec, x, y)?,
            kernel_index,
        })
    }
}

/// Kernel evaluations between two point sets for one kernel of a set.
#[derive(Debug, Clone)]
pub struct GramBlock {
    pub values: DMatrix<f64>,
    pub kernel_index: usize,
}

/// Normalized kernel value `k(x, y) / sqrt(k(x, x) k(y, y))`.
pub fn eval_kernel(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("kernel input"));
    }
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sq_x: f64 = x.iter().map(|a| a * a).sum();
    let sq_y: f64 = y.iter().map(|a| a * a).sum();
    Ok(spec.from_stats(dot, sq_x, sq_y))
}

/// Gram block between the rows of `x` and the rows of `y`.
///
/// Entries are computed independently, so the parallel column sweep is
/// deterministic.
pub fn gram(spec: &KernelSpec, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.nrows() == 0 || y.nrows() == 0 {
        return Err(Error::Empty("point set"));
    }
    if x.ncols() != y.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            found: y.ncols(),
        });
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("kernel input"));
    }
    let sq_x: Vec<f64> = x.row_iter().map(|r| r.norm_squared()).collect();
    let sq_y: Vec<f64> = y.row_iter().map(|r| r.norm_squared()).collect();
    let n = x.nrows();
    let mut out = x * y.transpose();
    out.as_mut_slice()
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(j, col)| {
            for (i, entry) in col.iter_mut().enumerate() {
                *entry = spec.from_stats(*entry, sq_x[i], sq_y[j]);
            }
        });
    if std::ptr::eq(x, y) {
        out.fill_lower_triangle_with_upper_triangle();
    }
    Ok(out)
}

/// Squared feature-space distance from kernel values, `kx + ky - 2 kxy`.
///
/// Cancellation can leave tiny negative values; anything below zero is
/// clamped to zero.
pub fn feature_distance_sq(kx: f64, ky: f64, kxy: f64) -> f64 {
    (kx + ky - 2.0 * kxy).max(0.0)
}

/// The composite class-specific multiple kernel
/// `h(x, y) = sum_c h_c(x, y)` with
/// `h_c(x, y) = (sum_i sqrt(nu_ci) U_ci^T phi_i(x)) . (sum_j sqrt(nu_cj) U_cj^T phi_j(y))`.
///
/// Evaluated as the double sum over kernel pairs of projection inner
/// products. Projections of different widths are compared over their common
/// prefix, which is the inner product of the zero-padded vectors.
pub fn clasmk_eval(
    x: &[f64],
    y: &[f64],
    kernels: &KernelSet,
    bank: &BasisBank,
    nu: &WeightMatrix,
) -> Result<f64> {
    let mut total = 0.0;
    for c in 0..nu.n_classes() {
        let mut px = Vec::new();
        let mut py = Vec::new();
        for k in 0..nu.n_kernels() {
            let w = nu.get(c, k);
            if w <= 0.0 {
                continue;
            }
            let basis = bank
                .get(c, k)
                .ok_or(Error::MissingBasis { class: c, kernel: k })?;
            let spec = kernels
                .get(k)
                .ok_or(Error::MissingBasis { class: c, kernel: k })?;
            px.push((w.sqrt(), basis.project(spec, x)?));
            py.push((w.sqrt(), basis.project(spec, y)?));
        }
        for (wi, pi) in &px {
            for (wj, pj) in &py {
                let dot: f64 = pi.iter().zip(pj).map(|(a, b)| a * b).sum();
                total += wi * wj * dot;
            }
        }
    }
    Ok(total)
}
