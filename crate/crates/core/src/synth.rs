//! Synthetic data: feature-space samples drawn from the subspace model with
//! a prescribed overlap, the block-structured class-specific variant, and
//! small input-space toy sets.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Feature-space samples with the orthonormal class bases that generated them.
#[derive(Debug, Clone)]
pub struct SubspaceSample {
    /// Unit-norm feature vectors as rows.
    pub data: Dataset,
    /// One `q x r` matrix with orthonormal columns per class.
    pub bases: Vec<DMatrix<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubspaceParams {
    pub n_classes: usize,
    pub rank: usize,
    pub ambient_dim: usize,
    pub sigma_e_sq: f64,
    pub overlap_lambda: f64,
    pub n_per_class: usize,
    pub seed: u64,
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

fn unit_vec(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    loop {
        let v = gaussian_vec(rng, n);
        let norm = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

/// Random orthonormal `n x n` matrix.
fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    g.qr().q()
}

/// Coefficients: a unit direction scattered around the class mean direction,
/// scaled to `radius`.
fn coefficients(rng: &mut ChaCha8Rng, mean: &DVector<f64>, radius: f64) -> DVector<f64> {
    let r = mean.len();
    loop {
        let v = mean + gaussian_vec(rng, r) * (0.5 / (r as f64).sqrt());
        let norm = v.norm();
        if norm > 1e-12 {
            return v * (radius / norm);
        }
    }
}

/// Draws unit-norm vectors `U_c beta + e`. Every pair of class bases has
/// `U_c^T U_o = sqrt(lambda) I`, so the population overlap ratio is exactly
/// `lambda`; `||beta||^2 = 1 - sigma_e_sq` and `e` is a random direction of
/// norm `sigma_e` orthogonal to all class subspaces.
pub fn synth_subspace(p: &SubspaceParams) -> Result<SubspaceSample> {
    let SubspaceParams {
        n_classes: c,
        rank: r,
        ambient_dim: q,
        sigma_e_sq,
        overlap_lambda: lambda,
        n_per_class: n,
        seed,
    } = *p;
    if c == 0 || r == 0 || n == 0 {
        return Err(Error::InvalidParameter("classes, rank and sample count must be positive".into()));
    }
    if !(0.0..1.0).contains(&sigma_e_sq) || !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidParameter("need sigma_e_sq in [0, 1) and lambda in [0, 1]".into()));
    }
    if r * c > q {
        return Err(Error::Infeasible(format!(
            "{c} classes of rank {r} need at least {} dimensions, got {q}",
            r * c
        )));
    }
    if sigma_e_sq > 0.0 && r * c == q {
        return Err(Error::Infeasible("noise needs a dimension outside every class subspace".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frame = random_orthogonal(&mut rng, q);
    // mixing matrix: symmetric square root of (1 - s) I + s 11^T, s = sqrt(lambda)
    let s = lambda.sqrt();
    let g = DMatrix::from_fn(c, c, |i, j| if i == j { 1.0 } else { s });
    let eig = SymmetricEigen::new(g);
    let root = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()))
        * eig.eigenvectors.transpose();
    let bases: Vec<DMatrix<f64>> = (0..c)
        .map(|class| {
            let mut u = DMatrix::zeros(q, r);
            for j in 0..c {
                u += frame.columns(j * r, r) * root[(j, class)];
            }
            u
        })
        .collect();
    let complement = frame.columns(r * c, q - r * c).into_owned();

    let radius = (1.0 - sigma_e_sq).sqrt();
    let noise = sigma_e_sq.sqrt();
    let mut x = DMatrix::zeros(c * n, q);
    let mut y = Vec::with_capacity(c * n);
    for (class, u) in bases.iter().enumerate() {
        let mean = unit_vec(&mut rng, r);
        for i in 0..n {
            let beta = coefficients(&mut rng, &mean, radius);
            let mut phi = u * beta;
            if noise > 0.0 {
                phi += &complement * unit_vec(&mut rng, complement.ncols()) * noise;
            }
            x.row_mut(class * n + i).copy_from(&phi.transpose());
            y.push(class);
        }
    }
    Ok(SubspaceSample {
        data: Dataset::new(x, y, c)?,
        bases,
    })
}

/// Class-specific model: every sample is `C` unit-norm blocks of size
/// `block_dim`, block `i` living in the `i`-th class feature space with basis
/// `U_i` (its first `rank` coordinates). A class-`c` sample has coefficient
/// energy `1 - sigma_e_sq` in its own block and `lambda (1 - sigma_e_sq)` in
/// every other block; the rest of each block is a random direction outside
/// `U_i`.
///
/// The returned bases are `(C block_dim) x rank` and select one block each.
pub fn synth_class_specific(p: &SubspaceParams) -> Result<SubspaceSample> {
    let SubspaceParams {
        n_classes: c,
        rank: r,
        ambient_dim: d,
        sigma_e_sq,
        overlap_lambda: lambda,
        n_per_class: n,
        seed,
    } = *p;
    if c == 0 || r == 0 || n == 0 {
        return Err(Error::InvalidParameter("classes, rank and sample count must be positive".into()));
    }
    if !(0.0..1.0).contains(&sigma_e_sq) || !(0.0..1.0).contains(&lambda) {
        return Err(Error::InvalidParameter("need sigma_e_sq in [0, 1) and lambda in [0, 1)".into()));
    }
    if d <= r {
        return Err(Error::Infeasible(format!("block dimension {d} must exceed the rank {r}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bases: Vec<DMatrix<f64>> = (0..c)
        .map(|i| DMatrix::from_fn(c * d, r, |row, col| if row == i * d + col { 1.0 } else { 0.0 }))
        .collect();
    let mut x = DMatrix::zeros(c * n, c * d);
    let mut y = Vec::with_capacity(c * n);
    for class in 0..c {
        let means: Vec<DVector<f64>> = (0..c).map(|_| unit_vec(&mut rng, r)).collect();
        for i in 0..n {
            let row = class * n + i;
            for block in 0..c {
                let energy = (1.0 - sigma_e_sq) * if block == class { 1.0 } else { lambda };
                let beta = coefficients(&mut rng, &means[block], energy.sqrt());
                let rest = unit_vec(&mut rng, d - r) * (1.0 - energy).max(0.0).sqrt();
                for j in 0..r {
                    x[(row, block * d + j)] = beta[j];
                }
                for j in 0..d - r {
                    x[(row, block * d + r + j)] = rest[j];
                }
            }
            y.push(class);
        }
    }
    Ok(SubspaceSample {
        data: Dataset::new(x, y, c)?,
        bases,
    })
}

/// Two interleaved half circles with Gaussian noise of standard deviation `noise`.
pub fn moons(n_per_class: usize, noise: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 2 * n_per_class;
    let mut x = DMatrix::zeros(n, 2);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % 2;
        let t = rng.gen_range(0.0..std::f64::consts::PI);
        let (a, b) = if class == 0 {
            (t.cos(), t.sin())
        } else {
            (1.0 - t.cos(), 0.5 - t.sin())
        };
        let ex: f64 = StandardNormal.sample(&mut rng);
        let ey: f64 = StandardNormal.sample(&mut rng);
        x[(i, 0)] = a + noise * ex;
        x[(i, 1)] = b + noise * ey;
        y.push(class);
    }
    Dataset::new(x, y, 2).expect("generated data is valid")
}

/// Isotropic Gaussian clusters, one per center.
pub fn gaussian_blobs(centers: &[Vec<f64>], std_dev: f64, n_per_class: usize, seed: u64) -> Result<Dataset> {
    let dim = centers.first().map(Vec::len).ok_or(Error::Empty("blob centers"))?;
    if centers.iter().any(|c| c.len() != dim) {
        return Err(Error::InvalidParameter("blob centers differ in dimension".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = centers.len() * n_per_class;
    let mut x = DMatrix::zeros(n, dim);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % centers.len();
        for j in 0..dim {
            let e: f64 = StandardNormal.sample(&mut rng);
            x[(i, j)] = centers[class][j] + std_dev * e;
        }
        y.push(class);
    }
    Dataset::new(x, y, centers.len())
}
