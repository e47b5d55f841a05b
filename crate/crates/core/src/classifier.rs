//! One-vs-rest least-squares classifier over explicit feature vectors, with
//! score margins used as a confidence measure.

use faer::prelude::*;
use faer::{MatRef, Side};
use nalgebra::{DMatrix, DVector};

use crate::data::{select_rows, split_stratified_indices, Dataset};
use crate::error::{Error, Result};

pub const DEFAULT_RIDGE: f64 = 1e-3;

/// Ridge values tried by [`tune_ridge`].
pub const RIDGE_GRID: [f64; 5] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0];

/// Relative residual the solver refines down to.
pub const SOLVE_TOL: f64 = 1e-8;

/// Scores are `W^T x + b`, one column of `W` per class.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
    pub ridge: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub scores: Vec<f64>,
    pub label: usize,
    /// Half the gap between the best and second-best score.
    pub confidence: f64,
}

impl Prediction {
    pub fn from_scores(scores: Vec<f64>) -> Self {
        let mut best = 0;
        for (c, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = c;
            }
        }
        let runner_up = scores
            .iter()
            .enumerate()
            .filter(|&(c, _)| c != best)
            .map(|(_, &s)| s)
            .fold(f64::NEG_INFINITY, f64::max);
        let confidence = if runner_up.is_finite() {
            (scores[best] - runner_up) / 2.0
        } else {
            0.0
        };
        Self {
            scores,
            label: best,
            confidence,
        }
    }
}

/// Normal equations `(Z^T Z + ridge D) x = Z^T T` for `Z = [features, 1]`,
/// where `D` is the identity except for a zero on the bias entry.
#[derive(Debug, Clone)]
pub struct NormalEquations {
    pub gram: DMatrix<f64>,
    pub rhs: DMatrix<f64>,
}

impl NormalEquations {
    pub fn build(features: &DMatrix<f64>, labels: &[usize], n_classes: usize) -> Self {
        let z = augment(features);
        let t = targets(labels, n_classes);
        Self {
            gram: gram_of(&z),
            rhs: z.transpose() * t,
        }
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows() - 1
    }

    fn regularized(&self, ridge: f64) -> DMatrix<f64> {
        let mut a = self.gram.clone();
        let q = self.dim();
        for i in 0..q {
            a[(i, i)] += ridge;
        }
        a
    }

    /// Solves with Cholesky plus iterative refinement.
    pub fn solve(&self, ridge: f64) -> Result<LinearModel> {
        if !(ridge > 0.0) {
            return Err(Error::InvalidParameter(format!("ridge must be positive, got {ridge}")));
        }
        let a = self.regularized(ridge);
        let chol = as_faer(&a).cholesky(Side::Lower).map_err(|_| Error::Singular)?;
        let solve = |b: &DMatrix<f64>| from_faer(chol.solve(as_faer(b)).as_ref());
        let mut x = solve(&self.rhs);
        let scale = self.rhs.norm().max(f64::MIN_POSITIVE);
        for _ in 0..5 {
            let r = &self.rhs - &a * &x;
            if r.norm() <= SOLVE_TOL * scale {
                break;
            }
            x += solve(&r);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular);
        }
        let q = self.dim();
        Ok(LinearModel {
            w: x.rows(0, q).into_owned(),
            b: x.row(q).transpose(),
            ridge,
        })
    }

    /// `||rhs - A x|| / ||rhs||` for a fitted model.
    pub fn relative_residual(&self, model: &LinearModel) -> f64 {
        let q = self.dim();
        let mut x = DMatrix::zeros(q + 1, model.w.ncols());
        x.rows_mut(0, q).copy_from(&model.w);
        x.row_mut(q).copy_from(&model.b.transpose());
        let r = &self.rhs - self.regularized(model.ridge) * x;
        r.norm() / self.rhs.norm().max(f64::MIN_POSITIVE)
    }
}

fn augment(features: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, q) = features.shape();
    let mut z = DMatrix::from_element(n, q + 1, 1.0);
    z.columns_mut(0, q).copy_from(features);
    z
}

fn as_faer(m: &DMatrix<f64>) -> MatRef<'_, f64> {
    faer::mat::from_column_major_slice(m.as_slice(), m.nrows(), m.ncols())
}

fn from_faer(m: MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m.read(i, j))
}

/// `Z^T Z` from the block products on and above the diagonal, mirrored.
fn gram_of(z: &DMatrix<f64>) -> DMatrix<f64> {
    const BLOCK: usize = 512;
    let q = z.ncols();
    let zt = z.transpose();
    let mut g = DMatrix::zeros(q, q);
    for i in (0..q).step_by(BLOCK) {
        let bi = BLOCK.min(q - i);
        for j in (i..q).step_by(BLOCK) {
            let bj = BLOCK.min(q - j);
            let block = zt.rows(i, bi) * z.columns(j, bj);
            g.view_mut((i, j), (bi, bj)).copy_from(&block);
        }
    }
    g.fill_lower_triangle_with_upper_triangle();
    g
}

fn targets(labels: &[usize], n_classes: usize) -> DMatrix<f64> {
    DMatrix::from_fn(labels.len(), n_classes, |i, c| if labels[i] == c { 1.0 } else { -1.0 })
}

fn check_inputs(features: &DMatrix<f64>, labels: &[usize], n_classes: usize) -> Result<()> {
    if features.nrows() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: features.nrows(),
            found: labels.len(),
        });
    }
    if labels.iter().any(|&l| l >= n_classes) {
        return Err(Error::InvalidParameter("label out of range".into()));
    }
    let first = labels.first().ok_or(Error::Empty("training features"))?;
    if labels.iter().all(|l| l == first) {
        return Err(Error::InvalidParameter("training labels contain a single class".into()));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training features"));
    }
    Ok(())
}

pub fn fit_lssvm(features: &DMatrix<f64>, labels: &[usize], n_classes: usize, ridge: f64) -> Result<LinearModel> {
    check_inputs(features, labels, n_classes)?;
    NormalEquations::build(features, labels, n_classes).solve(ridge)
}

/// Picks the ridge with the lowest error on a stratified validation split
/// (ties go to the larger ridge), then refits on all rows.
pub fn tune_ridge(
    features: &DMatrix<f64>,
    labels: &[usize],
    n_classes: usize,
    grid: &[f64],
    validation_fraction: f64,
    seed: u64,
) -> Result<LinearModel> {
    check_inputs(features, labels, n_classes)?;
    if grid.len() == 1 {
        return NormalEquations::build(features, labels, n_classes).solve(grid[0]);
    }
    let ds = Dataset::new(DMatrix::zeros(labels.len(), 0), labels.to_vec(), n_classes)?;
    let (val_idx, inner_idx) = split_stratified_indices(&ds, validation_fraction, seed)?;
    let val_x = select_rows(features, &val_idx);
    let val_y: Vec<usize> = val_idx.iter().map(|&i| labels[i]).collect();
    let inner_y: Vec<usize> = inner_idx.iter().map(|&i| labels[i]).collect();
    let val = NormalEquations::build(&val_x, &val_y, n_classes);
    let inner = NormalEquations::build(&select_rows(features, &inner_idx), &inner_y, n_classes);
    let full = NormalEquations {
        gram: &inner.gram + &val.gram,
        rhs: &inner.rhs + &val.rhs,
    };
    let mut best: Option<(f64, f64)> = None;
    for &ridge in grid {
        let Ok(model) = inner.solve(ridge) else { continue };
        let err = error_rate(&predict_many(&model, &val_x)?, &val_y);
        if best.is_none_or(|(e, _)| err <= e) {
            best = Some((err, ridge));
        }
    }
    let (_, ridge) = best.ok_or(Error::Singular)?;
    full.solve(ridge)
}

impl LinearModel {
    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.w.ncols()
    }
}

pub fn predict(model: &LinearModel, feature: &[f64]) -> Result<Prediction> {
    if feature.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: feature.len(),
        });
    }
    let scores = (0..model.n_classes())
        .map(|c| model.w.column(c).iter().zip(feature).map(|(a, b)| a * b).sum::<f64>() + model.b[c])
        .collect();
    Ok(Prediction::from_scores(scores))
}

/// Predictions for every row of `features`.
pub fn predict_many(model: &LinearModel, features: &DMatrix<f64>) -> Result<Vec<Prediction>> {
    if features.ncols() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: features.ncols(),
        });
    }
    let scores = features * &model.w;
    Ok(scores
        .row_iter()
        .map(|r| Prediction::from_scores(r.iter().zip(model.b.iter()).map(|(s, b)| s + b).collect()))
        .collect())
}

/// Indices whose confidence is at most `t_kappa`.
pub fn select_marginal(predictions: &[Prediction], t_kappa: f64) -> Vec<usize> {
    predictions
        .iter()
        .enumerate()
        .filter(|(_, p)| p.confidence <= t_kappa)
        .map(|(i, _)| i)
        .collect()
}

pub fn error_rate(predictions: &[Prediction], labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let wrong = predictions.iter().zip(labels).filter(|(p, &l)| p.label != l).count();
    wrong as f64 / labels.len() as f64
}

/// Counts indexed `[true][predicted]`.
pub fn confusion_matrix(predictions: &[Prediction], labels: &[usize], n_classes: usize) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0; n_classes]; n_classes];
    for (p, &l) in predictions.iter().zip(labels) {
        if l < n_classes && p.label < n_classes {
            m[l][p.label] += 1;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confidence_example() {
        let p = Prediction::from_scores(vec![2.0, -1.0, -3.0]);
        assert_eq!(p.label, 0);
        assert_eq!(p.confidence, 1.5);
        let tie = Prediction::from_scores(vec![0.7, 0.7]);
        assert_eq!((tie.label, tie.confidence), (0, 0.0));
    }

    #[test]
    fn constant_model() {
        let model = LinearModel {
            w: DMatrix::zeros(3, 2),
            b: DVector::from_vec(vec![1.0, 0.0]),
            ridge: 1.0,
        };
        for x in [[0.0, 0.0, 0.0], [5.0, -2.0, 1.0]] {
            assert_eq!(predict(&model, &x).unwrap().label, 0);
        }
        assert!(predict(&model, &[1.0]).is_err());
    }

    #[test]
    fn two_points_split_at_zero() {
        let x = DMatrix::from_column_slice(2, 1, &[-1.0, 1.0]);
        let m = fit_lssvm(&x, &[0, 1], 2, 1e-9).unwrap();
        assert_eq!(predict(&m, &[-1.0]).unwrap().label, 0);
        assert_eq!(predict(&m, &[1.0]).unwrap().label, 1);
        assert_eq!(predict(&m, &[-0.01]).unwrap().label, 0);
        assert_eq!(predict(&m, &[0.01]).unwrap().label, 1);
    }

    #[test]
    fn duplicate_columns_and_single_class() {
        let x = DMatrix::from_fn(6, 2, |r, _| r as f64);
        let y = [0, 0, 0, 1, 1, 1];
        let m = fit_lssvm(&x, &y, 2, 1e-3).unwrap();
        let eq = NormalEquations::build(&x, &y, 2);
        assert!(eq.relative_residual(&m) <= SOLVE_TOL);
        assert!(fit_lssvm(&x, &[1; 6], 2, 1e-3).is_err());
    }

    #[test]
    fn marginal_selection() {
        let preds: Vec<Prediction> = [0.5, 1.0, 1.5]
            .iter()
            .map(|&k| Prediction::from_scores(vec![2.0 * k, 0.0]))
            .collect();
        assert_eq!(select_marginal(&preds, 1.0), vec![0, 1]);
        let zeros: Vec<Prediction> = (0..3).map(|_| Prediction::from_scores(vec![0.0, 0.0])).collect();
        assert_eq!(select_marginal(&zeros, 1.0), vec![0, 1, 2]);
        let twos: Vec<Prediction> = (0..3).map(|_| Prediction::from_scores(vec![4.0, 0.0])).collect();
        assert!(select_marginal(&twos, 1.0).is_empty());
    }

    #[test]
    fn shift_invariance() {
        let a = Prediction::from_scores(vec![0.3, 1.2, -0.4]);
        let b = Prediction::from_scores(vec![10.3, 11.2, 9.6]);
        assert_eq!(a.label, b.label);
        assert!((a.confidence - b.confidence).abs() < 1e-12);
    }

    #[test]
    fn tuning_returns_a_grid_value() {
        let x = DMatrix::from_fn(40, 2, |r, c| ((r * 7 + c * 3) % 11) as f64 + if r < 20 { 0.0 } else { 6.0 });
        let y: Vec<usize> = (0..40).map(|r| usize::from(r >= 20)).collect();
        let m = tune_ridge(&x, &y, 2, &RIDGE_GRID, 0.2, 3).unwrap();
        assert!(RIDGE_GRID.contains(&m.ridge));
        let err = error_rate(&predict_many(&m, &x).unwrap(), &y);
        assert!(err < 0.2);
    }
}
