//! Plug-in estimates of the subspace model quantities and the separability
//! bounds built from them.
//!
//! Notation: `lambda` is the cross-class overlap ratio, `sigma_e_sq` the
//! off-subspace noise energy and `mean_norm` the squared norm of a class's
//! mean subspace coordinates. Feature vectors are assumed unit norm.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metric::{weighted_block, ProjectionCache, WeightMatrix};

/// Tolerance of the `mean_norm <= 1 - sigma_e_sq` consistency check.
pub const MEAN_NORM_SLACK: f64 = 1e-6;

/// Projections of per-class samples onto per-class subspaces:
/// `blocks[owner][set]` has one row per point of class `set`, expressed in
/// the orthonormal coordinates of class `owner`'s subspace.
#[derive(Debug, Clone)]
pub struct SubspaceProjections {
    pub blocks: Vec<Vec<DMatrix<f64>>>,
}

impl SubspaceProjections {
    /// Explicit feature vectors (rows) and orthonormal bases (columns).
    pub fn from_features(per_class: &[DMatrix<f64>], bases: &[DMatrix<f64>]) -> Result<Self> {
        if per_class.len() != bases.len() {
            return Err(Error::DimensionMismatch {
                expected: bases.len(),
                found: per_class.len(),
            });
        }
        let blocks = bases
            .iter()
            .map(|u| {
                per_class
                    .iter()
                    .map(|x| {
                        if x.ncols() != u.nrows() {
                            return Err(Error::DimensionMismatch {
                                expected: u.nrows(),
                                found: x.ncols(),
                            });
                        }
                        Ok(x * u)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { blocks })
    }

    /// Single-kernel view of a cache built over one set per class.
    pub fn from_cache_kernel(cache: &ProjectionCache, kernel: usize) -> Result<Self> {
        let n = cache.n_classes();
        let blocks = (0..n)
            .map(|owner| {
                (0..cache.n_sets())
                    .map(|set| {
                        cache
                            .block(owner, kernel, set)
                            .cloned()
                            .ok_or(Error::MissingBasis { class: owner, kernel })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { blocks })
    }

    /// Weighted multiple-kernel view: each class subspace is the combined
    /// block of that class under `nu`.
    pub fn from_cache_weighted(cache: &ProjectionCache, nu: &WeightMatrix) -> Result<Self> {
        let blocks = (0..cache.n_classes())
            .map(|owner| {
                (0..cache.n_sets())
                    .map(|set| weighted_block(cache, nu, owner, set))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { blocks })
    }

    pub fn n_classes(&self) -> usize {
        self.blocks.len()
    }
}

/// Plug-in estimates of the model quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelStats {
    pub priors: Vec<f64>,
    /// `energy[(c, o)]`: mean squared projection of class-`c` points onto class `o`'s subspace.
    pub energy: DMatrix<f64>,
    pub sigma_e_sq: f64,
    pub sigma_e_sq_per_class: Vec<f64>,
    /// Squared norm of each class's mean own-subspace coordinates.
    pub mean_norms: Vec<f64>,
    /// `mean_norm_matrix[(c, o)]`: squared norm of the mean coordinates of
    /// class-`c` points in class `o`'s subspace.
    pub mean_norm_matrix: DMatrix<f64>,
    /// Overlap ratio with the prior-weighted own-class energy in the denominator.
    pub lambda_hat: f64,
    /// Same numerator over the prior-weighted squared mean norms.
    pub lambda_hat_mean_norm: f64,
}

impl ModelStats {
    pub fn n_classes(&self) -> usize {
        self.priors.len()
    }

    /// Prior-weighted squared mean norm.
    pub fn weighted_mean_norm(&self) -> f64 {
        self.priors.iter().zip(&self.mean_norms).map(|(p, m)| p * m).sum()
    }

    /// Whether every class satisfies `mean_norm <= 1 - sigma_e_sq` within slack.
    pub fn mean_norms_consistent(&self) -> bool {
        self.mean_norms
            .iter()
            .zip(&self.sigma_e_sq_per_class)
            .all(|(m, s)| *m <= 1.0 - s + MEAN_NORM_SLACK)
    }
}

pub fn estimate_model_stats(proj: &SubspaceProjections) -> Result<ModelStats> {
    let n_classes = proj.n_classes();
    if n_classes == 0 {
        return Err(Error::Empty("class list"));
    }
    for (owner, row) in proj.blocks.iter().enumerate() {
        if row.len() != n_classes {
            return Err(Error::DimensionMismatch {
                expected: n_classes,
                found: row.len(),
            });
        }
        if let Some(c) = row.iter().position(|b| b.nrows() == 0) {
            return Err(Error::InvalidParameter(format!("class {c} is empty (subspace {owner})")));
        }
    }
    let sizes: Vec<usize> = proj.blocks[0].iter().map(|b| b.nrows()).collect();
    let total: usize = sizes.iter().sum();
    let priors: Vec<f64> = sizes.iter().map(|&n| n as f64 / total as f64).collect();

    let mut energy = DMatrix::zeros(n_classes, n_classes);
    let mut mean_norm_matrix = DMatrix::zeros(n_classes, n_classes);
    for owner in 0..n_classes {
        for c in 0..n_classes {
            let b = &proj.blocks[owner][c];
            energy[(c, owner)] = b.norm_squared() / b.nrows() as f64;
            mean_norm_matrix[(c, owner)] = if b.ncols() == 0 { 0.0 } else { b.row_mean().norm_squared() };
        }
    }
    let sigma_e_sq_per_class: Vec<f64> = (0..n_classes).map(|c| (1.0 - energy[(c, c)]).clamp(0.0, 1.0)).collect();
    let own_mean = (0..n_classes).map(|c| energy[(c, c)]).sum::<f64>() / n_classes as f64;
    let sigma_e_sq = (1.0 - own_mean).clamp(0.0, 1.0);
    let mean_norms: Vec<f64> = (0..n_classes).map(|c| mean_norm_matrix[(c, c)]).collect();

    let mut cross = 0.0;
    for c in 0..n_classes {
        if priors[c] >= 1.0 {
            continue;
        }
        let inner: f64 = (0..n_classes)
            .filter(|&o| o != c)
            .map(|o| priors[o] * energy[(c, o)])
            .sum();
        cross += priors[c] / (1.0 - priors[c]) * inner;
    }
    let own: f64 = (0..n_classes).map(|c| priors[c] * energy[(c, c)]).sum();
    let mean_own: f64 = (0..n_classes).map(|c| priors[c] * mean_norms[c]).sum();
    let ratio = |num: f64, den: f64| if num == 0.0 { 0.0 } else { num / den };
    Ok(ModelStats {
        priors,
        energy,
        sigma_e_sq,
        sigma_e_sq_per_class,
        mean_norms,
        mean_norm_matrix,
        lambda_hat: ratio(cross, own),
        lambda_hat_mean_norm: ratio(cross, mean_own),
    })
}

/// A bound value; `vacuous` when it is at least 1 and so says nothing about
/// a probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound {
    pub value: f64,
    pub vacuous: bool,
}

impl Bound {
    fn new(value: f64) -> Self {
        Self {
            value,
            vacuous: value >= 1.0,
        }
    }
}

fn overlap_denominator(lambda: f64, sigma_e_sq: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::HypothesisViolated(format!("lambda = {lambda} is not in [0, 1)")));
    }
    if !(0.0..=1.0).contains(&sigma_e_sq) {
        return Err(Error::HypothesisViolated(format!("sigma_e^2 = {sigma_e_sq} is not in [0, 1]")));
    }
    let den = 1.0 - lambda.sqrt() * (1.0 - sigma_e_sq);
    if den <= 0.0 {
        return Err(Error::HypothesisViolated("bound denominator is not positive".into()));
    }
    Ok(den)
}

/// Two-class bound on the probability that a within-class distance exceeds
/// the expected between-class distance.
pub fn bound_lemma1(lambda: f64, sigma_e_sq: f64, mean_norm: f64) -> Result<Bound> {
    let den = overlap_denominator(lambda, sigma_e_sq)?;
    Ok(Bound::new((1.0 - mean_norm) / den))
}

/// Multiclass version with a prior-weighted mean norm.
pub fn bound_theorem1(lambda: f64, sigma_e_sq: f64, priors: &[f64], mean_norms: &[f64]) -> Result<Bound> {
    if priors.len() != mean_norms.len() {
        return Err(Error::DimensionMismatch {
            expected: priors.len(),
            found: mean_norms.len(),
        });
    }
    let den = overlap_denominator(lambda, sigma_e_sq)?;
    let weighted: f64 = priors.iter().zip(mean_norms).map(|(p, m)| p * m).sum();
    Ok(Bound::new((1.0 - weighted) / den))
}

/// Class-specific model bound with equal priors, and the matching lower bound
/// on the expected between-class distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassSpecificBound {
    pub bound: Bound,
    pub between_lower: f64,
}

/// The lower bound `2C (1 - (C lambda - lambda + 1)(1 - sigma_e_sq) / C)` on the
/// expected between-class distance.
pub fn between_distance_lower_bound(lambda: f64, sigma_e_sq: f64, n_classes: usize) -> f64 {
    let c = n_classes as f64;
    2.0 * c * (1.0 - (c * lambda - lambda + 1.0) * (1.0 - sigma_e_sq) / c)
}

/// `mean_norm_matrix[(c, o)]` is the squared mean coordinate norm of class
/// `c` in subspace `o`; its size fixes the class count.
pub fn bound_theorem2(lambda: f64, sigma_e_sq: f64, mean_norm_matrix: &DMatrix<f64>) -> Result<ClassSpecificBound> {
    let n = mean_norm_matrix.nrows();
    if n == 0 || mean_norm_matrix.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: mean_norm_matrix.ncols(),
        });
    }
    let c = n as f64;
    let den = 1.0 - (c * lambda - lambda + 1.0) * (1.0 - sigma_e_sq) / c;
    if !(den > 0.0) {
        return Err(Error::HypothesisViolated("bound denominator is not positive".into()));
    }
    // Each sample has C unit-norm blocks, so the mean-norm total is scaled by C^2.
    let num = 1.0 - mean_norm_matrix.sum() / (c * c);
    Ok(ClassSpecificBound {
        bound: Bound::new(num / den),
        between_lower: 2.0 * c * den,
    })
}

/// Brute-force distance statistics of labeled embeddings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Separation {
    pub expected_within: f64,
    pub expected_between: f64,
    /// `expected_within / expected_between`.
    pub ratio: f64,
    /// Probability, under the prior-weighted pair measure, that a
    /// within-class distance exceeds `expected_between`.
    pub prob: f64,
}

/// Squared distances between rows of `a` and rows of `b`.
fn pair_distances(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let na: Vec<f64> = a.row_iter().map(|r| r.norm_squared()).collect();
    let nb: Vec<f64> = b.row_iter().map(|r| r.norm_squared()).collect();
    let bt = b.transpose();
    let mut g = a * bt;
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            g[(i, j)] = (na[i] + nb[j] - 2.0 * g[(i, j)]).max(0.0);
        }
    }
    g
}

/// Within-class pairs are unordered and distinct; class `c`'s pairs get weight
/// `p_c` (renormalized over classes with at least two points). Between-class
/// pairs of classes `(c, o)` get weight `p_c p_o / (1 - p_c)`.
pub fn empirical_separation(embeddings: &DMatrix<f64>, labels: &[usize], n_classes: usize) -> Result<Separation> {
    if embeddings.nrows() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: embeddings.nrows(),
            found: labels.len(),
        });
    }
    let mut rows = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        if l >= n_classes {
            return Err(Error::InvalidParameter(format!("label {l} out of range")));
        }
        rows[l].push(i);
    }
    let present: Vec<usize> = (0..n_classes).filter(|&c| !rows[c].is_empty()).collect();
    if present.len() < 2 {
        return Err(Error::InvalidParameter("no between-class pairs".into()));
    }
    let total = labels.len() as f64;
    let p: Vec<f64> = rows.iter().map(|r| r.len() as f64 / total).collect();
    let sets: Vec<DMatrix<f64>> = rows.iter().map(|r| crate::data::select_rows(embeddings, r)).collect();

    let mut between = 0.0;
    for &c in &present {
        for &o in &present {
            if o == c {
                continue;
            }
            let d = pair_distances(&sets[c], &sets[o]);
            between += p[c] * p[o] / (1.0 - p[c]) * d.mean();
        }
    }
    if !(between > 0.0) {
        return Err(Error::InvalidParameter("expected between-class distance is zero".into()));
    }

    let paired: Vec<usize> = present.iter().copied().filter(|&c| rows[c].len() >= 2).collect();
    if paired.is_empty() {
        return Err(Error::InvalidParameter("no class has two points".into()));
    }
    let p_paired: f64 = paired.iter().map(|&c| p[c]).sum();
    // (mean distance, fraction above `between`) per class
    let within: Vec<(f64, f64)> = paired
        .par_iter()
        .map(|&c| {
            let d = pair_distances(&sets[c], &sets[c]);
            let n = d.nrows();
            let (mut sum, mut above) = (0.0, 0usize);
            for j in 0..n {
                for i in 0..j {
                    let v = d[(i, j)];
                    sum += v;
                    if v > between {
                        above += 1;
                    }
                }
            }
            let pairs = (n * (n - 1) / 2) as f64;
            (sum / pairs, above as f64 / pairs)
        })
        .collect();
    let mut expected_within = 0.0;
    let mut prob = 0.0;
    for (&c, (mean, frac)) in paired.iter().zip(&within) {
        let w = p[c] / p_paired;
        expected_within += w * mean;
        prob += w * frac;
    }
    Ok(Separation {
        expected_within,
        expected_between: between,
        ratio: expected_within / between,
        prob,
    })
}

/// Everything the `bounds` report prints.
#[derive(Debug, Clone)]
pub struct SeparabilityReport {
    pub stats: ModelStats,
    /// Multiclass bound with the prior-weighted mean norm, from `lambda_hat`.
    pub bound: Result<Bound, String>,
    /// Same bound using `lambda_hat_mean_norm`.
    pub bound_mean_norm: Result<Bound, String>,
    pub class_specific: Result<ClassSpecificBound, String>,
    pub separation: Separation,
}

pub fn separability_report(
    proj: &SubspaceProjections,
    embeddings: &DMatrix<f64>,
    labels: &[usize],
) -> Result<SeparabilityReport> {
    let stats = estimate_model_stats(proj)?;
    let separation = empirical_separation(embeddings, labels, stats.n_classes())?;
    let bound = bound_theorem1(stats.lambda_hat, stats.sigma_e_sq, &stats.priors, &stats.mean_norms)
        .map_err(|e| e.to_string());
    let bound_mean_norm = bound_theorem1(
        stats.lambda_hat_mean_norm,
        stats.sigma_e_sq,
        &stats.priors,
        &stats.mean_norms,
    )
    .map_err(|e| e.to_string());
    let class_specific =
        bound_theorem2(stats.lambda_hat, stats.sigma_e_sq, &stats.mean_norm_matrix).map_err(|e| e.to_string());
    Ok(SeparabilityReport {
        stats,
        bound,
        bound_mean_norm,
        class_specific,
        separation,
    })
}

fn fmt_bound(b: &Result<Bound, String>) -> String {
    match b {
        Ok(b) if b.vacuous => format!("{:.6} (vacuous)", b.value),
        Ok(b) => format!("{:.6}", b.value),
        Err(e) => format!("n/a ({e})"),
    }
}

impl SeparabilityReport {
    pub fn to_text(&self) -> String {
        let s = &self.stats;
        let mut out = String::new();
        let _ = writeln!(out, "classes               {}", s.n_classes());
        let _ = writeln!(out, "priors                {}", join(&s.priors));
        let _ = writeln!(out, "lambda_hat            {:.6}", s.lambda_hat);
        let _ = writeln!(out, "lambda_hat_mean_norm  {:.6}", s.lambda_hat_mean_norm);
        let _ = writeln!(out, "sigma_e_sq_hat        {:.6}", s.sigma_e_sq);
        let _ = writeln!(out, "sigma_e_sq_per_class  {}", join(&s.sigma_e_sq_per_class));
        let _ = writeln!(out, "mean_norms            {}", join(&s.mean_norms));
        let _ = writeln!(out, "bound                 {}", fmt_bound(&self.bound));
        let _ = writeln!(out, "bound_mean_norm       {}", fmt_bound(&self.bound_mean_norm));
        match &self.class_specific {
            Ok(cs) => {
                let _ = writeln!(out, "bound_class_specific  {}", fmt_bound(&Ok(cs.bound)));
                let _ = writeln!(out, "between_lower_bound   {:.6}", cs.between_lower);
            }
            Err(e) => {
                let _ = writeln!(out, "bound_class_specific  n/a ({e})");
            }
        }
        let sep = &self.separation;
        let _ = writeln!(out, "E_within              {:.6}", sep.expected_within);
        let _ = writeln!(out, "E_between             {:.6}", sep.expected_between);
        let _ = writeln!(out, "empirical_ratio       {:.6}", sep.ratio);
        let _ = writeln!(out, "empirical_prob        {:.6}", sep.prob);
        out
    }

    /// `# quantity,value` comment header, then one `name,value` line per
    /// scalar. Non-applicable bounds are written as `nan`.
    pub fn to_csv(&self) -> String {
        let s = &self.stats;
        let val = |b: &Result<Bound, String>| b.as_ref().map(|b| b.value).unwrap_or(f64::NAN);
        let flag = |b: &Result<Bound, String>| b.as_ref().map(|b| b.vacuous as u8 as f64).unwrap_or(f64::NAN);
        let mut rows: Vec<(String, f64)> = vec![
            ("lambda_hat".into(), s.lambda_hat),
            ("lambda_hat_mean_norm".into(), s.lambda_hat_mean_norm),
            ("sigma_e_sq_hat".into(), s.sigma_e_sq),
            ("bound".into(), val(&self.bound)),
            ("bound_vacuous".into(), flag(&self.bound)),
            ("bound_mean_norm".into(), val(&self.bound_mean_norm)),
            ("bound_mean_norm_vacuous".into(), flag(&self.bound_mean_norm)),
            (
                "bound_class_specific".into(),
                self.class_specific.as_ref().map(|c| c.bound.value).unwrap_or(f64::NAN),
            ),
            (
                "between_lower_bound".into(),
                self.class_specific.as_ref().map(|c| c.between_lower).unwrap_or(f64::NAN),
            ),
            ("expected_within".into(), self.separation.expected_within),
            ("expected_between".into(), self.separation.expected_between),
            ("empirical_ratio".into(), self.separation.ratio),
            ("empirical_prob".into(), self.separation.prob),
        ];
        for c in 0..s.n_classes() {
            rows.push((format!("prior_{c}"), s.priors[c]));
            rows.push((format!("mean_norm_{c}"), s.mean_norms[c]));
            rows.push((format!("sigma_e_sq_{c}"), s.sigma_e_sq_per_class[c]));
        }
        let mut out = String::from("# quantity,value\n");
        for (k, v) in rows {
            let _ = writeln!(out, "{k},{v}");
        }
        out
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_class_bound_examples() {
        assert_eq!(bound_lemma1(0.0, 0.0, 1.0).unwrap().value, 0.0);
        let b = bound_lemma1(0.25, 0.1, 0.8).unwrap();
        assert!((b.value - 0.2 / 0.55).abs() < 1e-12);
        assert!(!b.vacuous);
        for s in [0.0, 0.3, 0.9] {
            assert!((bound_lemma1(0.0, s, 0.4).unwrap().value - 0.6).abs() < 1e-15);
        }
        assert!(matches!(bound_lemma1(1.0, 0.0, 0.5), Err(Error::HypothesisViolated(_))));
        assert!(bound_lemma1(0.9, 0.0, 0.0).unwrap().vacuous);
    }

    #[test]
    fn multiclass_bound_examples() {
        let b = bound_theorem1(0.04, 0.0, &[0.3, 0.7], &[0.9, 0.6]).unwrap();
        assert!((b.value - 0.3875).abs() < 1e-12);
        let lemma = bound_lemma1(0.2, 0.1, 0.5).unwrap();
        let thm = bound_theorem1(0.2, 0.1, &[0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert_eq!(lemma, thm);
        let one = bound_theorem1(0.2, 0.1, &[1.0, 0.0, 0.0], &[0.7, 0.1, 0.2]).unwrap();
        assert!((one.value - bound_lemma1(0.2, 0.1, 0.7).unwrap().value).abs() < 1e-15);
    }

    #[test]
    fn class_specific_bound_examples() {
        assert!(bound_theorem2(0.3, 0.0, &DMatrix::from_element(1, 1, 0.5)).is_err());
        let zero = bound_theorem2(0.0, 0.0, &DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0])).unwrap();
        assert_eq!(zero.bound.value, 0.0);
        let cs = bound_theorem2(0.1, 0.2, &DMatrix::zeros(2, 2)).unwrap();
        assert!((cs.between_lower - 2.24).abs() < 1e-12);
        assert!((between_distance_lower_bound(0.1, 0.2, 2) - 2.24).abs() < 1e-12);
    }

    #[test]
    fn two_class_bound_monotone_on_grid() {
        let grid: Vec<f64> = (0..20).map(|i| i as f64 / 20.0).collect();
        for &s in &grid {
            for &m in &grid {
                let mut last = f64::NEG_INFINITY;
                for &l in &grid {
                    let v = bound_lemma1(l, s, m).unwrap().value;
                    assert!(v >= last - 1e-15);
                    last = v;
                }
            }
            for &l in &grid {
                let mut last = f64::INFINITY;
                for &m in &grid {
                    let v = bound_lemma1(l, s, m).unwrap().value;
                    assert!(v <= last + 1e-15);
                    last = v;
                }
            }
        }
    }

    #[test]
    fn separation_of_repeated_points() {
        let x = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
        let sep = empirical_separation(&x, &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(sep.expected_within, 0.0);
        assert_eq!(sep.prob, 0.0);
        assert!((sep.expected_between - 2.0).abs() < 1e-12);
        let same = DMatrix::from_element(4, 2, 0.3);
        assert!(empirical_separation(&same, &[0, 0, 1, 1], 2).is_err());
    }

    #[test]
    fn between_weights_sum_to_one() {
        let p = [0.2, 0.3, 0.5];
        let mut total = 0.0f64;
        for c in 0..3 {
            for o in 0..3 {
                if o != c {
                    total += p[c] * p[o] / (1.0 - p[c]);
                }
            }
        }
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_subspaces_have_zero_overlap() {
        // class 0 lives on e0, class 1 on e1
        let x0 = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let x1 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 1.0]);
        let u0 = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let u1 = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let proj = SubspaceProjections::from_features(&[x0, x1], &[u0, u1]).unwrap();
        let s = estimate_model_stats(&proj).unwrap();
        assert_eq!(s.lambda_hat, 0.0);
        assert_eq!(s.sigma_e_sq, 0.0);
        assert_eq!(s.mean_norms, vec![1.0, 1.0]);
        assert!((s.priors[0] - 0.6).abs() < 1e-15);
        assert!(s.mean_norms_consistent());
    }
}
