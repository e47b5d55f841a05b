//! Cross-validation and parameter sweeps.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::classifier::{error_rate, fit_lssvm, predict_many, tune_ridge, LinearModel, RIDGE_GRID};
use crate::data::{kfold, split_stratified_indices, Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::hierarchy::{hstack, train_hierarchy, HierarchicalModel, HierarchyHyper};
use crate::kernel::{KernelSet, KernelSpec};
use crate::metric::{train_clasmk, weighted_block, ClasmkModel, ProjectionCache, WeightMatrix};

/// Which weight matrix a single-layer classifier is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Learned multiple-kernel weights.
    Clasmk,
    /// One kernel per class, the one with the largest learned weight.
    Clask,
    /// The same kernel for every class.
    Single(usize),
}

impl Variant {
    pub fn label(&self, kernels: &KernelSet) -> String {
        match self {
            Variant::Clasmk => "clasmk".into(),
            Variant::Clask => "clask".into(),
            Variant::Single(k) => format!("single:{}", kernels.get(*k).map_or("?".into(), |s| s.to_string())),
        }
    }

    pub fn weights(&self, model: &ClasmkModel) -> Result<WeightMatrix> {
        let c = model.nu.n_classes();
        let k = model.nu.n_kernels();
        match self {
            Variant::Clasmk => Ok(model.nu.clone()),
            Variant::Clask => WeightMatrix::one_hot(&model.best_kernels(), k),
            Variant::Single(j) => WeightMatrix::one_hot(&vec![*j; c], k),
        }
    }
}

/// Every variant: learned weights, best kernel per class, then each kernel alone.
pub fn all_variants(n_kernels: usize) -> Vec<Variant> {
    let mut v = vec![Variant::Clasmk, Variant::Clask];
    v.extend((0..n_kernels).map(Variant::Single));
    v
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierOptions {
    pub ridge: f64,
    pub tune: bool,
}

impl Default for ClassifierOptions {
    fn default() -> Self {
        Self {
            ridge: crate::classifier::DEFAULT_RIDGE,
            tune: true,
        }
    }
}

fn fit_classifier(features: &DMatrix<f64>, ds: &Dataset, opts: &ClassifierOptions, seed: u64) -> Result<LinearModel> {
    if opts.tune {
        tune_ridge(features, &ds.y, ds.n_classes(), &RIDGE_GRID, 0.2, seed)
    } else {
        fit_lssvm(features, &ds.y, ds.n_classes(), opts.ridge)
    }
}

fn embed_cached(cache: &ProjectionCache, nu: &WeightMatrix, set: usize) -> Result<DMatrix<f64>> {
    let blocks = (0..nu.n_classes())
        .map(|c| weighted_block(cache, nu, c, set))
        .collect::<Result<Vec<_>>>()?;
    Ok(hstack(cache.set_size(set), &blocks))
}

/// Test error of one fold for each variant, plus the learned model.
#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub errors: Vec<f64>,
    pub optimize_seconds: f64,
    pub nu: WeightMatrix,
}

/// Learns one layer on `train` and scores every variant on `test`. Both sets
/// are standardized with statistics from `train` when `standardize` is set.
pub fn evaluate_variants(
    train: &Dataset,
    test: &Dataset,
    kernels: &KernelSet,
    hyper: &HierarchyHyper,
    variants: &[Variant],
    classifier: &ClassifierOptions,
    standardize: bool,
) -> Result<FoldOutcome> {
    let (train, test) = if standardize {
        let s = Standardizer::fit(&train.x)?;
        (s.transform_dataset(train)?, s.transform_dataset(test)?)
    } else {
        (train.clone(), test.clone())
    };
    let model = train_clasmk(&train, kernels, &hyper.clasmk)?;
    let used = vec![true; kernels.len()];
    let cache = ProjectionCache::compute(&model.bank, kernels, &[train.x.clone(), test.x.clone()], &used)?;
    let errors = variants
        .iter()
        .map(|v| {
            let nu = v.weights(&model)?;
            let f_train = embed_cached(&cache, &nu, 0)?;
            let f_test = embed_cached(&cache, &nu, 1)?;
            let clf = fit_classifier(&f_train, &train, classifier, hyper.clasmk.split_seed)?;
            Ok(error_rate(&predict_many(&clf, &f_test)?, &test.y))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FoldOutcome {
        errors,
        optimize_seconds: model.optimize_seconds,
        nu: model.nu,
    })
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

#[derive(Debug, Clone)]
pub struct CvReport {
    pub labels: Vec<String>,
    /// `fold_errors[fold][variant]`
    pub fold_errors: Vec<Vec<f64>>,
    pub optimize_seconds: Vec<f64>,
}

impl CvReport {
    pub fn errors_of(&self, variant: usize) -> Vec<f64> {
        self.fold_errors.iter().map(|f| f[variant]).collect()
    }

    pub fn summary(&self, variant: usize) -> (f64, f64) {
        mean_std(&self.errors_of(variant))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, name) in self.labels.iter().enumerate() {
            let (m, s) = self.summary(i);
            let _ = writeln!(out, "{name:<16} {:6.2} +- {:5.2} %", 100.0 * m, 100.0 * s);
        }
        out
    }
}

/// Stratified k-fold estimate of every variant's error. Folds run in parallel.
pub fn cross_validate_variants(
    ds: &Dataset,
    kernels: &KernelSet,
    hyper: &HierarchyHyper,
    variants: &[Variant],
    classifier: &ClassifierOptions,
    folds: usize,
    seed: u64,
    standardize: bool,
) -> Result<CvReport> {
    let splits = kfold(ds, folds, seed)?;
    let outcomes = splits
        .par_iter()
        .map(|(tr, te)| {
            evaluate_variants(&ds.subset(tr), &ds.subset(te), kernels, hyper, variants, classifier, standardize)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CvReport {
        labels: variants.iter().map(|v| v.label(kernels)).collect(),
        optimize_seconds: outcomes.iter().map(|o| o.optimize_seconds).collect(),
        fold_errors: outcomes.into_iter().map(|o| o.errors).collect(),
    })
}

/// Trains a full model, standardizing first when asked.
pub fn train_model(train: &Dataset, kernels: &KernelSet, hyper: &HierarchyHyper, standardize: bool) -> Result<HierarchicalModel> {
    if standardize {
        let s = Standardizer::fit(&train.x)?;
        let mut model = train_hierarchy(&s.transform_dataset(train)?, kernels, hyper)?;
        model.standardizer = Some(s);
        Ok(model)
    } else {
        train_hierarchy(train, kernels, hyper)
    }
}

/// Test errors of the layered model, one per fold. Each fold retrains.
pub fn cross_validate_hierarchy(
    ds: &Dataset,
    kernels: &KernelSet,
    hyper: &HierarchyHyper,
    folds: usize,
    seed: u64,
    standardize: bool,
) -> Result<Vec<f64>> {
    kfold(ds, folds, seed)?
        .par_iter()
        .map(|(tr, te)| {
            let model = train_model(&ds.subset(tr), kernels, hyper, standardize)?;
            let test = ds.subset(te);
            Ok(error_rate(&model.predict(&test.x)?, &test.y))
        })
        .collect()
}

/// `n` RBF widths spaced geometrically between 0.05 and 2.
pub fn spread_kernels(n: usize) -> Result<KernelSet> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one kernel".into()));
    }
    let (lo, hi) = (0.05f64.ln(), 2.0f64.ln());
    let specs = (0..n)
        .map(|i| {
            let f = if n == 1 { 0.5 } else { i as f64 / (n - 1) as f64 };
            KernelSpec::rbf((lo + f * (hi - lo)).exp())
        })
        .collect::<Result<Vec<_>>>()?;
    KernelSet::new(specs)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    /// Layer budgets.
    Layers(Vec<usize>),
    /// Kernel counts; each point uses [`spread_kernels`].
    Kernels(Vec<usize>),
    /// Fractions of the training part to keep.
    TrainSize(Vec<f64>),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Layers(_) => "layers",
            SweepAxis::Kernels(_) => "kernels",
            SweepAxis::TrainSize(_) => "train_size",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            SweepAxis::Layers(v) | SweepAxis::Kernels(v) => v.len(),
            SweepAxis::TrainSize(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn value(&self, i: usize) -> String {
        match self {
            SweepAxis::Layers(v) | SweepAxis::Kernels(v) => v[i].to_string(),
            SweepAxis::TrainSize(v) => v[i].to_string(),
        }
    }

    /// Parses `layers=1,2,3`, `kernels=4,8,16` or `train_size=0.25,0.5,1`.
    pub fn parse(spec: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("bad sweep spec `{spec}`"));
        let (axis, values) = spec.split_once('=').ok_or_else(bad)?;
        let items: Vec<&str> = values.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        if items.is_empty() {
            return Err(bad());
        }
        let ints = || -> Result<Vec<usize>> {
            items
                .iter()
                .map(|s| s.parse().ok().filter(|&n: &usize| n > 0).ok_or_else(bad))
                .collect()
        };
        match axis.trim() {
            "layers" => Ok(SweepAxis::Layers(ints()?)),
            "kernels" => Ok(SweepAxis::Kernels(ints()?)),
            "train_size" => Ok(SweepAxis::TrainSize(
                items
                    .iter()
                    .map(|s| s.parse().ok().filter(|&f: &f64| f > 0.0 && f <= 1.0).ok_or_else(bad))
                    .collect::<Result<_>>()?,
            )),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: String,
    pub seed: u64,
    pub outcome: std::result::Result<SweepPoint, String>,
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub accuracy: f64,
    pub n_layers: usize,
    /// Weight optimization time of each layer, not accumulated.
    pub optimize_seconds: Vec<f64>,
    /// Feature dimension through each layer.
    pub dims: Vec<usize>,
}

fn sweep_point(
    train: &Dataset,
    test: &Dataset,
    kernels: &KernelSet,
    hyper: &HierarchyHyper,
    standardize: bool,
) -> Result<SweepPoint> {
    let model = train_model(train, kernels, hyper, standardize)?;
    let err = error_rate(&model.predict(&test.x)?, &test.y);
    Ok(SweepPoint {
        accuracy: 1.0 - err,
        n_layers: model.n_layers(),
        optimize_seconds: model.layers.iter().map(|l| l.optimize_seconds).collect(),
        dims: (1..=model.n_layers()).map(|l| model.dim_through(l)).collect(),
    })
}

/// Runs one grid point per axis value on a fixed stratified train/test split.
/// A failing point is recorded in its row and the sweep continues.
#[allow(clippy::too_many_arguments)]
pub fn run_sweep(
    ds: &Dataset,
    kernels: &KernelSet,
    hyper: &HierarchyHyper,
    axis: &SweepAxis,
    test_fraction: f64,
    seed: u64,
    standardize: bool,
) -> Result<Vec<SweepRow>> {
    let (test_idx, train_idx) = split_stratified_indices(ds, test_fraction, seed)?;
    let (train, test) = (ds.subset(&train_idx), ds.subset(&test_idx));
    let rows = (0..axis.len())
        .into_par_iter()
        .map(|i| {
            let outcome = (|| -> Result<SweepPoint> {
                match axis {
                    SweepAxis::Layers(v) => {
                        let mut h = hyper.clone();
                        h.l_max = v[i];
                        // keep going until the budget so rows differ only in depth
                        h.epsilon = -1.0;
                        sweep_point(&train, &test, kernels, &h, standardize)
                    }
                    SweepAxis::Kernels(v) => sweep_point(&train, &test, &spread_kernels(v[i])?, hyper, standardize),
                    SweepAxis::TrainSize(v) => {
                        let part = if v[i] >= 1.0 {
                            train.clone()
                        } else {
                            let (keep, _) = split_stratified_indices(&train, v[i], seed)?;
                            train.subset(&keep)
                        };
                        sweep_point(&part, &test, kernels, hyper, standardize)
                    }
                }
            })();
            SweepRow {
                value: axis.value(i),
                seed,
                outcome: outcome.map_err(|e| e.to_string()),
            }
        })
        .collect();
    Ok(rows)
}

/// Header plus one line per row. Per-layer lists are `;`-separated.
pub fn sweep_csv(axis: &SweepAxis, rows: &[SweepRow]) -> String {
    let mut out = format!("# {},seed,accuracy,layers,optimize_seconds,dims,error\n", axis.name());
    for r in rows {
        match &r.outcome {
            Ok(p) => {
                let join = |v: Vec<String>| v.join(";");
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},",
                    r.value,
                    r.seed,
                    p.accuracy,
                    p.n_layers,
                    join(p.optimize_seconds.iter().map(|s| s.to_string()).collect()),
                    join(p.dims.iter().map(|d| d.to_string()).collect()),
                );
            }
            Err(e) => {
                let _ = writeln!(out, "{},{},,,,,{}", r.value, r.seed, e.replace([',', '\n'], " "));
            }
        }
    }
    out
}
