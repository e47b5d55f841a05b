//! Layered feature network. Each layer learns bases and kernel weights on
//! the points the previous classifier was least sure about, and appends its
//! embedding to the features of every training point.

use nalgebra::DMatrix;

use crate::classifier::{fit_lssvm, predict_many, select_marginal, tune_ridge, LinearModel, Prediction, RIDGE_GRID};
use crate::data::{Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::kernel::KernelSet;
use crate::metric::{train_clasmk, weighted_block, ClasmkHyper, ObjectiveParts, ProjectionCache, WeightMatrix};
use crate::subspace::BasisBank;

#[derive(Debug, Clone)]
pub struct LayerModel {
    pub index: usize,
    pub nu: WeightMatrix,
    pub bank: BasisBank,
    /// Trained on the features of all layers up to and including this one.
    pub classifier: LinearModel,
    /// Objective of the final weights on the weight-fitting subset.
    pub objective: Option<ObjectiveParts>,
    /// Number of training points this layer's bases and weights were fitted on.
    pub subset_size: usize,
    /// Wall time of the weight optimization step.
    pub optimize_seconds: f64,
}

impl LayerModel {
    /// Width of class `c`'s block: the widest kernel carrying weight in row `c`.
    pub fn block_width(&self, class: usize) -> usize {
        (0..self.nu.n_kernels())
            .filter(|&k| self.nu.get(class, k) > 0.0)
            .filter_map(|k| self.bank.get(class, k).map(|b| b.rank()))
            .max()
            .unwrap_or(0)
    }

    pub fn dim(&self) -> usize {
        (0..self.nu.n_classes()).map(|c| self.block_width(c)).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StopReason {
    MaxLayers,
    Converged,
    /// Some class had fewer than two marginal points left.
    MarginalTooSmall,
    /// A layer after the first failed; the model keeps the earlier layers.
    LayerFailed(String),
}

#[derive(Debug, Clone)]
pub struct HierarchicalModel {
    pub kernels: KernelSet,
    pub standardizer: Option<Standardizer>,
    pub n_classes: usize,
    pub layers: Vec<LayerModel>,
    /// Frobenius distance between consecutive weight matrices, one per layer
    /// (the first against uniform weights).
    pub delta: Vec<f64>,
    /// Change of `delta` between consecutive layers; one entry per layer after the first.
    pub d_nu: Vec<f64>,
    pub stop: StopReason,
}

impl HierarchicalModel {
    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn warning(&self) -> Option<&str> {
        match &self.stop {
            StopReason::LayerFailed(msg) => Some(msg),
            _ => None,
        }
    }

    /// Feature dimension through layer `through` (1-based).
    pub fn dim_through(&self, through: usize) -> usize {
        self.layers[..through].iter().map(LayerModel::dim).sum()
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.layers
            .first()
            .and_then(|l| l.bank.iter().next())
            .map(|b| b.dim())
    }

    fn prepare(&self, points: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match &self.standardizer {
            Some(s) => s.transform(points),
            None => Ok(points.clone()),
        }
    }

    /// Embeddings of raw (unstandardized) points through `through` layers.
    pub fn embed(&self, points: &DMatrix<f64>, through: usize) -> Result<DMatrix<f64>> {
        if through == 0 || through > self.n_layers() {
            return Err(Error::InvalidParameter(format!(
                "layer {through} requested from a {}-layer model",
                self.n_layers()
            )));
        }
        let x = self.prepare(points)?;
        embed_full_many(&x, &self.layers[..through], &self.kernels)
    }

    /// Predictions of the last layer's classifier for raw points.
    pub fn predict(&self, points: &DMatrix<f64>) -> Result<Vec<Prediction>> {
        let feats = self.embed(points, self.n_layers())?;
        predict_many(&self.layers[self.n_layers() - 1].classifier, &feats)
    }
}

/// Embedding of prepared points (rows) under one layer.
pub fn embed_layer_many(points: &DMatrix<f64>, layer: &LayerModel, kernels: &KernelSet) -> Result<DMatrix<f64>> {
    let used = layer.nu.support();
    let cache = ProjectionCache::compute(&layer.bank, kernels, std::slice::from_ref(points), &used)?;
    let blocks = (0..layer.nu.n_classes())
        .map(|c| weighted_block(&cache, &layer.nu, c, 0))
        .collect::<Result<Vec<_>>>()?;
    Ok(hstack(points.nrows(), &blocks))
}

pub fn embed_layer(x: &[f64], layer: &LayerModel, kernels: &KernelSet) -> Result<Vec<f64>> {
    let m = DMatrix::from_row_slice(1, x.len(), x);
    Ok(embed_layer_many(&m, layer, kernels)?.iter().copied().collect())
}

/// Concatenated embeddings of `layers`, in order.
pub fn embed_full_many(points: &DMatrix<f64>, layers: &[LayerModel], kernels: &KernelSet) -> Result<DMatrix<f64>> {
    let blocks = layers
        .iter()
        .map(|l| embed_layer_many(points, l, kernels))
        .collect::<Result<Vec<_>>>()?;
    Ok(hstack(points.nrows(), &blocks))
}

pub fn embed_full(x: &[f64], layers: &[LayerModel], kernels: &KernelSet) -> Result<Vec<f64>> {
    let m = DMatrix::from_row_slice(1, x.len(), x);
    Ok(embed_full_many(&m, layers, kernels)?.iter().copied().collect())
}

pub(crate) fn hstack(rows: usize, blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let width = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, width);
    let mut at = 0;
    for b in blocks {
        out.columns_mut(at, b.ncols()).copy_from(b);
        at += b.ncols();
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyHyper {
    pub l_max: usize,
    pub t_kappa: f64,
    pub epsilon: f64,
    pub ridge: f64,
    /// Choose the ridge per layer from the standard grid on a validation split.
    pub tune_ridge: bool,
    pub clasmk: ClasmkHyper,
}

impl Default for HierarchyHyper {
    fn default() -> Self {
        Self {
            l_max: 10,
            t_kappa: 1.0,
            epsilon: 1e-3,
            ridge: crate::classifier::DEFAULT_RIDGE,
            tune_ridge: false,
            clasmk: ClasmkHyper::default(),
        }
    }
}

fn fit_classifier(features: &DMatrix<f64>, train: &Dataset, hyper: &HierarchyHyper, seed: u64) -> Result<LinearModel> {
    if hyper.tune_ridge {
        tune_ridge(features, &train.y, train.n_classes(), &RIDGE_GRID, 0.2, seed)
    } else {
        fit_lssvm(features, &train.y, train.n_classes(), hyper.ridge)
    }
}

/// Trains layers until the weight changes settle, the layer budget runs
/// out, or too few uncertain points remain. `train` is used as given; the
/// caller standardizes it and may attach the standardizer to the result.
pub fn train_hierarchy(train: &Dataset, kernels: &KernelSet, hyper: &HierarchyHyper) -> Result<HierarchicalModel> {
    if hyper.l_max == 0 {
        return Err(Error::InvalidParameter("the layer budget must be at least 1".into()));
    }
    let n_classes = train.n_classes();
    let mut layers: Vec<LayerModel> = Vec::new();
    let mut delta: Vec<f64> = Vec::new();
    let mut d_nu: Vec<f64> = Vec::new();
    let mut prev_nu = WeightMatrix::uniform(n_classes, kernels.len());
    let mut features = DMatrix::zeros(train.len(), 0);
    let mut subset: Vec<usize> = (0..train.len()).collect();
    let mut stop = StopReason::MaxLayers;

    for index in 1..=hyper.l_max {
        let layer_seed = hyper.clasmk.split_seed.wrapping_add(index as u64 - 1);
        let step = (|| -> Result<(LayerModel, DMatrix<f64>, Vec<Prediction>)> {
            let part = train.subset(&subset);
            let mut h = hyper.clasmk.clone();
            h.split_seed = layer_seed;
            let learned = train_clasmk(&part, kernels, &h)?;
            let mut layer = LayerModel {
                index,
                nu: learned.nu,
                bank: learned.bank,
                classifier: LinearModel {
                    w: DMatrix::zeros(0, n_classes),
                    b: nalgebra::DVector::zeros(n_classes),
                    ridge: hyper.ridge,
                },
                objective: Some(learned.objective_final),
                subset_size: subset.len(),
                optimize_seconds: learned.optimize_seconds,
            };
            let block = embed_layer_many(&train.x, &layer, kernels)?;
            let stacked = hstack(train.len(), &[features.clone(), block]);
            layer.classifier = fit_classifier(&stacked, train, hyper, layer_seed)?;
            let preds = predict_many(&layer.classifier, &stacked)?;
            Ok((layer, stacked, preds))
        })();
        let (layer, stacked, preds) = match step {
            Ok(v) => v,
            Err(e) if index == 1 => return Err(e),
            Err(e) => {
                log::warn!("layer {index} failed, keeping {} layers: {e}", layers.len());
                stop = StopReason::LayerFailed(format!("layer {index}: {e}"));
                break;
            }
        };
        let delta_plus = layer.nu.frobenius_distance(&prev_nu);
        prev_nu = layer.nu.clone();
        features = stacked;
        log::info!(
            "layer {index}: subset {} points, dim {}, delta {:.4e}",
            layer.subset_size,
            features.ncols(),
            delta_plus
        );
        layers.push(layer);
        let converged = match delta.last() {
            Some(&delta_minus) => {
                let d: f64 = (delta_plus - delta_minus).abs();
                d_nu.push(d);
                d <= hyper.epsilon
            }
            None => false,
        };
        delta.push(delta_plus);
        if converged {
            stop = StopReason::Converged;
            break;
        }
        if index == hyper.l_max {
            break;
        }
        subset = select_marginal(&preds, hyper.t_kappa);
        let mut counts = vec![0usize; n_classes];
        for &i in &subset {
            counts[train.y[i]] += 1;
        }
        if counts.iter().any(|&n| n < 2) {
            stop = StopReason::MarginalTooSmall;
            break;
        }
    }
    Ok(HierarchicalModel {
        kernels: kernels.clone(),
        standardizer: None,
        n_classes,
        layers,
        delta,
        d_nu,
        stop,
    })
}
