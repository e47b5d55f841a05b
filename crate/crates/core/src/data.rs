//! Datasets, text loaders, standardization and stratified splitting.
//!
//! Two text formats are read:
//!
//! * CSV: comma separated, no header, integer label first, then features.
//! * LIBSVM: `label index:value ...` with 1-based indices, densified.
//!
//! In both cases the original labels are remapped to `0..C` in sorted order.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Csv,
    Libsvm,
}

impl FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "libsvm" | "svmlight" => Ok(Self::Libsvm),
            other => Err(Error::InvalidParameter(format!("unknown data format `{other}`"))),
        }
    }
}

impl std::fmt::Display for DataFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Csv => "csv",
            Self::Libsvm => "libsvm",
        })
    }
}

/// Labeled points. Rows of `x` are samples; labels lie in `0..n_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: Vec<usize>,
    n_classes: usize,
    /// Original label values, indexed by class id, when loaded from text.
    pub label_names: Vec<i64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: Vec<usize>, n_classes: usize) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                found: y.len(),
            });
        }
        if n_classes == 0 {
            return Err(Error::InvalidParameter("a dataset needs at least one class".into()));
        }
        if let Some(&bad) = y.iter().find(|&&l| l >= n_classes) {
            return Err(Error::InvalidParameter(format!(
                "label {bad} out of range for {n_classes} classes"
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset features"));
        }
        Ok(Self {
            x,
            y,
            n_classes,
            label_names: (0..n_classes as i64).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &l in &self.y {
            counts[l] += 1;
        }
        counts
    }

    /// Row indices of each class, in data order.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut idx = vec![Vec::new(); self.n_classes];
        for (i, &l) in self.y.iter().enumerate() {
            idx[l].push(i);
        }
        idx
    }

    /// One matrix of rows per class.
    pub fn per_class(&self) -> Vec<DMatrix<f64>> {
        self.class_indices()
            .iter()
            .map(|rows| select_rows(&self.x, rows))
            .collect()
    }

    /// The rows at `indices`, keeping the class count and label names.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            x: select_rows(&self.x, indices),
            y: indices.iter().map(|&i| self.y[i]).collect(),
            n_classes: self.n_classes,
            label_names: self.label_names.clone(),
        }
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.x.row(i).iter().copied().collect()
    }
}

pub(crate) fn select_rows(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), x.ncols(), |r, c| x[(rows[r], c)])
}

pub fn load_dataset(path: impl AsRef<Path>, format: DataFormat) -> Result<Dataset> {
    let text = fs::read_to_string(path.as_ref())?;
    parse_dataset(&text, format)
}

pub fn parse_dataset(text: &str, format: DataFormat) -> Result<Dataset> {
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse {
            line: lineno + 1,
            message,
        };
        let (label, features) = match format {
            DataFormat::Csv => parse_csv_line(line).map_err(err)?,
            DataFormat::Libsvm => parse_libsvm_line(line).map_err(err)?,
        };
        labels.push(label);
        rows.push(features);
        if format == DataFormat::Csv && rows.len() > 1 && rows[0].len() != rows[rows.len() - 1].len() {
            return Err(Error::Parse {
                line: lineno + 1,
                message: format!(
                    "expected {} features, found {}",
                    rows[0].len(),
                    rows[rows.len() - 1].len()
                ),
            });
        }
    }
    if rows.is_empty() {
        return Err(Error::Empty("dataset file"));
    }
    let dim = rows.iter().map(Vec::len).max().unwrap_or(0);
    if dim == 0 {
        return Err(Error::Parse {
            line: 1,
            message: "no feature columns".into(),
        });
    }
    let names: Vec<i64> = {
        let mut v = labels.clone();
        v.sort_unstable();
        v.dedup();
        v
    };
    let remap: BTreeMap<i64, usize> = names.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let y: Vec<usize> = labels.iter().map(|l| remap[l]).collect();
    // LIBSVM rows may omit trailing zero features; pad to the widest row.
    let x = DMatrix::from_fn(rows.len(), dim, |r, c| rows[r].get(c).copied().unwrap_or(0.0));
    let mut ds = Dataset::new(x, y, names.len())?;
    ds.label_names = names;
    Ok(ds)
}

fn parse_label(field: &str) -> std::result::Result<i64, String> {
    let f = field.trim();
    let f = f.strip_prefix('+').unwrap_or(f);
    if let Ok(v) = f.parse::<i64>() {
        return Ok(v);
    }
    match f.parse::<f64>() {
        Ok(v) if v.fract() == 0.0 && v.is_finite() => Ok(v as i64),
        _ => Err(format!("invalid label `{field}`")),
    }
}

fn parse_value(field: &str) -> std::result::Result<f64, String> {
    match field.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(format!("non-finite value `{field}`")),
        Err(_) => Err(format!("invalid number `{field}`")),
    }
}

fn parse_csv_line(line: &str) -> std::result::Result<(i64, Vec<f64>), String> {
    let mut fields = line.split(',');
    let label = parse_label(fields.next().unwrap_or(""))?;
    let features = fields.map(parse_value).collect::<std::result::Result<Vec<_>, _>>()?;
    if features.is_empty() {
        return Err("no feature columns".into());
    }
    Ok((label, features))
}

fn parse_libsvm_line(line: &str) -> std::result::Result<(i64, Vec<f64>), String> {
    let mut tokens = line.split_whitespace();
    let label = parse_label(tokens.next().unwrap_or(""))?;
    let mut features = Vec::new();
    let mut last = 0usize;
    for tok in tokens {
        let (idx, val) = tok
            .split_once(':')
            .ok_or_else(|| format!("expected index:value, found `{tok}`"))?;
        let idx: usize = idx
            .parse()
            .map_err(|_| format!("invalid feature index `{idx}`"))?;
        if idx == 0 || idx <= last {
            return Err(format!("feature indices must be 1-based and increasing, found {idx}"));
        }
        last = idx;
        if features.len() < idx {
            features.resize(idx, 0.0);
        }
        features[idx - 1] = parse_value(val)?;
    }
    Ok((label, features))
}

/// Writes a dataset in the CSV layout read by [`load_dataset`], using the
/// original label values.
pub fn write_csv(ds: &Dataset, mut out: impl std::io::Write) -> Result<()> {
    for i in 0..ds.len() {
        write!(out, "{}", ds.label_names.get(ds.y[i]).copied().unwrap_or(ds.y[i] as i64))?;
        for v in ds.x.row(i).iter() {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Per-feature centering and unit-variance scaling, fitted on training data.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: DVector<f64>,
    pub scale: DVector<f64>,
}

impl Standardizer {
    /// Zero-variance dimensions get scale 1.
    pub fn fit(x: &DMatrix<f64>) -> Result<Self> {
        let n = x.nrows();
        if n == 0 {
            return Err(Error::Empty("standardizer input"));
        }
        let mean = x.row_mean().transpose();
        let scale = DVector::from_iterator(
            x.ncols(),
            x.column_iter().zip(mean.iter()).map(|(col, m)| {
                let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
                let sd = var.sqrt();
                if sd > 1e-12 * (1.0 + m.abs()) {
                    sd
                } else {
                    1.0
                }
            }),
        );
        Ok(Self { mean, scale })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.ncols(),
            });
        }
        Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| {
            (x[(r, c)] - self.mean[c]) / self.scale[c]
        }))
    }

    pub fn transform_dataset(&self, ds: &Dataset) -> Result<Dataset> {
        let mut out = ds.clone();
        out.x = self.transform(&ds.x)?;
        Ok(out)
    }
}

/// Per-class random split: `round(fraction * n_c)` rows of each class go to
/// the first part, clamped so both parts get at least one row.
/// Returns the row indices of the two parts.
pub fn split_stratified_indices(ds: &Dataset, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "split fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut first = Vec::new();
    let mut second = Vec::new();
    for (c, mut rows) in ds.class_indices().into_iter().enumerate() {
        if rows.is_empty() {
            continue;
        }
        if rows.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "class {c} has a single sample and cannot be split"
            )));
        }
        rows.shuffle(&mut rng);
        let n = rows.len();
        let take = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
        first.extend_from_slice(&rows[..take]);
        second.extend_from_slice(&rows[take..]);
    }
    first.sort_unstable();
    second.sort_unstable();
    Ok((first, second))
}

pub fn split_stratified(ds: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (a, b) = split_stratified_indices(ds, fraction, seed)?;
    Ok((ds.subset(&a), ds.subset(&b)))
}

/// Stratified k-fold partition: `(train, test)` row indices per fold. Test
/// folds are disjoint and cover every row once.
pub fn kfold(ds: &Dataset, k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k-fold needs k >= 2, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tests = vec![Vec::new(); k];
    // Continue the round-robin across classes so fold sizes stay balanced.
    let mut next = 0usize;
    for (c, mut rows) in ds.class_indices().into_iter().enumerate() {
        if rows.is_empty() {
            continue;
        }
        if rows.len() < k {
            return Err(Error::InvalidParameter(format!(
                "class {c} has {} samples, fewer than k = {k}",
                rows.len()
            )));
        }
        rows.shuffle(&mut rng);
        for r in rows {
            tests[next % k].push(r);
            next += 1;
        }
    }
    Ok(tests
        .into_iter()
        .map(|mut test| {
            test.sort_unstable();
            let mut in_test = vec![false; ds.len()];
            for &i in &test {
                in_test[i] = true;
            }
            let train = (0..ds.len()).filter(|&i| !in_test[i]).collect();
            (train, test)
        })
        .collect())
}
