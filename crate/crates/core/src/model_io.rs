//! Binary model files.
//!
//! All integers are little-endian `u64` unless noted, all reals little-endian
//! `f64`, and matrices row-major.
//!
//! ```text
//! magic        8 bytes  "CLASMKMF"
//! version      u32      1
//! n_classes
//! standardizer u8 flag; if 1: p, p means, p scales
//! kernels      K; per kernel: u8 family (0 = rbf, 1 = poly), f64 parameter
//! n_layers     L
//! per layer:
//!   index, subset_size, f64 optimize_seconds
//!   u8 flag; if 1: f64 h_b, h_w, h
//!   nu         C x K reals
//!   n_bases; per basis: class, kernel, m, p, r, landmarks m x p, transform m x r
//!   classifier q, C, W q x C, b (C reals), f64 ridge
//! delta        n, n reals
//! d_nu         n, n reals
//! stop         u8 (0 max layers, 1 converged, 2 marginal too small, 3 layer failed)
//!              if 3: byte length, UTF-8 message
//! ```
//!
//! Only bases that carry weight in their class row are stored.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::classifier::LinearModel;
use crate::data::Standardizer;
use crate::error::{Error, Result};
use crate::hierarchy::{HierarchicalModel, LayerModel, StopReason};
use crate::kernel::{KernelFamily, KernelSet, KernelSpec};
use crate::metric::{ObjectiveParts, WeightMatrix};
use crate::subspace::{BasisBank, ClassBasis};

pub const MAGIC: &[u8; 8] = b"CLASMKMF";
pub const VERSION: u32 = 1;

// Guards allocation sizes read from untrusted files.
const MAX_LEN: u64 = 1 << 32;

struct Writer<W: Write> {
    out: W,
}

impl<W: Write> Writer<W> {
    fn u8(&mut self, v: u8) -> Result<()> {
        Ok(self.out.write_all(&[v])?)
    }

    fn u64(&mut self, v: usize) -> Result<()> {
        Ok(self.out.write_all(&(v as u64).to_le_bytes())?)
    }

    fn f64(&mut self, v: f64) -> Result<()> {
        Ok(self.out.write_all(&v.to_le_bytes())?)
    }

    fn reals<'a>(&mut self, values: impl IntoIterator<Item = &'a f64>) -> Result<()> {
        for v in values {
            self.f64(*v)?;
        }
        Ok(())
    }

    fn matrix(&mut self, m: &DMatrix<f64>) -> Result<()> {
        for r in 0..m.nrows() {
            self.reals(m.row(r).iter())?;
        }
        Ok(())
    }
}

struct Reader<R: Read> {
    input: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.input.read_exact(&mut buf).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::Format("truncated file".into()),
            _ => Error::Io(e),
        })?;
        Ok(buf)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.bytes()?);
        if v > MAX_LEN {
            return Err(Error::Format(format!("implausible length {v}")));
        }
        Ok(v as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    fn reals(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        let n = rows
            .checked_mul(cols)
            .filter(|&n| (n as u64) <= MAX_LEN)
            .ok_or_else(|| Error::Format("matrix too large".into()))?;
        Ok(DMatrix::from_row_slice(rows, cols, &self.reals(n)?))
    }
}

pub fn write_model(model: &HierarchicalModel, out: impl Write) -> Result<()> {
    let mut w = Writer { out };
    w.out.write_all(MAGIC)?;
    w.out.write_all(&VERSION.to_le_bytes())?;
    w.u64(model.n_classes)?;
    match &model.standardizer {
        Some(s) => {
            w.u8(1)?;
            w.u64(s.dim())?;
            w.reals(s.mean.iter())?;
            w.reals(s.scale.iter())?;
        }
        None => w.u8(0)?,
    }
    w.u64(model.kernels.len())?;
    for k in model.kernels.iter() {
        w.u8(match k.family() {
            KernelFamily::Rbf => 0,
            KernelFamily::Polynomial => 1,
        })?;
        w.f64(k.param())?;
    }
    w.u64(model.layers.len())?;
    for layer in &model.layers {
        w.u64(layer.index)?;
        w.u64(layer.subset_size)?;
        w.f64(layer.optimize_seconds)?;
        match layer.objective {
            Some(o) => {
                w.u8(1)?;
                w.reals(&[o.h_b, o.h_w, o.h])?;
            }
            None => w.u8(0)?,
        }
        w.matrix(layer.nu.as_matrix())?;
        let kept: Vec<&ClassBasis> = layer
            .bank
            .iter()
            .filter(|b| layer.nu.get(b.class_id, b.kernel_index) > 0.0)
            .collect();
        w.u64(kept.len())?;
        for b in kept {
            w.u64(b.class_id)?;
            w.u64(b.kernel_index)?;
            w.u64(b.n_landmarks())?;
            w.u64(b.dim())?;
            w.u64(b.rank())?;
            w.matrix(&b.landmarks)?;
            w.matrix(&b.transform)?;
        }
        let c = &layer.classifier;
        w.u64(c.w.nrows())?;
        w.u64(c.w.ncols())?;
        w.matrix(&c.w)?;
        w.reals(c.b.iter())?;
        w.f64(c.ridge)?;
    }
    w.u64(model.delta.len())?;
    w.reals(&model.delta)?;
    w.u64(model.d_nu.len())?;
    w.reals(&model.d_nu)?;
    match &model.stop {
        StopReason::MaxLayers => w.u8(0)?,
        StopReason::Converged => w.u8(1)?,
        StopReason::MarginalTooSmall => w.u8(2)?,
        StopReason::LayerFailed(msg) => {
            w.u8(3)?;
            w.u64(msg.len())?;
            w.out.write_all(msg.as_bytes())?;
        }
    }
    w.out.flush()?;
    Ok(())
}

pub fn read_model(input: impl Read) -> Result<HierarchicalModel> {
    let mut r = Reader { input };
    if &r.bytes::<8>()? != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let version = u32::from_le_bytes(r.bytes()?);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n_classes = r.u64()?;
    let standardizer = match r.u8()? {
        0 => None,
        1 => {
            let p = r.u64()?;
            Some(Standardizer {
                mean: DVector::from_vec(r.reals(p)?),
                scale: DVector::from_vec(r.reals(p)?),
            })
        }
        f => return Err(Error::Format(format!("bad standardizer flag {f}"))),
    };
    let n_kernels = r.u64()?;
    let mut specs = Vec::with_capacity(n_kernels.min(1024));
    for _ in 0..n_kernels {
        let family = match r.u8()? {
            0 => KernelFamily::Rbf,
            1 => KernelFamily::Polynomial,
            f => return Err(Error::Format(format!("bad kernel family {f}"))),
        };
        specs.push(KernelSpec::from_parts(family, r.f64()?).map_err(|e| Error::Format(e.to_string()))?);
    }
    let kernels = KernelSet::new(specs).map_err(|e| Error::Format(e.to_string()))?;
    let n_layers = r.u64()?;
    let mut layers = Vec::new();
    for _ in 0..n_layers {
        let index = r.u64()?;
        let subset_size = r.u64()?;
        let optimize_seconds = r.f64()?;
        let objective = match r.u8()? {
            0 => None,
            1 => Some(ObjectiveParts {
                h_b: r.f64()?,
                h_w: r.f64()?,
                h: r.f64()?,
            }),
            f => return Err(Error::Format(format!("bad objective flag {f}"))),
        };
        let nu = WeightMatrix::from_matrix(r.matrix(n_classes, n_kernels)?)
            .map_err(|e| Error::Format(e.to_string()))?;
        let mut bank = BasisBank::new(n_classes, n_kernels);
        for _ in 0..r.u64()? {
            let class_id = r.u64()?;
            let kernel_index = r.u64()?;
            let (m, p, rank) = (r.u64()?, r.u64()?, r.u64()?);
            if class_id >= n_classes || kernel_index >= n_kernels {
                return Err(Error::Format("basis index out of range".into()));
            }
            let landmarks = r.matrix(m, p)?;
            let transform = r.matrix(m, rank)?;
            bank.insert(ClassBasis {
                class_id,
                kernel_index,
                landmarks,
                transform,
            });
        }
        let (q, c) = (r.u64()?, r.u64()?);
        let w = r.matrix(q, c)?;
        let b = DVector::from_vec(r.reals(c)?);
        let ridge = r.f64()?;
        layers.push(LayerModel {
            index,
            nu,
            bank,
            classifier: LinearModel { w, b, ridge },
            objective,
            subset_size,
            optimize_seconds,
        });
    }
    let n = r.u64()?;
    let delta = r.reals(n)?;
    let n = r.u64()?;
    let d_nu = r.reals(n)?;
    let stop = match r.u8()? {
        0 => StopReason::MaxLayers,
        1 => StopReason::Converged,
        2 => StopReason::MarginalTooSmall,
        3 => {
            let len = r.u64()?;
            let mut buf = vec![0u8; len];
            r.input.read_exact(&mut buf)?;
            StopReason::LayerFailed(String::from_utf8(buf).map_err(|_| Error::Format("bad message".into()))?)
        }
        f => return Err(Error::Format(format!("bad stop code {f}"))),
    };
    Ok(HierarchicalModel {
        kernels,
        standardizer,
        n_classes,
        layers,
        delta,
        d_nu,
        stop,
    })
}

pub fn save_model(model: &HierarchicalModel, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_model(model, std::io::BufWriter::new(file))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<HierarchicalModel> {
    let file = std::fs::File::open(path)?;
    read_model(std::io::BufReader::new(file))
}
