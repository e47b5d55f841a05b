//! Run configuration in a plain `key = value` text format.
//!
//! ```text
//! # comments start with '#'
//! data = data/banana.csv
//! format = csv
//! kernel = rbf:0.5
//! kernel = poly:12
//! eta = 0.1
//! ```
//!
//! `kernel` may repeat; every other key appears at most once. Unknown keys
//! are rejected.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::classifier::DEFAULT_RIDGE;
use crate::data::DataFormat;
use crate::error::{Error, Result};
use crate::hierarchy::HierarchyHyper;
use crate::kernel::{KernelSet, KernelSpec};
use crate::metric::{ClasmkHyper, OptimizeOptions};
use crate::subspace::{BasisOptions, DEFAULT_MAX_RANK, DEFAULT_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub format: DataFormat,
    pub kernels: Vec<KernelSpec>,
    pub eta: f64,
    pub t: f64,
    pub t_kappa: f64,
    pub l_max: usize,
    pub epsilon: f64,
    pub split_fraction: f64,
    pub ridge: f64,
    pub tune_ridge: bool,
    pub tol: f64,
    pub max_rank: usize,
    pub f_tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub standardize: bool,
    pub output: Option<PathBuf>,
}

/// Polynomial degrees 8, 12, 24, 48 and RBF widths 1, 0.5, 0.1, 0.05.
pub fn default_kernels() -> Vec<KernelSpec> {
    let mut k: Vec<KernelSpec> = [8, 12, 24, 48]
        .iter()
        .map(|&d| KernelSpec::polynomial(d).expect("valid degree"))
        .collect();
    k.extend(
        [1.0, 0.5, 0.1, 0.05]
            .iter()
            .map(|&s| KernelSpec::rbf(s).expect("valid width")),
    );
    k
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: None,
            format: DataFormat::Csv,
            kernels: default_kernels(),
            eta: 0.1,
            t: 0.1,
            t_kappa: 1.0,
            l_max: 10,
            epsilon: 1e-3,
            split_fraction: 0.5,
            ridge: DEFAULT_RIDGE,
            tune_ridge: false,
            tol: DEFAULT_TOL,
            max_rank: DEFAULT_MAX_RANK,
            f_tol: 1e-8,
            max_iters: 500,
            seed: 0,
            standardize: true,
            output: None,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("invalid value `{value}` for `{key}`"))
}

fn parse_bool(key: &str, value: &str) -> std::result::Result<bool, String> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("invalid boolean `{value}` for `{key}`")),
    }
}

impl RunConfig {
    /// Applies one `key = value` setting. `kernel` appends.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let value = value.trim();
        match key.trim() {
            "data" => self.data = Some(PathBuf::from(value)),
            "format" => self.format = value.parse().map_err(|e: Error| e.to_string())?,
            "kernel" => self.kernels.push(value.parse().map_err(|e: Error| e.to_string())?),
            "eta" => self.eta = parse_num("eta", value)?,
            "t" => self.t = parse_num("t", value)?,
            "t_kappa" => self.t_kappa = parse_num("t_kappa", value)?,
            "l_max" => self.l_max = parse_num("l_max", value)?,
            "epsilon" => self.epsilon = parse_num("epsilon", value)?,
            "split_fraction" => self.split_fraction = parse_num("split_fraction", value)?,
            "ridge" => self.ridge = parse_num("ridge", value)?,
            "tune_ridge" => self.tune_ridge = parse_bool("tune_ridge", value)?,
            "tol" => self.tol = parse_num("tol", value)?,
            "max_rank" => self.max_rank = parse_num("max_rank", value)?,
            "f_tol" => self.f_tol = parse_num("f_tol", value)?,
            "max_iters" => self.max_iters = parse_num("max_iters", value)?,
            "seed" => self.seed = parse_num("seed", value)?,
            "standardize" => self.standardize = parse_bool("standardize", value)?,
            "output" => self.output = Some(PathBuf::from(value)),
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self {
            kernels: Vec::new(),
            ..Self::default()
        };
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse {
                line: lineno + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected `key = value`".into()))?;
            let key = key.trim();
            if key != "kernel" && !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key `{key}`")));
            }
            cfg.set(key, value).map_err(err)?;
        }
        if cfg.kernels.is_empty() {
            cfg.kernels = default_kernels();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(d) = &self.data {
            let _ = writeln!(out, "data = {}", d.display());
        }
        let _ = writeln!(out, "format = {}", self.format);
        for k in &self.kernels {
            let _ = writeln!(out, "kernel = {k}");
        }
        let _ = writeln!(out, "eta = {}", self.eta);
        let _ = writeln!(out, "t = {}", self.t);
        let _ = writeln!(out, "t_kappa = {}", self.t_kappa);
        let _ = writeln!(out, "l_max = {}", self.l_max);
        let _ = writeln!(out, "epsilon = {}", self.epsilon);
        let _ = writeln!(out, "split_fraction = {}", self.split_fraction);
        let _ = writeln!(out, "ridge = {}", self.ridge);
        let _ = writeln!(out, "tune_ridge = {}", self.tune_ridge);
        let _ = writeln!(out, "tol = {}", self.tol);
        let _ = writeln!(out, "max_rank = {}", self.max_rank);
        let _ = writeln!(out, "f_tol = {}", self.f_tol);
        let _ = writeln!(out, "max_iters = {}", self.max_iters);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "standardize = {}", self.standardize);
        if let Some(o) = &self.output {
            let _ = writeln!(out, "output = {}", o.display());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if self.kernels.is_empty() {
            return bad("at least one kernel is required");
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad("eta must lie in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.t) {
            return bad("t must lie in [0, 1)");
        }
        if !(self.t_kappa >= 0.0) {
            return bad("t_kappa must be nonnegative");
        }
        if self.l_max == 0 {
            return bad("l_max must be at least 1");
        }
        if !(self.epsilon >= 0.0) {
            return bad("epsilon must be nonnegative");
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return bad("split_fraction must lie in (0, 1)");
        }
        if !(self.ridge > 0.0) {
            return bad("ridge must be positive");
        }
        if !(0.0..1.0).contains(&self.tol) {
            return bad("tol must lie in [0, 1)");
        }
        if self.max_rank == 0 {
            return bad("max_rank must be at least 1");
        }
        if !(self.f_tol >= 0.0) || self.max_iters == 0 {
            return bad("f_tol must be nonnegative and max_iters positive");
        }
        Ok(())
    }

    pub fn kernel_set(&self) -> Result<KernelSet> {
        KernelSet::new(self.kernels.clone())
    }

    pub fn clasmk_hyper(&self) -> ClasmkHyper {
        ClasmkHyper {
            eta: self.eta,
            t: self.t,
            split_fraction: self.split_fraction,
            split_seed: self.seed,
            basis: BasisOptions {
                tol: self.tol,
                max_rank: self.max_rank,
                seed: Some(self.seed),
            },
            optimize: OptimizeOptions {
                f_tol: self.f_tol,
                max_iters: self.max_iters,
                ..OptimizeOptions::default()
            },
        }
    }

    pub fn hierarchy_hyper(&self) -> HierarchyHyper {
        HierarchyHyper {
            l_max: self.l_max,
            t_kappa: self.t_kappa,
            epsilon: self.epsilon,
            ridge: self.ridge,
            tune_ridge: self.tune_ridge,
            clasmk: self.clasmk_hyper(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!((c.l_max, c.t_kappa, c.eta, c.t), (10, 1.0, 0.1, 0.1));
        assert_eq!(c.kernels.len(), 8);
        c.validate().unwrap();
    }

    #[test]
    fn round_trip() {
        let text = "data = x.csv\nkernel = rbf:0.05\nkernel = poly:3\neta = 0.01\nt = 0.0001\nseed = 42\ntune_ridge = yes\n";
        let c = RunConfig::parse(text).unwrap();
        assert_eq!(c.kernels.len(), 2);
        assert_eq!(c.eta, 0.01);
        assert!(c.tune_ridge);
        let again = RunConfig::parse(&c.to_text()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn errors_name_the_line() {
        match RunConfig::parse("eta = 0.1\nbogus = 3\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(RunConfig::parse("eta = 0.1\neta = 0.2\n").is_err());
        assert!(RunConfig::parse("eta = 2\n").is_err());
        assert!(RunConfig::parse("kernel = rbf:-1\n").is_err());
    }
}
