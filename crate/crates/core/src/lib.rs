pub mod bounds;
pub mod classifier;
pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod hierarchy;
pub mod kernel;
pub mod metric;
pub mod model_io;
pub mod subspace;
pub mod synth;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/kernels.md")]
    mod kernels {}
    #[doc = include_str!("../../../book/src/subspaces.md")]
    mod subspaces {}
    #[doc = include_str!("../../../book/src/metric_learning.md")]
    mod metric_learning {}
    #[doc = include_str!("../../../book/src/bounds.md")]
    mod bounds {}
    #[doc = include_str!("../../../book/src/hierarchy.md")]
    mod hierarchy {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/file_formats.md")]
    mod file_formats {}
}
