//! Module detection in gene networks.
//!
//! Expression profiles become a correlation matrix ([`corrmat`]), optionally
//! tightened inside prior clusters ([`priors`]) and stripped of transitive
//! correlation ([`deconv`]), then clustered with single linkage ([`hac`]).
//! [`evalkit`] scores threshold sweeps against gold-standard modules and
//! [`synthbench`] generates benchmarks with known modules.

pub mod corrmat;
pub mod deconv;
pub mod error;
pub mod evalkit;
pub mod hac;
pub mod io;
pub mod metagene;
pub mod pipeline;
pub mod priors;
pub mod synthbench;
pub mod types;

pub use error::{Error, ErrorKind, Result};
pub use types::{
    validate_correlation_matrix, ConfusionCounts, CorrelationMatrix, Dendrogram, ExpressionMatrix, GeneId, MatrixMeta,
    Merge, Metric, Module, ModuleSet, PriorCluster, PriorClusterSet, RocCurve, RocPoint,
};
