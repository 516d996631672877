//! Shared domain types.
//!
//! Every type here is immutable once built; constructors enforce the
//! invariants, so a value that exists is a valid value.

use std::collections::{HashMap, HashSet};
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Tolerance for symmetry and range checks on correlation matrices.
pub const MATRIX_TOL: f64 = 1e-12;

/// Gene (or meta-gene) identifier.
///
/// Non-empty, free of tabs and line breaks, and never starting with `#`
/// (that prefix marks comments and internal dendrogram nodes in files).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GeneId(String);

impl GeneId {
    pub fn new(symbol: impl Into<String>) -> Result<Self> {
        let symbol = symbol.into();
        if symbol.is_empty() || symbol.starts_with('#') || symbol.contains(['\t', '\n', '\r']) {
            return Err(Error::InvalidGeneId(symbol));
        }
        Ok(GeneId(symbol))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for GeneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for GeneId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

pub(crate) fn check_unique(genes: &[GeneId]) -> Result<()> {
    let mut seen = HashSet::with_capacity(genes.len());
    for g in genes {
        if !seen.insert(g) {
            return Err(Error::DuplicateGene(g.to_string()));
        }
    }
    Ok(())
}

pub(crate) fn gene_index(genes: &[GeneId]) -> HashMap<&GeneId, usize> {
    genes.iter().enumerate().map(|(i, g)| (g, i)).collect()
}

/// Genes × samples expression table, stored gene-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionMatrix {
    genes: Vec<GeneId>,
    samples: Vec<String>,
    values: Vec<f64>,
}

impl ExpressionMatrix {
    pub fn new(genes: Vec<GeneId>, samples: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let (n, m) = (genes.len(), samples.len());
        if n < 2 {
            return Err(Error::Shape(format!("need at least 2 genes, got {n}")));
        }
        if m < 3 {
            return Err(Error::Shape(format!("need at least 3 samples, got {m}")));
        }
        if values.len() != n * m {
            return Err(Error::Shape(format!(
                "expected {n}×{m} = {} values, got {}",
                n * m,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / m,
                col: pos % m,
            });
        }
        check_unique(&genes)?;
        Ok(ExpressionMatrix { genes, samples, values })
    }

    pub fn genes(&self) -> &[GeneId] {
        &self.genes
    }

    pub fn samples(&self) -> &[String] {
        &self.samples
    }

    pub fn n_genes(&self) -> usize {
        self.genes.len()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.samples.len();
        &self.values[i * m..(i + 1) * m]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Which correlation metric produced a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Pcc,
    Dcc,
    Mi1,
    Mi2,
    Mi3,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Pcc => "pcc",
            Metric::Dcc => "dcc",
            Metric::Mi1 => "mi1",
            Metric::Mi2 => "mi2",
            Metric::Mi3 => "mi3",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.to_ascii_lowercase().as_str() {
            "pcc" => Metric::Pcc,
            "dcc" | "dcor" => Metric::Dcc,
            "mi1" => Metric::Mi1,
            "mi2" => Metric::Mi2,
            "mi3" => Metric::Mi3,
            _ => return None,
        })
    }
}

/// Provenance carried along with a correlation matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MatrixMeta {
    pub metric: Option<Metric>,
    pub supervised: bool,
    pub deconvolved: bool,
}

/// Symmetric n×n similarity matrix with unit diagonal and entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    genes: Vec<GeneId>,
    values: DMatrix<f64>,
    meta: MatrixMeta,
}

/// Checks every correlation-matrix invariant and returns the validated matrix.
///
/// Asymmetry up to [`MATRIX_TOL`] is repaired by averaging with the
/// transpose; entries within [`MATRIX_TOL`] outside `[0, 1]` are clamped.
pub fn validate_correlation_matrix(
    genes: Vec<GeneId>,
    mut values: DMatrix<f64>,
    meta: MatrixMeta,
) -> Result<CorrelationMatrix> {
    let n = genes.len();
    if values.nrows() != values.ncols() {
        return Err(Error::Shape(format!(
            "matrix is {}×{}, not square",
            values.nrows(),
            values.ncols()
        )));
    }
    if values.nrows() != n {
        return Err(Error::Shape(format!(
            "matrix order {} does not match {} genes",
            values.nrows(),
            n
        )));
    }
    check_unique(&genes)?;
    for i in 0..n {
        for j in 0..n {
            if !values[(i, j)].is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    for i in 0..n {
        if values[(i, i)] != 1.0 {
            return Err(Error::BadDiagonal {
                index: i,
                value: values[(i, i)],
            });
        }
        for j in (i + 1)..n {
            let (a, b) = (values[(i, j)], values[(j, i)]);
            if (a - b).abs() > MATRIX_TOL {
                return Err(Error::AsymmetricMatrix { row: i, col: j, a, b });
            }
            let mut v = if a == b { a } else { (a + b) / 2.0 };
            if !(-MATRIX_TOL..=1.0 + MATRIX_TOL).contains(&v) {
                return Err(Error::OutOfRangeEntry {
                    row: i,
                    col: j,
                    value: v,
                });
            }
            v = v.clamp(0.0, 1.0);
            values[(i, j)] = v;
            values[(j, i)] = v;
        }
    }
    Ok(CorrelationMatrix { genes, values, meta })
}

impl CorrelationMatrix {
    pub fn new(genes: Vec<GeneId>, values: DMatrix<f64>, meta: MatrixMeta) -> Result<Self> {
        validate_correlation_matrix(genes, values, meta)
    }

    pub fn genes(&self) -> &[GeneId] {
        &self.genes
    }

    pub fn n(&self) -> usize {
        self.genes.len()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn meta(&self) -> MatrixMeta {
        self.meta
    }

    pub fn into_parts(self) -> (Vec<GeneId>, DMatrix<f64>, MatrixMeta) {
        (self.genes, self.values, self.meta)
    }
}

/// A named gene set asserted by prior information.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriorCluster {
    pub name: String,
    pub genes: Vec<GeneId>,
}

/// Possibly overlapping prior clusters, each with at least two genes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PriorClusterSet {
    clusters: Vec<PriorCluster>,
}

impl PriorClusterSet {
    pub fn new(clusters: Vec<PriorCluster>) -> Result<Self> {
        let mut out = Vec::with_capacity(clusters.len());
        for mut c in clusters {
            dedup_in_order(&mut c.genes);
            if c.genes.len() < 2 {
                return Err(Error::EmptyPriorCluster(c.name));
            }
            out.push(c);
        }
        Ok(PriorClusterSet { clusters: out })
    }

    /// Converts a module file into prior clusters, dropping (and logging)
    /// modules with fewer than two genes.
    pub fn from_modules(modules: &ModuleSet) -> Self {
        let clusters = modules
            .modules()
            .iter()
            .filter_map(|m| {
                if m.genes.len() < 2 {
                    log::warn!("prior cluster {:?} has fewer than two genes; skipped", m.id);
                    None
                } else {
                    Some(PriorCluster {
                        name: m.id.clone(),
                        genes: m.genes.clone(),
                    })
                }
            })
            .collect();
        PriorClusterSet { clusters }
    }

    pub fn clusters(&self) -> &[PriorCluster] {
        &self.clusters
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn to_modules(&self) -> ModuleSet {
        ModuleSet {
            modules: self
                .clusters
                .iter()
                .map(|c| Module {
                    id: c.name.clone(),
                    genes: c.genes.clone(),
                })
                .collect(),
            overlapping: true,
        }
    }
}

fn dedup_in_order(genes: &mut Vec<GeneId>) {
    let mut seen = HashSet::new();
    genes.retain(|g| seen.insert(g.clone()));
}

/// One agglomeration step. Nodes `0..n` are leaves; merge `k` creates node `n + k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    /// Dissimilarity `1 - similarity` at which the two nodes join.
    pub height: f64,
    pub size: usize,
}

impl Merge {
    /// Similarity level of this merge.
    pub fn similarity(&self) -> f64 {
        1.0 - self.height
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    leaves: Vec<GeneId>,
    merges: Vec<Merge>,
}

impl Dendrogram {
    /// Builds a dendrogram from merges, checking node references, sizes and
    /// height monotonicity.
    pub fn new(leaves: Vec<GeneId>, mut merges: Vec<Merge>) -> Result<Self> {
        let n = leaves.len();
        if n < 2 {
            return Err(Error::Shape(format!("dendrogram needs at least 2 leaves, got {n}")));
        }
        check_unique(&leaves)?;
        if merges.len() != n - 1 {
            return Err(Error::Shape(format!(
                "expected {} merges for {n} leaves, got {}",
                n - 1,
                merges.len()
            )));
        }
        let mut used = vec![false; 2 * n - 1];
        let mut sizes = vec![1usize; 2 * n - 1];
        let mut prev = f64::NEG_INFINITY;
        for (k, m) in merges.iter_mut().enumerate() {
            let node = n + k;
            for child in [m.left, m.right] {
                if child >= node || used[child] {
                    return Err(Error::Shape(format!(
                        "merge {k} references invalid or reused node {child}"
                    )));
                }
                used[child] = true;
            }
            if m.left == m.right {
                return Err(Error::Shape(format!("merge {k} joins node {} with itself", m.left)));
            }
            if !m.height.is_finite() || m.height < prev {
                return Err(Error::Shape(format!(
                    "merge heights must be finite and non-decreasing (merge {k})"
                )));
            }
            if !(0.0..=1.0).contains(&m.height) {
                return Err(Error::Shape(format!("merge {k} height {} outside [0, 1]", m.height)));
            }
            prev = m.height;
            sizes[node] = sizes[m.left] + sizes[m.right];
            m.size = sizes[node];
        }
        Ok(Dendrogram { leaves, merges })
    }

    pub fn leaves(&self) -> &[GeneId] {
        &self.leaves
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Module {
    pub id: String,
    pub genes: Vec<GeneId>,
}

/// Flat grouping of genes; `overlapping = false` guarantees disjoint sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModuleSet {
    modules: Vec<Module>,
    overlapping: bool,
}

impl ModuleSet {
    pub fn new(modules: Vec<Module>, overlapping: bool) -> Result<Self> {
        let mut out = Vec::with_capacity(modules.len());
        let mut seen: HashSet<GeneId> = HashSet::new();
        for mut m in modules {
            if m.id.is_empty() || m.id.contains(['\t', '\n', '\r']) {
                return Err(Error::InvalidParameter(format!("invalid module id {:?}", m.id)));
            }
            dedup_in_order(&mut m.genes);
            if m.genes.is_empty() {
                return Err(Error::Shape(format!("module {:?} is empty", m.id)));
            }
            if !overlapping {
                for g in &m.genes {
                    if !seen.insert(g.clone()) {
                        return Err(Error::Shape(format!(
                            "gene {g} appears in more than one module of a disjoint module set"
                        )));
                    }
                }
            }
            out.push(m);
        }
        Ok(ModuleSet {
            modules: out,
            overlapping,
        })
    }

    pub fn modules(&self) -> &[Module] {
        &self.modules
    }

    pub fn overlapping(&self) -> bool {
        self.overlapping
    }

    pub fn len(&self) -> usize {
        self.modules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modules.is_empty()
    }

    /// Genes covered by at least one module, in first-appearance order.
    pub fn genes(&self) -> Vec<GeneId> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for m in &self.modules {
            for g in &m.genes {
                if seen.insert(g) {
                    out.push(g.clone());
                }
            }
        }
        out
    }

    /// True when both sets group exactly the same genes together, ignoring ids and order.
    pub fn same_partition(&self, other: &ModuleSet) -> bool {
        canonical(self) == canonical(other)
    }

    /// The module with the most genes; ties go to the earliest module.
    pub fn largest(&self) -> Option<&Module> {
        self.modules.iter().rev().max_by_key(|m| m.genes.len())
    }
}

fn canonical(ms: &ModuleSet) -> Vec<Vec<&GeneId>> {
    let mut sets: Vec<Vec<&GeneId>> = ms
        .modules
        .iter()
        .map(|m| {
            let mut v: Vec<&GeneId> = m.genes.iter().collect();
            v.sort();
            v
        })
        .collect();
    sets.sort();
    sets
}

/// Pairwise confusion counts over a gene universe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    /// Similarity cut; `None` for the synthetic `(0,0)` and `(1,1)` endpoints.
    pub threshold: Option<f64>,
    pub fpr: f64,
    pub tpr: f64,
    pub counts: ConfusionCounts,
}

/// ROC points ordered by FPR, then TPR.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    points: Vec<RocPoint>,
}

impl RocCurve {
    pub fn new(mut points: Vec<RocPoint>) -> Result<Self> {
        for p in &points {
            if !(0.0..=1.0).contains(&p.fpr) || !(0.0..=1.0).contains(&p.tpr) {
                return Err(Error::InvalidParameter(format!(
                    "ROC point ({}, {}) outside the unit square",
                    p.fpr, p.tpr
                )));
            }
        }
        points.sort_by(|a, b| a.fpr.total_cmp(&b.fpr).then(a.tpr.total_cmp(&b.tpr)));
        Ok(RocCurve { points })
    }

    /// Builds a curve from bare `(fpr, tpr)` pairs.
    pub fn from_rates(rates: &[(f64, f64)]) -> Result<Self> {
        RocCurve::new(
            rates
                .iter()
                .map(|&(fpr, tpr)| RocPoint {
                    threshold: None,
                    fpr,
                    tpr,
                    counts: ConfusionCounts::default(),
                })
                .collect(),
        )
    }

    pub fn points(&self) -> &[RocPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
