//! Prior-cluster supervision.
//!
//! A prior cluster `C` tightens its correlation sub-block by dividing every
//! off-diagonal entry by `γ = ρ·d(C)`, where `d(C)` is the block maximum and
//! `ρ ∈ [1, 1/d(C)]` encodes how much the prior is trusted. Users supply a
//! dataset-wide `ρ̂ ∈ [0, 1]` that maps to `ρ = 1 + ρ̂·(1/d(C) − 1)` per
//! cluster, so `ρ̂ = 0` trusts the prior fully and `ρ̂ = 1` ignores it.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::types::{gene_index, CorrelationMatrix, GeneId, PriorCluster, PriorClusterSet};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum RhoPolicy {
    /// Reliability knob `ρ̂ ∈ [0, 1]`.
    Fixed(f64),
    /// `ρ = 1`: the block maximum is lifted to exactly 1.
    #[default]
    Certain,
    /// `ρ = 1/d(C)`: no change.
    Off,
}

impl RhoPolicy {
    pub fn validate(self) -> Result<()> {
        if let RhoPolicy::Fixed(r) = self {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::InvalidParameter(format!("rho-hat must lie in [0, 1], got {r}")));
            }
        }
        Ok(())
    }

    /// Divisor `γ` for a block whose maximum off-diagonal entry is `block_max`.
    pub fn gamma(self, block_max: f64) -> f64 {
        match self {
            RhoPolicy::Certain | RhoPolicy::Fixed(0.0) => block_max,
            RhoPolicy::Off | RhoPolicy::Fixed(1.0) => 1.0,
            RhoPolicy::Fixed(r) => (block_max + r * (1.0 - block_max)).clamp(block_max, 1.0),
        }
    }

    /// The unnormalized reliability `ρ = γ / d(C)`.
    pub fn rho(self, block_max: f64) -> f64 {
        self.gamma(block_max) / block_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IncorporationMode {
    #[default]
    Global,
    Local,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SupervisionConfig {
    pub rho: RhoPolicy,
    pub mode: IncorporationMode,
}

/// One prior cluster per connected component (of size ≥ 2) of the edge set.
///
/// Clusters are named `prior_1`, `prior_2`, ... in order of each component's
/// first gene in `genes`.
pub fn communities_from_edges(genes: &[GeneId], edges: &[(GeneId, GeneId)]) -> Result<PriorClusterSet> {
    let index = gene_index(genes);
    let mut parent: Vec<usize> = (0..genes.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut touched = vec![false; genes.len()];
    for (a, b) in edges {
        let ia = *index.get(a).ok_or_else(|| Error::UnknownGene(a.to_string()))?;
        let ib = *index.get(b).ok_or_else(|| Error::UnknownGene(b.to_string()))?;
        touched[ia] = true;
        touched[ib] = true;
        let (ra, rb) = (find(&mut parent, ia), find(&mut parent, ib));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut order: Vec<usize> = Vec::new();
    let mut members: HashMap<usize, Vec<GeneId>> = HashMap::new();
    for i in 0..genes.len() {
        if !touched[i] {
            continue;
        }
        let r = find(&mut parent, i);
        members
            .entry(r)
            .or_insert_with(|| {
                order.push(r);
                Vec::new()
            })
            .push(genes[i].clone());
    }
    let clusters = order
        .into_iter()
        .filter_map(|r| members.remove(&r))
        .filter(|g| g.len() >= 2)
        .enumerate()
        .map(|(k, genes)| PriorCluster {
            name: format!("prior_{}", k + 1),
            genes,
        })
        .collect();
    PriorClusterSet::new(clusters)
}

/// Indices of a cluster's genes within the matrix, plus its divisor.
struct Block {
    idx: Vec<usize>,
    gamma: f64,
}

fn resolve_block(d: &CorrelationMatrix, cluster: &PriorCluster, rho: RhoPolicy) -> Result<Block> {
    rho.validate()?;
    let index = gene_index(d.genes());
    let mut idx = Vec::with_capacity(cluster.genes.len());
    for g in &cluster.genes {
        match index.get(g) {
            Some(&i) => {
                if !idx.contains(&i) {
                    idx.push(i);
                }
            }
            None => log::warn!("prior cluster {:?}: gene {g} not in the matrix; dropped", cluster.name),
        }
    }
    if idx.len() < 2 {
        return Err(Error::EmptyPriorCluster(cluster.name.clone()));
    }
    let mut block_max = 0.0f64;
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            block_max = block_max.max(d.get(i, j));
        }
    }
    if block_max <= 0.0 {
        return Err(Error::DegeneratePriorBlock(cluster.name.clone()));
    }
    Ok(Block {
        idx,
        gamma: rho.gamma(block_max),
    })
}

fn supervised(d: &CorrelationMatrix, divisor: impl Fn(usize, usize) -> Option<f64>) -> Result<CorrelationMatrix> {
    let (genes, mut values, mut meta) = d.clone().into_parts();
    let n = genes.len();
    let mut changed = false;
    for i in 0..n {
        for j in (i + 1)..n {
            if let Some(g) = divisor(i, j) {
                let v = values[(i, j)] / g;
                values[(i, j)] = v;
                values[(j, i)] = v;
                changed |= g != 1.0;
            }
        }
    }
    meta.supervised |= changed;
    CorrelationMatrix::new(genes, values, meta)
}

/// Magnifies the off-diagonal block of a single prior cluster.
pub fn magnify_cluster(d: &CorrelationMatrix, cluster: &PriorCluster, rho: RhoPolicy) -> Result<CorrelationMatrix> {
    let block = resolve_block(d, cluster, rho)?;
    let mut inside = vec![false; d.n()];
    for &i in &block.idx {
        inside[i] = true;
    }
    supervised(d, |i, j| (inside[i] && inside[j]).then_some(block.gamma))
}

/// Applies all prior clusters to one matrix. A pair shared by several
/// clusters is divided once, by the smallest of their divisors.
pub fn incorporate_global(
    d: &CorrelationMatrix,
    priors: &PriorClusterSet,
    rho: RhoPolicy,
) -> Result<CorrelationMatrix> {
    if priors.is_empty() {
        return Ok(d.clone());
    }
    let n = d.n();
    let mut divisor = vec![f64::INFINITY; n * n];
    for cluster in priors.clusters() {
        let block = resolve_block(d, cluster, rho)?;
        for (a, &i) in block.idx.iter().enumerate() {
            for &j in &block.idx[a + 1..] {
                let (lo, hi) = (i.min(j), i.max(j));
                let slot = &mut divisor[lo * n + hi];
                *slot = slot.min(block.gamma);
            }
        }
    }
    supervised(d, |i, j| {
        let g = divisor[i * n + j];
        g.is_finite().then_some(g)
    })
}

/// One supervised matrix per prior cluster, in prior order.
pub fn incorporate_local(
    d: &CorrelationMatrix,
    priors: &PriorClusterSet,
    rho: RhoPolicy,
) -> Result<Vec<(String, CorrelationMatrix)>> {
    priors
        .clusters()
        .par_iter()
        .map(|c| Ok((c.name.clone(), magnify_cluster(d, c, rho)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::MatrixMeta;
    use nalgebra::DMatrix;

    fn ids(names: &[&str]) -> Vec<GeneId> {
        names.iter().map(|s| GeneId::new(*s).unwrap()).collect()
    }

    fn cm(names: &[&str], rows: &[f64]) -> CorrelationMatrix {
        let n = names.len();
        CorrelationMatrix::new(ids(names), DMatrix::from_row_slice(n, n, rows), MatrixMeta::default()).unwrap()
    }

    fn cluster(name: &str, genes: &[&str]) -> PriorCluster {
        PriorCluster {
            name: name.into(),
            genes: ids(genes),
        }
    }

    fn sample() -> CorrelationMatrix {
        cm(
            &["a", "b", "c", "d"],
            &[
                1.0, 0.8, 0.4, 0.1, //
                0.8, 1.0, 0.5, 0.2, //
                0.4, 0.5, 1.0, 0.3, //
                0.1, 0.2, 0.3, 1.0,
            ],
        )
    }

    #[test]
    fn edges_to_communities() {
        let g = ids(&["a", "b", "c", "d", "e"]);
        let e = |x: &str, y: &str| (GeneId::new(x).unwrap(), GeneId::new(y).unwrap());
        let p = communities_from_edges(&g, &[e("a", "b"), e("b", "c")]).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.clusters()[0].genes, ids(&["a", "b", "c"]));
        let p = communities_from_edges(&g, &[e("a", "b"), e("c", "d")]).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.clusters()[1].genes, ids(&["c", "d"]));
        assert!(communities_from_edges(&g, &[]).unwrap().is_empty());
        assert!(matches!(
            communities_from_edges(&g, &[e("a", "zz")]),
            Err(Error::UnknownGene(_))
        ));
    }

    #[test]
    fn certain_prior_lifts_block_max_to_one() {
        let out = magnify_cluster(&sample(), &cluster("k", &["a", "b", "c"]), RhoPolicy::Certain).unwrap();
        assert_eq!(out.get(0, 1), 1.0);
        assert_eq!(out.get(0, 2), 0.4 / 0.8);
        assert!((out.get(0, 2) - 0.5).abs() < 1e-15);
        assert_eq!(out.get(0, 3), 0.1);
        assert_eq!(out.get(3, 3), 1.0);
        assert!(out.meta().supervised);
    }

    #[test]
    fn off_prior_is_identity() {
        let d = sample();
        for rho in [RhoPolicy::Off, RhoPolicy::Fixed(1.0)] {
            let out = magnify_cluster(&d, &cluster("k", &["a", "b", "c"]), rho).unwrap();
            assert_eq!(out.values(), d.values());
        }
    }

    #[test]
    fn fixed_rho_hat_mapping() {
        let d = cm(&["a", "b", "c"], &[1.0, 0.5, 0.3, 0.5, 1.0, 0.2, 0.3, 0.2, 1.0]);
        let rho = RhoPolicy::Fixed(0.5);
        assert_eq!(rho.gamma(0.5), 0.75);
        assert_eq!(rho.rho(0.5), 1.5);
        let out = magnify_cluster(&d, &cluster("k", &["a", "b", "c"]), rho).unwrap();
        assert!((out.get(0, 2) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn missing_genes_and_degenerate_blocks() {
        let d = sample();
        let out = magnify_cluster(&d, &cluster("k", &["a", "b", "ghost"]), RhoPolicy::Certain).unwrap();
        assert_eq!(out.get(0, 1), 1.0);
        assert!(matches!(
            magnify_cluster(&d, &cluster("k", &["a", "ghost", "phantom"]), RhoPolicy::Certain),
            Err(Error::EmptyPriorCluster(_))
        ));
        let z = cm(&["a", "b", "c"], &[1.0, 0.0, 0.5, 0.0, 1.0, 0.5, 0.5, 0.5, 1.0]);
        assert!(matches!(
            magnify_cluster(&z, &cluster("k", &["a", "b"]), RhoPolicy::Certain),
            Err(Error::DegeneratePriorBlock(_))
        ));
        assert!(magnify_cluster(&d, &cluster("k", &["a", "b"]), RhoPolicy::Fixed(1.5)).is_err());
    }

    #[test]
    fn global_uses_smallest_divisor_on_overlap() {
        // γ = 0.8 for {a,b,c}, γ = 0.6 for {b,c,d}; they share (b,c).
        let d = cm(
            &["a", "b", "c", "d"],
            &[
                1.0, 0.8, 0.5, 0.0, //
                0.8, 1.0, 0.5, 0.1, //
                0.5, 0.5, 1.0, 0.6, //
                0.0, 0.1, 0.6, 1.0,
            ],
        );
        let priors =
            PriorClusterSet::new(vec![cluster("p1", &["a", "b", "c"]), cluster("p2", &["b", "c", "d"])]).unwrap();
        let out = incorporate_global(&d, &priors, RhoPolicy::Certain).unwrap();
        // (b,c) lies in both blocks with γ = 0.8 and γ = 0.6.
        assert!((out.get(1, 2) - 0.5 / 0.6).abs() < 1e-15);
        assert!((out.get(0, 2) - 0.5 / 0.8).abs() < 1e-15);
        assert!((out.get(2, 3) - 1.0).abs() < 1e-15);
        assert_eq!(out.get(0, 3), 0.0);
    }

    #[test]
    fn global_on_disjoint_equals_sequential() {
        let d = sample();
        let p1 = cluster("p1", &["a", "b"]);
        let p2 = cluster("p2", &["c", "d"]);
        let priors = PriorClusterSet::new(vec![p1.clone(), p2.clone()]).unwrap();
        let rho = RhoPolicy::Fixed(0.3);
        let g = incorporate_global(&d, &priors, rho).unwrap();
        let s1 = magnify_cluster(&magnify_cluster(&d, &p1, rho).unwrap(), &p2, rho).unwrap();
        let s2 = magnify_cluster(&magnify_cluster(&d, &p2, rho).unwrap(), &p1, rho).unwrap();
        assert_eq!(g.values(), s1.values());
        assert_eq!(g.values(), s2.values());
        let empty = incorporate_global(&d, &PriorClusterSet::default(), rho).unwrap();
        assert_eq!(empty, d);
    }

    #[test]
    fn local_mode_one_matrix_per_cluster() {
        let d = sample();
        let priors = PriorClusterSet::new(vec![
            cluster("p1", &["a", "b"]),
            cluster("p2", &["b", "c"]),
            cluster("p3", &["c", "d"]),
        ])
        .unwrap();
        let local = incorporate_local(&d, &priors, RhoPolicy::Certain).unwrap();
        assert_eq!(local.len(), 3);
        assert_eq!(local[1].0, "p2");
        for ((_, m), c) in local.iter().zip(priors.clusters()) {
            let idx: Vec<usize> = c
                .genes
                .iter()
                .map(|g| d.genes().iter().position(|x| x == g).unwrap())
                .collect();
            for i in 0..4 {
                for j in 0..4 {
                    let in_block = i != j && idx.contains(&i) && idx.contains(&j);
                    if !in_block {
                        assert_eq!(m.get(i, j), d.get(i, j));
                    }
                }
            }
        }
        let single = PriorClusterSet::new(vec![cluster("p1", &["a", "b", "c"])]).unwrap();
        let l = incorporate_local(&d, &single, RhoPolicy::Fixed(0.2)).unwrap();
        let g = incorporate_global(&d, &single, RhoPolicy::Fixed(0.2)).unwrap();
        assert_eq!(l[0].1, g);
    }
}
