//! Single-linkage clustering over `1 − similarity`, built from a minimum
//! spanning tree (Prim, O(n²) time), plus dendrogram cuts and threshold sweeps.

use crate::error::{Error, Result};
use crate::types::{CorrelationMatrix, Dendrogram, Merge, Module, ModuleSet};

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Joins two sets; the smaller root becomes the representative.
    fn union(&mut self, a: usize, b: usize) -> usize {
        let (ra, rb) = (self.find(a), self.find(b));
        let (keep, drop) = (ra.min(rb), ra.max(rb));
        self.parent[drop] = keep;
        keep
    }
}

/// Minimum spanning tree edges `(u, v, dissimilarity)` in the order Prim adds them.
///
/// Ties between candidate vertices go to the smallest index; a vertex's
/// parent only changes on a strict improvement.
pub fn minimum_spanning_tree(d: &CorrelationMatrix) -> Vec<(usize, usize, f64)> {
    let n = d.n();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![0usize; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    if n == 0 {
        return edges;
    }
    in_tree[0] = true;
    for (v, b) in best.iter_mut().enumerate().skip(1) {
        *b = 1.0 - d.get(0, v);
    }
    for _ in 1..n {
        let mut pick = usize::MAX;
        let mut pick_d = f64::INFINITY;
        for v in 0..n {
            if !in_tree[v] && (pick == usize::MAX || best[v] < pick_d) {
                pick = v;
                pick_d = best[v];
            }
        }
        in_tree[pick] = true;
        edges.push((parent[pick], pick, pick_d));
        for v in 0..n {
            if !in_tree[v] {
                let dv = 1.0 - d.get(pick, v);
                if dv < best[v] {
                    best[v] = dv;
                    parent[v] = pick;
                }
            }
        }
    }
    edges
}

/// Single-linkage dendrogram of a correlation matrix.
///
/// Merges are the MST edges sorted by dissimilarity, ties broken by the
/// smallest `(row, column)` pair.
pub fn single_linkage(d: &CorrelationMatrix) -> Result<Dendrogram> {
    let n = d.n();
    if n < 2 {
        return Err(Error::Shape(format!("need at least 2 genes, got {n}")));
    }
    let mut edges: Vec<(usize, usize, f64)> = minimum_spanning_tree(d)
        .into_iter()
        .map(|(u, v, h)| (u.min(v), u.max(v), h))
        .collect();
    edges.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));

    let mut sets = DisjointSet::new(n);
    // node id currently representing each set root
    let mut node_of: Vec<usize> = (0..n).collect();
    let mut size_of = vec![1usize; n];
    let mut merges = Vec::with_capacity(n - 1);
    for (k, (u, v, h)) in edges.into_iter().enumerate() {
        let (ru, rv) = (sets.find(u), sets.find(v));
        let (a, b) = (node_of[ru], node_of[rv]);
        let size = size_of[ru] + size_of[rv];
        let root = sets.union(ru, rv);
        node_of[root] = n + k;
        size_of[root] = size;
        merges.push(Merge {
            left: a.min(b),
            right: a.max(b),
            height: h.max(0.0),
            size,
        });
    }
    Dendrogram::new(d.genes().to_vec(), merges)
}

/// Component label per leaf when keeping merges with similarity ≥ `epsilon`.
/// Labels are numbered by each component's smallest leaf index.
fn cut_labels(t: &Dendrogram, epsilon: f64) -> Vec<usize> {
    let n = t.n_leaves();
    let mut sets = DisjointSet::new(2 * n - 1);
    for (k, m) in t.merges().iter().enumerate() {
        if m.similarity() < epsilon {
            break;
        }
        let node = n + k;
        sets.union(node, m.left);
        sets.union(node, m.right);
    }
    let mut label_of_root = vec![usize::MAX; 2 * n - 1];
    let mut next = 0;
    (0..n)
        .map(|i| {
            let r = sets.find(i);
            if label_of_root[r] == usize::MAX {
                label_of_root[r] = next;
                next += 1;
            }
            label_of_root[r]
        })
        .collect()
}

fn labels_to_modules(t: &Dendrogram, labels: &[usize]) -> ModuleSet {
    let k = labels.iter().max().map_or(0, |&l| l + 1);
    let mut groups = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        groups[l].push(t.leaves()[i].clone());
    }
    let modules = groups
        .into_iter()
        .enumerate()
        .map(|(i, genes)| Module {
            id: format!("M{}", i + 1),
            genes,
        })
        .collect();
    ModuleSet::new(modules, false).expect("dendrogram cut yields a partition")
}

/// Flat clustering at similarity threshold `epsilon`: the connected
/// components of merges at height ≤ `1 − epsilon`. Singletons are kept.
pub fn cut(t: &Dendrogram, epsilon: f64) -> Result<ModuleSet> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in [0, 1], got {epsilon}"
        )));
    }
    Ok(labels_to_modules(t, &cut_labels(t, epsilon)))
}

/// Cuts at thresholds from the lowest to the highest merge similarity in
/// increments of `step`, both endpoints included. Runs of identical
/// clusterings collapse to their largest threshold.
pub fn threshold_sweep(t: &Dendrogram, step: f64) -> Result<Vec<(f64, ModuleSet)>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidParameter(format!("step must lie in (0, 1], got {step}")));
    }
    let merges = t.merges();
    let hi = merges[0].similarity();
    let lo = merges[merges.len() - 1].similarity();
    let mut thresholds = Vec::new();
    let mut k = 0usize;
    loop {
        let eps = lo + k as f64 * step;
        if eps >= hi {
            break;
        }
        thresholds.push(eps);
        k += 1;
    }
    thresholds.push(hi);

    let mut out: Vec<(f64, Vec<usize>)> = Vec::new();
    for eps in thresholds {
        let labels = cut_labels(t, eps);
        match out.last_mut() {
            Some(last) if last.1 == labels => last.0 = eps,
            _ => out.push((eps, labels)),
        }
    }
    Ok(out
        .into_iter()
        .map(|(eps, labels)| (eps, labels_to_modules(t, &labels)))
        .collect())
}
