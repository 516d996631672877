//! Collapsing near-duplicate expression profiles into meta-genes.

use rayon::prelude::*;

use crate::corrmat::pearson;
use crate::error::{Error, Result};
use crate::types::{ExpressionMatrix, GeneId};

/// Default merge threshold on signed PCC.
pub const DEFAULT_TAU: f64 = 0.95;

#[derive(Debug, Clone, PartialEq)]
pub struct Metagene {
    pub id: GeneId,
    pub members: Vec<GeneId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetageneMap {
    pub metagenes: Vec<Metagene>,
}

impl MetageneMap {
    /// `(metagene id, member id)` rows.
    pub fn pairs(&self) -> impl Iterator<Item = (&GeneId, &GeneId)> {
        self.metagenes
            .iter()
            .flat_map(|m| m.members.iter().map(move |g| (&m.id, g)))
    }
}

/// Merges genes whose signed PCC exceeds `tau` (transitively), averaging
/// member profiles.
///
/// Singleton metagenes keep their gene id; merged ones are named by joining
/// member ids with `|`. Constant profiles are never merged.
pub fn merge_metagenes(expr: &ExpressionMatrix, tau: f64) -> Result<(ExpressionMatrix, MetageneMap)> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidParameter(format!("tau must lie in (0, 1], got {tau}")));
    }
    let n = expr.n_genes();
    let m = expr.n_samples();
    let constant: Vec<bool> = (0..n)
        .map(|i| {
            let r = expr.row(i);
            r.iter().all(|&v| v == r[0])
        })
        .collect();
    for (i, &c) in constant.iter().enumerate() {
        if c {
            log::warn!(
                "gene {} has a constant profile; kept as its own metagene",
                expr.genes()[i]
            );
        }
    }

    let edges: Vec<(usize, usize)> = (0..n)
        .into_par_iter()
        .filter(|&i| !constant[i])
        .flat_map_iter(|i| {
            let constant = &constant;
            ((i + 1)..n).filter_map(move |j| {
                if constant[j] {
                    return None;
                }
                let r = pearson(expr.row(i), expr.row(j)).ok()?;
                (r > tau).then_some((i, j))
            })
        })
        .collect();

    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (i, j) in edges {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }

    if groups.len() == n {
        let map = MetageneMap {
            metagenes: expr
                .genes()
                .iter()
                .map(|g| Metagene {
                    id: g.clone(),
                    members: vec![g.clone()],
                })
                .collect(),
        };
        return Ok((expr.clone(), map));
    }

    let mut genes = Vec::with_capacity(groups.len());
    let mut values = Vec::with_capacity(groups.len() * m);
    let mut metagenes = Vec::with_capacity(groups.len());
    for g in &groups {
        let members: Vec<GeneId> = g.iter().map(|&i| expr.genes()[i].clone()).collect();
        let id = if members.len() == 1 {
            members[0].clone()
        } else {
            let joined: Vec<&str> = members.iter().map(GeneId::as_str).collect();
            GeneId::new(joined.join("|"))?
        };
        for s in 0..m {
            let mean = g.iter().map(|&i| expr.row(i)[s]).sum::<f64>() / g.len() as f64;
            values.push(mean);
        }
        genes.push(id.clone());
        metagenes.push(Metagene { id, members });
    }
    let merged = ExpressionMatrix::new(genes, expr.samples().to_vec(), values)?;
    Ok((merged, MetageneMap { metagenes }))
}
