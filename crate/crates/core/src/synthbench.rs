//! Seeded synthetic benchmarks with known modules.
//!
//! Each module owns one latent activity profile; every member gene is
//! `loading · latent + N(0, sigma²)` noise. One synthetic regulator per
//! module targets all of its members, and the prior clusters are the true
//! modules after a fraction of genes have had their labels shuffled.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::types::{ExpressionMatrix, GeneId, Module, ModuleSet, PriorCluster, PriorClusterSet};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub n_genes: usize,
    pub n_modules: usize,
    pub samples: usize,
    /// Loadings are drawn uniformly from `[lo, hi]`.
    pub loading: (f64, f64),
    pub sigma: f64,
    pub p_corrupt: f64,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            n_genes: 100,
            n_modules: 5,
            samples: 40,
            loading: (0.5, 1.5),
            sigma: 1.0,
            p_corrupt: 0.0,
            seed: 1,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.n_modules < 2 || self.n_genes < self.n_modules {
            return bad(format!(
                "need n_genes ≥ n_modules ≥ 2, got {} genes and {} modules",
                self.n_genes, self.n_modules
            ));
        }
        if self.samples < 10 {
            return bad(format!("need at least 10 samples, got {}", self.samples));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be finite and non-negative, got {}", self.sigma));
        }
        if !(0.0..=1.0).contains(&self.p_corrupt) {
            return bad(format!("p_corrupt must lie in [0, 1], got {}", self.p_corrupt));
        }
        let (lo, hi) = self.loading;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return bad(format!("invalid loading range [{lo}, {hi}]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub expr: ExpressionMatrix,
    pub truth: ModuleSet,
    /// `(regulator, target)` pairs.
    pub edges: Vec<(GeneId, GeneId)>,
    pub priors: PriorClusterSet,
}

fn gene_name(i: usize, n: usize) -> String {
    let width = n.to_string().len();
    format!("G{:0width$}", i + 1)
}

/// Generates a benchmark; identical configs give identical output.
pub fn generate_benchmark(cfg: &BenchConfig) -> Result<Benchmark> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (n, k, m) = (cfg.n_genes, cfg.n_modules, cfg.samples);

    // contiguous, near-equal module blocks
    let module_of: Vec<usize> = (0..n).map(|i| i * k / n).collect();
    let genes: Vec<GeneId> = (0..n).map(|i| GeneId::new(gene_name(i, n))).collect::<Result<_>>()?;

    let latent: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..m).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let (lo, hi) = cfg.loading;
    let noise = Normal::new(0.0, cfg.sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut values = Vec::with_capacity(n * m);
    for &module in &module_of {
        let loading = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        for &z in &latent[module] {
            values.push(loading * z + noise.sample(&mut rng));
        }
    }
    let samples = (0..m).map(|s| format!("S{}", s + 1)).collect();
    let expr = ExpressionMatrix::new(genes.clone(), samples, values)?;

    let members = |labels: &[usize]| -> Vec<Vec<GeneId>> {
        let mut groups = vec![Vec::new(); k];
        for (i, &l) in labels.iter().enumerate() {
            groups[l].push(genes[i].clone());
        }
        groups
    };

    let truth_groups = members(&module_of);
    let truth = ModuleSet::new(
        truth_groups
            .iter()
            .enumerate()
            .map(|(j, g)| Module {
                id: format!("module_{}", j + 1),
                genes: g.clone(),
            })
            .collect(),
        false,
    )?;
    let edges = truth_groups
        .iter()
        .enumerate()
        .flat_map(|(j, g)| {
            let reg = GeneId::new(format!("R{}", j + 1)).expect("valid regulator id");
            g.iter().map(move |t| (reg.clone(), t.clone()))
        })
        .collect();

    // shuffle the labels of a random subset of genes
    let mut corrupted = module_of.clone();
    let n_swap = (cfg.p_corrupt * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let chosen = &order[..n_swap];
    let mut labels: Vec<usize> = chosen.iter().map(|&i| module_of[i]).collect();
    labels.shuffle(&mut rng);
    for (&i, l) in chosen.iter().zip(labels) {
        corrupted[i] = l;
    }
    let priors = PriorClusterSet::from_modules(&ModuleSet::new(
        members(&corrupted)
            .into_iter()
            .enumerate()
            .filter(|(_, g)| !g.is_empty())
            .map(|(j, g)| Module {
                id: format!("prior_{}", j + 1),
                genes: g,
            })
            .collect(),
        true,
    )?);
    debug_assert!(priors.clusters().iter().all(|c: &PriorCluster| c.genes.len() >= 2));

    Ok(Benchmark {
        expr,
        truth,
        edges,
        priors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corrmat::pearson;
    use crate::evalkit::strict_modules;

    #[test]
    fn noiseless_modules_are_perfectly_correlated() {
        let cfg = BenchConfig {
            n_genes: 12,
            n_modules: 3,
            samples: 10,
            sigma: 0.0,
            ..Default::default()
        };
        let b = generate_benchmark(&cfg).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                if i * 3 / 12 == j * 3 / 12 {
                    let r = pearson(b.expr.row(i), b.expr.row(j)).unwrap();
                    assert!((r.abs() - 1.0).abs() < 1e-12);
                }
            }
        }
        assert_eq!(b.priors.to_modules().modules().len(), 3);
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = BenchConfig {
            p_corrupt: 0.3,
            ..Default::default()
        };
        let a = generate_benchmark(&cfg).unwrap();
        let b = generate_benchmark(&cfg).unwrap();
        assert_eq!(a, b);
        let c = generate_benchmark(&BenchConfig { seed: 2, ..cfg }).unwrap();
        assert_ne!(a.expr, c.expr);
    }

    #[test]
    fn truth_matches_strict_gold() {
        let b = generate_benchmark(&BenchConfig::default()).unwrap();
        let strict = strict_modules(&b.edges).unwrap();
        assert!(strict.same_partition(&b.truth));
    }

    #[test]
    fn full_corruption_halves_overlap() {
        let mut total = 0.0;
        let seeds = 100;
        for seed in 0..seeds {
            let cfg = BenchConfig {
                n_genes: 40,
                n_modules: 2,
                samples: 10,
                p_corrupt: 1.0,
                seed,
                ..Default::default()
            };
            let b = generate_benchmark(&cfg).unwrap();
            for (prior, truth) in b.priors.clusters().iter().zip(b.truth.modules()) {
                let shared = prior.genes.iter().filter(|g| truth.genes.contains(g)).count();
                total += shared as f64 / truth.genes.len() as f64;
            }
        }
        let mean = total / (2 * seeds) as f64;
        assert!((mean - 0.5).abs() <= 0.1, "{mean}");
    }

    #[test]
    fn rejects_bad_config() {
        assert!(generate_benchmark(&BenchConfig {
            n_modules: 1,
            ..Default::default()
        })
        .is_err());
        assert!(generate_benchmark(&BenchConfig {
            samples: 5,
            ..Default::default()
        })
        .is_err());
        assert!(generate_benchmark(&BenchConfig {
            p_corrupt: 1.5,
            ..Default::default()
        })
        .is_err());
        assert!(generate_benchmark(&BenchConfig {
            sigma: -1.0,
            ..Default::default()
        })
        .is_err());
    }
}
