use modclust::corrmat::{build_correlation_matrix, MetricConfig};
use modclust::deconv::{deconvolve, DeconvConfig};
use modclust::hac::{cut, single_linkage};
use modclust::priors::{incorporate_global, RhoPolicy};
use modclust::{
    CorrelationMatrix, ErrorKind, ExpressionMatrix, GeneId, MatrixMeta, Metric, PriorCluster, PriorClusterSet,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

const METRICS: [Metric; 5] = [Metric::Pcc, Metric::Dcc, Metric::Mi1, Metric::Mi2, Metric::Mi3];

fn ids(n: usize) -> Vec<GeneId> {
    (0..n).map(|i| GeneId::new(format!("g{i}")).unwrap()).collect()
}

fn expression() -> impl Strategy<Value = ExpressionMatrix> {
    (3usize..8, 6usize..16).prop_flat_map(|(n, m)| {
        prop::collection::vec(-10.0f64..10.0, n * m).prop_map(move |mut v| {
            // a sample-index trend keeps every profile non-constant
            for g in 0..n {
                for s in 0..m {
                    v[g * m + s] += 1e-3 * ((g + 1) * s) as f64;
                }
            }
            let samples = (0..m).map(|s| format!("s{s}")).collect();
            ExpressionMatrix::new(ids(n), samples, v).unwrap()
        })
    })
}

fn correlation() -> impl Strategy<Value = CorrelationMatrix> {
    (3usize..12).prop_flat_map(|n| {
        prop::collection::vec(0.0f64..1.0, n * (n - 1) / 2).prop_map(move |upper| {
            let mut m = DMatrix::identity(n, n);
            let mut k = 0;
            for i in 0..n {
                for j in i + 1..n {
                    m[(i, j)] = upper[k];
                    m[(j, i)] = upper[k];
                    k += 1;
                }
            }
            CorrelationMatrix::new(ids(n), m, MatrixMeta::default()).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn every_metric_is_a_valid_symmetric_similarity(expr in expression()) {
        for metric in METRICS {
            let d = build_correlation_matrix(&expr, &MetricConfig::new(metric)).unwrap();
            for i in 0..d.n() {
                prop_assert_eq!(d.get(i, i), 1.0);
                for j in 0..d.n() {
                    prop_assert_eq!(d.get(i, j).to_bits(), d.get(j, i).to_bits());
                    prop_assert!((0.0..=1.0).contains(&d.get(i, j)));
                }
            }
        }
    }

    #[test]
    fn metrics_are_equivariant_under_gene_permutation(expr in expression(), seed in any::<u64>()) {
        let n = expr.n_genes();
        let m = expr.n_samples();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.sort_by_key(|&i| (seed.rotate_left(i as u32 * 7) ^ i as u64, i));
        let genes = perm.iter().map(|&p| expr.genes()[p].clone()).collect();
        let values = perm.iter().flat_map(|&p| expr.row(p).to_vec()).collect();
        let shuffled = ExpressionMatrix::new(genes, expr.samples().to_vec(), values).unwrap();
        prop_assert_eq!(shuffled.n_samples(), m);
        for metric in METRICS {
            let cfg = MetricConfig::new(metric);
            let a = build_correlation_matrix(&expr, &cfg).unwrap();
            let b = build_correlation_matrix(&shuffled, &cfg).unwrap();
            for i in 0..n {
                for j in 0..n {
                    prop_assert_eq!(b.get(i, j).to_bits(), a.get(perm[i], perm[j]).to_bits());
                }
            }
        }
    }

    #[test]
    fn supervision_only_raises_entries_and_less_reliable_priors_raise_less(
        d in correlation(),
        lo in 0.0f64..1.0,
        hi in 0.0f64..1.0,
    ) {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        let n = d.n();
        let priors = PriorClusterSet::new(vec![
            PriorCluster { name: "p1".into(), genes: ids(n)[..n / 2 + 1].to_vec() },
            PriorCluster { name: "p2".into(), genes: ids(n)[n / 2..].to_vec() },
        ])
        .unwrap();
        let strong = incorporate_global(&d, &priors, RhoPolicy::Fixed(lo)).unwrap();
        let weak = incorporate_global(&d, &priors, RhoPolicy::Fixed(hi)).unwrap();
        let off = incorporate_global(&d, &priors, RhoPolicy::Off).unwrap();
        for i in 0..n {
            for j in 0..n {
                prop_assert!(weak.get(i, j) >= d.get(i, j));
                prop_assert!(strong.get(i, j) >= weak.get(i, j));
                prop_assert_eq!(off.get(i, j), d.get(i, j));
            }
        }
    }

    #[test]
    fn cuts_are_nested_and_cover_all_genes(d in correlation(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let t = single_linkage(&d).unwrap();
        let coarse = cut(&t, lo).unwrap();
        let fine = cut(&t, hi).unwrap();
        prop_assert_eq!(coarse.genes().len(), d.n());
        prop_assert_eq!(fine.genes().len(), d.n());
        prop_assert!(fine.len() >= coarse.len());
        for m in fine.modules() {
            let holder = coarse.modules().iter().filter(|c| c.genes.contains(&m.genes[0])).count();
            prop_assert_eq!(holder, 1);
            let c = coarse.modules().iter().find(|c| c.genes.contains(&m.genes[0])).unwrap();
            prop_assert!(m.genes.iter().all(|g| c.genes.contains(g)));
        }
    }

    #[test]
    fn rescaled_deconvolution_is_a_correlation_matrix(d in correlation(), delta in 0.05f64..0.99) {
        let cfg = DeconvConfig { delta, ..Default::default() };
        match deconvolve(&d, &cfg) {
            Ok(out) => {
                let c = out.into_correlation().unwrap();
                prop_assert_eq!(c.n(), d.n());
                prop_assert!(c.meta().deconvolved);
            }
            Err(e) => prop_assert_eq!(e.kind(), ErrorKind::Numeric),
        }
    }
}
