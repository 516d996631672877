//! Observed correlation matrices: Pearson, distance correlation and three
//! binned mutual-information estimators, all standardized to `[0, 1]`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::types::{CorrelationMatrix, ExpressionMatrix, MatrixMeta, Metric};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Discretization {
    EqualWidth,
    #[default]
    EqualFrequency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Bins {
    /// `⌈√m⌉` bins for `m` samples.
    #[default]
    Auto,
    Fixed(usize),
}

impl Bins {
    pub fn resolve(self, m: usize) -> usize {
        match self {
            Bins::Auto => ((m as f64).sqrt().ceil() as usize).max(2),
            Bins::Fixed(b) => b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MiEstimator {
    /// Plug-in (empirical) entropy.
    Empirical,
    /// Plug-in plus the Miller–Madow bias correction.
    MillerMadow,
    /// James–Stein shrinkage toward the uniform cell distribution.
    Shrink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetricConfig {
    pub metric: Metric,
    pub discretization: Discretization,
    pub bins: Bins,
}

impl MetricConfig {
    pub fn new(metric: Metric) -> Self {
        MetricConfig {
            metric,
            discretization: Discretization::default(),
            bins: Bins::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Bins::Fixed(b) = self.bins {
            if b < 2 {
                return Err(Error::InvalidParameter(format!("bins must be at least 2, got {b}")));
            }
        }
        Ok(())
    }
}

fn estimator_for(metric: Metric) -> Option<MiEstimator> {
    match metric {
        Metric::Mi1 => Some(MiEstimator::Empirical),
        Metric::Mi2 => Some(MiEstimator::MillerMadow),
        Metric::Mi3 => Some(MiEstimator::Shrink),
        Metric::Pcc | Metric::Dcc => None,
    }
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(Error::Shape(format!("need at least 3 samples, got {}", x.len())));
    }
    Ok(())
}

fn is_constant(x: &[f64]) -> bool {
    x.iter().all(|&v| v == x[0])
}

fn centered(x: &[f64]) -> Vec<f64> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - mean).collect()
}

/// Product-moment correlation in `[-1, 1]`.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    if is_constant(x) || is_constant(y) {
        return Err(Error::ConstantProfile { gene: None });
    }
    let (cx, cy) = (centered(x), centered(y));
    Ok(pearson_centered(&cx, &cy))
}

fn pearson_centered(cx: &[f64], cy: &[f64]) -> f64 {
    let sxy: f64 = cx.iter().zip(cy).map(|(a, b)| a * b).sum();
    let sxx: f64 = cx.iter().map(|a| a * a).sum();
    let syy: f64 = cy.iter().map(|b| b * b).sum();
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Double-centered pairwise distance matrix, upper triangle including the
/// diagonal, row-major.
fn centered_distances(x: &[f64]) -> Vec<f64> {
    let m = x.len();
    let mut d = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            d[i * m + j] = (x[i] - x[j]).abs();
        }
    }
    let row_means: Vec<f64> = (0..m)
        .map(|i| d[i * m..(i + 1) * m].iter().sum::<f64>() / m as f64)
        .collect();
    let grand = row_means.iter().sum::<f64>() / m as f64;
    let mut out = Vec::with_capacity(m * (m + 1) / 2);
    for i in 0..m {
        for j in i..m {
            out.push(d[i * m + j] - row_means[i] - row_means[j] + grand);
        }
    }
    out
}

/// `Σ_ij A_ij B_ij` from upper-triangle storage.
fn centered_inner(a: &[f64], b: &[f64], m: usize) -> f64 {
    let mut diag = 0.0;
    let mut off = 0.0;
    let mut k = 0;
    for i in 0..m {
        diag += a[k] * b[k];
        k += 1;
        for _ in (i + 1)..m {
            off += a[k] * b[k];
            k += 1;
        }
    }
    diag + 2.0 * off
}

fn dcor_from_centered(a: &[f64], b: &[f64], va: f64, vb: f64, m: usize) -> f64 {
    let vab = centered_inner(a, b, m).max(0.0);
    let denom = (va * vb).sqrt();
    (vab / denom).sqrt().clamp(0.0, 1.0)
}

/// Distance correlation (Székely–Rizzo–Bakirov) in `[0, 1]`.
pub fn distance_correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let m = x.len();
    let (a, b) = (centered_distances(x), centered_distances(y));
    let (va, vb) = (centered_inner(&a, &a, m), centered_inner(&b, &b, m));
    if va <= 0.0 || vb <= 0.0 {
        return Err(Error::ConstantProfile { gene: None });
    }
    Ok(dcor_from_centered(&a, &b, va, vb, m))
}

/// Bins a profile into integer labels `0..bins`.
///
/// Equal-width bins split `[min, max]` evenly with the last bin closed on
/// the right. Equal-frequency bins assign consecutive rank blocks of size
/// `⌈m / bins⌉`, ranking ties by original position.
pub fn discretize(x: &[f64], scheme: Discretization, bins: usize) -> Vec<usize> {
    let m = x.len();
    if m == 0 {
        return Vec::new();
    }
    let bins = bins.max(1);
    match scheme {
        Discretization::EqualWidth => {
            let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
            if hi <= lo {
                return vec![0; m];
            }
            x.iter()
                .map(|&v| {
                    let pos = (v - lo) / (hi - lo) * bins as f64;
                    (pos.floor() as usize).min(bins - 1)
                })
                .collect()
        }
        Discretization::EqualFrequency => {
            if is_constant(x) {
                return vec![0; m];
            }
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
            let block = m.div_ceil(bins);
            let mut labels = vec![0; m];
            for (rank, &idx) in order.iter().enumerate() {
                labels[idx] = rank / block;
            }
            labels
        }
    }
}

/// Occupied cell counts sorted ascending, plus the total cell count.
struct CellCounts {
    counts: Vec<u64>,
    cells: usize,
    samples: u64,
}

fn marginal_counts(labels: &[usize]) -> CellCounts {
    let k = labels.iter().max().map_or(1, |&v| v + 1);
    let mut c = vec![0u64; k];
    for &l in labels {
        c[l] += 1;
    }
    let mut counts: Vec<u64> = c.into_iter().filter(|&v| v > 0).collect();
    counts.sort_unstable();
    CellCounts {
        counts,
        cells: k,
        samples: labels.len() as u64,
    }
}

fn joint_counts(xb: &[usize], yb: &[usize]) -> CellCounts {
    let kx = xb.iter().max().map_or(1, |&v| v + 1);
    let ky = yb.iter().max().map_or(1, |&v| v + 1);
    let mut c = std::collections::HashMap::new();
    for (&a, &b) in xb.iter().zip(yb) {
        *c.entry((a, b)).or_insert(0u64) += 1;
    }
    let mut counts: Vec<u64> = c.into_values().collect();
    counts.sort_unstable();
    CellCounts {
        counts,
        cells: kx * ky,
        samples: xb.len() as u64,
    }
}

fn plugin_entropy(counts: &[u64], n: f64) -> f64 {
    counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

fn estimate_entropy(cc: &CellCounts, est: MiEstimator) -> f64 {
    let n = cc.samples as f64;
    if cc.samples == 0 {
        return 0.0;
    }
    match est {
        MiEstimator::Empirical => plugin_entropy(&cc.counts, n),
        MiEstimator::MillerMadow => plugin_entropy(&cc.counts, n) + (cc.counts.len() as f64 - 1.0) / (2.0 * n),
        MiEstimator::Shrink => {
            let k = cc.cells as f64;
            let target = 1.0 / k;
            let empty = (cc.cells - cc.counts.len()) as f64;
            let sum_u2: f64 = cc.counts.iter().map(|&c| (c as f64 / n).powi(2)).sum();
            let msp: f64 =
                cc.counts.iter().map(|&c| (target - c as f64 / n).powi(2)).sum::<f64>() + empty * target * target;
            let lambda = if cc.samples < 2 || msp == 0.0 {
                1.0
            } else {
                ((1.0 - sum_u2) / ((n - 1.0) * msp)).clamp(0.0, 1.0)
            };
            let shrunk = |u: f64| lambda * target + (1.0 - lambda) * u;
            let mut h: f64 = cc
                .counts
                .iter()
                .map(|&c| {
                    let p = shrunk(c as f64 / n);
                    -p * p.ln()
                })
                .sum();
            let p0 = shrunk(0.0);
            if p0 > 0.0 {
                h += -empty * p0 * p0.ln();
            }
            h
        }
    }
}

/// Entropy (nats) of a label sequence under the given estimator.
pub fn entropy(labels: &[usize], est: MiEstimator) -> f64 {
    estimate_entropy(&marginal_counts(labels), est)
}

/// Mutual information in nats, `Ĥ(X) + Ĥ(Y) − Ĥ(X,Y)`, clamped at zero.
pub fn mutual_information(xb: &[usize], yb: &[usize], est: MiEstimator) -> Result<f64> {
    if xb.len() != yb.len() {
        return Err(Error::LengthMismatch(xb.len(), yb.len()));
    }
    let hx = entropy(xb, est);
    let hy = entropy(yb, est);
    let hxy = estimate_entropy(&joint_counts(xb, yb), est);
    Ok((hx + hy - hxy).max(0.0))
}

/// Mutual information divided by `√(Ĥ(X)·Ĥ(Y))`, clamped to `[0, 1]`.
pub fn normalized_mutual_information(xb: &[usize], yb: &[usize], est: MiEstimator) -> Result<f64> {
    let mi = mutual_information(xb, yb, est)?;
    let denom = (entropy(xb, est) * entropy(yb, est)).sqrt();
    if denom <= 0.0 {
        return Ok(0.0);
    }
    Ok((mi / denom).clamp(0.0, 1.0))
}

enum Prepared {
    Pcc(Vec<Vec<f64>>),
    Dcc { centered: Vec<Vec<f64>>, dvar: Vec<f64> },
    DccUncached,
    Mi { labels: Vec<Vec<usize>>, est: MiEstimator },
}

/// Budget (in f64 entries) for caching double-centered distance matrices.
const DCC_CACHE_LIMIT: usize = 1 << 26;

/// Builds the standardized observed correlation matrix of an expression table.
///
/// PCC is standardized by absolute value, distance correlation is used as
/// is, and MI is normalized by the geometric mean of the marginal entropies.
pub fn build_correlation_matrix(expr: &ExpressionMatrix, cfg: &MetricConfig) -> Result<CorrelationMatrix> {
    cfg.validate()?;
    let n = expr.n_genes();
    let m = expr.n_samples();
    for i in 0..n {
        if is_constant(expr.row(i)) {
            return Err(Error::ConstantProfile {
                gene: Some(expr.genes()[i].to_string()),
            });
        }
    }

    let prepared = match cfg.metric {
        Metric::Pcc => Prepared::Pcc((0..n).map(|i| centered(expr.row(i))).collect()),
        Metric::Dcc if n * m * (m + 1) / 2 <= DCC_CACHE_LIMIT => {
            let centered: Vec<Vec<f64>> = (0..n)
                .into_par_iter()
                .map(|i| centered_distances(expr.row(i)))
                .collect();
            let dvar = centered.iter().map(|a| centered_inner(a, a, m)).collect();
            Prepared::Dcc { centered, dvar }
        }
        Metric::Dcc => Prepared::DccUncached,
        metric => {
            let bins = cfg.bins.resolve(m);
            Prepared::Mi {
                labels: (0..n)
                    .map(|i| discretize(expr.row(i), cfg.discretization, bins))
                    .collect(),
                est: estimator_for(metric).expect("MI metric"),
            }
        }
    };

    let pair = |i: usize, j: usize| -> Result<f64> {
        match &prepared {
            Prepared::Pcc(c) => Ok(pearson_centered(&c[i], &c[j]).abs()),
            Prepared::Dcc { centered, dvar } => Ok(dcor_from_centered(&centered[i], &centered[j], dvar[i], dvar[j], m)),
            Prepared::Mi { labels, est } => normalized_mutual_information(&labels[i], &labels[j], *est),
            Prepared::DccUncached => distance_correlation(expr.row(i), expr.row(j)),
        }
    };

    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| ((i + 1)..n).map(|j| pair(i, j)).collect::<Result<Vec<f64>>>())
        .collect::<Result<_>>()?;

    let mut values = DMatrix::from_element(n, n, 1.0);
    for (i, row) in rows.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + 1 + off;
            values[(i, j)] = v;
            values[(j, i)] = v;
        }
    }
    CorrelationMatrix::new(
        expr.genes().to_vec(),
        values,
        MatrixMeta {
            metric: Some(cfg.metric),
            supervised: false,
            deconvolved: false,
        },
    )
}
