//! Network deconvolution.
//!
//! An observed matrix is modelled as the sum of all walks over a direct
//! matrix, `obs = dir + dir² + dir³ + … = dir (I − dir)⁻¹`, which inverts to
//! `dir = obs (I + obs)⁻¹`. Both maps act on eigenvalues only
//! (`λ ↦ λ/(1−λ)` and `λ ↦ λ/(1+λ)`), so they are evaluated through one
//! symmetric eigendecomposition.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::types::{CorrelationMatrix, GeneId, MatrixMeta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scaling {
    /// Shrink the observed spectrum so every direct eigenvalue has magnitude ≤ delta.
    #[default]
    Auto,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeconvConfig {
    pub delta: f64,
    pub scaling: Scaling,
    pub rescale_output: bool,
}

impl Default for DeconvConfig {
    fn default() -> Self {
        DeconvConfig {
            delta: 0.95,
            scaling: Scaling::Auto,
            rescale_output: true,
        }
    }
}

impl DeconvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

/// Result of [`deconvolve`]: a valid correlation matrix when output
/// rescaling is on, the raw direct matrix otherwise.
#[derive(Debug, Clone, PartialEq)]
pub enum DeconvOutput {
    Correlation(CorrelationMatrix),
    Raw {
        genes: Vec<GeneId>,
        values: DMatrix<f64>,
        meta: MatrixMeta,
    },
}

impl DeconvOutput {
    pub fn values(&self) -> &DMatrix<f64> {
        match self {
            DeconvOutput::Correlation(c) => c.values(),
            DeconvOutput::Raw { values, .. } => values,
        }
    }

    pub fn into_correlation(self) -> Option<CorrelationMatrix> {
        match self {
            DeconvOutput::Correlation(c) => Some(c),
            DeconvOutput::Raw { .. } => None,
        }
    }
}

fn eigen(w: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let max_iter = 1000 * w.nrows().max(1);
    w.clone()
        .try_symmetric_eigen(f64::EPSILON, max_iter)
        .ok_or(Error::NonConvergentEigensolve)
}

fn recompose(e: &SymmetricEigen<f64, nalgebra::Dyn>, mapped: DVector<f64>) -> DMatrix<f64> {
    let u = &e.eigenvectors;
    let mut out = u * DMatrix::from_diagonal(&mapped) * u.transpose();
    let n = out.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

fn check_square(w: &DMatrix<f64>) -> Result<()> {
    if w.nrows() != w.ncols() {
        return Err(Error::Shape(format!(
            "matrix is {}×{}, not square",
            w.nrows(),
            w.ncols()
        )));
    }
    Ok(())
}

/// Largest `α ∈ (0, 1]` with `|αλ/(1+αλ)| ≤ delta` for every eigenvalue in
/// `[lambda_min, lambda_max]`.
pub fn auto_scale(lambda_min: f64, lambda_max: f64, delta: f64) -> f64 {
    let mut alpha = 1.0f64;
    if lambda_max > 0.0 {
        alpha = alpha.min(delta / ((1.0 - delta) * lambda_max));
    }
    if lambda_min < 0.0 {
        alpha = alpha.min(delta / ((1.0 + delta) * -lambda_min));
    }
    alpha
}

/// Applies `W ↦ αW (I + αW)⁻¹` to a symmetric matrix as given, diagonal included.
pub fn deconvolve_matrix(w: &DMatrix<f64>, scaling: Scaling, delta: f64) -> Result<DMatrix<f64>> {
    check_square(w)?;
    let e = eigen(w)?;
    let lmin = e.eigenvalues.iter().copied().fold(0.0f64, f64::min);
    let lmax = e.eigenvalues.iter().copied().fold(0.0f64, f64::max);
    let alpha = match scaling {
        Scaling::Auto => auto_scale(lmin, lmax, delta),
        Scaling::None => {
            if let Some(&l) = e.eigenvalues.iter().find(|&&l| (1.0 + l).abs() <= 1e-12) {
                return Err(Error::SingularShift(l));
            }
            1.0
        }
    };
    let mapped = e.eigenvalues.map(|l| {
        let s = alpha * l;
        s / (1.0 + s)
    });
    Ok(recompose(&e, mapped))
}

/// Deconvolves an observed correlation matrix.
///
/// The diagonal is zeroed before the spectral map. With `rescale_output`
/// the off-diagonals are min-max rescaled to `[0, 1]` and the diagonal is
/// restored to 1.
pub fn deconvolve(d_obs: &CorrelationMatrix, cfg: &DeconvConfig) -> Result<DeconvOutput> {
    cfg.validate()?;
    let mut w = d_obs.values().clone();
    w.fill_diagonal(0.0);
    let raw = deconvolve_matrix(&w, cfg.scaling, cfg.delta)?;
    let meta = MatrixMeta {
        deconvolved: true,
        ..d_obs.meta()
    };
    if !cfg.rescale_output {
        return Ok(DeconvOutput::Raw {
            genes: d_obs.genes().to_vec(),
            values: raw,
            meta,
        });
    }
    Ok(DeconvOutput::Correlation(CorrelationMatrix::new(
        d_obs.genes().to_vec(),
        rescale_off_diagonal(raw),
        meta,
    )?))
}

/// Min-max rescales the off-diagonal entries to `[0, 1]` and sets the
/// diagonal to 1. A constant off-diagonal is clamped into `[0, 1]` instead.
pub fn rescale_off_diagonal(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        for j in (i + 1)..n {
            lo = lo.min(m[(i, j)]);
            hi = hi.max(m[(i, j)]);
        }
    }
    let span = hi - lo;
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = if i == j {
                1.0
            } else if span > 0.0 {
                ((m[(i, j)] - lo) / span).clamp(0.0, 1.0)
            } else {
                m[(i, j)].clamp(0.0, 1.0)
            };
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvolveOrder {
    /// `dir (I − dir)⁻¹`.
    ClosedForm,
    /// `Σ_{k=1..order} dirᵏ`.
    Terms(usize),
}

/// Adds all indirect paths to a direct matrix. Requires spectral radius < 1.
pub fn convolve(d_dir: &DMatrix<f64>, order: ConvolveOrder) -> Result<DMatrix<f64>> {
    check_square(d_dir)?;
    let e = eigen(d_dir)?;
    let radius = e.eigenvalues.iter().fold(0.0f64, |r, l| r.max(l.abs()));
    if radius >= 1.0 {
        return Err(Error::SpectralRadiusTooLarge(radius));
    }
    match order {
        ConvolveOrder::ClosedForm => Ok(recompose(&e, e.eigenvalues.map(|l| l / (1.0 - l)))),
        ConvolveOrder::Terms(k) => {
            let n = d_dir.nrows();
            let mut sum = DMatrix::zeros(n, n);
            let mut power = DMatrix::identity(n, n);
            for _ in 0..k {
                power = &power * d_dir;
                sum += &power;
            }
            Ok(sum)
        }
    }
}

/// Largest eigenvalue magnitude of a symmetric matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    check_square(m)?;
    Ok(eigen(m)?.eigenvalues.iter().fold(0.0f64, |r, l| r.max(l.abs())))
}
