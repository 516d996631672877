//! C interface to `modclust`.
//!
//! Objects are opaque handles created by `mc_*_new`/`mc_*_read`/`mc_*_build`
//! functions and released with the matching `mc_*_free`. Every fallible call
//! returns an [`McStatus`]; on failure, [`mc_last_error`] describes the error
//! for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use modclust::corrmat::{build_correlation_matrix, MetricConfig};
use modclust::deconv::{deconvolve, DeconvConfig};
use modclust::evalkit::{pair_confusion, precision_recall_f};
use modclust::hac::{cut, single_linkage};
use modclust::pipeline::sweep_auc;
use modclust::priors::{incorporate_global, RhoPolicy};
use modclust::{
    io, CorrelationMatrix, Dendrogram, Error, ErrorKind, ExpressionMatrix, GeneId, Metric, ModuleSet, PriorClusterSet,
};

/// Status codes; the non-zero input/numeric/evaluation codes match the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McStatus {
    Ok = 0,
    InputError = 2,
    NumericError = 3,
    DegenerateEvaluation = 4,
    NullArgument = 10,
    InvalidUtf8 = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McMetric {
    Pcc = 0,
    Dcc = 1,
    Mi1 = 2,
    Mi2 = 3,
    Mi3 = 4,
}

/// Pairwise confusion counts and scores.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct McScores {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

pub struct McExpression(ExpressionMatrix);
pub struct McCorrelation(CorrelationMatrix);
pub struct McDendrogram(Dendrogram);
pub struct McModules(ModuleSet);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(McStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.kind() {
            ErrorKind::Input => McStatus::InputError,
            ErrorKind::Numeric => McStatus::NumericError,
            ErrorKind::DegenerateEvaluation => McStatus::DegenerateEvaluation,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> McStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => McStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            McStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(McStatus::NullArgument, format!("{what} is null"))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(McStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn path(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    text(p, what).map(PathBuf::from)
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn release<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message for the last failed call on this thread, or NULL.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

// ---------------------------------------------------------------- expression

/// Reads an expression table (genes as rows unless `samples_as_rows`).
///
/// # Safety
/// `file` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mc_expression_read(
    file: *const c_char,
    samples_as_rows: bool,
    out: *mut *mut McExpression,
) -> McStatus {
    guard(|| {
        let e = io::read_expression(&path(file, "file")?, samples_as_rows)?;
        put(out, McExpression(e))
    })
}

/// Builds an expression matrix from gene-major values (`n_genes · n_samples`
/// doubles). Samples are named `S1`, `S2`, ...
///
/// # Safety
/// `genes` must point to `n_genes` NUL-terminated strings and `values` to
/// `n_genes · n_samples` doubles.
#[no_mangle]
pub unsafe extern "C" fn mc_expression_new(
    genes: *const *const c_char,
    n_genes: usize,
    values: *const f64,
    n_samples: usize,
    out: *mut *mut McExpression,
) -> McStatus {
    guard(|| {
        if genes.is_null() {
            return Err(null("genes"));
        }
        if values.is_null() {
            return Err(null("values"));
        }
        let ids = (0..n_genes)
            .map(|i| Ok(GeneId::new(text(*genes.add(i), "gene id")?)?))
            .collect::<Result<Vec<_>, Failure>>()?;
        let vals = std::slice::from_raw_parts(values, n_genes * n_samples).to_vec();
        let samples = (1..=n_samples).map(|s| format!("S{s}")).collect();
        put(out, McExpression(ExpressionMatrix::new(ids, samples, vals)?))
    })
}

/// # Safety
/// `expr` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mc_expression_free(expr: *mut McExpression) {
    release(expr)
}

/// # Safety
/// `expr` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mc_expression_n_genes(expr: *const McExpression) -> usize {
    expr.as_ref().map_or(0, |e| e.0.n_genes())
}

// --------------------------------------------------------------- correlation

/// Observed correlation matrix with default discretization and bins.
///
/// # Safety
/// `expr` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mc_correlation_build(
    expr: *const McExpression,
    metric: McMetric,
    out: *mut *mut McCorrelation,
) -> McStatus {
    guard(|| {
        let e = borrow(expr, "expr")?;
        let metric = match metric {
            McMetric::Pcc => Metric::Pcc,
            McMetric::Dcc => Metric::Dcc,
            McMetric::Mi1 => Metric::Mi1,
            McMetric::Mi2 => Metric::Mi2,
            McMetric::Mi3 => Metric::Mi3,
        };
        put(
            out,
            McCorrelation(build_correlation_matrix(&e.0, &MetricConfig::new(metric))?),
        )
    })
}

/// # Safety
/// `file` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mc_correlation_read(file: *const c_char, out: *mut *mut McCorrelation) -> McStatus {
    guard(|| put(out, McCorrelation(io::read_correlation(&path(file, "file")?)?)))
}

/// # Safety
/// `corr` must be a live handle; `file` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mc_correlation_write(corr: *const McCorrelation, file: *const c_char) -> McStatus {
    guard(|| {
        let c = borrow(corr, "corr")?;
        Ok(io::write_file(&path(file, "file")?, &io::format_correlation(&c.0))?)
    })
}

/// # Safety
/// `corr` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mc_correlation_free(corr: *mut McCorrelation) {
    release(corr)
}

/// # Safety
/// `corr` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mc_correlation_n(corr: *const McCorrelation) -> usize {
    corr.as_ref().map_or(0, |c| c.0.n())
}

/// # Safety
/// `corr` must be a live handle; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mc_correlation_get(
    corr: *const McCorrelation,
    i: usize,
    j: usize,
    value: *mut f64,
) -> McStatus {
    guard(|| {
        let c = borrow(corr, "corr")?;
        let n = c.0.n();
        if i >= n || j >= n {
            return Err(Failure(
                McStatus::InputError,
                format!("index ({i}, {j}) outside {n}×{n} matrix"),
            ));
        }
        if value.is_null() {
            return Err(null("value"));
        }
        *value = c.0.get(i, j);
        Ok(())
    })
}

/// Global prior incorporation. `rho_hat` in [0, 1]: 0 trusts the priors
/// fully, 1 leaves the matrix unchanged.
///
/// # Safety
/// `corr` and `priors` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mc_correlation_supervise(
    corr: *const McCorrelation,
    priors: *const McModules,
    rho_hat: f64,
    out: *mut *mut McCorrelation,
) -> McStatus {
    guard(|| {
        let c = borrow(corr, "corr")?;
        let p = PriorClusterSet::from_modules(&borrow(priors, "priors")?.0);
        let rho = RhoPolicy::Fixed(rho_hat);
        rho.validate()?;
        put(out, McCorrelation(incorporate_global(&c.0, &p, rho)?))
    })
}

/// Deconvolution with automatic scaling and rescaled output.
///
/// # Safety
/// `corr` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mc_correlation_deconvolve(
    corr: *const McCorrelation,
    delta: f64,
    out: *mut *mut McCorrelation,
) -> McStatus {
    guard(|| {
        let c = borrow(corr, "corr")?;
        let cfg = DeconvConfig {
            delta,
            ..Default::default()
        };
        cfg.validate()?;
        let d = deconvolve(&c.0, &cfg)?
            .into_correlation()
            .expect("rescaled output is a correlation matrix");
        put(out, McCorrelation(d))
    })
}

// ---------------------------------------------------------------- clustering

/// # Safety
/// `corr` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mc_single_linkage(corr: *const McCorrelation, out: *mut *mut McDendrogram) -> McStatus {
    guard(|| put(out, McDendrogram(single_linkage(&borrow(corr, "corr")?.0)?)))
}

/// # Safety
/// `tree` must be a live handle; `file` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mc_dendrogram_write(tree: *const McDendrogram, file: *const c_char) -> McStatus {
    guard(|| {
        let t = borrow(tree, "tree")?;
        Ok(io::write_file(&path(file, "file")?, &io::format_dendrogram(&t.0))?)
    })
}

/// # Safety
/// `tree` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mc_dendrogram_free(tree: *mut McDendrogram) {
    release(tree)
}

/// Flat modules at similarity threshold `epsilon`.
///
/// # Safety
/// `tree` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mc_cut(tree: *const McDendrogram, epsilon: f64, out: *mut *mut McModules) -> McStatus {
    guard(|| put(out, McModules(cut(&borrow(tree, "tree")?.0, epsilon)?)))
}

/// AUC of the threshold sweep of `tree` against `gold`.
///
/// # Safety
/// `corr` and `gold` must be live handles; `auc` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mc_sweep_auc(
    corr: *const McCorrelation,
    step: f64,
    gold: *const McModules,
    auc: *mut f64,
) -> McStatus {
    guard(|| {
        let a = sweep_auc(&borrow(corr, "corr")?.0, step, &borrow(gold, "gold")?.0)?;
        if auc.is_null() {
            return Err(null("auc"));
        }
        *auc = a;
        Ok(())
    })
}

// ------------------------------------------------------------------- modules

/// Reads a module file (GMT-like); overlap is detected automatically.
///
/// # Safety
/// `file` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mc_modules_read(file: *const c_char, out: *mut *mut McModules) -> McStatus {
    guard(|| put(out, McModules(io::read_modules(&path(file, "file")?)?)))
}

/// # Safety
/// `modules` must be a live handle; `file` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mc_modules_write(modules: *const McModules, file: *const c_char) -> McStatus {
    guard(|| {
        let m = borrow(modules, "modules")?;
        Ok(io::write_file(&path(file, "file")?, &io::format_modules(&m.0))?)
    })
}

/// # Safety
/// `modules` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mc_modules_len(modules: *const McModules) -> usize {
    modules.as_ref().map_or(0, |m| m.0.len())
}

/// # Safety
/// `modules` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mc_modules_free(modules: *mut McModules) {
    release(modules)
}

/// Pairwise scores of `pred` against `gold`.
///
/// # Safety
/// `pred` and `gold` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mc_evaluate(pred: *const McModules, gold: *const McModules, out: *mut McScores) -> McStatus {
    guard(|| {
        let c = pair_confusion(&borrow(pred, "pred")?.0, &borrow(gold, "gold")?.0)?;
        let s = precision_recall_f(&c);
        if out.is_null() {
            return Err(null("out"));
        }
        *out = McScores {
            tp: c.tp,
            fp: c.fp,
            tn: c.tn,
            fn_: c.fn_,
            precision: s.precision,
            recall: s.recall,
            f: s.f,
        };
        Ok(())
    })
}
