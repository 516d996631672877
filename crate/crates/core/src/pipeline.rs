//! End-to-end runs: correlation, supervision, deconvolution, clustering and
//! evaluation, with every output written to one directory.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::corrmat::{build_correlation_matrix, Bins, Discretization, MetricConfig};
use crate::deconv::{deconvolve, DeconvConfig, DeconvOutput, Scaling};
use crate::error::{Error, Result};
use crate::evalkit::{auc, best_f, knee, roc};
use crate::hac::{cut, single_linkage, threshold_sweep};
use crate::io::{self, MetricsRow};
use crate::metagene::{merge_metagenes, MetageneMap};
use crate::priors::{incorporate_global, incorporate_local, IncorporationMode, RhoPolicy, SupervisionConfig};
use crate::types::{CorrelationMatrix, Dendrogram, GeneId, Metric, Module, ModuleSet, PriorClusterSet, RocCurve};

pub const DEFAULT_STEP: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub expr: PathBuf,
    pub samples_as_rows: bool,
    pub metric: MetricConfig,
    /// Prior clusters in module-file format.
    pub priors: Option<PathBuf>,
    pub supervision: SupervisionConfig,
    pub deconv: Option<DeconvConfig>,
    pub step: f64,
    /// Merge near-duplicate profiles before correlating.
    pub metagene_tau: Option<f64>,
    pub gold: Option<PathBuf>,
    /// Threshold for `modules.tsv`; the best-F threshold is used when unset.
    pub epsilon: Option<f64>,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(expr: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            expr: expr.into(),
            samples_as_rows: false,
            metric: MetricConfig::new(Metric::Pcc),
            priors: None,
            supervision: SupervisionConfig::default(),
            deconv: None,
            step: DEFAULT_STEP,
            metagene_tau: None,
            gold: None,
            epsilon: None,
            out_dir: out_dir.into(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        self.metric.validate()?;
        self.supervision.rho.validate()?;
        if let Some(d) = &self.deconv {
            d.validate()?;
            if !d.rescale_output {
                return bad("the pipeline clusters rescaled deconvolution output only".into());
            }
        }
        if !(self.step > 0.0 && self.step <= 1.0) {
            return bad(format!("step must lie in (0, 1], got {}", self.step));
        }
        if let Some(t) = self.metagene_tau {
            if !(t > 0.0 && t <= 1.0) {
                return bad(format!("tau must lie in (0, 1], got {t}"));
            }
        }
        if let Some(e) = self.epsilon {
            if !(0.0..=1.0).contains(&e) {
                return bad(format!("epsilon must lie in [0, 1], got {e}"));
            }
        }
        if self.epsilon.is_none() && self.gold.is_none() {
            return bad("modules need either an explicit epsilon or a gold standard".into());
        }
        if self.supervision.mode == IncorporationMode::Local && self.priors.is_none() {
            return bad("local incorporation needs prior clusters".into());
        }
        for p in [Some(&self.expr), self.priors.as_ref(), self.gold.as_ref()]
            .into_iter()
            .flatten()
        {
            if !p.is_file() {
                return Err(Error::Io {
                    path: p.clone(),
                    source: std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found"),
                });
            }
        }
        Ok(())
    }
}

/// Gold-standard scores of one sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub roc: RocCurve,
    pub metrics: MetricsRow,
}

/// Clustering results for one correlation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub dendrogram: Dendrogram,
    pub sweep: Vec<(f64, ModuleSet)>,
    pub epsilon: f64,
    pub modules: ModuleSet,
    pub evaluation: Option<Evaluation>,
}

/// ROC, AUC, best F and knee of a sweep.
pub fn evaluate(sweep: &[(f64, ModuleSet)], gold: &ModuleSet) -> Result<Evaluation> {
    let curve = roc(sweep, gold)?;
    let best = best_f(sweep, gold)?;
    let k = knee(&curve)?;
    let point = &curve.points()[k];
    let largest = point
        .threshold
        .and_then(|eps| sweep.iter().find(|(e, _)| *e == eps))
        .and_then(|(_, ms)| ms.largest())
        .map_or(0, |m| m.genes.len());
    let metrics = MetricsRow {
        auc: auc(&curve),
        best,
        knee_epsilon: point.threshold,
        knee_fpr: point.fpr,
        knee_tpr: point.tpr,
        knee_largest_module: largest,
    };
    Ok(Evaluation { roc: curve, metrics })
}

/// Replaces metagenes by their member genes.
fn expand(ms: &ModuleSet, map: Option<&MetageneMap>) -> ModuleSet {
    let Some(map) = map else { return ms.clone() };
    let members: HashMap<&GeneId, &[GeneId]> = map.metagenes.iter().map(|m| (&m.id, m.members.as_slice())).collect();
    let modules = ms
        .modules()
        .iter()
        .map(|m| Module {
            id: m.id.clone(),
            genes: m
                .genes
                .iter()
                .flat_map(|g| members.get(g).map_or(std::slice::from_ref(g), |v| *v))
                .cloned()
                .collect(),
        })
        .collect();
    ModuleSet::new(modules, ms.overlapping()).expect("expansion keeps modules disjoint")
}

/// Clusters a matrix, sweeps thresholds and, given a gold standard, scores the sweep.
pub fn analyze(
    d: &CorrelationMatrix,
    step: f64,
    epsilon: Option<f64>,
    gold: Option<&ModuleSet>,
    metagenes: Option<&MetageneMap>,
) -> Result<Analysis> {
    let dendrogram = single_linkage(d).map_err(|e| e.in_stage("cluster"))?;
    let sweep: Vec<(f64, ModuleSet)> = threshold_sweep(&dendrogram, step)
        .map_err(|e| e.in_stage("sweep"))?
        .into_iter()
        .map(|(eps, ms)| (eps, expand(&ms, metagenes)))
        .collect();
    let evaluation = gold
        .map(|g| evaluate(&sweep, g))
        .transpose()
        .map_err(|e| e.in_stage("evaluate"))?;
    let eps = match (epsilon, &evaluation) {
        (Some(e), _) => e,
        (None, Some(ev)) => ev.metrics.best.epsilon,
        (None, None) => return Err(Error::InvalidParameter("no threshold for modules".into()).in_stage("cut")),
    };
    let modules = expand(&cut(&dendrogram, eps).map_err(|e| e.in_stage("cut"))?, metagenes);
    Ok(Analysis {
        dendrogram,
        sweep,
        epsilon: eps,
        modules,
        evaluation,
    })
}

/// AUC of the full threshold sweep of a matrix against a gold standard.
pub fn sweep_auc(d: &CorrelationMatrix, step: f64, gold: &ModuleSet) -> Result<f64> {
    let t = single_linkage(d)?;
    let sweep = threshold_sweep(&t, step)?;
    Ok(auc(&roc(&sweep, gold)?))
}

/// Outputs of one run; local incorporation yields one entry per prior cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub analyses: Vec<(Option<String>, Analysis)>,
    pub files: Vec<PathBuf>,
}

fn map_priors(priors: &PriorClusterSet, map: &MetageneMap) -> PriorClusterSet {
    let owner: HashMap<&GeneId, &GeneId> = map
        .metagenes
        .iter()
        .flat_map(|m| m.members.iter().map(move |g| (g, &m.id)))
        .collect();
    let modules = priors
        .clusters()
        .iter()
        .map(|c| Module {
            id: c.name.clone(),
            genes: c.genes.iter().map(|g| (*owner.get(g).unwrap_or(&g)).clone()).collect(),
        })
        .collect();
    PriorClusterSet::from_modules(&ModuleSet::new(modules, true).expect("prior clusters are non-empty"))
}

fn check_dir_name(name: &str) -> Result<()> {
    if name.is_empty() || name == "." || name == ".." || name.contains(['/', '\\']) {
        return Err(Error::InvalidParameter(format!(
            "prior cluster name {name:?} cannot be used as a directory name"
        )));
    }
    Ok(())
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(sha256_hex(&bytes))
}

fn analysis_files(prefix: &Path, a: &Analysis) -> Vec<(PathBuf, String)> {
    let mut files = vec![
        (prefix.join("dendrogram.txt"), io::format_dendrogram(&a.dendrogram)),
        (prefix.join("modules.tsv"), io::format_modules(&a.modules)),
        (prefix.join("sweep.tsv"), io::format_sweep(&a.sweep)),
    ];
    if let Some(ev) = &a.evaluation {
        files.push((prefix.join("roc.tsv"), io::format_roc(&ev.roc)));
        files.push((prefix.join("metrics.tsv"), io::format_metrics(&ev.metrics)));
    }
    files
}

fn rho_str(r: RhoPolicy) -> String {
    match r {
        RhoPolicy::Certain => "certain".into(),
        RhoPolicy::Off => "off".into(),
        RhoPolicy::Fixed(v) => v.to_string(),
    }
}

fn manifest(cfg: &RunConfig, outputs: &[(PathBuf, String)]) -> Result<String> {
    let mut s = String::from("# modclust run manifest\n");
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k}\t{v}");
    };
    kv("version", env!("CARGO_PKG_VERSION").into());
    kv("expr", cfg.expr.display().to_string());
    kv("expr_sha256", file_digest(&cfg.expr)?);
    kv("samples_as_rows", cfg.samples_as_rows.to_string());
    kv("metric", cfg.metric.metric.as_str().into());
    kv(
        "discretization",
        match cfg.metric.discretization {
            Discretization::EqualWidth => "equal-width",
            Discretization::EqualFrequency => "equal-frequency",
        }
        .into(),
    );
    kv(
        "bins",
        match cfg.metric.bins {
            Bins::Auto => "auto".into(),
            Bins::Fixed(b) => b.to_string(),
        },
    );
    kv("metagene_tau", cfg.metagene_tau.map_or("off".into(), |t| t.to_string()));
    match &cfg.priors {
        Some(p) => {
            kv("priors", p.display().to_string());
            kv("priors_sha256", file_digest(p)?);
            kv(
                "mode",
                match cfg.supervision.mode {
                    IncorporationMode::Global => "global",
                    IncorporationMode::Local => "local",
                }
                .into(),
            );
            kv("rho", rho_str(cfg.supervision.rho));
        }
        None => kv("priors", "none".into()),
    }
    match &cfg.deconv {
        Some(d) => {
            kv("deconvolve", "on".into());
            kv("delta", d.delta.to_string());
            kv(
                "scaling",
                match d.scaling {
                    Scaling::Auto => "auto",
                    Scaling::None => "none",
                }
                .into(),
            );
        }
        None => kv("deconvolve", "off".into()),
    }
    kv("step", cfg.step.to_string());
    kv("epsilon", cfg.epsilon.map_or("best-f".into(), |e| e.to_string()));
    match &cfg.gold {
        Some(g) => {
            kv("gold", g.display().to_string());
            kv("gold_sha256", file_digest(g)?);
        }
        None => kv("gold", "none".into()),
    }
    kv("seed", cfg.seed.to_string());
    for (path, contents) in outputs {
        let rel = path.strip_prefix(&cfg.out_dir).unwrap_or(path);
        kv(
            "output",
            format!("{}\t{}", rel.display(), sha256_hex(contents.as_bytes())),
        );
    }
    Ok(s)
}

/// Writes all files or none: on failure, files already written are removed.
fn write_all(out_dir: &Path, files: &[(PathBuf, String)]) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut made_dirs = Vec::new();
    let result: Result<()> = (|| {
        for (path, contents) in files {
            if let Some(dir) = path.parent() {
                let mut missing = Vec::new();
                let mut d = dir;
                while !d.exists() {
                    missing.push(d.to_path_buf());
                    match d.parent() {
                        Some(p) => d = p,
                        None => break,
                    }
                }
                made_dirs.extend(missing.into_iter().rev());
            }
            io::write_file(path, contents)?;
            written.push(path.clone());
        }
        Ok(())
    })();
    match result {
        Ok(()) => Ok(written),
        Err(e) => {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            for d in made_dirs.iter().rev() {
                let _ = fs::remove_dir(d);
            }
            log::error!("run failed; removed partial outputs under {}", out_dir.display());
            Err(e.in_stage("write"))
        }
    }
}

/// Runs the configured pipeline and writes its outputs under `cfg.out_dir`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let read = |e: Error| e.in_stage("read");
    let expr = io::read_expression(&cfg.expr, cfg.samples_as_rows).map_err(read)?;
    let gold = cfg.gold.as_deref().map(io::read_modules).transpose().map_err(read)?;
    let priors = cfg
        .priors
        .as_deref()
        .map(|p| io::read_modules(p).map(|m| PriorClusterSet::from_modules(&m)))
        .transpose()
        .map_err(read)?;

    let (expr, map) = match cfg.metagene_tau {
        Some(tau) => {
            let (e, m) = merge_metagenes(&expr, tau).map_err(|e| e.in_stage("metagene"))?;
            log::info!("{} genes collapsed to {} metagenes", expr.n_genes(), e.n_genes());
            (e, Some(m))
        }
        None => (expr, None),
    };
    let priors = match (&priors, &map) {
        (Some(p), Some(m)) => Some(map_priors(p, m)),
        _ => priors,
    };

    let d = build_correlation_matrix(&expr, &cfg.metric).map_err(|e| e.in_stage("correlate"))?;
    let supervise = |e: Error| e.in_stage("supervise");
    let matrices: Vec<(Option<String>, CorrelationMatrix)> = match (&priors, cfg.supervision.mode) {
        (None, _) => vec![(None, d)],
        (Some(p), IncorporationMode::Global) => {
            vec![(None, incorporate_global(&d, p, cfg.supervision.rho).map_err(supervise)?)]
        }
        (Some(p), IncorporationMode::Local) => {
            for c in p.clusters() {
                check_dir_name(&c.name).map_err(supervise)?;
            }
            incorporate_local(&d, p, cfg.supervision.rho)
                .map_err(supervise)?
                .into_iter()
                .map(|(name, m)| (Some(name), m))
                .collect()
        }
    };

    let mut analyses = Vec::with_capacity(matrices.len());
    for (name, m) in matrices {
        let m = match &cfg.deconv {
            Some(dc) => match deconvolve(&m, dc).map_err(|e| e.in_stage("deconvolve"))? {
                DeconvOutput::Correlation(c) => c,
                DeconvOutput::Raw { .. } => unreachable!("rescaling is enforced by validate"),
            },
            None => m,
        };
        let a = analyze(&m, cfg.step, cfg.epsilon, gold.as_ref(), map.as_ref())?;
        analyses.push((name, a));
    }

    let mut files = Vec::new();
    for (name, a) in &analyses {
        let prefix = match name {
            Some(n) => cfg.out_dir.join(n),
            None => cfg.out_dir.clone(),
        };
        files.extend(analysis_files(&prefix, a));
    }
    if let Some(m) = &map {
        files.push((cfg.out_dir.join("metagenes.tsv"), io::format_metagene_map(m)));
    }
    let man = manifest(cfg, &files).map_err(read)?;
    files.push((cfg.out_dir.join("manifest.tsv"), man));
    let written = write_all(&cfg.out_dir, &files)?;
    Ok(RunReport {
        analyses,
        files: written,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthbench::{generate_benchmark, BenchConfig};

    fn setup(dir: &Path) -> RunConfig {
        let b = generate_benchmark(&BenchConfig {
            n_genes: 30,
            n_modules: 3,
            samples: 20,
            p_corrupt: 0.2,
            ..Default::default()
        })
        .unwrap();
        io::write_file(&dir.join("expr.tsv"), &io::format_expression(&b.expr)).unwrap();
        io::write_file(&dir.join("gold.gmt"), &io::format_modules(&b.truth)).unwrap();
        io::write_file(&dir.join("priors.gmt"), &io::format_modules(&b.priors.to_modules())).unwrap();
        let mut cfg = RunConfig::new(dir.join("expr.tsv"), dir.join("out"));
        cfg.gold = Some(dir.join("gold.gmt"));
        cfg
    }

    #[test]
    fn plain_run_writes_outputs() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = setup(tmp.path());
        let report = run_pipeline(&cfg).unwrap();
        for f in [
            "dendrogram.txt",
            "modules.tsv",
            "sweep.tsv",
            "roc.tsv",
            "metrics.tsv",
            "manifest.tsv",
        ] {
            assert!(cfg.out_dir.join(f).is_file(), "{f}");
        }
        let ev = report.analyses[0].1.evaluation.as_ref().unwrap();
        assert!(ev.metrics.auc > 0.5);
    }

    #[test]
    fn local_mode_writes_one_directory_per_cluster() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = setup(tmp.path());
        cfg.priors = Some(tmp.path().join("priors.gmt"));
        cfg.supervision = SupervisionConfig {
            rho: RhoPolicy::Fixed(0.25),
            mode: IncorporationMode::Local,
        };
        cfg.deconv = Some(DeconvConfig::default());
        let report = run_pipeline(&cfg).unwrap();
        assert_eq!(report.analyses.len(), 3);
        for k in 1..=3 {
            assert!(cfg.out_dir.join(format!("prior_{k}")).join("roc.tsv").is_file());
        }
    }

    #[test]
    fn metagenes_expand_back_to_members() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = setup(tmp.path());
        cfg.metagene_tau = Some(0.5);
        let report = run_pipeline(&cfg).unwrap();
        let a = &report.analyses[0].1;
        assert!(a.dendrogram.n_leaves() < 30);
        assert_eq!(a.modules.genes().len(), 30);
        assert!(cfg.out_dir.join("metagenes.tsv").is_file());
    }

    #[test]
    fn failures_name_the_stage_and_leave_no_outputs() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = setup(tmp.path());
        io::write_file(&tmp.path().join("bad.gmt"), "m1\tnot_a_gene\tnor_this\n").unwrap();
        cfg.priors = Some(tmp.path().join("bad.gmt"));
        let err = run_pipeline(&cfg).unwrap_err();
        assert!(matches!(err, Error::Stage { stage: "supervise", .. }), "{err}");
        assert!(!cfg.out_dir.exists());

        let mut cfg = setup(tmp.path());
        cfg.gold = None;
        assert!(matches!(run_pipeline(&cfg), Err(Error::Stage { stage: "config", .. })));
    }
}
