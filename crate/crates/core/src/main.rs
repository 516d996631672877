use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use modclust::corrmat::{build_correlation_matrix, Bins, Discretization, MetricConfig};
use modclust::deconv::{deconvolve, DeconvConfig, DeconvOutput, Scaling};
use modclust::evalkit::{minimal_modules, pair_confusion, precision_recall_f, strict_modules};
use modclust::hac::{cut, single_linkage, threshold_sweep};
use modclust::io;
use modclust::metagene::{merge_metagenes, DEFAULT_TAU};
use modclust::pipeline::{run_pipeline, RunConfig, DEFAULT_STEP};
use modclust::priors::{
    communities_from_edges, incorporate_global, incorporate_local, IncorporationMode, RhoPolicy, SupervisionConfig,
};
use modclust::synthbench::{generate_benchmark, BenchConfig};
use modclust::{Error, Metric, Module, ModuleSet, PriorClusterSet, Result};

#[derive(Parser)]
#[command(
    name = "modclust",
    version,
    about = "Module detection by supervised single-linkage clustering"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a correlation matrix from an expression table
    Correlate {
        #[command(flatten)]
        expr: ExprArgs,
        #[command(flatten)]
        metric: MetricArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Magnify correlations inside prior clusters
    Supervise {
        #[arg(long)]
        matrix: PathBuf,
        #[command(flatten)]
        priors: PriorArgs,
        /// Output file (global) or directory (local)
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Remove transitive correlation
    Deconvolve {
        #[arg(long)]
        matrix: PathBuf,
        #[command(flatten)]
        deconv: DeconvArgs,
        /// Write the unrescaled direct matrix
        #[arg(long)]
        raw: bool,
        #[command(flatten)]
        out: OutArg,
    },
    /// Single-linkage dendrogram of a correlation matrix
    Cluster {
        #[arg(long)]
        matrix: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
    /// Flat modules at a similarity threshold
    Cut {
        #[arg(long)]
        dendrogram: PathBuf,
        #[arg(long)]
        epsilon: f64,
        /// Keep only the largest module
        #[arg(long)]
        largest: bool,
        #[command(flatten)]
        out: OutArg,
    },
    /// Cuts over a range of thresholds
    Sweep {
        #[arg(long)]
        dendrogram: PathBuf,
        #[arg(long, default_value_t = DEFAULT_STEP)]
        step: f64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Score modules (or a sweep) against a gold standard
    Evaluate {
        #[arg(long, required_unless_present = "sweep", conflicts_with = "sweep")]
        pred: Option<PathBuf>,
        #[arg(long)]
        sweep: Option<PathBuf>,
        #[arg(long)]
        gold: PathBuf,
        /// ROC table output when scoring a sweep
        #[arg(long, requires = "sweep")]
        roc: Option<PathBuf>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Merge near-duplicate profiles
    Metagene {
        #[command(flatten)]
        expr: ExprArgs,
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
        /// Metagene membership table
        #[arg(long)]
        map: Option<PathBuf>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Generate a synthetic benchmark
    Synth {
        #[arg(long, default_value_t = 100)]
        genes: usize,
        #[arg(long, default_value_t = 5)]
        modules: usize,
        #[arg(long, default_value_t = 40)]
        samples: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0.5)]
        loading_lo: f64,
        #[arg(long, default_value_t = 1.5)]
        loading_hi: f64,
        #[arg(long, default_value_t = 0.0)]
        p_corrupt: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Gold-standard modules from a regulatory network
    DeriveGold {
        #[arg(long)]
        edges: PathBuf,
        #[arg(long, value_enum)]
        kind: GoldKind,
        #[command(flatten)]
        out: OutArg,
    },
    /// Full pipeline
    Run(RunArgs),
}

#[derive(Args)]
struct OutArg {
    /// Output file; standard output when omitted
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExprArgs {
    #[arg(long)]
    expr: PathBuf,
    /// Input has one sample per row
    #[arg(long)]
    samples_as_rows: bool,
}

#[derive(Args)]
struct MetricArgs {
    #[arg(long, value_enum, default_value_t = MetricArg::Pcc)]
    metric: MetricArg,
    #[arg(long, value_enum, default_value_t = DiscArg::EqualFrequency)]
    discretization: DiscArg,
    /// Bin count for MI metrics; ⌈√m⌉ when omitted
    #[arg(long)]
    bins: Option<usize>,
}

#[derive(Args)]
struct PriorArgs {
    /// Prior clusters in module-file format
    #[arg(long, conflicts_with = "prior_edges")]
    priors: Option<PathBuf>,
    /// Edge list whose connected components become prior clusters
    #[arg(long)]
    prior_edges: Option<PathBuf>,
    /// Reliability: `certain`, `off`, or ρ̂ in [0, 1]
    #[arg(long, default_value = "certain", value_parser = parse_rho)]
    rho: RhoPolicy,
    #[arg(long, value_enum, default_value_t = ModeArg::Global)]
    mode: ModeArg,
}

#[derive(Args)]
struct DeconvArgs {
    #[arg(long, default_value_t = 0.95)]
    delta: f64,
    #[arg(long, value_enum, default_value_t = ScalingArg::Auto)]
    scaling: ScalingArg,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    expr: ExprArgs,
    #[command(flatten)]
    metric: MetricArgs,
    #[arg(long, conflicts_with = "prior_edges")]
    prior: Option<PathBuf>,
    /// Not supported by `run`; convert edges with `supervise --prior-edges` instead
    #[arg(long, hide = true)]
    prior_edges: Option<PathBuf>,
    #[arg(long, default_value = "certain", value_parser = parse_rho)]
    rho: RhoPolicy,
    #[arg(long, value_enum, default_value_t = ModeArg::Global)]
    mode: ModeArg,
    #[arg(long)]
    deconvolve: bool,
    #[command(flatten)]
    deconv: DeconvArgs,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    step: f64,
    /// Merge profiles with PCC above this before correlating
    #[arg(long)]
    metagene: Option<f64>,
    #[arg(long)]
    gold: Option<PathBuf>,
    /// Threshold for modules.tsv; best-F threshold when omitted
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "modclust_out")]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Pcc,
    Dcc,
    Mi1,
    Mi2,
    Mi3,
}

#[derive(Clone, Copy, ValueEnum)]
enum DiscArg {
    EqualWidth,
    EqualFrequency,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Global,
    Local,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScalingArg {
    Auto,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum GoldKind {
    Minimal,
    Strict,
}

fn parse_rho(s: &str) -> std::result::Result<RhoPolicy, String> {
    match s {
        "certain" => Ok(RhoPolicy::Certain),
        "off" => Ok(RhoPolicy::Off),
        _ => {
            let r: f64 = s
                .parse()
                .map_err(|_| format!("expected certain, off or a number, got {s:?}"))?;
            let p = RhoPolicy::Fixed(r);
            p.validate().map_err(|e| e.to_string())?;
            Ok(p)
        }
    }
}

impl MetricArgs {
    fn config(&self) -> MetricConfig {
        MetricConfig {
            metric: match self.metric {
                MetricArg::Pcc => Metric::Pcc,
                MetricArg::Dcc => Metric::Dcc,
                MetricArg::Mi1 => Metric::Mi1,
                MetricArg::Mi2 => Metric::Mi2,
                MetricArg::Mi3 => Metric::Mi3,
            },
            discretization: match self.discretization {
                DiscArg::EqualWidth => Discretization::EqualWidth,
                DiscArg::EqualFrequency => Discretization::EqualFrequency,
            },
            bins: self.bins.map_or(Bins::Auto, Bins::Fixed),
        }
    }
}

impl ModeArg {
    fn mode(self) -> IncorporationMode {
        match self {
            ModeArg::Global => IncorporationMode::Global,
            ModeArg::Local => IncorporationMode::Local,
        }
    }
}

impl DeconvArgs {
    fn config(&self, rescale_output: bool) -> DeconvConfig {
        DeconvConfig {
            delta: self.delta,
            scaling: match self.scaling {
                ScalingArg::Auto => Scaling::Auto,
                ScalingArg::None => Scaling::None,
            },
            rescale_output,
        }
    }
}

fn emit(out: &OutArg, contents: &str) -> Result<()> {
    match &out.out {
        Some(p) => io::write_file(p, contents),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(contents.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| Error::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })
        }
    }
}

fn load_priors(args: &PriorArgs, genes: &[modclust::GeneId]) -> Result<PriorClusterSet> {
    match (&args.priors, &args.prior_edges) {
        (Some(p), _) => Ok(PriorClusterSet::from_modules(&io::read_modules(p)?)),
        (None, Some(e)) => communities_from_edges(genes, &io::read_edges(e)?),
        (None, None) => Err(Error::InvalidParameter(
            "one of --priors or --prior-edges is required".into(),
        )),
    }
}

fn write_local(dir: &Path, outputs: &[(String, modclust::CorrelationMatrix)]) -> Result<()> {
    for (name, m) in outputs {
        if name.is_empty() || name == "." || name == ".." || name.contains(['/', '\\']) {
            return Err(Error::InvalidParameter(format!(
                "prior cluster name {name:?} is not a valid directory name"
            )));
        }
        io::write_file(&dir.join(name).join("matrix.tsv"), &io::format_correlation(m))?;
    }
    Ok(())
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Correlate { expr, metric, out } => {
            let e = io::read_expression(&expr.expr, expr.samples_as_rows)?;
            let d = build_correlation_matrix(&e, &metric.config())?;
            emit(&out, &io::format_correlation(&d))
        }
        Command::Supervise { matrix, priors, out } => {
            priors.rho.validate()?;
            let d = io::read_correlation(&matrix)?;
            let set = load_priors(&priors, d.genes())?;
            match priors.mode.mode() {
                IncorporationMode::Global => io::write_file(
                    &out,
                    &io::format_correlation(&incorporate_global(&d, &set, priors.rho)?),
                ),
                IncorporationMode::Local => write_local(&out, &incorporate_local(&d, &set, priors.rho)?),
            }
        }
        Command::Deconvolve {
            matrix,
            deconv,
            raw,
            out,
        } => {
            let cfg = deconv.config(!raw);
            cfg.validate()?;
            let d = io::read_correlation(&matrix)?;
            let text = match deconvolve(&d, &cfg)? {
                DeconvOutput::Correlation(c) => io::format_correlation(&c),
                DeconvOutput::Raw { genes, values, meta } => io::format_matrix(&genes, &values, &meta),
            };
            emit(&out, &text)
        }
        Command::Cluster { matrix, out } => {
            let d = io::read_correlation(&matrix)?;
            emit(&out, &io::format_dendrogram(&single_linkage(&d)?))
        }
        Command::Cut {
            dendrogram,
            epsilon,
            largest,
            out,
        } => {
            let t = io::read_dendrogram(&dendrogram)?;
            let mut ms = cut(&t, epsilon)?;
            if largest {
                let m: Module = ms.largest().expect("a cut has at least one module").clone();
                ms = ModuleSet::new(vec![m], false)?;
            }
            emit(&out, &io::format_modules(&ms))
        }
        Command::Sweep { dendrogram, step, out } => {
            let t = io::read_dendrogram(&dendrogram)?;
            emit(&out, &io::format_sweep(&threshold_sweep(&t, step)?))
        }
        Command::Evaluate {
            pred,
            sweep,
            gold,
            roc,
            out,
        } => {
            let gold = io::read_modules(&gold)?;
            if let Some(p) = pred {
                let c = pair_confusion(&io::read_modules(&p)?, &gold)?;
                return emit(&out, &io::format_confusion(&c, &precision_recall_f(&c)));
            }
            let sweep = io::read_sweep(sweep.as_deref().expect("clap enforces --pred or --sweep"))?;
            let ev = modclust::pipeline::evaluate(&sweep, &gold)?;
            if let Some(r) = roc {
                io::write_file(&r, &io::format_roc(&ev.roc))?;
            }
            emit(&out, &io::format_metrics(&ev.metrics))
        }
        Command::Metagene { expr, tau, map, out } => {
            let e = io::read_expression(&expr.expr, expr.samples_as_rows)?;
            let (merged, m) = merge_metagenes(&e, tau)?;
            if let Some(p) = map {
                io::write_file(&p, &io::format_metagene_map(&m))?;
            }
            emit(&out, &io::format_expression(&merged))
        }
        Command::Synth {
            genes,
            modules,
            samples,
            sigma,
            loading_lo,
            loading_hi,
            p_corrupt,
            seed,
            out_dir,
        } => {
            let b = generate_benchmark(&BenchConfig {
                n_genes: genes,
                n_modules: modules,
                samples,
                loading: (loading_lo, loading_hi),
                sigma,
                p_corrupt,
                seed,
            })?;
            io::write_file(&out_dir.join("expr.tsv"), &io::format_expression(&b.expr))?;
            io::write_file(&out_dir.join("truth.gmt"), &io::format_modules(&b.truth))?;
            io::write_file(&out_dir.join("edges.tsv"), &io::format_edges(&b.edges))?;
            io::write_file(&out_dir.join("priors.gmt"), &io::format_modules(&b.priors.to_modules()))
        }
        Command::DeriveGold { edges, kind, out } => {
            let e = io::read_edges(&edges)?;
            let ms = match kind {
                GoldKind::Minimal => minimal_modules(&e)?,
                GoldKind::Strict => strict_modules(&e)?,
            };
            emit(&out, &io::format_modules(&ms))
        }
        Command::Run(a) => {
            if a.prior_edges.is_some() {
                return Err(Error::InvalidParameter(
                    "run takes prior clusters via --prior; derive them with `supervise --prior-edges` first".into(),
                ));
            }
            let cfg = RunConfig {
                expr: a.expr.expr,
                samples_as_rows: a.expr.samples_as_rows,
                metric: a.metric.config(),
                priors: a.prior,
                supervision: SupervisionConfig {
                    rho: a.rho,
                    mode: a.mode.mode(),
                },
                deconv: a.deconvolve.then(|| a.deconv.config(true)),
                step: a.step,
                metagene_tau: a.metagene,
                gold: a.gold,
                epsilon: a.epsilon,
                out_dir: a.out_dir,
                seed: a.seed,
            };
            let report = run_pipeline(&cfg)?;
            for (name, an) in &report.analyses {
                let label = name.as_deref().unwrap_or("all");
                match &an.evaluation {
                    Some(ev) => log::info!(
                        "{label}: AUC {} best F {} at epsilon {}",
                        io::fmt_g12(ev.metrics.auc),
                        io::fmt_g12(ev.metrics.best.scores.f),
                        io::fmt_g12(ev.metrics.best.epsilon)
                    ),
                    None => log::info!("{label}: {} modules at epsilon {}", an.modules.len(), an.epsilon),
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(n) = std::env::var("MODCLUST_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("cannot set worker count: {e}");
        }
    }
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("modclust: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
