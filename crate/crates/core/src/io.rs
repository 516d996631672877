//! Tab-separated file formats.
//!
//! All files are UTF-8 with `#`-prefixed comment lines. In dendrogram files
//! a line starting with `#` followed by a digit is a merge whose left node is
//! internal, not a comment.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::evalkit::{BestF, Scores};
use crate::metagene::MetageneMap;
use crate::types::{
    ConfusionCounts, CorrelationMatrix, Dendrogram, ExpressionMatrix, GeneId, MatrixMeta, Merge, Metric, Module,
    ModuleSet, RocCurve,
};

/// Formats a real with 12 significant digits, like C's `%.12g`.
pub fn fmt_g12(x: f64) -> String {
    const P: i32 = 12;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    let strip = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..P).contains(&exp) {
        format!(
            "{}e{}{:02}",
            strip(mantissa),
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        )
    } else {
        strip(&format!("{:.*}", (P - 1 - exp) as usize, x))
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|source| Error::Io {
                path: dir.to_path_buf(),
                source,
            })?;
        }
    }
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Non-comment, non-blank lines with 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

struct Ctx<'a> {
    path: &'a Path,
}

impl Ctx<'_> {
    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line,
            msg: msg.into(),
        }
    }

    fn gene(&self, line: usize, s: &str) -> Result<GeneId> {
        GeneId::new(s).map_err(|_| self.err(line, format!("invalid gene identifier {s:?}")))
    }

    fn real(&self, line: usize, s: &str) -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| self.err(line, format!("cannot parse {s:?} as a number")))
    }
}

// ---------------------------------------------------------------- expression

pub fn parse_expression(text: &str, path: &Path, samples_as_rows: bool) -> Result<ExpressionMatrix> {
    let cx = Ctx { path };
    let mut lines = data_lines(text);
    let (hl, header) = lines.next().ok_or_else(|| cx.err(0, "missing header row"))?;
    let columns: Vec<&str> = header.split('\t').skip(1).collect();
    if columns.is_empty() {
        return Err(cx.err(hl, "header has no value columns"));
    }
    let mut row_names = Vec::new();
    let mut values = Vec::new();
    for (ln, line) in lines {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != columns.len() + 1 {
            return Err(cx.err(
                ln,
                format!("expected {} fields, found {}", columns.len() + 1, fields.len()),
            ));
        }
        row_names.push((ln, fields[0]));
        for f in &fields[1..] {
            values.push(cx.real(ln, f)?);
        }
    }
    let (genes, samples, values) = if samples_as_rows {
        let genes = columns.iter().map(|g| cx.gene(hl, g)).collect::<Result<Vec<_>>>()?;
        let samples: Vec<String> = row_names.iter().map(|(_, s)| s.to_string()).collect();
        let (m, n) = (samples.len(), genes.len());
        let mut t = vec![0.0; n * m];
        for s in 0..m {
            for g in 0..n {
                t[g * m + s] = values[s * n + g];
            }
        }
        (genes, samples, t)
    } else {
        let genes = row_names
            .iter()
            .map(|(ln, g)| cx.gene(*ln, g))
            .collect::<Result<Vec<_>>>()?;
        (genes, columns.iter().map(|s| s.to_string()).collect(), values)
    };
    ExpressionMatrix::new(genes, samples, values)
}

pub fn read_expression(path: &Path, samples_as_rows: bool) -> Result<ExpressionMatrix> {
    parse_expression(&read(path)?, path, samples_as_rows)
}

pub fn format_expression(expr: &ExpressionMatrix) -> String {
    let mut s = String::from("gene");
    for sample in expr.samples() {
        s.push('\t');
        s.push_str(sample);
    }
    s.push('\n');
    for (i, g) in expr.genes().iter().enumerate() {
        s.push_str(g.as_str());
        for v in expr.row(i) {
            let _ = write!(s, "\t{v}");
        }
        s.push('\n');
    }
    s
}

// ------------------------------------------------------------------- matrices

fn meta_line(meta: &MatrixMeta) -> String {
    format!(
        "# metric={} supervised={} deconvolved={}\n",
        meta.metric.map_or("none", Metric::as_str),
        meta.supervised,
        meta.deconvolved
    )
}

fn parse_meta(text: &str) -> MatrixMeta {
    let mut meta = MatrixMeta::default();
    for line in text.lines().filter(|l| l.starts_with('#')) {
        for tok in line.trim_start_matches('#').split_whitespace() {
            match tok.split_once('=') {
                Some(("metric", v)) => meta.metric = Metric::parse(v),
                Some(("supervised", v)) => meta.supervised = v == "true",
                Some(("deconvolved", v)) => meta.deconvolved = v == "true",
                _ => {}
            }
        }
    }
    meta
}

/// Square matrix in the expression layout, preceded by a provenance comment.
/// Reals are written in shortest round-trip form.
pub fn format_matrix(genes: &[GeneId], values: &DMatrix<f64>, meta: &MatrixMeta) -> String {
    let mut s = meta_line(meta);
    s.push_str("gene");
    for g in genes {
        s.push('\t');
        s.push_str(g.as_str());
    }
    s.push('\n');
    for (i, g) in genes.iter().enumerate() {
        s.push_str(g.as_str());
        for j in 0..genes.len() {
            let _ = write!(s, "\t{}", values[(i, j)]);
        }
        s.push('\n');
    }
    s
}

pub fn format_correlation(cm: &CorrelationMatrix) -> String {
    format_matrix(cm.genes(), cm.values(), &cm.meta())
}

/// Reads a square matrix without checking correlation invariants.
pub fn parse_raw_matrix(text: &str, path: &Path) -> Result<(Vec<GeneId>, DMatrix<f64>, MatrixMeta)> {
    let cx = Ctx { path };
    let mut lines = data_lines(text);
    let (hl, header) = lines.next().ok_or_else(|| cx.err(0, "missing header row"))?;
    let genes: Vec<GeneId> = header
        .split('\t')
        .skip(1)
        .map(|g| cx.gene(hl, g))
        .collect::<Result<_>>()?;
    let n = genes.len();
    let mut values = DMatrix::zeros(n, n);
    let mut rows = 0;
    for (ln, line) in lines {
        let fields: Vec<&str> = line.split('\t').collect();
        if rows >= n {
            return Err(cx.err(ln, "more rows than header columns"));
        }
        if fields.len() != n + 1 {
            return Err(cx.err(ln, format!("expected {} fields, found {}", n + 1, fields.len())));
        }
        if fields[0] != genes[rows].as_str() {
            return Err(cx.err(ln, format!("row {:?} does not match column {}", fields[0], genes[rows])));
        }
        for (j, f) in fields[1..].iter().enumerate() {
            values[(rows, j)] = cx.real(ln, f)?;
        }
        rows += 1;
    }
    if rows != n {
        return Err(cx.err(0, format!("expected {n} rows, found {rows}")));
    }
    Ok((genes, values, parse_meta(text)))
}

pub fn parse_correlation(text: &str, path: &Path) -> Result<CorrelationMatrix> {
    let (genes, values, meta) = parse_raw_matrix(text, path)?;
    CorrelationMatrix::new(genes, values, meta)
}

pub fn read_correlation(path: &Path) -> Result<CorrelationMatrix> {
    parse_correlation(&read(path)?, path)
}

pub fn read_raw_matrix(path: &Path) -> Result<(Vec<GeneId>, DMatrix<f64>, MatrixMeta)> {
    parse_raw_matrix(&read(path)?, path)
}

// -------------------------------------------------------------------- modules

/// GMT-like module file: `module_id<TAB>gene1<TAB>gene2…`.
///
/// The result is marked overlapping when any gene appears in two modules.
pub fn parse_modules(text: &str, path: &Path) -> Result<ModuleSet> {
    let cx = Ctx { path };
    let mut modules = Vec::new();
    for (ln, line) in data_lines(text) {
        let mut fields = line.split('\t');
        let id = fields.next().unwrap_or_default().to_string();
        let genes = fields
            .filter(|f| !f.is_empty())
            .map(|g| cx.gene(ln, g))
            .collect::<Result<Vec<_>>>()?;
        if genes.is_empty() {
            return Err(cx.err(ln, format!("module {id:?} lists no genes")));
        }
        modules.push(Module { id, genes });
    }
    let mut count: HashMap<&GeneId, usize> = HashMap::new();
    for m in &modules {
        let mut seen = std::collections::HashSet::new();
        for g in &m.genes {
            if seen.insert(g) {
                *count.entry(g).or_insert(0) += 1;
            }
        }
    }
    let overlapping = count.values().any(|&c| c > 1);
    ModuleSet::new(modules, overlapping)
}

pub fn read_modules(path: &Path) -> Result<ModuleSet> {
    parse_modules(&read(path)?, path)
}

pub fn format_modules(ms: &ModuleSet) -> String {
    let mut s = String::new();
    for m in ms.modules() {
        s.push_str(&m.id);
        for g in &m.genes {
            s.push('\t');
            s.push_str(g.as_str());
        }
        s.push('\n');
    }
    s
}

// ---------------------------------------------------------------------- edges

/// `regulator<TAB>target[<TAB>weight]`; the weight column is ignored.
pub fn parse_edges(text: &str, path: &Path) -> Result<Vec<(GeneId, GeneId)>> {
    let cx = Ctx { path };
    data_lines(text)
        .map(|(ln, line)| {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() < 2 {
                return Err(cx.err(ln, "expected regulator and target columns"));
            }
            Ok((cx.gene(ln, fields[0])?, cx.gene(ln, fields[1])?))
        })
        .collect()
}

pub fn read_edges(path: &Path) -> Result<Vec<(GeneId, GeneId)>> {
    parse_edges(&read(path)?, path)
}

pub fn format_edges(edges: &[(GeneId, GeneId)]) -> String {
    edges.iter().map(|(r, t)| format!("{r}\t{t}\n")).collect()
}

// ----------------------------------------------------------------- dendrogram

fn node_name(t: &Dendrogram, node: usize) -> String {
    let n = t.n_leaves();
    if node < n {
        t.leaves()[node].to_string()
    } else {
        format!("#{}", node - n)
    }
}

/// One merge per line, `left<TAB>right<TAB>height`; leaves by gene id,
/// internal nodes as `#k` for the node created by merge `k`. A leading
/// `# leaves` comment records the leaf order.
pub fn format_dendrogram(t: &Dendrogram) -> String {
    let mut s = String::from("# leaves");
    for g in t.leaves() {
        s.push('\t');
        s.push_str(g.as_str());
    }
    s.push('\n');
    for m in t.merges() {
        let _ = writeln!(s, "{}\t{}\t{}", node_name(t, m.left), node_name(t, m.right), m.height);
    }
    s
}

pub fn parse_dendrogram(text: &str, path: &Path) -> Result<Dendrogram> {
    let cx = Ctx { path };
    let mut leaves: Vec<GeneId> = Vec::new();
    let mut raw: Vec<(usize, String, String, f64)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let ln = i + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let is_merge = !line.starts_with('#') || line[1..].starts_with(|c: char| c.is_ascii_digit());
        if !is_merge {
            if let Some(rest) = line.strip_prefix("# leaves") {
                leaves = rest
                    .split('\t')
                    .filter(|f| !f.is_empty())
                    .map(|g| cx.gene(ln, g))
                    .collect::<Result<_>>()?;
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(cx.err(ln, format!("expected 3 fields, found {}", fields.len())));
        }
        raw.push((
            ln,
            fields[0].to_string(),
            fields[1].to_string(),
            cx.real(ln, fields[2])?,
        ));
    }
    if leaves.is_empty() {
        let mut seen = std::collections::HashSet::new();
        for (ln, a, b, _) in &raw {
            for name in [a, b] {
                if !name.starts_with('#') && seen.insert(name.clone()) {
                    leaves.push(cx.gene(*ln, name)?);
                }
            }
        }
    }
    let index: HashMap<&str, usize> = leaves.iter().enumerate().map(|(i, g)| (g.as_str(), i)).collect();
    let n = leaves.len();
    let resolve = |ln: usize, name: &str| -> Result<usize> {
        if let Some(k) = name.strip_prefix('#') {
            let k: usize = k
                .parse()
                .map_err(|_| cx.err(ln, format!("bad internal node {name:?}")))?;
            Ok(n + k)
        } else {
            index
                .get(name)
                .copied()
                .ok_or_else(|| cx.err(ln, format!("unknown leaf {name:?}")))
        }
    };
    let merges = raw
        .iter()
        .map(|(ln, a, b, h)| {
            Ok(Merge {
                left: resolve(*ln, a)?,
                right: resolve(*ln, b)?,
                height: *h,
                size: 0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dendrogram::new(leaves, merges)
}

pub fn read_dendrogram(path: &Path) -> Result<Dendrogram> {
    parse_dendrogram(&read(path)?, path)
}

// --------------------------------------------------------------------- sweeps

/// `epsilon<TAB>module_id<TAB>gene1…`, one module per line, grouped by epsilon.
pub fn format_sweep(sweep: &[(f64, ModuleSet)]) -> String {
    let mut s = String::from("# epsilon\tmodule_id\tgenes\n");
    for (eps, ms) in sweep {
        for m in ms.modules() {
            let _ = write!(s, "{eps}\t{}", m.id);
            for g in &m.genes {
                s.push('\t');
                s.push_str(g.as_str());
            }
            s.push('\n');
        }
    }
    s
}

pub fn parse_sweep(text: &str, path: &Path) -> Result<Vec<(f64, ModuleSet)>> {
    let cx = Ctx { path };
    let mut out: Vec<(f64, Vec<Module>)> = Vec::new();
    for (ln, line) in data_lines(text) {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 {
            return Err(cx.err(ln, "expected epsilon, module id and genes"));
        }
        let eps = cx.real(ln, fields[0])?;
        let module = Module {
            id: fields[1].to_string(),
            genes: fields[2..].iter().map(|g| cx.gene(ln, g)).collect::<Result<_>>()?,
        };
        match out.last_mut() {
            Some((e, ms)) if *e == eps => ms.push(module),
            _ => out.push((eps, vec![module])),
        }
    }
    out.into_iter()
        .map(|(eps, ms)| Ok((eps, ModuleSet::new(ms, false)?)))
        .collect()
}

pub fn read_sweep(path: &Path) -> Result<Vec<(f64, ModuleSet)>> {
    parse_sweep(&read(path)?, path)
}

// -------------------------------------------------------------------- reports

pub fn format_roc(curve: &RocCurve) -> String {
    let mut s = String::from("threshold\tfpr\ttpr\ttp\tfp\ttn\tfn\n");
    for p in curve.points() {
        let c = p.counts;
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            p.threshold.map_or("NA".to_string(), fmt_g12),
            fmt_g12(p.fpr),
            fmt_g12(p.tpr),
            c.tp,
            c.fp,
            c.tn,
            c.fn_
        );
    }
    s
}

pub fn format_confusion(c: &ConfusionCounts, sc: &Scores) -> String {
    format!(
        "tp\tfp\ttn\tfn\tprecision\trecall\tf\n{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
        c.tp,
        c.fp,
        c.tn,
        c.fn_,
        fmt_g12(sc.precision),
        fmt_g12(sc.recall),
        fmt_g12(sc.f)
    )
}

/// Summary of one evaluated sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub auc: f64,
    pub best: BestF,
    pub knee_epsilon: Option<f64>,
    pub knee_fpr: f64,
    pub knee_tpr: f64,
    pub knee_largest_module: usize,
}

pub fn format_metrics(row: &MetricsRow) -> String {
    let c = row.best.counts;
    let sc = row.best.scores;
    format!(
        "auc\tbest_epsilon\tprecision\trecall\tf\ttp\tfp\ttn\tfn\tknee_epsilon\tknee_fpr\tknee_tpr\tknee_largest_module\n\
         {}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
        fmt_g12(row.auc),
        fmt_g12(row.best.epsilon),
        fmt_g12(sc.precision),
        fmt_g12(sc.recall),
        fmt_g12(sc.f),
        c.tp,
        c.fp,
        c.tn,
        c.fn_,
        row.knee_epsilon.map_or("NA".to_string(), fmt_g12),
        fmt_g12(row.knee_fpr),
        fmt_g12(row.knee_tpr),
        row.knee_largest_module
    )
}

pub fn format_metagene_map(map: &MetageneMap) -> String {
    let mut s = String::from("metagene\tmember\n");
    for (m, g) in map.pairs() {
        let _ = writeln!(s, "{m}\t{g}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p() -> &'static Path {
        Path::new("test.tsv")
    }

    #[test]
    fn g12_formatting() {
        assert_eq!(fmt_g12(0.5), "0.5");
        assert_eq!(fmt_g12(1.0), "1");
        assert_eq!(fmt_g12(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_g12(2.0 / 3.0), "0.666666666667");
        assert_eq!(fmt_g12(123456.0), "123456");
        assert_eq!(fmt_g12(1e-7), "1e-07");
        assert_eq!(fmt_g12(1.5e13), "1.5e+13");
        assert_eq!(fmt_g12(-0.25), "-0.25");
        assert_eq!(fmt_g12(0.0001), "0.0001");
    }

    #[test]
    fn expression_layouts() {
        let text = "# comment\ngene\ts1\ts2\ts3\nA\t1\t2\t3\nB\t4\t5\t6.5\n";
        let e = parse_expression(text, p(), false).unwrap();
        assert_eq!(e.n_genes(), 2);
        assert_eq!(e.row(1), &[4.0, 5.0, 6.5]);
        let t = "sample\tA\tB\ns1\t1\t4\ns2\t2\t5\ns3\t3\t6.5\n";
        let et = parse_expression(t, p(), true).unwrap();
        assert_eq!(et, e);
        assert_eq!(parse_expression(&format_expression(&e), p(), false).unwrap(), e);
        assert!(matches!(
            parse_expression("gene\ts1\ts2\ts3\nA\t1\tx\t3\nB\t1\t2\t3\n", p(), false),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(parse_expression("gene\ts1\ts2\ts3\nA\t1\t2\n", p(), false).is_err());
    }

    #[test]
    fn dendrogram_with_internal_left_nodes() {
        let text = "# leaves\ta\tb\tc\td\na\tb\t0.1\nc\td\t0.2\n#0\t#1\t0.5\n";
        let t = parse_dendrogram(text, p()).unwrap();
        assert_eq!(t.merges()[2].left, 4);
        assert_eq!(t.merges()[2].right, 5);
        assert_eq!(format_dendrogram(&t), text);
        // leaf order recovered from merges when the header comment is absent
        let t2 = parse_dendrogram("a\tb\t0.1\nc\td\t0.2\n#0\t#1\t0.5\n", p()).unwrap();
        assert_eq!(t2, t);
    }

    #[test]
    fn modules_detect_overlap() {
        let m = parse_modules("m1\ta\tb\nm2\tb\tc\n", p()).unwrap();
        assert!(m.overlapping());
        let m = parse_modules("m1\ta\tb\nm2\tc\n", p()).unwrap();
        assert!(!m.overlapping());
        assert_eq!(format_modules(&m), "m1\ta\tb\nm2\tc\n");
        assert!(parse_modules("m1\n", p()).is_err());
    }

    #[test]
    fn edges_ignore_weight() {
        let e = parse_edges("R1\ta\t0.9\nR1\tb\n", p()).unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e[0].1.as_str(), "a");
    }

    #[test]
    fn sweep_round_trip() {
        let ms = |g: &[&[&str]]| {
            ModuleSet::new(
                g.iter()
                    .enumerate()
                    .map(|(i, m)| Module {
                        id: format!("M{}", i + 1),
                        genes: m.iter().map(|s| GeneId::new(*s).unwrap()).collect(),
                    })
                    .collect(),
                false,
            )
            .unwrap()
        };
        let sweep = vec![(0.25, ms(&[&["a", "b", "c"]])), (0.7, ms(&[&["a", "b"], &["c"]]))];
        assert_eq!(parse_sweep(&format_sweep(&sweep), p()).unwrap(), sweep);
    }

    proptest! {
        #[test]
        fn correlation_round_trip(n in 2usize..7, seed in proptest::collection::vec(0.0f64..=1.0, 21)) {
            let genes: Vec<GeneId> = (0..n).map(|i| GeneId::new(format!("g{i}")).unwrap()).collect();
            let mut v = DMatrix::from_element(n, n, 1.0);
            let mut k = 0;
            for i in 0..n {
                for j in (i + 1)..n {
                    v[(i, j)] = seed[k];
                    v[(j, i)] = seed[k];
                    k += 1;
                }
            }
            let meta = MatrixMeta { metric: Some(Metric::Mi3), supervised: true, deconvolved: false };
            let cm = CorrelationMatrix::new(genes, v, meta).unwrap();
            let back = parse_correlation(&format_correlation(&cm), p()).unwrap();
            prop_assert_eq!(back, cm);
        }

        #[test]
        fn expression_round_trip(vals in proptest::collection::vec(-1e6f64..1e6, 12)) {
            let genes = (0..3).map(|i| GeneId::new(format!("G{i}")).unwrap()).collect();
            let samples = (0..4).map(|i| format!("s{i}")).collect();
            let e = ExpressionMatrix::new(genes, samples, vals).unwrap();
            prop_assert_eq!(parse_expression(&format_expression(&e), p(), false).unwrap(), e);
        }
    }
}
