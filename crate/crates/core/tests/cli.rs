use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn modclust(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modclust"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn modclust")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = modclust(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn synth(dir: &Path) {
    ok(
        &[
            "synth",
            "--genes",
            "40",
            "--modules",
            "4",
            "--samples",
            "20",
            "--p-corrupt",
            "0.2",
            "--seed",
            "3",
            "--out-dir",
            ".",
        ],
        dir,
    );
}

fn read(p: PathBuf) -> String {
    fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn synth_writes_benchmark_files() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path());
    for f in ["expr.tsv", "truth.gmt", "edges.tsv", "priors.gmt"] {
        assert!(tmp.path().join(f).is_file(), "{f}");
    }
    assert_eq!(read(tmp.path().join("truth.gmt")).lines().count(), 4);
}

#[test]
fn stepwise_commands_match_run_without_supervision_or_deconvolution() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    ok(
        &["correlate", "--expr", "expr.tsv", "--metric", "dcc", "-o", "corr.tsv"],
        d,
    );
    ok(&["cluster", "--matrix", "corr.tsv", "-o", "tree.txt"], d);
    ok(&["sweep", "--dendrogram", "tree.txt", "-o", "sweep.tsv"], d);
    ok(
        &["cut", "--dendrogram", "tree.txt", "--epsilon", "0.6", "-o", "mods.gmt"],
        d,
    );

    for prior in [None, Some("priors.gmt")] {
        let out = format!("run_{}", prior.is_some());
        let mut args = vec![
            "run",
            "--expr",
            "expr.tsv",
            "--metric",
            "dcc",
            "--epsilon",
            "0.6",
            "--out-dir",
            &out,
        ];
        if let Some(p) = prior {
            args.extend(["--prior", p, "--rho", "off"]);
        }
        ok(&args, d);
        assert_eq!(read(d.join(&out).join("dendrogram.txt")), read(d.join("tree.txt")));
        assert_eq!(read(d.join(&out).join("sweep.tsv")), read(d.join("sweep.tsv")));
        assert_eq!(read(d.join(&out).join("modules.tsv")), read(d.join("mods.gmt")));
    }
}

#[test]
fn stepwise_supervision_and_deconvolution_match_run() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    ok(&["correlate", "--expr", "expr.tsv", "-o", "corr.tsv"], d);
    ok(
        &[
            "supervise",
            "--matrix",
            "corr.tsv",
            "--priors",
            "priors.gmt",
            "--rho",
            "0.25",
            "-o",
            "sup.tsv",
        ],
        d,
    );
    ok(
        &["deconvolve", "--matrix", "sup.tsv", "--delta", "0.35", "-o", "dec.tsv"],
        d,
    );
    ok(&["cluster", "--matrix", "dec.tsv", "-o", "tree.txt"], d);
    ok(&["sweep", "--dendrogram", "tree.txt", "-o", "sweep.tsv"], d);
    let metrics = ok(
        &[
            "evaluate",
            "--sweep",
            "sweep.tsv",
            "--gold",
            "truth.gmt",
            "--roc",
            "roc.tsv",
        ],
        d,
    );

    ok(
        &[
            "run",
            "--expr",
            "expr.tsv",
            "--prior",
            "priors.gmt",
            "--rho",
            "0.25",
            "--deconvolve",
            "--delta",
            "0.35",
            "--gold",
            "truth.gmt",
            "--out-dir",
            "out",
        ],
        d,
    );
    assert_eq!(read(d.join("out/dendrogram.txt")), read(d.join("tree.txt")));
    assert_eq!(read(d.join("out/roc.tsv")), read(d.join("roc.tsv")));
    assert_eq!(read(d.join("out/metrics.tsv")), metrics);
    let manifest = read(d.join("out/manifest.tsv"));
    assert!(manifest.contains("rho\t0.25"));
    assert!(manifest.contains("output\troc.tsv\t"));
}

#[test]
fn matrices_round_trip_through_files() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    let a = ok(&["correlate", "--expr", "expr.tsv", "--metric", "mi2"], d);
    fs::write(d.join("a.tsv"), &a).unwrap();
    let b = ok(
        &[
            "supervise",
            "--matrix",
            "a.tsv",
            "--rho",
            "1",
            "--priors",
            "priors.gmt",
            "-o",
            "b.tsv",
        ],
        d,
    );
    assert!(b.is_empty());
    let body = |s: &str| {
        s.lines()
            .filter(|l| !l.starts_with('#'))
            .map(str::to_owned)
            .collect::<Vec<_>>()
    };
    assert_eq!(body(&a), body(&read(d.join("b.tsv"))));
}

#[test]
fn local_supervision_writes_a_directory_per_cluster() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    ok(&["correlate", "--expr", "expr.tsv", "-o", "corr.tsv"], d);
    ok(
        &[
            "supervise",
            "--matrix",
            "corr.tsv",
            "--priors",
            "priors.gmt",
            "--mode",
            "local",
            "-o",
            "local",
        ],
        d,
    );
    let n = fs::read_dir(d.join("local")).unwrap().count();
    assert_eq!(n, read(d.join("priors.gmt")).lines().count());
}

#[test]
fn derive_gold_and_metagene_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("net.tsv"), "tf1\tg1\ntf1\tg2\ntf2\tg3\ntf2\tg4\ntf2\tg5\n").unwrap();
    let gold = ok(&["derive-gold", "--edges", "net.tsv", "--kind", "minimal"], d);
    assert_eq!(gold.lines().filter(|l| !l.starts_with('#')).count(), 2);

    fs::write(
        d.join("e.tsv"),
        "gene\ts1\ts2\ts3\ts4\na\t1\t2\t3\t4\nb\t2\t4\t6\t8.1\nc\t4\t1\t3\t2\n",
    )
    .unwrap();
    let merged = ok(&["metagene", "--expr", "e.tsv", "--tau", "0.95", "--map", "map.tsv"], d);
    assert_eq!(merged.lines().filter(|l| !l.starts_with('#')).count(), 3);
    assert!(read(d.join("map.tsv")).lines().count() >= 3);
}

#[test]
fn exit_codes_follow_error_kind() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();

    let missing = modclust(&["correlate", "--expr", "nope.tsv"], d);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("modclust: "));

    fs::write(d.join("flat.tsv"), "gene\ts1\ts2\ts3\na\t1\t2\t3\nb\t5\t5\t5\n").unwrap();
    assert_eq!(modclust(&["correlate", "--expr", "flat.tsv"], d).status.code(), Some(3));

    fs::write(d.join("pred.gmt"), "m1\ta\tb\tc\n").unwrap();
    assert_eq!(
        modclust(&["evaluate", "--pred", "pred.gmt", "--gold", "pred.gmt"], d)
            .status
            .code(),
        Some(0)
    );
    fs::write(d.join("sweep.tsv"), "0.5\tm1\ta\tb\tc\n").unwrap();
    assert_eq!(
        modclust(&["evaluate", "--sweep", "sweep.tsv", "--gold", "pred.gmt"], d)
            .status
            .code(),
        Some(4)
    );

    synth(d);
    let no_threshold = modclust(&["run", "--expr", "expr.tsv", "--out-dir", "o"], d);
    assert_eq!(no_threshold.status.code(), Some(2));
    assert!(!d.join("o").exists());
}
