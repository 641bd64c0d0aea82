//! End-to-end checks of the command-line interface: round-trips,
//! reproducibility, and exit codes.

use odalm_core::io::read_kruskal_text;
use odalm_core::kruskal::is_orthogonal;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};

static DIR_SEQ: AtomicUsize = AtomicUsize::new(0);

fn work_dir(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!(
        "odalm-cli-{}-{}-{}",
        tag,
        std::process::id(),
        DIR_SEQ.fetch_add(1, Ordering::SeqCst)
    ));
    fs::create_dir_all(&d).unwrap();
    d
}

fn odalm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_odalm"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = odalm(args);
    assert!(
        out.status.success(),
        "odalm {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_decompose_eval_roundtrip() {
    let d = work_dir("roundtrip");
    let tensor = d.join("a.tns");
    let factors = d.join("k.txt");
    let trace = d.join("trace.csv");
    ok(&[
        "gen", "--kind", "lowrank", "--dims", "8x7x6", "--rank", "3", "--seed", "11", "--out",
        s(&tensor),
    ]);
    let summary = ok(&[
        "decompose",
        s(&tensor),
        "--method",
        "od-alm",
        "--rank",
        "3",
        "--out",
        s(&factors),
        "--trace",
        s(&trace),
    ]);
    assert!(summary.contains("method: od-alm"));
    assert!(summary.contains("rerr:"));

    // the stored od-alm result must be an orthogonal decomposition
    let k = read_kruskal_text(&mut BufReader::new(fs::File::open(&factors).unwrap())).unwrap();
    let (orth, max_off) = is_orthogonal(&k, 1e-10);
    assert!(orth, "stored decomposition off-diagonal {:.3e}", max_off);

    let report = ok(&["eval", s(&tensor), s(&factors)]);
    assert!(report.contains("rerr:"));
    assert!(report.contains("max_offdiag:"));
    assert!(report.contains("gram mode 0:"));

    let csv = fs::read_to_string(&trace).unwrap();
    assert!(csv.starts_with("k,theta,rel_change,inner_iters,rerr,seconds\n"));
    assert!(csv.lines().count() >= 2);
    fs::remove_dir_all(&d).unwrap();
}

#[test]
fn binary_format_roundtrip() {
    let d = work_dir("binary");
    let text = d.join("a.tns");
    let bin = d.join("a.bin");
    let args_common = [
        "gen", "--kind", "random", "--dims", "5x4x3", "--seed", "3", "--out",
    ];
    ok(&[&args_common[..], &[s(&text)]].concat());
    ok(&[&args_common[..], &[s(&bin), "--format", "binary"]].concat());
    // both formats must decompose to identical summaries
    let run = |p: &Path| {
        ok(&["decompose", s(p), "--method", "cp-als", "--rank", "2"])
            .lines()
            .filter(|l| !l.starts_with("seconds"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(run(&text), run(&bin));
    fs::remove_dir_all(&d).unwrap();
}

#[test]
fn fixed_seed_runs_are_reproducible() {
    let d = work_dir("determinism");
    let tensor = d.join("a.tns");
    ok(&[
        "gen", "--kind", "orth-noise", "--dims", "7x6x5", "--rank", "2", "--seed", "9",
        "--noise-level", "0.1", "--out", s(&tensor),
    ]);
    let mut artifacts = Vec::new();
    for run in 0..2 {
        let factors = d.join(format!("k{}.txt", run));
        let trace = d.join(format!("t{}.csv", run));
        ok(&[
            "decompose",
            s(&tensor),
            "--rank",
            "2",
            "--out",
            s(&factors),
            "--trace",
            s(&trace),
        ]);
        // the seconds column is wall time; everything else must match bytewise
        let trace_body: String = fs::read_to_string(&trace)
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect::<Vec<_>>()
            .join("\n");
        artifacts.push((fs::read(&factors).unwrap(), trace_body));
    }
    assert_eq!(artifacts[0].0, artifacts[1].0, "factor files differ");
    assert_eq!(artifacts[0].1, artifacts[1].1, "traces differ");
    fs::remove_dir_all(&d).unwrap();
}

#[test]
fn error_exit_codes() {
    let d = work_dir("errors");
    // missing input
    let out = odalm(&["decompose", s(&d.join("missing.tns")), "--rank", "2"]);
    assert_eq!(out.status.code(), Some(2));
    // malformed tensor file
    let bad = d.join("bad.tns");
    fs::write(&bad, "tensor v1\ndims: 2 2\n1.0\n").unwrap();
    let out = odalm(&["decompose", s(&bad), "--rank", "2"]);
    assert_eq!(out.status.code(), Some(2));
    // bad dims string
    let out = odalm(&["gen", "--kind", "random", "--dims", "3x0x2", "--out", s(&d.join("x"))]);
    assert_eq!(out.status.code(), Some(2));
    fs::remove_dir_all(&d).unwrap();
}

#[test]
fn bench_csv_is_deterministic() {
    let d = work_dir("bench");
    let (c1, c2) = (d.join("b1.csv"), d.join("b2.csv"));
    for p in [&c1, &c2] {
        ok(&[
            "bench", "--method", "cp-als", "--repeats", "1", "--seed", "5", "--out", s(p),
        ]);
    }
    let strip_time = |p: &Path| -> Vec<String> {
        fs::read_to_string(p)
            .unwrap()
            .lines()
            .map(|l| {
                let cells: Vec<&str> = l.split(',').collect();
                [&cells[..2], &cells[3..]].concat().join(",")
            })
            .collect()
    };
    let rows = strip_time(&c1);
    assert_eq!(rows, strip_time(&c2));
    assert_eq!(rows[0], "tensor,method,mean_rerr,mean_iters");
    assert_eq!(rows.len(), 5, "one row per benchmark tensor");
    assert!(rows[1].starts_with("a1-random,cp-als,"));
    fs::remove_dir_all(&d).unwrap();
}
