use std::path::Path;
use std::process::{Command, Output};

use hcspmm_core::DenseMatrix;
use serde_json::Value;

fn hcspmm(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hcspmm"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> Value {
    let out = hcspmm(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("report is JSON")
}

fn metric(r: &Value, key: &str) -> f64 {
    r["metrics"][key].as_f64().unwrap_or_else(|| panic!("no metric {key} in {r}"))
}

fn code(args: &[&str], cwd: &Path) -> i32 {
    hcspmm(args, cwd).status.code().expect("exit code")
}

#[test]
fn convert_single_edge() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("e.txt"), "0 1\n").unwrap();
    let r = ok(&["convert", "--input", "e.txt", "--out", "a.mtx"], dir.path());
    assert_eq!(r["command"], "convert");
    assert_eq!(metric(&r, "nnz"), 2.0);
    assert_eq!(metric(&r, "num_vertices"), 2.0);
    assert_eq!(metric(&r, "one_based"), 0.0);
    let text = std::fs::read_to_string(dir.path().join("a.mtx")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("%%MatrixMarket"));
    assert_eq!(lines[1], "2 2 2");
    assert_eq!(&lines[2..], ["1 2 1", "2 1 1"]);
}

#[test]
fn convert_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("e.txt"), "# ring\n1 2\n2 3\n3 1\n3 3\n").unwrap();
    let r = ok(&["convert", "--input", "e.txt", "--out", "a.mtx"], dir.path());
    assert_eq!(metric(&r, "one_based"), 1.0);
    assert_eq!(metric(&r, "num_vertices"), 3.0);
    ok(&["convert", "--input", "a.mtx", "--out", "b.mtx"], dir.path());
    ok(&["convert", "--input", "b.mtx", "--format", "mtx", "--out", "c.mtx"], dir.path());
    let a = std::fs::read(dir.path().join("a.mtx")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.mtx")).unwrap());
    assert_eq!(a, std::fs::read(dir.path().join("c.mtx")).unwrap());
}

#[test]
fn directed_edge_list_keeps_one_entry() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("e.txt"), "0 1\n").unwrap();
    let r = ok(&["convert", "--input", "e.txt", "--directed", "--out", "a.mtx"], dir.path());
    assert_eq!(metric(&r, "nnz"), 1.0);
}

#[test]
fn identity_pipeline_checksum_is_sum_of_x() {
    let dir = tempfile::tempdir().unwrap();
    let n = 37;
    let mut mtx = format!("%%MatrixMarket matrix coordinate pattern general\n{n} {n} {n}\n");
    for i in 1..=n {
        mtx.push_str(&format!("{i} {i}\n"));
    }
    std::fs::write(dir.path().join("id.mtx"), mtx).unwrap();
    let r = ok(&["--seed", "9", "pipeline", "--graph", "id.mtx", "--dim", "4"], dir.path());
    let x = DenseMatrix::<f64>::random(n, 4, 9);
    let want = x.data().iter().fold(0.0, |a, v| a + v);
    assert_eq!(metric(&r, "spmm_checksum"), want);
    assert_eq!(metric(&r, "windows_total"), 3.0);
    assert_eq!(metric(&r, "nnz"), n as f64);
}

#[test]
fn pipeline_repeats_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--threads", "1", "pipeline", "--graph", "gen:gnp:300:0.03", "--loa"];
    let a = hcspmm(&args, dir.path());
    let b = hcspmm(&args, dir.path());
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn loa_raises_tile_windows_on_scrambled_communities() {
    let dir = tempfile::tempdir().unwrap();
    let r = ok(
        &["pipeline", "--graph", "gen:block:32:16:0.6:0.005", "--scramble", "5", "--loa"],
        dir.path(),
    );
    assert!(metric(&r, "windows_tile_after_loa") > metric(&r, "windows_tile_before_loa"), "{r}");
    assert!(metric(&r, "mean_ci_after_loa") > metric(&r, "mean_ci_before_loa"));
    assert_eq!(metric(&r, "windows_tile"), metric(&r, "windows_tile_after_loa"));

    let l = ok(
        &[
            "loa", "--graph", "gen:block:32:16:0.6:0.005", "--scramble", "5", "--perm", "perm.csv", "--out", "r.mtx",
            "--windows", "w.csv",
        ],
        dir.path(),
    );
    assert_eq!(metric(&l, "windows_tile_after"), metric(&r, "windows_tile_after_loa"));
    assert_eq!(metric(&l, "mean_ci_before"), metric(&r, "mean_ci_before_loa"));
    let perm = std::fs::read_to_string(dir.path().join("perm.csv")).unwrap();
    let mut seen: Vec<usize> = perm
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    seen.sort_unstable();
    assert_eq!(seen, (0..512).collect::<Vec<_>>());
    let w = std::fs::read_to_string(dir.path().join("w.csv")).unwrap();
    assert_eq!(w.lines().count(), 33);
}

#[test]
fn partition_report_counts_windows() {
    let dir = tempfile::tempdir().unwrap();
    let r = ok(&["partition-report", "--matrix", "gen:path:40", "--out", "p.csv"], dir.path());
    // 40 rows -> windows of 16, 16, 8
    assert_eq!(metric(&r, "windows"), 3.0);
    assert_eq!(metric(&r, "nnz"), 78.0);
    let csv = std::fs::read_to_string(dir.path().join("p.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "window_id,nnz,ncols,density,computing_intensity");
    assert_eq!(lines.len(), 4);
    // first window of a path: rows 0..16 touch columns 0..=16
    assert!(lines[1].starts_with("0,31,17,"), "{}", lines[1]);
}

#[test]
fn train_then_classify() {
    let dir = tempfile::tempdir().unwrap();
    let r = ok(&["train-selector", "--grid", "random:2000", "--out", "m.json"], dir.path());
    assert!(metric(&r, "holdout_accuracy") >= 0.9, "{r}");
    assert_eq!(metric(&r, "samples"), 2000.0);
    assert_eq!(metric(&r, "samples_holdout"), 400.0);
    let model: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("m.json")).unwrap()).unwrap();
    for key in ["w_ncols", "w_density", "bias", "feature_means", "feature_scales"] {
        assert!(model.get(key).is_some(), "model lacks {key}");
    }

    let c = ok(
        &["classify", "--model", "m.json", "--matrix", "gen:clique:16", "--out", "a.csv"],
        dir.path(),
    );
    // one fully dense 16x16 window goes to the tile path
    assert_eq!(metric(&c, "windows_tile"), 1.0);
    let a = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(a.lines().collect::<Vec<_>>(), ["window_id,path,nnz,ncols,density", "0,tile,240,16,0.9375"]);
}

#[test]
fn sweep_finds_crossover() {
    let dir = tempfile::tempdir().unwrap();
    let r = ok(&["sweep", "--ncols", "32", "--dim", "32", "--out", "s.csv"], dir.path());
    // shipped params: t_s = 1.02e-6 + 1e-9 * nnz * 32,
    // t_t = 1e-6 + 4 * 2 * 1e-8 + 32 * 2 * 2e-8 = 2.36e-6
    let first = (32..=480)
        .find(|&nnz| 1.02e-6 + 1e-9 * nnz as f64 * 32.0 >= 2.36e-6 - 1e-18)
        .unwrap();
    assert_eq!(metric(&r, "crossover_density"), first as f64 / 512.0);
    assert_eq!(metric(&r, "points"), 449.0);
    let csv = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(csv.lines().count(), 450);
}

#[test]
fn calibrate_recovers_csv_timings() {
    let dir = tempfile::tempdir().unwrap();
    let (a_s, b_s, a_t, b_t, g_t) = (2e-6, 3e-9, 1.5e-6, 4e-8, 6e-8);
    let mut csv = String::from("ncols,density,t_scalar,t_tile\n");
    for ncols in [1usize, 5, 8, 17, 32, 64, 100, 130] {
        for k in 1..=15usize {
            let nnz = k * ncols;
            let ts = a_s + b_s * (nnz * 32) as f64;
            let tt = a_t + ncols.div_ceil(8) as f64 * 2.0 * b_t + ncols as f64 * 2.0 * g_t;
            csv.push_str(&format!("{ncols},{},{ts},{tt}\n", nnz as f64 / (16 * ncols) as f64));
        }
    }
    std::fs::write(dir.path().join("t.csv"), csv).unwrap();
    let r = ok(&["calibrate", "--provider", "csv:t.csv", "--out", "p.json"], dir.path());
    for (k, want) in [
        ("alpha_scalar", a_s),
        ("beta_scalar", b_s),
        ("alpha_tile", a_t),
        ("beta_tile", b_t),
        ("gamma_tile", g_t),
    ] {
        let got = metric(&r, k);
        assert!((got - want).abs() <= 1e-6 * want, "{k}: {got} vs {want}");
    }
    let p: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("p.json")).unwrap()).unwrap();
    assert_eq!(p["provenance"]["provider"], "csv");
    assert_eq!(p["provenance"]["sample_count"], metric(&r, "samples_fit") as u64);

    // the fitted params drive the sweep
    ok(&["sweep", "--params", "p.json"], dir.path());
}

#[test]
fn spmm_modes_agree_and_check() {
    let dir = tempfile::tempdir().unwrap();
    let mut sums = Vec::new();
    for mode in ["scalar", "tile", "hybrid"] {
        let r = ok(
            &["spmm", "--matrix", "gen:gnp:200:0.05", "--dense", "random:dim=24,seed=3", "--mode", mode, "--check"],
            dir.path(),
        );
        assert_eq!(metric(&r, "max_rel_err"), 0.0);
        assert_eq!(metric(&r, "entries_scalar") + metric(&r, "entries_tile"), metric(&r, "nnz"));
        sums.push(metric(&r, "checksum"));
    }
    assert!(sums.windows(2).all(|w| w[0] == w[1]), "{sums:?}");
    let r = ok(
        &["--precision", "f32", "spmm", "--matrix", "gen:gnp:200:0.05", "--mode", "hybrid", "--check"],
        dir.path(),
    );
    assert!(metric(&r, "max_rel_err") <= 1e-5);
}

#[test]
fn spmm_reads_dense_csv_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("x.csv"), "1,2\n3,4\n5,6\n").unwrap();
    std::fs::write(
        dir.path().join("a.mtx"),
        "%%MatrixMarket matrix coordinate real general\n2 3 3\n1 1 2\n1 3 1\n2 2 -1\n",
    )
    .unwrap();
    let r = ok(
        &["spmm", "--matrix", "a.mtx", "--dense", "x.csv", "--mode", "tile", "--out", "z.csv", "--stats", "s.json"],
        dir.path(),
    );
    // [2 0 1; 0 -1 0] * [1 2; 3 4; 5 6] = [7 10; -3 -4]
    assert_eq!(metric(&r, "checksum"), 10.0);
    let z = std::fs::read_to_string(dir.path().join("z.csv")).unwrap();
    let vals: Vec<f64> = z.split([',', '\n']).filter(|s| !s.is_empty()).map(|s| s.parse().unwrap()).collect();
    assert_eq!(vals, [7.0, 10.0, -3.0, -4.0]);
    let s: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("s.json")).unwrap()).unwrap();
    assert_eq!(s["windows_tile"], 1);
    assert_eq!(s["entries_tile"], 3);

    std::fs::write(dir.path().join("short.csv"), "1,2\n").unwrap();
    assert_eq!(code(&["spmm", "--matrix", "a.mtx", "--dense", "short.csv"], dir.path()), 2);
}

#[test]
fn gnn_bench_reports_traffic() {
    let dir = tempfile::tempdir().unwrap();
    let r = ok(
        &["gnn-bench", "--graph", "gen:gnp:300:0.02", "--din", "8", "--dout", "5", "--repeats", "1", "--out", "b.json"],
        dir.path(),
    );
    assert!(metric(&r, "max_rel_diff") <= 1e-12);
    assert_eq!(metric(&r, "fused_forward_intermediate_writes"), 0.0);
    assert_eq!(metric(&r, "unfused_forward_intermediate_writes"), 300.0 * 8.0);
    assert!(metric(&r, "fused_forward_pass_launches") < metric(&r, "unfused_forward_pass_launches"));
    assert!(r.get("timings").is_none());
    let b: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("b.json")).unwrap()).unwrap();
    assert_eq!(b["modes"].as_array().unwrap().len(), 2);
}

#[test]
fn report_goes_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = hcspmm(&["--report", "r.json", "partition-report", "--matrix", "gen:star:20"], dir.path());
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(r["command"], "partition-report");
    assert_eq!(r["inputs"]["seed"], "42");
}

#[test]
fn timings_are_opt_in() {
    let dir = tempfile::tempdir().unwrap();
    let r = ok(&["--timings", "spmm", "--matrix", "gen:path:50", "--mode", "scalar"], dir.path());
    assert!(r["timings"]["spmm_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&["--help"], dir.path()), 0);
    assert_eq!(code(&["bogus"], dir.path()), 1);
    assert_eq!(code(&["spmm", "--no-such-flag"], dir.path()), 1);
    assert_eq!(code(&["--threads", "0", "sweep"], dir.path()), 1);
    assert_eq!(code(&["spmm", "--matrix", "missing.mtx"], dir.path()), 2);
    std::fs::write(dir.path().join("bad.mtx"), "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 x 1\n").unwrap();
    let out = hcspmm(&["convert", "--input", "bad.mtx", "--out", "o.mtx"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
    assert!(out.stdout.is_empty());
    assert_eq!(code(&["pipeline", "--graph", "gen:nope:3"], dir.path()), 2);
    assert_eq!(code(&["train-selector", "--grid", "tiny", "--out", "m.json"], dir.path()), 2);
    assert_eq!(code(&["gnn-bench", "--graph", "gen:path:5", "--norm", "weird"], dir.path()), 2);
    assert_eq!(code(&["classify", "--model", "missing.json", "--matrix", "gen:path:5"], dir.path()), 2);
}
