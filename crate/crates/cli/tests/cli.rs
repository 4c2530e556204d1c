use std::fs;
use std::path::Path;
use std::process::Command;

use autoconv::io::{read_metrics, read_report_meta};
use autoconv_cli::{run_cli, EXIT_FAILURE, EXIT_USAGE};

fn run(args: &[&str]) -> i32 {
    let mut argv = vec!["autoconv"];
    argv.extend_from_slice(args);
    run_cli(argv)
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_autoconv"))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Generates a small GaussPhase problem and returns the config path.
fn prepare(dir: &Path, noise: &str) -> std::path::PathBuf {
    prepare_sized(dir, noise, "120")
}

fn prepare_sized(dir: &Path, noise: &str, grid: &str) -> std::path::PathBuf {
    let k = dir.join("kernel");
    let d = dir.join("data");
    assert_eq!(run(&["gen-kernel", "--kind", "gauss-phase", "-N", grid, "--out", s(&k)]), 0);
    assert_eq!(run(&["gen-data", "--kernel", s(&k), "--noise", noise, "--seed", "5", "--out", s(&d)]), 0);
    let cfg = d.join("run.cfg");
    let text =
        fs::read_to_string(&cfg).unwrap().replace("n = 150", "n = 14").replace("beta_min = 1e-6", "beta_min = 1e-2");
    fs::write(&cfg, text).unwrap();
    cfg
}

#[test]
fn no_arguments_is_usage_error() {
    assert_eq!(run(&[]), EXIT_USAGE);
    let out = bin().output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn unknown_subcommand_or_flag_is_usage_error() {
    assert_eq!(run(&["frobnicate"]), EXIT_USAGE);
    assert_eq!(run(&["check", "--bogus"]), EXIT_USAGE);
    assert_eq!(run(&["gen-kernel", "--kind", "nope", "--out", "x"]), EXIT_USAGE);
    assert_eq!(run(&["check", "--only", "no-such-check"]), EXIT_USAGE);
    assert_eq!(run(&["--help"]), 0);
}

#[test]
fn check_all_passes() {
    let out = bin().args(["check", "--all"]).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert!(!stdout.contains("FAIL"));
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), autoconv::verify::check_names().len());
}

#[test]
fn solve_writes_all_outputs_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = prepare(dir.path(), "0.01");
    for mode in ["phase", "full"] {
        let a = dir.path().join(format!("{mode}-a"));
        let b = dir.path().join(format!("{mode}-b"));
        assert_eq!(run(&["solve", "--config", s(&cfg), "--mode", mode, "--out", s(&a)]), 0);
        assert_eq!(run(&["solve", "--config", s(&cfg), "--mode", mode, "--out", s(&b)]), 0);
        for f in ["recon_x.csv", "recon_y.csv", "design.csv", "design.meta", "metrics.csv"] {
            assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{mode}: {f}");
        }
        let meta = read_report_meta(&a.join("report.meta")).unwrap();
        let rows = read_metrics(&a.join("metrics.csv")).unwrap();
        let row = rows.iter().find(|r| r.0 == meta.beta_star).expect("β* row");
        assert_eq!((row.2.d, row.2.r, row.2.e2), (meta.d, meta.r, meta.e2));
        assert_eq!(meta.total_iters, rows.iter().map(|r| r.1).sum::<usize>());

        // The echoed config parses back to the effective settings.
        let echo = autoconv::io::parse_config(&fs::read_to_string(a.join("run.cfg")).unwrap()).unwrap();
        assert_eq!(echo.out, a);
    }
}

#[test]
fn metrics_recomputes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = prepare(dir.path(), "0");
    let out = dir.path().join("sol");
    assert_eq!(run(&["solve", "--config", s(&cfg), "--out", s(&out)]), 0);
    let res = bin().args(["metrics", "--config", s(&cfg), "--design", s(&out.join("design.csv"))]).output().unwrap();
    assert_eq!(res.status.code(), Some(0));
    let text = String::from_utf8_lossy(&res.stdout);
    let meta = read_report_meta(&out.join("report.meta")).unwrap();
    let get =
        |k: &str| -> f64 { text.lines().find_map(|l| l.strip_prefix(&format!("{k}="))).unwrap().parse().unwrap() };
    assert_eq!((get("d"), get("r"), get("e2")), (meta.d, meta.r, meta.e2));
}

#[test]
fn failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["solve", "--config", s(&dir.path().join("missing.cfg"))]), EXIT_FAILURE);
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "q = 1.5\n").unwrap();
    assert_eq!(run(&["solve", "--config", s(&cfg)]), EXIT_FAILURE);
    fs::write(&cfg, format!("phase = {}\n", s(&dir.path().join("nope.csv")))).unwrap();
    assert_eq!(run(&["solve", "--config", s(&cfg)]), EXIT_FAILURE);
    assert_eq!(run(&["gen-data", "--kernel", s(dir.path()), "--out", s(dir.path())]), EXIT_FAILURE);

    let good = prepare(dir.path(), "0");
    assert_eq!(run(&["solve", "--config", s(&good), "--mode", "both"]), EXIT_USAGE);
}

#[test]
fn probe_writes_decaying_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("decay.csv");
    assert_eq!(run(&["probe-illposed", "--out", s(&out)]), 0);
    let text = fs::read_to_string(&out).unwrap();
    let rows: Vec<Vec<f64>> =
        text.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.iter().map(|r| r[0]).collect::<Vec<_>>(), vec![4.0, 8.0, 16.0]);
    assert!(rows.windows(2).all(|w| w[1][2] < w[0][2]));
    assert!(rows.iter().all(|r| (r[1] - 0.1).abs() < 1e-12));
    assert_eq!(run(&["probe-illposed", "-N", "100"]), EXIT_FAILURE);
}

#[test]
fn thread_cap_gives_identical_results() {
    let dir = tempfile::tempdir().unwrap();
    // Large enough for the operator to run in parallel.
    let cfg = prepare_sized(dir.path(), "0.01", "300");
    let mut outs = Vec::new();
    for threads in ["1", "0", "3"] {
        let out = dir.path().join(format!("t{threads}"));
        let st = bin()
            .env("AUTOCONV_THREADS", threads)
            .args(["solve", "--config", s(&cfg), "--out", s(&out)])
            .status()
            .unwrap();
        assert!(st.success());
        outs.push(fs::read(out.join("recon_x.csv")).unwrap());
    }
    assert!(outs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn generated_files_have_provenance() {
    let dir = tempfile::tempdir().unwrap();
    prepare(dir.path(), "0.02");
    let prov = fs::read_to_string(dir.path().join("data/provenance.meta")).unwrap();
    assert!(prov.contains("seed=5") && prov.contains("data_noise=0.02") && prov.contains("rng=ChaCha8"));
    let kprov = fs::read_to_string(dir.path().join("kernel/provenance.meta")).unwrap();
    assert!(kprov.contains("kind=gauss-phase") && kprov.contains("N=120"));
    let gen = autoconv::io::read_kernel::<f64>(&dir.path().join("kernel")).unwrap();
    assert_eq!(gen.grid_count(), 120);
}
