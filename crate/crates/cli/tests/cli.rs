use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use descent::Trace;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_descent"))
}

fn experiment(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("experiments").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn run_config(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn read_trace(path: &Path) -> Trace {
    Trace::read_csv(fs::read(path).unwrap().as_slice()).unwrap()
}

fn write_series(dir: &Path, name: &str, gap: impl Fn(f64) -> f64, n: usize) -> PathBuf {
    let mut s = String::from("k,f_value,gap,grad_norm,alpha,beta,dist_to_opt\n");
    for k in 0..=n {
        let g = if k == 0 { 10.0 } else { gap(k as f64) };
        s.push_str(&format!("{k},{g:.16e},{g:.16e},1,0.1,0,\n"));
    }
    let path = dir.join(name);
    fs::write(&path, s).unwrap();
    path
}

#[test]
fn sphere_experiment_meets_the_final_bound() {
    let dir = TempDir::new().unwrap();
    let out = run_config(&experiment("sphere_height.cfg"), dir.path(), &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let trace = read_trace(&dir.path().join("trace_seed0.csv"));
    let last = trace.last().unwrap();
    assert_eq!(last.k, 10_000);
    assert!(last.gap.unwrap() <= PI * PI / 2e4);
}

#[test]
fn sgd_exponent_out_of_range_exits_2() {
    let dir = TempDir::new().unwrap();
    let out = run_config(&experiment("sgd_montecarlo.cfg"), dir.path(), &["--override", "schedule.alpha=powerlaw c=1 gamma=1.2"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("(0.5, 1]"), "{}", stderr(&out));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let args = ["--seed", "17", "--override", "run.max_iters=500", "--override", "run.seed_traces=true", "--coords"];
    assert_eq!(code(&run_config(&experiment("sgd_montecarlo.cfg"), a.path(), &args)), 0);
    assert_eq!(code(&run_config(&experiment("sgd_montecarlo.cfg"), b.path(), &args)), 0);
    let name = "trace_seed17.csv";
    assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
}

#[test]
fn config_echo_reproduces_the_run() {
    let first = TempDir::new().unwrap();
    let args = ["--seeds", "3..5", "--override", "run.max_iters=300", "--override", "run.seed_traces=true"];
    assert_eq!(code(&run_config(&experiment("sgd_montecarlo.cfg"), first.path(), &args)), 0);
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(first.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["format_version"], 1);
    assert_eq!(summary["seeds"]["count"], 3);
    let echo = first.path().join("echo.cfg");
    fs::write(&echo, summary["config"].as_str().unwrap()).unwrap();

    let second = TempDir::new().unwrap();
    assert_eq!(code(&run_config(&echo, second.path(), &[])), 0);
    for name in ["trace_seed3.csv", "trace_seed4.csv", "trace_seed5.csv", "trace_mean.csv"] {
        assert_eq!(fs::read(first.path().join(name)).unwrap(), fs::read(second.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn summary_round_trips() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&run_config(&experiment("quadratic_table1.cfg"), dir.path(), &[])), 0);
    let text = fs::read_to_string(dir.path().join("summary.json")).unwrap();
    let summary: descent_cli::summary::Summary = serde_json::from_str(&text).unwrap();
    assert_eq!(summary.experiments.len(), 2);
    assert_eq!(serde_json::to_string_pretty(&summary).unwrap() + "\n", text);
}

#[test]
fn sweeps_do_not_depend_on_thread_count() {
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let dir = TempDir::new().unwrap();
        let out = bin()
            .env("DESCENT_THREADS", threads)
            .args(["run", "--config", experiment("sgd_montecarlo.cfg").to_str().unwrap(), "--out"])
            .arg(dir.path())
            .args(["--seeds", "1..20", "--override", "run.max_iters=200"])
            .output()
            .unwrap();
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        outputs.push(fs::read(dir.path().join("trace_mean.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);

    let dir = TempDir::new().unwrap();
    let out = bin()
        .env("DESCENT_THREADS", "zero")
        .args(["run", "--config", experiment("sgd_table2.cfg").to_str().unwrap(), "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn table_configs_reproduce_first_rows() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&run_config(&experiment("quadratic_table1.cfg"), dir.path(), &[])), 0);
    let normal = read_trace(&dir.path().join("normal_seed0.csv"));
    assert_eq!(normal.records[1].x.as_ref().unwrap().as_slice(), &[0.25, 0.5]);
    let adaptive = read_trace(&dir.path().join("adaptive_seed0.csv"));
    assert_eq!(adaptive.records[1].alpha, 0.25);

    let dir = TempDir::new().unwrap();
    assert_eq!(code(&run_config(&experiment("sgd_table2.cfg"), dir.path(), &[])), 0);
    let t = read_trace(&dir.path().join("trace_seed0.csv"));
    assert_eq!(t.records[1].x.as_ref().unwrap()[0], -0.5);
    assert_eq!(t.records[1].f_value, 0.125);
    assert!((t.records[2].alpha - 0.574).abs() <= 5e-4);
}

#[test]
fn csv_layout_is_exact() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&run_config(&experiment("sgd_table2.cfg"), dir.path(), &[])), 0);
    let text = fs::read_to_string(dir.path().join("trace_seed0.csv")).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k,f_value,gap,grad_norm,alpha,beta,dist_to_opt,x_0"));
    assert_eq!(
        lines.next(),
        Some("0,5.0000000000000000e1,5.0000000000000000e1,1.0000000000000000e1,0.0000000000000000e0,0.0000000000000000e0,1.0000000000000000e1,1.0000000000000000e1")
    );
    for line in text.lines() {
        assert_eq!(line.split(',').count(), 8);
        assert!(!line.ends_with(','));
    }
    assert!(text.ends_with('\n'));
}

#[test]
fn fit_recovers_synthetic_rates() {
    let dir = TempDir::new().unwrap();
    let path = write_series(dir.path(), "p2.csv", |k| 5.0 / (k * k), 1000);
    let out = run(&["fit", path.to_str().unwrap(), "--window", "1:1000"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let fit = json(&out);
    assert!((fit["exponent"].as_f64().unwrap() - 2.0).abs() <= 1e-6);
    assert!((fit["constant"].as_f64().unwrap() - 5.0).abs() <= 1e-6);

    assert_eq!(code(&run(&["fit", path.to_str().unwrap(), "--window", "2000:3000"])), 2);
    assert_eq!(code(&run(&["fit", path.to_str().unwrap(), "--column", "nope"])), 2);

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "k,f_value,gap,grad_norm,alpha,beta,dist_to_opt\n0,1,1,1,0,0,\n1,1,x,1,0,0,\n").unwrap();
    let out = run(&["fit", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("row 3"), "{}", stderr(&out));
}

#[test]
fn check_bound_exit_codes() {
    let dir = TempDir::new().unwrap();
    let exact = write_series(dir.path(), "exact.csv", |k| 3.0 / k, 500);
    let out = run(&["check-bound", exact.to_str().unwrap(), "--p", "1", "--C", "3", "--tol", "1e-9"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!((json(&out)["worst_ratio"].as_f64().unwrap() - 1.0).abs() <= 1e-9);

    let slow = write_series(dir.path(), "slow.csv", |k| 3.0 / k.powf(0.9), 500);
    let out = run(&["check-bound", slow.to_str().unwrap(), "--p", "1", "--anchor", "10"]);
    assert_eq!(code(&out), 1);
    assert_eq!(json(&out)["worst_k"], 500);
    assert!(stderr(&out).contains("worst k = 500"));

    assert_eq!(code(&run(&["check-bound", exact.to_str().unwrap(), "--p", "1", "--anchor", "900"])), 2);
}

#[test]
fn check_bound_on_the_sphere_trace() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&run_config(&experiment("sphere_height.cfg"), dir.path(), &[])), 0);
    let trace = dir.path().join("trace_seed0.csv");
    let trace = trace.to_str().unwrap();
    let out = run(&["check-bound", trace, "--p", "1", "--C", "4.9348", "--anchor", "11"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    // Near the pole the gap stays close to 2 while pi^2 / (2k) drops below it.
    let out = run(&["check-bound", trace, "--p", "1", "--C", "4.9348"]);
    assert_eq!(code(&out), 1);
    assert!(json(&out)["worst_k"].as_u64().unwrap() <= 11);
}

#[test]
fn gradcheck_accepts_exact_gradients_and_catches_corruption() {
    let out = run(&["gradcheck", "--objective", "quadratic", "--A", "4 1; 1 3", "--b", "1 2", "--samples", "100"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(json(&out)["max_relative_error"].as_f64().unwrap() <= 1e-5);
    let out = run(&["gradcheck", "--objective", "sphere_height", "--dim", "3", "--samples", "100", "--seed", "4"]);
    assert_eq!(code(&out), 0);
    let out = run(&["gradcheck", "--config", experiment("sgd_table2.cfg").to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let out = run(&["gradcheck", "--objective", "quadratic", "--A", "4 1; 1 3", "--b", "1 2", "--perturb", "1e-3"]);
    assert_eq!(code(&out), 1);
    assert_eq!(json(&out)["passed"], false);
    assert_eq!(code(&run(&["gradcheck", "--objective", "cubic"])), 2);
    assert_eq!(code(&run(&["gradcheck", "--objective", "quadratic", "--A", "1 2; 3 4"])), 2);
}

#[test]
fn divergence_exits_3_and_keeps_the_trace() {
    let dir = TempDir::new().unwrap();
    let out = run_config(
        &experiment("quadratic_table1.cfg"),
        dir.path(),
        &["--override", "run.max_iters=5000"],
    );
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stderr(&out).contains("at k = "), "{}", stderr(&out));
    // the normal variant pins its own step; the step-ratio variant is the one that blows up
    let t = read_trace(&dir.path().join("adaptive_seed0.csv"));
    assert!(t.len() < 5001);
    assert!(t.abort.is_some() || !t.last().unwrap().f_value.is_finite());
    assert!(dir.path().join("summary.json").exists());
}

#[test]
fn usage_and_input_errors_exit_2() {
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["run", "--config", "/nonexistent.cfg", "--out", "/tmp/x"])), 2);
    assert_eq!(code(&run(&["run"])), 2);
    assert_eq!(code(&run(&["--help"])), 0);

    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("typo.cfg");
    fs::write(&cfg, "[objective]\nkind = half_square\n[schedule]\nalpha = fixed 0.5\n[run]\nmax_iter = 10\n").unwrap();
    let out = run_config(&cfg, dir.path(), &[]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 6") && stderr(&out).contains("run.max_iter"), "{}", stderr(&out));
    let out = run_config(&experiment("sgd_table2.cfg"), dir.path(), &["--override", "run.bogus=1"]);
    assert_eq!(code(&out), 2);
}
