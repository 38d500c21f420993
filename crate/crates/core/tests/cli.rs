//! End-to-end tests of the command-line interface: flags, exit codes,
//! output files, and determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use newton_imbed::grid::{self, Field};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_newton-imbed")
}

fn work_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("newton-imbed-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_cli(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary must spawn")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("missing {name}: {e}"))
}

#[test]
fn solve_writes_trace_solution_summary() {
    let dir = work_dir("solve");
    let out = run_cli(&[
        "solve",
        "--domain",
        "ball",
        "--n",
        "3",
        "--R",
        "1",
        "--res",
        "127",
        "--f",
        "arccot:1,0,1,0",
        "--schedule",
        "uniform:4",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );

    let summary = read(&dir, "summary.txt");
    let residual: f64 = summary
        .lines()
        .find_map(|l| l.strip_prefix("final_residual: "))
        .expect("summary has final_residual")
        .parse()
        .unwrap();
    assert!(residual <= 1e-8, "final residual {residual}");

    let trace = read(&dir, "trace.csv");
    assert!(
        trace.starts_with("j,t,m,diff_h1,diff_h2,contraction_ratio,a_estimate,cg_iters,halved\n")
    );

    let field = Field::parse(&read(&dir, "solution.field")).expect("parseable field dump");
    assert_eq!(field.grid().res(), 127);
    assert!(field.max_abs() > 0.01);
}

#[test]
fn solve_stiff_without_adapt_reports_contraction_failure() {
    let dir = work_dir("stiff");
    let out = run_cli(&[
        "solve",
        "--domain",
        "ball",
        "--res",
        "127",
        "--f",
        "arccot:50,13,0.001,0",
        "--schedule",
        "explicit:0,1",
        "--no-adapt",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(6),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("contraction failure"), "stderr: {stderr}");
}

#[test]
fn solve_constant_zero_is_identically_zero_in_one_step() {
    let dir = work_dir("const0");
    let out = run_cli(&[
        "solve",
        "--f",
        "const:0",
        "--res",
        "31",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let field = Field::parse(&read(&dir, "solution.field")).unwrap();
    assert_eq!(field.max_abs(), 0.0);
    // Default schedule is the single interval {0, 1}: one time step.
    let trace = read(&dir, "trace.csv");
    let steps: std::collections::HashSet<&str> = trace
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(
        steps.len(),
        1,
        "expected exactly one time step, trace:\n{trace}"
    );
}

#[test]
fn mesa_prints_membership_verdicts() {
    let dir = work_dir("mesa");
    let out = run_cli(&[
        "mesa",
        "--n",
        "3",
        "--alpha",
        "0.2",
        "--depth",
        "16",
        "--a",
        "0",
        "--b",
        "1",
        "--T",
        "1",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("convergent"), "stdout: {stdout}");
    assert!(read(&dir, "partition.csv").starts_with("m,r_plus,s_plus,s_minus,r_minus\n"));
    assert_eq!(read(&dir, "levels.csv").lines().count(), 17);

    let out = run_cli(&[
        "mesa",
        "--n",
        "3",
        "--alpha",
        "0.8",
        "--depth",
        "16",
        "--a",
        "0",
        "--b",
        "1",
        "--T",
        "1",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("divergent"));
}

#[test]
fn oscillation_reports_identical_values() {
    let dir = work_dir("osc");
    let out = run_cli(&[
        "oscillation",
        "--f",
        "arccot:1,0,1,0",
        "--deltas",
        "0.5,0.05,0.005",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = read(&dir, "oscillation.csv");
    let oscillations: Vec<&str> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').next_back().unwrap())
        .collect();
    assert_eq!(oscillations.len(), 3);
    assert!(
        oscillations.windows(2).all(|w| w[0] == w[1]),
        "columns differ: {csv}"
    );
    let value: f64 = oscillations[0].parse().unwrap();
    assert!((value - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
}

#[test]
fn bump_writes_norm_table() {
    let dir = work_dir("bump");
    let out = run_cli(&[
        "bump",
        "--f",
        "arccot:1,0,1,0",
        "--xk",
        "1,10,100",
        "--p",
        "inf",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = read(&dir, "bump.csv");
    assert!(csv.starts_with("x_k,norm\n"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn sweep_orders_rows_and_matches_single_solve() {
    let dir = work_dir("sweep");
    let out = run_cli(&[
        "epsilon-sweep",
        "--eps",
        "0.1,1,0.01",
        "--res",
        "127",
        "--schedule",
        "uniform:4",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = read(&dir, "sweep.csv");
    let eps: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(
        eps,
        vec![1.0, 0.1, 0.01],
        "rows must be ordered by eps descending"
    );
    assert!(csv.lines().skip(1).all(|l| l.contains(",ok,")));
    assert_eq!(read(&dir, "distances.csv").lines().count(), 4);

    // The eps = 1 row reproduces a direct solve with heaviside-approx:1.
    let solo = work_dir("sweep-solo");
    let out = run_cli(&[
        "solve",
        "--f",
        "heaviside-approx:1",
        "--res",
        "127",
        "--schedule",
        "uniform:4",
        "--out",
        solo.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let solution = Field::parse(&read(&solo, "solution.field")).unwrap();
    let l2 = grid::norm_lp(&solution, 2.0).unwrap();
    let sweep_l2: f64 = csv
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(2)
        .unwrap()
        .parse()
        .unwrap();
    assert!(
        (l2 - sweep_l2).abs() <= 1e-14 * l2.max(1.0),
        "sweep row {sweep_l2} vs direct solve {l2}"
    );
}

#[test]
fn identical_configs_produce_identical_bytes() {
    let a = work_dir("det-a");
    let b = work_dir("det-b");
    for dir in [&a, &b] {
        let out = run_cli(&[
            "solve",
            "--f",
            "arccot:1,0,1,0",
            "--res",
            "63",
            "--schedule",
            "uniform:4",
            "--seed",
            "7",
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    assert_eq!(read(&a, "trace.csv"), read(&b, "trace.csv"));
    assert_eq!(read(&a, "solution.field"), read(&b, "solution.field"));
}

#[test]
fn stencil_threads_do_not_change_outputs() {
    // NEWTON_IMBED_THREADS parallelizes only output-partitioned stencil
    // maps, so results are bitwise identical for any thread count. A 3D
    // box at res 31 crosses the parallelization threshold.
    let args = |dir: &Path| {
        vec![
            "solve".to_string(),
            "--domain".into(),
            "box".into(),
            "--n".into(),
            "3".into(),
            "--L".into(),
            "1".into(),
            "--res".into(),
            "31".into(),
            "--f".into(),
            "arccot:1,0,1,0".into(),
            "--schedule".into(),
            "uniform:2".into(),
            "--out".into(),
            dir.to_str().unwrap().to_string(),
        ]
    };
    let serial = work_dir("threads-1");
    let out = Command::new(bin())
        .args(args(&serial))
        .env("NEWTON_IMBED_THREADS", "1")
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let threaded = work_dir("threads-4");
    let out = Command::new(bin())
        .args(args(&threaded))
        .env("NEWTON_IMBED_THREADS", "4")
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        read(&serial, "solution.field"),
        read(&threaded, "solution.field")
    );
    assert_eq!(read(&serial, "trace.csv"), read(&threaded, "trace.csv"));
}

#[test]
fn config_errors_exit_3_and_usage_exits_2() {
    let out = run_cli(&["solve", "--f", "tanh:1", "--res", "31"]);
    assert_eq!(out.status.code(), Some(3));
    let out = run_cli(&["solve"]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "missing required --f is a usage error"
    );
    let out = run_cli(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let out = run_cli(&["solve", "--f", "arccot:1,0,1,0", "--schedule", "every:2"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn analysis_domain_errors_exit_10() {
    let dir = work_dir("delta");
    let out = run_cli(&[
        "oscillation",
        "--f",
        "arccot:1,0,1,0",
        "--deltas",
        "0.000000001",
        "--depth",
        "2",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(10),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}
