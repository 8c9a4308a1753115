//! End-to-end checks of the `zkstrip` binary: verbs, exit codes, artifacts.

use std::fs;
use std::path::PathBuf;
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_zkstrip")
}

fn work_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("zkstrip-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

const SMALL_RUN: &str = "\
grid.nx = 64
grid.x_min = -10
grid.x_max = 10
grid.ny = 6
grid.width_L = 3.141592653589793
initial.amplitude = 0.1
initial.width = 2
time.dt = 1e-2
time.t_end = 0.5
time.snapshot_every = 10
weights.0.kind = exp_plus
weights.0.alpha = 0.1
";

#[test]
fn run_verb_writes_csv_and_snapshots() {
    let dir = work_dir("run");
    let conf = dir.join("run.conf");
    fs::write(&conf, format!("{SMALL_RUN}output.snapshots = last\n")).unwrap();
    let status = Command::new(bin())
        .args(["run"])
        .arg(&conf)
        .args(["--output-dir"])
        .arg(&dir)
        .args(["--quiet", "--snapshot-format", "binary"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let csv = fs::read_to_string(dir.join("diagnostics.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(
        header,
        "t,l2,h1,energy,weighted_l2[0],residual_l2,residual_weighted[0]"
    );
    // interior rows carry residuals; endpoints leave them empty
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[1].ends_with(",,"));
    let mid = lines[lines.len() / 2];
    assert!(!mid.ends_with(",,"), "interior residuals missing: {mid}");

    let snap = dir.join("snap_000005.zks");
    assert!(snap.exists(), "terminal snapshot missing");
    let (field, t) = zk_strip::output::read_snapshot_binary(&snap).unwrap();
    assert_eq!(field.grid().nx(), 64);
    assert!((t - 0.5).abs() < 1e-12);
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn run_verb_csv_snapshots() {
    let dir = work_dir("run-csv");
    let conf = dir.join("run.conf");
    fs::write(&conf, format!("{SMALL_RUN}output.snapshots = last\n")).unwrap();
    let status = Command::new(bin())
        .args(["run"])
        .arg(&conf)
        .args(["--output-dir"])
        .arg(&dir)
        .args(["--quiet", "--snapshot-format", "csv"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let snap = fs::read_to_string(dir.join("snap_000005.csv")).unwrap();
    assert!(snap.starts_with("# t = 0.5\nx,y,u\n"));
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn validation_failures_exit_2_and_name_all_errors() {
    let dir = work_dir("validate");
    let conf = dir.join("bad.conf");
    fs::write(
        &conf,
        "grid.nx = 101\ngrid.x_min = -1\ngrid.x_max = 1\ngrid.ny = 4\ngrid.width_L = 1\nbogus.key = 1\n",
    )
    .unwrap();
    let out = Command::new(bin())
        .args(["run"])
        .arg(&conf)
        .args(["--output-dir"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("grid.nx must be even"), "{stderr}");
    assert!(stderr.contains("unknown key 'bogus.key'"), "{stderr}");
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn missing_config_exits_2() {
    let dir = work_dir("missing");
    let out = Command::new(bin())
        .args(["run", "/nonexistent/zkstrip.conf"])
        .args(["--output-dir"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn scenario_verb_writes_report() {
    let dir = work_dir("scenario");
    let conf = dir.join("c1.conf");
    fs::write(
        &conf,
        "\
grid.nx = 64
grid.x_min = -10
grid.x_max = 10
grid.ny = 6
grid.width_L = 3.141592653589793
physics.delta = 0
initial.amplitude = 1e-4
initial.width = 2
time.dt = 1e-2
time.t_end = 2.0
time.snapshot_every = 20
scenario.kind = C1_absorption
scenario.beta = 0.5
scenario.beta0 = 0.5
scenario.beta2 = 0
",
    )
    .unwrap();
    let status = Command::new(bin())
        .args(["scenario"])
        .arg(&conf)
        .args(["--output-dir"])
        .arg(&dir)
        .args(["--quiet"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let report = fs::read_to_string(dir.join("report.txt")).unwrap();
    assert!(report.contains("scenario = C1_absorption"));
    assert!(report.contains("bound_holds = true"));
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn infeasible_scenario_exits_2_citing_margin() {
    let dir = work_dir("infeasible");
    let conf = dir.join("c1.conf");
    fs::write(
        &conf,
        "\
grid.nx = 64
grid.x_min = -10
grid.x_max = 10
grid.ny = 6
grid.width_L = 3.141592653589793
scenario.kind = C1_absorption
scenario.beta = 3.0
scenario.beta0 = 0.1
scenario.beta2 = 0.5
",
    )
    .unwrap();
    let out = Command::new(bin())
        .args(["scenario"])
        .arg(&conf)
        .args(["--output-dir"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("scenario.beta infeasible"), "{stderr}");
    assert!(stderr.contains("margin"), "{stderr}");
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn blowup_exits_3_with_partial_output() {
    // Deliberately RK4-unstable explicit transverse diffusion:
    // a2 * lambda_max * dt far beyond the stability interval.
    let dir = work_dir("blowup");
    let conf = dir.join("blow.conf");
    fs::write(
        &conf,
        "\
grid.nx = 32
grid.x_min = -5
grid.x_max = 5
grid.ny = 16
grid.width_L = 3.141592653589793
damping.preset = constant
damping.a2 = 20
initial.amplitude = 0.1
initial.width = 1.5
time.dt = 5e-2
time.t_end = 2.0
time.snapshot_every = 1
",
    )
    .unwrap();
    let out = Command::new(bin())
        .args(["run"])
        .arg(&conf)
        .args(["--output-dir"])
        .arg(&dir)
        .args(["--quiet"])
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("blow-up"));
    assert!(dir.join("diagnostics.csv").exists(), "partial CSV missing");
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn violated_bound_exits_4() {
    // Exponential weight on a deliberately small box: the leftward transport
    // wraps around and re-enters under the heavy side of the weight, so no
    // positive envelope rate exists and the scenario reports the violation.
    let dir = work_dir("bound");
    let conf = dir.join("c3.conf");
    fs::write(
        &conf,
        "\
grid.nx = 64
grid.x_min = -6
grid.x_max = 6
grid.ny = 6
grid.width_L = 3.141592653589793
initial.amplitude = 0.1
initial.width = 2
time.dt = 5e-3
time.t_end = 20
time.snapshot_every = 40
scenario.kind = C3_exp_weight_no_damping
scenario.alpha = 0.4
",
    )
    .unwrap();
    let out = Command::new(bin())
        .args(["scenario"])
        .arg(&conf)
        .args(["--output-dir"])
        .arg(&dir)
        .args(["--quiet"])
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = fs::read_to_string(dir.join("report.txt")).unwrap();
    assert!(report.contains("bound_holds = false"));
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn sweep_verb_writes_table_and_trends() {
    let dir = work_dir("sweep");
    let conf = dir.join("sweep.conf");
    fs::write(
        &conf,
        "\
grid.nx = 96
grid.x_min = -20
grid.x_max = 10
grid.ny = 6
grid.width_L = 3.141592653589793
initial.amplitude = 1e-3
initial.width = 3
initial.center = 2
time.dt = 1e-2
time.t_end = 4
time.snapshot_every = 10
sweep.kind = C3_exp_weight_no_damping
sweep.alphas = 0.05, 0.1
sweep.L_values = 3.141592653589793
",
    )
    .unwrap();
    let status = Command::new(bin())
        .args(["sweep"])
        .arg(&conf)
        .args(["--output-dir"])
        .arg(&dir)
        .args(["--quiet"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let table = fs::read_to_string(dir.join("diagnostics.csv")).unwrap();
    assert!(table.starts_with("alpha,width_L,fitted_rate,fit_r2\n"));
    assert_eq!(table.lines().count(), 3);
    let report = fs::read_to_string(dir.join("report.txt")).unwrap();
    assert!(report.contains("alpha_trend"), "{report}");
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn check_verb_passes() {
    let out = Command::new(bin())
        .args(["check", "--seed", "7"])
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        stdout.contains("all") && stdout.contains("checks passed"),
        "{stdout}"
    );
}

#[test]
fn zero_initial_data_yields_zero_csv() {
    let dir = work_dir("zero");
    let conf = dir.join("zero.conf");
    fs::write(
        &conf,
        "\
grid.nx = 32
grid.x_min = -5
grid.x_max = 5
grid.ny = 4
grid.width_L = 3.141592653589793
initial.preset = zero
time.dt = 1e-2
time.t_end = 0.2
time.snapshot_every = 5
",
    )
    .unwrap();
    let status = Command::new(bin())
        .args(["run"])
        .arg(&conf)
        .args(["--output-dir"])
        .arg(&dir)
        .args(["--quiet"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let csv = fs::read_to_string(dir.join("diagnostics.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        // l2, h1, energy all identically zero
        assert_eq!(&fields[1..4], &["0", "0", "0"], "{line}");
    }
    let _ = fs::remove_dir_all(&dir);
}
