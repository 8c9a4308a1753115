//! `zkstrip`: configuration-driven runner for the strip solver.
//!
//! Verbs: `run` (integrate and emit CSV diagnostics), `scenario` (decay
//! experiment with report), `sweep` (rate-scaling study over alpha and L),
//! `check` (invariant self-test suite). Exit codes: 0 success, 2 validation
//! failure, 3 numerical blow-up, 4 bound violation in scenario mode.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use zk_strip::config::{parse_config, RunSpec, SnapshotSelection};
use zk_strip::decay::{rate_scaling_study, run_scenario, DecayError};
use zk_strip::diagnostics::{attach_residuals, IdentityContext, ProbeSet};
use zk_strip::evolution::{build_initial, run};
use zk_strip::grid::{Field, StripGrid};
use zk_strip::output;

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SnapshotFormat {
    Binary,
    Csv,
}

#[derive(Parser)]
#[command(
    name = "zkstrip",
    about = "Pseudospectral strip solver: dispersive evolution, damping and decay experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Directory for all output artifacts (created if missing).
    #[arg(long, global = true, default_value = ".")]
    output_dir: PathBuf,

    /// Suppress progress output on stdout.
    #[arg(long, global = true)]
    quiet: bool,

    /// Snapshot container format.
    #[arg(long, global = true, value_enum, default_value_t = SnapshotFormat::Binary)]
    snapshot_format: SnapshotFormat,

    /// Seed for randomized self tests.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the configured problem and write CSV diagnostics.
    Run { config: PathBuf },
    /// Build and run the configured decay scenario; verify its bound.
    Scenario { config: PathBuf },
    /// Rate-scaling study over the configured alpha and L lists.
    Sweep { config: PathBuf },
    /// Run the invariant self-test suite.
    Check,
}

const EXIT_OK: u8 = 0;
const EXIT_VALIDATION: u8 = 2;
const EXIT_BLOWUP: u8 = 3;
const EXIT_BOUND: u8 = 4;

fn main() -> ExitCode {
    let cli = Cli::parse();
    ExitCode::from(dispatch(&cli))
}

fn dispatch(cli: &Cli) -> u8 {
    if let Err(e) = fs::create_dir_all(&cli.output_dir) {
        eprintln!("cannot create output directory: {e}");
        return EXIT_VALIDATION;
    }
    match &cli.command {
        Command::Run { config } => with_spec(cli, config, cmd_run),
        Command::Scenario { config } => with_spec(cli, config, cmd_scenario),
        Command::Sweep { config } => with_spec(cli, config, cmd_sweep),
        Command::Check => cmd_check(cli),
    }
}

fn with_spec(cli: &Cli, config: &Path, f: impl FnOnce(&Cli, &RunSpec) -> u8) -> u8 {
    let text = match fs::read_to_string(config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", config.display());
            return EXIT_VALIDATION;
        }
    };
    match parse_config(&text) {
        Ok(spec) => f(cli, &spec),
        Err(errors) => {
            eprintln!("{} validation error(s):", errors.len());
            for e in errors {
                eprintln!("  {e}");
            }
            EXIT_VALIDATION
        }
    }
}

fn write_snapshots(cli: &Cli, spec: &RunSpec, traj: &zk_strip::evolution::Trajectory) -> u8 {
    let indices: Vec<usize> = match spec.output.snapshots {
        SnapshotSelection::None => vec![],
        SnapshotSelection::Last => traj.snapshots.len().checked_sub(1).into_iter().collect(),
        SnapshotSelection::All => (0..traj.snapshots.len()).collect(),
    };
    for idx in indices {
        let (ext, write): (&str, fn(&Path, &Field, f64) -> std::io::Result<()>) =
            match cli.snapshot_format {
                SnapshotFormat::Binary => ("zks", output::write_snapshot_binary),
                SnapshotFormat::Csv => ("csv", output::write_snapshot_csv),
            };
        let name = format!("{}_{idx:06}.{ext}", spec.output.snapshot_prefix);
        let path = cli.output_dir.join(name);
        if let Err(e) = write(&path, &traj.snapshots[idx], traj.times[idx]) {
            eprintln!("cannot write snapshot {}: {e}", path.display());
            return EXIT_VALIDATION;
        }
    }
    EXIT_OK
}

fn cmd_run(cli: &Cli, spec: &RunSpec) -> u8 {
    let coeffs = match spec.damping.build(spec.grid, spec.b, spec.delta) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("invalid physics block: {e}");
            return EXIT_VALIDATION;
        }
    };
    let u0 = build_initial(spec.grid, spec.initial);
    let f = Field::zeros(spec.grid);
    let probes = ProbeSet::with_weights(spec.weights.clone());
    let mut traj = match run(&u0, &f, &coeffs, &spec.solver, &probes) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("run setup failed: {e}");
            return EXIT_VALIDATION;
        }
    };
    let ctx = IdentityContext {
        coeffs: &coeffs,
        h_cutoff: spec.solver.h_cutoff,
        forcing: None,
        include_nonlinearity: spec.solver.include_nonlinearity,
    };
    if let Err(e) = attach_residuals(&mut traj, &ctx, &spec.weights) {
        eprintln!("residual computation failed: {e}");
    }
    let csv_path = cli.output_dir.join(&spec.output.csv);
    if let Err(e) = output::write_csv(&csv_path, &traj, &spec.weights) {
        eprintln!("cannot write {}: {e}", csv_path.display());
        return EXIT_VALIDATION;
    }
    let code = write_snapshots(cli, spec, &traj);
    if code != EXIT_OK {
        return code;
    }
    if let Some(failure) = &traj.failure {
        eprintln!(
            "blow-up at t = {}: {} (partial diagnostics in {})",
            failure.t,
            failure.reason,
            csv_path.display()
        );
        return EXIT_BLOWUP;
    }
    if !cli.quiet {
        let last = traj.records.last().expect("at least the initial record");
        println!(
            "run complete: t = {}, l2 = {}, diagnostics in {}",
            last.t,
            last.l2,
            csv_path.display()
        );
    }
    EXIT_OK
}

fn cmd_scenario(cli: &Cli, spec: &RunSpec) -> u8 {
    let Some(scenario) = &spec.scenario else {
        eprintln!("scenario verb requires a scenario block (scenario.kind = ...)");
        return EXIT_VALIDATION;
    };
    let outcome = match run_scenario(scenario, spec.grid, &spec.solver) {
        Ok(o) => o,
        Err(DecayError::RunFailed { t, reason }) => {
            eprintln!("scenario run blew up at t = {t}: {reason}");
            return EXIT_BLOWUP;
        }
        Err(e) => {
            eprintln!("scenario setup failed: {e}");
            return EXIT_VALIDATION;
        }
    };
    let mut traj = outcome.trajectory;
    let ctx = IdentityContext {
        coeffs: &outcome.coeffs,
        h_cutoff: spec.solver.h_cutoff,
        forcing: None,
        include_nonlinearity: spec.solver.include_nonlinearity,
    };
    let weights = vec![outcome.weight];
    if let Err(e) = attach_residuals(&mut traj, &ctx, &weights) {
        eprintln!("residual computation failed: {e}");
    }
    let csv_path = cli.output_dir.join(&spec.output.csv);
    if let Err(e) = output::write_csv(&csv_path, &traj, &weights) {
        eprintln!("cannot write {}: {e}", csv_path.display());
        return EXIT_VALIDATION;
    }
    let report_path = cli.output_dir.join(&spec.output.report);
    let text = output::format_report(scenario.kind.name(), scenario.amplitude, &outcome.report);
    if let Err(e) = fs::write(&report_path, &text) {
        eprintln!("cannot write {}: {e}", report_path.display());
        return EXIT_VALIDATION;
    }
    let code = write_snapshots(cli, spec, &traj);
    if code != EXIT_OK {
        return code;
    }
    if !cli.quiet {
        print!("{text}");
    }
    if outcome.report.bound_holds {
        EXIT_OK
    } else {
        eprintln!(
            "decay bound violated: margin {}",
            outcome.report.bound_margin
        );
        EXIT_BOUND
    }
}

fn cmd_sweep(cli: &Cli, spec: &RunSpec) -> u8 {
    let Some(sweep) = &spec.sweep else {
        eprintln!("sweep verb requires a sweep block (sweep.kind = ...)");
        return EXIT_VALIDATION;
    };
    let base = spec.scenario.clone().unwrap_or_else(|| {
        let mut s = zk_strip::decay::Scenario::new(sweep.kind);
        s.b = spec.b;
        s.delta = spec.delta;
        if let zk_strip::evolution::InitialPreset::Gaussian {
            amplitude,
            center,
            width,
            y_mode,
        } = spec.initial
        {
            s.amplitude = amplitude;
            s.center = center;
            s.width = width;
            s.y_mode = y_mode;
        }
        s
    });
    let grid = spec.grid;
    let grid_for = |l: f64| StripGrid::new(grid.x_min(), grid.x_max(), grid.nx(), l, grid.ny());
    let study = match rate_scaling_study(
        sweep.kind,
        &sweep.alphas,
        &sweep.l_values,
        &base,
        grid_for,
        &spec.solver,
    ) {
        Ok(s) => s,
        Err(DecayError::RunFailed { t, reason }) => {
            eprintln!("sweep run blew up at t = {t}: {reason}");
            return EXIT_BLOWUP;
        }
        Err(e) => {
            eprintln!("sweep failed: {e}");
            return EXIT_VALIDATION;
        }
    };
    let mut csv = String::from("alpha,width_L,fitted_rate,fit_r2\n");
    for row in &study.rows {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            row.alpha, row.width_l, row.fitted_rate, row.fit_r2
        ));
    }
    let csv_path = cli.output_dir.join(&spec.output.csv);
    if let Err(e) = fs::write(&csv_path, &csv) {
        eprintln!("cannot write {}: {e}", csv_path.display());
        return EXIT_VALIDATION;
    }
    let mut report = String::new();
    for &l in &sweep.l_values {
        if let Some((slope, intercept, r2)) = study.alpha_trend(l) {
            report.push_str(&format!(
                "alpha_trend(L = {l}) = slope {slope}, intercept {intercept}, r2 {r2}\n"
            ));
        }
    }
    for &alpha in &sweep.alphas {
        if let Some((coef, r2)) = study.l_trend(alpha) {
            report.push_str(&format!(
                "L_trend(alpha = {alpha}) = coef {coef} / L^2, r2 {r2}\n"
            ));
        }
    }
    let report_path = cli.output_dir.join(&spec.output.report);
    if let Err(e) = fs::write(&report_path, &report) {
        eprintln!("cannot write {}: {e}", report_path.display());
        return EXIT_VALIDATION;
    }
    if !cli.quiet {
        print!("{report}");
        println!("table in {}", csv_path.display());
    }
    EXIT_OK
}

fn cmd_check(cli: &Cli) -> u8 {
    let results = zk_strip::selftest::run_all(cli.seed);
    let mut ok = true;
    for r in &results {
        ok &= r.passed;
        if !cli.quiet || !r.passed {
            println!(
                "{} {} ({})",
                if r.passed { "ok  " } else { "FAIL" },
                r.name,
                r.detail
            );
        }
    }
    if ok {
        if !cli.quiet {
            println!("all {} checks passed", results.len());
        }
        EXIT_OK
    } else {
        EXIT_VALIDATION
    }
}
