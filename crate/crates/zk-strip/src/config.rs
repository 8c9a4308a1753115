//! Flat, sectioned `key = value` run configuration with dotted keys.
//!
//! The format is line-oriented: `block.key = value`, `#` comments, blank
//! lines ignored. Parsing is strict - unknown keys, duplicate keys and
//! malformed values are errors - and validation reports *all* problems, not
//! just the first.
//!
//! ```text
//! grid.nx = 256
//! grid.x_min = -20
//! grid.x_max = 20
//! grid.ny = 32
//! grid.width_L = 3.141592653589793
//!
//! time.dt = 1e-3
//! time.t_end = 1.0
//! weights.0.kind = exp_plus
//! weights.0.alpha = 0.1
//! ```

use std::collections::BTreeMap;
use std::fmt;

use crate::decay::{Scenario, ScenarioKind};
use crate::evolution::{
    damping_constant, damping_none, damping_plateau, Coefficients, EvolutionError, InitialPreset,
    PlateauSide, SolverConfig,
};
use crate::grid::StripGrid;
use crate::weights::WeightSpec;

/// One validation problem, tagged with the offending line when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

/// Where snapshots go, if anywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotSelection {
    None,
    Last,
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub csv: String,
    pub report: String,
    pub snapshots: SnapshotSelection,
    pub snapshot_prefix: String,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            csv: "diagnostics.csv".into(),
            report: "report.txt".into(),
            snapshots: SnapshotSelection::None,
            snapshot_prefix: "snap".into(),
        }
    }
}

/// Damping preset of the physics block.
#[derive(Debug, Clone, PartialEq)]
pub enum DampingSpec {
    None,
    Constant {
        a0: f64,
        a1: f64,
        a2: f64,
    },
    Plateau {
        side: PlateauSide,
        a: f64,
        r: f64,
        width: f64,
        a0: f64,
    },
}

impl DampingSpec {
    pub fn build(
        &self,
        grid: StripGrid,
        b: f64,
        delta: f64,
    ) -> Result<Coefficients, EvolutionError> {
        match *self {
            DampingSpec::None => Ok(damping_none(grid, b, delta)),
            DampingSpec::Constant { a0, a1, a2 } => damping_constant(grid, b, delta, a0, a1, a2),
            DampingSpec::Plateau {
                side,
                a,
                r,
                width,
                a0,
            } => damping_plateau(grid, b, delta, side, a, r, width, a0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub kind: ScenarioKind,
    pub alphas: Vec<f64>,
    pub l_values: Vec<f64>,
}

/// Fully validated run specification.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub grid: StripGrid,
    pub b: f64,
    pub delta: f64,
    pub damping: DampingSpec,
    pub initial: InitialPreset,
    pub solver: SolverConfig,
    pub weights: Vec<WeightSpec>,
    pub scenario: Option<Scenario>,
    pub sweep: Option<SweepSpec>,
    pub output: OutputSpec,
}

struct KeyTable {
    entries: BTreeMap<String, (String, usize)>,
}

impl KeyTable {
    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.remove(key)
    }

    fn keys_with_prefix(&self, prefix: &str) -> Vec<String> {
        self.entries
            .keys()
            .filter(|k| k.starts_with(prefix))
            .cloned()
            .collect()
    }
}

fn tokenize(text: &str) -> Result<KeyTable, Vec<ConfigError>> {
    let mut entries = BTreeMap::new();
    let mut errors = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            errors.push(ConfigError {
                line: Some(line_no),
                message: format!("expected 'key = value', got '{line}'"),
            });
            continue;
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() || value.is_empty() {
            errors.push(ConfigError {
                line: Some(line_no),
                message: "empty key or value".into(),
            });
            continue;
        }
        if entries.contains_key(&key) {
            errors.push(ConfigError {
                line: Some(line_no),
                message: format!("duplicate key '{key}'"),
            });
            continue;
        }
        entries.insert(key, (value, line_no));
    }
    if errors.is_empty() {
        Ok(KeyTable { entries })
    } else {
        Err(errors)
    }
}

struct Reader<'a> {
    table: &'a mut KeyTable,
    errors: Vec<ConfigError>,
}

impl<'a> Reader<'a> {
    fn f64_opt(&mut self, key: &str) -> Option<f64> {
        let (raw, line) = self.table.take(key)?;
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Some(v),
            _ => {
                self.errors.push(ConfigError {
                    line: Some(line),
                    message: format!("{key} must be a finite number, got '{raw}'"),
                });
                None
            }
        }
    }

    fn f64_or(&mut self, key: &str, default: f64) -> f64 {
        self.f64_opt(key).unwrap_or(default)
    }

    fn f64_required(&mut self, key: &str) -> f64 {
        match self.table.take(key) {
            Some((raw, line)) => match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => v,
                _ => {
                    self.errors.push(ConfigError {
                        line: Some(line),
                        message: format!("{key} must be a finite number, got '{raw}'"),
                    });
                    f64::NAN
                }
            },
            None => {
                self.errors.push(ConfigError {
                    line: None,
                    message: format!("missing required key '{key}'"),
                });
                f64::NAN
            }
        }
    }

    fn usize_required(&mut self, key: &str) -> usize {
        match self.table.take(key) {
            Some((raw, line)) => match raw.parse::<usize>() {
                Ok(v) => v,
                Err(_) => {
                    self.errors.push(ConfigError {
                        line: Some(line),
                        message: format!("{key} must be a nonnegative integer, got '{raw}'"),
                    });
                    0
                }
            },
            None => {
                self.errors.push(ConfigError {
                    line: None,
                    message: format!("missing required key '{key}'"),
                });
                0
            }
        }
    }

    fn usize_or(&mut self, key: &str, default: usize) -> usize {
        match self.table.take(key) {
            Some((raw, line)) => match raw.parse::<usize>() {
                Ok(v) => v,
                Err(_) => {
                    self.errors.push(ConfigError {
                        line: Some(line),
                        message: format!("{key} must be a nonnegative integer, got '{raw}'"),
                    });
                    default
                }
            },
            None => default,
        }
    }

    fn bool_or(&mut self, key: &str, default: bool) -> bool {
        match self.table.take(key) {
            Some((raw, line)) => match raw.as_str() {
                "true" => true,
                "false" => false,
                _ => {
                    self.errors.push(ConfigError {
                        line: Some(line),
                        message: format!("{key} must be 'true' or 'false', got '{raw}'"),
                    });
                    default
                }
            },
            None => default,
        }
    }

    fn string_or(&mut self, key: &str, default: &str) -> (String, Option<usize>) {
        match self.table.take(key) {
            Some((raw, line)) => (raw, Some(line)),
            None => (default.to_string(), None),
        }
    }

    fn f64_list(&mut self, key: &str) -> Option<(Vec<f64>, usize)> {
        let (raw, line) = self.table.take(key)?;
        let mut out = Vec::new();
        for part in raw.split(',') {
            match part.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => out.push(v),
                _ => {
                    self.errors.push(ConfigError {
                        line: Some(line),
                        message: format!("{key}: '{}' is not a finite number", part.trim()),
                    });
                    return None;
                }
            }
        }
        Some((out, line))
    }

    fn push(&mut self, line: Option<usize>, message: String) {
        self.errors.push(ConfigError { line, message });
    }
}

fn scenario_kind_from(name: &str) -> Option<ScenarioKind> {
    match name {
        "C1_absorption" => Some(ScenarioKind::C1Absorption),
        "C2_both_infinities" => Some(ScenarioKind::C2BothInfinities),
        "C3_exp_weight_no_damping" => Some(ScenarioKind::C3ExpWeightNoDamping),
        "C4_minus_infinity" => Some(ScenarioKind::C4MinusInfinity),
        "C5_plus_infinity" => Some(ScenarioKind::C5PlusInfinity),
        _ => None,
    }
}

/// Parse and validate a configuration document. On failure every detected
/// problem is returned, not just the first.
pub fn parse_config(text: &str) -> Result<RunSpec, Vec<ConfigError>> {
    let mut table = tokenize(text)?;
    let mut r = Reader {
        table: &mut table,
        errors: Vec::new(),
    };

    // grid block (required)
    let nx = r.usize_required("grid.nx");
    let ny = r.usize_required("grid.ny");
    let x_min = r.f64_required("grid.x_min");
    let x_max = r.f64_required("grid.x_max");
    let width_l = r.f64_required("grid.width_L");
    let grid = match StripGrid::new(x_min, x_max, nx, width_l, ny) {
        Ok(g) => Some(g),
        Err(e) => {
            if !(nx == 0 || ny == 0 || x_min.is_nan() || x_max.is_nan() || width_l.is_nan()) {
                let message = match e {
                    crate::grid::GridError::BadNx(v) => {
                        format!("grid.nx must be even and at least 4, got {v}")
                    }
                    crate::grid::GridError::BadNy(v) => {
                        format!("grid.ny must be at least 1, got {v}")
                    }
                    crate::grid::GridError::BadWidth(v) => {
                        format!("grid.width_L must be positive, got {v}")
                    }
                    crate::grid::GridError::BadBox { x_min, x_max } => {
                        format!("grid.x_max ({x_max}) must exceed grid.x_min ({x_min})")
                    }
                };
                r.push(None, message);
            }
            None
        }
    };

    // physics block
    let b = r.f64_or("physics.b", 0.0);
    let delta = r.f64_or("physics.delta", 1e-3);
    if delta < 0.0 {
        r.push(
            None,
            format!("physics.delta must be nonnegative, got {delta}"),
        );
    }

    // damping block
    let (preset, preset_line) = r.string_or("damping.preset", "none");
    let damping = match preset.as_str() {
        "none" => DampingSpec::None,
        "constant" => DampingSpec::Constant {
            a0: r.f64_or("damping.a0", 0.0),
            a1: r.f64_or("damping.a1", 0.0),
            a2: r.f64_or("damping.a2", 0.0),
        },
        "plateau_both" | "plateau_minus" | "plateau_plus" => {
            let side = match preset.as_str() {
                "plateau_both" => PlateauSide::Both,
                "plateau_minus" => PlateauSide::Minus,
                _ => PlateauSide::Plus,
            };
            DampingSpec::Plateau {
                side,
                a: r.f64_or("damping.a", 1.0),
                r: r.f64_or("damping.R", 5.0),
                width: r.f64_or("damping.width", 1.0),
                a0: r.f64_or("damping.a0", 0.0),
            }
        }
        other => {
            r.push(
                preset_line,
                format!(
                    "damping.preset must be one of none|constant|plateau_both|plateau_minus|plateau_plus, got '{other}'"
                ),
            );
            DampingSpec::None
        }
    };

    // initial block
    let (ipreset, ipreset_line) = r.string_or("initial.preset", "gaussian");
    let amplitude = r.f64_or("initial.amplitude", 0.1);
    let center = r.f64_or("initial.center", 0.0);
    let width = r.f64_or("initial.width", 2.0);
    let y_mode = r.usize_or("initial.y_mode", 1);
    if y_mode == 0 || grid.is_some_and(|g| y_mode > g.ny()) {
        r.push(
            None,
            format!("initial.y_mode must be in 1..=grid.ny, got {y_mode}"),
        );
    }
    if width <= 0.0 {
        r.push(None, format!("initial.width must be positive, got {width}"));
    }
    let initial = match ipreset.as_str() {
        "zero" => InitialPreset::Zero,
        "gaussian" => InitialPreset::Gaussian {
            amplitude,
            center,
            width,
            y_mode,
        },
        "sech2" => InitialPreset::Sech2 {
            amplitude,
            center,
            width,
            y_mode,
        },
        other => {
            r.push(
                ipreset_line,
                format!("initial.preset must be one of zero|gaussian|sech2, got '{other}'"),
            );
            InitialPreset::Zero
        }
    };

    // time and solver blocks
    let dt = r.f64_or("time.dt", 1e-3);
    let t_end = r.f64_or("time.t_end", 1.0);
    let snapshot_every = r.usize_or("time.snapshot_every", 10);
    let solver = SolverConfig {
        dt,
        t_end,
        h_cutoff: r.f64_or("solver.h_cutoff", 0.1),
        use_dealiasing: r.bool_or("solver.dealiasing", true),
        snapshot_every,
        include_nonlinearity: r.bool_or("solver.nonlinearity", true),
        blowup_factor: 1e6,
    };
    if let Err(e) = solver.validate() {
        r.push(None, format!("time/solver block: {e}"));
    }

    // weights block: weights.<i>.kind / weights.<i>.alpha, contiguous from 0
    let mut weights = Vec::new();
    let mut wi = 0usize;
    loop {
        let kind_key = format!("weights.{wi}.kind");
        let Some((kind, kind_line)) = r.table.take(&kind_key) else {
            break;
        };
        let alpha = r.f64_opt(&format!("weights.{wi}.alpha"));
        let built = match kind.as_str() {
            "constant_one" => Ok(WeightSpec::ConstantOne),
            "rho_alpha" => WeightSpec::rho_alpha(alpha.unwrap_or(0.0)),
            "kappa_alpha" => WeightSpec::kappa_alpha(alpha.unwrap_or(0.0)),
            "exp_plus" => WeightSpec::exp_plus(alpha.unwrap_or(f64::NAN)),
            "exp_pure" => WeightSpec::exp_pure(alpha.unwrap_or(f64::NAN)),
            "kappa_scaled" => WeightSpec::kappa_zero_scaled(alpha.unwrap_or(f64::NAN)),
            other => {
                r.push(
                    Some(kind_line),
                    format!(
                        "weights.{wi}.kind must be one of constant_one|rho_alpha|kappa_alpha|exp_plus|exp_pure|kappa_scaled, got '{other}'"
                    ),
                );
                Ok(WeightSpec::ConstantOne)
            }
        };
        match built {
            Ok(w) => weights.push(w),
            Err(e) => r.push(Some(kind_line), format!("weights.{wi}: {e}")),
        }
        wi += 1;
    }

    // scenario block (optional)
    let scenario = if let Some((kind_raw, kind_line)) = r.table.take("scenario.kind") {
        match scenario_kind_from(&kind_raw) {
            Some(kind) => {
                let mut s = Scenario::new(kind);
                s.b = b;
                s.delta = delta;
                s.amplitude = amplitude;
                s.center = center;
                s.width = width;
                s.y_mode = y_mode;
                s.beta = r.f64_or("scenario.beta", s.beta);
                s.beta0 = r.f64_or("scenario.beta0", s.beta0);
                s.beta2 = r.f64_or("scenario.beta2", s.beta2);
                s.a = r.f64_or("scenario.a", s.a);
                s.r = r.f64_or("scenario.R", s.r);
                s.alpha = r.f64_or("scenario.alpha", s.alpha);
                if kind == ScenarioKind::C1Absorption {
                    if let Some(g) = grid {
                        let available =
                            std::f64::consts::PI.powi(2) * s.beta2 / g.width_l().powi(2) + s.beta0;
                        let margin = available - s.beta;
                        if margin < -1e-12 {
                            r.push(
                                None,
                                format!(
                                    "scenario.beta infeasible: needs pi^2 beta2 / L^2 + beta0 >= beta, margin {margin:.6}"
                                ),
                            );
                        }
                    }
                }
                Some(s)
            }
            None => {
                r.push(
                    Some(kind_line),
                    format!(
                        "scenario.kind must be one of C1_absorption|C2_both_infinities|C3_exp_weight_no_damping|C4_minus_infinity|C5_plus_infinity, got '{kind_raw}'"
                    ),
                );
                None
            }
        }
    } else {
        None
    };

    // sweep block (optional)
    let sweep = if let Some((kind_raw, kind_line)) = r.table.take("sweep.kind") {
        let kind = scenario_kind_from(&kind_raw);
        let alphas = r.f64_list("sweep.alphas");
        let l_values = r.f64_list("sweep.L_values");
        match (kind, alphas, l_values) {
            (Some(kind), Some((alphas, _)), Some((l_values, _)))
                if !matches!(
                    kind,
                    ScenarioKind::C1Absorption | ScenarioKind::C2BothInfinities
                ) =>
            {
                if alphas.is_empty() || l_values.is_empty() {
                    r.push(Some(kind_line), "sweep lists must be non-empty".into());
                    None
                } else {
                    Some(SweepSpec {
                        kind,
                        alphas,
                        l_values,
                    })
                }
            }
            _ => {
                r.push(
                    Some(kind_line),
                    format!(
                        "sweep.kind must be one of C3_exp_weight_no_damping|C4_minus_infinity|C5_plus_infinity with sweep.alphas and sweep.L_values lists, got '{kind_raw}'"
                    ),
                );
                None
            }
        }
    } else {
        None
    };

    // output block
    let (csv, _) = r.string_or("output.csv", "diagnostics.csv");
    let (report, _) = r.string_or("output.report", "report.txt");
    let (snaps, snaps_line) = r.string_or("output.snapshots", "none");
    let snapshots = match snaps.as_str() {
        "none" => SnapshotSelection::None,
        "last" => SnapshotSelection::Last,
        "all" => SnapshotSelection::All,
        other => {
            r.push(
                snaps_line,
                format!("output.snapshots must be one of none|last|all, got '{other}'"),
            );
            SnapshotSelection::None
        }
    };
    let (snapshot_prefix, _) = r.string_or("output.snapshot_prefix", "snap");

    // strict mode: anything left over is unknown
    let leftover = r.table.keys_with_prefix("");
    for key in leftover {
        let (_, line) = r.table.take(&key).unwrap();
        r.push(Some(line), format!("unknown key '{key}'"));
    }

    let mut errors = r.errors;
    let Some(grid) = grid else {
        if errors.is_empty() {
            errors.push(ConfigError {
                line: None,
                message: "grid block invalid".into(),
            });
        }
        return Err(errors);
    };
    if !errors.is_empty() {
        return Err(errors);
    }
    Ok(RunSpec {
        grid,
        b,
        delta,
        damping,
        initial,
        solver,
        weights,
        scenario,
        sweep,
        output: OutputSpec {
            csv,
            report,
            snapshots,
            snapshot_prefix,
        },
    })
}
