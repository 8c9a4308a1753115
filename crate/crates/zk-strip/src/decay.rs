//! Scenario builder and rate fitting for the long-time decay experiments.
//!
//! Five scenario families probe the decay mechanisms numerically:
//!
//! * `C1` - pointwise absorption/dissipation floor
//!   (`pi^2 beta_2 / L^2 + beta_0 >= beta`): unweighted decay at rate `beta`;
//! * `C2` - parabolic damping effective at both infinities, small data:
//!   unweighted decay with prefactor `sqrt(2)`;
//! * `C3` - no damping, pure exponential weight `e^(2 alpha x)`;
//! * `C4` - damping at `-inf`, weight `1 + e^(2 alpha x)`;
//! * `C5` - damping at `+inf`, weight `kappa_0(alpha x)`.
//!
//! The smallness and width thresholds behind `C2`-`C5` carry no explicit
//! constants; the harness locates empirical thresholds by bisection on the
//! initial amplitude and reports fitted rates rather than asserting values.

use thiserror::Error;

use crate::diagnostics::ProbeSet;
use crate::evolution::{
    build_initial, damping_constant, damping_none, damping_plateau, Coefficients, EvolutionError,
    InitialPreset, PlateauSide, SolverConfig, Trajectory,
};
use crate::grid::{Field, StripGrid};
use crate::weights::{WeightError, WeightSpec};

#[derive(Debug, Error)]
pub enum DecayError {
    #[error("infeasible target rate: needs pi^2 beta2 / L^2 + beta0 >= beta, margin {margin:.6}")]
    InfeasibleBeta { margin: f64 },
    #[error("scenario parameter {name} must be positive, got {value}")]
    NonPositiveParam { name: &'static str, value: f64 },
    #[error("decay fit needs at least 5 samples, got {0}")]
    TooFewSamples(usize),
    #[error("non-positive norm {value:e} at t = {t}: decay fit meaningless")]
    NonPositiveNorm { t: f64, value: f64 },
    #[error("weighted norms for {0} were not recorded on this trajectory")]
    MissingWeight(String),
    #[error("run failed at t = {t}: {reason}")]
    RunFailed { t: f64, reason: String },
    #[error("rate scaling study runs exponential-weight scenarios only (C3, C4, C5)")]
    BadStudyKind,
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error(transparent)]
    Weight(#[from] WeightError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    C1Absorption,
    C2BothInfinities,
    C3ExpWeightNoDamping,
    C4MinusInfinity,
    C5PlusInfinity,
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::C1Absorption => "C1_absorption",
            ScenarioKind::C2BothInfinities => "C2_both_infinities",
            ScenarioKind::C3ExpWeightNoDamping => "C3_exp_weight_no_damping",
            ScenarioKind::C4MinusInfinity => "C4_minus_infinity",
            ScenarioKind::C5PlusInfinity => "C5_plus_infinity",
        }
    }
}

/// Configuration of one decay experiment.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub kind: ScenarioKind,
    /// C1 target rate.
    pub beta: f64,
    /// C1 absorption floor `beta_0` (constant realization).
    pub beta0: f64,
    /// C1 transverse dissipation floor `beta_2` (constant realization).
    pub beta2: f64,
    /// Plateau level (C2, C4, C5).
    pub a: f64,
    /// Plateau radius (C2, C4, C5).
    pub r: f64,
    /// Weight rate (C3-C5).
    pub alpha: f64,
    /// Initial-bump L2 amplitude scale.
    pub amplitude: f64,
    pub b: f64,
    pub delta: f64,
    pub center: f64,
    pub width: f64,
    pub y_mode: usize,
}

impl Scenario {
    pub fn new(kind: ScenarioKind) -> Self {
        Self {
            kind,
            beta: 0.5,
            beta0: 0.5,
            beta2: 0.0,
            a: 1.0,
            r: 5.0,
            alpha: 0.1,
            amplitude: 0.05,
            b: 0.0,
            delta: 1e-3,
            center: 0.0,
            width: 4.0,
            y_mode: 1,
        }
    }
}

/// Build the damping fields, the initial bump and the paired weight for a
/// scenario, verifying the scenario's hypotheses pointwise on the grid.
pub fn build_scenario(
    s: &Scenario,
    grid: StripGrid,
) -> Result<(Coefficients, Field, WeightSpec), DecayError> {
    if !(s.amplitude > 0.0) {
        return Err(DecayError::NonPositiveParam {
            name: "amplitude",
            value: s.amplitude,
        });
    }
    let u0 = build_initial(
        grid,
        InitialPreset::Gaussian {
            amplitude: s.amplitude,
            center: s.center,
            width: s.width,
            y_mode: s.y_mode,
        },
    );
    let transition = 1.0f64.min(s.r * 0.5);
    match s.kind {
        ScenarioKind::C1Absorption => {
            if s.beta2 < 0.0 {
                return Err(DecayError::NonPositiveParam {
                    name: "beta2",
                    value: s.beta2,
                });
            }
            let available =
                std::f64::consts::PI.powi(2) * s.beta2 / grid.width_l().powi(2) + s.beta0;
            let margin = available - s.beta;
            if margin < -1e-12 {
                return Err(DecayError::InfeasibleBeta { margin });
            }
            let coeffs = damping_constant(grid, s.b, s.delta, s.beta0, 0.0, s.beta2)?;
            Ok((coeffs, u0, WeightSpec::ConstantOne))
        }
        ScenarioKind::C2BothInfinities => {
            let coeffs = damping_plateau(
                grid,
                s.b,
                s.delta,
                PlateauSide::Both,
                s.a,
                s.r,
                transition,
                0.0,
            )?;
            Ok((coeffs, u0, WeightSpec::ConstantOne))
        }
        ScenarioKind::C3ExpWeightNoDamping => {
            let w = WeightSpec::exp_pure(s.alpha)?;
            Ok((damping_none(grid, s.b, s.delta), u0, w))
        }
        ScenarioKind::C4MinusInfinity => {
            let w = WeightSpec::exp_plus(s.alpha)?;
            let coeffs = damping_plateau(
                grid,
                s.b,
                s.delta,
                PlateauSide::Minus,
                s.a,
                s.r,
                transition,
                0.0,
            )?;
            Ok((coeffs, u0, w))
        }
        ScenarioKind::C5PlusInfinity => {
            let w = WeightSpec::kappa_zero_scaled(s.alpha)?;
            let coeffs = damping_plateau(
                grid,
                s.b,
                s.delta,
                PlateauSide::Plus,
                s.a,
                s.r,
                transition,
                0.0,
            )?;
            Ok((coeffs, u0, w))
        }
    }
}

/// Least-squares estimate of `beta` in `n(t) ~ C e^(-beta t)`: the slope of
/// `ln n` against `t` with the sign flipped, plus the `r^2` of the fit.
pub fn fit_decay_rate(times: &[f64], norms: &[f64]) -> Result<(f64, f64), DecayError> {
    if times.len() < 5 || times.len() != norms.len() {
        return Err(DecayError::TooFewSamples(times.len().min(norms.len())));
    }
    let mut logs = Vec::with_capacity(norms.len());
    for (&t, &n) in times.iter().zip(norms.iter()) {
        if !(n > 0.0) {
            return Err(DecayError::NonPositiveNorm { t, value: n });
        }
        logs.push(n.ln());
    }
    let (slope, _, r2) = linear_fit(times, &logs);
    Ok((-slope, r2))
}

/// Ordinary least squares `y = slope x + intercept`; `r^2` about the mean.
/// A perfect fit of constant data reports `r^2 = 1`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&xi, &yi) in x.iter().zip(y.iter()) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
        syy += (yi - my) * (yi - my);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y.iter())
        .map(|(&xi, &yi)| {
            let e = yi - (slope * xi + intercept);
            e * e
        })
        .sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    (slope, intercept, r2)
}

/// Through-origin least squares `y = coef x`; `r^2` about the mean.
pub fn origin_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
    let coef = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let my = y.iter().sum::<f64>() / y.len() as f64;
    let ss_res: f64 = x
        .iter()
        .zip(y.iter())
        .map(|(&xi, &yi)| (yi - coef * xi).powi(2))
        .sum();
    let ss_tot: f64 = y.iter().map(|&yi| (yi - my).powi(2)).sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    (coef, r2)
}

/// Fitted-rate results and the bound verdict for one scenario run.
#[derive(Debug, Clone)]
pub struct DecayReport {
    pub fitted_rate: f64,
    pub fit_r2: f64,
    pub bound_holds: bool,
    /// `min_t (prefactor e^(-beta t) n(0) - n(t))`, tolerance not included.
    pub bound_margin: f64,
    pub prefactor_used: f64,
    /// Hypothesized rate the bound was checked against.
    pub beta_hypothesis: f64,
    /// `max_t n(t) e^(beta t) / n(0)` under the hypothesized rate.
    pub observed_prefactor: f64,
    /// Absolute slack `tol * n(0)` granted to the bound.
    pub tolerance: f64,
}

/// Default relative tolerance of [`verify_bound`], dominated by splitting
/// error at the default step size.
pub const BOUND_TOL_REL: f64 = 1e-6;

/// Initial fraction of the time window discarded by rate fits (transient).
pub const FIT_DISCARD_FRACTION: f64 = 0.1;

fn weighted_series(traj: &Trajectory, w: &WeightSpec) -> Result<Vec<f64>, DecayError> {
    if *w == WeightSpec::ConstantOne {
        return Ok(traj.records.iter().map(|r| r.l2).collect());
    }
    let idx = traj
        .probe_weights
        .iter()
        .position(|pw| pw == w)
        .ok_or_else(|| DecayError::MissingWeight(w.label()))?;
    Ok(traj.records.iter().map(|r| r.weighted_l2[idx]).collect())
}

/// Fit window: the initial transient (first 10% of the horizon) is
/// discarded, and the window stops at the series' global minimum. On a clean
/// exponential the minimum is the last sample; on the truncated domain the
/// transported field eventually wraps around the periodic box and lifts the
/// (weighted) norm again, and the decay claims concern the pre-wrap segment.
fn trailing_window<'a>(times: &'a [f64], norms: &'a [f64]) -> (&'a [f64], &'a [f64]) {
    let t_end = *times.last().unwrap();
    let t_cut = FIT_DISCARD_FRACTION * t_end;
    let start = times.iter().position(|&t| t >= t_cut).unwrap_or(0);
    let start = start.min(times.len().saturating_sub(5));
    let min_idx = norms
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(norms.len() - 1);
    let end = (min_idx + 1).max(start + 5).min(norms.len());
    (&times[start..end], &norms[start..end])
}

/// Check `n(t) <= prefactor e^(-beta t) n(0) + tol n(0)` along the recorded
/// weighted-norm series and fit the observed rate on the trailing window.
pub fn verify_bound(
    traj: &Trajectory,
    w: &WeightSpec,
    beta: f64,
    prefactor: f64,
) -> Result<DecayReport, DecayError> {
    let norms = weighted_series(traj, w)?;
    let n0 = norms[0];
    let tolerance = BOUND_TOL_REL * n0;
    let mut margin = f64::INFINITY;
    let mut observed = 0.0f64;
    for (&t, &n) in traj.times.iter().zip(norms.iter()) {
        let envelope = prefactor * (-beta * t).exp() * n0;
        margin = margin.min(envelope - n);
        if n0 > 0.0 {
            observed = observed.max(n * (beta * t).exp() / n0);
        }
    }
    let (fit_t, fit_n) = trailing_window(&traj.times, &norms);
    let (fitted_rate, fit_r2) = if n0 > 0.0 {
        fit_decay_rate(fit_t, fit_n)?
    } else {
        (0.0, 1.0)
    };
    Ok(DecayReport {
        fitted_rate,
        fit_r2,
        bound_holds: margin >= -tolerance,
        bound_margin: margin,
        prefactor_used: prefactor,
        beta_hypothesis: beta,
        observed_prefactor: observed,
        tolerance,
    })
}

/// A built and executed scenario: trajectory plus its decay report.
#[derive(Debug)]
pub struct ScenarioOutcome {
    pub trajectory: Trajectory,
    pub report: DecayReport,
    pub weight: WeightSpec,
    pub coeffs: Coefficients,
}

/// Largest rate `beta` for which `n(t) <= prefactor e^(-beta t) n(0)` holds
/// along the whole series (can be negative when no envelope exists). This is
/// the witness rate for the existence-style decay claims, whose constants
/// are not explicit.
pub fn largest_envelope_rate(times: &[f64], norms: &[f64], prefactor: f64) -> f64 {
    let n0 = norms[0];
    let mut best = f64::INFINITY;
    for (&t, &n) in times.iter().zip(norms.iter()).skip(1) {
        if n > 0.0 && t > 0.0 {
            best = best.min((prefactor * n0 / n).ln() / t);
        }
    }
    best
}

/// Build and run a scenario, then verify the paired decay bound.
///
/// `C1` checks the theory-supplied target rate with prefactor 1. The
/// small-data scenarios only claim that *some* positive rate works: `C2`
/// certifies 90% of the largest rate compatible with the `sqrt(2)` envelope,
/// and the weighted scenarios `C3`-`C5` do the same with prefactor 1. The
/// trailing-window fitted rate is reported alongside.
pub fn run_scenario(
    s: &Scenario,
    grid: StripGrid,
    cfg: &SolverConfig,
) -> Result<ScenarioOutcome, DecayError> {
    let (coeffs, u0, weight) = build_scenario(s, grid)?;
    let probes = ProbeSet::with_weights(vec![weight]);
    let traj = crate::evolution::run(&u0, &Field::zeros(grid), &coeffs, cfg, &probes)?;
    if let Some(failure) = &traj.failure {
        return Err(DecayError::RunFailed {
            t: failure.t,
            reason: failure.reason.clone(),
        });
    }
    let norms = weighted_series(&traj, &weight)?;
    let (fit_t, fit_n) = trailing_window(&traj.times, &norms);
    let (fitted, _) = fit_decay_rate(fit_t, fit_n)?;
    let certified = |prefactor: f64| {
        let cert = largest_envelope_rate(&traj.times, &norms, prefactor);
        if cert > 0.0 {
            0.9 * cert
        } else {
            fitted.max(f64::MIN_POSITIVE)
        }
    };
    let (beta_hyp, prefactor) = match s.kind {
        ScenarioKind::C1Absorption => (s.beta, 1.0),
        ScenarioKind::C2BothInfinities => (certified(2.0f64.sqrt()), 2.0f64.sqrt()),
        _ => (certified(1.0), 1.0),
    };
    let report = verify_bound(&traj, &weight, beta_hyp, prefactor)?;
    Ok(ScenarioOutcome {
        trajectory: traj,
        report,
        weight,
        coeffs,
    })
}

/// Result of the amplitude bisection: the largest amplitude where the decay
/// verdict held and, when one was seen, the smallest failing amplitude.
#[derive(Debug, Clone)]
pub struct AmplitudeThreshold {
    pub largest_passing: f64,
    pub smallest_failing: Option<f64>,
    pub passing_report: DecayReport,
}

/// Bisect on the initial amplitude for the smallness threshold of a decay
/// scenario: "decay holds" means the bound passes with a positive fitted
/// rate and a monotone (within tolerance) norm series.
pub fn bisect_amplitude_threshold(
    base: &Scenario,
    grid: StripGrid,
    cfg: &SolverConfig,
    lo: f64,
    hi: f64,
    iterations: usize,
) -> Result<AmplitudeThreshold, DecayError> {
    let holds = |amplitude: f64| -> Result<Option<DecayReport>, DecayError> {
        let mut s = base.clone();
        s.amplitude = amplitude;
        match run_scenario(&s, grid, cfg) {
            Ok(out) => {
                let norms = weighted_series(&out.trajectory, &out.weight)?;
                let n0 = norms[0];
                let monotone = norms.windows(2).all(|w| w[1] <= w[0] + 1e-8 * n0);
                let ok = out.report.bound_holds && out.report.fitted_rate > 0.0 && monotone;
                Ok(ok.then_some(out.report))
            }
            Err(DecayError::RunFailed { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let lo_report = holds(lo)?.ok_or(DecayError::NonPositiveParam {
        name: "lo (must be below the decay threshold)",
        value: lo,
    })?;
    if let Some(report) = holds(hi)? {
        return Ok(AmplitudeThreshold {
            largest_passing: hi,
            smallest_failing: None,
            passing_report: report,
        });
    }
    let mut pass = lo;
    let mut fail = hi;
    let mut pass_report = lo_report;
    for _ in 0..iterations {
        let mid = 0.5 * (pass + fail);
        match holds(mid)? {
            Some(report) => {
                pass = mid;
                pass_report = report;
            }
            None => fail = mid,
        }
    }
    Ok(AmplitudeThreshold {
        largest_passing: pass,
        smallest_failing: Some(fail),
        passing_report: pass_report,
    })
}

/// One row of the rate-scaling table.
#[derive(Debug, Clone)]
pub struct RateScalingRow {
    pub alpha: f64,
    pub width_l: f64,
    pub fitted_rate: f64,
    pub fit_r2: f64,
}

/// Fitted rates over an `(alpha, L)` product grid with the trend fits used
/// by the scaling claims: linear in `alpha` at fixed `L`, proportional to
/// `1/L^2` at fixed `alpha`.
#[derive(Debug, Clone)]
pub struct RateScalingStudy {
    pub rows: Vec<RateScalingRow>,
}

impl RateScalingStudy {
    /// Linear fit `rate = s alpha + c` over the rows at fixed `L`.
    pub fn alpha_trend(&self, width_l: f64) -> Option<(f64, f64, f64)> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = self
            .rows
            .iter()
            .filter(|r| (r.width_l - width_l).abs() < 1e-12)
            .map(|r| (r.alpha, r.fitted_rate))
            .unzip();
        (xs.len() >= 2).then(|| linear_fit(&xs, &ys))
    }

    /// Through-origin fit `rate = m / L^2` over the rows at fixed `alpha`.
    pub fn l_trend(&self, alpha: f64) -> Option<(f64, f64)> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = self
            .rows
            .iter()
            .filter(|r| (r.alpha - alpha).abs() < 1e-12)
            .map(|r| (1.0 / (r.width_l * r.width_l), r.fitted_rate))
            .unzip();
        (xs.len() >= 2).then(|| origin_fit(&xs, &ys))
    }
}

/// Run the weighted-decay scenario over every `(alpha, L)` pair and fit the
/// rate of the paired weighted norm.
///
/// The expected rates scale like `1/L^2`, so the configured horizon is read
/// as the horizon at `L = pi` and rescaled by `(L/pi)^2` per run: every run
/// then spans a comparable number of e-folds, and narrow-strip runs stay
/// clear of the periodic wrap-around of the leftward-transported field.
pub fn rate_scaling_study(
    kind: ScenarioKind,
    alphas: &[f64],
    l_values: &[f64],
    base: &Scenario,
    grid_for: impl Fn(f64) -> Result<StripGrid, crate::grid::GridError>,
    cfg: &SolverConfig,
) -> Result<RateScalingStudy, DecayError> {
    if matches!(
        kind,
        ScenarioKind::C1Absorption | ScenarioKind::C2BothInfinities
    ) {
        return Err(DecayError::BadStudyKind);
    }
    let mut rows = Vec::new();
    for &l in l_values {
        let grid = grid_for(l).map_err(|e| DecayError::NonPositiveParam {
            name: "width_L",
            value: match e {
                crate::grid::GridError::BadWidth(v) => v,
                _ => l,
            },
        })?;
        let cfg_l = SolverConfig {
            t_end: cfg.t_end * (l / std::f64::consts::PI).powi(2),
            ..cfg.clone()
        };
        for &alpha in alphas {
            let mut s = base.clone();
            s.kind = kind;
            s.alpha = alpha;
            let out = run_scenario(&s, grid, &cfg_l)?;
            rows.push(RateScalingRow {
                alpha,
                width_l: l,
                fitted_rate: out.report.fitted_rate,
                fit_r2: out.report.fit_r2,
            });
        }
    }
    Ok(RateScalingStudy { rows })
}
