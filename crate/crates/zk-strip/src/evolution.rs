//! Time integration of the full regularized equation
//!
//! `u_t + b u_x + u_xxx + u_xyy + delta (u_xxxx + u_yyyy) + (g_h(u))_x
//!  - (a_1 u_x)_x - (a_2 u_y)_y + a_0 u = f`
//!
//! by Strang splitting: exact linear propagation of the constant-coefficient
//! part (see [`crate::propagator`]) around an explicit RK4 substep for the
//! cutoff nonlinearity, variable damping, absorption and forcing, all
//! evaluated pseudospectrally.

use ndarray::Array2;
use num_complex::Complex64;
use thiserror::Error;

use crate::diagnostics::{DiagnosticRecord, ProbeSet};
use crate::grid::{Field, StripGrid};
use crate::propagator::{apply_propagator, build_symbol, LinearSymbol, PropagatorError};
use crate::spectral::{
    self, dealias_in_place, forward_transform, inverse_transform_unchecked, SpectralError,
    SpectralField,
};
use crate::weights::eta;

#[derive(Debug, Error)]
pub enum EvolutionError {
    #[error("grid mismatch between solver inputs")]
    GridMismatch,
    #[error("damping coefficient a{index} must be nonnegative: min {min} on the grid")]
    NegativeDamping { index: usize, min: f64 },
    #[error("damping coefficients must be finite")]
    NonFiniteDamping,
    #[error("damping structure violated: {0}")]
    StructureViolated(String),
    #[error("invalid solver config: {0}")]
    BadConfig(String),
    #[error("blow-up at t = {t}: {reason}")]
    BlowUp { t: f64, reason: String },
    #[error("non-finite value in the nonlinear right-hand side")]
    NonFiniteRhs,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Propagator(#[from] PropagatorError),
}

// ---------------------------------------------------------------------------
// Cutoff nonlinearity g_h
// ---------------------------------------------------------------------------

// Antiderivatives of the 7th-order smoothstep S:
// IS1 = int S, IS2 = int s S, IS3 = int s^2 S on [0, 1].
fn is1(t: f64) -> f64 {
    (((-2.5 * t + 10.0) * t - 14.0) * t + 7.0) * t * t * t * t * t
}

fn is2(t: f64) -> f64 {
    ((((-20.0 / 9.0) * t + 8.75) * t - 12.0) * t + 35.0 / 6.0) * t * t * t * t * t * t
}

fn is3(t: f64) -> f64 {
    (((-2.0 * t + 70.0 / 9.0) * t - 10.5) * t + 5.0) * t * t * t * t * t * t * t
}

/// Smooth cutoff of `u^2/2`: equals `u^2/2` for `|u| <= 1/h`, has globally
/// bounded derivative `|g_h'| <= 2/h`, and `|g_h'(u)| <= 2|u|` uniformly.
pub fn g_h(u: f64, h: f64) -> f64 {
    debug_assert!(h > 0.0);
    let uu = u.abs();
    let v = h * uu;
    if v <= 1.0 {
        return 0.5 * u * u;
    }
    let h2 = h * h;
    if v <= 2.0 {
        let w = 2.0 - v;
        // P(v) = int_1^v s eta(2-s) ds, Q(v) = int_1^v eta(s-1) ds
        let p = 23.0 / 36.0 - 2.0 * is1(w) + is2(w);
        let q = is1(v - 1.0);
        0.5 / h2 + (p + 2.0 * q) / h2
    } else {
        0.5 / h2 + 59.0 / 36.0 / h2 + 2.0 * (uu - 2.0 / h) / h
    }
}

/// Derivative of [`g_h`]: `u eta(2 - h|u|) + (2 sgn u / h) eta(h|u| - 1)`.
pub fn g_h_prime(u: f64, h: f64) -> f64 {
    debug_assert!(h > 0.0);
    let v = h * u.abs();
    u * eta(2.0 - v) + (2.0 / h) * u.signum() * eta(v - 1.0)
}

/// The primitive `int_0^u theta g_h'(theta) d theta` (odd in `u`); equals
/// `u^3/3` on the uncut range. Enters the weighted energy identity.
pub fn g_h_star(u: f64, h: f64) -> f64 {
    debug_assert!(h > 0.0);
    let uu = u.abs();
    let v = h * uu;
    let val = if v <= 1.0 {
        uu * uu * uu / 3.0
    } else {
        let h3 = h * h * h;
        if v <= 2.0 {
            let w = 2.0 - v;
            // R(v) = int_1^v s^2 eta(2-s) ds, T(v) = int_1^v s eta(s-1) ds
            let r = 5.0 / 6.0 - (4.0 * is1(w) - 4.0 * is2(w) + is3(w));
            let t = is1(v - 1.0) + is2(v - 1.0);
            1.0 / (3.0 * h3) + (r + 2.0 * t) / h3
        } else {
            1.0 / (3.0 * h3) + 23.0 / 9.0 / h3 + (uu * uu - 4.0 / (h * h)) / h
        }
    };
    val * u.signum()
}

// ---------------------------------------------------------------------------
// Damping coefficients
// ---------------------------------------------------------------------------

/// Structural flag for the damping fields (where the parabolic damping is
/// effective).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DampingStructure {
    /// No structural claim.
    Unstructured,
    /// `a_1, a_2 >= a` for `|x| >= r`.
    BothInfinities { a: f64, r: f64 },
    /// `a_1, a_2 >= a` for `x <= -r`.
    MinusInfinity { a: f64, r: f64 },
    /// `a_1, a_2 >= a` for `x >= r`.
    PlusInfinity { a: f64, r: f64 },
}

/// Travel constant, regularization and the three damping fields.
///
/// `a_2` additionally carries wall samples (`y = 0` and `y = L`) because the
/// flux `(a_2 u_y)_y` is assembled on the wall-extended cosine grid. Presets
/// built from x-profiles fill the walls exactly; fields supplied as interior
/// samples are extended by edge replication.
#[derive(Debug, Clone)]
pub struct Coefficients {
    b: f64,
    delta: f64,
    a0: Field,
    a1: Field,
    a2: Field,
    a2_ext: Array2<f64>,
    structure: DampingStructure,
    zero: [bool; 3],
}

impl Coefficients {
    pub fn new(
        b: f64,
        delta: f64,
        a0: Field,
        a1: Field,
        a2: Field,
        structure: DampingStructure,
    ) -> Result<Self, EvolutionError> {
        let grid = a0.grid();
        if a1.grid() != grid || a2.grid() != grid {
            return Err(EvolutionError::GridMismatch);
        }
        let mut a2_ext = Array2::zeros((grid.nx(), grid.ny() + 2));
        for i in 0..grid.nx() {
            a2_ext[[i, 0]] = a2.values()[[i, 0]];
            for j in 0..grid.ny() {
                a2_ext[[i, j + 1]] = a2.values()[[i, j]];
            }
            a2_ext[[i, grid.ny() + 1]] = a2.values()[[i, grid.ny() - 1]];
        }
        Self::build(b, delta, a0, a1, a2, a2_ext, structure)
    }

    /// Damping given by x-profiles (every preset): wall samples are exact.
    pub fn from_x_profiles(
        grid: StripGrid,
        b: f64,
        delta: f64,
        p0: impl Fn(f64) -> f64,
        p1: impl Fn(f64) -> f64,
        p2: impl Fn(f64) -> f64,
        structure: DampingStructure,
    ) -> Result<Self, EvolutionError> {
        let a0 = Field::from_fn(grid, |x, _| p0(x));
        let a1 = Field::from_fn(grid, |x, _| p1(x));
        let a2 = Field::from_fn(grid, |x, _| p2(x));
        let mut a2_ext = Array2::zeros((grid.nx(), grid.ny() + 2));
        for i in 0..grid.nx() {
            let v = p2(grid.x(i));
            for j in 0..grid.ny() + 2 {
                a2_ext[[i, j]] = v;
            }
        }
        Self::build(b, delta, a0, a1, a2, a2_ext, structure)
    }

    fn build(
        b: f64,
        delta: f64,
        a0: Field,
        a1: Field,
        a2: Field,
        a2_ext: Array2<f64>,
        structure: DampingStructure,
    ) -> Result<Self, EvolutionError> {
        if delta < 0.0 || !delta.is_finite() {
            return Err(PropagatorError::NegativeDelta(delta).into());
        }
        for (index, f) in [&a0, &a1, &a2].iter().enumerate() {
            if !f.is_finite() {
                return Err(EvolutionError::NonFiniteDamping);
            }
            if index > 0 {
                let min = f.values().iter().cloned().fold(f64::INFINITY, f64::min);
                if min < 0.0 {
                    return Err(EvolutionError::NegativeDamping { index, min });
                }
            }
        }
        let zero = [
            a0.max_abs() == 0.0,
            a1.max_abs() == 0.0,
            a2.max_abs() == 0.0,
        ];
        let coeffs = Self {
            b,
            delta,
            a0,
            a1,
            a2,
            a2_ext,
            structure,
            zero,
        };
        coeffs.verify_structure()?;
        Ok(coeffs)
    }

    /// Pointwise check of the structural flag on the grid.
    pub fn verify_structure(&self) -> Result<(), EvolutionError> {
        let grid = self.a1.grid();
        let (a, pred): (f64, Box<dyn Fn(f64) -> bool>) = match self.structure {
            DampingStructure::Unstructured => return Ok(()),
            DampingStructure::BothInfinities { a, r } => (a, Box::new(move |x: f64| x.abs() >= r)),
            DampingStructure::MinusInfinity { a, r } => (a, Box::new(move |x: f64| x <= -r)),
            DampingStructure::PlusInfinity { a, r } => (a, Box::new(move |x: f64| x >= r)),
        };
        for i in 0..grid.nx() {
            if !pred(grid.x(i)) {
                continue;
            }
            for j in 0..grid.ny() {
                let (v1, v2) = (self.a1.values()[[i, j]], self.a2.values()[[i, j]]);
                if v1 < a - 1e-12 || v2 < a - 1e-12 {
                    return Err(EvolutionError::StructureViolated(format!(
                        "a1/a2 = ({v1}, {v2}) < {a} at x = {}, y = {}",
                        grid.x(i),
                        grid.y(j)
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn a0(&self) -> &Field {
        &self.a0
    }

    pub fn a1(&self) -> &Field {
        &self.a1
    }

    pub fn a2(&self) -> &Field {
        &self.a2
    }

    /// `a_2` on the wall-extended node set (`nx x (ny + 2)`).
    pub(crate) fn a2_extended(&self) -> &Array2<f64> {
        &self.a2_ext
    }

    pub fn structure(&self) -> DampingStructure {
        self.structure
    }

    pub fn grid(&self) -> StripGrid {
        self.a0.grid()
    }

    pub fn has_damping(&self) -> bool {
        !(self.zero[0] && self.zero[1] && self.zero[2])
    }
}

/// `a_1 = a_2 = 0`, `a_0 = 0`.
pub fn damping_none(grid: StripGrid, b: f64, delta: f64) -> Coefficients {
    Coefficients::from_x_profiles(
        grid,
        b,
        delta,
        |_| 0.0,
        |_| 0.0,
        |_| 0.0,
        DampingStructure::Unstructured,
    )
    .expect("zero damping is always valid")
}

/// Constant damping fields.
pub fn damping_constant(
    grid: StripGrid,
    b: f64,
    delta: f64,
    c0: f64,
    c1: f64,
    c2: f64,
) -> Result<Coefficients, EvolutionError> {
    Coefficients::from_x_profiles(
        grid,
        b,
        delta,
        |_| c0,
        |_| c1,
        |_| c2,
        DampingStructure::Unstructured,
    )
}

/// Which tail(s) the plateau covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlateauSide {
    Both,
    Minus,
    Plus,
}

/// Plateau profile: exactly `a` on the flagged tail(s) (`|x| >= r`), zero
/// well inside, smoothstep transition of the given width.
pub fn plateau_profile(side: PlateauSide, a: f64, r: f64, width: f64) -> impl Fn(f64) -> f64 {
    move |x: f64| {
        let up = eta((x - (r - width)) / width);
        let down = eta((-x - (r - width)) / width);
        match side {
            PlateauSide::Both => a * (up + down),
            PlateauSide::Minus => a * down,
            PlateauSide::Plus => a * up,
        }
    }
}

/// Parabolic damping `a_1 = a_2` effective on the flagged tail(s), plus a
/// constant absorption floor `a0_const >= 0`.
pub fn damping_plateau(
    grid: StripGrid,
    b: f64,
    delta: f64,
    side: PlateauSide,
    a: f64,
    r: f64,
    width: f64,
    a0_const: f64,
) -> Result<Coefficients, EvolutionError> {
    if !(a > 0.0) || !(r > 0.0) {
        return Err(EvolutionError::BadConfig(
            "plateau requires a > 0 and R > 0".into(),
        ));
    }
    let width = width.min(2.0 * r).max(1e-6);
    let profile = plateau_profile(side, a, r, width);
    let structure = match side {
        PlateauSide::Both => DampingStructure::BothInfinities { a, r },
        PlateauSide::Minus => DampingStructure::MinusInfinity { a, r },
        PlateauSide::Plus => DampingStructure::PlusInfinity { a, r },
    };
    Coefficients::from_x_profiles(grid, b, delta, |_| a0_const, &profile, &profile, structure)
}

// ---------------------------------------------------------------------------
// Initial data presets
// ---------------------------------------------------------------------------

/// Initial-condition presets; every preset satisfies the wall conditions by
/// construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialPreset {
    Zero,
    /// `A exp(-(x - x0)^2 / w^2) sin(pi l y / L)`
    Gaussian {
        amplitude: f64,
        center: f64,
        width: f64,
        y_mode: usize,
    },
    /// `A sech^2((x - x0) / w) sin(pi l y / L)`
    Sech2 {
        amplitude: f64,
        center: f64,
        width: f64,
        y_mode: usize,
    },
}

pub fn build_initial(grid: StripGrid, preset: InitialPreset) -> Field {
    let l = grid.width_l();
    match preset {
        InitialPreset::Zero => Field::zeros(grid),
        InitialPreset::Gaussian {
            amplitude,
            center,
            width,
            y_mode,
        } => Field::from_fn(grid, |x, y| {
            let dx = x - center;
            amplitude
                * (-dx * dx / (width * width)).exp()
                * (std::f64::consts::PI * y_mode as f64 * y / l).sin()
        }),
        InitialPreset::Sech2 {
            amplitude,
            center,
            width,
            y_mode,
        } => Field::from_fn(grid, |x, y| {
            let s = 1.0 / ((x - center) / width).cosh();
            amplitude * s * s * (std::f64::consts::PI * y_mode as f64 * y / l).sin()
        }),
    }
}

// ---------------------------------------------------------------------------
// Solver configuration and trajectory
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Cutoff parameter of `g_h`; the nonlinearity is exactly `u^2/2` while
    /// `max |u| <= 1/h_cutoff`.
    pub h_cutoff: f64,
    pub use_dealiasing: bool,
    pub snapshot_every: usize,
    /// Disable the quadratic term entirely (linearized runs).
    pub include_nonlinearity: bool,
    /// Abort when the L2 norm exceeds this multiple of its initial value.
    pub blowup_factor: f64,
}

impl SolverConfig {
    pub fn new(dt: f64, t_end: f64) -> Result<Self, EvolutionError> {
        let cfg = Self {
            dt,
            t_end,
            h_cutoff: 0.1,
            use_dealiasing: true,
            snapshot_every: 10,
            include_nonlinearity: true,
            blowup_factor: 1e6,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), EvolutionError> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(EvolutionError::BadConfig(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_end > self.dt) {
            return Err(EvolutionError::BadConfig(format!(
                "t_end ({}) must exceed dt ({})",
                self.t_end, self.dt
            )));
        }
        if !(self.h_cutoff > 0.0) {
            return Err(EvolutionError::BadConfig(format!(
                "h_cutoff must be positive, got {}",
                self.h_cutoff
            )));
        }
        if self.snapshot_every == 0 {
            return Err(EvolutionError::BadConfig(
                "snapshot_every must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Failure marker attached to a partial trajectory.
#[derive(Debug, Clone)]
pub struct RunFailure {
    pub t: f64,
    pub reason: String,
}

/// Snapshots and per-snapshot diagnostics of one run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<Field>,
    pub records: Vec<DiagnosticRecord>,
    /// Probe weights the `weighted_l2` record entries refer to, in order.
    pub probe_weights: Vec<crate::weights::WeightSpec>,
    pub failure: Option<RunFailure>,
}

impl Trajectory {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

// ---------------------------------------------------------------------------
// Pseudospectral right-hand side and the splitting step
// ---------------------------------------------------------------------------

fn axpy(acc: &mut Array2<Complex64>, factor: Complex64, other: &Array2<Complex64>) {
    acc.zip_mut_with(other, |a, b| *a += factor * b);
}

/// Multiplier `i xi_k` with the unpaired Nyquist mode zeroed.
fn x_derivative_in_place(grid: StripGrid, coeffs: &mut Array2<Complex64>) {
    for k in 0..grid.nx() {
        let factor = if k == grid.nyquist_index() {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, grid.xi(k))
        };
        for l in 0..grid.ny() {
            coeffs[[k, l]] *= factor;
        }
    }
}

/// Spectral right-hand side of the non-stiff part:
/// `-(g_h(u))_x + (a_1 u_x)_x + (a_2 u_y)_y - a_0 u + f`.
fn rhs_hat(
    u_hat: &SpectralField,
    coeffs: &Coefficients,
    h: f64,
    f_hat: Option<&SpectralField>,
    use_dealiasing: bool,
    include_nonlinearity: bool,
) -> Result<SpectralField, EvolutionError> {
    let grid = u_hat.grid();
    let mut acc = SpectralField::zeros(grid);

    let needs_physical = include_nonlinearity || !coeffs.zero[0];
    let u = if needs_physical {
        Some(inverse_transform_unchecked(u_hat))
    } else {
        None
    };

    if include_nonlinearity {
        let u = u.as_ref().unwrap();
        let g = Field::from_values(grid, u.values().mapv(|v| g_h(v, h)));
        let mut g_hat = forward_transform(&g)?;
        if use_dealiasing {
            dealias_in_place(&mut g_hat);
        }
        x_derivative_in_place(grid, g_hat.coeffs_mut());
        axpy(acc.coeffs_mut(), Complex64::new(-1.0, 0.0), g_hat.coeffs());
    }

    if !coeffs.zero[1] {
        let mut ux_hat = u_hat.clone();
        x_derivative_in_place(grid, ux_hat.coeffs_mut());
        let ux = inverse_transform_unchecked(&ux_hat);
        let p = ux.pointwise_mul(&coeffs.a1);
        let mut p_hat = forward_transform(&p)?;
        x_derivative_in_place(grid, p_hat.coeffs_mut());
        axpy(acc.coeffs_mut(), Complex64::new(1.0, 0.0), p_hat.coeffs());
    }

    if !coeffs.zero[2] {
        let mut w = spectral::y_derivative_extended(u_hat);
        w *= &coeffs.a2_ext;
        let semi = spectral::y_derivative_of_extended_to_semi(grid, &w);
        let flux = spectral::x_forward(grid, &semi);
        axpy(acc.coeffs_mut(), Complex64::new(1.0, 0.0), &flux);
    }

    if !coeffs.zero[0] {
        let u = u.as_ref().unwrap();
        let p = u.pointwise_mul(&coeffs.a0);
        let p_hat = forward_transform(&p)?;
        axpy(acc.coeffs_mut(), Complex64::new(-1.0, 0.0), p_hat.coeffs());
    }

    if let Some(f_hat) = f_hat {
        axpy(acc.coeffs_mut(), Complex64::new(1.0, 0.0), f_hat.coeffs());
    }

    Ok(acc)
}

/// Pointwise right-hand side of the non-stiff part in physical space
/// (`f` enters as given; the quadratic product is dealiased on request).
pub fn nonlinear_rhs(
    u: &Field,
    coeffs: &Coefficients,
    h: f64,
    f: &Field,
    use_dealiasing: bool,
) -> Result<Field, EvolutionError> {
    if u.grid() != coeffs.grid() || f.grid() != u.grid() {
        return Err(EvolutionError::GridMismatch);
    }
    let u_hat = forward_transform(u)?;
    let f_hat = forward_transform(f)?;
    let out = rhs_hat(&u_hat, coeffs, h, Some(&f_hat), use_dealiasing, true)?;
    let field = inverse_transform_unchecked(&out);
    if !field.is_finite() {
        return Err(EvolutionError::NonFiniteRhs);
    }
    Ok(field)
}

fn rk4_substep(
    u_hat: &SpectralField,
    coeffs: &Coefficients,
    cfg: &SolverConfig,
    f_hat: Option<&SpectralField>,
    dt: f64,
) -> Result<SpectralField, EvolutionError> {
    if !cfg.include_nonlinearity && !coeffs.has_damping() && f_hat.is_none() {
        return Ok(u_hat.clone());
    }
    let eval = |state: &SpectralField| {
        rhs_hat(
            state,
            coeffs,
            cfg.h_cutoff,
            f_hat,
            cfg.use_dealiasing,
            cfg.include_nonlinearity,
        )
    };
    let k1 = eval(u_hat)?;
    let mut stage = u_hat.clone();
    axpy(
        stage.coeffs_mut(),
        Complex64::new(0.5 * dt, 0.0),
        k1.coeffs(),
    );
    let k2 = eval(&stage)?;
    let mut stage = u_hat.clone();
    axpy(
        stage.coeffs_mut(),
        Complex64::new(0.5 * dt, 0.0),
        k2.coeffs(),
    );
    let k3 = eval(&stage)?;
    let mut stage = u_hat.clone();
    axpy(stage.coeffs_mut(), Complex64::new(dt, 0.0), k3.coeffs());
    let k4 = eval(&stage)?;

    let mut out = u_hat.clone();
    let w = dt / 6.0;
    axpy(out.coeffs_mut(), Complex64::new(w, 0.0), k1.coeffs());
    axpy(out.coeffs_mut(), Complex64::new(2.0 * w, 0.0), k2.coeffs());
    axpy(out.coeffs_mut(), Complex64::new(2.0 * w, 0.0), k3.coeffs());
    axpy(out.coeffs_mut(), Complex64::new(w, 0.0), k4.coeffs());
    Ok(out)
}

fn strang_step_spectral(
    u_hat: &SpectralField,
    sym: &LinearSymbol,
    coeffs: &Coefficients,
    cfg: &SolverConfig,
    f_hat: Option<&SpectralField>,
) -> Result<SpectralField, EvolutionError> {
    let half = apply_propagator(u_hat, sym, 0.5 * cfg.dt)?;
    let mid = rk4_substep(&half, coeffs, cfg, f_hat, cfg.dt)?;
    Ok(apply_propagator(&mid, sym, 0.5 * cfg.dt)?)
}

/// One Strang step: half linear propagation, full RK4 nonlinear substep,
/// half linear propagation. Second-order accurate in `dt`.
pub fn step(
    u: &Field,
    sym: &LinearSymbol,
    coeffs: &Coefficients,
    cfg: &SolverConfig,
) -> Result<Field, EvolutionError> {
    cfg.validate()?;
    if u.grid() != sym.grid() || u.grid() != coeffs.grid() {
        return Err(EvolutionError::GridMismatch);
    }
    let u_hat = forward_transform(u)?;
    let out = strang_step_spectral(&u_hat, sym, coeffs, cfg, None)?;
    Ok(inverse_transform_unchecked(&out))
}

/// Integrate from `u0` to `t_end`, recording a snapshot (with the requested
/// diagnostics) every `snapshot_every` steps. A blow-up terminates the run
/// early; the partial trajectory carries the failure marker.
pub fn run(
    u0: &Field,
    f: &Field,
    coeffs: &Coefficients,
    cfg: &SolverConfig,
    probes: &ProbeSet,
) -> Result<Trajectory, EvolutionError> {
    cfg.validate()?;
    let grid = u0.grid();
    if grid != coeffs.grid() || grid != f.grid() {
        return Err(EvolutionError::GridMismatch);
    }
    let n_steps = (cfg.t_end / cfg.dt).round().max(1.0) as usize;
    let dt = cfg.t_end / n_steps as f64;
    let cfg = SolverConfig { dt, ..cfg.clone() };
    let sym = build_symbol(grid, coeffs.b(), coeffs.delta())?;

    let mut u_hat = forward_transform(u0)?;
    if cfg.use_dealiasing {
        dealias_in_place(&mut u_hat);
    }
    let forcing = if f.max_abs() > 0.0 {
        Some(forward_transform(f)?)
    } else {
        None
    };

    let norm0 = u_hat.l2_norm_sq().sqrt();
    let mut traj = Trajectory {
        times: Vec::new(),
        snapshots: Vec::new(),
        records: Vec::new(),
        probe_weights: probes.weights.clone(),
        failure: None,
    };
    let record = |traj: &mut Trajectory, t: f64, state: &SpectralField| {
        let field = inverse_transform_unchecked(state);
        traj.records
            .push(DiagnosticRecord::measure(&field, t, probes));
        traj.times.push(t);
        traj.snapshots.push(field);
    };
    record(&mut traj, 0.0, &u_hat);

    for step_idx in 1..=n_steps {
        let t = step_idx as f64 * dt;
        match strang_step_spectral(&u_hat, &sym, coeffs, &cfg, forcing.as_ref()) {
            Ok(next) => u_hat = next,
            Err(e) => {
                traj.failure = Some(RunFailure {
                    t,
                    reason: e.to_string(),
                });
                return Ok(traj);
            }
        }
        let norm = u_hat.l2_norm_sq().sqrt();
        if !norm.is_finite() || norm > cfg.blowup_factor * norm0.max(f64::MIN_POSITIVE) {
            traj.failure = Some(RunFailure {
                t,
                reason: format!(
                    "norm {norm:e} exceeds {} x initial ({norm0:e})",
                    cfg.blowup_factor
                ),
            });
            return Ok(traj);
        }
        if step_idx % cfg.snapshot_every == 0 || step_idx == n_steps {
            record(&mut traj, t, &u_hat);
        }
    }
    Ok(traj)
}
