//! Energy-identity residuals, conserved-quantity drift and norm probes.
//!
//! The discrete L2 balance of the regularized flow reads
//!
//! `d/dt iint u^2 + 2 delta iint (u_xx^2 + u_yy^2) + 2 iint g_h'(u) u u_x
//!  + 2 iint (a_1 u_x^2 + a_2 u_y^2 + a_0 u^2) = 2 iint f u`
//!
//! and its weighted version (multiplier `2 u psi(x)`, integration by parts
//! against the sine basis and periodic x) splits into the ten integral
//! groups listed at [`WeightedResidualSeries`]. Residuals replace `d/dt`
//! with a centered difference on the snapshot grid, so on smooth runs they
//! shrink at second order under simultaneous (dt, snapshot) refinement.

use thiserror::Error;

use crate::evolution::{g_h_prime, g_h_star, Coefficients, Trajectory};
use crate::grid::Field;
use crate::spectral::{self, forward_transform, SpectralError};
use crate::weights::{weight_samples, WeightSpec};

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("need at least 3 snapshots for centered differencing, got {0}")]
    TooFewSnapshots(usize),
    #[error("snapshot spacing must be uniform for centered differencing")]
    NonUniformSpacing,
    #[error("grid mismatch between trajectory and coefficients")]
    GridMismatch,
    #[error("weight {0} was not recorded for this trajectory")]
    MissingWeight(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Which probes a run records on every snapshot.
#[derive(Debug, Clone, Default)]
pub struct ProbeSet {
    pub weights: Vec<WeightSpec>,
}

impl ProbeSet {
    pub fn minimal() -> Self {
        Self::default()
    }

    pub fn with_weights(weights: Vec<WeightSpec>) -> Self {
        Self { weights }
    }
}

/// Per-snapshot scalar diagnostics.
#[derive(Debug, Clone)]
pub struct DiagnosticRecord {
    pub t: f64,
    pub l2: f64,
    pub h1: f64,
    /// `iint (u_x^2 + u_y^2 + u^3/3)`
    pub energy: f64,
    /// One entry per probe weight, same order as the probe set.
    pub weighted_l2: Vec<f64>,
    /// Filled by [`attach_residuals`]; `None` at series endpoints.
    pub residual_l2: Option<f64>,
    pub residual_weighted: Vec<Option<f64>>,
}

impl DiagnosticRecord {
    pub fn measure(u: &Field, t: f64, probes: &ProbeSet) -> Self {
        let (l2_sq, energy) = conserved_quantities(u);
        let grad_sq = gradient_energy(u);
        let weighted_l2 = probes
            .weights
            .iter()
            .map(|w| crate::weights::weighted_l2_norm(u, w))
            .collect::<Vec<_>>();
        let n_w = weighted_l2.len();
        Self {
            t,
            l2: l2_sq.sqrt(),
            h1: (l2_sq + grad_sq).sqrt(),
            energy,
            weighted_l2,
            residual_l2: None,
            residual_weighted: vec![None; n_w],
        }
    }
}

/// `iint (u_x^2 + u_y^2)` with the wall-inclusive trapezoid for the
/// cosine-series integrand `u_y^2`.
fn gradient_energy(u: &Field) -> f64 {
    let grid = u.grid();
    let s = forward_transform(u).expect("field must be finite");
    let g = crate::weights::grad_sq_extended(&s).expect("gradient evaluation");
    let one = vec![1.0; grid.nx()];
    crate::weights::weighted_integral_extended(grid, &one, &g)
}

/// Quadrature values of the two conserved functionals of the undamped flow:
/// `(iint u^2, iint (u_x^2 + u_y^2 + u^3/3))`.
pub fn conserved_quantities(u: &Field) -> (f64, f64) {
    let l2_sq = u.l2_norm_sq();
    let cubic = u.grid().cell_area() * u.values().iter().map(|v| v * v * v / 3.0).sum::<f64>();
    (l2_sq, gradient_energy(u) + cubic)
}

/// Residual series of a discrete identity (one value per interior snapshot).
#[derive(Debug, Clone)]
pub struct ResidualSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl ResidualSeries {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Weighted residual with the ten integral groups exposed individually:
///
/// 0. `d/dt iint u^2 psi` (centered difference)
/// 1. `-b iint u^2 psi'`
/// 2. `iint (3 u_x^2 + u_y^2) psi'`
/// 3. `-iint u^2 psi'''`
/// 4. `2 delta iint (u_xx^2 + u_yy^2) psi`
/// 5. `-4 delta iint u_x^2 psi''`
/// 6. `delta iint u^2 psi''''`
/// 7. `-2 iint (g_h'(u) u)* psi'`
/// 8. `2 iint (a_1 u_x^2 + a_2 u_y^2 + a_0 u^2) psi + 2 iint a_1 u u_x psi'`
/// 9. `-2 iint f u psi`
#[derive(Debug, Clone)]
pub struct WeightedResidualSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub terms: Vec<[f64; 10]>,
}

impl WeightedResidualSeries {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Everything the identities need to know about how the trajectory was
/// produced.
#[derive(Debug, Clone, Copy)]
pub struct IdentityContext<'a> {
    pub coeffs: &'a Coefficients,
    pub h_cutoff: f64,
    pub forcing: Option<&'a Field>,
    pub include_nonlinearity: bool,
}

fn check_spacing(traj: &Trajectory) -> Result<f64, DiagnosticsError> {
    if traj.times.len() < 3 {
        return Err(DiagnosticsError::TooFewSnapshots(traj.times.len()));
    }
    let dt = traj.times[1] - traj.times[0];
    for w in traj.times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.abs().max(1e-300) {
            return Err(DiagnosticsError::NonUniformSpacing);
        }
    }
    Ok(dt)
}

struct SnapshotDerivs {
    ux: Field,
    /// `u_y` on the wall-extended node set (`nx x (ny + 2)`).
    uy_ext: ndarray::Array2<f64>,
    uxx: Field,
    uyy: Field,
}

impl SnapshotDerivs {
    fn compute(u: &Field, need_second: bool) -> Result<Self, SpectralError> {
        let s = forward_transform(u)?;
        let ux = spectral::inverse_transform_unchecked(&spectral::derivative(&s, 1, 0)?);
        let uy_ext = spectral::y_derivative_extended(&s);
        let (uxx, uyy) = if need_second {
            (
                spectral::inverse_transform_unchecked(&spectral::derivative(&s, 2, 0)?),
                spectral::inverse_transform_unchecked(&spectral::derivative(&s, 0, 2)?),
            )
        } else {
            (Field::zeros(u.grid()), Field::zeros(u.grid()))
        };
        Ok(Self {
            ux,
            uy_ext,
            uxx,
            uyy,
        })
    }

    fn uy(&self, i: usize, j: usize) -> f64 {
        self.uy_ext[[i, j + 1]]
    }

    /// Wall contribution (trapezoid half-weights) of `c(y=0) u_y(y=0)^2 +
    /// c(y=L) u_y(y=L)^2` at sample column `i`.
    fn uy_sq_walls(&self, i: usize, c0: f64, cl: f64) -> f64 {
        let ny1 = self.uy_ext.dim().1 - 1;
        0.5 * (c0 * self.uy_ext[[i, 0]].powi(2) + cl * self.uy_ext[[i, ny1]].powi(2))
    }
}

/// Residual of the discrete L2 balance at every interior snapshot.
pub fn l2_identity_residual(
    traj: &Trajectory,
    ctx: &IdentityContext,
) -> Result<ResidualSeries, DiagnosticsError> {
    let dt = check_spacing(traj)?;
    let coeffs = ctx.coeffs;
    if traj.snapshots[0].grid() != coeffs.grid() {
        return Err(DiagnosticsError::GridMismatch);
    }
    let delta = coeffs.delta();
    let q: Vec<f64> = traj.snapshots.iter().map(Field::l2_norm_sq).collect();
    let mut times = Vec::new();
    let mut values = Vec::new();
    let a2_ext = coeffs.a2_extended();
    for n in 1..traj.snapshots.len() - 1 {
        let u = &traj.snapshots[n];
        let grid = u.grid();
        let d = SnapshotDerivs::compute(u, delta != 0.0)?;
        let mut spatial = 0.0;
        for i in 0..grid.nx() {
            spatial += 2.0 * d.uy_sq_walls(i, a2_ext[[i, 0]], a2_ext[[i, grid.ny() + 1]]);
            for j in 0..grid.ny() {
                let (uv, uxv, uyv) = (u.values()[[i, j]], d.ux.values()[[i, j]], d.uy(i, j));
                if delta != 0.0 {
                    let (uxxv, uyyv) = (d.uxx.values()[[i, j]], d.uyy.values()[[i, j]]);
                    spatial += 2.0 * delta * (uxxv * uxxv + uyyv * uyyv);
                }
                if ctx.include_nonlinearity {
                    spatial += 2.0 * g_h_prime(uv, ctx.h_cutoff) * uv * uxv;
                }
                spatial += 2.0
                    * (coeffs.a1().values()[[i, j]] * uxv * uxv
                        + coeffs.a2().values()[[i, j]] * uyv * uyv
                        + coeffs.a0().values()[[i, j]] * uv * uv);
                if let Some(f) = ctx.forcing {
                    spatial -= 2.0 * f.values()[[i, j]] * uv;
                }
            }
        }
        spatial *= grid.cell_area();
        let dq = (q[n + 1] - q[n - 1]) / (2.0 * dt);
        times.push(traj.times[n]);
        values.push(dq + spatial);
    }
    Ok(ResidualSeries { times, values })
}

/// Residual of the discrete weighted identity; exposes the ten integral
/// groups per snapshot alongside the fused one-shot residual.
pub fn weighted_identity_residual(
    traj: &Trajectory,
    ctx: &IdentityContext,
    w: &WeightSpec,
) -> Result<WeightedResidualSeries, DiagnosticsError> {
    let dt = check_spacing(traj)?;
    let coeffs = ctx.coeffs;
    let grid = traj.snapshots[0].grid();
    if grid != coeffs.grid() {
        return Err(DiagnosticsError::GridMismatch);
    }
    let delta = coeffs.delta();
    let b = coeffs.b();
    let psi: Vec<Vec<f64>> = (0..=4).map(|o| weight_samples(grid, w, o)).collect();

    let weighted_q = |u: &Field| -> f64 {
        grid.cell_area()
            * (0..grid.nx())
                .map(|i| {
                    psi[0][i]
                        * (0..grid.ny())
                            .map(|j| u.values()[[i, j]].powi(2))
                            .sum::<f64>()
                })
                .sum::<f64>()
    };
    let q: Vec<f64> = traj.snapshots.iter().map(weighted_q).collect();

    let a2_ext = coeffs.a2_extended();
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut terms_out = Vec::new();
    for n in 1..traj.snapshots.len() - 1 {
        let u = &traj.snapshots[n];
        let d = SnapshotDerivs::compute(u, delta != 0.0)?;
        let mut terms = [0.0f64; 10];
        terms[0] = (q[n + 1] - q[n - 1]) / (2.0 * dt);

        // One-shot fused residual accumulated in a single sweep.
        let mut fused = terms[0];
        let area = grid.cell_area();
        for i in 0..grid.nx() {
            let (p0, p1, p2, p3, p4) = (psi[0][i], psi[1][i], psi[2][i], psi[3][i], psi[4][i]);
            let mut row = [0.0f64; 9];
            row[1] += d.uy_sq_walls(i, p1, p1);
            row[7] += d.uy_sq_walls(i, a2_ext[[i, 0]] * p0, a2_ext[[i, grid.ny() + 1]] * p0);
            for j in 0..grid.ny() {
                let uv = u.values()[[i, j]];
                let uxv = d.ux.values()[[i, j]];
                let uyv = d.uy(i, j);
                row[0] += uv * uv * p1;
                row[1] += (3.0 * uxv * uxv + uyv * uyv) * p1;
                row[2] += uv * uv * p3;
                if delta != 0.0 {
                    let uxxv = d.uxx.values()[[i, j]];
                    let uyyv = d.uyy.values()[[i, j]];
                    row[3] += (uxxv * uxxv + uyyv * uyyv) * p0;
                    row[4] += uxv * uxv * p2;
                    row[5] += uv * uv * p4;
                }
                if ctx.include_nonlinearity {
                    row[6] += g_h_star(uv, ctx.h_cutoff) * p1;
                }
                row[7] += (coeffs.a1().values()[[i, j]] * uxv * uxv
                    + coeffs.a2().values()[[i, j]] * uyv * uyv
                    + coeffs.a0().values()[[i, j]] * uv * uv)
                    * p0
                    + coeffs.a1().values()[[i, j]] * uv * uxv * p1;
                if let Some(f) = ctx.forcing {
                    row[8] += f.values()[[i, j]] * uv * p0;
                }
            }
            terms[1] += -b * row[0] * area;
            terms[2] += row[1] * area;
            terms[3] += -row[2] * area;
            terms[4] += 2.0 * delta * row[3] * area;
            terms[5] += -4.0 * delta * row[4] * area;
            terms[6] += delta * row[5] * area;
            terms[7] += -2.0 * row[6] * area;
            terms[8] += 2.0 * row[7] * area;
            terms[9] += -2.0 * row[8] * area;
            fused += area
                * (-b * row[0] + row[1] - row[2] + 2.0 * delta * row[3] - 4.0 * delta * row[4]
                    + delta * row[5]
                    - 2.0 * row[6]
                    + 2.0 * row[7]
                    - 2.0 * row[8]);
        }
        times.push(traj.times[n]);
        values.push(fused);
        terms_out.push(terms);
    }
    Ok(WeightedResidualSeries {
        times,
        values,
        terms: terms_out,
    })
}

/// Compute the residual series and write them into the trajectory's
/// diagnostic records (`None` at the endpoints). The weighted residuals are
/// computed for the probe weights the records already carry.
pub fn attach_residuals(
    traj: &mut Trajectory,
    ctx: &IdentityContext,
    weights: &[WeightSpec],
) -> Result<(), DiagnosticsError> {
    if traj.times.len() < 3 {
        return Ok(());
    }
    if check_spacing(traj).is_err() {
        return Ok(()); // endpoints recorded off-cadence: leave residuals empty
    }
    let l2 = l2_identity_residual(traj, ctx)?;
    for (offset, v) in l2.values.iter().enumerate() {
        traj.records[offset + 1].residual_l2 = Some(*v);
    }
    for (wi, w) in weights.iter().enumerate() {
        let series = weighted_identity_residual(traj, ctx, w)?;
        for (offset, v) in series.values.iter().enumerate() {
            traj.records[offset + 1].residual_weighted[wi] = Some(*v);
        }
    }
    Ok(())
}
