//! Lossless transforms between physical samples and Fourier(x) x sine(y)
//! coefficients, spectral differentiation and 2/3-rule dealiasing.
//!
//! Conventions, fixed once and asserted by the Parseval tests:
//!
//! * forward carries `1/nx` in x and the orthonormal scaling
//!   `sqrt(2/L) * dy` in y, so a field expands as
//!   `u(x, y) = sum_{k,l} c(k, l) e^{i xi_k (x - x_min)} psi_l(y)` with
//!   `psi_l(y) = sqrt(2/L) sin(pi l y / L)`;
//! * Parseval reads `dx dy sum u^2 = (x_max - x_min) * sum |c|^2`.
//!
//! Odd y-derivatives of a sine series are cosine series and leave the basis;
//! they are provided as physical-space evaluations ([`y_derivative`]) and as
//! the flux pipeline used by the evolution module (pointwise product on the
//! wall-extended grid, cosine analysis, then one more `d/dy` back into the
//! sine basis).

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::grid::{Field, StripGrid};

/// Relative tolerance for the conjugate-symmetry guard in
/// [`inverse_transform`].
pub const SYMMETRY_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("input field contains non-finite values")]
    NonFiniteInput,
    #[error(
        "conjugate symmetry violated: defect {defect:e} exceeds {tol:e} (corrupted spectral state)"
    )]
    SymmetryViolation { defect: f64, tol: f64 },
    #[error("odd y-derivative of order {0} leaves the sine basis; use y_derivative for first derivatives")]
    OddYDerivative(usize),
}

/// Coefficients `c(k, l)` of a real field on the Fourier x sine basis.
///
/// Storage is FFT-ordered in `k` (index `0..nx` maps to frequencies
/// `0, 1, ..., nx/2 - 1, -nx/2, ..., -1`) and `l = j + 1` for column `j`.
/// Real fields satisfy `c(-k, l) = conj(c(k, l))`.
#[derive(Debug, Clone)]
pub struct SpectralField {
    grid: StripGrid,
    coeffs: Array2<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: StripGrid) -> Self {
        Self {
            grid,
            coeffs: Array2::zeros((grid.nx(), grid.ny())),
        }
    }

    pub fn grid(&self) -> StripGrid {
        self.grid
    }

    pub fn coeffs(&self) -> &Array2<Complex64> {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.coeffs
    }

    pub fn from_coeffs(grid: StripGrid, coeffs: Array2<Complex64>) -> Self {
        assert_eq!(coeffs.dim(), (grid.nx(), grid.ny()));
        Self { grid, coeffs }
    }

    /// Coefficient for a signed wavenumber index and sine mode `l >= 1`.
    pub fn coeff(&self, k_signed: i64, l: usize) -> Complex64 {
        let nx = self.grid.nx() as i64;
        let idx = k_signed.rem_euclid(nx) as usize;
        self.coeffs[[idx, l - 1]]
    }

    /// Set the coefficient of signed wavenumber `k` and mode `l >= 1`.
    pub fn set_coeff(&mut self, k_signed: i64, l: usize, value: Complex64) {
        let nx = self.grid.nx() as i64;
        let idx = k_signed.rem_euclid(nx) as usize;
        self.coeffs[[idx, l - 1]] = value;
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.norm()))
    }

    /// Physical `L2(Sigma)` norm squared computed spectrally (Parseval):
    /// `(x_max - x_min) * sum |c|^2`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.grid.x_period() * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    /// Largest deviation from conjugate symmetry `c(-k,l) = conj(c(k,l))`.
    pub fn symmetry_defect(&self) -> f64 {
        let nx = self.grid.nx();
        let ny = self.grid.ny();
        let mut defect = 0.0f64;
        for l in 0..ny {
            defect = defect.max(self.coeffs[[0, l]].im.abs());
            defect = defect.max(self.coeffs[[nx / 2, l]].im.abs());
            for k in 1..nx / 2 {
                let d = self.coeffs[[k, l]] - self.coeffs[[nx - k, l]].conj();
                defect = defect.max(d.norm());
            }
        }
        defect
    }
}

impl Field {
    /// `L2(Sigma)` norm squared by the grid quadrature rule.
    pub fn l2_norm_sq(&self) -> f64 {
        self.grid().cell_area() * self.values().iter().map(|v| v * v).sum::<f64>()
    }
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    guard
        .entry((len, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(len)
            } else {
                planner.plan_fft_forward(len)
            }
        })
        .clone()
}

/// Type-I discrete sine transform: `out[l-1] = sum_j v[j-1] sin(pi l j / (n+1))`.
///
/// Self-inverse up to the factor `(n+1)/2`. Implemented through a complex FFT
/// of the odd extension (length `2(n+1)`).
pub(crate) fn dst1(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let m = 2 * (n + 1);
    let fft = plan(m, false);
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for (j, &val) in v.iter().enumerate() {
        buf[j + 1] = Complex64::new(val, 0.0);
        buf[m - 1 - j] = Complex64::new(-val, 0.0);
    }
    fft.process(&mut buf);
    (1..=n).map(|l| -0.5 * buf[l].im).collect()
}

/// Evaluate `w(y) = sum_{l=1}^{n} b[l-1] cos(pi l y / L)` at the extended
/// nodes `y_j = j L / (n+1)`, `j = 0..=n+1` (walls included).
pub(crate) fn cosine_eval_extended(b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let big_n = n + 1;
    let m = 2 * big_n;
    let fft = plan(m, true);
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for (idx, &val) in b.iter().enumerate() {
        let l = idx + 1;
        buf[l] = Complex64::new(0.5 * val, 0.0);
        buf[m - l] = Complex64::new(0.5 * val, 0.0);
    }
    fft.process(&mut buf);
    (0..=big_n).map(|j| buf[j].re).collect()
}

/// Cosine analysis of samples at the extended nodes (`w.len() == n + 2`):
/// returns `d[l-1]`, `l = 1..=n`, of the interpolant
/// `w(y) = d_0 + sum_{l=1}^{n} d_l cos(pi l y / L) + d_{n+1} cos(pi (n+1) y / L)`.
///
/// The `l = 0` and `l = n+1` components are determined too but dropped: the
/// `d/dy` of the former vanishes and the latter maps to the invisible
/// `sin(pi (n+1) y / L)` mode that is zero at every interior node.
pub(crate) fn cosine_analysis_extended(w: &[f64]) -> Vec<f64> {
    let big_n = w.len() - 1;
    let n = big_n - 1;
    let m = 2 * big_n;
    let fft = plan(m, false);
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    buf[0] = Complex64::new(w[0], 0.0);
    buf[big_n] = Complex64::new(w[big_n], 0.0);
    for j in 1..big_n {
        buf[j] = Complex64::new(w[j], 0.0);
        buf[m - j] = Complex64::new(w[j], 0.0);
    }
    fft.process(&mut buf);
    (1..=n).map(|l| buf[l].re / big_n as f64).collect()
}

/// Inverse FFT along x for every sine mode: returns `a(i, l)` with
/// `a(i, .)` the y-spectral coefficients at the sample `x_i`.
pub(crate) fn x_inverse(grid: StripGrid, coeffs: &Array2<Complex64>) -> Array2<f64> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let fft = plan(nx, true);
    let mut semi = Array2::zeros((nx, ny));
    let mut buf = vec![Complex64::new(0.0, 0.0); nx];
    for l in 0..ny {
        for k in 0..nx {
            buf[k] = coeffs[[k, l]];
        }
        fft.process(&mut buf);
        for i in 0..nx {
            semi[[i, l]] = buf[i].re;
        }
    }
    semi
}

/// Forward FFT along x (with the `1/nx` normalization) of a semi-spectral
/// array `a(i, l)`.
pub(crate) fn x_forward(grid: StripGrid, semi: &Array2<f64>) -> Array2<Complex64> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let fft = plan(nx, false);
    let mut coeffs = Array2::zeros((nx, ny));
    let mut buf = vec![Complex64::new(0.0, 0.0); nx];
    let scale = 1.0 / nx as f64;
    for l in 0..ny {
        for i in 0..nx {
            buf[i] = Complex64::new(semi[[i, l]], 0.0);
        }
        fft.process(&mut buf);
        for k in 0..nx {
            coeffs[[k, l]] = buf[k] * scale;
        }
    }
    coeffs
}

/// Physical samples -> Fourier x sine coefficients.
pub fn forward_transform(f: &Field) -> Result<SpectralField, SpectralError> {
    if !f.is_finite() {
        return Err(SpectralError::NonFiniteInput);
    }
    let grid = f.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let y_scale = (2.0 / grid.width_l()).sqrt() * grid.dy();
    let mut semi = Array2::zeros((nx, ny));
    let mut row = vec![0.0; ny];
    for i in 0..nx {
        for j in 0..ny {
            row[j] = f.values()[[i, j]];
        }
        let s = dst1(&row);
        for (l, val) in s.iter().enumerate() {
            semi[[i, l]] = y_scale * val;
        }
    }
    Ok(SpectralField {
        grid,
        coeffs: x_forward(grid, &semi),
    })
}

/// Fourier x sine coefficients -> physical samples. Exact inverse of
/// [`forward_transform`] up to round-off.
pub fn inverse_transform(s: &SpectralField) -> Result<Field, SpectralError> {
    let scale = s.max_abs();
    let defect = s.symmetry_defect();
    let tol = SYMMETRY_TOL * scale.max(f64::MIN_POSITIVE);
    if defect > tol {
        return Err(SpectralError::SymmetryViolation { defect, tol });
    }
    Ok(inverse_transform_unchecked(s))
}

pub(crate) fn inverse_transform_unchecked(s: &SpectralField) -> Field {
    let grid = s.grid;
    let (nx, ny) = (grid.nx(), grid.ny());
    let semi = x_inverse(grid, &s.coeffs);
    let y_scale = (2.0 / grid.width_l()).sqrt();
    let mut values = Array2::zeros((nx, ny));
    let mut row = vec![0.0; ny];
    for i in 0..nx {
        for l in 0..ny {
            row[l] = semi[[i, l]];
        }
        let phys = dst1(&row);
        for (j, val) in phys.iter().enumerate() {
            values[[i, j]] = y_scale * val;
        }
    }
    Field::from_values(grid, values)
}

/// Spectral derivative `d^ox/dx^ox d^oy/dy^oy`; `oy` must be even so the
/// result stays in the sine basis. Coefficient `(k, l)` picks up
/// `(i xi_k)^ox (-lambda_l)^(oy/2)`; the unpaired Nyquist mode is zeroed for
/// odd `ox` to preserve reality.
pub fn derivative(
    s: &SpectralField,
    order_x: usize,
    order_y: usize,
) -> Result<SpectralField, SpectralError> {
    if !order_y.is_multiple_of(2) {
        return Err(SpectralError::OddYDerivative(order_y));
    }
    let grid = s.grid;
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut out = s.clone();
    for k in 0..nx {
        let xi = grid.xi(k);
        let x_factor = Complex64::new(0.0, xi).powu(order_x as u32);
        let kill_nyquist = order_x % 2 == 1 && k == grid.nyquist_index();
        for l in 0..ny {
            let y_factor = (-grid.lambda(l + 1)).powi((order_y / 2) as i32);
            out.coeffs[[k, l]] = if kill_nyquist {
                Complex64::new(0.0, 0.0)
            } else {
                s.coeffs[[k, l]] * x_factor * y_factor
            };
        }
    }
    Ok(out)
}

/// 2/3-rule truncation in both directions: zeroes coefficients with
/// `3 |k| > nx` or `3 l > 2 ny`, leaves the rest unchanged.
pub fn dealias(s: &SpectralField) -> SpectralField {
    let mut out = s.clone();
    dealias_in_place(&mut out);
    out
}

pub(crate) fn dealias_in_place(s: &mut SpectralField) {
    let grid = s.grid;
    let (nx, ny) = (grid.nx(), grid.ny());
    let nxi = nx as i64;
    for k in 0..nx {
        let signed = if (k as i64) < nxi / 2 {
            k as i64
        } else {
            k as i64 - nxi
        };
        let kill_k = 3 * signed.abs() > nxi;
        for l in 0..ny {
            if kill_k || 3 * (l + 1) > 2 * ny {
                s.coeffs[[k, l]] = Complex64::new(0.0, 0.0);
            }
        }
    }
}

/// First y-derivative at the interior nodes, evaluated through the cosine
/// series `u_y = sum_l a_l sqrt(2/L) (pi l / L) cos(pi l y / L)`.
pub fn y_derivative(s: &SpectralField) -> Field {
    let ext = y_derivative_extended(s);
    let grid = s.grid;
    let mut values = Array2::zeros((grid.nx(), grid.ny()));
    for i in 0..grid.nx() {
        for j in 0..grid.ny() {
            values[[i, j]] = ext[[i, j + 1]];
        }
    }
    Field::from_values(grid, values)
}

/// First y-derivative on the wall-extended node set `y_j = j L / (ny+1)`,
/// `j = 0..=ny+1` (shape `nx x (ny + 2)`). Wall values are generally nonzero.
pub(crate) fn y_derivative_extended(s: &SpectralField) -> Array2<f64> {
    let grid = s.grid;
    let (nx, ny) = (grid.nx(), grid.ny());
    let semi = x_inverse(grid, &s.coeffs);
    let y_scale = (2.0 / grid.width_l()).sqrt();
    let pi_over_l = std::f64::consts::PI / grid.width_l();
    let mut out = Array2::zeros((nx, ny + 2));
    let mut b = vec![0.0; ny];
    for i in 0..nx {
        for l in 0..ny {
            b[l] = semi[[i, l]] * y_scale * pi_over_l * (l + 1) as f64;
        }
        let w = cosine_eval_extended(&b);
        for (j, val) in w.iter().enumerate() {
            out[[i, j]] = val * 1.0;
        }
    }
    out
}

/// Pad interior samples with zero wall rows (valid for any sine-series
/// quantity, e.g. `u`, `u_x`, `u_yy`).
pub(crate) fn interior_to_extended(grid: StripGrid, values: &Array2<f64>) -> Array2<f64> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut out = Array2::zeros((nx, ny + 2));
    for i in 0..nx {
        for j in 0..ny {
            out[[i, j + 1]] = values[[i, j]];
        }
    }
    out
}

/// Project `d/dy` of wall-extended samples `w` (shape `nx x (ny + 2)`) back
/// onto the sine basis, returning the semi-spectral coefficients `a(i, l)`.
///
/// `w` is interpreted as the even-extension cosine interpolant through its
/// samples; its derivative is the sine series with coefficients
/// `-(pi l / L) d_l`.
pub(crate) fn y_derivative_of_extended_to_semi(grid: StripGrid, w: &Array2<f64>) -> Array2<f64> {
    let (nx, ny) = (grid.nx(), grid.ny());
    assert_eq!(w.dim(), (nx, ny + 2));
    let pi_over_l = std::f64::consts::PI / grid.width_l();
    let to_psi = (grid.width_l() / 2.0).sqrt();
    let mut semi = Array2::zeros((nx, ny));
    let mut row = vec![0.0; ny + 2];
    for i in 0..nx {
        for j in 0..ny + 2 {
            row[j] = w[[i, j]];
        }
        let d = cosine_analysis_extended(&row);
        for (idx, &dl) in d.iter().enumerate() {
            let l = (idx + 1) as f64;
            semi[[i, idx]] = -pi_over_l * l * dl * to_psi;
        }
    }
    semi
}
