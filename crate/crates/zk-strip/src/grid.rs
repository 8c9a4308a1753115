//! Discretization of the strip and real-space sample fields.

use ndarray::Array2;
use thiserror::Error;

/// Errors produced when constructing a [`StripGrid`].
#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("nx must be even and at least 4, got {0}")]
    BadNx(usize),
    #[error("ny must be at least 1, got {0}")]
    BadNy(usize),
    #[error("strip width must be positive, got {0}")]
    BadWidth(f64),
    #[error("x_max ({x_max}) must exceed x_min ({x_min})")]
    BadBox { x_min: f64, x_max: f64 },
}

/// Uniform discretization of the strip `[x_min, x_max) x (0, L)`.
///
/// `x` is periodic with `nx` samples; `y` carries `ny` sine modes with
/// interior nodes `y_j = j L / (ny + 1)`, `j = 1..=ny`. The walls `y = 0`
/// and `y = L` are never stored: every represented field vanishes there by
/// construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StripGrid {
    x_min: f64,
    x_max: f64,
    nx: usize,
    width_l: f64,
    ny: usize,
}

impl StripGrid {
    pub fn new(
        x_min: f64,
        x_max: f64,
        nx: usize,
        width_l: f64,
        ny: usize,
    ) -> Result<Self, GridError> {
        if nx < 4 || !nx.is_multiple_of(2) {
            return Err(GridError::BadNx(nx));
        }
        if ny < 1 {
            return Err(GridError::BadNy(ny));
        }
        if !(width_l > 0.0) || !width_l.is_finite() {
            return Err(GridError::BadWidth(width_l));
        }
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(GridError::BadBox { x_min, x_max });
        }
        Ok(Self {
            x_min,
            x_max,
            nx,
            width_l,
            ny,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    /// Period of the x box.
    pub fn x_period(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    /// Strip width `L`.
    pub fn width_l(&self) -> f64 {
        self.width_l
    }

    /// Number of sine modes (and interior y nodes).
    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn dx(&self) -> f64 {
        self.x_period() / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.width_l / (self.ny + 1) as f64
    }

    /// Quadrature cell area `dx * dy`.
    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    /// Sample abscissa `x_i = x_min + i dx`, `i = 0..nx`.
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    /// Interior node `y_j = (j + 1) L / (ny + 1)` for the storage index
    /// `j = 0..ny`.
    pub fn y(&self, j: usize) -> f64 {
        (j + 1) as f64 * self.dy()
    }

    /// Signed Fourier wavenumber for the FFT-ordered index `k = 0..nx`:
    /// frequencies run over `{-nx/2, ..., nx/2 - 1}`.
    pub fn xi(&self, k: usize) -> f64 {
        let n = self.nx as i64;
        let k = k as i64;
        let signed = if k < n / 2 { k } else { k - n };
        2.0 * std::f64::consts::PI * signed as f64 / self.x_period()
    }

    /// FFT index of the unpaired Nyquist mode `-nx/2`.
    pub fn nyquist_index(&self) -> usize {
        self.nx / 2
    }

    /// Transverse eigenvalue `lambda_l = (pi l / L)^2` for mode `l >= 1`.
    pub fn lambda(&self, l: usize) -> f64 {
        let v = std::f64::consts::PI * l as f64 / self.width_l;
        v * v
    }
}

/// Real-space samples `u(x_i, y_j)` on a [`StripGrid`], interior nodes only.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: StripGrid,
    values: Array2<f64>,
}

impl Field {
    pub fn zeros(grid: StripGrid) -> Self {
        Self {
            grid,
            values: Array2::zeros((grid.nx(), grid.ny())),
        }
    }

    /// Sample `f(x, y)` at every interior node.
    pub fn from_fn(grid: StripGrid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Array2::zeros((grid.nx(), grid.ny()));
        for i in 0..grid.nx() {
            let x = grid.x(i);
            for j in 0..grid.ny() {
                values[[i, j]] = f(x, grid.y(j));
            }
        }
        Self { grid, values }
    }

    pub fn from_values(grid: StripGrid, values: Array2<f64>) -> Self {
        assert_eq!(
            values.dim(),
            (grid.nx(), grid.ny()),
            "field shape must match grid"
        );
        Self { grid, values }
    }

    pub fn grid(&self) -> StripGrid {
        self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<f64> {
        &mut self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Pointwise product with another field on the same grid.
    pub fn pointwise_mul(&self, other: &Field) -> Field {
        assert_eq!(self.grid, other.grid, "grids must match");
        Field {
            grid: self.grid,
            values: &self.values * &other.values,
        }
    }

    pub fn scaled(&self, factor: f64) -> Field {
        Field {
            grid: self.grid,
            values: &self.values * factor,
        }
    }

    pub fn add(&self, other: &Field) -> Field {
        assert_eq!(self.grid, other.grid, "grids must match");
        Field {
            grid: self.grid,
            values: &self.values + &other.values,
        }
    }

    pub fn sub(&self, other: &Field) -> Field {
        assert_eq!(self.grid, other.grid, "grids must match");
        Field {
            grid: self.grid,
            values: &self.values - &other.values,
        }
    }

    /// Maximum absolute difference to another field.
    pub fn linf_distance(&self, other: &Field) -> f64 {
        assert_eq!(self.grid, other.grid, "grids must match");
        self.values
            .iter()
            .zip(other.values.iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}
