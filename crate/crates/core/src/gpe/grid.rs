use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::{Error, Result};

/// Uniform periodic grid `x_j = x_min + j·dx`, `j = 0..n`, with the matching
/// FFT wavenumbers in standard (unshifted) order.
#[derive(Clone)]
pub struct SpatialGrid {
    x_min: f64,
    x_max: f64,
    dx: f64,
    x: Vec<f64>,
    k: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl SpatialGrid {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(Error::invalid(format!(
                "grid bounds must satisfy x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        if n_points < 2 || !n_points.is_power_of_two() {
            return Err(Error::invalid(format!(
                "n_points must be a power of two >= 2, got {n_points}"
            )));
        }
        let n = n_points;
        let length = x_max - x_min;
        let dx = length / n as f64;
        let x = (0..n).map(|j| x_min + j as f64 * dx).collect();
        let dk = 2.0 * PI / length;
        let k = (0..n)
            .map(|j| {
                let m = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
                m * dk
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let ifft = planner.plan_fft_inverse(n);
        Ok(Self {
            x_min,
            x_max,
            dx,
            x,
            k,
            fft,
            ifft,
        })
    }

    /// Grid on `[-half_width, half_width)`, symmetric under `x -> -x` with
    /// periodic identification of the end points.
    pub fn symmetric(half_width: f64, n_points: usize) -> Result<Self> {
        Self::new(-half_width, half_width, n_points)
    }

    pub fn n_points(&self) -> usize {
        self.x.len()
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn k(&self) -> &[f64] {
        &self.k
    }

    /// Largest kinetic energy `k_max²/2m` representable on the grid.
    pub fn kinetic_max(&self, mass: f64) -> f64 {
        let k_max = PI / self.dx;
        k_max * k_max / (2.0 * mass)
    }

    pub fn is_symmetric(&self) -> bool {
        (self.x_min + self.x_max).abs() <= 1e-12 * self.length()
    }

    /// Index of the point at `-x_j` on a symmetric grid.
    pub fn mirror_index(&self, j: usize) -> usize {
        let n = self.n_points();
        (n - j) % n
    }

    pub fn same_as(&self, other: &SpatialGrid) -> bool {
        self.n_points() == other.n_points()
            && self.x_min == other.x_min
            && self.x_max == other.x_max
    }

    pub(crate) fn scratch_len(&self) -> usize {
        self.fft
            .get_inplace_scratch_len()
            .max(self.ifft.get_inplace_scratch_len())
    }

    /// Unnormalized forward transform in place.
    pub(crate) fn forward(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.fft.process_with_scratch(buf, scratch);
    }

    /// Unnormalized inverse transform in place (a round trip scales by `n`).
    pub(crate) fn inverse(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.ifft.process_with_scratch(buf, scratch);
    }
}

impl fmt::Debug for SpatialGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpatialGrid")
            .field("x_min", &self.x_min)
            .field("x_max", &self.x_max)
            .field("n_points", &self.n_points())
            .field("dx", &self.dx)
            .finish()
    }
}
