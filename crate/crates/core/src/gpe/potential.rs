use std::fmt::Debug;

use super::SpatialGrid;

/// A control-dependent external potential `V(x, u)` with its analytic
/// derivative `∂V/∂u`, both in internal energy units.
pub trait Potential: Send + Sync + Debug {
    fn value(&self, x: f64, u: f64) -> f64;

    fn du(&self, x: f64, u: f64) -> f64;

    fn fill_column(&self, grid: &SpatialGrid, u: f64, out: &mut [f64]) {
        for (o, &x) in out.iter_mut().zip(grid.x()) {
            *o = self.value(x, u);
        }
    }

    fn column(&self, grid: &SpatialGrid, u: f64) -> Vec<f64> {
        let mut v = vec![0.0; grid.n_points()];
        self.fill_column(grid, u, &mut v);
        v
    }

    fn fill_du_column(&self, grid: &SpatialGrid, u: f64, out: &mut [f64]) {
        for (o, &x) in out.iter_mut().zip(grid.x()) {
            *o = self.du(x, u);
        }
    }
}

/// Displaced harmonic trap `½·m·ω²·(x − u)²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Harmonic {
    pub mass: f64,
    pub omega: f64,
}

impl Harmonic {
    pub fn new(mass: f64, omega: f64) -> Self {
        Self { mass, omega }
    }

    fn stiffness(&self) -> f64 {
        self.mass * self.omega * self.omega
    }
}

impl Potential for Harmonic {
    fn value(&self, x: f64, u: f64) -> f64 {
        0.5 * self.stiffness() * (x - u) * (x - u)
    }

    fn du(&self, x: f64, u: f64) -> f64 {
        -self.stiffness() * (x - u)
    }
}

/// Control-independent potential sampled from a closure; `∂V/∂u = 0`.
pub struct Static<F>(pub F);

impl<F> Debug for Static<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Static")
    }
}

impl<F: Fn(f64) -> f64 + Send + Sync> Potential for Static<F> {
    fn value(&self, x: f64, _u: f64) -> f64 {
        (self.0)(x)
    }

    fn du(&self, _x: f64, _u: f64) -> f64 {
        0.0
    }
}
