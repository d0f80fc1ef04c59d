use std::sync::Arc;

use num_complex::Complex64;

use super::SpatialGrid;
use crate::{Error, Result};

/// Complex amplitudes sampled on a [`SpatialGrid`].
#[derive(Debug, Clone)]
pub struct WaveFunction {
    amp: Vec<Complex64>,
    grid: Arc<SpatialGrid>,
}

impl WaveFunction {
    pub fn new(grid: Arc<SpatialGrid>, amp: Vec<Complex64>) -> Result<Self> {
        if amp.len() != grid.n_points() {
            return Err(Error::invalid(format!(
                "amplitude length {} does not match grid size {}",
                amp.len(),
                grid.n_points()
            )));
        }
        Ok(Self { amp, grid })
    }

    pub fn from_fn(grid: Arc<SpatialGrid>, f: impl Fn(f64) -> Complex64) -> Self {
        let amp = grid.x().iter().map(|&x| f(x)).collect();
        Self { amp, grid }
    }

    pub fn grid(&self) -> &Arc<SpatialGrid> {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amp
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amp
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amp
    }

    /// `Σ|ψ_j|² dx`.
    pub fn norm_sqr(&self) -> f64 {
        self.amp.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_sqr();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::invalid(format!("cannot normalize state with norm {n}")));
        }
        let s = 1.0 / n.sqrt();
        self.amp.iter_mut().for_each(|a| *a *= s);
        Ok(())
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    pub fn density(&self) -> Vec<f64> {
        self.amp.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `⟨x̂⟩` for a normalized state.
    pub fn mean_position(&self) -> f64 {
        self.amp
            .iter()
            .zip(self.grid.x())
            .map(|(a, &x)| a.norm_sqr() * x)
            .sum::<f64>()
            * self.grid.dx()
    }

    /// Multiplies by a global phase factor `e^{iθ}`.
    pub fn with_phase(mut self, theta: f64) -> Self {
        let p = Complex64::from_polar(1.0, theta);
        self.amp.iter_mut().for_each(|a| *a *= p);
        self
    }

    /// Largest `|ψ|` over the first and last grid points.
    pub fn boundary_magnitude(&self) -> f64 {
        let n = self.amp.len();
        self.amp[0].norm().max(self.amp[n - 1].norm())
    }
}

fn check_grids(a: &WaveFunction, b: &WaveFunction) -> Result<()> {
    if Arc::ptr_eq(&a.grid, &b.grid) || a.grid.same_as(&b.grid) {
        Ok(())
    } else {
        Err(Error::invalid("wave functions live on different grids"))
    }
}

/// `⟨a|b⟩ = Σ conj(a_j)·b_j·dx`.
pub fn inner_product(a: &WaveFunction, b: &WaveFunction) -> Result<Complex64> {
    check_grids(a, b)?;
    Ok(raw_inner(&a.amp, &b.amp) * a.grid.dx())
}

pub(crate) fn raw_inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `|⟨a|b⟩|²`, clamped to `[0, 1]`.
pub fn fidelity(a: &WaveFunction, b: &WaveFunction) -> Result<f64> {
    Ok(inner_product(a, b)?.norm_sqr().clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid() -> Arc<SpatialGrid> {
        Arc::new(SpatialGrid::symmetric(12.0, 512).unwrap())
    }

    fn gaussian(g: &Arc<SpatialGrid>, center: f64) -> WaveFunction {
        // unit-width: |g|² ∝ exp(-(x-c)²)
        WaveFunction::from_fn(g.clone(), |x| {
            Complex64::new((-(x - center).powi(2) / 2.0).exp() / PI.powf(0.25), 0.0)
        })
    }

    #[test]
    fn normalized_self_overlap_is_one() {
        let psi = gaussian(&grid(), 0.3).normalized().unwrap();
        let ip = inner_product(&psi, &psi).unwrap();
        assert!((ip.re - 1.0).abs() < 1e-12 && ip.im.abs() < 1e-15);
        assert!((fidelity(&psi, &psi).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn opposite_parity_states_are_orthogonal() {
        let g = grid();
        let even = gaussian(&g, 0.0).normalized().unwrap();
        let odd = WaveFunction::from_fn(g, |x| Complex64::new(x * (-x * x / 2.0).exp(), 0.0))
            .normalized()
            .unwrap();
        assert!(inner_product(&even, &odd).unwrap().norm() < 1e-14);
    }

    #[test]
    fn displaced_gaussian_overlap_matches_closed_form() {
        // ∫ π^{-1/2} e^{-x²/2} e^{-(x-d)²/2} dx = e^{-d²/4}
        let g = grid();
        for d in [0.0, 0.5, 1.3, 2.7] {
            let a = gaussian(&g, 0.0);
            let b = gaussian(&g, d);
            let ip = inner_product(&a, &b).unwrap();
            assert!((ip.re - (-d * d / 4.0).exp()).abs() < 1e-12, "d = {d}");
            assert!(ip.im.abs() < 1e-15);
        }
    }

    #[test]
    fn fidelity_ignores_global_phase() {
        let psi = gaussian(&grid(), -1.0).normalized().unwrap();
        for theta in [0.1, 1.0, 2.5, -3.0] {
            let f = fidelity(&psi, &psi.clone().with_phase(theta)).unwrap();
            assert!((f - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let a = gaussian(&grid(), 0.0);
        let other = Arc::new(SpatialGrid::symmetric(10.0, 512).unwrap());
        let b = gaussian(&other, 0.0);
        assert!(matches!(inner_product(&a, &b), Err(Error::InvalidArgument(_))));
        assert!(fidelity(&a, &b).is_err());
    }
}
