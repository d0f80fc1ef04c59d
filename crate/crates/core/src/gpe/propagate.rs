use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Potential, SpatialGrid, WaveFunction};
use crate::{Error, Result};

/// Physical parameters of the propagation in internal units (`ħ = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpeParams {
    pub mass: f64,
    /// Nonlinear self-interaction strength.
    pub beta: f64,
    /// Real-time step.
    pub dt: f64,
}

impl GpeParams {
    pub fn new(mass: f64, beta: f64, dt: f64) -> Result<Self> {
        let p = Self { mass, beta, dt };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::invalid(format!("mass must be positive, got {}", self.mass)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !self.beta.is_finite() {
            return Err(Error::invalid("beta must be finite"));
        }
        Ok(())
    }
}

/// Strang split-step operator for one fixed `dt`. Owns its FFT scratch, so
/// each worker builds its own.
pub(crate) struct SplitStep<'g> {
    grid: &'g SpatialGrid,
    /// `exp(-i k² dt / 2m) / n`; the `1/n` undoes the unnormalized FFT pair.
    kinetic: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl<'g> SplitStep<'g> {
    pub(crate) fn new(grid: &'g SpatialGrid, mass: f64, dt: f64) -> Self {
        let inv_n = 1.0 / grid.n_points() as f64;
        let kinetic = grid
            .k()
            .iter()
            .map(|&k| Complex64::from_polar(inv_n, -k * k * dt / (2.0 * mass)))
            .collect();
        Self {
            grid,
            kinetic,
            scratch: vec![Complex64::default(); grid.scratch_len()],
        }
    }

    /// `ψ ← exp(-i (V + β|ψ|²) τ) ψ` pointwise; exact for the potential and
    /// nonlinear parts since the density is invariant under the phase.
    pub(crate) fn potential_phase(amp: &mut [Complex64], v: &[f64], beta: f64, tau: f64) {
        for (a, &vj) in amp.iter_mut().zip(v) {
            let theta = (vj + beta * a.norm_sqr()) * tau;
            let (s, c) = theta.sin_cos();
            *a *= Complex64::new(c, -s);
        }
    }

    pub(crate) fn kinetic(&mut self, amp: &mut [Complex64]) {
        self.grid.forward(amp, &mut self.scratch);
        amp.iter_mut().zip(&self.kinetic).for_each(|(a, k)| *a *= k);
        self.grid.inverse(amp, &mut self.scratch);
    }

    /// Hermitian adjoint (= inverse) of [`Self::kinetic`].
    pub(crate) fn kinetic_adjoint(&mut self, amp: &mut [Complex64]) {
        self.grid.forward(amp, &mut self.scratch);
        amp.iter_mut()
            .zip(&self.kinetic)
            .for_each(|(a, k)| *a *= k.conj());
        self.grid.inverse(amp, &mut self.scratch);
    }

    /// One Strang step with the potential `v_first` in the leading half-step
    /// and `v_second` in the trailing one.
    pub(crate) fn step(
        &mut self,
        amp: &mut [Complex64],
        v_first: &[f64],
        v_second: &[f64],
        beta: f64,
        dt: f64,
    ) {
        Self::potential_phase(amp, v_first, beta, 0.5 * dt);
        self.kinetic(amp);
        Self::potential_phase(amp, v_second, beta, 0.5 * dt);
    }
}

pub(crate) fn check_finite(amp: &[Complex64], step: usize) -> Result<()> {
    let s: f64 = amp.iter().map(|a| a.norm_sqr()).sum();
    if s.is_finite() {
        Ok(())
    } else {
        Err(Error::NumericalBlowup { step, coeffs: None })
    }
}

/// Advances `psi` by one real-time step under a fixed potential column.
pub fn step_real_time(
    psi: &WaveFunction,
    potential_column: &[f64],
    params: &GpeParams,
) -> Result<WaveFunction> {
    let grid = psi.grid().clone();
    if potential_column.len() != grid.n_points() {
        return Err(Error::invalid("potential column length does not match grid"));
    }
    let mut stepper = SplitStep::new(&grid, params.mass, params.dt);
    let mut amp = psi.amplitudes().to_vec();
    stepper.step(&mut amp, potential_column, potential_column, params.beta, params.dt);
    check_finite(&amp, 0)?;
    WaveFunction::new(grid, amp)
}

/// Result of a forward propagation.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// `ψ(t_j)` for every sample `j = 0..=N` when storage was requested.
    states: Vec<Vec<Complex64>>,
    final_state: WaveFunction,
    controls: Vec<f64>,
    dt: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &WaveFunction {
        &self.final_state
    }

    pub fn controls(&self) -> &[f64] {
        &self.controls
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.controls.len().saturating_sub(1)
    }

    pub fn is_stored(&self) -> bool {
        !self.states.is_empty()
    }

    pub fn stored_amplitudes(&self) -> &[Vec<Complex64>] {
        &self.states
    }

    pub fn state(&self, j: usize) -> Option<WaveFunction> {
        self.states
            .get(j)
            .map(|a| WaveFunction::new(self.final_state.grid().clone(), a.clone()).unwrap())
    }

    /// `⟨x̂(t_j)⟩` along a stored trajectory.
    pub fn mean_positions(&self) -> Vec<f64> {
        let grid = self.final_state.grid();
        self.states
            .iter()
            .map(|a| {
                a.iter()
                    .zip(grid.x())
                    .map(|(c, &x)| c.norm_sqr() * x)
                    .sum::<f64>()
                    * grid.dx()
            })
            .collect()
    }
}

/// Propagates `psi0` along `controls` (one value per time sample, spacing
/// `params.dt`), rebuilding `V(x, u_j)` for every half-step.
pub fn propagate(
    psi0: &WaveFunction,
    controls: &[f64],
    potential: &dyn Potential,
    params: &GpeParams,
    store: bool,
) -> Result<Trajectory> {
    params.validate()?;
    let grid: Arc<SpatialGrid> = psi0.grid().clone();
    let n = grid.n_points();
    let steps = controls.len().saturating_sub(1);
    let mut amp = psi0.amplitudes().to_vec();
    let mut states = Vec::new();
    if store {
        states.reserve(steps + 1);
        states.push(amp.clone());
    }
    if steps > 0 {
        let mut stepper = SplitStep::new(&grid, params.mass, params.dt);
        let mut v_a = vec![0.0; n];
        let mut v_b = vec![0.0; n];
        potential.fill_column(&grid, controls[0], &mut v_a);
        for j in 0..steps {
            potential.fill_column(&grid, controls[j + 1], &mut v_b);
            stepper.step(&mut amp, &v_a, &v_b, params.beta, params.dt);
            check_finite(&amp, j + 1)?;
            if store {
                states.push(amp.clone());
            }
            std::mem::swap(&mut v_a, &mut v_b);
        }
    }
    Ok(Trajectory {
        states,
        final_state: WaveFunction::new(grid, amp)?,
        controls: controls.to_vec(),
        dt: params.dt,
    })
}
