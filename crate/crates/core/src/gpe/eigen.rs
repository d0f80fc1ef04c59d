//! Eigenstate preparation by imaginary-time relaxation.

use std::sync::Arc;

use num_complex::Complex64;

use super::{GpeParams, Potential, SpatialGrid, WaveFunction};
use crate::{Error, Result};

/// Settings for the imaginary-time relaxation.
///
/// The relaxation runs in stages with step sizes `dτ·10^{s}` for
/// `s = stages-1, ..., 0`, each stage starting from the previous result, so
/// the coarse stages do the bulk of the relaxation and the final (fine) stage
/// only removes the splitting bias.
#[derive(Debug, Clone, Copy)]
pub struct ImagTimeConfig {
    /// Final step size; `None` uses `0.1 / E_max` of the grid.
    pub dtau: Option<f64>,
    pub stages: usize,
    /// Energy change between checks that counts as converged.
    pub energy_tol: f64,
    /// L2 change of the state between checks that counts as converged.
    pub state_tol: f64,
    /// Imaginary time between two convergence checks.
    pub check_interval: f64,
    pub max_steps: usize,
}

impl Default for ImagTimeConfig {
    fn default() -> Self {
        Self {
            dtau: None,
            stages: 3,
            energy_tol: 1e-10,
            state_tol: 1e-9,
            check_interval: 0.05,
            max_steps: 4_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Eigenstate {
    pub psi: WaveFunction,
    pub energy: f64,
    pub steps: usize,
    /// Energy at every convergence check, starting with the initial guess.
    pub energies: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Parity {
    Even,
    Odd,
}

/// `⟨ψ| -∂²/2m + V + (β/2)|ψ|² |ψ⟩` with a spectral kinetic term.
pub fn gpe_energy(psi: &WaveFunction, potential_column: &[f64], params: &GpeParams) -> Result<f64> {
    let grid = psi.grid();
    if potential_column.len() != grid.n_points() {
        return Err(Error::invalid("potential column length does not match grid"));
    }
    let mut scratch = vec![Complex64::default(); grid.scratch_len()];
    Ok(energy_raw(grid, psi.amplitudes(), potential_column, params, &mut scratch))
}

fn energy_raw(
    grid: &SpatialGrid,
    amp: &[Complex64],
    v: &[f64],
    params: &GpeParams,
    scratch: &mut [Complex64],
) -> f64 {
    let dx = grid.dx();
    let n = grid.n_points() as f64;
    let mut buf = amp.to_vec();
    grid.forward(&mut buf, scratch);
    // Parseval: Σ|ψ_j|² dx = (dx/n) Σ|ψ̂_k|²
    let kinetic: f64 = buf
        .iter()
        .zip(grid.k())
        .map(|(c, &k)| c.norm_sqr() * k * k)
        .sum::<f64>()
        * dx
        / (n * 2.0 * params.mass);
    let (pot, inter) = amp.iter().zip(v).fold((0.0, 0.0), |(p, i), (a, &vj)| {
        let d = a.norm_sqr();
        (p + vj * d, i + d * d)
    });
    kinetic + pot * dx + 0.5 * params.beta * inter * dx
}

fn project(amp: &mut [Complex64], grid: &SpatialGrid, parity: Parity) {
    let n = amp.len();
    let sign = match parity {
        Parity::Even => 1.0,
        Parity::Odd => -1.0,
    };
    for j in 0..n {
        let m = grid.mirror_index(j);
        if m < j {
            continue;
        }
        if m == j {
            if parity == Parity::Odd {
                amp[j] = Complex64::default();
            }
            continue;
        }
        let s = 0.5 * (amp[j] + sign * amp[m]);
        amp[j] = s;
        amp[m] = sign * s;
    }
}

fn normalize_raw(amp: &mut [Complex64], dx: f64) -> f64 {
    let norm = (amp.iter().map(|a| a.norm_sqr()).sum::<f64>() * dx).sqrt();
    if norm > 0.0 && norm.is_finite() {
        amp.iter_mut().for_each(|a| *a /= norm);
    }
    norm
}

/// Rotates the global phase so the largest-magnitude amplitude is real and
/// positive, then drops rounding-level imaginary parts.
fn fix_phase(amp: &mut [Complex64]) {
    let Some(peak) = amp
        .iter()
        .copied()
        .max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()))
    else {
        return;
    };
    if peak.norm() == 0.0 {
        return;
    }
    let rot = peak.conj() / peak.norm();
    amp.iter_mut().for_each(|a| *a *= rot);
}

fn is_symmetric_column(v: &[f64], grid: &SpatialGrid) -> bool {
    if !grid.is_symmetric() {
        return false;
    }
    let scale = v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    (0..v.len()).all(|j| (v[j] - v[grid.mirror_index(j)]).abs() <= 1e-9 * scale)
}

fn relax(
    grid: &Arc<SpatialGrid>,
    v: &[f64],
    params: &GpeParams,
    parity: Option<Parity>,
    cfg: &ImagTimeConfig,
) -> Result<Eigenstate> {
    params.validate()?;
    let n = grid.n_points();
    let dx = grid.dx();
    let mut scratch = vec![Complex64::default(); grid.scratch_len()];

    // Initial guess centred on the potential minimum (or the origin when a
    // parity is imposed), a quarter of the domain wide.
    let width = grid.length() / 16.0;
    let centre = match parity {
        Some(_) => 0.0,
        None => {
            let jmin = (0..n).min_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap_or(0);
            grid.x()[jmin]
        }
    };
    let mut amp: Vec<Complex64> = grid
        .x()
        .iter()
        .map(|&x| {
            let g = (-(x - centre).powi(2) / (2.0 * width * width)).exp();
            let s = if parity == Some(Parity::Odd) { x } else { 1.0 };
            Complex64::new(s * g, 0.0)
        })
        .collect();
    if let Some(p) = parity {
        project(&mut amp, grid, p);
    }
    normalize_raw(&mut amp, dx);

    let dtau_final = cfg.dtau.unwrap_or(0.1 / grid.kinetic_max(params.mass));
    let mut energy = energy_raw(grid, &amp, v, params, &mut scratch);
    let mut total_steps = 0usize;
    let mut energies = vec![energy];

    for stage in (0..cfg.stages.max(1)).rev() {
        let dtau = dtau_final * 10f64.powi(stage as i32);
        let final_stage = stage == 0;
        let (e_tol, s_tol) = if final_stage {
            (cfg.energy_tol, cfg.state_tol)
        } else {
            (cfg.energy_tol.max(1e-8), cfg.state_tol.max(1e-6))
        };
        let inv_n = 1.0 / n as f64;
        let kinetic: Vec<f64> = grid
            .k()
            .iter()
            .map(|&k| (-k * k * dtau / (2.0 * params.mass)).exp() * inv_n)
            .collect();
        let half = 0.5 * dtau;
        let check_every = ((cfg.check_interval / dtau).ceil() as usize).max(1);
        let mut prev = amp.clone();
        loop {
            for _ in 0..check_every {
                for (a, &vj) in amp.iter_mut().zip(v) {
                    *a *= (-(vj + params.beta * a.norm_sqr()) * half).exp();
                }
                grid.forward(&mut amp, &mut scratch);
                amp.iter_mut().zip(&kinetic).for_each(|(a, k)| *a *= k);
                grid.inverse(&mut amp, &mut scratch);
                for (a, &vj) in amp.iter_mut().zip(v) {
                    *a *= (-(vj + params.beta * a.norm_sqr()) * half).exp();
                }
                if let Some(p) = parity {
                    project(&mut amp, grid, p);
                }
                let norm = normalize_raw(&mut amp, dx);
                if !(norm.is_finite() && norm > 0.0) {
                    return Err(Error::NumericalBlowup {
                        step: total_steps,
                        coeffs: None,
                    });
                }
                total_steps += 1;
            }
            let e = energy_raw(grid, &amp, v, params, &mut scratch);
            let last_delta = (e - energy).abs();
            energy = e;
            energies.push(e);
            let change = (amp
                .iter()
                .zip(&prev)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                * dx)
                .sqrt();
            prev.copy_from_slice(&amp);
            if last_delta < e_tol && change < s_tol {
                break;
            }
            if total_steps >= cfg.max_steps {
                return Err(Error::Convergence {
                    iterations: total_steps,
                    last_delta,
                });
            }
        }
    }
    fix_phase(&mut amp);
    Ok(Eigenstate {
        psi: WaveFunction::new(grid.clone(), amp)?,
        energy,
        steps: total_steps,
        energies,
    })
}

/// Lowest-energy stationary state of `V(·, u_fixed)`.
pub fn ground_state(
    potential: &dyn Potential,
    u_fixed: f64,
    grid: &Arc<SpatialGrid>,
    params: &GpeParams,
) -> Result<WaveFunction> {
    ground_state_with(potential, u_fixed, grid, params, &ImagTimeConfig::default()).map(|e| e.psi)
}

pub fn ground_state_with(
    potential: &dyn Potential,
    u_fixed: f64,
    grid: &Arc<SpatialGrid>,
    params: &GpeParams,
    cfg: &ImagTimeConfig,
) -> Result<Eigenstate> {
    let v = potential.column(grid, u_fixed);
    // Symmetric potentials keep the exact parity of the ground state.
    let parity = is_symmetric_column(&v, grid).then_some(Parity::Even);
    relax(grid, &v, params, parity, cfg)
}

/// Lowest odd-parity state of a symmetric `V(·, u_fixed)`.
pub fn excited_state(
    potential: &dyn Potential,
    u_fixed: f64,
    grid: &Arc<SpatialGrid>,
    params: &GpeParams,
) -> Result<WaveFunction> {
    excited_state_with(potential, u_fixed, grid, params, &ImagTimeConfig::default()).map(|e| e.psi)
}

pub fn excited_state_with(
    potential: &dyn Potential,
    u_fixed: f64,
    grid: &Arc<SpatialGrid>,
    params: &GpeParams,
    cfg: &ImagTimeConfig,
) -> Result<Eigenstate> {
    let v = potential.column(grid, u_fixed);
    if !is_symmetric_column(&v, grid) {
        return Err(Error::Unsupported(format!(
            "excited state by parity projection needs a symmetric potential (u = {u_fixed})"
        )));
    }
    relax(grid, &v, params, Some(Parity::Odd), cfg)
}
