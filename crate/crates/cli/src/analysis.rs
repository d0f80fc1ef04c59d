//! Structure checks on optimized controls.

use glocal::gpe::gpe_energy;
use glocal::problems::ProblemDefinition;
use num_complex::Complex64;
use rustfft::FftPlanner;

/// Frequency (in cycles per unit of `dt`) of the largest non-DC peak of
/// `signal`'s spectrum, after removing the mean. Zero-padded to at least
/// eight times the signal length for a finer frequency grid.
pub fn dominant_frequency(signal: &[f64], dt: f64) -> f64 {
    let n = (signal.len() * 8).next_power_of_two();
    let mean = signal.iter().sum::<f64>() / signal.len() as f64;
    let mut buf: Vec<Complex64> = signal.iter().map(|&s| Complex64::new(s - mean, 0.0)).collect();
    buf.resize(n, Complex64::default());
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let k = (1..n / 2)
        .max_by(|&a, &b| buf[a].norm_sqr().total_cmp(&buf[b].norm_sqr()))
        .unwrap_or(0);
    k as f64 / (n as f64 * dt)
}

/// `(E₁ − E₀)/2π` of the boundary states in the trap at `u_start`, in
/// cycles per internal time unit.
pub fn transition_frequency(problem: &ProblemDefinition) -> anyhow::Result<f64> {
    let v = problem.potential_column(problem.u_start);
    let e0 = gpe_energy(&problem.psi_initial, &v, &problem.params)?;
    let e1 = gpe_energy(&problem.psi_target, &v, &problem.params)?;
    Ok((e1 - e0) / std::f64::consts::TAU)
}

/// Mean of `u` over the first `fraction` of the samples.
pub fn early_mean(u: &[f64], fraction: f64) -> f64 {
    let k = ((u.len() as f64 * fraction).round() as usize).clamp(1, u.len());
    u[..k].iter().sum::<f64>() / k as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_a_pure_tone() {
        let dt = 0.01;
        let s: Vec<f64> = (0..1000).map(|j| 0.3 + (2.0 * std::f64::consts::PI * 1.7 * j as f64 * dt).sin()).collect();
        assert!((dominant_frequency(&s, dt) - 1.7).abs() < 0.02);
    }

    #[test]
    fn early_mean_window() {
        let u = [1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(early_mean(&u, 0.2), 1.0);
        assert_eq!(early_mean(&u, 0.4), 0.5);
    }
}
