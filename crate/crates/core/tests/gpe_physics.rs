//! Physics checks of the split-step propagator and the eigenstate solver
//! against closed-form results.

use std::f64::consts::PI;
use std::sync::Arc;

use glocal::gpe::*;
use num_complex::Complex64;

fn gaussian(grid: &Arc<SpatialGrid>, centre: f64, sigma: f64) -> WaveFunction {
    WaveFunction::from_fn(grid.clone(), |x| {
        Complex64::new((-(x - centre).powi(2) / (4.0 * sigma * sigma)).exp(), 0.0)
    })
    .normalized()
    .unwrap()
}

fn position_std(psi: &WaveFunction) -> f64 {
    let dx = psi.grid().dx();
    let mean = psi.mean_position();
    let var: f64 = psi
        .density()
        .iter()
        .zip(psi.grid().x())
        .map(|(d, &x)| d * (x - mean).powi(2))
        .sum::<f64>()
        * dx;
    var.sqrt()
}

#[test]
fn free_gaussian_spreads_like_the_analytic_law() {
    let grid = Arc::new(SpatialGrid::symmetric(60.0, 2048).unwrap());
    let (sigma0, mass) = (1.0, 1.0);
    // σ(t) = σ₀·sqrt(1 + (t/2mσ₀²)²) doubles at t = 2√3·mσ₀²
    let t_double = 2.0 * 3f64.sqrt() * mass * sigma0 * sigma0;
    let n_steps = 400;
    let params = GpeParams::new(mass, 0.0, t_double / n_steps as f64).unwrap();
    let free = Static(|_x: f64| 0.0);
    let psi0 = gaussian(&grid, 0.0, sigma0);
    let traj = propagate(&psi0, &vec![0.0; n_steps + 1], &free, &params, false).unwrap();
    let got = position_std(traj.final_state());
    assert!((got / (2.0 * sigma0) - 1.0).abs() < 1e-5, "width {got}");
}

#[test]
fn norm_drift_is_negligible_over_ten_thousand_steps() {
    let grid = Arc::new(SpatialGrid::symmetric(12.0, 256).unwrap());
    let trap = Harmonic::new(1.0, 1.0);
    let params = GpeParams::new(1.0, 5.0, 0.01).unwrap();
    let psi0 = gaussian(&grid, 1.0, 0.8);
    let controls: Vec<f64> = (0..=10_000).map(|j| 0.5 * (j as f64 * 1e-3).sin()).collect();
    let traj = propagate(&psi0, &controls, &trap, &params, false).unwrap();
    assert!((traj.final_state().norm_sqr() - 1.0).abs() < 1e-9);
}

#[test]
fn harmonic_ground_state_matches_closed_form() {
    let grid = Arc::new(SpatialGrid::symmetric(10.0, 256).unwrap());
    let params = GpeParams::new(1.0, 0.0, 0.01).unwrap();
    let trap = Harmonic::new(1.0, 1.0);
    let g = ground_state_with(&trap, 0.0, &grid, &params, &ImagTimeConfig::default()).unwrap();
    assert!((g.energy - 0.5).abs() < 1e-6, "energy {}", g.energy);
    let norm = PI.powf(-0.25);
    for (a, &x) in g.psi.amplitudes().iter().zip(grid.x()) {
        assert!((a - Complex64::new(norm * (-x * x / 2.0).exp(), 0.0)).norm() < 1e-6);
    }
    assert!(g.energies.windows(2).all(|w| w[1] <= w[0] + 1e-12));
}

#[test]
fn harmonic_first_excited_state() {
    let grid = Arc::new(SpatialGrid::symmetric(10.0, 256).unwrap());
    let params = GpeParams::new(2.0, 0.0, 0.01).unwrap();
    let trap = Harmonic::new(2.0, 0.5);
    let e = excited_state_with(&trap, 0.0, &grid, &params, &ImagTimeConfig::default()).unwrap();
    assert!((e.energy - 0.75).abs() < 1e-6, "energy {}", e.energy);
    let g = ground_state(&trap, 0.0, &grid, &params).unwrap();
    assert!(fidelity(&g, &e.psi).unwrap() < 1e-20);
}

#[test]
fn excited_state_needs_symmetric_potential() {
    let grid = Arc::new(SpatialGrid::symmetric(10.0, 128).unwrap());
    let params = GpeParams::new(1.0, 0.0, 0.01).unwrap();
    assert!(matches!(
        excited_state(&Harmonic::new(1.0, 1.0), 0.7, &grid, &params),
        Err(glocal::Error::Unsupported(_))
    ));
}

#[test]
fn displaced_ground_state_follows_the_trap() {
    let grid = Arc::new(SpatialGrid::symmetric(10.0, 256).unwrap());
    let params = GpeParams::new(1.0, 0.0, 0.01).unwrap();
    let g = ground_state(&Harmonic::new(1.0, 1.0), 1.5, &grid, &params).unwrap();
    let mean = g.mean_position();
    assert!((mean - 1.5).abs() < 1e-6, "{mean}");
}

#[test]
fn thomas_fermi_limit() {
    let grid = Arc::new(SpatialGrid::symmetric(24.0, 512).unwrap());
    let beta = 1000.0;
    let params = GpeParams::new(1.0, beta, 0.01).unwrap();
    let trap = Harmonic::new(1.0, 1.0);
    let g = ground_state_with(&trap, 0.0, &grid, &params, &ImagTimeConfig::default()).unwrap();
    // μ = (3βω√m / 4√2)^{2/3}, E/N = 3μ/5 up to kinetic corrections
    let mu: f64 = (3.0 * beta / (4.0 * 2f64.sqrt())).powf(2.0 / 3.0);
    assert!((g.energy / (0.6 * mu) - 1.0).abs() < 0.01, "E {} vs {}", g.energy, 0.6 * mu);
    let peak = g.psi.density().iter().cloned().fold(0.0, f64::max);
    assert!((peak * beta / mu - 1.0).abs() < 0.02);
    assert!(g.energies.windows(2).all(|w| w[1] <= w[0] + 1e-9 * w[0].abs()));
}

#[test]
fn ground_state_is_stationary() {
    let grid = Arc::new(SpatialGrid::symmetric(10.0, 256).unwrap());
    let params = GpeParams::new(1.0, 2.0, 0.005).unwrap();
    let trap = Harmonic::new(1.0, 1.0);
    let g = ground_state(&trap, 0.0, &grid, &params).unwrap();
    let traj = propagate(&g, &vec![0.0; 2001], &trap, &params, false).unwrap();
    assert!(fidelity(&g, traj.final_state()).unwrap() > 1.0 - 1e-9);
}

#[test]
fn sudden_displacement_obeys_ehrenfest() {
    let grid = Arc::new(SpatialGrid::symmetric(12.0, 256).unwrap());
    let params = GpeParams::new(1.0, 0.0, 0.005).unwrap();
    let trap = Harmonic::new(1.0, 1.0);
    let g = ground_state(&trap, 0.0, &grid, &params).unwrap();
    let traj = propagate(&g, &vec![1.0; 1001], &trap, &params, true).unwrap();
    for (j, x) in traj.mean_positions().iter().enumerate() {
        let t = j as f64 * params.dt;
        assert!((x - (1.0 - t.cos())).abs() < 1e-5, "t {t}: {x}");
    }
}

fn driven_final_state(dt: f64, total: f64) -> WaveFunction {
    let grid = Arc::new(SpatialGrid::symmetric(12.0, 256).unwrap());
    let params = GpeParams::new(1.0, 3.0, dt).unwrap();
    let trap = Harmonic::new(1.0, 1.0);
    let psi0 = gaussian(&grid, 0.3, 0.9);
    let n = (total / dt).round() as usize;
    let controls: Vec<f64> = (0..=n).map(|j| (1.7 * j as f64 * dt).sin()).collect();
    propagate(&psi0, &controls, &trap, &params, false)
        .unwrap()
        .final_state()
        .clone()
}

#[test]
fn strang_splitting_is_second_order() {
    let total = 2.0;
    let reference = driven_final_state(total / 12_800.0, total);
    let err = |steps: f64| {
        let psi = driven_final_state(total / steps, total);
        let diff: f64 = psi
            .amplitudes()
            .iter()
            .zip(reference.amplitudes())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            * psi.grid().dx();
        diff.sqrt()
    };
    let (e1, e2, e3) = (err(100.0), err(200.0), err(400.0));
    for ratio in [e1 / e2, e2 / e3] {
        assert!((ratio - 4.0).abs() < 0.4, "ratios {} {}", e1 / e2, e2 / e3);
    }
}

#[test]
fn fidelity_ignores_global_phase() {
    let grid = Arc::new(SpatialGrid::symmetric(10.0, 128).unwrap());
    let a = gaussian(&grid, 0.5, 1.0);
    let b = a.clone().with_phase(1.234);
    assert!((fidelity(&a, &b).unwrap() - 1.0).abs() < 1e-14);
}
