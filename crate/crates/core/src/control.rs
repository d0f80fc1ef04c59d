//! Chopped-random-basis control synthesis and the finite-bandwidth transfer
//! function of the control electronics.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Chopped random basis `f_n(t) = sin((n + r_n)·π·t/T)`, `n = 1..=M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    /// Random frequency shifts, each in `[-0.5, 0.5]`.
    pub r: Vec<f64>,
    pub duration: f64,
}

impl BasisSpec {
    pub fn new(r: Vec<f64>, duration: f64) -> Result<Self> {
        if r.is_empty() {
            return Err(Error::invalid("basis needs at least one function"));
        }
        if let Some(bad) = r.iter().find(|x| !(-0.5..=0.5).contains(*x)) {
            return Err(Error::invalid(format!("frequency shift {bad} outside [-0.5, 0.5]")));
        }
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::invalid(format!("duration must be positive, got {duration}")));
        }
        Ok(Self { r, duration })
    }

    /// Unshifted basis (`r_n = 0`).
    pub fn plain(m: usize, duration: f64) -> Result<Self> {
        Self::new(vec![0.0; m], duration)
    }

    pub fn size(&self) -> usize {
        self.r.len()
    }

    /// Angular frequency of the 0-based basis function `n`.
    pub fn frequency(&self, n: usize) -> f64 {
        (n as f64 + 1.0 + self.r[n]) * PI / self.duration
    }

    pub fn function(&self, n: usize, t: f64) -> f64 {
        (self.frequency(n) * t).sin()
    }
}

/// Uniform time samples `t_j = j·dt`, `j = 0..=n_steps`, with `n_steps·dt = T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub n_steps: usize,
    pub dt: f64,
}

impl TimeGrid {
    /// `n_steps = floor(T / dt_max)` (at least one) and `dt = T / n_steps`.
    pub fn new(duration: f64, dt_max: f64) -> Result<Self> {
        if !(duration > 0.0 && dt_max > 0.0) {
            return Err(Error::invalid(format!(
                "need positive duration and step, got T = {duration}, dt = {dt_max}"
            )));
        }
        // Tolerate T/dt landing a hair below an integer.
        let n_steps = ((duration / dt_max) * (1.0 + 1e-12)).floor().max(1.0) as usize;
        Ok(Self {
            n_steps,
            dt: duration / n_steps as f64,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.n_steps + 1
    }

    pub fn duration(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    pub fn time(&self, j: usize) -> f64 {
        if j == self.n_steps {
            self.duration()
        } else {
            j as f64 * self.dt
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_samples()).map(|j| self.time(j)).collect()
    }
}

/// Control values on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledControl {
    pub u: Vec<f64>,
    pub dt: f64,
}

impl SampledControl {
    pub fn new(u: Vec<f64>, dt: f64) -> Self {
        Self { u, dt }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

/// `S(t) = sin(π t/T)`, evaluated from the nearer end so that `S(0)` and
/// `S(T)` are exactly zero.
pub fn shape_function(t: f64, duration: f64) -> Result<f64> {
    if !(duration > 0.0) || !(0.0..=duration).contains(&t) {
        return Err(Error::invalid(format!("t = {t} outside [0, {duration}]")));
    }
    Ok((PI * t.min(duration - t) / duration).sin())
}

/// Linear ramp from `u_start` to `u_end` sampled on `tg`.
pub fn linear_reference(u_start: f64, u_end: f64, tg: &TimeGrid) -> Vec<f64> {
    let n = tg.n_steps as f64;
    (0..tg.n_samples())
        .map(|j| {
            if j == tg.n_steps {
                u_end
            } else {
                u_start + (u_end - u_start) * j as f64 / n
            }
        })
        .collect()
}

/// Synthesized control plus, per sample, whether it lies strictly inside the
/// admissible box (clipped samples have zero slope with respect to `c`).
#[derive(Debug, Clone)]
pub(crate) struct Synthesis {
    pub control: SampledControl,
    pub free: Vec<bool>,
}

pub(crate) fn synthesize_masked(
    coeffs: &[f64],
    basis: &BasisSpec,
    reference: &[f64],
    bounds: (f64, f64),
) -> Result<Synthesis> {
    if coeffs.len() != basis.size() {
        return Err(Error::invalid(format!(
            "{} coefficients for a basis of size {}",
            coeffs.len(),
            basis.size()
        )));
    }
    if reference.len() < 2 {
        return Err(Error::invalid("reference control needs at least two samples"));
    }
    let (lo, hi) = bounds;
    let n_steps = reference.len() - 1;
    let tg = TimeGrid {
        n_steps,
        dt: basis.duration / n_steps as f64,
    };
    let mut u = Vec::with_capacity(reference.len());
    let mut free = Vec::with_capacity(reference.len());
    for (j, &u0) in reference.iter().enumerate() {
        let t = tg.time(j);
        let s = shape_function(t, basis.duration)?;
        let raw = if s == 0.0 {
            u0
        } else {
            u0 + s * coeffs
                .iter()
                .enumerate()
                .map(|(n, c)| c * basis.function(n, t))
                .sum::<f64>()
        };
        free.push(raw > lo && raw < hi);
        u.push(raw.clamp(lo, hi));
    }
    Ok(Synthesis {
        control: SampledControl::new(u, tg.dt),
        free,
    })
}

/// `u(t_j) = u₀(t_j) + S(t_j)·Σ c_n f_n(t_j)`, clipped to `bounds`.
pub fn synthesize(
    coeffs: &[f64],
    basis: &BasisSpec,
    reference: &[f64],
    bounds: (f64, f64),
) -> Result<SampledControl> {
    synthesize_masked(coeffs, basis, reference, bounds).map(|s| s.control)
}

/// Projects a per-sample sensitivity `∂J/∂u_j` onto the coefficients:
/// `∂J/∂c_n = Σ_j g_j S(t_j) f_n(t_j)`.
pub(crate) fn project_onto_basis(g: &[f64], basis: &BasisSpec) -> Vec<f64> {
    let n_steps = g.len() - 1;
    let tg = TimeGrid {
        n_steps,
        dt: basis.duration / n_steps as f64,
    };
    let mut out = vec![0.0; basis.size()];
    for (j, &gj) in g.iter().enumerate() {
        if gj == 0.0 {
            continue;
        }
        let t = tg.time(j);
        let s = (PI * t.min(basis.duration - t) / basis.duration).sin();
        for (n, o) in out.iter_mut().enumerate() {
            *o += gj * s * basis.function(n, t);
        }
    }
    out
}

/// `(γ/2) Σ ((u_{j+1} − u_j)/dt)² dt`.
pub fn regularization_cost(u: &SampledControl, gamma: f64) -> Result<f64> {
    if u.len() < 2 {
        return Err(Error::invalid("regularization needs at least two samples"));
    }
    let sum: f64 = u.u.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    Ok(0.5 * gamma * sum / u.dt)
}

/// Gradient of [`regularization_cost`] with respect to each sample; equals
/// `-γ·ü_j·dt` in the interior.
pub fn regularization_gradient(u: &SampledControl, gamma: f64) -> Vec<f64> {
    let n = u.len();
    let mut g = vec![0.0; n];
    if n < 2 {
        return g;
    }
    let s = gamma / u.dt;
    for j in 0..n - 1 {
        let d = u.u[j + 1] - u.u[j];
        g[j] -= s * d;
        g[j + 1] += s * d;
    }
    g
}

/// Discrete unit-gain low-pass kernel applied to the commanded control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferFunction {
    pub kernel: Vec<f64>,
    /// Cutoff frequency the kernel was built for (internal frequency units);
    /// zero for kernels given explicitly.
    pub bandwidth: f64,
}

impl TransferFunction {
    pub fn identity() -> Self {
        Self {
            kernel: vec![1.0],
            bandwidth: f64::INFINITY,
        }
    }

    /// Normalizes `kernel` to unit sum. It must have odd length, be
    /// non-negative and symmetric about its centre.
    pub fn from_kernel(kernel: Vec<f64>) -> Result<Self> {
        if kernel.len() % 2 == 0 {
            return Err(Error::invalid("transfer kernel length must be odd"));
        }
        if kernel.iter().any(|&k| !(k >= 0.0 && k.is_finite())) {
            return Err(Error::invalid("transfer kernel must be non-negative"));
        }
        let n = kernel.len();
        if (0..n / 2).any(|i| (kernel[i] - kernel[n - 1 - i]).abs() > 1e-12 * kernel[i].abs().max(1.0)) {
            return Err(Error::invalid("transfer kernel must be symmetric"));
        }
        let sum: f64 = kernel.iter().sum();
        if sum <= 0.0 {
            return Err(Error::invalid("transfer kernel must have positive sum"));
        }
        Ok(Self {
            kernel: kernel.into_iter().map(|k| k / sum).collect(),
            bandwidth: 0.0,
        })
    }

    /// Gaussian kernel truncated at ±3σ whose response drops to `1/√2` at
    /// the cutoff frequency `bandwidth` (cycles per unit time); `dt` is the
    /// sample spacing.
    pub fn gaussian(bandwidth: f64, dt: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && dt > 0.0) {
            return Err(Error::invalid("bandwidth and dt must be positive"));
        }
        let sigma = (2f64.ln()).sqrt() / (2.0 * PI * bandwidth) / dt;
        let half = (3.0 * sigma).ceil() as i64;
        let kernel: Vec<f64> = (-half..=half)
            .map(|i| (-(i as f64).powi(2) / (2.0 * sigma * sigma)).exp())
            .collect();
        let mut tf = Self::from_kernel(kernel)?;
        tf.bandwidth = bandwidth;
        Ok(tf)
    }

    pub fn half_width(&self) -> usize {
        self.kernel.len() / 2
    }
}

/// `v = K ⊛ u`: samples before `t = 0` hold `u₀` and after `T` hold `u_T`;
/// the end samples themselves stay pinned.
pub fn apply_transfer(u: &SampledControl, tf: &TransferFunction) -> SampledControl {
    let n = u.len();
    if n <= 2 || tf.kernel.len() == 1 {
        return u.clone();
    }
    let h = tf.half_width() as i64;
    let last = n as i64 - 1;
    let mut v = vec![0.0; n];
    v[0] = u.u[0];
    v[n - 1] = u.u[n - 1];
    for (j, vj) in v.iter_mut().enumerate().take(n - 1).skip(1) {
        *vj = tf
            .kernel
            .iter()
            .enumerate()
            .map(|(i, &k)| k * u.u[(j as i64 + i as i64 - h).clamp(0, last) as usize])
            .sum();
    }
    SampledControl::new(v, u.dt)
}

/// Transpose of [`apply_transfer`]: maps `∂J/∂v` to `∂J/∂u`.
pub fn transfer_adjoint(g: &[f64], tf: &TransferFunction) -> Vec<f64> {
    let n = g.len();
    if n <= 2 || tf.kernel.len() == 1 {
        return g.to_vec();
    }
    let h = tf.half_width() as i64;
    let last = n as i64 - 1;
    let mut out = vec![0.0; n];
    out[0] += g[0];
    out[n - 1] += g[n - 1];
    for (j, &gj) in g.iter().enumerate().take(n - 1).skip(1) {
        for (i, &k) in tf.kernel.iter().enumerate() {
            out[(j as i64 + i as i64 - h).clamp(0, last) as usize] += k * gj;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(n: usize, a: f64, b: f64) -> Vec<f64> {
        linear_reference(a, b, &TimeGrid { n_steps: n, dt: 1.0 / n as f64 })
    }

    #[test]
    fn zero_coefficients_reproduce_reference() {
        let basis = BasisSpec::new(vec![0.1, -0.3, 0.4], 2.0).unwrap();
        let reference = ramp(200, 0.0, 1.0);
        let u = synthesize(&[0.0; 3], &basis, &reference, (-5.0, 5.0)).unwrap();
        assert_eq!(u.u, reference);
    }

    #[test]
    fn endpoints_are_pinned_exactly() {
        let basis = BasisSpec::new(vec![0.2, -0.5, 0.5, 0.0], 1.7).unwrap();
        let reference = ramp(333, 0.25, 0.75);
        let u = synthesize(&[3.0, -2.0, 1.0, 4.0], &basis, &reference, (-10.0, 10.0)).unwrap();
        assert_eq!(u.u[0], 0.25);
        assert_eq!(*u.u.last().unwrap(), 0.75);
    }

    #[test]
    fn single_mode_midpoint_is_one() {
        // u = sin(πt/T)·sin(πt/T) at t = T/2
        let basis = BasisSpec::plain(1, 1.0).unwrap();
        let reference = vec![0.0; 101];
        let u = synthesize(&[1.0], &basis, &reference, (-5.0, 5.0)).unwrap();
        assert!((u.u[50] - 1.0).abs() < 1e-15);
        let t = 0.3;
        let expected = (PI * t).sin().powi(2);
        assert!((u.u[30] - expected).abs() < 1e-14);
    }

    #[test]
    fn clipping_respects_bounds() {
        let basis = BasisSpec::plain(2, 1.0).unwrap();
        let reference = vec![0.0; 51];
        let s = synthesize_masked(&[4.0, 0.0], &basis, &reference, (-1.0, 1.0)).unwrap();
        assert!(s.control.u.iter().all(|&x| (-1.0..=1.0).contains(&x)));
        assert!(s.free.iter().any(|f| !f));
        assert_eq!(s.control.u[25], 1.0);
    }

    #[test]
    fn shape_function_values() {
        assert_eq!(shape_function(0.0, 3.0).unwrap(), 0.0);
        assert_eq!(shape_function(3.0, 3.0).unwrap(), 0.0);
        assert!((shape_function(1.5, 3.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(shape_function(-0.1, 3.0).is_err());
        assert!(shape_function(3.1, 3.0).is_err());
    }

    #[test]
    fn basis_rejects_out_of_range_shift() {
        assert!(BasisSpec::new(vec![0.6], 1.0).is_err());
        assert!(BasisSpec::new(vec![0.0], 0.0).is_err());
    }

    #[test]
    fn regularization_of_constant_and_ramp() {
        let c = SampledControl::new(vec![0.7; 11], 0.1);
        assert_eq!(regularization_cost(&c, 1.0).unwrap(), 0.0);
        // ramp u0 -> uT over T: (γ/2)(uT-u0)²/T
        let t = 2.0;
        let tg = TimeGrid::new(t, 0.01).unwrap();
        let r = SampledControl::new(linear_reference(0.2, 1.4, &tg), tg.dt);
        let expected = 0.5 * 0.3 * (1.2f64).powi(2) / t;
        assert!((regularization_cost(&r, 0.3).unwrap() - expected).abs() < 1e-13);
        assert!(regularization_cost(&SampledControl::new(vec![1.0], 0.1), 1.0).is_err());
    }

    #[test]
    fn regularization_of_sine_matches_quadrature() {
        // oracle: midpoint quadrature of (2π cos 2πt)² on a much finer grid
        let fine = 200_000;
        let h = 1.0 / fine as f64;
        let oracle: f64 = (0..fine)
            .map(|i| {
                let t = (i as f64 + 0.5) * h;
                (2.0 * PI * (2.0 * PI * t).cos()).powi(2) * h
            })
            .sum();
        assert!((oracle - 2.0 * PI * PI).abs() < 1e-8);
        let gamma = 1e-6;
        let tg = TimeGrid::new(1.0, 1e-4).unwrap();
        let u = SampledControl::new(tg.times().iter().map(|t| (2.0 * PI * t).sin()).collect(), tg.dt);
        let got = regularization_cost(&u, gamma).unwrap();
        let expected = 0.5 * gamma * oracle;
        assert!((got - expected).abs() / expected < 1e-6, "{got} vs {expected}");
        assert!((expected - 9.8696e-6).abs() < 1e-9);
    }

    #[test]
    fn regularization_gradient_matches_finite_differences() {
        let u0: Vec<f64> = (0..20).map(|j| (j as f64 * 0.37).sin()).collect();
        let gamma = 0.7;
        let g = regularization_gradient(&SampledControl::new(u0.clone(), 0.05), gamma);
        let h = 1e-6;
        for j in 0..u0.len() {
            let mut p = u0.clone();
            p[j] += h;
            let mut m = u0.clone();
            m[j] -= h;
            let fd = (regularization_cost(&SampledControl::new(p, 0.05), gamma).unwrap()
                - regularization_cost(&SampledControl::new(m, 0.05), gamma).unwrap())
                / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-6, "j = {j}");
        }
    }

    #[test]
    fn identity_and_constant_transfer() {
        let u = SampledControl::new(vec![0.0, 0.3, -0.2, 0.9, 0.1], 0.1);
        assert_eq!(apply_transfer(&u, &TransferFunction::identity()), u);
        assert_eq!(transfer_adjoint(&u.u, &TransferFunction::identity()), u.u);
        let tf = TransferFunction::gaussian(2.0, 0.01).unwrap();
        let c = SampledControl::new(vec![0.42; 300], 0.01);
        let v = apply_transfer(&c, &tf);
        assert!(v.u.iter().all(|&x| (x - 0.42).abs() < 1e-14));
    }

    #[test]
    fn step_response_is_cumulative_kernel() {
        let tf = TransferFunction::from_kernel(vec![1.0, 2.0, 4.0, 2.0, 1.0]).unwrap();
        let n = 40;
        let step: Vec<f64> = (0..n).map(|j| if j >= 20 { 1.0 } else { 0.0 }).collect();
        let v = apply_transfer(&SampledControl::new(step.clone(), 1.0), &tf);
        // independent loop: v_j = Σ_i k_i step_{j+i-2} with clamped indices
        for j in 1..n - 1 {
            let mut expect = 0.0;
            for i in 0..5 {
                let idx = (j as i64 + i as i64 - 2).clamp(0, n as i64 - 1) as usize;
                expect += tf.kernel[i] * step[idx];
            }
            assert!((v.u[j] - expect).abs() < 1e-15);
        }
        // cumulative sums of the kernel across the edge
        let cum: Vec<f64> = tf.kernel.iter().scan(0.0, |s, k| { *s += k; Some(*s) }).collect();
        assert!((v.u[18] - cum[0]).abs() < 1e-15);
        assert!((v.u[19] - cum[1]).abs() < 1e-15);
        assert!((v.u[20] - cum[2]).abs() < 1e-15);
        assert!((v.u[21] - cum[3]).abs() < 1e-15);
        assert!((v.u[22] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn transfer_adjoint_through_composite_matches_finite_differences() {
        // J(u) = Σ_j w_j v_j² with v = K u
        let tf = TransferFunction::gaussian(1.5, 0.02).unwrap();
        let n = 120;
        let u: Vec<f64> = (0..n).map(|j| (j as f64 * 0.11).cos()).collect();
        let w: Vec<f64> = (0..n).map(|j| 1.0 + (j as f64 * 0.05).sin()).collect();
        let j_of = |u: &[f64]| -> f64 {
            let v = apply_transfer(&SampledControl::new(u.to_vec(), 0.02), &tf);
            v.u.iter().zip(&w).map(|(v, w)| w * v * v).sum()
        };
        let v = apply_transfer(&SampledControl::new(u.clone(), 0.02), &tf);
        let dj_dv: Vec<f64> = v.u.iter().zip(&w).map(|(v, w)| 2.0 * w * v).collect();
        let g = transfer_adjoint(&dj_dv, &tf);
        let h = 1e-6;
        for j in [0, 1, 5, 17, 60, 118, 119] {
            let mut p = u.clone();
            p[j] += h;
            let mut m = u.clone();
            m[j] -= h;
            let fd = (j_of(&p) - j_of(&m)) / (2.0 * h);
            assert!((fd - g[j]).abs() <= 1e-5 * fd.abs().max(1e-3), "j = {j}: {fd} vs {}", g[j]);
        }
    }

    proptest! {
        #[test]
        fn transfer_adjoint_identity(
            u in prop::collection::vec(-1.0f64..1.0, 64),
            g in prop::collection::vec(-1.0f64..1.0, 64),
            bw in 0.5f64..5.0,
        ) {
            let tf = TransferFunction::gaussian(bw, 0.02).unwrap();
            let ku = apply_transfer(&SampledControl::new(u.clone(), 0.02), &tf);
            let ktg = transfer_adjoint(&g, &tf);
            let lhs: f64 = ku.u.iter().zip(&g).map(|(a, b)| a * b).sum();
            let rhs: f64 = u.iter().zip(&ktg).map(|(a, b)| a * b).sum();
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }

        #[test]
        fn transfer_stays_within_range_and_pins_ends(
            u in prop::collection::vec(-2.0f64..2.0, 3..90),
            bw in 0.3f64..10.0,
        ) {
            let tf = TransferFunction::gaussian(bw, 0.01).unwrap();
            let v = apply_transfer(&SampledControl::new(u.clone(), 0.01), &tf);
            let lo = u.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(v.u.iter().all(|&x| x >= lo - 1e-12 && x <= hi + 1e-12));
            prop_assert_eq!(v.u[0], u[0]);
            prop_assert_eq!(v.u[u.len() - 1], u[u.len() - 1]);
        }

        #[test]
        fn synthesis_is_affine_without_clipping(
            c1 in prop::collection::vec(-0.3f64..0.3, 4),
            c2 in prop::collection::vec(-0.3f64..0.3, 4),
            a in -1.0f64..1.0,
            b in -1.0f64..1.0,
        ) {
            let basis = BasisSpec::new(vec![0.1, -0.2, 0.3, -0.4], 1.3).unwrap();
            let reference = ramp(64, -0.5, 0.5);
            let bounds = (-100.0, 100.0);
            let mix: Vec<f64> = c1.iter().zip(&c2).map(|(x, y)| a * x + b * y).collect();
            let lhs = synthesize(&mix, &basis, &reference, bounds).unwrap();
            let s1 = synthesize(&c1, &basis, &reference, bounds).unwrap();
            let s2 = synthesize(&c2, &basis, &reference, bounds).unwrap();
            for j in 0..reference.len() {
                let rhs = a * s1.u[j] + b * s2.u[j] - (a + b - 1.0) * reference[j];
                prop_assert!((lhs.u[j] - rhs).abs() < 1e-12);
            }
        }

        #[test]
        fn regularization_is_nonnegative(u in prop::collection::vec(-3.0f64..3.0, 2..50)) {
            let r = regularization_cost(&SampledControl::new(u.clone(), 0.1), 0.5).unwrap();
            prop_assert!(r >= 0.0);
            let constant = u.windows(2).all(|w| w[0] == w[1]);
            prop_assert_eq!(r == 0.0, constant);
        }
    }
}
