//! State-transfer cost `J = (1 − F)/2 + (γ/2)∫u̇² dt` and its gradient with
//! respect to the basis coefficients.
//!
//! The gradient is the exact derivative of the discretized cost: a backward
//! sweep transposes every factor of the forward Strang steps (the adjoint
//! picks up the `2β|ψ|²χ` and `βψ²χ*` couplings from the nonlinear phase),
//! and the control sensitivity collects `−Re⟨χ|∂V/∂u|ψ⟩·dt/2` from each
//! half-step touching a sample, i.e. a trapezoid rule in time.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::control::{
    apply_transfer, project_onto_basis, regularization_cost, regularization_gradient,
    synthesize_masked, transfer_adjoint, BasisSpec, SampledControl, TransferFunction,
};
use crate::gpe::{
    check_finite, fidelity, propagate, raw_inner, GpeParams, Potential, SplitStep, Trajectory,
    WaveFunction,
};
use crate::problems::ProblemDefinition;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    /// `(1 − F)/2`.
    pub infidelity_term: f64,
    pub regularization_term: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn new(infidelity_term: f64, regularization_term: f64) -> Self {
        Self {
            infidelity_term,
            regularization_term,
            total: infidelity_term + regularization_term,
        }
    }

    /// Breakdown for a plain scalar objective: the part up to `1/2` is booked
    /// as infidelity so that fidelity-based stopping rules stay meaningful.
    pub fn scalar(value: f64) -> Self {
        if value.is_nan() {
            return Self::failed();
        }
        let inf = value.clamp(0.0, 0.5);
        Self {
            infidelity_term: inf,
            regularization_term: value - inf,
            total: value,
        }
    }

    /// Placeholder for an evaluation that blew up; never wins a comparison.
    pub fn failed() -> Self {
        Self {
            infidelity_term: 0.5,
            regularization_term: f64::INFINITY,
            total: f64::INFINITY,
        }
    }

    pub fn fidelity(&self) -> f64 {
        (1.0 - 2.0 * self.infidelity_term).clamp(0.0, 1.0)
    }

    pub fn infidelity(&self) -> f64 {
        1.0 - self.fidelity()
    }
}

/// Backward sweep output.
#[derive(Debug, Clone)]
pub struct AdjointState {
    /// `χ(t_j)` at every time sample.
    pub chi: Vec<Vec<Complex64>>,
    /// `∂J_F/∂v_j` for the control actually seen by the atoms.
    pub control_sensitivity: Vec<f64>,
}

/// Everything a single cost evaluation produces along the way.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub cost: CostBreakdown,
    /// Commanded control.
    pub u: SampledControl,
    /// Control after the transfer function (equal to `u` without one).
    pub v: SampledControl,
    pub trajectory: Trajectory,
    pub(crate) free: Vec<bool>,
    pub(crate) transfer: Option<TransferFunction>,
    pub(crate) params: GpeParams,
}

/// Synthesizes and propagates; `store` keeps every intermediate state.
pub fn evaluate(
    coeffs: &[f64],
    basis: &BasisSpec,
    problem: &ProblemDefinition,
    store: bool,
) -> Result<Evaluation> {
    let tg = problem.time_grid(basis.duration)?;
    let reference = problem.reference(&tg);
    let synth = synthesize_masked(coeffs, basis, &reference, problem.u_bounds)?;
    let transfer = problem.transfer(&tg)?;
    let v = match &transfer {
        Some(tf) => apply_transfer(&synth.control, tf),
        None => synth.control.clone(),
    };
    let params = problem.params_for(&tg);
    let trajectory = propagate(
        &problem.psi_initial,
        &v.u,
        problem.potential.as_ref(),
        &params,
        store,
    )
    .map_err(|e| e.with_coeffs(coeffs))?;
    let f = fidelity(&problem.psi_target, trajectory.final_state())?;
    let reg = regularization_cost(&synth.control, problem.gamma)?;
    Ok(Evaluation {
        cost: CostBreakdown::new(0.5 * (1.0 - f), reg),
        u: synth.control,
        v,
        trajectory,
        free: synth.free,
        transfer,
        params,
    })
}

pub fn cost(coeffs: &[f64], basis: &BasisSpec, problem: &ProblemDefinition) -> Result<CostBreakdown> {
    evaluate(coeffs, basis, problem, false).map(|e| e.cost)
}

/// Applies `exp(+iθ)` for the half-step phase `θ = (V + β|ψ|²)τ` and returns
/// the pointwise weights `Im(conj(λ_out)·ψ_out)` of that half-step.
fn adjoint_half_step(
    lambda: &mut [Complex64],
    psi_in: &[Complex64],
    psi_out: &[Complex64],
    v: &[f64],
    beta: f64,
    tau: f64,
    weights: &mut [f64],
) {
    for j in 0..lambda.len() {
        let w = (lambda[j].conj() * psi_out[j]).im;
        weights[j] = w;
        let theta = (v[j] + beta * psi_in[j].norm_sqr()) * tau;
        let (s, c) = theta.sin_cos();
        lambda[j] = lambda[j] * Complex64::new(c, s) + psi_in[j] * (2.0 * beta * tau * w);
    }
}

/// Backward sweep of the discrete adjoint from `χ(T) = i⟨ψ_target|ψ(T)⟩ψ_target`.
///
/// `χ` is normalized so that `∂J/∂u(t) = −Re⟨χ|∂V/∂u|ψ⟩`. With `β = 0` it
/// evolves backward under the same unitary steps as `ψ`.
pub fn backward_adjoint(
    traj: &Trajectory,
    psi_target: &WaveFunction,
    potential: &dyn Potential,
    params: &GpeParams,
) -> Result<AdjointState> {
    if !traj.is_stored() {
        return Err(Error::invalid("backward sweep needs a stored trajectory"));
    }
    let grid = traj.final_state().grid().clone();
    if !grid.same_as(psi_target.grid()) {
        return Err(Error::invalid("target lives on a different grid"));
    }
    let n = grid.n_points();
    let dx = grid.dx();
    let steps = traj.n_steps();
    let states = traj.stored_amplitudes();
    let controls = traj.controls();
    let beta = params.beta;
    let tau = 0.5 * params.dt;

    // λ is the Riesz representer of ∂J/∂ψ under Re⟨·,·⟩; χ = −iλ.
    let target = psi_target.amplitudes();
    let overlap = raw_inner(target, &states[steps]) * dx;
    let mut lambda: Vec<Complex64> = target.iter().map(|t| -overlap * t).collect();
    let to_chi = |l: &[Complex64]| l.iter().map(|z| Complex64::new(z.im, -z.re)).collect();
    let mut chi = vec![Vec::new(); steps + 1];
    chi[steps] = to_chi(&lambda);
    let mut sens = vec![0.0; steps + 1];
    if steps == 0 {
        return Ok(AdjointState {
            chi,
            control_sensitivity: sens,
        });
    }

    let mut stepper = SplitStep::new(&grid, params.mass, params.dt);
    let mut v_hi = potential.column(&grid, controls[steps]);
    let mut du_hi = vec![0.0; n];
    potential.fill_du_column(&grid, controls[steps], &mut du_hi);
    let mut v_lo = vec![0.0; n];
    let mut du_lo = vec![0.0; n];
    let mut mid = vec![Complex64::default(); n];
    let mut pre = vec![Complex64::default(); n];
    let mut w = vec![0.0; n];

    for j in (0..steps).rev() {
        let a = &states[j];
        let d = &states[j + 1];
        potential.fill_column(&grid, controls[j], &mut v_lo);
        potential.fill_du_column(&grid, controls[j], &mut du_lo);

        // trailing half-step: c -> d with V(u_{j+1}); c = e^{iθ} d
        for k in 0..n {
            let theta = (v_hi[k] + beta * d[k].norm_sqr()) * tau;
            mid[k] = d[k] * Complex64::from_polar(1.0, theta);
        }
        adjoint_half_step(&mut lambda, &mid, d, &v_hi, beta, tau, &mut w);
        sens[j + 1] += tau * dx * du_hi.iter().zip(&w).map(|(g, w)| g * w).sum::<f64>();

        stepper.kinetic_adjoint(&mut lambda);

        // leading half-step: a -> b with V(u_j)
        for k in 0..n {
            let theta = (v_lo[k] + beta * a[k].norm_sqr()) * tau;
            pre[k] = a[k] * Complex64::from_polar(1.0, -theta);
        }
        adjoint_half_step(&mut lambda, a, &pre, &v_lo, beta, tau, &mut w);
        sens[j] += tau * dx * du_lo.iter().zip(&w).map(|(g, w)| g * w).sum::<f64>();

        check_finite(&lambda, j)?;
        chi[j] = to_chi(&lambda);
        std::mem::swap(&mut v_hi, &mut v_lo);
        std::mem::swap(&mut du_hi, &mut du_lo);
    }
    Ok(AdjointState {
        chi,
        control_sensitivity: sens,
    })
}

/// `∂J/∂u_j` per commanded sample, including the transfer function, the
/// zero slope of clipped samples and the regularization term.
pub(crate) fn control_gradient(eval: &Evaluation, problem: &ProblemDefinition) -> Result<Vec<f64>> {
    let adj = backward_adjoint(
        &eval.trajectory,
        &problem.psi_target,
        problem.potential.as_ref(),
        &eval.params,
    )?;
    let mut g = match &eval.transfer {
        Some(tf) => transfer_adjoint(&adj.control_sensitivity, tf),
        None => adj.control_sensitivity,
    };
    let reg = regularization_gradient(&eval.u, problem.gamma);
    for ((gj, rj), &free) in g.iter_mut().zip(&reg).zip(&eval.free) {
        *gj = if free { *gj + rj } else { 0.0 };
    }
    Ok(g)
}

/// Cost and `∂J/∂c_n` for every basis coefficient.
pub fn cost_and_gradient(
    coeffs: &[f64],
    basis: &BasisSpec,
    problem: &ProblemDefinition,
) -> Result<(CostBreakdown, Vec<f64>)> {
    let eval = evaluate(coeffs, basis, problem, true)?;
    let g = control_gradient(&eval, problem).map_err(|e| e.with_coeffs(coeffs))?;
    Ok((eval.cost, project_onto_basis(&g, basis)))
}

pub fn gradient(coeffs: &[f64], basis: &BasisSpec, problem: &ProblemDefinition) -> Result<Vec<f64>> {
    cost_and_gradient(coeffs, basis, problem).map(|(_, g)| g)
}

/// Central differences `(J(c + h e_n) − J(c − h e_n)) / 2h` of any scalar
/// functional.
pub fn finite_diff_gradient<F>(f: F, coeffs: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if !(h > 0.0) {
        return Err(Error::invalid(format!("finite-difference step must be positive, got {h}")));
    }
    let mut x = coeffs.to_vec();
    (0..coeffs.len())
        .map(|n| {
            x[n] = coeffs[n] + h;
            let plus = f(&x)?;
            x[n] = coeffs[n] - h;
            let minus = f(&x)?;
            x[n] = coeffs[n];
            Ok((plus - minus) / (2.0 * h))
        })
        .collect()
}

/// [`finite_diff_gradient`] of the total cost.
pub fn finite_diff_cost_gradient(
    coeffs: &[f64],
    basis: &BasisSpec,
    problem: &ProblemDefinition,
    h: f64,
) -> Result<Vec<f64>> {
    finite_diff_gradient(|c| cost(c, basis, problem).map(|b| b.total), coeffs, h)
}

/// Largest component-wise discrepancy between two gradients: relative for
/// components above `tiny`, absolute otherwise.
pub fn max_gradient_error(analytic: &[f64], reference: &[f64], tiny: f64) -> f64 {
    analytic
        .iter()
        .zip(reference)
        .map(|(&a, &r)| {
            let scale = a.abs().max(r.abs());
            if scale < tiny {
                (a - r).abs()
            } else {
                (a - r).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}
