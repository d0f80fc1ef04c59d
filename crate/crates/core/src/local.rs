//! Gradient-based local optimization in the chopped basis: a box-projected
//! limited-memory BFGS iteration with a backtracking and interpolating line
//! search that enforces the sufficient-decrease and curvature conditions.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::cost::CostBreakdown;
use crate::objective::Objective;
use crate::Result;

const SUFFICIENT_DECREASE: f64 = 1e-4;
const MAX_LINE_SEARCH_TRIALS: usize = 30;
const PLATEAU_WINDOW: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalOptConfig {
    pub max_iterations: usize,
    /// Stop when the projected gradient's max-norm drops below this.
    pub grad_tol: f64,
    /// Stop when the relative decrease over five iterations drops below this.
    pub cost_tol: f64,
    pub max_cost_evals: usize,
    pub history_size: usize,
    /// Strong-Wolfe curvature constant `c₂`: `|∇J·d| ≤ c₂|∇J₀·d|`.
    pub curvature: f64,
}

impl Default for LocalOptConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            grad_tol: 1e-7,
            cost_tol: 1e-9,
            max_cost_evals: 5000,
            history_size: 10,
            curvature: 0.2,
        }
    }
}

impl LocalOptConfig {
    /// Budget used for refinement inside the hybrid loop.
    pub fn hybrid() -> Self {
        Self {
            max_iterations: 50,
            max_cost_evals: 200,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Gradient,
    CostPlateau,
    Budget,
}

#[derive(Debug, Clone)]
pub struct LocalOptResult {
    pub best_coeffs: Vec<f64>,
    pub best_cost: CostBreakdown,
    pub iterations: usize,
    /// Objective evaluations, each one forward propagation plus gradient.
    pub evals: usize,
    pub converged_reason: StopReason,
    /// Accepted cost after every iteration, starting with the initial point.
    pub cost_history: Vec<f64>,
}

fn project(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (xi, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *xi = xi.clamp(lo, hi);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gradient with components zeroed where a bound blocks descent.
fn projected_gradient(x: &[f64], g: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    x.iter()
        .zip(g)
        .zip(bounds)
        .map(|((&xi, &gi), &(lo, hi))| {
            if (xi <= lo && gi > 0.0) || (xi >= hi && gi < 0.0) {
                0.0
            } else {
                gi
            }
        })
        .collect()
}

struct Memory {
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    capacity: usize,
}

impl Memory {
    fn new(capacity: usize) -> Self {
        Self {
            pairs: VecDeque::with_capacity(capacity),
            capacity: capacity.max(1),
        }
    }

    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) {
        let sy = dot(&s, &y);
        if !(sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt()) {
            return;
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / sy));
    }

    fn clear(&mut self) {
        self.pairs.clear();
    }

    fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Two-loop recursion: returns `H·g`.
    fn apply(&self, g: &[f64]) -> Vec<f64> {
        let mut q = g.to_vec();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = self.pairs.back() {
            let scale = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|qi| *qi *= scale);
        }
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        q
    }
}

struct Point {
    x: Vec<f64>,
    cost: CostBreakdown,
    grad: Vec<f64>,
}

struct Search<'a, O: Objective + ?Sized> {
    objective: &'a O,
    bounds: Vec<(f64, f64)>,
    evals: usize,
    max_evals: usize,
}

impl<O: Objective + ?Sized> Search<'_, O> {
    fn eval(&mut self, x: &[f64]) -> Option<(CostBreakdown, Vec<f64>)> {
        self.evals += 1;
        match self.objective.evaluate_with_gradient(x) {
            Ok((c, g)) if c.total.is_finite() && g.iter().all(|v| v.is_finite()) => Some((c, g)),
            Ok(_) => None,
            Err(e) => {
                log::debug!("line-search trial failed: {e}");
                None
            }
        }
    }

    fn line_search(&mut self, at: &Point, dir: &[f64], alpha0: f64, curvature: f64) -> Option<Point> {
        let f0 = at.cost.total;
        let slope0 = dot(&at.grad, dir);
        let mut alpha = alpha0;
        // bracket: the largest step known to be too short, and its slope
        let (mut lo, mut slope_lo) = (0.0, slope0);
        let mut hi = f64::INFINITY;
        let mut acceptable: Option<Point> = None;
        for _ in 0..MAX_LINE_SEARCH_TRIALS {
            if self.evals >= self.max_evals || !(alpha > lo) || (hi.is_finite() && hi - lo <= 1e-12 * hi) {
                break;
            }
            let mut x: Vec<f64> = at.x.iter().zip(dir).map(|(a, d)| a + alpha * d).collect();
            project(&mut x, &self.bounds);
            let step: Vec<f64> = x.iter().zip(&at.x).map(|(a, b)| a - b).collect();
            if step.iter().all(|&s| s == 0.0) {
                break;
            }
            let Some((cost, grad)) = self.eval(&x) else {
                hi = alpha;
                alpha = lo + 0.25 * (alpha - lo);
                continue;
            };
            let predicted = dot(&at.grad, &step);
            if cost.total > f0 + SUFFICIENT_DECREASE * predicted || predicted >= 0.0 {
                hi = alpha;
                // minimizer of the quadratic through f0, slope0 and the trial
                let denom = 2.0 * (cost.total - f0 - slope0 * alpha);
                let interp = if denom > 0.0 {
                    -slope0 * alpha * alpha / denom
                } else {
                    0.5 * alpha
                };
                alpha = interp.max(lo + 0.1 * (alpha - lo)).min(lo + 0.5 * (alpha - lo));
                continue;
            }
            let clipped = step
                .iter()
                .zip(dir)
                .any(|(s, d)| (s - alpha * d).abs() > 1e-15 * d.abs().max(1.0));
            let slope = dot(&grad, dir);
            let better = acceptable
                .as_ref()
                .is_none_or(|p| cost.total < p.cost.total);
            if better {
                acceptable = Some(Point { x, cost, grad });
            }
            if slope.abs() <= curvature * slope0.abs() || clipped {
                break;
            }
            // secant on the directional derivative; exact for quadratics
            let secant = if slope != slope_lo {
                lo - slope_lo * (alpha - lo) / (slope - slope_lo)
            } else {
                f64::NAN
            };
            if slope < 0.0 {
                lo = alpha;
                slope_lo = slope;
                let cap = if hi.is_finite() { lo + 0.9 * (hi - lo) } else { 4.0 * alpha };
                alpha = if secant.is_finite() && secant > alpha {
                    secant.min(cap).max(1.1 * alpha)
                } else {
                    cap.min(2.0 * alpha)
                };
            } else {
                hi = alpha;
                let width = alpha - lo;
                alpha = if secant.is_finite() {
                    secant.max(lo + 0.1 * width).min(lo + 0.9 * width)
                } else {
                    lo + 0.5 * width
                };
            }
        }
        acceptable
    }
}

/// Minimizes `objective` from `start` (projected into the box).
///
/// Never returns a point worse than the start. A failed line search falls
/// back to steepest descent; if that fails too the current point is returned
/// with [`StopReason::Budget`].
pub fn group_optimize<O: Objective + ?Sized>(
    start: &[f64],
    objective: &O,
    cfg: &LocalOptConfig,
) -> Result<LocalOptResult> {
    let bounds = objective.bounds();
    let mut x = start.to_vec();
    project(&mut x, &bounds);
    let (cost, grad) = objective.evaluate_with_gradient(&x)?;
    let mut search = Search {
        objective,
        bounds,
        evals: 1,
        max_evals: cfg.max_cost_evals.max(1),
    };
    let mut current = Point { x, cost, grad };
    let mut memory = Memory::new(cfg.history_size);
    let mut history = vec![current.cost.total];
    let mut iterations = 0;

    let reason = loop {
        let pg = projected_gradient(&current.x, &current.grad, &search.bounds);
        let pg_inf = pg.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if pg_inf < cfg.grad_tol {
            break StopReason::Gradient;
        }
        if history.len() > PLATEAU_WINDOW {
            let old = history[history.len() - 1 - PLATEAU_WINDOW];
            let now = *history.last().unwrap();
            if old - now <= cfg.cost_tol * old.abs() {
                break StopReason::CostPlateau;
            }
        }
        if iterations >= cfg.max_iterations || search.evals >= search.max_evals {
            break StopReason::Budget;
        }

        let steepest: Vec<f64> = pg.iter().map(|g| -g).collect();
        let first_step = (1.0 / pg_inf).min(1.0);
        let mut next = None;
        if !memory.is_empty() {
            let mut dir: Vec<f64> = memory.apply(&pg).into_iter().map(|v| -v).collect();
            for (d, p) in dir.iter_mut().zip(&pg) {
                if *p == 0.0 {
                    *d = 0.0;
                }
            }
            if dot(&dir, &pg) < 0.0 {
                next = search.line_search(&current, &dir, 1.0, cfg.curvature);
            }
            if next.is_none() {
                memory.clear();
            }
        }
        if next.is_none() {
            next = search.line_search(&current, &steepest, first_step, cfg.curvature);
        }
        let Some(new) = next else {
            break StopReason::Budget;
        };

        let s: Vec<f64> = new.x.iter().zip(&current.x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = new.grad.iter().zip(&current.grad).map(|(a, b)| a - b).collect();
        memory.push(s, y);
        current = new;
        iterations += 1;
        history.push(current.cost.total);
    };

    Ok(LocalOptResult {
        best_coeffs: current.x,
        best_cost: current.cost,
        iterations,
        evals: search.evals,
        converged_reason: reason,
        cost_history: history,
    })
}
