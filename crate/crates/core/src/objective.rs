//! Objective abstractions shared by the local and global optimizers, the
//! control-problem adapters and a few analytic surrogates.

use std::ops::Range;
use std::sync::Arc;

use crate::control::BasisSpec;
use crate::cost::{cost, cost_and_gradient, CostBreakdown};
use crate::problems::ProblemDefinition;
use crate::{Error, Result};

/// A box-constrained differentiable objective over `R^dim`.
pub trait Objective: Sync {
    fn bounds(&self) -> Vec<(f64, f64)>;

    fn dim(&self) -> usize {
        self.bounds().len()
    }

    fn evaluate(&self, x: &[f64]) -> Result<CostBreakdown>;

    fn evaluate_with_gradient(&self, x: &[f64]) -> Result<(CostBreakdown, Vec<f64>)>;
}

/// A population member's search space: a genome with per-component bounds,
/// of which the components in [`GenomeProblem::local_dims`] may also be
/// refined by the gradient-based optimizer.
pub trait GenomeProblem: Sync {
    fn bounds(&self) -> Vec<(f64, f64)>;

    /// Box used to draw the initial population.
    fn init_bounds(&self) -> Vec<(f64, f64)> {
        self.bounds()
    }

    fn local_dims(&self) -> Range<usize>;

    fn evaluate(&self, genome: &[f64]) -> Result<CostBreakdown>;

    /// Cost and gradient with respect to the local components only.
    fn evaluate_with_gradient(&self, genome: &[f64]) -> Result<(CostBreakdown, Vec<f64>)>;
}

/// The local components of a genome with all other components frozen.
pub struct LocalView<'a, P: ?Sized> {
    problem: &'a P,
    genome: Vec<f64>,
    dims: Range<usize>,
}

impl<'a, P: GenomeProblem + ?Sized> LocalView<'a, P> {
    pub fn new(problem: &'a P, genome: &[f64]) -> Self {
        Self {
            problem,
            genome: genome.to_vec(),
            dims: problem.local_dims(),
        }
    }

    pub fn start(&self) -> Vec<f64> {
        self.genome[self.dims.clone()].to_vec()
    }

    pub fn assemble(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.genome.clone();
        g[self.dims.clone()].copy_from_slice(x);
        g
    }
}

impl<P: GenomeProblem + ?Sized> Objective for LocalView<'_, P> {
    fn bounds(&self) -> Vec<(f64, f64)> {
        self.problem.bounds()[self.dims.clone()].to_vec()
    }

    fn evaluate(&self, x: &[f64]) -> Result<CostBreakdown> {
        self.problem.evaluate(&self.assemble(x))
    }

    fn evaluate_with_gradient(&self, x: &[f64]) -> Result<(CostBreakdown, Vec<f64>)> {
        self.problem.evaluate_with_gradient(&self.assemble(x))
    }
}

/// Coefficients of a fixed basis as the optimization variables.
pub struct CoefficientObjective<'a> {
    pub problem: &'a ProblemDefinition,
    pub basis: BasisSpec,
    pub c_max: f64,
}

impl Objective for CoefficientObjective<'_> {
    fn bounds(&self) -> Vec<(f64, f64)> {
        vec![(-self.c_max, self.c_max); self.basis.size()]
    }

    fn evaluate(&self, x: &[f64]) -> Result<CostBreakdown> {
        cost(x, &self.basis, self.problem)
    }

    fn evaluate_with_gradient(&self, x: &[f64]) -> Result<(CostBreakdown, Vec<f64>)> {
        cost_and_gradient(x, &self.basis, self.problem)
    }
}

/// Genome `(c₁..c_M, r₁..r_M)` of a control problem at a fixed duration.
#[derive(Debug, Clone)]
pub struct ControlGenome {
    pub problem: Arc<ProblemDefinition>,
    pub duration: f64,
    pub basis_size: usize,
    /// Coefficient box `|c_n| ≤ c_max`.
    pub c_max: f64,
    /// Initial coefficients are drawn from `[-c_init, c_init]`.
    pub c_init: f64,
}

impl ControlGenome {
    pub fn new(problem: Arc<ProblemDefinition>, duration: f64, basis_size: usize) -> Self {
        Self {
            problem,
            duration,
            basis_size,
            c_max: 5.0,
            c_init: 1.0,
        }
    }

    pub fn split<'g>(&self, genome: &'g [f64]) -> Result<(&'g [f64], BasisSpec)> {
        let m = self.basis_size;
        if genome.len() != 2 * m {
            return Err(Error::invalid(format!(
                "genome length {} does not match 2M = {}",
                genome.len(),
                2 * m
            )));
        }
        let basis = BasisSpec::new(genome[m..].to_vec(), self.duration)?;
        Ok((&genome[..m], basis))
    }
}

impl GenomeProblem for ControlGenome {
    fn bounds(&self) -> Vec<(f64, f64)> {
        let m = self.basis_size;
        let mut b = vec![(-self.c_max, self.c_max); m];
        b.extend(std::iter::repeat_n((-0.5, 0.5), m));
        b
    }

    fn init_bounds(&self) -> Vec<(f64, f64)> {
        let m = self.basis_size;
        let mut b = vec![(-self.c_init, self.c_init); m];
        b.extend(std::iter::repeat_n((-0.5, 0.5), m));
        b
    }

    fn local_dims(&self) -> Range<usize> {
        0..self.basis_size
    }

    fn evaluate(&self, genome: &[f64]) -> Result<CostBreakdown> {
        let (c, basis) = self.split(genome)?;
        cost(c, &basis, &self.problem)
    }

    fn evaluate_with_gradient(&self, genome: &[f64]) -> Result<(CostBreakdown, Vec<f64>)> {
        let (c, basis) = self.split(genome)?;
        cost_and_gradient(c, &basis, &self.problem)
    }
}

/// Analytic test problems.
pub mod surrogate {
    use super::*;

    /// `½ (x − x*)ᵀ A (x − x*)` inside a box.
    #[derive(Debug, Clone)]
    pub struct Quadratic {
        pub matrix: Vec<Vec<f64>>,
        pub center: Vec<f64>,
        pub bound: f64,
    }

    impl Quadratic {
        pub fn value_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
            let d: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
            let ad: Vec<f64> = self
                .matrix
                .iter()
                .map(|row| row.iter().zip(&d).map(|(a, b)| a * b).sum())
                .collect();
            let v = 0.5 * d.iter().zip(&ad).map(|(a, b)| a * b).sum::<f64>();
            (v, ad)
        }

        /// Symmetric positive definite `A = BᵀB + shift·I` from a
        /// deterministic pseudo-random `B`.
        pub fn random_spd(dim: usize, seed: u64, shift: f64, center: Vec<f64>, bound: f64) -> Self {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let b: Vec<Vec<f64>> = (0..dim)
                .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let matrix = (0..dim)
                .map(|i| {
                    (0..dim)
                        .map(|j| {
                            let s: f64 = (0..dim).map(|k| b[k][i] * b[k][j]).sum();
                            if i == j {
                                s + shift
                            } else {
                                s
                            }
                        })
                        .collect()
                })
                .collect();
            Self {
                matrix,
                center,
                bound,
            }
        }
    }

    impl Objective for Quadratic {
        fn bounds(&self) -> Vec<(f64, f64)> {
            vec![(-self.bound, self.bound); self.center.len()]
        }

        fn evaluate(&self, x: &[f64]) -> Result<CostBreakdown> {
            Ok(CostBreakdown::scalar(self.value_grad(x).0))
        }

        fn evaluate_with_gradient(&self, x: &[f64]) -> Result<(CostBreakdown, Vec<f64>)> {
            let (v, g) = self.value_grad(x);
            Ok((CostBreakdown::scalar(v), g))
        }
    }

    impl GenomeProblem for Quadratic {
        fn bounds(&self) -> Vec<(f64, f64)> {
            Objective::bounds(self)
        }

        fn local_dims(&self) -> Range<usize> {
            0..self.center.len()
        }

        fn evaluate(&self, genome: &[f64]) -> Result<CostBreakdown> {
            Objective::evaluate(self, genome)
        }

        fn evaluate_with_gradient(&self, genome: &[f64]) -> Result<(CostBreakdown, Vec<f64>)> {
            Objective::evaluate_with_gradient(self, genome)
        }
    }

    /// `Σ x_i²` on `[-bound, bound]^dim`.
    #[derive(Debug, Clone, Copy)]
    pub struct Sphere {
        pub dim: usize,
        pub bound: f64,
    }

    impl GenomeProblem for Sphere {
        fn bounds(&self) -> Vec<(f64, f64)> {
            vec![(-self.bound, self.bound); self.dim]
        }

        fn local_dims(&self) -> Range<usize> {
            0..self.dim
        }

        fn evaluate(&self, genome: &[f64]) -> Result<CostBreakdown> {
            Ok(CostBreakdown::scalar(genome.iter().map(|x| x * x).sum()))
        }

        fn evaluate_with_gradient(&self, genome: &[f64]) -> Result<(CostBreakdown, Vec<f64>)> {
            let v = genome.iter().map(|x| x * x).sum();
            Ok((CostBreakdown::scalar(v), genome.iter().map(|x| 2.0 * x).collect()))
        }
    }

    /// Rastrigin function: many local minima, global minimum 0 at the origin.
    #[derive(Debug, Clone, Copy)]
    pub struct Rastrigin {
        pub dim: usize,
        pub bound: f64,
    }

    impl GenomeProblem for Rastrigin {
        fn bounds(&self) -> Vec<(f64, f64)> {
            vec![(-self.bound, self.bound); self.dim]
        }

        fn local_dims(&self) -> Range<usize> {
            0..self.dim
        }

        fn evaluate(&self, genome: &[f64]) -> Result<CostBreakdown> {
            Ok(self.evaluate_with_gradient(genome)?.0)
        }

        fn evaluate_with_gradient(&self, genome: &[f64]) -> Result<(CostBreakdown, Vec<f64>)> {
            use std::f64::consts::PI;
            let v = 10.0 * genome.len() as f64
                + genome
                    .iter()
                    .map(|x| x * x - 10.0 * (2.0 * PI * x).cos())
                    .sum::<f64>();
            let g = genome
                .iter()
                .map(|x| 2.0 * x + 20.0 * PI * (2.0 * PI * x).sin())
                .collect();
            Ok((CostBreakdown::scalar(v), g))
        }
    }
}
