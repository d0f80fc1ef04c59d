//! Differential evolution primitives: best/1 donors, consecutive-block
//! crossover with a Poisson block length, the linear scale-factor schedule and
//! strict greedy selection.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::CostBreakdown;
use crate::objective::GenomeProblem;
use crate::rng::{stream, Purpose};
use crate::{Error, Result};

/// How the crossover block-length mean is derived from `cr`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PoissonMode {
    /// Mean `cr · genome length`.
    #[default]
    Scaled,
    /// Mean `cr` itself.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeConfig {
    pub population_size: usize,
    pub f_start: f64,
    pub f_end: f64,
    pub cr: f64,
    /// Length of the scale-factor schedule.
    pub generations_max: usize,
    pub poisson: PoissonMode,
}

impl Default for DeConfig {
    fn default() -> Self {
        Self {
            population_size: 32,
            f_start: 0.4,
            f_end: 0.1,
            cr: 0.97,
            generations_max: 200,
            poisson: PoissonMode::Scaled,
        }
    }
}

impl DeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 4 {
            return Err(Error::invalid("population size must be at least 4"));
        }
        if !(self.f_end > 0.0 && self.f_start >= self.f_end && self.f_start.is_finite()) {
            return Err(Error::invalid("scale factors need F_start >= F_end > 0"));
        }
        if !(self.cr > 0.0 && self.cr.is_finite()) {
            return Err(Error::invalid("crossover mean must be positive"));
        }
        Ok(())
    }

    pub fn block_mean(&self, genome_len: usize) -> f64 {
        match self.poisson {
            PoissonMode::Scaled => self.cr * genome_len as f64,
            PoissonMode::Literal => self.cr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub genome: Vec<f64>,
    /// Cost of exactly this genome.
    pub cost: CostBreakdown,
    /// Index of the member's random stream.
    pub stream: u64,
}

impl Member {
    pub fn total(&self) -> f64 {
        self.cost.total
    }
}

/// Linear schedule from `f_start` at generation 0 to `f_end` at `generations_max`.
pub fn scale_factor(generation: usize, cfg: &DeConfig) -> f64 {
    if cfg.generations_max == 0 {
        return cfg.f_start;
    }
    let s = (generation.min(cfg.generations_max)) as f64 / cfg.generations_max as f64;
    cfg.f_start + (cfg.f_end - cfg.f_start) * s
}

/// `best + F·(a − b)`, clipped to `bounds`.
pub fn donor(best: &[f64], a: &[f64], b: &[f64], f: f64, bounds: &[(f64, f64)]) -> Vec<f64> {
    best.iter()
        .zip(a.iter().zip(b))
        .zip(bounds)
        .map(|((x, (p, q)), &(lo, hi))| (x + f * (p - q)).clamp(lo, hi))
        .collect()
}

/// Donor from population indices; indices must be pairwise distinct.
pub fn donor_from(
    population: &[Member],
    best: usize,
    a: usize,
    b: usize,
    f: f64,
    bounds: &[(f64, f64)],
) -> Result<Vec<f64>> {
    if a == b || a == best || b == best {
        return Err(Error::invalid(format!(
            "donor indices collide: best {best}, a {a}, b {b}"
        )));
    }
    let n = population.len();
    if best >= n || a >= n || b >= n {
        return Err(Error::invalid("donor index out of range"));
    }
    Ok(donor(
        &population[best].genome,
        &population[a].genome,
        &population[b].genome,
        f,
        bounds,
    ))
}

/// Two distinct indices different from `best` and `target` (which may coincide).
pub fn pick_partners(rng: &mut ChaCha8Rng, n: usize, best: usize, target: usize) -> (usize, usize) {
    let excluded = |j: usize| j == best || j == target;
    let free = (0..n).filter(|&j| !excluded(j)).count();
    assert!(free >= 2, "population too small for best/1 donors");
    let nth = |k: usize| (0..n).filter(|&j| !excluded(j)).nth(k).unwrap();
    let i1 = rng.random_range(0..free);
    let mut i2 = rng.random_range(0..free - 1);
    if i2 >= i1 {
        i2 += 1;
    }
    (nth(i1), nth(i2))
}

/// `max(1, Poisson(mean))`.
pub fn draw_block_length(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    let poisson = Poisson::new(mean).expect("positive Poisson mean");
    let l: f64 = poisson.sample(rng);
    (l as usize).max(1)
}

/// Replaces `len` consecutive entries of `target` by `donor`, starting at
/// `start` and wrapping around the end.
pub fn crossover_block(target: &[f64], donor: &[f64], start: usize, len: usize) -> Vec<f64> {
    let n = target.len();
    let mut trial = target.to_vec();
    for k in 0..len.min(n) {
        let i = (start + k) % n;
        trial[i] = donor[i];
    }
    trial
}

pub fn crossover(target: &[f64], donor: &[f64], cfg: &DeConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let len = draw_block_length(rng, cfg.block_mean(target.len()));
    let start = rng.random_range(0..target.len());
    crossover_block(target, donor, start, len)
}

/// Greedy selection: the trial wins only with a strictly lower cost.
pub fn select(current: Member, trial: Member) -> Member {
    if trial.cost.total.is_nan() {
        log::warn!("trial for member {} has NaN cost; keeping current", current.stream);
        return current;
    }
    if trial.cost.total < current.cost.total {
        trial
    } else {
        current
    }
}

/// Cost of a genome, with failures mapped to an infinite cost.
pub fn evaluate_or_fail<P: GenomeProblem + ?Sized>(problem: &P, genome: &[f64]) -> CostBreakdown {
    match problem.evaluate(genome) {
        Ok(c) if !c.total.is_nan() => c,
        Ok(_) => CostBreakdown::failed(),
        Err(e) => {
            log::warn!("cost evaluation failed: {e}");
            CostBreakdown::failed()
        }
    }
}

/// Uniform draw inside `bounds`.
pub fn random_genome(rng: &mut ChaCha8Rng, bounds: &[(f64, f64)]) -> Vec<f64> {
    bounds
        .iter()
        .map(|&(lo, hi)| if hi > lo { rng.random_range(lo..=hi) } else { lo })
        .collect()
}

/// The genome of initial member `member` under `seed`.
pub fn initial_genome<P: GenomeProblem + ?Sized>(problem: &P, seed: u64, member: usize) -> Vec<f64> {
    let mut rng = stream(seed, Purpose::Init, 0, member as u64);
    random_genome(&mut rng, &problem.init_bounds())
}

/// Draws and evaluates `n` initial members (evaluations run in parallel).
pub fn initial_population<P: GenomeProblem + ?Sized>(problem: &P, n: usize, seed: u64) -> Vec<Member> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            let genome = initial_genome(problem, seed, i);
            let cost = evaluate_or_fail(problem, &genome);
            Member {
                genome,
                cost,
                stream: i as u64,
            }
        })
        .collect()
}

/// Index of the lowest-cost member (first on ties).
pub fn best_index(population: &[Member]) -> usize {
    let mut best = 0;
    for (i, m) in population.iter().enumerate() {
        if m.cost.total < population[best].cost.total {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn member(genome: Vec<f64>, cost: f64) -> Member {
        Member {
            genome,
            cost: CostBreakdown::scalar(cost),
            stream: 0,
        }
    }

    #[test]
    fn schedule_endpoints() {
        let cfg = DeConfig {
            generations_max: 100,
            ..Default::default()
        };
        assert_eq!(scale_factor(0, &cfg), 0.4);
        assert!((scale_factor(100, &cfg) - 0.1).abs() < 1e-15);
        assert!((scale_factor(50, &cfg) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn donor_arithmetic() {
        let b = [(-5.0, 5.0); 2];
        assert_eq!(donor(&[1.0, 1.0], &[2.0, 0.0], &[0.0, 2.0], 0.5, &b), vec![2.0, 0.0]);
        assert_eq!(donor(&[1.0, 1.0], &[2.0, 0.0], &[0.0, 2.0], 0.0, &b), vec![1.0, 1.0]);
        assert_eq!(donor(&[1.0, 1.0], &[3.0, 3.0], &[3.0, 3.0], 0.4, &b), vec![1.0, 1.0]);
        // clipping
        let tight = [(-0.5, 0.5); 2];
        assert_eq!(donor(&[0.4, 0.0], &[2.0, 0.0], &[0.0, 0.0], 1.0, &tight), vec![0.5, 0.0]);
    }

    #[test]
    fn donor_rejects_collisions() {
        let pop: Vec<Member> = (0..4).map(|i| member(vec![i as f64], 0.0)).collect();
        let b = [(-9.0, 9.0)];
        assert!(donor_from(&pop, 0, 1, 1, 0.5, &b).is_err());
        assert!(donor_from(&pop, 0, 0, 2, 0.5, &b).is_err());
        assert!(donor_from(&pop, 0, 1, 2, 0.5, &b).is_ok());
    }

    #[test]
    fn crossover_examples() {
        let t = [0.0; 6];
        let d = [1.0; 6];
        assert_eq!(crossover_block(&t, &d, 3, 6), d.to_vec());
        assert_eq!(crossover_block(&t, &d, 2, 100), d.to_vec());
        let one = crossover_block(&t, &d, 0, 1);
        assert_eq!(one.iter().filter(|&&v| v != 0.0).count(), 1);
        assert_eq!(one[0], 1.0);
        let wrap = crossover_block(&t, &d, 5, 2);
        assert_eq!(wrap, vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn block_length_mean_matches_poisson() {
        let mut rng = stream(3, Purpose::Test, 0, 0);
        let n = 100_000;
        for mean in [0.97 * 24.0, 11.0] {
            let total: usize = (0..n).map(|_| draw_block_length(&mut rng, mean)).sum();
            let got = total as f64 / n as f64;
            assert!((got - mean).abs() < 0.02 * mean, "mean {got} vs {mean}");
        }
        // literal mode: mean of max(1, Poisson(0.97)) is 0.97 + P(0) = 0.97 + e^-0.97
        let total: usize = (0..n).map(|_| draw_block_length(&mut rng, 0.97)).sum();
        let expected = 0.97 + (-0.97f64).exp();
        assert!((total as f64 / n as f64 - expected).abs() < 0.02 * expected);
    }

    #[test]
    fn selection_rules() {
        let cur = member(vec![0.0], 0.3);
        assert_eq!(select(cur.clone(), member(vec![1.0], 0.3 - 1e-12)).genome, vec![1.0]);
        assert_eq!(select(cur.clone(), member(vec![1.0], 0.3)).genome, vec![0.0]);
        let nan = Member {
            genome: vec![2.0],
            cost: CostBreakdown {
                infidelity_term: f64::NAN,
                regularization_term: 0.0,
                total: f64::NAN,
            },
            stream: 0,
        };
        assert_eq!(select(cur.clone(), nan).genome, vec![0.0]);
        assert_eq!(select(cur, member(vec![3.0], f64::INFINITY)).genome, vec![0.0]);
    }

    #[test]
    fn config_validation() {
        assert!(DeConfig::default().validate().is_ok());
        let small = DeConfig {
            population_size: 3,
            ..Default::default()
        };
        assert!(small.validate().is_err());
        let inverted = DeConfig {
            f_start: 0.1,
            f_end: 0.4,
            ..Default::default()
        };
        assert!(inverted.validate().is_err());
    }

    proptest! {
        #[test]
        fn partners_are_distinct(seed in any::<u64>(), n in 4usize..40, best in 0usize..40, target in 0usize..40) {
            let (best, target) = (best % n, target % n);
            let mut rng = stream(seed, Purpose::Test, 0, 0);
            let (a, b) = pick_partners(&mut rng, n, best, target);
            prop_assert!(a != b && a != best && b != best && a != target && b != target);
            prop_assert!(a < n && b < n);
        }

        #[test]
        fn trials_respect_bounds(seed in any::<u64>(), f in 0.0f64..2.0) {
            let bounds = vec![(-5.0, 5.0), (-5.0, 5.0), (-0.5, 0.5), (-0.5, 0.5)];
            let mut rng = stream(seed, Purpose::Test, 1, 0);
            let pop: Vec<Vec<f64>> = (0..4).map(|_| random_genome(&mut rng, &bounds)).collect();
            let d = donor(&pop[0], &pop[1], &pop[2], f, &bounds);
            let trial = crossover(&pop[3], &d, &DeConfig::default(), &mut rng);
            for (x, (lo, hi)) in trial.iter().zip(&bounds) {
                prop_assert!(x >= lo && x <= hi);
            }
        }
    }
}
