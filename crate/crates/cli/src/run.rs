//! Sweeps over process durations in hybrid, multistart and single-local mode.

use std::sync::Arc;
use std::time::Instant;

use glocal::de::{initial_genome, Member};
use glocal::hybrid::{self, GenerationRecord};
use glocal::local::group_optimize;
use glocal::objective::{ControlGenome, LocalView};
use glocal::problems::{build_problem, ProblemDefinition};
use serde::{Deserialize, Serialize};

use crate::config::{Mode, RunConfig};

/// Outcome of one duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub mode: Mode,
    pub duration_ms: f64,
    /// `1 − F` of the best member; absent when the run failed.
    pub best_infidelity: Option<f64>,
    pub best_cost: Option<f64>,
    /// `(c₁..c_M, r₁..r_M)`.
    pub genome: Vec<f64>,
    pub evals: usize,
    pub generations: usize,
    pub wall_time_s: f64,
    pub config_hash: String,
    pub error: Option<String>,
}

/// A finished duration: its record plus learning curve (hybrid only).
#[derive(Debug, Clone)]
pub struct PointResult {
    pub record: SweepRecord,
    pub learning: Vec<GenerationRecord>,
}

pub fn genome_problem(cfg: &RunConfig, problem: &Arc<ProblemDefinition>, ms: f64) -> ControlGenome {
    ControlGenome {
        c_max: cfg.c_max,
        c_init: cfg.c_init,
        ..ControlGenome::new(problem.clone(), problem.duration_from_ms(ms), cfg.basis_size)
    }
}

fn record(cfg: &RunConfig, mode: Mode, ms: f64, best: &Member, evals: usize, generations: usize, start: Instant) -> SweepRecord {
    SweepRecord {
        mode,
        duration_ms: ms,
        best_infidelity: Some(best.cost.infidelity()),
        best_cost: Some(best.cost.total),
        genome: best.genome.clone(),
        evals,
        generations,
        wall_time_s: start.elapsed().as_secs_f64(),
        config_hash: cfg.hash(),
        error: None,
    }
}

fn failed(cfg: &RunConfig, mode: Mode, ms: f64, err: &anyhow::Error, start: Instant) -> PointResult {
    log::error!("{mode:?} run at T = {ms} ms failed: {err:#}");
    PointResult {
        record: SweepRecord {
            mode,
            duration_ms: ms,
            best_infidelity: None,
            best_cost: None,
            genome: Vec::new(),
            evals: 0,
            generations: 0,
            wall_time_s: start.elapsed().as_secs_f64(),
            config_hash: cfg.hash(),
            error: Some(format!("{err:#}")),
        },
        learning: Vec::new(),
    }
}

pub fn run_hybrid(cfg: &RunConfig, problem: &Arc<ProblemDefinition>, ms: f64) -> anyhow::Result<PointResult> {
    let start = Instant::now();
    let g = genome_problem(cfg, problem, ms);
    let res = hybrid::run(&g, &cfg.seeded())?;
    Ok(PointResult {
        record: record(cfg, Mode::Hybrid, ms, &res.best, res.evals, res.records.len() - 1, start),
        learning: res.records,
    })
}

pub fn run_multistart(
    cfg: &RunConfig,
    problem: &Arc<ProblemDefinition>,
    ms: f64,
    budget: usize,
) -> anyhow::Result<PointResult> {
    let start = Instant::now();
    let g = genome_problem(cfg, problem, ms);
    let res = hybrid::multistart(&g, cfg.hybrid.de.population_size, cfg.master_seed, &cfg.local, budget)?;
    Ok(PointResult {
        record: record(cfg, Mode::Multistart, ms, &res.best, res.evals, 0, start),
        learning: Vec::new(),
    })
}

/// One local optimization from the first initial-population member, or
/// from `warm` when given.
pub fn run_single_local(
    cfg: &RunConfig,
    problem: &Arc<ProblemDefinition>,
    ms: f64,
    warm: Option<&[f64]>,
) -> anyhow::Result<PointResult> {
    let start = Instant::now();
    let g = genome_problem(cfg, problem, ms);
    let genome = warm.map_or_else(|| initial_genome(&g, cfg.master_seed, 0), <[f64]>::to_vec);
    let view = LocalView::new(&g, &genome);
    let res = group_optimize(&view.start(), &view, &cfg.local)?;
    let best = Member {
        genome: view.assemble(&res.best_coeffs),
        cost: res.best_cost,
        stream: 0,
    };
    Ok(PointResult {
        record: record(cfg, Mode::SingleLocal, ms, &best, res.evals, 0, start),
        learning: Vec::new(),
    })
}

/// Runs the configured mode at every duration. Per-duration failures are
/// recorded and the sweep continues.
pub fn sweep_f_of_t(cfg: &RunConfig) -> anyhow::Result<Vec<PointResult>> {
    cfg.validate()?;
    let problem = Arc::new(build_problem(cfg.problem, &cfg.grid)?);
    let mut out: Vec<PointResult> = Vec::new();
    for &ms in &cfg.durations_ms {
        let start = Instant::now();
        let warm = cfg
            .chain
            .then(|| out.last().map(|p| p.record.genome.clone()))
            .flatten()
            .filter(|g| !g.is_empty());
        let res = match cfg.mode {
            Mode::Hybrid => run_hybrid(cfg, &problem, ms),
            Mode::SingleLocal => run_single_local(cfg, &problem, ms, warm.as_deref()),
            Mode::Multistart => {
                let budget = cfg
                    .multistart_evals
                    .unwrap_or(cfg.hybrid.max_evals.unwrap_or(usize::MAX));
                run_multistart(cfg, &problem, ms, budget)
            }
        };
        let point = res.unwrap_or_else(|e| failed(cfg, cfg.mode, ms, &e, start));
        log::info!(
            "T = {ms} ms: infidelity {:?} after {} evals",
            point.record.best_infidelity,
            point.record.evals
        );
        out.push(point);
    }
    Ok(out)
}

/// Hybrid and multistart at every duration on matched evaluation budgets:
/// the multistart gets `multistart_evals` or, by default, exactly the
/// evaluations the hybrid used.
pub fn multistart_baseline(cfg: &RunConfig) -> anyhow::Result<Vec<(PointResult, PointResult)>> {
    cfg.validate()?;
    let problem = Arc::new(build_problem(cfg.problem, &cfg.grid)?);
    let mut out = Vec::new();
    for &ms in &cfg.durations_ms {
        let start = Instant::now();
        let h = run_hybrid(cfg, &problem, ms).unwrap_or_else(|e| failed(cfg, Mode::Hybrid, ms, &e, start));
        let budget = cfg.multistart_evals.unwrap_or(h.record.evals);
        let start = Instant::now();
        let m = run_multistart(cfg, &problem, ms, budget)
            .unwrap_or_else(|e| failed(cfg, Mode::Multistart, ms, &e, start));
        out.push((h, m));
    }
    Ok(out)
}
