//! CSV data files with JSON metadata sidecars, written atomically.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use glocal::cost::evaluate;
use glocal::hybrid::GenerationRecord;
use glocal::objective::ControlGenome;
use serde::Serialize;

use crate::config::Metadata;
use crate::run::SweepRecord;

/// Writes through a temporary file in the target directory, then renames.
pub fn atomic_write(path: &Path, write: impl FnOnce(&mut dyn Write) -> anyhow::Result<()>) -> anyhow::Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temporary file in {}", dir.display()))?;
    write(tmp.as_file_mut())?;
    tmp.as_file_mut().flush()?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    atomic_write(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

fn write_csv<R: Serialize>(path: &Path, rows: impl IntoIterator<Item = R>) -> anyhow::Result<()> {
    atomic_write(path, |w| {
        let mut csv = csv::Writer::from_writer(w);
        for row in rows {
            csv.serialize(row)?;
        }
        csv.flush()?;
        Ok(())
    })
}

/// `data.csv` → `data.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct LearningRow {
    pub generation: usize,
    pub best: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub local_opt_count: usize,
    pub cumulative_evals: usize,
}

/// Per-generation cost quantiles of a hybrid run.
pub fn export_learning(records: &[GenerationRecord], path: &Path, meta: &Metadata) -> anyhow::Result<()> {
    if records.is_empty() {
        bail!("no generation records to export to {}", path.display());
    }
    if let Some(w) = records.windows(2).find(|w| w[1].median_cost > w[0].median_cost) {
        bail!(
            "median cost increased from generation {} to {}",
            w[0].generation,
            w[1].generation
        );
    }
    let rows = records.iter().map(|r| LearningRow {
        generation: r.generation,
        best: r.best_cost,
        q25: r.q25,
        median: r.median_cost,
        q75: r.q75,
        local_opt_count: r.local_opt_count,
        cumulative_evals: r.cost_evals_cumulative,
    });
    write_csv(path, rows)?;
    write_json(&sidecar_path(path), meta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct ControlRow {
    pub t_ms: f64,
    pub u: f64,
    pub v: f64,
    pub mean_x: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct DensityRow {
    pub t_ms: f64,
    pub x: f64,
    pub density: f64,
}

/// The commanded control `u`, the control `v` seen by the atoms, `⟨x⟩` and
/// `snapshots` density profiles along the propagation of `genome`.
///
/// Writes `<stem>.csv`, `<stem>_density.csv` and a sidecar.
pub fn export_control(
    genome_problem: &ControlGenome,
    genome: &[f64],
    path: &Path,
    snapshots: usize,
    meta: &Metadata,
) -> anyhow::Result<Vec<ControlRow>> {
    let (c, basis) = genome_problem.split(genome)?;
    let problem = &genome_problem.problem;
    let eval = evaluate(c, &basis, problem, true)?;
    let mean_x = eval.trajectory.mean_positions();
    let to_ms = |t: f64| problem.units.internal_to_ms(t);
    let dt = eval.u.dt;
    let rows: Vec<ControlRow> = (0..eval.u.u.len())
        .map(|j| ControlRow {
            t_ms: to_ms(j as f64 * dt),
            u: eval.u.u[j],
            v: eval.v.u[j],
            mean_x: mean_x[j],
        })
        .collect();
    write_csv(path, rows.iter())?;

    let n = eval.trajectory.n_steps();
    let picks: Vec<usize> = match snapshots {
        0 => Vec::new(),
        1 => vec![n],
        k => (0..k).map(|i| (i * n) / (k - 1)).collect(),
    };
    let x = problem.grid.x();
    let mut density = Vec::new();
    for j in picks {
        let psi = eval.trajectory.state(j).context("trajectory state missing")?;
        for (d, &xi) in psi.density().iter().zip(x) {
            density.push(DensityRow {
                t_ms: to_ms(j as f64 * dt),
                x: problem.units.length_to_physical(xi) * 1e6,
                density: *d,
            });
        }
    }
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("control");
    write_csv(&path.with_file_name(format!("{stem}_density.csv")), density)?;
    write_json(&sidecar_path(path), meta)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct SweepRow {
    pub mode: String,
    pub duration_ms: f64,
    pub best_infidelity: Option<f64>,
    pub best_cost: Option<f64>,
    pub evals: usize,
    pub generations: usize,
    pub wall_time_s: f64,
    pub config_hash: String,
    pub error: Option<String>,
}

impl From<&SweepRecord> for SweepRow {
    fn from(r: &SweepRecord) -> Self {
        Self {
            mode: serde_json::to_value(r.mode)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default(),
            duration_ms: r.duration_ms,
            best_infidelity: r.best_infidelity,
            best_cost: r.best_cost,
            evals: r.evals,
            generations: r.generations,
            wall_time_s: r.wall_time_s,
            config_hash: r.config_hash.clone(),
            error: r.error.clone(),
        }
    }
}

/// Summary table `<path>` plus the full records (with genomes) as
/// `<stem>_records.json` and the sidecar.
pub fn export_sweep(records: &[SweepRecord], path: &Path, meta: &Metadata) -> anyhow::Result<()> {
    write_csv(path, records.iter().map(SweepRow::from))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("sweep");
    write_json(&path.with_file_name(format!("{stem}_records.json")), &records)?;
    write_json(&sidecar_path(path), meta)
}

pub fn read_records(path: &Path) -> anyhow::Result<Vec<SweepRecord>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn read_csv<R: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<Vec<R>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(rdr.deserialize().collect::<Result<_, _>>()?)
}
