use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use glocal::problems::{build_problem, ProblemKind};
use glocal_cli::export::{export_control, export_learning, export_sweep, read_records};
use glocal_cli::run::genome_problem;
use glocal_cli::{multistart_baseline, sweep_f_of_t, Metadata, Mode, RunConfig, SweepRecord};

#[derive(Parser)]
#[command(name = "glocal", version, about = "Global-local optimal control of 1D condensates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Best fidelity as a function of duration, in the configured mode.
    Sweep(Common),
    /// Hybrid against multistart on matched evaluation budgets.
    Multistart(Common),
    /// One local optimization per duration.
    Single(Common),
    /// Control traces and density snapshots for saved sweep records.
    Export {
        #[command(flatten)]
        common: Common,
        /// `*_records.json` written by a sweep.
        #[arg(long)]
        records: PathBuf,
        #[arg(long, default_value_t = 41)]
        snapshots: usize,
    },
}

#[derive(Args)]
struct Common {
    /// TOML config, or a JSON sidecar to replay a run.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<ProblemKind>,
    /// Durations in milliseconds.
    #[arg(long, value_delimiter = ',')]
    durations: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Cost-evaluation budget of the hybrid (and the matched multistart).
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(p) = self.problem {
            cfg.problem = p;
        }
        if let Some(d) = &self.durations {
            cfg.durations_ms = d.clone();
        }
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(b) = self.budget {
            cfg.hybrid.max_evals = Some(b);
        }
        if let Some(g) = self.generations {
            cfg.hybrid.max_generations = g;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn tag(ms: f64) -> String {
    format!("T{ms}ms")
}

fn sweep(cfg: &RunConfig, name: &str) -> anyhow::Result<()> {
    let points = sweep_f_of_t(cfg)?;
    let dir = &cfg.output_dir;
    for p in points.iter().filter(|p| !p.learning.is_empty()) {
        let path = dir.join(format!("learning_{}.csv", tag(p.record.duration_ms)));
        export_learning(&p.learning, &path, &Metadata::new(cfg, "per-generation cost quantiles"))?;
    }
    let records: Vec<SweepRecord> = points.into_iter().map(|p| p.record).collect();
    export_sweep(&records, &dir.join(format!("{name}.csv")), &Metadata::new(cfg, "best result per duration"))?;
    report(&records);
    Ok(())
}

fn report(records: &[SweepRecord]) {
    for r in records {
        match (r.best_infidelity, &r.error) {
            (Some(inf), _) => println!("{:?} T = {} ms: infidelity {inf:.4e} ({} evals)", r.mode, r.duration_ms, r.evals),
            (None, Some(e)) => println!("{:?} T = {} ms: failed: {e}", r.mode, r.duration_ms),
            _ => {}
        }
    }
}

fn export(cfg: &RunConfig, records: &Path, snapshots: usize) -> anyhow::Result<()> {
    let problem = Arc::new(build_problem(cfg.problem, &cfg.grid)?);
    for r in read_records(records)?.iter().filter(|r| !r.genome.is_empty()) {
        let g = genome_problem(cfg, &problem, r.duration_ms);
        let path = cfg.output_dir.join(format!("control_{}.csv", tag(r.duration_ms)));
        export_control(&g, &r.genome, &path, snapshots, &Metadata::new(cfg, "optimized control trace"))
            .with_context(|| format!("exporting T = {} ms", r.duration_ms))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Sweep(c) => sweep(&c.resolve()?, "sweep"),
        Command::Single(c) => {
            let cfg = RunConfig {
                mode: Mode::SingleLocal,
                ..c.resolve()?
            };
            sweep(&cfg, "single")
        }
        Command::Multistart(c) => {
            let cfg = c.resolve()?;
            let pairs = multistart_baseline(&cfg)?;
            let dir = &cfg.output_dir;
            let mut records = Vec::new();
            for (h, m) in pairs {
                let path = dir.join(format!("learning_{}.csv", tag(h.record.duration_ms)));
                if !h.learning.is_empty() {
                    export_learning(&h.learning, &path, &Metadata::new(&cfg, "per-generation cost quantiles"))?;
                }
                records.push(h.record);
                records.push(m.record);
            }
            export_sweep(&records, &dir.join("multistart.csv"), &Metadata::new(&cfg, "hybrid and multistart per duration"))?;
            report(&records);
            Ok(())
        }
        Command::Export { common, records, snapshots } => export(&common.resolve()?, &records, snapshots),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        let msg = serde_json::json!({
            "error": format!("{e:#}"),
            "chain": e.chain().map(|c| c.to_string()).collect::<Vec<_>>(),
        });
        eprintln!("{msg}");
        std::process::exit(1);
    }
}
