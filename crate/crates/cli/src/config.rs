//! Run configuration: one TOML file, with command-line overrides applied on top.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use glocal::hybrid::HybridConfig;
use glocal::local::LocalOptConfig;
use glocal::problems::{ProblemKind, ProblemOverrides};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Hybrid,
    Multistart,
    SingleLocal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemKind,
    /// Process durations in milliseconds.
    pub durations_ms: Vec<f64>,
    pub basis_size: usize,
    pub output_dir: PathBuf,
    pub master_seed: u64,
    pub mode: Mode,
    /// Coefficient box `|c_n| ≤ c_max`.
    pub c_max: f64,
    /// Initial coefficients are drawn from `[-c_init, c_init]`.
    pub c_init: f64,
    pub hybrid: HybridConfig,
    /// Local optimizer settings for multistart and single-local runs.
    pub local: LocalOptConfig,
    /// Evaluation budget of a multistart run; `None` matches the hybrid.
    pub multistart_evals: Option<usize>,
    /// Warm-start each duration from the previous duration's best genome.
    pub chain: bool,
    pub grid: ProblemOverrides,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemKind::Cs,
            durations_ms: vec![1.0],
            basis_size: 12,
            output_dir: PathBuf::from("out"),
            master_seed: 1,
            mode: Mode::Hybrid,
            c_max: 5.0,
            c_init: 1.0,
            hybrid: HybridConfig::default(),
            local: LocalOptConfig::default(),
            multistart_evals: None,
            chain: false,
            grid: ProblemOverrides::default(),
        }
    }
}

/// Metadata written next to every data file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metadata {
    pub config: RunConfig,
    pub config_hash: String,
    pub master_seed: u64,
    pub crate_version: String,
    pub git_revision: String,
    /// Free-form description of the file the sidecar belongs to.
    pub content: String,
}

impl Metadata {
    pub fn new(config: &RunConfig, content: impl Into<String>) -> Self {
        Self {
            config: config.clone(),
            config_hash: config.hash(),
            master_seed: config.master_seed,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            git_revision: git_revision(),
            content: content.into(),
        }
    }
}

fn git_revision() -> String {
    std::process::Command::new("git")
        .args(["rev-parse", "HEAD"])
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .unwrap_or_else(|| "unknown".to_string())
}

impl RunConfig {
    /// Reads a TOML config, or the `config` entry of a JSON metadata sidecar.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Self = if path.extension().is_some_and(|e| e == "json") {
            let meta: Metadata = serde_json::from_str(&text)
                .with_context(|| format!("parsing metadata {}", path.display()))?;
            meta.config
        } else {
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.durations_ms.is_empty() {
            bail!("no durations given");
        }
        if let Some(t) = self.durations_ms.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            bail!("durations must be positive, got {t}");
        }
        if self.basis_size == 0 {
            bail!("basis size must be positive");
        }
        if !(self.c_max > 0.0 && self.c_init > 0.0 && self.c_init <= self.c_max) {
            bail!("need 0 < c_init <= c_max");
        }
        self.hybrid.validate()?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, as hex.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn seeded(&self) -> HybridConfig {
        HybridConfig {
            master_seed: self.master_seed,
            ..self.hybrid.clone()
        }
    }
}
