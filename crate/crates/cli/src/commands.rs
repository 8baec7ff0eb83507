//! File-level subcommands: read artifacts from the output directory, run a
//! pipeline stage, write its artifacts back.

use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::io::{self, SweepRow};
use crate::pipeline::{self, MetricsFile, ReconstructionFile};

/// Options shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Common {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Common {
    fn apply_seed(&self, mut cfg: ExperimentConfig) -> ExperimentConfig {
        if let Some(s) = self.seed {
            cfg.run.seed = s;
        }
        cfg
    }

    /// Config from `--config`, required for stages that start a run.
    fn required_config(&self) -> Result<ExperimentConfig> {
        let path = self
            .config
            .as_ref()
            .ok_or_else(|| CliError::Schema("--config is required".into()))?;
        Ok(self.apply_seed(ExperimentConfig::load(path)?))
    }

    fn out_dir(&self, cfg: Option<&ExperimentConfig>) -> PathBuf {
        self.out
            .clone()
            .or_else(|| cfg.and_then(|c| c.run.output_dir.clone()))
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Counts rows and the config that governs them: `--config` if given,
    /// otherwise the echo embedded in the counts file.
    fn counts(&self, dir: &Path) -> Result<(ExperimentConfig, Vec<hyperent::counts::CountRecord>)> {
        let text = io::read_text(&dir.join(io::COUNTS_FILE))?;
        let cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => io::echoed_config(&text)?,
        };
        Ok((self.apply_seed(cfg), io::parse_counts(&text)?))
    }
}

fn optional_sweep(dir: &Path) -> Result<Option<Vec<SweepRow>>> {
    let path = dir.join(io::SWEEP_FILE);
    if !path.exists() {
        return Ok(None);
    }
    Ok(Some(io::parse_sweep(&io::read_text(&path)?)?))
}

/// Artifact directory for stages that read earlier outputs.
fn resolve_dir(common: &Common) -> Result<PathBuf> {
    let cfg = match &common.config {
        Some(p) if common.out.is_none() => Some(ExperimentConfig::load(p)?),
        _ => None,
    };
    Ok(common.out_dir(cfg.as_ref()))
}

pub fn simulate(common: &Common) -> Result<PathBuf> {
    let cfg = common.required_config()?;
    cfg.resolve()?;
    let dir = common.out_dir(Some(&cfg));
    let rows = pipeline::simulate(&cfg)?;
    io::write_text(&dir.join(io::COUNTS_FILE), &io::counts_csv(&cfg, &rows))?;
    if cfg.measurement.sweep.is_some() {
        let sweep = pipeline::sweep(&cfg)?;
        io::write_text(&dir.join(io::SWEEP_FILE), &io::sweep_csv(&cfg, &sweep))?;
    }
    Ok(dir)
}

pub fn sweep(common: &Common) -> Result<PathBuf> {
    let cfg = common.required_config()?;
    let dir = common.out_dir(Some(&cfg));
    let rows = pipeline::sweep(&cfg)?;
    io::write_text(&dir.join(io::SWEEP_FILE), &io::sweep_csv(&cfg, &rows))?;
    #[derive(serde::Serialize)]
    struct Fits {
        config: String,
        fringes: Vec<pipeline::DofFringe>,
    }
    let fits = Fits {
        config: cfg.to_toml(),
        fringes: pipeline::fit_fringes(&rows)?,
    };
    io::write_text(&dir.join(io::VISIBILITY_FILE), &io::json_text(&fits))?;
    Ok(dir)
}

pub fn tomo(common: &Common) -> Result<PathBuf> {
    let dir = resolve_dir(common)?;
    let (cfg, rows) = common.counts(&dir)?;
    let data = pipeline::organize(&cfg, &rows)?;
    let recon = pipeline::reconstruct(&cfg, &data)?;
    io::write_text(&dir.join(io::RECONSTRUCTION_FILE), &io::json_text(&recon))?;
    Ok(dir)
}

pub fn metrics(common: &Common) -> Result<PathBuf> {
    let dir = resolve_dir(common)?;
    let (cfg, rows) = common.counts(&dir)?;
    let data = pipeline::organize(&cfg, &rows)?;
    let recon: ReconstructionFile = io::read_json(&dir.join(io::RECONSTRUCTION_FILE))?;
    let sweep = optional_sweep(&dir)?;
    let m = pipeline::compute_metrics(&cfg, &data, &recon, sweep.as_deref())?;
    io::write_text(&dir.join(io::METRICS_FILE), &io::json_text(&m))?;
    Ok(dir)
}

pub fn report(common: &Common) -> Result<PathBuf> {
    let dir = resolve_dir(common)?;
    let (cfg, _) = common.counts(&dir)?;
    let recon: ReconstructionFile = io::read_json(&dir.join(io::RECONSTRUCTION_FILE))?;
    let m: MetricsFile = io::read_json(&dir.join(io::METRICS_FILE))?;
    let sweep = optional_sweep(&dir)?;
    for (name, text) in pipeline::report(&cfg, &recon, &m, sweep.as_deref())? {
        io::write_text(&dir.join(name), &text)?;
    }
    Ok(dir)
}
