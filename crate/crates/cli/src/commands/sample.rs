use std::path::PathBuf;

use clap::Args;
use powermap::features::write_points_csv;
use powermap::power::ParameterPoint;
use powermap::rng::RngStream;
use powermap::sampler::{p_sampler, SamplerConfig};
use serde::{Deserialize, Serialize};

use super::SAMPLE_TAG;
use crate::config::Config;
use crate::error::{runtime, CliResult};
use crate::io::{manifest_path, write_json, write_text};

#[derive(Debug, Clone, Default, Args)]
pub struct SampleArgs {
    /// Points CSV to write [default: <output_dir>/points.csv].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointsManifest {
    pub sampler: SamplerConfig,
    pub seed: u64,
    pub k: usize,
    pub rows: usize,
    pub config_hash: String,
}

pub fn sample_points(cfg: &Config) -> CliResult<Vec<ParameterPoint>> {
    let sampler = cfg.sampler_config()?;
    p_sampler(&sampler, &RngStream::with_path(cfg.seed, &[SAMPLE_TAG])).map_err(runtime)
}

pub fn run(cfg: &Config, args: &SampleArgs) -> CliResult<()> {
    let sampler = cfg.sampler_config()?;
    let points = sample_points(cfg)?;
    let out = cfg.output_path(args.out.as_deref(), "points.csv");
    write_text(&out, &write_points_csv(sampler.k(), &points))?;
    let manifest = PointsManifest { k: sampler.k(), sampler, seed: cfg.seed, rows: points.len(), config_hash: cfg.hash() };
    write_json(&manifest_path(&out), &manifest)?;
    crate::say(format_args!("sample: {} points -> {}", points.len(), out.display()));
    Ok(())
}
