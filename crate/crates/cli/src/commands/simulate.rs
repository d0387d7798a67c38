use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use powermap::features::{
    base_features, parse_points_csv, pca_fit, write_dataset_csv, DatasetManifest, DatasetRow, FeatureSchema,
};
use powermap::power::{ParameterPoint, PowerEngine, SimulationSpec};
use serde::Serialize;

use crate::config::Config;
use crate::error::{runtime, CliResult};
use crate::io::{manifest_path, read_text, sha256_hex, sibling, write_json, write_text};

#[derive(Debug, Clone, Default, Args)]
pub struct SimulateArgs {
    /// Points CSV to read [default: <output_dir>/points.csv].
    #[arg(long)]
    pub points: Option<PathBuf>,
    /// Dataset CSV to write [default: <output_dir>/dataset.csv].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Simulate at most this many new rows, then stop with the partial file kept.
    #[arg(long)]
    pub limit: Option<usize>,
}

const PARTIAL_MAGIC: &str = "# powermap partial";

#[derive(Serialize)]
struct Fingerprint<'a> {
    spec: &'a SimulationSpec,
    seed: u64,
    points: String,
}

/// Rows already simulated for this exact job, up to the last complete line.
fn read_partial(path: &Path, fingerprint: &str, points: &[ParameterPoint]) -> Vec<DatasetRow> {
    let Ok(text) = fs::read_to_string(path) else {
        return Vec::new();
    };
    let mut lines = text.split_inclusive('\n');
    if lines.next().map(str::trim_end) != Some(&format!("{PARTIAL_MAGIC} {fingerprint}")) {
        return Vec::new();
    }
    let _header = lines.next();
    let mut rows = Vec::new();
    for line in lines {
        let Some(line) = line.strip_suffix('\n') else { break };
        let Some(point) = points.get(rows.len()) else { break };
        let fields: Vec<&str> = line.split(',').collect();
        let Some(power) = fields.last().and_then(|f| f.parse::<f64>().ok()) else { break };
        // the stored point must be the one at this position
        if fields.len() != point.beta.len() + 2 || fields[point.beta.len()] != point.n.to_string() {
            break;
        }
        let beta_ok = fields.iter().zip(&point.beta).all(|(f, b)| f.parse::<f64>().ok() == Some(*b));
        if !beta_ok || !(0.0..=1.0).contains(&power) {
            break;
        }
        rows.push(DatasetRow { point: point.clone(), power });
    }
    rows
}

fn partial_line(row: &DatasetRow) -> String {
    let mut s: String = row.point.beta.iter().map(|b| format!("{b},")).collect();
    s.push_str(&format!("{},{}\n", row.point.n, row.power));
    s
}

/// Outcome of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub enum SimulateStatus {
    Complete { rows: usize, resumed: usize },
    Partial { done: usize, total: usize },
}

pub fn run(cfg: &Config, args: &SimulateArgs) -> CliResult<()> {
    let status = simulate_file(cfg, args)?;
    match status {
        SimulateStatus::Complete { rows, resumed } => {
            crate::say(format_args!("simulate: {rows} rows ({resumed} resumed)"));
        }
        SimulateStatus::Partial { done, total } => {
            crate::say(format_args!("simulate: stopped at {done}/{total} rows; rerun to resume"));
        }
    }
    Ok(())
}

pub fn simulate_file(cfg: &Config, args: &SimulateArgs) -> CliResult<SimulateStatus> {
    let spec = cfg.simulation_spec()?;
    let points_path = cfg.output_path(args.points.as_deref(), "points.csv");
    let out = cfg.output_path(args.out.as_deref(), "dataset.csv");
    let points_text = read_text(&points_path)?;
    let points = parse_points_csv(&points_text).map_err(|e| runtime(format!("{}: {e}", points_path.display())))?;
    let k = spec.design.k();
    if points.is_empty() {
        return Err(runtime(format!("{} holds no points", points_path.display())));
    }
    if let Some(p) = points.iter().find(|p| p.beta.len() != k) {
        return Err(runtime(format!("points have {} coefficients, the design has {k}", p.beta.len())));
    }
    let engine = PowerEngine::new(spec.clone(), cfg.seed)?.with_execution(cfg.simulate.execution);

    let fp = Fingerprint { spec: &spec, seed: cfg.seed, points: sha256_hex(points_text.as_bytes()) };
    let fingerprint = sha256_hex(serde_json::to_string(&fp)?.as_bytes());
    let partial = sibling(&out, ".partial");
    let mut rows = read_partial(&partial, &fingerprint, &points);
    let resumed = rows.len();

    // rewrite so a torn trailing line is dropped
    let mut text = format!("{PARTIAL_MAGIC} {fingerprint}\n");
    text.push_str(&(1..=k).map(|i| format!("beta_{i},")).collect::<String>());
    text.push_str("N,power\n");
    for r in &rows {
        text.push_str(&partial_line(r));
    }
    write_text(&partial, &text)?;
    let mut file = OpenOptions::new().append(true).open(&partial).map_err(runtime)?;

    let stop = rows.len().saturating_add(args.limit.unwrap_or(usize::MAX)).min(points.len());
    while rows.len() < stop {
        let start = rows.len();
        let end = (start + cfg.simulate.chunk).min(stop);
        let records = engine.generate_training_data_from(&points[start..end], start as u64)?;
        let mut chunk = String::new();
        for rec in records {
            let row = DatasetRow { point: rec.point, power: rec.power };
            chunk.push_str(&partial_line(&row));
            rows.push(row);
        }
        file.write_all(chunk.as_bytes()).and_then(|()| file.sync_data()).map_err(runtime)?;
    }
    drop(file);
    if rows.len() < points.len() {
        return Ok(SimulateStatus::Partial { done: rows.len(), total: points.len() });
    }

    let compute_calls = resumed as u64 + engine.calls();
    debug_assert_eq!(compute_calls, rows.len() as u64);
    let base: Vec<Vec<f64>> = rows.iter().map(|r| base_features(&r.point)).collect();
    let pca = pca_fit(&base, cfg.train.variance_target)?;
    let schema = FeatureSchema::new(k, pca.n_components());
    write_text(&out, &write_dataset_csv(k, &rows, &pca)?)?;
    let manifest = DatasetManifest {
        simulation: spec,
        seed: cfg.seed,
        rows: rows.len(),
        compute_calls,
        pca,
        feature_schema: schema,
        feature_width: schema.width(),
    };
    write_json(&manifest_path(&out), &manifest)?;
    fs::remove_file(&partial).map_err(runtime)?;
    Ok(SimulateStatus::Complete { rows: rows.len(), resumed })
}
