use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use powermap::baselines::power_cluster;
use powermap::features::{base_features, format_sig10, pca_fit, FeatureSchema};
use powermap::metrics::EvalReport;
use powermap::rng::RngStream;
use serde::Deserialize;

use super::baseline::cluster_csv;
use super::BASELINE_TAG;
use crate::config::{BaselineMethod, Config, PlotKind};
use crate::error::{config_err, runtime, CliResult};
use crate::io::{read_text, write_text, Dataset};
use crate::svg::{category, lines, ramp, scatter, Chart, LineSeries};

#[derive(Debug, Clone, Default, Args)]
pub struct PlotArgs {
    /// Overrides `plot.kind` from the config.
    #[arg(long, value_enum)]
    pub kind: Option<KindArg>,
    /// Dataset CSV for manifold and cluster plots [default: <output_dir>/dataset.csv].
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Report JSON files for trend and cost plots.
    #[arg(long, num_args = 1..)]
    pub reports: Vec<PathBuf>,
    /// SVG to write [default: <output_dir>/<kind>.svg]; the CSV goes alongside.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum KindArg {
    Manifold,
    Cluster,
    Trend,
    Cost,
}

impl From<KindArg> for PlotKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Manifold => PlotKind::Manifold,
            KindArg::Cluster => PlotKind::Cluster,
            KindArg::Trend => PlotKind::Trend,
            KindArg::Cost => PlotKind::Cost,
        }
    }
}

fn kind_name(k: PlotKind) -> &'static str {
    match k {
        PlotKind::Manifold => "manifold",
        PlotKind::Cluster => "cluster",
        PlotKind::Trend => "trend",
        PlotKind::Cost => "cost",
    }
}

/// An SVG with the CSV of exactly the plotted values.
pub struct Plot {
    pub svg: String,
    pub csv: String,
}

/// Power manifold: scaled weight against PC1, coloured by power.
pub fn manifold_plot(cfg: &Config, ds: &Dataset) -> CliResult<Plot> {
    let chart = Chart { title: "Power manifold".into(), x_label: "N sigma".into(), y_label: "PC1".into() };
    let mut csv = String::from("scaled_weight,pc_1,power\n");
    let legend = [("power 0".to_string(), ramp(0.0)), ("power 1".to_string(), ramp(1.0))];
    if ds.rows.is_empty() {
        return Ok(Plot { svg: scatter(&chart, &[], &[], &legend), csv });
    }
    let base: Vec<Vec<f64>> = ds.rows.iter().map(|r| base_features(&r.point)).collect();
    let pca = pca_fit(&base, cfg.train.variance_target)?;
    let sw = FeatureSchema::new(ds.rows[0].point.beta.len(), 0).scaled_weight_index();
    let mut pts = Vec::new();
    let mut colors = Vec::new();
    for (b, r) in base.iter().zip(&ds.rows) {
        let x = b[sw];
        let y = pca.transform_row(b)?[0];
        let _ = writeln!(csv, "{},{},{}", format_sig10(x), format_sig10(y), format_sig10(r.power));
        pts.push((x, y));
        colors.push(ramp(r.power));
    }
    Ok(Plot { svg: scatter(&chart, &pts, &colors, &legend), csv })
}

/// Same axes, coloured by k-means cluster.
pub fn cluster_plot(cfg: &Config, ds: &Dataset) -> CliResult<Plot> {
    let chart = Chart { title: "Power clusters".into(), x_label: "N sigma".into(), y_label: "PC1".into() };
    if ds.rows.is_empty() {
        return Ok(Plot { svg: scatter(&chart, &[], &[], &[]), csv: "scaled_weight,pc_1,cluster,power\n".into() });
    }
    let b = &cfg.baseline;
    let mut rng = RngStream::with_path(cfg.seed, &[BASELINE_TAG, BaselineMethod::Cluster as u64]).generator();
    let pc = power_cluster(&ds.rows, cfg.train.variance_target, b.k_clusters, b.cluster_axes, &mut rng)?;
    let csv = cluster_csv(&pc, &ds.rows)?;
    let sw = FeatureSchema::new(ds.rows[0].point.beta.len(), 0).scaled_weight_index();
    let mut pts = Vec::new();
    for r in &ds.rows {
        let base = base_features(&r.point);
        pts.push((base[sw], pc.pca.transform_row(&base)?[0]));
    }
    let colors: Vec<String> = pc.model.assignments.iter().map(|&c| category(c).to_string()).collect();
    let legend: Vec<(String, String)> = (0..b.k_clusters).map(|c| (format!("cluster {c}"), category(c).to_string())).collect();
    Ok(Plot { svg: scatter(&chart, &pts, &colors, &legend), csv })
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ReportFile {
    One(Box<EvalReport>),
    Many(Vec<EvalReport>),
}

pub fn load_reports(paths: &[PathBuf]) -> CliResult<Vec<EvalReport>> {
    let mut out = Vec::new();
    for p in paths {
        match serde_json::from_str(&read_text(p)?).map_err(|e| runtime(format!("{}: {e}", p.display())))? {
            ReportFile::One(r) => out.push(*r),
            ReportFile::Many(rs) => out.extend(rs),
        }
    }
    Ok(out)
}

/// Metric against training fraction (trend) or simulation calls (cost),
/// one line per predictor.
pub fn report_plot(kind: PlotKind, metric: &str, reports: &[EvalReport]) -> CliResult<Plot> {
    let (x_name, x_label, title) = match kind {
        PlotKind::Trend => ("train_fraction", "training fraction", "Metric by training fraction"),
        PlotKind::Cost => ("compute_calls", "power computations", "Metric by computation cost"),
        _ => unreachable!("report plots are trend or cost"),
    };
    let mut by_predictor: BTreeMap<&str, Vec<(f64, f64, f64, f64)>> = BTreeMap::new();
    for r in reports {
        let e = r.metrics.get(metric).ok_or_else(|| runtime(format!("report for {} has no metric {metric:?}", r.predictor)))?;
        let x = match kind {
            PlotKind::Trend => r.train_rows as f64 / (r.train_rows + r.test_rows).max(1) as f64,
            _ => r.compute_calls as f64,
        };
        by_predictor.entry(&r.predictor).or_default().push((x, e.value, e.ci_low, e.ci_high));
    }
    let mut csv = format!("predictor,{x_name},{metric},ci_low,ci_high\n");
    let mut series = Vec::new();
    for (name, mut pts) in by_predictor {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        for p in &pts {
            let _ = writeln!(csv, "{name},{},{},{},{}", format_sig10(p.0), format_sig10(p.1), format_sig10(p.2), format_sig10(p.3));
        }
        series.push(LineSeries { label: name.to_string(), points: pts });
    }
    let chart = Chart { title: title.into(), x_label: x_label.into(), y_label: metric.into() };
    Ok(Plot { svg: lines(&chart, &series), csv })
}

pub fn run(cfg: &Config, args: &PlotArgs) -> CliResult<()> {
    let kind = args.kind.map_or(cfg.plot.kind, PlotKind::from);
    let plot = match kind {
        PlotKind::Manifold | PlotKind::Cluster => {
            let ds = Dataset::load(&cfg.output_path(args.dataset.as_deref(), "dataset.csv"))?;
            if kind == PlotKind::Manifold {
                manifold_plot(cfg, &ds)?
            } else {
                cluster_plot(cfg, &ds)?
            }
        }
        PlotKind::Trend | PlotKind::Cost => {
            if args.reports.is_empty() {
                return Err(config_err(format!("{} plots need --reports", kind_name(kind))));
            }
            report_plot(kind, &cfg.plot.metric, &load_reports(&args.reports)?)?
        }
    };
    let out = cfg.output_path(args.out.as_deref(), &format!("{}.svg", kind_name(kind)));
    write_text(&out, &plot.svg)?;
    write_text(&out.with_extension("csv"), &plot.csv)?;
    crate::say(format_args!("plot: {} -> {}", kind_name(kind), out.display()));
    Ok(())
}
