use std::path::PathBuf;

use clap::Args;
use powermap::baselines::{
    cluster_class_map, kneighbors_classify, label_propagation, p_rand, power_cluster, PowerClustering,
    PropagationConfig, Standardizer,
};
use powermap::features::{base_features, classify_power, featurize_split, format_sig10, DatasetRow, FeatureSchema};
use powermap::metrics::{EvalReport, TaskKind};
use powermap::rng::RngStream;

use super::train::{config_split, print_metrics};
use super::{eval_rng, score_labels, ReportContext, BASELINE_TAG};
use crate::config::{BaselineMethod, Config};
use crate::error::CliResult;
use crate::io::{write_json, write_text, Dataset};

#[derive(Debug, Clone, Default, Args)]
pub struct BaselineArgs {
    /// Dataset CSV [default: <output_dir>/dataset.csv].
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Report JSON (one entry per method) [default: <output_dir>/baseline_report.json].
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Overrides `baseline.method` from the config.
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Cluster assignments CSV [default: <output_dir>/cluster_assignments.csv].
    #[arg(long)]
    pub cluster_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum MethodArg {
    Rand,
    Cluster,
    Knn,
    Lprop,
    All,
}

impl From<MethodArg> for BaselineMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Rand => BaselineMethod::Rand,
            MethodArg::Cluster => BaselineMethod::Cluster,
            MethodArg::Knn => BaselineMethod::Knn,
            MethodArg::Lprop => BaselineMethod::Lprop,
            MethodArg::All => BaselineMethod::All,
        }
    }
}

pub struct BaselineOutcome {
    pub reports: Vec<EvalReport>,
    /// Present when the cluster baseline ran.
    pub clustering: Option<(PowerClustering, Vec<DatasetRow>)>,
}

fn methods(m: BaselineMethod) -> Vec<BaselineMethod> {
    match m {
        BaselineMethod::All => vec![BaselineMethod::Rand, BaselineMethod::Cluster, BaselineMethod::Knn, BaselineMethod::Lprop],
        one => vec![one],
    }
}

type Rows = Vec<Vec<f64>>;

pub fn baseline_dataset(cfg: &Config, ds: &Dataset, method: BaselineMethod) -> CliResult<BaselineOutcome> {
    let b = &cfg.baseline;
    let split = config_split(cfg, ds.rows.len())?;
    let train_rows = ds.select(&split.train);
    let test_rows = ds.select(&split.test);
    let test_power: Vec<f64> = test_rows.iter().map(|r| r.power).collect();
    let ctx = ReportContext { config: cfg, dataset: ds, split: &split };
    let task = TaskKind::Classify { boundary: b.boundary };
    let mut reports = Vec::new();
    let mut clustering = None;
    // scaled PCA features shared by kNN and label propagation
    let scaled = || -> CliResult<(Rows, Rows)> {
        let (_, tr, te) = featurize_split(&train_rows, &test_rows, cfg.train.variance_target)?;
        let s = Standardizer::fit(&tr.rows)?;
        Ok((s.transform(&tr.rows), s.transform(&te.rows)))
    };
    let train_labels = classify_power(&train_rows.iter().map(|r| r.power).collect::<Vec<_>>(), b.boundary);
    for (slot, m) in methods(method).into_iter().enumerate() {
        let stream = RngStream::with_path(cfg.seed, &[BASELINE_TAG, m as u64]);
        let (name, predicted, label_rows, note) = match m {
            BaselineMethod::Rand => ("p_rand", p_rand(test_rows.len(), &mut stream.generator()), 0, None),
            BaselineMethod::Cluster => {
                let pc = power_cluster(&test_rows, cfg.train.variance_target, b.k_clusters, b.cluster_axes, &mut stream.generator())?;
                let map = cluster_class_map(&pc.model.assignments, &classify_power(&test_power, b.boundary), b.k_clusters)?;
                let predicted = pc.model.assignments.iter().map(|&c| map[c]).collect();
                clustering = Some((pc, test_rows.clone()));
                let note = "cluster-to-class map uses evaluation-split labels (optimistic bound)";
                ("p_cluster", predicted, 0, Some(note))
            }
            BaselineMethod::Knn => {
                let (tr, te) = scaled()?;
                ("pk_neighbors", kneighbors_classify(&tr, &train_labels, &te, b.n_neighbors)?, split.train.len(), None)
            }
            BaselineMethod::Lprop => {
                let (tr, te) = scaled()?;
                let n_train = tr.len();
                let x: Vec<Vec<f64>> = tr.into_iter().chain(te).collect();
                let labels: Vec<Option<u8>> =
                    train_labels.iter().map(|&l| Some(l)).chain(std::iter::repeat_n(None, test_rows.len())).collect();
                let cfg_lp = PropagationConfig { gamma: b.gamma, max_iter: b.max_iter, tol: b.tol };
                let model = label_propagation(&x, &labels, cfg_lp)?;
                let note = (!model.converged).then_some("label propagation hit max_iter before converging");
                ("pl_prop", model.labels[n_train..].to_vec(), split.train.len(), note)
            }
            BaselineMethod::All => unreachable!("expanded above"),
        };
        let metrics = score_labels(&predicted, &test_power, b.boundary, &mut eval_rng(cfg.seed, 10 + slot as u64))?;
        let mut r = ctx.report(task.clone(), name, metrics, label_rows);
        r.notes.extend(note.map(String::from));
        reports.push(r);
    }
    Ok(BaselineOutcome { reports, clustering })
}

/// `scaled_weight,pc_1,cluster,power` for every clustered row.
pub fn cluster_csv(pc: &PowerClustering, rows: &[DatasetRow]) -> CliResult<String> {
    let mut s = String::from("scaled_weight,pc_1,cluster,power\n");
    let k = rows.first().map_or(0, |r| r.point.beta.len());
    let sw = FeatureSchema::new(k, 0).scaled_weight_index();
    for (row, c) in rows.iter().zip(&pc.model.assignments) {
        let base = base_features(&row.point);
        let pc1 = pc.pca.transform_row(&base)?[0];
        s.push_str(&format!("{},{},{c},{}\n", format_sig10(base[sw]), format_sig10(pc1), format_sig10(row.power)));
    }
    Ok(s)
}

pub fn run(cfg: &Config, args: &BaselineArgs) -> CliResult<()> {
    let ds = Dataset::load(&cfg.output_path(args.dataset.as_deref(), "dataset.csv"))?;
    let method = args.method.map_or(cfg.baseline.method, BaselineMethod::from);
    let outcome = baseline_dataset(cfg, &ds, method)?;
    if let Some((pc, rows)) = &outcome.clustering {
        write_text(&cfg.output_path(args.cluster_csv.as_deref(), "cluster_assignments.csv"), &cluster_csv(pc, rows)?)?;
    }
    write_json(&cfg.output_path(args.report.as_deref(), "baseline_report.json"), &outcome.reports)?;
    for r in &outcome.reports {
        print_metrics("baseline", r);
    }
    Ok(())
}
