//! Feature engineering: scaled weight, PCA and dataset files.

mod dataset;
mod pca;

pub use dataset::{
    format_sig10, parse_dataset_csv, parse_points_csv, write_dataset_csv, write_points_csv, DatasetManifest,
    DatasetRow,
};
pub use pca::{pca_fit, pca_fit_transform, PcaModel};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::power::ParameterPoint;

/// Default share of variance retained by PCA.
pub const DEFAULT_VARIANCE_TARGET: f64 = 0.99;

/// `N * sqrt(sum beta_i^2)`.
pub fn scaled_weight(beta: &[f64], n: usize) -> f64 {
    n as f64 * beta.iter().map(|b| b * b).sum::<f64>().sqrt()
}

/// Unlabelled base features `[beta_1..beta_k, N, N*sigma]`.
pub fn base_features(point: &ParameterPoint) -> Vec<f64> {
    let mut row = point.beta.clone();
    row.push(point.n as f64);
    row.push(scaled_weight(&point.beta, point.n));
    row
}

/// Block widths of a feature row: `k` coefficients, `N`, `N*sigma`, `r` PCs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub beta: usize,
    pub pc: usize,
}

impl FeatureSchema {
    pub fn new(beta: usize, pc: usize) -> Self {
        Self { beta, pc }
    }

    pub fn width(&self) -> usize {
        self.beta + 2 + self.pc
    }

    pub fn n_index(&self) -> usize {
        self.beta
    }

    pub fn scaled_weight_index(&self) -> usize {
        self.beta + 1
    }

    pub fn pc_index(&self, c: usize) -> usize {
        self.beta + 2 + c
    }

    pub fn names(&self) -> Vec<String> {
        let mut names: Vec<String> = (1..=self.beta).map(|i| format!("beta_{i}")).collect();
        names.push("N".into());
        names.push("scaled_weight".into());
        names.extend((1..=self.pc).map(|i| format!("pc_{i}")));
        names
    }

    /// Whether every block of `self` fits inside the matching block of `other`.
    pub fn fits_within(&self, other: &FeatureSchema) -> bool {
        self.beta <= other.beta && self.pc <= other.pc
    }
}

/// Assembled surrogate inputs with the matching true powers.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub schema: FeatureSchema,
    pub rows: Vec<Vec<f64>>,
    pub power: Vec<f64>,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Binary labels: 1 when power is strictly above `boundary`.
    pub fn labels(&self, boundary: f64) -> Vec<u8> {
        classify_power(&self.power, boundary)
    }

    /// Rows at the given indices.
    pub fn select(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            schema: self.schema,
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            power: idx.iter().map(|&i| self.power[i]).collect(),
        }
    }

    /// One feature column.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }
}

/// 1 when power is strictly above `boundary`, else 0.
pub fn classify_power(power: &[f64], boundary: f64) -> Vec<u8> {
    power.iter().map(|&p| u8::from(p > boundary)).collect()
}

/// Build `[beta, N, N*sigma, PC]` rows with an already-fitted PCA.
pub fn assemble_features(rows: &[DatasetRow], pca: &PcaModel) -> Result<FeatureMatrix> {
    let k = rows.first().map(|r| r.point.beta.len()).ok_or_else(|| invalid("no records to featurize"))?;
    if pca.n_features() != k + 2 {
        return Err(Error::Schema { expected: k + 2, got: pca.n_features() });
    }
    let schema = FeatureSchema::new(k, pca.n_components());
    let mut out = Vec::with_capacity(rows.len());
    for r in rows {
        if r.point.beta.len() != k {
            return Err(Error::Schema { expected: k, got: r.point.beta.len() });
        }
        let mut row = base_features(&r.point);
        let pcs = pca.transform_row(&row)?;
        row.extend(pcs);
        out.push(row);
    }
    Ok(FeatureMatrix { schema, rows: out, power: rows.iter().map(|r| r.power).collect() })
}

/// Fit PCA on the base features of `train` and featurize both splits with it.
pub fn featurize_split(
    train: &[DatasetRow],
    test: &[DatasetRow],
    variance_target: f64,
) -> Result<(PcaModel, FeatureMatrix, FeatureMatrix)> {
    let base: Vec<Vec<f64>> = train.iter().map(|r| base_features(&r.point)).collect();
    let pca = pca_fit(&base, variance_target)?;
    let tr = assemble_features(train, &pca)?;
    let te = if test.is_empty() {
        FeatureMatrix { schema: tr.schema, rows: Vec::new(), power: Vec::new() }
    } else {
        assemble_features(test, &pca)?
    };
    Ok((pca, tr, te))
}

/// Pearson correlation of one feature with power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCorrelation {
    pub feature: String,
    pub r: f64,
    /// Zero-variance feature (or power); `r` is reported as 0.
    pub degenerate: bool,
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let constant = |v: &[f64]| v.iter().all(|a| *a == v[0]);
    if x.is_empty() || constant(x) || constant(y) {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Correlation of every feature column with the true power.
pub fn correlation_report(features: &FeatureMatrix) -> Result<Vec<FeatureCorrelation>> {
    if features.len() < 3 {
        return Err(invalid("correlation report needs at least 3 rows"));
    }
    Ok(features
        .schema
        .names()
        .into_iter()
        .enumerate()
        .map(|(j, feature)| match pearson(&features.column(j), &features.power) {
            Some(r) => FeatureCorrelation { feature, r, degenerate: false },
            None => FeatureCorrelation { feature, r: 0.0, degenerate: true },
        })
        .collect())
}

/// Column-wise z-scoring fitted on one set of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    /// Population std; constant columns keep scale 1.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or_else(|| invalid("cannot standardize zero rows"))?;
        let p = first.len();
        if rows.iter().any(|r| r.len() != p) {
            return Err(invalid("ragged feature rows"));
        }
        let n = rows.len() as f64;
        let means: Vec<f64> = (0..p).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let scales = (0..p)
            .map(|j| {
                let var = rows.iter().map(|r| (r[j] - means[j]).powi(2)).sum::<f64>() / n;
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Standardizer { means, scales })
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(self.means.iter().zip(&self.scales)).map(|(x, (m, s))| (x - m) / s).collect()
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.transform_row(r)).collect()
    }
}
