use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::models::Matrix;

/// Standardisation statistics plus retained principal axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub means: Vec<f64>,
    /// Population standard deviations; constant columns store 1.
    pub stds: Vec<f64>,
    /// `p` rows of `r` entries: column `c` is the `c`-th principal axis.
    pub components: Vec<Vec<f64>>,
    /// Variance of every standardized component, descending (length `p`).
    pub eigenvalues: Vec<f64>,
    /// Share of total variance per component (length `p`, sums to 1).
    pub explained_ratios: Vec<f64>,
    pub variance_target: f64,
}

impl PcaModel {
    pub fn n_features(&self) -> usize {
        self.means.len()
    }

    pub fn n_components(&self) -> usize {
        self.components.first().map_or(0, |r| r.len())
    }

    /// Project rows of `x` (width `p`) onto the retained components.
    pub fn transform(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        x.iter().map(|row| self.transform_row(row)).collect()
    }

    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        let p = self.n_features();
        if row.len() != p {
            return Err(Error::Schema { expected: p, got: row.len() });
        }
        let z: Vec<f64> = row.iter().zip(&self.means).zip(&self.stds).map(|((v, m), s)| (v - m) / s).collect();
        Ok((0..self.n_components())
            .map(|c| z.iter().zip(&self.components).map(|(zi, comp)| zi * comp[c]).sum())
            .collect())
    }
}

/// Fit PCA on the rows of `x`, keeping the fewest components whose
/// cumulative explained variance reaches `variance_target`.
pub fn pca_fit(x: &[Vec<f64>], variance_target: f64) -> Result<PcaModel> {
    let n = x.len();
    if n == 0 {
        return Err(invalid("PCA needs at least one row"));
    }
    let p = x[0].len();
    if p == 0 || x.iter().any(|r| r.len() != p) {
        return Err(invalid("PCA rows must share a non-zero width"));
    }
    if !(variance_target > 0.0 && variance_target <= 1.0) {
        return Err(invalid(format!("variance target must lie in (0, 1], got {variance_target}")));
    }
    let nf = n as f64;
    let means: Vec<f64> = (0..p).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / nf).collect();
    let stds: Vec<f64> = (0..p)
        .map(|j| {
            let v = x.iter().map(|r| (r[j] - means[j]).powi(2)).sum::<f64>() / nf;
            let s = v.sqrt();
            if s > 1e-12 * means[j].abs().max(1.0) {
                s
            } else {
                1.0
            }
        })
        .collect();
    let mut gram = Matrix::zeros(p, p);
    let mut z = vec![0.0; p];
    for row in x {
        for j in 0..p {
            z[j] = (row[j] - means[j]) / stds[j];
        }
        for a in 0..p {
            for b in 0..=a {
                gram[(a, b)] += z[a] * z[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            gram[(b, a)] = gram[(a, b)];
        }
    }
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0) / nf).collect();
    let total: f64 = eigenvalues.iter().sum();
    let explained_ratios: Vec<f64> = if total > 0.0 {
        eigenvalues.iter().map(|v| v / total).collect()
    } else {
        vec![1.0 / p as f64; p]
    };
    let mut r = p;
    let mut cum = 0.0;
    for (i, ratio) in explained_ratios.iter().enumerate() {
        cum += ratio;
        if cum >= variance_target - 1e-12 {
            r = i + 1;
            break;
        }
    }
    let mut components = vec![vec![0.0; r]; p];
    for (c, &src) in order.iter().take(r).enumerate() {
        let v = eig.eigenvectors.column(src);
        // largest-magnitude entry positive
        let pivot = (0..p).fold(0, |best, i| if v[i].abs() > v[best].abs() + 1e-12 { i } else { best });
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..p {
            components[i][c] = sign * v[i];
        }
    }
    Ok(PcaModel { means, stds, components, eigenvalues, explained_ratios, variance_target })
}

/// Fit, then transform the fitting rows.
pub fn pca_fit_transform(x: &[Vec<f64>], variance_target: f64) -> Result<(PcaModel, Vec<Vec<f64>>)> {
    let model = pca_fit(x, variance_target)?;
    let t = model.transform(x)?;
    Ok((model, t))
}
