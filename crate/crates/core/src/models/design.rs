use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};
use crate::rng::{sample_categorical, sample_normal};

/// How one predictor column is drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnSpec {
    Normal { mu: f64, sigma: f64 },
    Categorical { levels: Vec<f64> },
    /// Elementwise product of two earlier columns (1-based indices).
    Product { i: usize, j: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DesignName {
    #[serde(rename = "D_O")]
    Original,
    #[serde(rename = "D_A")]
    Alternate,
    #[serde(rename = "custom")]
    Custom,
}

/// Ordered predictor distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub name: DesignName,
    pub columns: Vec<ColumnSpec>,
}

fn normal(mu: f64, sigma: f64) -> ColumnSpec {
    ColumnSpec::Normal { mu, sigma }
}

fn cat(levels: &[f64]) -> ColumnSpec {
    ColumnSpec::Categorical { levels: levels.to_vec() }
}

fn prod(i: usize, j: usize) -> ColumnSpec {
    ColumnSpec::Product { i, j }
}

fn original_columns() -> Vec<ColumnSpec> {
    vec![
        cat(&[-1.0, 1.0]),
        normal(0.0, 1.0),
        prod(1, 2),
        normal(0.0, 2.0),
        prod(4, 2),
        cat(&[0.0, 1.0, 2.0]),
        normal(0.0, 2.0),
        prod(6, 7),
        normal(0.0, 1.0),
        prod(2, 6),
        normal(0.0, 3.0),
        normal(0.0, 1.0),
        prod(1, 11),
        normal(0.0, 2.0),
        prod(11, 12),
        normal(0.0, 2.0),
        normal(0.0, 2.0),
        prod(11, 14),
        normal(0.0, 1.0),
        prod(6, 16),
    ]
}

fn alternate_columns() -> Vec<ColumnSpec> {
    vec![
        normal(0.0, 1.0),
        cat(&[-1.0, 1.0]),
        normal(0.0, 1.0),
        normal(0.0, 1.0),
        prod(2, 1),
        prod(2, 3),
        prod(2, 4),
        normal(0.0, 1.0),
        normal(0.0, 1.0),
        prod(2, 8),
        normal(0.0, 3.0),
        normal(0.0, 1.0),
        prod(1, 11),
        normal(0.0, 2.0),
        prod(11, 12),
        normal(0.0, 2.0),
        normal(0.0, 2.0),
        prod(11, 14),
        normal(0.0, 1.0),
        prod(6, 16),
    ]
}

impl DesignSpec {
    /// Maximum number of predictors in the tabulated designs.
    pub const MAX_TABULATED: usize = 20;

    /// The first `k` columns of the original feature distribution.
    pub fn original(k: usize) -> Result<Self> {
        Self::truncated(DesignName::Original, original_columns(), k)
    }

    /// The first `k` columns of the alternate feature distribution.
    pub fn alternate(k: usize) -> Result<Self> {
        Self::truncated(DesignName::Alternate, alternate_columns(), k)
    }

    fn truncated(name: DesignName, mut columns: Vec<ColumnSpec>, k: usize) -> Result<Self> {
        if k == 0 || k > Self::MAX_TABULATED {
            return Err(Error::Specification(format!("predictor count must be in 1..=20, got {k}")));
        }
        columns.truncate(k);
        Ok(Self { name, columns })
    }

    pub fn custom(columns: Vec<ColumnSpec>) -> Result<Self> {
        let spec = Self { name: DesignName::Custom, columns };
        spec.validate()?;
        Ok(spec)
    }

    /// Number of predictors.
    pub fn k(&self) -> usize {
        self.columns.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::Specification("design has no columns".into()));
        }
        for (idx, col) in self.columns.iter().enumerate() {
            let pos = idx + 1;
            match col {
                ColumnSpec::Normal { sigma, mu } => {
                    if !(*sigma >= 0.0) || !sigma.is_finite() || !mu.is_finite() {
                        return Err(Error::Specification(format!("column {pos}: invalid normal({mu}, {sigma})")));
                    }
                }
                ColumnSpec::Categorical { levels } => {
                    if levels.is_empty() {
                        return Err(Error::Specification(format!("column {pos}: categorical with no levels")));
                    }
                }
                ColumnSpec::Product { i, j } => {
                    if *i == 0 || *j == 0 || *i >= pos || *j >= pos {
                        return Err(Error::Specification(format!(
                            "column {pos}: product({i}, {j}) must reference earlier columns"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Recompute product columns of `row` in order, after earlier entries changed.
    pub fn refresh_products(&self, row: &mut [f64]) {
        for (idx, col) in self.columns.iter().enumerate() {
            if let ColumnSpec::Product { i, j } = col {
                row[idx] = row[i - 1] * row[j - 1];
            }
        }
    }

    /// Which of the first two columns (the within-subject factors) column
    /// `index` (0-based) depends on.
    pub fn factor_dependence(&self, index: usize) -> (bool, bool) {
        match &self.columns[index] {
            _ if index == 0 => (true, false),
            _ if index == 1 => (false, true),
            ColumnSpec::Product { i, j } => {
                let (a1, b1) = self.factor_dependence(i - 1);
                let (a2, b2) = self.factor_dependence(j - 1);
                (a1 || a2, b1 || b2)
            }
            _ => (false, false),
        }
    }
}

/// Draw an `n x k` design matrix, column by column.
pub fn generate_design<R: Rng + ?Sized>(spec: &DesignSpec, n: usize, rng: &mut R) -> Result<Matrix> {
    spec.validate()?;
    let k = spec.k();
    let mut x = Matrix::zeros(n, k);
    for (j, col) in spec.columns.iter().enumerate() {
        let values = match col {
            ColumnSpec::Normal { mu, sigma } => sample_normal(*mu, *sigma, n, rng)?,
            ColumnSpec::Categorical { levels } => sample_categorical(levels, n, rng)?,
            ColumnSpec::Product { i, j: jj } => (0..n).map(|r| x[(r, i - 1)] * x[(r, jj - 1)]).collect(),
        };
        for (r, v) in values.into_iter().enumerate() {
            x[(r, j)] = v;
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn original_first_columns() {
        let spec = DesignSpec::original(1).unwrap();
        let x = generate_design(&spec, 4, &mut RngStream::new(3).generator()).unwrap();
        assert_eq!(x.ncols(), 1);
        assert!(x.iter().all(|&v| v == -1.0 || v == 1.0));

        let spec = DesignSpec::original(3).unwrap();
        let x = generate_design(&spec, 50, &mut RngStream::new(3).generator()).unwrap();
        for r in 0..50 {
            assert_eq!(x[(r, 2)], x[(r, 0)] * x[(r, 1)]);
        }
    }

    #[test]
    fn empty_design_keeps_width() {
        let spec = DesignSpec::alternate(5).unwrap();
        let x = generate_design(&spec, 0, &mut RngStream::new(3).generator()).unwrap();
        assert_eq!((x.nrows(), x.ncols()), (0, 5));
    }

    #[test]
    fn truncation_preserves_order() {
        let full = DesignSpec::original(20).unwrap();
        let five = DesignSpec::original(5).unwrap();
        assert_eq!(&full.columns[..5], &five.columns[..]);
    }

    #[test]
    fn bad_product_reference() {
        let cols = vec![normal(0.0, 1.0), prod(1, 2)];
        assert!(matches!(DesignSpec::custom(cols), Err(Error::Specification(_))));
        assert!(DesignSpec::original(21).is_err());
    }

    #[test]
    fn reproducible() {
        let spec = DesignSpec::original(10).unwrap();
        let a = generate_design(&spec, 30, &mut RngStream::with_path(5, &[1, 2]).generator()).unwrap();
        let b = generate_design(&spec, 30, &mut RngStream::with_path(5, &[1, 2]).generator()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn factor_dependence_of_original() {
        let spec = DesignSpec::original(8).unwrap();
        assert_eq!(spec.factor_dependence(0), (true, false));
        assert_eq!(spec.factor_dependence(1), (false, true));
        assert_eq!(spec.factor_dependence(2), (true, true));
        assert_eq!(spec.factor_dependence(3), (false, false));
        assert_eq!(spec.factor_dependence(4), (false, true));
        assert_eq!(spec.factor_dependence(7), (false, false));
    }
}
