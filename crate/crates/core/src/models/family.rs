use rand::Rng;
use rand_distr::{Distribution, StudentT};
use serde::{Deserialize, Serialize};

use super::{DesignSpec, Matrix};
use crate::error::{invalid, Error, Result};
use crate::rng::standard_normal;

fn default_levels() -> usize {
    2
}

/// The statistical model whose power is being mapped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "tag")]
pub enum ModelFamily {
    #[serde(rename = "REG")]
    Reg,
    #[serde(rename = "LOGIT")]
    Logit,
    /// Two within-subject factors A and B with the given level counts.
    #[serde(rename = "RMANOVA")]
    RmAnova {
        #[serde(default = "default_levels")]
        levels_a: usize,
        #[serde(default = "default_levels")]
        levels_b: usize,
    },
}

impl ModelFamily {
    pub fn rmanova_2x2() -> Self {
        ModelFamily::RmAnova { levels_a: 2, levels_b: 2 }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ModelFamily::Reg => "REG",
            ModelFamily::Logit => "LOGIT",
            ModelFamily::RmAnova { .. } => "RMANOVA",
        }
    }

    /// Smallest admissible sample size for `k` predictors.
    pub fn min_sample_size(&self, k: usize) -> usize {
        match self {
            ModelFamily::RmAnova { .. } => 2,
            _ => k + 3,
        }
    }

    /// The natural test for this family.
    pub fn default_test(&self) -> TestKind {
        match self {
            ModelFamily::Reg => TestKind::PartialF,
            ModelFamily::Logit => TestKind::Wald,
            ModelFamily::RmAnova { .. } => TestKind::RmAnovaF,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    PartialF,
    Wald,
    RmAnovaF,
    T,
}

/// Which coefficients are tested (1-based) and how.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub tested_indices: Vec<usize>,
    pub test: TestKind,
}

impl Hypothesis {
    pub fn new(mut tested_indices: Vec<usize>, test: TestKind) -> Self {
        tested_indices.sort_unstable();
        tested_indices.dedup();
        Self { tested_indices, test }
    }

    /// `beta_1 = beta_3 = 0`, tested with the family's natural test.
    pub fn primary(family: &ModelFamily) -> Self {
        Self::new(vec![1, 3], family.default_test())
    }

    /// `beta_1 = beta_7 = beta_8 = 0`, used for robustness of transfer.
    pub fn secondary(family: &ModelFamily) -> Self {
        Self::new(vec![1, 7, 8], family.default_test())
    }

    pub fn validate(&self, family: &ModelFamily, design: &DesignSpec) -> Result<()> {
        let k = design.k();
        if self.tested_indices.is_empty() {
            return Err(Error::Specification("hypothesis tests no coefficients".into()));
        }
        if let Some(bad) = self.tested_indices.iter().find(|&&i| i == 0 || i > k) {
            return Err(Error::Specification(format!("tested index {bad} outside 1..={k}")));
        }
        let ok = matches!(
            (family, self.test),
            (ModelFamily::Reg, TestKind::PartialF)
                | (ModelFamily::Reg, TestKind::T)
                | (ModelFamily::Logit, TestKind::Wald)
                | (ModelFamily::RmAnova { .. }, TestKind::RmAnovaF)
        );
        if !ok {
            return Err(Error::Specification(format!(
                "test {:?} is not available for family {}",
                self.test,
                family.label()
            )));
        }
        if self.test == TestKind::T && self.tested_indices.len() != 1 {
            return Err(Error::Specification("a t test needs exactly one tested index".into()));
        }
        if let ModelFamily::RmAnova { levels_a, levels_b } = family {
            if *levels_a < 1 || *levels_b < 1 || levels_a * levels_b < 2 {
                return Err(Error::Specification("RMANOVA needs at least two conditions".into()));
            }
            let within = self.tested_indices.iter().any(|&i| {
                let (a, b) = design.factor_dependence(i - 1);
                a || b
            });
            if !within {
                return Err(Error::Specification(
                    "RMANOVA hypothesis must involve a within-subject factor column".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Distribution of the additive error term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErrorDist {
    Normal { sigma: f64 },
    StudentT { df: f64 },
}

impl Default for ErrorDist {
    fn default() -> Self {
        ErrorDist::Normal { sigma: 1.0 }
    }
}

impl ErrorDist {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ErrorDist::Normal { sigma } if sigma >= 0.0 && sigma.is_finite() => Ok(()),
            ErrorDist::StudentT { df } if df > 0.0 && df.is_finite() => Ok(()),
            other => Err(Error::Specification(format!("invalid error distribution {other:?}"))),
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ErrorDist::Normal { sigma } => sigma * standard_normal(rng),
            ErrorDist::StudentT { df } => StudentT::new(df).expect("validated df").sample(rng),
        }
    }
}

/// Simulated outcome data.
#[derive(Debug, Clone, PartialEq)]
pub enum Response {
    Continuous(Vec<f64>),
    Binary(Vec<f64>),
    /// Subjects in rows, conditions (A-major) in columns.
    Repeated(Matrix),
}

/// Level codes evenly spaced on [-1, 1].
pub(crate) fn level_codes(levels: usize) -> Vec<f64> {
    if levels <= 1 {
        return vec![0.0; levels];
    }
    (0..levels).map(|i| -1.0 + 2.0 * i as f64 / (levels - 1) as f64).collect()
}

/// Draw outcomes for a design.
///
/// RMANOVA treats each row of `x` as a subject. For every condition the
/// first two columns are replaced by the factor level codes, products are
/// recomputed, and a shared subject intercept `u_i ~ N(0, 1)` is added.
pub fn generate_response<R: Rng + ?Sized>(
    family: &ModelFamily,
    design: &DesignSpec,
    x: &Matrix,
    beta: &[f64],
    error: &ErrorDist,
    rng: &mut R,
) -> Result<Response> {
    if x.ncols() != beta.len() {
        return Err(invalid(format!("design has {} columns but beta has {}", x.ncols(), beta.len())));
    }
    let n = x.nrows();
    let linear = |row: &[f64]| row.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>();
    match family {
        ModelFamily::Reg => {
            let y = (0..n)
                .map(|i| {
                    let row: Vec<f64> = x.row(i).iter().copied().collect();
                    linear(&row) + error.draw(rng)
                })
                .collect();
            Ok(Response::Continuous(y))
        }
        ModelFamily::Logit => {
            let y = (0..n)
                .map(|i| {
                    let row: Vec<f64> = x.row(i).iter().copied().collect();
                    let p = 1.0 / (1.0 + (-linear(&row)).exp());
                    if rng.random::<f64>() < p {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect();
            Ok(Response::Binary(y))
        }
        ModelFamily::RmAnova { levels_a, levels_b } => {
            if design.k() != x.ncols() {
                return Err(invalid("design spec does not match design matrix width"));
            }
            let (codes_a, codes_b) = (level_codes(*levels_a), level_codes(*levels_b));
            let m = levels_a * levels_b;
            let k = x.ncols();
            let mut out = Matrix::zeros(n, m);
            let mut row = vec![0.0; k];
            for i in 0..n {
                let subject = standard_normal(rng);
                for (ia, &ca) in codes_a.iter().enumerate() {
                    for (ib, &cb) in codes_b.iter().enumerate() {
                        for (j, v) in row.iter_mut().enumerate() {
                            *v = x[(i, j)];
                        }
                        row[0] = ca;
                        if k > 1 {
                            row[1] = cb;
                        }
                        design.refresh_products(&mut row);
                        out[(i, ia * levels_b + ib)] = linear(&row) + subject + error.draw(rng);
                    }
                }
            }
            Ok(Response::Repeated(out))
        }
    }
}
