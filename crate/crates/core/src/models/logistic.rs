use nalgebra::DVector;

use super::ols::cholesky_checked;
use super::Matrix;
use crate::error::{invalid, Error, Result};
use crate::special::chisq_sf;

const MAX_ITER: usize = 50;
const TOL: f64 = 1e-8;
/// Coefficients beyond this magnitude signal (quasi-)separation.
const DIVERGED: f64 = 30.0;

/// Logistic regression fit with an intercept in `coefficients[0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub coefficients: Vec<f64>,
    /// Inverse Fisher information at the final coefficients.
    pub covariance: Matrix,
    pub converged: bool,
    pub iterations: usize,
}

impl LogisticFit {
    fn degenerate(p: usize, iterations: usize) -> Self {
        Self {
            coefficients: vec![0.0; p],
            covariance: Matrix::from_element(p, p, f64::NAN),
            converged: false,
            iterations,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Fisher information `Z' W Z` and score `Z' (y - mu)` at `coef`.
fn information(x: &Matrix, y: &[f64], coef: &DVector<f64>) -> (Matrix, DVector<f64>, f64) {
    let (n, k) = x.shape();
    let p = k + 1;
    let mut info = Matrix::zeros(p, p);
    let mut score = DVector::zeros(p);
    let mut max_w = 0.0f64;
    let mut row = vec![0.0; p];
    for i in 0..n {
        row[0] = 1.0;
        for j in 0..k {
            row[j + 1] = x[(i, j)];
        }
        let eta: f64 = row.iter().zip(coef.iter()).map(|(a, b)| a * b).sum();
        let mu = sigmoid(eta);
        let w = mu * (1.0 - mu);
        max_w = max_w.max(w);
        for a in 0..p {
            score[a] += row[a] * (y[i] - mu);
            for b in 0..=a {
                info[(a, b)] += w * row[a] * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            info[(b, a)] = info[(a, b)];
        }
    }
    (info, score, max_w)
}

/// Iteratively reweighted least squares (Newton-Raphson on the log-likelihood).
///
/// Stops when the largest coefficient update is below `1e-8`, or after 50
/// iterations. Separation shows up as vanishing weights or runaway
/// coefficients and is reported through `converged = false`.
pub fn fit_logistic_irls(x: &Matrix, y: &[f64]) -> Result<LogisticFit> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(invalid(format!("design has {n} rows but y has {}", y.len())));
    }
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(invalid("logistic response must be 0/1"));
    }
    let p = k + 1;
    let positives = y.iter().filter(|&&v| v == 1.0).count();
    if positives == 0 || positives == n || n <= p {
        return Ok(LogisticFit::degenerate(p, 0));
    }
    let mut coef = DVector::zeros(p);
    for iter in 1..=MAX_ITER {
        let (info, score, max_w) = information(x, y, &coef);
        if max_w < 1e-10 {
            return Ok(LogisticFit::degenerate(p, iter));
        }
        let Ok(chol) = cholesky_checked(info, "Fisher information") else {
            return Ok(LogisticFit::degenerate(p, iter));
        };
        let step = chol.solve(&score);
        coef += &step;
        if coef.iter().any(|c| !c.is_finite() || c.abs() > DIVERGED) {
            return Ok(LogisticFit::degenerate(p, iter));
        }
        if step.amax() < TOL {
            let (info, _, _) = information(x, y, &coef);
            let Ok(chol) = cholesky_checked(info, "Fisher information") else {
                return Ok(LogisticFit::degenerate(p, iter));
            };
            return Ok(LogisticFit {
                coefficients: coef.iter().copied().collect(),
                covariance: chol.inverse(),
                converged: true,
                iterations: iter,
            });
        }
    }
    Ok(LogisticFit::degenerate(p, MAX_ITER))
}

/// Wald chi-square test that the listed coefficients (1-based) are zero.
pub fn wald_test(coefficients: &[f64], covariance: &Matrix, tested_indices: &[usize]) -> Result<f64> {
    if tested_indices.is_empty() {
        return Err(invalid("no coefficients to test"));
    }
    if let Some(&bad) = tested_indices.iter().find(|&&i| i >= coefficients.len()) {
        return Err(invalid(format!("coefficient index {bad} out of range")));
    }
    let q = tested_indices.len();
    let b = DVector::from_iterator(q, tested_indices.iter().map(|&i| coefficients[i]));
    if b.iter().all(|&v| v == 0.0) {
        return Ok(1.0);
    }
    let sub = Matrix::from_fn(q, q, |r, c| covariance[(tested_indices[r], tested_indices[c])]);
    let chol = cholesky_checked(sub, "tested covariance")
        .map_err(|e| Error::DegenerateTest(e.to_string()))?;
    let w = b.dot(&chol.solve(&b));
    chisq_sf(w.max(0.0), q as f64)
}
