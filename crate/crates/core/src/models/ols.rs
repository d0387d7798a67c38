use nalgebra::{Cholesky, DVector};

use super::Matrix;
use crate::error::{invalid, Error, Result};
use crate::special::{f_sf, t_two_sided_sf};

/// Least-squares fit with an intercept.
///
/// `coefficients[0]` is the intercept and `coefficients[j]` belongs to
/// predictor column `j` (1-based), so tested indices map directly.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub covariance: Matrix,
    pub rss: f64,
    pub df_residual: usize,
    pub sigma2: f64,
}

/// An F (or squared t) statistic with its degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FTest {
    pub statistic: f64,
    pub df1: f64,
    pub df2: f64,
    pub p_value: f64,
}

/// Relative pivot size below which a normal-equations system is singular.
const SINGULAR_TOL: f64 = 1e-11;

pub(crate) fn cholesky_checked(a: Matrix, what: &str) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    let max_diag = a.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let chol = Cholesky::new(a).ok_or_else(|| Error::SingularFit(format!("{what} is not positive definite")))?;
    let l = chol.l_dirty();
    let min_pivot = (0..l.nrows()).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
    if !(min_pivot > SINGULAR_TOL * max_diag.max(f64::MIN_POSITIVE)) {
        return Err(Error::SingularFit(format!("{what} is numerically rank deficient")));
    }
    Ok(chol)
}

/// Fit `y = b0 + X b + e` by ordinary least squares.
pub fn fit_ols(x: &Matrix, y: &[f64]) -> Result<OlsFit> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(invalid(format!("design has {n} rows but y has {}", y.len())));
    }
    let p = k + 1;
    if n <= p {
        return Err(Error::SingularFit(format!("{n} rows cannot identify {p} coefficients with residual df > 0")));
    }
    let mut xtx = Matrix::zeros(p, p);
    let mut xty = DVector::zeros(p);
    let mut row = vec![0.0; p];
    for i in 0..n {
        row[0] = 1.0;
        for j in 0..k {
            row[j + 1] = x[(i, j)];
        }
        for a in 0..p {
            xty[a] += row[a] * y[i];
            for b in 0..=a {
                xtx[(a, b)] += row[a] * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            xtx[(b, a)] = xtx[(a, b)];
        }
    }
    let chol = cholesky_checked(xtx, "X'X")?;
    let coef = chol.solve(&xty);
    let mut rss = 0.0;
    for i in 0..n {
        let mut fitted = coef[0];
        for j in 0..k {
            fitted += coef[j + 1] * x[(i, j)];
        }
        rss += (y[i] - fitted).powi(2);
    }
    let df_residual = n - p;
    let sigma2 = rss / df_residual as f64;
    let covariance = chol.inverse() * sigma2;
    Ok(OlsFit { coefficients: coef.iter().copied().collect(), covariance, rss, df_residual, sigma2 })
}

/// Nested-model F test of `full` against `reduced`.
///
/// `F = ((RSS_r - RSS_f) / q) / (RSS_f / df_f)` with `q = df_r - df_f`.
/// No improvement gives `F = 0, p = 1`; a perfect full fit gives `p = 0`.
pub fn partial_f_test(full: &OlsFit, reduced: &OlsFit) -> Result<FTest> {
    if reduced.df_residual < full.df_residual {
        return Err(invalid("reduced model has more coefficients than the full model"));
    }
    let q = (reduced.df_residual - full.df_residual) as f64;
    let df2 = full.df_residual as f64;
    let gain = reduced.rss - full.rss;
    // rounding can leave a tiny negative gain for identical models
    let scale = reduced.rss.abs().max(f64::MIN_POSITIVE);
    if q == 0.0 || gain <= 1e-14 * scale {
        return Ok(FTest { statistic: 0.0, df1: q, df2, p_value: 1.0 });
    }
    if full.rss <= 0.0 {
        return Ok(FTest { statistic: f64::INFINITY, df1: q, df2, p_value: 0.0 });
    }
    let statistic = (gain / q) / (full.rss / df2);
    Ok(FTest { statistic, df1: q, df2, p_value: f_sf(statistic, q, df2)? })
}

/// Two-sided t test of a single coefficient (1-based predictor index).
pub fn t_test(fit: &OlsFit, index: usize) -> Result<FTest> {
    if index == 0 || index >= fit.coefficients.len() {
        return Err(invalid(format!("coefficient index {index} out of range")));
    }
    let se = fit.covariance[(index, index)].sqrt();
    let df = fit.df_residual as f64;
    let b = fit.coefficients[index];
    if se == 0.0 {
        let p = if b == 0.0 { 1.0 } else { 0.0 };
        return Ok(FTest { statistic: if b == 0.0 { 0.0 } else { f64::INFINITY }, df1: 1.0, df2: df, p_value: p });
    }
    let t = b / se;
    Ok(FTest { statistic: t, df1: 1.0, df2: df, p_value: t_two_sided_sf(t, df) })
}

/// Copy of `x` without the given 1-based columns.
pub fn drop_columns(x: &Matrix, tested: &[usize]) -> Matrix {
    let keep: Vec<usize> = (0..x.ncols()).filter(|j| !tested.contains(&(j + 1))).collect();
    Matrix::from_fn(x.nrows(), keep.len(), |i, j| x[(i, keep[j])])
}
