//! Distribution functions and analytic power.
//!
//! The t, F and chi-square CDFs are expressed through the regularized
//! incomplete beta and gamma functions. Upper tails are computed directly
//! (not as `1 - cdf`) so small p-values keep their relative precision.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

const EPS: f64 = 1e-15;
const TINY: f64 = 1e-300;
const MAX_CF_ITER: usize = 300;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_CF_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)` given both `x` and `y = 1 - x`.
///
/// Passing `y` separately avoids cancellation when `x` is close to 1.
pub fn beta_reg_xy(a: f64, b: f64, x: f64, y: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return 1.0;
    }
    let ln_front = a * x.ln() + b * y.ln() - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        (ln_front.exp() * beta_cf(a, b, x) / a).clamp(0.0, 1.0)
    } else {
        (1.0 - ln_front.exp() * beta_cf(b, a, y) / b).clamp(0.0, 1.0)
    }
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn beta_reg(a: f64, b: f64, x: f64) -> f64 {
    beta_reg_xy(a, b, x, 1.0 - x)
}

/// Regularized lower incomplete gamma `P(a, x)` and upper `Q(a, x)`.
fn gamma_pq(a: f64, x: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    let ln_front = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut sum = 1.0 / a;
        let mut del = sum;
        for _ in 0..10_000 {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * EPS {
                break;
            }
        }
        let p = (sum * ln_front.exp()).clamp(0.0, 1.0);
        (p, 1.0 - p)
    } else {
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        let q = (ln_front.exp() * h).clamp(0.0, 1.0);
        (1.0 - q, q)
    }
}

fn check_df(name: &str, df: f64) -> Result<()> {
    if df > 0.0 && df.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite and > 0, got {df}")))
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    let (_, q) = gamma_pq(0.5, 0.5 * x * x);
    if x >= 0.0 {
        1.0 - 0.5 * q
    } else {
        0.5 * q
    }
}

/// Student t CDF.
pub fn t_cdf(x: f64, df: f64) -> Result<f64> {
    check_df("df", df)?;
    if x.is_nan() {
        return Err(invalid("t_cdf argument is NaN"));
    }
    let tail = 0.5 * t_two_sided_sf(x, df);
    Ok(if x > 0.0 { 1.0 - tail } else { tail })
}

/// `P(|T| > |t|)` for a t variable with `df` degrees of freedom.
pub fn t_two_sided_sf(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let t2 = t * t;
    beta_reg_xy(0.5 * df, 0.5, df / (df + t2), t2 / (df + t2))
}

/// F-distribution CDF.
pub fn f_cdf(x: f64, df1: f64, df2: f64) -> Result<f64> {
    check_df("df1", df1)?;
    check_df("df2", df2)?;
    if x.is_nan() || x < 0.0 {
        return Err(invalid(format!("f_cdf argument must be >= 0, got {x}")));
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    let (u, v) = (df1 * x, df2);
    Ok(beta_reg_xy(0.5 * df1, 0.5 * df2, u / (u + v), v / (u + v)))
}

/// F-distribution upper tail `P(F > x)`.
pub fn f_sf(x: f64, df1: f64, df2: f64) -> Result<f64> {
    check_df("df1", df1)?;
    check_df("df2", df2)?;
    if x.is_nan() || x < 0.0 {
        return Err(invalid(format!("f_sf argument must be >= 0, got {x}")));
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    let (u, v) = (df1 * x, df2);
    Ok(beta_reg_xy(0.5 * df2, 0.5 * df1, v / (u + v), u / (u + v)))
}

/// Chi-square CDF.
pub fn chisq_cdf(x: f64, df: f64) -> Result<f64> {
    check_df("df", df)?;
    if x.is_nan() || x < 0.0 {
        return Err(invalid(format!("chisq_cdf argument must be >= 0, got {x}")));
    }
    Ok(gamma_pq(0.5 * df, 0.5 * x).0)
}

/// Chi-square upper tail `P(X > x)`.
pub fn chisq_sf(x: f64, df: f64) -> Result<f64> {
    check_df("df", df)?;
    if x.is_nan() || x < 0.0 {
        return Err(invalid(format!("chisq_sf argument must be >= 0, got {x}")));
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(gamma_pq(0.5 * df, 0.5 * x).1)
}

/// Upper-tail critical value of the F distribution: `P(F > c) = alpha`.
pub fn f_critical(alpha: f64, df1: f64, df2: f64) -> Result<f64> {
    check_df("df1", df1)?;
    check_df("df2", df2)?;
    check_alpha(alpha)?;
    // solve I_x(df1/2, df2/2) = 1 - alpha for x = df1 F / (df1 F + df2)
    let (a, b) = (0.5 * df1, 0.5 * df2);
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        // upper tail of the beta variable
        let upper = beta_reg_xy(b, a, 1.0 - mid, mid);
        if upper > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    Ok(df2 * x / (df1 * (1.0 - x)))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Which test the analytic oracle describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerTest {
    /// Two-sided t test; the noncentrality is the shift `delta` of the t statistic.
    T,
    /// Upper-tail F test; the noncentrality is `lambda`.
    F,
}

/// Exact power of a t or F test under its noncentral distribution.
///
/// The noncentral F upper tail is summed as a Poisson mixture of central
/// incomplete-beta tails. For the t test `df1` is ignored and the two-sided
/// test is evaluated as F(1, df2) with `lambda = delta^2`.
pub fn analytic_power_oracle(test: PowerTest, df1: usize, df2: usize, noncentrality: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if df2 == 0 {
        return Err(invalid("df2 must be >= 1"));
    }
    let (df1, lambda) = match test {
        PowerTest::T => (1.0, noncentrality * noncentrality),
        PowerTest::F => {
            if df1 == 0 {
                return Err(invalid("df1 must be >= 1"));
            }
            if !(noncentrality >= 0.0) {
                return Err(invalid(format!("noncentrality must be >= 0, got {noncentrality}")));
            }
            (df1 as f64, noncentrality)
        }
    };
    let df2 = df2 as f64;
    if lambda.is_infinite() {
        return Ok(1.0);
    }
    let crit = f_critical(alpha, df1, df2)?;
    if lambda == 0.0 {
        return Ok(alpha);
    }
    Ok(noncentral_f_sf(crit, df1, df2, lambda))
}

/// `P(F' > x)` for the noncentral F distribution.
pub fn noncentral_f_sf(x: f64, df1: f64, df2: f64, lambda: f64) -> f64 {
    let half = 0.5 * lambda;
    let (u, v) = (df1 * x, df2);
    let (bx, by) = (v / (u + v), u / (u + v));
    let mode = half.floor();
    let spread = 12.0 * half.sqrt() + 30.0;
    let lo = (mode - spread).max(0.0) as u64;
    let hi = (mode + spread) as u64;
    let mut total = 0.0;
    let mut weight_sum = 0.0;
    for j in lo..=hi {
        let jf = j as f64;
        let ln_w = -half + jf * half.ln() - ln_gamma(jf + 1.0);
        let w = ln_w.exp();
        if w == 0.0 && jf > half {
            break;
        }
        weight_sum += w;
        total += w * beta_reg_xy(0.5 * df2, 0.5 * df1 + jf, bx, by);
    }
    // renormalise the truncated Poisson window
    (total / weight_sum.max(TINY)).clamp(0.0, 1.0)
}

/// Power of the coefficient test when the design is random.
///
/// The noncentrality is `effect_sq * S` where `S ~ chi-square(design_df)` is
/// the predictor's centred sum of squares; analytic power is averaged over
/// `S` with composite Simpson quadrature. For a single standard-normal
/// predictor with `N` rows, `design_df = N - 1`.
pub fn random_design_power(test: PowerTest, df1: usize, df2: usize, effect_sq: f64, design_df: usize, alpha: f64) -> Result<f64> {
    if design_df == 0 {
        return Err(invalid("design_df must be >= 1"));
    }
    if !(effect_sq >= 0.0) {
        return Err(invalid("effect_sq must be >= 0"));
    }
    let m = design_df as f64;
    let upper = m + 40.0 * (2.0 * m).sqrt() + 60.0;
    let density = |s: f64| -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let k = 0.5 * m;
        ((k - 1.0) * s.ln() - 0.5 * s - k * 2f64.ln() - ln_gamma(k)).exp()
    };
    let power_at = |s: f64| -> Result<f64> {
        match test {
            PowerTest::T => analytic_power_oracle(test, df1, df2, (effect_sq * s).sqrt(), alpha),
            PowerTest::F => analytic_power_oracle(test, df1, df2, effect_sq * s, alpha),
        }
    };
    // integrate in sqrt(s) to tame the s^(k/2-1) behaviour at the origin
    let panels = 2000usize;
    let r_hi = upper.sqrt();
    let h = r_hi / panels as f64;
    let mut acc = 0.0;
    for i in 0..=panels {
        let r = i as f64 * h;
        let s = r * r;
        let f = if s == 0.0 { 0.0 } else { density(s) * 2.0 * r * power_at(s)? };
        let coeff = if i == 0 || i == panels {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += coeff * f;
    }
    Ok((acc * h / 3.0).clamp(0.0, 1.0))
}
