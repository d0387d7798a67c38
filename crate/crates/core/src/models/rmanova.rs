use serde::{Deserialize, Serialize};

use super::{FTest, Matrix};
use crate::error::{invalid, Result};
use crate::special::f_sf;

/// A within-subject effect in a two-factor repeated-measures design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Effect {
    A,
    B,
    AB,
}

/// Within-subject F tests; an effect with a single level has no test.
#[derive(Debug, Clone, PartialEq)]
pub struct RmAnovaTable {
    pub a: Option<FTest>,
    pub b: Option<FTest>,
    pub ab: Option<FTest>,
}

impl RmAnovaTable {
    pub fn get(&self, effect: Effect) -> Option<&FTest> {
        match effect {
            Effect::A => self.a.as_ref(),
            Effect::B => self.b.as_ref(),
            Effect::AB => self.ab.as_ref(),
        }
    }

    /// Bonferroni-adjusted minimum p-value across `effects`.
    pub fn combined_p(&self, effects: &[Effect]) -> Result<f64> {
        let ps: Vec<f64> = effects.iter().filter_map(|e| self.get(*e)).map(|t| t.p_value).collect();
        if ps.is_empty() {
            return Err(invalid("none of the requested effects is testable in this layout"));
        }
        let min = ps.iter().copied().fold(1.0, f64::min);
        Ok((min * ps.len() as f64).min(1.0))
    }
}

fn f_test(ss_effect: f64, df_effect: f64, ss_error: f64, df_error: f64, scale: f64) -> Result<FTest> {
    let zero = 1e-12 * scale;
    if ss_effect <= zero {
        return Ok(FTest { statistic: 0.0, df1: df_effect, df2: df_error, p_value: 1.0 });
    }
    if ss_error <= zero {
        return Ok(FTest { statistic: f64::INFINITY, df1: df_effect, df2: df_error, p_value: 0.0 });
    }
    let statistic = (ss_effect / df_effect) / (ss_error / df_error);
    Ok(FTest { statistic, df1: df_effect, df2: df_error, p_value: f_sf(statistic, df_effect, df_error)? })
}

/// Classical two-way within-subjects ANOVA.
///
/// `responses` holds subjects in rows and the `levels_a * levels_b`
/// conditions in columns, A-major. Each effect is tested against its own
/// effect-by-subject interaction.
pub fn rmanova_f_test(responses: &Matrix, levels_a: usize, levels_b: usize) -> Result<RmAnovaTable> {
    let (n, m) = responses.shape();
    if levels_a == 0 || levels_b == 0 || m != levels_a * levels_b {
        return Err(invalid(format!("{m} conditions do not match a {levels_a}x{levels_b} layout")));
    }
    if n < 2 {
        return Err(invalid("repeated-measures ANOVA needs at least two subjects"));
    }
    let (a, b) = (levels_a, levels_b);
    let y = |i: usize, ja: usize, jb: usize| responses[(i, ja * b + jb)];
    let nf = n as f64;

    let grand = responses.iter().sum::<f64>() / (n * m) as f64;
    let subj: Vec<f64> = (0..n).map(|i| responses.row(i).iter().sum::<f64>() / m as f64).collect();
    let mean_a: Vec<f64> =
        (0..a).map(|ja| (0..n).flat_map(|i| (0..b).map(move |jb| (i, jb))).map(|(i, jb)| y(i, ja, jb)).sum::<f64>() / (n * b) as f64).collect();
    let mean_b: Vec<f64> =
        (0..b).map(|jb| (0..n).flat_map(|i| (0..a).map(move |ja| (i, ja))).map(|(i, ja)| y(i, ja, jb)).sum::<f64>() / (n * a) as f64).collect();
    let cell = |ja: usize, jb: usize| (0..n).map(|i| y(i, ja, jb)).sum::<f64>() / nf;
    let subj_a = |i: usize, ja: usize| (0..b).map(|jb| y(i, ja, jb)).sum::<f64>() / b as f64;
    let subj_b = |i: usize, jb: usize| (0..a).map(|ja| y(i, ja, jb)).sum::<f64>() / a as f64;

    let total: f64 = responses.iter().map(|v| (v - grand).powi(2)).sum();
    let scale = total.max(responses.iter().map(|v| v * v).sum::<f64>()).max(f64::MIN_POSITIVE);

    let ss_a = nf * b as f64 * mean_a.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_b = nf * a as f64 * mean_b.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let mut ss_as = 0.0;
    for i in 0..n {
        for ja in 0..a {
            ss_as += (subj_a(i, ja) - subj[i] - mean_a[ja] + grand).powi(2);
        }
    }
    ss_as *= b as f64;
    let mut ss_bs = 0.0;
    for i in 0..n {
        for jb in 0..b {
            ss_bs += (subj_b(i, jb) - subj[i] - mean_b[jb] + grand).powi(2);
        }
    }
    ss_bs *= a as f64;
    let mut ss_ab = 0.0;
    for ja in 0..a {
        for jb in 0..b {
            ss_ab += (cell(ja, jb) - mean_a[ja] - mean_b[jb] + grand).powi(2);
        }
    }
    ss_ab *= nf;
    let mut ss_abs = 0.0;
    for i in 0..n {
        for ja in 0..a {
            for jb in 0..b {
                let r = y(i, ja, jb) - subj_a(i, ja) - subj_b(i, jb) - cell(ja, jb) + subj[i] + mean_a[ja] + mean_b[jb]
                    - grand;
                ss_abs += r * r;
            }
        }
    }

    let (dfa, dfb, dfs) = ((a - 1) as f64, (b - 1) as f64, nf - 1.0);
    Ok(RmAnovaTable {
        a: (a > 1).then(|| f_test(ss_a, dfa, ss_as, dfa * dfs, scale)).transpose()?,
        b: (b > 1).then(|| f_test(ss_b, dfb, ss_bs, dfb * dfs, scale)).transpose()?,
        ab: (a > 1 && b > 1).then(|| f_test(ss_ab, dfa * dfb, ss_abs, dfa * dfb * dfs, scale)).transpose()?,
    })
}
