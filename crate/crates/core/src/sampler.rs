//! Centroid-plus-neighbours sampling of the parameter space.
//!
//! Each round draws a uniform centroid from the domain box and `local`
//! Gaussian neighbours around it, so the sample covers the box while also
//! probing near-equivalent coefficient vectors around each centroid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::power::ParameterPoint;
use crate::rng::{standard_normal, RngStream};
use rand::Rng;

/// Sampler settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Total points to emit.
    pub total: usize,
    /// Neighbours drawn around each centroid.
    pub local: usize,
    /// Gaussian scale of neighbour coefficients.
    pub sigma_local: f64,
    /// Gaussian scale of neighbour sample sizes; `None` reuses `sigma_local`.
    #[serde(default)]
    pub sigma_n: Option<f64>,
    /// `[lo, hi]` for each coefficient.
    pub beta_domain: Vec<[f64; 2]>,
    /// `[lo, hi]` for the sample size.
    pub n_domain: [f64; 2],
}

impl SamplerConfig {
    /// The same `[lo, hi]` for each of `k` coefficients.
    pub fn uniform_box(k: usize, beta: [f64; 2], n: [f64; 2], total: usize, local: usize, sigma_local: f64) -> Self {
        Self { total, local, sigma_local, sigma_n: None, beta_domain: vec![beta; k], n_domain: n }
    }

    pub fn k(&self) -> usize {
        self.beta_domain.len()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, [lo, hi]) in self.beta_domain.iter().enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Specification(format!("beta_domain[{i}]: need lo < hi, got [{lo}, {hi}]")));
            }
        }
        let [lo, hi] = self.n_domain;
        if !(lo < hi) || lo < 1.0 || !hi.is_finite() {
            return Err(Error::Specification(format!("n_domain: need 1 <= lo < hi, got [{lo}, {hi}]")));
        }
        if !(self.sigma_local > 0.0) || !self.sigma_local.is_finite() {
            return Err(Error::Specification(format!("sigma_local must be > 0, got {}", self.sigma_local)));
        }
        if let Some(s) = self.sigma_n {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::Specification(format!("sigma_n must be > 0, got {s}")));
            }
        }
        if self.beta_domain.is_empty() {
            return Err(Error::Specification("beta_domain is empty".into()));
        }
        Ok(())
    }

    fn clamp_n(&self, n: f64) -> usize {
        let lo = self.n_domain[0].ceil();
        let hi = self.n_domain[1].floor();
        n.round().clamp(lo, hi) as usize
    }
}

/// Sample exactly `config.total` parameter points.
///
/// Round `r` uses substream `r` of `stream` and emits its centroid first,
/// then its neighbours. Neighbour coefficients may leave the domain box;
/// sample sizes are rounded and clamped into `n_domain`. The last round is
/// truncated so the output length is exactly `total`.
pub fn p_sampler(config: &SamplerConfig, stream: &RngStream) -> Result<Vec<ParameterPoint>> {
    config.validate()?;
    let sigma_n = config.sigma_n.unwrap_or(config.sigma_local);
    let mut out = Vec::with_capacity(config.total);
    let mut round = 0u64;
    while out.len() < config.total {
        let mut rng = stream.child(round).generator();
        let centroid: Vec<f64> = config.beta_domain.iter().map(|[lo, hi]| rng.random_range(*lo..*hi)).collect();
        let [nlo, nhi] = config.n_domain;
        let n_centre = rng.random_range(nlo..nhi);
        out.push(ParameterPoint::new(centroid.clone(), config.clamp_n(n_centre)));
        for _ in 0..config.local {
            if out.len() >= config.total {
                break;
            }
            let beta = centroid.iter().map(|c| c + config.sigma_local * standard_normal(&mut rng)).collect();
            let n = config.clamp_n(n_centre + sigma_n * standard_normal(&mut rng));
            out.push(ParameterPoint::new(beta, n));
        }
        round += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_uniform_when_no_neighbours() {
        let cfg = SamplerConfig::uniform_box(3, [0.1, 0.3], [10.0, 200.0], 50, 0, 0.02);
        let pts = p_sampler(&cfg, &RngStream::new(4)).unwrap();
        assert_eq!(pts.len(), 50);
        for p in &pts {
            assert!(p.beta.iter().all(|b| (0.1..0.3).contains(b)));
            assert!((10..=200).contains(&p.n));
        }
    }

    #[test]
    fn exact_count_and_centroids_first() {
        let cfg = SamplerConfig::uniform_box(2, [-1.0, 1.0], [10.0, 100.0], 10, 4, 0.1);
        let pts = p_sampler(&cfg, &RngStream::new(4)).unwrap();
        assert_eq!(pts.len(), 10);
        let cfg = SamplerConfig::uniform_box(2, [-1.0, 1.0], [10.0, 100.0], 12, 4, 0.1);
        let pts = p_sampler(&cfg, &RngStream::new(4)).unwrap();
        assert_eq!(pts.len(), 12);
        // rounds start at multiples of 5; each is inside the box
        for c in pts.iter().step_by(5) {
            assert!(c.beta.iter().all(|b| (-1.0..1.0).contains(b)));
        }
    }

    #[test]
    fn neighbour_spread() {
        // one centroid with 10^4 neighbours
        let mut cfg = SamplerConfig::uniform_box(3, [0.0, 1.0], [10.0, 100.0], 10_001, 10_000, 0.25);
        cfg.sigma_n = Some(5.0);
        let pts = p_sampler(&cfg, &RngStream::new(11)).unwrap();
        let centre = &pts[0].beta;
        for d in 0..3 {
            let dev: Vec<f64> = pts[1..].iter().map(|p| p.beta[d] - centre[d]).collect();
            let sd = (dev.iter().map(|v| v * v).sum::<f64>() / dev.len() as f64).sqrt();
            assert!((sd / 0.25 - 1.0).abs() <= 0.05, "dimension {d}: {sd}");
        }
        assert!(pts.iter().all(|p| (10..=100).contains(&p.n)));
    }

    #[test]
    fn zero_total_and_invalid_domains() {
        let cfg = SamplerConfig::uniform_box(3, [0.0, 1.0], [10.0, 100.0], 0, 4, 0.1);
        assert!(p_sampler(&cfg, &RngStream::new(1)).unwrap().is_empty());
        let bad = SamplerConfig::uniform_box(3, [1.0, 0.0], [10.0, 100.0], 5, 4, 0.1);
        assert!(p_sampler(&bad, &RngStream::new(1)).is_err());
        let bad = SamplerConfig::uniform_box(3, [0.0, 1.0], [10.0, 100.0], 5, 4, 0.0);
        assert!(p_sampler(&bad, &RngStream::new(1)).is_err());
    }

    #[test]
    fn reproducible() {
        let cfg = SamplerConfig::uniform_box(4, [0.0, 1.0], [10.0, 100.0], 37, 3, 0.1);
        assert_eq!(p_sampler(&cfg, &RngStream::new(5)).unwrap(), p_sampler(&cfg, &RngStream::new(5)).unwrap());
    }
}
