//! Per-run and per-cell metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::footprint;
use crate::sim::RunSummary;

/// Planning failure rate.
pub fn compute_pfr(failed: usize, issued: usize) -> Result<f64> {
    if issued == 0 {
        return Err(Error::NoRequestsIssued);
    }
    if failed > issued {
        return Err(Error::InvalidParams(format!("failed {failed} exceeds issued {issued}")));
    }
    Ok(failed as f64 / issued as f64)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub issued: usize,
    pub failed: usize,
    pub pfr: f64,
    /// Mean composition time over successful requests, seconds.
    pub ct_mean: f64,
    /// Mean over requests of peak live-state kilobytes.
    pub mu_mean: f64,
    pub mu_peak: f64,
    /// Composition times of successful requests.
    #[serde(skip)]
    pub ct: Vec<f64>,
    /// Per-request peak kilobytes.
    #[serde(skip)]
    pub mu: Vec<f64>,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

impl RunMetrics {
    pub fn from_samples(issued: usize, failed: usize, ct: Vec<f64>, mu: Vec<f64>) -> Result<Self> {
        Ok(RunMetrics {
            issued,
            failed,
            pfr: compute_pfr(failed, issued)?,
            ct_mean: mean(&ct),
            mu_mean: mean(&mu),
            mu_peak: mu.iter().copied().fold(0.0, f64::max),
            ct,
            mu,
        })
    }

    pub fn from_run(run: &RunSummary) -> Result<Self> {
        let ct = run.requests.iter().filter_map(|r| r.composition_time()).collect();
        let mu = run.requests.iter().map(|r| footprint::kilobytes(r.mu_peak)).collect();
        Self::from_samples(run.issued(), run.failed(), ct, mu)
    }

    /// Pools runs as if they were one long run.
    pub fn pool<'a>(runs: impl IntoIterator<Item = &'a RunMetrics>) -> Result<Self> {
        let (mut issued, mut failed, mut ct, mut mu) = (0, 0, Vec::new(), Vec::new());
        for r in runs {
            issued += r.issued;
            failed += r.failed;
            ct.extend_from_slice(&r.ct);
            mu.extend_from_slice(&r.mu);
        }
        Self::from_samples(issued, failed, ct, mu)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pfr_examples() {
        assert_eq!(compute_pfr(0, 10).unwrap(), 0.0);
        assert_eq!(compute_pfr(2, 10).unwrap(), 0.2);
        assert_eq!(compute_pfr(182, 1000).unwrap(), 0.182);
        assert_eq!(compute_pfr(0, 0), Err(Error::NoRequestsIssued));
        assert!(compute_pfr(3, 2).is_err());
    }

    #[test]
    fn pooling_weights_by_sample() {
        let a = RunMetrics::from_samples(2, 1, vec![1.0], vec![2.0, 4.0]).unwrap();
        let b = RunMetrics::from_samples(2, 0, vec![2.0, 3.0], vec![1.0, 1.0]).unwrap();
        let p = RunMetrics::pool([&a, &b]).unwrap();
        assert_eq!((p.issued, p.failed), (4, 1));
        assert_eq!(p.pfr, 0.25);
        assert_eq!(p.ct_mean, 2.0);
        assert_eq!(p.mu_mean, 2.0);
        assert_eq!(p.mu_peak, 4.0);
    }
}
