//! Sample summaries and pooling of replication metrics.

use alloc::vec::Vec;

use crate::control::FallbackEvent;
use crate::error::{Error, Result};

/// Five-number summary plus mean and population variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionSummary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    /// Population variance (divides by n).
    pub variance: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
}

/// Linear-interpolation quantile of sorted data (R type 7).
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl DistributionSummary {
    /// `None` for an empty sample.
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mean = sorted.iter().sum::<f64>() / n;
        let variance = sorted.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        Some(Self {
            count: sorted.len(),
            mean,
            median: quantile_sorted(&sorted, 0.5),
            variance,
            q1: quantile_sorted(&sorted, 0.25),
            q3: quantile_sorted(&sorted, 0.75),
            min: sorted[0],
            max: sorted[sorted.len() - 1],
        })
    }
}

/// Fallback events by cause.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FallbackCounts {
    pub packet_drop: u64,
    pub infeasible: u64,
    pub odd_exit: u64,
    pub ads_failure: u64,
}

impl FallbackCounts {
    pub fn record(&mut self, event: FallbackEvent) {
        match event {
            FallbackEvent::PacketDrop => self.packet_drop += 1,
            FallbackEvent::InfeasibleSolution => self.infeasible += 1,
            FallbackEvent::OddExit => self.odd_exit += 1,
            FallbackEvent::AdsFailure => self.ads_failure += 1,
        }
    }

    pub fn add(&mut self, other: &FallbackCounts) {
        self.packet_drop += other.packet_drop;
        self.infeasible += other.infeasible;
        self.odd_exit += other.odd_exit;
        self.ads_failure += other.ads_failure;
    }
}

/// Raw post-warm-up observations of one replication.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Observations {
    pub trials: u64,
    pub successes: u64,
    pub xi_samples: Vec<f64>,
    pub fallbacks: FallbackCounts,
    pub throughput_vph: f64,
}

/// Communication metrics of one replication or a pool of them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub trials: u64,
    pub successes: u64,
    /// Successful trials over trials; `None` when there were no trials.
    pub reception_rate: Option<f64>,
    pub xi: Option<DistributionSummary>,
    pub fallbacks: FallbackCounts,
    pub throughput_vph: f64,
}

impl Metrics {
    pub fn from_observations(obs: &Observations) -> Self {
        Self {
            trials: obs.trials,
            successes: obs.successes,
            reception_rate: rate(obs.successes, obs.trials),
            xi: DistributionSummary::from_samples(&obs.xi_samples),
            fallbacks: obs.fallbacks,
            throughput_vph: obs.throughput_vph,
        }
    }
}

fn rate(successes: u64, trials: u64) -> Option<f64> {
    (trials > 0).then(|| successes as f64 / trials as f64)
}

/// Pools replications: samples are concatenated, counts summed, the
/// reception rate is total successes over total trials and throughput is
/// the mean across replications.
pub fn aggregate(results: &[Observations]) -> Result<Metrics> {
    if results.is_empty() {
        return Err(Error::InvalidParameters("nothing to aggregate".into()));
    }
    let mut pooled = Observations::default();
    for r in results {
        pooled.trials += r.trials;
        pooled.successes += r.successes;
        pooled.xi_samples.extend_from_slice(&r.xi_samples);
        pooled.fallbacks.add(&r.fallbacks);
        pooled.throughput_vph += r.throughput_vph;
    }
    pooled.throughput_vph /= results.len() as f64;
    Ok(Metrics::from_observations(&pooled))
}
