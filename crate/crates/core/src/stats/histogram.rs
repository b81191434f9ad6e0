use serde::{Deserialize, Serialize};

use super::{mean, std_dev};
use crate::error::{Error, Result};

pub const HISTOGRAM_BINS: usize = 61;
/// Half-width of the shared support, in pooled standard deviations.
pub const HISTOGRAM_SPAN_STD: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub masses: Vec<f64>,
}

/// `bins + 1` ascending edges spanning pooled mean ± 5 pooled std of all
/// `samples` together. A zero-spread pool gets a unit-width support.
pub fn shared_edges(samples: &[&[f64]], bins: usize) -> Vec<f64> {
    let pooled: Vec<f64> = samples.iter().flat_map(|s| s.iter().copied()).filter(|v| v.is_finite()).collect();
    let (m, s) = (mean(&pooled), std_dev(&pooled));
    let half = if s > 0.0 { HISTOGRAM_SPAN_STD * s } else { 0.5 };
    let (lo, hi) = (m - half, m + half);
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
    edges[bins] = hi;
    edges
}

impl Histogram {
    /// Normalised histogram of `sample` on `edges`; values outside the
    /// support fall into the end bins. An empty sample is spread uniformly.
    pub fn from_sample(sample: &[f64], edges: &[f64]) -> Result<Self> {
        if edges.len() < 2 || edges.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
            return Err(Error::arg("edges", "need at least two strictly ascending edges"));
        }
        let bins = edges.len() - 1;
        let mut counts = vec![0u64; bins];
        let mut total = 0u64;
        for &v in sample.iter().filter(|v| !v.is_nan()) {
            // first edge strictly greater than v, minus one
            let i = edges.partition_point(|&e| e <= v).saturating_sub(1).min(bins - 1);
            counts[i] += 1;
            total += 1;
        }
        let masses = if total == 0 {
            vec![1.0 / bins as f64; bins]
        } else {
            counts.iter().map(|&c| c as f64 / total as f64).collect()
        };
        Ok(Self { edges: edges.to_vec(), masses })
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

/// L1 distance between two histograms on identical edges, in [0, 2].
pub fn histogram_distance(a: &Histogram, b: &Histogram) -> Result<f64> {
    if a.edges != b.edges || a.masses.len() != b.masses.len() {
        return Err(Error::MismatchedEdges);
    }
    Ok(a.masses.iter().zip(&b.masses).map(|(x, y)| (x - y).abs()).sum())
}
