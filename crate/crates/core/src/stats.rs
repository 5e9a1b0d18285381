//! Monte Carlo summaries with reproducible reductions.

use serde::{Deserialize, Serialize};

/// Sum by recursive halving; the result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Sample mean and standard error of the mean (0 for fewer than two samples).
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let m = mean(xs);
    if n < 2 {
        return (m, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    (m, (var / n as f64).sqrt())
}

/// A Monte Carlo estimate with its standard error and sample counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_outer: usize,
    pub n_inner: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl IntensityEstimate {
    pub fn exact(value: f64) -> Self {
        IntensityEstimate {
            value,
            std_error: 0.0,
            n_outer: 0,
            n_inner: 0,
            warnings: Vec::new(),
        }
    }

    pub fn from_samples(samples: &[f64], n_inner: usize) -> Self {
        let (value, std_error) = mean_and_se(samples);
        IntensityEstimate {
            value,
            std_error,
            n_outer: samples.len(),
            n_inner,
            warnings: Vec::new(),
        }
    }

    /// `value ± k·std_error`.
    pub fn interval(&self, k: f64) -> (f64, f64) {
        (self.value - k * self.std_error, self.value + k * self.std_error)
    }

    /// True if the `k`-SE intervals of the two estimates intersect.
    pub fn overlaps(&self, other: &IntensityEstimate, k: f64) -> bool {
        let (a0, a1) = self.interval(k);
        let (b0, b1) = other.interval(k);
        a0 <= b1 && b0 <= a1
    }

    /// True if `target` lies within `k` standard errors.
    pub fn covers(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.std_error
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.value *= factor;
        self.std_error *= factor.abs();
        self
    }
}
