//! Empirical summaries of simulated patterns.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ball_volume, dist2, Window};
use crate::pattern::PointPattern;
use crate::stats::{mean_and_se, IntensityEstimate};

/// Mean number of points per unit volume of `region`, with the across-replicate SE.
pub fn box_intensity(patterns: &[PointPattern], region: &Window) -> Result<IntensityEstimate> {
    if patterns.len() < 2 {
        return Err(Error::param("patterns", "at least two replicates are needed"));
    }
    let vol = region.volume();
    if !(vol > 0.0) {
        return Err(Error::InvalidWindow("region has zero volume".into()));
    }
    if let Some(p) = patterns.iter().find(|p| !p.window().contains_window(region)) {
        return Err(Error::InvalidWindow(format!(
            "region {:?}..{:?} is not inside the pattern window {:?}..{:?}",
            region.lower(),
            region.upper(),
            p.window().lower(),
            p.window().upper()
        )));
    }
    let samples: Vec<f64> = patterns.iter().map(|p| p.count_in(region) as f64 / vol).collect();
    Ok(IntensityEstimate::from_samples(&samples, 1))
}

/// Binned pair-correlation and second-order intensity estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCorrelationEstimate {
    /// Bin centres.
    pub radii: Vec<f64>,
    pub bin_edges: Vec<f64>,
    pub g_values: Vec<f64>,
    pub g_std_errors: Vec<f64>,
    /// `ρ⁽²⁾` averaged over each distance shell.
    pub rho2_values: Vec<f64>,
    pub rho2_std_errors: Vec<f64>,
    /// Ordered pairs counted per bin, summed over replicates.
    pub counts: Vec<u64>,
    pub intensity: f64,
}

/// Minus-sampling estimator: ordered pairs `(x, y)` with `x` in the window eroded by
/// `border` and `‖x − y‖` in a bin are counted and divided by the eroded volume
/// and the shell volume. `g` divides by the squared mean intensity.
pub fn pair_correlation(
    patterns: &[PointPattern],
    r_max: f64,
    n_bins: usize,
    border: f64,
) -> Result<PairCorrelationEstimate> {
    if n_bins < 1 {
        return Err(Error::param("n_bins", "need at least one bin"));
    }
    if !(r_max > 0.0) {
        return Err(Error::param("r_max", format!("must be > 0, got {r_max}")));
    }
    if !(border >= r_max) {
        return Err(Error::param("border", format!("minus-sampling depth {border} must be >= r_max {r_max}")));
    }
    let first = patterns
        .first()
        .ok_or_else(|| Error::param("patterns", "at least one pattern is required"))?;
    let window = first.window();
    let shortest = window.sides().into_iter().fold(f64::INFINITY, f64::min);
    if !(r_max < 0.5 * shortest) {
        return Err(Error::param("r_max", format!("must be below half the shortest side {shortest}")));
    }
    if patterns.iter().any(|p| p.window().sides() != window.sides()) {
        return Err(Error::InvalidWindow("all patterns need congruent windows".into()));
    }
    let d = first.dim();
    let inner_vol: f64 = window.sides().iter().map(|s| s - 2.0 * border).product();
    if !(inner_vol > 0.0) {
        return Err(Error::param("border", "eroded window is empty"));
    }
    let h = r_max / n_bins as f64;
    let edges: Vec<f64> = (0..=n_bins).map(|k| k as f64 * h).collect();
    let shells: Vec<f64> = (0..n_bins)
        .map(|k| ball_volume(d, edges[k + 1]).and_then(|b| Ok(b - ball_volume(d, edges[k])?)))
        .collect::<Result<_>>()?;
    let r2max = r_max * r_max;

    let per_rep: Vec<Vec<u64>> = patterns
        .par_iter()
        .map(|p| {
            let lo = p.window().lower();
            let hi = p.window().upper();
            let mut counts = vec![0u64; n_bins];
            for i in 0..p.len() {
                let x = p.point(i);
                if (0..d).any(|a| x[a] - lo[a] < border || hi[a] - x[a] < border) {
                    continue;
                }
                for j in 0..p.len() {
                    if i == j {
                        continue;
                    }
                    let r2 = dist2(x, p.point(j));
                    if r2 < r2max {
                        let k = ((r2.sqrt() / h) as usize).min(n_bins - 1);
                        counts[k] += 1;
                    }
                }
            }
            counts
        })
        .collect();

    let n_reps = patterns.len();
    let intensities: Vec<f64> = patterns.iter().map(|p| p.len() as f64 / window.volume()).collect();
    let (lambda, _) = mean_and_se(&intensities);
    let mut rho2_values = Vec::with_capacity(n_bins);
    let mut rho2_std_errors = Vec::with_capacity(n_bins);
    let mut counts = vec![0u64; n_bins];
    for k in 0..n_bins {
        let samples: Vec<f64> = per_rep.iter().map(|c| c[k] as f64 / (inner_vol * shells[k])).collect();
        let (m, se) = if n_reps >= 2 { mean_and_se(&samples) } else { (samples[0], 0.0) };
        rho2_values.push(m);
        rho2_std_errors.push(se);
        counts[k] = per_rep.iter().map(|c| c[k]).sum();
    }
    let l2 = lambda * lambda;
    let (g_values, g_std_errors) = if l2 > 0.0 {
        (
            rho2_values.iter().map(|v| v / l2).collect(),
            rho2_std_errors.iter().map(|v| v / l2).collect(),
        )
    } else {
        (vec![0.0; n_bins], vec![0.0; n_bins])
    };
    Ok(PairCorrelationEstimate {
        radii: (0..n_bins).map(|k| 0.5 * (edges[k] + edges[k + 1])).collect(),
        bin_edges: edges,
        g_values,
        g_std_errors,
        rho2_values,
        rho2_std_errors,
        counts,
        intensity: lambda,
    })
}

/// Kolmogorov-type distance restricted to `[z_min, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfDistance {
    pub distance: f64,
    /// Sample points at or above `z_min`.
    pub points_used: usize,
    /// Set when no sample lies at or above `z_min`; the distance is then 0.
    pub empty: bool,
}

/// `sup |F̂ − F|` over sample points `z >= z_min`, checking both one-sided limits of
/// the empirical CDF `F̂` of all samples.
pub fn empirical_cdf_distance(samples: &[f64], cdf: impl Fn(f64) -> f64, z_min: f64) -> Result<CdfDistance> {
    if samples.is_empty() {
        return Err(Error::param("samples", "need at least one sample"));
    }
    if samples.iter().any(|v| v.is_nan()) {
        return Err(Error::param("samples", "NaN sample"));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut distance: f64 = 0.0;
    let mut used = 0;
    let mut i = 0;
    while i < s.len() {
        // group ties so the jump at z is taken in one step
        let z = s[i];
        let mut j = i;
        while j < s.len() && s[j] == z {
            j += 1;
        }
        if z >= z_min {
            let f = cdf(z);
            distance = distance.max((i as f64 / n - f).abs()).max((j as f64 / n - f).abs());
            used += j - i;
        }
        i = j;
    }
    Ok(CdfDistance {
        distance,
        points_used: used,
        empty: used == 0,
    })
}
