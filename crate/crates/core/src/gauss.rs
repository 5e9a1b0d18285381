//! Gaussian random fields on grids, log-Gaussian intensities and Palm shifts.
//!
//! Fields are simulated exactly at cell centres by a dense Cholesky factor of the
//! covariance matrix. The factor depends only on the covariance model and the grid,
//! so one [`GrfSampler`] serves the plain mean and every Palm-shifted mean.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::field::GridField;
use crate::geometry::{dist, Grid};
use crate::pattern::Coords;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovarianceFamily {
    /// `σ² exp(−r/ρ)`
    Exponential,
    /// `σ² exp(−(r/ρ)²)`
    SquaredExponential,
    /// `σ² (1 + √3 r/ρ) exp(−√3 r/ρ)`
    #[serde(rename = "matern-3/2")]
    Matern32,
}

impl fmt::Display for CovarianceFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CovarianceFamily::Exponential => "exponential",
            CovarianceFamily::SquaredExponential => "squared-exponential",
            CovarianceFamily::Matern32 => "matern-3/2",
        })
    }
}

impl FromStr for CovarianceFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exponential" => Ok(CovarianceFamily::Exponential),
            "squared-exponential" | "gaussian" => Ok(CovarianceFamily::SquaredExponential),
            "matern-3/2" | "matern32" => Ok(CovarianceFamily::Matern32),
            other => Err(Error::param("family", format!("unknown covariance family `{other}`"))),
        }
    }
}

/// Stationary isotropic covariance `C(x, y) = σ² k(‖x − y‖ / ρ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceModel {
    pub family: CovarianceFamily,
    pub variance: f64,
    pub range: f64,
}

impl CovarianceModel {
    pub fn new(family: CovarianceFamily, variance: f64, range: f64) -> Result<Self> {
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(Error::param("variance", format!("must be finite and > 0, got {variance}")));
        }
        if !(range > 0.0) || !range.is_finite() {
            return Err(Error::param("range", format!("must be finite and > 0, got {range}")));
        }
        Ok(CovarianceModel {
            family,
            variance,
            range,
        })
    }

    #[inline]
    pub fn at_distance(&self, r: f64) -> f64 {
        let h = r / self.range;
        let k = match self.family {
            CovarianceFamily::Exponential => (-h).exp(),
            CovarianceFamily::SquaredExponential => (-h * h).exp(),
            CovarianceFamily::Matern32 => {
                let s = 3f64.sqrt() * h;
                (1.0 + s) * (-s).exp()
            }
        };
        self.variance * k
    }

    #[inline]
    pub fn cov(&self, x: &[f64], y: &[f64]) -> f64 {
        self.at_distance(dist(x, y))
    }

    /// Dense covariance matrix of the grid cell centres (row-major, full).
    pub fn matrix(&self, grid: &Grid) -> Vec<f64> {
        let n = grid.len();
        let c = grid.centres();
        let d = grid.dim();
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = self.cov(&c[i * d..(i + 1) * d], &c[j * d..(j + 1) * d]);
                m[i * n + j] = v;
                m[j * n + i] = v;
            }
        }
        m
    }
}

/// Base of a mean function before Palm shifts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanBase {
    Constant(f64),
    /// Tabulated values, evaluated by nearest-cell lookup.
    Tabulated(GridField),
}

/// Mean `μ̃(x) = μ(x) + Σ_anchors C(x, anchor)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFunction {
    pub base: MeanBase,
    pub shift_anchors: Vec<Coords>,
}

impl MeanFunction {
    pub fn constant(mu: f64) -> Self {
        MeanFunction {
            base: MeanBase::Constant(mu),
            shift_anchors: Vec::new(),
        }
    }

    pub fn tabulated(values: GridField) -> Self {
        MeanFunction {
            base: MeanBase::Tabulated(values),
            shift_anchors: Vec::new(),
        }
    }

    pub fn base_at(&self, x: &[f64]) -> f64 {
        match &self.base {
            MeanBase::Constant(mu) => *mu,
            MeanBase::Tabulated(f) => f.value_at(x),
        }
    }

    pub fn eval(&self, x: &[f64], cov: &CovarianceModel) -> f64 {
        self.base_at(x) + self.shift_anchors.iter().map(|a| cov.cov(x, a)).sum::<f64>()
    }
}

/// Log-Gaussian Cox process: intensity `exp(W + log_scale_offset)`, `W ~ GRF(mean, cov)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LgcpSpec {
    pub mean: MeanFunction,
    pub cov: CovarianceModel,
    #[serde(default)]
    pub log_scale_offset: f64,
}

impl LgcpSpec {
    pub fn new(mean: MeanFunction, cov: CovarianceModel) -> Self {
        LgcpSpec {
            mean,
            cov,
            log_scale_offset: 0.0,
        }
    }

    /// Constant mean `mu` with the given covariance.
    pub fn stationary(mu: f64, cov: CovarianceModel) -> Self {
        LgcpSpec::new(MeanFunction::constant(mu), cov)
    }

    /// A field with variance 1e-12, i.e. a Poisson process with intensity `lambda`.
    pub fn degenerate(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::param("lambda", format!("must be > 0, got {lambda}")));
        }
        Ok(LgcpSpec::stationary(
            lambda.ln(),
            CovarianceModel::new(CovarianceFamily::Exponential, 1e-12, 1.0)?,
        ))
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.log_scale_offset = offset;
        self
    }

    /// Mean of the Gaussian field (including shifts and offset) at `x`.
    pub fn field_mean(&self, x: &[f64]) -> f64 {
        self.mean.eval(x, &self.cov) + self.log_scale_offset
    }

    pub fn field_variance(&self) -> f64 {
        self.cov.variance
    }

    /// First-order intensity `E exp(W(x)) = exp(m(x) + σ²/2)`.
    pub fn intensity(&self, x: &[f64]) -> f64 {
        (self.field_mean(x) + 0.5 * self.cov.variance).exp()
    }

    /// Second-order intensity `exp(m(x) + m(y) + σ² + C(x, y))`.
    pub fn second_order_intensity(&self, x: &[f64], y: &[f64]) -> f64 {
        (self.field_mean(x) + self.field_mean(y) + self.cov.variance + self.cov.cov(x, y)).exp()
    }

    /// Means of the Gaussian field at the grid cell centres.
    pub fn mean_on(&self, grid: &Grid) -> Vec<f64> {
        let d = grid.dim();
        let mut c = vec![0.0; d];
        (0..grid.len())
            .map(|i| {
                grid.centre_into(i, &mut c);
                self.field_mean(&c)
            })
            .collect()
    }
}

/// Palm version of an LGCP given points at `anchors`: the mean gains `Σ C(·, anchor)`.
pub fn palm_shift(spec: &LgcpSpec, anchors: &[&[f64]]) -> Result<LgcpSpec> {
    let total = spec.mean.shift_anchors.len() + anchors.len();
    if total > 2 {
        return Err(Error::param(
            "anchors",
            format!("at most two Palm anchors are supported, got {total}"),
        ));
    }
    let mut out = spec.clone();
    out.mean
        .shift_anchors
        .extend(anchors.iter().map(|a| Coords::from_slice(a)));
    Ok(out)
}

/// Cholesky factor of a grid covariance matrix, reusable across draws and means.
#[derive(Debug, Clone)]
pub struct GrfSampler {
    grid: Grid,
    cov: CovarianceModel,
    /// Lower triangle, packed by rows: row `i` starts at `i(i+1)/2`.
    lower: Vec<f64>,
    jitter: f64,
}

const JITTER_STEPS: [f64; 5] = [1e-12, 1e-11, 1e-10, 1e-9, 1e-8];

impl GrfSampler {
    pub fn new(cov: &CovarianceModel, grid: &Grid) -> Result<Self> {
        let n = grid.len();
        let full = cov.matrix(grid);
        let mut worst_condition: f64 = 0.0;
        for rel in JITTER_STEPS {
            let jitter = rel * cov.variance;
            match cholesky_packed(&full, n, jitter) {
                Ok(lower) => {
                    return Ok(GrfSampler {
                        grid: grid.clone(),
                        cov: *cov,
                        lower,
                        jitter,
                    })
                }
                Err(cond) => worst_condition = worst_condition.max(cond),
            }
        }
        Err(Error::Factorization {
            cells: n,
            jitter: JITTER_STEPS[JITTER_STEPS.len() - 1] * cov.variance,
            condition: worst_condition,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn covariance(&self) -> &CovarianceModel {
        &self.cov
    }

    /// Diagonal jitter that was needed for the factorization.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Draws `L z` (zero-mean field values) into `out`.
    pub fn sample_centred_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let n = self.grid.len();
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        for (i, o) in out.iter_mut().enumerate().take(n) {
            let row = &self.lower[i * (i + 1) / 2..i * (i + 1) / 2 + i + 1];
            *o = row.iter().zip(&z).map(|(l, v)| l * v).sum();
        }
    }

    /// One realization of `W` with the given cellwise means.
    pub fn sample_with_mean<R: Rng + ?Sized>(&self, means: &[f64], rng: &mut R) -> GridField {
        let mut v = vec![0.0; self.grid.len()];
        self.sample_centred_into(rng, &mut v);
        for (x, m) in v.iter_mut().zip(means) {
            *x += m;
        }
        GridField::new(self.grid.clone(), v).expect("sizes agree")
    }

    /// One realization of the Gaussian field of `spec`.
    pub fn sample(&self, spec: &LgcpSpec, rng: RngStream) -> GridField {
        let means = spec.mean_on(&self.grid);
        self.sample_with_mean(&means, &mut rng.rng())
    }

    /// One realization of the intensity `exp(W)` of `spec`.
    pub fn sample_intensity(&self, spec: &LgcpSpec, rng: RngStream) -> GridField {
        let mut f = self.sample(spec, rng);
        for v in f.values_mut() {
            *v = v.exp();
        }
        f
    }
}

/// Packed lower Cholesky factor of `a + jitter·I`; on failure returns a condition estimate.
fn cholesky_packed(a: &[f64], n: usize, jitter: f64) -> std::result::Result<Vec<f64>, f64> {
    let mut l = vec![0.0; n * (n + 1) / 2];
    let mut max_pivot: f64 = 0.0;
    for j in 0..n {
        let rj = j * (j + 1) / 2;
        let s = a[j * n + j] + jitter - l[rj..rj + j].iter().map(|v| v * v).sum::<f64>();
        max_pivot = max_pivot.max(a[j * n + j] + jitter);
        if !(s > 0.0) {
            return Err(if s == 0.0 { f64::INFINITY } else { max_pivot / s.abs() });
        }
        let pivot = s.sqrt();
        l[rj + j] = pivot;
        for i in j + 1..n {
            let ri = i * (i + 1) / 2;
            let (head, tail) = l.split_at_mut(ri);
            let dot: f64 = head[rj..rj + j].iter().zip(&tail[..j]).map(|(x, y)| x * y).sum();
            tail[j] = (a[i * n + j] - dot) / pivot;
        }
    }
    Ok(l)
}

/// One realization of `W` on `grid` (factorizes on every call; reuse a [`GrfSampler`]
/// for repeated draws).
pub fn simulate_grf(spec: &LgcpSpec, grid: &Grid, rng: RngStream) -> Result<GridField> {
    Ok(GrfSampler::new(&spec.cov, grid)?.sample(spec, rng))
}

/// One realization of the intensity `Ψ = exp(W)` on `grid`.
pub fn intensity_field(spec: &LgcpSpec, grid: &Grid, rng: RngStream) -> Result<GridField> {
    Ok(GrfSampler::new(&spec.cov, grid)?.sample_intensity(spec, rng))
}
