//! Storm constructions for extremal processes.
//!
//! Storms are points `ξ` with kernel marks `u·X(· − ξ)`. With Poisson storm
//! centres of intensity `Ψ/τ` and `u = τ/V`, `V ~ U(0, 1)`, the storm set is the
//! restriction to `u > τ` of a Poisson process with directing measure
//! `Ψ(s) ds u⁻² du`; its pointwise maximum is a truncated mixed moving maxima
//! field (`Ψ ≡ 1`) or a Cox extremal field.
//!
//! Two thinnings are provided: deletion of storms dominated everywhere by another
//! storm, and the stricter rule keeping only storms visible at their own centre.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::field::GridField;
use crate::geometry::{Grid, Window};
use crate::palm::{check_point, IntensitySource, PalmConfig, PalmField};
use crate::pattern::{Coords, MarkValue, MarkedPointPattern, PointPattern};
use crate::rng::RngStream;
use crate::sampler::{attach_marks_with, sample_cox_with, sample_poisson_with, LgcpSimulator, MarkLaw};
use crate::shape::{ShapeId, StormShape};
use crate::stats::IntensityEstimate;

/// A storm `(s, u)`; its shape is fixed per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StormPoint {
    pub centre: Coords,
    pub u: f64,
}

impl StormPoint {
    pub fn from_mark(m: &MarkValue) -> Option<StormPoint> {
        m.as_kernel().map(|(u, _, c)| StormPoint {
            centre: Coords::from_slice(c),
            u,
        })
    }
}

/// Marked pattern of storms with a common shape.
pub fn storms_to_pattern(window: Window, shape: ShapeId, storms: &[StormPoint]) -> Result<MarkedPointPattern> {
    let coords = storms.iter().flat_map(|s| s.centre.iter().copied()).collect();
    let ground = PointPattern::new(window, coords)?;
    let marks = storms
        .iter()
        .map(|s| MarkValue::kernel(s.u, shape, &s.centre))
        .collect::<Result<Vec<_>>>()?;
    MarkedPointPattern::new(ground, marks)
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::param("tau", format!("truncation level must be finite and > 0, got {tau}")))
    }
}

/// Buffer radius at which the shape envelope drops below `10⁻⁶ X(0)`.
pub fn default_buffer(shape: &StormShape) -> f64 {
    shape.envelope_buffer(1e-6)
}

/// Size of the two approximations behind a truncated, buffered storm field on `w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub tau: f64,
    pub buffer: f64,
    /// Storms with `u <= τ` contribute at most `τ X(0)` anywhere.
    pub truncation_level: f64,
    /// `∫_{r > buffer} f(r) dVol(w ⊕ r)`: the expected number of omitted storms whose
    /// value exceeds `z` somewhere on `w` is at most `outside_rate / z` (per unit `Ψ`).
    pub outside_rate: f64,
}

pub fn truncation_report(shape: &StormShape, tau: f64, window: &Window, buffer: f64) -> Result<TruncationReport> {
    check_tau(tau)?;
    if !(buffer >= 0.0) {
        return Err(Error::param("buffer", format!("must be >= 0, got {buffer}")));
    }
    let upper = shape.id.support_radius().unwrap_or(buffer + 15.0);
    let mut rate = 0.0;
    if buffer < upper {
        let n = 20_000;
        let h = (upper - buffer) / n as f64;
        let mut prev = window.parallel_volume(buffer);
        for k in 0..n {
            let r1 = buffer + (k + 1) as f64 * h;
            let next = window.parallel_volume(r1);
            rate += shape.upper_envelope(r1 - 0.5 * h) * (next - prev);
            prev = next;
        }
    }
    Ok(TruncationReport {
        tau,
        buffer,
        truncation_level: tau * shape.peak(),
        outside_rate: rate,
    })
}

/// Storms with `u > τ` of a mixed moving maxima field on `window ⊕ buffer`.
pub fn simulate_m3_truncated(
    shape: &StormShape,
    tau: f64,
    window: &Window,
    buffer: f64,
    rng: RngStream,
) -> Result<MarkedPointPattern> {
    check_tau(tau)?;
    if !(buffer >= 0.0) || !buffer.is_finite() {
        return Err(Error::param("buffer", format!("must be finite and >= 0, got {buffer}")));
    }
    if window.dim() != shape.dim {
        return Err(Error::DimensionMismatch {
            expected: shape.dim,
            got: window.dim(),
        });
    }
    let big = window.dilate(buffer)?;
    let mut r = rng.rng();
    let ground = sample_poisson_with(1.0 / tau, &big, &mut r)?;
    Ok(attach_marks_with(&ground, &MarkLaw::pareto_kernel(tau, shape.id), &mut r))
}

/// Storm sampler for the Cox extremal process `Φ ~ Cox(Ψ/τ)` with Pareto kernel marks.
#[derive(Debug, Clone)]
pub struct CoxExtremalSimulator {
    tau: f64,
    shape: StormShape,
    grid: Grid,
    driver: Driver,
}

#[derive(Debug, Clone)]
enum Driver {
    Constant(f64),
    Lgcp(Box<LgcpSimulator>),
}

impl CoxExtremalSimulator {
    /// `grid` is the (buffered) grid the intensity is simulated on; storms live on its window.
    pub fn new(source: &IntensitySource, shape: StormShape, tau: f64, grid: &Grid) -> Result<Self> {
        check_tau(tau)?;
        source.validate()?;
        if grid.dim() != shape.dim {
            return Err(Error::DimensionMismatch {
                expected: shape.dim,
                got: grid.dim(),
            });
        }
        let driver = match source {
            IntensitySource::Constant { lambda } => Driver::Constant(*lambda),
            IntensitySource::Lgcp { spec } => {
                let scaled = spec.clone().with_offset(spec.log_scale_offset - tau.ln());
                Driver::Lgcp(Box::new(LgcpSimulator::new(&scaled, grid)?))
            }
        };
        Ok(CoxExtremalSimulator {
            tau,
            shape,
            grid: grid.clone(),
            driver,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn sample_with(&self, rng: &mut ChaCha8Rng) -> (MarkedPointPattern, GridField) {
        let (ground, psi) = match &self.driver {
            Driver::Constant(l) => (
                sample_poisson_with(l / self.tau, self.grid.window(), rng).expect("validated intensity"),
                GridField::constant(self.grid.clone(), *l),
            ),
            Driver::Lgcp(sim) => {
                let scaled = sim.sample_intensity_with(rng);
                let ground = sample_cox_with(&scaled, rng).expect("exp(W) is nonnegative");
                (ground, scaled.map(|v| v * self.tau))
            }
        };
        let marks = attach_marks_with(&ground, &MarkLaw::pareto_kernel(self.tau, self.shape.id), rng);
        (marks, psi)
    }

    pub fn sample(&self, rng: RngStream) -> (MarkedPointPattern, GridField) {
        self.sample_with(&mut rng.rng())
    }
}

/// Storms of the Cox extremal process and the realization of `Ψ` that drove them.
pub fn simulate_cox_extremal_points(
    source: &IntensitySource,
    shape: &StormShape,
    tau: f64,
    grid: &Grid,
    rng: RngStream,
) -> Result<(MarkedPointPattern, GridField)> {
    Ok(CoxExtremalSimulator::new(source, *shape, tau, grid)?.sample(rng))
}

/// Cellwise maximum of storm marks on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremalSurface {
    pub grid: Grid,
    pub values: Vec<f64>,
    /// Index of the storm attaining the maximum in each cell, `None` for empty input.
    /// For aggregated surfaces it indexes the replicate instead.
    pub contributors: Vec<Option<usize>>,
}

impl ExtremalSurface {
    pub fn to_field(&self) -> GridField {
        GridField::new(self.grid.clone(), self.values.clone()).expect("sizes agree")
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

fn kernel_parts(pattern: &MarkedPointPattern) -> Result<Vec<(f64, ShapeId, &[f64])>> {
    pattern
        .marks()
        .iter()
        .map(|m| {
            m.as_kernel()
                .ok_or_else(|| Error::param("marks", "storm patterns need kernel marks"))
        })
        .collect()
}

fn check_grid_dim(grid: &Grid, pattern: &MarkedPointPattern) -> Result<()> {
    if grid.dim() != pattern.dim() {
        return Err(Error::DimensionMismatch {
            expected: pattern.dim(),
            got: grid.dim(),
        });
    }
    Ok(())
}

/// `Z(t) = max_storms u X(t − s)` at every cell centre.
pub fn accumulate_surface(storms: &MarkedPointPattern, grid: &Grid) -> Result<ExtremalSurface> {
    check_grid_dim(grid, storms)?;
    let parts = kernel_parts(storms)?;
    let d = grid.dim();
    let n = grid.len();
    let mut values = vec![0.0; n];
    let mut contributors = vec![None; n];
    let mut order: Vec<usize> = (0..parts.len()).collect();
    let top = |j: usize| parts[j].0 * parts[j].1.peak(d);
    order.sort_by(|&a, &b| top(b).total_cmp(&top(a)).then(a.cmp(&b)));

    let mut t = vec![0.0; d];
    let mut lo = vec![0.0; d];
    let mut hi = vec![0.0; d];
    // every cell already holds at least `lower`; it only ever increases
    let mut lower = 0.0f64;
    for (step, &j) in order.iter().enumerate() {
        let (u, shape, c) = parts[j];
        let peak = top(j);
        if peak <= lower {
            break;
        }
        let radius = if lower > 0.0 {
            shape.radius_at_ratio(lower / peak) * (1.0 + 1e-9) + 1e-12
        } else {
            shape.support_radius().unwrap_or(f64::INFINITY)
        };
        let mut update = |i: usize| {
            grid.centre_into(i, &mut t);
            let v = u * shape.eval_at(&t, c);
            if v > values[i] {
                values[i] = v;
                contributors[i] = Some(j);
            }
        };
        if radius.is_finite() {
            for a in 0..d {
                lo[a] = c[a] - radius;
                hi[a] = c[a] + radius;
            }
            if let Some(ranges) = grid.cell_ranges(&lo, &hi) {
                grid.for_each_in_ranges(&ranges, &mut update);
            }
        } else {
            (0..n).for_each(&mut update);
        }
        if step % 32 == 31 {
            lower = values.iter().copied().fold(f64::INFINITY, f64::min);
        }
    }
    Ok(ExtremalSurface {
        grid: grid.clone(),
        values,
        contributors,
    })
}

/// `Z(t)` at arbitrary points (flat coordinates), by direct evaluation.
pub fn surface_at(storms: &MarkedPointPattern, points: &[f64]) -> Result<Vec<f64>> {
    let d = storms.dim();
    if !points.len().is_multiple_of(d) {
        return Err(Error::param("points", "coordinate count is not a multiple of the dimension"));
    }
    let parts = kernel_parts(storms)?;
    Ok(points
        .chunks(d)
        .map(|t| {
            parts
                .iter()
                .map(|(u, s, c)| u * s.eval_at(t, c))
                .fold(0.0, f64::max)
        })
        .collect())
}

/// Pointwise maximum over replicates divided by their number.
pub fn mda_aggregate(replicates: &[ExtremalSurface]) -> Result<ExtremalSurface> {
    let first = replicates
        .first()
        .ok_or_else(|| Error::param("replicates", "at least one surface is required"))?;
    if let Some(bad) = replicates.iter().find(|s| s.grid != first.grid) {
        return Err(Error::GridMismatch(format!(
            "replicate grid {:?} differs from {:?}",
            bad.grid.cells_per_axis(),
            first.grid.cells_per_axis()
        )));
    }
    let n = replicates.len() as f64;
    let mut values = vec![0.0; first.values.len()];
    let mut contributors = vec![None; first.values.len()];
    for (k, s) in replicates.iter().enumerate() {
        for (i, &v) in s.values.iter().enumerate() {
            if v > values[i] || contributors[i].is_none() {
                values[i] = v;
                contributors[i] = Some(k);
            }
        }
    }
    for v in &mut values {
        *v /= n;
    }
    Ok(ExtremalSurface {
        grid: first.grid.clone(),
        values,
        contributors,
    })
}

#[inline]
fn mark_at(m: &MarkValue, t: &[f64]) -> f64 {
    m.eval(t).unwrap_or(f64::NAN)
}

/// `m_y(t) > m_x(t)` at `x` itself and at every cell centre of `grid`.
pub(crate) fn dominates(x: &[f64], mx: &MarkValue, my: &MarkValue, grid: &Grid) -> bool {
    if !(mark_at(my, x) > mark_at(mx, x)) {
        return false;
    }
    let d = grid.dim();
    let mut t: SmallVec<[f64; 3]> = SmallVec::from_elem(0.0, d);
    let wins = |i: usize, t: &mut [f64]| {
        grid.centre_into(i, t);
        mark_at(my, t) > mark_at(mx, t)
    };
    // for Gaussian shapes the log-ratio of two marks is affine, so a corner is the witness
    let cells = grid.cells_per_axis();
    for corner in 0..(1usize << d) {
        let mut index = 0;
        let mut stride = 1;
        for (a, &n) in cells.iter().enumerate() {
            if corner >> a & 1 == 1 {
                index += (n - 1) * stride;
            }
            stride *= n;
        }
        if !wins(index, &mut t) {
            return false;
        }
    }
    (0..grid.len()).all(|i| wins(i, &mut t))
}

/// Bucket index over storms for queries of the form "which storms exceed `θ` at `x`".
struct StormIndex<'a> {
    pattern: &'a MarkedPointPattern,
    buckets: Grid,
    members: Vec<Vec<usize>>,
    bucket_max_u: Vec<f64>,
    shapes: Vec<ShapeId>,
    max_u: f64,
}

impl<'a> StormIndex<'a> {
    fn new(pattern: &'a MarkedPointPattern) -> Result<Self> {
        let parts = kernel_parts(pattern)?;
        let d = pattern.dim();
        let mut shapes: Vec<ShapeId> = parts.iter().map(|p| p.1).collect();
        shapes.sort_by_key(|s| s.name());
        shapes.dedup();
        let scale = shapes
            .iter()
            .map(|s| s.support_radius().unwrap_or(1.0))
            .fold(0.0, f64::max)
            .max(1e-9);
        let window = pattern.window();
        let per_axis = (((4_000_000f64).powf(1.0 / d as f64)) as usize).max(1);
        let cells: Vec<usize> = (0..d)
            .map(|a| ((window.side(a) / scale).ceil() as usize).clamp(1, per_axis))
            .collect();
        let buckets = Grid::new(window.clone(), cells)?;
        let mut members = vec![Vec::new(); buckets.len()];
        for i in 0..pattern.len() {
            members[buckets.nearest_cell(pattern.point(i))].push(i);
        }
        let mut bucket_max_u = vec![0.0; buckets.len()];
        for (b, list) in members.iter_mut().enumerate() {
            list.sort_by(|&a, &c| parts[c].0.total_cmp(&parts[a].0).then(a.cmp(&c)));
            bucket_max_u[b] = list.first().map(|&i| parts[i].0).unwrap_or(0.0);
        }
        let max_u = bucket_max_u.iter().copied().fold(0.0, f64::max);
        Ok(StormIndex {
            pattern,
            buckets,
            members,
            bucket_max_u,
            shapes,
            max_u,
        })
    }

    fn envelope(&self, r: f64) -> f64 {
        let d = self.pattern.dim();
        self.shapes.iter().map(|s| s.radial(d, r)).fold(0.0, f64::max)
    }

    fn reach(&self, theta: f64) -> f64 {
        if theta <= 0.0 {
            return f64::INFINITY;
        }
        let d = self.pattern.dim();
        self.shapes
            .iter()
            .map(|s| s.radius_at_ratio(theta / (self.max_u * s.peak(d))))
            .fold(0.0, f64::max)
            * (1.0 + 1e-9)
            + 1e-12
    }

    /// Calls `f(j)` for storms `j != skip` with `m_j(x) > θ`, nearest buckets first,
    /// until `f` returns true; returns whether it did.
    fn any_above(&self, x: &[f64], theta: f64, skip: usize, mut f: impl FnMut(usize) -> bool) -> bool {
        let d = x.len();
        let r = self.reach(theta);
        let ranges = if r.is_finite() {
            let lo: Vec<f64> = x.iter().map(|v| v - r).collect();
            let hi: Vec<f64> = x.iter().map(|v| v + r).collect();
            match self.buckets.cell_ranges(&lo, &hi) {
                Some(rg) => rg,
                None => return false,
            }
        } else {
            self.buckets.cells_per_axis().iter().map(|&n| (0, n - 1)).collect()
        };
        let half: Vec<f64> = (0..d).map(|a| 0.5 * self.buckets.cell_side(a)).collect();
        let mut centre = vec![0.0; d];
        let mut visit: Vec<(f64, usize)> = Vec::new();
        self.buckets.for_each_in_ranges(&ranges, |b| {
            if self.members[b].is_empty() {
                return;
            }
            self.buckets.centre_into(b, &mut centre);
            let dmin = (0..d)
                .map(|a| ((x[a] - centre[a]).abs() - half[a]).max(0.0).powi(2))
                .sum::<f64>()
                .sqrt();
            if self.bucket_max_u[b] * self.envelope(dmin) * (1.0 + 1e-9) > theta {
                visit.push((dmin, b));
            }
        });
        visit.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let top = self.envelope(0.0) * (1.0 + 1e-9);
        for (_, b) in visit {
            for &j in &self.members[b] {
                let mj = self.pattern.mark(j);
                if mj.as_kernel().map(|k| k.0).unwrap_or(0.0) * top <= theta {
                    break;
                }
                if j != skip && mark_at(mj, x) > theta && f(j) {
                    return true;
                }
            }
        }
        false
    }
}

fn thin_by(pattern: &MarkedPointPattern, deleted: impl Fn(&StormIndex<'_>, usize) -> bool + Sync) -> Result<MarkedPointPattern> {
    if pattern.is_empty() {
        return Ok(pattern.clone());
    }
    let index = StormIndex::new(pattern)?;
    let keep: Vec<bool> = (0..pattern.len()).into_par_iter().map(|i| !deleted(&index, i)).collect();
    let idx: Vec<usize> = (0..pattern.len()).filter(|&i| keep[i]).collect();
    Ok(pattern.select(&idx))
}

/// Deletes every storm whose mark is strictly exceeded by another storm's mark at
/// its own centre and at every cell centre of `grid`.
pub fn thin_extremal_dominance(pattern: &MarkedPointPattern, grid: &Grid) -> Result<MarkedPointPattern> {
    check_grid_dim(grid, pattern)?;
    thin_by(pattern, |index, i| {
        let x = pattern.point(i);
        let mx = pattern.mark(i);
        index.any_above(x, mark_at(mx, x), i, |j| dominates(x, mx, pattern.mark(j), grid))
    })
}

/// Keeps the storms with `m_ξ(ξ) >= m_ξ'(ξ)` for every other storm `ξ'`.
pub fn thin_visible_centres(pattern: &MarkedPointPattern) -> Result<MarkedPointPattern> {
    thin_by(pattern, |index, i| {
        let x = pattern.point(i);
        index.any_above(x, mark_at(pattern.mark(i), x), i, |_| true)
    })
}

/// Driving intensity for the finite-dimensional distribution formula.
#[derive(Debug, Clone, PartialEq)]
pub enum FidiIntensity {
    Constant(f64),
    /// Realizations of `Ψ`; the formula is averaged over them.
    Fields(Vec<GridField>),
}

/// `E_Ψ exp(−∫ min(1/τ, max_i X(t_i − s)/y_i) Ψ(s) ds)`, the probability that the
/// storm field stays below `y_i` at every `t_i`, by a midpoint sum over `grid`.
pub fn fidi_prob_pi(
    psi: &FidiIntensity,
    shape: &StormShape,
    tau: f64,
    points: &[f64],
    thresholds: &[f64],
    grid: &Grid,
) -> Result<f64> {
    check_tau(tau)?;
    let d = shape.dim;
    if grid.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: grid.dim() });
    }
    if points.len() != thresholds.len() * d {
        return Err(Error::param("points", "need one point per threshold"));
    }
    if let Some(y) = thresholds.iter().find(|y| !(**y > 0.0)) {
        return Err(Error::param("thresholds", format!("must be > 0, got {y}")));
    }
    let vol = grid.cell_volume();
    let mut c = vec![0.0; d];
    let weights: Vec<f64> = (0..grid.len())
        .map(|i| {
            grid.centre_into(i, &mut c);
            let m = points
                .chunks(d)
                .zip(thresholds)
                .map(|(t, y)| shape.id.eval_at(t, &c) / y)
                .fold(0.0, f64::max);
            vol * m.min(1.0 / tau)
        })
        .collect();
    match psi {
        FidiIntensity::Constant(l) => Ok((-l * weights.iter().sum::<f64>()).exp()),
        FidiIntensity::Fields(fields) => {
            if fields.is_empty() {
                return Err(Error::param("psi", "at least one field realization is required"));
            }
            let vals: Vec<f64> = fields
                .iter()
                .map(|f| {
                    let s: f64 = weights
                        .iter()
                        .enumerate()
                        .map(|(i, w)| {
                            grid.centre_into(i, &mut c);
                            w * f.value_at(&c)
                        })
                        .sum();
                    (-s).exp()
                })
                .collect();
            Ok(crate::stats::mean(&vals))
        }
    }
}

/// Cell weights `vol · X(x − c) / X(0)` over the whole grid.
fn kernel_weights(shape: &StormShape, x: &[f64], grid: &Grid) -> Vec<f64> {
    let vol = grid.cell_volume();
    let peak = shape.peak();
    let mut c = vec![0.0; grid.dim()];
    (0..grid.len())
        .map(|i| {
            grid.centre_into(i, &mut c);
            vol * shape.id.eval_at(x, &c) / peak
        })
        .collect()
}

fn field_values(field: &PalmField, realization: &Option<GridField>, grid: &Grid) -> Vec<f64> {
    let mut c = vec![0.0; grid.dim()];
    (0..grid.len())
        .map(|i| {
            grid.centre_into(i, &mut c);
            field.value(realization, &c)
        })
        .collect()
}

/// Intensity of the visible storm centres at `xi`.
///
/// Equals `p₀ EΨ(ξ) E_Ψ̃[(1 − exp(−a/τ))/a]` with `a = ∫ X(ξ − s)/X(0) Ψ̃(s) ds`
/// and `Ψ̃` the Palm field at `ξ`; `a = 0` gives the limit `1/τ`.
#[allow(clippy::too_many_arguments)]
pub fn visible_centre_intensity_mc(
    source: &IntensitySource,
    shape: &StormShape,
    tau: f64,
    p0: f64,
    xi: &[f64],
    grid: &Grid,
    cfg: &PalmConfig,
    rng: RngStream,
) -> Result<IntensityEstimate> {
    check_tau(tau)?;
    check_p0(p0)?;
    source.validate()?;
    cfg.validate()?;
    check_point(grid, xi)?;
    let rho = source.intensity(xi);
    let weights = kernel_weights(shape, xi, grid);
    let field = PalmField::new(source, &[xi], grid, cfg)?;
    let one = |r: &mut ChaCha8Rng| {
        let psi = field.realize(r);
        let vals = field_values(&field, &psi, grid);
        let a: f64 = weights.iter().zip(&vals).map(|(w, v)| w * v).sum();
        let g = if a > 0.0 { -(-a / tau).exp_m1() / a } else { 1.0 / tau };
        p0 * rho * g
    };
    let samples: Vec<f64> = match source {
        IntensitySource::Constant { .. } => vec![one(&mut rng.rng()); cfg.n_psi],
        IntensitySource::Lgcp { .. } => (0..cfg.n_psi as u64)
            .into_par_iter()
            .map(|j| one(&mut rng.derive(j).rng()))
            .collect(),
    };
    Ok(IntensityEstimate::from_samples(&samples, grid.len()))
}

fn check_p0(p0: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p0) {
        Ok(())
    } else {
        Err(Error::param("p0", format!("must lie in [0, 1], got {p0}")))
    }
}

/// Log-graded midpoint nodes `(v, weight)` for `∫₀¹ g(v) dv`, resolving the scale `v ~ τ`
/// where the integrands of the visible-centre formulas live.
fn v_nodes() -> Vec<(f64, f64)> {
    const K: usize = 160;
    let lo = (1e-10f64).ln();
    let h = -lo / K as f64;
    (0..K)
        .map(|k| {
            let v = (lo + (k as f64 + 0.5) * h).exp();
            (v, v * h)
        })
        .collect()
}

/// Second-order intensity of the visible storm centres at `(xi, eta)`.
///
/// Integrates, over `u_ξ, u_η > τ` (substituted `u = τ/v`), the probability that the
/// two storms do not hide each other and no third storm hides either, averaged over
/// two-point Palm fields. The arguments are ordered canonically first.
#[allow(clippy::too_many_arguments)]
pub fn visible_centre_intensity2_mc(
    source: &IntensitySource,
    shape: &StormShape,
    tau: f64,
    p0: f64,
    xi: &[f64],
    eta: &[f64],
    grid: &Grid,
    cfg: &PalmConfig,
    rng: RngStream,
) -> Result<IntensityEstimate> {
    check_tau(tau)?;
    check_p0(p0)?;
    source.validate()?;
    cfg.validate()?;
    check_point(grid, xi)?;
    check_point(grid, eta)?;
    if xi == eta {
        return Err(Error::param("eta", "the two evaluation points must differ"));
    }
    let (a, b) = if xi.iter().map(|v| v.to_bits()).lt(eta.iter().map(|v| v.to_bits())) {
        (xi, eta)
    } else {
        (eta, xi)
    };
    let rho2 = source.second_order_intensity(a, b);
    let wa = kernel_weights(shape, a, grid);
    let wb = kernel_weights(shape, b, grid);
    // cells ordered by wa/wb: a storm at cell c hides ξ more easily than η iff wa/wb > u_ξ/u_η
    let mut cells: Vec<usize> = (0..grid.len()).filter(|&i| wa[i] > 0.0 || wb[i] > 0.0).collect();
    let ratio = |i: usize| if wb[i] > 0.0 { wa[i] / wb[i] } else { f64::INFINITY };
    cells.sort_by(|&x, &y| ratio(x).total_cmp(&ratio(y)).then(x.cmp(&y)));
    let ratios: Vec<f64> = cells.iter().map(|&i| ratio(i)).collect();
    let nodes = v_nodes();
    let xd = shape.id.eval_at(a, b) / shape.peak();
    let field = PalmField::new(source, &[a, b], grid, cfg)?;

    let one = |r: &mut ChaCha8Rng| {
        let psi = field.realize(r);
        let vals = field_values(&field, &psi, grid);
        // prefix[k] = Σ_{first k cells} Ψ wa, suffix[k] = Σ_{cells from k} Ψ wb
        let m = cells.len();
        let mut prefix = vec![0.0; m + 1];
        let mut suffix = vec![0.0; m + 1];
        for k in 0..m {
            prefix[k + 1] = prefix[k] + vals[cells[k]] * wa[cells[k]];
        }
        for k in (0..m).rev() {
            suffix[k] = suffix[k + 1] + vals[cells[k]] * wb[cells[k]];
        }
        let big_a = prefix[m];
        let big_b = suffix[0];
        let mut total = 0.0;
        for &(vx, wx) in &nodes {
            let mut row = 0.0;
            for &(vy, wy) in &nodes {
                // neither storm hides the other at its centre
                if vx * xd > vy || vy * xd > vx {
                    continue;
                }
                let k = ratios.partition_point(|&q| q < vy / vx);
                let e = (vx * (big_a - prefix[k]) + vy * (big_b - suffix[k])) / tau;
                row += wy * (-e).exp();
            }
            total += wx * row;
        }
        p0 * p0 * rho2 * total / (tau * tau)
    };
    let samples: Vec<f64> = match source {
        IntensitySource::Constant { .. } => vec![one(&mut rng.rng()); cfg.n_psi],
        IntensitySource::Lgcp { .. } => (0..cfg.n_psi as u64)
            .into_par_iter()
            .map(|j| one(&mut rng.derive(j).rng()))
            .collect(),
    };
    Ok(IntensityEstimate::from_samples(&samples, nodes.len() * nodes.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thinning::{thin, Preset, ThinningModel};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn gauss2() -> StormShape {
        StormShape::new(ShapeId::GaussDensity, 2).unwrap()
    }

    fn storms(points: &[(f64, f64, f64)]) -> MarkedPointPattern {
        let w = Window::cube(2, 10.0).unwrap().dilate(5.0).unwrap();
        let s: Vec<StormPoint> = points
            .iter()
            .map(|&(x, y, u)| StormPoint { centre: Coords::from_slice(&[x, y]), u })
            .collect();
        storms_to_pattern(w, ShapeId::GaussDensity, &s).unwrap()
    }

    #[test]
    fn storm_count_and_u_law() {
        let w = Window::cube(2, 1.0).unwrap();
        let reps = 2000;
        let mut counts = Vec::new();
        let mut above = 0usize;
        let mut total = 0usize;
        for k in 0..reps {
            let p = simulate_m3_truncated(&gauss2(), 0.1, &w, 0.0, RngStream::new(4).derive(k)).unwrap();
            counts.push(p.len() as f64);
            for m in p.marks() {
                let u = m.as_kernel().unwrap().0;
                assert!(u > 0.1);
                total += 1;
                if u > 0.2 {
                    above += 1;
                }
            }
        }
        let (m, se) = crate::stats::mean_and_se(&counts);
        assert!((m - 10.0).abs() < 3.0 * se, "{m} ± {se}");
        let p = above as f64 / total as f64;
        assert!((p - 0.5).abs() < 3.0 * (0.25 / total as f64).sqrt(), "{p}");
        assert!(simulate_m3_truncated(&gauss2(), 0.0, &w, 0.0, RngStream::new(1)).is_err());
    }

    #[test]
    fn single_storm_peak_and_homogeneity() {
        let grid = Grid::uniform(Window::cube(2, 10.0).unwrap(), 10).unwrap();
        let centre = grid.centre(55);
        let p = storms(&[(centre[0], centre[1], 1.0)]);
        let s = accumulate_surface(&p, &grid).unwrap();
        assert_relative_eq!(s.values[55], 1.0 / (2.0 * PI), max_relative = 1e-15);
        assert_eq!(s.contributors[55], Some(0));
        let doubled = MarkedPointPattern::new(p.ground().clone(), p.marks().iter().map(|m| m.scaled(2.0)).collect()).unwrap();
        let s2 = accumulate_surface(&doubled, &grid).unwrap();
        for (a, b) in s.values.iter().zip(&s2.values) {
            assert_eq!(2.0 * a, *b);
        }
        let empty = accumulate_surface(&MarkedPointPattern::empty(p.window().clone()), &grid).unwrap();
        assert!(empty.values.iter().all(|v| *v == 0.0) && empty.contributors.iter().all(|c| c.is_none()));
    }

    #[test]
    fn surface_matches_brute_force() {
        let grid = Grid::uniform(Window::cube(2, 10.0).unwrap(), 40).unwrap();
        for tau in [0.5, 0.05] {
            let p = simulate_m3_truncated(&gauss2(), tau, grid.window(), 3.0, RngStream::new(9)).unwrap();
            let s = accumulate_surface(&p, &grid).unwrap();
            let brute = surface_at(&p, &grid.centres()).unwrap();
            assert_eq!(s.values, brute);
            for (i, c) in s.contributors.iter().enumerate() {
                let j = c.unwrap();
                assert_eq!(p.mark(j).eval(&grid.centre(i)).unwrap(), s.values[i]);
            }
        }
    }

    #[test]
    fn dominance_examples() {
        let grid = Grid::uniform(Window::cube(2, 10.0).unwrap(), 20).unwrap();
        let single = storms(&[(5.0, 5.0, 1.0)]);
        assert_eq!(thin_extremal_dominance(&single, &grid).unwrap().len(), 1);
        assert_eq!(thin_visible_centres(&single).unwrap().len(), 1);
        // the same centre cannot hold two storms, so take a tiny offset and compare shapes
        let same = storms(&[(5.0, 5.0, 3.0), (5.0, 5.0 + 1e-9, 1.0)]);
        let out = thin_extremal_dominance(&same, &grid).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.mark(0).as_kernel().unwrap().0, 3.0);
        let apart = storms(&[(3.0, 5.0, 1.0), (7.0, 5.0, 1.0)]);
        assert_eq!(thin_extremal_dominance(&apart, &grid).unwrap().len(), 2);
    }

    #[test]
    fn visible_hand_example() {
        let w = Window::new(vec![-5.0], vec![5.0]).unwrap();
        let s = [
            StormPoint { centre: Coords::from_slice(&[0.0]), u: 1.0 },
            StormPoint { centre: Coords::from_slice(&[0.1]), u: 10.0 },
        ];
        let p = storms_to_pattern(w, ShapeId::GaussDensity, &s).unwrap();
        let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * PI).sqrt();
        assert!(10.0 * phi(0.1) > phi(0.0));
        let out = thin_visible_centres(&p).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.point(0), &[0.1]);
    }

    #[test]
    fn fast_thinnings_agree_with_generic_engine() {
        let grid = Grid::uniform(Window::cube(2, 6.0).unwrap(), 12).unwrap();
        for k in 0..5 {
            let p = simulate_m3_truncated(&gauss2(), 0.3, grid.window(), 2.0, RngStream::new(k)).unwrap();
            let vis = thin_visible_centres(&p).unwrap();
            let generic = thin(&ThinningModel::from_preset(Preset::VisibleCentre, 1.0).unwrap(), &p, RngStream::new(0));
            assert_eq!(vis, generic);
            let dom = thin_extremal_dominance(&p, &grid).unwrap();
            let model = ThinningModel::from_preset(Preset::ExtremalDominance { grid: grid.clone() }, 1.0).unwrap();
            assert_eq!(dom, thin(&model, &p, RngStream::new(0)));
        }
    }

    #[test]
    fn mda_examples() {
        let grid = Grid::uniform(Window::cube(2, 4.0).unwrap(), 8).unwrap();
        let reps: Vec<ExtremalSurface> = (0..3)
            .map(|k| {
                let p = simulate_m3_truncated(&gauss2(), 0.2, grid.window(), 2.0, RngStream::new(k)).unwrap();
                accumulate_surface(&p, &grid).unwrap()
            })
            .collect();
        assert_eq!(mda_aggregate(&reps[..1]).unwrap().values, reps[0].values);
        let same = mda_aggregate(&[reps[0].clone(), reps[0].clone()]).unwrap();
        for (a, b) in same.values.iter().zip(&reps[0].values) {
            assert_eq!(*a, b / 2.0);
        }
        let fwd = mda_aggregate(&reps).unwrap();
        let rev: Vec<_> = reps.iter().rev().cloned().collect();
        assert_eq!(fwd.values, mda_aggregate(&rev).unwrap().values);
        let other = ExtremalSurface {
            grid: Grid::uniform(Window::cube(2, 4.0).unwrap(), 4).unwrap(),
            values: vec![0.0; 16],
            contributors: vec![None; 16],
        };
        assert!(mda_aggregate(&[reps[0].clone(), other]).is_err());
        assert!(mda_aggregate(&[]).is_err());
    }

    #[test]
    fn fidi_limits() {
        let shape = gauss2();
        let grid = Grid::with_spacing(Window::cube(2, 1.0).unwrap().dilate(6.0).unwrap(), 0.05).unwrap();
        let p = fidi_prob_pi(&FidiIntensity::Constant(1.0), &shape, 1e-4, &[0.5, 0.5], &[1.0], &grid).unwrap();
        assert_relative_eq!(p, (-1.0f64).exp(), max_relative = 1e-6);
        let big = fidi_prob_pi(&FidiIntensity::Constant(1.0), &shape, 0.1, &[0.5, 0.5], &[f64::INFINITY], &grid).unwrap();
        assert_eq!(big, 1.0);
        let hi = fidi_prob_pi(&FidiIntensity::Constant(1.0), &shape, 0.1, &[0.5, 0.5], &[0.01], &grid).unwrap();
        let lo = fidi_prob_pi(&FidiIntensity::Constant(1.0), &shape, 0.01, &[0.5, 0.5], &[0.01], &grid).unwrap();
        assert!(hi > lo);
        let fields = FidiIntensity::Fields(vec![GridField::constant(grid.clone(), 1.0); 2]);
        let f = fidi_prob_pi(&fields, &shape, 1e-4, &[0.5, 0.5], &[1.0], &grid).unwrap();
        assert_relative_eq!(f, p, max_relative = 1e-12);
    }

    #[test]
    fn truncation_report_for_gauss() {
        let shape = gauss2();
        let w = Window::cube(2, 10.0).unwrap();
        let r = truncation_report(&shape, 0.01, &w, default_buffer(&shape)).unwrap();
        assert_relative_eq!(r.truncation_level, 0.01 / (2.0 * PI));
        // ∫_b^∞ f(r) (40 + 2πr) dr for the box [0, 10]², by midpoint rule
        let b = default_buffer(&shape);
        let n = 200_000;
        let h = 20.0 / n as f64;
        let oracle: f64 = (0..n)
            .map(|k| {
                let r = b + (k as f64 + 0.5) * h;
                (-0.5 * r * r).exp() / (2.0 * PI) * (40.0 + 2.0 * PI * r) * h
            })
            .sum();
        assert_relative_eq!(r.outside_rate, oracle, max_relative = 1e-6);
    }

    #[test]
    fn visible_intensity_smith_limit_and_large_tau() {
        let shape = gauss2();
        let grid = Grid::with_spacing(Window::new(vec![-6.0, -6.0], vec![6.0, 6.0]).unwrap(), 0.1).unwrap();
        let src = IntensitySource::Constant { lambda: 1.0 };
        let cfg = PalmConfig::new(2, 1);
        let e = visible_centre_intensity_mc(&src, &shape, 1e-6, 1.0, &[0.0, 0.0], &grid, &cfg, RngStream::new(1)).unwrap();
        assert_relative_eq!(e.value, 1.0 / (2.0 * PI), max_relative = 1e-4);
        let big = visible_centre_intensity_mc(&src, &shape, 1e3, 1.0, &[0.0, 0.0], &grid, &cfg, RngStream::new(1)).unwrap();
        assert!(big.value < 1e-2);
        let big2 = visible_centre_intensity2_mc(&src, &shape, 1e3, 1.0, &[0.0, 0.0], &[1.0, 0.0], &grid, &cfg, RngStream::new(1))
            .unwrap();
        assert!(big2.value < 1e-4);
    }

    #[test]
    fn visible_second_order_factorizes_at_long_range() {
        let shape = gauss2();
        let grid = Grid::with_spacing(Window::new(vec![-6.0, -6.0], vec![26.0, 6.0]).unwrap(), 0.2).unwrap();
        let src = IntensitySource::Constant { lambda: 1.0 };
        let cfg = PalmConfig::new(2, 1);
        let x = [0.0, 0.0];
        let y = [20.0, 0.0];
        for tau in [0.5, 0.01] {
            let a = visible_centre_intensity_mc(&src, &shape, tau, 1.0, &x, &grid, &cfg, RngStream::new(1)).unwrap();
            let b = visible_centre_intensity_mc(&src, &shape, tau, 1.0, &y, &grid, &cfg, RngStream::new(1)).unwrap();
            let ab = visible_centre_intensity2_mc(&src, &shape, tau, 1.0, &x, &y, &grid, &cfg, RngStream::new(1)).unwrap();
            let ba = visible_centre_intensity2_mc(&src, &shape, tau, 1.0, &y, &x, &grid, &cfg, RngStream::new(1)).unwrap();
            assert_eq!(ab, ba);
            assert_relative_eq!(ab.value, a.value * b.value, max_relative = 1e-3);
        }
    }
}
