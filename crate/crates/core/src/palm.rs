//! Retaining probabilities and intensities of thinned processes.
//!
//! Closed forms for the Poisson/Matérn cases and nested Monte Carlo for a thinned
//! LGCP. The Monte Carlo estimators average, over replicates, the quantity
//!
//! `exp(−Σ_cells vol · Ψ̃(c) · avg_{m'} ζ p)`
//!
//! where `Ψ̃` is a realization of the Palm-shifted intensity field and the
//! average runs over stratified draws of the competitor mark. Each replicate uses
//! its own field, outer marks and quadrature offset, so replicates are iid and the
//! reported standard error is their sample standard deviation over `√n_psi`.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::GridField;
use crate::gauss::{palm_shift, LgcpSpec};
use crate::geometry::{ball_volume, Grid};
use crate::pattern::MarkValue;
use crate::rng::RngStream;
use crate::sampler::{sample_poisson_with, LgcpSimulator, MarkLaw};
use crate::stats::IntensityEstimate;
use crate::thinning::ThinningModel;

/// Retaining probability `exp(−λ|B_R| m)` of a Matérn II point with mark `m`.
pub fn matern2_retaining_prob(lambda: f64, radius: f64, dim: usize, m: f64) -> Result<f64> {
    check_nonneg("lambda", lambda)?;
    check_nonneg("radius", radius)?;
    if !(0.0..=1.0).contains(&m) {
        return Err(Error::param("m", format!("mark must lie in [0, 1], got {m}")));
    }
    Ok((-lambda * ball_volume(dim, radius)? * m).exp())
}

/// Matérn II intensity `|B_R|⁻¹ (1 − exp(−λ|B_R|))`; `R = 0` gives `λ`.
pub fn matern2_thinned_intensity(lambda: f64, radius: f64, dim: usize) -> Result<f64> {
    check_nonneg("lambda", lambda)?;
    check_nonneg("radius", radius)?;
    let b = ball_volume(dim, radius)?;
    if b == 0.0 {
        return Ok(lambda);
    }
    // −expm1 keeps precision for small λ|B|
    Ok(-(-lambda * b).exp_m1() / b)
}

/// Matérn I intensity `λ exp(−λ|B_R|)`.
pub fn matern1_thinned_intensity(lambda: f64, radius: f64, dim: usize) -> Result<f64> {
    check_nonneg("lambda", lambda)?;
    check_nonneg("radius", radius)?;
    Ok(lambda * (-lambda * ball_volume(dim, radius)?).exp())
}

fn check_nonneg(name: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite and >= 0, got {v}")))
    }
}

/// Driving intensity of the unthinned process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntensitySource {
    /// Homogeneous Poisson process.
    Constant { lambda: f64 },
    Lgcp { spec: LgcpSpec },
}

impl IntensitySource {
    pub fn validate(&self) -> Result<()> {
        match self {
            IntensitySource::Constant { lambda } => check_nonneg("lambda", *lambda),
            IntensitySource::Lgcp { .. } => Ok(()),
        }
    }

    /// `ρ_Φ(x)`.
    pub fn intensity(&self, x: &[f64]) -> f64 {
        match self {
            IntensitySource::Constant { lambda } => *lambda,
            IntensitySource::Lgcp { spec } => spec.intensity(x),
        }
    }

    /// `ρ_Φ⁽²⁾(x, y)`.
    pub fn second_order_intensity(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            IntensitySource::Constant { lambda } => lambda * lambda,
            IntensitySource::Lgcp { spec } => spec.second_order_intensity(x, y),
        }
    }
}

/// Monte Carlo budget and quadrature options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PalmConfig {
    /// Replicates, each with its own Palm field realization.
    pub n_psi: usize,
    /// Outer mark draws per replicate.
    pub n_mark: usize,
    /// Competitor mark draws per quadrature node.
    #[serde(default = "default_inner")]
    pub n_mark_inner: usize,
    /// Grid the Gaussian field is simulated on; defaults to the quadrature grid.
    #[serde(default)]
    pub field_grid: Option<Grid>,
}

fn default_inner() -> usize {
    32
}

impl PalmConfig {
    pub fn new(n_psi: usize, n_mark: usize) -> Self {
        PalmConfig {
            n_psi,
            n_mark,
            n_mark_inner: default_inner(),
            field_grid: None,
        }
    }

    pub fn with_field_grid(mut self, grid: Grid) -> Self {
        self.field_grid = Some(grid);
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.n_psi < 2 {
            return Err(Error::param("n_psi", "at least two replicates are needed for a standard error"));
        }
        if self.n_mark == 0 || self.n_mark_inner == 0 {
            return Err(Error::param("n_mark", "mark sample counts must be positive"));
        }
        Ok(())
    }
}

/// Realizations of the (Palm-shifted) intensity, evaluated at arbitrary points.
pub(crate) enum PalmField {
    Constant(f64),
    Lgcp(Box<LgcpSimulator>),
}

impl PalmField {
    pub(crate) fn new(source: &IntensitySource, anchors: &[&[f64]], grid: &Grid, cfg: &PalmConfig) -> Result<Self> {
        Ok(match source {
            IntensitySource::Constant { lambda } => PalmField::Constant(*lambda),
            IntensitySource::Lgcp { spec } => {
                let shifted = palm_shift(spec, anchors)?;
                let fg = cfg.field_grid.as_ref().unwrap_or(grid);
                PalmField::Lgcp(Box::new(LgcpSimulator::new(&shifted, fg)?))
            }
        })
    }

    pub(crate) fn realize(&self, rng: &mut ChaCha8Rng) -> Option<GridField> {
        match self {
            PalmField::Constant(_) => None,
            PalmField::Lgcp(sim) => Some(sim.sample_intensity_with(rng)),
        }
    }

    pub(crate) fn value(&self, realization: &Option<GridField>, x: &[f64]) -> f64 {
        match (self, realization) {
            (PalmField::Constant(l), _) => *l,
            (_, Some(f)) => f.value_at(x),
            (PalmField::Lgcp(_), None) => unreachable!("LGCP fields are always realized"),
        }
    }
}

/// Quadrature nodes: cell centres of `grid` near the anchors, shifted by a common
/// random offset within one cell so the Riemann sum is unbiased for the integral.
struct Nodes {
    cells: Vec<usize>,
    dim: usize,
    half: Vec<f64>,
}

impl Nodes {
    fn new(grid: &Grid, anchors: &[&[f64]], radius: Option<f64>) -> Self {
        let d = grid.dim();
        let half: Vec<f64> = (0..d).map(|a| 0.5 * grid.cell_side(a)).collect();
        let cells = match radius {
            None => (0..grid.len()).collect(),
            Some(r) => {
                let mut lo = vec![f64::INFINITY; d];
                let mut hi = vec![f64::NEG_INFINITY; d];
                for x in anchors {
                    for a in 0..d {
                        lo[a] = lo[a].min(x[a] - r - half[a]);
                        hi[a] = hi[a].max(x[a] + r + half[a]);
                    }
                }
                let mut cells = Vec::new();
                if let Some(ranges) = grid.cell_ranges(&lo, &hi) {
                    grid.for_each_in_ranges(&ranges, |i| cells.push(i));
                }
                cells
            }
        };
        Nodes { cells, dim: d, half }
    }

    fn positions(&self, grid: &Grid, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let offset: Vec<f64> = self.half.iter().map(|h| (2.0 * rng.random::<f64>() - 1.0) * h).collect();
        let mut out = vec![0.0; self.cells.len() * self.dim];
        for (k, &c) in self.cells.iter().enumerate() {
            let p = &mut out[k * self.dim..(k + 1) * self.dim];
            grid.centre_into(c, p);
            for a in 0..self.dim {
                p[a] += offset[a];
            }
        }
        out
    }
}

fn stratified(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let u: f64 = rng.random();
            ((k as f64 + u) / n as f64).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)
        })
        .collect()
}

pub(crate) fn check_point(grid: &Grid, x: &[f64]) -> Result<()> {
    if x.len() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("point", "coordinates must be finite"));
    }
    Ok(())
}

fn coverage_warnings(model: &ThinningModel, grid: &Grid, anchors: &[&[f64]]) -> Vec<String> {
    let mut w = Vec::new();
    let range = model.truncation_radius();
    if let Some(r) = range {
        if r > 0.0 && grid.cell_diameter() > r / 5.0 {
            w.push(format!(
                "quadrature cell diameter {:.4} exceeds interaction range / 5 = {:.4}",
                grid.cell_diameter(),
                r / 5.0
            ));
        }
    }
    let covered = anchors.iter().all(|x| match range {
        Some(r) => grid.window().distance_to(x) == 0.0 && {
            let d = grid.dim();
            (0..d).all(|a| x[a] - r >= grid.window().lower()[a] && x[a] + r <= grid.window().upper()[a])
        },
        None => true,
    });
    if !covered {
        w.push("quadrature grid does not cover the interaction range around the evaluation point".into());
    }
    w
}

/// Average of `h(x, m_x; c, m')` style terms over stratified competitor marks at each node.
fn node_weights<F>(
    law: &MarkLaw,
    nodes: &[f64],
    dim: usize,
    n_inner: usize,
    rng: &mut ChaCha8Rng,
    mut term: F,
) -> Vec<f64>
where
    F: FnMut(&[f64], &MarkValue) -> f64,
{
    let vs = stratified(n_inner, rng);
    nodes
        .chunks(dim)
        .map(|c| {
            let mut s = 0.0;
            for &v in &vs {
                let m = law.draw_with_primary(c, v, rng);
                s += term(c, &m);
            }
            s / n_inner as f64
        })
        .collect()
}

/// First-order intensity of the thinned process at `xi`.
pub fn first_order_intensity_mc(
    source: &IntensitySource,
    model: &ThinningModel,
    law: &MarkLaw,
    xi: &[f64],
    grid: &Grid,
    cfg: &PalmConfig,
    rng: RngStream,
) -> Result<IntensityEstimate> {
    source.validate()?;
    law.validate()?;
    cfg.validate()?;
    check_point(grid, xi)?;
    let rho = source.intensity(xi);
    let warnings = coverage_warnings(model, grid, &[xi]);
    let nodes = Nodes::new(grid, &[xi], model.truncation_radius());
    let field = PalmField::new(source, &[xi], grid, cfg)?;
    let vol = grid.cell_volume();
    let d = grid.dim();
    let inter = model.interaction();

    let samples: Vec<f64> = (0..cfg.n_psi as u64)
        .into_par_iter()
        .map(|j| {
            let mut r = rng.derive(j).rng();
            let psi = field.realize(&mut r);
            let pos = nodes.positions(grid, &mut r);
            let psi_at: Vec<f64> = pos.chunks(d).map(|c| field.value(&psi, c) * vol).collect();
            let outer = stratified(cfg.n_mark, &mut r);
            let mut acc = 0.0;
            for &v in &outer {
                let mx = law.draw_with_primary(xi, v, &mut r);
                let w = node_weights(law, &pos, d, cfg.n_mark_inner, &mut r, |c, m| inter.hazard(xi, &mx, c, m));
                let s: f64 = w.iter().zip(&psi_at).map(|(a, b)| a * b).sum();
                acc += (-s).exp();
            }
            model.p0() * rho * acc / cfg.n_mark as f64
        })
        .collect();
    let mut est = IntensityEstimate::from_samples(&samples, cfg.n_mark * cfg.n_mark_inner);
    est.warnings = warnings;
    Ok(est)
}

/// Second-order intensity of the thinned process at `(xi, eta)`.
///
/// The arguments are put in a canonical order first, so swapping them gives the
/// identical estimate.
#[allow(clippy::too_many_arguments)]
pub fn second_order_intensity_mc(
    source: &IntensitySource,
    model: &ThinningModel,
    law: &MarkLaw,
    xi: &[f64],
    eta: &[f64],
    grid: &Grid,
    cfg: &PalmConfig,
    rng: RngStream,
) -> Result<IntensityEstimate> {
    source.validate()?;
    law.validate()?;
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
    let warnings = coverage_warnings(model, grid, &[a, b]);
    let nodes = Nodes::new(grid, &[a, b], model.truncation_radius());
    let field = PalmField::new(source, &[a, b], grid, cfg)?;
    let vol = grid.cell_volume();
    let d = grid.dim();
    let p0 = model.p0();

    let samples: Vec<f64> = (0..cfg.n_psi as u64)
        .into_par_iter()
        .map(|j| {
            let mut r = rng.derive(j).rng();
            let psi = field.realize(&mut r);
            let pos = nodes.positions(grid, &mut r);
            let psi_at: Vec<f64> = pos.chunks(d).map(|c| field.value(&psi, c) * vol).collect();
            let va = stratified(cfg.n_mark, &mut r);
            // independent pairing of the two stratified samples
            let mut vb = stratified(cfg.n_mark, &mut r);
            vb.shuffle(&mut r);
            let mut acc = 0.0;
            for k in 0..cfg.n_mark {
                let ma = law.draw_with_primary(a, va[k], &mut r);
                let mb = law.draw_with_primary(b, vb[k], &mut r);
                let hh = model.h(a, &ma, b, &mb) * model.h(b, &mb, a, &ma);
                if hh == 0.0 {
                    continue;
                }
                let w = node_weights(law, &pos, d, cfg.n_mark_inner, &mut r, |c, m| {
                    1.0 - model.h(a, &ma, c, m) * model.h(b, &mb, c, m)
                });
                let s: f64 = w.iter().zip(&psi_at).map(|(x, y)| x * y).sum();
                acc += hh * (-s).exp();
            }
            p0 * p0 * rho2 * acc / cfg.n_mark as f64
        })
        .collect();
    let mut est = IntensityEstimate::from_samples(&samples, cfg.n_mark * cfg.n_mark_inner);
    est.warnings = warnings;
    Ok(est)
}

/// Monte Carlo estimate of the generating functional `E Π_{x∈Φ} u(x)` on the grid window.
pub fn estimate_generating_functional(
    source: &IntensitySource,
    grid: &Grid,
    u: &(dyn Fn(&[f64]) -> f64 + Sync),
    n_reps: usize,
    rng: RngStream,
) -> Result<IntensityEstimate> {
    source.validate()?;
    if n_reps < 2 {
        return Err(Error::param("n_reps", "at least two replicates are needed"));
    }
    let sim = match source {
        IntensitySource::Lgcp { spec } => Some(LgcpSimulator::new(spec, grid)?),
        IntensitySource::Constant { .. } => None,
    };
    let window = grid.window();
    let samples: Vec<Result<f64>> = (0..n_reps as u64)
        .into_par_iter()
        .map(|j| {
            let mut r = rng.derive(j).rng();
            let pattern = match (&sim, source) {
                (Some(s), _) => s.sample_with(&mut r).0,
                (None, IntensitySource::Constant { lambda }) => sample_poisson_with(*lambda, window, &mut r)?,
                _ => unreachable!(),
            };
            let mut prod = 1.0;
            for x in pattern.iter() {
                let v = u(x);
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::param("u", format!("u({x:?}) = {v} lies outside [0, 1]")));
                }
                prod *= v;
            }
            Ok(prod)
        })
        .collect();
    let samples = samples.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(IntensityEstimate::from_samples(&samples, 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Window;
    use crate::thinning::{Interaction, Preset};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;
    use std::sync::Arc;

    #[test]
    fn closed_forms() {
        let r = 1.0 / PI.sqrt();
        assert_eq!(matern2_retaining_prob(3.0, 0.5, 2, 0.0).unwrap(), 1.0);
        assert_relative_eq!(matern2_retaining_prob(1.0, r, 2, 1.0).unwrap(), (-1.0f64).exp(), max_relative = 1e-12);
        assert_eq!(matern2_retaining_prob(0.0, 0.5, 2, 0.7).unwrap(), 1.0);
        assert!(matern2_retaining_prob(1.0, 0.5, 2, 1.5).is_err());
        assert_relative_eq!(matern2_thinned_intensity(1.0, r, 2).unwrap(), 1.0 - (-1.0f64).exp(), max_relative = 1e-12);
        assert!((matern2_thinned_intensity(1e-6, 0.5, 2).unwrap() - 1e-6).abs() < 1e-9);
        assert!((matern2_thinned_intensity(1e3, 0.5, 2).unwrap() - 4.0 / PI).abs() < 1e-6);
        assert_eq!(matern2_thinned_intensity(2.5, 0.0, 2).unwrap(), 2.5);
        assert_eq!(matern1_thinned_intensity(0.0, 0.5, 2).unwrap(), 0.0);
        assert_eq!(matern1_thinned_intensity(2.0, 0.0, 2).unwrap(), 2.0);
        assert_relative_eq!(matern1_thinned_intensity(1.0, r, 2).unwrap(), (-1.0f64).exp(), max_relative = 1e-12);
    }

    #[derive(Debug)]
    struct Never;
    impl Interaction for Never {
        fn competes(&self, _: &[f64], _: &MarkValue, _: &[f64], _: &MarkValue) -> bool {
            false
        }
        fn deletion_prob(&self, _: &[f64], _: &MarkValue, _: &[f64], _: &MarkValue) -> f64 {
            1.0
        }
        fn range(&self) -> Option<f64> {
            Some(1.0)
        }
    }

    fn grid(side: f64, cells: usize) -> Grid {
        Grid::uniform(Window::cube(2, side).unwrap(), cells).unwrap()
    }

    #[test]
    fn no_competition_is_exact() {
        let model = ThinningModel::custom(Arc::new(Never), 0.7).unwrap();
        let law = MarkLaw::uniform_scalar(0.0, 1.0);
        let src = IntensitySource::Constant { lambda: 3.0 };
        let g = grid(4.0, 20);
        let cfg = PalmConfig::new(4, 2);
        let e = first_order_intensity_mc(&src, &model, &law, &[2.0, 2.0], &g, &cfg, RngStream::new(1)).unwrap();
        assert_eq!(e.value, 0.7 * 3.0);
        assert_eq!(e.std_error, 0.0);
        let e2 = second_order_intensity_mc(&src, &model, &law, &[2.0, 2.0], &[2.5, 2.0], &g, &cfg, RngStream::new(1))
            .unwrap();
        assert_relative_eq!(e2.value, 0.49 * 9.0, max_relative = 1e-14);
    }

    #[test]
    fn matern_i_hard_core_pair_is_zero() {
        let model = ThinningModel::matern_i(0.5).unwrap();
        let law = MarkLaw::uniform_scalar(0.0, 1.0);
        let src = IntensitySource::Constant { lambda: 2.0 };
        let g = grid(4.0, 40);
        let e = second_order_intensity_mc(&src, &model, &law, &[2.0, 2.0], &[2.2, 2.0], &g, &PalmConfig::new(4, 2), RngStream::new(3))
            .unwrap();
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn matern_ii_degenerate_matches_closed_form() {
        let model = ThinningModel::matern_ii(0.5).unwrap();
        let law = MarkLaw::uniform_scalar(0.0, 1.0);
        let g = grid(2.0, 50);
        let target = matern2_thinned_intensity(2.0, 0.5, 2).unwrap();
        let cfg = PalmConfig::new(200, 8);
        let src = IntensitySource::Constant { lambda: 2.0 };
        let e = first_order_intensity_mc(&src, &model, &law, &[1.0, 1.0], &g, &cfg, RngStream::new(5)).unwrap();
        assert!(e.covers(target, 3.0), "{e:?} vs {target}");
        assert!(e.warnings.is_empty(), "{:?}", e.warnings);
    }

    #[test]
    fn second_order_is_symmetric_and_factorizes_at_long_range() {
        let model = ThinningModel::matern_ii(0.5).unwrap();
        let law = MarkLaw::uniform_scalar(0.0, 1.0);
        let src = IntensitySource::Constant { lambda: 2.0 };
        let g = Grid::new(Window::new(vec![0.0, 0.0], vec![4.0, 2.0]).unwrap(), vec![100, 50]).unwrap();
        let cfg = PalmConfig::new(100, 8);
        let x = [1.0, 1.0];
        let y = [2.5, 1.0];
        let a = second_order_intensity_mc(&src, &model, &law, &x, &y, &g, &cfg, RngStream::new(8)).unwrap();
        let b = second_order_intensity_mc(&src, &model, &law, &y, &x, &g, &cfg, RngStream::new(8)).unwrap();
        assert_eq!(a, b);
        let lt = matern2_thinned_intensity(2.0, 0.5, 2).unwrap();
        assert!(a.covers(lt * lt, 3.0), "{a:?} vs {}", lt * lt);
        assert!(second_order_intensity_mc(&src, &model, &law, &x, &x, &g, &cfg, RngStream::new(8)).is_err());
    }

    #[test]
    fn coarse_grid_is_flagged() {
        let model = ThinningModel::from_preset(Preset::MaternII { radius: 0.5 }, 1.0).unwrap();
        let law = MarkLaw::uniform_scalar(0.0, 1.0);
        let src = IntensitySource::Constant { lambda: 1.0 };
        let e = first_order_intensity_mc(&src, &model, &law, &[1.0, 1.0], &grid(2.0, 4), &PalmConfig::new(4, 2), RngStream::new(1))
            .unwrap();
        assert!(!e.warnings.is_empty());
    }

    #[test]
    fn se_halves_with_four_times_the_budget() {
        let model = ThinningModel::matern_ii(0.5).unwrap();
        let law = MarkLaw::uniform_scalar(0.0, 1.0);
        let src = IntensitySource::Constant { lambda: 2.0 };
        let g = grid(2.0, 20);
        let run = |n_psi| {
            let mut cfg = PalmConfig::new(n_psi, 1);
            cfg.n_mark_inner = 4;
            first_order_intensity_mc(&src, &model, &law, &[1.0, 1.0], &g, &cfg, RngStream::new(21))
                .unwrap()
                .std_error
        };
        let ratio = run(1600) / run(6400);
        assert!((ratio - 2.0).abs() < 0.4, "ratio {ratio}");
    }

    #[test]
    fn generating_functional() {
        let g = Grid::uniform(Window::cube(1, 1.0).unwrap(), 10).unwrap();
        let src = IntensitySource::Constant { lambda: 1.0 };
        let one = estimate_generating_functional(&src, &g, &|_| 1.0, 50, RngStream::new(1)).unwrap();
        assert_eq!((one.value, one.std_error), (1.0, 0.0));
        let void = estimate_generating_functional(&src, &g, &|_| 0.0, 4000, RngStream::new(2)).unwrap();
        assert!(void.covers((-1.0f64).exp(), 3.0), "{void:?}");
        // exp(−∫₀¹ (1 − e^{−x}) dx) by midpoint quadrature
        let n = 100_000;
        let integral: f64 = (0..n).map(|k| 1.0 - (-(k as f64 + 0.5) / n as f64).exp()).sum::<f64>() / n as f64;
        let e = estimate_generating_functional(&src, &g, &|x| (-x[0]).exp(), 4000, RngStream::new(3)).unwrap();
        assert!(e.covers((-integral).exp(), 3.0), "{e:?}");
        assert!(estimate_generating_functional(&src, &g, &|_| 1.5, 50, RngStream::new(1)).is_err());
    }
}
