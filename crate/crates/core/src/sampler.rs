//! Poisson, Cox and log-Gaussian Cox samplers, and independent mark attachment.

use rand::Rng;
use rand_distr::{Distribution, Open01, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::GridField;
use crate::gauss::{GrfSampler, LgcpSpec};
use crate::geometry::{Grid, Window};
use crate::pattern::{MarkValue, MarkedPointPattern, PointPattern};
use crate::rng::RngStream;
use crate::shape::ShapeId;

/// Law of a real-valued mark component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum ScalarLaw {
    Uniform { lo: f64, hi: f64 },
    /// Density `τ u⁻² 1{u > τ}`, sampled as `τ / V` with `V ~ Uniform(0, 1)`.
    ParetoTail { tau: f64 },
}

impl ScalarLaw {
    pub fn uniform01() -> Self {
        ScalarLaw::Uniform { lo: 0.0, hi: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ScalarLaw::Uniform { lo, hi } if !(lo < hi && lo.is_finite() && hi.is_finite()) => {
                Err(Error::param("uniform", format!("need finite lo < hi, got [{lo}, {hi}]")))
            }
            ScalarLaw::ParetoTail { tau } if !(tau > 0.0 && tau.is_finite()) => {
                Err(Error::param("tau", format!("must be finite and > 0, got {tau}")))
            }
            _ => Ok(()),
        }
    }

    /// Quantile transform of `v ∈ (0, 1)`.
    #[inline]
    pub fn from_uniform(&self, v: f64) -> f64 {
        match *self {
            ScalarLaw::Uniform { lo, hi } => lo + v * (hi - lo),
            ScalarLaw::ParetoTail { tau } => tau / (1.0 - v),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let v: f64 = Open01.sample(rng);
        self.from_uniform(v)
    }

    pub fn survival(&self, x: f64) -> f64 {
        match *self {
            ScalarLaw::Uniform { lo, hi } => ((hi - x) / (hi - lo)).clamp(0.0, 1.0),
            ScalarLaw::ParetoTail { tau } => {
                if x <= tau {
                    1.0
                } else {
                    tau / x
                }
            }
        }
    }
}

/// Law `ν` of the independent marks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarkLaw {
    Scalar { law: ScalarLaw },
    /// Mark function `u·X(· − ξ)` centred at the point it is attached to.
    ScaledKernel { u: ScalarLaw, shape: ShapeId },
    Pair { a: ScalarLaw, b: ScalarLaw },
}

impl MarkLaw {
    pub fn uniform_scalar(lo: f64, hi: f64) -> Self {
        MarkLaw::Scalar {
            law: ScalarLaw::Uniform { lo, hi },
        }
    }

    pub fn pareto_kernel(tau: f64, shape: ShapeId) -> Self {
        MarkLaw::ScaledKernel {
            u: ScalarLaw::ParetoTail { tau },
            shape,
        }
    }

    pub fn uniform_kernel(shape: ShapeId) -> Self {
        MarkLaw::ScaledKernel {
            u: ScalarLaw::uniform01(),
            shape,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MarkLaw::Scalar { law } => law.validate(),
            MarkLaw::ScaledKernel { u, .. } => {
                u.validate()?;
                if let ScalarLaw::Uniform { lo, .. } = u {
                    if *lo < 0.0 {
                        return Err(Error::param("u", "kernel intensities must be positive"));
                    }
                }
                Ok(())
            }
            MarkLaw::Pair { a, b } => {
                a.validate()?;
                b.validate()
            }
        }
    }

    /// Mark for the point `x`, with the first component driven by `v ∈ (0, 1)`.
    /// Used for stratified sampling of the mark integral.
    pub fn draw_with_primary<R: Rng + ?Sized>(&self, x: &[f64], v: f64, rng: &mut R) -> MarkValue {
        match self {
            MarkLaw::Scalar { law } => MarkValue::scalar(law.from_uniform(v)),
            MarkLaw::ScaledKernel { u, shape } => {
                let mut uu = u.from_uniform(v);
                if uu <= 0.0 {
                    uu = f64::MIN_POSITIVE;
                }
                MarkValue::ScaledKernel {
                    u: uu,
                    shape: *shape,
                    centre: x.into(),
                }
            }
            MarkLaw::Pair { a, b } => MarkValue::pair(a.from_uniform(v), b.sample(rng)),
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> MarkValue {
        let v: f64 = Open01.sample(rng);
        self.draw_with_primary(x, v, rng)
    }
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("finite positive mean").sample(rng) as usize
}

fn uniform_in<R: Rng + ?Sized>(lo: &[f64], hi: &[f64], rng: &mut R, out: &mut Vec<f64>) {
    for (a, b) in lo.iter().zip(hi) {
        let u: f64 = rng.random();
        // keep the point inside even under rounding
        out.push((a + u * (b - a)).clamp(*a, *b));
    }
}

pub fn sample_poisson_with<R: Rng + ?Sized>(lambda: f64, window: &Window, rng: &mut R) -> Result<PointPattern> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::param("lambda", format!("must be finite and >= 0, got {lambda}")));
    }
    let n = poisson_count(lambda * window.volume(), rng);
    let mut coords = Vec::with_capacity(n * window.dim());
    for _ in 0..n {
        uniform_in(window.lower(), window.upper(), rng, &mut coords);
    }
    Ok(PointPattern::from_parts_unchecked(window.clone(), coords))
}

/// Homogeneous Poisson process with intensity `lambda` on `window`.
pub fn sample_poisson(lambda: f64, window: &Window, rng: RngStream) -> Result<PointPattern> {
    sample_poisson_with(lambda, window, &mut rng.rng())
}

pub fn sample_cox_with<R: Rng + ?Sized>(intensity: &GridField, rng: &mut R) -> Result<PointPattern> {
    let grid = intensity.grid();
    if let Some((i, v)) = intensity
        .values()
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v >= 0.0) || !v.is_finite())
    {
        return Err(Error::param("intensity", format!("cell {i} has invalid value {v}")));
    }
    let d = grid.dim();
    let vol = grid.cell_volume();
    let half: Vec<f64> = (0..d).map(|a| 0.5 * grid.cell_side(a)).collect();
    let mut centre = vec![0.0; d];
    let mut lo = vec![0.0; d];
    let mut hi = vec![0.0; d];
    let mut coords = Vec::new();
    for (i, &psi) in intensity.values().iter().enumerate() {
        let n = poisson_count(psi * vol, rng);
        if n == 0 {
            continue;
        }
        grid.centre_into(i, &mut centre);
        for a in 0..d {
            lo[a] = centre[a] - half[a];
            hi[a] = centre[a] + half[a];
        }
        for _ in 0..n {
            uniform_in(&lo, &hi, rng, &mut coords);
        }
    }
    for (k, v) in coords.iter_mut().enumerate() {
        let a = k % d;
        *v = v.clamp(grid.window().lower()[a], grid.window().upper()[a]);
    }
    Ok(PointPattern::from_parts_unchecked(grid.window().clone(), coords))
}

/// Cox process driven by a piecewise-constant intensity: independent Poisson cell
/// counts, points uniform within their cell.
pub fn sample_cox(intensity: &GridField, rng: RngStream) -> Result<PointPattern> {
    sample_cox_with(intensity, &mut rng.rng())
}

/// LGCP sampler with a cached covariance factorization.
#[derive(Debug, Clone)]
pub struct LgcpSimulator {
    spec: LgcpSpec,
    field: GrfSampler,
    means: Vec<f64>,
}

impl LgcpSimulator {
    pub fn new(spec: &LgcpSpec, grid: &Grid) -> Result<Self> {
        Ok(LgcpSimulator {
            spec: spec.clone(),
            field: GrfSampler::new(&spec.cov, grid)?,
            means: spec.mean_on(grid),
        })
    }

    /// Reuses an existing factorization; its covariance must match `spec`.
    pub fn from_sampler(spec: &LgcpSpec, field: GrfSampler) -> Result<Self> {
        if field.covariance() != &spec.cov {
            return Err(Error::param("cov", "sampler covariance differs from the spec"));
        }
        let means = spec.mean_on(field.grid());
        Ok(LgcpSimulator {
            spec: spec.clone(),
            field,
            means,
        })
    }

    pub fn spec(&self) -> &LgcpSpec {
        &self.spec
    }

    pub fn grid(&self) -> &Grid {
        self.field.grid()
    }

    pub fn field_sampler(&self) -> &GrfSampler {
        &self.field
    }

    pub fn sample_intensity_with<R: Rng + ?Sized>(&self, rng: &mut R) -> GridField {
        let mut f = self.field.sample_with_mean(&self.means, rng);
        for v in f.values_mut() {
            *v = v.exp();
        }
        f
    }

    /// Pattern and the intensity realization that generated it.
    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> (PointPattern, GridField) {
        let psi = self.sample_intensity_with(rng);
        let pattern = sample_cox_with(&psi, rng).expect("exp(W) is nonnegative");
        (pattern, psi)
    }

    pub fn sample(&self, rng: RngStream) -> (PointPattern, GridField) {
        self.sample_with(&mut rng.rng())
    }
}

/// One LGCP pattern on the grid window together with its intensity field.
pub fn sample_lgcp(spec: &LgcpSpec, grid: &Grid, rng: RngStream) -> Result<(PointPattern, GridField)> {
    Ok(LgcpSimulator::new(spec, grid)?.sample(rng))
}

pub fn attach_marks_with<R: Rng + ?Sized>(pattern: &PointPattern, law: &MarkLaw, rng: &mut R) -> MarkedPointPattern {
    let marks = pattern.iter().map(|x| law.draw(x, rng)).collect();
    MarkedPointPattern::from_parts_unchecked(pattern.clone(), marks)
}

/// Attaches one independent mark per point; kernel marks are centred at their point.
pub fn attach_marks(pattern: &PointPattern, law: &MarkLaw, rng: RngStream) -> Result<MarkedPointPattern> {
    law.validate()?;
    Ok(attach_marks_with(pattern, law, &mut rng.rng()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss::{CovarianceFamily, CovarianceModel};
    use crate::stats::mean_and_se;

    #[test]
    fn zero_intensity_is_empty() {
        let w = Window::cube(2, 10.0).unwrap();
        assert!(sample_poisson(0.0, &w, RngStream::new(1)).unwrap().is_empty());
        let g = Grid::uniform(w, 5).unwrap();
        assert!(sample_cox(&GridField::constant(g, 0.0), RngStream::new(1)).unwrap().is_empty());
    }

    #[test]
    fn negative_intensity_rejected() {
        let g = Grid::uniform(Window::cube(1, 1.0).unwrap(), 3).unwrap();
        let f = GridField::new(g, vec![1.0, -0.5, 1.0]).unwrap();
        assert!(sample_cox(&f, RngStream::new(1)).is_err());
        assert!(sample_poisson(-1.0, &Window::cube(1, 1.0).unwrap(), RngStream::new(1)).is_err());
    }

    #[test]
    fn poisson_count_mean_and_variance() {
        let w = Window::cube(2, 10.0).unwrap();
        let m = RngStream::new(11);
        let counts: Vec<f64> = (0..1000)
            .map(|i| sample_poisson(2.0, &w, m.derive(i)).unwrap().len() as f64)
            .collect();
        let (mean, se) = mean_and_se(&counts);
        assert!((mean - 200.0).abs() < 3.0 * se, "mean {mean} se {se}");
        let var_samples: Vec<f64> = counts.iter().map(|c| (c - mean).powi(2)).collect();
        let (var, var_se) = mean_and_se(&var_samples);
        assert!((var - 200.0).abs() < 3.0 * var_se, "var {var} se {var_se}");
    }

    #[test]
    fn cox_counts_follow_mass() {
        let g = Grid::uniform(Window::cube(2, 1.0).unwrap(), 4).unwrap();
        let f = GridField::constant(g.clone(), 3.0);
        let m = RngStream::new(5);
        let counts: Vec<f64> = (0..2000)
            .map(|i| sample_cox(&f, m.derive(i)).unwrap().len() as f64)
            .collect();
        let (mean, se) = mean_and_se(&counts);
        assert!((mean - 3.0).abs() < 3.0 * se);

        // left half carries 1, right half 4
        let vals: Vec<f64> = (0..g.len()).map(|i| if g.centre(i)[0] < 0.5 { 1.0 } else { 4.0 }).collect();
        let f = GridField::new(g, vals).unwrap();
        let left = Window::new(vec![0.0, 0.0], vec![0.5, 1.0]).unwrap();
        let (mut l, mut r) = (Vec::new(), Vec::new());
        for i in 0..2000 {
            let p = sample_cox(&f, m.derive(10_000 + i)).unwrap();
            let nl = p.count_in(&left) as f64;
            l.push(nl);
            r.push(p.len() as f64 - nl);
        }
        let (ml, sl) = mean_and_se(&l);
        let (mr, sr) = mean_and_se(&r);
        assert!((ml - 0.5).abs() < 3.0 * sl);
        assert!((mr - 2.0).abs() < 3.0 * sr);
    }

    #[test]
    fn conditional_uniformity_chi_square() {
        let w = Window::cube(2, 1.0).unwrap();
        let p = sample_poisson(5000.0, &w, RngStream::new(3)).unwrap();
        let mut bins = [0usize; 25];
        for x in p.iter() {
            let i = ((x[0] * 5.0) as usize).min(4) + 5 * ((x[1] * 5.0) as usize).min(4);
            bins[i] += 1;
        }
        let e = p.len() as f64 / 25.0;
        let chi2: f64 = bins.iter().map(|&b| (b as f64 - e).powi(2) / e).sum();
        // 24 dof, 99.9% quantile 51.2
        assert!(chi2 < 51.2, "chi2 {chi2}");
    }

    #[test]
    fn lgcp_is_reproducible_and_degenerates_to_poisson() {
        let g = Grid::uniform(Window::cube(2, 5.0).unwrap(), 10).unwrap();
        let spec = LgcpSpec::degenerate(2.0).unwrap();
        let sim = LgcpSimulator::new(&spec, &g).unwrap();
        assert_eq!(sim.sample(RngStream::new(4)), sim.sample(RngStream::new(4)));
        let counts: Vec<f64> = (0..1000).map(|i| sim.sample(RngStream::new(8).derive(i)).0.len() as f64).collect();
        let (mean, se) = mean_and_se(&counts);
        assert!((mean - 50.0).abs() < 3.0 * se);
    }

    #[test]
    fn lgcp_first_order_intensity() {
        let g = Grid::uniform(Window::cube(2, 4.0).unwrap(), 8).unwrap();
        let cov = CovarianceModel::new(CovarianceFamily::Exponential, 0.5, 1.0).unwrap();
        let spec = LgcpSpec::stationary(0.2, cov);
        let sim = LgcpSimulator::new(&spec, &g).unwrap();
        let m = RngStream::new(21);
        let xs: Vec<f64> = (0..1000).map(|i| sim.sample(m.derive(i)).0.len() as f64 / 16.0).collect();
        let (mean, se) = mean_and_se(&xs);
        let target = (0.2f64 + 0.25).exp();
        assert!((mean - target).abs() < 3.0 * se, "{mean} vs {target} (se {se})");
    }

    #[test]
    fn mark_laws() {
        let w = Window::cube(1, 1.0).unwrap();
        let p = sample_poisson(10_000.0, &w, RngStream::new(1)).unwrap();
        let mp = attach_marks(&p, &MarkLaw::uniform_scalar(0.0, 1.0), RngStream::new(2)).unwrap();
        let xs: Vec<f64> = mp.marks().iter().map(|m| m.as_scalar().unwrap()).collect();
        let (mean, se) = mean_and_se(&xs);
        assert!((mean - 0.5).abs() < 3.0 * se);

        let law = MarkLaw::pareto_kernel(1.0, ShapeId::GaussDensity);
        let mp = attach_marks(&p, &law, RngStream::new(3)).unwrap();
        let ind: Vec<f64> = mp
            .marks()
            .iter()
            .map(|m| {
                let (u, _, c) = m.as_kernel().unwrap();
                assert!(u > 1.0);
                assert_eq!(c.len(), 1);
                (u > 2.0) as u8 as f64
            })
            .collect();
        let (frac, se) = mean_and_se(&ind);
        assert!((frac - 0.5).abs() < 3.0 * se);
        for (i, m) in mp.marks().iter().enumerate() {
            assert_eq!(m.as_kernel().unwrap().2, mp.point(i));
        }

        let empty = PointPattern::empty(w);
        assert!(attach_marks(&empty, &law, RngStream::new(1)).unwrap().is_empty());
    }

    #[test]
    fn pareto_survival_matches() {
        let law = ScalarLaw::ParetoTail { tau: 0.5 };
        let mut rng = RngStream::new(77).rng();
        let xs: Vec<f64> = (0..20_000).map(|_| law.sample(&mut rng)).collect();
        assert!(xs.iter().all(|&u| u > 0.5));
        for k in 1..=10 {
            let u = 0.5 * k as f64;
            let emp = xs.iter().filter(|&&x| x > u).count() as f64 / xs.len() as f64;
            let p = law.survival(u);
            let se = (p * (1.0 - p) / xs.len() as f64).sqrt().max(1e-9);
            assert!((emp - p).abs() <= 3.0 * se + 1e-12, "u={u} emp={emp} p={p}");
        }
    }
}
