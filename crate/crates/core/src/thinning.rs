//! Generalized Matérn dependent thinning.
//!
//! A point `x` of a marked pattern is endangered by every other point `y` with
//! `ζ(x, y) = 1` and is deleted by it with probability `p(x, y)`; independently it
//! survives the self-term with probability `p₀`. The thinning function of `x` is
//! `p₀ · Π_{y ≠ x} (1 − ζ(x, y) p(x, y))`.
//!
//! Realizations use one uniform per point (for `p₀`) and one per ordered
//! competitor pair, both derived by hashing the point coordinates with the
//! stream key. Retention is then a deterministic function of the pattern and the
//! stream, independent of point order and thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{dist, Grid, Window};
use crate::pattern::{MarkValue, MarkedPointPattern, PointPattern};
use crate::rng::{KeyedUniform, RngStream};
use crate::sampler::{MarkLaw, ScalarLaw};
use crate::shape::ShapeId;

/// Competition function `ζ` and deletion probability `p` of a thinning rule.
///
/// Both are evaluated for a point `x` (the one that may be deleted) against a
/// competitor `y`; `x != y` always.
pub trait Interaction: Send + Sync + fmt::Debug {
    fn competes(&self, x: &[f64], mx: &MarkValue, y: &[f64], my: &MarkValue) -> bool;

    fn deletion_prob(&self, x: &[f64], mx: &MarkValue, y: &[f64], my: &MarkValue) -> f64;

    /// `ζ·p`, the probability that `y` deletes `x`.
    #[inline]
    fn hazard(&self, x: &[f64], mx: &MarkValue, y: &[f64], my: &MarkValue) -> f64 {
        if self.competes(x, mx, y, my) {
            self.deletion_prob(x, mx, y, my)
        } else {
            0.0
        }
    }

    /// Distance beyond which `ζ·p` vanishes, if finite.
    fn range(&self) -> Option<f64> {
        None
    }

    /// Radius used to truncate spatial integrals: the exact range if there is one,
    /// otherwise the distance at which `p` drops below 1e-6.
    fn truncation_radius(&self) -> Option<f64> {
        self.range()
    }
}

/// Radial deletion-probability profiles `f(‖x − y‖)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kernel", rename_all = "snake_case")]
pub enum DistanceKernel {
    /// `(1 − d/radius)₊`
    Linear { radius: f64 },
    /// `prob · 1{d <= radius}`
    Step { radius: f64, prob: f64 },
    /// `height · exp(−d²/(2 scale²))`
    Gaussian { scale: f64, height: f64 },
}

impl DistanceKernel {
    #[inline]
    pub fn eval(&self, d: f64) -> f64 {
        match *self {
            DistanceKernel::Linear { radius } => (1.0 - d / radius).max(0.0),
            DistanceKernel::Step { radius, prob } => {
                if d <= radius {
                    prob
                } else {
                    0.0
                }
            }
            DistanceKernel::Gaussian { scale, height } => height * (-0.5 * (d / scale).powi(2)).exp(),
        }
    }

    pub fn range(&self) -> Option<f64> {
        match *self {
            DistanceKernel::Linear { radius } | DistanceKernel::Step { radius, .. } => Some(radius),
            DistanceKernel::Gaussian { .. } => None,
        }
    }

    pub fn truncation_radius(&self) -> f64 {
        match *self {
            DistanceKernel::Linear { radius } | DistanceKernel::Step { radius, .. } => radius,
            DistanceKernel::Gaussian { scale, height } => {
                if height <= 1e-6 {
                    0.0
                } else {
                    scale * (2.0 * (height / 1e-6).ln()).sqrt()
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            DistanceKernel::Linear { radius } => radius > 0.0,
            DistanceKernel::Step { radius, prob } => radius > 0.0 && (0.0..=1.0).contains(&prob),
            DistanceKernel::Gaussian { scale, height } => scale > 0.0 && (0.0..=1.0).contains(&height),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param("kernel", format!("invalid distance kernel {self:?}")))
        }
    }
}

/// Built-in thinning rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum Preset {
    /// Delete every point with a neighbour within `radius`.
    MaternI { radius: f64 },
    /// As Matérn I, deleting with probability `(1 − d/radius)₊`.
    GeneralizedMaternI { radius: f64 },
    /// Delete a point if a neighbour within `radius` has a strictly smaller scalar mark.
    MaternII { radius: f64 },
    /// As Matérn II, deleting with probability `(1 − d/radius)₊`.
    GeneralizedMaternII { radius: f64 },
    /// Every pair competes; deletion probability `f(d)`.
    TeichmannI { kernel: DistanceKernel },
    /// Pair marks `(a, b)`: `x` is endangered by `y` when `a_x >= a_y`; deletion
    /// probability `f(d)`, multiplied by `b_y` (clamped to [0, 1]) if `mark_scaled`.
    TeichmannII {
        kernel: DistanceKernel,
        #[serde(default)]
        mark_scaled: bool,
    },
    /// Kernel marks; `x` is endangered when `m_y(x) > m_x(x)`, deleted with
    /// probability `(1 − d/radius)₊`.
    SoftCoreKernel { radius: f64 },
    /// Kernel marks; `x` is deleted when `m_y(t) > m_x(t)` at `x` and at every cell centre of `grid`.
    ExtremalDominance { grid: Grid },
    /// Kernel marks; `x` is deleted when `m_y(x) > m_x(x)`.
    VisibleCentre,
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::MaternI { .. } => "matern_i",
            Preset::GeneralizedMaternI { .. } => "generalized_matern_i",
            Preset::MaternII { .. } => "matern_ii",
            Preset::GeneralizedMaternII { .. } => "generalized_matern_ii",
            Preset::TeichmannI { .. } => "teichmann_i",
            Preset::TeichmannII { .. } => "teichmann_ii",
            Preset::SoftCoreKernel { .. } => "soft_core_kernel",
            Preset::ExtremalDominance { .. } => "extremal_dominance",
            Preset::VisibleCentre => "visible_centre",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Preset::MaternI { radius }
            | Preset::GeneralizedMaternI { radius }
            | Preset::MaternII { radius }
            | Preset::GeneralizedMaternII { radius }
            | Preset::SoftCoreKernel { radius } => {
                if *radius > 0.0 && radius.is_finite() {
                    Ok(())
                } else {
                    Err(Error::param("radius", format!("must be finite and > 0, got {radius}")))
                }
            }
            Preset::TeichmannI { kernel } | Preset::TeichmannII { kernel, .. } => kernel.validate(),
            Preset::ExtremalDominance { .. } | Preset::VisibleCentre => Ok(()),
        }
    }

    /// The mark law the rule is designed for.
    pub fn natural_mark_law(&self, tau: f64, shape: ShapeId) -> MarkLaw {
        match self {
            Preset::MaternI { .. }
            | Preset::GeneralizedMaternI { .. }
            | Preset::MaternII { .. }
            | Preset::GeneralizedMaternII { .. }
            | Preset::TeichmannI { .. } => MarkLaw::uniform_scalar(0.0, 1.0),
            Preset::TeichmannII { .. } => MarkLaw::Pair {
                a: ScalarLaw::uniform01(),
                b: ScalarLaw::uniform01(),
            },
            Preset::SoftCoreKernel { .. } => MarkLaw::uniform_kernel(shape),
            Preset::ExtremalDominance { .. } | Preset::VisibleCentre => MarkLaw::pareto_kernel(tau, shape),
        }
    }
}

#[inline]
fn scalar(m: &MarkValue) -> f64 {
    match m {
        MarkValue::Scalar { value } => *value,
        MarkValue::Pair { a, .. } => *a,
        MarkValue::ScaledKernel { u, .. } => *u,
    }
}

#[inline]
fn kernel_at(m: &MarkValue, t: &[f64]) -> f64 {
    match m {
        MarkValue::ScaledKernel { u, shape, centre } => u * shape.eval_at(t, centre),
        MarkValue::Scalar { value } => *value,
        MarkValue::Pair { a, .. } => *a,
    }
}

impl Interaction for Preset {
    #[inline]
    fn competes(&self, x: &[f64], mx: &MarkValue, y: &[f64], my: &MarkValue) -> bool {
        match self {
            Preset::MaternI { radius } | Preset::GeneralizedMaternI { radius } => dist(x, y) <= *radius,
            Preset::MaternII { radius } | Preset::GeneralizedMaternII { radius } => {
                scalar(my) < scalar(mx) && dist(x, y) <= *radius
            }
            Preset::TeichmannI { .. } => true,
            Preset::TeichmannII { .. } => scalar(mx) >= scalar(my),
            Preset::SoftCoreKernel { radius } => dist(x, y) < *radius && kernel_at(my, x) > kernel_at(mx, x),
            Preset::ExtremalDominance { grid } => crate::extremal::dominates(x, mx, my, grid),
            Preset::VisibleCentre => kernel_at(my, x) > kernel_at(mx, x),
        }
    }

    #[inline]
    fn deletion_prob(&self, x: &[f64], _mx: &MarkValue, y: &[f64], my: &MarkValue) -> f64 {
        match self {
            Preset::MaternI { .. } | Preset::MaternII { .. } => 1.0,
            Preset::ExtremalDominance { .. } | Preset::VisibleCentre => 1.0,
            Preset::GeneralizedMaternI { radius }
            | Preset::GeneralizedMaternII { radius }
            | Preset::SoftCoreKernel { radius } => (1.0 - dist(x, y) / radius).max(0.0),
            Preset::TeichmannI { kernel } => kernel.eval(dist(x, y)),
            Preset::TeichmannII { kernel, mark_scaled } => {
                let f = kernel.eval(dist(x, y));
                if *mark_scaled {
                    let b = my.as_pair().map(|p| p.1).unwrap_or(1.0);
                    f * b.clamp(0.0, 1.0)
                } else {
                    f
                }
            }
        }
    }

    fn range(&self) -> Option<f64> {
        match self {
            Preset::MaternI { radius }
            | Preset::GeneralizedMaternI { radius }
            | Preset::MaternII { radius }
            | Preset::GeneralizedMaternII { radius }
            | Preset::SoftCoreKernel { radius } => Some(*radius),
            Preset::TeichmannI { kernel } | Preset::TeichmannII { kernel, .. } => kernel.range(),
            Preset::ExtremalDominance { .. } | Preset::VisibleCentre => None,
        }
    }

    fn truncation_radius(&self) -> Option<f64> {
        match self {
            Preset::TeichmannI { kernel } | Preset::TeichmannII { kernel, .. } => Some(kernel.truncation_radius()),
            _ => self.range(),
        }
    }
}

/// A thinning rule `(ζ, p)` together with the retention probability `p₀`.
#[derive(Debug, Clone)]
pub struct ThinningModel {
    interaction: Arc<dyn Interaction>,
    preset: Option<Preset>,
    p0: f64,
}

impl ThinningModel {
    pub fn from_preset(preset: Preset, p0: f64) -> Result<Self> {
        preset.validate()?;
        check_p0(p0)?;
        Ok(ThinningModel {
            interaction: Arc::new(preset.clone()),
            preset: Some(preset),
            p0,
        })
    }

    /// A rule given by arbitrary `ζ` and `p`; `p` values must lie in [0, 1].
    pub fn custom(interaction: Arc<dyn Interaction>, p0: f64) -> Result<Self> {
        check_p0(p0)?;
        Ok(ThinningModel {
            interaction,
            preset: None,
            p0,
        })
    }

    pub fn matern_i(radius: f64) -> Result<Self> {
        ThinningModel::from_preset(Preset::MaternI { radius }, 1.0)
    }

    pub fn matern_ii(radius: f64) -> Result<Self> {
        ThinningModel::from_preset(Preset::MaternII { radius }, 1.0)
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn preset(&self) -> Option<&Preset> {
        self.preset.as_ref()
    }

    pub fn interaction(&self) -> &dyn Interaction {
        self.interaction.as_ref()
    }

    /// `h(x, y) = 1 − ζ(x, y) p(x, y)`.
    #[inline]
    pub fn h(&self, x: &[f64], mx: &MarkValue, y: &[f64], my: &MarkValue) -> f64 {
        1.0 - self.interaction.hazard(x, mx, y, my).clamp(0.0, 1.0)
    }

    pub fn range(&self) -> Option<f64> {
        self.interaction.range()
    }

    pub fn truncation_radius(&self) -> Option<f64> {
        self.interaction.truncation_radius()
    }
}

fn check_p0(p0: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p0) {
        Ok(())
    } else {
        Err(Error::param("p0", format!("must lie in [0, 1], got {p0}")))
    }
}

/// Candidate competitors of each point, restricted by the interaction range when known.
struct Neighbours<'a> {
    pattern: &'a MarkedPointPattern,
    order: Vec<usize>,
    keys: Vec<f64>,
    range: Option<f64>,
}

impl<'a> Neighbours<'a> {
    fn new(pattern: &'a MarkedPointPattern, range: Option<f64>) -> Self {
        let mut order: Vec<usize> = (0..pattern.len()).collect();
        if range.is_some() {
            order.sort_by(|&a, &b| pattern.point(a)[0].total_cmp(&pattern.point(b)[0]).then(a.cmp(&b)));
        }
        let keys = order.iter().map(|&i| pattern.point(i)[0]).collect();
        Neighbours {
            pattern,
            order,
            keys,
            range,
        }
    }

    fn for_each(&self, i: usize, mut f: impl FnMut(usize) -> bool) {
        let (lo, hi) = match self.range {
            Some(r) => {
                let x0 = self.pattern.point(i)[0];
                (
                    self.keys.partition_point(|&k| k < x0 - r),
                    self.keys.partition_point(|&k| k <= x0 + r),
                )
            }
            None => (0, self.order.len()),
        };
        for &j in &self.order[lo..hi] {
            if j != i && !f(j) {
                return;
            }
        }
    }
}

/// Thinning function `f_th` of point `index`: `p₀ Π_{j≠index} (1 − ζ p)`.
pub fn thinning_function(model: &ThinningModel, pattern: &MarkedPointPattern, index: usize) -> f64 {
    let x = pattern.point(index);
    let mx = pattern.mark(index);
    let mut prod = model.p0;
    Neighbours::new(pattern, model.range()).for_each(index, |j| {
        prod *= model.h(x, mx, pattern.point(j), pattern.mark(j));
        prod > 0.0
    });
    prod
}

const TAG_SELF: u64 = 0x5E1F;
const TAG_PAIR: u64 = 0x9A12;

fn key_words(tag: u64, a: &[f64], b: Option<&[f64]>) -> SmallVec<[u64; 8]> {
    let mut w: SmallVec<[u64; 8]> = SmallVec::new();
    w.push(tag);
    w.extend(a.iter().map(|v| v.to_bits()));
    if let Some(b) = b {
        w.extend(b.iter().map(|v| v.to_bits()));
    }
    w
}

fn retained(model: &ThinningModel, nb: &Neighbours<'_>, keyed: &KeyedUniform, i: usize) -> bool {
    let pattern = nb.pattern;
    let x = pattern.point(i);
    let mx = pattern.mark(i);
    if model.p0 < 1.0 && keyed.uniform(&key_words(TAG_SELF, x, None)) >= model.p0 {
        return false;
    }
    let inter = model.interaction();
    let mut keep = true;
    nb.for_each(i, |j| {
        let y = pattern.point(j);
        let my = pattern.mark(j);
        if inter.competes(x, mx, y, my) {
            let p = inter.deletion_prob(x, mx, y, my);
            if p >= 1.0 || (p > 0.0 && keyed.uniform(&key_words(TAG_PAIR, x, Some(y))) < p) {
                keep = false;
            }
        }
        keep
    });
    keep
}

/// Retention indicators of every point for one realization of the thinning.
pub fn retention_indicators(model: &ThinningModel, pattern: &MarkedPointPattern, rng: RngStream) -> Vec<bool> {
    let nb = Neighbours::new(pattern, model.range());
    let keyed = rng.keyed();
    (0..pattern.len())
        .into_par_iter()
        .map(|i| retained(model, &nb, &keyed, i))
        .collect()
}

/// One realization of the generalized Matérn thinning.
pub fn thin(model: &ThinningModel, pattern: &MarkedPointPattern, rng: RngStream) -> MarkedPointPattern {
    let keep = retention_indicators(model, pattern, rng);
    let idx: Vec<usize> = keep.iter().enumerate().filter(|(_, k)| **k).map(|(i, _)| i).collect();
    pattern.select(&idx)
}

/// Thins a pattern simulated on a dilated window and keeps the points in `window`.
pub fn thin_and_crop(
    model: &ThinningModel,
    pattern: &MarkedPointPattern,
    window: &Window,
    rng: RngStream,
) -> MarkedPointPattern {
    thin(model, pattern, rng).restrict(window)
}

/// Drops the marks.
pub fn thinned_ground(pattern: &MarkedPointPattern) -> PointPattern {
    pattern.ground().clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{attach_marks, sample_poisson};

    fn line(points: &[f64], marks: &[f64]) -> MarkedPointPattern {
        let w = Window::new(vec![-10.0], vec![10.0]).unwrap();
        let p = PointPattern::new(w, points.to_vec()).unwrap();
        MarkedPointPattern::new(p, marks.iter().map(|&m| MarkValue::scalar(m)).collect()).unwrap()
    }

    #[test]
    fn matern_ii_hand_enumeration() {
        let pat = line(&[0.0, 0.5], &[0.2, 0.7]);
        let m = ThinningModel::matern_ii(1.0).unwrap();
        assert_eq!(thinning_function(&m, &pat, 0), 1.0);
        assert_eq!(thinning_function(&m, &pat, 1), 0.0);
    }

    #[test]
    fn zero_p0_kills_everything() {
        let pat = line(&[0.0, 5.0], &[0.2, 0.7]);
        let m = ThinningModel::from_preset(Preset::MaternI { radius: 0.1 }, 0.0).unwrap();
        assert_eq!(thinning_function(&m, &pat, 0), 0.0);
        assert_eq!(thinning_function(&m, &pat, 1), 0.0);
        assert!(thin(&m, &pat, RngStream::new(1)).is_empty());
    }

    #[test]
    fn singleton_survives() {
        let pat = line(&[0.0], &[0.5]);
        let m = ThinningModel::matern_i(1.0).unwrap();
        assert_eq!(thinning_function(&m, &pat, 0), 1.0);
        assert_eq!(thin(&m, &pat, RngStream::new(1)).len(), 1);
    }

    #[derive(Debug)]
    struct Constant {
        zeta: bool,
        p: f64,
    }

    impl Interaction for Constant {
        fn competes(&self, _: &[f64], _: &MarkValue, _: &[f64], _: &MarkValue) -> bool {
            self.zeta
        }
        fn deletion_prob(&self, _: &[f64], _: &MarkValue, _: &[f64], _: &MarkValue) -> f64 {
            self.p
        }
    }

    #[test]
    fn no_competition_keeps_all_and_full_competition_kills_all() {
        let pat = line(&[0.0, 0.1, 3.0, 7.0], &[0.1, 0.2, 0.3, 0.4]);
        let none = ThinningModel::custom(Arc::new(Constant { zeta: true, p: 0.0 }), 1.0).unwrap();
        assert_eq!(thin(&none, &pat, RngStream::new(4)), pat);
        let all = ThinningModel::custom(Arc::new(Constant { zeta: true, p: 1.0 }), 1.0).unwrap();
        assert!(thin(&all, &pat, RngStream::new(4)).is_empty());
    }

    #[test]
    fn thinned_ground_strips_marks() {
        let pat = line(&[0.0, 0.1, 3.0], &[0.1, 0.2, 0.3]);
        let g = thinned_ground(&pat);
        assert_eq!(g.coords(), &[0.0, 0.1, 3.0]);
        assert!(thinned_ground(&MarkedPointPattern::empty(pat.window().clone())).is_empty());
    }

    #[test]
    fn hard_core_and_matern_ii_minimality() {
        let w = Window::cube(2, 6.0).unwrap();
        let base = RngStream::new(99);
        for rep in 0..20 {
            let s = base.derive(rep);
            let p = sample_poisson(3.0, &w, s.derive_named("ground")).unwrap();
            let mp = attach_marks(&p, &MarkLaw::uniform_scalar(0.0, 1.0), s.derive_named("marks")).unwrap();
            for model in [ThinningModel::matern_i(0.4).unwrap(), ThinningModel::matern_ii(0.4).unwrap()] {
                let out = thin(&model, &mp, s.derive_named("thin"));
                for i in 0..out.len() {
                    for j in 0..i {
                        assert!(dist(out.point(i), out.point(j)) > 0.4);
                    }
                }
            }
            let out = thin(&ThinningModel::matern_ii(0.4).unwrap(), &mp, s);
            for i in 0..out.len() {
                let m = out.mark(i).as_scalar().unwrap();
                for j in 0..mp.len() {
                    if dist(mp.point(j), out.point(i)) <= 0.4 && mp.point(j) != out.point(i) {
                        assert!(mp.mark(j).as_scalar().unwrap() > m);
                    }
                }
            }
        }
    }

    #[test]
    fn permutation_gives_identical_output_set() {
        let w = Window::cube(2, 5.0).unwrap();
        let p = sample_poisson(4.0, &w, RngStream::new(1)).unwrap();
        let mp = attach_marks(&p, &MarkLaw::uniform_scalar(0.0, 1.0), RngStream::new(2)).unwrap();
        let model = ThinningModel::from_preset(Preset::GeneralizedMaternII { radius: 0.5 }, 0.8).unwrap();
        let rev: Vec<usize> = (0..mp.len()).rev().collect();
        let a = thin(&model, &mp, RngStream::new(3));
        let b = thin(&model, &mp.select(&rev), RngStream::new(3));
        let mut ka: Vec<Vec<u64>> = a.ground().iter().map(|x| x.iter().map(|v| v.to_bits()).collect()).collect();
        let mut kb: Vec<Vec<u64>> = b.ground().iter().map(|x| x.iter().map(|v| v.to_bits()).collect()).collect();
        ka.sort();
        kb.sort();
        assert_eq!(ka, kb);
    }
}
