//! Point patterns and marked point patterns.

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::geometry::Window;
use crate::shape::ShapeId;

/// Coordinates of a storm centre; stays on the stack for d <= 3.
pub type Coords = SmallVec<[f64; 3]>;

/// A mark attached to a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarkValue {
    /// Real-valued mark, e.g. the uniform birth time of the classical second model.
    Scalar { value: f64 },
    /// Mark function `t ↦ u·X(t − centre)`.
    ScaledKernel { u: f64, shape: ShapeId, centre: Coords },
    /// Two-component mark `(m(0), m(1))`.
    Pair { a: f64, b: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkKind {
    Scalar,
    ScaledKernel,
    Pair,
}

impl MarkValue {
    pub fn scalar(value: f64) -> Self {
        MarkValue::Scalar { value }
    }

    pub fn kernel(u: f64, shape: ShapeId, centre: &[f64]) -> Result<Self> {
        if !(u > 0.0) || !u.is_finite() {
            return Err(Error::param("u", format!("kernel intensity must be finite and > 0, got {u}")));
        }
        Ok(MarkValue::ScaledKernel {
            u,
            shape,
            centre: Coords::from_slice(centre),
        })
    }

    pub fn pair(a: f64, b: f64) -> Self {
        MarkValue::Pair { a, b }
    }

    pub fn kind(&self) -> MarkKind {
        match self {
            MarkValue::Scalar { .. } => MarkKind::Scalar,
            MarkValue::ScaledKernel { .. } => MarkKind::ScaledKernel,
            MarkValue::Pair { .. } => MarkKind::Pair,
        }
    }

    /// Value of the mark function at `t`. Scalar marks are constant functions;
    /// pair marks live on `{0, 1}` and have no value on ℝ^d.
    #[inline]
    pub fn eval(&self, t: &[f64]) -> Option<f64> {
        match self {
            MarkValue::Scalar { value } => Some(*value),
            MarkValue::ScaledKernel { u, shape, centre } => Some(u * shape.eval_at(t, centre)),
            MarkValue::Pair { .. } => None,
        }
    }

    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            MarkValue::Scalar { value } => Some(*value),
            _ => None,
        }
    }

    pub fn as_pair(&self) -> Option<(f64, f64)> {
        match self {
            MarkValue::Pair { a, b } => Some((*a, *b)),
            _ => None,
        }
    }

    /// `(u, shape, centre)` of a kernel mark.
    pub fn as_kernel(&self) -> Option<(f64, ShapeId, &[f64])> {
        match self {
            MarkValue::ScaledKernel { u, shape, centre } => Some((*u, *shape, centre.as_slice())),
            _ => None,
        }
    }

    /// Multiplies the intensity of a kernel mark (other kinds are returned unchanged).
    pub fn scaled(&self, factor: f64) -> MarkValue {
        match self {
            MarkValue::ScaledKernel { u, shape, centre } => MarkValue::ScaledKernel {
                u: u * factor,
                shape: *shape,
                centre: centre.clone(),
            },
            other => other.clone(),
        }
    }
}

/// A finite set of points in a window, stored as one flat coordinate array.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPattern {
    window: Window,
    coords: Vec<f64>,
}

impl PointPattern {
    pub fn empty(window: Window) -> Self {
        PointPattern {
            window,
            coords: Vec::new(),
        }
    }

    /// Builds a pattern from flat coordinates; every point must lie in the window.
    pub fn new(window: Window, coords: Vec<f64>) -> Result<Self> {
        let d = window.dim();
        if !coords.len().is_multiple_of(d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: coords.len() % d,
            });
        }
        if let Some(i) = coords.chunks(d).position(|p| !window.contains(p)) {
            return Err(Error::param(
                "points",
                format!("point {i} {:?} lies outside the window", &coords[i * d..(i + 1) * d]),
            ));
        }
        Ok(PointPattern { window, coords })
    }

    pub(crate) fn from_parts_unchecked(window: Window, coords: Vec<f64>) -> Self {
        PointPattern { window, coords }
    }

    pub fn dim(&self) -> usize {
        self.window.dim()
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.coords[i * d..(i + 1) * d]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks(self.dim())
    }

    pub fn push(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if !self.window.contains(x) {
            return Err(Error::param("point", format!("{x:?} lies outside the window")));
        }
        self.coords.extend_from_slice(x);
        Ok(())
    }

    /// Indices of the points inside `region`.
    pub fn indices_in(&self, region: &Window) -> Vec<usize> {
        (0..self.len()).filter(|&i| region.contains(self.point(i))).collect()
    }

    /// Number of points inside `region`.
    pub fn count_in(&self, region: &Window) -> usize {
        self.iter().filter(|p| region.contains(p)).count()
    }

    pub fn select(&self, indices: &[usize]) -> PointPattern {
        let mut coords = Vec::with_capacity(indices.len() * self.dim());
        for &i in indices {
            coords.extend_from_slice(self.point(i));
        }
        PointPattern::from_parts_unchecked(self.window.clone(), coords)
    }

    /// Points inside `window`, re-homed to that window.
    pub fn restrict(&self, window: &Window) -> PointPattern {
        let mut p = self.select(&self.indices_in(window));
        p.window = window.clone();
        p
    }

    /// Shifts points and window by `offset`.
    pub fn translate(&self, offset: &[f64]) -> Result<PointPattern> {
        let w = Window::new(
            self.window.lower().iter().zip(offset).map(|(a, b)| a + b).collect(),
            self.window.upper().iter().zip(offset).map(|(a, b)| a + b).collect(),
        )?;
        let d = self.dim();
        let coords = self
            .coords
            .iter()
            .enumerate()
            .map(|(k, v)| v + offset[k % d])
            .collect();
        Ok(PointPattern::from_parts_unchecked(w, coords))
    }
}

/// A point pattern with exactly one mark per point, all of the same kind.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkedPointPattern {
    base: PointPattern,
    marks: Vec<MarkValue>,
}

impl MarkedPointPattern {
    pub fn new(base: PointPattern, marks: Vec<MarkValue>) -> Result<Self> {
        if marks.len() != base.len() {
            return Err(Error::param(
                "marks",
                format!("{} marks for {} points", marks.len(), base.len()),
            ));
        }
        if let Some(first) = marks.first() {
            if marks.iter().any(|m| m.kind() != first.kind()) {
                return Err(Error::param("marks", "all marks of a pattern must be of one kind"));
            }
        }
        let d = base.dim();
        for m in &marks {
            if let MarkValue::ScaledKernel { u, centre, .. } = m {
                if centre.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: centre.len(),
                    });
                }
                if !(*u > 0.0) {
                    return Err(Error::param("u", format!("kernel intensity must be > 0, got {u}")));
                }
            }
        }
        check_unique_locations(&base, &marks)?;
        Ok(MarkedPointPattern { base, marks })
    }

    pub(crate) fn from_parts_unchecked(base: PointPattern, marks: Vec<MarkValue>) -> Self {
        MarkedPointPattern { base, marks }
    }

    pub fn empty(window: Window) -> Self {
        MarkedPointPattern {
            base: PointPattern::empty(window),
            marks: Vec::new(),
        }
    }

    pub fn ground(&self) -> &PointPattern {
        &self.base
    }

    pub fn into_ground(self) -> PointPattern {
        self.base
    }

    pub fn marks(&self) -> &[MarkValue] {
        &self.marks
    }

    pub fn mark(&self, i: usize) -> &MarkValue {
        &self.marks[i]
    }

    pub fn mark_kind(&self) -> Option<MarkKind> {
        self.marks.first().map(MarkValue::kind)
    }

    pub fn window(&self) -> &Window {
        self.base.window()
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn len(&self) -> usize {
        self.marks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marks.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        self.base.point(i)
    }

    pub fn select(&self, indices: &[usize]) -> MarkedPointPattern {
        MarkedPointPattern {
            base: self.base.select(indices),
            marks: indices.iter().map(|&i| self.marks[i].clone()).collect(),
        }
    }

    pub fn restrict(&self, window: &Window) -> MarkedPointPattern {
        let idx = self.base.indices_in(window);
        let mut out = self.select(&idx);
        out.base.window = window.clone();
        out
    }
}

fn check_unique_locations(base: &PointPattern, marks: &[MarkValue]) -> Result<()> {
    let mut order: Vec<usize> = (0..base.len()).collect();
    order.sort_by(|&a, &b| {
        base.point(a)
            .iter()
            .zip(base.point(b))
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    for w in order.windows(2) {
        if base.point(w[0]) == base.point(w[1]) && marks[w[0]] != marks[w[1]] {
            return Err(Error::param(
                "marks",
                format!("location {:?} carries two different marks", base.point(w[0])),
            ));
        }
    }
    Ok(())
}
