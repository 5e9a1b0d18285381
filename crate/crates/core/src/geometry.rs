//! Rectangular observation windows, regular grids and ball volumes.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Axis-aligned box `[lower, upper]` in ℝ^d. Boundaries belong to the window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WindowRepr", into = "WindowRepr")]
pub struct Window {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct WindowRepr {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<WindowRepr> for Window {
    type Error = Error;
    fn try_from(r: WindowRepr) -> Result<Self> {
        Window::new(r.lower, r.upper)
    }
}

impl From<Window> for WindowRepr {
    fn from(w: Window) -> Self {
        WindowRepr {
            lower: w.lower,
            upper: w.upper,
        }
    }
}

impl Window {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidWindow("dimension must be at least 1".into()));
        }
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidWindow(format!(
                    "axis {i}: need finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Window { lower, upper })
    }

    /// `[0, side]^d`.
    pub fn cube(dim: usize, side: f64) -> Result<Self> {
        Window::new(vec![0.0; dim], vec![side; dim])
    }

    /// `[0, sides[0]] × … × [0, sides[d-1]]`.
    pub fn from_sides(sides: &[f64]) -> Result<Self> {
        Window::new(vec![0.0; sides.len()], sides.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn side(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn sides(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.side(i)).collect()
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.side(i)).product()
    }

    pub fn centre(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }

    /// True if `other` lies entirely within `self`.
    pub fn contains_window(&self, other: &Window) -> bool {
        other.dim() == self.dim()
            && (0..self.dim())
                .all(|i| self.lower[i] <= other.lower[i] && other.upper[i] <= self.upper[i])
    }

    /// Minkowski sum with the cube `[-r, r]^d`.
    pub fn dilate(&self, r: f64) -> Result<Window> {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::param("dilation", format!("must be finite and >= 0, got {r}")));
        }
        Window::new(
            self.lower.iter().map(|v| v - r).collect(),
            self.upper.iter().map(|v| v + r).collect(),
        )
    }

    /// Shrinks every side by `r` at both ends. Fails if nothing is left.
    pub fn erode(&self, r: f64) -> Result<Window> {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::param("erosion", format!("must be finite and >= 0, got {r}")));
        }
        Window::new(
            self.lower.iter().map(|v| v + r).collect(),
            self.upper.iter().map(|v| v - r).collect(),
        )
    }

    /// Euclidean distance from `x` to the window (0 inside).
    pub fn distance_to(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (lo, hi))| {
                let d = if v < lo {
                    lo - v
                } else if v > hi {
                    v - hi
                } else {
                    0.0
                };
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Volume of the parallel set `{x : dist(x, window) <= r}` (Steiner formula for boxes).
    pub fn parallel_volume(&self, r: f64) -> f64 {
        let sides = self.sides();
        let d = sides.len();
        // e[j] = elementary symmetric polynomial of degree j in the side lengths
        let mut e = vec![0.0; d + 1];
        e[0] = 1.0;
        for s in &sides {
            for j in (1..=d).rev() {
                e[j] += e[j - 1] * s;
            }
        }
        (0..=d)
            .map(|j| e[j] * unit_ball_volume(d - j) * r.powi((d - j) as i32))
            .sum()
    }
}

/// Volume of the unit ball in ℝ^d, with the convention that the 0-ball has volume 1.
fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / d as f64 * unit_ball_volume(d - 2),
    }
}

/// Volume of the d-dimensional ball of radius `r`, `π^{d/2} r^d / Γ(d/2 + 1)`.
pub fn ball_volume(d: usize, r: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::param("d", "dimension must be at least 1"));
    }
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::param("R", format!("radius must be finite and >= 0, got {r}")));
    }
    Ok(unit_ball_volume(d) * r.powi(d as i32))
}

/// Regular lattice of cells over a window; values live at cell centres.
///
/// Cells are enumerated with axis 0 varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    window: Window,
    cells_per_axis: Vec<usize>,
}

impl Grid {
    pub fn new(window: Window, cells_per_axis: Vec<usize>) -> Result<Self> {
        if cells_per_axis.len() != window.dim() {
            return Err(Error::DimensionMismatch {
                expected: window.dim(),
                got: cells_per_axis.len(),
            });
        }
        if cells_per_axis.contains(&0) {
            return Err(Error::param("cells_per_axis", "every axis needs at least one cell"));
        }
        Ok(Grid {
            window,
            cells_per_axis,
        })
    }

    /// Same number of cells on every axis.
    pub fn uniform(window: Window, cells: usize) -> Result<Self> {
        let d = window.dim();
        Grid::new(window, vec![cells; d])
    }

    /// Smallest grid whose cell sides do not exceed `spacing`.
    pub fn with_spacing(window: Window, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0) {
            return Err(Error::param("spacing", format!("must be > 0, got {spacing}")));
        }
        let cells = window
            .sides()
            .iter()
            .map(|s| ((s / spacing).ceil() as usize).max(1))
            .collect();
        Grid::new(window, cells)
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn dim(&self) -> usize {
        self.window.dim()
    }

    pub fn cells_per_axis(&self) -> &[usize] {
        &self.cells_per_axis
    }

    pub fn len(&self) -> usize {
        self.cells_per_axis.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_side(&self, axis: usize) -> f64 {
        self.window.side(axis) / self.cells_per_axis[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.window.volume() / self.len() as f64
    }

    pub fn cell_diameter(&self) -> f64 {
        (0..self.dim())
            .map(|a| self.cell_side(a).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Writes the centre of cell `index` into `out`.
    pub fn centre_into(&self, index: usize, out: &mut [f64]) {
        let mut rem = index;
        for (axis, o) in out.iter_mut().enumerate().take(self.dim()) {
            let n = self.cells_per_axis[axis];
            let k = rem % n;
            rem /= n;
            *o = self.window.lower()[axis] + (k as f64 + 0.5) * self.cell_side(axis);
        }
    }

    pub fn centre(&self, index: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.dim()];
        self.centre_into(index, &mut c);
        c
    }

    /// All cell centres as a flat array of `len() * dim()` coordinates.
    pub fn centres(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; self.len() * d];
        for (i, chunk) in out.chunks_mut(d).enumerate() {
            self.centre_into(i, chunk);
        }
        out
    }

    /// Per-axis cell coordinate of `x`, clamped to the grid.
    fn axis_cell(&self, axis: usize, v: f64) -> usize {
        let n = self.cells_per_axis[axis];
        let rel = (v - self.window.lower()[axis]) / self.cell_side(axis);
        if rel <= 0.0 {
            0
        } else {
            (rel as usize).min(n - 1)
        }
    }

    /// Index of the cell containing `x`; points outside are mapped to the nearest cell.
    pub fn nearest_cell(&self, x: &[f64]) -> usize {
        let mut index = 0;
        let mut stride = 1;
        for axis in 0..self.dim() {
            index += self.axis_cell(axis, x[axis]) * stride;
            stride *= self.cells_per_axis[axis];
        }
        index
    }

    /// Inclusive per-axis cell ranges covering the box `[lo, hi]`, or `None` if disjoint.
    pub fn cell_ranges(&self, lo: &[f64], hi: &[f64]) -> Option<Vec<(usize, usize)>> {
        let mut ranges = Vec::with_capacity(self.dim());
        for axis in 0..self.dim() {
            if hi[axis] < self.window.lower()[axis] || lo[axis] > self.window.upper()[axis] {
                return None;
            }
            ranges.push((self.axis_cell(axis, lo[axis]), self.axis_cell(axis, hi[axis])));
        }
        Some(ranges)
    }

    /// Calls `f(index)` for every cell in the per-axis ranges.
    pub fn for_each_in_ranges(&self, ranges: &[(usize, usize)], mut f: impl FnMut(usize)) {
        let d = self.dim();
        let mut k: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        loop {
            let mut index = 0;
            let mut stride = 1;
            for axis in 0..d {
                index += k[axis] * stride;
                stride *= self.cells_per_axis[axis];
            }
            f(index);
            let mut axis = 0;
            loop {
                if axis == d {
                    return;
                }
                if k[axis] < ranges[axis].1 {
                    k[axis] += 1;
                    break;
                }
                k[axis] = ranges[axis].0;
                axis += 1;
            }
        }
    }
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn window_volumes() {
        assert_eq!(Window::cube(2, 1.0).unwrap().volume(), 1.0);
        assert_eq!(Window::from_sides(&[10.0, 5.0]).unwrap().volume(), 50.0);
        assert_eq!(Window::cube(3, 2.0).unwrap().volume(), 8.0);
    }

    #[test]
    fn degenerate_windows_rejected() {
        assert!(Window::new(vec![0.0, 0.0], vec![1.0, 0.0]).is_err());
        assert!(Window::new(vec![], vec![]).is_err());
        assert!(Window::new(vec![0.0], vec![1.0, 2.0]).is_err());
        assert!(Window::cube(2, 1.0).unwrap().erode(0.5).is_err());
    }

    #[test]
    fn ball_volumes() {
        assert_relative_eq!(ball_volume(2, 1.0).unwrap(), PI, epsilon = 1e-15);
        assert_relative_eq!(ball_volume(1, 0.5).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(ball_volume(3, 1.0).unwrap(), 4.0 * PI / 3.0, epsilon = 1e-15);
        assert_eq!(ball_volume(2, 0.0).unwrap(), 0.0);
        assert!(ball_volume(2, -1.0).is_err());
        // Γ-function form for an odd dimension: π^{5/2}/Γ(7/2) = 8π²/15
        assert_relative_eq!(ball_volume(5, 1.0).unwrap(), 8.0 * PI * PI / 15.0, epsilon = 1e-14);
    }

    #[test]
    fn boundary_points_are_inside() {
        let w = Window::cube(2, 1.0).unwrap();
        assert!(w.contains(&[0.0, 1.0]));
        assert!(!w.contains(&[0.0, 1.0 + 1e-12]));
    }

    #[test]
    fn grid_centres_inside_and_volume() {
        let g = Grid::new(Window::from_sides(&[2.0, 3.0]).unwrap(), vec![4, 5]).unwrap();
        assert_eq!(g.len(), 20);
        assert_relative_eq!(g.cell_volume() * g.len() as f64, 6.0);
        for i in 0..g.len() {
            let c = g.centre(i);
            assert!(c[0] > 0.0 && c[0] < 2.0 && c[1] > 0.0 && c[1] < 3.0);
            assert_eq!(g.nearest_cell(&c), i);
        }
        assert_eq!(g.centre(1), vec![0.75, 0.3]);
    }

    #[test]
    fn ranges_enumerate_box() {
        let g = Grid::uniform(Window::cube(2, 10.0).unwrap(), 10).unwrap();
        let r = g.cell_ranges(&[2.5, 2.5], &[4.5, 3.5]).unwrap();
        let mut n = 0;
        g.for_each_in_ranges(&r, |_| n += 1);
        assert_eq!(n, 3 * 2);
        assert!(g.cell_ranges(&[11.0, 0.0], &[12.0, 1.0]).is_none());
    }

    #[test]
    fn steiner_parallel_volume() {
        let w = Window::from_sides(&[2.0, 3.0]).unwrap();
        // 6 + perimeter·r + π r²
        assert_relative_eq!(w.parallel_volume(1.0), 6.0 + 10.0 + PI, epsilon = 1e-12);
    }
}
