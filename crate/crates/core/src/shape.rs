//! Radial storm shapes used as mark functions `m(t) = u·X(t − s)`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::ball_volume;

/// Identifier of a built-in shape. The dimension is taken from the argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeId {
    /// Standard normal density `(2π)^{-d/2} exp(-‖t‖²/2)`.
    GaussDensity,
    /// `(1 − ‖t‖²)₊`.
    Epanechnikov,
    /// `(1 − ‖t‖)₊`.
    Triangle,
}

impl ShapeId {
    pub const ALL: [ShapeId; 3] = [ShapeId::GaussDensity, ShapeId::Epanechnikov, ShapeId::Triangle];

    pub fn name(self) -> &'static str {
        match self {
            ShapeId::GaussDensity => "gauss_density",
            ShapeId::Epanechnikov => "epanechnikov",
            ShapeId::Triangle => "triangle",
        }
    }

    /// Profile value at distance `r` from the centre in ℝ^d.
    #[inline]
    pub fn radial(self, dim: usize, r: f64) -> f64 {
        match self {
            ShapeId::GaussDensity => gauss_norm(dim) * (-0.5 * r * r).exp(),
            ShapeId::Epanechnikov => (1.0 - r * r).max(0.0),
            ShapeId::Triangle => (1.0 - r).max(0.0),
        }
    }

    /// Profile value at squared distance `r2`; avoids the square root for the Gaussian.
    #[inline]
    pub fn radial_sq(self, dim: usize, r2: f64) -> f64 {
        match self {
            ShapeId::GaussDensity => gauss_norm(dim) * (-0.5 * r2).exp(),
            ShapeId::Epanechnikov => (1.0 - r2).max(0.0),
            ShapeId::Triangle => (1.0 - r2.sqrt()).max(0.0),
        }
    }

    /// `X(t)` for a displacement vector `t`.
    #[inline]
    pub fn eval(self, t: &[f64]) -> f64 {
        self.radial_sq(t.len(), t.iter().map(|v| v * v).sum())
    }

    /// `X(t − centre)`.
    #[inline]
    pub fn eval_at(self, t: &[f64], centre: &[f64]) -> f64 {
        let r2 = t.iter().zip(centre).map(|(a, b)| (a - b) * (a - b)).sum();
        self.radial_sq(t.len(), r2)
    }

    pub fn peak(self, dim: usize) -> f64 {
        self.radial(dim, 0.0)
    }

    /// `∫ X(t) dt` over ℝ^d.
    pub fn total_mass(self, dim: usize) -> f64 {
        let unit = ball_volume(dim, 1.0).expect("dim >= 1");
        match self {
            ShapeId::GaussDensity => 1.0,
            // d·κ_d ∫₀¹ (1 − r²) r^{d−1} dr
            ShapeId::Epanechnikov => 2.0 * unit / (dim as f64 + 2.0),
            ShapeId::Triangle => unit / (dim as f64 + 1.0),
        }
    }

    /// Radius of the support, if bounded.
    pub fn support_radius(self) -> Option<f64> {
        match self {
            ShapeId::GaussDensity => None,
            ShapeId::Epanechnikov | ShapeId::Triangle => Some(1.0),
        }
    }

    /// Smallest `r` with `X(r) <= ratio · X(0)`, for `ratio` in (0, 1].
    pub fn radius_at_ratio(self, ratio: f64) -> f64 {
        if ratio >= 1.0 {
            return 0.0;
        }
        if ratio <= 0.0 {
            return self.support_radius().unwrap_or(f64::INFINITY);
        }
        match self {
            ShapeId::GaussDensity => (-2.0 * ratio.ln()).sqrt(),
            ShapeId::Epanechnikov => (1.0 - ratio).sqrt(),
            ShapeId::Triangle => 1.0 - ratio,
        }
    }
}

fn gauss_norm(dim: usize) -> f64 {
    (2.0 * PI).powf(-(dim as f64) / 2.0)
}

impl fmt::Display for ShapeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ShapeId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gauss_density" | "gauss" | "smith" => Ok(ShapeId::GaussDensity),
            "epanechnikov" => Ok(ShapeId::Epanechnikov),
            "triangle" => Ok(ShapeId::Triangle),
            other => Err(Error::param("shape", format!("unknown shape `{other}`"))),
        }
    }
}

/// A shape in a fixed dimension together with its radial envelopes.
///
/// Built-in shapes are deterministic and radial, so the upper and lower
/// monotone envelopes coincide with the profile itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StormShape {
    pub id: ShapeId,
    pub dim: usize,
}

impl StormShape {
    pub fn new(id: ShapeId, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "dimension must be at least 1"));
        }
        Ok(StormShape { id, dim })
    }

    pub fn eval(&self, t: &[f64]) -> f64 {
        self.id.eval(t)
    }

    pub fn peak(&self) -> f64 {
        self.id.peak(self.dim)
    }

    pub fn total_mass(&self) -> f64 {
        self.id.total_mass(self.dim)
    }

    /// Monotone upper envelope `f(‖t‖) >= X(t)`.
    pub fn upper_envelope(&self, r: f64) -> f64 {
        self.id.radial(self.dim, r)
    }

    /// Monotone lower envelope `g(‖t‖) <= X(t)`.
    pub fn lower_envelope(&self, r: f64) -> f64 {
        self.id.radial(self.dim, r)
    }

    /// Buffer radius beyond which the envelope has dropped below `tol · X(0)`.
    pub fn envelope_buffer(&self, tol: f64) -> f64 {
        self.id.radius_at_ratio(tol)
    }

    /// `∫_{‖t‖ > r} f(‖t‖) dt`, the envelope mass outside the ball of radius `r`.
    pub fn tail_mass(&self, r: f64) -> f64 {
        let d = self.dim;
        let surface = d as f64 * ball_volume(d, 1.0).expect("dim >= 1");
        let upper = self.id.support_radius().unwrap_or(r.max(0.0) + 15.0);
        if r >= upper {
            return 0.0;
        }
        let n = 20_000;
        let h = (upper - r) / n as f64;
        (0..n)
            .map(|k| {
                let s = r + (k as f64 + 0.5) * h;
                self.upper_envelope(s) * surface * s.powi(d as i32 - 1)
            })
            .sum::<f64>()
            * h
    }
}
