//! Points of the extended space, the chordal metric, inversion in the unit
//! sphere and the unit-ball constants.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension must be at least 2, got {0}")]
    Dimension(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("coordinate {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("empty point sample")]
    EmptySample,
    #[error("invalid ring radii: need 0 < r_inner < r_outer, got ({0}, {1})")]
    RingRadii(f64, f64),
    #[error("ring center must be a finite point")]
    RingCenter,
}

/// A point of the extended space `R^n ∪ {∞}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Point {
    Finite(Vec<f64>),
    Infinity,
}

impl Point {
    /// Validated finite point; needs `n >= 2` finite coordinates.
    pub fn new(coords: Vec<f64>) -> Result<Self, GeometryError> {
        if coords.len() < 2 {
            return Err(GeometryError::Dimension(coords.len()));
        }
        if let Some((index, &value)) = coords.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(GeometryError::NonFinite { index, value });
        }
        Ok(Point::Finite(coords))
    }

    pub fn origin(dim: usize) -> Self {
        Point::Finite(vec![0.0; dim])
    }

    /// `r` times the first basis vector.
    pub fn on_axis(dim: usize, r: f64) -> Self {
        let mut c = vec![0.0; dim];
        c[0] = r;
        Point::Finite(c)
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self, Point::Infinity)
    }

    pub fn coords(&self) -> Option<&[f64]> {
        match self {
            Point::Finite(c) => Some(c),
            Point::Infinity => None,
        }
    }

    pub fn dim(&self) -> Option<usize> {
        self.coords().map(<[f64]>::len)
    }

    /// Euclidean norm; `∞` for the point at infinity.
    pub fn norm(&self) -> f64 {
        match self {
            Point::Finite(c) => norm(c),
            Point::Infinity => f64::INFINITY,
        }
    }
}

/// Euclidean norm; falls back to `hypot` when the squares under- or overflow.
pub fn norm(c: &[f64]) -> f64 {
    let s = c.iter().map(|v| v * v).sum::<f64>();
    if s.is_normal() && s < f64::MAX {
        s.sqrt()
    } else {
        c.iter().fold(0.0, |acc: f64, v| acc.hypot(*v))
    }
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    let s = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    if s.is_normal() && s < f64::MAX {
        s.sqrt()
    } else {
        a.iter().zip(b).fold(0.0, |acc: f64, (x, y)| acc.hypot(x - y))
    }
}

/// Chordal distance `h(x, y)` on the extended space.
pub fn chordal_distance(x: &Point, y: &Point) -> Result<f64, GeometryError> {
    match (x, y) {
        (Point::Infinity, Point::Infinity) => Ok(0.0),
        (Point::Finite(a), Point::Infinity) | (Point::Infinity, Point::Finite(a)) => {
            Ok(1.0 / (1.0 + a.iter().map(|v| v * v).sum::<f64>()).sqrt())
        }
        (Point::Finite(a), Point::Finite(b)) => {
            if a.len() != b.len() {
                return Err(GeometryError::DimensionMismatch(a.len(), b.len()));
            }
            let na2: f64 = a.iter().map(|v| v * v).sum();
            let nb2: f64 = b.iter().map(|v| v * v).sum();
            let d = distance(a, b);
            Ok((d / ((1.0 + na2).sqrt() * (1.0 + nb2).sqrt())).min(1.0))
        }
    }
}

/// Largest pairwise chordal distance over a finite sample.
pub fn chordal_diameter(points: &[Point]) -> Result<f64, GeometryError> {
    if points.is_empty() {
        return Err(GeometryError::EmptySample);
    }
    let mut best = 0.0f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.max(chordal_distance(a, b)?);
        }
    }
    Ok(best)
}

/// Inversion in the unit sphere, `x ↦ x/|x|²`, with `0 ↔ ∞`.
///
/// `dim` is only consulted for `∞`, which carries no dimension of its own.
pub fn invert(x: &Point, dim: usize) -> Point {
    match x {
        Point::Infinity => Point::origin(dim),
        Point::Finite(c) => {
            let n2: f64 = c.iter().map(|v| v * v).sum();
            if n2 == 0.0 {
                Point::Infinity
            } else {
                Point::Finite(c.iter().map(|v| v / n2).collect())
            }
        }
    }
}

/// Ring `{x : r_inner < |x - center| < r_outer}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RingSpec {
    center: Point,
    r_inner: f64,
    r_outer: f64,
    dim: usize,
}

impl RingSpec {
    pub fn new(center: Point, r_inner: f64, r_outer: f64) -> Result<Self, GeometryError> {
        let dim = center.dim().ok_or(GeometryError::RingCenter)?;
        if dim < 2 {
            return Err(GeometryError::Dimension(dim));
        }
        if !(r_inner > 0.0 && r_inner < r_outer && r_outer.is_finite()) {
            return Err(GeometryError::RingRadii(r_inner, r_outer));
        }
        Ok(RingSpec { center, r_inner, r_outer, dim })
    }

    pub fn center(&self) -> &Point {
        &self.center
    }
    pub fn r_inner(&self) -> f64 {
        self.r_inner
    }
    pub fn r_outer(&self) -> f64 {
        self.r_outer
    }
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Lebesgue measure of the ring.
    pub fn volume(&self) -> f64 {
        DimensionConstants::new(self.dim)
            .map(|c| c.ball_volume * (self.r_outer.powi(self.dim as i32) - self.r_inner.powi(self.dim as i32)))
            .unwrap_or(f64::NAN)
    }

    pub fn contains(&self, x: &Point) -> bool {
        match (x.coords(), self.center.coords()) {
            (Some(a), Some(c)) if a.len() == c.len() => {
                let d = distance(a, c);
                d > self.r_inner && d < self.r_outer
            }
            _ => false,
        }
    }
}

/// Volume `Ω_n` of the unit ball and area `ω_{n-1} = n Ω_n` of the unit sphere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DimensionConstants {
    pub dim: usize,
    pub ball_volume: f64,
    pub sphere_area: f64,
}

impl DimensionConstants {
    pub fn new(dim: usize) -> Result<Self, GeometryError> {
        if dim < 2 {
            return Err(GeometryError::Dimension(dim));
        }
        // Ω_n = (2π/n) Ω_{n-2}, Ω_0 = 1, Ω_1 = 2
        let mut omega = if dim % 2 == 0 { 1.0 } else { 2.0 };
        let mut k = if dim % 2 == 0 { 2 } else { 3 };
        while k <= dim {
            omega *= 2.0 * PI / k as f64;
            k += 2;
        }
        Ok(DimensionConstants { dim, ball_volume: omega, sphere_area: dim as f64 * omega })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    #[test]
    fn chordal_examples() {
        assert_eq!(chordal_distance(&p(&[0.0, 0.0]), &Point::Infinity).unwrap(), 1.0);
        assert_eq!(chordal_distance(&p(&[0.3, -2.0]), &p(&[0.3, -2.0])).unwrap(), 0.0);
        let h = chordal_distance(&p(&[1.0, 0.0]), &p(&[0.0, 1.0])).unwrap();
        assert_relative_eq!(h, 2f64.sqrt() / 2.0, epsilon = 1e-15);
        assert!(matches!(
            chordal_distance(&p(&[1.0, 0.0]), &p(&[0.0, 1.0, 0.0])),
            Err(GeometryError::DimensionMismatch(2, 3))
        ));
    }

    #[test]
    fn diameter_examples() {
        let o = p(&[0.0, 0.0]);
        assert_eq!(chordal_diameter(&[o.clone(), Point::Infinity]).unwrap(), 1.0);
        assert_eq!(chordal_diameter(&[o.clone()]).unwrap(), 0.0);
        let three = [o, p(&[1.0, 0.0]), Point::Infinity];
        assert_eq!(chordal_diameter(&three).unwrap(), 1.0);
        assert_eq!(chordal_diameter(&[]), Err(GeometryError::EmptySample));
    }

    #[test]
    fn inversion_examples() {
        assert_eq!(invert(&p(&[1.0, 0.0, 0.0]), 3), p(&[1.0, 0.0, 0.0]));
        assert_eq!(invert(&p(&[2.0, 0.0]), 2), p(&[0.5, 0.0]));
        assert_eq!(invert(&p(&[0.0, 0.0]), 2), Point::Infinity);
        assert_eq!(invert(&Point::Infinity, 3), Point::origin(3));
    }

    #[test]
    fn constants() {
        let c2 = DimensionConstants::new(2).unwrap();
        assert_relative_eq!(c2.ball_volume, PI, epsilon = 1e-15);
        assert_relative_eq!(c2.sphere_area, 2.0 * PI, epsilon = 1e-15);
        let c3 = DimensionConstants::new(3).unwrap();
        assert_relative_eq!(c3.ball_volume, 4.0 * PI / 3.0, epsilon = 1e-15);
        assert_relative_eq!(c3.sphere_area, 4.0 * PI, epsilon = 1e-15);
        let c4 = DimensionConstants::new(4).unwrap();
        assert_relative_eq!(c4.ball_volume, PI * PI / 2.0, epsilon = 1e-14);
        assert!(DimensionConstants::new(1).is_err());
    }

    #[test]
    fn ring_validation() {
        assert!(RingSpec::new(p(&[0.0, 0.0]), 0.5, 0.2).is_err());
        assert!(RingSpec::new(Point::Infinity, 0.1, 0.2).is_err());
        let r = RingSpec::new(p(&[0.0, 0.0]), 0.5, 1.0).unwrap();
        assert_relative_eq!(r.volume(), PI * 0.75, epsilon = 1e-15);
        assert!(r.contains(&p(&[0.7, 0.0])));
        assert!(!r.contains(&p(&[0.2, 0.0])));
    }

    #[test]
    fn invalid_points() {
        assert!(Point::new(vec![1.0]).is_err());
        assert!(Point::new(vec![1.0, f64::NAN]).is_err());
    }
}
