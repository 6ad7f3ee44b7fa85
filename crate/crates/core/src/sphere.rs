//! Area-measure means over spheres `{x : |x - c| = r}`.
//!
//! Circles use the periodic trapezoid rule, refined by doubling. In three
//! dimensions the sphere is parametrised by `(z, φ)` with `z = cos θ`, in
//! which the area element is `dz dφ`; `z` gets Gauss–Legendre and `φ` the
//! trapezoid rule. Higher dimensions are only served exactly for fields that
//! know their own spherical means (see the `field` module).

use std::f64::consts::PI;

use thiserror::Error;

use crate::quad::gauss_legendre;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SphereError {
    #[error("sphere radius must be positive, got {0}")]
    Radius(f64),
    #[error("center has dimension {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("general sphere cubature is only available for n = 2, 3 (got n = {0})")]
    Unsupported(usize),
    #[error("field is not finite at a sphere node (value {0})")]
    NonFinite(f64),
    #[error("sphere mean did not converge: estimate {estimate}, last change {change}")]
    NoConvergence { estimate: f64, change: f64 },
}

const MAX_CIRCLE_NODES: usize = 1 << 18;
const MAX_POLAR_NODES: usize = 256;

/// Mean of `g` over the sphere of radius `r` about `center` in `R^dim`.
pub fn sphere_mean<G>(g: G, center: &[f64], r: f64, dim: usize, tol: f64) -> Result<f64, SphereError>
where
    G: Fn(&[f64]) -> f64,
{
    if !(r > 0.0 && r.is_finite()) {
        return Err(SphereError::Radius(r));
    }
    if center.len() != dim {
        return Err(SphereError::Dimension { expected: dim, got: center.len() });
    }
    match dim {
        2 => circle_mean(&g, center, r, tol),
        3 => sphere3_mean(&g, center, r, tol),
        n => Err(SphereError::Unsupported(n)),
    }
}

fn eval<G: Fn(&[f64]) -> f64>(g: &G, x: &[f64]) -> Result<f64, SphereError> {
    let v = g(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(SphereError::NonFinite(v))
    }
}

fn circle_mean<G: Fn(&[f64]) -> f64>(g: &G, c: &[f64], r: f64, tol: f64) -> Result<f64, SphereError> {
    let at = |phi: f64| [c[0] + r * phi.cos(), c[1] + r * phi.sin()];
    let mut n = 16usize;
    let mut sum = 0.0;
    for k in 0..n {
        sum += eval(g, &at(2.0 * PI * k as f64 / n as f64))?;
    }
    let mut mean = sum / n as f64;
    loop {
        // midpoints of the current grid
        let mut mid = 0.0;
        for k in 0..n {
            mid += eval(g, &at(2.0 * PI * (k as f64 + 0.5) / n as f64))?;
        }
        sum += mid;
        n *= 2;
        let next = sum / n as f64;
        let change = (next - mean).abs();
        mean = next;
        if change <= tol * mean.abs().max(1.0) {
            return Ok(mean);
        }
        if n >= MAX_CIRCLE_NODES {
            return Err(SphereError::NoConvergence { estimate: mean, change });
        }
    }
}

fn sphere3_rule<G: Fn(&[f64]) -> f64>(g: &G, c: &[f64], r: f64, m: usize) -> Result<f64, SphereError> {
    let (z, w) = gauss_legendre(m);
    let nphi = 2 * m;
    let mut total = 0.0;
    for (zi, wi) in z.iter().zip(&w) {
        let s = (1.0 - zi * zi).max(0.0).sqrt();
        let mut ring = 0.0;
        for k in 0..nphi {
            let phi = 2.0 * PI * (k as f64 + 0.5) / nphi as f64;
            let x = [c[0] + r * s * phi.cos(), c[1] + r * s * phi.sin(), c[2] + r * zi];
            ring += eval(g, &x)?;
        }
        total += wi * ring / nphi as f64;
    }
    // ∫ dz over [-1, 1] is 2
    Ok(total / 2.0)
}

fn sphere3_mean<G: Fn(&[f64]) -> f64>(g: &G, c: &[f64], r: f64, tol: f64) -> Result<f64, SphereError> {
    let mut m = 8usize;
    let mut mean = sphere3_rule(g, c, r, m)?;
    loop {
        m *= 2;
        let next = sphere3_rule(g, c, r, m)?;
        let change = (next - mean).abs();
        mean = next;
        if change <= tol * mean.abs().max(1.0) {
            return Ok(mean);
        }
        if m >= MAX_POLAR_NODES {
            return Err(SphereError::NoConvergence { estimate: mean, change });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constants_and_symmetry() {
        for dim in [2usize, 3] {
            let c = vec![0.3; dim];
            assert_relative_eq!(sphere_mean(|_| 2.5, &c, 0.7, dim, 1e-12).unwrap(), 2.5, epsilon = 1e-10);
        }
        for r in [0.1, 1.0, 3.0] {
            let m = sphere_mean(|x| 1.0 + x[0], &[0.0, 0.0], r, 2, 1e-12).unwrap();
            assert_relative_eq!(m, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn second_moment_against_trapezoid_oracle() {
        // brute-force trapezoid with 10_000 nodes over the unit circle
        let n = 10_000;
        let oracle: f64 = (0..n).map(|k| (2.0 * PI * k as f64 / n as f64).cos().powi(2)).sum::<f64>() / n as f64;
        let m = sphere_mean(|x| x[0] * x[0], &[0.0, 0.0], 1.0, 2, 1e-12).unwrap();
        assert_relative_eq!(m, oracle, epsilon = 1e-12);
        assert_relative_eq!(m, 0.5, epsilon = 1e-12);
        // on the 2-sphere the mean of z^2 is 1/3
        let m3 = sphere_mean(|x| x[2] * x[2], &[0.0, 0.0, 0.0], 1.0, 3, 1e-12).unwrap();
        assert_relative_eq!(m3, 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn mean_value_property_for_harmonic_functions() {
        // x^2 - y^2 + 3xy is harmonic in the plane; 1/|x - a| is harmonic off a in R^3
        let m = sphere_mean(|x| x[0] * x[0] - x[1] * x[1] + 3.0 * x[0] * x[1], &[0.4, -0.2], 0.9, 2, 1e-12).unwrap();
        assert_relative_eq!(m, 0.16 - 0.04 - 0.24, epsilon = 1e-12);
        let a = [3.0, 0.0, 0.0];
        let g = |x: &[f64]| 1.0 / ((x[0] - a[0]).powi(2) + x[1] * x[1] + x[2] * x[2]).sqrt();
        let m3 = sphere_mean(g, &[0.0, 0.0, 0.0], 1.0, 3, 1e-12).unwrap();
        assert_relative_eq!(m3, 1.0 / 3.0, epsilon = 1e-11);
    }

    #[test]
    fn errors() {
        assert_eq!(sphere_mean(|_| 1.0, &[0.0, 0.0], 0.0, 2, 1e-9), Err(SphereError::Radius(0.0)));
        assert_eq!(sphere_mean(|_| 1.0, &[0.0; 4], 1.0, 4, 1e-9), Err(SphereError::Unsupported(4)));
        assert!(matches!(sphere_mean(|_| f64::NAN, &[0.0, 0.0], 1.0, 2, 1e-9), Err(SphereError::NonFinite(_))));
    }
}
