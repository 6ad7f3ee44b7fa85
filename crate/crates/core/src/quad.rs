//! Adaptive 1-D quadrature.
//!
//! Globally adaptive Gauss–Kronrod (7/15) with a max-heap on the local error
//! estimate. Integrals of the shape `∫ g(r) dr/r` are routed through the
//! logarithmic variable `u = ln r`, which turns the `1/r` weight into a unit
//! weight and moves the singular endpoint `r = 0` to `u = -∞`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("invalid interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },
    #[error("integrand is not finite at {at} (value {value})")]
    NonFinite { at: f64, value: f64 },
    #[error("no convergence after {intervals} subintervals: estimate {estimate} ± {error}")]
    NoConvergence { estimate: f64, error: f64, intervals: usize },
}

impl QuadError {
    /// Best available estimate carried by the error, if any.
    pub fn partial(&self) -> Option<f64> {
        match self {
            QuadError::NoConvergence { estimate, .. } => Some(*estimate),
            _ => None,
        }
    }
}

/// Tolerances and refinement cap for [`integrate`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuadConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig { rel_tol: 1e-9, abs_tol: 1e-14, max_subdivisions: 2000 }
    }
}

impl QuadConfig {
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }
}

/// Result of an adaptive integration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd-indexed Kronrod nodes (and the centre).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn checked<F: Fn(f64) -> f64>(f: &F, x: f64) -> Result<f64, QuadError> {
    let v = f(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(QuadError::NonFinite { at: x, value: v })
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Segment, QuadError> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = checked(f, c)?;
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = checked(f, c - dx)?;
        let f2 = checked(f, c + dx)?;
        kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    Ok(Segment { a, b, value: kronrod * h, error: ((kronrod - gauss) * h).abs() })
}

/// Adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
///
/// Endpoints are never evaluated, so integrable endpoint singularities are
/// admissible; they converge slowly unless the caller moves to a better
/// variable first (see [`integrate_dr_over_r`]).
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<Quadrature, QuadError> {
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(QuadError::InvalidInterval { a, b });
    }
    if a == b {
        return Ok(Quadrature { value: 0.0, error: 0.0, intervals: 0 });
    }
    let first = gk15(&f, a, b)?;
    let mut total = first.value;
    let mut err = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    let max = cfg.max_subdivisions.max(1);
    while err > cfg.abs_tol.max(cfg.rel_tol * total.abs()) {
        if heap.len() >= max {
            return Err(QuadError::NoConvergence { estimate: total, error: err, intervals: heap.len() });
        }
        let worst = heap.pop().expect("heap is non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // interval exhausted at machine precision
            return Err(QuadError::NoConvergence { estimate: total, error: err, intervals: heap.len() + 1 });
        }
        let left = gk15(&f, worst.a, mid)?;
        let right = gk15(&f, mid, worst.b)?;
        total += left.value + right.value - worst.value;
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        // re-sum occasionally to shed accumulated cancellation
        if heap.len() % 64 == 0 {
            total = heap.iter().map(|s| s.value).sum();
            err = heap.iter().map(|s| s.error).sum();
        }
    }
    let intervals = heap.len();
    let value = heap.iter().map(|s| s.value).sum();
    Ok(Quadrature { value, error: err, intervals })
}

/// `∫_a^b f` with relative tolerance `tol` and the default refinement cap.
pub fn integrate_1d<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64, QuadError> {
    if a >= b {
        return Err(QuadError::InvalidInterval { a, b });
    }
    integrate(f, a, b, &QuadConfig::default().with_rel_tol(tol)).map(|q| q.value)
}

/// `∫_a^b g(r) dr / r` for `0 < a < b`, computed as `∫_{ln a}^{ln b} g(e^u) du`.
pub fn integrate_dr_over_r<G: Fn(f64) -> f64>(g: G, a: f64, b: f64, cfg: &QuadConfig) -> Result<Quadrature, QuadError> {
    if !(a > 0.0) || a > b {
        return Err(QuadError::InvalidInterval { a, b });
    }
    integrate(|u: f64| g(u.exp()), a.ln(), b.ln(), cfg)
}

/// Nodes and weights of the `m`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let half = m.div_ceil(2);
    for i in 0..half {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            // p1 = P_m, p0 = P_{m-1}
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    (nodes, weights)
}
