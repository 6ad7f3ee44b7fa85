//! Gauge functions `Φ : [0, ∞] → [0, ∞]`, their generalized inverses and
//! the integral conditions that decide equicontinuity.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::divergence::{
    classify_divergence, partial_integrals, DivergenceError, DivergenceKind, DivergenceVerdict, GrowthPolicy,
    TailFamily, VerdictMethod,
};
use crate::quad::{integrate_dr_over_r, QuadConfig, QuadError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaugeError {
    #[error("{family} gauge: parameter {name} = {value} is out of range")]
    Parameter { family: &'static str, name: &'static str, value: f64 },
    #[error("table gauge: {0}")]
    Table(String),
    #[error("exponent p must be positive and finite, got {0}")]
    Exponent(f64),
    #[error("lower limit {given} must exceed the degenerate threshold {threshold} ({what})")]
    Threshold { what: &'static str, threshold: f64, given: f64 },
    #[error("invalid sample: {0}")]
    Sample(String),
    #[error("verdicts contradict monotonicity in p: p1 = {p1} diverges but p2 = {p2} converges")]
    Inconsistent { p1: f64, p2: f64 },
    #[error(transparent)]
    Divergence(#[from] DivergenceError),
    #[error(transparent)]
    Quad(#[from] QuadError),
}

fn default_one() -> f64 {
    1.0
}

/// Serialized form of a gauge, as written in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum GaugeSpec {
    /// `c t^α`
    Power {
        #[serde(default = "default_one")]
        c: f64,
        #[serde(default = "default_one")]
        alpha: f64,
    },
    /// `exp(β t^q)`
    Exp {
        #[serde(default = "default_one")]
        beta: f64,
        #[serde(default = "default_one")]
        q: f64,
    },
    /// `c t^α (ln(e + t))^b`
    LogPower {
        #[serde(default = "default_one")]
        c: f64,
        #[serde(default = "default_one")]
        alpha: f64,
        #[serde(default = "default_one")]
        b: f64,
    },
    Identity,
    Constant { c: f64 },
    /// Breakpoints `[t, value]`, sorted by `t`. A repeated `t` is a jump.
    Table { points: Vec<[f64; 2]> },
    /// `α Φ + β`
    Affine {
        alpha: f64,
        #[serde(default)]
        beta: f64,
        inner: Box<GaugeSpec>,
    },
}

/// A validated, non-decreasing gauge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GaugeSpec", into = "GaugeSpec")]
pub struct Gauge {
    spec: GaugeSpec,
}

impl TryFrom<GaugeSpec> for Gauge {
    type Error = GaugeError;
    fn try_from(spec: GaugeSpec) -> Result<Self, GaugeError> {
        Gauge::from_spec(spec)
    }
}

impl From<Gauge> for GaugeSpec {
    fn from(g: Gauge) -> Self {
        g.spec
    }
}

/// Growth class of `Φ(t)` as `t → ∞`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "class")]
pub enum Tail {
    Bounded,
    /// `Φ(t) ≍ t^α` up to logarithmic factors
    Polynomial { alpha: f64 },
    /// `ln Φ(t) ~ β t^q`
    StretchedExp { beta: f64, q: f64 },
}

fn param(family: &'static str, name: &'static str, value: f64, ok: bool) -> Result<(), GaugeError> {
    if ok && !value.is_nan() {
        Ok(())
    } else {
        Err(GaugeError::Parameter { family, name, value })
    }
}

/// `ln(e^a + e^b)` without overflow.
fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

impl Gauge {
    pub fn from_spec(spec: GaugeSpec) -> Result<Self, GaugeError> {
        let spec = match spec {
            GaugeSpec::Power { c, alpha } => {
                param("power", "c", c, c > 0.0 && c.is_finite())?;
                param("power", "alpha", alpha, alpha > 0.0 && alpha.is_finite())?;
                GaugeSpec::Power { c, alpha }
            }
            GaugeSpec::Exp { beta, q } => {
                param("exp", "beta", beta, beta > 0.0 && beta.is_finite())?;
                param("exp", "q", q, q > 0.0 && q.is_finite())?;
                GaugeSpec::Exp { beta, q }
            }
            GaugeSpec::LogPower { c, alpha, b } => {
                param("log_power", "c", c, c > 0.0 && c.is_finite())?;
                param("log_power", "alpha", alpha, alpha > 0.0 && alpha.is_finite())?;
                param("log_power", "b", b, b >= 0.0 && b.is_finite())?;
                GaugeSpec::LogPower { c, alpha, b }
            }
            GaugeSpec::Identity => GaugeSpec::Identity,
            GaugeSpec::Constant { c } => {
                param("constant", "c", c, c >= 0.0)?;
                GaugeSpec::Constant { c }
            }
            GaugeSpec::Table { points } => {
                validate_table(&points)?;
                GaugeSpec::Table { points }
            }
            GaugeSpec::Affine { alpha, beta, inner } => {
                param("affine", "alpha", alpha, alpha > 0.0 && alpha.is_finite())?;
                param("affine", "beta", beta, beta >= 0.0 && beta.is_finite())?;
                let inner = Gauge::from_spec(*inner)?;
                match inner.spec {
                    GaugeSpec::Affine { alpha: a1, beta: b1, inner } => {
                        GaugeSpec::Affine { alpha: alpha * a1, beta: alpha * b1 + beta, inner }
                    }
                    other => GaugeSpec::Affine { alpha, beta, inner: Box::new(other) },
                }
            }
        };
        Ok(Gauge { spec })
    }

    pub fn power(c: f64, alpha: f64) -> Result<Self, GaugeError> {
        Gauge::from_spec(GaugeSpec::Power { c, alpha })
    }
    pub fn exp(beta: f64, q: f64) -> Result<Self, GaugeError> {
        Gauge::from_spec(GaugeSpec::Exp { beta, q })
    }
    pub fn log_power(c: f64, alpha: f64, b: f64) -> Result<Self, GaugeError> {
        Gauge::from_spec(GaugeSpec::LogPower { c, alpha, b })
    }
    pub fn identity() -> Self {
        Gauge { spec: GaugeSpec::Identity }
    }
    pub fn constant(c: f64) -> Result<Self, GaugeError> {
        Gauge::from_spec(GaugeSpec::Constant { c })
    }
    pub fn table(points: Vec<[f64; 2]>) -> Result<Self, GaugeError> {
        Gauge::from_spec(GaugeSpec::Table { points })
    }

    /// `α Φ + β`. Nested affine maps are composed into one.
    pub fn affine(&self, alpha: f64, beta: f64) -> Result<Self, GaugeError> {
        Gauge::from_spec(GaugeSpec::Affine { alpha, beta, inner: Box::new(self.spec.clone()) })
    }

    pub fn spec(&self) -> &GaugeSpec {
        &self.spec
    }

    fn inner(spec: &GaugeSpec) -> Gauge {
        Gauge { spec: spec.clone() }
    }

    /// `Φ(t)` for `t ∈ [0, ∞]`.
    pub fn eval(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        match &self.spec {
            GaugeSpec::Power { c, alpha } => c * t.powf(*alpha),
            GaugeSpec::Exp { beta, q } => (beta * t.powf(*q)).exp(),
            GaugeSpec::LogPower { c, alpha, b } => {
                if t == f64::INFINITY {
                    f64::INFINITY
                } else {
                    c * t.powf(*alpha) * (E + t).ln().powf(*b)
                }
            }
            GaugeSpec::Identity => t,
            GaugeSpec::Constant { c } => *c,
            GaugeSpec::Table { points } => table_eval(points, t),
            GaugeSpec::Affine { alpha, beta, inner } => alpha * Gauge::inner(inner).eval(t) + beta,
        }
    }

    /// `ln Φ(t)`, finite wherever `Φ(t)` is positive and finite even when
    /// `Φ(t)` itself overflows.
    pub fn log_eval(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        match &self.spec {
            GaugeSpec::Power { c, alpha } => c.ln() + alpha * t.ln(),
            GaugeSpec::Exp { beta, q } => beta * t.powf(*q),
            GaugeSpec::LogPower { c, alpha, b } => {
                if t == f64::INFINITY {
                    f64::INFINITY
                } else {
                    let l = (E + t).ln().ln();
                    c.ln() + alpha * t.ln() + if *b == 0.0 { 0.0 } else { b * l }
                }
            }
            GaugeSpec::Identity => t.ln(),
            GaugeSpec::Constant { c } => c.ln(),
            GaugeSpec::Table { points } => table_eval(points, t).ln(),
            GaugeSpec::Affine { alpha, beta, inner } => {
                log_add_exp(alpha.ln() + Gauge::inner(inner).log_eval(t), beta.ln())
            }
        }
    }

    /// Right derivative `Φ'(t)` for `t > 0`.
    pub fn derivative(&self, t: f64) -> f64 {
        match &self.spec {
            GaugeSpec::Power { c, alpha } => c * alpha * t.powf(alpha - 1.0),
            GaugeSpec::Exp { beta, q } => self.eval(t) * beta * q * t.powf(q - 1.0),
            GaugeSpec::LogPower { .. } => self.eval(t) * self.log_derivative(t),
            GaugeSpec::Identity => 1.0,
            GaugeSpec::Constant { .. } => 0.0,
            GaugeSpec::Table { points } => table_slope(points, t),
            GaugeSpec::Affine { alpha, inner, .. } => alpha * Gauge::inner(inner).derivative(t),
        }
    }

    /// `(ln Φ)'(t) = Φ'(t)/Φ(t)` for `t > 0`, taken as 0 where `Φ` vanishes.
    pub fn log_derivative(&self, t: f64) -> f64 {
        match &self.spec {
            GaugeSpec::Power { alpha, .. } => alpha / t,
            GaugeSpec::Exp { beta, q } => beta * q * t.powf(q - 1.0),
            GaugeSpec::LogPower { alpha, b, .. } => {
                let s = E + t;
                alpha / t + b / (s * s.ln())
            }
            GaugeSpec::Identity => 1.0 / t,
            GaugeSpec::Constant { .. } => 0.0,
            GaugeSpec::Table { points } => {
                let v = table_eval(points, t);
                if v > 0.0 {
                    table_slope(points, t) / v
                } else {
                    0.0
                }
            }
            GaugeSpec::Affine { alpha, beta, inner } => {
                let g = Gauge::inner(inner);
                let lg = g.log_eval(t);
                if lg.is_finite() {
                    g.log_derivative(t) / (1.0 + beta * (-alpha.ln() - lg).exp())
                } else if *beta > 0.0 {
                    alpha * g.derivative(t) / beta
                } else {
                    0.0
                }
            }
        }
    }

    /// Generalized inverse `Φ⁻¹(τ) = inf{t ≥ 0 : Φ(t) ≥ τ}`, `∞` when the set
    /// is empty.
    pub fn inverse(&self, tau: f64) -> f64 {
        if tau.is_nan() {
            return f64::NAN;
        }
        match &self.spec {
            GaugeSpec::Power { c, alpha } => {
                if tau <= 0.0 {
                    0.0
                } else {
                    (tau / c).powf(1.0 / alpha)
                }
            }
            GaugeSpec::Exp { .. } => {
                if tau <= 1.0 {
                    0.0
                } else {
                    self.inverse_exp(tau.ln())
                }
            }
            GaugeSpec::LogPower { .. } => {
                if tau <= 0.0 {
                    0.0
                } else {
                    self.inverse_exp(tau.ln())
                }
            }
            GaugeSpec::Identity => tau.max(0.0),
            GaugeSpec::Constant { c } => {
                if *c >= tau {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            GaugeSpec::Table { points } => table_inverse(points, tau),
            GaugeSpec::Affine { alpha, beta, inner } => {
                if tau <= *beta {
                    0.0
                } else {
                    Gauge::inner(inner).inverse((tau - beta) / alpha)
                }
            }
        }
    }

    /// `Φ⁻¹(e^η)`, computed without forming `e^η`.
    pub fn inverse_exp(&self, eta: f64) -> f64 {
        if eta.is_nan() {
            return f64::NAN;
        }
        match &self.spec {
            GaugeSpec::Power { c, alpha } => ((eta - c.ln()) / alpha).exp(),
            GaugeSpec::Exp { beta, q } => {
                if eta <= 0.0 {
                    0.0
                } else {
                    (eta / beta).powf(1.0 / q)
                }
            }
            GaugeSpec::LogPower { .. } => self.bisect_inverse_log(eta),
            GaugeSpec::Identity => eta.exp(),
            GaugeSpec::Affine { alpha, beta, inner } => {
                if eta <= beta.ln() {
                    return 0.0;
                }
                // ln((e^η - β)/α)
                let target = eta + (-beta * (-eta).exp()).ln_1p() - alpha.ln();
                Gauge::inner(inner).inverse_exp(target)
            }
            _ => self.inverse(eta.exp()),
        }
    }

    /// `inf{t : ln Φ(t) ≥ η}` by bracketing and bisection. Valid for any
    /// gauge; used directly where no closed form exists.
    pub fn bisect_inverse_log(&self, eta: f64) -> f64 {
        if self.log_eval(0.0) >= eta {
            return 0.0;
        }
        let mut lo = 0.0;
        let mut hi = 1.0;
        while self.log_eval(hi) < eta {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                return f64::INFINITY;
            }
        }
        for _ in 0..1100 {
            let mid = lo + 0.5 * (hi - lo);
            if !(mid > lo && mid < hi) {
                break;
            }
            if self.log_eval(mid) >= eta {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    /// `τ₀ = Φ(0)`.
    pub fn tau0(&self) -> f64 {
        self.eval(0.0)
    }

    /// `t₀ = sup{t : Φ(t) = 0}`, with `t₀ = 0` when `Φ(0) > 0`.
    pub fn t0(&self) -> f64 {
        match &self.spec {
            GaugeSpec::Constant { c } => {
                if *c == 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            GaugeSpec::Table { points } => match points.iter().position(|p| p[1] > 0.0) {
                None => f64::INFINITY,
                Some(0) => 0.0,
                Some(k) => points[k - 1][0],
            },
            GaugeSpec::Affine { beta, inner, .. } => {
                if *beta > 0.0 {
                    0.0
                } else {
                    Gauge::inner(inner).t0()
                }
            }
            _ => 0.0,
        }
    }

    /// Jump discontinuities `(t, Φ(t−), Φ(t))`.
    pub fn jumps(&self) -> Vec<(f64, f64, f64)> {
        match &self.spec {
            GaugeSpec::Table { points } => points
                .windows(2)
                .filter(|w| w[0][0] == w[1][0] && w[1][1] > w[0][1])
                .map(|w| (w[0][0], w[0][1], w[1][1]))
                .collect(),
            GaugeSpec::Affine { alpha, beta, inner } => Gauge::inner(inner)
                .jumps()
                .into_iter()
                .map(|(t, a, b)| (t, alpha * a + beta, alpha * b + beta))
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn tail(&self) -> Tail {
        match &self.spec {
            GaugeSpec::Power { alpha, .. } | GaugeSpec::LogPower { alpha, .. } => Tail::Polynomial { alpha: *alpha },
            GaugeSpec::Identity => Tail::Polynomial { alpha: 1.0 },
            GaugeSpec::Exp { beta, q } => Tail::StretchedExp { beta: *beta, q: *q },
            GaugeSpec::Constant { .. } | GaugeSpec::Table { .. } => Tail::Bounded,
            GaugeSpec::Affine { inner, .. } => Gauge::inner(inner).tail(),
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.tail() == Tail::Bounded
    }

    pub fn powered(&self, p: f64) -> Result<PoweredGauge, GaugeError> {
        PoweredGauge::new(self.clone(), p)
    }
}

fn validate_table(points: &[[f64; 2]]) -> Result<(), GaugeError> {
    if points.is_empty() {
        return Err(GaugeError::Table("no breakpoints".into()));
    }
    for (i, p) in points.iter().enumerate() {
        if !(p[0] >= 0.0 && p[0].is_finite()) {
            return Err(GaugeError::Table(format!("breakpoint {i}: t = {} must be finite and >= 0", p[0])));
        }
        if !(p[1] >= 0.0 && p[1].is_finite()) {
            return Err(GaugeError::Table(format!("breakpoint {i}: value {} must be finite and >= 0", p[1])));
        }
    }
    for (i, w) in points.windows(2).enumerate() {
        if w[1][0] < w[0][0] {
            return Err(GaugeError::Table(format!("breakpoints {i} and {} are not sorted by t", i + 1)));
        }
        if w[1][1] < w[0][1] {
            return Err(GaugeError::Table(format!("values decrease between breakpoints {i} and {}", i + 1)));
        }
    }
    for (i, w) in points.windows(3).enumerate() {
        if w[0][0] == w[1][0] && w[1][0] == w[2][0] {
            return Err(GaugeError::Table(format!("more than two breakpoints share t = {} (index {i})", w[0][0])));
        }
    }
    Ok(())
}

fn table_eval(points: &[[f64; 2]], t: f64) -> f64 {
    let i = points.partition_point(|p| p[0] <= t);
    if i == 0 {
        return points[0][1];
    }
    if i == points.len() {
        return points[i - 1][1];
    }
    let (a, b) = (points[i - 1], points[i]);
    a[1] + (b[1] - a[1]) * (t - a[0]) / (b[0] - a[0])
}

fn table_slope(points: &[[f64; 2]], t: f64) -> f64 {
    let i = points.partition_point(|p| p[0] <= t);
    if i == 0 || i == points.len() {
        return 0.0;
    }
    let (a, b) = (points[i - 1], points[i]);
    (b[1] - a[1]) / (b[0] - a[0])
}

fn table_inverse(points: &[[f64; 2]], tau: f64) -> f64 {
    if points[0][1] >= tau {
        return 0.0;
    }
    // first breakpoint whose value reaches tau
    let k = points.partition_point(|p| p[1] < tau);
    if k == points.len() {
        return f64::INFINITY;
    }
    let (a, b) = (points[k - 1], points[k]);
    if a[0] == b[0] {
        a[0]
    } else {
        a[0] + (tau - a[1]) / (b[1] - a[1]) * (b[0] - a[0])
    }
}

/// `Φ_p(t) = Φ(t^p)` and `H_p = ln Φ_p`.
#[derive(Clone, Debug, PartialEq)]
pub struct PoweredGauge {
    base: Gauge,
    p: f64,
}

impl PoweredGauge {
    pub fn new(base: Gauge, p: f64) -> Result<Self, GaugeError> {
        if !(p > 0.0 && p.is_finite()) {
            return Err(GaugeError::Exponent(p));
        }
        Ok(PoweredGauge { base, p })
    }

    pub fn base(&self) -> &Gauge {
        &self.base
    }
    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.base.eval(t.max(0.0).powf(self.p))
    }

    /// `H_p(t)`; `−∞` where `Φ_p` vanishes.
    pub fn h(&self, t: f64) -> f64 {
        self.base.log_eval(t.max(0.0).powf(self.p))
    }

    /// `H_p'(t)`, set to 0 on the zero set of `Φ_p`.
    pub fn h_derivative(&self, t: f64) -> f64 {
        if t <= self.t0() {
            return 0.0;
        }
        let s = t.powf(self.p);
        self.p * s / t * self.base.log_derivative(s)
    }

    /// `Φ_p⁻¹(τ) = [Φ⁻¹(τ)]^{1/p}`.
    pub fn inverse(&self, tau: f64) -> f64 {
        self.base.inverse(tau).powf(1.0 / self.p)
    }

    /// `H_p⁻¹(η) = Φ_p⁻¹(e^η)`.
    pub fn h_inverse(&self, eta: f64) -> f64 {
        self.base.inverse_exp(eta).powf(1.0 / self.p)
    }

    pub fn t0(&self) -> f64 {
        self.base.t0().powf(1.0 / self.p)
    }
}

/// Result of comparing `Φ⁻¹(Φ(t))` with `t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InverseCheck {
    #[serde(serialize_with = "crate::report::extended")]
    pub lhs: f64,
    #[serde(serialize_with = "crate::report::extended")]
    pub rhs: f64,
    /// `lhs <= rhs`
    pub ok: bool,
    /// `Φ` is strictly increasing at `t`, so equality is expected.
    pub strict: bool,
    pub equal: bool,
}

/// `Φ⁻¹(Φ(t)) ≤ t`, with equality off intervals of constancy.
pub fn inverse_of_eval_bound(g: &Gauge, t: f64) -> InverseCheck {
    // past f64 overflow of Φ, go through ln Φ
    let v = g.eval(t);
    let overflow = v == f64::INFINITY && g.log_eval(t).is_finite();
    let lhs = if overflow { g.inverse_exp(g.log_eval(t)) } else { g.inverse(v) };
    let slack = 1e-12 * t.abs().max(1.0);
    let h = 1e-8 * t.max(1.0);
    let strict = t.is_finite() && if overflow { g.log_eval(t + h) > g.log_eval(t) } else { g.eval(t + h) > v };
    InverseCheck { lhs, rhs: t, ok: lhs <= t + slack, strict, equal: (lhs - t).abs() <= slack || lhs == t }
}

/// Whether `(Φ(t) − Φ(0))/t` is non-decreasing along `sample`, to 1e-12
/// relative.
pub fn slope_is_nondecreasing(g: &Gauge, sample: &[f64]) -> Result<bool, GaugeError> {
    if sample.is_empty() {
        return Err(GaugeError::Sample("empty grid".into()));
    }
    if sample.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(GaugeError::Sample("grid points must be positive and finite".into()));
    }
    if sample.windows(2).any(|w| w[1] <= w[0]) {
        return Err(GaugeError::Sample("grid must be strictly increasing".into()));
    }
    let phi0 = g.eval(0.0);
    if !phi0.is_finite() {
        return Err(GaugeError::Sample(format!("Φ(0) = {phi0} is not finite")));
    }
    let slopes: Vec<f64> = sample.iter().map(|t| (g.eval(*t) - phi0) / t).collect();
    Ok(slopes.windows(2).all(|w| w[1] >= w[0] - 1e-12 * w[0].abs().max(1.0)))
}

/// The integral conditions, each of the form `∫ ... = ∞`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionId {
    /// `∫_δ^∞ H_p'(t) dt/t`
    DerivLog,
    /// `∫_δ^∞ dH_p(t)/t` (Stieltjes; jumps included)
    StieltjesLog,
    /// `∫_δ^∞ H_p(t) dt/t²`
    LogOverT2,
    /// `∫_0^Δ H_p(1/t) dt`
    LogRecip,
    /// `∫_δ^∞ dη / H_p⁻¹(η)`
    InvH,
    /// `∫_δ^∞ dτ / (τ Φ_p⁻¹(τ))`
    InvPhi,
    /// `∫_δ^∞ dτ / (τ [Φ⁻¹(τ)]^{1/p})`
    InvRoot,
    /// `∫_δ^∞ ln Φ(t) dt / t^{n'}` with `n' = (p+1)/p`, i.e. `p = n − 1`
    LogGaugeNPrime,
}

impl ConditionId {
    /// The conditions that are mutually equivalent for convex gauges.
    pub const EQUIVALENT: [ConditionId; 6] = [
        ConditionId::DerivLog,
        ConditionId::StieltjesLog,
        ConditionId::LogOverT2,
        ConditionId::LogRecip,
        ConditionId::InvH,
        ConditionId::InvPhi,
    ];

    pub const ALL: [ConditionId; 8] = [
        ConditionId::DerivLog,
        ConditionId::StieltjesLog,
        ConditionId::LogOverT2,
        ConditionId::LogRecip,
        ConditionId::InvH,
        ConditionId::InvPhi,
        ConditionId::InvRoot,
        ConditionId::LogGaugeNPrime,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ConditionId::DerivLog => "deriv_log",
            ConditionId::StieltjesLog => "stieltjes_log",
            ConditionId::LogOverT2 => "log_over_t2",
            ConditionId::LogRecip => "log_recip",
            ConditionId::InvH => "inv_h",
            ConditionId::InvPhi => "inv_phi",
            ConditionId::InvRoot => "inv_root",
            ConditionId::LogGaugeNPrime => "log_gauge_n_prime",
        }
    }

    pub fn formula(&self) -> &'static str {
        match self {
            ConditionId::DerivLog => "∫_δ^∞ H_p'(t) dt/t",
            ConditionId::StieltjesLog => "∫_δ^∞ dH_p(t)/t",
            ConditionId::LogOverT2 => "∫_δ^∞ H_p(t) dt/t²",
            ConditionId::LogRecip => "∫_0^Δ H_p(1/t) dt",
            ConditionId::InvH => "∫_δ^∞ dη/H_p⁻¹(η)",
            ConditionId::InvPhi => "∫_δ^∞ dτ/(τ Φ_p⁻¹(τ))",
            ConditionId::InvRoot => "∫_δ^∞ dτ/(τ [Φ⁻¹(τ)]^{1/p})",
            ConditionId::LogGaugeNPrime => "∫_δ^∞ ln Φ(t) dt/t^{n'}",
        }
    }
}

/// The closed-form tail of the integrand of `cond` for a gauge with the
/// given growth class.
pub fn condition_tail(tail: Tail, p: f64, cond: ConditionId) -> TailFamily {
    let n_prime = (p + 1.0) / p;
    match (tail, cond) {
        (Tail::Bounded, ConditionId::DerivLog | ConditionId::StieltjesLog) => TailFamily::Zero,
        (Tail::Bounded, ConditionId::LogOverT2 | ConditionId::LogRecip) => TailFamily::Power { a: 2.0 },
        (Tail::Bounded, ConditionId::LogGaugeNPrime) => TailFamily::Power { a: n_prime },
        (Tail::Bounded, ConditionId::InvH | ConditionId::InvPhi | ConditionId::InvRoot) => TailFamily::Zero,

        (Tail::Polynomial { .. }, ConditionId::DerivLog | ConditionId::StieltjesLog) => TailFamily::Power { a: 2.0 },
        (Tail::Polynomial { .. }, ConditionId::LogOverT2 | ConditionId::LogRecip) => {
            TailFamily::LogPower { a: 2.0, b: -1.0 }
        }
        (Tail::Polynomial { .. }, ConditionId::LogGaugeNPrime) => TailFamily::LogPower { a: n_prime, b: -1.0 },
        (Tail::Polynomial { alpha }, ConditionId::InvH) => TailFamily::Exponential { rate: 1.0 / (alpha * p) },
        (Tail::Polynomial { alpha }, ConditionId::InvPhi | ConditionId::InvRoot) => {
            TailFamily::Power { a: 1.0 + 1.0 / (alpha * p) }
        }

        (Tail::StretchedExp { q, .. }, ConditionId::DerivLog | ConditionId::StieltjesLog) => {
            TailFamily::Power { a: 2.0 - p * q }
        }
        (Tail::StretchedExp { q, .. }, ConditionId::LogOverT2 | ConditionId::LogRecip) => {
            TailFamily::Power { a: 2.0 - p * q }
        }
        (Tail::StretchedExp { q, .. }, ConditionId::LogGaugeNPrime) => TailFamily::Power { a: n_prime - q },
        (Tail::StretchedExp { q, .. }, ConditionId::InvH) => TailFamily::Power { a: 1.0 / (p * q) },
        (Tail::StretchedExp { q, .. }, ConditionId::InvPhi | ConditionId::InvRoot) => {
            TailFamily::LogPower { a: 1.0, b: 1.0 / (p * q) }
        }
    }
}

/// Numerical settings for [`classify_condition_with`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClassifyOptions {
    pub policy: GrowthPolicy,
    pub quad: QuadConfig,
    /// Use the closed-form tail of the gauge family for the verdict.
    pub closed_form: bool,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions { policy: GrowthPolicy::default(), quad: QuadConfig::default(), closed_form: true }
    }
}

/// Verdict for `cond` on `Φ_p`. `delta` is the lower limit (for the
/// reciprocal form, the upper limit `Δ`).
pub fn classify_condition(g: &Gauge, p: f64, cond: ConditionId, delta: f64) -> Result<DivergenceVerdict, GaugeError> {
    classify_condition_with(g, p, cond, delta, &ClassifyOptions::default())
}

pub fn classify_condition_with(
    g: &Gauge,
    p: f64,
    cond: ConditionId,
    delta: f64,
    opts: &ClassifyOptions,
) -> Result<DivergenceVerdict, GaugeError> {
    let gp = g.powered(p)?;
    let t0 = gp.t0();
    let above = |what: &'static str, threshold: f64| -> Result<(), GaugeError> {
        if delta > threshold && delta.is_finite() {
            Ok(())
        } else {
            Err(GaugeError::Threshold { what, threshold, given: delta })
        }
    };
    let n_prime = (p + 1.0) / p;
    let lower;
    let integrand: Box<dyn Fn(f64) -> f64 + '_>;
    match cond {
        ConditionId::DerivLog | ConditionId::StieltjesLog => {
            above("t₀ = sup{Φ_p = 0}", t0.max(0.0))?;
            lower = delta;
            integrand = Box::new(move |t: f64| gp.h_derivative(t) / t);
        }
        ConditionId::LogOverT2 => {
            above("t₀ = sup{Φ_p = 0}", t0.max(0.0))?;
            lower = delta;
            integrand = Box::new(move |t: f64| gp.h(t) / (t * t));
        }
        ConditionId::LogRecip => {
            // Δ < 1/t₀; after t ↦ 1/t the integral runs over [1/Δ, ∞)
            if !(delta > 0.0 && delta * t0 < 1.0 && delta.is_finite()) {
                return Err(GaugeError::Threshold { what: "Δ must lie in (0, 1/t₀)", threshold: 1.0 / t0, given: delta });
            }
            lower = 1.0 / delta;
            integrand = Box::new(move |u: f64| gp.h(u) / (u * u));
        }
        ConditionId::LogGaugeNPrime => {
            above("t₀ = sup{Φ = 0}", g.t0())?;
            lower = delta;
            integrand = Box::new(move |t: f64| g.log_eval(t) / t.powf(n_prime));
        }
        ConditionId::InvH => {
            above("H_p(+0)", gp.h(0.0))?;
            lower = delta;
            integrand = Box::new(move |eta: f64| 1.0 / gp.h_inverse(eta));
        }
        ConditionId::InvPhi => {
            above("Φ_p(+0)", gp.eval(0.0))?;
            lower = delta;
            integrand = Box::new(move |tau: f64| 1.0 / (tau * gp.inverse(tau)));
        }
        ConditionId::InvRoot => {
            above("τ₀ = Φ(0)", g.tau0())?;
            lower = delta;
            integrand = Box::new(move |tau: f64| 1.0 / (tau * g.inverse(tau).powf(1.0 / p)));
        }
    }

    // the Stieltjes form adds the jumps of H_p at or beyond the lower limit
    let jump_sum = |upper: f64| -> f64 {
        if cond != ConditionId::StieltjesLog {
            return 0.0;
        }
        g.jumps()
            .iter()
            .map(|(t, a, b)| (t.powf(1.0 / p), a, b))
            .filter(|(s, _, _)| *s >= lower && *s <= upper)
            .map(|(s, a, b)| (b.ln() - a.ln()) / s)
            .sum()
    };

    let tag = opts.closed_form.then(|| condition_tail(g.tail(), p, cond));
    let mut verdict = classify_signed(&*integrand, lower, tag, opts)?;
    if cond == ConditionId::StieltjesLog {
        for (upper, v) in verdict.evidence.iter_mut() {
            *v += jump_sum(*upper);
        }
    }
    Ok(verdict)
}

/// Classification of integrands that may be negative (or below 1 in the
/// lower limit) on an initial stretch. The stretch `[lower, L]` up to the
/// first decade boundary past which the integrand is non-negative is
/// integrated separately and added to every partial integral.
fn classify_signed(
    f: &dyn Fn(f64) -> f64,
    lower: f64,
    tag: Option<TailFamily>,
    opts: &ClassifyOptions,
) -> Result<DivergenceVerdict, GaugeError> {
    let policy = &opts.policy;
    let cfg = &opts.quad;
    // find where the integrand settles to non-negative values
    let probe = |a: f64, b: f64| -> bool {
        (0..=64).all(|i| {
            let t = a * (b / a).powf(i as f64 / 64.0);
            !(f(t) < 0.0)
        })
    };
    let mut start = lower.max(1.0);
    let mut k = start.log10().ceil().max(0.0) as i32;
    let mut settled = false;
    for _ in 0..40 {
        let next = 10f64.powi(k + 1);
        if probe(start, next) {
            settled = true;
            break;
        }
        k += 1;
        start = 10f64.powi(k);
    }
    if !settled {
        // non-positive throughout the sampled range: report |f| as evidence
        let g = |t: f64| f(t).abs();
        let mut v = classify_divergence(g, lower.max(f64::MIN_POSITIVE), tag, policy, cfg)?;
        if tag.is_none() && v.kind == DivergenceKind::Diverges {
            v.kind = DivergenceKind::Inconclusive;
        }
        return Ok(v);
    }
    let head = if start > lower {
        match integrate_dr_over_r(|t| t * f(t), lower, start, cfg) {
            Ok(q) => q.value,
            Err(QuadError::NonFinite { value, .. }) if value == f64::INFINITY => f64::INFINITY,
            Err(e) => return Err(e.into()),
        }
    } else {
        0.0
    };
    let mut evidence = partial_integrals(f, start, policy, cfg)?;
    for (_, v) in evidence.iter_mut() {
        *v += head;
    }
    if start > lower {
        evidence.insert(0, (start, head));
    }
    let kind = match tag {
        Some(t) => t.verdict(),
        None if head == f64::INFINITY => DivergenceKind::Diverges,
        None => {
            let decades: Vec<(f64, f64)> = evidence.iter().map(|(t, v)| (t.log10(), *v)).collect();
            policy.judge(&decades)
        }
    };
    let method = if tag.is_some() { VerdictMethod::ClosedForm } else { VerdictMethod::Numeric };
    Ok(DivergenceVerdict { kind, method, evidence })
}

/// Verdicts for `p1 < p2`; the conditions weaken as `p` grows, so a
/// divergent `p1` with a convergent `p2` is reported as an error.
pub fn weakest_p_note(
    g: &Gauge,
    p1: f64,
    p2: f64,
    cond: ConditionId,
    delta: f64,
) -> Result<(DivergenceVerdict, DivergenceVerdict), GaugeError> {
    if !(p1 < p2) {
        return Err(GaugeError::Sample(format!("expected p1 < p2, got {p1} and {p2}")));
    }
    let v1 = classify_condition(g, p1, cond, delta)?;
    let v2 = classify_condition(g, p2, cond, delta)?;
    if v1.diverges() && v2.converges() {
        return Err(GaugeError::Inconsistent { p1, p2 });
    }
    Ok((v1, v2))
}

/// A lower limit above every degenerate threshold of `cond`.
pub fn default_lower(g: &Gauge, p: f64, cond: ConditionId) -> f64 {
    let safe = |x: f64| if x.is_finite() { x.max(0.0) + 1.0 } else { f64::NAN };
    match cond {
        ConditionId::DerivLog | ConditionId::StieltjesLog | ConditionId::LogOverT2 => {
            safe(g.t0().powf(1.0 / p)).max(E)
        }
        ConditionId::LogGaugeNPrime => safe(g.t0()).max(E),
        ConditionId::LogRecip => {
            let t0 = g.t0().powf(1.0 / p);
            if t0 > 0.0 {
                0.5 / t0
            } else {
                1.0
            }
        }
        ConditionId::InvH => safe(g.log_eval(0.0)).max(1.0),
        ConditionId::InvPhi | ConditionId::InvRoot => safe(g.tau0()).max(E),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn evaluation_examples() {
        assert_eq!(Gauge::identity().eval(3.0), 3.0);
        assert_eq!(Gauge::exp(1.0, 1.0).unwrap().eval(0.0), 1.0);
        let t = Gauge::table(vec![[0.0, 1.0], [2.0, 1.0], [2.0, 5.0]]).unwrap();
        assert_eq!(t.eval(1.0), 1.0);
        assert_eq!(t.eval(2.0), 5.0);
        assert_eq!(t.eval(1e9), 5.0);
        assert_eq!(t.jumps(), vec![(2.0, 1.0, 5.0)]);
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(Gauge::identity().inverse(5.0), 5.0);
        let e = Gauge::exp(1.0, 1.0).unwrap();
        assert_relative_eq!(e.inverse(E * E), 2.0, max_relative = 1e-15);
        assert_eq!(e.inverse(0.5), 0.0);
        assert_eq!(Gauge::constant(3.0).unwrap().inverse(4.0), f64::INFINITY);
        let a = Gauge::identity().affine(1.0, 1.0).unwrap();
        assert_eq!(a.inverse(1.0), 0.0);
        let t = Gauge::table(vec![[0.0, 1.0], [2.0, 1.0], [2.0, 5.0]]).unwrap();
        assert_eq!(t.inverse(1.0), 0.0);
        assert_eq!(t.inverse(3.0), 2.0);
        assert_eq!(t.inverse(5.5), f64::INFINITY);
    }

    #[test]
    fn log_space_matches_direct_evaluation() {
        let gs = [
            Gauge::power(2.0, 1.5).unwrap(),
            Gauge::exp(0.5, 2.0).unwrap(),
            Gauge::log_power(1.0, 2.0, 1.0).unwrap(),
            Gauge::exp(1.0, 1.0).unwrap().affine(2.0, 3.0).unwrap(),
        ];
        for g in &gs {
            for t in [0.1, 1.0, 3.7, 20.0] {
                assert_relative_eq!(g.log_eval(t), g.eval(t).ln(), max_relative = 1e-12);
                let tau = g.eval(t);
                assert_relative_eq!(g.inverse_exp(tau.ln()), t, max_relative = 1e-9);
                // log-derivative against a central difference
                let h = 1e-6 * t;
                let fd = (g.log_eval(t + h) - g.log_eval(t - h)) / (2.0 * h);
                assert_relative_eq!(g.log_derivative(t), fd, max_relative = 1e-6);
            }
        }
        // far beyond f64 range in the direct form
        let g = Gauge::exp(1.0, 1.0).unwrap().affine(2.0, 1.0).unwrap();
        assert_relative_eq!(g.log_eval(1000.0), 1000.0 + 2f64.ln(), max_relative = 1e-14);
        assert_relative_eq!(g.inverse_exp(1000.0 + 2f64.ln()), 1000.0, max_relative = 1e-12);
    }

    #[test]
    fn affine_composes() {
        let g = Gauge::identity().affine(2.0, 1.0).unwrap();
        assert_eq!(g.eval(3.0), 7.0);
        let h = Gauge::power(1.0, 2.0).unwrap().affine(2.0, 0.0).unwrap().affine(3.0, 1.0).unwrap();
        assert_eq!(h.eval(2.0), 6.0 * 4.0 + 1.0);
        assert!(matches!(h.spec(), GaugeSpec::Affine { inner, .. } if matches!(**inner, GaugeSpec::Power { .. })));
        assert!(Gauge::identity().affine(0.0, 1.0).is_err());
        assert!(Gauge::identity().affine(1.0, -1.0).is_err());
    }

    #[test]
    fn inverse_bound_examples() {
        let c = inverse_of_eval_bound(&Gauge::identity(), 7.0);
        assert!(c.ok && c.equal && c.strict);
        let c = inverse_of_eval_bound(&Gauge::constant(3.0).unwrap(), 2.0);
        assert_eq!((c.lhs, c.rhs, c.ok, c.strict), (0.0, 2.0, true, false));
        let c = inverse_of_eval_bound(&Gauge::exp(1.0, 1.0).unwrap(), 1.0);
        assert!(c.ok && c.equal);
        assert_relative_eq!(c.lhs, 1.0, max_relative = 1e-15);
    }

    #[test]
    fn slope_examples() {
        let grid: Vec<f64> = (1..=50).map(|i| i as f64 * 0.1).collect();
        assert!(slope_is_nondecreasing(&Gauge::power(1.0, 2.0).unwrap(), &grid).unwrap());
        assert!(slope_is_nondecreasing(&Gauge::identity(), &grid).unwrap());
        let concave = Gauge::table(vec![[0.0, 0.0], [1.0, 1.0], [2.0, 1.2]]).unwrap();
        assert!(!slope_is_nondecreasing(&concave, &[1.0, 2.0]).unwrap());
        assert!(slope_is_nondecreasing(&Gauge::identity(), &[1.0, 1.0]).is_err());
    }

    #[test]
    fn table_validation() {
        assert!(Gauge::table(vec![]).is_err());
        assert!(Gauge::table(vec![[1.0, 2.0], [0.0, 3.0]]).is_err());
        assert!(Gauge::table(vec![[0.0, 2.0], [1.0, 1.0]]).is_err());
        assert!(Gauge::table(vec![[1.0, 1.0], [1.0, 2.0], [1.0, 3.0]]).is_err());
        let g = Gauge::table(vec![[0.0, 0.0], [1.0, 0.0], [3.0, 2.0]]).unwrap();
        assert_eq!(g.t0(), 1.0);
        assert_eq!(g.inverse(1.0), 2.0);
    }

    #[test]
    fn spec_round_trip() {
        let g: Gauge = serde_json::from_str(r#"{"family":"exp","beta":1,"q":1}"#).unwrap();
        assert_eq!(g, Gauge::exp(1.0, 1.0).unwrap());
        let g: Gauge =
            serde_json::from_str(r#"{"family":"affine","alpha":2,"beta":1,"inner":{"family":"identity"}}"#).unwrap();
        assert_eq!(g.eval(1.0), 3.0);
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(serde_json::from_str::<Gauge>(&s).unwrap(), g);
        assert!(serde_json::from_str::<Gauge>(r#"{"family":"power","c":-1,"alpha":2}"#).is_err());
        assert!(serde_json::from_str::<Gauge>(r#"{"family":"nope"}"#).is_err());
    }

    #[test]
    fn condition_examples() {
        let e = Gauge::exp(1.0, 1.0).unwrap();
        assert!(classify_condition(&e, 1.0, ConditionId::InvPhi, E).unwrap().diverges());
        let p2 = Gauge::power(1.0, 2.0).unwrap();
        assert!(classify_condition(&p2, 1.0, ConditionId::InvRoot, 2.0).unwrap().converges());
        assert!(classify_condition(&e, 1.0, ConditionId::InvRoot, E).unwrap().diverges());
        // 1/(τ ln τ): partial integrals are ln ln τ
        let v = classify_condition(&e, 1.0, ConditionId::InvPhi, E).unwrap();
        let (t, val) = *v.evidence.last().unwrap();
        assert_relative_eq!(val, t.ln().ln(), max_relative = 1e-8);
    }

    #[test]
    fn thresholds_are_enforced() {
        let e = Gauge::exp(1.0, 1.0).unwrap();
        assert!(matches!(
            classify_condition(&e, 1.0, ConditionId::InvRoot, 1.0),
            Err(GaugeError::Threshold { .. })
        ));
        let z = Gauge::table(vec![[0.0, 0.0], [2.0, 0.0], [3.0, 1.0]]).unwrap();
        assert!(classify_condition(&z, 1.0, ConditionId::LogOverT2, 1.5).is_err());
        assert!(classify_condition(&z, 1.0, ConditionId::LogRecip, 0.6).is_err());
        assert!(classify_condition(&z, 1.0, ConditionId::LogRecip, 0.4).is_ok());
    }

    #[test]
    fn weakening_in_p() {
        let e = Gauge::exp(1.0, 1.0).unwrap();
        let (a, b) = weakest_p_note(&e, 1.0, 2.0, ConditionId::LogOverT2, 2.0).unwrap();
        assert!(a.diverges() && b.diverges());
        let (a, b) = weakest_p_note(&Gauge::identity(), 1.0, 2.0, ConditionId::LogOverT2, 2.0).unwrap();
        assert!(a.converges() && b.converges());
        let (a, b) = weakest_p_note(&Gauge::constant(2.0).unwrap(), 1.0, 2.0, ConditionId::LogOverT2, 2.0).unwrap();
        assert!(a.converges() && b.converges());
        let sq = Gauge::exp(1.0, 0.5).unwrap();
        let (a, b) = weakest_p_note(&sq, 1.0, 2.0, ConditionId::InvPhi, 3.0).unwrap();
        assert!(a.converges() && b.diverges());
    }
}
