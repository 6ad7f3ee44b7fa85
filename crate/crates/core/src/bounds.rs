//! Ring-mean inequalities and explicit moduli of continuity.

use std::cell::Cell;
use std::f64::consts::E;

use serde::Serialize;
use thiserror::Error;

use crate::divergence::{DivergenceKind, DivergenceVerdict, GrowthPolicy, VerdictMethod};
use crate::field::{
    class_membership_integral, ring_mean, truncate_unit_floor, DistortionField, FieldError, MeanProfile, Region,
};
use crate::gauge::{classify_condition_with, ClassifyOptions, ConditionId, Gauge, GaugeError};
use crate::geometry::{invert, DimensionConstants, GeometryError, Point};
use crate::quad::{integrate, integrate_dr_over_r, QuadConfig, QuadError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("invalid parameter: {0}")]
    Params(String),
    #[error("|x - x0| = {distance} must be below {limit}")]
    OutsideBall { distance: f64, limit: f64 },
    #[error("Φ(0) = 0: lift the gauge to Φ + δ₀ and adjust the mass bound (see `gauge_lift`)")]
    GaugeLift,
    #[error("ring mean M(ε) is not finite")]
    MassInfinite,
    #[error("hypothesis fails: {0}")]
    Hypothesis(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Gauge(#[from] GaugeError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Tolerances used by the inequality checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    pub quad: QuadConfig,
    /// slack allowed in `lhs ≥ rhs`
    pub verdict: f64,
    /// relative tolerance for sphere means
    pub sphere: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { quad: QuadConfig::default(), verdict: 1e-7, sphere: 1e-10 }
    }
}

/// `∫_a^b dr / (r q(r)^e)`, integrated in `ln r`. Returns `∞` when `q`
/// vanishes on part of the range.
pub fn log_integral(profile: &MeanProfile, exponent: f64, a: f64, b: f64, cfg: &QuadConfig) -> Result<f64, BoundsError> {
    if !(a > 0.0 && b >= a) {
        return Err(BoundsError::Params(format!("integration range [{a}, {b}] is invalid")));
    }
    if a == b {
        return Ok(0.0);
    }
    let failure = Cell::new(None::<FieldError>);
    let g = |r: f64| match profile.value_at(r) {
        Ok(q) => {
            if q == f64::INFINITY {
                0.0
            } else {
                q.powf(-exponent)
            }
        }
        Err(e) => {
            let first = failure.take().unwrap_or(e);
            failure.set(Some(first));
            f64::NAN
        }
    };
    let res = integrate_dr_over_r(g, a, b, cfg);
    if let Some(e) = failure.take() {
        return Err(e.into());
    }
    match res {
        Ok(q) => Ok(q.value),
        Err(QuadError::NonFinite { value, .. }) if value == f64::INFINITY => Ok(f64::INFINITY),
        Err(e) => Err(e.into()),
    }
}

/// `∫_ε^1 dr / (r q(r)^{1/p})`.
pub fn lemma31_lhs(profile: &MeanProfile, p: f64, eps: f64, cfg: &QuadConfig) -> Result<f64, BoundsError> {
    check_eps(eps)?;
    check_p(p)?;
    log_integral(profile, 1.0 / p, eps, 1.0, cfg)
}

/// `(1/n) ∫_{eM}^{M/ε^n} dτ / (τ [Φ⁻¹(τ)]^{1/p})`; zero when the range is
/// empty.
pub fn lemma31_rhs(phi: &Gauge, m: f64, eps: f64, p: f64, n: usize, cfg: &QuadConfig) -> Result<f64, BoundsError> {
    check_eps(eps)?;
    check_p(p)?;
    if !(m > 0.0 && m.is_finite()) {
        return Err(BoundsError::Params(format!("ring mean M = {m} must be positive and finite")));
    }
    let lo = 1.0 + m.ln();
    let hi = m.ln() - n as f64 * eps.ln();
    Ok(inverse_log_integral(phi, lo, hi, 1.0 / p, cfg)? / n as f64)
}

/// `∫_{e^lo}^{e^hi} dτ/(τ [Φ⁻¹(τ)]^e) = ∫_lo^hi dη / [Φ⁻¹(e^η)]^e`.
fn inverse_log_integral(phi: &Gauge, lo: f64, hi: f64, exponent: f64, cfg: &QuadConfig) -> Result<f64, BoundsError> {
    if !(hi > lo) {
        return Ok(0.0);
    }
    let f = |eta: f64| phi.inverse_exp(eta).powf(-exponent);
    match integrate(f, lo, hi, cfg) {
        Ok(q) => Ok(q.value),
        Err(QuadError::NonFinite { value, .. }) if value == f64::INFINITY => Ok(f64::INFINITY),
        Err(e) => Err(e.into()),
    }
}

fn check_eps(eps: f64) -> Result<(), BoundsError> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(BoundsError::Params(format!("ε = {eps} must lie in (0, 1)")))
    }
}

fn check_p(p: f64) -> Result<(), BoundsError> {
    if p > 0.0 && p.is_finite() {
        Ok(())
    } else {
        Err(BoundsError::Params(format!("p = {p} must be positive and finite")))
    }
}

fn finite_center(x0: &Point) -> Result<&[f64], BoundsError> {
    x0.coords().ok_or_else(|| BoundsError::Params("x0 must be a finite point".into()))
}

/// Both sides of the ring-mean inequality with the verdict.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub inputs: serde_json::Value,
    #[serde(serialize_with = "crate::report::extended")]
    pub lhs: f64,
    #[serde(serialize_with = "crate::report::extended")]
    pub rhs: f64,
    #[serde(serialize_with = "crate::report::extended_opt")]
    pub bound: Option<f64>,
    pub verdict: bool,
    pub tolerances: Tolerances,
    pub details: serde_json::Value,
}

/// Checks `∫_ε^1 dr/(r q^{1/p}) ≥ (1/n) ∫_{eM}^{M/ε^n} dτ/(τ [Φ⁻¹]^{1/p})`
/// on the ring `{ε < |x − x₀| < 1}`.
///
/// With `lambda`, the right side uses the mean `M_*` of `Φ∘Q_*` where
/// `Q_* = max(Q, 1)`, and the left side uses the exponent `λ/p`. Both the
/// left side with `q` and with `q_*` are reported and must pass.
pub fn verify_lemma31(
    phi: &Gauge,
    q: &DistortionField,
    x0: &Point,
    p: f64,
    eps: f64,
    lambda: Option<f64>,
    tol: &Tolerances,
) -> Result<BoundReport, BoundsError> {
    check_eps(eps)?;
    check_p(p)?;
    let center = finite_center(x0)?;
    if !(phi.tau0() > 0.0) {
        return Err(BoundsError::Hypothesis("Φ must be positive; Φ(0) = 0".into()));
    }
    let n = q.dim();
    let cfg = &tol.quad;
    let profile = MeanProfile::of_field(q, center, tol.sphere)?;
    let (mass, lhs, lhs_star, mass_star) = match lambda {
        None => {
            let m = ring_mean(q, phi, eps, center, cfg).map_err(mass_error)?;
            (m, lemma31_lhs(&profile, p, eps, cfg)?, None, None)
        }
        Some(l) => {
            if !(l > 0.0 && l < 1.0) {
                return Err(BoundsError::Params(format!("λ = {l} must lie in (0, 1)")));
            }
            let qs = truncate_unit_floor(q);
            let ms = ring_mean(&qs, phi, eps, center, cfg).map_err(mass_error)?;
            let prof_s = MeanProfile::of_field(&qs, center, tol.sphere)?;
            let lhs = log_integral(&profile, l / p, eps, 1.0, cfg)?;
            let lhs_s = log_integral(&prof_s, l / p, eps, 1.0, cfg)?;
            (ms, lhs, Some(lhs_s), Some(ms))
        }
    };
    if !mass.is_finite() {
        return Err(BoundsError::MassInfinite);
    }
    let rhs = lemma31_rhs(phi, mass, eps, p, n, cfg)?;
    let slack = tol.verdict * rhs.abs().max(1.0);
    let verdict = lhs >= rhs - slack && lhs_star.is_none_or(|l| l >= rhs - slack);
    let details = serde_json::json!({
        "ring_mean": mass,
        "lhs_unit_floor": lhs_star,
        "ring_mean_unit_floor": mass_star,
        "degenerate_range": rhs == 0.0,
    });
    Ok(BoundReport {
        inputs: serde_json::json!({
            "gauge": phi, "dim": n, "p": p, "epsilon": eps, "lambda": lambda, "x0": center,
        }),
        lhs,
        rhs,
        bound: None,
        verdict,
        tolerances: *tol,
        details,
    })
}

fn mass_error(e: FieldError) -> BoundsError {
    match e {
        FieldError::Divergent { .. } => BoundsError::MassInfinite,
        e => e.into(),
    }
}

/// Which integral `∫_0^1 dr / (r^α q^{β/p})` to test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "variant")]
pub enum DivergenceVariant {
    /// `α = β = 1`
    Plain,
    /// `α = 1`, `β = λ ∈ (0, 1)`
    Lambda { lambda: f64 },
    /// `α ≥ 1`, `β ∈ (0, α]`
    AlphaBeta { alpha: f64, beta: f64 },
}

impl DivergenceVariant {
    fn exponents(&self) -> Result<(f64, f64), BoundsError> {
        match *self {
            DivergenceVariant::Plain => Ok((1.0, 1.0)),
            DivergenceVariant::Lambda { lambda } if lambda > 0.0 && lambda < 1.0 => Ok((1.0, lambda)),
            DivergenceVariant::AlphaBeta { alpha, beta } if alpha >= 1.0 && beta > 0.0 && beta <= alpha => {
                Ok((alpha, beta))
            }
            v => Err(BoundsError::Params(format!("inadmissible variant {v:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DivergenceReport {
    /// Final verdict: divergent whenever the gauge condition diverges,
    /// otherwise the numeric verdict.
    pub verdict: DivergenceVerdict,
    /// Verdict of the partial integrals alone.
    pub numeric: DivergenceKind,
    pub condition: DivergenceVerdict,
    #[serde(serialize_with = "crate::report::extended")]
    pub mass: f64,
    /// `(ε_k, ∫_{ε_k}^1 …)`
    #[serde(serialize_with = "crate::report::extended_pairs")]
    pub schedule: Vec<(f64, f64)>,
}

/// Decides `∫_0^1 dr/(r^α q^{β/p}) = ∞` along `ε_k = 2^{-k}`, `k = 1..40`,
/// for `Q` with `∫_{B(x₀,1)} Φ(Q) dm < ∞`.
pub fn theorem31_divergence(
    phi: &Gauge,
    q: &DistortionField,
    x0: &Point,
    p: f64,
    variant: DivergenceVariant,
    policy: &GrowthPolicy,
    tol: &Tolerances,
) -> Result<DivergenceReport, BoundsError> {
    check_p(p)?;
    let (alpha, beta) = variant.exponents()?;
    let center = finite_center(x0)?;
    let cfg = &tol.quad;
    let region = Region::Ball { center: center.to_vec(), radius: 1.0 };
    let mass = match class_membership_integral(phi, q, false, &region, cfg) {
        Ok(m) => m,
        Err(FieldError::Divergent { partial }) => {
            return Err(BoundsError::Hypothesis(format!("∫ Φ(Q) dm over the unit ball diverges (partial {partial})")))
        }
        Err(e) => return Err(e.into()),
    };
    let profile = MeanProfile::of_field(q, center, tol.sphere)?;
    let exponent = beta / p;
    let mut schedule = Vec::with_capacity(40);
    let mut acc = 0.0;
    let mut upper = 1.0f64;
    for k in 1..=40 {
        let eps = 0.5f64.powi(k);
        let piece = if alpha == 1.0 {
            log_integral(&profile, exponent, eps, upper, cfg)?
        } else {
            // r^{1-α} folded into the integrand
            let failure = Cell::new(None::<FieldError>);
            let g = |r: f64| match profile.value_at(r) {
                Ok(v) => r.powf(1.0 - alpha) * if v == f64::INFINITY { 0.0 } else { v.powf(-exponent) },
                Err(e) => {
                    failure.set(Some(e));
                    f64::NAN
                }
            };
            let res = integrate_dr_over_r(g, eps, upper, cfg);
            if let Some(e) = failure.take() {
                return Err(e.into());
            }
            match res {
                Ok(v) => v.value,
                Err(QuadError::NonFinite { value, .. }) if value == f64::INFINITY => f64::INFINITY,
                Err(e) => return Err(e.into()),
            }
        };
        acc += piece;
        schedule.push((eps, acc));
        upper = eps;
        if acc == f64::INFINITY {
            break;
        }
    }
    let decades: Vec<(f64, f64)> = schedule.iter().map(|(e, v)| (-e.log10(), *v)).collect();
    let numeric = policy.judge(&decades);
    let opts = ClassifyOptions { policy: *policy, quad: *cfg, closed_form: true };
    let condition = classify_condition_with(phi, p, ConditionId::InvRoot, phi.tau0() + 1.0, &opts)?;
    let verdict = if condition.diverges() {
        DivergenceVerdict { kind: DivergenceKind::Diverges, method: VerdictMethod::ClosedForm, evidence: schedule.clone() }
    } else {
        DivergenceVerdict { kind: numeric, method: VerdictMethod::Numeric, evidence: schedule.clone() }
    };
    Ok(DivergenceReport { verdict, numeric, condition, mass, schedule })
}

/// Parameters of the continuity moduli.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundParams {
    pub dim: usize,
    /// lower bound `Δ ∈ (0, 1)` on the chordal diameter of the omitted set
    pub delta: f64,
    /// mass bound `M`
    pub mass: f64,
    /// the dimensional constant `α_n`
    pub alpha_n: f64,
    /// working radius `ρ(x₀)` (or `ε(x₀)`)
    pub radius: f64,
    pub x0: Point,
}

impl BoundParams {
    pub fn new(dim: usize, delta: f64, mass: f64, alpha_n: f64, radius: f64, x0: Point) -> Result<Self, BoundsError> {
        DimensionConstants::new(dim)?;
        if !(delta > 0.0 && delta < 1.0) {
            return Err(BoundsError::Params(format!("Δ = {delta} must lie in (0, 1)")));
        }
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(BoundsError::Params(format!("M = {mass} must be positive and finite")));
        }
        if !(alpha_n > 0.0 && alpha_n.is_finite()) {
            return Err(BoundsError::Params(format!("α_n = {alpha_n} must be positive and finite")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(BoundsError::Params(format!("radius {radius} must be positive and finite")));
        }
        if let Some(d) = x0.dim() {
            if d != dim {
                return Err(GeometryError::DimensionMismatch(d, dim).into());
            }
        }
        Ok(BoundParams { dim, delta, mass, alpha_n, radius, x0 })
    }

    /// `λ_n = 2e/Ω_n`
    pub fn lambda_n(&self) -> f64 {
        lambda_n(self.dim)
    }

    /// `β_n(x₀) = (1 + (ρ + |x₀|)²)^n / ρ^n`
    pub fn beta_n(&self) -> f64 {
        beta_n(self.dim, self.radius, self.x0.norm())
    }
}

pub fn lambda_n(dim: usize) -> f64 {
    2.0 * E / DimensionConstants::new(dim).map(|c| c.ball_volume).unwrap_or(f64::NAN)
}

pub fn beta_n(dim: usize, rho: f64, x0_norm: f64) -> f64 {
    let s = rho + x0_norm;
    ((1.0 + s * s) / rho).powi(dim as i32)
}

/// A bound before and after clamping to `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundValue {
    #[serde(serialize_with = "crate::report::extended")]
    pub raw: f64,
    pub clamped: f64,
    /// the integral in the exponent
    #[serde(serialize_with = "crate::report::extended")]
    pub integral: f64,
}

impl BoundValue {
    fn new(raw: f64, integral: f64) -> Self {
        BoundValue { raw, clamped: raw.clamp(0.0, 1.0), integral }
    }
}

fn distance(x: &Point, x0: &Point) -> Result<f64, BoundsError> {
    let (a, b) = (x.coords(), x0.coords());
    match (a, b) {
        (Some(a), Some(b)) => {
            if a.len() != b.len() {
                return Err(GeometryError::DimensionMismatch(a.len(), b.len()).into());
            }
            Ok(crate::geometry::distance(a, b))
        }
        _ => Err(BoundsError::Params("points must be finite".into())),
    }
}

/// `(α_n/Δ) exp{−∫_{|x−x₀|}^{ε(x₀)} dr / (r q_{x₀}(r)^{1/(n−1)})}`.
pub fn distortion_bound_basic(
    params: &BoundParams,
    profile: &MeanProfile,
    x: &Point,
    cfg: &QuadConfig,
) -> Result<BoundValue, BoundsError> {
    let d = distance(x, &params.x0)?;
    if d >= params.radius {
        return Err(BoundsError::OutsideBall { distance: d, limit: params.radius });
    }
    if d == 0.0 {
        return Ok(BoundValue::new(0.0, f64::INFINITY));
    }
    let integral = log_integral(profile, 1.0 / (params.dim as f64 - 1.0), d, params.radius, cfg)?;
    Ok(BoundValue::new(params.alpha_n * ((-integral).exp() / params.delta), integral))
}

/// `(α_n/Δ) exp{−(1/n) ∫_{λ_n β_n M}^{Φ(0) ρ^n / |x−x₀|^n} dτ / (τ [Φ⁻¹(τ)]^{1/(n−1)})}`
/// for `|x − x₀| < ρ/2`.
pub fn equicontinuity_bound(
    params: &BoundParams,
    phi: &Gauge,
    x: &Point,
    cfg: &QuadConfig,
) -> Result<BoundValue, BoundsError> {
    let phi0 = phi.tau0();
    if !(phi0 > 0.0) {
        return Err(BoundsError::GaugeLift);
    }
    let d = distance(x, &params.x0)?;
    let limit = params.radius / 2.0;
    if d >= limit {
        return Err(BoundsError::OutsideBall { distance: d, limit });
    }
    if d == 0.0 {
        return Ok(BoundValue::new(0.0, f64::INFINITY));
    }
    let n = params.dim as f64;
    let ln_lower = params.lambda_n().ln() + params.beta_n().ln() + params.mass.ln();
    if ln_lower <= phi0.ln() {
        return Err(BoundsError::Hypothesis(format!(
            "λ_n β_n M = {} does not exceed Φ(0) = {phi0}",
            ln_lower.exp()
        )));
    }
    let ln_upper = phi0.ln() + n * (params.radius.ln() - d.ln());
    // oriented: for x far from x₀ the limits cross and the bound exceeds α_n/Δ
    let integral = if ln_upper >= ln_lower {
        inverse_log_integral(phi, ln_lower, ln_upper, 1.0 / (n - 1.0), cfg)?
    } else {
        -inverse_log_integral(phi, ln_upper, ln_lower, 1.0 / (n - 1.0), cfg)?
    };
    Ok(BoundValue::new(params.alpha_n * ((-integral / n).exp() / params.delta), integral))
}

/// The bound at `x` near `x₀ = ∞`, evaluated at `x/|x|²` about the origin.
pub fn at_infinity_bound(
    params: &BoundParams,
    phi: &Gauge,
    x: &Point,
    cfg: &QuadConfig,
) -> Result<BoundValue, BoundsError> {
    if !params.x0.is_infinity() {
        return Err(BoundsError::Params("x0 must be ∞".into()));
    }
    let y = invert(x, params.dim);
    let at_origin = BoundParams { x0: Point::origin(params.dim), ..params.clone() };
    equicontinuity_bound(&at_origin, phi, &y, cfg)
}

/// A gauge with `Φ(0) = 0` replaced by `Φ + δ₀`, with the mass bound raised
/// by `δ₀` times the weighted volume of the domain.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GaugeLift {
    pub original: Gauge,
    pub lifted: Gauge,
    pub delta0: f64,
    pub original_mass: f64,
    pub mass: f64,
    pub weighted_volume: f64,
}

pub fn gauge_lift(phi: &Gauge, mass: f64, delta0: f64, weighted_volume: f64) -> Result<GaugeLift, BoundsError> {
    if !(delta0 > 0.0 && delta0.is_finite()) {
        return Err(BoundsError::Params(format!("lift δ₀ = {delta0} must be positive")));
    }
    Ok(GaugeLift {
        original: phi.clone(),
        lifted: phi.affine(1.0, delta0)?,
        delta0,
        original_mass: mass,
        mass: mass + delta0 * weighted_volume,
        weighted_volume,
    })
}
