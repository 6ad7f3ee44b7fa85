//! Classification of improper integrals `∫_δ^∞ f(τ) dτ` as divergent or
//! convergent.
//!
//! Integrands with a known tail shape are classified symbolically through
//! [`TailFamily`]. Otherwise partial integrals over `[δ, 10^k]` are tracked
//! decade by decade and judged by [`GrowthPolicy`].

use std::cell::Cell;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quad::{integrate, QuadConfig, QuadError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DivergenceError {
    #[error("integrand is negative ({value}) at τ = {at}")]
    Negative { at: f64, value: f64 },
    #[error("lower limit must be positive and finite, got {0}")]
    Lower(f64),
    #[error(transparent)]
    Quad(#[from] QuadError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceKind {
    Diverges,
    Converges,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictMethod {
    ClosedForm,
    Numeric,
}

/// Verdict plus the partial integrals `(upper limit, value)` it rests on.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DivergenceVerdict {
    pub kind: DivergenceKind,
    pub method: VerdictMethod,
    #[serde(serialize_with = "crate::report::extended_pairs")]
    pub evidence: Vec<(f64, f64)>,
}

impl DivergenceVerdict {
    pub fn closed_form(kind: DivergenceKind) -> Self {
        DivergenceVerdict { kind, method: VerdictMethod::ClosedForm, evidence: Vec::new() }
    }

    pub fn diverges(&self) -> bool {
        self.kind == DivergenceKind::Diverges
    }
    pub fn converges(&self) -> bool {
        self.kind == DivergenceKind::Converges
    }
}

/// Tail shapes `τ^{-a} (ln τ)^{-b}` as `τ → ∞`, up to positive constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum TailFamily {
    /// Identically zero beyond some point.
    Zero,
    /// `τ^{-a}`
    Power { a: f64 },
    /// `τ^{-a} (ln τ)^{-b}`
    LogPower { a: f64, b: f64 },
    /// `e^{-κ τ}` with `κ > 0`
    Exponential { rate: f64 },
}

// exponents this close to the critical value 1 are treated as equal to it
const CRITICAL_SLACK: f64 = 1e-12;

impl TailFamily {
    pub fn verdict(&self) -> DivergenceKind {
        let div = match *self {
            TailFamily::Zero => false,
            TailFamily::Exponential { rate } => rate <= 0.0,
            TailFamily::Power { a } => a <= 1.0 + CRITICAL_SLACK,
            TailFamily::LogPower { a, b } => {
                if (a - 1.0).abs() <= CRITICAL_SLACK {
                    b <= 1.0 + CRITICAL_SLACK
                } else {
                    a < 1.0
                }
            }
        };
        if div {
            DivergenceKind::Diverges
        } else {
            DivergenceKind::Converges
        }
    }
}

/// Thresholds for judging partial-integral growth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthPolicy {
    /// Minimum increase per decade, for each of the last `window` decades,
    /// to call the integral divergent.
    pub min_increment: f64,
    /// Total increase over the last `window` decades below which the
    /// integral is called convergent.
    pub converge_sum: f64,
    pub window: usize,
    /// Last decade `k` of the schedule `[δ, 10^k]`.
    pub max_decade: u32,
}

impl Default for GrowthPolicy {
    fn default() -> Self {
        GrowthPolicy { min_increment: 0.5, converge_sum: 1e-6, window: 3, max_decade: 12 }
    }
}

impl GrowthPolicy {
    /// Judges samples `(position in decades, partial integral)`, sorted by
    /// position. Values between samples are interpolated linearly in the
    /// decade coordinate.
    pub fn judge(&self, samples: &[(f64, f64)]) -> DivergenceKind {
        if samples.iter().any(|(_, v)| *v == f64::INFINITY) {
            return DivergenceKind::Diverges;
        }
        let Some(&(last, _)) = samples.last() else {
            return DivergenceKind::Inconclusive;
        };
        let first = samples[0].0;
        if last - first < self.window as f64 - 1e-9 {
            return DivergenceKind::Inconclusive;
        }
        let at = |x: f64| -> f64 {
            let i = samples.partition_point(|(p, _)| *p < x);
            if i == 0 {
                return samples[0].1;
            }
            if i >= samples.len() {
                return samples[samples.len() - 1].1;
            }
            let (p0, v0) = samples[i - 1];
            let (p1, v1) = samples[i];
            if p1 == p0 {
                v1
            } else {
                v0 + (v1 - v0) * (x - p0) / (p1 - p0)
            }
        };
        let increments: Vec<f64> =
            (0..self.window).map(|w| at(last - w as f64) - at(last - w as f64 - 1.0)).collect();
        if increments.iter().all(|d| *d >= self.min_increment) {
            DivergenceKind::Diverges
        } else if increments.iter().sum::<f64>() < self.converge_sum {
            DivergenceKind::Converges
        } else {
            DivergenceKind::Inconclusive
        }
    }
}

/// Partial integrals `∫_δ^{10^k} f` for the decades of `policy`, integrated
/// decade by decade in the variable `u = ln τ`.
pub fn partial_integrals<F>(
    integrand: F,
    lower: f64,
    policy: &GrowthPolicy,
    cfg: &QuadConfig,
) -> Result<Vec<(f64, f64)>, DivergenceError>
where
    F: Fn(f64) -> f64,
{
    if !(lower > 0.0 && lower.is_finite()) {
        return Err(DivergenceError::Lower(lower));
    }
    let negative = Cell::new(None::<(f64, f64)>);
    let g = |u: f64| {
        let t = u.exp();
        let v = integrand(t);
        if v < 0.0 && negative.get().is_none() {
            negative.set(Some((t, v)));
        }
        v * t
    };
    let first = (lower.log10().floor() as i64 + 1).max(1) as u32;
    let last = policy.max_decade.max(first + policy.window as u32 + 1);
    let mut samples = Vec::new();
    let mut lo = lower.ln();
    let mut acc = 0.0;
    for k in first..=last {
        let upper = 10f64.powi(k as i32);
        let hi = upper.ln();
        let piece = match integrate(g, lo, hi, cfg) {
            Ok(q) => q.value,
            Err(QuadError::NonFinite { value, .. }) if value == f64::INFINITY => f64::INFINITY,
            Err(e) => return Err(e.into()),
        };
        if let Some((at, value)) = negative.get() {
            return Err(DivergenceError::Negative { at, value });
        }
        acc += piece;
        samples.push((upper, acc));
        if acc == f64::INFINITY {
            break;
        }
        lo = hi;
    }
    Ok(samples)
}

/// Classifies `∫_lower^∞ integrand`. A `closed_form` tag short-circuits the
/// numeric judgement, which is still attached as evidence when it can be
/// computed.
pub fn classify_divergence<F>(
    integrand: F,
    lower: f64,
    closed_form: Option<TailFamily>,
    policy: &GrowthPolicy,
    cfg: &QuadConfig,
) -> Result<DivergenceVerdict, DivergenceError>
where
    F: Fn(f64) -> f64,
{
    let evidence = partial_integrals(integrand, lower, policy, cfg)?;
    if let Some(tag) = closed_form {
        return Ok(DivergenceVerdict { kind: tag.verdict(), method: VerdictMethod::ClosedForm, evidence });
    }
    let decades: Vec<(f64, f64)> = evidence.iter().map(|(t, v)| (t.log10(), *v)).collect();
    Ok(DivergenceVerdict { kind: policy.judge(&decades), method: VerdictMethod::Numeric, evidence })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn numeric<F: Fn(f64) -> f64>(f: F, lower: f64) -> DivergenceVerdict {
        classify_divergence(f, lower, None, &GrowthPolicy::default(), &QuadConfig::default()).unwrap()
    }

    #[test]
    fn closed_form_examples() {
        let p = GrowthPolicy::default();
        let c = QuadConfig::default();
        let v = classify_divergence(|t| 1.0 / (t * t.ln()), E, Some(TailFamily::LogPower { a: 1.0, b: 1.0 }), &p, &c)
            .unwrap();
        assert_eq!(v.kind, DivergenceKind::Diverges);
        // partial integrals follow ln ln τ
        let (t, val) = v.evidence[3];
        assert!((val - t.ln().ln()).abs() < 1e-8);
        let v = classify_divergence(|t: f64| t.powf(-1.5), 1.0, Some(TailFamily::Power { a: 1.5 }), &p, &c).unwrap();
        assert_eq!(v.kind, DivergenceKind::Converges);
        let v = classify_divergence(|_| 0.0, 3.0, Some(TailFamily::Zero), &p, &c).unwrap();
        assert_eq!(v.kind, DivergenceKind::Converges);
    }

    #[test]
    fn numeric_verdicts() {
        assert_eq!(numeric(|t| 1.0 / t, 1.0).kind, DivergenceKind::Diverges);
        assert_eq!(numeric(|t| 1.0 / (t * t), 1.0).kind, DivergenceKind::Converges);
        assert_eq!(numeric(|_| 0.0, 2.0).kind, DivergenceKind::Converges);
        // ln ln τ grows by less than 0.5 per decade: not decidable numerically
        assert_eq!(numeric(|t| 1.0 / (t * t.ln()), E).kind, DivergenceKind::Inconclusive);
        let v = numeric(|t: f64| t.powf(-1.5), 1.0);
        assert_eq!(v.kind, DivergenceKind::Inconclusive);
        assert!(!v.evidence.is_empty());
    }

    #[test]
    fn negative_integrand_is_rejected() {
        let err = classify_divergence(|t| 1.0 - t, 0.5, None, &GrowthPolicy::default(), &QuadConfig::default());
        assert!(matches!(err, Err(DivergenceError::Negative { .. })));
    }

    #[test]
    fn tail_family_thresholds() {
        assert_eq!(TailFamily::Power { a: 1.0 }.verdict(), DivergenceKind::Diverges);
        assert_eq!(TailFamily::Power { a: 1.0 + 1e-6 }.verdict(), DivergenceKind::Converges);
        assert_eq!(TailFamily::LogPower { a: 1.0, b: 2.0 }.verdict(), DivergenceKind::Converges);
        assert_eq!(TailFamily::LogPower { a: 2.0, b: -1.0 }.verdict(), DivergenceKind::Converges);
        assert_eq!(TailFamily::LogPower { a: 0.9, b: 5.0 }.verdict(), DivergenceKind::Diverges);
        assert_eq!(TailFamily::Exponential { rate: 1.0 }.verdict(), DivergenceKind::Converges);
    }

    #[test]
    fn judge_interpolates_halving_schedules() {
        // ln(1/ε) sampled at ε = 2^-k: 2.3 per decade
        let samples: Vec<(f64, f64)> =
            (1..=40).map(|k| (k as f64 * 2f64.log10(), k as f64 * 2f64.ln())).collect();
        assert_eq!(GrowthPolicy::default().judge(&samples), DivergenceKind::Diverges);
        let flat: Vec<(f64, f64)> = (1..=40).map(|k| (k as f64 * 2f64.log10(), 1.0 - 0.5f64.powi(k))).collect();
        assert_eq!(GrowthPolicy::default().judge(&flat), DivergenceKind::Converges);
    }
}
