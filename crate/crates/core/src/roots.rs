//! Inversion of strictly increasing functions by bracket expansion and
//! bisection.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RootError {
    #[error("target {target} lies below the range of the function (F({at}) = {value})")]
    BelowRange { target: f64, at: f64, value: f64 },
    #[error("bracket expansion exhausted: F({hi}) = {value} < {target}")]
    BracketExhausted { target: f64, hi: f64, value: f64 },
    #[error("bisection stalled in [{lo}, {hi}] with residual {residual} (target {target})")]
    Stalled { target: f64, lo: f64, hi: f64, residual: f64 },
    #[error("invalid bracket hint ({0}, {1})")]
    Bracket(f64, f64),
    #[error("function returned NaN at {0}")]
    NaN(f64),
}

const MAX_EXPANSIONS: usize = 2100;
const MAX_BISECTIONS: usize = 400;

/// Solves `F(t) = target` for `t >= 0` where `F` is strictly increasing and
/// continuous. `bracket` is a hint `(lo, hi)` with `0 <= lo <= hi`; it is
/// widened geometrically as needed. The returned `t` satisfies
/// `|F(t) - target| <= tol * max(1, |target|)`.
pub fn solve_monotone<F>(f: F, target: f64, bracket: (f64, f64), tol: f64) -> Result<f64, RootError>
where
    F: Fn(f64) -> f64,
{
    let (mut lo, mut hi) = bracket;
    if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
        return Err(RootError::Bracket(lo, hi));
    }
    let scale = tol * target.abs().max(1.0);
    let value = |t: f64| {
        let v = f(t);
        if v.is_nan() {
            Err(RootError::NaN(t))
        } else {
            Ok(v)
        }
    };

    let mut f_lo = value(lo)?;
    let mut shrinks = 0;
    while f_lo > target {
        if lo == 0.0 {
            return Err(RootError::BelowRange { target, at: lo, value: f_lo });
        }
        hi = lo;
        lo = if shrinks >= MAX_EXPANSIONS || lo < f64::MIN_POSITIVE { 0.0 } else { lo * 0.5 };
        shrinks += 1;
        f_lo = value(lo)?;
    }
    if (f_lo - target).abs() <= scale {
        return Ok(lo);
    }
    if hi == lo {
        hi = if lo > 0.0 { 2.0 * lo } else { 1.0 };
    }
    let mut f_hi = value(hi)?;
    let mut grows = 0;
    while f_hi < target {
        if grows >= MAX_EXPANSIONS || !hi.is_finite() {
            return Err(RootError::BracketExhausted { target, hi, value: f_hi });
        }
        lo = hi;
        hi *= 2.0;
        grows += 1;
        f_hi = value(hi)?;
    }

    for _ in 0..MAX_BISECTIONS {
        let mid = lo + 0.5 * (hi - lo);
        if !(mid > lo && mid < hi) {
            break;
        }
        let fm = value(mid)?;
        if (fm - target).abs() <= scale {
            return Ok(mid);
        }
        if fm < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (f_lo, f_hi) = (value(lo)?, value(hi)?);
    let (best, residual) =
        if (f_lo - target).abs() <= (f_hi - target).abs() { (lo, f_lo - target) } else { (hi, f_hi - target) };
    if residual.abs() <= scale {
        Ok(best)
    } else {
        Err(RootError::Stalled { target, lo, hi, residual })
    }
}
