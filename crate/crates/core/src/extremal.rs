//! The radial extremal family: a gauge-driven stretch profile `K(r)`, the map
//! `f(x) = (x/|x|) R(|x|)` and its truncations `f_m`.

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{chordal_diameter, chordal_distance, norm, DimensionConstants, GeometryError, Point};
use crate::gauge::Gauge;
use crate::quad::{integrate, QuadConfig, QuadError};
use crate::roots::{solve_monotone, RootError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtremalError {
    #[error("growth check fails at t = {t}: Φ(t) = {value} < {required}")]
    Growth { t: f64, value: f64, required: f64 },
    #[error("growth check fails: Φ(t)/t^(1/(n-1)) is still decreasing at t = {t}")]
    GrowthDecreasing { t: f64 },
    #[error("normalized gauge violates Φ_(n-1)(t) ≥ t at t = {t}")]
    Normalization { t: f64 },
    #[error("solving Ψ(K) = (γ/r)² at r = {r}: {source}")]
    Root { r: f64, source: RootError },
    #[error("K({r}) = {k} left the bracket [{lo}, {hi}]")]
    Sandwich { r: f64, k: f64, lo: f64, hi: f64 },
    #[error("K is not strictly decreasing near r = {r}")]
    NotDecreasing { r: f64 },
    #[error("tail of ∫ ds/K(e^-s) not resolved by s = {s} (partial {partial})")]
    Tail { s: f64, partial: f64 },
    #[error("radius {0} outside (0, 1]")]
    Radius(f64),
    #[error("witness needs m·δ ≥ 1, got m = {m}, δ = {delta}")]
    Witness { m: usize, delta: f64 },
    #[error("invalid parameter: {0}")]
    Params(String),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// `Φ(t) = t` on `[0, 1)` and `αΦ_raw(t) + β` on `[1, ∞)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormalizedGauge {
    pub raw: Gauge,
    pub alpha: f64,
    pub beta: f64,
    #[serde(skip)]
    upper: Gauge,
}

impl NormalizedGauge {
    fn new(raw: Gauge, alpha: f64, beta: f64) -> Result<Self, ExtremalError> {
        let upper = raw.affine(alpha, beta).map_err(|e| ExtremalError::Params(e.to_string()))?;
        Ok(NormalizedGauge { raw, alpha, beta, upper })
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t < 1.0 {
            t.max(0.0)
        } else {
            self.upper.eval(t)
        }
    }

    pub fn log_eval(&self, t: f64) -> f64 {
        if t < 1.0 {
            t.ln()
        } else {
            self.upper.log_eval(t)
        }
    }

    /// The part used on `[1, ∞)`, as a gauge.
    pub fn upper(&self) -> &Gauge {
        &self.upper
    }

    pub fn inverse(&self, tau: f64) -> f64 {
        if tau.is_nan() {
            f64::NAN
        } else if tau <= 0.0 {
            0.0
        } else if tau < 1.0 {
            tau
        } else if tau <= self.upper.eval(1.0) {
            1.0
        } else {
            self.upper.inverse(tau).max(1.0)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExtremalSetup {
    pub dim: usize,
    pub gauge: NormalizedGauge,
    /// constant and threshold of the growth bound `Φ(t) ≥ C t^{1/(n−1)}`, `t ≥ T`
    pub c_fit: f64,
    pub t_fit: f64,
    /// `γ = Φ(1)^{1/2}`
    pub gamma: f64,
    #[serde(skip)]
    consts: DimensionConstants,
}

const GRID_PER_DECADE: usize = 25;
const GRID_TOP: f64 = 1e6;

fn grid(from: f64, to: f64) -> Vec<f64> {
    let decades = (to / from).log10().max(1.0);
    let count = (decades * GRID_PER_DECADE as f64).ceil() as usize;
    (0..=count).map(|k| from * 10f64.powf(decades * k as f64 / count as f64)).collect()
}

/// Checks the growth bound and rescales the gauge so that `Φ(t) = t` on
/// `[0, 1)` and `Φ_{n−1}(t) ≥ t` for `t ≥ 1`.
///
/// `fit = Some((C, T))` checks the supplied constants on a grid; `None`
/// fits `T = 1` and `C = min Φ(t)/t^{1/(n−1)}` over the grid.
pub fn normalize_gauge(raw: &Gauge, dim: usize, fit: Option<(f64, f64)>) -> Result<ExtremalSetup, ExtremalError> {
    let consts = DimensionConstants::new(dim)?;
    let k = 1.0 / (dim as f64 - 1.0);
    let log_ratio = |t: f64| raw.log_eval(t) - k * t.ln();
    let (c_fit, t_fit) = match fit {
        Some((c, t)) => {
            if !(c > 0.0 && t >= 1.0 && c.is_finite() && t.is_finite()) {
                return Err(ExtremalError::Params(format!("growth constants C = {c}, T = {t} need C > 0, T ≥ 1")));
            }
            for s in grid(t, GRID_TOP.max(1e3 * t)) {
                let required = c * s.powf(k);
                if raw.eval(s) < required * (1.0 - 1e-12) {
                    return Err(ExtremalError::Growth { t: s, value: raw.eval(s), required });
                }
            }
            (c, t)
        }
        None => {
            let pts = grid(1.0, GRID_TOP);
            let last = *pts.last().unwrap();
            if log_ratio(last) < log_ratio(last / 10.0) - 1e-12 {
                return Err(ExtremalError::GrowthDecreasing { t: last });
            }
            let c = pts.iter().map(|&t| log_ratio(t)).fold(f64::INFINITY, f64::min).exp();
            if !(c > 0.0 && c.is_finite()) {
                return Err(ExtremalError::Growth { t: 1.0, value: raw.eval(1.0), required: 0.0 });
            }
            (c, 1.0)
        }
    };
    let check = |g: &NormalizedGauge| {
        grid(1.0, GRID_TOP).into_iter().find(|&t| g.log_eval(t.powi(dim as i32 - 1)) < t.ln() - 1e-12)
    };
    let mut gauge = NormalizedGauge::new(raw.clone(), 1.0, 0.0)?;
    if check(&gauge).is_some() {
        gauge = NormalizedGauge::new(raw.clone(), 1.0 / c_fit, t_fit)?;
        if let Some(t) = check(&gauge) {
            return Err(ExtremalError::Normalization { t });
        }
    }
    let phi1 = gauge.eval(1.0);
    Ok(ExtremalSetup { dim, gauge, c_fit, t_fit, gamma: phi1.sqrt(), consts })
}

impl ExtremalSetup {
    pub fn constants(&self) -> DimensionConstants {
        self.consts
    }

    /// `Φ_{n−1}(t) = Φ(t^{n−1})`
    pub fn phi_n1(&self, t: f64) -> f64 {
        self.gauge.eval(t.powi(self.dim as i32 - 1))
    }

    /// `Ψ(t) = t Φ_{n−1}(t)`
    pub fn psi(&self, t: f64) -> f64 {
        t * self.phi_n1(t)
    }

    fn ln_psi(&self, t: f64) -> f64 {
        t.ln() + self.gauge.log_eval(t.powi(self.dim as i32 - 1))
    }

    /// `Φ_{n−1}⁻¹(τ)`
    pub fn phi_n1_inverse(&self, tau: f64) -> f64 {
        self.gauge.inverse(tau).powf(1.0 / (self.dim as f64 - 1.0))
    }

    /// `K` at `r = e^{-s}`, `s ≥ 0`.
    fn k_at_s(&self, s: f64) -> Result<f64, ExtremalError> {
        let r = (-s).exp();
        if s == 0.0 {
            return Ok(1.0);
        }
        let ln_upper = self.gamma.ln() + s;
        let hi = ln_upper.exp();
        let lo = self.phi_n1_inverse(hi);
        let target = 2.0 * ln_upper;
        let k = solve_monotone(|t| self.ln_psi(t), target, (lo, hi), 1e-14)
            .map_err(|source| ExtremalError::Root { r, source })?;
        let slack = 1e-12 * hi;
        if k < lo - slack || k > hi + slack {
            return Err(ExtremalError::Sandwich { r, k, lo, hi });
        }
        Ok(k)
    }

    /// Root of `Ψ(K) = (γ/r)²` for `r ∈ (0, 1]`.
    pub fn k(&self, r: f64) -> Result<f64, ExtremalError> {
        if !(r > 0.0 && r <= 1.0) {
            return Err(ExtremalError::Radius(r));
        }
        self.k_at_s(-r.ln())
    }

    /// `(Φ_{n−1}⁻¹(γ/r), γ/r)`
    pub fn sandwich(&self, r: f64) -> (f64, f64) {
        let hi = self.gamma / r;
        (self.phi_n1_inverse(hi), hi)
    }

    /// `∫_{s0}^∞ e^{−ws} / K(e^{−s}) ds`, integrated in unit steps. Remainders
    /// are extrapolated from the local exponential decay rate. Stops once the
    /// remainder of the integrand is below `1e-13` of the total and that of
    /// the majorant `e^{−ws} / Φ_{n−1}⁻¹(γe^s)` below `1e-7`; the integrand's
    /// remainder is then added.
    fn weighted_tail(&self, s0: f64, w: f64) -> Result<(f64, f64), ExtremalError> {
        let cfg = QuadConfig::default().with_rel_tol(1e-12);
        let g = |s: f64| -> Result<f64, ExtremalError> { Ok((-w * s).exp() / self.k_at_s(s)?) };
        let major = |s: f64| (-w * s).exp() / self.phi_n1_inverse((self.gamma.ln() + s).exp());
        let cap = (s0 + 80.0).min(600.0);
        let mut total = 0.0;
        let mut a = s0;
        let (mut g_prev, mut m_prev) = (g(a)?, major(a));
        while a < cap {
            let b = a + 1.0;
            total += self.chunk(&g, a, b, &cfg)?;
            let (g_b, m_b) = (g(b)?, major(b));
            let m_rate = (m_prev / m_b).ln();
            let g_rate = (g_prev / g_b).ln();
            let certified = m_rate > 0.05 && m_b / m_rate <= 1e-7 * total;
            if certified && g_rate > 0.05 && g_b / g_rate <= 1e-13 * total {
                let rest = g_b / g_rate;
                return Ok((total + rest, rest));
            }
            (g_prev, m_prev) = (g_b, m_b);
            a = b;
        }
        Err(ExtremalError::Tail { s: a, partial: total })
    }

    fn chunk<G>(&self, g: &G, a: f64, b: f64, cfg: &QuadConfig) -> Result<f64, ExtremalError>
    where
        G: Fn(f64) -> Result<f64, ExtremalError>,
    {
        let failure = std::cell::Cell::new(None);
        let res = integrate(
            |s| match g(s) {
                Ok(v) => v,
                Err(e) => {
                    failure.set(Some(e));
                    f64::NAN
                }
            },
            a,
            b,
            cfg,
        );
        if let Some(e) = failure.take() {
            return Err(e);
        }
        Ok(res?.value)
    }

    fn head(&self, s_end: f64, w: f64) -> Result<f64, ExtremalError> {
        let cfg = QuadConfig::default().with_rel_tol(1e-12);
        let g = |s: f64| -> Result<f64, ExtremalError> { Ok((-w * s).exp() / self.k_at_s(s)?) };
        let mut total = 0.0;
        let mut a = 0.0;
        while a < s_end {
            let b = (a + 1.0).min(s_end);
            total += self.chunk(&g, a, b, &cfg)?;
            a = b;
        }
        Ok(total)
    }

    /// Solves the profile and `I(0)`; checks monotonicity on `radii`.
    pub fn solve_profile(&self, radii: &[f64]) -> Result<RadialProfile, ExtremalError> {
        let mut sorted: Vec<f64> = radii.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut prev: Option<(f64, f64)> = None;
        for &r in &sorted {
            let k = self.k(r)?;
            if let Some((r0, k0)) = prev {
                if r > r0 && k >= k0 {
                    return Err(ExtremalError::NotDecreasing { r });
                }
            }
            prev = Some((r, k));
        }
        let (i0, tail) = self.weighted_tail(0.0, 0.0)?;
        Ok(RadialProfile { setup: self.clone(), i0, tail_estimate: tail })
    }
}

/// Solved profile with `I(0) = ∫_0^1 dr/(r K(r))`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RadialProfile {
    pub setup: ExtremalSetup,
    pub i0: f64,
    /// estimated remainder included in `i0`
    pub tail_estimate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MapSample {
    pub image: Vec<f64>,
    pub abs_image: f64,
    /// `|f(x)|/|x|`
    #[serde(serialize_with = "crate::report::extended")]
    pub delta_tau: f64,
    /// `R'(|x|)`
    #[serde(serialize_with = "crate::report::extended")]
    pub delta_r: f64,
    /// `K_I(x, f)`
    pub k_i: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MassReport {
    pub mass: f64,
    /// `γ² ω_{n−1} I(0)`
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WitnessRow {
    pub m: usize,
    pub delta: f64,
    pub min_abs_f: f64,
    pub image_at_origin: f64,
    pub chordal_osc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Membership {
    pub m: usize,
    /// `e^{I(0)}`
    pub image_radius: f64,
    pub sup_abs_image: f64,
    /// `h(e^{I(0)}, ∞)`
    pub distance_to_infinity: f64,
    /// chordal diameter of `{|y| ≥ e^{I(0)}} ∪ {∞}`
    pub omitted_diameter: f64,
    pub sampled_diameter: f64,
    pub mass: MassReport,
    pub ok: bool,
}

/// One row of the sampled profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProfileRow {
    pub r: f64,
    pub k: f64,
    pub k_m: f64,
    pub i: f64,
    pub big_r: f64,
    pub big_r_m: f64,
}

impl RadialProfile {
    pub fn dim(&self) -> usize {
        self.setup.dim
    }

    pub fn k(&self, r: f64) -> Result<f64, ExtremalError> {
        self.setup.k(r)
    }

    /// `K_m(r) = K(max(r, 1/m))`
    pub fn k_m(&self, r: f64, m: usize) -> Result<f64, ExtremalError> {
        check_m(m)?;
        self.setup.k(r.max(1.0 / m as f64))
    }

    /// `I(t) = ∫_t^1 dr/(r K(r))`
    pub fn i(&self, t: f64) -> Result<f64, ExtremalError> {
        if !(t > 0.0 && t <= 1.0) {
            return Err(ExtremalError::Radius(t));
        }
        self.setup.head(-t.ln(), 0.0)
    }

    /// `I_m(t)`; infinite at `t = 0`.
    pub fn i_m(&self, t: f64, m: usize) -> Result<f64, ExtremalError> {
        check_m(m)?;
        let cut = 1.0 / m as f64;
        if t >= cut {
            return self.i(t);
        }
        if t == 0.0 {
            return Ok(f64::INFINITY);
        }
        Ok(self.i(cut)? + (cut / t).ln() / self.setup.k(cut)?)
    }

    /// `J(t) = I(0) − I(t) = ∫_0^t dr/(r K(r))`, computed directly.
    pub fn j(&self, t: f64) -> Result<f64, ExtremalError> {
        if !(t > 0.0 && t <= 1.0) {
            return Err(ExtremalError::Radius(t));
        }
        Ok(self.setup.weighted_tail(-t.ln(), 0.0)?.0)
    }

    /// `R(t) = exp{I(0) − I(t)}`
    pub fn big_r(&self, t: f64) -> Result<f64, ExtremalError> {
        Ok(self.j(t)?.exp())
    }

    /// `R_m(t) = exp{I(0) − I_m(t)}`
    pub fn big_r_m(&self, t: f64, m: usize) -> Result<f64, ExtremalError> {
        check_m(m)?;
        let cut = 1.0 / m as f64;
        if t >= cut {
            return self.big_r(t);
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        Ok((self.j(cut)? - (cut / t).ln() / self.setup.k(cut)?).exp())
    }

    pub fn row(&self, r: f64, m: usize) -> Result<ProfileRow, ExtremalError> {
        Ok(ProfileRow {
            r,
            k: self.k(r)?,
            k_m: self.k_m(r, m)?,
            i: self.i(r)?,
            big_r: self.big_r(r)?,
            big_r_m: self.big_r_m(r, m)?,
        })
    }

    /// `f(x)` (or `f_m(x)` with `m`) for `|x| ≤ 1`; `f` itself is not
    /// defined at the origin.
    pub fn eval_map(&self, x: &[f64], m: Option<usize>) -> Result<MapSample, ExtremalError> {
        if x.len() != self.dim() {
            return Err(GeometryError::DimensionMismatch(x.len(), self.dim()).into());
        }
        let t = norm(x);
        let n1 = self.dim() as i32 - 1;
        if t == 0.0 {
            let Some(m) = m else { return Err(ExtremalError::Radius(0.0)) };
            let k = self.setup.k(1.0 / m as f64)?;
            return Ok(MapSample {
                image: vec![0.0; x.len()],
                abs_image: 0.0,
                delta_tau: f64::INFINITY,
                delta_r: f64::INFINITY,
                k_i: k.powi(n1),
            });
        }
        if t > 1.0 {
            return Err(ExtremalError::Radius(t));
        }
        let (rr, k) = match m {
            Some(m) => (self.big_r_m(t, m)?, self.k_m(t, m)?),
            None => (self.big_r(t)?, self.k(t)?),
        };
        Ok(MapSample {
            image: x.iter().map(|v| v / t * rr).collect(),
            abs_image: rr,
            delta_tau: rr / t,
            delta_r: rr / (t * k),
            k_i: k.powi(n1),
        })
    }

    /// `∫_{B^n} Φ(K_I(x, f_m)) dm`, or for `f` itself with `m = None`,
    /// reduced to a radial integral through `Φ_{n−1}(K) = γ²/(r² K)`.
    pub fn gauge_mass(&self, m: Option<usize>) -> Result<MassReport, ExtremalError> {
        let n = self.dim();
        let g2 = self.setup.gamma * self.setup.gamma;
        let omega = self.setup.consts.sphere_area;
        let w = n as f64 - 2.0;
        let mass = match m {
            None => g2 * omega * self.setup.weighted_tail(0.0, w)?.0,
            Some(m) => {
                check_m(m)?;
                let cut = 1.0 / m as f64;
                let outer = self.setup.head((m as f64).ln(), w)?;
                let inner = (m as f64).powi(2) / self.setup.k(cut)? * cut.powi(n as i32) / n as f64;
                g2 * omega * (outer + inner)
            }
        };
        Ok(MassReport { mass, bound: g2 * omega * self.i0 })
    }

    /// For each `m` with `m δ ≥ 1`: `|f_m| ≥ 1` on `|x| = δ` while
    /// `f_m(0) = 0`.
    pub fn nonequicontinuity_witness(&self, delta: f64, ms: &[usize]) -> Result<Vec<WitnessRow>, ExtremalError> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(ExtremalError::Radius(delta));
        }
        let n = self.dim();
        let mut rows = Vec::with_capacity(ms.len());
        for &m in ms {
            check_m(m)?;
            if (m as f64) * delta < 1.0 {
                return Err(ExtremalError::Witness { m, delta });
            }
            let mut min_abs = f64::INFINITY;
            let mut osc = f64::INFINITY;
            let origin = Point::origin(n);
            for x in sphere_sample(n, delta) {
                let s = self.eval_map(&x, Some(m))?;
                min_abs = min_abs.min(s.abs_image);
                osc = osc.min(chordal_distance(&Point::Finite(s.image), &origin)?);
            }
            rows.push(WitnessRow { m, delta, min_abs_f: min_abs, image_at_origin: 0.0, chordal_osc: osc });
        }
        Ok(rows)
    }

    /// `f_m` maps into the ball of radius `e^{I(0)}`, so it omits
    /// `{|y| ≥ e^{I(0)}} ∪ {∞}`.
    pub fn membership_check(&self, m: usize) -> Result<Membership, ExtremalError> {
        check_m(m)?;
        let n = self.dim();
        let rho = self.i0.exp();
        let mut sup_abs = 0.0f64;
        for t in [1.0, 0.5, 0.1, 1.0 / m as f64] {
            for x in sphere_sample(n, t) {
                sup_abs = sup_abs.max(self.eval_map(&x, Some(m))?.abs_image);
            }
        }
        let mut omitted = vec![Point::Infinity];
        for scale in [1.0, 2.0, 10.0, 1e3] {
            for x in sphere_sample(n, rho * scale) {
                omitted.push(Point::Finite(x));
            }
        }
        let sampled = chordal_diameter(&omitted)?;
        let mass = self.gauge_mass(Some(m))?;
        let ok = sup_abs <= rho * (1.0 + 1e-9) && mass.mass <= mass.bound * (1.0 + 1e-9);
        Ok(Membership {
            m,
            image_radius: rho,
            sup_abs_image: sup_abs,
            distance_to_infinity: 1.0 / (1.0 + rho * rho).sqrt(),
            omitted_diameter: 2.0 * rho / (1.0 + rho * rho),
            sampled_diameter: sampled,
            mass,
            ok,
        })
    }

    /// Images of the circles `|x| = r` and of `rays` radii in the
    /// `(x1, x2)` plane, each as a polyline.
    pub fn image_curves(
        &self,
        m: Option<usize>,
        circles: &[f64],
        rays: usize,
        samples: usize,
    ) -> Result<Vec<Vec<[f64; 2]>>, ExtremalError> {
        let n = self.dim();
        let samples = samples.max(2);
        let point = |r: f64, a: f64| {
            let mut x = vec![0.0; n];
            x[0] = r * a.cos();
            x[1] = r * a.sin();
            x
        };
        let mut out = Vec::new();
        for &r in circles {
            let mut line = Vec::with_capacity(samples + 1);
            for k in 0..=samples {
                let a = std::f64::consts::TAU * k as f64 / samples as f64;
                let s = self.eval_map(&point(r, a), m)?;
                line.push([s.image[0], s.image[1]]);
            }
            out.push(line);
        }
        let r_min = match m {
            Some(_) => 0.0,
            None => 1e-3,
        };
        for j in 0..rays {
            let a = std::f64::consts::TAU * j as f64 / rays as f64;
            let mut line = Vec::with_capacity(samples + 1);
            for k in 0..=samples {
                let r = r_min + (1.0 - r_min) * k as f64 / samples as f64;
                let s = self.eval_map(&point(r, a), m)?;
                line.push([s.image[0], s.image[1]]);
            }
            out.push(line);
        }
        Ok(out)
    }
}

fn check_m(m: usize) -> Result<(), ExtremalError> {
    if m == 0 {
        Err(ExtremalError::Params("truncation index m must be ≥ 1".into()))
    } else {
        Ok(())
    }
}

/// `±r e_i` for every axis and a few diagonal directions.
fn sphere_sample(n: usize, r: f64) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for i in 0..n {
        for sign in [1.0, -1.0] {
            let mut x = vec![0.0; n];
            x[i] = sign * r;
            out.push(x);
        }
    }
    let d = r / (n as f64).sqrt();
    out.push(vec![d; n]);
    out.push(vec![-d; n]);
    for k in 0..8 {
        let a = std::f64::consts::TAU * (k as f64 + 0.5) / 8.0;
        let mut x = vec![0.0; n];
        x[0] = r * a.cos();
        x[1] = r * a.sin();
        out.push(x);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn identity2() -> RadialProfile {
        let s = normalize_gauge(&Gauge::identity(), 2, None).unwrap();
        s.solve_profile(&[0.01, 0.1, 0.5, 1.0]).unwrap()
    }

    #[test]
    fn identity_closed_forms() {
        let p = identity2();
        assert_eq!((p.setup.gauge.alpha, p.setup.gauge.beta), (1.0, 0.0));
        assert_relative_eq!(p.i0, 1.0, max_relative = 1e-10);
        for t in [0.01, 0.3, 0.9] {
            assert_relative_eq!(p.k(t).unwrap(), 1.0 / t, max_relative = 1e-12);
            assert_relative_eq!(p.big_r(t).unwrap(), t.exp(), max_relative = 1e-10);
            assert_relative_eq!(p.i(t).unwrap(), 1.0 - t, max_relative = 1e-10);
        }
        let m = 4;
        let t = 0.1;
        let want = (1.0 / m as f64).exp() * (m as f64 * t).powf(1.0 / m as f64);
        assert_relative_eq!(p.big_r_m(t, m).unwrap(), want, max_relative = 1e-10);
        assert_eq!(p.i_m(0.0, m).unwrap(), f64::INFINITY);
    }

    #[test]
    fn stretches_ordering() {
        let p = identity2();
        let s = p.eval_map(&[0.2, 0.1], None).unwrap();
        assert!(s.delta_r <= s.delta_tau);
        assert_relative_eq!(s.k_i, 1.0 / 0.05f64.sqrt(), max_relative = 1e-10);
    }

    #[test]
    fn bounded_gauge_fails_growth() {
        let e = normalize_gauge(&Gauge::constant(2.0).unwrap(), 2, None).unwrap_err();
        assert!(matches!(e, ExtremalError::GrowthDecreasing { .. }));
        let e = normalize_gauge(&Gauge::identity(), 2, Some((2.0, 1.0))).unwrap_err();
        assert!(matches!(e, ExtremalError::Growth { .. }));
    }

    #[test]
    fn rescaled_gauge() {
        let s = normalize_gauge(&Gauge::power(0.5, 2.0).unwrap(), 2, None).unwrap();
        assert_relative_eq!(s.c_fit, 0.5, max_relative = 1e-12);
        assert_eq!((s.gauge.alpha, s.gauge.beta), (2.0, 1.0));
        assert_relative_eq!(s.gamma, 2f64.sqrt(), max_relative = 1e-12);
        assert_eq!(s.gauge.eval(0.5), 0.5);
    }

    #[test]
    fn witness_rejects_small_m() {
        let p = identity2();
        assert!(matches!(p.nonequicontinuity_witness(0.1, &[5]), Err(ExtremalError::Witness { .. })));
        let rows = p.nonequicontinuity_witness(0.1, &[10, 20]).unwrap();
        assert!(rows.iter().all(|r| r.min_abs_f >= 1.0 && r.chordal_osc >= 0.5f64.sqrt()));
    }
}
