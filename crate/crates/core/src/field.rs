//! Distortion fields `Q : D → [0, ∞]` and their averages over spheres,
//! rings and balls.

use std::cell::Cell;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Expr, ExprError};
use crate::gauge::Gauge;
use crate::geometry::{DimensionConstants, GeometryError, Point};
use crate::quad::{integrate, integrate_dr_over_r, QuadConfig, QuadError, Quadrature};
use crate::sphere::{sphere_mean, SphereError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("field has dimension {field}, point or center has dimension {other}")]
    Dimension { field: usize, other: usize },
    #[error("sphere of radius {radius} about {center:?} leaves the field's domain")]
    OutsideDomain { center: Vec<f64>, radius: f64 },
    #[error("radius grid must be positive and strictly increasing")]
    Radii,
    #[error("radius {0} lies outside the sampled profile")]
    ProfileGap(f64),
    #[error("integral diverges (partial value {partial})")]
    Divergent { partial: f64 },
    #[error("ring inner radius must lie in (0, 1), got {0}")]
    Epsilon(f64),
    #[error("grid field: {0}")]
    Grid(String),
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Sphere(#[from] SphereError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Samples on a tensor grid, interpolated multilinearly.
#[derive(Clone, Debug, PartialEq)]
pub struct GridData {
    axes: Vec<Vec<f64>>,
    /// row-major, last axis fastest
    values: Vec<f64>,
}

impl GridData {
    pub fn new(axes: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self, FieldError> {
        if !(2..=3).contains(&axes.len()) {
            return Err(FieldError::Grid(format!("only 2 or 3 axes are supported, got {}", axes.len())));
        }
        for (i, a) in axes.iter().enumerate() {
            if a.len() < 2 || a.windows(2).any(|w| w[1] <= w[0]) || a.iter().any(|v| !v.is_finite()) {
                return Err(FieldError::Grid(format!("axis {i} needs at least two increasing finite nodes")));
            }
        }
        let size: usize = axes.iter().map(Vec::len).product();
        if values.len() != size {
            return Err(FieldError::Grid(format!("expected {size} values, got {}", values.len())));
        }
        if values.iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(FieldError::Grid("values must be non-negative".into()));
        }
        Ok(GridData { axes, values })
    }

    /// Reads CSV rows `x1,…,xn,value`. Rows must cover a full tensor grid.
    pub fn from_csv(text: &str, dim: usize) -> Result<Self, FieldError> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cells: Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
            let cells = match cells {
                Ok(c) => c,
                // tolerate one header line
                Err(_) if rows.is_empty() => continue,
                Err(e) => return Err(FieldError::Grid(format!("line {}: {e}", lineno + 1))),
            };
            if cells.len() != dim + 1 {
                return Err(FieldError::Grid(format!("line {}: expected {} columns", lineno + 1, dim + 1)));
            }
            rows.push(cells);
        }
        let mut axes: Vec<Vec<f64>> = (0..dim)
            .map(|k| {
                let mut a: Vec<f64> = rows.iter().map(|r| r[k]).collect();
                a.sort_by(f64::total_cmp);
                a.dedup();
                a
            })
            .collect();
        let size: usize = axes.iter().map(Vec::len).product();
        if size != rows.len() {
            return Err(FieldError::Grid(format!("{} rows do not form a full {size}-node grid", rows.len())));
        }
        let mut values = vec![f64::NAN; size];
        for r in &rows {
            let mut idx = 0;
            for (k, axis) in axes.iter().enumerate() {
                let i = axis.partition_point(|v| *v < r[k]);
                idx = idx * axis.len() + i;
            }
            if !values[idx].is_nan() {
                return Err(FieldError::Grid("duplicate grid node".into()));
            }
            values[idx] = r[dim];
        }
        GridData::new(std::mem::take(&mut axes), values)
    }

    fn contains(&self, x: &[f64]) -> bool {
        self.axes.iter().zip(x).all(|(a, v)| *v >= a[0] && *v <= a[a.len() - 1])
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        if x.len() != self.axes.len() || !self.contains(x) {
            return f64::NAN;
        }
        let d = self.axes.len();
        let mut lo = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for k in 0..d {
            let a = &self.axes[k];
            let i = a.partition_point(|v| *v <= x[k]).clamp(1, a.len() - 1) - 1;
            lo[k] = i;
            frac[k] = (x[k] - a[i]) / (a[i + 1] - a[i]);
        }
        let mut total = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut idx = 0;
            for k in 0..d {
                let up = (corner >> k) & 1;
                w *= if up == 1 { frac[k] } else { 1.0 - frac[k] };
                idx = idx * self.axes[k].len() + lo[k] + up;
            }
            if w != 0.0 {
                total += w * self.values[idx];
            }
        }
        total
    }
}

#[derive(Clone)]
pub enum FieldKind {
    Constant(f64),
    /// `Q(x) = profile(|x − center|)`
    Radial { profile: RadialFn, center: Vec<f64>, source: String },
    Analytic { f: ScalarFn, source: String },
    Grid(GridData),
    /// `max(Q, 1)`
    UnitFloor(Box<DistortionField>),
    /// `Q(x/|x|²)`
    Inverted(Box<DistortionField>),
}

/// Where a field is defined.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Domain {
    Whole,
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

#[derive(Clone)]
pub struct DistortionField {
    kind: FieldKind,
    dim: usize,
    domain: Domain,
}

impl fmt::Debug for DistortionField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            FieldKind::Constant(c) => format!("Constant({c})"),
            FieldKind::Radial { source, center, .. } => format!("Radial({source:?} about {center:?})"),
            FieldKind::Analytic { source, .. } => format!("Analytic({source:?})"),
            FieldKind::Grid(g) => format!("Grid({:?})", g.axes.iter().map(Vec::len).collect::<Vec<_>>()),
            FieldKind::UnitFloor(q) => format!("UnitFloor({q:?})"),
            FieldKind::Inverted(q) => format!("Inverted({q:?})"),
        };
        write!(f, "DistortionField {{ {kind}, dim: {}, domain: {:?} }}", self.dim, self.domain)
    }
}

fn check_dim(dim: usize) -> Result<(), FieldError> {
    if dim < 2 {
        return Err(FieldError::Geometry(GeometryError::Dimension(dim)));
    }
    Ok(())
}

fn variable_names(dim: usize) -> Vec<String> {
    let mut v: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    v.push("r".into());
    v
}

impl DistortionField {
    pub fn constant(c: f64, dim: usize) -> Result<Self, FieldError> {
        check_dim(dim)?;
        if c.is_nan() || c < 0.0 {
            return Err(FieldError::Unsupported(format!("constant field value {c} must be in [0, ∞]")));
        }
        Ok(DistortionField { kind: FieldKind::Constant(c), dim, domain: Domain::Whole })
    }

    pub fn radial<F>(profile: F, center: Vec<f64>, source: &str) -> Result<Self, FieldError>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let dim = center.len();
        check_dim(dim)?;
        Ok(DistortionField {
            kind: FieldKind::Radial { profile: Arc::new(profile), center, source: source.to_string() },
            dim,
            domain: Domain::Whole,
        })
    }

    /// Radial field from an expression in `r`.
    pub fn radial_expr(expr: &str, center: Vec<f64>) -> Result<Self, FieldError> {
        let e = Expr::compile(expr, &["r"])?;
        DistortionField::radial(move |r| e.eval(&[r]), center, expr)
    }

    pub fn analytic<F>(f: F, dim: usize, source: &str) -> Result<Self, FieldError>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        check_dim(dim)?;
        Ok(DistortionField {
            kind: FieldKind::Analytic { f: Arc::new(f), source: source.to_string() },
            dim,
            domain: Domain::Whole,
        })
    }

    /// Analytic field from an expression in `x1, …, xn` and `r = |x|`.
    pub fn analytic_expr(expr: &str, dim: usize) -> Result<Self, FieldError> {
        check_dim(dim)?;
        let names = variable_names(dim);
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let e = Expr::compile(expr, &refs)?;
        DistortionField::analytic(
            move |x: &[f64]| {
                let mut vals = Vec::with_capacity(x.len() + 1);
                vals.extend_from_slice(x);
                vals.push(x.iter().map(|v| v * v).sum::<f64>().sqrt());
                e.eval(&vals)
            },
            dim,
            expr,
        )
    }

    pub fn grid(data: GridData) -> Self {
        let dim = data.axes.len();
        let lo = data.axes.iter().map(|a| a[0]).collect();
        let hi = data.axes.iter().map(|a| a[a.len() - 1]).collect();
        DistortionField { kind: FieldKind::Grid(data), dim, domain: Domain::Box { lo, hi } }
    }

    /// Restricts the field to `domain`.
    pub fn with_domain(mut self, domain: Domain) -> Result<Self, FieldError> {
        match &domain {
            Domain::Whole => {}
            Domain::Ball { center, radius } => {
                if center.len() != self.dim {
                    return Err(FieldError::Dimension { field: self.dim, other: center.len() });
                }
                if !(*radius > 0.0) {
                    return Err(FieldError::Unsupported(format!("ball radius {radius} must be positive")));
                }
            }
            Domain::Box { lo, hi } => {
                if lo.len() != self.dim || hi.len() != self.dim {
                    return Err(FieldError::Dimension { field: self.dim, other: lo.len().max(hi.len()) });
                }
            }
        }
        self.domain = domain;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// `Q(x)`; NaN outside a grid.
    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.kind {
            FieldKind::Constant(c) => *c,
            FieldKind::Radial { profile, center, .. } => {
                let r = crate::geometry::distance(x, center);
                profile(r)
            }
            FieldKind::Analytic { f, .. } => f(x),
            FieldKind::Grid(g) => g.eval(x),
            FieldKind::UnitFloor(q) => {
                let v = q.value(x);
                if v.is_nan() {
                    v
                } else {
                    v.max(1.0)
                }
            }
            FieldKind::Inverted(q) => {
                let s: f64 = x.iter().map(|v| v * v).sum();
                if s == 0.0 {
                    return f64::NAN;
                }
                let y: Vec<f64> = x.iter().map(|v| v / s).collect();
                q.value(&y)
            }
        }
    }

    /// The profile `r ↦ Q` when the field is radial about `center`.
    pub fn radial_profile_about(&self, center: &[f64]) -> Option<RadialFn> {
        match &self.kind {
            FieldKind::Constant(c) => {
                let c = *c;
                Some(Arc::new(move |_| c))
            }
            FieldKind::Radial { profile, center: c, .. } if c.as_slice() == center => Some(profile.clone()),
            FieldKind::UnitFloor(q) => {
                let p = q.radial_profile_about(center)?;
                Some(Arc::new(move |r| p(r).max(1.0)))
            }
            FieldKind::Inverted(q) if center.iter().all(|v| *v == 0.0) => {
                let p = q.radial_profile_about(center)?;
                Some(Arc::new(move |r| p(1.0 / r)))
            }
            _ => None,
        }
    }

    /// Whether the sphere `{|x − center| = r}` lies in the domain.
    pub fn sphere_inside(&self, center: &[f64], r: f64) -> bool {
        match &self.domain {
            Domain::Whole => true,
            Domain::Ball { center: c, radius } => {
                let d = center.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                d + r <= radius * (1.0 + 1e-12)
            }
            Domain::Box { lo, hi } => {
                center.iter().zip(lo.iter().zip(hi)).all(|(c, (l, h))| c - r >= *l - 1e-12 && c + r <= *h + 1e-12)
            }
        }
    }

    /// Mean of `post(Q)` over the sphere `{|x − center| = r}`.
    pub fn sphere_mean_of<P>(&self, post: P, center: &[f64], r: f64, tol: f64) -> Result<f64, FieldError>
    where
        P: Fn(f64) -> f64,
    {
        if center.len() != self.dim {
            return Err(FieldError::Dimension { field: self.dim, other: center.len() });
        }
        if !self.sphere_inside(center, r) {
            return Err(FieldError::OutsideDomain { center: center.to_vec(), radius: r });
        }
        if let Some(p) = self.radial_profile_about(center) {
            return Ok(post(p(r)));
        }
        if self.dim > 3 {
            return Err(FieldError::Sphere(SphereError::Unsupported(self.dim)));
        }
        Ok(sphere_mean(|x| post(self.value(x)), center, r, self.dim, tol)?)
    }

    /// Spherical mean `q_{x₀}(r)`.
    pub fn sphere_mean(&self, center: &[f64], r: f64, tol: f64) -> Result<f64, FieldError> {
        self.sphere_mean_of(|v| v, center, r, tol)
    }
}

/// `max(Q, 1)`. Idempotent; constants are folded.
pub fn truncate_unit_floor(q: &DistortionField) -> DistortionField {
    match &q.kind {
        FieldKind::Constant(c) => DistortionField { kind: FieldKind::Constant(c.max(1.0)), ..q.clone() },
        FieldKind::UnitFloor(_) => q.clone(),
        _ => DistortionField { kind: FieldKind::UnitFloor(Box::new(q.clone())), dim: q.dim, domain: q.domain.clone() },
    }
}

/// `Q'(y) = Q(y/|y|²)`, the field seen from `∞`.
pub fn invert_field(q: &DistortionField) -> DistortionField {
    match &q.kind {
        FieldKind::Constant(_) => q.clone(),
        FieldKind::Inverted(inner) => (**inner).clone(),
        _ => DistortionField { kind: FieldKind::Inverted(Box::new(q.clone())), dim: q.dim, domain: Domain::Whole },
    }
}

/// Spherical means `q_{x₀}(r)` as a function of `r`.
#[derive(Clone)]
pub struct MeanProfile {
    center: Vec<f64>,
    radii: Vec<f64>,
    values: Vec<f64>,
    source: ProfileSource,
}

#[derive(Clone)]
enum ProfileSource {
    Exact(RadialFn),
    Field { field: DistortionField, tol: f64 },
    Samples,
}

impl fmt::Debug for MeanProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let src = match &self.source {
            ProfileSource::Exact(_) => "exact",
            ProfileSource::Field { .. } => "cubature",
            ProfileSource::Samples => "samples",
        };
        f.debug_struct("MeanProfile")
            .field("center", &self.center)
            .field("radii", &self.radii)
            .field("values", &self.values)
            .field("source", &src)
            .finish()
    }
}

impl MeanProfile {
    /// A profile given in closed form.
    pub fn exact<F>(center: Vec<f64>, q: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        MeanProfile { center, radii: Vec::new(), values: Vec::new(), source: ProfileSource::Exact(Arc::new(q)) }
    }

    /// A profile known only at `radii`, interpolated linearly in `ln r`.
    pub fn from_samples(center: Vec<f64>, radii: Vec<f64>, values: Vec<f64>) -> Result<Self, FieldError> {
        if radii.is_empty() || radii.len() != values.len() || radii[0] <= 0.0 || radii.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(FieldError::Radii);
        }
        if values.iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(FieldError::Grid("profile values must be non-negative".into()));
        }
        Ok(MeanProfile { center, radii, values, source: ProfileSource::Samples })
    }

    /// Means of `field` about `center`, computed on demand.
    pub fn of_field(field: &DistortionField, center: &[f64], tol: f64) -> Result<Self, FieldError> {
        if center.len() != field.dim() {
            return Err(FieldError::Dimension { field: field.dim(), other: center.len() });
        }
        let source = match field.radial_profile_about(center) {
            Some(p) => ProfileSource::Exact(p),
            None => ProfileSource::Field { field: field.clone(), tol },
        };
        Ok(MeanProfile { center: center.to_vec(), radii: Vec::new(), values: Vec::new(), source })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }
    pub fn radii(&self) -> &[f64] {
        &self.radii
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn is_exact(&self) -> bool {
        matches!(self.source, ProfileSource::Exact(_))
    }

    pub fn value_at(&self, r: f64) -> Result<f64, FieldError> {
        match &self.source {
            ProfileSource::Exact(q) => Ok(q(r)),
            ProfileSource::Field { field, tol } => field.sphere_mean(&self.center, r, *tol),
            ProfileSource::Samples => {
                let (rs, vs) = (&self.radii, &self.values);
                let slack = 1e-12 * r;
                if r < rs[0] - slack || r > rs[rs.len() - 1] + slack {
                    return Err(FieldError::ProfileGap(r));
                }
                let i = rs.partition_point(|x| *x < r);
                if i == 0 {
                    return Ok(vs[0]);
                }
                if i == rs.len() {
                    return Ok(vs[rs.len() - 1]);
                }
                let w = (r.ln() - rs[i - 1].ln()) / (rs[i].ln() - rs[i - 1].ln());
                Ok(vs[i - 1] + w * (vs[i] - vs[i - 1]))
            }
        }
    }
}

/// Samples `q_{x₀}(r)` on `radii`.
pub fn spherical_mean_profile(
    q: &DistortionField,
    x0: &Point,
    radii: &[f64],
    tol: f64,
) -> Result<MeanProfile, FieldError> {
    let center = x0.coords().ok_or(FieldError::Unsupported("profile center must be finite".into()))?;
    if radii.is_empty() || radii[0] <= 0.0 || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FieldError::Radii);
    }
    let mut profile = MeanProfile::of_field(q, center, tol)?;
    let values = radii.iter().map(|r| q.sphere_mean(center, *r, tol)).collect::<Result<Vec<_>, _>>()?;
    profile.radii = radii.to_vec();
    profile.values = values;
    Ok(profile)
}

fn tracked<'a, F>(f: F, failure: &'a Cell<Option<FieldError>>) -> impl Fn(f64) -> f64 + 'a
where
    F: Fn(f64) -> Result<f64, FieldError> + 'a,
{
    move |r| match f(r) {
        Ok(v) => v,
        Err(e) => {
            let first = failure.take().unwrap_or(e);
            failure.set(Some(first));
            f64::NAN
        }
    }
}

fn divergent_or(e: QuadError) -> FieldError {
    match e {
        QuadError::NonFinite { value, .. } if value == f64::INFINITY => FieldError::Divergent { partial: f64::INFINITY },
        QuadError::NoConvergence { estimate, .. } => FieldError::Divergent { partial: estimate },
        e => FieldError::Quad(e),
    }
}

/// Mean of `Φ∘Q` over the ring `{ε < |x − x₀| < 1}`.
pub fn ring_mean(
    q: &DistortionField,
    phi: &Gauge,
    eps: f64,
    center: &[f64],
    cfg: &QuadConfig,
) -> Result<f64, FieldError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(FieldError::Epsilon(eps));
    }
    let n = q.dim() as i32;
    let failure = Cell::new(None);
    let g = tracked(|r| Ok(q.sphere_mean_of(|v| phi.eval(v), center, r, cfg.rel_tol * 1e-1)? * r.powi(n)), &failure);
    let res = integrate_dr_over_r(g, eps, 1.0, cfg);
    if let Some(e) = failure.take() {
        return Err(e);
    }
    let total = res.map_err(divergent_or)?.value;
    Ok(n as f64 * total / (1.0 - eps.powi(n)))
}

/// Region of integration for [`class_membership_integral`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Region {
    Ball { center: Vec<f64>, radius: f64 },
    WholeSpace,
}

/// `∫ Φ(Q(x)) w(x) dm(x)` over `region`, with `w = (1+|x|²)^{-n}` when
/// `weighted` and `w = 1` otherwise.
pub fn class_membership_integral(
    phi: &Gauge,
    q: &DistortionField,
    weighted: bool,
    region: &Region,
    cfg: &QuadConfig,
) -> Result<f64, FieldError> {
    let n = q.dim();
    let consts = DimensionConstants::new(n)?;
    let (center, radius) = match region {
        Region::Ball { center, radius } => (center.clone(), *radius),
        Region::WholeSpace => (vec![0.0; n], f64::INFINITY),
    };
    if center.len() != n {
        return Err(FieldError::Dimension { field: n, other: center.len() });
    }
    let at_origin = center.iter().all(|v| *v == 0.0);
    let radial = q.radial_profile_about(&center);
    let tol = cfg.rel_tol * 1e-1;
    // mean of Φ(Q) w over the sphere of radius r about the center
    let shell = |r: f64| -> Result<f64, FieldError> {
        if let (Some(p), true) = (&radial, at_origin || !weighted) {
            let w = if weighted { (1.0 + r * r).powi(-(n as i32)) } else { 1.0 };
            let v = phi.eval(p(r));
            return Ok(if w == 0.0 { 0.0 } else { v * w });
        }
        if !q.sphere_inside(&center, r) {
            return Err(FieldError::OutsideDomain { center: center.clone(), radius: r });
        }
        if n > 3 {
            return Err(FieldError::Sphere(SphereError::Unsupported(n)));
        }
        let g = |x: &[f64]| {
            let w = if weighted { (1.0 + x.iter().map(|v| v * v).sum::<f64>()).powi(-(n as i32)) } else { 1.0 };
            phi.eval(q.value(x)) * w
        };
        Ok(sphere_mean(g, &center, r, n, tol)?)
    };
    let failure = Cell::new(None);
    let inner_r = radius.min(1.0);
    let f = tracked(|r| Ok(shell(r)? * r.powi(n as i32 - 1)), &failure);
    let mut total = integrate(&f, 0.0, inner_r, cfg).map_err(divergent_or);
    if let Some(e) = failure.take() {
        return Err(e);
    }
    if radius > 1.0 {
        // r = 1/u maps (1, R) to (1/R, 1)
        let u_lo = 1.0 / radius;
        let h = tracked(|u| Ok(shell(1.0 / u)? * u.powi(-(n as i32) - 1)), &failure);
        let outer = integrate(&h, u_lo, 1.0, cfg).map_err(divergent_or);
        if let Some(e) = failure.take() {
            return Err(e);
        }
        total = match (total, outer) {
            (Ok(a), Ok(b)) => Ok(Quadrature {
                value: a.value + b.value,
                error: a.error + b.error,
                intervals: a.intervals + b.intervals,
            }),
            (Err(FieldError::Divergent { partial: a }), Ok(b)) => Err(FieldError::Divergent { partial: a + b.value }),
            (Ok(a), Err(FieldError::Divergent { partial: b })) => Err(FieldError::Divergent { partial: a.value + b }),
            (Err(e), _) | (_, Err(e)) => Err(e),
        };
    }
    let total = total?.value;
    let value = consts.sphere_area * total;
    if !value.is_finite() {
        return Err(FieldError::Divergent { partial: value });
    }
    Ok(value)
}

/// Converts a weighted mass bound to an unweighted one on a domain inside
/// `{|x| ≤ δ*}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MassConversion {
    /// `M (1 + δ*²)^n`
    pub consistent: f64,
    /// `M (1 + δ*²)`
    pub single_factor: f64,
    pub factor: f64,
}

pub fn mass_conversion(m: f64, delta_star: f64, dim: usize) -> MassConversion {
    let base = 1.0 + delta_star * delta_star;
    let factor = base.powi(dim as i32);
    MassConversion { consistent: m * factor, single_factor: m * base, factor }
}

/// Configuration form of a field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Constant {
        c: f64,
    },
    Radial {
        profile: String,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    Analytic {
        expr: String,
    },
    Grid {
        file: String,
    },
}

impl FieldSpec {
    /// Builds the field; grid files are resolved against `base`.
    pub fn build(&self, dim: usize, base: &Path) -> Result<DistortionField, FieldError> {
        match self {
            FieldSpec::Constant { c } => DistortionField::constant(*c, dim),
            FieldSpec::Radial { profile, center } => {
                let center = center.clone().unwrap_or_else(|| vec![0.0; dim]);
                if center.len() != dim {
                    return Err(FieldError::Dimension { field: dim, other: center.len() });
                }
                DistortionField::radial_expr(profile, center)
            }
            FieldSpec::Analytic { expr } => DistortionField::analytic_expr(expr, dim),
            FieldSpec::Grid { file } => {
                let path = base.join(file);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| FieldError::Grid(format!("cannot read {}: {e}", path.display())))?;
                let data = GridData::from_csv(&text, dim)?;
                Ok(DistortionField::grid(data))
            }
        }
    }
}
