use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use qcmean::field::{DistortionField, FieldSpec};
use qcmean::gauge::Gauge;
use qcmean::geometry::Point;

/// The JSON document passed with `--config`.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dim: usize,
    pub gauge: Gauge,
    #[serde(default)]
    pub field: Option<FieldSpec>,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default)]
    pub extremal: ExtremalOptions,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// lower bound on the chordal diameter of the omitted set
    pub delta: Option<f64>,
    /// mass bound `M`
    pub mass: Option<f64>,
    #[serde(default = "one")]
    pub alpha_n: f64,
    #[serde(default = "one")]
    pub p: f64,
    pub lambda: Option<f64>,
    #[serde(default = "one")]
    pub rho: f64,
    /// `[x1, …, xn]` or `"inf"`
    #[serde(default)]
    pub x0: Option<serde_json::Value>,
    /// `δ₀` for `Φ + δ₀` when `Φ(0) = 0`
    pub lift: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl Default for Params {
    fn default() -> Self {
        Params { delta: None, mass: None, alpha_n: 1.0, p: 1.0, lambda: None, rho: 1.0, x0: None, lift: None }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(default)]
    pub epsilon: Vec<f64>,
    #[serde(default)]
    pub x: Vec<Vec<f64>>,
    #[serde(default)]
    pub m: Vec<usize>,
    /// witness radii
    #[serde(default)]
    pub delta: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExtremalOptions {
    /// growth constants `(C, T)`; fitted when absent
    pub growth: Option<(f64, f64)>,
    #[serde(default = "default_points")]
    pub profile_points: usize,
    #[serde(default = "default_r_min")]
    pub r_min: f64,
    /// truncation used for the profile table and the plot
    #[serde(default = "default_profile_m")]
    pub profile_m: usize,
    #[serde(default = "default_circles")]
    pub circles: Vec<f64>,
    #[serde(default = "default_rays")]
    pub rays: usize,
    #[serde(default = "default_samples")]
    pub plot_samples: usize,
}

fn default_points() -> usize {
    200
}
fn default_r_min() -> f64 {
    1e-6
}
fn default_profile_m() -> usize {
    10
}
fn default_circles() -> Vec<f64> {
    vec![0.05, 0.1, 0.25, 0.5, 0.75, 1.0]
}
fn default_rays() -> usize {
    12
}
fn default_samples() -> usize {
    128
}

impl Default for ExtremalOptions {
    fn default() -> Self {
        ExtremalOptions {
            growth: None,
            profile_points: default_points(),
            r_min: default_r_min(),
            profile_m: default_profile_m(),
            circles: default_circles(),
            rays: default_rays(),
            plot_samples: default_samples(),
        }
    }
}

/// A parsed config plus the raw bytes it came from.
pub struct Loaded {
    pub config: RunConfig,
    pub bytes: Vec<u8>,
    pub base: PathBuf,
}

pub fn load(path: &Path) -> Result<Loaded> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read config {}", path.display()))?;
    let config: RunConfig = serde_json::from_slice(&bytes).map_err(|e| {
        anyhow::anyhow!("{}: line {}, column {}: {e}", path.display(), e.line(), e.column())
    })?;
    if config.dim < 2 {
        bail!("dim must be at least 2, got {}", config.dim);
    }
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { config, bytes, base })
}

impl Loaded {
    pub fn field(&self) -> Result<DistortionField> {
        let spec = self.config.field.as_ref().context("config has no `field`")?;
        Ok(spec.build(self.config.dim, &self.base)?)
    }

    pub fn x0(&self) -> Result<Point> {
        let dim = self.config.dim;
        match &self.config.params.x0 {
            None => Ok(Point::origin(dim)),
            Some(serde_json::Value::String(s)) if s == "inf" || s == "infinity" => Ok(Point::Infinity),
            Some(v) => {
                let c: Vec<f64> = serde_json::from_value(v.clone())
                    .with_context(|| format!("params.x0 must be a coordinate list or \"inf\", got {v}"))?;
                if c.len() != dim {
                    bail!("params.x0 has {} coordinates, expected {dim}", c.len());
                }
                Ok(Point::new(c)?)
            }
        }
    }

    pub fn required(&self, name: &str, v: Option<f64>) -> Result<f64> {
        v.with_context(|| format!("params.{name} is required for this command"))
    }
}

/// Grids must be non-empty and strictly increasing.
pub fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        bail!("sweep.{name} is empty");
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        bail!("sweep.{name} must be sorted in increasing order");
    }
    Ok(())
}
