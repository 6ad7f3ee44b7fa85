use std::fmt::Write as _;

use anyhow::{bail, Context as _, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use qcmean::bounds::{
    at_infinity_bound, distortion_bound_basic, equicontinuity_bound, gauge_lift, verify_lemma31, BoundParams,
    BoundValue, Tolerances,
};
use qcmean::divergence::{DivergenceKind, GrowthPolicy};
use qcmean::extremal::{normalize_gauge, ExtremalError, Membership, MassReport, ProfileRow, WitnessRow};
use qcmean::field::{class_membership_integral, invert_field, DistortionField, MeanProfile, Region};
use qcmean::gauge::{
    classify_condition_with, default_lower, inverse_of_eval_bound, slope_is_nondecreasing, ClassifyOptions,
    ConditionId, Gauge,
};
use qcmean::geometry::{distance as euclid, invert, Point};
use qcmean::report::csv_float;

use crate::config::{check_grid, Loaded};
use crate::output::{comment_lines, sha256_hex, svg, to_json, Meta};
use crate::{Command, Context, Format};

pub struct Outcome {
    pub text: String,
    /// Set when a numerical step failed; the report is still written.
    pub failure: Option<String>,
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    #[serde(flatten)]
    meta: &'a Meta<'a>,
    status: &'static str,
    inputs: serde_json::Value,
    result: T,
}

fn kind_name(k: DivergenceKind) -> String {
    serde_json::to_value(k).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

fn tolerances(ctx: &Context) -> (Tolerances, serde_json::Value) {
    let tol = Tolerances { quad: ctx.quad, ..Tolerances::default() };
    let json = serde_json::json!({
        "quad": tol.quad,
        "verdict": tol.verdict,
        "sphere": tol.sphere,
        "growth_policy": GrowthPolicy::default(),
    });
    (tol, json)
}

fn no_svg(ctx: &Context) -> Result<()> {
    if ctx.format == Format::Svg {
        bail!("--format svg is only available for `extremal`");
    }
    Ok(())
}

pub fn run(loaded: &Loaded, ctx: &Context) -> Result<Outcome> {
    let (tol, tol_json) = tolerances(ctx);
    let meta = Meta {
        tool: "qcmean",
        version: env!("CARGO_PKG_VERSION"),
        command: ctx.command.name(),
        config_sha256: sha256_hex(&loaded.bytes),
        seed: ctx.seed,
        tolerances: &tol_json,
    };
    match ctx.command {
        Command::GaugeCheck => gauge_check(loaded, ctx, &meta, &tol),
        Command::Bound => bound(loaded, ctx, &meta, &tol),
        Command::Lemma31 => lemma31(loaded, ctx, &meta, &tol),
        Command::Extremal => extremal(loaded, ctx, &meta),
    }
}

fn finish<T: Serialize>(
    meta: &Meta,
    inputs: serde_json::Value,
    result: T,
    failure: Option<String>,
    ctx: &Context,
    csv: impl FnOnce(&T) -> String,
) -> Result<Outcome> {
    let status = if failure.is_some() { "partial" } else { "ok" };
    let text = match ctx.format {
        Format::Json => to_json(&Report { meta, status, inputs, result })?,
        Format::Csv => {
            let mut s = comment_lines(meta, "# ", "");
            let _ = writeln!(s, "# status={status}");
            s.push_str(&csv(&result));
            s
        }
        Format::Svg => unreachable!("svg handled by the extremal command"),
    };
    Ok(Outcome { text, failure })
}

#[derive(Serialize)]
struct ConditionRow {
    p: f64,
    condition: &'static str,
    formula: &'static str,
    delta: f64,
    verdict: Option<String>,
    method: Option<String>,
    error: Option<String>,
}

#[derive(Serialize)]
struct Certificates {
    samples: usize,
    inverse_bound_holds: bool,
    inverse_monotone: bool,
    slope_nondecreasing: Option<bool>,
}

#[derive(Serialize)]
struct GaugeCheck {
    rows: Vec<ConditionRow>,
    /// equivalent conditions agree at each `p` (inconclusive rows ignored)
    consistent: Vec<(f64, bool)>,
    /// `equicontinuous`, `not_equicontinuous` or `undetermined`
    overall: String,
    certificates: Certificates,
}

fn gauge_check(loaded: &Loaded, ctx: &Context, meta: &Meta, tol: &Tolerances) -> Result<Outcome> {
    no_svg(ctx)?;
    let g = &loaded.config.gauge;
    let n = loaded.config.dim;
    if g.eval(0.0) == g.eval(1e12) {
        bail!("the gauge Φ cannot be constant");
    }
    let mut ps = vec![1.0];
    if n > 2 {
        ps.push(n as f64 - 1.0);
    }
    let mut tasks: Vec<(f64, ConditionId)> = Vec::new();
    for &p in &ps {
        for c in ConditionId::EQUIVALENT {
            tasks.push((p, c));
        }
        tasks.push((p, ConditionId::InvRoot));
    }
    let top = n as f64 - 1.0;
    tasks.push((top, ConditionId::LogGaugeNPrime));
    let opts = ClassifyOptions { policy: GrowthPolicy::default(), quad: tol.quad, closed_form: true };
    let rows: Vec<ConditionRow> = tasks
        .par_iter()
        .map(|&(p, c)| {
            let delta = default_lower(g, p, c);
            let (verdict, method, error) = match classify_condition_with(g, p, c, delta, &opts) {
                Ok(v) => (
                    Some(kind_name(v.kind)),
                    serde_json::to_value(v.method).ok().and_then(|m| m.as_str().map(str::to_string)),
                    None,
                ),
                Err(e) => (None, None, Some(e.to_string())),
            };
            ConditionRow { p, condition: c.name(), formula: c.formula(), delta, verdict, method, error }
        })
        .collect();

    let consistent = ps
        .iter()
        .map(|&p| {
            let mut seen: Vec<&str> = rows
                .iter()
                .filter(|r| r.p == p && ConditionId::EQUIVALENT.iter().any(|c| c.name() == r.condition))
                .filter_map(|r| r.verdict.as_deref())
                .filter(|v| *v != kind_name(DivergenceKind::Inconclusive))
                .collect();
            seen.dedup();
            (p, seen.len() <= 1)
        })
        .collect();
    let key = rows.iter().find(|r| r.p == top && r.condition == ConditionId::InvRoot.name());
    let (overall, failure) = match key.and_then(|r| r.verdict.clone()) {
        Some(v) if v == kind_name(DivergenceKind::Diverges) => ("equicontinuous".to_string(), None),
        Some(v) if v == kind_name(DivergenceKind::Converges) => ("not_equicontinuous".to_string(), None),
        Some(_) => ("undetermined".to_string(), None),
        None => (
            "undetermined".to_string(),
            Some(key.and_then(|r| r.error.clone()).unwrap_or_else(|| "no verdict".into())),
        ),
    };

    let samples = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut ts: Vec<f64> = (0..samples).map(|_| 10f64.powf(rng.random_range(-3.0..3.0))).collect();
    let inverse_bound_holds = ts.iter().all(|&t| inverse_of_eval_bound(g, t).ok);
    ts.sort_by(f64::total_cmp);
    let inverse_monotone = ts.windows(2).all(|w| g.inverse(g.eval(w[0])) <= g.inverse(g.eval(w[1])));
    let slope_nondecreasing = slope_is_nondecreasing(g, &ts).ok();
    let result = GaugeCheck {
        rows,
        consistent,
        overall,
        certificates: Certificates { samples, inverse_bound_holds, inverse_monotone, slope_nondecreasing },
    };
    let inputs = serde_json::json!({ "dim": n, "gauge": g });
    finish(meta, inputs, result, failure, ctx, |r| {
        let mut s = String::from("p,condition,delta,verdict,method,error\n");
        for row in &r.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                csv_float(row.p),
                row.condition,
                csv_float(row.delta),
                row.verdict.as_deref().unwrap_or(""),
                row.method.as_deref().unwrap_or(""),
                row.error.as_deref().unwrap_or("").replace(',', ";"),
            );
        }
        let _ = writeln!(s, "# overall={}", r.overall);
        s
    })
}

#[derive(Serialize)]
struct BoundRow {
    x: Vec<f64>,
    /// `|x − x₀|`, or `1/|x|` about `∞`
    distance: f64,
    bound: Option<BoundValue>,
    basic: Option<BoundValue>,
    error: Option<String>,
}

#[derive(Serialize)]
struct BoundTable {
    rows: Vec<BoundRow>,
    /// bound non-decreasing in the distance
    monotone: bool,
    lift: Option<serde_json::Value>,
}

fn weighted_volume(dim: usize, quad: &qcmean::quad::QuadConfig) -> Result<f64> {
    let one = DistortionField::constant(1.0, dim)?;
    Ok(class_membership_integral(&Gauge::constant(1.0)?, &one, true, &Region::WholeSpace, quad)?)
}

fn bound(loaded: &Loaded, ctx: &Context, meta: &Meta, tol: &Tolerances) -> Result<Outcome> {
    no_svg(ctx)?;
    let cfg = &loaded.config;
    let n = cfg.dim;
    if cfg.sweep.x.is_empty() {
        bail!("sweep.x is empty");
    }
    if let Some(x) = cfg.sweep.x.iter().find(|x| x.len() != n) {
        bail!("sweep.x entry {x:?} does not have {n} coordinates");
    }
    let params = &cfg.params;
    let delta = loaded.required("delta", params.delta)?;
    let mut mass = loaded.required("mass", params.mass)?;
    let alpha_n = ctx.alpha_n.unwrap_or(params.alpha_n);
    let x0 = loaded.x0()?;
    let mut phi = cfg.gauge.clone();
    let mut lift = None;
    if phi.tau0() == 0.0 {
        let d0 = params.lift.context("Φ(0) = 0: set params.lift to use Φ + δ₀")?;
        let l = gauge_lift(&phi, mass, d0, weighted_volume(n, &tol.quad)?)?;
        phi = l.lifted.clone();
        mass = l.mass;
        lift = Some(serde_json::to_value(&l)?);
    }
    let bp = BoundParams::new(n, delta, mass, alpha_n, params.rho, x0.clone())?;
    let points: Vec<Point> = cfg.sweep.x.iter().map(|x| Point::new(x.clone())).collect::<Result<_, _>>()?;
    let distance = |p: &Point| match (&x0, p.coords()) {
        (Point::Infinity, _) => 1.0 / p.norm(),
        (Point::Finite(c), Some(x)) => euclid(x, c),
        _ => f64::NAN,
    };
    if let Some(p) = points.iter().find(|p| !(distance(p) < params.rho / 2.0)) {
        bail!("sweep.x point {:?} is not within ρ/2 = {} of x0", p.coords().unwrap_or(&[]), params.rho / 2.0);
    }
    let field = match &cfg.field {
        Some(_) => Some(loaded.field()?),
        None => None,
    };
    let profile = match (&field, &x0) {
        (Some(f), Point::Finite(c)) => Some(MeanProfile::of_field(f, c, tol.sphere)?),
        (Some(f), Point::Infinity) => Some(MeanProfile::of_field(&invert_field(f), &vec![0.0; n], tol.sphere)?),
        (None, _) => None,
    };
    let at_origin = BoundParams { x0: Point::origin(n), ..bp.clone() };
    let rows: Vec<BoundRow> = points
        .par_iter()
        .map(|p| {
            let main = if x0.is_infinity() {
                at_infinity_bound(&bp, &phi, p, &tol.quad)
            } else {
                equicontinuity_bound(&bp, &phi, p, &tol.quad)
            };
            let basic = profile.as_ref().map(|prof| {
                if x0.is_infinity() {
                    distortion_bound_basic(&at_origin, prof, &invert(p, n), &tol.quad)
                } else {
                    distortion_bound_basic(&bp, prof, p, &tol.quad)
                }
            });
            let mut errors = Vec::new();
            let bound = main.map_err(|e| errors.push(format!("bound: {e}"))).ok();
            let basic = match basic {
                Some(Ok(v)) => Some(v),
                Some(Err(e)) => {
                    errors.push(format!("basic: {e}"));
                    None
                }
                None => None,
            };
            BoundRow {
                x: p.coords().unwrap_or(&[]).to_vec(),
                distance: distance(p),
                bound,
                basic,
                error: if errors.is_empty() { None } else { Some(errors.join("; ")) },
            }
        })
        .collect();
    let mut order: Vec<&BoundRow> = rows.iter().filter(|r| r.bound.is_some()).collect();
    order.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    let monotone = order.windows(2).all(|w| w[0].bound.unwrap().raw <= w[1].bound.unwrap().raw);
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    let failure = (failed > 0).then(|| format!("{failed} of {} rows failed", rows.len()));
    let inputs = serde_json::json!({
        "dim": n, "gauge": cfg.gauge, "field": cfg.field, "delta": delta, "mass": params.mass,
        "alpha_n": alpha_n, "rho": params.rho, "x0": x0, "lambda_n": bp.lambda_n(), "beta_n": bp.beta_n(),
    });
    let result = BoundTable { rows, monotone, lift };
    finish(meta, inputs, result, failure, ctx, |t| {
        let mut s = String::from("x,distance,bound_raw,bound,basic_raw,basic,error\n");
        for r in &t.rows {
            let x: Vec<String> = r.x.iter().map(|v| csv_float(*v)).collect();
            let opt = |b: &Option<BoundValue>| match b {
                Some(b) => (csv_float(b.raw), csv_float(b.clamped)),
                None => (String::new(), String::new()),
            };
            let (br, bc) = opt(&r.bound);
            let (sr, sc) = opt(&r.basic);
            let err = r.error.as_deref().unwrap_or("").replace(',', ";");
            let _ = writeln!(s, "{},{},{br},{bc},{sr},{sc},{err}", x.join(";"), csv_float(r.distance));
        }
        s
    })
}

#[derive(Serialize)]
struct LemmaRow {
    epsilon: f64,
    #[serde(serialize_with = "qcmean::report::extended_opt")]
    lhs: Option<f64>,
    #[serde(serialize_with = "qcmean::report::extended_opt")]
    rhs: Option<f64>,
    verdict: Option<bool>,
    /// the inequality failed or could not be evaluated
    flagged: bool,
    #[serde(serialize_with = "qcmean::report::extended_opt")]
    lhs_unit_floor: Option<f64>,
    #[serde(serialize_with = "qcmean::report::extended_opt")]
    ring_mean: Option<f64>,
    error: Option<String>,
}

fn lemma31(loaded: &Loaded, ctx: &Context, meta: &Meta, tol: &Tolerances) -> Result<Outcome> {
    no_svg(ctx)?;
    let cfg = &loaded.config;
    let eps = &cfg.sweep.epsilon;
    check_grid("epsilon", eps)?;
    if let Some(e) = eps.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
        bail!("sweep.epsilon value {e} is outside (0, 1)");
    }
    let field = loaded.field()?;
    let x0 = loaded.x0()?;
    if x0.is_infinity() {
        bail!("lemma31 needs a finite params.x0");
    }
    let (p, lambda) = (cfg.params.p, cfg.params.lambda);
    let rows: Vec<LemmaRow> = eps
        .par_iter()
        .map(|&e| match verify_lemma31(&cfg.gauge, &field, &x0, p, e, lambda, tol) {
            Ok(r) => LemmaRow {
                epsilon: e,
                lhs: Some(r.lhs),
                rhs: Some(r.rhs),
                verdict: Some(r.verdict),
                flagged: !r.verdict,
                lhs_unit_floor: r.details["lhs_unit_floor"].as_f64(),
                ring_mean: r.details["ring_mean"].as_f64(),
                error: None,
            },
            Err(err) => LemmaRow {
                epsilon: e,
                lhs: None,
                rhs: None,
                verdict: None,
                flagged: true,
                lhs_unit_floor: None,
                ring_mean: None,
                error: Some(err.to_string()),
            },
        })
        .collect();
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    let failure = (failed > 0).then(|| format!("{failed} of {} rows failed", rows.len()));
    let inputs = serde_json::json!({
        "dim": cfg.dim, "gauge": cfg.gauge, "field": cfg.field, "p": p, "lambda": lambda, "x0": x0,
    });
    finish(meta, inputs, rows, failure, ctx, |rows| {
        let mut s = String::from("epsilon,lhs,rhs,verdict");
        if lambda.is_some() {
            s.push_str(",lhs_unit_floor");
        }
        s.push('\n');
        let f = |v: Option<f64>| v.map(csv_float).unwrap_or_default();
        for r in rows {
            let verdict = match r.verdict {
                Some(v) => v.to_string(),
                None => "error".into(),
            };
            let _ = write!(s, "{},{},{},{verdict}", csv_float(r.epsilon), f(r.lhs), f(r.rhs));
            if lambda.is_some() {
                let _ = write!(s, ",{}", f(r.lhs_unit_floor));
            }
            s.push('\n');
        }
        s
    })
}

#[derive(Serialize)]
struct MassRow {
    m: Option<usize>,
    #[serde(flatten)]
    report: MassReport,
    ok: bool,
}

#[derive(Serialize, Default)]
struct ExtremalResult {
    setup: Option<serde_json::Value>,
    i0: Option<f64>,
    profile_m: usize,
    profile: Vec<ProfileRow>,
    mass: Vec<MassRow>,
    witness: Vec<WitnessRow>,
    /// `(δ, m)` pairs left out because `m δ < 1`
    witness_skipped: Vec<(f64, usize)>,
    membership: Option<Membership>,
    error: Option<String>,
}

fn extremal(loaded: &Loaded, ctx: &Context, meta: &Meta) -> Result<Outcome> {
    let cfg = &loaded.config;
    let opts = &cfg.extremal;
    let n = cfg.dim;
    if opts.profile_points < 2 || !(opts.r_min > 0.0 && opts.r_min < 0.5) {
        bail!("extremal.profile_points must be ≥ 2 and extremal.r_min in (0, 1/2)");
    }
    if opts.profile_m == 0 {
        bail!("extremal.profile_m must be ≥ 1");
    }
    let ms: Vec<usize> = if cfg.sweep.m.is_empty() { (0..=10).map(|k| 1usize << k).collect() } else { cfg.sweep.m.clone() };
    if ms.contains(&0) || ms.windows(2).any(|w| w[0] >= w[1]) {
        bail!("sweep.m must hold increasing positive integers");
    }
    let deltas = if cfg.sweep.delta.is_empty() { vec![1.0 / 64.0, 0.125, 0.5] } else { cfg.sweep.delta.clone() };
    check_grid("delta", &deltas)?;
    if let Some(d) = deltas.iter().find(|d| !(**d > 0.0 && **d < 1.0)) {
        bail!("sweep.delta value {d} is outside (0, 1)");
    }
    let setup = normalize_gauge(&cfg.gauge, n, opts.growth).map_err(|e| match e {
        ExtremalError::Growth { .. } | ExtremalError::GrowthDecreasing { .. } => {
            anyhow::anyhow!("growth condition Φ(t) ≥ C t^(1/(n-1)) fails: {e}")
        }
        e => anyhow::anyhow!(e),
    })?;
    let inputs = serde_json::json!({ "dim": n, "gauge": cfg.gauge, "extremal": opts, "m": ms, "delta": deltas });
    let mut result = ExtremalResult {
        setup: Some(serde_json::to_value(&setup)?),
        profile_m: opts.profile_m,
        ..ExtremalResult::default()
    };
    let m0 = opts.profile_m;
    let radii: Vec<f64> = (0..opts.profile_points)
        .map(|k| opts.r_min.powf(1.0 - k as f64 / (opts.profile_points - 1) as f64))
        .collect();

    let computed = (|| -> Result<(), ExtremalError> {
        let profile = setup.solve_profile(&radii)?;
        result.i0 = Some(profile.i0);
        result.profile = radii.par_iter().map(|&r| profile.row(r, m0)).collect::<Result<_, _>>()?;
        let mut tasks: Vec<Option<usize>> = vec![None];
        tasks.extend(ms.iter().map(|&m| Some(m)));
        result.mass = tasks
            .par_iter()
            .map(|&m| {
                let report = profile.gauge_mass(m)?;
                Ok(MassRow { m, report, ok: report.mass <= report.bound * (1.0 + 1e-9) + 1e-7 })
            })
            .collect::<Result<_, ExtremalError>>()?;
        for &d in &deltas {
            let (ok, skipped): (Vec<usize>, Vec<usize>) = ms.iter().partition(|&&m| m as f64 * d >= 1.0);
            result.witness.extend(profile.nonequicontinuity_witness(d, &ok)?);
            result.witness_skipped.extend(skipped.into_iter().map(|m| (d, m)));
        }
        result.membership = Some(profile.membership_check(m0)?);
        Ok(())
    })();
    let failure = computed.err().map(|e| e.to_string());
    result.error = failure.clone();

    if ctx.format == Format::Svg {
        let text = match (&failure, result.i0) {
            (None, Some(i0)) => {
                let profile = setup.solve_profile(&[1.0]).map_err(anyhow::Error::from)?;
                let lines = profile.image_curves(Some(m0), &opts.circles, opts.rays, opts.plot_samples)?;
                svg(meta, &lines, 1.05 * i0.exp(), &format!("images of circles and radii under f_{m0}"))
            }
            _ => svg(meta, &[], 1.0, "extremal construction failed"),
        };
        return Ok(Outcome { text, failure });
    }
    finish(meta, inputs, result, failure, ctx, |r| {
        let mut s = String::from("r,K,K_m,I,R,R_m\n");
        for row in &r.profile {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                csv_float(row.r),
                csv_float(row.k),
                csv_float(row.k_m),
                csv_float(row.i),
                csv_float(row.big_r),
                csv_float(row.big_r_m)
            );
        }
        s
    })
}
