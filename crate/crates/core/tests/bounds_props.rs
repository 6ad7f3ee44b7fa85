use std::f64::consts::{E, PI};

use approx::assert_relative_eq;
use qcmean::bounds::{
    at_infinity_bound, distortion_bound_basic, equicontinuity_bound, lemma31_rhs, theorem31_divergence,
    verify_lemma31, BoundParams, BoundsError, DivergenceVariant, Tolerances,
};
use qcmean::divergence::{DivergenceKind, GrowthPolicy};
use qcmean::field::{DistortionField, MeanProfile};
use qcmean::gauge::Gauge;
use qcmean::geometry::Point;
use qcmean::quad::QuadConfig;

fn cfg() -> QuadConfig {
    QuadConfig::default()
}

#[test]
fn divergence_of_the_radial_integral() {
    let tol = Tolerances::default();
    let policy = GrowthPolicy::default();
    let exp = Gauge::exp(1.0, 1.0).unwrap();
    let one = DistortionField::constant(1.0, 2).unwrap();
    let o = Point::origin(2);
    let r = theorem31_divergence(&exp, &one, &o, 1.0, DivergenceVariant::Plain, &policy, &tol).unwrap();
    assert_eq!(r.verdict.kind, DivergenceKind::Diverges);
    assert_eq!(r.numeric, DivergenceKind::Diverges);
    assert_relative_eq!(r.mass, PI * E, max_relative = 1e-9);
    // ∫_ε^1 dr/r = ln(1/ε)
    let (eps, v) = r.schedule[19];
    assert_relative_eq!(v, (1.0 / eps).ln(), max_relative = 1e-10);

    for variant in [DivergenceVariant::Lambda { lambda: 0.5 }, DivergenceVariant::AlphaBeta { alpha: 2.0, beta: 1.0 }] {
        let r = theorem31_divergence(&exp, &one, &o, 1.0, variant, &policy, &tol).unwrap();
        assert_eq!(r.numeric, DivergenceKind::Diverges);
    }

    // q = 1/r: ∫_ε^1 dr = 1 − ε stays bounded, Φ = Identity has finite mass 2π
    let inv = DistortionField::radial_expr("1/r", vec![0.0, 0.0]).unwrap();
    let id = Gauge::identity();
    let r = theorem31_divergence(&id, &inv, &o, 1.0, DivergenceVariant::Plain, &policy, &tol).unwrap();
    assert_eq!(r.numeric, DivergenceKind::Converges);
    assert!(r.condition.converges());
    assert_relative_eq!(r.mass, 2.0 * PI, max_relative = 1e-8);
    assert_relative_eq!(r.schedule.last().unwrap().1, 1.0, max_relative = 1e-9);

    let heavy = DistortionField::radial_expr("r^-3", vec![0.0, 0.0]).unwrap();
    let e = theorem31_divergence(&id, &heavy, &o, 1.0, DivergenceVariant::Plain, &policy, &tol).unwrap_err();
    assert!(matches!(e, BoundsError::Hypothesis(_)));
    let bad = DivergenceVariant::AlphaBeta { alpha: 0.5, beta: 0.25 };
    assert!(theorem31_divergence(&exp, &one, &o, 1.0, bad, &policy, &tol).is_err());
}

#[test]
fn ring_mean_inequality_with_unit_floor() {
    let tol = Tolerances::default();
    let g = Gauge::power(1.0, 2.0).unwrap().affine(1.0, 1.0).unwrap();
    let radial = DistortionField::radial_expr("0.5 + r^2", vec![0.0; 3]).unwrap();
    let smooth = DistortionField::analytic_expr("1 + x1^2", 3).unwrap();
    for eps in [0.5, 0.1] {
        let r = verify_lemma31(&g, &radial, &Point::origin(3), 2.0, eps, Some(0.5), &tol).unwrap();
        assert!(r.verdict, "{r:?}");
        assert!(r.lhs > r.details["lhs_unit_floor"].as_f64().unwrap());
        let r = verify_lemma31(&g, &smooth, &Point::origin(3), 2.0, eps, Some(0.5), &tol).unwrap();
        assert!(r.verdict, "{r:?}");
        assert_relative_eq!(r.lhs, r.details["lhs_unit_floor"].as_f64().unwrap(), max_relative = 1e-12);
    }
    let q = smooth;
    assert!(verify_lemma31(&g, &q, &Point::Infinity, 2.0, 0.1, None, &tol).is_err());
    assert!(verify_lemma31(&g, &q, &Point::origin(3), 2.0, 1.0, None, &tol).is_err());
}

#[test]
fn rhs_power_closed_form() {
    // Φ = t^a: (1/n)∫ dτ/τ^{1+1/(ap)} = (ap/n)[(eM)^{-1/(ap)} − (M ε^{-n})^{-1/(ap)}]
    let (a, p, n, m, eps) = (2.0, 0.5, 3usize, 1.5, 0.05f64);
    let g = Gauge::power(1.0, a).unwrap();
    let k = 1.0 / (a * p);
    let want = (a * p / n as f64) * ((E * m).powf(-k) - (m / eps.powi(n as i32)).powf(-k));
    assert_relative_eq!(lemma31_rhs(&g, m, eps, p, n, &cfg()).unwrap(), want, max_relative = 1e-10);
}

fn params(alpha_n: f64) -> BoundParams {
    BoundParams::new(2, 0.9, 1.0, alpha_n, 1.0, Point::origin(2)).unwrap()
}

#[test]
fn exp_gauge_bound_closed_form() {
    // n = 2, Φ⁻¹(τ) = ln τ: the integral is ln ln U − ln ln L, so the bound is
    // (α_n/Δ) (ln L / ln U)^{1/2}
    let g = Gauge::exp(1.0, 1.0).unwrap();
    let p = params(1.0);
    let ln_l = (2.0 * E / PI * 4.0f64).ln();
    // 0.45 puts the upper limit below the lower one; 1e-200 underflows d²
    for d in [0.45f64, 0.3, 1e-3, 1e-40, 1e-200] {
        let x = Point::new(vec![0.6 * d, 0.8 * d]).unwrap();
        let b = equicontinuity_bound(&p, &g, &x, &cfg()).unwrap();
        let ln_u = 2.0 * (1.0 / d).ln();
        assert_relative_eq!(b.raw, (ln_l / ln_u).sqrt() / 0.9, max_relative = 1e-9);
    }
}

#[test]
fn bound_shape() {
    let g = Gauge::exp(1.0, 1.0).unwrap();
    let mut prev = f64::INFINITY;
    for k in 0..50 {
        let d = 0.49 * 10f64.powf(-(k as f64));
        let x = Point::new(vec![0.0, d]).unwrap();
        let b = equicontinuity_bound(&params(1.0), &g, &x, &cfg()).unwrap();
        let b3 = equicontinuity_bound(&params(3.0), &g, &x, &cfg()).unwrap();
        assert!(b.raw < prev);
        assert_eq!(b3.raw, 3.0 * b.raw);
        prev = b.raw;
    }
    let more = BoundParams::new(2, 0.9, 5.0, 1.0, 1.0, Point::origin(2)).unwrap();
    let x = Point::new(vec![1e-6, 0.0]).unwrap();
    assert!(
        equicontinuity_bound(&more, &g, &x, &cfg()).unwrap().raw
            >= equicontinuity_bound(&params(1.0), &g, &x, &cfg()).unwrap().raw
    );
    let far = Point::new(vec![0.5, 0.0]).unwrap();
    assert!(matches!(equicontinuity_bound(&params(1.0), &g, &far, &cfg()), Err(BoundsError::OutsideBall { .. })));
    assert!(matches!(
        equicontinuity_bound(&params(1.0), &Gauge::identity(), &x, &cfg()),
        Err(BoundsError::GaugeLift)
    ));
}

#[test]
fn bound_at_infinity_uses_inversion() {
    let g = Gauge::exp(1.0, 2.0).unwrap();
    let at_inf = BoundParams::new(2, 0.5, 2.0, 1.0, 1.0, Point::Infinity).unwrap();
    let x = Point::new(vec![30.0, 40.0]).unwrap();
    let y = Point::new(vec![30.0 / 2500.0, 40.0 / 2500.0]).unwrap();
    let at_zero = BoundParams::new(2, 0.5, 2.0, 1.0, 1.0, Point::origin(2)).unwrap();
    assert_eq!(
        at_infinity_bound(&at_inf, &g, &x, &cfg()).unwrap(),
        equicontinuity_bound(&at_zero, &g, &y, &cfg()).unwrap()
    );
    let near = Point::new(vec![1.5, 0.0]).unwrap();
    assert!(at_infinity_bound(&at_inf, &g, &near, &cfg()).is_err());
}

#[test]
fn basic_bound_power_law() {
    // q ≡ 4 in n = 3: exp{−∫_d^ε dr/(2r)} = (d/ε)^{1/2}
    let p = BoundParams::new(3, 0.25, 1.0, 2.0, 0.5, Point::origin(3)).unwrap();
    let q = MeanProfile::exact(vec![0.0; 3], |_| 4.0);
    for d in [0.4f64, 0.01, 1e-8] {
        let x = Point::new(vec![0.0, 0.0, d]).unwrap();
        let b = distortion_bound_basic(&p, &q, &x, &cfg()).unwrap();
        assert_relative_eq!(b.raw, 8.0 * (d / 0.5f64).sqrt(), max_relative = 1e-10);
        assert_eq!(b.clamped, b.raw.min(1.0));
    }
}
