use std::f64::consts::PI;

use approx::assert_relative_eq;
use qcmean::extremal::{normalize_gauge, ExtremalError, RadialProfile};
use qcmean::field::{class_membership_integral, DistortionField, Region};
use qcmean::gauge::Gauge;
use qcmean::quad::QuadConfig;

fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| lo * (hi / lo).powf(k as f64 / (count - 1) as f64)).collect()
}

fn profile(g: Gauge, dim: usize) -> RadialProfile {
    normalize_gauge(&g, dim, None).unwrap().solve_profile(&log_grid(1e-6, 1.0, 50)).unwrap()
}

// Pure power cases: Ψ(t) = t^a with γ = 1, so K = r^{-2/a} and I(0) = a/2.
fn power_cases() -> Vec<(Gauge, usize, f64)> {
    vec![
        (Gauge::identity(), 2, 2.0),
        (Gauge::identity(), 3, 3.0),
        (Gauge::power(1.0, 2.0).unwrap(), 2, 3.0),
        (Gauge::power(1.0, 2.0).unwrap(), 3, 5.0),
    ]
}

#[test]
fn power_gauges_match_closed_forms() {
    for (g, n, a) in power_cases() {
        let p = profile(g, n);
        assert_relative_eq!(p.i0, a / 2.0, max_relative = 1e-9);
        for r in log_grid(1e-8, 1.0, 40) {
            assert_relative_eq!(p.k(r).unwrap(), r.powf(-2.0 / a), max_relative = 1e-11);
        }
        for t in [1e-4f64, 0.2, 0.7] {
            let want = (a / 2.0) * t.powf(2.0 / a);
            assert_relative_eq!(p.j(t).unwrap(), want, max_relative = 1e-9);
            assert_relative_eq!(p.i(t).unwrap(), a / 2.0 - want, max_relative = 1e-9);
        }
    }
}

#[test]
fn sandwich_and_functional_equation() {
    let gauges = [
        (Gauge::identity(), 2),
        (Gauge::power(0.5, 2.0).unwrap(), 2),
        (Gauge::power(1.0, 3.0).unwrap(), 3),
        (Gauge::log_power(1.0, 2.0, 1.0).unwrap(), 2),
    ];
    for (g, n) in gauges {
        let s = normalize_gauge(&g, n, None).unwrap();
        assert!(s.gamma >= 1.0);
        assert_eq!(s.k(1.0).unwrap(), 1.0);
        let mut prev = f64::INFINITY;
        for r in log_grid(1e-10, 1.0, 200) {
            let k = s.k(r).unwrap();
            let (lo, hi) = s.sandwich(r);
            assert!(lo * (1.0 - 1e-12) <= k && k <= hi * (1.0 + 1e-12), "{r}: {lo} {k} {hi}");
            let target = (s.gamma / r).powi(2);
            assert!((s.psi(k) - target).abs() <= 1e-9 * target);
            assert!(k < prev);
            prev = k;
        }
    }
}

#[test]
fn truncated_maps() {
    let p = profile(Gauge::power(1.0, 2.0).unwrap(), 3);
    for m in [2, 10, 100] {
        let cut = 1.0 / m as f64;
        assert_eq!(p.k_m(cut / 3.0, m).unwrap(), p.k(cut).unwrap());
        for t in [cut * 1.5, 0.5, 0.99] {
            let x = [t / 3f64.sqrt(); 3];
            let a = p.eval_map(&x, Some(m)).unwrap();
            let b = p.eval_map(&x, None).unwrap();
            assert_relative_eq!(a.abs_image, b.abs_image, max_relative = 1e-12);
        }
        assert_eq!(p.eval_map(&[0.0; 3], Some(m)).unwrap().abs_image, 0.0);
        assert!(p.i_m(0.0, m).unwrap().is_infinite());
    }
    assert!(p.eval_map(&[0.0; 3], None).is_err());
    assert!(p.eval_map(&[0.8, 0.8, 0.0], None).is_err());
}

#[test]
fn radial_stretch_matches_finite_difference() {
    let p = profile(Gauge::log_power(1.0, 2.0, 1.0).unwrap(), 2);
    for t in [0.05f64, 0.3, 0.8] {
        let h = 1e-6;
        let fd = (p.big_r(t + h).unwrap() - p.big_r(t - h).unwrap()) / (2.0 * h);
        let s = p.eval_map(&[t, 0.0], None).unwrap();
        assert_relative_eq!(s.delta_r, fd, max_relative = 1e-6);
        assert!(s.delta_r <= s.delta_tau);
        assert_relative_eq!(s.k_i, s.delta_tau / s.delta_r, max_relative = 1e-9);
        assert_relative_eq!(s.k_i, p.k(t).unwrap(), max_relative = 1e-12);
    }
}

#[test]
fn mass_against_bound() {
    // closed forms: n = 2 gives equality; Identity in n = 3 gives 12π/5 ≤ 6π
    let p = profile(Gauge::identity(), 2);
    let m = p.gauge_mass(None).unwrap();
    assert_relative_eq!(m.mass, 2.0 * PI, max_relative = 1e-9);
    assert_relative_eq!(m.bound, 2.0 * PI, max_relative = 1e-9);
    let p = profile(Gauge::identity(), 3);
    let m = p.gauge_mass(None).unwrap();
    assert_relative_eq!(m.mass, 12.0 * PI / 5.0, max_relative = 1e-9);
    assert_relative_eq!(m.bound, 6.0 * PI, max_relative = 1e-9);

    for (g, n, _) in power_cases() {
        let p = profile(g, n);
        let full = p.gauge_mass(None).unwrap().mass;
        let phi1 = p.setup.gamma * p.setup.gamma;
        let omega = p.setup.constants().sphere_area;
        let one = p.gauge_mass(Some(1)).unwrap();
        assert_relative_eq!(one.mass, omega * phi1 / n as f64, max_relative = 1e-12);
        for k in 0..=10 {
            let r = p.gauge_mass(Some(1 << k)).unwrap();
            assert!(r.mass <= r.bound + 1e-7);
            assert!(r.mass <= full * (1.0 + 1e-9));
        }
    }
}

#[test]
fn truncated_mass_by_cubature() {
    let p = profile(Gauge::power(1.0, 2.0).unwrap(), 2);
    let m = 4;
    let q = p.clone();
    // K_I(x, f_m) = K_m(|x|)^{n-1}; K_m ≥ 1, where the normalized gauge is its upper part
    let field = DistortionField::radial(move |r| q.k_m(r.min(1.0), m).unwrap(), vec![0.0, 0.0], "K_m").unwrap();
    let region = Region::Ball { center: vec![0.0, 0.0], radius: 1.0 };
    let cfg = QuadConfig::default().with_rel_tol(1e-10);
    let direct = class_membership_integral(p.setup.gauge.upper(), &field, false, &region, &cfg).unwrap();
    assert_relative_eq!(p.gauge_mass(Some(m)).unwrap().mass, direct, max_relative = 1e-7);
}

#[test]
fn membership_and_witness() {
    let p = profile(Gauge::identity(), 2);
    let e = std::f64::consts::E;
    let rep = p.membership_check(10).unwrap();
    assert!(rep.ok);
    assert_relative_eq!(rep.image_radius, e, max_relative = 1e-9);
    assert_relative_eq!(rep.sup_abs_image, e, max_relative = 1e-9);
    assert_relative_eq!(rep.distance_to_infinity, 1.0 / (1.0 + e * e).sqrt(), max_relative = 1e-9);
    assert_relative_eq!(rep.sampled_diameter, rep.omitted_diameter, max_relative = 1e-9);

    let rows = p.nonequicontinuity_witness(0.1, &[10, 100]).unwrap();
    assert_relative_eq!(rows[0].min_abs_f, 0.1f64.exp(), max_relative = 1e-9);
    assert_relative_eq!(rows[1].min_abs_f, 0.1f64.exp(), max_relative = 1e-9);
}

#[test]
fn inadmissible_setups() {
    assert!(matches!(
        normalize_gauge(&Gauge::constant(3.0).unwrap(), 2, None),
        Err(ExtremalError::GrowthDecreasing { .. })
    ));
    // n = 2: Ψ(K) = K e^K gives K ~ 2 ln(1/r) and a divergent I(0)
    let s = normalize_gauge(&Gauge::exp(1.0, 1.0).unwrap(), 2, None).unwrap();
    assert!(matches!(s.solve_profile(&[0.1, 1.0]), Err(ExtremalError::Tail { .. })));
    assert!(s.k(0.0).is_err());
}
