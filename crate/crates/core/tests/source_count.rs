use std::f64::consts::PI;

use backus::potentials::{Pole2D, PoleSet2D};
use backus::source_count::{
    boundary_data, boundary_integral, estimate_count, normal_derivative_fd, scan_zeros, BoundaryCurve,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn pole_strategy(reach: f64) -> impl Strategy<Value = Pole2D> {
    (
        0.0..reach,
        0.0..2.0 * PI,
        0u32..3,
        0.5..2.0f64,
        0.0..2.0 * PI,
        any::<bool>(),
    )
        .prop_map(|(r, th, m, mag, arg, neg)| {
            let coef = if m == 0 {
                Complex64::new(if neg { -mag } else { mag }, 0.0)
            } else {
                Complex64::from_polar(mag, arg)
            };
            Pole2D::new([r * th.cos(), r * th.sin()], m, coef).unwrap()
        })
}

fn config_strategy() -> impl Strategy<Value = PoleSet2D> {
    (
        proptest::collection::vec(pole_strategy(0.5), 1..4),
        (-1.0..1.0f64, -1.0..1.0f64),
    )
        .prop_filter("distinct pole locations", |(poles, _)| {
            poles.iter().enumerate().all(|(i, a)| {
                poles[..i]
                    .iter()
                    .all(|b| (a.center[0] - b.center[0]).hypot(a.center[1] - b.center[1]) >= 0.2)
            })
        })
        .prop_map(|(poles, (bx, by))| PoleSet2D::new([0.0, bx, by, 0.0, 0.0], poles))
}

/// No zero of Du near the unit circle.
fn smooth_on_circle(ps: &PoleSet2D) -> bool {
    let wide = BoundaryCurve::circle([0.0, 0.0], 2.0, 64).unwrap();
    let scan = scan_zeros(ps, &wide, 128).unwrap();
    scan.ambiguous == 0 && scan.zeros.iter().all(|z| (z[0].hypot(z[1]) - 1.0).abs() >= 0.3)
}

/// Poles well inside and p bounded away from zero on the unit circle.
fn well_posed(ps: &PoleSet2D) -> bool {
    let curve = BoundaryCurve::circle([0.0, 0.0], 1.0, 1024).unwrap();
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for k in 0..1024 {
        let (x, nu) = curve.point(2.0 * PI * k as f64 / 1024.0);
        let (p, _) = boundary_data(ps, &x, &nu).unwrap();
        lo = lo.min(p);
        hi = hi.max(p);
    }
    lo > 0.05 * hi
}

fn unit_circle(m: usize) -> BoundaryCurve {
    BoundaryCurve::circle([0.0, 0.0], 1.0, m).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, max_global_rejects: 100_000, ..ProptestConfig::default() })]

    #[test]
    fn trapezoid_rule_converges_spectrally(ps in config_strategy()) {
        prop_assume!(well_posed(&ps) && smooth_on_circle(&ps));
        let (a, _) = boundary_integral(&ps, &unit_circle(128)).unwrap();
        let (b, _) = boundary_integral(&ps, &unit_circle(256)).unwrap();
        prop_assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
    }

    #[test]
    fn argument_principle_identity(ps in config_strategy()) {
        prop_assume!(well_posed(&ps));
        let report = estimate_count(&ps, &unit_circle(256)).unwrap();
        prop_assume!(report.ambiguous_cells == 0);
        let expected = report.exact_n_minus as f64 - report.n_plus_detected as f64;
        prop_assert!((report.estimate - expected).abs() <= 1e-6, "{report:?}");
    }

    #[test]
    fn estimate_never_exceeds_pole_count(ps in config_strategy()) {
        prop_assume!(well_posed(&ps));
        let report = estimate_count(&ps, &unit_circle(256)).unwrap();
        prop_assert!(report.estimate <= report.exact_n_minus as f64 + 1e-6, "{report:?}");
    }

    #[test]
    fn estimate_is_invariant_under_rigid_motions(
        ps in config_strategy(),
        angle in 0.0..2.0 * PI,
        sx in -3.0..3.0f64,
        sy in -3.0..3.0f64,
    ) {
        prop_assume!(well_posed(&ps));
        let ps = PoleSet2D::new([0.0; 5], ps.poles);
        prop_assume!(well_posed(&ps));
        let moved = ps.transformed([0.0, 0.0], angle, [sx, sy]).unwrap();
        let (a, _) = boundary_integral(&ps, &unit_circle(256)).unwrap();
        let (b, _) = boundary_integral(&moved, &BoundaryCurve::circle([sx, sy], 1.0, 256).unwrap()).unwrap();
        prop_assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
    }

    #[test]
    fn analytic_normal_derivative_matches_differences(ps in config_strategy(), t in 0.0..2.0 * PI) {
        let (x, nu) = unit_circle(64).point(t);
        let (_, q) = boundary_data(&ps, &x, &nu).unwrap();
        let fd = normal_derivative_fd(&ps, &x, &nu).unwrap();
        prop_assert!((q - fd).abs() <= 1e-6 * (1.0 + q.abs()), "{q} vs {fd}");
    }
}

#[test]
fn single_poles_count_their_order_plus_one() {
    for m in 0..5u32 {
        let coef = if m == 0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.3, -0.7)
        };
        let ps = PoleSet2D::new([0.0; 5], vec![Pole2D::new([0.1, -0.2], m, coef).unwrap()]);
        let r = estimate_count(&ps, &unit_circle(256)).unwrap();
        assert_eq!(r.rounded, m as i64 + 1);
        assert!((r.estimate - (m + 1) as f64).abs() < 1e-10);
        assert_eq!(r.n_plus_detected, 0);
    }
}

#[test]
fn poles_outside_the_curve_do_not_count() {
    let ps = PoleSet2D::new(
        [0.0; 5],
        vec![
            Pole2D::log([0.0, 0.0], 1.0).unwrap(),
            Pole2D::new([3.0, 0.0], 1, Complex64::new(0.01, 0.0)).unwrap(),
        ],
    );
    let (est, _) = boundary_integral(&ps, &unit_circle(512)).unwrap();
    assert!((est - 1.0).abs() < 1e-9, "{est}");
}

#[test]
fn scan_finds_the_saddle_of_a_shifted_log_pole() {
    let beta = 0.5;
    let ps = PoleSet2D::new([0.0, beta, 0.0, 0.0, 0.0], vec![Pole2D::log([0.0, 0.0], 1.0).unwrap()]);
    let scan = scan_zeros(&ps, &BoundaryCurve::circle([0.0, 0.0], 2.0, 256).unwrap(), 64).unwrap();
    assert_eq!(scan.count(), 1);
    let z = scan.zeros[0];
    assert!(
        (z[0] + 1.0 / (2.0 * PI * beta)).abs() < 1e-10 && z[1].abs() < 1e-10,
        "{z:?}"
    );
}

#[test]
fn curve_validation() {
    assert!(BoundaryCurve::circle([0.0, 0.0], 0.0, 64).is_err());
    assert!(BoundaryCurve::circle([0.0, 0.0], 1.0, 7).is_err());
    assert!(BoundaryCurve::circle([f64::NAN, 0.0], 1.0, 64).is_err());
    let on_curve = PoleSet2D::new([0.0; 5], vec![Pole2D::log([1.0, 0.0], 1.0).unwrap()]);
    assert!(boundary_integral(&on_curve, &unit_circle(64)).is_err());
    let flat = PoleSet2D::new([1.0, 0.0, 0.0, 0.0, 0.0], vec![]);
    assert!(boundary_integral(&flat, &unit_circle(64)).is_err());
}
