use std::f64::consts::{PI, TAU};

use hitchin_core::action::{action_density, reduced_action, GaugeRotated};
use hitchin_core::fields::{
    exact_profile, transformed_pair, FieldConfig, Particle, PlanarField, Point, RadialFunctions,
    TanhSech, TransformedSystem,
};
use hitchin_core::holonomy::{circle_holonomy, winding_number};
use hitchin_core::liealg::PairingKind;
use hitchin_core::numerics::{central_diff, OdeSpec, QuadratureSpec};
use hitchin_core::residual::ode_residual;
use proptest::prelude::*;

fn log_radius() -> impl Strategy<Value = f64> {
    (-3.0f64..3.0).prop_map(|e| 10f64.powf(e))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_family_solves_reduced_equations(c in 0.2f64..4.0, r in log_radius()) {
        let p = exact_profile(c).unwrap();
        prop_assert!(ode_residual(&p, r).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn substitution_chain_reproduces_tanh_sech(c in 0.3f64..3.0, t in -5.0f64..5.0) {
        let chain = transformed_pair(exact_profile(c).unwrap());
        let (f1, g1) = chain.values(t).unwrap();
        let (f2, g2) = TanhSech { c }.values(t).unwrap();
        prop_assert!((f1 - f2).abs() < 1e-12 && (g1 - g2).abs() < 1e-12);
    }

    #[test]
    fn analytic_df_matches_central_difference(c in 0.6f64..2.5, e in -2.0f64..2.0) {
        let p = exact_profile(c).unwrap();
        let r = 10f64.powf(e);
        let h = 1e-4 * r;
        let fd = central_diff(|x| p.f(x).unwrap(), r, h);
        let exact = p.values(r).unwrap().df;
        prop_assert!((fd - exact).abs() < 1e-7 * exact.abs().max(1.0), "{} vs {}", fd, exact);
    }

    #[test]
    fn reduced_to_reference_ratio_is_sixteen(c in 0.55f64..3.0) {
        let rep = reduced_action(c, &QuadratureSpec::default()).unwrap();
        prop_assert!(rep.convergent);
        prop_assert!((rep.ratio.unwrap() - 16.0).abs() < 1e-6);
    }

    #[test]
    fn killing_density_is_gauge_invariant(
        s in -2.0f64..2.0,
        r in 0.2f64..4.0,
        theta in 0.0f64..TAU,
    ) {
        let cfg = FieldConfig::exact(1.0).unwrap();
        let p = Point::polar(r, theta);
        let rotated = GaugeRotated { inner: &cfg, s };
        let a = action_density(&cfg, p, PairingKind::Killing, 1e-4).unwrap();
        let b = action_density(&rotated, p, PairingKind::Killing, 1e-4).unwrap();
        prop_assert!((a - b).abs() < 1e-8);
    }

    #[test]
    fn multi_fields_are_finite_off_centres(x in -5.0f64..5.0, y in -5.0f64..5.0) {
        let cfg = FieldConfig::multi(vec![Point::new(0.5, 0.0), Point::new(-1.0, 1.0)]).unwrap();
        let p = Point::new(x, y);
        prop_assume!(cfg.singular_distance(p) > 1e-3);
        let v = cfg.field_at(p).unwrap();
        for m in [v.a1, v.a2, v.phi1, v.phi2] {
            prop_assert!(m.max_abs().is_finite());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn radial_holonomy_is_diagonal_unimodular_and_abelian(c in 0.3f64..3.0, r in log_radius()) {
        let cfg = FieldConfig::exact(c).unwrap();
        let res = circle_holonomy(&cfg, r, &OdeSpec::default()).unwrap();
        prop_assert!(res.max_det_error < 1e-9);
        prop_assert!(res.max_off_diagonal < 1e-10);
        prop_assert!(res.abelian_discrepancy < 1e-8);
    }

    #[test]
    fn winding_counts_particles(pts in prop::collection::vec((0.0f64..5.0, 0.0f64..TAU), 1..6)) {
        let n = pts.len() as i64;
        let cfg = FieldConfig::multi(pts.into_iter().map(|(r, t)| Point::polar(r, t)).collect())
            .unwrap();
        prop_assert_eq!(winding_number(&cfg, 1e4, &OdeSpec::default()).unwrap(), n);
    }

    // The excess at r = 1e4 is about 2πc·r^{−2c}; below c ≈ 0.45 it exceeds 1e-3.
    #[test]
    fn fractional_phase_adds_up(
        parts in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0, 0.5f64..2.5), 1..4),
    ) {
        let particles: Vec<Particle> = parts.iter().map(|&(x, y, c)| Particle { x, y, c }).collect();
        let expect = PI * particles.iter().map(|p| 1.0 + p.c).sum::<f64>();
        let cfg = FieldConfig::fractional(particles).unwrap();
        let res = circle_holonomy(&cfg, 1e4, &OdeSpec::default()).unwrap();
        prop_assert!((res.total_phase - expect).abs() < 1e-3, "{} vs {}", res.total_phase, expect);
    }
}
