use campanato_core::campanato::{BasePoints, Campanato, CampanatoParams, Window};
use campanato_core::dyadic::{lemma_bound_check, lemma_constant, s_op, scaling_identity_gap, DyadicSequence};
use campanato_core::field::ScalarField;
use campanato_core::grid::GridField;
use campanato_core::minimal_poly::{monotonicity_constant, monotonicity_ratio};
use campanato_core::mollify::Means;
use campanato_core::oscillation::{OscParams, Oscillation};
use campanato_core::registry;
use campanato_core::transport::{Source, TransportProblem, VelocityField};
use campanato_core::{basis, Polynomial};
use proptest::prelude::*;

fn sequence() -> impl Strategy<Value = DyadicSequence> {
    (
        -10i32..5,
        prop::collection::vec(prop_oneof![Just(0.0), 1e-3f64..1e3], 1..25),
    )
        .prop_map(|(j, v)| DyadicSequence::new(j, v).unwrap())
}

fn poly(dim: usize, degree: i32) -> impl Strategy<Value = Polynomial> {
    let len = basis(dim, degree).len();
    (
        prop::collection::vec(-1.0f64..1.0, dim),
        prop::collection::vec(-2.0f64..2.0, len),
    )
        .prop_map(move |(c, k)| Polynomial::from_coeffs(c, degree, k).unwrap())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn s_op_matches_direct_sum(x in sequence(), alpha in -2.0f64..3.0, q in 1.0f64..5.0) {
        let y = s_op(&x, alpha, q).unwrap();
        let v = x.values();
        for i in 0..v.len() {
            let direct: f64 = (i..v.len())
                .map(|m| 2f64.powf(-alpha * (m - i) as f64 * q) * v[m].powf(q))
                .sum::<f64>()
                .powf(1.0 / q);
            prop_assert!(rel(y.values()[i], direct) < 1e-12);
        }
    }

    #[test]
    fn s_op_is_positively_homogeneous(x in sequence(), alpha in -2.0f64..3.0, q in 1.0f64..5.0, c in 1e-3f64..1e3) {
        let scaled = DyadicSequence::new(x.j_min(), x.values().iter().map(|v| c * v).collect()).unwrap();
        let a = s_op(&scaled, alpha, q).unwrap();
        let b = s_op(&x, alpha, q).unwrap();
        for (u, w) in a.values().iter().zip(b.values()) {
            prop_assert!(rel(*u, c * w) < 1e-12);
        }
    }

    #[test]
    fn s_op_scaling_identity(x in sequence(), alpha in -2.0f64..3.0, beta in -2.0f64..2.0, q in 1.0f64..5.0) {
        prop_assert!(scaling_identity_gap(&x, alpha, beta, q).unwrap() <= 1e-12);
    }

    #[test]
    fn two_operator_bound_holds(
        x in sequence(),
        alpha in -1.0f64..3.0,
        gap in 0.25f64..3.0,
        p in 1.0f64..3.0,
        extra in 0.0f64..3.0,
    ) {
        let r = lemma_bound_check(&x, alpha, alpha - gap, p, p + extra).unwrap();
        prop_assert!(r.max_ratio <= lemma_constant(alpha, alpha - gap) * (1.0 + 1e-12));
        prop_assert!(r.holds);
    }

    #[test]
    fn monotonicity_constant_is_a_lower_bound(
        u in -10.0f64..10.0,
        v in -10.0f64..10.0,
        delta in 0.0f64..1.0,
        p in 1.05f64..5.0,
    ) {
        prop_assume!((u - v).abs() > 1e-6);
        prop_assert!(monotonicity_ratio(u, v, delta, p) >= monotonicity_constant(p) * (1.0 - 1e-9));
    }

    #[test]
    fn recentering_preserves_values(p in poly(2, 3), c in prop::collection::vec(-1.0f64..1.0, 2), x in prop::collection::vec(-2.0f64..2.0, 2)) {
        let q = p.recenter(&c).unwrap();
        let (a, b) = (p.eval(&x).unwrap(), q.eval(&x).unwrap());
        prop_assert!((a - b).abs() <= 1e-11 * (1.0 + a.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn projection_reproduces_polynomials(p in poly(2, 2), x0 in prop::collection::vec(-1.0f64..1.0, 2), r in 0.1f64..4.0) {
        let f = ScalarField::polynomial(p.clone());
        let got = Means::new(2, 2).project(&f, &x0, r, 2).unwrap();
        let want = p.recenter(&x0).unwrap();
        let scale = want.max_abs_coeff().max(1.0);
        for (a, b) in got.coeffs().iter().zip(want.coeffs()) {
            prop_assert!((a - b).abs() <= 1e-9 * scale, "{a} vs {b}");
        }
    }

    #[test]
    fn oscillation_ignores_added_polynomials(
        p in poly(1, 1),
        x0 in -1.0f64..1.0,
        j in -4i32..3,
        pexp in prop_oneof![Just(2.0), 1.5f64..4.0],
    ) {
        let f = registry::parse("gauss", 1).unwrap();
        let osc = Oscillation::new(1);
        let params = OscParams::new(pexp, 1).unwrap();
        let r = 2f64.powi(j);
        let a = osc.osc(&f, &[x0], r, params).unwrap();
        let b = osc.osc(&f.add_polynomial(&p), &[x0], r, params).unwrap();
        prop_assert!(rel(a, b) < 1e-7, "{a} vs {b}");
    }

    #[test]
    fn oscillation_is_homogeneous_and_translation_invariant(
        c in -5.0f64..5.0,
        h in -1.0f64..1.0,
        x0 in -1.0f64..1.0,
        j in -4i32..3,
    ) {
        prop_assume!(c.abs() > 1e-3);
        let f = registry::parse("bump(1.5, 2)", 1).unwrap();
        let osc = Oscillation::new(1);
        let params = OscParams::new(2.0, 1).unwrap();
        let r = 2f64.powi(j);
        let base = osc.osc(&f, &[x0], r, params).unwrap();
        let scaled = osc.osc(&f.scale(c), &[x0], r, params).unwrap();
        let moved = osc.osc(&f.translate(&[h]), &[x0 + h], r, params).unwrap();
        prop_assert!(rel(scaled, c.abs() * base) < 1e-9);
        prop_assert!(rel(moved, base) < 1e-6, "{moved} vs {base}");
    }

    #[test]
    fn oscillation_decreases_with_degree(x0 in -1.0f64..1.0, j in -4i32..3, p in 1.5f64..4.0) {
        let f = registry::parse("sin(3)", 1).unwrap();
        let osc = Oscillation::new(1);
        let r = 2f64.powi(j);
        let mut last = f64::INFINITY;
        for n in 0..=3 {
            let v = osc.osc(&f, &[x0], r, OscParams::new(p, n).unwrap()).unwrap();
            prop_assert!(v <= last * (1.0 + 1e-9) + 1e-14);
            last = v;
        }
    }

    #[test]
    fn seminorm_is_homogeneous(c in -4.0f64..4.0) {
        prop_assume!(c.abs() > 1e-3);
        let f = registry::parse("gauss", 1).unwrap();
        let engine = Campanato::new(1);
        let params = CampanatoParams::new(1.0, 2.0, 2.0, 1, 0).unwrap();
        let base = BasePoints::lattice(vec![-1.0], vec![1.0], 5).unwrap();
        let w = Window::new(-4, 2).unwrap();
        let a = engine.seminorm(&f, &params, &base, w).unwrap().value;
        let b = engine.seminorm(&f.scale(c), &params, &base, w).unwrap().value;
        prop_assert!(rel(b, c.abs() * a) < 1e-9);
    }

    #[test]
    fn constant_velocity_transports_rigidly(
        c in prop::collection::vec(-1.0f64..1.0, 2),
        x in prop::collection::vec(-1.0f64..1.0, 2),
        t in 0.0f64..1.0,
    ) {
        let f0 = registry::parse("asym_bump", 2).unwrap();
        let v = VelocityField::parse(&format!("constant({}, {})", c[0], c[1]), 2).unwrap();
        let prob = TransportProblem::with_default_step(f0.clone(), v, Source::Zero(2), 1.0).unwrap();
        let got = prob.solve_at(&x, t).unwrap();
        let want = f0.eval(&[x[0] - c[0] * t, x[1] - c[1] * t]).unwrap();
        prop_assert!((got - want).abs() < 1e-10);
    }

    #[test]
    fn grid_files_round_trip(values in prop::collection::vec(-1e6f64..1e6, 9), h in prop_oneof![Just(0.25), Just(0.5)]) {
        let dir = tempfile::tempdir().unwrap();
        let g = GridField::from_values(vec![0.0], vec![8.0 * h], h, values).unwrap();
        let (bin, csv) = (dir.path().join("g.bin"), dir.path().join("g.csv"));
        g.write_binary(&bin).unwrap();
        g.write_csv(&csv).unwrap();
        let (b, c) = (GridField::read_binary(&bin).unwrap(), GridField::read_csv(&csv).unwrap());
        prop_assert_eq!(b.values(), g.values());
        prop_assert_eq!(c.values(), g.values());
    }
}
