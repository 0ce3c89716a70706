use std::sync::OnceLock;

use homfrac_core::fracop::FracParams;
use homfrac_core::sobolev::{self, GridField, GridOperator, GridOptions};
use homfrac_core::{Gauge, GaugeKind, GroupSpec};
use proptest::prelude::*;

fn groups() -> Vec<GroupSpec> {
    vec![
        GroupSpec::euclidean(3, Some(&[1.0, 2.0, 3.0])).unwrap(),
        GroupSpec::parabolic_r2(),
        GroupSpec::heisenberg(1).unwrap(),
        GroupSpec::heisenberg(2).unwrap(),
    ]
}

fn point(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, dim)
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
}

fn group_and_points(k: usize) -> impl Strategy<Value = (GroupSpec, Vec<Vec<f64>>)> {
    (0..4usize).prop_flat_map(move |i| {
        let g = groups()[i].clone();
        let d = g.dim();
        (Just(g), prop::collection::vec(point(d), k))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn product_is_associative((g, p) in group_and_points(3)) {
        let l = g.multiply(&g.multiply(&p[0], &p[1]), &p[2]);
        let r = g.multiply(&p[0], &g.multiply(&p[1], &p[2]));
        prop_assert!(close(&l, &r, 1e-12));
    }

    #[test]
    fn inverse_is_two_sided((g, p) in group_and_points(1)) {
        let inv = g.inverse(&p[0]);
        let e = g.identity();
        prop_assert!(close(&g.multiply(&p[0], &inv), &e, 1e-12));
        prop_assert!(close(&g.multiply(&inv, &p[0]), &e, 1e-12));
    }

    #[test]
    fn dilation_is_an_automorphism((g, p) in group_and_points(2), lam in 0.1f64..10.0) {
        let l = g.dilate(lam, &g.multiply(&p[0], &p[1]));
        let r = g.multiply(&g.dilate(lam, &p[0]), &g.dilate(lam, &p[1]));
        prop_assert!(close(&l, &r, 1e-11));
    }

    #[test]
    fn gauges_are_homogeneous_and_symmetric((g, p) in group_and_points(1), lam in 0.05f64..20.0, k in 0..5usize) {
        let kinds = [GaugeKind::Koranyi, GaugeKind::BallGauge { r: 1.0 }, GaugeKind::Parabolic, GaugeKind::EuclideanPower, GaugeKind::Max];
        if let Ok(gauge) = Gauge::new(kinds[k], &g) {
            let n = gauge.eval(&p[0]);
            let scaled = gauge.eval(&g.dilate(lam, &p[0]));
            prop_assert!((scaled - lam * n).abs() <= 1e-10 * (1.0 + lam * n));
            prop_assert!((gauge.eval(&g.inverse(&p[0])) - n).abs() <= 1e-12 * (1.0 + n));
        }
    }

    #[test]
    fn koranyi_distance_is_left_invariant_and_subadditive(p in prop::collection::vec(point(3), 3)) {
        let h = GroupSpec::heisenberg(1).unwrap();
        let k = Gauge::new(GaugeKind::Koranyi, &h).unwrap();
        let d = k.distance(&h, &p[1], &p[2]);
        let shifted = k.distance(&h, &h.multiply(&p[0], &p[1]), &h.multiply(&p[0], &p[2]));
        prop_assert!((d - shifted).abs() <= 1e-11 * (1.0 + d));
        let (a, b) = (k.eval(&p[1]), k.eval(&p[2]));
        prop_assert!(k.eval(&h.multiply(&p[1], &p[2])) <= a + b + 1e-12 * (a + b));
    }

    #[test]
    fn smooth_step_is_monotone_and_balanced(t in -0.5f64..1.5, dt in 0.0f64..0.5) {
        let a = sobolev::smooth_step(t);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(sobolev::smooth_step(t + dt) >= a);
        prop_assert!((a + sobolev::smooth_step(1.0 - t) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn power_sum_minimum_is_a_minimum(a in 0.1f64..3.0, b in 0.1f64..3.0, ca in 0.1f64..10.0, cb in 0.1f64..10.0, r in 0.01f64..100.0) {
        let (r0, m) = sobolev::min_power_sum(a, b, ca, cb).unwrap();
        let f = |x: f64| ca * x.powf(a) + cb * x.powf(-b);
        prop_assert!((f(r0) - m).abs() <= 1e-10 * m);
        prop_assert!(f(r) >= m * (1.0 - 1e-12));
    }

    #[test]
    fn disjoint_shifts_give_the_closed_form(k in 1.0f64..300.0, eta in 0.001f64..0.2) {
        prop_assume!(k * eta >= 2.0);
        let rows = sobolev::counterexample_sweep(&homfrac_core::fields::bump1d, 1.0, &[k], &[eta]).unwrap();
        prop_assert!(rows[0].disjoint);
        prop_assert!((rows[0].ratio - rows[0].disjoint_value).abs() <= 1e-9 * rows[0].disjoint_value);
    }

    #[test]
    fn hfg1_round_trips(counts in prop::collection::vec(3usize..6, 3), seed in any::<u64>()) {
        let h = GroupSpec::heisenberg(1).unwrap();
        let k = Gauge::new(GaugeKind::Koranyi, &h).unwrap();
        let mut f = GridField::zeros(&k, 2.5, &counts).unwrap();
        for (i, v) in f.values.iter_mut().enumerate() {
            *v = ((seed as f64) * 1e-12 + i as f64).sin();
        }
        let mut buf = Vec::new();
        sobolev::write_hfg1(&mut buf, &f).unwrap();
        prop_assert_eq!(&buf[..4], b"HFG1");
        let back = sobolev::read_hfg1(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(back, f);
    }
}

fn small_operator() -> &'static (GridOperator, GridField) {
    static OP: OnceLock<(GridOperator, GridField)> = OnceLock::new();
    OP.get_or_init(|| {
        let h = GroupSpec::heisenberg(1).unwrap();
        let k = Gauge::new(GaugeKind::Koranyi, &h).unwrap();
        let p = FracParams::new(&h, 0.5).unwrap();
        let shape = GridField::zeros(&k, 3.0, &[7, 7, 7]).unwrap();
        let opts = GridOptions { exterior_samples: 1024, ..Default::default() };
        (GridOperator::new(&h, &k, &p, &shape, 5.0, &opts).unwrap(), shape)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn grid_quotient_ignores_amplitude(vals in prop::collection::vec(0.0f64..1.0, 125), c in 0.01f64..100.0) {
        let (op, shape) = small_operator();
        prop_assume!(vals.iter().any(|v| *v > 0.1));
        let u = op.extend(&vals);
        prop_assert_eq!(u.len(), shape.len());
        let q = op.quotient(&u).unwrap();
        let qc = op.quotient(&u.scaled(c)).unwrap();
        prop_assert!(q > 0.0);
        prop_assert!((q - qc).abs() <= 1e-9 * q);
    }
}
