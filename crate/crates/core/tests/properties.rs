use dtmm::charroots::track_frame;
use dtmm::coeffs::Problem;
use dtmm::differential::{
    kernel_at, kernel_general, propagate_exp, propagate_ode, propagate_robust,
};
use dtmm::linalg::CMatrix;
use dtmm::solution::{fundamental_basis, ic_to_envelope, reconstruct, solve_grid};
use num_complex::Complex64;
use proptest::prelude::*;

type C = Complex64;

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 })
        .collect()
}

/// `c0 + c1 sin(w x + phi)` with `c0 > |c1|`, so `a0 > 0`.
fn positive_a0() -> impl Strategy<Value = String> {
    (1.0f64..4.0, -0.9f64..0.9, 0.3f64..3.0, 0.0f64..6.2)
        .prop_map(|(c0, s, w, phi)| format!("({c0:e}) + ({:e})*sin(({w:e})*x + ({phi:e}))", s * c0))
}

fn complex() -> impl Strategy<Value = C> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| C::new(a, b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn second_order_kernel_matches_general(a0 in positive_a0(), x in 0.0f64..2.0) {
        let p = Problem::from_strs(&[&a0, "0"], (0.0, 2.0)).unwrap();
        let fr = track_frame(None, &p, x).unwrap();
        let fast = kernel_at(&p, &fr).unwrap();
        let general = kernel_general(&fr).unwrap();
        prop_assert!(fast.max_diff(&general) < 1e-10 * (1.0 + general.max_abs()));
    }

    #[test]
    fn exponent_splits_into_jump_and_propagation(a0 in positive_a0(), a1 in -0.5f64..0.5,
                                                 x1 in 0.0f64..2.0, x2 in 0.0f64..2.0) {
        let a1 = format!("({a1:e})");
        let p = Problem::from_strs(&[&a0, &a1], (0.0, 2.0)).unwrap();
        let (_, e) = propagate_exp(&p, x1, x2).unwrap();
        let sum = &e.j + &e.t;
        prop_assert!(sum.max_diff(&e.m) < 1e-8 * (1.0 + e.m.max_abs()));
    }

    #[test]
    fn solve_grid_is_linear(a0 in positive_a0(), u in complex(), v in complex(),
                            s in complex()) {
        let p = Problem::from_strs(&[&a0, "0.3"], (0.0, 1.0)).unwrap();
        let xs = linspace(0.0, 1.0, 11);
        let ic_u = [u, v];
        let ic_v = [v, u * 2.0];
        let ic_sum = [u * s + v, v * s + u * 2.0];
        let gu = solve_grid(&p, 0.2, &ic_u, &xs, false).unwrap();
        let gv = solve_grid(&p, 0.2, &ic_v, &xs, false).unwrap();
        let gs = solve_grid(&p, 0.2, &ic_sum, &xs, false).unwrap();
        for i in 0..xs.len() {
            let want = gu.values[i] * s + gv.values[i];
            prop_assert!((gs.values[i] - want).norm() < 1e-10 * (1.0 + want.norm()));
        }
    }

    #[test]
    fn envelope_round_trip(a0 in positive_a0(), d in proptest::collection::vec(complex(), 3),
                           x0 in 0.0f64..2.0) {
        let p = Problem::from_strs(&[&a0, "1", "x"], (0.0, 2.0)).unwrap();
        let e = ic_to_envelope(&p, x0, &d).unwrap();
        let fr = track_frame(None, &p, x0).unwrap();
        let scale = d.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for (m, dm) in d.iter().enumerate() {
            let back = reconstruct(&e, &fr, m).unwrap();
            prop_assert!((back - dm).norm() <= 1e-9 * scale.max(1e-300));
        }
    }

    #[test]
    fn robust_round_trip_is_identity(x1 in -2.0f64..2.0, x2 in -2.0f64..2.0) {
        let p = Problem::from_strs(&["x", "0"], (-2.0, 2.0)).unwrap();
        let band = 2.0 * p.options.jump_half_width;
        prop_assume!(x1.abs() > band && x2.abs() > band);
        let f = propagate_robust(&p, x1, x2).unwrap();
        let b = propagate_robust(&p, x2, x1).unwrap();
        let dev = (&b.q * &f.q).max_diff(&CMatrix::identity(2));
        prop_assert!(dev < 1e-5, "dev = {dev}");
    }
}

#[test]
fn propagation_converges_at_fourth_order() {
    let base = Problem::from_strs(&["1 + 0.1*x", "0"], (0.0, 1.0)).unwrap();
    let run = |step: f64| {
        let mut p = base.clone();
        p.options.step = step;
        propagate_ode(&p, 0.0, 1.0).unwrap().q
    };
    let reference = run(0.1 / 64.0);
    let errors: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&h| run(h).max_diff(&reference))
        .collect();
    for w in errors.windows(2) {
        assert!(w[0] / w[1] >= 12.0, "errors {errors:?}");
    }
}

#[test]
fn bases_from_two_anchors_span_the_same_space() {
    let p = Problem::from_strs(&["2 + sin(x)", "0.5"], (0.0, 2.0)).unwrap();
    let xs = linspace(0.0, 2.0, 41);
    let a = fundamental_basis(&p, 0.0, &xs).unwrap();
    let b = fundamental_basis(&p, 1.3, &xs).unwrap();
    let n = 2;
    // Coefficients of each b_j in the a basis from the data at xs[0].
    let w = CMatrix::from_fn(n, n, |m, i| a[i].derivative(m, 0).unwrap());
    let lu = w.lu().unwrap();
    for bj in &b {
        let rhs: Vec<C> = (0..n).map(|m| bj.derivative(m, 0).unwrap()).collect();
        let coef = lu.solve_vec(&rhs);
        for i in 0..xs.len() {
            let combo: C = (0..n).map(|k| a[k].values[i] * coef[k]).sum();
            let scale = 1.0 + bj.values[i].norm();
            assert!((combo - bj.values[i]).norm() < 1e-6 * scale, "x = {}", xs[i]);
        }
    }
}

#[test]
fn ode_and_exp_determinants_agree() {
    let p = Problem::from_strs(&["2 + sin(x)", "0.4", "1 + x"], (0.0, 1.0)).unwrap();
    let ode = propagate_ode(&p, 0.0, 1.0).unwrap().det();
    let (q, _) = propagate_exp(&p, 0.0, 1.0).unwrap();
    let det = q.det();
    assert!((ode - det).norm() < 1e-6 * ode.norm());
}
