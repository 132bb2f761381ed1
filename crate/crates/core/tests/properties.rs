//! Invariants under random parameters.

use gpci::closed::{bessel_j_sequence, propagate_state, Propagator};
use gpci::effective_modes::lvc_to_system_bath;
use gpci::linalg::{c64, dot_c, norm_sqr, sym_eigh};
use gpci::model::{derive_geometry, div_f, evaluate_potentials, lower_adiabatic_state, upper_adiabatic_state, LvcParameters, SubsystemParameters};
use gpci::open::bath_correlation;
use gpci::representation::{build, GridSpec, Representation, SchemeSpec};
use gpci::tdpt::{fc_overlap, sinc_envelope};
use proptest::prelude::*;

fn subsystem() -> impl Strategy<Value = SubsystemParameters> {
    (0.5..3.0, 0.5..3.0, 0.3..2.0, -1.0..1.0, -2.0..2.0, -2.0..2.0, 0.5..4.0, -1.0..1.0).prop_map(
        |(omega_x, omega_y, x0, y0, delta, c_x, c_y, delta12)| SubsystemParameters {
            omega_x,
            omega_y,
            x0,
            y0,
            delta,
            c_x,
            c_y,
            delta12,
        },
    )
}

fn lvc(n: usize) -> impl Strategy<Value = LvcParameters> {
    (
        prop::collection::vec(0.3..3.0, n),
        prop::collection::vec(-2.0..2.0, n),
        prop::collection::vec(-2.0..2.0, n),
        prop::collection::vec(-1.0..1.0, n),
        -1.0..1.0,
    )
        .prop_map(|(omega, kappa, kappa_tilde, c, delta)| LvcParameters {
            omega,
            kappa,
            kappa_tilde,
            c,
            delta,
        })
}

/// Coarse grid whose box still holds both wells.
fn small_grid(p: &SubsystemParameters) -> SchemeSpec {
    let l = p.x0.abs().max(p.y0.abs()) + 5.0 / p.omega_x.min(p.omega_y).sqrt();
    SchemeSpec::Grid(GridSpec {
        nx: 16,
        ny: 16,
        bounds: [-l, l, -l, l],
    })
}

fn random_state(seed: &[f64]) -> Vec<c64> {
    let v: Vec<c64> = seed.chunks(2).map(|c| c64::new(c[0], c[1])).collect();
    let n = norm_sqr(&v).sqrt();
    v.into_iter().map(|z| z / n).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adiabatic_states_diagonalize_the_potential(p in subsystem(), x in -4.0..4.0, y in -4.0..4.0) {
        let pt = evaluate_potentials(&p, [x, y]);
        prop_assume!(!pt.at_ci);
        prop_assert!(pt.w1 <= pt.w2);
        let scale = 1.0 + pt.v_d.abs() + pt.v_a.abs() + pt.v_c.abs();
        prop_assert!((pt.w1 + pt.w2 - pt.v_d - pt.v_a).abs() <= 1e-12 * scale);
        prop_assert!((pt.w1 * pt.w2 - (pt.v_d * pt.v_a - pt.v_c * pt.v_c)).abs() <= 1e-10 * scale * scale);
        // Matrix in (A, D) order.
        let m = [[pt.v_a, pt.v_c], [pt.v_c, pt.v_d]];
        for (s, w) in [(lower_adiabatic_state(pt.theta), pt.w1), (upper_adiabatic_state(pt.theta), pt.w2)] {
            prop_assert!((s[0] * s[0] + s[1] * s[1] - 1.0).abs() < 1e-14);
            for i in 0..2 {
                let hs = m[i][0] * s[0] + m[i][1] * s[1];
                prop_assert!((hs - w * s[i]).abs() <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn derivative_coupling_is_half_the_angle_gradient(p in subsystem(), x in -3.0..3.0, y in -3.0..3.0) {
        let pt = evaluate_potentials(&p, [x, y]);
        let h = 1e-5;
        let th = |x: f64, y: f64| evaluate_potentials(&p, [x, y]).theta;
        let gx = th(x + h, y) - th(x - h, y);
        let gy = th(x, y + h) - th(x, y - h);
        // Skip points straddling the branch cut or too close to the intersection.
        prop_assume!(gx.abs() < 1.0 && gy.abs() < 1.0);
        let r = (pt.w2 - pt.w1).abs();
        prop_assume!(r > 1e-2);
        let f = pt.f.unwrap();
        let tol = 1e-4 * (1.0 + f[0].abs() + f[1].abs());
        prop_assert!((f[0] - gx / (4.0 * h)).abs() < tol);
        prop_assert!((f[1] - gy / (4.0 * h)).abs() < tol);
        let fx = |x: f64, y: f64| evaluate_potentials(&p, [x, y]).f.unwrap();
        let h = 1e-4;
        let div = (fx(x + h, y)[0] - fx(x - h, y)[0] + fx(x, y + h)[1] - fx(x, y - h)[1]) / (2.0 * h);
        let d = div_f(&p, [x, y]).unwrap();
        prop_assert!((d - div).abs() < 1e-4 * (1.0 + d.abs()) / (r * r).min(1.0));
    }

    #[test]
    fn intersection_lies_on_both_lines(p in subsystem()) {
        let g = derive_geometry(&p).unwrap();
        if let Some([x, y]) = g.ci_point {
            let pt = evaluate_potentials(&p, [x, y]);
            let scale = 1.0 + pt.v_d.abs() + x.abs() + y.abs();
            prop_assert!((pt.v_d - pt.v_a).abs() < 1e-9 * scale);
            prop_assert!(pt.v_c.abs() < 1e-9 * scale);
        }
        let t = g.tuning_direction;
        prop_assert!((t[0].hypot(t[1]) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn effective_mode_transform_is_exact(m in (3usize..9).prop_flat_map(lvc), x in prop::collection::vec(-2.0..2.0, 9)) {
        let n = m.omega.len();
        let t = lvc_to_system_bath(&m).unwrap();
        let o = t.transform.full_matrix();
        let g = &o * o.transpose();
        for i in 0..n {
            for j in 0..n {
                let id = if i == j { 1.0 } else { 0.0 };
                prop_assert!((g[(i, j)] - id).abs() < 1e-12);
            }
        }
        let (ev, _) = sym_eigh(&t.transformed_hessian()).unwrap();
        let mut w2: Vec<f64> = m.omega.iter().map(|w| w * w).collect();
        w2.sort_by(f64::total_cmp);
        for (a, b) in ev.iter().zip(&w2) {
            prop_assert!((a - b).abs() < 1e-10);
        }
        let x = &x[..n];
        let (a1, a2, a12) = m.potential_matrix(x);
        let (b1, b2, b12) = t.potential_matrix(&t.to_new_coordinates(x));
        let scale = 1.0 + a1.abs() + a2.abs();
        prop_assert!((a1 - b1).abs() < 1e-10 * scale);
        prop_assert!((a2 - b2).abs() < 1e-10 * scale);
        prop_assert!((a12 - b12).abs() < 1e-10 * scale);
    }

    #[test]
    fn franck_condon_symmetry_and_bounds(n in 0usize..12, m in 0usize..12, d in -3.0..3.0, w in 0.5..3.0) {
        let a = fc_overlap(n, m, d, w);
        prop_assert!(a.abs() <= 1.0 + 1e-12);
        prop_assert!((a - fc_overlap(m, n, -d, w)).abs() < 1e-12);
        let sign = if (n + m) % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!((a - sign * fc_overlap(n, m, -d, w)).abs() < 1e-12);
    }

    #[test]
    fn sinc_envelope_is_bounded(w in -5.0..5.0, t in 0.0..50.0) {
        let s = sinc_envelope(w, t);
        prop_assert!(s >= 0.0);
        prop_assert!(s <= t * t * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn bessel_sum_rule(z in 0.0..60.0) {
        let j = bessel_j_sequence((z as usize) + 40, z);
        let s = j[0] + 2.0 * j.iter().skip(2).step_by(2).sum::<f64>();
        prop_assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_temperature_correlation_is_a_pure_phase(w in 0.05..10.0, t in 0.0..100.0) {
        let c = bath_correlation(w, 0.0, t).unwrap();
        prop_assert!((c.norm() - 0.5 / w).abs() < 1e-12 / w);
        prop_assert!((c - c64::from_polar(0.5 / w, -w * t)).norm() < 1e-12 / w);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn hamiltonians_are_hermitian_and_propagation_unitary(
        p in subsystem(),
        gp in any::<bool>(),
        seed in prop::collection::vec(-1.0..1.0f64, 2048),
    ) {
        let rep = if gp { Representation::Diabatic } else { Representation::AdiabaticNoGp };
        let h = build(&p, &small_grid(&p), rep).unwrap();
        let n = h.dim();
        let u = random_state(&seed[..2 * n]);
        let v = random_state(&seed[2048 - 2 * n..]);
        let mut hu = vec![c64::new(0.0, 0.0); n];
        let mut hv = hu.clone();
        h.apply(&u, &mut hu);
        h.apply(&v, &mut hv);
        let a = dot_c(&u, &hv);
        let b = dot_c(&hu, &v);
        let scale = norm_sqr(&hu).sqrt() + norm_sqr(&hv).sqrt();
        prop_assert!((a - b).norm() < 1e-12 * scale);
        let w = propagate_state(&h, &u, 0.7, Propagator::Chebyshev).unwrap();
        prop_assert!((norm_sqr(&w) - 1.0).abs() < 1e-10);
        // Energy is conserved.
        prop_assert!((h.expectation(&w) - h.expectation(&u)).abs() < 1e-8 * (1.0 + h.expectation(&u).abs()));
    }
}
