use bvdamage::assembly::{lumped_dual_norm, lumped_lalpha, Discretization};
use bvdamage::diagnostics::{dual_distance_from_density, InterpolantView};
use bvdamage::driver::time_update;
use bvdamage::mesh::rectangle;
use bvdamage::model::{coercivity_constant, voigt_elasticity, VNorm};
use bvdamage::quadrature::{q1_derivatives, q1_shape};
use bvdamage::zerodim::{run_zero_dim, ZeroDimModel};
use proptest::prelude::*;

fn weights(n: usize) -> Vec<f64> {
    // lumped weights of an n × n unit grid: total measure one
    Discretization::new(rectangle(1.0, 1.0, n, n).unwrap(), 2).unwrap().weights().to_vec()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lalpha_norm_grows_with_alpha_on_unit_measure(
        v in prop::collection::vec(-1.0f64..1.0, 16),
        a in 2.0f64..6.0,
        gap in 0.1f64..4.0,
    ) {
        let w = weights(3);
        let lo = lumped_lalpha(&v, &w, a);
        let hi = lumped_lalpha(&v, &w, a + gap);
        prop_assert!(lo <= hi * (1.0 + 1e-12));
    }

    #[test]
    fn holder_pairing_is_bounded_by_the_norms(
        v in prop::collection::vec(-2.0f64..2.0, 16),
        r in prop::collection::vec(-2.0f64..2.0, 16),
        a in 2.0f64..8.0,
    ) {
        // ⟨r, v⟩ with r a nodal functional and v nodal values
        let w = weights(3);
        let pairing: f64 = r.iter().zip(&v).map(|(r, v)| r * v).sum();
        let bound = lumped_dual_norm(&r, &w, VNorm::Lalpha(a)) * lumped_lalpha(&v, &w, a);
        prop_assert!(pairing.abs() <= bound * (1.0 + 1e-12) + 1e-14);
    }

    #[test]
    fn dual_distance_is_positively_homogeneous_and_monotone(
        d in prop::collection::vec(-3.0f64..3.0, 1..20),
        k in 0.0f64..2.0,
        s in 0.1f64..10.0,
        a in 2.0f64..8.0,
    ) {
        let w = vec![1.0 / d.len() as f64; d.len()];
        let norm = VNorm::Lalpha(a);
        let base = dual_distance_from_density(&d, &w, k, norm);
        let ds: Vec<f64> = d.iter().map(|x| s * x).collect();
        let scaled = dual_distance_from_density(&ds, &w, s * k, norm);
        prop_assert!((scaled - s * base).abs() <= 1e-12 * (1.0 + s * base));
        prop_assert!(dual_distance_from_density(&d, &w, k + 0.5, norm) <= base);
        let below: Vec<f64> = d.iter().map(|x| x.min(k)).collect();
        prop_assert_eq!(dual_distance_from_density(&below, &w, k, norm), 0.0);
    }

    #[test]
    fn time_update_stays_in_range(
        t in 0.0f64..1.0,
        frac in 0.0f64..1.0,
        rho in 1e-4f64..0.1,
    ) {
        let dz = frac * rho;
        let next = time_update(t, dz, rho, 1.0).unwrap();
        prop_assert!(next >= t && next <= 1.0);
        prop_assert!(next - t <= rho * (1.0 + 1e-12));
        prop_assert!(time_update(t, rho, rho, 1.0).unwrap() == t);
        prop_assert!(time_update(t, 1.1 * rho, rho, 1.0).is_err());
    }

    #[test]
    fn shape_functions_interpolate_affine_fields(
        xi in -1.0f64..1.0,
        eta in -1.0f64..1.0,
        c in prop::array::uniform3(-5.0f64..5.0),
    ) {
        let n = q1_shape(xi, eta);
        let d = q1_derivatives(xi, eta);
        let r = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
        let f = |p: [f64; 2]| c[0] + c[1] * p[0] + c[2] * p[1];
        let val: f64 = (0..4).map(|a| n[a] * f(r[a])).sum();
        let gx: f64 = (0..4).map(|a| d[a][0] * f(r[a])).sum();
        let gy: f64 = (0..4).map(|a| d[a][1] * f(r[a])).sum();
        prop_assert!((val - f([xi, eta])).abs() < 1e-12);
        prop_assert!((gx - c[1]).abs() < 1e-12 && (gy - c[2]).abs() < 1e-12);
    }

    #[test]
    fn plane_strain_hooke_is_coercive(e in 1e-3f64..1e5, nu in -0.99f64..0.49) {
        let c = voigt_elasticity(e, nu).unwrap();
        prop_assert!(coercivity_constant(&c) > 0.0);
        for i in 0..3 {
            for j in 0..3 {
                prop_assert_eq!(c[i][j], c[j][i]);
            }
        }
    }
}

#[test]
fn incompressible_limit_is_rejected() {
    assert!(voigt_elasticity(1.0, 0.5).is_err());
}

#[test]
fn interpolants_follow_the_arc_length_grid() {
    let tr = run_zero_dim(&ZeroDimModel::default(), 0.05).unwrap();
    let view = InterpolantView::new(&tr).unwrap();
    let n = tr.num_steps();
    assert!((view.s_end() - n as f64 * 0.05).abs() < 1e-12);
    // grid values
    for k in 0..=n {
        let s = k as f64 * 0.05;
        let smp = view.sample(s, true).unwrap();
        assert!((smp.t_hat - tr.records[k].t).abs() < 1e-12);
        assert_eq!(smp.t_under, smp.t_over);
        assert_eq!(smp.z_hat.as_deref().unwrap(), tr.z_at(k as isize).unwrap());
    }
    // arc-length parametrization with the damage speed lagging one
    // interval: t̂'(s) + ‖ẑ'(s − ρ)‖ = 1, and ≤ 1 on the final interval
    for k in 1..=n {
        let s = (k as f64 - 0.5) * 0.05;
        let speed = view.t_hat_slope(s).unwrap() + view.z_hat_speed(s - 0.05).unwrap();
        let smp = view.sample(s, true).unwrap();
        assert!(smp.t_under <= smp.t_hat && smp.t_hat <= smp.t_over);
        assert!(view.z_hat_speed(s).unwrap() <= 1.0 + 1e-9);
        if k < n {
            assert!((speed - 1.0).abs() < 1e-9, "interval {k}: speed {speed}");
        } else {
            assert!(speed <= 1.0 + 1e-9);
        }
    }
    assert!(view.sample(-0.05, false).is_ok());
    assert!(view.sample(view.s_end() + 1.0, false).is_err());
}
