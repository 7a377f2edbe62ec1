use ekgw_core::gw::{varpi, varpi_det};
use ekgw_core::kronecker::{EkRoute, Kronecker};
use ekgw_core::qseries::{qexpand, QTarget};
use ekgw_core::symbolic::{loop_closed_form, symbolic_reg_integrate_all, xi_loop};
use ekgw_core::{Complex64, ModularPoint, ThetaEvaluator};
use proptest::prelude::*;
use std::f64::consts::PI;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn tau() -> impl Strategy<Value = Complex64> {
    (-0.5..0.5f64, 0.8..1.6f64).prop_map(|(a, b)| c(a, b))
}

fn point(r: f64) -> impl Strategy<Value = Complex64> {
    (-r..r, -r..r).prop_map(|(a, b)| c(a, b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn theta_quasi_periodicity(t in tau(), z in point(1.0)) {
        let th = ThetaEvaluator::new(ModularPoint::new(t).unwrap());
        let v = th.theta(z, false);
        let shifted = th.theta(z + t, false);
        let expect = -(-PI * Complex64::i() * t).exp() * (-2.0 * PI * Complex64::i() * z).exp() * v;
        prop_assert!((shifted - expect).norm() <= 1e-10 * expect.norm().max(1.0));
        prop_assert!((th.theta(-z, false) + v).norm() <= 1e-12 * v.norm().max(1.0));
    }

    #[test]
    fn completed_coefficients_are_elliptic(t in tau(), z in point(0.45), m in 0i64..6) {
        let k = Kronecker::from_modular(ModularPoint::new(t).unwrap());
        prop_assume!(k.theta().theta(z, false).norm() > 1e-2);
        let a = k.e_hat(m, z).unwrap();
        let b = k.e_hat(m, z + t).unwrap();
        let d = k.e_hat(m, z + 1.0).unwrap();
        prop_assert!((a - b).norm() <= 1e-8 * a.norm().max(1.0));
        prop_assert!((a - d).norm() <= 1e-8 * a.norm().max(1.0));
    }

    // Near a lattice point the Bell route must not lose digits to cancellation.
    #[test]
    fn bell_route_near_lattice(t in tau(), r in 0.005..0.1f64, phi in 0.0..std::f64::consts::TAU, a in -2i64..3, b in -1i64..2) {
        let k = Kronecker::from_modular(ModularPoint::new(t).unwrap());
        let z = Complex64::from_polar(r, phi) + a as f64 + t * b as f64;
        let jet = k.ek_coeffs(8, z, true, EkRoute::JetExtraction).unwrap();
        let bell = k.ek_coeffs(8, z, true, EkRoute::BellPolynomial).unwrap();
        let amag = k.modular().a_of_z(z).norm();
        for m in 0..=8i64 {
            let scale = jet.get(m).norm().max((1.0 + amag).powi(m as i32) / (1..=m).product::<i64>() as f64);
            prop_assert!((jet.get(m) - bell.get(m)).norm() <= 1e-8 * scale, "m={} z={}", m, z);
        }
    }

    #[test]
    fn varpi_matches_determinant(t in tau(), w1 in point(0.4), w2 in point(0.4), z1 in point(0.5), z2 in point(0.5)) {
        let th = ThetaEvaluator::new(ModularPoint::new(t).unwrap());
        let (z, w) = ([z1, z2], [w1, w2]);
        let args = [w1, w2, w1 + w2, z1 + w1 - z2, z2 + w2 - z1, z1 - z2];
        prop_assume!(args.iter().all(|x| th.theta(*x, false).norm() > 1e-2));
        let a = varpi(&th, &z, &w).unwrap();
        let b = varpi_det(&th, &z, &w, false).unwrap();
        prop_assert!((a - b).norm() <= 1e-9 * a.norm().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // Cyclic rotation of a loop's factor list does not change its integral.
    #[test]
    fn loop_integral_rotation_invariant(ms in prop::collection::vec(0u32..3, 2..5), shift in 0usize..4) {
        let n = ms.len();
        let mut rotated = ms.clone();
        rotated.rotate_left(shift % n);
        let a = symbolic_reg_integrate_all(&xi_loop(&ms), n).unwrap();
        let b = symbolic_reg_integrate_all(&xi_loop(&rotated), n).unwrap();
        prop_assert_eq!(&a, &loop_closed_form(&ms));
        prop_assert_eq!(&b, &loop_closed_form(&rotated));
        prop_assert_eq!(a.to_string(), b.to_string());
    }

    #[test]
    fn theta_times_reciprocal_is_one(order in 1u32..10) {
        let p = qexpand(QTarget::Theta, order).unwrap().mul(&qexpand(QTarget::ThetaReciprocal, order).unwrap()).unwrap();
        prop_assert!(p.is_unit());
    }
}
