use std::f64::consts::PI;

use modematch::specfun::{
    bessel_first_zero, bessel_jy, bessel_jy_scaled, ScaledBessel, J1_PRIME_ZERO,
};
use proptest::prelude::*;

fn j_value(s: &ScaledBessel, ln_ref: f64) -> f64 {
    s.j * (s.ln_j - ln_ref).exp()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn wronskian_identity(nu in 0.0f64..200.0, x in 1e-3f64..500.0) {
        let s = bessel_jy_scaled(nu, x).unwrap();
        let w = 2.0 / (PI * x);
        let lhs = (s.j * s.yp - s.jp * s.y) * (s.ln_j + s.ln_y).exp();
        prop_assert!(((lhs - w) / w).abs() < 1e-10, "nu {} x {}: {} vs {}", nu, x, lhs, w);
    }

    #[test]
    fn three_term_recurrence(nu in 1.0f64..199.0, x in 1e-2f64..500.0) {
        let a = bessel_jy_scaled(nu - 1.0, x).unwrap();
        let b = bessel_jy_scaled(nu, x).unwrap();
        let c = bessel_jy_scaled(nu + 1.0, x).unwrap();
        let r = b.ln_j;
        let (ja, jb, jc) = (j_value(&a, r), j_value(&b, r), j_value(&c, r));
        let rhs = 2.0 * nu / x * jb;
        let scale = ja.abs() + jc.abs() + rhs.abs();
        prop_assert!((ja + jc - rhs).abs() <= 1e-9 * scale, "nu {} x {}", nu, x);
    }

    #[test]
    fn positive_below_j1_prime(nu in 0.0f64..200.0, t in 1e-3f64..1.0) {
        let x = t * J1_PRIME_ZERO;
        let s = bessel_jy_scaled(nu, x).unwrap();
        prop_assert!(s.j > 0.0);
    }

    #[test]
    fn log_derivative_increases_with_order(nu1 in 0.0f64..150.0, dnu in 1e-3f64..50.0, t in 1e-3f64..1.0) {
        let x = t * J1_PRIME_ZERO;
        let a = bessel_jy_scaled(nu1, x).unwrap().j_log_derivative();
        let b = bessel_jy_scaled(nu1 + dnu, x).unwrap().j_log_derivative();
        prop_assert!(a <= b * (1.0 + 1e-12), "nu1 {} nu2 {} x {}: {} > {}", nu1, nu1 + dnu, x, a, b);
    }

    #[test]
    fn increasing_below_j1_prime(nu in 1.0f64..200.0, t in 1e-3f64..1.0) {
        let x = t * J1_PRIME_ZERO;
        let s = bessel_jy_scaled(nu, x).unwrap();
        let top = bessel_jy_scaled(nu, J1_PRIME_ZERO).unwrap();
        prop_assert!(s.jp >= 0.0);
        prop_assert!(j_value(&s, top.ln_j) <= top.j * (1.0 + 1e-12));
    }

    #[test]
    fn zeros_increase_with_order(nu1 in 0.0f64..190.0, dnu in 1e-2f64..10.0) {
        let a = bessel_first_zero(nu1).unwrap();
        let b = bessel_first_zero(nu1 + dnu).unwrap();
        prop_assert!(a < b);
        prop_assert!(J1_PRIME_ZERO < a);
    }

    #[test]
    fn first_zero_is_a_zero(nu in 0.0f64..200.0) {
        let z = bessel_first_zero(nu).unwrap();
        let s = bessel_jy_scaled(nu, z).unwrap();
        // |J(z)| <= |J'(z)| * 1e-10 means the root is within 1e-10
        prop_assert!(s.j.abs() <= 1e-10 * s.jp.abs(), "nu {}", nu);
        let inner = bessel_jy_scaled(nu, 0.999 * z).unwrap();
        prop_assert!(inner.j > 0.0);
    }
}

#[test]
fn integer_and_near_integer_orders_agree() {
    for &n in &[0.0, 1.0, 2.0, 7.0, 50.0] {
        for &x in &[0.2, 1.5, 3.0, 30.0] {
            let a = bessel_jy(n, x).unwrap();
            let b = bessel_jy(n + 1e-9, x).unwrap();
            assert!((a.y - b.y).abs() < 1e-6 * a.y.abs().max(1.0), "n {n} x {x}");
            assert!((a.j - b.j).abs() < 1e-6 * a.j.abs().max(1e-300) + 1e-15);
        }
    }
}
