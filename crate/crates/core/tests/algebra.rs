use std::sync::Arc;

use homog_core::algebra::{beta_pairing, conjugate, gelfand_mean, multiply, AlgebraElement, HAlgebra};
use homog_core::meanvalue::{mean, MeanFunction};
use homog_core::trig::TrigPolynomial;
use homog_core::Complex64;
use proptest::prelude::*;

fn coeff() -> impl Strategy<Value = Complex64> {
    (-2.0f64..2.0, -2.0f64..2.0).prop_map(|(re, im)| Complex64::new(re, im))
}

fn element(alg: Arc<HAlgebra>, bound: i64) -> impl Strategy<Value = AlgebraElement> {
    let rank = alg.rank();
    prop::collection::vec((prop::collection::vec(-bound..=bound, rank), coeff()), 1..6)
        .prop_map(move |terms| AlgebraElement::from_indices(&alg, terms).unwrap())
}

fn periodic() -> impl Strategy<Value = AlgebraElement> {
    element(HAlgebra::periodic(1), 5)
}

fn quasi() -> impl Strategy<Value = AlgebraElement> {
    let alg = HAlgebra::ap_subgroup(vec![vec![1.0], vec![2f64.sqrt()]], 4).unwrap();
    element(alg, 2)
}

fn same(a: &AlgebraElement, b: &AlgebraElement, tol: f64) -> bool {
    let keys = a.coefficients().keys().chain(b.coefficients().keys());
    let zero = Complex64::new(0.0, 0.0);
    keys.into_iter().all(|k| {
        let x = a.coefficients().get(k).copied().unwrap_or(zero);
        let y = b.coefficients().get(k).copied().unwrap_or(zero);
        (x - y).norm() <= tol * (1.0 + x.norm())
    })
}

fn trig_1d() -> impl Strategy<Value = TrigPolynomial> {
    prop::collection::vec((-6i32..=6, coeff()), 1..6).prop_map(|terms| {
        TrigPolynomial::new(1, terms.into_iter().map(|(k, c)| (vec![k as f64], c))).unwrap()
    })
}

proptest! {
    #[test]
    fn product_commutes(u in periodic(), v in periodic()) {
        prop_assert!(same(&multiply(&u, &v).unwrap(), &multiply(&v, &u).unwrap(), 1e-12));
    }

    #[test]
    fn product_associates(u in periodic(), v in periodic(), w in periodic()) {
        let l = multiply(&multiply(&u, &v).unwrap(), &w).unwrap();
        let r = multiply(&u, &multiply(&v, &w).unwrap()).unwrap();
        prop_assert!(same(&l, &r, 1e-11));
    }

    #[test]
    fn quasi_periodic_product_commutes(u in quasi(), v in quasi()) {
        prop_assert!(same(&multiply(&u, &v).unwrap(), &multiply(&v, &u).unwrap(), 1e-12));
    }

    #[test]
    fn parseval_is_exact(u in quasi()) {
        let beta = beta_pairing(&u, &conjugate(&u)).unwrap();
        let energy: f64 = u.coefficients().values().map(|c| c.norm_sqr()).sum();
        prop_assert_eq!(beta.re, energy);
        prop_assert_eq!(beta.im, 0.0);
    }

    #[test]
    fn beta_pairing_is_the_mean_of_the_product(u in periodic(), v in periodic()) {
        let beta = beta_pairing(&u, &v).unwrap();
        let m = gelfand_mean(&multiply(&u, &v).unwrap());
        prop_assert!((beta - m).norm() <= 1e-12 * (1.0 + beta.norm()));
    }

    #[test]
    fn mean_is_linear(s in trig_1d(), t in trig_1d(), a in coeff()) {
        let ms = mean(&MeanFunction::periodic_trig("s", s.clone()).unwrap()).unwrap();
        let mt = mean(&MeanFunction::periodic_trig("t", t.clone()).unwrap()).unwrap();
        let st = MeanFunction::periodic_trig("s+at", s.add(&t.scale(a)).unwrap()).unwrap();
        let got = mean(&st).unwrap();
        prop_assert!((got - (ms + mt * a)).norm() <= 1e-12 * (1.0 + ms.norm() + mt.norm() * a.norm()));
    }

    #[test]
    fn mean_is_bounded_by_the_sup(s in trig_1d()) {
        let m = mean(&MeanFunction::periodic_trig("s", s.clone()).unwrap()).unwrap();
        let sup = (0..512).map(|i| s.eval(&[i as f64 / 512.0]).norm()).fold(0.0, f64::max);
        prop_assert!(m.norm() <= sup * (1.0 + 1e-12) + 1e-14);
    }

    #[test]
    fn quadrature_mean_agrees_with_the_coefficient(s in trig_1d()) {
        let closed = mean(&MeanFunction::periodic_trig("s", s.clone()).unwrap()).unwrap();
        let t = s.clone();
        let sampled = mean(&MeanFunction::periodic("s", 1, move |x| t.eval(x))).unwrap();
        prop_assert!((closed - sampled).norm() <= 1e-10 * (1.0 + s.coefficient_l1()));
    }
}
