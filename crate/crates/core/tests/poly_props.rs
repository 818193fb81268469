use ksphere::model::{
    build_general, canonical_coeffs, check_sphere_conditions, darboux_residual, ExactParams, GeneralCubicCoeffs,
};
use ksphere::poly::{parse_poly, ratio, Monomial, SparsePoly};
use num_rational::BigRational;
use proptest::prelude::*;

fn rational() -> impl Strategy<Value = BigRational> {
    (-9i64..=9, 1i64..=5).prop_map(|(n, d)| ratio(n, d))
}

fn monomial() -> impl Strategy<Value = Monomial> {
    (0u32..4, 0u32..4, 0u32..4).prop_map(|(a, b, c)| Monomial::new(a, b, c))
}

fn poly() -> impl Strategy<Value = SparsePoly> {
    prop::collection::vec((monomial(), rational()), 0..7).prop_map(SparsePoly::from_terms)
}

fn point() -> impl Strategy<Value = [BigRational; 3]> {
    [rational(), rational(), rational()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn evaluation_is_a_ring_homomorphism(p in poly(), q in poly(), x in point()) {
        prop_assert_eq!((&p + &q).evaluate_exact(&x), p.evaluate_exact(&x) + q.evaluate_exact(&x));
        prop_assert_eq!((&p - &q).evaluate_exact(&x), p.evaluate_exact(&x) - q.evaluate_exact(&x));
        prop_assert_eq!((&p * &q).evaluate_exact(&x), p.evaluate_exact(&x) * q.evaluate_exact(&x));
    }

    #[test]
    fn division_reconstructs_and_reduces(p in poly(), d in poly()) {
        prop_assume!(!d.is_zero());
        let (q, r) = p.divide(&d).unwrap();
        prop_assert_eq!(&(&q * &d) + &r, p);
        let (lead, _) = d.leading_term().unwrap();
        for (m, _) in r.terms() {
            prop_assert!(!lead.divides(m), "remainder term {:?} divisible by {:?}", m, lead);
        }
    }

    #[test]
    fn partials_obey_the_product_rule(p in poly(), q in poly(), var in 0usize..3) {
        let lhs = (&p * &q).partial(var);
        let rhs = &(&p.partial(var) * &q) + &(&p * &q.partial(var));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn rendering_round_trips(p in poly()) {
        prop_assert_eq!(parse_poly(&p.to_string()).unwrap(), p);
    }

    #[test]
    fn float_evaluation_tracks_exact(p in poly(), x in point()) {
        use num_traits::ToPrimitive;
        let xf = [x[0].to_f64().unwrap(), x[1].to_f64().unwrap(), x[2].to_f64().unwrap()];
        let exact = p.evaluate_exact(&x).to_f64().unwrap();
        let scale = p.terms().map(|(_, c)| c.to_f64().unwrap().abs()).sum::<f64>() * 729.0 + 1.0;
        prop_assert!((p.evaluate(xf) - exact).abs() <= 1e-12 * scale);
        prop_assert!((p.compile().eval(xf) - exact).abs() <= 1e-12 * scale);
    }
}

/// Coefficients near the invariant set: canonical ones with a few entries
/// replaced at random, so both outcomes are common.
fn near_invariant() -> impl Strategy<Value = GeneralCubicCoeffs> {
    let params = ([rational(), rational(), rational()], [rational(), rational(), rational()]);
    let edits = prop::collection::vec((0usize..30, rational()), 0..3);
    (params, edits).prop_map(|((alpha, d), edits)| {
        let mut c = canonical_coeffs(&ExactParams { alpha, d });
        for (k, v) in edits {
            let mut entries = c.entries_mut();
            *entries[k].1 = v;
        }
        c
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn closed_form_conditions_agree_with_division(c in near_invariant()) {
        let cert = check_sphere_conditions(&c);
        let (cofactor, remainder) = darboux_residual(&build_general(&c));
        prop_assert_eq!(cert.status.is_invariant(), remainder.is_zero());
        if let Some(k) = cert.cofactor {
            prop_assert_eq!(k, cofactor);
        }
    }
}
