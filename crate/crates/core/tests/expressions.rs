use num_traits::Zero;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pathfield::corpus;
use pathfield::expr::{parse, parse_with_dim, Point};
use pathfield::polyhedral::stratify;
use pathfield::rational::{ratio, Rational};

/// Expression text in the input grammar over `x0..x2`.
fn expr_text() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        (0usize..3).prop_map(|i| format!("x{i}")),
        (-4i64..=4, 1i64..=3).prop_map(|(p, q)| format!("{p}/{q}")),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} - {b})")),
            inner.clone().prop_map(|a| format!("-({a})")),
            (-3i64..=3, inner.clone()).prop_map(|(c, a)| format!("{c}*{a}")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("max({a}, {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("min({a}, {b})")),
            inner.clone().prop_map(|a| format!("abs({a})")),
            inner.prop_map(|a| format!("relu({a})")),
        ]
    })
}

fn point3() -> impl Strategy<Value = Point> {
    prop::collection::vec((-16i64..=16, 1i64..=8), 3).prop_map(|v| Point::new(v.into_iter().map(|(p, q)| ratio(p, q)).collect()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn printing_then_parsing_preserves_values(text in expr_text(), xs in prop::collection::vec(point3(), 8)) {
        let e = parse_with_dim(&text, 3).unwrap();
        let again = parse(&e.to_source()).unwrap();
        prop_assert_eq!(again.dim(), 3);
        for x in &xs {
            prop_assert_eq!(e.eval(x).unwrap(), again.eval(x).unwrap());
        }
    }

    #[test]
    fn one_sided_limits_agree(text in expr_text(), x in point3(), d in point3()) {
        // Near x the function is affine along each ray, so the increments at t
        // and 2t scale exactly and both tend to zero.
        let e = parse_with_dim(&text, 3).unwrap();
        let fx = e.eval(&x).unwrap();
        let t = ratio(1, 1 << 40);
        let shifted = |s: &Rational| Point::new(x.coords.iter().zip(&d.coords).map(|(a, b)| a + s * b).collect());
        for sign in [1i64, -1] {
            let t1 = &t * Rational::from_integer(sign.into());
            let t2 = &t1 * Rational::from_integer(2.into());
            let d1 = e.eval(&shifted(&t1)).unwrap() - &fx;
            let d2 = e.eval(&shifted(&t2)).unwrap() - &fx;
            prop_assert_eq!(&d2, &(&d1 * Rational::from_integer(2.into())));
        }
    }
}

#[test]
fn anomaly_function_is_identically_zero() {
    let f = corpus::get("paperf").unwrap().expr().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10_000 {
        let q = ratio(rng.gen_range(-1_000_000..=1_000_000), rng.gen_range(1..=1_000_000));
        assert!(f.eval(&Point::new(vec![q])).unwrap().is_zero());
    }
}

#[test]
fn restrictions_agree_with_evaluation_on_their_strata() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let spread = ratio(1, 2);
    for entry in corpus::entries() {
        let strat = stratify(&entry.expr().unwrap()).unwrap();
        for s in strat.strata() {
            for _ in 0..20 {
                let x = strat.sample_in(s.id, &mut rng, &spread);
                assert!(s.region.contains(&x));
                assert_eq!(s.restriction.eval(&x), strat.expr().eval(&Point::new(x.clone())).unwrap(), "{}", entry.name);
            }
        }
    }
}

#[test]
fn parse_errors_carry_positions() {
    let err = parse("dim 2;\nmax(x0,\n  x1 +)").unwrap_err();
    let text = err.to_string();
    assert!(text.contains('3'), "{text}");
    assert!(parse("dim 1;\nx1").is_err());
    assert!(parse("foo(x0)").is_err());
}
