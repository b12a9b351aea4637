use proptest::prelude::*;
use seqwarp_expr::{parse_expression, Expr, Func};

const COORDS: [&str; 3] = ["u", "v", "w"];

/// Random trees that stay inside every function's domain on [-1, 1]^3.
fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-3.0f64..3.0).prop_map(Expr::constant),
        (0usize..3).prop_map(|i| Expr::var(i, COORDS[i])),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
            // Denominator bounded away from zero.
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| a / (Expr::constant(1.5) + Expr::call(Func::Sin, b))),
            (inner.clone(), -3i32..4).prop_map(|(a, k)| {
                if k < 0 {
                    Expr::pow(Expr::constant(2.0) + Expr::call(Func::Cos, a), k)
                } else {
                    Expr::pow(a, k)
                }
            }),
            inner.clone().prop_map(|a| -a),
            inner.clone().prop_map(|a| Expr::call(Func::Sin, a)),
            inner.clone().prop_map(|a| Expr::call(Func::Cos, a)),
            inner.clone().prop_map(|a| Expr::call(Func::Tanh, a)),
            inner
                .clone()
                .prop_map(|a| Expr::call(Func::Exp, Expr::call(Func::Sin, a))),
            inner.clone().prop_map(|a| {
                Expr::call(Func::Ln, Expr::constant(1.0) + Expr::pow(a, 2))
            }),
            inner.prop_map(|a| {
                Expr::call(Func::Sqrt, Expr::constant(2.0) + Expr::call(Func::Sin, a))
            }),
        ]
    })
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn printed_form_parses_back(e in arb_expr(), pts in prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), 100)) {
        let printed = e.to_string();
        let back = parse_expression(&printed, &COORDS).unwrap();
        for p in &pts {
            let a = e.eval(p).unwrap();
            let b = back.eval(p).unwrap();
            prop_assert!(a == b || close(a, b, 1e-15), "{printed}: {a} vs {b}");
        }
    }

    #[test]
    fn mixed_partials_commute(e in arb_expr(), u in 0usize..3, v in 0usize..3, p in prop::array::uniform3(-1.0f64..1.0)) {
        let uv = e.differentiate(u).differentiate(v).eval(&p).unwrap();
        let vu = e.differentiate(v).differentiate(u).eval(&p).unwrap();
        prop_assert!(close(uv, vu, 1e-12), "{e}: {uv} vs {vu}");
    }

    #[test]
    fn derivative_matches_central_difference(e in arb_expr(), i in 0usize..3, p in prop::array::uniform3(-0.9f64..0.9)) {
        // Loose check: only guards against a wrong differentiation rule.
        let h = 1e-5;
        let mut hi = p;
        let mut lo = p;
        hi[i] += h;
        lo[i] -= h;
        let fd = (e.eval(&hi).unwrap() - e.eval(&lo).unwrap()) / (2.0 * h);
        let exact = e.differentiate(i).eval(&p).unwrap();
        prop_assert!(close(fd, exact, 1e-4), "{e}: fd {fd} vs exact {exact}");
    }
}
