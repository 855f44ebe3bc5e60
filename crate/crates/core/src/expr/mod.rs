//! Minimal symbolic expression kernel: parsing, canonical normalization,
//! exact differentiation, substitution, zero testing and point evaluation
//! over coordinates `x0..xn`, the dependent variable `u`, its first
//! derivatives `u_0..u_n` and named symbolic constants.

mod ast;
mod calculus;
mod display;
mod eval;
mod gcd;
pub(crate) mod normal;
mod parser;
mod zero;

pub use ast::{Binding, Dim, Expr, Rational, Target, Var};
pub use calculus::{differentiate, substitute, total_derivative};
pub(crate) use calculus::substitute_shallow;
pub use eval::{evaluate, rat, Value};
pub use parser::parse;
pub use zero::{is_zero, is_zero_default, vanishes, ZeroVerdict, DEFAULT_SEED, ZERO_TOL};

pub use ast::Func;

use crate::error::Result;

/// Rewrites an expression into the canonical normal form: an expanded sum of
/// monomials over a single common denominator with reduced coefficients and
/// cancelled polynomial gcd. Idempotent.
pub fn normalize(e: &Expr) -> Result<Expr> {
    let rf = normal::to_ratfun(e)?;
    Ok(normal::ratfun_to_expr(&rf))
}

/// True when the expression has no free variables (symbols allowed).
pub fn is_constant_in_vars(e: &Expr) -> bool {
    e.free().0.is_empty()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dim3() -> Dim {
        Dim::new(3).unwrap()
    }

    fn p(text: &str) -> Expr {
        parse(text, dim3()).unwrap()
    }

    #[test]
    fn parse_polynomial() {
        let e = p("x0^2 - x1^2");
        let direct =
            normalize(&(Expr::coord(0).powi(2) - Expr::coord(1).powi(2))).unwrap();
        assert_eq!(e, direct);
    }

    #[test]
    fn parse_round_trip_is_identity() {
        for text in [
            "u_0*u_1 + F0*u^3",
            "x0^2 - x1^2",
            "(x0 + x1)/(x2 - 1)",
            "sin(u)^2 + cos(u)^2",
            "u^k/u",
            "1/2*x0 - 3*x1*x2",
            "exp(x0)*ln(x1 + 2)",
        ] {
            let e = p(text);
            let printed = e.to_string();
            let reparsed = parse(&printed, dim3()).unwrap();
            assert_eq!(e, reparsed, "round trip failed for {text} -> {printed}");
        }
    }

    #[test]
    fn parse_error_has_position() {
        let err = parse("x0 +", dim3()).unwrap_err();
        match err {
            crate::error::Error::Parse { offset, .. } => assert_eq!(offset, 4),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_out_of_range_index() {
        let err = parse("x7", dim3()).unwrap_err();
        match err {
            crate::error::Error::Parse { offset, message } => {
                assert_eq!(offset, 0);
                assert!(message.contains("out of range"));
            }
            other => panic!("unexpected error {other:?}"),
        }
        assert!(parse("u_9", dim3()).is_err());
    }

    #[test]
    fn normalization_is_idempotent() {
        for text in ["(x0 + x1)^3/(x0 - x1)", "u^k*u_0/(F0 + 1)", "sin(u)*sin(u)"] {
            let e = p(text);
            assert_eq!(e, normalize(&e).unwrap());
        }
    }

    #[test]
    fn differentiation_examples() {
        // d/dx1 (x0^2 - x1^2) = -2 x1
        let e = p("x0^2 - x1^2");
        let d = differentiate(&e, Var::Coord(1)).unwrap();
        assert_eq!(d, p("-2*x1"));
        // d/du u^3 = 3 u^2
        let d = differentiate(&p("u^3"), Var::U).unwrap();
        assert_eq!(d, p("3*u^2"));
        // d/dx0 sin(u) = 0
        let d = differentiate(&p("sin(u)"), Var::Coord(0)).unwrap();
        assert!(d.is_zero_node());
    }

    #[test]
    fn formal_power_differentiation() {
        // d/du u^k = k u^(k-1)
        let d = differentiate(&p("u^k"), Var::U).unwrap();
        assert_eq!(d, p("k*u^(k - 1)"));
        // u * u^(k-1) recombines to u^k
        let back = normalize(&(Expr::u() * p("u^(k - 1)"))).unwrap();
        assert_eq!(back, p("u^k"));
    }

    #[test]
    fn total_derivative_examples() {
        // D_0 u = u_0
        let d = total_derivative(&p("u"), 0, dim3()).unwrap();
        assert_eq!(d, p("u_0"));
        // D_1 (x1 u) = u + x1 u_1
        let d = total_derivative(&p("x1*u"), 1, dim3()).unwrap();
        assert_eq!(d, p("u + x1*u_1"));
        // D_0 (x0^2) = 2 x0
        let d = total_derivative(&p("x0^2"), 0, dim3()).unwrap();
        assert_eq!(d, p("2*x0"));
    }

    #[test]
    fn substitution_examples() {
        let b = Binding::with_dim(dim3())
            .bind_var(Var::U, p("x0 + 1"))
            .unwrap();
        let e = substitute(&p("u^2"), &b).unwrap();
        assert_eq!(e, p("x0^2 + 2*x0 + 1"));

        let empty = Binding::new();
        let e = p("u_0*x1");
        assert_eq!(substitute(&e, &empty).unwrap(), e);
    }

    #[test]
    fn zero_testing() {
        // trig identity: needs sampling
        let e = p("sin(u)^2 + cos(u)^2 - 1");
        assert_eq!(is_zero_default(&e).unwrap(), ZeroVerdict::Zero);
        // polynomial identity: structural
        let e = p("(x0 + x1)^2 - x0^2 - 2*x0*x1 - x1^2");
        assert_eq!(is_zero_default(&e).unwrap(), ZeroVerdict::Zero);
        assert!(normalize(&e).unwrap().is_zero_node());
        // nonzero
        let e = p("x0 - x1");
        assert_eq!(is_zero_default(&e).unwrap(), ZeroVerdict::Nonzero);
    }

    #[test]
    fn evaluation_examples() {
        let pt = Binding::new()
            .bind_var(Var::Coord(0), Expr::int(3))
            .unwrap();
        let v = evaluate(&p("x0^2"), &pt).unwrap();
        assert_eq!(v, Value::Rat(rat(9, 1)));

        let pt = Binding::new()
            .bind_var(Var::Coord(0), Expr::int(0))
            .unwrap();
        assert!(evaluate(&p("1/x0"), &pt).is_err());

        let v = evaluate(&p("exp(0)"), &Binding::new()).unwrap();
        assert_eq!(v.to_f64(), 1.0);
    }

    #[test]
    fn rational_quotient_normal_form() {
        // gcd cancellation in quotients
        let e = p("(x0^2 - x1^2)/(x0 - x1)");
        assert_eq!(e, p("x0 + x1"));
        // denominator scalar normalization
        let e = p("x0/(2*x1)");
        assert_eq!(e, p("(1/2)*x0/x1"));
    }

    #[test]
    fn symbolic_exponent_arithmetic() {
        // u^k / u^k = 1
        let e = p("u^k/u^k");
        assert!(e.is_one_node());
        // u^k * u^k = u^(2k)
        let e = p("u^k*u^k");
        assert_eq!(e, p("u^(2*k)"));
        // binding k to an integer collapses to an ordinary power
        let b = Binding::new().bind_sym("k", Expr::int(3)).unwrap();
        assert_eq!(substitute(&p("u^k"), &b).unwrap(), p("u^3"));
    }

    #[test]
    fn fractional_powers_collapse() {
        let sqrt = p("(x0 + x1)^(1/2)");
        let sq = normalize(&(sqrt.clone() * sqrt)).unwrap();
        assert_eq!(sq, p("x0 + x1"));
    }

    #[test]
    fn division_by_zero_detected() {
        assert!(parse("1/(x0 - x0)", dim3()).is_err());
    }
}

#[cfg(test)]
mod prop_tests {
    use super::*;
    use proptest::prelude::*;

    fn dim3() -> Dim {
        Dim::new(3).unwrap()
    }

    /// Random sparse polynomial over x0..x3, u, u_0..u_3 with small degrees.
    fn arb_poly() -> impl Strategy<Value = Expr> {
        let var = prop_oneof![
            (0usize..=3).prop_map(Expr::coord),
            Just(Expr::u()),
            (0usize..=3).prop_map(Expr::du),
        ];
        let atom = prop_oneof![
            var,
            (-6i64..=6).prop_map(Expr::int),
            Just(Expr::sym("a")),
        ];
        let monomial = proptest::collection::vec((atom, 1u32..=2), 1..=3).prop_map(|fs| {
            Expr::Prod(
                fs.into_iter()
                    .map(|(b, e)| b.powi(e as i64))
                    .collect::<Vec<_>>(),
            )
        });
        proptest::collection::vec(monomial, 1..=4).prop_map(Expr::Sum)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn partials_commute(e in arb_poly(), v in 0usize..=3, w in 0usize..=3) {
            let dv = differentiate(&e, Var::Coord(v)).unwrap();
            let dvw = differentiate(&dv, Var::Coord(w)).unwrap();
            let dw = differentiate(&e, Var::Coord(w)).unwrap();
            let dwv = differentiate(&dw, Var::Coord(v)).unwrap();
            prop_assert_eq!(dvw, dwv);
        }

        #[test]
        fn product_rule(e in arb_poly(), f in arb_poly(), v in 0usize..=3) {
            let lhs = differentiate(&(e.clone() * f.clone()), Var::Coord(v)).unwrap();
            let rhs = normalize(&(
                differentiate(&e, Var::Coord(v)).unwrap() * f.clone()
                    + e.clone() * differentiate(&f, Var::Coord(v)).unwrap()
            )).unwrap();
            let diff = normalize(&(lhs - rhs)).unwrap();
            prop_assert!(diff.is_zero_node());
        }

        #[test]
        fn total_derivative_matches_partial_without_u(e in arb_poly(), mu in 0usize..=3) {
            // strip u and u_mu by substituting coordinates for them
            let b = Binding::new()
                .bind_var(Var::U, Expr::coord(0)).unwrap()
                .bind_var(Var::Du(0), Expr::coord(1)).unwrap()
                .bind_var(Var::Du(1), Expr::coord(1)).unwrap()
                .bind_var(Var::Du(2), Expr::coord(2)).unwrap()
                .bind_var(Var::Du(3), Expr::coord(3)).unwrap();
            let g = substitute(&e, &b).unwrap();
            let td = total_derivative(&g, mu, dim3()).unwrap();
            let pd = differentiate(&g, Var::Coord(mu)).unwrap();
            prop_assert_eq!(td, pd);
        }

        #[test]
        fn zero_test_sound_for_polynomials(e in arb_poly()) {
            let n = normalize(&e).unwrap();
            let verdict = is_zero_default(&e).unwrap();
            if n.is_zero_node() {
                prop_assert_eq!(verdict, ZeroVerdict::Zero);
            } else {
                prop_assert_eq!(verdict, ZeroVerdict::Nonzero);
            }
        }

        #[test]
        fn print_parse_closure(e in arb_poly()) {
            let n = normalize(&e).unwrap();
            let reparsed = parse(&n.to_string(), dim3()).unwrap();
            prop_assert_eq!(n, reparsed);
        }
    }
}
