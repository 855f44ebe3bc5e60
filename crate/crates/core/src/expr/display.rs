//! Canonical text form. Printing a normalized expression and reparsing it
//! recovers the same normalized expression.

use std::fmt;

use num::{One, Signed};

use super::ast::{Expr, Rational};

// precedence levels: sum 1, product/quotient 2, power 3, atom 4
fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Sum(_) => 1,
        Expr::Prod(_) | Expr::Quot(_, _) => 2,
        Expr::Pow(_, _) => 3,
        Expr::Rat(r) => {
            if r.is_negative() {
                1
            } else if r.is_integer() {
                4
            } else {
                2 // printed as p/q
            }
        }
        _ => 4,
    }
}

fn fmt_rational(r: &Rational) -> String {
    if r.is_integer() {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Splits a term into sign and magnitude text for sum rendering.
fn term_with_sign(e: &Expr) -> (bool, String) {
    match e {
        Expr::Rat(r) if r.is_negative() => (true, fmt_rational(&-r.clone())),
        Expr::Prod(fs) => {
            if let Some(Expr::Rat(c)) = fs.first() {
                if c.is_negative() {
                    let abs = -c.clone();
                    let mut rest: Vec<Expr> = fs[1..].to_vec();
                    if !abs.is_one() {
                        rest.insert(0, Expr::Rat(abs));
                    }
                    let repl = if rest.len() == 1 {
                        rest.pop().unwrap()
                    } else {
                        Expr::Prod(rest)
                    };
                    return (true, fmt_prec(&repl, 2));
                }
            }
            (false, fmt_prec(e, 2))
        }
        _ => (false, fmt_prec(e, 2)),
    }
}

fn fmt_prec(e: &Expr, min: u8) -> String {
    let s = fmt_bare(e);
    if prec(e) < min {
        format!("({s})")
    } else {
        s
    }
}

fn fmt_bare(e: &Expr) -> String {
    match e {
        Expr::Rat(r) => fmt_rational(r),
        Expr::Sym(s) => s.clone(),
        Expr::Var(v) => v.to_string(),
        Expr::Sum(terms) => {
            let mut out = String::new();
            for (i, t) in terms.iter().enumerate() {
                let (neg, body) = term_with_sign(t);
                if i == 0 {
                    if neg {
                        out.push('-');
                    }
                } else if neg {
                    out.push_str(" - ");
                } else {
                    out.push_str(" + ");
                }
                out.push_str(&body);
            }
            out
        }
        Expr::Prod(fs) => fs
            .iter()
            .map(|f| fmt_prec(f, 3).to_string())
            .collect::<Vec<_>>()
            .join("*"),
        Expr::Quot(a, b) => {
            let num = fmt_prec(a, 2);
            let den = fmt_prec(b, 3);
            format!("{num}/{den}")
        }
        Expr::Pow(b, q) => {
            let base = fmt_prec(b, 4);
            let exp = match q.as_ref() {
                Expr::Rat(r) if r.is_integer() && !r.is_negative() => fmt_rational(r),
                Expr::Sym(s) => s.clone(),
                other => format!("({})", fmt_bare(other)),
            };
            format!("{base}^{exp}")
        }
        Expr::Fun(f, a) => format!("{}({})", f.name(), fmt_bare(a)),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", fmt_bare(self))
    }
}
