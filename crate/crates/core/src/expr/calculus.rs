use super::ast::{Binding, Dim, Expr, Func, Target, Var};
use crate::error::{Error, Result};

fn diff_raw(e: &Expr, v: Var) -> Result<Expr> {
    Ok(match e {
        Expr::Rat(_) | Expr::Sym(_) => Expr::zero(),
        Expr::Var(w) => {
            if *w == v {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Expr::Sum(ts) => Expr::Sum(
            ts.iter()
                .map(|t| diff_raw(t, v))
                .collect::<Result<Vec<_>>>()?,
        ),
        Expr::Prod(fs) => {
            let mut terms = Vec::with_capacity(fs.len());
            for (i, f) in fs.iter().enumerate() {
                let mut factors: Vec<Expr> = Vec::with_capacity(fs.len());
                for (j, g) in fs.iter().enumerate() {
                    if i == j {
                        factors.push(diff_raw(f, v)?);
                    } else {
                        factors.push(g.clone());
                    }
                }
                terms.push(Expr::Prod(factors));
            }
            Expr::Sum(terms)
        }
        Expr::Quot(a, b) => {
            let da = diff_raw(a, v)?;
            let db = diff_raw(b, v)?;
            let num = da * (*b.clone()) - (*a.clone()) * db;
            num / (b.clone().powi(2))
        }
        Expr::Pow(b, q) => {
            if q.mentions(v) || !q.free().0.is_empty() {
                return Err(Error::UnsupportedExponent(format!(
                    "cannot differentiate exponent {q}"
                )));
            }
            let db = diff_raw(b, v)?;
            let qm1 = (*q.clone()) + Expr::int(-1);
            (*q.clone()) * b.clone().pow(qm1) * db
        }
        Expr::Fun(f, a) => {
            let da = diff_raw(a, v)?;
            match f {
                Func::Sin => a.clone().cos() * da,
                Func::Cos => -(a.clone().sin()) * da,
                Func::Exp => a.clone().exp() * da,
                Func::Ln => da / (*a.clone()),
            }
        }
    })
}

/// Exact partial derivative; `x^mu`, `u` and `u_mu` are independent symbols.
pub fn differentiate(e: &Expr, v: Var) -> Result<Expr> {
    super::normalize(&diff_raw(e, v)?)
}

/// Truncated total derivative `D_mu = d/dx^mu + u_mu d/du`.
pub fn total_derivative(e: &Expr, mu: usize, dim: Dim) -> Result<Expr> {
    dim.check_index(mu)?;
    let dx = diff_raw(e, Var::Coord(mu))?;
    let du = diff_raw(e, Var::U)?;
    super::normalize(&(dx + Expr::du(mu) * du))
}

fn subst_raw(e: &Expr, b: &Binding) -> Expr {
    match e {
        Expr::Rat(_) => e.clone(),
        Expr::Sym(name) => b
            .get(&Target::Sym(name.clone()))
            .cloned()
            .unwrap_or_else(|| e.clone()),
        Expr::Var(v) => b
            .get(&Target::Var(*v))
            .cloned()
            .unwrap_or_else(|| e.clone()),
        Expr::Sum(ts) => Expr::Sum(ts.iter().map(|t| subst_raw(t, b)).collect()),
        Expr::Prod(ts) => Expr::Prod(ts.iter().map(|t| subst_raw(t, b)).collect()),
        Expr::Quot(x, y) => Expr::Quot(
            Box::new(subst_raw(x, b)),
            Box::new(subst_raw(y, b)),
        ),
        Expr::Pow(x, q) => Expr::Pow(
            Box::new(subst_raw(x, b)),
            Box::new(subst_raw(q, b)),
        ),
        Expr::Fun(f, a) => Expr::Fun(*f, Box::new(subst_raw(a, b))),
    }
}

/// Simultaneous substitution followed by normalization. Denominators of the
/// bound values are tracked in factored form so that compositions of
/// rational maps stay tractable.
pub fn substitute(e: &Expr, binding: &Binding) -> Result<Expr> {
    let rf = super::normal::substitute_ratfun(e, binding)?;
    Ok(super::normal::ratfun_to_expr(&rf))
}

/// Raw tree replacement without normalization; exponent subtrees get this.
pub(crate) fn substitute_shallow(e: &Expr, binding: &Binding) -> Expr {
    subst_raw(e, binding)
}
