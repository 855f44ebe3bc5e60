//! Minkowski metric algebra for arbitrary n >= 2: Lorentz scalar products,
//! index raising/lowering, the d'Alembert operator on space-time functions,
//! and causal classification.

use num::{Signed, Zero};

use crate::error::{Error, Result};
use crate::expr::{differentiate, normalize, Dim, Expr, Rational, Var};

/// Flat metric `g = diag(1, -1, ..., -1)` on `n + 1` components.
///
/// All public vectors are contravariant; lowering an index is explicit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Metric {
    dim: Dim,
}

/// Causal type of a numeric vector; the zero vector is space-like.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CausalClass {
    TimeLike,
    LightLike,
    SpaceLike,
}

impl std::fmt::Display for CausalClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CausalClass::TimeLike => write!(f, "time-like"),
            CausalClass::LightLike => write!(f, "light-like"),
            CausalClass::SpaceLike => write!(f, "space-like"),
        }
    }
}

impl Metric {
    pub fn new(dim: Dim) -> Self {
        Metric { dim }
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.dim.n()
    }

    /// Diagonal entry `g_{mu mu} = g^{mu mu}` as a signed unit.
    pub fn sign(&self, mu: usize) -> i64 {
        if mu == 0 {
            1
        } else {
            -1
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim.components() {
            return Err(Error::LengthMismatch {
                expected: self.dim.components(),
                got: len,
            });
        }
        Ok(())
    }

    /// Lorentz scalar product `x*y = x^0 y^0 - sum_a x^a y^a` of
    /// contravariant expression vectors.
    pub fn scalar_product(&self, x: &[Expr], y: &[Expr]) -> Result<Expr> {
        self.check_len(x.len())?;
        self.check_len(y.len())?;
        let terms: Vec<Expr> = self
            .dim
            .indices()
            .map(|mu| Expr::int(self.sign(mu)) * x[mu].clone() * y[mu].clone())
            .collect();
        normalize(&Expr::Sum(terms))
    }

    /// Classification of a numeric vector by the sign of `x*x`; the zero
    /// vector counts as space-like.
    pub fn causal_class(&self, x: &[Rational]) -> Result<CausalClass> {
        self.check_len(x.len())?;
        if x.iter().all(Rational::is_zero) {
            return Ok(CausalClass::SpaceLike);
        }
        let mut q = Rational::zero();
        for mu in self.dim.indices() {
            let term = &x[mu] * &x[mu];
            if mu == 0 {
                q += term;
            } else {
                q -= term;
            }
        }
        Ok(if q.is_positive() {
            CausalClass::TimeLike
        } else if q.is_zero() {
            CausalClass::LightLike
        } else {
            CausalClass::SpaceLike
        })
    }

    /// Lowers an index: component 0 unchanged, spatial components negated.
    pub fn lower(&self, v: &[Expr]) -> Result<Vec<Expr>> {
        self.check_len(v.len())?;
        self.dim
            .indices()
            .map(|mu| normalize(&(Expr::int(self.sign(mu)) * v[mu].clone())))
            .collect()
    }

    /// Raises an index; inverse of [`Metric::lower`].
    pub fn raise(&self, v: &[Expr]) -> Result<Vec<Expr>> {
        self.lower(v)
    }

    /// Coordinate expression `x_mu = g_{mu nu} x^nu`.
    pub fn coord_lowered(&self, mu: usize) -> Expr {
        if mu == 0 {
            Expr::coord(0)
        } else {
            Expr::Prod(vec![Expr::int(-1), Expr::coord(mu)])
        }
    }

    /// The interval `x*x` as an expression.
    pub fn interval(&self) -> Result<Expr> {
        let coords: Vec<Expr> = self.dim.indices().map(Expr::coord).collect();
        self.scalar_product(&coords, &coords)
    }

    /// Wave operator on explicit space-time functions:
    /// `Box e = g^{mu nu} d_mu d_nu e`. Rejects input that depends on `u` or
    /// its derivatives; the symmetry machinery handles those terms itself.
    pub fn dalembertian(&self, e: &Expr) -> Result<Expr> {
        if e.depends_on_u() {
            return Err(Error::UDependent(e.to_string()));
        }
        self.dalembertian_xu(e)
    }

    /// Wave operator applied with `u` held fixed; crate-internal building
    /// block for residuals of functions of `(x, u)`.
    pub(crate) fn dalembertian_xu(&self, e: &Expr) -> Result<Expr> {
        let mut terms = Vec::with_capacity(self.dim.components());
        for mu in self.dim.indices() {
            let d1 = differentiate(e, Var::Coord(mu))?;
            let d2 = differentiate(&d1, Var::Coord(mu))?;
            terms.push(Expr::int(self.sign(mu)) * d2);
        }
        normalize(&Expr::Sum(terms))
    }
}
