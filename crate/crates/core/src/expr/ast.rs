use std::fmt;

use num::{BigInt, BigRational, One, Zero};

use crate::error::{Error, Result};

/// Exact rational scalar used throughout the crate.
pub type Rational = BigRational;

/// Space-time dimension parameter `n` (coordinates run over `x0..x<n>`).
///
/// The configured dimension is `n >= 2`; vectors and metrics have `n + 1`
/// components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Dim(usize);

impl Dim {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::DimensionTooSmall(n));
        }
        Ok(Dim(n))
    }

    /// The spatial dimension `n`.
    pub fn n(&self) -> usize {
        self.0
    }

    /// Number of space-time components, `n + 1`.
    pub fn components(&self) -> usize {
        self.0 + 1
    }

    /// Iterator over component indices `0..=n`.
    pub fn indices(&self) -> impl Iterator<Item = usize> {
        0..=self.0
    }

    pub fn check_index(&self, index: usize) -> Result<()> {
        if index > self.0 {
            return Err(Error::IndexOutOfRange {
                index,
                dim: self.0,
            });
        }
        Ok(())
    }
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A variable of the jet-space coordinate ring: a space-time coordinate
/// `x^mu`, the dependent variable `u`, or a first derivative `u_mu`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    Coord(usize),
    U,
    Du(usize),
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Coord(mu) => write!(f, "x{mu}"),
            Var::U => write!(f, "u"),
            Var::Du(mu) => write!(f, "u_{mu}"),
        }
    }
}

/// Unary transcendental functions supported by the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
}

impl Func {
    pub fn name(&self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "ln" => Some(Func::Ln),
            _ => None,
        }
    }
}

/// Immutable symbolic expression tree.
///
/// Operations in this module return expressions in a canonical normal form:
/// an expanded sum of monomials over a single common denominator, with
/// transcendental calls and formal (non-integer) powers kept as atoms.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    /// Exact rational constant.
    Rat(Rational),
    /// Named symbolic constant (`F0`, `k`, `m`, ...).
    Sym(String),
    Var(Var),
    Sum(Vec<Expr>),
    Prod(Vec<Expr>),
    /// Power with a constant (integer, rational or symbolic) exponent.
    Pow(Box<Expr>, Box<Expr>),
    Quot(Box<Expr>, Box<Expr>),
    Fun(Func, Box<Expr>),
}

impl Expr {
    pub fn int(v: i64) -> Expr {
        Expr::Rat(Rational::from(BigInt::from(v)))
    }

    pub fn rat(num: i64, den: i64) -> Expr {
        Expr::Rat(Rational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn sym(name: impl Into<String>) -> Expr {
        Expr::Sym(name.into())
    }

    pub fn coord(mu: usize) -> Expr {
        Expr::Var(Var::Coord(mu))
    }

    pub fn u() -> Expr {
        Expr::Var(Var::U)
    }

    pub fn du(mu: usize) -> Expr {
        Expr::Var(Var::Du(mu))
    }

    pub fn zero() -> Expr {
        Expr::Rat(Rational::zero())
    }

    pub fn one() -> Expr {
        Expr::Rat(Rational::one())
    }

    pub fn pow(self, exponent: Expr) -> Expr {
        Expr::Pow(Box::new(self), Box::new(exponent))
    }

    pub fn powi(self, exponent: i64) -> Expr {
        self.pow(Expr::int(exponent))
    }

    pub fn sin(self) -> Expr {
        Expr::Fun(Func::Sin, Box::new(self))
    }

    pub fn cos(self) -> Expr {
        Expr::Fun(Func::Cos, Box::new(self))
    }

    pub fn exp(self) -> Expr {
        Expr::Fun(Func::Exp, Box::new(self))
    }

    pub fn ln(self) -> Expr {
        Expr::Fun(Func::Ln, Box::new(self))
    }

    pub fn is_zero_node(&self) -> bool {
        matches!(self, Expr::Rat(r) if r.is_zero())
    }

    pub fn is_one_node(&self) -> bool {
        matches!(self, Expr::Rat(r) if r.is_one())
    }

    /// Rational value if the expression is a bare constant.
    pub fn as_rational(&self) -> Option<&Rational> {
        match self {
            Expr::Rat(r) => Some(r),
            _ => None,
        }
    }

    /// Collects the free variables and symbolic constants of the tree,
    /// including symbols appearing in exponents.
    pub fn free(&self) -> (std::collections::BTreeSet<Var>, std::collections::BTreeSet<String>) {
        let mut vars = std::collections::BTreeSet::new();
        let mut syms = std::collections::BTreeSet::new();
        self.collect_free(&mut vars, &mut syms);
        (vars, syms)
    }

    fn collect_free(
        &self,
        vars: &mut std::collections::BTreeSet<Var>,
        syms: &mut std::collections::BTreeSet<String>,
    ) {
        match self {
            Expr::Rat(_) => {}
            Expr::Sym(s) => {
                syms.insert(s.clone());
            }
            Expr::Var(v) => {
                vars.insert(*v);
            }
            Expr::Sum(es) | Expr::Prod(es) => {
                for e in es {
                    e.collect_free(vars, syms);
                }
            }
            Expr::Pow(b, e) | Expr::Quot(b, e) => {
                b.collect_free(vars, syms);
                e.collect_free(vars, syms);
            }
            Expr::Fun(_, a) => a.collect_free(vars, syms),
        }
    }

    /// True if the tree mentions `u` or any `u_mu`.
    pub fn depends_on_u(&self) -> bool {
        let (vars, _) = self.free();
        vars.iter().any(|v| !matches!(v, Var::Coord(_)))
    }

    /// True if the tree mentions a specific variable.
    pub fn mentions(&self, v: Var) -> bool {
        let (vars, _) = self.free();
        vars.contains(&v)
    }

    /// Largest coordinate or derivative index mentioned, if any.
    pub fn max_index(&self) -> Option<usize> {
        let (vars, _) = self.free();
        vars.iter()
            .filter_map(|v| match v {
                Var::Coord(mu) | Var::Du(mu) => Some(*mu),
                Var::U => None,
            })
            .max()
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::Sum(vec![self, rhs])
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::Sum(vec![self, -rhs])
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::Prod(vec![self, rhs])
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::Quot(Box::new(self), Box::new(rhs))
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Prod(vec![Expr::int(-1), self])
    }
}

/// Key a substitution or evaluation binding can target.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Target {
    Var(Var),
    Sym(String),
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Var(v) => write!(f, "{v}"),
            Target::Sym(s) => write!(f, "{s}"),
        }
    }
}

/// Simultaneous substitution map from variables and symbolic constants to
/// expressions. Keys are unique; variable targets are validated against the
/// configured dimension.
#[derive(Debug, Clone, Default)]
pub struct Binding {
    map: std::collections::BTreeMap<Target, Expr>,
    dim: Option<Dim>,
}

impl Binding {
    pub fn new() -> Self {
        Binding::default()
    }

    pub fn with_dim(dim: Dim) -> Self {
        Binding {
            map: Default::default(),
            dim: Some(dim),
        }
    }

    pub fn bind_var(mut self, v: Var, e: Expr) -> Result<Self> {
        if let Some(dim) = self.dim {
            match v {
                Var::Coord(mu) | Var::Du(mu) => dim.check_index(mu)?,
                Var::U => {}
            }
        }
        if self.map.insert(Target::Var(v), e).is_some() {
            return Err(Error::DuplicateBinding(v.to_string()));
        }
        Ok(self)
    }

    pub fn bind_sym(mut self, name: impl Into<String>, e: Expr) -> Result<Self> {
        let name = name.into();
        if self.map.insert(Target::Sym(name.clone()), e).is_some() {
            return Err(Error::DuplicateBinding(name));
        }
        Ok(self)
    }

    pub fn get(&self, t: &Target) -> Option<&Expr> {
        self.map.get(t)
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Target, &Expr)> {
        self.map.iter()
    }
}
