//! Vector fields on (x, u)-space, Lie brackets, the conformal Killing
//! machinery (checker, factor, closed-form solution), the conformal basis
//! for arbitrary n, and derived structure-constant tables.

use std::collections::BTreeMap;

use num::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::normal::{expr_to_poly, Mono};
use crate::expr::{differentiate, normalize, Dim, Expr, Rational, Var};
use crate::minkowski::Metric;

/// First-order differential operator `xi^mu d_mu + eta d_u`.
///
/// The `xi` components are functions of `x` for geometric fields; a field
/// whose `xi` depends on `u` is accepted but flagged non-geometric and is
/// rejected by the Killing machinery.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VectorField {
    dim: Dim,
    xi: Vec<Expr>,
    eta: Expr,
    geometric: bool,
}

impl VectorField {
    pub fn new(dim: Dim, xi: Vec<Expr>, eta: Expr) -> Result<Self> {
        if xi.len() != dim.components() {
            return Err(Error::LengthMismatch {
                expected: dim.components(),
                got: xi.len(),
            });
        }
        let mut nxi = Vec::with_capacity(xi.len());
        let mut geometric = true;
        for (idx, c) in xi.into_iter().enumerate() {
            let c = normalize(&c)?;
            if let Some(max) = c.max_index() {
                dim.check_index(max)?;
            }
            if !differentiate(&c, Var::U)?.is_zero_node() || c.mentions(Var::U) {
                geometric = false;
            }
            let _ = idx;
            nxi.push(c);
        }
        let eta = normalize(&eta)?;
        if let Some(max) = eta.max_index() {
            dim.check_index(max)?;
        }
        Ok(VectorField {
            dim,
            xi: nxi,
            eta,
            geometric,
        })
    }

    /// Purely geometric field (no `u`-component).
    pub fn geometric(dim: Dim, xi: Vec<Expr>) -> Result<Self> {
        Self::new(dim, xi, Expr::zero())
    }

    /// Field of the form `eta(x, u) d_u`.
    pub fn vertical(dim: Dim, eta: Expr) -> Result<Self> {
        let xi = vec![Expr::zero(); dim.components()];
        Self::new(dim, xi, eta)
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn xi(&self) -> &[Expr] {
        &self.xi
    }

    pub fn eta(&self) -> &Expr {
        &self.eta
    }

    pub fn is_geometric(&self) -> bool {
        self.geometric
    }

    pub fn xi_is_zero(&self) -> bool {
        self.xi.iter().all(Expr::is_zero_node)
    }

    /// Applies the field as a derivation to a function of `(x, u)`.
    pub fn apply(&self, f: &Expr) -> Result<Expr> {
        let mut terms = Vec::with_capacity(self.dim.components() + 1);
        for mu in self.dim.indices() {
            if !self.xi[mu].is_zero_node() {
                terms.push(self.xi[mu].clone() * differentiate(f, Var::Coord(mu))?);
            }
        }
        if !self.eta.is_zero_node() {
            terms.push(self.eta.clone() * differentiate(f, Var::U)?);
        }
        normalize(&Expr::Sum(terms))
    }

    /// Replaces the `u`-component.
    pub fn with_eta(&self, eta: Expr) -> Result<Self> {
        Self::new(self.dim, self.xi.clone(), eta)
    }

    /// Adds to the `u`-component.
    pub fn plus_eta(&self, eta: Expr) -> Result<Self> {
        Self::new(self.dim, self.xi.clone(), self.eta.clone() + eta)
    }

    pub fn scaled(&self, c: &Rational) -> Result<Self> {
        let xi = self
            .xi
            .iter()
            .map(|e| Expr::Rat(c.clone()) * e.clone())
            .collect();
        Self::new(self.dim, xi, Expr::Rat(c.clone()) * self.eta.clone())
    }

    pub fn is_zero(&self) -> bool {
        self.xi_is_zero() && self.eta.is_zero_node()
    }

    /// Component list `(xi^0, ..., xi^n, eta)`.
    pub fn components(&self) -> Vec<Expr> {
        let mut out = self.xi.clone();
        out.push(self.eta.clone());
        out
    }
}

impl std::fmt::Display for VectorField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut parts = Vec::new();
        for mu in self.dim.indices() {
            if !self.xi[mu].is_zero_node() {
                parts.push(format!("({}) d_x{}", self.xi[mu], mu));
            }
        }
        if !self.eta.is_zero_node() {
            parts.push(format!("({}) d_u", self.eta));
        }
        if parts.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", parts.join(" + "))
        }
    }
}

/// Lie bracket `[X, Y]` including the `u`-component.
pub fn lie_bracket(x: &VectorField, y: &VectorField) -> Result<VectorField> {
    if x.dim != y.dim {
        return Err(Error::LengthMismatch {
            expected: x.dim.components(),
            got: y.dim.components(),
        });
    }
    let mut xi = Vec::with_capacity(x.dim.components());
    for mu in x.dim.indices() {
        xi.push(normalize(
            &(x.apply(&y.xi[mu])? - y.apply(&x.xi[mu])?),
        )?);
    }
    let eta = normalize(&(x.apply(&y.eta)? - y.apply(&x.eta)?))?;
    VectorField::new(x.dim, xi, eta)
}

// ---------------------------------------------------------------------------
// Killing machinery

/// Result of the conformal Killing check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KillingOutcome {
    /// The field satisfies the Killing equation with the returned factor.
    Conformal { kappa: Expr },
    /// First nonzero residual component of the Killing equation.
    NotKilling {
        alpha: usize,
        beta: usize,
        residual: Expr,
    },
}

impl KillingOutcome {
    pub fn kappa(&self) -> Option<&Expr> {
        match self {
            KillingOutcome::Conformal { kappa } => Some(kappa),
            KillingOutcome::NotKilling { .. } => None,
        }
    }
}

/// Checks `g_{ar} d_b xi^r + g_{bs} d_a xi^s = kappa g_{ab}` with
/// `kappa = 2/(n+1) d_mu xi^mu`; returns the factor on success and the first
/// nonzero residual component otherwise.
pub fn killing_check(field: &VectorField, g: &Metric) -> Result<KillingOutcome> {
    for mu in field.dim().indices() {
        if field.xi()[mu].mentions(Var::U) {
            return Err(Error::XiDependsOnU(mu));
        }
    }
    let n = g.n();
    let mut divergence = Vec::with_capacity(n + 1);
    for mu in g.dim().indices() {
        divergence.push(differentiate(&field.xi()[mu], Var::Coord(mu))?);
    }
    let kappa = normalize(
        &(Expr::rat(2, (n + 1) as i64) * Expr::Sum(divergence)),
    )?;
    for alpha in g.dim().indices() {
        for beta in alpha..=n {
            let da = differentiate(&field.xi()[alpha], Var::Coord(beta))?;
            let db = differentiate(&field.xi()[beta], Var::Coord(alpha))?;
            let mut residual = Expr::int(g.sign(alpha)) * da + Expr::int(g.sign(beta)) * db;
            if alpha == beta {
                residual = residual - Expr::int(g.sign(alpha)) * kappa.clone();
            }
            let residual = normalize(&residual)?;
            if !residual.is_zero_node() {
                return Ok(KillingOutcome::NotKilling {
                    alpha,
                    beta,
                    residual,
                });
            }
        }
    }
    Ok(KillingOutcome::Conformal { kappa })
}

/// Integration constants of the general conformal Killing solution:
/// translations `a^alpha`, rotations/boosts `b_{alpha beta}` (lowered,
/// antisymmetric), dilation `d` and special conformal `c^alpha`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConformalParams {
    dim: Dim,
    pub a: Vec<Rational>,
    pub b: Vec<Vec<Rational>>,
    pub d: Rational,
    pub c: Vec<Rational>,
}

impl ConformalParams {
    pub fn new(
        dim: Dim,
        a: Vec<Rational>,
        b: Vec<Vec<Rational>>,
        d: Rational,
        c: Vec<Rational>,
    ) -> Result<Self> {
        let m = dim.components();
        if a.len() != m || c.len() != m || b.len() != m {
            return Err(Error::LengthMismatch {
                expected: m,
                got: a.len().min(c.len()).min(b.len()),
            });
        }
        for row in &b {
            if row.len() != m {
                return Err(Error::LengthMismatch {
                    expected: m,
                    got: row.len(),
                });
            }
        }
        for i in 0..m {
            for j in 0..m {
                if b[i][j] != -b[j][i].clone() {
                    return Err(Error::Invalid(format!(
                        "b must be antisymmetric, violated at ({i},{j})"
                    )));
                }
            }
        }
        Ok(ConformalParams { dim, a, b, d, c })
    }

    pub fn zero(dim: Dim) -> Self {
        let m = dim.components();
        ConformalParams {
            dim,
            a: vec![Rational::zero(); m],
            b: vec![vec![Rational::zero(); m]; m],
            d: Rational::zero(),
            c: vec![Rational::zero(); m],
        }
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    /// Expected Killing factor `2(2 c*x + d)` for these parameters.
    pub fn expected_kappa(&self, g: &Metric) -> Result<Expr> {
        let cx = c_dot_x(g, &self.c)?;
        normalize(&(Expr::int(4) * cx + Expr::int(2) * Expr::Rat(self.d.clone())))
    }
}

fn c_dot_x(g: &Metric, c: &[Rational]) -> Result<Expr> {
    // c*x = c_beta x^beta = g_{bb} c^b x^b
    let terms: Vec<Expr> = g
        .dim()
        .indices()
        .map(|mu| Expr::int(g.sign(mu)) * Expr::Rat(c[mu].clone()) * Expr::coord(mu))
        .collect();
    normalize(&Expr::Sum(terms))
}

/// Explicit conformal Killing field
/// `xi^a = 2(c*x) x^a - c^a x^2 + b^{ab} x_b + d x^a + a^a`.
pub fn killing_solution(params: &ConformalParams, g: &Metric) -> Result<VectorField> {
    let dim = params.dim();
    let cx = c_dot_x(g, &params.c)?;
    let x2 = g.interval()?;
    let mut xi = Vec::with_capacity(dim.components());
    for alpha in dim.indices() {
        let mut terms = vec![
            Expr::int(2) * cx.clone() * Expr::coord(alpha),
            Expr::int(-1) * Expr::Rat(params.c[alpha].clone()) * x2.clone(),
            Expr::Rat(params.d.clone()) * Expr::coord(alpha),
            Expr::Rat(params.a[alpha].clone()),
        ];
        // b^{ab} x_b = g^{aa} b_{ab} x^b
        for beta in dim.indices() {
            terms.push(
                Expr::int(g.sign(alpha))
                    * Expr::Rat(params.b[alpha][beta].clone())
                    * Expr::coord(beta),
            );
        }
        xi.push(normalize(&Expr::Sum(terms))?);
    }
    VectorField::geometric(dim, xi)
}

// ---------------------------------------------------------------------------
// Conformal basis

/// Basis generator labels, in the frozen ordering
/// `P0..Pn, J_{mu nu} (mu < nu, lexicographic), D, K0..Kn`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Generator {
    P(usize),
    J(usize, usize),
    D,
    K(usize),
}

impl Generator {
    /// All generators for dimension n in table order.
    pub fn all(dim: Dim) -> Vec<Generator> {
        let n = dim.n();
        let mut out = Vec::new();
        for mu in 0..=n {
            out.push(Generator::P(mu));
        }
        for mu in 0..=n {
            for nu in (mu + 1)..=n {
                out.push(Generator::J(mu, nu));
            }
        }
        out.push(Generator::D);
        for mu in 0..=n {
            out.push(Generator::K(mu));
        }
        out
    }

    pub fn name(&self) -> String {
        match self {
            Generator::P(mu) => format!("P{mu}"),
            Generator::J(mu, nu) => format!("J{mu}{nu}"),
            Generator::D => "D".to_string(),
            Generator::K(mu) => format!("K{mu}"),
        }
    }

    pub fn parse_name(name: &str, dim: Dim) -> Option<Generator> {
        let gens = Generator::all(dim);
        gens.into_iter().find(|g| g.name() == name)
    }

    /// The geometric realization of this generator.
    pub fn field(&self, g: &Metric) -> Result<VectorField> {
        let dim = g.dim();
        let mut xi = vec![Expr::zero(); dim.components()];
        match self {
            Generator::P(mu) => {
                xi[*mu] = Expr::one();
            }
            Generator::J(mu, nu) => {
                xi[*nu] = g.coord_lowered(*mu);
                xi[*mu] = Expr::int(-1) * g.coord_lowered(*nu);
            }
            Generator::D => {
                for alpha in dim.indices() {
                    xi[alpha] = Expr::coord(alpha);
                }
            }
            Generator::K(mu) => {
                let x2 = g.interval()?;
                for alpha in dim.indices() {
                    let mut e =
                        Expr::int(2) * g.coord_lowered(*mu) * Expr::coord(alpha);
                    if alpha == *mu {
                        e = e - x2.clone();
                    }
                    xi[alpha] = e;
                }
            }
        }
        VectorField::geometric(dim, xi)
    }

    /// Killing-solution parameters reproducing this generator.
    pub fn params(&self, g: &Metric) -> ConformalParams {
        let dim = g.dim();
        let mut p = ConformalParams::zero(dim);
        match self {
            Generator::P(mu) => p.a[*mu] = Rational::one(),
            Generator::D => p.d = Rational::one(),
            Generator::K(mu) => p.c[*mu] = Rational::one(),
            Generator::J(mu, nu) => {
                // b_{nu mu} = g_{mu mu} g_{nu nu}, antisymmetric partner negated
                let s = Rational::from(num::BigInt::from(g.sign(*mu) * g.sign(*nu)));
                p.b[*nu][*mu] = s.clone();
                p.b[*mu][*nu] = -s;
            }
        }
        p
    }
}

/// Conformal basis: exactly `(n+2)(n+3)/2` fields in the frozen order, each
/// passing the Killing check.
pub fn conformal_basis(g: &Metric) -> Result<Vec<VectorField>> {
    Generator::all(g.dim())
        .iter()
        .map(|gen| gen.field(g))
        .collect()
}

pub fn generator_names(dim: Dim) -> Vec<String> {
    Generator::all(dim).iter().map(Generator::name).collect()
}

// ---------------------------------------------------------------------------
// Structure table

/// Expansion of all pairwise brackets of a basis in that basis.
#[derive(Debug, Clone)]
pub struct StructureTable {
    dim: Dim,
    names: Vec<String>,
    /// coefficient vectors for pairs i < j
    entries: BTreeMap<(usize, usize), Vec<Rational>>,
    failures: Vec<(usize, usize)>,
    antisymmetric: bool,
    closed: bool,
}

impl StructureTable {
    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn size(&self) -> usize {
        self.names.len()
    }

    pub fn closed(&self) -> bool {
        self.closed
    }

    pub fn antisymmetric(&self) -> bool {
        self.antisymmetric
    }

    pub fn failures(&self) -> &[(usize, usize)] {
        &self.failures
    }

    /// Structure constants `c^k_{ij}` as a dense vector over k.
    pub fn coeffs(&self, i: usize, j: usize) -> Option<Vec<Rational>> {
        use std::cmp::Ordering;
        match i.cmp(&j) {
            Ordering::Equal => Some(vec![Rational::zero(); self.size()]),
            Ordering::Less => self.entries.get(&(i, j)).cloned(),
            Ordering::Greater => self
                .entries
                .get(&(j, i))
                .map(|v| v.iter().map(|c| -c.clone()).collect()),
        }
    }

    /// Numeric Jacobi identity over the whole table.
    pub fn jacobi_ok(&self) -> bool {
        let m = self.size();
        let c = |i: usize, j: usize| self.coeffs(i, j);
        for i in 0..m {
            for j in (i + 1)..m {
                for k in (j + 1)..m {
                    let (cij, cjk, cki) = match (c(i, j), c(j, k), c(k, i)) {
                        (Some(a), Some(b), Some(d)) => (a, b, d),
                        _ => return false,
                    };
                    for l in 0..m {
                        let mut sum = Rational::zero();
                        for mid in 0..m {
                            let (cmk, cmi, cmj) =
                                match (c(mid, k), c(mid, i), c(mid, j)) {
                                    (Some(a), Some(b), Some(d)) => (a, b, d),
                                    _ => return false,
                                };
                            sum += &cij[mid] * &cmk[l];
                            sum += &cjk[mid] * &cmi[l];
                            sum += &cki[mid] * &cmj[l];
                        }
                        if !sum.is_zero() {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    pub fn to_json(&self) -> StructureTableJson {
        StructureTableJson {
            dim: self.dim.n(),
            basis: self.names.clone(),
            brackets: self
                .entries
                .iter()
                .map(|(&(i, j), coeffs)| {
                    let nz: Vec<(usize, String)> = coeffs
                        .iter()
                        .enumerate()
                        .filter(|(_, c)| !c.is_zero())
                        .map(|(k, c)| (k, c.to_string()))
                        .collect();
                    (i, j, nz)
                })
                .collect(),
            closed: self.closed,
        }
    }
}

/// JSON shape: `{"dim": n, "basis": [names], "brackets": [[i, j, [[k,
/// coeff]...]]...], "closed": bool}` with exact rational coefficients as
/// strings.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct StructureTableJson {
    pub dim: usize,
    pub basis: Vec<String>,
    pub brackets: Vec<(usize, usize, Vec<(usize, String)>)>,
    pub closed: bool,
}

/// Expands `target` in the linear span of `basis` by solving the linear
/// system on polynomial coefficients; `None` when `target` lies outside.
pub(crate) fn expand_in_span(
    target: &VectorField,
    basis: &[VectorField],
) -> Result<Option<Vec<Rational>>> {
    let slots = target.dim().components() + 1;
    // coefficient extraction per component
    let mut columns: Vec<Vec<BTreeMap<Mono, Rational>>> = Vec::with_capacity(basis.len());
    for f in basis {
        let mut comp = Vec::with_capacity(slots);
        for e in f.components() {
            comp.push(expr_to_poly(&e)?.terms);
        }
        columns.push(comp);
    }
    let mut rhs: Vec<BTreeMap<Mono, Rational>> = Vec::with_capacity(slots);
    for e in target.components() {
        rhs.push(expr_to_poly(&e)?.terms);
    }
    // collect row keys
    let mut keys: std::collections::BTreeSet<(usize, Mono)> = Default::default();
    for slot in 0..slots {
        for col in &columns {
            for m in col[slot].keys() {
                keys.insert((slot, m.clone()));
            }
        }
        for m in rhs[slot].keys() {
            keys.insert((slot, m.clone()));
        }
    }
    // build augmented matrix
    let m = basis.len();
    let mut rows: Vec<(Vec<Rational>, Rational)> = Vec::with_capacity(keys.len());
    for (slot, mono) in keys {
        let coeffs: Vec<Rational> = columns
            .iter()
            .map(|col| col[slot].get(&mono).cloned().unwrap_or_else(Rational::zero))
            .collect();
        let b = rhs[slot].get(&mono).cloned().unwrap_or_else(Rational::zero);
        rows.push((coeffs, b));
    }
    // Gaussian elimination
    let mut pivot_rows: Vec<Option<usize>> = vec![None; m];
    let mut used = vec![false; rows.len()];
    for col in 0..m {
        let Some(r) = (0..rows.len()).find(|&r| !used[r] && !rows[r].0[col].is_zero()) else {
            continue;
        };
        used[r] = true;
        pivot_rows[col] = Some(r);
        let pivot = rows[r].0[col].clone();
        for k in 0..m {
            rows[r].0[k] = &rows[r].0[k] / &pivot;
        }
        rows[r].1 = &rows[r].1 / &pivot;
        for rr in 0..rows.len() {
            if rr != r && !rows[rr].0[col].is_zero() {
                let factor = rows[rr].0[col].clone();
                for k in 0..m {
                    let delta = &factor * &rows[r].0[k];
                    rows[rr].0[k] = &rows[rr].0[k] - delta;
                }
                let delta = &factor * &rows[r].1;
                rows[rr].1 = &rows[rr].1 - delta;
            }
        }
    }
    // consistency: zero rows must have zero rhs
    for (coeffs, b) in &rows {
        if coeffs.iter().all(Rational::is_zero) && !b.is_zero() {
            return Ok(None);
        }
    }
    let mut solution = vec![Rational::zero(); m];
    for (col, pr) in pivot_rows.iter().enumerate() {
        if let Some(r) = pr {
            solution[col] = rows[*r].1.clone();
        }
    }
    Ok(Some(solution))
}

/// Derives the structure table of a polynomial basis by symbolic bracketing
/// and span expansion; verifies antisymmetry on all ordered pairs.
pub fn structure_table_named(
    basis: &[VectorField],
    names: Vec<String>,
) -> Result<StructureTable> {
    let dim = basis
        .first()
        .map(|f| f.dim())
        .ok_or_else(|| Error::Invalid("empty basis".into()))?;
    let mut entries = BTreeMap::new();
    let mut failures = Vec::new();
    let mut antisymmetric = true;
    for i in 0..basis.len() {
        for j in (i + 1)..basis.len() {
            let fwd = lie_bracket(&basis[i], &basis[j])?;
            let rev = lie_bracket(&basis[j], &basis[i])?;
            match (expand_in_span(&fwd, basis)?, expand_in_span(&rev, basis)?) {
                (Some(cf), Some(cr)) => {
                    if cf.iter().zip(&cr).any(|(a, b)| (a.clone() + b) != Rational::zero()) {
                        antisymmetric = false;
                    }
                    entries.insert((i, j), cf);
                }
                _ => failures.push((i, j)),
            }
        }
    }
    let closed = failures.is_empty();
    Ok(StructureTable {
        dim,
        names,
        entries,
        failures,
        antisymmetric,
        closed,
    })
}

pub fn structure_table(basis: &[VectorField]) -> Result<StructureTable> {
    let names = (0..basis.len()).map(|i| format!("X{i}")).collect();
    structure_table_named(basis, names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, rat};

    fn g3() -> Metric {
        Metric::new(Dim::new(3).unwrap())
    }

    fn field(g: &Metric, gen: Generator) -> VectorField {
        gen.field(g).unwrap()
    }

    fn p(s: &str) -> Expr {
        parse(s, Dim::new(3).unwrap()).unwrap()
    }

    #[test]
    fn bracket_examples() {
        let g = g3();
        let p0 = field(&g, Generator::P(0));
        let p1 = field(&g, Generator::P(1));
        let d = field(&g, Generator::D);
        let k0 = field(&g, Generator::K(0));

        // [P0, D] = P0
        assert_eq!(lie_bracket(&p0, &d).unwrap(), p0);
        // [P0, P1] = 0
        assert!(lie_bracket(&p0, &p1).unwrap().is_zero());
        // [P0, K0] = 2 D (J_{00} = 0)
        let b = lie_bracket(&p0, &k0).unwrap();
        let two_d = d.scaled(&rat(2, 1)).unwrap();
        assert_eq!(b, two_d);
    }

    #[test]
    fn bracket_antisymmetry_and_bilinearity() {
        let g = g3();
        let j = field(&g, Generator::J(0, 2));
        let k = field(&g, Generator::K(1));
        let fwd = lie_bracket(&j, &k).unwrap();
        let rev = lie_bracket(&k, &j).unwrap();
        assert_eq!(fwd, rev.scaled(&rat(-1, 1)).unwrap());
    }

    #[test]
    fn jacobi_on_sample_fields() {
        let g = g3();
        let dim = g.dim();
        let a = VectorField::new(
            dim,
            vec![p("x0*x1"), p("x2^2"), Expr::zero(), p("x0")],
            p("u^2"),
        )
        .unwrap();
        let b = VectorField::new(
            dim,
            vec![Expr::one(), p("x0"), p("x1*x3"), Expr::zero()],
            p("x0*u"),
        )
        .unwrap();
        let c = VectorField::new(
            dim,
            vec![p("x3"), Expr::zero(), p("u"), p("x1")],
            p("x2 + u"),
        )
        .unwrap();
        let t1 = lie_bracket(&lie_bracket(&a, &b).unwrap(), &c).unwrap();
        let t2 = lie_bracket(&lie_bracket(&b, &c).unwrap(), &a).unwrap();
        let t3 = lie_bracket(&lie_bracket(&c, &a).unwrap(), &b).unwrap();
        for slot in 0..t1.components().len() {
            let sum = normalize(
                &(t1.components()[slot].clone()
                    + t2.components()[slot].clone()
                    + t3.components()[slot].clone()),
            )
            .unwrap();
            assert!(sum.is_zero_node(), "Jacobi residual at slot {slot}: {sum}");
        }
    }

    #[test]
    fn killing_check_examples() {
        let g = g3();
        // isometry
        let p0 = field(&g, Generator::P(0));
        match killing_check(&p0, &g).unwrap() {
            KillingOutcome::Conformal { kappa } => assert!(kappa.is_zero_node()),
            other => panic!("{other:?}"),
        }
        // dilation: kappa = 2
        let d = field(&g, Generator::D);
        assert_eq!(
            killing_check(&d, &g).unwrap().kappa().unwrap(),
            &Expr::int(2)
        );
        // K0: kappa = 4 x^0
        let k0 = field(&g, Generator::K(0));
        assert_eq!(
            killing_check(&k0, &g).unwrap().kappa().unwrap(),
            &p("4*x0")
        );
        // K1: kappa = 4 x_1 = -4 x^1
        let k1 = field(&g, Generator::K(1));
        assert_eq!(
            killing_check(&k1, &g).unwrap().kappa().unwrap(),
            &p("-4*x1")
        );
    }

    #[test]
    fn killing_check_rejects_non_killing() {
        let g = g3();
        let dim = g.dim();
        // anisotropic scaling is not conformal
        let f = VectorField::geometric(
            dim,
            vec![Expr::zero(), Expr::coord(1), Expr::zero(), Expr::zero()],
        )
        .unwrap();
        match killing_check(&f, &g).unwrap() {
            KillingOutcome::NotKilling { .. } => {}
            other => panic!("expected failure, got {other:?}"),
        }
        // u-dependent xi rejected
        let f = VectorField::new(
            dim,
            vec![Expr::u(), Expr::zero(), Expr::zero(), Expr::zero()],
            Expr::zero(),
        )
        .unwrap();
        assert!(killing_check(&f, &g).is_err());
    }

    #[test]
    fn killing_solution_matches_generators() {
        let g = g3();
        for gen in Generator::all(g.dim()) {
            let from_params = killing_solution(&gen.params(&g), &g).unwrap();
            let direct = gen.field(&g).unwrap();
            assert_eq!(from_params, direct, "mismatch for {}", gen.name());
        }
    }

    #[test]
    fn killing_solution_translation_only() {
        let g = g3();
        let mut params = ConformalParams::zero(g.dim());
        params.a = vec![rat(1, 1), rat(-2, 1), rat(0, 1), rat(3, 5)];
        let f = killing_solution(&params, &g).unwrap();
        assert!(f.xi().iter().all(|e| e.free().0.is_empty()));
        assert!(killing_check(&f, &g).unwrap().kappa().unwrap().is_zero_node());
    }

    #[test]
    fn random_killing_solutions_pass_check() {
        use rand::{Rng, SeedableRng};
        let g = g3();
        let dim = g.dim();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..10 {
            let m = dim.components();
            let a: Vec<Rational> =
                (0..m).map(|_| rat(rng.random_range(-9..=9), rng.random_range(1..=4))).collect();
            let c: Vec<Rational> =
                (0..m).map(|_| rat(rng.random_range(-9..=9), rng.random_range(1..=4))).collect();
            let d = rat(rng.random_range(-9..=9), rng.random_range(1..=4));
            let mut b = vec![vec![rat(0, 1); m]; m];
            for i in 0..m {
                for j in (i + 1)..m {
                    let v = rat(rng.random_range(-9..=9), rng.random_range(1..=4));
                    b[i][j] = v.clone();
                    b[j][i] = -v;
                }
            }
            let params = ConformalParams::new(dim, a, b, d, c).unwrap();
            let f = killing_solution(&params, &g).unwrap();
            let kappa = match killing_check(&f, &g).unwrap() {
                KillingOutcome::Conformal { kappa } => kappa,
                other => panic!("not killing: {other:?}"),
            };
            assert_eq!(kappa, params.expected_kappa(&g).unwrap());
        }
    }

    #[test]
    fn basis_sizes_and_order() {
        for n in [2usize, 3, 4] {
            let g = Metric::new(Dim::new(n).unwrap());
            let basis = conformal_basis(&g).unwrap();
            assert_eq!(basis.len(), (n + 2) * (n + 3) / 2);
            // first n+1 fields are translations with kappa = 0
            for f in basis.iter().take(n + 1) {
                let kappa = killing_check(f, &g).unwrap().kappa().unwrap().clone();
                assert!(kappa.is_zero_node());
            }
        }
        assert!(Dim::new(1).is_err());
    }

    #[test]
    fn structure_table_conformal() {
        let g = g3();
        let dim = g.dim();
        let basis = conformal_basis(&g).unwrap();
        let table = structure_table_named(&basis, generator_names(dim)).unwrap();
        assert!(table.closed());
        assert!(table.antisymmetric());

        let gens = Generator::all(dim);
        let idx = |gen: Generator| gens.iter().position(|x| *x == gen).unwrap();

        // [P_mu, P_nu] rows are all zeros
        for mu in 0..=3 {
            for nu in (mu + 1)..=3 {
                let c = table.coeffs(idx(Generator::P(mu)), idx(Generator::P(nu))).unwrap();
                assert!(c.iter().all(Rational::is_zero));
            }
        }
        // [P_mu, K_nu] = 2(g_{mu nu} D - J_{mu nu})
        for mu in 0..=3 {
            for nu in 0..=3 {
                let c = table
                    .coeffs(idx(Generator::P(mu)), idx(Generator::K(nu)))
                    .unwrap();
                let mut expected = vec![Rational::zero(); table.size()];
                if mu == nu {
                    let sgn = if mu == 0 { 2 } else { -2 };
                    expected[idx(Generator::D)] = rat(sgn, 1);
                } else {
                    let (a, b, s) = if mu < nu {
                        (mu, nu, -2)
                    } else {
                        (nu, mu, 2)
                    };
                    expected[idx(Generator::J(a, b))] = rat(s, 1);
                }
                assert_eq!(c, expected, "[P{mu}, K{nu}]");
            }
        }
        // derived sign: [D, K_mu] = +K_mu
        let c = table.coeffs(idx(Generator::D), idx(Generator::K(2))).unwrap();
        let mut expected = vec![Rational::zero(); table.size()];
        expected[idx(Generator::K(2))] = rat(1, 1);
        assert_eq!(c, expected);
    }

    #[test]
    fn structure_table_jacobi_smaller_dim() {
        let g = Metric::new(Dim::new(2).unwrap());
        let basis = conformal_basis(&g).unwrap();
        let table = structure_table(&basis).unwrap();
        assert!(table.closed());
        assert!(table.jacobi_ok());
    }

    #[test]
    fn subalgebra_tables_close() {
        let g = g3();
        let dim = g.dim();
        let n = dim.n();
        let gens = Generator::all(dim);
        // Poincare: P and J
        let poincare: Vec<VectorField> = gens
            .iter()
            .filter(|gen| matches!(gen, Generator::P(_) | Generator::J(_, _)))
            .map(|gen| gen.field(&g).unwrap())
            .collect();
        assert_eq!(poincare.len(), (n + 1) * (n + 2) / 2);
        assert!(structure_table(&poincare).unwrap().closed());
        // similitude: P, J, D
        let similitude: Vec<VectorField> = gens
            .iter()
            .filter(|gen| !matches!(gen, Generator::K(_)))
            .map(|gen| gen.field(&g).unwrap())
            .collect();
        assert_eq!(similitude.len(), (n * n + 3 * n + 4) / 2);
        assert!(structure_table(&similitude).unwrap().closed());
        // P and K alone do not close
        let open: Vec<VectorField> = vec![
            Generator::P(0).field(&g).unwrap(),
            Generator::K(0).field(&g).unwrap(),
        ];
        let t = structure_table(&open).unwrap();
        assert!(!t.closed());
        assert_eq!(t.failures(), &[(0, 1)]);
    }

    #[test]
    fn homothety_characterization() {
        let g = g3();
        for gen in Generator::all(g.dim()) {
            let f = gen.field(&g).unwrap();
            let kappa = killing_check(&f, &g).unwrap().kappa().unwrap().clone();
            let constant = kappa.free().0.is_empty();
            match gen {
                Generator::K(_) => assert!(!constant, "{} should not be a homothety", gen.name()),
                _ => assert!(constant, "{} should be a homothety", gen.name()),
            }
        }
    }

    #[test]
    fn table_json_round_trip() {
        let g = Metric::new(Dim::new(2).unwrap());
        let basis = conformal_basis(&g).unwrap();
        let table = structure_table_named(&basis, generator_names(g.dim())).unwrap();
        let json = table.to_json();
        let text = serde_json::to_string(&json).unwrap();
        let back: StructureTableJson = serde_json::from_str(&text).unwrap();
        assert_eq!(json, back);
        assert!(back.closed);
        assert_eq!(back.basis.len(), 10);
    }
}
