//! Equivalence transformations of the wave-equation classes: verifying the
//! conformal condition on point transformations, computing the factor
//! `lambda(x)`, mapping nonlinearities `F -> F~`, the special conformal
//! family, and pushforward of symmetry candidates along affine transforms.

use num::{One, Signed, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{
    differentiate, evaluate, normalize, substitute, Binding, Dim, Expr, Rational, Target,
    Value, Var,
};
use crate::lie::VectorField;
use crate::minkowski::Metric;
use crate::symmetry::Nonlinearity;

const LAMBDA_SAMPLES: usize = 8;
const MAX_ATTEMPTS: usize = 256;
const TDU_PREFIX: &str = "tdu";

/// Point transformation `x~ = X(x)`, `u~ = U(x, u)` with `X` independent of
/// `u` and `U_u` not identically zero. Inverse maps may be supplied; for
/// affine transforms they are synthesized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointTransform {
    dim: Dim,
    x: Vec<Expr>,
    u: Expr,
    x_inv: Option<Vec<Expr>>,
    u_inv: Option<Expr>,
}

impl PointTransform {
    pub fn new(dim: Dim, x: Vec<Expr>, u: Expr) -> Result<Self> {
        if x.len() != dim.components() {
            return Err(Error::LengthMismatch {
                expected: dim.components(),
                got: x.len(),
            });
        }
        let mut nx = Vec::with_capacity(x.len());
        for c in &x {
            let c = normalize(c)?;
            if c.depends_on_u() {
                return Err(Error::UDependent(c.to_string()));
            }
            nx.push(c);
        }
        let u = normalize(&u)?;
        if differentiate(&u, Var::U)?.is_zero_node() {
            return Err(Error::Invalid("U_u vanishes identically".into()));
        }
        Ok(PointTransform {
            dim,
            x: nx,
            u,
            x_inv: None,
            u_inv: None,
        })
    }

    pub fn identity(dim: Dim) -> Self {
        let x: Vec<Expr> = dim.indices().map(Expr::coord).collect();
        PointTransform {
            dim,
            x,
            u: Expr::u(),
            x_inv: None,
            u_inv: None,
        }
    }

    pub fn with_inverse(mut self, x_inv: Vec<Expr>, u_inv: Expr) -> Result<Self> {
        if x_inv.len() != self.dim.components() {
            return Err(Error::LengthMismatch {
                expected: self.dim.components(),
                got: x_inv.len(),
            });
        }
        self.x_inv = Some(x_inv.iter().map(normalize).collect::<Result<_>>()?);
        self.u_inv = Some(normalize(&u_inv)?);
        Ok(self)
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn x_maps(&self) -> &[Expr] {
        &self.x
    }

    pub fn u_map(&self) -> &Expr {
        &self.u
    }

    /// Inverse maps: supplied, or synthesized for the affine subgroup.
    pub fn inverse_maps(&self) -> Result<(Vec<Expr>, Expr)> {
        if let (Some(xi), Some(ui)) = (&self.x_inv, &self.u_inv) {
            return Ok((xi.clone(), ui.clone()));
        }
        let x_inv = invert_affine_maps(self.dim, &self.x)?;
        // U affine in u: u = (u~ - B(x)) / A(x) with x = X^{-1}(x~)
        let a = differentiate(&self.u, Var::U)?;
        if a.mentions(Var::U) {
            return Err(Error::NotInvertible);
        }
        let at_zero = Binding::new().bind_var(Var::U, Expr::zero())?;
        let b = substitute(&self.u, &at_zero)?;
        let recomposed = normalize(&(a.clone() * Expr::u() + b.clone()))?;
        if recomposed != self.u {
            return Err(Error::NotInvertible);
        }
        let raw = normalize(&((Expr::u() - b) / a))?;
        let u_inv = substitute(&raw, &coord_binding(self.dim, &x_inv)?)?;
        Ok((x_inv, u_inv))
    }

    /// Composition `second o self` (apply `self` first).
    pub fn then(&self, second: &PointTransform) -> Result<PointTransform> {
        let into_first = {
            let mut b = coord_binding(self.dim, &self.x)?;
            b = b.bind_var(Var::U, self.u.clone())?;
            b
        };
        let x: Vec<Expr> = second
            .x
            .iter()
            .map(|e| substitute(e, &into_first))
            .collect::<Result<_>>()?;
        let u = substitute(&second.u, &into_first)?;
        let mut out = PointTransform::new(self.dim, x, u)?;
        if let (Ok((xi1, ui1)), Ok((xi2, ui2))) = (self.inverse_maps(), second.inverse_maps()) {
            let into_second_inv = {
                let mut b = coord_binding(self.dim, &xi2)?;
                b = b.bind_var(Var::U, ui2)?;
                b
            };
            let x_inv: Vec<Expr> = xi1
                .iter()
                .map(|e| substitute(e, &into_second_inv))
                .collect::<Result<_>>()?;
            let u_inv = substitute(&ui1, &into_second_inv)?;
            out = out.with_inverse(x_inv, u_inv)?;
        }
        Ok(out)
    }
}

/// Reduced-class transform `x~ = X(x)`, `u~ = A(x) u + B(x)` with `A` not
/// identically zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReducedTransform {
    dim: Dim,
    x: Vec<Expr>,
    a: Expr,
    b: Expr,
    x_inv: Option<Vec<Expr>>,
}

impl ReducedTransform {
    pub fn new(dim: Dim, x: Vec<Expr>, a: Expr, b: Expr) -> Result<Self> {
        let a = normalize(&a)?;
        if a.is_zero_node() {
            return Err(Error::ZeroAmplitude);
        }
        if a.depends_on_u() || b.depends_on_u() {
            return Err(Error::UDependent("A and B must be functions of x".into()));
        }
        let probe = PointTransform::new(dim, x.clone(), a.clone() * Expr::u() + b.clone())?;
        Ok(ReducedTransform {
            dim,
            x: probe.x,
            a,
            b: normalize(&b)?,
            x_inv: None,
        })
    }

    pub fn with_x_inverse(mut self, x_inv: Vec<Expr>) -> Result<Self> {
        self.x_inv = Some(x_inv.iter().map(normalize).collect::<Result<_>>()?);
        Ok(self)
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn x_maps(&self) -> &[Expr] {
        &self.x
    }

    pub fn amplitude(&self) -> &Expr {
        &self.a
    }

    pub fn shift(&self) -> &Expr {
        &self.b
    }

    pub fn as_point_transform(&self) -> Result<PointTransform> {
        let mut t = PointTransform::new(
            self.dim,
            self.x.clone(),
            self.a.clone() * Expr::u() + self.b.clone(),
        )?;
        if let Some(xi) = &self.x_inv {
            let (x_inv, u_inv) = {
                let raw = normalize(&((Expr::u() - self.b.clone()) / self.a.clone()))?;
                let u_inv = substitute(&raw, &coord_binding(self.dim, xi)?)?;
                (xi.clone(), u_inv)
            };
            t = t.with_inverse(x_inv, u_inv)?;
        }
        Ok(t)
    }

    fn x_inverse(&self) -> Result<Vec<Expr>> {
        if let Some(xi) = &self.x_inv {
            return Ok(xi.clone());
        }
        invert_affine_maps(self.dim, &self.x)
    }
}

fn coord_binding(dim: Dim, maps: &[Expr]) -> Result<Binding> {
    let mut b = Binding::new();
    for mu in dim.indices() {
        b = b.bind_var(Var::Coord(mu), maps[mu].clone())?;
    }
    Ok(b)
}

/// Inverts `X = M x + t` when `M` has rational entries (or is the identity,
/// allowing symbolic translations).
fn invert_affine_maps(dim: Dim, x: &[Expr]) -> Result<Vec<Expr>> {
    let m = dim.components();
    let mut matrix: Vec<Vec<Expr>> = Vec::with_capacity(m);
    let mut offset: Vec<Expr> = Vec::with_capacity(m);
    let zero_point = {
        let mut b = Binding::new();
        for mu in dim.indices() {
            b = b.bind_var(Var::Coord(mu), Expr::zero())?;
        }
        b
    };
    for row in 0..m {
        let mut entries = Vec::with_capacity(m);
        for col in 0..m {
            let d = differentiate(&x[row], Var::Coord(col))?;
            if !d.free().0.is_empty() {
                return Err(Error::NotInvertible); // nonlinear map
            }
            entries.push(d);
        }
        matrix.push(entries);
        offset.push(substitute(&x[row], &zero_point)?);
    }
    let identity = (0..m).all(|i| {
        (0..m).all(|j| {
            let want = if i == j { Expr::one() } else { Expr::zero() };
            matrix[i][j] == want
        })
    });
    if identity {
        return dim
            .indices()
            .map(|mu| normalize(&(Expr::coord(mu) - offset[mu].clone())))
            .collect();
    }
    // rational matrix inversion
    let mut num_matrix = Vec::with_capacity(m);
    for row in &matrix {
        let mut r = Vec::with_capacity(m);
        for e in row {
            match e.as_rational() {
                Some(q) => r.push(q.clone()),
                None => return Err(Error::NotInvertible),
            }
        }
        num_matrix.push(r);
    }
    let inv = invert_rational_matrix(&num_matrix).ok_or(Error::NotInvertible)?;
    // x = M^{-1}(x~ - t)
    let mut out = Vec::with_capacity(m);
    for row in 0..m {
        let mut terms = Vec::with_capacity(m);
        for col in 0..m {
            if !inv[row][col].is_zero() {
                terms.push(
                    Expr::Rat(inv[row][col].clone())
                        * (Expr::coord(col) - offset[col].clone()),
                );
            }
        }
        out.push(normalize(&Expr::Sum(terms))?);
    }
    Ok(out)
}

fn invert_rational_matrix(m: &[Vec<Rational>]) -> Option<Vec<Vec<Rational>>> {
    let n = m.len();
    let mut a: Vec<Vec<Rational>> = m.to_vec();
    let mut inv: Vec<Vec<Rational>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        Rational::one()
                    } else {
                        Rational::zero()
                    }
                })
                .collect()
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col].clone();
        for j in 0..n {
            a[col][j] = &a[col][j] / &p;
            inv[col][j] = &inv[col][j] / &p;
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for j in 0..n {
                    let d = &f * &a[col][j];
                    a[r][j] = &a[r][j] - d;
                    let d = &f * &inv[col][j];
                    inv[r][j] = &inv[r][j] - d;
                }
            }
        }
    }
    Some(inv)
}

// ---------------------------------------------------------------------------
// Conformal condition

fn sample_point(dim: Dim, syms: &[String], rng: &mut ChaCha8Rng) -> Result<Binding> {
    let mut b = Binding::new();
    for mu in dim.indices() {
        let num: i64 = rng.random_range(-99..=99);
        let den: i64 = rng.random_range(1..=9);
        b = b.bind_var(Var::Coord(mu), Expr::rat(num, den))?;
    }
    for s in syms {
        let num: i64 = rng.random_range(-99..=99);
        let den: i64 = rng.random_range(1..=9);
        b = b.bind_sym(s.clone(), Expr::rat(num, den))?;
    }
    Ok(b)
}

use crate::expr::normal::{
    fv_add, fv_diff, fv_div, fv_mul, fv_of_expr, fv_pow_int, fv_to_expr, FracVal,
};

fn fv_sub(a: &FracVal, b: &FracVal) -> Result<FracVal> {
    fv_add(a, &b.neg())
}

fn fv_dalembertian(f: &FracVal, g: &Metric) -> Result<FracVal> {
    let mut acc = FracVal::zero();
    for mu in g.dim().indices() {
        let d2 = fv_diff(&fv_diff(f, Var::Coord(mu))?, Var::Coord(mu))?;
        let signed = if g.sign(mu) > 0 { d2 } else { d2.neg() };
        acc = fv_add(&acc, &signed)?;
    }
    Ok(acc)
}

/// Verifies `g^{mn} X^a_m X^b_n = lambda(x) g^{ab}` identically and samples
/// `lambda > 0` at 8 seeded rational points; returns `lambda` on success.
pub fn conformal_condition(t: &PointTransform, g: &Metric, seed: u64) -> Result<Expr> {
    conformal_condition_maps(&t.x, g, seed)
}

pub(crate) fn conformal_condition_maps(x: &[Expr], g: &Metric, seed: u64) -> Result<Expr> {
    let dim = g.dim();
    if x.len() != dim.components() {
        return Err(Error::LengthMismatch {
            expected: dim.components(),
            got: x.len(),
        });
    }
    let mut partials: Vec<Vec<FracVal>> = Vec::with_capacity(dim.components());
    for alpha in dim.indices() {
        let fv = fv_of_expr(&x[alpha])?;
        let mut row = Vec::with_capacity(dim.components());
        for mu in dim.indices() {
            row.push(fv_diff(&fv, Var::Coord(mu))?);
        }
        partials.push(row);
    }
    let mut lambda_fv = FracVal::zero();
    for mu in dim.indices() {
        let sq = fv_mul(&partials[0][mu], &partials[0][mu])?;
        let signed = if g.sign(mu) > 0 { sq } else { sq.neg() };
        lambda_fv = fv_add(&lambda_fv, &signed)?;
    }
    for alpha in dim.indices() {
        for beta in alpha..=dim.n() {
            let mut residual = FracVal::zero();
            for mu in dim.indices() {
                let prod = fv_mul(&partials[alpha][mu], &partials[beta][mu])?;
                let signed = if g.sign(mu) > 0 { prod } else { prod.neg() };
                residual = fv_add(&residual, &signed)?;
            }
            if alpha == beta {
                let l = if g.sign(alpha) > 0 {
                    lambda_fv.neg()
                } else {
                    lambda_fv.clone()
                };
                residual = fv_add(&residual, &l)?;
            }
            if !residual.is_zero() {
                let shown = fv_to_expr(residual)?;
                return Err(Error::ConformalResidual {
                    alpha,
                    beta,
                    residual: shown.to_string(),
                });
            }
        }
    }
    let lambda = fv_to_expr(lambda_fv)?;
    // positivity sampling
    let (_, syms) = lambda.free();
    let syms: Vec<String> = syms.into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut valid = 0usize;
    let mut attempts = 0usize;
    while valid < LAMBDA_SAMPLES && attempts < MAX_ATTEMPTS {
        attempts += 1;
        let point = sample_point(dim, &syms, &mut rng)?;
        match evaluate(&lambda, &point) {
            Ok(Value::Rat(r)) => {
                if !r.is_positive() {
                    return Err(Error::NonPositiveFactor {
                        point: describe_point(&point),
                        value: r.to_string(),
                    });
                }
                valid += 1;
            }
            Ok(Value::Float(f)) => {
                if f <= 0.0 {
                    return Err(Error::NonPositiveFactor {
                        point: describe_point(&point),
                        value: f.to_string(),
                    });
                }
                valid += 1;
            }
            Err(_) => continue, // pole: redraw
        }
    }
    if valid < LAMBDA_SAMPLES {
        return Err(Error::OutsideChart(
            "could not find enough pole-free sample points".into(),
        ));
    }
    Ok(lambda)
}

fn describe_point(b: &Binding) -> String {
    b.iter()
        .map(|(t, e)| format!("{t}={e}"))
        .collect::<Vec<_>>()
        .join(", ")
}

// ---------------------------------------------------------------------------
// Nonlinearity transport

fn tdu_sym(sigma: usize) -> Expr {
    Expr::sym(format!("{TDU_PREFIX}{sigma}"))
}

fn check_reserved(e: &Expr) -> Result<()> {
    let (_, syms) = e.free();
    if syms.iter().any(|s| s.starts_with(TDU_PREFIX)) {
        return Err(Error::Invalid(format!(
            "symbol prefix '{TDU_PREFIX}' is reserved by the transform machinery"
        )));
    }
    Ok(())
}

/// Transforms a general-class nonlinearity, leaving the result in mixed
/// variables: coordinates and `u` still untransformed, derivative variables
/// already denoting tilde derivatives.
pub(crate) fn transform_general_raw(
    f: &Nonlinearity,
    t: &PointTransform,
    g: &Metric,
    seed: u64,
) -> Result<Expr> {
    let dim = g.dim();
    let body = f.body()?;
    check_reserved(&body)?;
    let lambda = conformal_condition(t, g, seed)?;
    let u_map = &t.u;
    let u_u = differentiate(u_map, Var::U)?;
    let u_uu = differentiate(&u_u, Var::U)?;

    // U_u F + Box U + 2 g^{mm} u_m U_{mu} + g^{mm} u_m^2 U_uu - tdu_s Box X^s
    let mut terms: Vec<Expr> = vec![
        u_u.clone() * body.clone(),
        g.dalembertian_xu(u_map)?,
    ];
    for mu in dim.indices() {
        let u_mu_u = differentiate(&u_u, Var::Coord(mu))?;
        if !u_mu_u.is_zero_node() {
            terms.push(Expr::int(2 * g.sign(mu)) * Expr::du(mu) * u_mu_u);
        }
        if !u_uu.is_zero_node() {
            terms.push(
                Expr::int(g.sign(mu)) * Expr::du(mu) * Expr::du(mu) * u_uu.clone(),
            );
        }
    }
    for sigma in dim.indices() {
        let boxed = g.dalembertian(&t.x[sigma])?;
        if !boxed.is_zero_node() {
            terms.push(-(tdu_sym(sigma) * boxed));
        }
    }
    let assembled = normalize(&Expr::Sum(terms))?;

    // u_m -> (tdu_s X^s_m - U_m) / U_u
    let mut du_binding = Binding::new();
    for mu in dim.indices() {
        let mut num = -differentiate(u_map, Var::Coord(mu))?;
        for sigma in dim.indices() {
            let xsm = differentiate(&t.x[sigma], Var::Coord(mu))?;
            if !xsm.is_zero_node() {
                num = num + tdu_sym(sigma) * xsm;
            }
        }
        du_binding = du_binding.bind_var(Var::Du(mu), normalize(&(num / u_u.clone()))?)?;
    }
    let substituted = substitute(&assembled, &du_binding)?;
    let divided = normalize(&(substituted / lambda))?;

    // tdu_s -> u_s (now denoting tilde derivatives)
    let mut back = Binding::new();
    for sigma in dim.indices() {
        back = back.bind_sym(format!("{TDU_PREFIX}{sigma}"), Expr::du(sigma))?;
    }
    substitute(&divided, &back)
}

/// `F~(x~, u~, grad u~)` under a general equivalence transformation.
pub fn transform_general(
    f: &Nonlinearity,
    t: &PointTransform,
    g: &Metric,
    seed: u64,
) -> Result<Expr> {
    let raw = transform_general_raw(f, t, g, seed)?;
    let (x_inv, u_inv) = t.inverse_maps()?;
    let mut binding = coord_binding(g.dim(), &x_inv)?;
    binding = binding.bind_var(Var::U, u_inv)?;
    substitute(&raw, &binding)
}

/// `F~(x~, u~)` under a reduced-class transform, with the coupling
/// constraint `Box X^s = 2 g^{mn} X^s_m A_n / A` reported.
pub fn transform_reduced(
    f: &Nonlinearity,
    t: &ReducedTransform,
    g: &Metric,
    seed: u64,
) -> Result<(Expr, bool)> {
    if !f.is_reduced_class()? {
        return Err(Error::ReducedClassViolation);
    }
    let dim = g.dim();
    let body = f.body()?;
    let _t0 = std::time::Instant::now();
    let lambda = conformal_condition_maps(&t.x, g, seed)?;
    eprintln!("[tr] lambda {:?}", _t0.elapsed());

    // coupling constraint, in factored-denominator arithmetic
    let a_fv = fv_of_expr(&t.a)?;
    let b_fv = fv_of_expr(&t.b)?;
    let mut constraint_ok = true;
    for sigma in dim.indices() {
        let xs = fv_of_expr(&t.x[sigma])?;
        let lhs = fv_dalembertian(&xs, g)?;
        let mut rhs = FracVal::zero();
        for mu in dim.indices() {
            let term = fv_mul(
                &fv_diff(&xs, Var::Coord(mu))?,
                &fv_diff(&a_fv, Var::Coord(mu))?,
            )?;
            let term = fv_div(&term, &a_fv)?
                .scale(&crate::expr::rat(2 * g.sign(mu), 1));
            rhs = fv_add(&rhs, &term)?;
        }
        let diff = fv_sub(&lhs, &rhs)?;
        if !diff.is_zero() {
            // radicals can hide a functional zero; fall back to sampling
            let shown = fv_to_expr(diff)?;
            if !matches!(
                crate::expr::is_zero(&shown, seed)?,
                crate::expr::ZeroVerdict::Zero
            ) {
                constraint_ok = false;
                break;
            }
        }
    }

    eprintln!("[tr] constraint {:?}", _t0.elapsed());
    // F~ = [A F + (Box A) u + Box B - 2 g^{mm} (A_m/A)(A_m u + B_m)] / lambda
    let u_fv = fv_of_expr(&Expr::u())?;
    let mut acc = fv_mul(&a_fv, &fv_of_expr(&body)?)?;
    acc = fv_add(&acc, &fv_mul(&fv_dalembertian(&a_fv, g)?, &u_fv)?)?;
    acc = fv_add(&acc, &fv_dalembertian(&b_fv, g)?)?;
    for mu in dim.indices() {
        let a_mu = fv_diff(&a_fv, Var::Coord(mu))?;
        let b_mu = fv_diff(&b_fv, Var::Coord(mu))?;
        let inner = fv_add(&fv_mul(&a_mu, &u_fv)?, &b_mu)?;
        let term = fv_mul(&fv_div(&a_mu, &a_fv)?, &inner)?
            .scale(&crate::expr::rat(-2 * g.sign(mu), 1));
        acc = fv_add(&acc, &term)?;
    }
    let acc = fv_div(&acc, &fv_of_expr(&lambda)?)?;
    let assembled = fv_to_expr(acc)?;
    eprintln!("[tr] assembled {:?} len={}", _t0.elapsed(), assembled.to_string().len());
    eprintln!("[tr] assembled = {assembled}");

    // express in tilde variables: x -> X^{-1}(x~), u -> (u~ - B)/A at X^{-1}
    let x_inv = t.x_inverse()?;
    let u_raw = normalize(&((Expr::u() - t.b.clone()) / t.a.clone()))?;
    let u_inv = substitute(&u_raw, &coord_binding(dim, &x_inv)?)?;
    let mut binding = coord_binding(dim, &x_inv)?;
    binding = binding.bind_var(Var::U, u_inv)?;
    let out = substitute(&assembled, &binding)?;
    eprintln!("[tr] substituted {:?}", _t0.elapsed());
    Ok((out, constraint_ok))
}

// ---------------------------------------------------------------------------
// Special conformal transformations

/// Which denominator form the conformal-condition oracle validated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SigmaVariant {
    /// `sigma = 1 - 2(e*x) + (e*x)^2 = (1 - e*x)^2`
    PerfectSquare,
    /// `sigma = 1 - 2(e*x) + (e*e)(x*x)`
    Standard,
    /// the two forms coincide for this parameter (e.g. `e = 0`)
    Coincide,
}

/// Special conformal transform with its validated denominator, conformal
/// factor `sigma^{-2}` and companion weight `u~ = sigma^{(n-1)/2} u`.
#[derive(Debug, Clone)]
pub struct SpecialConformal {
    pub transform: PointTransform,
    pub reduced: ReducedTransform,
    pub sigma: Expr,
    pub lambda: Expr,
    pub variant: SigmaVariant,
}

fn eps_dot_x(eps: &[Rational], g: &Metric) -> Result<Expr> {
    let terms: Vec<Expr> = g
        .dim()
        .indices()
        .map(|mu| Expr::int(g.sign(mu)) * Expr::Rat(eps[mu].clone()) * Expr::coord(mu))
        .collect();
    normalize(&Expr::Sum(terms))
}

fn eps_norm(eps: &[Rational], g: &Metric) -> Rational {
    let mut out = Rational::zero();
    for mu in g.dim().indices() {
        let term = &eps[mu] * &eps[mu];
        if g.sign(mu) > 0 {
            out += term;
        } else {
            out -= term;
        }
    }
    out
}

fn sct_maps(eps: &[Rational], sigma: &Expr, g: &Metric) -> Result<Vec<Expr>> {
    let x2 = g.interval()?;
    g.dim()
        .indices()
        .map(|mu| {
            normalize(
                &((Expr::coord(mu) - x2.clone() * Expr::Rat(eps[mu].clone()))
                    / sigma.clone()),
            )
        })
        .collect()
}

fn sigma_vanishes_at_sample(sigma: &Expr, g: &Metric, seed: u64) -> Result<Option<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..LAMBDA_SAMPLES {
        let point = sample_point(g.dim(), &[], &mut rng)?;
        match evaluate(sigma, &point)? {
            Value::Rat(r) => {
                if r.is_zero() {
                    return Ok(Some(describe_point(&point)));
                }
            }
            Value::Float(f) => {
                if f.abs() <= crate::expr::ZERO_TOL {
                    return Ok(Some(describe_point(&point)));
                }
            }
        }
    }
    Ok(None)
}

/// Builds the special conformal transform for parameters `eps`, constructing
/// both candidate denominators and keeping the one the conformal-condition
/// oracle validates.
pub fn special_conformal(eps: &[Rational], g: &Metric, seed: u64) -> Result<SpecialConformal> {
    let dim = g.dim();
    if eps.len() != dim.components() {
        return Err(Error::LengthMismatch {
            expected: dim.components(),
            got: eps.len(),
        });
    }
    let ex = eps_dot_x(eps, g)?;
    let x2 = g.interval()?;
    let sigma_square = normalize(
        &(Expr::one() - Expr::int(2) * ex.clone() + ex.clone() * ex.clone()),
    )?;
    let sigma_standard = normalize(
        &(Expr::one() - Expr::int(2) * ex.clone()
            + Expr::Rat(eps_norm(eps, g)) * x2.clone()),
    )?;

    let coincide = sigma_square == sigma_standard;
    let candidates: Vec<(Expr, SigmaVariant)> = if coincide {
        vec![(sigma_standard.clone(), SigmaVariant::Coincide)]
    } else {
        vec![
            (sigma_square.clone(), SigmaVariant::PerfectSquare),
            (sigma_standard.clone(), SigmaVariant::Standard),
        ]
    };

    let mut last_err: Option<Error> = None;
    for (sigma, variant) in candidates {
        if let Some(point) = sigma_vanishes_at_sample(&sigma, g, seed)? {
            last_err = Some(Error::OutsideChart(point));
            continue;
        }
        let x_maps = sct_maps(eps, &sigma, g)?;
        match conformal_condition_maps(&x_maps, g, seed) {
            Ok(_) => {
                let lambda = normalize(&(Expr::one() / (sigma.clone() * sigma.clone())))?;
                let weight = Rational::new(
                    num::BigInt::from(dim.n() as i64 - 1),
                    num::BigInt::from(2),
                );
                let amplitude = normalize(&sigma.clone().pow(Expr::Rat(weight.clone())))?;
                // inverse by parameter negation, validated numerically
                let neg: Vec<Rational> = eps.iter().map(|e| -e.clone()).collect();
                let nex = eps_dot_x(&neg, g)?;
                let sigma_inv = match variant {
                    SigmaVariant::PerfectSquare => normalize(
                        &(Expr::one() - Expr::int(2) * nex.clone()
                            + nex.clone() * nex.clone()),
                    )?,
                    _ => normalize(
                        &(Expr::one() - Expr::int(2) * nex.clone()
                            + Expr::Rat(eps_norm(&neg, g)) * x2.clone()),
                    )?,
                };
                let x_inv = sct_maps(&neg, &sigma_inv, g)?;
                let u_inv = normalize(
                    &(Expr::u() * sigma_inv.clone().pow(Expr::Rat(weight.clone()))),
                )?;
                let mut transform = PointTransform::new(
                    dim,
                    x_maps.clone(),
                    amplitude.clone() * Expr::u(),
                )?;
                if validate_inverse(&x_maps, &x_inv, dim, seed)? {
                    transform = transform.with_inverse(x_inv.clone(), u_inv)?;
                }
                let mut reduced =
                    ReducedTransform::new(dim, x_maps, amplitude, Expr::zero())?;
                if validate_inverse(reduced.x_maps(), &x_inv, dim, seed)? {
                    reduced = reduced.with_x_inverse(x_inv)?;
                }
                return Ok(SpecialConformal {
                    transform,
                    reduced,
                    sigma,
                    lambda,
                    variant,
                });
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::Invalid("no denominator variant validated".into())))
}

/// Numeric round-trip check `Xinv(X(p)) = p` at seeded sample points.
fn validate_inverse(x: &[Expr], x_inv: &[Expr], dim: Dim, seed: u64) -> Result<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut checked = 0usize;
    let mut attempts = 0usize;
    while checked < 4 && attempts < MAX_ATTEMPTS {
        attempts += 1;
        let point = sample_point(dim, &[], &mut rng)?;
        // forward
        let mut image = Binding::new();
        let mut ok = true;
        for mu in dim.indices() {
            match evaluate(&x[mu], &point) {
                Ok(v) => {
                    let val = match v {
                        Value::Rat(r) => Expr::Rat(r),
                        Value::Float(_) => {
                            ok = false;
                            break;
                        }
                    };
                    image = image.bind_var(Var::Coord(mu), val)?;
                }
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        for mu in dim.indices() {
            let back = match evaluate(&x_inv[mu], &image) {
                Ok(v) => v,
                Err(_) => {
                    ok = false;
                    break;
                }
            };
            let orig = evaluate(&Expr::coord(mu), &point)?;
            if (back.to_f64() - orig.to_f64()).abs() > 1e-6 {
                return Ok(false);
            }
        }
        if ok {
            checked += 1;
        }
    }
    Ok(checked > 0)
}

// ---------------------------------------------------------------------------
// Pushforward

/// Pushes a symmetry candidate along an invertible transform:
/// `xi~^mu = (X^mu_nu xi^nu) o T^{-1}`, `eta~ = (Q U) o T^{-1}`.
pub fn pushforward(q: &VectorField, t: &PointTransform, g: &Metric) -> Result<VectorField> {
    let dim = g.dim();
    let (x_inv, u_inv) = t.inverse_maps()?;
    let mut binding = coord_binding(dim, &x_inv)?;
    binding = binding.bind_var(Var::U, u_inv)?;
    let mut xi = Vec::with_capacity(dim.components());
    for mu in dim.indices() {
        let pushed = q.apply(&t.x[mu])?;
        xi.push(substitute(&pushed, &binding)?);
    }
    let eta = substitute(&q.apply(&t.u)?, &binding)?;
    VectorField::new(dim, xi, eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{is_zero_default, parse, rat, ZeroVerdict, DEFAULT_SEED};
    use crate::lie::Generator;
    use crate::symmetry::{determining_residual_reduced, Candidate};

    fn g3() -> Metric {
        Metric::new(Dim::new(3).unwrap())
    }

    fn g2() -> Metric {
        Metric::new(Dim::new(2).unwrap())
    }

    fn p3(s: &str) -> Expr {
        parse(s, Dim::new(3).unwrap()).unwrap()
    }

    #[test]
    fn conformal_condition_examples() {
        let g = g3();
        let dim = g.dim();
        // identity: lambda = 1
        let t = PointTransform::identity(dim);
        assert_eq!(conformal_condition(&t, &g, DEFAULT_SEED).unwrap(), Expr::one());
        // dilation X = 2x: lambda = 4
        let t = PointTransform::new(
            dim,
            dim.indices().map(|mu| Expr::int(2) * Expr::coord(mu)).collect(),
            Expr::u(),
        )
        .unwrap();
        assert_eq!(conformal_condition(&t, &g, DEFAULT_SEED).unwrap(), Expr::int(4));
        // anisotropic scaling fails at (1,1)
        let mut maps: Vec<Expr> = dim.indices().map(Expr::coord).collect();
        maps[1] = Expr::int(2) * Expr::coord(1);
        let t = PointTransform::new(dim, maps, Expr::u()).unwrap();
        match conformal_condition(&t, &g, DEFAULT_SEED) {
            Err(Error::ConformalResidual { alpha, beta, .. }) => {
                assert_eq!((alpha, beta), (1, 1));
            }
            other => panic!("expected residual failure, got {other:?}"),
        }
    }

    #[test]
    fn transform_general_translation() {
        let g = g3();
        let dim = g.dim();
        // X = x + k e_0 with symbolic k
        let mut maps: Vec<Expr> = dim.indices().map(Expr::coord).collect();
        maps[0] = Expr::coord(0) + Expr::sym("kshift");
        let t = PointTransform::new(dim, maps, Expr::u()).unwrap();
        let f = Nonlinearity::general(p3("x0*u + u_1^2")).unwrap();
        let out = transform_general(&f, &t, &g, DEFAULT_SEED).unwrap();
        let expected = p3("(x0 - kshift)*u + u_1^2");
        assert_eq!(out, expected);
    }

    #[test]
    fn transform_general_vertical_scaling() {
        let g = g3();
        let t = PointTransform::new(
            g.dim(),
            g.dim().indices().map(Expr::coord).collect(),
            Expr::int(2) * Expr::u(),
        )
        .unwrap();
        // F~ = 2 F(x, u/2, grad u / 2)
        let f = Nonlinearity::general(p3("u^2 + u_0")).unwrap();
        let out = transform_general(&f, &t, &g, DEFAULT_SEED).unwrap();
        assert_eq!(out, p3("1/2*u^2 + u_0"));
    }

    #[test]
    fn transform_general_vertical_shift() {
        let g = g3();
        let shift = p3("x0^2 + x1");
        let t = PointTransform::new(
            g.dim(),
            g.dim().indices().map(Expr::coord).collect(),
            Expr::u() + shift.clone(),
        )
        .unwrap();
        // F~ = F(x, u - p, grad u - grad p) + Box p; here grad p = (2x0, 1, 0, 0)
        let f = Nonlinearity::general(p3("u + u_1")).unwrap();
        let out = transform_general(&f, &t, &g, DEFAULT_SEED).unwrap();
        let box_p = g.dalembertian(&shift).unwrap();
        let expected = normalize(&(p3("u - x0^2 - x1 + u_1 - 1") + box_p)).unwrap();
        assert_eq!(out, expected);
    }

    #[test]
    fn transform_reduced_identity_and_scaling() {
        let g = g3();
        let dim = g.dim();
        let f = Nonlinearity::reduced(p3("F0*u^2 + x0")).unwrap();
        // identity
        let t = ReducedTransform::new(
            dim,
            dim.indices().map(Expr::coord).collect(),
            Expr::one(),
            Expr::zero(),
        )
        .unwrap();
        let (out, ok) = transform_reduced(&f, &t, &g, DEFAULT_SEED).unwrap();
        assert!(ok);
        assert_eq!(out, f.body().unwrap());
        // constant amplitude A: F~ = A F(x, u/A)
        let t = ReducedTransform::new(
            dim,
            dim.indices().map(Expr::coord).collect(),
            Expr::int(3),
            Expr::zero(),
        )
        .unwrap();
        let (out, ok) = transform_reduced(&f, &t, &g, DEFAULT_SEED).unwrap();
        assert!(ok);
        assert_eq!(out, p3("1/3*F0*u^2 + 3*x0"));
    }

    #[test]
    fn transform_reduced_exponential_amplitude_breaks_constraint() {
        let g = g3();
        let dim = g.dim();
        let t = ReducedTransform::new(
            dim,
            dim.indices().map(Expr::coord).collect(),
            Expr::coord(0).exp(),
            Expr::zero(),
        )
        .unwrap();
        let f = Nonlinearity::reduced(p3("u^2")).unwrap();
        let (_, ok) = transform_reduced(&f, &t, &g, DEFAULT_SEED).unwrap();
        assert!(!ok, "X = id forces constant A");
    }

    #[test]
    fn quadratic_gradient_terms_iff_nonaffine_u() {
        let g = g3();
        let dim = g.dim();
        // U affine in u: no quadratic gradient terms
        let t = PointTransform::new(
            dim,
            dim.indices().map(Expr::coord).collect(),
            Expr::int(2) * Expr::u(),
        )
        .unwrap();
        let raw = transform_general_raw(&Nonlinearity::Zero, &t, &g, DEFAULT_SEED).unwrap();
        assert_eq!(max_du_degree(&raw), 0);
        // U with U_uu != 0: quadratic gradient terms appear
        let t = PointTransform::new(
            dim,
            dim.indices().map(Expr::coord).collect(),
            Expr::u() + Expr::u() * Expr::u(),
        )
        .unwrap();
        let raw = transform_general_raw(&Nonlinearity::Zero, &t, &g, DEFAULT_SEED).unwrap();
        assert_eq!(max_du_degree(&raw), 2);
    }

    fn max_du_degree(e: &Expr) -> u32 {
        use crate::expr::normal::{expr_to_poly, Base};
        use num::ToPrimitive;
        let rf = crate::expr::normal::to_ratfun(e).unwrap();
        let _ = expr_to_poly;
        let mut max = 0u32;
        for m in rf.num.terms.keys() {
            let mut total = 0u32;
            for (b, exp) in &m.0 {
                if matches!(b, Base::Var(Var::Du(_))) {
                    if let Some(i) = exp.as_int() {
                        total += i.to_u32().unwrap_or(0);
                    }
                }
            }
            max = max.max(total);
        }
        max
    }

    #[test]
    fn group_property_lambda_multiplies() {
        let g = g3();
        let dim = g.dim();
        let dilation = PointTransform::new(
            dim,
            dim.indices().map(|mu| Expr::int(3) * Expr::coord(mu)).collect(),
            Expr::u(),
        )
        .unwrap();
        let mut maps: Vec<Expr> = dim.indices().map(Expr::coord).collect();
        maps[2] = Expr::coord(2) + Expr::int(5);
        let translation = PointTransform::new(dim, maps, Expr::u()).unwrap();
        // Lorentz boost in the (x0, x1) plane: x0' = 5/4 x0 + 3/4 x1, ...
        let mut maps: Vec<Expr> = dim.indices().map(Expr::coord).collect();
        maps[0] = p3("5/4*x0 + 3/4*x1");
        maps[1] = p3("3/4*x0 + 5/4*x1");
        let boost = PointTransform::new(dim, maps, Expr::u()).unwrap();

        let l_d = conformal_condition(&dilation, &g, DEFAULT_SEED).unwrap();
        let l_b = conformal_condition(&boost, &g, DEFAULT_SEED).unwrap();
        let composed = boost.then(&dilation).unwrap();
        let l_c = conformal_condition(&composed, &g, DEFAULT_SEED).unwrap();
        // both factors constant here, so the product law is exact
        assert_eq!(l_c, normalize(&(l_d * l_b)).unwrap());
        let composed = translation.then(&boost).unwrap();
        let l_c = conformal_condition(&composed, &g, DEFAULT_SEED).unwrap();
        assert_eq!(l_c, conformal_condition(&boost, &g, DEFAULT_SEED).unwrap());
    }

    #[test]
    fn round_trip_through_inverse() {
        let g = g3();
        let dim = g.dim();
        let t = PointTransform::new(
            dim,
            dim.indices().map(|mu| Expr::int(2) * Expr::coord(mu)).collect(),
            Expr::int(3) * Expr::u() + Expr::coord(0),
        )
        .unwrap();
        let f = Nonlinearity::general(p3("u^3 + u_0*u_1 + x2")).unwrap();
        let forward = transform_general(&f, &t, &g, DEFAULT_SEED).unwrap();
        let (x_inv, u_inv) = t.inverse_maps().unwrap();
        let t_inv = PointTransform::new(dim, x_inv, u_inv)
            .unwrap()
            .with_inverse(t.x_maps().to_vec(), t.u_map().clone())
            .unwrap();
        let back = transform_general(
            &Nonlinearity::general(forward).unwrap(),
            &t_inv,
            &g,
            DEFAULT_SEED,
        )
        .unwrap();
        assert_eq!(back, f.body().unwrap());
    }

    #[test]
    fn special_conformal_identity_at_zero() {
        let g = g2();
        let sc = special_conformal(&[rat(0, 1), rat(0, 1), rat(0, 1)], &g, DEFAULT_SEED).unwrap();
        assert_eq!(sc.variant, SigmaVariant::Coincide);
        assert!(sc.sigma.is_one_node());
        assert!(sc.lambda.is_one_node());
        assert_eq!(sc.transform.x_maps(), PointTransform::identity(g.dim()).x_maps());
    }

    #[test]
    fn special_conformal_standard_variant_validates() {
        let g = g2();
        let eps = [rat(1, 10), rat(0, 1), rat(0, 1)];
        let sc = special_conformal(&eps, &g, DEFAULT_SEED).unwrap();
        assert_eq!(sc.variant, SigmaVariant::Standard);
        // lambda agrees with sigma^{-2} at sample points
        let lam = conformal_condition(&sc.transform, &g, DEFAULT_SEED).unwrap();
        let diff = normalize(&(lam - sc.lambda.clone())).unwrap();
        assert_eq!(is_zero_default(&diff).unwrap(), ZeroVerdict::Zero);
    }

    #[test]
    fn special_conformal_power_form_invariance_n3() {
        let g = g3();
        let eps = [rat(1, 10), rat(0, 1), rat(0, 1), rat(0, 1)];
        let sc = special_conformal(&eps, &g, DEFAULT_SEED).unwrap();
        let k = crate::symmetry::conformal_exponent(g.dim());
        let f = Nonlinearity::power(Expr::sym("F0"), Expr::Rat(k.clone())).unwrap();
        let (out, ok) = transform_reduced(&f, &sc.reduced, &g, DEFAULT_SEED).unwrap();
        assert!(ok, "weight constraint must hold");
        let diff = normalize(&(out - f.body().unwrap())).unwrap();
        assert_eq!(is_zero_default(&diff).unwrap(), ZeroVerdict::Zero);
    }

    #[test]
    fn pushforward_preserves_symmetry() {
        let g = g3();
        let dim = g.dim();
        // dilation equivalence map
        let t = PointTransform::new(
            dim,
            dim.indices().map(|mu| Expr::int(2) * Expr::coord(mu)).collect(),
            Expr::u(),
        )
        .unwrap();
        let f = Nonlinearity::power(Expr::sym("F0"), Expr::int(3)).unwrap();
        // D with adapted weight a = 2/(1-3) = -1 is a symmetry of F0 u^3
        let q = Generator::D
            .field(&g)
            .unwrap()
            .with_eta(p3("-u"))
            .unwrap();
        let (r, ok) = determining_residual_reduced(
            &f,
            &Candidate::reduced(q.clone()).unwrap(),
            &g,
        )
        .unwrap();
        assert!(r.is_zero_node() && ok);
        // transformed nonlinearity and pushed-forward candidate
        let f_tilde = transform_general(&f, &t, &g, DEFAULT_SEED).unwrap();
        let q_tilde = pushforward(&q, &t, &g).unwrap();
        let (r2, ok2) = determining_residual_reduced(
            &Nonlinearity::reduced(f_tilde).unwrap(),
            &Candidate::reduced(q_tilde).unwrap(),
            &g,
        )
        .unwrap();
        assert!(r2.is_zero_node() && ok2);
    }
}

/// Test-support alias for the conformal condition on raw maps.
pub fn conformal_condition_probe(x: &[Expr], g: &Metric, seed: u64) -> Result<Expr> {
    conformal_condition_maps(x, g, seed)
}
