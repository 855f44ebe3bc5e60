//! Classifying determining equations for point symmetries of
//! `Box u = F(x, u, grad u)` and its reduced class `Box u = F(x, u)`,
//! cross-validated by an independent second-prolongation oracle, plus the
//! Klein-Gordon classifying residual and the conformal power-law check.

use num::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{
    differentiate, is_zero, normalize, substitute, total_derivative, Binding, Dim, Expr,
    Rational, Var, ZeroVerdict, DEFAULT_SEED,
};
use crate::lie::{killing_check, ConformalParams, Generator, KillingOutcome, VectorField};
use crate::minkowski::Metric;

/// Right-hand side classes of the wave equation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Nonlinearity {
    Zero,
    /// `F(x, u, grad u)`
    General(Expr),
    /// `F(x, u)`
    Reduced(Expr),
    /// `F = F0 u^k`, `k != 0, 1`
    Power { f0: Expr, k: Expr },
    /// `F = -V(x) u` (the Klein-Gordon sign convention `Box u + V u = 0`)
    Potential { v: Expr },
}

impl Nonlinearity {
    pub fn reduced(e: Expr) -> Result<Self> {
        let e = normalize(&e)?;
        let (vars, _) = e.free();
        if vars.iter().any(|v| matches!(v, Var::Du(_))) {
            return Err(Error::ReducedClassViolation);
        }
        Ok(Nonlinearity::Reduced(e))
    }

    pub fn general(e: Expr) -> Result<Self> {
        Ok(Nonlinearity::General(normalize(&e)?))
    }

    pub fn power(f0: Expr, k: Expr) -> Result<Self> {
        if let Some(r) = normalize(&k)?.as_rational() {
            if r.is_zero() || r.is_one() {
                return Err(Error::InvalidPowerExponent);
            }
        }
        if !f0.free().0.is_empty() {
            return Err(Error::Invalid("F0 must be a constant".into()));
        }
        Ok(Nonlinearity::Power { f0, k })
    }

    pub fn potential(v: Expr) -> Result<Self> {
        let v = normalize(&v)?;
        if v.depends_on_u() {
            return Err(Error::UDependent(v.to_string()));
        }
        Ok(Nonlinearity::Potential { v })
    }

    /// The expression form of the nonlinearity.
    pub fn body(&self) -> Result<Expr> {
        match self {
            Nonlinearity::Zero => Ok(Expr::zero()),
            Nonlinearity::General(e) | Nonlinearity::Reduced(e) => Ok(e.clone()),
            Nonlinearity::Power { f0, k } => {
                normalize(&(f0.clone() * Expr::u().pow(k.clone())))
            }
            Nonlinearity::Potential { v } => normalize(&(-(v.clone() * Expr::u()))),
        }
    }

    /// True for members of the reduced class `F = F(x, u)`.
    pub fn is_reduced_class(&self) -> Result<bool> {
        Ok(match self {
            Nonlinearity::Zero | Nonlinearity::Reduced(_) => true,
            Nonlinearity::Power { .. } | Nonlinearity::Potential { .. } => true,
            Nonlinearity::General(_) => {
                let (vars, _) = self.body()?.free();
                !vars.iter().any(|v| matches!(v, Var::Du(_)))
            }
        })
    }
}

/// Symmetry candidate `Q = xi^mu d_mu + eta d_u` with `xi` independent of
/// `u`; for the reduced class `eta` decomposes as `a(x) u + b(x)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    field: VectorField,
    reduced_parts: Option<(Expr, Expr)>,
}

impl Candidate {
    pub fn general(field: VectorField) -> Result<Self> {
        if !field.is_geometric() {
            for mu in field.dim().indices() {
                if field.xi()[mu].mentions(Var::U) {
                    return Err(Error::XiDependsOnU(mu));
                }
            }
        }
        let reduced_parts = Self::decompose(&field).ok();
        Ok(Candidate {
            field,
            reduced_parts,
        })
    }

    pub fn reduced(field: VectorField) -> Result<Self> {
        let c = Self::general(field)?;
        if c.reduced_parts.is_none() {
            return Err(Error::EtaNotLinear);
        }
        Ok(c)
    }

    fn decompose(field: &VectorField) -> Result<(Expr, Expr)> {
        let eta = field.eta();
        let a = differentiate(eta, Var::U)?;
        if a.mentions(Var::U) {
            return Err(Error::EtaNotLinear);
        }
        let at_zero = Binding::new().bind_var(Var::U, Expr::zero())?;
        let b = substitute(eta, &at_zero)?;
        let recomposed = normalize(&(a.clone() * Expr::u() + b.clone()))?;
        if recomposed != *eta {
            return Err(Error::EtaNotLinear);
        }
        Ok((a, b))
    }

    pub fn field(&self) -> &VectorField {
        &self.field
    }

    /// `(a, b)` with `eta = a(x) u + b(x)`, when the decomposition exists.
    pub fn reduced_parts(&self) -> Option<&(Expr, Expr)> {
        self.reduced_parts.as_ref()
    }
}

fn require_killing_or_vertical(q: &Candidate, g: &Metric) -> Result<()> {
    if q.field().xi_is_zero() {
        return Ok(());
    }
    match killing_check(q.field(), g)? {
        KillingOutcome::Conformal { .. } => Ok(()),
        KillingOutcome::NotKilling {
            alpha,
            beta,
            residual,
        } => Err(Error::NotConformalKilling {
            alpha,
            beta,
            residual: residual.to_string(),
        }),
    }
}

/// Killing factor `2 xi^0_0` of a candidate (zero for vertical fields).
pub fn candidate_kappa(q: &Candidate) -> Result<Expr> {
    normalize(&(Expr::int(2) * differentiate(&q.field().xi()[0], Var::Coord(0))?))
}

/// Residual of the classifying determining equation for the general class:
///
/// `xi^mu F_mu + eta F_u + tau_mu F_{u_mu} + (2 xi^0_0 - eta_u) F
///  + u_s Box xi^s - Box eta - 2 g^{mn} u_m eta_{nu} - g^{mn} u_m u_n eta_uu`
///
/// with `tau_mu = eta_mu + u_mu eta_u - u_s xi^s_mu`. The candidate is a
/// symmetry exactly when the residual vanishes identically in `(x, u, u_mu)`.
pub fn determining_residual_general(
    f: &Nonlinearity,
    q: &Candidate,
    g: &Metric,
) -> Result<Expr> {
    require_killing_or_vertical(q, g)?;
    let dim = g.dim();
    let body = f.body()?;
    let xi = q.field().xi();
    let eta = q.field().eta();

    let eta_u = differentiate(eta, Var::U)?;
    let eta_uu = differentiate(&eta_u, Var::U)?;
    let f_u = differentiate(&body, Var::U)?;

    let mut terms: Vec<Expr> = Vec::new();
    // xi^mu F_mu
    for mu in dim.indices() {
        terms.push(xi[mu].clone() * differentiate(&body, Var::Coord(mu))?);
    }
    // eta F_u
    terms.push(eta.clone() * f_u);
    // tau_mu F_{u_mu}
    for mu in dim.indices() {
        let f_du = differentiate(&body, Var::Du(mu))?;
        if f_du.is_zero_node() {
            continue;
        }
        let mut tau = differentiate(eta, Var::Coord(mu))? + Expr::du(mu) * eta_u.clone();
        for sigma in dim.indices() {
            tau = tau
                - Expr::du(sigma) * differentiate(&xi[sigma], Var::Coord(mu))?;
        }
        terms.push(tau * f_du);
    }
    // (2 xi^0_0 - eta_u) F
    let kappa = Expr::int(2) * differentiate(&xi[0], Var::Coord(0))?;
    terms.push((kappa - eta_u.clone()) * body.clone());
    // u_s Box xi^s
    for sigma in dim.indices() {
        let boxed = g.dalembertian(&xi[sigma])?;
        if !boxed.is_zero_node() {
            terms.push(Expr::du(sigma) * boxed);
        }
    }
    // - Box eta
    terms.push(-g.dalembertian_xu(eta)?);
    // - 2 g^{mn} u_m eta_{nu}
    for mu in dim.indices() {
        let eta_mu_u = differentiate(&eta_u, Var::Coord(mu))?;
        if !eta_mu_u.is_zero_node() {
            terms.push(Expr::int(-2 * g.sign(mu)) * Expr::du(mu) * eta_mu_u);
        }
    }
    // - g^{mn} u_m u_n eta_uu
    if !eta_uu.is_zero_node() {
        for mu in dim.indices() {
            terms.push(
                Expr::int(-g.sign(mu)) * Expr::du(mu) * Expr::du(mu) * eta_uu.clone(),
            );
        }
    }
    normalize(&Expr::Sum(terms))
}

/// Residual and constraint report for the reduced class:
/// `xi^mu F_mu + eta F_u + (2 xi^0_0 - eta_u) F - Box eta = 0` together with
/// `Box xi^mu = 2 g^{mu nu} a_nu(x)`.
pub fn determining_residual_reduced(
    f: &Nonlinearity,
    q: &Candidate,
    g: &Metric,
) -> Result<(Expr, bool)> {
    if !f.is_reduced_class()? {
        return Err(Error::ReducedClassViolation);
    }
    let (a, _b) = q
        .reduced_parts()
        .cloned()
        .ok_or(Error::EtaNotLinear)?;
    require_killing_or_vertical(q, g)?;
    let dim = g.dim();
    let body = f.body()?;
    let xi = q.field().xi();
    let eta = q.field().eta();
    let eta_u = differentiate(eta, Var::U)?;

    let mut terms: Vec<Expr> = Vec::new();
    for mu in dim.indices() {
        terms.push(xi[mu].clone() * differentiate(&body, Var::Coord(mu))?);
    }
    terms.push(eta.clone() * differentiate(&body, Var::U)?);
    let kappa = Expr::int(2) * differentiate(&xi[0], Var::Coord(0))?;
    terms.push((kappa - eta_u) * body.clone());
    terms.push(-g.dalembertian_xu(eta)?);
    let residual = normalize(&Expr::Sum(terms))?;

    let mut constraint_ok = true;
    for mu in dim.indices() {
        let lhs = g.dalembertian(&xi[mu])?;
        let rhs = Expr::int(2 * g.sign(mu)) * differentiate(&a, Var::Coord(mu))?;
        if !normalize(&(lhs - rhs))?.is_zero_node() {
            constraint_ok = false;
            break;
        }
    }
    Ok((residual, constraint_ok))
}

/// Oracle verdict, decided by the on-shell second prolongation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleVerdict {
    Symmetry,
    NotSymmetry,
}

const HESSIAN_PREFIX: &str = "uhess";

fn hessian_sym(mu: usize, nu: usize) -> Expr {
    let (lo, hi) = if mu <= nu { (mu, nu) } else { (nu, mu) };
    Expr::sym(format!("{HESSIAN_PREFIX}{lo}x{hi}"))
}

/// Second-order truncated total derivative, with second derivatives encoded
/// as reserved symbols.
fn total_derivative2(e: &Expr, nu: usize, dim: Dim) -> Result<Expr> {
    let mut out = differentiate(e, Var::Coord(nu))? + Expr::du(nu) * differentiate(e, Var::U)?;
    for sigma in dim.indices() {
        let d = differentiate(e, Var::Du(sigma))?;
        if !d.is_zero_node() {
            out = out + hessian_sym(nu, sigma) * d;
        }
    }
    normalize(&out)
}

/// Independent cross-check of the determining equation: applies the standard
/// second prolongation of `Q` to `Delta = Box u - F`, substitutes the
/// on-shell relation `u_00 = F + sum_a u_aa`, and zero-tests the result.
pub fn prolongation_oracle(
    f: &Nonlinearity,
    q: &Candidate,
    g: &Metric,
    seed: u64,
) -> Result<OracleVerdict> {
    require_killing_or_vertical(q, g)?;
    let dim = g.dim();
    let body = f.body()?;
    {
        let (_, syms) = body.free();
        if syms.iter().any(|s| s.starts_with(HESSIAN_PREFIX)) {
            return Err(Error::Invalid(format!(
                "symbol prefix '{HESSIAN_PREFIX}' is reserved by the oracle"
            )));
        }
    }
    let xi = q.field().xi();
    let eta = q.field().eta();

    // first prolongation coefficients tau_mu = D_mu eta - u_s D_mu xi^s
    let mut tau = Vec::with_capacity(dim.components());
    for mu in dim.indices() {
        let mut t = total_derivative(eta, mu, dim)?;
        for sigma in dim.indices() {
            t = t - Expr::du(sigma) * total_derivative(&xi[sigma], mu, dim)?;
        }
        tau.push(normalize(&t)?);
    }
    // second prolongation coefficients
    // tau_{mu nu} = D2_nu tau_mu - u_{mu s} d_nu xi^s
    let mut prolonged_box = Expr::zero();
    for mu in dim.indices() {
        let mut t = total_derivative2(&tau[mu], mu, dim)?;
        for sigma in dim.indices() {
            t = t - hessian_sym(mu, sigma) * differentiate(&xi[sigma], Var::Coord(mu))?;
        }
        prolonged_box = prolonged_box + Expr::int(g.sign(mu)) * t;
    }
    // pr Q (Delta) = sum_mu g^{mm} tau_{mm} - (xi^mu F_mu + eta F_u + tau_mu F_{u_mu})
    let mut applied_f = Expr::zero();
    for mu in dim.indices() {
        applied_f = applied_f + xi[mu].clone() * differentiate(&body, Var::Coord(mu))?;
        applied_f = applied_f + tau[mu].clone() * differentiate(&body, Var::Du(mu))?;
    }
    applied_f = applied_f + eta.clone() * differentiate(&body, Var::U)?;
    let symmetry_condition = normalize(&(prolonged_box - applied_f))?;

    // on-shell substitution u_00 = F + sum_a u_aa
    let mut rhs = body.clone();
    for a in 1..=dim.n() {
        rhs = rhs + hessian_sym(a, a);
    }
    let on_shell_binding = Binding::new().bind_sym(
        format!("{HESSIAN_PREFIX}0x0"),
        normalize(&rhs)?,
    )?;
    let on_shell = substitute(&symmetry_condition, &on_shell_binding)?;

    match is_zero(&on_shell, seed)? {
        ZeroVerdict::Zero => Ok(OracleVerdict::Symmetry),
        ZeroVerdict::Nonzero => Ok(OracleVerdict::NotSymmetry),
        ZeroVerdict::Undetermined => Err(Error::Invalid(
            "prolongation oracle zero test undetermined (all sample points were poles)".into(),
        )),
    }
}

/// Klein-Gordon classifying residual `xi^mu V_mu + 2 xi^0_0 V` for
/// `Box u + V(x) u = 0` with `xi` from the Killing solution.
pub fn kg_classifying_residual(
    v: &Expr,
    params: &ConformalParams,
    g: &Metric,
) -> Result<Expr> {
    let v = normalize(v)?;
    if v.depends_on_u() {
        return Err(Error::UDependent(v.to_string()));
    }
    let field = crate::lie::killing_solution(params, g)?;
    let xi = field.xi();
    let mut terms: Vec<Expr> = Vec::new();
    for mu in g.dim().indices() {
        terms.push(xi[mu].clone() * differentiate(&v, Var::Coord(mu))?);
    }
    terms.push(Expr::int(2) * differentiate(&xi[0], Var::Coord(0))? * v.clone());
    normalize(&Expr::Sum(terms))
}

/// Exponent of the conformally invariant power nonlinearity,
/// `k = (n+3)/(n-1)`.
pub fn conformal_exponent(dim: Dim) -> Rational {
    Rational::new(
        num::BigInt::from(dim.n() as i64 + 3),
        num::BigInt::from(dim.n() as i64 - 1),
    )
}

/// The scaling weight `eta = (1-n)/4 kappa(x) u` attached to a conformal
/// Killing field with factor `kappa` for the power law at the conformal
/// exponent.
pub fn conformal_weight_eta(kappa: &Expr, dim: Dim) -> Result<Expr> {
    normalize(&(Expr::rat(1 - dim.n() as i64, 4) * kappa.clone() * Expr::u()))
}

/// Per-generator verdict of the power-law invariance check.
#[derive(Debug, Clone)]
pub struct PowerVerdict {
    pub generator: String,
    pub admits: bool,
    pub residual: Expr,
    pub constraint_ok: bool,
}

/// Runs the reduced determining equation for `F = F0 u^k` against every
/// generator of the conformal basis, each extended by the adapted weight
/// `eta = kappa/(1-k) u`; a generator admits the exponent when the residual
/// vanishes and the constraint holds. At `k = (n+3)/(n-1)` the adapted
/// weight coincides with `(1-n)/4 kappa u` and every generator passes.
pub fn power_invariance_check(k: &Rational, g: &Metric) -> Result<Vec<PowerVerdict>> {
    if k.is_zero() || k.is_one() {
        return Err(Error::InvalidPowerExponent);
    }
    let f = Nonlinearity::power(Expr::sym("F0"), Expr::Rat(k.clone()))?;
    let weight = Rational::one() / (Rational::one() - k.clone());
    let mut out = Vec::new();
    for gen in Generator::all(g.dim()) {
        let field = gen.field(g)?;
        let kappa = match killing_check(&field, g)? {
            KillingOutcome::Conformal { kappa } => kappa,
            KillingOutcome::NotKilling { .. } => unreachable!("basis fields are Killing"),
        };
        let eta = normalize(&(Expr::Rat(weight.clone()) * kappa * Expr::u()))?;
        let q = Candidate::reduced(field.with_eta(eta)?)?;
        let (residual, constraint_ok) = determining_residual_reduced(&f, &q, g)?;
        let admits = residual.is_zero_node() && constraint_ok;
        out.push(PowerVerdict {
            generator: gen.name(),
            admits,
            residual,
            constraint_ok,
        });
    }
    Ok(out)
}

/// JSON report for a single symmetry check.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct SymmetryReport {
    pub generator: String,
    pub residual: String,
    pub verdict: String,
    pub constraint_ok: bool,
    pub kappa: String,
}

impl SymmetryReport {
    pub fn new(
        generator: String,
        residual: &Expr,
        is_symmetry: bool,
        constraint_ok: bool,
        kappa: &Expr,
    ) -> Self {
        SymmetryReport {
            generator,
            residual: residual.to_string(),
            verdict: if is_symmetry {
                "symmetry".to_string()
            } else {
                "not".to_string()
            },
            constraint_ok,
            kappa: kappa.to_string(),
        }
    }

    pub fn is_symmetry(&self) -> bool {
        self.verdict == "symmetry"
    }
}

/// Convenience wrapper: residual-based verdict for either class.
pub fn check_candidate(
    f: &Nonlinearity,
    q: &Candidate,
    g: &Metric,
    reduced_class: bool,
    seed: u64,
) -> Result<(Expr, bool, bool)> {
    if reduced_class {
        let (residual, constraint_ok) = determining_residual_reduced(f, q, g)?;
        let zero = matches!(is_zero(&residual, seed)?, ZeroVerdict::Zero);
        Ok((residual, zero && constraint_ok, constraint_ok))
    } else {
        let residual = determining_residual_general(f, q, g)?;
        let zero = matches!(is_zero(&residual, seed)?, ZeroVerdict::Zero);
        Ok((residual, zero, true))
    }
}

/// Default-seed oracle call.
pub fn prolongation_oracle_default(
    f: &Nonlinearity,
    q: &Candidate,
    g: &Metric,
) -> Result<OracleVerdict> {
    prolongation_oracle(f, q, g, DEFAULT_SEED)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::lie::Generator;

    fn g3() -> Metric {
        Metric::new(Dim::new(3).unwrap())
    }

    fn p(s: &str) -> Expr {
        parse(s, Dim::new(3).unwrap()).unwrap()
    }

    fn gen_field(g: &Metric, gen: Generator) -> VectorField {
        gen.field(g).unwrap()
    }

    #[test]
    fn general_residual_trivial_cases() {
        let g = g3();
        // F = 0, Q = P0: residual 0
        let q = Candidate::general(gen_field(&g, Generator::P(0))).unwrap();
        let r = determining_residual_general(&Nonlinearity::Zero, &q, &g).unwrap();
        assert!(r.is_zero_node());
        // F = u_0 (gradient-dependent), Q = P1: residual 0
        let f = Nonlinearity::general(p("u_0")).unwrap();
        let q = Candidate::general(gen_field(&g, Generator::P(1))).unwrap();
        assert!(determining_residual_general(&f, &q, &g).unwrap().is_zero_node());
    }

    #[test]
    fn general_residual_sl2_contradiction() {
        let g = g3();
        // F with F_u = 0 and u_mu F_{u_mu} = F, Q = -u^2 d_u:
        // residual contains 2 g^{mn} u_m u_n
        let f = Nonlinearity::general(p("u_0")).unwrap();
        let q = Candidate::general(
            VectorField::vertical(g.dim(), p("-u^2")).unwrap(),
        )
        .unwrap();
        let r = determining_residual_general(&f, &q, &g).unwrap();
        let expected = p("2*u_0^2 - 2*u_1^2 - 2*u_2^2 - 2*u_3^2");
        assert_eq!(r, expected);
    }

    #[test]
    fn general_residual_requires_killing_xi() {
        let g = g3();
        let bad = VectorField::geometric(
            g.dim(),
            vec![Expr::zero(), Expr::coord(1), Expr::zero(), Expr::zero()],
        )
        .unwrap();
        let q = Candidate::general(bad).unwrap();
        assert!(matches!(
            determining_residual_general(&Nonlinearity::Zero, &q, &g),
            Err(Error::NotConformalKilling { .. })
        ));
    }

    #[test]
    fn reduced_residual_power_dilation() {
        let g = g3();
        // F = F0 u^k, Q = D with a = 2/(1-k): residual 0, constraint ok
        let f = Nonlinearity::power(Expr::sym("F0"), Expr::sym("k")).unwrap();
        let eta = p("2/(1 - k)*u");
        let q = Candidate::reduced(gen_field(&g, Generator::D).with_eta(eta).unwrap()).unwrap();
        let (r, ok) = determining_residual_reduced(&f, &q, &g).unwrap();
        assert!(r.is_zero_node(), "residual: {r}");
        assert!(ok);
    }

    #[test]
    fn reduced_residual_mass_term_obstruction() {
        let g = g3();
        // F = -m^2 u, Q = D with eta = 0: residual -2 m^2 u
        let f = Nonlinearity::potential(p("m^2")).unwrap();
        let q = Candidate::reduced(gen_field(&g, Generator::D)).unwrap();
        let (r, ok) = determining_residual_reduced(&f, &q, &g).unwrap();
        assert_eq!(r, p("-2*m^2*u"));
        assert!(ok);
        // and with the plain sign convention F = +m^2 u: residual 2 m^2 u
        let f = Nonlinearity::reduced(p("m^2*u")).unwrap();
        let (r, _) = determining_residual_reduced(&f, &q, &g).unwrap();
        assert_eq!(r, p("2*m^2*u"));
    }

    #[test]
    fn reduced_residual_linearity_symmetry() {
        let g = g3();
        // F = 0, Q = S = u d_u: residual 0
        let q = Candidate::reduced(
            VectorField::vertical(g.dim(), Expr::u()).unwrap(),
        )
        .unwrap();
        let (r, ok) = determining_residual_reduced(&Nonlinearity::Zero, &q, &g).unwrap();
        assert!(r.is_zero_node());
        assert!(ok);
    }

    #[test]
    fn reduced_residual_b_source_term() {
        let g = g3();
        // F = -V u, Q = b(x) d_u: residual = -(Box b + V b)
        let v = p("m^2");
        let f = Nonlinearity::potential(v.clone()).unwrap();
        let b = p("x0^2 + x1^2");
        let q = Candidate::reduced(VectorField::vertical(g.dim(), b.clone()).unwrap()).unwrap();
        let (r, _) = determining_residual_reduced(&f, &q, &g).unwrap();
        let expected = normalize(
            &-(g.dalembertian(&b).unwrap() + v * b),
        )
        .unwrap();
        assert_eq!(r, expected);
    }

    #[test]
    fn reduced_class_violation_rejected() {
        let g = g3();
        let f = Nonlinearity::general(p("u_0^2")).unwrap();
        let q = Candidate::reduced(gen_field(&g, Generator::P(0))).unwrap();
        assert!(matches!(
            determining_residual_reduced(&f, &q, &g),
            Err(Error::ReducedClassViolation)
        ));
        // eta nonlinear in u rejected for the reduced pathway
        let q = Candidate::general(
            VectorField::vertical(g.dim(), p("u^2")).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            determining_residual_reduced(&Nonlinearity::Zero, &q, &g),
            Err(Error::EtaNotLinear)
        ));
    }

    #[test]
    fn oracle_agrees_on_conformal_power_law() {
        let g = g3();
        // F = F0 u^3, n = 3, Q = K0 + (1-n) x_0 u d_u = K0 - 2 x0 u d_u
        let f = Nonlinearity::power(Expr::sym("F0"), Expr::int(3)).unwrap();
        let q = Candidate::reduced(
            gen_field(&g, Generator::K(0))
                .with_eta(p("-2*x0*u"))
                .unwrap(),
        )
        .unwrap();
        let (r, ok) = determining_residual_reduced(&f, &q, &g).unwrap();
        assert!(r.is_zero_node(), "residual {r}");
        assert!(ok);
        assert_eq!(
            prolongation_oracle_default(&f, &q, &g).unwrap(),
            OracleVerdict::Symmetry
        );
        // F = F0 u^2 with the same candidate is not a symmetry
        let f2 = Nonlinearity::power(Expr::sym("F0"), Expr::int(2)).unwrap();
        let (r2, ok2) = determining_residual_reduced(&f2, &q, &g).unwrap();
        assert!(!(r2.is_zero_node() && ok2));
        assert_eq!(
            prolongation_oracle_default(&f2, &q, &g).unwrap(),
            OracleVerdict::NotSymmetry
        );
        // F = 0, Q = J01 is a symmetry
        let q = Candidate::general(gen_field(&g, Generator::J(0, 1))).unwrap();
        assert_eq!(
            prolongation_oracle_default(&Nonlinearity::Zero, &q, &g).unwrap(),
            OracleVerdict::Symmetry
        );
    }

    #[test]
    fn kg_classifying_examples() {
        let g = g3();
        let dim = g.dim();
        // V = m^2, translations: residual 0
        let mut tr = ConformalParams::zero(dim);
        tr.a[2] = crate::expr::rat(1, 1);
        assert!(kg_classifying_residual(&p("m^2"), &tr, &g).unwrap().is_zero_node());
        // V = m^2, dilation: residual 2 m^2
        let mut dil = ConformalParams::zero(dim);
        dil.d = crate::expr::rat(1, 1);
        assert_eq!(
            kg_classifying_residual(&p("m^2"), &dil, &g).unwrap(),
            p("2*m^2")
        );
        // V = rho/(x*x), dilation: residual 0
        let v = p("rho/(x0^2 - x1^2 - x2^2 - x3^2)");
        assert!(kg_classifying_residual(&v, &dil, &g).unwrap().is_zero_node());
        // u-dependent potential rejected
        assert!(kg_classifying_residual(&p("u"), &dil, &g).is_err());
    }

    #[test]
    fn conformal_exponent_values() {
        assert_eq!(conformal_exponent(Dim::new(3).unwrap()), crate::expr::rat(3, 1));
        assert_eq!(conformal_exponent(Dim::new(2).unwrap()), crate::expr::rat(5, 1));
        assert_eq!(conformal_exponent(Dim::new(4).unwrap()), crate::expr::rat(7, 3));
    }

    #[test]
    fn power_invariance_at_conformal_exponent() {
        let g = g3();
        let k = conformal_exponent(g.dim());
        let verdicts = power_invariance_check(&k, &g).unwrap();
        assert_eq!(verdicts.len(), 15);
        for v in &verdicts {
            assert!(v.admits, "{} rejected k = (n+3)/(n-1)", v.generator);
        }
    }

    #[test]
    fn power_invariance_off_exponent() {
        let g = g3();
        // k = 2 at n = 3: P, J, D admit (D via adapted weight a = -2),
        // every K_mu fails
        let verdicts = power_invariance_check(&crate::expr::rat(2, 1), &g).unwrap();
        for v in &verdicts {
            if v.generator.starts_with('K') {
                assert!(!v.admits, "{} unexpectedly admits k=2", v.generator);
            } else {
                assert!(v.admits, "{} unexpectedly rejects k=2", v.generator);
            }
        }
    }

    #[test]
    fn autonomous_translation_invariance() {
        let g = g3();
        for f in [
            Nonlinearity::general(p("u_0^2 + sin(u)")).unwrap(),
            Nonlinearity::reduced(p("F0*u^2 + u")).unwrap(),
        ] {
            for mu in 0..=3 {
                let q = Candidate::general(gen_field(&g, Generator::P(mu))).unwrap();
                let r = determining_residual_general(&f, &q, &g).unwrap();
                assert!(r.is_zero_node());
            }
        }
    }

    #[test]
    fn scaling_equivariance_of_residual() {
        let g = g3();
        let f = Nonlinearity::reduced(p("m^2*u")).unwrap();
        let q = Candidate::reduced(gen_field(&g, Generator::D)).unwrap();
        let (r1, _) = determining_residual_reduced(&f, &q, &g).unwrap();
        let scaled = Candidate::reduced(
            gen_field(&g, Generator::D).scaled(&crate::expr::rat(3, 2)).unwrap(),
        )
        .unwrap();
        let (r2, _) = determining_residual_reduced(&f, &scaled, &g).unwrap();
        assert_eq!(r2, normalize(&(p("3/2") * r1)).unwrap());
    }

    #[test]
    fn report_round_trip() {
        let report = SymmetryReport::new(
            "D".into(),
            &p("2*m^2*u"),
            false,
            true,
            &Expr::int(2),
        );
        let text = serde_json::to_string(&report).unwrap();
        let back: SymmetryReport = serde_json::from_str(&text).unwrap();
        assert_eq!(report, back);
        assert!(!back.is_symmetry());
    }
}
