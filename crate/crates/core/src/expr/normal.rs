//! Canonical normal form: expanded sums of monomials over a single common
//! denominator, with exact rational coefficients. Transcendental calls and
//! formal (fractional or symbolic) powers are atoms of the monomial basis.

use std::collections::BTreeMap;

use num::integer::Integer;
use num::{BigInt, One, Signed, Zero};

use super::ast::{Expr, Func, Rational, Var};
use crate::error::{Error, Result};

pub(crate) fn rat_int(v: i64) -> Rational {
    Rational::from(BigInt::from(v))
}

/// Exponent of a single base inside a monomial: a rational constant plus a
/// rational-linear combination of symbolic constants, e.g. `k - 1` or `1/2`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub(crate) struct ExpForm {
    pub c: Rational,
    pub syms: BTreeMap<String, Rational>,
}

impl ExpForm {
    pub fn from_rat(c: Rational) -> Self {
        ExpForm {
            c,
            syms: BTreeMap::new(),
        }
    }

    pub fn from_int(v: i64) -> Self {
        Self::from_rat(rat_int(v))
    }

    pub fn one() -> Self {
        Self::from_int(1)
    }

    pub fn sym(name: &str) -> Self {
        let mut syms = BTreeMap::new();
        syms.insert(name.to_string(), Rational::one());
        ExpForm {
            c: Rational::zero(),
            syms,
        }
    }

    fn clean(mut self) -> Self {
        self.syms.retain(|_, v| !v.is_zero());
        self
    }

    pub fn is_zero(&self) -> bool {
        self.c.is_zero() && self.syms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.c.is_one() && self.syms.is_empty()
    }

    /// Pure rational value, when no symbols are involved.
    pub fn as_rat(&self) -> Option<&Rational> {
        if self.syms.is_empty() {
            Some(&self.c)
        } else {
            None
        }
    }

    pub fn as_int(&self) -> Option<BigInt> {
        let r = self.as_rat()?;
        if r.is_integer() {
            Some(r.to_integer())
        } else {
            None
        }
    }

    pub fn add(&self, other: &ExpForm) -> ExpForm {
        let mut syms = self.syms.clone();
        for (k, v) in &other.syms {
            let slot = syms.entry(k.clone()).or_insert_with(Rational::zero);
            *slot += v;
        }
        ExpForm {
            c: &self.c + &other.c,
            syms,
        }
        .clean()
    }

    pub fn neg(&self) -> ExpForm {
        ExpForm {
            c: -self.c.clone(),
            syms: self.syms.iter().map(|(k, v)| (k.clone(), -v.clone())).collect(),
        }
    }

    pub fn sub(&self, other: &ExpForm) -> ExpForm {
        self.add(&other.neg())
    }

    pub fn add_rat(&self, r: &Rational) -> ExpForm {
        ExpForm {
            c: &self.c + r,
            syms: self.syms.clone(),
        }
    }

    pub fn scale(&self, q: &Rational) -> ExpForm {
        ExpForm {
            c: &self.c * q,
            syms: self.syms.iter().map(|(k, v)| (k.clone(), v * q)).collect(),
        }
        .clean()
    }

    /// Product of two exponent forms; defined when at least one side is a
    /// pure rational.
    pub fn mul_form(&self, q: &ExpForm) -> Result<ExpForm> {
        if let Some(r) = self.as_rat() {
            Ok(q.scale(r))
        } else if let Some(r) = q.as_rat() {
            Ok(self.scale(r))
        } else {
            Err(Error::UnsupportedExponent(
                "product of two symbolic exponents".into(),
            ))
        }
    }

    /// Expression tree form, used for printing and derivative coefficients.
    pub fn to_expr(&self) -> Expr {
        let mut terms: Vec<Expr> = Vec::new();
        for (name, coeff) in &self.syms {
            if coeff.is_one() {
                terms.push(Expr::Sym(name.clone()));
            } else {
                terms.push(Expr::Prod(vec![
                    Expr::Rat(coeff.clone()),
                    Expr::Sym(name.clone()),
                ]));
            }
        }
        if !self.c.is_zero() || terms.is_empty() {
            terms.push(Expr::Rat(self.c.clone()));
        }
        if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            Expr::Sum(terms)
        }
    }
}

/// Atomic base of a monomial factor.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum Base {
    Var(Var),
    Sym(String),
    /// Transcendental call over a normalized argument.
    Fun(Func, Expr),
    /// Formal power base: a normalized primitive polynomial (or rational
    /// constant) raised to a non-integer or symbolic exponent.
    Poly(Expr),
}

impl Base {
    pub fn to_expr(&self) -> Expr {
        match self {
            Base::Var(v) => Expr::Var(*v),
            Base::Sym(s) => Expr::Sym(s.clone()),
            Base::Fun(f, a) => Expr::Fun(*f, Box::new(a.clone())),
            Base::Poly(p) => p.clone(),
        }
    }
}

/// Monomial: product of base powers. Exponent invariants (maintained by
/// `canonicalize_entry`):
/// - no zero exponents;
/// - `Base::Poly` entries carry a constant part in `[0, 1)`;
/// - simple bases with pure rational exponent require it positive;
/// - exponents with symbolic parts are kept whole.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub(crate) struct Mono(pub BTreeMap<Base, ExpForm>);

impl Mono {
    pub fn unit() -> Self {
        Mono::default()
    }

    pub fn is_unit(&self) -> bool {
        self.0.is_empty()
    }

    pub fn single(base: Base) -> Self {
        let mut m = BTreeMap::new();
        m.insert(base, ExpForm::one());
        Mono(m)
    }
}

/// Multivariate polynomial over monomial atoms with rational coefficients.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub(crate) struct Poly {
    pub terms: BTreeMap<Mono, Rational>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn constant(c: Rational) -> Self {
        let mut p = Poly::zero();
        if !c.is_zero() {
            p.terms.insert(Mono::unit(), c);
        }
        p
    }

    pub fn one() -> Self {
        Poly::constant(Rational::one())
    }

    pub fn from_mono(m: Mono, c: Rational) -> Self {
        let mut p = Poly::zero();
        if !c.is_zero() {
            p.terms.insert(m, c);
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1
            && self
                .terms
                .get(&Mono::unit())
                .map(|c| c.is_one())
                .unwrap_or(false)
    }

    pub fn as_constant(&self) -> Option<Rational> {
        if self.is_zero() {
            return Some(Rational::zero());
        }
        if self.terms.len() == 1 {
            if let Some(c) = self.terms.get(&Mono::unit()) {
                return Some(c.clone());
            }
        }
        None
    }

    pub fn add_term(&mut self, m: Mono, c: Rational) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(m).or_insert_with(Rational::zero);
        *entry += c;
        if entry.is_zero() {
            // remove the slot we just zeroed
            let key = self
                .terms
                .iter()
                .find(|(_, v)| v.is_zero())
                .map(|(k, _)| k.clone());
            if let Some(k) = key {
                self.terms.remove(&k);
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), -c.clone()))
                .collect(),
        }
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn scale(&self, q: &Rational) -> Poly {
        if q.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), c * q))
                .collect(),
        }
    }

    /// True when every exponent is a positive integer (ordinary polynomial in
    /// the atom basis, the domain of the gcd routines).
    pub fn is_integral(&self) -> bool {
        self.terms.keys().all(|m| {
            m.0.values()
                .all(|e| e.as_int().map(|i| i.is_positive()).unwrap_or(false))
        })
    }

    /// Signed rational content: multiplying by its inverse yields coprime
    /// integer coefficients with positive leading (largest-monomial) term.
    pub fn rational_content(&self) -> Rational {
        if self.is_zero() {
            return Rational::one();
        }
        let mut num_gcd = BigInt::zero();
        let mut den_lcm = BigInt::one();
        for c in self.terms.values() {
            num_gcd = num_gcd.gcd(&c.numer().abs());
            den_lcm = den_lcm.lcm(c.denom());
        }
        let mut content = Rational::new(num_gcd, den_lcm);
        let leading = self.terms.iter().next_back().map(|(_, c)| c.clone());
        if let Some(lead) = leading {
            if lead.is_negative() {
                content = -content;
            }
        }
        content
    }
}

/// Rational function `num / den` over the monomial atom basis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct RatFun {
    pub num: Poly,
    pub den: Poly,
}

impl RatFun {
    pub fn from_poly(num: Poly) -> Self {
        RatFun {
            num,
            den: Poly::one(),
        }
    }

    pub fn constant(c: Rational) -> Self {
        RatFun::from_poly(Poly::constant(c))
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }
}

// ---------------------------------------------------------------------------
// Monomial-level canonicalization

/// Expansion request produced while canonicalizing monomial entries: the
/// expression is a polynomial to be multiplied into the numerator or
/// denominator with the given positive integer power.
struct Expansions {
    num: Vec<(Expr, u32)>,
    den: Vec<(Expr, u32)>,
}

impl Expansions {
    fn new() -> Self {
        Expansions {
            num: Vec::new(),
            den: Vec::new(),
        }
    }
}

fn floor_rat(r: &Rational) -> BigInt {
    r.numer().div_floor(r.denom())
}

fn big_to_u32(b: &BigInt) -> Result<u32> {
    use num::ToPrimitive;
    b.to_u32()
        .ok_or_else(|| Error::UnsupportedExponent(format!("exponent {b} too large")))
}

/// Inserts `base^e` into a monomial under construction, splitting off integer
/// polynomial expansions so the entry invariants hold.
fn canonicalize_entry(
    out: &mut BTreeMap<Base, ExpForm>,
    exps: &mut Expansions,
    base: Base,
    e: ExpForm,
) -> Result<()> {
    if e.is_zero() {
        return Ok(());
    }
    match &base {
        Base::Poly(p) => {
            let p = p.clone();
            let m = floor_rat(&e.c);
            let reduced = ExpForm {
                c: &e.c - Rational::from(m.clone()),
                syms: e.syms.clone(),
            };
            if m.is_positive() {
                exps.num.push((p, big_to_u32(&m)?));
            } else if m.is_negative() {
                exps.den.push((p, big_to_u32(&(-m))?));
            }
            if !reduced.is_zero() {
                out.insert(base, reduced);
            }
            Ok(())
        }
        _ => {
            if !e.syms.is_empty() {
                out.insert(base, e);
                return Ok(());
            }
            // pure rational exponent on a simple base
            if e.c.is_positive() {
                out.insert(base, e);
            } else if e.c.is_integer() {
                let m = -e.c.to_integer();
                exps.den.push((base.to_expr(), big_to_u32(&m)?));
            } else {
                let m = floor_rat(&e.c); // negative
                let frac = &e.c - Rational::from(m.clone());
                exps.den.push((base.to_expr(), big_to_u32(&(-m))?));
                out.insert(base, ExpForm::from_rat(frac));
            }
            Ok(())
        }
    }
}

fn canonicalize_map(map: BTreeMap<Base, ExpForm>) -> Result<(Mono, Expansions)> {
    let mut out = BTreeMap::new();
    let mut exps = Expansions::new();
    for (b, e) in map {
        canonicalize_entry(&mut out, &mut exps, b, e)?;
    }
    Ok((Mono(out), exps))
}

// ---------------------------------------------------------------------------
// Polynomial products

/// Polynomial product that must not spill into a denominator; used where one
/// factor is known to have no negatively-cancelling exponents.
pub(crate) fn poly_mul_plain(a: &Poly, b: &Poly) -> Result<Poly> {
    let (num, den) = poly_mul_full(a, b)?;
    if den.is_one() {
        Ok(num)
    } else {
        Err(Error::Invalid(
            "polynomial product unexpectedly produced a denominator".into(),
        ))
    }
}

/// General polynomial product, returning `num / den`. The denominator is 1
/// except when symbolic exponents cancel into negative integer powers.
pub(crate) fn poly_mul_full(a: &Poly, b: &Poly) -> Result<(Poly, Poly)> {
    let mut acc_num = Poly::zero();
    let mut acc_den = Poly::one();
    for (ma, ca) in &a.terms {
        for (mb, cb) in &b.terms {
            let mut map = ma.0.clone();
            for (base, e) in &mb.0 {
                let merged = match map.remove(base) {
                    Some(prev) => prev.add(e),
                    None => e.clone(),
                };
                if !merged.is_zero() {
                    map.insert(base.clone(), merged);
                } else {
                    map.remove(base);
                }
            }
            let (mono, exps) = canonicalize_map(map)?;
            let mut t_num = Poly::from_mono(mono, ca * cb);
            for (p, m) in &exps.num {
                let pw = poly_pow_int(&expr_to_poly(p)?, *m)?;
                t_num = poly_mul_plain(&t_num, &pw)?;
            }
            let mut t_den = Poly::one();
            for (p, m) in &exps.den {
                let pw = poly_pow_int(&expr_to_poly(p)?, *m)?;
                t_den = poly_mul_plain(&t_den, &pw)?;
            }
            // acc_num/acc_den + t_num/t_den
            if t_den.is_one() {
                if acc_den.is_one() {
                    acc_num = acc_num.add(&t_num);
                } else {
                    acc_num = acc_num.add(&poly_mul_plain(&t_num, &acc_den)?);
                }
            } else {
                acc_num = poly_mul_plain(&acc_num, &t_den)?.add(&poly_mul_plain(&t_num, &acc_den)?);
                acc_den = poly_mul_plain(&acc_den, &t_den)?;
            }
        }
    }
    Ok((acc_num, acc_den))
}

pub(crate) fn poly_pow_int(p: &Poly, m: u32) -> Result<Poly> {
    let mut out = Poly::one();
    for _ in 0..m {
        out = poly_mul_plain(&out, p)?;
    }
    Ok(out)
}

/// `p^q` for a non-integer or symbolic exponent `q`: produces formal power
/// atoms, extracting rational content and single-monomial structure.
fn poly_pow_formal(p: &Poly, q: &ExpForm) -> Result<RatFun> {
    if p.is_zero() {
        // 0^q: positive rational exponents give 0; negative are poles;
        // symbolic exponents are treated as formally positive.
        if let Some(r) = q.as_rat() {
            if r.is_negative() {
                return Err(Error::DivisionByZero);
            }
            if r.is_zero() {
                return Ok(RatFun::constant(Rational::one()));
            }
        }
        return Ok(RatFun::constant(Rational::zero()));
    }
    if q.is_zero() {
        return Ok(RatFun::constant(Rational::one()));
    }
    if q.is_one() {
        return Ok(RatFun::from_poly(p.clone()));
    }
    if p.is_one() {
        return Ok(RatFun::constant(Rational::one()));
    }
    if p.terms.len() == 1 {
        let (mono, coeff) = p.terms.iter().next().unwrap();
        let mut map = BTreeMap::new();
        let mut exps = Expansions::new();
        for (base, e) in &mono.0 {
            let scaled = e.mul_form(q)?;
            canonicalize_entry(&mut map, &mut exps, base.clone(), scaled)?;
        }
        // coefficient^q
        if !coeff.is_one() {
            push_const_power(&mut map, &mut exps, coeff, q)?;
        }
        let mut num = Poly::from_mono(Mono(map), Rational::one());
        for (pe, m) in &exps.num {
            num = poly_mul_plain(&num, &poly_pow_int(&expr_to_poly(pe)?, *m)?)?;
        }
        let mut den = Poly::one();
        for (pe, m) in &exps.den {
            den = poly_mul_plain(&den, &poly_pow_int(&expr_to_poly(pe)?, *m)?)?;
        }
        return Ok(RatFun { num, den });
    }
    // multi-term polynomial: extract content, keep primitive part as an
    // atom; the content stays positive so real evaluation survives roots
    let mut content = p.rational_content();
    if content.is_negative() {
        content = -content;
    }
    let prim = p.scale(&content.recip());
    let mut map = BTreeMap::new();
    let mut exps = Expansions::new();
    canonicalize_entry(&mut map, &mut exps, Base::Poly(poly_to_expr(&prim)), q.clone())?;
    if !content.is_one() {
        push_const_power(&mut map, &mut exps, &content, q)?;
    }
    let mut num = Poly::from_mono(Mono(map), Rational::one());
    for (pe, m) in &exps.num {
        num = poly_mul_plain(&num, &poly_pow_int(&expr_to_poly(pe)?, *m)?)?;
    }
    let mut den = Poly::one();
    for (pe, m) in &exps.den {
        den = poly_mul_plain(&den, &poly_pow_int(&expr_to_poly(pe)?, *m)?)?;
    }
    Ok(RatFun { num, den })
}

/// Inserts `c^q` for a rational constant `c != 1`, resolving exact roots when
/// possible and otherwise keeping a constant power atom.
fn push_const_power(
    map: &mut BTreeMap<Base, ExpForm>,
    exps: &mut Expansions,
    c: &Rational,
    q: &ExpForm,
) -> Result<()> {
    if let Some(r) = q.as_rat() {
        if let Some(exact) = exact_rational_pow(c, r) {
            if !exact.is_one() {
                canonicalize_entry(
                    map,
                    exps,
                    Base::Poly(Expr::Rat(exact.clone())),
                    ExpForm::one(),
                )?;
                // constant atoms with exponent 1 collapse via the Poly rule
                // (floor(1) = 1), landing in the numerator expansion list.
            }
            return Ok(());
        }
    }
    canonicalize_entry(map, exps, Base::Poly(Expr::Rat(c.clone())), q.clone())
}

/// Exact `c^(a/b)` over the rationals, when the root exists.
pub(crate) fn exact_rational_pow(c: &Rational, q: &Rational) -> Option<Rational> {
    use num::ToPrimitive;
    if q.is_integer() {
        let n = q.to_integer();
        let m = n.abs().to_u32()?;
        let mut out = Rational::one();
        for _ in 0..m {
            out *= c;
        }
        if n.is_negative() {
            if out.is_zero() {
                return None;
            }
            out = out.recip();
        }
        return Some(out);
    }
    let b = q.denom().to_u32()?;
    if c.is_negative() && b % 2 == 0 {
        return None;
    }
    let root_of = |v: &BigInt| -> Option<BigInt> {
        let (sign, mag) = (v.sign(), v.abs());
        let r = mag.nth_root(b);
        if num::pow::pow(r.clone(), b as usize) == mag {
            Some(match sign {
                num::bigint::Sign::Minus => -r,
                _ => r,
            })
        } else {
            None
        }
    };
    let rn = root_of(c.numer())?;
    let rd = root_of(c.denom())?;
    let root = Rational::new(rn, rd);
    let a = q.numer() * BigInt::from(1);
    let a_abs = a.abs().to_u32()?;
    let mut out = Rational::one();
    for _ in 0..a_abs {
        out *= &root;
    }
    if a.is_negative() {
        if out.is_zero() {
            return None;
        }
        out = out.recip();
    }
    Some(out)
}

// ---------------------------------------------------------------------------
// Rational-function arithmetic

/// Above this `num terms x den terms` budget the quotient reduction skips
/// the full polynomial gcd (cheaper cancellations still apply).
const GCD_SIZE_BOUND: usize = 4096;

pub(crate) fn rf_add(a: &RatFun, b: &RatFun) -> Result<RatFun> {
    if a.den == b.den {
        return rf_reduce(a.num.add(&b.num), a.den.clone());
    }
    // divisible denominators (powers of a shared factor are the common
    // case): bring to the larger one instead of the product
    if let Some(q) = super::gcd::poly_div_exact(&b.den, &a.den) {
        let t1 = poly_mul_plain(&a.num, &q)?;
        return rf_reduce(t1.add(&b.num), b.den.clone());
    }
    if let Some(q) = super::gcd::poly_div_exact(&a.den, &b.den) {
        let t2 = poly_mul_plain(&b.num, &q)?;
        return rf_reduce(a.num.add(&t2), a.den.clone());
    }
    let t1 = poly_mul_plain(&a.num, &b.den)?;
    let t2 = poly_mul_plain(&b.num, &a.den)?;
    let den = poly_mul_plain(&a.den, &b.den)?;
    rf_reduce(t1.add(&t2), den)
}

pub(crate) fn rf_neg(a: &RatFun) -> RatFun {
    RatFun {
        num: a.num.neg(),
        den: a.den.clone(),
    }
}

pub(crate) fn rf_sub(a: &RatFun, b: &RatFun) -> Result<RatFun> {
    rf_add(a, &rf_neg(b))
}

pub(crate) fn rf_mul(a: &RatFun, b: &RatFun) -> Result<RatFun> {
    let (num, spill) = poly_mul_full(&a.num, &b.num)?;
    let mut den = poly_mul_plain(&a.den, &b.den)?;
    if !spill.is_one() {
        den = poly_mul_plain(&den, &spill)?;
    }
    rf_reduce(num, den)
}

pub(crate) fn rf_div(a: &RatFun, b: &RatFun) -> Result<RatFun> {
    if b.num.is_zero() {
        return Err(Error::DivisionByZero);
    }
    let inv = RatFun {
        num: b.den.clone(),
        den: b.num.clone(),
    };
    rf_mul(a, &inv)
}

pub(crate) fn rf_pow(base: &RatFun, q: &ExpForm) -> Result<RatFun> {
    if q.is_zero() {
        return Ok(RatFun::constant(Rational::one()));
    }
    if base.is_zero() {
        if let Some(r) = q.as_rat() {
            if r.is_negative() {
                return Err(Error::DivisionByZero);
            }
        }
        return Ok(RatFun::constant(Rational::zero()));
    }
    if let Some(m) = q.as_int() {
        use num::ToPrimitive;
        let mm = m
            .abs()
            .to_u32()
            .ok_or_else(|| Error::UnsupportedExponent(format!("exponent {m} too large")))?;
        let num = poly_pow_int(&base.num, mm)?;
        let den = poly_pow_int(&base.den, mm)?;
        return if m.is_negative() {
            rf_reduce(den, num)
        } else {
            rf_reduce(num, den)
        };
    }
    if let Some(r) = q.as_rat() {
        // pure rational, non-integer exponent
        if r.is_negative() {
            let inv = RatFun {
                num: base.den.clone(),
                den: base.num.clone(),
            };
            return rf_pow(&inv, &ExpForm::from_rat(-r.clone()));
        }
        let m = floor_rat(r); // >= 0
        let frac = r - Rational::from(m.clone());
        let int_part = rf_pow(base, &ExpForm::from_rat(Rational::from(m)))?;
        let num_frac = poly_pow_formal(&base.num, &ExpForm::from_rat(frac.clone()))?;
        let frac_part = if base.den.is_one() {
            num_frac
        } else {
            // den^{-f} = den^{1-f} / den
            let den_frac = poly_pow_formal(
                &base.den,
                &ExpForm::from_rat(Rational::one() - frac),
            )?;
            let combined = rf_mul(&num_frac, &den_frac)?;
            rf_div(&combined, &RatFun::from_poly(base.den.clone()))?
        };
        return rf_mul(&int_part, &frac_part);
    }
    // symbolic exponent: all factors stay formal in the numerator
    let num_part = poly_pow_formal(&base.num, q)?;
    if base.den.is_one() {
        return Ok(num_part);
    }
    let den_part = poly_pow_formal(&base.den, &q.neg())?;
    rf_mul(&num_part, &den_part)
}

// ---------------------------------------------------------------------------
// Reduction to canonical quotient

/// Per-base cancellable exponent between two occurrence lists: defined when
/// the symbolic parts agree everywhere; cancels the minimum constant part.
fn common_factor(polys: [&Poly; 2]) -> Option<(Base, ExpForm)> {
    let first_mono = polys[0].terms.keys().next()?;
    'bases: for (base, e0) in &first_mono.0 {
        let mut min_c = e0.c.clone();
        let syms = &e0.syms;
        for p in polys {
            for m in p.terms.keys() {
                match m.0.get(base) {
                    Some(e) if &e.syms == syms => {
                        if e.c < min_c {
                            min_c = e.c.clone();
                        }
                    }
                    _ => continue 'bases,
                }
            }
        }
        let cancel = ExpForm {
            c: min_c,
            syms: syms.clone(),
        };
        if !cancel.is_zero() {
            // cancelling a negative pure-rational amount would move factors
            // the wrong way; only strip non-negative constant parts unless
            // symbols are involved
            if cancel.syms.is_empty() && !cancel.c.is_positive() {
                continue 'bases;
            }
            return Some((base.clone(), cancel));
        }
    }
    None
}

fn strip_factor(p: &Poly, base: &Base, cancel: &ExpForm) -> Result<Poly> {
    let mut out = Poly::zero();
    for (m, c) in &p.terms {
        let mut map = m.0.clone();
        let e = map.remove(base).expect("factor present in every monomial");
        let reduced = e.sub(cancel);
        let (mono, exps) = {
            let mut nm = BTreeMap::new();
            let mut ex = Expansions::new();
            for (b, ee) in map {
                canonicalize_entry(&mut nm, &mut ex, b, ee)?;
            }
            if !reduced.is_zero() {
                canonicalize_entry(&mut nm, &mut ex, base.clone(), reduced)?;
            }
            (Mono(nm), ex)
        };
        if !exps.den.is_empty() {
            return Err(Error::Invalid(
                "content cancellation produced a denominator".into(),
            ));
        }
        let mut t = Poly::from_mono(mono, c.clone());
        for (pe, mm) in &exps.num {
            t = poly_mul_plain(&t, &poly_pow_int(&expr_to_poly(pe)?, *mm)?)?;
        }
        out = out.add(&t);
    }
    Ok(out)
}

pub(crate) fn rf_reduce(num: Poly, den: Poly) -> Result<RatFun> {
    if den.is_zero() {
        return Err(Error::DivisionByZero);
    }
    if num.is_zero() {
        return Ok(RatFun {
            num: Poly::zero(),
            den: Poly::one(),
        });
    }
    let mut num = num;
    let mut den = den;
    // cancel common monomial content
    while let Some((base, cancel)) = common_factor([&num, &den]) {
        num = strip_factor(&num, &base, &cancel)?;
        den = strip_factor(&den, &base, &cancel)?;
    }
    // full gcd over ordinary polynomials; exact multiples always collapse
    if den.as_constant().is_none() && num.is_integral() && den.is_integral() {
        if let Some(q) = super::gcd::poly_div_exact(&num, &den) {
            num = q;
            den = Poly::one();
        } else if num.terms.len().saturating_mul(den.terms.len()) <= GCD_SIZE_BOUND {
            // beyond this size only monomial content and exact multiples
            // cancel; the zero test and value semantics are unaffected
            if let Some((qn, qd)) = super::gcd::reduce_pair(&num, &den) {
                num = qn;
                den = qd;
            }
        }
    }
    // scalar normalization: primitive denominator with positive leading term
    let content = den.rational_content();
    if !content.is_one() {
        let inv = content.recip();
        den = den.scale(&inv);
        num = num.scale(&inv);
    }
    Ok(RatFun { num, den })
}

// ---------------------------------------------------------------------------
// Tree <-> normal form conversions

pub(crate) fn to_ratfun(e: &Expr) -> Result<RatFun> {
    match e {
        Expr::Rat(r) => Ok(RatFun::constant(r.clone())),
        Expr::Sym(s) => Ok(RatFun::from_poly(Poly::from_mono(
            Mono::single(Base::Sym(s.clone())),
            Rational::one(),
        ))),
        Expr::Var(v) => Ok(RatFun::from_poly(Poly::from_mono(
            Mono::single(Base::Var(*v)),
            Rational::one(),
        ))),
        Expr::Sum(es) => {
            let mut acc = RatFun::constant(Rational::zero());
            for t in es {
                let rt = to_ratfun(t)?;
                acc = rf_add(&acc, &rt)?;
            }
            Ok(acc)
        }
        Expr::Prod(es) => {
            let mut acc = RatFun::constant(Rational::one());
            for t in es {
                if acc.is_zero() {
                    return Ok(acc);
                }
                let rt = to_ratfun(t)?;
                acc = rf_mul(&acc, &rt)?;
            }
            Ok(acc)
        }
        Expr::Quot(a, b) => {
            let ra = to_ratfun(a)?;
            let rb = to_ratfun(b)?;
            rf_div(&ra, &rb)
        }
        Expr::Pow(b, q) => {
            let base = to_ratfun(b)?;
            let form = expform_from_expr(q)?;
            rf_pow(&base, &form)
        }
        Expr::Fun(f, a) => {
            let arg = to_ratfun(a)?;
            let arg_tree = ratfun_to_expr(&arg);
            match (f, arg_tree.is_zero_node()) {
                (Func::Sin, true) => return Ok(RatFun::constant(Rational::zero())),
                (Func::Cos, true) | (Func::Exp, true) => {
                    return Ok(RatFun::constant(Rational::one()))
                }
                _ => {}
            }
            if matches!(f, Func::Ln) && arg_tree.is_one_node() {
                return Ok(RatFun::constant(Rational::zero()));
            }
            Ok(RatFun::from_poly(Poly::from_mono(
                Mono::single(Base::Fun(*f, arg_tree)),
                Rational::one(),
            )))
        }
    }
}

/// Interprets an exponent expression as a constant linear form over symbols.
pub(crate) fn expform_from_expr(e: &Expr) -> Result<ExpForm> {
    let rf = to_ratfun(e)?;
    let den = rf
        .den
        .as_constant()
        .ok_or_else(|| Error::UnsupportedExponent(format!("{}", ratfun_to_expr(&rf))))?;
    let mut out = ExpForm::default();
    for (mono, coeff) in &rf.num.terms {
        let scaled = coeff / &den;
        if mono.is_unit() {
            out.c += scaled;
            continue;
        }
        if mono.0.len() == 1 {
            let (base, e) = mono.0.iter().next().unwrap();
            if let (Base::Sym(name), true) = (base, e.is_one()) {
                let slot = out.syms.entry(name.clone()).or_insert_with(Rational::zero);
                *slot += scaled;
                continue;
            }
        }
        return Err(Error::UnsupportedExponent(format!(
            "{}",
            ratfun_to_expr(&rf)
        )));
    }
    Ok(out.clean())
}

pub(crate) fn expr_to_poly(e: &Expr) -> Result<Poly> {
    let rf = to_ratfun(e)?;
    if rf.den.is_one() {
        Ok(rf.num)
    } else {
        Err(Error::NotPolynomial(format!("{}", ratfun_to_expr(&rf))))
    }
}

fn mono_to_expr(m: &Mono, coeff: &Rational) -> Expr {
    let mut factors: Vec<Expr> = Vec::new();
    if !coeff.is_one() || m.is_unit() {
        factors.push(Expr::Rat(coeff.clone()));
    }
    for (base, e) in &m.0 {
        let b = base.to_expr();
        if e.is_one() {
            factors.push(b);
        } else {
            factors.push(Expr::Pow(Box::new(b), Box::new(e.to_expr())));
        }
    }
    if factors.len() == 1 {
        factors.pop().unwrap()
    } else {
        Expr::Prod(factors)
    }
}

pub(crate) fn poly_to_expr(p: &Poly) -> Expr {
    if p.is_zero() {
        return Expr::zero();
    }
    let mut terms: Vec<Expr> = p
        .terms
        .iter()
        .rev()
        .map(|(m, c)| mono_to_expr(m, c))
        .collect();
    if terms.len() == 1 {
        terms.pop().unwrap()
    } else {
        Expr::Sum(terms)
    }
}

pub(crate) fn ratfun_to_expr(rf: &RatFun) -> Expr {
    let num = poly_to_expr(&rf.num);
    if rf.den.is_one() {
        num
    } else {
        Expr::Quot(Box::new(num), Box::new(poly_to_expr(&rf.den)))
    }
}

// ---------------------------------------------------------------------------
// Factored-denominator evaluation, used by substitution

/// Rational value with the denominator kept as a product of polynomial
/// factor powers. Compositions of rational maps repeat the same denominator
/// factor; keeping it factored makes cancellation an exact-division peel
/// instead of a multivariate gcd.
#[derive(Debug, Clone)]
pub(crate) struct FracVal {
    num: Poly,
    den: BTreeMap<Poly, u32>,
    /// overall rational scale of the denominator
    den_scale: Rational,
}

impl FracVal {
    fn from_poly(num: Poly) -> Self {
        FracVal {
            num,
            den: BTreeMap::new(),
            den_scale: Rational::one(),
        }
    }

    pub(crate) fn zero() -> Self {
        FracVal::from_poly(Poly::zero())
    }

    pub(crate) fn one() -> Self {
        FracVal::from_poly(Poly::one())
    }

    pub(crate) fn constant_value(c: Rational) -> Self {
        FracVal::from_poly(Poly::constant(c))
    }

    pub(crate) fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub(crate) fn neg(&self) -> Self {
        FracVal {
            num: self.num.neg(),
            den: self.den.clone(),
            den_scale: self.den_scale.clone(),
        }
    }

    pub(crate) fn scale(&self, q: &Rational) -> Self {
        FracVal {
            num: self.num.scale(q),
            den: self.den.clone(),
            den_scale: self.den_scale.clone(),
        }
    }

    fn push_den_factor(&mut self, f: &Poly, power: u32) {
        if power == 0 {
            return;
        }
        if let Some(c) = f.as_constant() {
            for _ in 0..power {
                self.den_scale *= &c;
            }
            return;
        }
        let content = f.rational_content();
        let prim = f.scale(&content.recip());
        for _ in 0..power {
            self.den_scale *= &content;
        }
        *self.den.entry(prim).or_insert(0) += power;
    }

    /// Cancels denominator factors that divide the numerator exactly.
    fn peel(&mut self) {
        if self.num.is_zero() {
            self.den.clear();
            self.den_scale = Rational::one();
            return;
        }
        let factors: Vec<Poly> = self.den.keys().cloned().collect();
        for f in factors {
            while self.den.get(&f).copied().unwrap_or(0) > 0 {
                match super::gcd::poly_div_exact(&self.num, &f) {
                    Some(q) => {
                        self.num = q;
                        let slot = self.den.get_mut(&f).unwrap();
                        *slot -= 1;
                        if *slot == 0 {
                            self.den.remove(&f);
                            break;
                        }
                    }
                    None => break,
                }
            }
        }
    }

    fn den_expanded(&self) -> Result<Poly> {
        let mut out = Poly::constant(self.den_scale.clone());
        for (f, p) in &self.den {
            out = poly_mul_plain(&out, &poly_pow_int(f, *p)?)?;
        }
        Ok(out)
    }

    fn into_ratfun(mut self) -> Result<RatFun> {
        self.peel();
        let den = self.den_expanded()?;
        rf_reduce(self.num, den)
    }

    fn from_ratfun(rf: RatFun) -> Self {
        let mut out = FracVal::from_poly(rf.num);
        out.push_den_factor(&rf.den, 1);
        out
    }
}

pub(crate) fn fv_mul(a: &FracVal, b: &FracVal) -> Result<FracVal> {
    let (num, spill) = poly_mul_full(&a.num, &b.num)?;
    let mut out = FracVal {
        num,
        den: a.den.clone(),
        den_scale: &a.den_scale * &b.den_scale,
    };
    for (f, p) in &b.den {
        *out.den.entry(f.clone()).or_insert(0) += p;
    }
    if !spill.is_one() {
        out.push_den_factor(&spill, 1);
    }
    out.peel();
    Ok(out)
}

pub(crate) fn fv_add(a: &FracVal, b: &FracVal) -> Result<FracVal> {
    // common denominator: factor-wise maximum power
    let mut union: BTreeMap<Poly, u32> = a.den.clone();
    for (f, p) in &b.den {
        let slot = union.entry(f.clone()).or_insert(0);
        *slot = (*slot).max(*p);
    }
    let deficit = |own: &BTreeMap<Poly, u32>| -> Result<Poly> {
        let mut out = Poly::one();
        for (f, p) in &union {
            let have = own.get(f).copied().unwrap_or(0);
            if *p > have {
                out = poly_mul_plain(&out, &poly_pow_int(f, p - have)?)?;
            }
        }
        Ok(out)
    };
    // scales: a.num/(sa Da) + b.num/(sb Db) over (sa sb Dmax):
    // (a.num * sb * deficit_a + b.num * sa * deficit_b) / (sa sb Dmax)
    let ta = poly_mul_plain(&a.num.scale(&b.den_scale), &deficit(&a.den)?)?;
    let tb = poly_mul_plain(&b.num.scale(&a.den_scale), &deficit(&b.den)?)?;
    let mut out = FracVal {
        num: ta.add(&tb),
        den: union,
        den_scale: &a.den_scale * &b.den_scale,
    };
    out.peel();
    Ok(out)
}

pub(crate) fn fv_div(a: &FracVal, b: &FracVal) -> Result<FracVal> {
    if b.num.is_zero() {
        return Err(Error::DivisionByZero);
    }
    // single-monomial divisors invert by exponent negation, which keeps
    // formal power atoms in the numerator and denominators ordinary
    if b.num.terms.len() == 1 {
        let (mono, c) = b.num.terms.iter().next().unwrap();
        let mut map = BTreeMap::new();
        let mut exps = Expansions::new();
        for (base, e) in &mono.0 {
            canonicalize_entry(&mut map, &mut exps, base.clone(), e.neg())?;
        }
        let mut inv = FracVal::from_poly(Poly::from_mono(Mono(map), c.recip()));
        for (pe, m) in &exps.num {
            inv = fv_mul(
                &inv,
                &FracVal::from_poly(poly_pow_int(&expr_to_poly(pe)?, *m)?),
            )?;
        }
        for (pe, m) in &exps.den {
            inv.push_den_factor(&expr_to_poly(pe)?, *m);
        }
        let inv = fv_mul(&inv, &FracVal::from_poly(b.den_expanded()?))?;
        return fv_mul(a, &inv);
    }
    // a / (n_b / d_b) = a * d_b / n_b
    let mut out = a.clone();
    out.num = poly_mul_plain(&out.num, &b.den_expanded()?)?;
    out.push_den_factor(&b.num, 1);
    out.peel();
    Ok(out)
}

pub(crate) fn fv_pow_int(a: &FracVal, m: u32) -> Result<FracVal> {
    let mut out = FracVal::from_poly(Poly::one());
    for _ in 0..m {
        out = fv_mul(&out, a)?;
    }
    Ok(out)
}

/// Evaluates a tree into a factored-denominator value, replacing bound
/// variables and symbols. Non-integer powers and transcendental atoms fall
/// back to the plain normal form for their subtrees.
pub(crate) fn eval_with_binding(
    e: &Expr,
    binding: &crate::expr::Binding,
) -> Result<FracVal> {
    let mut memo = std::collections::HashMap::new();
    eval_with_binding_memo(e, binding, &mut memo)
}

fn eval_with_binding_memo(
    e: &Expr,
    binding: &crate::expr::Binding,
    memo: &mut std::collections::HashMap<Expr, FracVal>,
) -> Result<FracVal> {
    // repeated subtrees (power atoms, bound coordinates) compose once
    let cacheable = matches!(e, Expr::Pow(_, _) | Expr::Fun(_, _) | Expr::Quot(_, _));
    if cacheable {
        if let Some(hit) = memo.get(e) {
            return Ok(hit.clone());
        }
    }
    let out = eval_with_binding_inner(e, binding, memo)?;
    if cacheable {
        memo.insert(e.clone(), out.clone());
    }
    Ok(out)
}

fn eval_with_binding_inner(
    e: &Expr,
    binding: &crate::expr::Binding,
    memo: &mut std::collections::HashMap<Expr, FracVal>,
) -> Result<FracVal> {
    use crate::expr::Target;
    match e {
        Expr::Rat(r) => Ok(FracVal::from_poly(Poly::constant(r.clone()))),
        Expr::Sym(s) => match binding.get(&Target::Sym(s.clone())) {
            Some(bound) => Ok(FracVal::from_ratfun(to_ratfun(bound)?)),
            None => Ok(FracVal::from_poly(Poly::from_mono(
                Mono::single(Base::Sym(s.clone())),
                Rational::one(),
            ))),
        },
        Expr::Var(v) => match binding.get(&Target::Var(*v)) {
            Some(bound) => Ok(FracVal::from_ratfun(to_ratfun(bound)?)),
            None => Ok(FracVal::from_poly(Poly::from_mono(
                Mono::single(Base::Var(*v)),
                Rational::one(),
            ))),
        },
        Expr::Sum(ts) => {
            let mut acc = FracVal::from_poly(Poly::zero());
            for t in ts {
                let ft = eval_with_binding_memo(t, binding, memo)?;
                acc = fv_add(&acc, &ft)?;
            }
            Ok(acc)
        }
        Expr::Prod(ts) => {
            let mut acc = FracVal::from_poly(Poly::one());
            for t in ts {
                if acc.num.is_zero() {
                    return Ok(acc);
                }
                let ft = eval_with_binding_memo(t, binding, memo)?;
                acc = fv_mul(&acc, &ft)?;
            }
            Ok(acc)
        }
        Expr::Quot(a, b) => {
            let fa = eval_with_binding_memo(a, binding, memo)?;
            let fb = eval_with_binding_memo(b, binding, memo)?;
            fv_div(&fa, &fb)
        }
        Expr::Pow(b, q) => {
            let base = eval_with_binding_memo(b, binding, memo)?;
            // exponents may contain bound symbols as well
            let q_sub = crate::expr::substitute_shallow(q, binding);
            let form = expform_from_expr(&q_sub)?;
            if let Some(m) = form.as_int() {
                use num::ToPrimitive;
                let mag = m.abs().to_u32().ok_or_else(|| {
                    Error::UnsupportedExponent(format!("exponent {m} too large"))
                })?;
                let p = fv_pow_int(&base, mag)?;
                if m.is_negative() {
                    return fv_div(&FracVal::from_poly(Poly::one()), &p);
                }
                return Ok(p);
            }
            let rf = rf_pow(&base.into_ratfun()?, &form)?;
            Ok(FracVal::from_ratfun(rf))
        }
        Expr::Fun(f, a) => {
            let arg = eval_with_binding_memo(a, binding, memo)?.into_ratfun()?;
            let arg_tree = ratfun_to_expr(&arg);
            match (f, arg_tree.is_zero_node()) {
                (Func::Sin, true) => return Ok(FracVal::from_poly(Poly::zero())),
                (Func::Cos, true) | (Func::Exp, true) => {
                    return Ok(FracVal::from_poly(Poly::one()))
                }
                _ => {}
            }
            if matches!(f, Func::Ln) && arg_tree.is_one_node() {
                return Ok(FracVal::from_poly(Poly::zero()));
            }
            Ok(FracVal::from_poly(Poly::from_mono(
                Mono::single(Base::Fun(*f, arg_tree)),
                Rational::one(),
            )))
        }
    }
}

fn binding_touches(e: &Expr, binding: &crate::expr::Binding) -> bool {
    use crate::expr::Target;
    let (vars, syms) = e.free();
    vars.iter().any(|v| binding.get(&Target::Var(*v)).is_some())
        || syms
            .iter()
            .any(|s| binding.get(&Target::Sym(s.clone())).is_some())
}

fn base_is_bound(base: &Base, binding: &crate::expr::Binding) -> bool {
    use crate::expr::Target;
    match base {
        Base::Var(v) => binding.get(&Target::Var(*v)).is_some(),
        Base::Sym(s) => binding.get(&Target::Sym(s.clone())).is_some(),
        _ => false,
    }
}

/// Horner-style composition of a polynomial under a binding: picks a bound
/// base with integer exponents, slices by degree, and recurses, so each
/// bound value is raised to high powers once instead of per monomial.
fn compose_poly(
    p: &Poly,
    binding: &crate::expr::Binding,
    memo: &mut std::collections::HashMap<Expr, FracVal>,
) -> Result<FracVal> {
    if p.is_zero() {
        return Ok(FracVal::zero());
    }
    // candidate: a bound simple base appearing with positive integer
    // exponents wherever it appears
    let mut candidate: Option<(Base, u32)> = None;
    {
        use std::collections::BTreeMap as Map;
        let mut degrees: Map<Base, Option<u32>> = Map::new();
        for mono in p.terms.keys() {
            for (base, e) in &mono.0 {
                if !base_is_bound(base, binding) {
                    continue;
                }
                let entry = degrees.entry(base.clone()).or_insert(Some(0));
                match e.as_int().and_then(|i| {
                    use num::ToPrimitive;
                    if i.is_positive() {
                        i.to_u32()
                    } else {
                        None
                    }
                }) {
                    Some(d) => {
                        if let Some(max) = entry {
                            *max = (*max).max(d);
                        }
                    }
                    None => *entry = None, // fractional or symbolic exponent
                }
            }
        }
        for (base, deg) in degrees {
            if let Some(d) = deg {
                if candidate.as_ref().map(|(_, cd)| d > *cd).unwrap_or(true) {
                    candidate = Some((base, d));
                }
            }
        }
    }
    if let Some((base, _)) = candidate {
        let val = eval_with_binding_memo(&base.to_expr(), binding, memo)?;
        // slice by degree in `base`
        let mut slices: std::collections::BTreeMap<u32, Poly> = Default::default();
        for (mono, c) in &p.terms {
            let mut rest = mono.0.clone();
            let d = match rest.remove(&base).and_then(|e| e.as_int()) {
                Some(i) => {
                    use num::ToPrimitive;
                    i.to_u32().unwrap_or(0)
                }
                None => 0,
            };
            slices
                .entry(d)
                .or_insert_with(Poly::zero)
                .add_term(Mono(rest), c.clone());
        }
        let mut acc = FracVal::zero();
        let mut prev: Option<u32> = None;
        for (d, slice) in slices.iter().rev() {
            if let Some(pd) = prev {
                acc = fv_mul(&acc, &fv_pow_int(&val, pd - d)?)?;
            }
            acc = fv_add(&acc, &compose_poly(slice, binding, memo)?)?;
            prev = Some(*d);
        }
        if let Some(d0) = prev {
            if d0 > 0 {
                acc = fv_mul(&acc, &fv_pow_int(&val, d0)?)?;
            }
        }
        return Ok(acc);
    }
    // no sliceable bound base: compose composite atoms per monomial
    let mut acc = FracVal::zero();
    for (mono, c) in &p.terms {
        let mut untouched = BTreeMap::new();
        let mut term = FracVal::constant_value(c.clone());
        for (base, e) in &mono.0 {
            let exponent_bound = e
                .syms
                .keys()
                .any(|s| binding.get(&crate::expr::Target::Sym(s.clone())).is_some());
            let base_touched = match base {
                Base::Var(_) | Base::Sym(_) => base_is_bound(base, binding),
                Base::Fun(_, arg) => binding_touches(arg, binding),
                Base::Poly(pe) => binding_touches(pe, binding),
            };
            if !base_touched && !exponent_bound {
                untouched.insert(base.clone(), e.clone());
                continue;
            }
            // compose this factor through the plain evaluator
            let factor_tree = if e.is_one() {
                base.to_expr()
            } else {
                Expr::Pow(Box::new(base.to_expr()), Box::new(e.to_expr()))
            };
            let factor = eval_with_binding_memo(&factor_tree, binding, memo)?;
            term = fv_mul(&term, &factor)?;
        }
        if !untouched.is_empty() {
            term = fv_mul(
                &term,
                &FracVal::from_poly(Poly::from_mono(Mono(untouched), Rational::one())),
            )?;
        }
        acc = fv_add(&acc, &term)?;
    }
    Ok(acc)
}

/// Substitution entry point used by the calculus module.
pub(crate) fn substitute_ratfun(
    e: &Expr,
    binding: &crate::expr::Binding,
) -> Result<RatFun> {
    // polynomial trees go through Horner composition; anything else falls
    // back to direct evaluation
    let mut memo = std::collections::HashMap::new();
    if let Ok(rf) = to_ratfun(e) {
        let num = compose_poly(&rf.num, binding, &mut memo)?;
        if rf.den.is_one() {
            return num.into_ratfun();
        }
        let den = compose_poly(&rf.den, binding, &mut memo)?;
        return fv_div(&num, &den)?.into_ratfun();
    }
    eval_with_binding_memo(e, binding, &mut memo)?.into_ratfun()
}

/// Tree to factored-denominator value without any substitution.
pub(crate) fn fv_of_expr(e: &Expr) -> Result<FracVal> {
    eval_with_binding(e, &crate::expr::Binding::new())
}

pub(crate) fn fv_to_expr(fv: FracVal) -> Result<Expr> {
    Ok(ratfun_to_expr(&fv.into_ratfun()?))
}

// ---------------------------------------------------------------------------
// Factored-denominator differentiation

/// Derivative of a monomial atom; zero for atoms free of `v`.
fn base_diff(base: &Base, v: Var) -> Result<FracVal> {
    Ok(match base {
        Base::Var(w) => {
            if *w == v {
                FracVal::one()
            } else {
                FracVal::zero()
            }
        }
        Base::Sym(_) => FracVal::zero(),
        Base::Fun(f, arg) => {
            if !arg.mentions(v) {
                return Ok(FracVal::zero());
            }
            let darg = fv_diff(&fv_of_expr(arg)?, v)?;
            let outer = match f {
                Func::Sin => Expr::Fun(Func::Cos, Box::new(arg.clone())),
                Func::Cos => {
                    return fv_mul(
                        &fv_of_expr(&Expr::Fun(Func::Sin, Box::new(arg.clone())))?,
                        &darg,
                    )
                    .map(|fv| fv.neg());
                }
                Func::Exp => Expr::Fun(Func::Exp, Box::new(arg.clone())),
                Func::Ln => {
                    // d ln(arg) = arg' / arg
                    return fv_div(&darg, &fv_of_expr(arg)?);
                }
            };
            fv_mul(&fv_of_expr(&outer)?, &darg)?
        }
        Base::Poly(p) => {
            if !p.mentions(v) {
                return Ok(FracVal::zero());
            }
            poly_diff(&expr_to_poly(p)?, v)?
        }
    })
}

/// Derivative of a polynomial over the atom basis, with the chain rule
/// applied inside composite atoms; the result may carry denominators (from
/// `ln`, quotient atoms, or exponent decrements of formal powers).
pub(crate) fn poly_diff(p: &Poly, v: Var) -> Result<FracVal> {
    let mut acc = FracVal::zero();
    for (mono, coeff) in &p.terms {
        for (base, e) in &mono.0 {
            let db = base_diff(base, v)?;
            if db.is_zero() {
                continue;
            }
            // coeff * e * base^(e-1) * (other factors) * db
            let mut map = BTreeMap::new();
            let mut exps = Expansions::new();
            for (b2, e2) in &mono.0 {
                if b2 == base {
                    continue;
                }
                canonicalize_entry(&mut map, &mut exps, b2.clone(), e2.clone())?;
            }
            let decremented = e.add_rat(&(-Rational::one()));
            canonicalize_entry(&mut map, &mut exps, base.clone(), decremented)?;
            let mut term = FracVal::from_poly(Poly::from_mono(Mono(map), coeff.clone()));
            for (pe, m) in &exps.num {
                term = fv_mul(
                    &term,
                    &FracVal::from_poly(poly_pow_int(&expr_to_poly(pe)?, *m)?),
                )?;
            }
            for (pe, m) in &exps.den {
                term.push_den_factor(&expr_to_poly(pe)?, *m);
            }
            // exponent factor e (may involve symbols)
            if !e.is_one() {
                let factor = fv_of_expr(&e.to_expr())?;
                term = fv_mul(&term, &factor)?;
            }
            term = fv_mul(&term, &db)?;
            acc = fv_add(&acc, &term)?;
        }
    }
    Ok(acc)
}

/// Partial derivative in the factored-denominator representation:
/// `d(num/D) = num'/D - num * sum_i p_i F_i' / (D * F_i)`.
pub(crate) fn fv_diff(a: &FracVal, v: Var) -> Result<FracVal> {
    let mut acc = {
        let mut t = poly_diff(&a.num, v)?;
        for (f, p) in &a.den {
            t.push_den_factor(f, *p);
        }
        t.den_scale = &t.den_scale * &a.den_scale;
        t.peel();
        t
    };
    for (f, p) in &a.den {
        let df = poly_diff(f, v)?;
        if df.is_zero() {
            continue;
        }
        let mut term = FracVal {
            num: a.num.scale(&-Rational::from(num::BigInt::from(*p as i64))),
            den: a.den.clone(),
            den_scale: a.den_scale.clone(),
        };
        term.push_den_factor(f, 1);
        term = fv_mul(&term, &df)?;
        acc = fv_add(&acc, &term)?;
    }
    Ok(acc)
}

pub(crate) fn fv_into_ratfun(a: FracVal) -> Result<RatFun> {
    a.into_ratfun()
}
