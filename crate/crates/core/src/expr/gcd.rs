//! Multivariate polynomial gcd over the rationals (primitive PRS), used to
//! cancel common factors of quotient numerators and denominators. Operates on
//! ordinary polynomials in the atom basis: every exponent a positive integer.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num::{BigInt, Integer, One, Signed, Zero};

use super::ast::Rational;
use super::normal::{Base, ExpForm, Mono, Poly};

/// Exponent vector with graded-lex ordering.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Key(Vec<u32>);

impl Key {
    fn total(&self) -> u64 {
        self.0.iter().map(|&e| e as u64).sum()
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total()
            .cmp(&other.total())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
struct IvPoly {
    terms: BTreeMap<Key, Rational>,
}

impl IvPoly {
    fn zero() -> Self {
        IvPoly::default()
    }

    fn constant(nvars: usize, c: Rational) -> Self {
        let mut p = IvPoly::zero();
        if !c.is_zero() {
            p.terms.insert(Key(vec![0; nvars]), c);
        }
        p
    }

    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn is_constant(&self) -> bool {
        self.terms.len() <= 1 && self.terms.keys().all(|k| k.total() == 0)
    }

    fn add_term(&mut self, k: Key, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&k) {
            Some(slot) => {
                *slot += c;
                if slot.is_zero() {
                    self.terms.remove(&k);
                }
            }
            None => {
                self.terms.insert(k, c);
            }
        }
    }

    fn add(&self, other: &IvPoly) -> IvPoly {
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.add_term(k.clone(), c.clone());
        }
        out
    }

    fn sub(&self, other: &IvPoly) -> IvPoly {
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.add_term(k.clone(), -c.clone());
        }
        out
    }

    fn mul(&self, other: &IvPoly) -> IvPoly {
        let mut out = IvPoly::zero();
        for (ka, ca) in &self.terms {
            for (kb, cb) in &other.terms {
                let k = Key(ka.0.iter().zip(&kb.0).map(|(a, b)| a + b).collect());
                out.add_term(k, ca * cb);
            }
        }
        out
    }

    fn scale(&self, q: &Rational) -> IvPoly {
        if q.is_zero() {
            return IvPoly::zero();
        }
        IvPoly {
            terms: self
                .terms
                .iter()
                .map(|(k, c)| (k.clone(), c * q))
                .collect(),
        }
    }

    fn leading(&self) -> Option<(&Key, &Rational)> {
        self.terms.iter().next_back()
    }

    fn degree_in(&self, v: usize) -> u32 {
        self.terms.keys().map(|k| k.0[v]).max().unwrap_or(0)
    }

    fn mentions(&self, v: usize) -> bool {
        self.terms.keys().any(|k| k.0[v] > 0)
    }

    /// View as univariate in `v`: degree -> coefficient with `v` zeroed out.
    fn univar(&self, v: usize) -> BTreeMap<u32, IvPoly> {
        let mut out: BTreeMap<u32, IvPoly> = BTreeMap::new();
        for (k, c) in &self.terms {
            let d = k.0[v];
            let mut rest = k.clone();
            rest.0[v] = 0;
            out.entry(d).or_default().add_term(rest, c.clone());
        }
        out
    }

    fn mul_var_pow(&self, v: usize, d: u32) -> IvPoly {
        IvPoly {
            terms: self
                .terms
                .iter()
                .map(|(k, c)| {
                    let mut k2 = k.clone();
                    k2.0[v] += d;
                    (k2, c.clone())
                })
                .collect(),
        }
    }

    /// Multiplies by a rational so coefficients are coprime integers with a
    /// positive leading coefficient.
    fn primitive(&self) -> IvPoly {
        if self.is_zero() {
            return self.clone();
        }
        let mut num_gcd = num::BigInt::zero();
        let mut den_lcm = num::BigInt::one();
        for c in self.terms.values() {
            num_gcd = num::Integer::gcd(&num_gcd, &c.numer().abs());
            den_lcm = num::Integer::lcm(&den_lcm, c.denom());
        }
        let mut content = Rational::new(num_gcd, den_lcm);
        if let Some((_, lead)) = self.leading() {
            if lead.is_negative() {
                content = -content;
            }
        }
        self.scale(&content.recip())
    }
}

/// Exact division; `None` when the division does not come out even. The
/// step budget bounds the cost of failing attempts, and cheap necessary
/// conditions (per-variable degrees, a univariate image remainder) filter
/// most failures before any multivariate work.
fn div_exact(a: &IvPoly, b: &IvPoly) -> Option<IvPoly> {
    if b.is_zero() {
        return None;
    }
    let nvars = a
        .terms
        .keys()
        .chain(b.terms.keys())
        .next()
        .map(|k| k.0.len())
        .unwrap_or(0);
    let mut probe_var = None;
    for v in 0..nvars {
        let db = b.degree_in(v);
        if db == 0 {
            continue;
        }
        if a.degree_in(v) < db {
            return None;
        }
        probe_var = Some(v);
    }
    if let Some(v) = probe_var {
        let ia = univar_image(a, v, 0);
        let ib = univar_image(b, v, 0);
        if !ia.is_empty() && !ib.is_empty() && !univar_divides(&ib, &ia) {
            return None;
        }
    }
    let max_steps = 4 * (a.terms.len() + 8);
    let mut steps = 0usize;
    let mut rem = a.clone();
    let mut quot = IvPoly::zero();
    let (kb, cb) = b.leading().map(|(k, c)| (k.clone(), c.clone()))?;
    while !rem.is_zero() {
        steps += 1;
        if steps > max_steps {
            return None;
        }
        let (ka, ca) = {
            let (k, c) = rem.leading()?;
            (k.clone(), c.clone())
        };
        let mut diff = Vec::with_capacity(ka.0.len());
        for (x, y) in ka.0.iter().zip(&kb.0) {
            if x < y {
                return None;
            }
            diff.push(x - y);
        }
        let k = Key(diff);
        let c = &ca / &cb;
        let mut t = IvPoly::zero();
        t.add_term(k, c);
        rem = rem.sub(&t.mul(b));
        quot = quot.add(&t);
    }
    Some(quot)
}

/// Pseudo-remainder `prem(a, b) = lc(b)^(d+1) a mod b` in variable `v`,
/// with `d = deg_v(a) - deg_v(b) >= 0`.
fn pseudo_rem(a: &IvPoly, b: &IvPoly, v: usize) -> IvPoly {
    let da = a.degree_in(v);
    let db = b.degree_in(v);
    let lc_b = b.univar(v).get(&db).cloned().unwrap_or_default();
    let mut r = a.clone();
    let mut steps = 0u32;
    while !r.is_zero() {
        let dr = r.degree_in(v);
        if dr < db {
            break;
        }
        let r_uni = r.univar(v);
        let lc_r = r_uni.get(&dr).cloned().unwrap_or_default();
        // r <- lc_b * r - lc_r * x_v^(dr-db) * b
        r = r.mul(&lc_b).sub(&lc_r.mul_var_pow(v, dr - db).mul(b));
        steps += 1;
    }
    // compensate to the exact power lc(b)^(da-db+1)
    let want = da - db + 1;
    for _ in steps..want {
        r = r.mul(&lc_b);
    }
    r
}

fn lc_in(p: &IvPoly, v: usize) -> IvPoly {
    let d = p.degree_in(v);
    p.univar(v).get(&d).cloned().unwrap_or_default()
}

fn pow_iv(p: &IvPoly, m: u32) -> IvPoly {
    let nvars = p.terms.keys().next().map(|k| k.0.len()).unwrap_or(0);
    let mut out = IvPoly::constant(nvars, Rational::one());
    for _ in 0..m {
        out = out.mul(p);
    }
    out
}

/// Subresultant polynomial remainder sequence; returns the last nonzero
/// element (the gcd of the primitive parts up to content).
fn subresultant_prs(mut a: IvPoly, mut b: IvPoly, v: usize) -> IvPoly {
    let nvars = a.terms.keys().next().map(|k| k.0.len()).unwrap_or(0);
    let mut g = IvPoly::constant(nvars, Rational::one());
    let mut h = IvPoly::constant(nvars, Rational::one());
    loop {
        let delta = a.degree_in(v) - b.degree_in(v);
        let r = pseudo_rem(&a, &b, v);
        if r.is_zero() {
            return b;
        }
        if r.degree_in(v) == 0 {
            return IvPoly::constant(nvars, Rational::one());
        }
        let divisor = g.mul(&pow_iv(&h, delta));
        let next = div_exact(&r, &divisor).unwrap_or(r);
        a = b;
        b = next;
        g = lc_in(&a, v);
        if delta > 0 {
            let num = pow_iv(&g, delta);
            h = div_exact(&num, &pow_iv(&h, delta - 1)).unwrap_or(num);
        }
    }
}

// Deterministic evaluation probe: maps both polynomials to univariate
// images at fixed points and takes a univariate gcd. A degree-zero image
// gcd on every common variable certifies (up to degenerate evaluations,
// which only cost a missed reduction) that the full gcd is constant.
const PROBE_POINTS: [i64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn univar_image(p: &IvPoly, v: usize, shift: usize) -> BTreeMap<u32, Rational> {
    let mut out: BTreeMap<u32, Rational> = BTreeMap::new();
    for (k, c) in &p.terms {
        let mut val = c.clone();
        for (j, &e) in k.0.iter().enumerate() {
            if j == v || e == 0 {
                continue;
            }
            let base = Rational::from(num::BigInt::from(
                PROBE_POINTS[(j + shift) % PROBE_POINTS.len()],
            ));
            for _ in 0..e {
                val *= &base;
            }
        }
        let slot = out.entry(k.0[v]).or_insert_with(Rational::zero);
        *slot += val;
        if slot.is_zero() {
            out.remove(&k.0[v]);
        }
    }
    out
}

fn univar_gcd_degree(
    a: &BTreeMap<u32, Rational>,
    b: &BTreeMap<u32, Rational>,
) -> Option<u32> {
    fn deg(p: &BTreeMap<u32, Rational>) -> Option<u32> {
        p.keys().next_back().copied()
    }
    let (mut r0, mut r1) = (a.clone(), b.clone());
    if deg(&r0)? < deg(&r1)? {
        std::mem::swap(&mut r0, &mut r1);
    }
    while !r1.is_empty() {
        // r0 mod r1
        let d1 = deg(&r1)?;
        let lc1 = r1.get(&d1).cloned()?;
        while let Some(d0) = deg(&r0) {
            if d0 < d1 {
                break;
            }
            let lc0 = r0.get(&d0).cloned().unwrap_or_else(Rational::zero);
            let f = &lc0 / &lc1;
            for (e, c) in r1.clone() {
                let slot = r0.entry(e + d0 - d1).or_insert_with(Rational::zero);
                *slot -= &f * &c;
            }
            r0.retain(|_, c| !c.is_zero());
        }
        std::mem::swap(&mut r0, &mut r1);
    }
    deg(&r0)
}

/// True when the univariate image of `b` divides the image of `a` exactly;
/// a necessary condition for multivariate divisibility (up to degenerate
/// evaluations, which only cost extra work, never wrong results).
fn univar_divides(b: &BTreeMap<u32, Rational>, a: &BTreeMap<u32, Rational>) -> bool {
    fn deg(p: &BTreeMap<u32, Rational>) -> Option<u32> {
        p.keys().next_back().copied()
    }
    let (Some(da), Some(db)) = (deg(a), deg(b)) else {
        return true;
    };
    if da < db {
        return false;
    }
    let mut rem = a.clone();
    let lcb = b.get(&db).cloned().unwrap_or_else(Rational::zero);
    if lcb.is_zero() {
        return true; // degenerate image: cannot conclude
    }
    while let Some(dr) = deg(&rem) {
        if dr < db {
            break;
        }
        let lcr = rem.get(&dr).cloned().unwrap_or_else(Rational::zero);
        let f = &lcr / &lcb;
        for (e, c) in b.clone() {
            let slot = rem.entry(e + dr - db).or_insert_with(Rational::zero);
            *slot -= &f * &c;
        }
        rem.retain(|_, c| !c.is_zero());
    }
    rem.is_empty()
}

/// True when the probe certifies that `a` and `b` share no nonconstant
/// factor; `false` means "possibly sharing", triggering the full gcd.
fn probe_coprime(a: &IvPoly, b: &IvPoly, nvars: usize) -> bool {
    let mut any_common = false;
    for v in 0..nvars {
        if !(a.mentions(v) && b.mentions(v)) {
            continue;
        }
        any_common = true;
        let mut proved = false;
        for shift in [0usize, 5] {
            let ia = univar_image(a, v, shift);
            let ib = univar_image(b, v, shift);
            if ia.is_empty() || ib.is_empty() {
                continue; // degenerate image, try the other shift
            }
            if univar_gcd_degree(&ia, &ib) == Some(0) {
                proved = true;
                break;
            }
        }
        if !proved {
            return false;
        }
    }
    // no common variable at all: over a field the gcd is a unit
    if !any_common {
        return true;
    }
    true
}

fn content_in(p: &IvPoly, v: usize) -> IvPoly {
    let uni = p.univar(v);
    let mut acc = IvPoly::zero();
    for coeff in uni.values() {
        acc = gcd_rec(&acc, coeff);
        if acc.is_constant() && !acc.is_zero() {
            break;
        }
    }
    acc
}

// ---------------------------------------------------------------------------
// Heuristic gcd: evaluate one variable at a large integer, recurse, and
// reconstruct the candidate from balanced base-xi digits; a candidate is
// accepted only when it divides both inputs exactly.

fn coeff_bound(p: &IvPoly) -> BigInt {
    let mut max = BigInt::one();
    for c in p.terms.values() {
        let a = c.numer().abs();
        if a > max {
            max = a;
        }
    }
    max
}

fn eval_var_at(p: &IvPoly, v: usize, xi: &BigInt) -> IvPoly {
    let mut out = IvPoly::zero();
    for (k, c) in &p.terms {
        let mut val = c.clone();
        if k.0[v] > 0 {
            let mut pw = BigInt::one();
            for _ in 0..k.0[v] {
                pw *= xi;
            }
            val *= Rational::from(pw);
        }
        let mut rest = k.clone();
        rest.0[v] = 0;
        out.add_term(rest, val);
    }
    out
}

/// Balanced remainder: splits every integer coefficient `c` into
/// `digit + xi * rest` with `digit` in `(-xi/2, xi/2]`.
fn balanced_split(p: &IvPoly, xi: &BigInt) -> (IvPoly, IvPoly) {
    let half = xi / 2;
    let mut digit = IvPoly::zero();
    let mut rest = IvPoly::zero();
    for (k, c) in &p.terms {
        let n = c.numer().clone();
        let mut d = &n % xi;
        if d > half {
            d -= xi;
        } else if d < -(&half) {
            d += xi;
        }
        let r = (&n - &d) / xi;
        if !d.is_zero() {
            digit.add_term(k.clone(), Rational::from(d));
        }
        if !r.is_zero() {
            rest.add_term(k.clone(), Rational::from(r));
        }
    }
    (digit, rest)
}

fn integer_gcd_poly(a: &IvPoly, b: &IvPoly, nvars: usize) -> IvPoly {
    let va = a
        .terms
        .values()
        .next()
        .map(|c| c.numer().abs())
        .unwrap_or_else(BigInt::zero);
    let vb = b
        .terms
        .values()
        .next()
        .map(|c| c.numer().abs())
        .unwrap_or_else(BigInt::zero);
    IvPoly::constant(nvars, Rational::from(va.gcd(&vb)))
}

/// Heuristic gcd over integer-primitive polynomials; `None` when the
/// evaluation bound retries are exhausted.
fn heugcd(a: &IvPoly, b: &IvPoly, depth: usize) -> Option<IvPoly> {
    if depth > 8 {
        return None;
    }
    if a.is_zero() {
        return Some(b.primitive());
    }
    if b.is_zero() {
        return Some(a.primitive());
    }
    let nvars = a.terms.keys().next().map(|k| k.0.len()).unwrap_or(0);
    let v = match (0..nvars)
        .rev()
        .find(|&v| a.mentions(v) || b.mentions(v))
    {
        Some(v) => v,
        None => return Some(integer_gcd_poly(a, b, nvars)),
    };
    if !(a.mentions(v) && b.mentions(v)) {
        // one side free of v: gcd(content_v(other), side)
        let (with_v, without) = if a.mentions(v) { (a, b) } else { (b, a) };
        let uni = with_v.univar(v);
        let mut acc = without.primitive();
        for coeff in uni.values() {
            acc = heugcd(&acc, &coeff.primitive(), depth + 1)?;
            if acc.is_constant() {
                break;
            }
        }
        return Some(acc);
    }
    let bound = coeff_bound(a).max(coeff_bound(b));
    let mut xi: BigInt = BigInt::from(2) * bound + BigInt::from(29);
    for _ in 0..6 {
        let ia = eval_var_at(a, v, &xi);
        let ib = eval_var_at(b, v, &xi);
        let g_img = heugcd(&ia.primitive(), &ib.primitive(), depth + 1)?;
        // reconstruct candidate coefficients of v from base-xi digits
        let mut candidate = IvPoly::zero();
        let mut rest = g_img;
        let mut power = 0u32;
        while !rest.is_zero() && power <= a.degree_in(v).max(b.degree_in(v)) + 1 {
            let (digit, next) = balanced_split(&rest, &xi);
            for (k, c) in &digit.terms {
                let mut kk = k.clone();
                kk.0[v] = power;
                candidate.add_term(kk, c.clone());
            }
            rest = next;
            power += 1;
        }
        if rest.is_zero() && !candidate.is_zero() {
            let candidate = candidate.primitive();
            if div_exact(a, &candidate).is_some() && div_exact(b, &candidate).is_some() {
                return Some(candidate);
            }
        }
        xi = (&xi * BigInt::from(73794)) / BigInt::from(27011);
        xi = &xi * &xi % (BigInt::from(10).pow(40)) + BigInt::from(31);
        if xi.is_negative() {
            xi = -xi;
        }
    }
    None
}

fn gcd_rec(a: &IvPoly, b: &IvPoly) -> IvPoly {
    if a.is_zero() {
        return b.primitive();
    }
    if b.is_zero() {
        return a.primitive();
    }
    if a.is_constant() || b.is_constant() {
        let nvars = a
            .terms
            .keys()
            .chain(b.terms.keys())
            .next()
            .map(|k| k.0.len())
            .unwrap_or(0);
        return IvPoly::constant(nvars, Rational::one());
    }
    // divisibility shortcuts cover the common power-of-a-factor cases
    if a == b {
        return a.primitive();
    }
    if div_exact(b, a).is_some() {
        return a.primitive();
    }
    if div_exact(a, b).is_some() {
        return b.primitive();
    }
    let nvars = a.terms.keys().next().map(|k| k.0.len()).unwrap_or(0);
    if probe_coprime(a, b, nvars) {
        return IvPoly::constant(nvars, Rational::one());
    }
    let mentioned = (0..nvars)
        .filter(|&v| a.mentions(v) || b.mentions(v))
        .count();
    // remainder-sequence cost grows steeply with the variable count; past
    // four variables leave the pair uncancelled (values are unaffected,
    // only the displayed quotient stays longer)
    if mentioned >= 4 {
        return IvPoly::constant(nvars, Rational::one());
    }
    if let Some(g) = heugcd(&a.primitive(), &b.primitive(), 0) {
        return g;
    }
    let v = (0..nvars)
        .rev()
        .find(|&v| a.mentions(v) || b.mentions(v))
        .expect("nonconstant polynomial mentions a variable");
    if !a.mentions(v) {
        return gcd_rec(a, &content_in(b, v));
    }
    if !b.mentions(v) {
        return gcd_rec(&content_in(a, v), b);
    }
    let ca = content_in(a, v);
    let cb = content_in(b, v);
    let pa = match div_exact(a, &ca) {
        Some(p) => p.primitive(),
        None => return IvPoly::constant(nvars, Rational::one()),
    };
    let pb = match div_exact(b, &cb) {
        Some(p) => p.primitive(),
        None => return IvPoly::constant(nvars, Rational::one()),
    };
    let g_cont = gcd_rec(&ca, &cb);
    let (r0, r1) = if a.degree_in(v) >= b.degree_in(v) {
        (pa, pb)
    } else {
        (pb, pa)
    };
    let last = subresultant_prs(r0, r1, v);
    let g_prim = if last.mentions(v) {
        let cont = content_in(&last, v);
        div_exact(&last, &cont).expect("content divides").primitive()
    } else {
        // the sequence degenerated to a content-level element: the
        // primitive parts are coprime in v
        IvPoly::constant(nvars, Rational::one())
    };
    g_cont.mul(&g_prim).primitive()
}

// ---------------------------------------------------------------------------
// Conversion between the atom-basis Poly and exponent-vector form

fn collect_vars(polys: [&Poly; 2]) -> Vec<Base> {
    let mut set = std::collections::BTreeSet::new();
    for p in polys {
        for m in p.terms.keys() {
            for b in m.0.keys() {
                set.insert(b.clone());
            }
        }
    }
    set.into_iter().collect()
}

fn to_iv(p: &Poly, vars: &[Base]) -> Option<IvPoly> {
    let mut out = IvPoly::zero();
    for (m, c) in &p.terms {
        let mut key = vec![0u32; vars.len()];
        for (b, e) in &m.0 {
            let idx = vars.binary_search(b).ok()?;
            let i = e.as_int()?;
            if !i.is_positive() {
                return None;
            }
            use num::ToPrimitive;
            key[idx] = i.to_u32()?;
        }
        out.add_term(Key(key), c.clone());
    }
    Some(out)
}

fn from_iv(p: &IvPoly, vars: &[Base]) -> Poly {
    let mut out = Poly::zero();
    for (k, c) in &p.terms {
        let mut map = BTreeMap::new();
        for (idx, &e) in k.0.iter().enumerate() {
            if e > 0 {
                map.insert(vars[idx].clone(), ExpForm::from_int(e as i64));
            }
        }
        out.add_term(Mono(map), c.clone());
    }
    out
}

/// Exact division at the atom-basis level; `None` when not exactly
/// divisible or when either polynomial has non-integer exponents.
pub(crate) fn poly_div_exact(a: &Poly, b: &Poly) -> Option<Poly> {
    if b.is_one() {
        return Some(a.clone());
    }
    if let Some(c) = b.as_constant() {
        if c.is_zero() {
            return None;
        }
        return Some(a.scale(&c.recip()));
    }
    let vars = collect_vars([a, b]);
    let ia = to_iv(a, &vars)?;
    let ib = to_iv(b, &vars)?;
    let q = div_exact(&ia, &ib)?;
    Some(from_iv(&q, &vars))
}

/// Cancels the gcd of `num` and `den`; `None` when no reduction applies.
pub(crate) fn reduce_pair(num: &Poly, den: &Poly) -> Option<(Poly, Poly)> {
    let vars = collect_vars([num, den]);
    if vars.is_empty() {
        return None;
    }
    let a = to_iv(num, &vars)?;
    let b = to_iv(den, &vars)?;
    let g = gcd_rec(&a, &b);
    if g.is_constant() {
        return None;
    }
    let qa = div_exact(&a, &g)?;
    let qb = div_exact(&b, &g)?;
    Some((from_iv(&qa, &vars), from_iv(&qb, &vars)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ast::Var;

    fn var_poly(v: Var) -> Poly {
        Poly::from_mono(Mono::single(Base::Var(v)), Rational::one())
    }

    #[test]
    fn gcd_cancels_common_factor() {
        // (x0^2 - x1^2) / (x0 - x1) -> (x0 + x1) / 1
        let x0 = var_poly(Var::Coord(0));
        let x1 = var_poly(Var::Coord(1));
        let num = crate::expr::normal::poly_mul_plain(
            &x0.add(&x1),
            &x0.sub(&x1),
        )
        .unwrap();
        let den = x0.sub(&x1);
        let (qn, qd) = reduce_pair(&num, &den).expect("reduction applies");
        assert_eq!(qn, x0.add(&x1));
        assert!(qd.is_one());
    }

    #[test]
    fn gcd_power_cancellation() {
        // s^2 / s^4 -> 1 / s^2 with s = x0 + x1
        let x0 = var_poly(Var::Coord(0));
        let x1 = var_poly(Var::Coord(1));
        let s = x0.add(&x1);
        let s2 = crate::expr::normal::poly_pow_int(&s, 2).unwrap();
        let s4 = crate::expr::normal::poly_pow_int(&s, 4).unwrap();
        let (qn, qd) = reduce_pair(&s2, &s4).expect("reduction applies");
        assert!(qn.is_one());
        assert_eq!(qd, s2);
    }
}
