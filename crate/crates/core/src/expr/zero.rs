use num::BigInt;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ast::{Binding, Expr, Rational, Target};
use crate::error::Result;

/// Default seed for randomized zero testing.
pub const DEFAULT_SEED: u64 = 0xC0FFEE;

/// Absolute tolerance for numeric zero testing.
pub const ZERO_TOL: f64 = 1e-9;

const SAMPLES: usize = 32;
const MAX_ATTEMPTS: usize = 512;

/// Outcome of a zero test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZeroVerdict {
    Zero,
    Nonzero,
    Undetermined,
}

/// True when the normalized tree contains transcendental calls or formal
/// power atoms over composite bases; for such expressions structural
/// nonvanishing does not imply functional nonvanishing.
fn needs_sampling(e: &Expr) -> bool {
    match e {
        Expr::Rat(_) | Expr::Sym(_) | Expr::Var(_) => false,
        Expr::Fun(_, _) => true,
        Expr::Pow(b, _) => !matches!(b.as_ref(), Expr::Var(_) | Expr::Sym(_)),
        Expr::Sum(ts) | Expr::Prod(ts) => ts.iter().any(needs_sampling),
        Expr::Quot(a, b) => needs_sampling(a) || needs_sampling(b),
    }
}

fn random_rational(rng: &mut ChaCha8Rng) -> Rational {
    let num: i64 = rng.random_range(-99..=99);
    let den: i64 = rng.random_range(1..=9);
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Decides whether `e` vanishes identically.
///
/// Rational expressions (polynomials and quotients over coordinates,
/// derivatives and symbolic constants, including formal powers of single
/// variables) are decided structurally and exactly. Expressions containing
/// transcendental atoms fall back to evaluation at `32` pseudo-random
/// rational points with tolerance `1e-9`; points where the expression has a
/// pole are redrawn. For a nonzero rational function of total degree `d`
/// each sample vanishes with probability at most about `d / 1800`, so a
/// false `Zero` verdict has probability below `(d/1800)^32`; for
/// transcendental expressions the same bound is heuristic.
pub fn is_zero(e: &Expr, seed: u64) -> Result<ZeroVerdict> {
    let n = super::normalize(e)?;
    if n.is_zero_node() {
        return Ok(ZeroVerdict::Zero);
    }
    if !needs_sampling(&n) {
        return Ok(ZeroVerdict::Nonzero);
    }
    let (vars, syms) = n.free();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut valid = 0usize;
    let mut attempts = 0usize;
    while valid < SAMPLES && attempts < MAX_ATTEMPTS {
        attempts += 1;
        let mut point = Binding::new();
        for v in &vars {
            point = point
                .bind_var(*v, Expr::Rat(random_rational(&mut rng)))
                .expect("fresh binding accepts every variable once");
        }
        for s in &syms {
            point = point
                .bind_sym(s.clone(), Expr::Rat(random_rational(&mut rng)))
                .expect("fresh binding accepts every symbol once");
        }
        match super::evaluate(&n, &point) {
            Ok(v) => {
                if v.to_f64().abs() > ZERO_TOL {
                    return Ok(ZeroVerdict::Nonzero);
                }
                valid += 1;
            }
            Err(_) => continue, // pole: redraw
        }
    }
    if valid == 0 {
        Ok(ZeroVerdict::Undetermined)
    } else {
        Ok(ZeroVerdict::Zero)
    }
}

/// Zero test with the default seed.
pub fn is_zero_default(e: &Expr) -> Result<ZeroVerdict> {
    is_zero(e, DEFAULT_SEED)
}

/// Shortcut: treats `Undetermined` as "not provably zero".
pub fn vanishes(e: &Expr, seed: u64) -> Result<bool> {
    Ok(matches!(is_zero(e, seed)?, ZeroVerdict::Zero))
}

#[allow(unused)]
fn _target_unused(_t: Target) {}
