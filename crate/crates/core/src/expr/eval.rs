use num::{BigInt, One, ToPrimitive, Zero};

use super::ast::{Binding, Expr, Func, Rational, Target};
use crate::error::{Error, Result};

/// Evaluation result: exact rational where the arithmetic stays rational,
/// floating point as soon as a transcendental or non-integer power appears.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Rat(Rational),
    Float(f64),
}

impl Value {
    pub fn to_f64(&self) -> f64 {
        match self {
            Value::Rat(r) => r.to_f64().unwrap_or(f64::NAN),
            Value::Float(f) => *f,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Value::Rat(r) => r.is_zero(),
            Value::Float(f) => *f == 0.0,
        }
    }

    fn checked(f: f64) -> Result<Value> {
        if f.is_finite() {
            Ok(Value::Float(f))
        } else {
            Err(Error::Pole)
        }
    }
}

fn add(a: Value, b: Value) -> Result<Value> {
    Ok(match (a, b) {
        (Value::Rat(x), Value::Rat(y)) => Value::Rat(x + y),
        (x, y) => Value::checked(x.to_f64() + y.to_f64())?,
    })
}

fn mul(a: Value, b: Value) -> Result<Value> {
    Ok(match (a, b) {
        (Value::Rat(x), Value::Rat(y)) => Value::Rat(x * y),
        (x, y) => Value::checked(x.to_f64() * y.to_f64())?,
    })
}

fn div(a: Value, b: Value) -> Result<Value> {
    if b.is_zero() {
        return Err(Error::DivisionByZero);
    }
    Ok(match (a, b) {
        (Value::Rat(x), Value::Rat(y)) => Value::Rat(x / y),
        (x, y) => Value::checked(x.to_f64() / y.to_f64())?,
    })
}

fn pow(base: Value, exp: Value) -> Result<Value> {
    if let (Value::Rat(b), Value::Rat(q)) = (&base, &exp) {
        if q.is_integer() {
            if let Some(m) = q.to_integer().to_i64() {
                if b.is_zero() {
                    if m < 0 {
                        return Err(Error::DivisionByZero);
                    }
                    return Ok(Value::Rat(if m == 0 {
                        Rational::one()
                    } else {
                        Rational::zero()
                    }));
                }
                let mag = m.unsigned_abs().min(u32::MAX as u64) as u32;
                let mut out = Rational::one();
                for _ in 0..mag {
                    out *= b;
                }
                if m < 0 {
                    out = out.recip();
                }
                return Ok(Value::Rat(out));
            }
        }
        if let Some(exact) = super::normal::exact_rational_pow(b, q) {
            return Ok(Value::Rat(exact));
        }
    }
    let b = base.to_f64();
    let q = exp.to_f64();
    if b == 0.0 && q <= 0.0 {
        return Err(Error::DivisionByZero);
    }
    Value::checked(b.powf(q))
}

fn eval_inner(e: &Expr, point: &Binding) -> Result<Value> {
    match e {
        Expr::Rat(r) => Ok(Value::Rat(r.clone())),
        Expr::Sym(name) => match point.get(&Target::Sym(name.clone())) {
            Some(bound) => eval_inner(bound, point),
            None => Err(Error::Unbound(name.clone())),
        },
        Expr::Var(v) => match point.get(&Target::Var(*v)) {
            Some(bound) => eval_inner(bound, point),
            None => Err(Error::Unbound(v.to_string())),
        },
        Expr::Sum(ts) => {
            let mut acc = Value::Rat(Rational::zero());
            for t in ts {
                acc = add(acc, eval_inner(t, point)?)?;
            }
            Ok(acc)
        }
        Expr::Prod(ts) => {
            let mut acc = Value::Rat(Rational::one());
            for t in ts {
                acc = mul(acc, eval_inner(t, point)?)?;
            }
            Ok(acc)
        }
        Expr::Quot(a, b) => div(eval_inner(a, point)?, eval_inner(b, point)?),
        Expr::Pow(b, q) => pow(eval_inner(b, point)?, eval_inner(q, point)?),
        Expr::Fun(f, a) => {
            let x = eval_inner(a, point)?.to_f64();
            let y = match f {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Exp => x.exp(),
                Func::Ln => {
                    if x <= 0.0 {
                        return Err(Error::Pole);
                    }
                    x.ln()
                }
            };
            Value::checked(y)
        }
    }
}

/// Numeric point evaluation. Every free symbol must be bound (to numeric
/// expressions); exact rational arithmetic is used where possible.
pub fn evaluate(e: &Expr, point: &Binding) -> Result<Value> {
    eval_inner(e, point)
}

/// Convenience: rational from an `i64` pair.
pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}
