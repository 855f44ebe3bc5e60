//! Symbolic machinery for the Lie point-symmetry structure of nonlinear wave
//! equations `Box u = F(x, u, grad u)` on (n+1)-dimensional Minkowski space:
//! conformal Killing fields, classifying determining equations, equivalence
//! transformations of nonlinearities, and canonical realizations of the
//! conformal algebra.

pub mod error;
pub mod equivalence;
pub mod expr;
pub mod lie;
pub mod minkowski;
pub mod symmetry;

pub use error::{Error, Result};
pub use expr::{Binding, Dim, Expr, Rational, Var};
