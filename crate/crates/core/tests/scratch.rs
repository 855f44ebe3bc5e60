use std::time::Instant;

use confwave_core::equivalence::{special_conformal, transform_reduced};
use confwave_core::expr::{rat, Dim, Expr, DEFAULT_SEED};
use confwave_core::minkowski::Metric;
use confwave_core::symmetry::Nonlinearity;

#[test]
#[ignore]
fn profile_n2_full() {
    let n = 2usize;
    let g = Metric::new(Dim::new(n).unwrap());
    let mut eps = vec![rat(0, 1); n + 1];
    eps[0] = rat(1, 10);
    let t0 = Instant::now();
    let sc = special_conformal(&eps, &g, DEFAULT_SEED).unwrap();
    eprintln!("special_conformal {:?}", t0.elapsed());
    eprintln!("A = {}", sc.reduced.amplitude());
    let k = confwave_core::symmetry::conformal_exponent(g.dim());
    let f = Nonlinearity::power(Expr::sym("F0"), Expr::Rat(k)).unwrap();
    let t0 = Instant::now();
    let (out, ok) = transform_reduced(&f, &sc.reduced, &g, DEFAULT_SEED).unwrap();
    eprintln!("transform_reduced {:?} ok={ok}", t0.elapsed());
    eprintln!("out = {out}");
}
