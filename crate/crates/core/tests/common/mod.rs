#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, Signed};

fn log10_int(x: &BigInt) -> f64 {
    let bits = x.bits();
    let shift = bits.saturating_sub(60);
    let top: BigInt = x >> shift;
    let f: f64 = top.to_string().parse().unwrap();
    f.log10() + shift as f64 * std::f64::consts::LOG10_2
}

fn binom(v: u64, d: u64) -> BigInt {
    let mut c = BigInt::one();
    for i in 0..d {
        c = c * BigInt::from(v - i) / BigInt::from(i + 1);
    }
    c
}

/// N² C(V,D) 2^D q^(-D-1) with q = qn/qd, exactly.
pub fn exact_bound(n: u64, d: u64, v: u64, qn: u64, qd: u64) -> BigRational {
    let num = BigInt::from(n).pow(2u32) * binom(v, d) * BigInt::from(2).pow(d as u32) * BigInt::from(qd).pow(d as u32 + 1);
    let den = BigInt::from(qn).pow(d as u32 + 1);
    BigRational::new(num, den)
}

pub fn log10_rational(r: &BigRational) -> f64 {
    assert!(r.is_positive());
    log10_int(r.numer()) - log10_int(r.denom())
}

/// 10 values of N × 10 (V, D) pairs × 10 values of q.
pub fn bound_grid() -> Vec<(u64, u64, u64, u64, u64)> {
    let ns = [1u64, 2, 3, 5, 8, 13, 100, 1_000, 10_000, 1_000_000];
    let vds = [(1u64, 0u64), (2, 1), (5, 2), (8, 8), (12, 3), (18, 9), (25, 20), (36, 1), (45, 30), (50, 50)];
    let mut out = vec![];
    for &n in &ns {
        for &(v, d) in &vds {
            for k in 1..=10u64 {
                out.push((n, d, v, k, 11));
            }
        }
    }
    out
}

/// Largest relative error of the bound value implied by `eval_path_bound`
/// over the grid.
pub fn worst_bound_error() -> f64 {
    let mut worst: f64 = 0.0;
    for (n, d, v, qn, qd) in bound_grid() {
        let got = fa2lab::moves::eval_path_bound(n, d, v, qn as f64 / qd as f64).unwrap();
        let want = log10_rational(&exact_bound(n, d, v, qn, qd));
        worst = worst.max(((got - want) * std::f64::consts::LN_10).abs());
    }
    worst
}
