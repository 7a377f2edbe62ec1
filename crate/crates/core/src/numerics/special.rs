//! Exact and floating-point combinatorial constants.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// Bernoulli numbers `B_0..=B_n` with `B_1 = -1/2`.
pub fn bernoulli_table(n: usize) -> Vec<BigRational> {
    let mut b: Vec<BigRational> = Vec::with_capacity(n + 1);
    b.push(BigRational::one());
    for m in 1..=n {
        // sum_{k=0}^{m} C(m+1, k) B_k = 0
        let mut s = BigRational::zero();
        for (k, bk) in b.iter().enumerate() {
            s += BigRational::from_integer(binomial_big(m + 1, k)) * bk;
        }
        b.push(-s / BigRational::from_integer(BigInt::from(m + 1)));
    }
    b
}

pub fn bernoulli_f64(n: usize) -> f64 {
    use num_traits::ToPrimitive;
    bernoulli_table(n)[n].to_f64().unwrap_or(f64::NAN)
}

pub fn binomial_big(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut r = BigInt::one();
    for i in 0..k {
        r = r * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    r
}

/// Binomial coefficient with `C(n, k) = 0` outside `0 <= k <= n`.
pub fn binomial(n: i64, k: i64) -> f64 {
    if k < 0 || n < 0 || k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

pub fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// `zeta(s)` for integer `s >= 2` by Euler-Maclaurin summation.
pub fn riemann_zeta(s: u32) -> f64 {
    assert!(s >= 2, "zeta needs s >= 2");
    let s_f = s as f64;
    let n = 20usize;
    let mut sum = 0.0;
    for k in (1..n).rev() {
        sum += (k as f64).powf(-s_f);
    }
    let nf = n as f64;
    sum += nf.powf(1.0 - s_f) / (s_f - 1.0) + 0.5 * nf.powf(-s_f);
    // sum_j B_{2j}/(2j)! * s(s+1)...(s+2j-2) * N^{-s-2j+1}
    let mut rising = s_f;
    let mut fact = 2.0;
    for j in 1..=8usize {
        let b = bernoulli_f64(2 * j);
        sum += b / fact * rising * nf.powf(-s_f - 2.0 * j as f64 + 1.0);
        rising *= (s_f + 2.0 * j as f64 - 1.0) * (s_f + 2.0 * j as f64);
        fact *= ((2 * j + 1) * (2 * j + 2)) as f64;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bernoulli_small() {
        let b = bernoulli_table(8);
        let r = |n: i64, d: i64| BigRational::new(BigInt::from(n), BigInt::from(d));
        assert_eq!(b[1], r(-1, 2));
        assert_eq!(b[2], r(1, 6));
        assert_eq!(b[3], r(0, 1));
        assert_eq!(b[4], r(-1, 30));
        assert_eq!(b[8], r(-1, 30));
    }

    #[test]
    fn zeta_even_values() {
        let pi = std::f64::consts::PI;
        assert!((riemann_zeta(2) - pi * pi / 6.0).abs() < 1e-14);
        assert!((riemann_zeta(4) - pi.powi(4) / 90.0).abs() < 1e-14);
        assert!((riemann_zeta(40) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn binomial_edges() {
        assert_eq!(binomial(5, -1), 0.0);
        assert_eq!(binomial(5, 6), 0.0);
        assert_eq!(binomial(6, 3), 20.0);
    }
}
