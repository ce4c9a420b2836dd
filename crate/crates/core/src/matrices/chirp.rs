//! Chirp matrices, incomplete Gauss sums and Weyl-type bounds.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{EnsembleKind, Entries, MeasurementEnsemble};
use crate::error::{invalid, Result};

/// Base of the logarithm in `ell = floor(p^a log^2 p)` style formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogBase(pub f64);

impl Default for LogBase {
    fn default() -> Self {
        LogBase(std::f64::consts::E)
    }
}

impl LogBase {
    pub fn log(self, x: f64) -> f64 {
        x.ln() / self.0.ln()
    }
}

fn mul_mod(a: u64, b: u64, n: u64) -> u64 {
    ((a as u128 * b as u128) % n as u128) as u64
}

fn pow_mod(mut a: u64, mut e: u64, n: u64) -> u64 {
    let mut acc = 1 % n;
    a %= n;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, a, n);
        }
        a = mul_mod(a, a, n);
        e >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin, exact for `n < 2^32`.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for small in [2u64, 3, 5, 7, 11, 13] {
        if n.is_multiple_of(small) {
            return n == small;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 7, 61] {
        if a % n == 0 {
            continue;
        }
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn check_prime(p: u64) -> Result<()> {
    if p >= 1 << 32 || !is_prime(p) {
        return invalid(format!("{p} is not a prime below 2^32"));
    }
    Ok(())
}

fn isqrt(p: u64) -> u64 {
    let mut s = (p as f64).sqrt() as u64;
    while s * s > p {
        s -= 1;
    }
    while (s + 1) * (s + 1) <= p {
        s += 1;
    }
    s
}

fn chirp_exponent(r: u64, m: u64, x: u64, p: u64) -> u64 {
    (mul_mod(r, mul_mod(x, x, p), p) + mul_mod(m, x, p)) % p
}

pub(super) fn chirp_columns(p: u64, params: &[(u64, u64)]) -> DMatrix<Complex64> {
    let roots: Vec<Complex64> = (0..p)
        .map(|e| Complex64::from_polar(1.0, 2.0 * PI * e as f64 / p as f64))
        .collect();
    DMatrix::from_fn(p as usize, params.len(), |x, j| {
        let (r, m) = params[j];
        roots[chirp_exponent(r, m, x as u64, p) as usize]
    })
}

/// Full `p x p^2` chirp matrix; column `r p + m` has entries `omega^(r x^2 + m x)`.
pub fn gen_chirp(p: u64) -> Result<MeasurementEnsemble> {
    check_prime(p)?;
    let params: Vec<(u64, u64)> = (0..p).flat_map(|r| (0..p).map(move |m| (r, m))).collect();
    let mut e = MeasurementEnsemble::from_entries(EnsembleKind::Chirp, p, Entries::Complex(chirp_columns(p, &params)));
    e.prime = Some(p);
    Ok(e)
}

/// `(r, m)` for each column of the chirp submatrix, in column order.
pub fn chirp_sub_params(p: u64) -> Vec<(u64, u64)> {
    let s = isqrt(p);
    (0..p).flat_map(|r| (1..=s).map(move |i| (r, i * s))).collect()
}

/// Chirp submatrix keeping `m` in `{s, 2s, ..., s^2}` with `s = floor(sqrt p)`.
pub fn gen_chirp_sub(p: u64) -> Result<MeasurementEnsemble> {
    check_prime(p)?;
    let params = chirp_sub_params(p);
    let mut e =
        MeasurementEnsemble::from_entries(EnsembleKind::ChirpSub, p, Entries::Complex(chirp_columns(p, &params)));
    e.prime = Some(p);
    Ok(e)
}

/// `sum_{x=0}^{ell-1} exp(2 pi i (r x^2 + m x) / p)`, summed over the first `ell` chirp rows.
pub fn gauss_sum(r_diff: i64, m_diff: i64, p: u64, ell: usize) -> Result<Complex64> {
    if p == 0 || ell == 0 || ell as u64 > p {
        return invalid(format!("ell = {ell} outside 1..={p}"));
    }
    let r = r_diff.rem_euclid(p as i64) as u64;
    let m = m_diff.rem_euclid(p as i64) as u64;
    let mut acc = Complex64::new(0.0, 0.0);
    for x in 0..ell as u64 {
        let e = chirp_exponent(r, m, x, p);
        acc += Complex64::from_polar(1.0, 2.0 * PI * e as f64 / p as f64);
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeylPart {
    /// `N/sqrt q + sqrt(N log q) + sqrt(q log q)`.
    Quadratic,
    /// `1 / (2 ||beta||)`.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WeylBound {
    Bounded { value: f64, part: WeylPart },
    /// Linear phase with `||beta|| = 0`: the sum is not cancelling.
    Unbounded,
}

impl WeylBound {
    pub fn value(self) -> f64 {
        match self {
            WeylBound::Bounded { value, .. } => value,
            WeylBound::Unbounded => f64::INFINITY,
        }
    }
}

pub fn weyl_bound(r_diff: i64, m_diff: i64, p: u64, ell: usize) -> Result<WeylBound> {
    if p == 0 || ell == 0 || ell as u64 > p {
        return invalid(format!("ell = {ell} outside 1..={p}"));
    }
    let q = p as f64;
    if r_diff.rem_euclid(p as i64) != 0 {
        let n = ell as f64;
        let value = n / q.sqrt() + (n * q.ln()).sqrt() + (q * q.ln()).sqrt();
        return Ok(WeylBound::Bounded {
            value,
            part: WeylPart::Quadratic,
        });
    }
    let beta = m_diff.rem_euclid(p as i64) as f64 / q;
    let dist = beta.min(1.0 - beta);
    if dist == 0.0 {
        return Ok(WeylBound::Unbounded);
    }
    Ok(WeylBound::Bounded {
        value: 1.0 / (2.0 * dist),
        part: WeylPart::Linear,
    })
}

/// `min(cap, floor(p^exponent log^2 p))` and whether the cap was hit.
pub fn ell_cap(p: u64, exponent: f64, cap: usize, base: LogBase) -> (usize, bool) {
    let l = base.log(p as f64);
    let raw = ((p as f64).powf(exponent) * l * l).floor() as usize;
    if raw > cap {
        (cap, true)
    } else {
        (raw.max(1), false)
    }
}

/// Largest sparsity covered by the chirp guarantee, `floor(sqrt p / log p)`.
pub fn k_max(p: u64, base: LogBase) -> usize {
    ((p as f64).sqrt() / base.log(p as f64)).floor() as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn primality() {
        let primes: Vec<u64> = (0..60).filter(|&n| is_prime(n)).collect();
        assert_eq!(primes, vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59]);
        assert!(is_prime(4_294_967_291));
        assert!(is_prime(61) && is_prime(7) && is_prime(1009));
        assert!(!is_prime(3_215_031_751));
        assert!(!is_prime(25_326_001));
        assert!(gen_chirp(9).is_err());
    }

    #[test]
    fn chirp_p5_example() {
        let a = gen_chirp(5).unwrap();
        assert_eq!((a.m, a.n), (5, 25));
        let z = a.entries.to_complex();
        let w = |e: u32| Complex64::from_polar(1.0, 2.0 * PI * e as f64 / 5.0);
        for (x, e) in [0, 3, 3, 0, 4].iter().enumerate() {
            assert_abs_diff_eq!((z[(x, 5 + 2)] - w(*e)).norm(), 0.0, epsilon = 1e-15);
            assert_eq!(z[(x, 0)], Complex64::new(1.0, 0.0));
        }
        assert!(z.iter().all(|v| (v.norm() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn chirp_sub_shapes_and_inclusion() {
        let a = gen_chirp_sub(5).unwrap();
        assert_eq!((a.m, a.n), (5, 10));
        assert_eq!(chirp_sub_params(5)[..2], [(0, 2), (0, 4)]);
        assert_eq!(gen_chirp_sub(61).unwrap().n, 427);
        for p in [5, 13, 31] {
            let full = gen_chirp(p).unwrap().entries.to_complex();
            let sub = gen_chirp_sub(p).unwrap().entries.to_complex();
            for (j, (r, m)) in chirp_sub_params(p).into_iter().enumerate() {
                assert_eq!(sub.column(j), full.column((r * p + m) as usize));
            }
        }
    }

    #[test]
    fn gauss_sum_examples() {
        assert_abs_diff_eq!(gauss_sum(0, 0, 61, 17).unwrap().re, 17.0, epsilon = 1e-12);
        for m in 1..13 {
            assert!(gauss_sum(0, m, 13, 13).unwrap().norm() < 1e-12);
        }
        for r in 1..13 {
            assert_abs_diff_eq!(gauss_sum(r, 5, 13, 13).unwrap().norm(), 13f64.sqrt(), epsilon = 1e-12);
        }
        assert!(gauss_sum(1, 1, 13, 0).is_err());
        assert!(gauss_sum(1, 1, 13, 14).is_err());
        assert_eq!(gauss_sum(-1, -3, 13, 7).unwrap(), gauss_sum(12, 10, 13, 7).unwrap());
    }

    #[test]
    fn gauss_sum_matches_restricted_inner_products() {
        let p = 31;
        let a = gen_chirp(p).unwrap().entries.to_complex();
        for ell in [1usize, 7, 20, 31] {
            for (c1, c2) in [(0usize, 1usize), (3, 70), (100, 961 - 1), (45, 46), (200, 500)] {
                let (r1, m1) = ((c1 as u64 / p) as i64, (c1 as u64 % p) as i64);
                let (r2, m2) = ((c2 as u64 / p) as i64, (c2 as u64 % p) as i64);
                let ip: Complex64 = (0..ell).map(|x| a[(x, c1)].conj() * a[(x, c2)]).sum();
                let s = gauss_sum(r2 - r1, m2 - m1, p, ell).unwrap();
                assert_abs_diff_eq!(ip.norm() / ell as f64, s.norm() / ell as f64, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn weyl_examples() {
        match weyl_bound(0, 2, 5, 5).unwrap() {
            WeylBound::Bounded { value, part } => {
                assert_eq!(part, WeylPart::Linear);
                assert_abs_diff_eq!(value, 1.25, epsilon = 1e-15);
            }
            WeylBound::Unbounded => panic!(),
        }
        assert_eq!(weyl_bound(0, 0, 5, 5).unwrap(), WeylBound::Unbounded);
        assert_eq!(weyl_bound(5, 0, 5, 3).unwrap(), WeylBound::Unbounded);
        let q = 101f64;
        let first = |n: usize| {
            let b = weyl_bound(1, 0, 101, n).unwrap().value();
            b - (n as f64 * q.ln()).sqrt() - (q * q.ln()).sqrt()
        };
        assert_abs_diff_eq!(first(40) / first(20), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn ell_cap_flags() {
        assert_eq!(ell_cap(61, 0.75, 61, LogBase::default()), (61, true));
        let (l, capped) = ell_cap(1_000_003, 0.5, 1_000_003, LogBase::default());
        assert!(!capped && l < 1_000_003);
        assert_eq!(k_max(61, LogBase::default()), 1);
        assert_eq!(k_max(61, LogBase(2.0)), 1);
    }
}
