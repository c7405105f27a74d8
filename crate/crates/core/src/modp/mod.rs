//! Arithmetic in the prime field F_p.
//!
//! Elements are plain residues; the modulus lives in a [`PrimeField`]
//! context that is validated once (odd prime, deterministic Miller–Rabin)
//! and then shared by every operation. Subsets of F_p are dense bitsets,
//! see [`FpSubset`].

mod subset;

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use subset::{FpSubset, DUMP_MAGIC};

/// A residue in `[0, p)`. The modulus is carried by the [`PrimeField`] in use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FpElem(u64);

impl FpElem {
    pub const ZERO: FpElem = FpElem(0);
    pub const ONE: FpElem = FpElem(1);

    /// Unchecked: the caller guarantees `v < p` for the field in use.
    #[inline]
    pub(crate) const fn from_raw(v: u64) -> Self {
        FpElem(v)
    }

    #[inline]
    pub fn value(self) -> u64 {
        self.0
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for FpElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<FpElem> for u64 {
    fn from(x: FpElem) -> u64 {
        x.0
    }
}

#[inline]
pub(crate) fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

#[inline]
pub(crate) fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

// First twelve primes: a deterministic witness set for all n < 3.3e24.
const MR_WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Deterministic Miller–Rabin primality test for 64-bit inputs.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &w in &MR_WITNESSES {
        if n % w == 0 {
            return n == w;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for &w in &MR_WITNESSES {
        let mut x = pow_mod(w, d, n);
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

/// Distinct prime factors of `n`, ascending, by trial division.
pub(crate) fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut q = 2u64;
    while q.saturating_mul(q) <= n {
        if n % q == 0 {
            out.push(q);
            while n % q == 0 {
                n /= q;
            }
        }
        q += if q == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Smallest primitive root modulo the odd prime `p`.
pub fn primitive_root(p: u64) -> Result<FpElem> {
    if p < 3 || !is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    let order = p - 1;
    let factors = prime_factors(order);
    let g = (2..p)
        .find(|&g| factors.iter().all(|&q| pow_mod(g, order / q, p) != 1))
        .expect("every prime field has a primitive root");
    Ok(FpElem(g))
}

/// The prime field F_p for an odd prime p.
#[derive(Debug)]
pub struct PrimeField {
    p: u64,
    root: OnceLock<FpElem>,
}

impl Clone for PrimeField {
    fn clone(&self) -> Self {
        let root = OnceLock::new();
        if let Some(&g) = self.root.get() {
            let _ = root.set(g);
        }
        PrimeField { p: self.p, root }
    }
}

impl PartialEq for PrimeField {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p
    }
}

impl Eq for PrimeField {}

impl PrimeField {
    /// Rejects p = 2 and every composite.
    pub fn new(p: u64) -> Result<Self> {
        if p < 3 || !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        Ok(PrimeField {
            p,
            root: OnceLock::new(),
        })
    }

    #[inline]
    pub fn p(&self) -> u64 {
        self.p
    }

    /// Checked construction of a residue; `v` must already lie in `[0, p)`.
    pub fn elem(&self, v: u64) -> Result<FpElem> {
        if v >= self.p {
            return Err(Error::invalid(format!("{v} is not a residue mod {}", self.p)));
        }
        Ok(FpElem(v))
    }

    #[inline]
    pub fn reduce(&self, v: u64) -> FpElem {
        FpElem(v % self.p)
    }

    pub fn reduce_signed(&self, v: i64) -> FpElem {
        FpElem(v.rem_euclid(self.p as i64) as u64)
    }

    #[inline]
    pub fn add(&self, a: FpElem, b: FpElem) -> FpElem {
        let s = a.0 as u128 + b.0 as u128;
        FpElem((s % self.p as u128) as u64)
    }

    #[inline]
    pub fn neg(&self, a: FpElem) -> FpElem {
        if a.0 == 0 {
            a
        } else {
            FpElem(self.p - a.0)
        }
    }

    #[inline]
    pub fn sub(&self, a: FpElem, b: FpElem) -> FpElem {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: FpElem, b: FpElem) -> FpElem {
        FpElem(mul_mod(a.0, b.0, self.p))
    }

    pub fn pow(&self, a: FpElem, exp: u64) -> FpElem {
        FpElem(pow_mod(a.0, exp, self.p))
    }

    /// Multiplicative inverse via the extended Euclidean algorithm.
    pub fn inv(&self, x: FpElem) -> Result<FpElem> {
        if x.0 == 0 {
            return Err(Error::invalid("zero has no multiplicative inverse"));
        }
        let (mut r0, mut r1) = (self.p as i128, x.0 as i128);
        let (mut t0, mut t1) = (0i128, 1i128);
        while r1 != 0 {
            let q = r0 / r1;
            (r0, r1) = (r1, r0 - q * r1);
            (t0, t1) = (t1, t0 - q * t1);
        }
        debug_assert_eq!(r0, 1);
        Ok(FpElem(t0.rem_euclid(self.p as i128) as u64))
    }

    /// The canonical (smallest) primitive root, computed once.
    pub fn primitive_root(&self) -> FpElem {
        *self
            .root
            .get_or_init(|| primitive_root(self.p).expect("modulus validated at construction"))
    }

    /// Baby-step giant-step discrete logarithm: the `e` in `[0, p-1)` with
    /// `g^e = y`. `g` must generate F_p^×.
    pub fn discrete_log(&self, g: FpElem, y: FpElem) -> Result<u64> {
        if y.0 == 0 {
            return Err(Error::invalid("discrete log of zero is undefined"));
        }
        if g.0 == 0 {
            return Err(Error::invalid("zero is not a generator"));
        }
        let order = self.p - 1;
        let m = (order as f64).sqrt().ceil() as u64;
        let mut table = HashMap::with_capacity(m as usize);
        let mut e = FpElem::ONE;
        for j in 0..m {
            table.entry(e.0).or_insert(j);
            e = self.mul(e, g);
        }
        // g^{-m}
        let giant = self.pow(self.inv(g)?, m);
        let mut gamma = y;
        for i in 0..=m {
            if let Some(&j) = table.get(&gamma.0) {
                return Ok((i * m + j) % order);
            }
            gamma = self.mul(gamma, giant);
        }
        Err(Error::invalid(format!(
            "{} does not generate F_{}^x",
            g.0, self.p
        )))
    }

    /// Discrete log with respect to the canonical primitive root.
    pub fn dlog(&self, y: FpElem) -> Result<u64> {
        self.discrete_log(self.primitive_root(), y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primality() {
        let small: Vec<u64> = (0..60).filter(|&n| is_prime(n)).collect();
        assert_eq!(
            small,
            vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59]
        );
        assert!(is_prime(100_003));
        assert!(!is_prime(100_001));
        // Strong pseudoprime to bases 2..=23.
        assert!(!is_prime(3_825_123_056_546_413_051));
        assert!(is_prime(18_446_744_073_709_551_557));
        assert!(!is_prime(561));
    }

    #[test]
    fn rejects_two_and_composites() {
        assert!(matches!(PrimeField::new(2), Err(Error::NotPrime(2))));
        assert!(matches!(PrimeField::new(9), Err(Error::NotPrime(9))));
        assert!(matches!(PrimeField::new(1), Err(Error::NotPrime(1))));
        assert!(PrimeField::new(3).is_ok());
    }

    #[test]
    fn inverse_examples() {
        let f7 = PrimeField::new(7).unwrap();
        assert_eq!(f7.inv(FpElem(1)).unwrap(), FpElem(1));
        assert_eq!(f7.inv(FpElem(3)).unwrap(), FpElem(5));
        let f101 = PrimeField::new(101).unwrap();
        assert_eq!(f101.inv(FpElem(2)).unwrap(), FpElem(51));
        assert!(matches!(f7.inv(FpElem(0)), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn inverse_is_inverse() {
        let f = PrimeField::new(1_000_003).unwrap();
        for x in (1..1_000_003).step_by(997) {
            let x = FpElem(x);
            assert_eq!(f.mul(x, f.inv(x).unwrap()), FpElem::ONE);
        }
    }

    #[test]
    fn primitive_root_examples() {
        assert_eq!(primitive_root(5).unwrap(), FpElem(2));
        assert_eq!(primitive_root(7).unwrap(), FpElem(3));
        assert_eq!(primitive_root(101).unwrap(), FpElem(2));
        // 2^50 = -1 and 2^20 != 1 mod 101
        assert_eq!(pow_mod(2, 50, 101), 100);
        assert_ne!(pow_mod(2, 20, 101), 1);
    }

    #[test]
    fn primitive_root_generates() {
        for p in [3u64, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41] {
            let g = primitive_root(p).unwrap().value();
            let mut seen = vec![false; p as usize];
            let mut x = 1;
            for _ in 0..p - 1 {
                seen[x as usize] = true;
                x = mul_mod(x, g, p);
            }
            assert!(seen[1..].iter().all(|&s| s), "p={p} g={g}");
        }
    }

    #[test]
    fn discrete_log_examples() {
        let f7 = PrimeField::new(7).unwrap();
        assert_eq!(f7.discrete_log(FpElem(3), FpElem(1)).unwrap(), 0);
        assert_eq!(f7.discrete_log(FpElem(3), FpElem(6)).unwrap(), 3);
        let f101 = PrimeField::new(101).unwrap();
        assert_eq!(f101.discrete_log(FpElem(2), FpElem(14)).unwrap(), 10);
        assert!(f7.discrete_log(FpElem(3), FpElem(0)).is_err());
    }

    #[test]
    fn discrete_log_inverts_power() {
        for p in [3u64, 7, 101, 65_537, 1_000_003] {
            let f = PrimeField::new(p).unwrap();
            let g = f.primitive_root();
            let step = ((p - 1) / 50).max(1);
            for e in (0..p - 1).step_by(step as usize) {
                assert_eq!(f.discrete_log(g, f.pow(g, e)).unwrap(), e, "p={p}");
            }
        }
    }

    #[test]
    fn non_generator_is_reported() {
        let f7 = PrimeField::new(7).unwrap();
        // 2 has order 3 mod 7, so 3 is out of reach
        assert!(f7.discrete_log(FpElem(2), FpElem(3)).is_err());
    }

    #[test]
    fn factorization() {
        assert_eq!(prime_factors(100), vec![2, 5]);
        assert_eq!(prime_factors(100_002), vec![2, 3, 7, 2381]);
        assert_eq!(prime_factors(1), Vec::<u64>::new());
    }
}
