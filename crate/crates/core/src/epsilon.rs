//! Exact rational tolerance levels.
//!
//! Every invariance decision compares integer defect counts against `ε·|X|`,
//! so ε is kept as a reduced fraction and the comparison is done in integers.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A rational ε in `(0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Epsilon(Ratio<u64>);

impl Epsilon {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 || num == 0 || num > den {
            return Err(Error::invalid(format!("epsilon {num}/{den} not in (0, 1]")));
        }
        Ok(Epsilon(Ratio::new(num, den)))
    }

    pub fn numer(&self) -> u64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u64 {
        *self.0.denom()
    }

    pub fn to_f64(&self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }

    /// `⌈1/ε⌉`.
    pub fn ceil_inverse(&self) -> u64 {
        self.denom().div_ceil(self.numer())
    }

    /// `ε / d`.
    pub fn scaled_down(&self, d: u64) -> Result<Self> {
        let den = self
            .denom()
            .checked_mul(d)
            .ok_or_else(|| Error::invalid("epsilon denominator overflow"))?;
        Epsilon::new(self.numer(), den)
    }

    /// `count ≤ ε·size`, exactly.
    pub fn admits(&self, count: u64, size: u64) -> bool {
        count as u128 * self.denom() as u128 <= size as u128 * self.numer() as u128
    }
}

impl fmt::Display for Epsilon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer(), self.denom())
    }
}

impl FromStr for Epsilon {
    type Err = Error;

    /// Accepts `"num/den"` or a plain decimal such as `"0.25"`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::invalid(format!("cannot parse epsilon {s:?}"));
        if let Some((n, d)) = s.split_once('/') {
            let n = n.trim().parse().map_err(|_| bad())?;
            let d = d.trim().parse().map_err(|_| bad())?;
            return Epsilon::new(n, d);
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if frac.len() > 18 || !frac.bytes().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let den = 10u64.pow(frac.len() as u32);
        let frac: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let num = int
            .checked_mul(den)
            .and_then(|v| v.checked_add(frac))
            .ok_or_else(bad)?;
        Epsilon::new(num, den)
    }
}

impl TryFrom<String> for Epsilon {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Epsilon> for String {
    fn from(e: Epsilon) -> String {
        e.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimals_and_fractions() {
        assert_eq!("0.5".parse::<Epsilon>().unwrap(), Epsilon::new(1, 2).unwrap());
        assert_eq!("1/3".parse::<Epsilon>().unwrap(), Epsilon::new(1, 3).unwrap());
        assert_eq!("0.8".parse::<Epsilon>().unwrap(), Epsilon::new(4, 5).unwrap());
        assert_eq!("1".parse::<Epsilon>().unwrap(), Epsilon::new(1, 1).unwrap());
        assert_eq!(".01".parse::<Epsilon>().unwrap(), Epsilon::new(1, 100).unwrap());
        for bad in ["0", "1.5", "-0.5", "abc", "1/0", "2/1", "0.5.5", ""] {
            assert!(bad.parse::<Epsilon>().is_err(), "{bad}");
        }
    }

    #[test]
    fn ceil_inverse_is_l() {
        let l = |s: &str| s.parse::<Epsilon>().unwrap().ceil_inverse();
        assert_eq!(l("1/2"), 2);
        assert_eq!(l("1/3"), 3);
        assert_eq!(l("0.2"), 5);
        assert_eq!(l("0.3"), 4);
        assert_eq!(l("1"), 1);
        assert_eq!(l("0.01"), 100);
    }

    #[test]
    fn admits_is_exact() {
        let third = Epsilon::new(1, 3).unwrap();
        assert!(third.admits(21, 63));
        assert!(!third.admits(22, 63));
        let half = Epsilon::new(1, 2).unwrap();
        assert!(half.admits(3, 6));
        assert!(!half.admits(1, 1));
        assert_eq!(Epsilon::new(4, 5).unwrap().scaled_down(4).unwrap(), Epsilon::new(1, 5).unwrap());
    }

    #[test]
    fn serializes_as_fraction_string() {
        let e = Epsilon::new(2, 6).unwrap();
        assert_eq!(serde_json::to_string(&e).unwrap(), "\"1/3\"");
        let back: Epsilon = serde_json::from_str("\"1/3\"").unwrap();
        assert_eq!(back, e);
    }
}
