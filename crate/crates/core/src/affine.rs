//! The affine group Aff(F_p) of maps `x ↦ ax + b`, its action on F_p and on
//! subsets, and its nontrivial irreducible representations: the p−2
//! nontrivial characters (which factor through `a ∈ F_p^×`) and the
//! (p−1)-dimensional standard representation, realized as the permutation
//! action on `R^p` restricted to the mean-zero subspace.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modp::{FpElem, FpSubset, PrimeField};

/// `x ↦ a·x + b` with `a ≠ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AffineMap {
    a: FpElem,
    b: FpElem,
}

impl AffineMap {
    pub const IDENTITY: AffineMap = AffineMap {
        a: FpElem::ONE,
        b: FpElem::ZERO,
    };

    pub fn new(field: &PrimeField, a: u64, b: u64) -> Result<Self> {
        let a = field.elem(a)?;
        let b = field.elem(b)?;
        if a.is_zero() {
            return Err(Error::invalid("affine map needs a nonzero scale"));
        }
        Ok(AffineMap { a, b })
    }

    #[inline]
    pub fn a(&self) -> FpElem {
        self.a
    }

    #[inline]
    pub fn b(&self) -> FpElem {
        self.b
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    /// Parses the `"a,b"` text form and validates it against `field`.
    pub fn parse(field: &PrimeField, s: &str) -> Result<Self> {
        let raw: RawAffine = s.parse()?;
        AffineMap::new(field, raw.a, raw.b)
    }
}

impl fmt::Display for AffineMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.a, self.b)
    }
}

/// An unvalidated `"a,b"` pair, for parsing before the modulus is known.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RawAffine {
    pub a: u64,
    pub b: u64,
}

impl FromStr for RawAffine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(',')
            .ok_or_else(|| Error::invalid(format!("expected \"a,b\", got {s:?}")))?;
        let num = |t: &str| {
            t.trim()
                .parse::<u64>()
                .map_err(|_| Error::invalid(format!("bad integer {t:?} in affine map {s:?}")))
        };
        Ok(RawAffine {
            a: num(a)?,
            b: num(b)?,
        })
    }
}

/// `f ∘ g`.
pub fn compose(field: &PrimeField, f: AffineMap, g: AffineMap) -> AffineMap {
    AffineMap {
        a: field.mul(f.a, g.a),
        b: field.add(field.mul(f.a, g.b), f.b),
    }
}

pub fn inverse(field: &PrimeField, f: AffineMap) -> AffineMap {
    let a_inv = field.inv(f.a).expect("scale is nonzero");
    AffineMap {
        a: a_inv,
        b: field.neg(field.mul(a_inv, f.b)),
    }
}

#[inline]
pub fn apply(field: &PrimeField, f: AffineMap, x: FpElem) -> FpElem {
    field.add(field.mul(f.a, x), f.b)
}

/// `f·X = a·X + b`.
pub fn act_on_set(field: &PrimeField, f: AffineMap, x: &FpSubset) -> FpSubset {
    x.dilate(field, f.a)
        .expect("scale is nonzero")
        .translate(f.b)
}

/// Every element of Aff(F_p), ordered by `(a, b)`.
pub fn all_elements(field: &PrimeField) -> Vec<AffineMap> {
    let p = field.p();
    (1..p)
        .flat_map(|a| {
            (0..p).map(move |b| AffineMap {
                a: FpElem::from_raw(a),
                b: FpElem::from_raw(b),
            })
        })
        .collect()
}

/// An ordered multiset `g_1, …, g_k` of group elements, `k ≥ 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GeneratorSetRepr", into = "GeneratorSetRepr")]
pub struct GeneratorSet {
    field: PrimeField,
    maps: Vec<AffineMap>,
}

#[derive(Serialize, Deserialize)]
struct GeneratorSetRepr {
    p: u64,
    maps: Vec<AffineMap>,
}

impl TryFrom<GeneratorSetRepr> for GeneratorSet {
    type Error = Error;

    fn try_from(r: GeneratorSetRepr) -> Result<Self> {
        let field = PrimeField::new(r.p)?;
        for m in &r.maps {
            AffineMap::new(&field, m.a.value(), m.b.value())?;
        }
        GeneratorSet::new(field, r.maps)
    }
}

impl From<GeneratorSet> for GeneratorSetRepr {
    fn from(s: GeneratorSet) -> Self {
        GeneratorSetRepr {
            p: s.field.p(),
            maps: s.maps,
        }
    }
}

impl GeneratorSet {
    pub fn new(field: PrimeField, maps: Vec<AffineMap>) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::invalid("generator set must be nonempty"));
        }
        Ok(GeneratorSet { field, maps })
    }

    /// Builds a set from `(a, b)` pairs, validating each against `p`.
    pub fn from_pairs(p: u64, pairs: &[(u64, u64)]) -> Result<Self> {
        let field = PrimeField::new(p)?;
        let maps = pairs
            .iter()
            .map(|&(a, b)| AffineMap::new(&field, a, b))
            .collect::<Result<Vec<_>>>()?;
        GeneratorSet::new(field, maps)
    }

    pub fn field(&self) -> &PrimeField {
        &self.field
    }

    pub fn p(&self) -> u64 {
        self.field.p()
    }

    pub fn maps(&self) -> &[AffineMap] {
        &self.maps
    }

    pub fn k(&self) -> usize {
        self.maps.len()
    }
}

/// A nontrivial irreducible representation of Aff(F_p).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IrrepId {
    /// `χ_j(x ↦ ax+b) = exp(2πi·j·dlog(a)/(p−1))`, `1 ≤ j ≤ p−2`.
    Character(u64),
    StandardRep,
}

impl IrrepId {
    pub fn dimension(&self, p: u64) -> u64 {
        match self {
            IrrepId::Character(_) => 1,
            IrrepId::StandardRep => p - 1,
        }
    }

    /// All nontrivial irreps: the p−2 characters, then the standard rep.
    pub fn all_nontrivial(p: u64) -> Vec<IrrepId> {
        (1..p - 1)
            .map(IrrepId::Character)
            .chain(std::iter::once(IrrepId::StandardRep))
            .collect()
    }
}

/// `χ_j(f)` for `0 ≤ j ≤ p−2`; `j = 0` is the trivial character.
pub fn character_value(field: &PrimeField, j: u64, f: AffineMap) -> Result<Complex<f64>> {
    let order = field.p() - 1;
    if j >= order {
        return Err(Error::invalid(format!(
            "character index {j} out of range [0, {}]",
            order - 1
        )));
    }
    let d = field.dlog(f.a)?;
    let idx = ((j as u128 * d as u128) % order as u128) as u64;
    Ok(root_of_unity(idx, order))
}

/// `exp(2πi·idx/order)`, with the exact values at the quarter points.
pub(crate) fn root_of_unity(idx: u64, order: u64) -> Complex<f64> {
    if idx == 0 {
        return Complex::new(1.0, 0.0);
    }
    if 2 * idx == order {
        return Complex::new(-1.0, 0.0);
    }
    let theta = TAU * idx as f64 / order as f64;
    Complex::new(theta.cos(), theta.sin())
}

/// Permutation action on `R^p`: `out[f(x)] = v[x]`.
pub fn standard_rep_matvec_into(field: &PrimeField, f: AffineMap, v: &[f64], out: &mut [f64]) -> Result<()> {
    let p = field.p();
    if v.len() as u64 != p || out.len() as u64 != p {
        return Err(Error::invalid(format!(
            "vector length {} (out {}) does not match p = {p}",
            v.len(),
            out.len()
        )));
    }
    permute_into(p, f, v, out, false);
    Ok(())
}

pub fn standard_rep_matvec(field: &PrimeField, f: AffineMap, v: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; v.len()];
    standard_rep_matvec_into(field, f, v, &mut out)?;
    Ok(out)
}

/// `out[f(x)] (+)= v[x]`, walking `f(x)` incrementally.
#[inline]
pub(crate) fn permute_into(p: u64, f: AffineMap, v: &[f64], out: &mut [f64], accumulate: bool) {
    let (a, mut y) = (f.a.value(), f.b.value());
    for &vx in v {
        if accumulate {
            out[y as usize] += vx;
        } else {
            out[y as usize] = vx;
        }
        y += a;
        if y >= p {
            y -= p;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn map(field: &PrimeField, a: u64, b: u64) -> AffineMap {
        AffineMap::new(field, a, b).unwrap()
    }

    #[test]
    fn compose_examples() {
        let f7 = PrimeField::new(7).unwrap();
        assert_eq!(compose(&f7, map(&f7, 2, 3), map(&f7, 3, 1)), map(&f7, 6, 5));
        let g = map(&f7, 5, 4);
        assert_eq!(compose(&f7, AffineMap::IDENTITY, g), g);
        assert_eq!(compose(&f7, map(&f7, 2, 3), map(&f7, 4, 2)), AffineMap::IDENTITY);
    }

    #[test]
    fn inverse_examples() {
        let f7 = PrimeField::new(7).unwrap();
        assert_eq!(inverse(&f7, AffineMap::IDENTITY), AffineMap::IDENTITY);
        assert_eq!(inverse(&f7, map(&f7, 2, 3)), map(&f7, 4, 2));
        let f5 = PrimeField::new(5).unwrap();
        assert_eq!(inverse(&f5, map(&f5, 1, 1)), map(&f5, 1, 4));
    }

    #[test]
    fn apply_examples() {
        let f7 = PrimeField::new(7).unwrap();
        let f = map(&f7, 2, 3);
        assert_eq!(apply(&f7, f, FpElem::from_raw(0)), FpElem::from_raw(3));
        assert_eq!(apply(&f7, f, FpElem::from_raw(5)), FpElem::from_raw(6));
        for x in 0..7 {
            let x = FpElem::from_raw(x);
            assert_eq!(apply(&f7, AffineMap::IDENTITY, x), x);
        }
    }

    #[test]
    fn act_on_set_examples() {
        let f = PrimeField::new(101).unwrap();
        let x = FpSubset::from_elements(101, [0, 1, 2, 3, 4, 6]).unwrap();
        let dil = act_on_set(&f, map(&f, 2, 0), &x);
        assert_eq!(dil.to_vec(), vec![0, 2, 4, 6, 8, 12]);
        let tr = act_on_set(&f, map(&f, 1, 2), &x);
        assert_eq!(tr.to_vec(), vec![2, 3, 4, 5, 6, 8]);
        assert_eq!(act_on_set(&f, AffineMap::IDENTITY, &x), x);
    }

    #[test]
    fn zero_scale_rejected() {
        let f7 = PrimeField::new(7).unwrap();
        assert!(AffineMap::new(&f7, 0, 1).is_err());
        assert!(AffineMap::new(&f7, 7, 1).is_err());
    }

    #[test]
    fn parse_text_form() {
        let f7 = PrimeField::new(7).unwrap();
        assert_eq!(AffineMap::parse(&f7, "2,3").unwrap(), map(&f7, 2, 3));
        assert_eq!(AffineMap::parse(&f7, " 2 , 3 ").unwrap(), map(&f7, 2, 3));
        assert!(AffineMap::parse(&f7, "2;3").is_err());
        assert!(AffineMap::parse(&f7, "0,3").is_err());
        assert!(AffineMap::parse(&f7, "x,3").is_err());
        assert_eq!(map(&f7, 2, 3).to_string(), "2,3");
    }

    #[test]
    fn empty_generator_set_rejected() {
        assert!(GeneratorSet::from_pairs(7, &[]).is_err());
        assert!(GeneratorSet::from_pairs(8, &[(1, 0)]).is_err());
    }

    #[test]
    fn generator_set_json() {
        let s = GeneratorSet::from_pairs(7, &[(2, 3), (2, 3)]).unwrap();
        let js = serde_json::to_string(&s).unwrap();
        assert_eq!(js, r#"{"p":7,"maps":[{"a":2,"b":3},{"a":2,"b":3}]}"#);
        let back: GeneratorSet = serde_json::from_str(&js).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<GeneratorSet>(r#"{"p":7,"maps":[{"a":0,"b":3}]}"#).is_err());
    }

    #[test]
    fn character_examples() {
        let f7 = PrimeField::new(7).unwrap();
        let g = map(&f7, 3, 0);
        assert_eq!(character_value(&f7, 0, g).unwrap(), Complex::new(1.0, 0.0));
        for j in 0..6 {
            assert_eq!(character_value(&f7, j, map(&f7, 1, 4)).unwrap(), Complex::new(1.0, 0.0));
        }
        let w = character_value(&f7, 1, g).unwrap();
        let expect = Complex::new((TAU / 6.0).cos(), (TAU / 6.0).sin());
        assert!((w - expect).norm() < 1e-15);
        assert!(character_value(&f7, 6, g).is_err());
    }

    #[test]
    fn standard_rep_examples() {
        let f3 = PrimeField::new(3).unwrap();
        let v = vec![0.3, -1.0, 2.5];
        assert_eq!(standard_rep_matvec(&f3, AffineMap::IDENTITY, &v).unwrap(), v);
        assert_eq!(
            standard_rep_matvec(&f3, map(&f3, 1, 1), &[1.0, 0.0, 0.0]).unwrap(),
            vec![0.0, 1.0, 0.0]
        );
        let f5 = PrimeField::new(5).unwrap();
        assert_eq!(
            standard_rep_matvec(&f5, map(&f5, 2, 0), &[0.0, 1.0, 0.0, 0.0, 0.0]).unwrap(),
            vec![0.0, 0.0, 1.0, 0.0, 0.0]
        );
        assert!(standard_rep_matvec(&f5, AffineMap::IDENTITY, &[1.0]).is_err());
    }

    #[test]
    fn irrep_dimensions_exhaust_group_order() {
        for p in [3u64, 5, 7, 11] {
            let f = PrimeField::new(p).unwrap();
            let order = all_elements(&f).len() as u64;
            assert_eq!(order, p * (p - 1));
            // trivial character plus every nontrivial irrep
            let sum_sq: u64 = 1 + IrrepId::all_nontrivial(p)
                .iter()
                .map(|r| r.dimension(p).pow(2))
                .sum::<u64>();
            assert_eq!(sum_sq, order);
            assert_eq!((p - 1) + (p - 1) * (p - 1), order);
        }
    }

    fn small_prime() -> impl Strategy<Value = u64> {
        prop::sample::select(vec![3u64, 5, 7, 11, 13, 31, 101])
    }

    fn elem_of(p: u64) -> impl Strategy<Value = (u64, u64)> {
        (1..p, 0..p)
    }

    proptest! {
        #[test]
        fn group_axioms(
            (p, f, g, h) in small_prime().prop_flat_map(|p| (Just(p), elem_of(p), elem_of(p), elem_of(p)))
        ) {
            let field = PrimeField::new(p).unwrap();
            let [f, g, h] = [f, g, h].map(|(a, b)| map(&field, a, b));
            prop_assert_eq!(
                compose(&field, compose(&field, f, g), h),
                compose(&field, f, compose(&field, g, h))
            );
            prop_assert_eq!(compose(&field, f, inverse(&field, f)), AffineMap::IDENTITY);
            prop_assert_eq!(compose(&field, inverse(&field, f), f), AffineMap::IDENTITY);
            prop_assert_eq!(compose(&field, f, AffineMap::IDENTITY), f);
            for x in 0..p {
                let x = FpElem::from_raw(x);
                prop_assert_eq!(
                    apply(&field, compose(&field, f, g), x),
                    apply(&field, f, apply(&field, g, x))
                );
            }
        }

        #[test]
        fn standard_rep_is_a_norm_preserving_homomorphism(
            (p, f, g, seed) in small_prime().prop_flat_map(|p| (Just(p), elem_of(p), elem_of(p), any::<u64>()))
        ) {
            let field = PrimeField::new(p).unwrap();
            let (f, g) = (map(&field, f.0, f.1), map(&field, g.0, g.1));
            let v: Vec<f64> = (0..p).map(|i| ((seed ^ i.wrapping_mul(0x9e37_79b9)) % 1000) as f64 / 7.0 - 50.0).collect();
            let lhs = standard_rep_matvec(&field, f, &standard_rep_matvec(&field, g, &v).unwrap()).unwrap();
            let rhs = standard_rep_matvec(&field, compose(&field, f, g), &v).unwrap();
            prop_assert_eq!(&lhs, &rhs);
            let norm = |u: &[f64]| u.iter().map(|x| x * x).sum::<f64>();
            prop_assert!((norm(&lhs) - norm(&v)).abs() <= 1e-9 * norm(&v).max(1.0));
            let ones = vec![1.0; p as usize];
            prop_assert_eq!(standard_rep_matvec(&field, f, &ones).unwrap(), ones);
        }

        #[test]
        fn characters_are_multiplicative(
            (p, j, f, g) in small_prime().prop_flat_map(|p| (Just(p), 0..p - 1, elem_of(p), elem_of(p)))
        ) {
            let field = PrimeField::new(p).unwrap();
            let (f, g) = (map(&field, f.0, f.1), map(&field, g.0, g.1));
            let fg = character_value(&field, j, compose(&field, f, g)).unwrap();
            let prod = character_value(&field, j, f).unwrap() * character_value(&field, j, g).unwrap();
            prop_assert!((fg - prod).norm() < 1e-12);
        }
    }
}
