//! Almost-invariant sets.
//!
//! Given distinct nonzero `a_1, …, a_k ∈ F_p` and `L = ⌈1/ε⌉`, build the
//! generalized arithmetic progression
//!
//! ```text
//! P = { n_1·a_1 + ⋯ + n_k·a_k : 0 ≤ n_i < L }
//! ```
//!
//! the generalized geometric progression
//!
//! ```text
//! Q = { a_1^{n_1} ⋯ a_k^{n_k} : 0 ≤ n_i < L }
//! ```
//!
//! and `X = Q⁻¹·T` where `T = Σ_{y ∈ Q} y·P` is an iterated sumset. `X` is
//! the set of all `y_0⁻¹·Σ_{y∈Q} y·x_y` with `y_0 ∈ Q`, `x_y ∈ P`, and has at
//! most `|Q|·|P|^{|Q|} ≤ L^k·L^{k·L^k}` elements.
//!
//! Everything is computed on bitsets, so the cost is governed by `p` and the
//! actual sizes of `P` and `Q`, never by the (double exponential) count of
//! representations. That count is still used as the resource guard.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::epsilon::Epsilon;
use crate::error::{Error, Result};
use crate::modp::{FpElem, FpSubset, PrimeField};

/// Default cap on the construction's work estimate.
pub const DEFAULT_RESOURCE_CAP: u128 = 1 << 33;

/// An exact count that saturates past 128 bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SizeBound {
    Exact(u128),
    Overflow,
}

impl SizeBound {
    pub fn exact(self) -> Option<u128> {
        match self {
            SizeBound::Exact(v) => Some(v),
            SizeBound::Overflow => None,
        }
    }

    pub fn checked_mul(self, rhs: SizeBound) -> SizeBound {
        match (self, rhs) {
            (SizeBound::Exact(a), SizeBound::Exact(b)) => {
                a.checked_mul(b).map_or(SizeBound::Overflow, SizeBound::Exact)
            }
            _ => SizeBound::Overflow,
        }
    }

    pub fn checked_pow(base: u128, exp: u128) -> SizeBound {
        if base <= 1 {
            return SizeBound::Exact(if exp == 0 { 1 } else { base });
        }
        u32::try_from(exp)
            .ok()
            .and_then(|e| base.checked_pow(e))
            .map_or(SizeBound::Overflow, SizeBound::Exact)
    }

    /// `self ≤ v` for a concrete count.
    pub fn le(self, v: u128) -> bool {
        matches!(self, SizeBound::Exact(b) if b <= v)
    }
}

impl fmt::Display for SizeBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SizeBound::Exact(v) => write!(f, "{v}"),
            SizeBound::Overflow => write!(f, "overflow (>= 2^128)"),
        }
    }
}

impl Serialize for SizeBound {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SizeBound::Exact(v) => match u64::try_from(*v) {
                Ok(small) => s.serialize_u64(small),
                Err(_) => s.serialize_str(&v.to_string()),
            },
            SizeBound::Overflow => s.serialize_str("overflow"),
        }
    }
}

impl<'de> Deserialize<'de> for SizeBound {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(u64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(SizeBound::Exact(v as u128)),
            Repr::Text(t) if t == "overflow" => Ok(SizeBound::Overflow),
            Repr::Text(t) => t
                .parse()
                .map(SizeBound::Exact)
                .map_err(|_| serde::de::Error::custom(format!("bad size bound {t:?}"))),
        }
    }
}

/// Inputs of the construction: `A = {a_1, …, a_k}` and ε, with `L = ⌈1/ε⌉`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstructionParams {
    field: PrimeField,
    a: Vec<FpElem>,
    epsilon: Epsilon,
    l: u64,
    resource_cap: u128,
}

impl ConstructionParams {
    /// Rejects empty `A`, zero entries and duplicates.
    pub fn new(p: u64, a: &[u64], epsilon: Epsilon) -> Result<Self> {
        let field = PrimeField::new(p)?;
        Self::with_field(field, a, epsilon)
    }

    pub fn with_field(field: PrimeField, a: &[u64], epsilon: Epsilon) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::invalid("A must be nonempty"));
        }
        let mut elems = Vec::with_capacity(a.len());
        for &v in a {
            let e = field.elem(v)?;
            if e.is_zero() {
                return Err(Error::invalid("A must not contain 0"));
            }
            if elems.contains(&e) {
                return Err(Error::invalid(format!("duplicate element {v} in A")));
            }
            elems.push(e);
        }
        Ok(ConstructionParams {
            field,
            a: elems,
            epsilon,
            l: epsilon.ceil_inverse(),
            resource_cap: DEFAULT_RESOURCE_CAP,
        })
    }

    pub fn with_resource_cap(mut self, cap: u128) -> Self {
        self.resource_cap = cap;
        self
    }

    pub fn field(&self) -> &PrimeField {
        &self.field
    }

    pub fn p(&self) -> u64 {
        self.field.p()
    }

    pub fn a(&self) -> &[FpElem] {
        &self.a
    }

    pub fn k(&self) -> usize {
        self.a.len()
    }

    pub fn epsilon(&self) -> Epsilon {
        self.epsilon
    }

    pub fn l(&self) -> u64 {
        self.l
    }

    pub fn resource_cap(&self) -> u128 {
        self.resource_cap
    }
}

/// `L^k · L^{k·L^k}`, saturating past 2^128.
pub fn size_bound(params: &ConstructionParams) -> SizeBound {
    size_bound_for(params.k() as u64, params.l())
}

pub fn size_bound_for(k: u64, l: u64) -> SizeBound {
    let box_size = SizeBound::checked_pow(l as u128, k as u128);
    match box_size {
        SizeBound::Exact(lk) => match (k as u128).checked_mul(lk) {
            Some(exp) => box_size.checked_mul(SizeBound::checked_pow(l as u128, exp)),
            None => SizeBound::Overflow,
        },
        SizeBound::Overflow => SizeBound::Overflow,
    }
}

/// `|Q|·|P|^{|Q|}` for measured sizes.
pub fn representation_bound(p_len: u64, q_len: u64) -> SizeBound {
    SizeBound::Exact(q_len as u128)
        .checked_mul(SizeBound::checked_pow(p_len as u128, q_len as u128))
}

/// `{n·a : 0 ≤ n < L}`.
fn progression(p: u64, a: FpElem, l: u64) -> FpSubset {
    let terms = (0..l.min(p)).scan(0u64, |x, _| {
        let cur = *x;
        *x = (*x + a.value()) % p;
        Some(cur)
    });
    FpSubset::from_elements(p, terms).expect("residues")
}

/// `P = {Σ n_i·a_i : 0 ≤ n_i < L}` as an iterated sumset of progressions.
pub fn build_p(params: &ConstructionParams) -> FpSubset {
    let p = params.p();
    let mut acc = FpSubset::from_elements(p, [0]).expect("0 < p");
    for &a in params.a() {
        if acc.is_full() {
            break;
        }
        acc = acc.sumset_with(&progression(p, a, params.l()));
    }
    acc
}

/// `Q = {Π a_i^{n_i} : 0 ≤ n_i < L}`.
pub fn build_q(params: &ConstructionParams) -> FpSubset {
    let field = params.field();
    let mut acc = FpSubset::from_elements(field.p(), [1]).expect("1 < p");
    for &a in params.a() {
        let mut next = acc.clone();
        let mut g = a;
        for _ in 1..params.l() {
            // powers of a cycle with period ord(a)
            if g == FpElem::ONE {
                break;
            }
            next.union_with(&acc.dilate(field, g).expect("nonzero"));
            g = field.mul(g, a);
        }
        acc = next;
    }
    acc
}

/// Output of [`build_x`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstructionResult {
    pub p: u64,
    pub a: Vec<FpElem>,
    pub epsilon: Epsilon,
    pub l: u64,
    #[serde(rename = "p_set")]
    pub progression: FpSubset,
    #[serde(rename = "q_set")]
    pub geometric: FpSubset,
    #[serde(rename = "x_set")]
    pub x: FpSubset,
    /// `L^k · L^{k·L^k}`.
    pub predicted_bound: SizeBound,
    /// `|Q|·|P|^{|Q|}` with the measured sizes.
    pub representation_bound: SizeBound,
    pub injective_p: bool,
    pub injective_q: bool,
}

impl ConstructionResult {
    pub fn x_len(&self) -> u64 {
        self.x.len()
    }
}

fn resource_error(params: &ConstructionParams, what: String, estimate: SizeBound) -> Error {
    Error::ResourceLimit {
        what,
        estimate,
        cap: params.resource_cap(),
        size_bound: size_bound(params),
    }
}

/// Rejects parameter choices whose representation count or bitset workload
/// exceeds the resource cap.
pub fn check_resources(params: &ConstructionParams) -> Result<()> {
    let bound = size_bound(params);
    if !bound.le(params.resource_cap()) {
        return Err(resource_error(
            params,
            format!(
                "representation count L^k*L^(k*L^k) for k = {}, L = {} (p = {})",
                params.k(),
                params.l(),
                params.p()
            ),
            bound,
        ));
    }
    let p = params.p() as u128;
    let box_size = SizeBound::checked_pow(params.l() as u128, params.k() as u128)
        .exact()
        .map_or(p, |b| b.min(p));
    // |Q| sumset steps, each at most |P| rotations of ceil(p/64) words
    let work = SizeBound::Exact(box_size)
        .checked_mul(SizeBound::Exact(box_size))
        .checked_mul(SizeBound::Exact(p.div_ceil(64)));
    if !work.le(params.resource_cap()) {
        return Err(resource_error(
            params,
            format!("bitset workload for p = {}", params.p()),
            work,
        ));
    }
    Ok(())
}

/// Builds `P`, `Q` and `X = Q⁻¹(Σ_{y∈Q} y·P)`.
pub fn build_x(params: &ConstructionParams) -> Result<ConstructionResult> {
    check_resources(params)?;
    let field = params.field();
    let p_set = build_p(params);
    let q_set = build_q(params);

    // T = Σ_{y ∈ Q} y·P, ascending y
    let mut t = FpSubset::from_elements(field.p(), [0]).expect("0 < p");
    for y in q_set.iter() {
        if t.is_full() {
            break;
        }
        let dilated = p_set.dilate(field, FpElem::from_raw(y))?;
        t = t.sumset_with(&dilated);
    }

    let inverses: Vec<FpElem> = q_set
        .iter()
        .map(|y| field.inv(FpElem::from_raw(y)))
        .collect::<Result<_>>()?;
    let x = inverses
        .par_iter()
        .map(|&inv| t.dilate(field, inv).expect("nonzero"))
        .reduce(
            || FpSubset::empty(field.p()),
            |mut acc, s| {
                acc.union_with(&s);
                acc
            },
        );

    let box_size = SizeBound::checked_pow(params.l() as u128, params.k() as u128);
    let injective_p = box_size == SizeBound::Exact(p_set.len() as u128);
    let injective_q = box_size == SizeBound::Exact(q_set.len() as u128);
    Ok(ConstructionResult {
        p: field.p(),
        a: params.a().to_vec(),
        epsilon: params.epsilon(),
        l: params.l(),
        predicted_bound: size_bound(params),
        representation_bound: representation_bound(p_set.len(), q_set.len()),
        injective_p,
        injective_q,
        progression: p_set,
        geometric: q_set,
        x,
    })
}
