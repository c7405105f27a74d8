use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{stream_seed, trial_rng};
use crate::construction::SizeBound;
use crate::epsilon::Epsilon;
use crate::error::{Error, Result};
use crate::modp::{FpSubset, PrimeField};

/// Largest modulus the exhaustive search accepts.
pub const ORACLE_MAX_P: u64 = 24;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleResult {
    pub p: u64,
    pub a: Vec<u64>,
    pub epsilon: Epsilon,
    /// Size of the witness when found; otherwise a lower bound, since every
    /// smaller size was searched without success.
    pub min_size: u64,
    pub witness: Option<FpSubset>,
    pub nodes_searched: u64,
    /// The search finished: `witness` is a smallest passing set.
    pub exhausted: bool,
}

/// Gosper's hack: the next larger integer with the same popcount.
fn next_same_popcount(v: u64) -> u64 {
    let c = v & v.wrapping_neg();
    let r = v + c;
    (((r ^ v) >> 2) / c) | r
}

/// Per-byte image tables for `x ↦ a·x`.
struct Dilation {
    tables: Vec<[u32; 256]>,
}

impl Dilation {
    fn new(p: u64, a: u64) -> Self {
        let tables = (0..p.div_ceil(8))
            .map(|byte| {
                let mut t = [0u32; 256];
                for (v, slot) in t.iter_mut().enumerate() {
                    for bit in 0..8 {
                        let x = byte * 8 + bit;
                        if v >> bit & 1 == 1 && x < p {
                            *slot |= 1 << (a * x % p);
                        }
                    }
                }
                t
            })
            .collect();
        Dilation { tables }
    }

    fn apply(&self, mask: u32) -> u32 {
        self.tables
            .iter()
            .enumerate()
            .fold(0, |acc, (i, t)| acc | t[(mask >> (8 * i)) as usize & 0xff])
    }
}

/// Smallest nonempty `X ⊂ F_p` with `|a·X ∖ X| ≤ ε|X|` and
/// `|(a+X) ∖ X| ≤ ε|X|` for all `a ∈ A`. Sizes are tried in increasing
/// order and masks in increasing order within a size, so the witness is
/// the numerically smallest mask of the minimal size. `budget` caps the
/// number of masks examined.
pub fn min_invariant_set(p: u64, a: &[u64], epsilon: Epsilon, budget: Option<u64>) -> Result<OracleResult> {
    if p > ORACLE_MAX_P {
        let estimate = SizeBound::checked_pow(2, p as u128);
        return Err(Error::ResourceLimit {
            what: format!("exhaustive search over subsets of F_{p} (max p = {ORACLE_MAX_P})"),
            estimate,
            cap: 1 << ORACLE_MAX_P,
            size_bound: estimate,
        });
    }
    let field = PrimeField::new(p)?;
    let a: Vec<u64> = a
        .iter()
        .map(|&v| {
            let e = field.elem(v)?;
            if e.is_zero() {
                return Err(Error::invalid("A must not contain 0"));
            }
            Ok(e.value())
        })
        .collect::<Result<_>>()?;
    let full: u32 = ((1u64 << p) - 1) as u32;
    let dilations: Vec<Dilation> = a.iter().map(|&ai| Dilation::new(p, ai)).collect();
    let rotate = |m: u32, s: u64| ((m << s) | (m >> (p - s))) & full;

    let passes = |m: u32, allowed: u32| {
        a.iter().zip(&dilations).all(|(&ai, d)| {
            (d.apply(m) & !m).count_ones() <= allowed && (rotate(m, ai) & !m).count_ones() <= allowed
        })
    };

    let mut nodes = 0u64;
    for size in 1..=p {
        let allowed = (epsilon.numer() as u128 * size as u128 / epsilon.denom() as u128) as u32;
        let mut m: u64 = (1u64 << size) - 1;
        while m <= full as u64 {
            if budget.is_some_and(|b| nodes >= b) {
                return Ok(OracleResult {
                    p,
                    a,
                    epsilon,
                    min_size: size,
                    witness: None,
                    nodes_searched: nodes,
                    exhausted: false,
                });
            }
            nodes += 1;
            if passes(m as u32, allowed) {
                return Ok(OracleResult {
                    p,
                    a,
                    epsilon,
                    min_size: size,
                    witness: Some(FpSubset::from_mask(p, m)?),
                    nodes_searched: nodes,
                    exhausted: true,
                });
            }
            m = next_same_popcount(m);
        }
    }
    unreachable!("F_p itself is invariant")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanRow {
    pub sample: usize,
    pub stream_seed: u64,
    pub result: OracleResult,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanReport {
    pub p: u64,
    pub k: usize,
    pub epsilon: Epsilon,
    pub budget_per_sample: Option<u64>,
    pub rows: Vec<ScanRow>,
    /// Largest `min_size` over the samples (a lower bound where a sample ran
    /// out of budget).
    pub empirical_max_min_size: u64,
    pub all_exhausted: bool,
}

/// Runs the oracle on `samples` seeded random sets `A` of `k` distinct
/// nonzero residues.
pub fn conjecture_scan(
    p: u64,
    k: usize,
    epsilon: Epsilon,
    samples: usize,
    master_seed: u64,
    budget_per_sample: Option<u64>,
) -> Result<ScanReport> {
    if k == 0 || k as u64 > p.saturating_sub(1) {
        return Err(Error::invalid(format!("k must lie in [1, p-1], got {k}")));
    }
    if samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    PrimeField::new(p)?;
    let rows = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(master_seed, i as u64);
            let mut a: Vec<u64> = sample(&mut rng, (p - 1) as usize, k).into_iter().map(|v| v as u64 + 1).collect();
            a.sort_unstable();
            Ok(ScanRow {
                sample: i,
                stream_seed: stream_seed(master_seed, i as u64),
                result: min_invariant_set(p, &a, epsilon, budget_per_sample)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanReport {
        p,
        k,
        epsilon,
        budget_per_sample,
        empirical_max_min_size: rows.iter().map(|r| r.result.min_size).max().unwrap_or(0),
        all_exhausted: rows.iter().all(|r| r.result.exhausted),
        rows,
    })
}
