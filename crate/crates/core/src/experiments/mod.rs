//! Seeded experiments: random-generator expansion in cyclic and affine
//! groups, tensor powers of the S₃ representation, and an exhaustive search
//! for the smallest almost-invariant sets.

mod alon_roichman;
mod lmr;
mod oracle;

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use alon_roichman::{alon_roichman_trial, cyclic_max_character_norm, ArTrial};
pub use lmr::{lmr_norm, lmr_survey, s3_rep, LmrRow, S3Elem, LMR_ONE_THRESHOLD, S3_ELEMENTS};
pub use oracle::{conjecture_scan, min_invariant_set, OracleResult, ScanReport, ScanRow, ORACLE_MAX_P};

/// Group sampled by a trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GroupSpec {
    /// Z/nZ
    Cyclic { n: u64 },
    /// Aff(F_p)
    Affine { p: u64 },
    /// S₃ⁿ
    S3Tensor { n: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub master_seed: u64,
    pub trials: usize,
    pub group: GroupSpec,
    /// Generators per trial.
    pub k: usize,
    pub tol: f64,
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("need at least one trial"));
        }
        if self.k == 0 {
            return Err(Error::invalid("need at least one generator per trial"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tolerance must be positive"));
        }
        Ok(())
    }
}

/// Seed of trial `index`'s private stream.
pub fn stream_seed(master_seed: u64, index: u64) -> u64 {
    master_seed ^ index
}

/// The RNG for trial `index`: the xor of master seed and index, expanded
/// by SplitMix64 into xoshiro256++ state.
pub fn trial_rng(master_seed: u64, index: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(stream_seed(master_seed, index))
}
