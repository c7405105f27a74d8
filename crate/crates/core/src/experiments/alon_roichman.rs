use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{stream_seed, trial_rng, GroupSpec, TrialConfig};
use crate::affine::{root_of_unity, AffineMap, GeneratorSet};
use crate::error::{Error, Result};
use crate::modp::PrimeField;
use crate::resistance::expansion_profile;
use crate::spectral::NormOptions;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArTrial {
    pub trial: usize,
    pub stream_seed: u64,
    /// Largest norm over the nontrivial irreps.
    pub max_norm: f64,
    /// Whether the standard representation's iterative norm converged;
    /// always true for cyclic groups.
    pub converged: bool,
}

/// `max_{1≤j<n} |(1/k) Σ_i e^{2πi·j·g_i/n}|`. Phases are reduced mod `n`
/// exactly before evaluation.
pub fn cyclic_max_character_norm(n: u64, elements: &[u64]) -> Result<f64> {
    if n < 2 {
        return Err(Error::invalid("cyclic group needs n >= 2"));
    }
    if elements.is_empty() {
        return Err(Error::invalid("need at least one element"));
    }
    let k = elements.len() as f64;
    let norm = |j: u64| {
        let sum = elements.iter().fold(nalgebra::Complex::new(0.0, 0.0), |acc, &g| {
            acc + root_of_unity(((j as u128 * (g % n) as u128) % n as u128) as u64, n)
        });
        sum.norm() / k
    };
    Ok((1..n).map(norm).fold(0.0, f64::max))
}

/// Samples `k` elements uniformly with replacement per trial and records
/// the largest nontrivial-irrep norm of their average.
pub fn alon_roichman_trial(cfg: &TrialConfig) -> Result<Vec<ArTrial>> {
    cfg.validate()?;
    let field = match cfg.group {
        GroupSpec::Cyclic { n } if n < 2 => return Err(Error::invalid("cyclic group needs n >= 2")),
        GroupSpec::Cyclic { .. } => None,
        GroupSpec::Affine { p } => Some(PrimeField::new(p)?),
        GroupSpec::S3Tensor { .. } => {
            return Err(Error::invalid("expansion trials need a cyclic or affine group"))
        }
    };
    let opts = NormOptions {
        tol: cfg.tol,
        ..Default::default()
    };
    (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(cfg.master_seed, t as u64);
            let (max_norm, converged) = match (&cfg.group, &field) {
                (GroupSpec::Cyclic { n }, _) => {
                    let elems: Vec<u64> = (0..cfg.k).map(|_| rng.random_range(0..*n)).collect();
                    (cyclic_max_character_norm(*n, &elems)?, true)
                }
                (_, Some(field)) => {
                    let p = field.p();
                    let maps = (0..cfg.k)
                        .map(|_| {
                            let a = rng.random_range(1..p);
                            let b = rng.random_range(0..p);
                            AffineMap::new(field, a, b)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let profile = expansion_profile(&GeneratorSet::new(field.clone(), maps)?, opts)?;
                    (profile.max_norm, profile.standard_norm.converged)
                }
                _ => unreachable!("group validated above"),
            };
            Ok(ArTrial {
                trial: t,
                stream_seed: stream_seed(cfg.master_seed, t as u64),
                max_norm,
                converged,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::TAU;

    /// Direct DFT of the counting vector, with float phases.
    fn dft_max(n: u64, elements: &[u64]) -> f64 {
        let mut counts = vec![0.0; n as usize];
        for &g in elements {
            counts[(g % n) as usize] += 1.0;
        }
        let k = elements.len() as f64;
        (1..n)
            .map(|j| {
                let (mut re, mut im) = (0.0, 0.0);
                for (g, &c) in counts.iter().enumerate() {
                    let th = TAU * ((j * g as u64) % n) as f64 / n as f64;
                    re += c * th.cos();
                    im += c * th.sin();
                }
                (re * re + im * im).sqrt() / k
            })
            .fold(0.0, f64::max)
    }

    fn cfg(group: GroupSpec, k: usize, trials: usize) -> TrialConfig {
        TrialConfig {
            master_seed: 0,
            trials,
            group,
            k,
            tol: 1e-9,
        }
    }

    #[test]
    fn identity_only_trial_has_norm_one() {
        assert_eq!(cyclic_max_character_norm(4, &[0, 0, 0]).unwrap(), 1.0);
    }

    #[test]
    fn single_affine_element_has_norm_one() {
        let out = alon_roichman_trial(&cfg(GroupSpec::Affine { p: 101 }, 1, 3)).unwrap();
        for t in out {
            assert!((t.max_norm - 1.0).abs() < 1e-9, "{t:?}");
        }
    }

    #[test]
    fn rejects_tensor_group() {
        assert!(alon_roichman_trial(&cfg(GroupSpec::S3Tensor { n: 2 }, 2, 1)).is_err());
        assert!(alon_roichman_trial(&cfg(GroupSpec::Cyclic { n: 1 }, 2, 1)).is_err());
    }

    #[test]
    fn trials_are_reproducible_and_order_independent() {
        let c = cfg(GroupSpec::Cyclic { n: 101 }, 20, 16);
        let a = alon_roichman_trial(&c).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| alon_roichman_trial(&c).unwrap());
        assert_eq!(a, b);
        assert!(a.iter().enumerate().all(|(i, t)| t.trial == i));
    }

    proptest! {
        #[test]
        fn cyclic_norm_matches_dft(n in 2u64..80, elements in prop::collection::vec(0u64..1000, 1..12)) {
            let fast = cyclic_max_character_norm(n, &elements).unwrap();
            prop_assert!((fast - dft_max(n, &elements)).abs() <= 1e-12);
        }
    }
}
