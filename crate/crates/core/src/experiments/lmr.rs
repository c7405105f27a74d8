use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{trial_rng, GroupSpec, TrialConfig};
use crate::construction::SizeBound;
use crate::error::{Error, Result};
use crate::spectral::{op_norm, KronSumOperator, NormEstimate, NormOptions, MAX_KRON_DIM};

/// One-line images of 1, 2, 3, indexed 0..5: e, (12), (23), (13), (123),
/// (132).
const ONE_LINE: [[u8; 3]; 6] = [[1, 2, 3], [2, 1, 3], [1, 3, 2], [3, 2, 1], [2, 3, 1], [3, 1, 2]];
const CYCLES: [&str; 6] = ["()", "(12)", "(23)", "(13)", "(123)", "(132)"];

/// A permutation of {1, 2, 3}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct S3Elem(u8);

pub const S3_ELEMENTS: [S3Elem; 6] = [S3Elem(0), S3Elem(1), S3Elem(2), S3Elem(3), S3Elem(4), S3Elem(5)];

impl S3Elem {
    pub const IDENTITY: S3Elem = S3Elem(0);

    pub fn from_index(i: u8) -> Result<Self> {
        if i < 6 {
            Ok(S3Elem(i))
        } else {
            Err(Error::invalid(format!("S3 index {i} out of range 0..5")))
        }
    }

    pub fn index(self) -> u8 {
        self.0
    }

    /// Images of 1, 2, 3.
    pub fn one_line(self) -> [u8; 3] {
        ONE_LINE[self.0 as usize]
    }

    fn from_one_line(img: [u8; 3]) -> Option<Self> {
        ONE_LINE.iter().position(|&o| o == img).map(|i| S3Elem(i as u8))
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(self, other: S3Elem) -> S3Elem {
        let (s, t) = (self.one_line(), other.one_line());
        let img = [s[t[0] as usize - 1], s[t[1] as usize - 1], s[t[2] as usize - 1]];
        S3Elem::from_one_line(img).expect("closed under composition")
    }

    pub fn sign(self) -> i8 {
        match self.0 {
            0 | 4 | 5 => 1,
            _ => -1,
        }
    }
}

impl fmt::Display for S3Elem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(CYCLES[self.0 as usize])
    }
}

/// Accepts cycle notation (`(123)`, `(12)`, `()`, `e`) or one-line
/// notation (`231`).
impl FromStr for S3Elem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if t == "e" || t == "()" {
            return Ok(S3Elem::IDENTITY);
        }
        let bad = || Error::invalid(format!("not an element of S3: {s:?}"));
        let digits = |body: &str| -> Result<Vec<u8>> {
            body.chars()
                .map(|c| match c {
                    '1'..='3' => Ok(c as u8 - b'0'),
                    _ => Err(bad()),
                })
                .collect()
        };
        if let Some(body) = t.strip_prefix('(').and_then(|r| r.strip_suffix(')')) {
            let cyc = digits(body)?;
            let mut seen = [false; 4];
            if cyc.len() > 3 || cyc.iter().any(|&d| std::mem::replace(&mut seen[d as usize], true)) {
                return Err(bad());
            }
            let mut img = [1, 2, 3];
            for (i, &d) in cyc.iter().enumerate() {
                img[d as usize - 1] = cyc[(i + 1) % cyc.len()];
            }
            return S3Elem::from_one_line(img).ok_or_else(bad);
        }
        let img = digits(&t)?;
        let img: [u8; 3] = img.try_into().map_err(|_| bad())?;
        S3Elem::from_one_line(img).ok_or_else(bad)
    }
}

impl From<S3Elem> for String {
    fn from(g: S3Elem) -> String {
        g.to_string()
    }
}

impl TryFrom<String> for S3Elem {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// The 2-dimensional irrep in the orthonormal basis
/// `(1,−1,0)/√2, (1,1,−2)/√6` of the sum-zero plane: 3-cycles rotate by
/// ±120°, transpositions reflect.
pub fn s3_rep(g: S3Elem) -> Matrix2<f64> {
    let h = 3f64.sqrt() / 2.0;
    match g.0 {
        0 => Matrix2::new(1.0, 0.0, 0.0, 1.0),
        1 => Matrix2::new(-1.0, 0.0, 0.0, 1.0),
        2 => Matrix2::new(0.5, h, h, -0.5),
        3 => Matrix2::new(0.5, -h, -h, -0.5),
        4 => Matrix2::new(-0.5, -h, h, -0.5),
        _ => Matrix2::new(-0.5, h, -h, -0.5),
    }
}

fn row_major(m: &Matrix2<f64>) -> Vec<f64> {
    vec![m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]]
}

/// `‖(1/k) Σ_j ⊗_i s3_rep(g_j[i])‖`, matrix-free.
pub fn lmr_norm(elements: &[Vec<S3Elem>], opts: NormOptions) -> Result<NormEstimate> {
    let n = elements
        .first()
        .map(|t| t.len())
        .ok_or_else(|| Error::invalid("need at least one tuple"))?;
    if n == 0 {
        return Err(Error::invalid("tuples must be nonempty"));
    }
    if elements.iter().any(|t| t.len() != n) {
        return Err(Error::invalid("tuples have different lengths"));
    }
    if n >= usize::BITS as usize || (1usize << n) > MAX_KRON_DIM {
        let estimate = SizeBound::checked_pow(2, n as u128);
        return Err(Error::ResourceLimit {
            what: format!("tensor power of dimension 2^{n}"),
            estimate,
            cap: MAX_KRON_DIM as u128,
            size_bound: estimate,
        });
    }
    let terms = elements
        .iter()
        .map(|t| t.iter().map(|&g| row_major(&s3_rep(g))).collect())
        .collect();
    op_norm(&KronSumOperator::new(2, terms)?, opts)
}

/// Summary of one `(n, k)` survey cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmrRow {
    pub n: usize,
    pub k: usize,
    pub trials: usize,
    pub force_equal: bool,
    /// Share of trials with norm ≥ 1 − 10⁻⁹.
    pub frequency: f64,
    pub mean_norm: f64,
    pub max_norm: f64,
    pub norms: Vec<f64>,
    pub all_converged: bool,
}

pub const LMR_ONE_THRESHOLD: f64 = 1.0 - 1e-9;
/// Survey norms are computed at `tol·10⁻³`, but never below `10⁻¹³`.
const SURVEY_TOL_FACTOR: f64 = 1e-3;
const SURVEY_TOL_FLOOR: f64 = 1e-13;

/// Seeded uniform `k`-tuples of elements of S₃ⁿ per trial. With
/// `force_equal`, every tuple copies the first.
pub fn lmr_survey(cfg: &TrialConfig, force_equal: bool) -> Result<LmrRow> {
    cfg.validate()?;
    let GroupSpec::S3Tensor { n } = cfg.group else {
        return Err(Error::invalid("survey needs an S3 tensor group"));
    };
    // estimates within tol of 1 would straddle the threshold otherwise
    let opts = NormOptions {
        tol: (cfg.tol * SURVEY_TOL_FACTOR).max(SURVEY_TOL_FLOOR),
        ..Default::default()
    };
    let results = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(cfg.master_seed, t as u64);
            let mut sample = || -> Vec<S3Elem> { (0..n).map(|_| S3_ELEMENTS[rng.random_range(0..6)]).collect() };
            let tuples: Vec<Vec<S3Elem>> = if force_equal {
                vec![sample(); cfg.k]
            } else {
                (0..cfg.k).map(|_| sample()).collect()
            };
            lmr_norm(&tuples, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    let norms: Vec<f64> = results.iter().map(|e| e.value).collect();
    let hits = norms.iter().filter(|&&v| v >= LMR_ONE_THRESHOLD).count();
    Ok(LmrRow {
        n,
        k: cfg.k,
        trials: cfg.trials,
        force_equal,
        frequency: hits as f64 / cfg.trials as f64,
        mean_norm: norms.iter().sum::<f64>() / cfg.trials as f64,
        max_norm: norms.iter().copied().fold(0.0, f64::max),
        all_converged: results.iter().all(|e| e.converged),
        norms,
    })
}
