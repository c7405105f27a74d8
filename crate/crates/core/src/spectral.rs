//! Matrix-free operator norms.
//!
//! The operators of interest are averages of representation matrices: the
//! permutation action of Aff(F_p) on the mean-zero subspace of `R^p`, and
//! sums of Kronecker products for the tensor-power experiment. Neither is
//! ever materialized; everything goes through [`LinOp::matvec`].

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affine::{inverse, permute_into, AffineMap, GeneratorSet};
use crate::error::{Error, Result};
use crate::modp::FpSubset;

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 100_000;
pub const DEFAULT_BLOCK: usize = 4;
/// Largest vector length accepted by [`kron_matvec`].
pub const MAX_KRON_DIM: usize = 1 << 24;

/// A real linear operator on `R^dim`, applied matrix-free.
pub trait LinOp: Sync {
    fn dim(&self) -> usize;

    /// `y = M x`.
    fn matvec(&self, x: &[f64], y: &mut [f64]);

    /// `y = Mᵀ x`.
    fn adjoint_matvec(&self, x: &[f64], y: &mut [f64]);
}

#[inline]
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[inline]
pub(crate) fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

fn subtract_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= mean;
    }
}

/// `P⊥ · (1/k) Σ ρ(g_i) · P⊥` on `R^p`, where `ρ` is the permutation action
/// and `P⊥` the projection onto the mean-zero subspace. Restricted to that
/// subspace this is the averaged standard representation; constants are
/// annihilated.
#[derive(Clone, Debug)]
pub struct AveragedOperator {
    p: u64,
    maps: Vec<AffineMap>,
    inverses: Vec<AffineMap>,
}

pub fn averaged_operator(s: &GeneratorSet) -> AveragedOperator {
    AveragedOperator {
        p: s.p(),
        maps: s.maps().to_vec(),
        inverses: s.maps().iter().map(|&g| inverse(s.field(), g)).collect(),
    }
}

impl AveragedOperator {
    fn apply(&self, maps: &[AffineMap], x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim());
        assert_eq!(y.len(), self.dim());
        // permutations fix the constants, so P⊥ρP⊥ = P⊥ρ and the input needs
        // no centering; summands in fixed order so results are bit-stable
        for (i, &g) in maps.iter().enumerate() {
            permute_into(self.p, g, x, y, i > 0);
        }
        let scale = 1.0 / maps.len() as f64;
        y.iter_mut().for_each(|v| *v *= scale);
        subtract_mean(y);
    }
}

impl LinOp for AveragedOperator {
    fn dim(&self) -> usize {
        self.p as usize
    }

    fn matvec(&self, x: &[f64], y: &mut [f64]) {
        self.apply(&self.maps, x, y)
    }

    fn adjoint_matvec(&self, x: &[f64], y: &mut [f64]) {
        self.apply(&self.inverses, x, y)
    }
}

/// A dense matrix as a [`LinOp`]; used for oracles and small groups.
#[derive(Clone, Debug)]
pub struct DenseOp(pub DMatrix<f64>);

impl LinOp for DenseOp {
    fn dim(&self) -> usize {
        self.0.ncols()
    }

    fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let r = &self.0 * nalgebra::DVector::from_column_slice(x);
        y.copy_from_slice(r.as_slice());
    }

    fn adjoint_matvec(&self, x: &[f64], y: &mut [f64]) {
        let r = self.0.tr_mul(&nalgebra::DVector::from_column_slice(x));
        y.copy_from_slice(r.as_slice());
    }
}

/// Materializes `M` column by column.
pub fn to_dense(m: &dyn LinOp) -> DMatrix<f64> {
    let n = m.dim();
    let mut out = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        m.matvec(&e, &mut col);
        out.column_mut(j).copy_from_slice(&col);
        e[j] = 0.0;
    }
    out
}

/// Largest singular value by a full SVD.
pub fn dense_top_singular_value(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormOptions {
    pub tol: f64,
    pub seed: u64,
    pub max_iter: usize,
    /// Number of vectors iterated together.
    pub block: usize,
}

impl Default for NormOptions {
    fn default() -> Self {
        NormOptions {
            tol: DEFAULT_TOL,
            seed: 0,
            max_iter: DEFAULT_MAX_ITER,
            block: DEFAULT_BLOCK,
        }
    }
}

impl NormOptions {
    pub fn with_tol(tol: f64) -> Self {
        NormOptions {
            tol,
            ..Default::default()
        }
    }
}

/// Result of [`op_norm`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub tolerance: f64,
    pub iterations_used: usize,
    pub converged: bool,
}

/// Seeded start vector with entries uniform in `[-1, 1)`.
pub fn seeded_vector(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = SplitMix64::seed_from_u64(seed);
    (0..dim).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
}

/// Largest singular value of `M` by power iteration on `MᵀM` from a seeded
/// start vector.
pub fn op_norm(m: &dyn LinOp, opts: NormOptions) -> Result<NormEstimate> {
    if m.dim() == 0 {
        return Err(Error::invalid("operator has dimension 0"));
    }
    op_norm_from(m, &seeded_vector(m.dim(), opts.seed), opts)
}

/// Block power iteration on `MᵀM` from the given start vector.
///
/// The block holds `opts.block` vectors: `start` plus seeded fillers. Each
/// step applies `MᵀM` to the block, re-orthonormalizes it, and takes the top
/// Ritz value `λ` of `MᵀM` on its span, which is a lower bound for `‖M‖²`.
/// The reported value is the best one seen, so a warm start never reports
/// less than its own quotient. Stops once `|λ_{t+1} − λ_t| ≤
/// tol·max(λ_t, 10⁻³)` and the extrapolated remaining change is within the
/// same budget. A block wider than one resolves near-coincident top
/// singular values that stall a single vector.
pub fn op_norm_from(m: &dyn LinOp, start: &[f64], opts: NormOptions) -> Result<NormEstimate> {
    let n = m.dim();
    if n == 0 {
        return Err(Error::invalid("operator has dimension 0"));
    }
    if start.len() != n {
        return Err(Error::invalid(format!(
            "start vector has length {}, operator dimension {n}",
            start.len()
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    if opts.block == 0 {
        return Err(Error::invalid("block size must be positive"));
    }
    if norm(start) == 0.0 {
        return Err(Error::invalid("start vector is zero"));
    }
    let b = opts.block.min(n);
    let mut v: Vec<Vec<f64>> = std::iter::once(start.to_vec())
        .chain((1..b).map(|i| seeded_vector(n, opts.seed.wrapping_add(i as u64))))
        .collect();
    orthonormalize(&mut v);

    let mut w = vec![vec![0.0; n]; b];
    let mut best = 0.0f64;
    let mut history: Vec<f64> = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        v.par_iter().zip(w.par_iter_mut()).for_each(|(x, y)| m.matvec(x, y));
        let lambda = top_ritz_value(&w);
        best = best.max(lambda);
        if let Some(&prev) = history.last() {
            let delta = (lambda - prev).abs();
            let budget = opts.tol * prev.max(1e-3);
            history.push(lambda);
            if delta <= budget && tail_within(&history, budget) {
                converged = true;
                break;
            }
        } else {
            history.push(lambda);
        }
        w.par_iter().zip(v.par_iter_mut()).for_each(|(x, y)| m.adjoint_matvec(x, y));
        if !orthonormalize(&mut v) {
            // the block lies in the kernel of MᵀM
            converged = true;
            break;
        }
    }
    Ok(NormEstimate {
        value: best.sqrt(),
        tolerance: opts.tol,
        iterations_used: iterations,
        converged,
    })
}

/// Modified Gram-Schmidt, two passes. Columns that collapse are zeroed.
/// Returns whether any column survived.
fn orthonormalize(v: &mut [Vec<f64>]) -> bool {
    let mut any = false;
    for j in 0..v.len() {
        let (done, rest) = v.split_at_mut(j);
        let col = &mut rest[0];
        let before = norm(col);
        if before == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for q in done.iter() {
                let c = dot(q, col);
                col.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
        }
        let after = norm(col);
        if after <= 1e-10 * before {
            col.iter_mut().for_each(|x| *x = 0.0);
            continue;
        }
        col.iter_mut().for_each(|x| *x /= after);
        any = true;
    }
    any
}

/// Largest eigenvalue of the Gram matrix `WᵀW`.
fn top_ritz_value(w: &[Vec<f64>]) -> f64 {
    if w.len() == 1 {
        return dot(&w[0], &w[0]);
    }
    let b = w.len();
    let gram = DMatrix::from_fn(b, b, |i, j| dot(&w[i], &w[j]));
    gram.symmetric_eigenvalues().max().max(0.0)
}

/// Whether the extrapolated remaining change of the sequence fits in
/// `budget`. Compares the last two differences over a window of `m ≈ t/8`
/// steps, `D₁ = λ_t − λ_{t−m}` and `D₀ = λ_{t−m} − λ_{t−2m}`; with
/// `q = D₁/D₀` the tail is `D₁·q/(1−q)`. A wide window keeps the ratio
/// meaningful when the top two singular values nearly coincide.
fn tail_within(history: &[f64], budget: f64) -> bool {
    let t = history.len() - 1;
    let lambda = history[t];
    if lambda == history[t - 1] {
        return true;
    }
    let noise = 16.0 * f64::EPSILON * lambda.max(f64::MIN_POSITIVE);
    let m = (t / 8).max(1);
    if t < 2 * m {
        return false;
    }
    let d1 = lambda - history[t - m];
    let d0 = history[t - m] - history[t - 2 * m];
    if d1.abs() <= noise {
        return true;
    }
    // a ratio indistinguishable from 1 means a stalled cluster, not
    // convergence
    if d0 - d1 <= noise || d1 < 0.0 {
        return false;
    }
    let q = d1 / d0;
    d1 * q / (1.0 - q) <= budget
}

/// `⟨Mv, v⟩ / ⟨v, v⟩`.
pub fn rayleigh_quotient(m: &dyn LinOp, v: &[f64]) -> Result<f64> {
    if v.len() != m.dim() {
        return Err(Error::invalid(format!(
            "vector length {} does not match operator dimension {}",
            v.len(),
            m.dim()
        )));
    }
    let vv = dot(v, v);
    if vv == 0.0 {
        return Err(Error::invalid("Rayleigh quotient of the zero vector"));
    }
    let mut mv = vec![0.0; v.len()];
    m.matvec(v, &mut mv);
    Ok(dot(&mv, v) / vv)
}

/// `1_X − (|X|/p)·1`, the centered characteristic vector of `X`.
pub fn meanzero_indicator(x: &FpSubset) -> Result<Vec<f64>> {
    if x.is_empty() || x.is_full() {
        return Err(Error::invalid(
            "indicator witness needs 0 < |X| < p",
        ));
    }
    let c = x.len() as f64 / x.p() as f64;
    let mut v = vec![-c; x.p() as usize];
    for e in x.iter() {
        v[e as usize] = 1.0 - c;
    }
    Ok(v)
}

/// `(A_1 ⊗ ⋯ ⊗ A_n) v` for row-major `d×d` factors, one factor at a time.
///
/// Index convention: `A_1` acts on the most significant base-`d` digit.
pub fn kron_matvec(factors: &[Vec<f64>], d: usize, v: &[f64]) -> Result<Vec<f64>> {
    let n = factors.len();
    if d == 0 {
        return Err(Error::invalid("factor dimension must be positive"));
    }
    let total = d
        .checked_pow(n as u32)
        .filter(|&t| t <= MAX_KRON_DIM)
        .ok_or_else(|| Error::invalid(format!("{d}^{n} exceeds the Kronecker size limit")))?;
    if v.len() != total {
        return Err(Error::invalid(format!(
            "vector length {} does not match {d}^{n} = {total}",
            v.len()
        )));
    }
    if let Some(bad) = factors.iter().position(|f| f.len() != d * d) {
        return Err(Error::invalid(format!("factor {bad} is not {d}x{d}")));
    }
    let mut cur = v.to_vec();
    let mut next = vec![0.0; total];
    let mut gather = vec![0.0; d];
    for (mode, a) in factors.iter().enumerate() {
        let right = d.pow((n - 1 - mode) as u32);
        let block = d * right;
        if d == 2 {
            let (a0, a1, a2, a3) = (a[0], a[1], a[2], a[3]);
            for base in (0..total).step_by(block) {
                let (lo, hi) = cur[base..base + block].split_at(right);
                let (out_lo, out_hi) = next[base..base + block].split_at_mut(right);
                for r in 0..right {
                    let (x0, x1) = (lo[r], hi[r]);
                    out_lo[r] = a0 * x0 + a1 * x1;
                    out_hi[r] = a2 * x0 + a3 * x1;
                }
            }
            std::mem::swap(&mut cur, &mut next);
            continue;
        }
        for base in (0..total).step_by(block) {
            for r in 0..right {
                for (j, g) in gather.iter_mut().enumerate() {
                    *g = cur[base + j * right + r];
                }
                for i in 0..d {
                    let row = &a[i * d..(i + 1) * d];
                    next[base + i * right + r] = dot(row, &gather);
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(cur)
}

/// `(1/k) Σ_j ⊗_i A_{j,i}` for `k` tuples of `n` real `d×d` factors.
#[derive(Clone, Debug)]
pub struct KronSumOperator {
    d: usize,
    dim: usize,
    terms: Vec<Vec<Vec<f64>>>,
    transposed: Vec<Vec<Vec<f64>>>,
}

impl KronSumOperator {
    pub fn new(d: usize, terms: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let n = terms
            .first()
            .map(|t| t.len())
            .ok_or_else(|| Error::invalid("need at least one summand"))?;
        if terms.iter().any(|t| t.len() != n) {
            return Err(Error::invalid("summands have different tensor lengths"));
        }
        if terms.iter().flatten().any(|f| f.len() != d * d) {
            return Err(Error::invalid(format!("factors must be {d}x{d}")));
        }
        let dim = d
            .checked_pow(n as u32)
            .filter(|&t| t <= MAX_KRON_DIM)
            .ok_or_else(|| Error::invalid(format!("{d}^{n} exceeds the Kronecker size limit")))?;
        let transpose = |f: &Vec<f64>| {
            let mut t = vec![0.0; d * d];
            for i in 0..d {
                for j in 0..d {
                    t[j * d + i] = f[i * d + j];
                }
            }
            t
        };
        let transposed = terms
            .iter()
            .map(|t| t.iter().map(transpose).collect())
            .collect();
        Ok(KronSumOperator {
            d,
            dim,
            terms,
            transposed,
        })
    }

    fn apply(&self, terms: &[Vec<Vec<f64>>], x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for t in terms {
            let r = kron_matvec(t, self.d, x).expect("validated at construction");
            for (acc, v) in y.iter_mut().zip(r) {
                *acc += v;
            }
        }
        let scale = 1.0 / terms.len() as f64;
        y.iter_mut().for_each(|v| *v *= scale);
    }
}

impl LinOp for KronSumOperator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn matvec(&self, x: &[f64], y: &mut [f64]) {
        self.apply(&self.terms, x, y)
    }

    fn adjoint_matvec(&self, x: &[f64], y: &mut [f64]) {
        self.apply(&self.transposed, x, y)
    }
}
