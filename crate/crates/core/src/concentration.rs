//! Variance of quadratic forms `x^T A x` in tensor samples: Monte Carlo
//! estimates, the closed-form variance for `A = I`, upper bounds by matrix
//! class, the Hoeffding lower bound, and the quadruple-overlap counts
//! `gamma(s, t)` that drive the zero-diagonal bound.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::index_space::{binomial, enumerate, ln_binomial, BigCount, SubsetIndex};
use crate::matrix::SymMatrix;
use crate::spectra::eigenvalues_sym;
use crate::tensor_model::{sample_tensor, RngStream, TensorModelSpec};

/// Largest `p` for [`exact_variance_diag_oracle`].
pub const EXACT_ORACLE_MAX_P: u128 = 5000;
/// Largest `C(n, d)^2` for [`gamma_brute`].
pub const GAMMA_BRUTE_MAX_PAIRS: u128 = 10_000_000;
/// Default batch count for [`mc_variance`].
pub const DEFAULT_BATCHES: usize = 20;
/// Default block size of generated test matrices.
pub const DEFAULT_BLOCK: usize = 256;

/// Structural class of `A`, selecting the variance bound that applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    Diagonal,
    ZeroDiagonal,
    Arbitrary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum MatrixGenerator {
    Identity,
    RandomOrthogonalProjection { rank_fraction: f64 },
    RandomSigns,
    Custom,
}

/// A symmetric `p x p` operator. Generated test matrices are block diagonal
/// after a random permutation of coordinates, which keeps `x^T A x` at
/// `O(p * block)` for `p` far beyond dense storage.
#[derive(Debug, Clone)]
pub enum Operator {
    Identity(usize),
    Dense(SymMatrix),
    PermutedBlocks {
        dim: usize,
        perm: Vec<usize>,
        blocks: Vec<SymMatrix>,
    },
}

impl Operator {
    pub fn dim(&self) -> usize {
        match self {
            Operator::Identity(p) => *p,
            Operator::Dense(a) => a.dim(),
            Operator::PermutedBlocks { dim, .. } => *dim,
        }
    }

    pub fn qform(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(match self {
            Operator::Identity(_) => x.iter().map(|v| v * v).sum(),
            Operator::Dense(a) => sym_qform(a, x),
            Operator::PermutedBlocks { perm, blocks, .. } => {
                let mut total = 0.0;
                let mut off = 0;
                let mut local = Vec::new();
                for b in blocks {
                    local.clear();
                    local.extend(perm[off..off + b.dim()].iter().map(|&i| x[i]));
                    total += sym_qform(b, &local);
                    off += b.dim();
                }
                total
            }
        })
    }

    /// `tr(A A^T)`, the squared Frobenius norm.
    pub fn tr_aat(&self) -> f64 {
        match self {
            Operator::Identity(p) => *p as f64,
            Operator::Dense(a) => a.frobenius_norm().powi(2),
            Operator::PermutedBlocks { blocks, .. } => blocks.iter().map(|b| b.frobenius_norm().powi(2)).sum(),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            Operator::Identity(p) => *p as f64,
            Operator::Dense(a) => a.trace(),
            Operator::PermutedBlocks { blocks, .. } => blocks.iter().map(SymMatrix::trace).sum(),
        }
    }

    /// Exact spectral norm from the eigenvalues of each block.
    pub fn spectral_norm(&self) -> Result<f64> {
        let block_norm = |a: &SymMatrix| -> Result<f64> {
            let esd = eigenvalues_sym(a)?;
            Ok(esd.min().abs().max(esd.max().abs()))
        };
        match self {
            Operator::Identity(_) => Ok(1.0),
            Operator::Dense(a) => block_norm(a),
            Operator::PermutedBlocks { blocks, .. } => {
                blocks.iter().try_fold(0.0f64, |m, b| Ok(m.max(block_norm(b)?)))
            }
        }
    }

    /// Dense form; for tests and small `p`.
    pub fn to_dense(&self) -> SymMatrix {
        match self {
            Operator::Identity(p) => SymMatrix::identity(*p),
            Operator::Dense(a) => a.clone(),
            Operator::PermutedBlocks { dim, perm, blocks } => {
                let mut m = SymMatrix::zeros(*dim);
                let mut off = 0;
                for b in blocks {
                    let idx = &perm[off..off + b.dim()];
                    for (r, &i) in idx.iter().enumerate() {
                        for (c, &j) in idx.iter().enumerate() {
                            m.set_sym(i, j, b.get(r, c));
                        }
                    }
                    off += b.dim();
                }
                m
            }
        }
    }
}

/// `x^T A x = sum_i a_ii x_i^2 + 2 sum_{i<j} a_ij x_i x_j`.
fn sym_qform(a: &SymMatrix, x: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..a.dim() {
        let row = a.row(i);
        let off: f64 = row[i + 1..].iter().zip(&x[i + 1..]).map(|(a, b)| a * b).sum();
        total += x[i] * (row[i] * x[i] + 2.0 * off);
    }
    total
}

/// `x^T A x` for a dense symmetric `A`.
pub fn qform(x: &[f64], a: &SymMatrix) -> Result<f64> {
    if x.len() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: x.len(),
        });
    }
    Ok(sym_qform(a, x))
}

/// A test matrix with its class and the norms the bounds need.
#[derive(Debug, Clone)]
pub struct MatrixCase {
    pub kind: MatrixKind,
    pub generator: MatrixGenerator,
    pub operator: Operator,
    pub spectral_norm: f64,
    pub tr_aat: f64,
}

impl MatrixCase {
    pub fn identity(p: usize) -> Self {
        Self {
            kind: MatrixKind::Diagonal,
            generator: MatrixGenerator::Identity,
            operator: Operator::Identity(p),
            spectral_norm: 1.0,
            tr_aat: p as f64,
        }
    }

    /// Symmetric `+-1` blocks with zero diagonal, scaled to spectral norm 1.
    pub fn zero_diag_signs(p: usize, stream: &RngStream, block: usize) -> Result<Self> {
        let mut rng = stream.rng();
        let (perm, sizes) = permuted_blocks(p, block, &mut rng);
        let mut blocks: Vec<SymMatrix> = sizes
            .iter()
            .map(|&b| {
                let mut m = SymMatrix::zeros(b);
                for i in 0..b {
                    for j in (i + 1)..b {
                        let v = if rand::Rng::random::<bool>(&mut rng) { 1.0 } else { -1.0 };
                        m.set_sym(i, j, v);
                    }
                }
                m
            })
            .collect();
        let norm = Operator::PermutedBlocks {
            dim: p,
            perm: perm.clone(),
            blocks: blocks.clone(),
        }
        .spectral_norm()?;
        if norm > 0.0 {
            for b in &mut blocks {
                b.scale(1.0 / norm);
            }
        }
        Self::from_operator(
            Operator::PermutedBlocks { dim: p, perm, blocks },
            MatrixKind::ZeroDiagonal,
            MatrixGenerator::RandomSigns,
        )
    }

    /// Orthogonal projection of rank `round(rank_fraction * block)` on each
    /// block, from Gram–Schmidt on Gaussian columns.
    pub fn projection(p: usize, rank_fraction: f64, stream: &RngStream, block: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&rank_fraction) {
            return Err(Error::invalid(format!("rank fraction must lie in [0, 1], got {rank_fraction}")));
        }
        let mut rng = stream.rng();
        let (perm, sizes) = permuted_blocks(p, block, &mut rng);
        let blocks = sizes
            .iter()
            .map(|&b| random_projection(b, (rank_fraction * b as f64).round() as usize, &mut rng))
            .collect();
        Self::from_operator(
            Operator::PermutedBlocks { dim: p, perm, blocks },
            MatrixKind::Arbitrary,
            MatrixGenerator::RandomOrthogonalProjection { rank_fraction },
        )
    }

    /// Wrap a dense matrix, classifying it; `A = 0` counts as diagonal.
    pub fn custom(a: SymMatrix) -> Result<Self> {
        if let Some((row, col)) = a.asymmetry() {
            return Err(Error::NotSymmetric { row, col });
        }
        let p = a.dim();
        let off_zero = (0..p).all(|i| (0..p).all(|j| i == j || a.get(i, j) == 0.0));
        let diag_zero = (0..p).all(|i| a.get(i, i) == 0.0);
        let kind = if off_zero {
            MatrixKind::Diagonal
        } else if diag_zero {
            MatrixKind::ZeroDiagonal
        } else {
            MatrixKind::Arbitrary
        };
        Self::from_operator(Operator::Dense(a), kind, MatrixGenerator::Custom)
    }

    fn from_operator(operator: Operator, kind: MatrixKind, generator: MatrixGenerator) -> Result<Self> {
        Ok(Self {
            kind,
            generator,
            spectral_norm: operator.spectral_norm()?,
            tr_aat: operator.tr_aat(),
            operator,
        })
    }

    pub fn dim(&self) -> usize {
        self.operator.dim()
    }
}

fn permuted_blocks<R: rand::Rng>(p: usize, block: usize, rng: &mut R) -> (Vec<usize>, Vec<usize>) {
    let block = block.max(1);
    let mut perm: Vec<usize> = (0..p).collect();
    perm.shuffle(rng);
    let mut sizes = vec![block; p / block];
    if p % block != 0 {
        sizes.push(p % block);
    }
    (perm, sizes)
}

fn random_projection<R: rand::Rng>(dim: usize, rank: usize, rng: &mut R) -> SymMatrix {
    use rand_distr::{Distribution, StandardNormal};
    let rank = rank.min(dim);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(rank);
    while basis.len() < rank {
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        // two passes of modified Gram–Schmidt
        for _ in 0..2 {
            for q in &basis {
                let c: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= c * qi;
                }
            }
        }
        let norm = v.iter().map(|t| t * t).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|t| *t /= norm);
            basis.push(v);
        }
    }
    let mut m = SymMatrix::zeros(dim);
    for i in 0..dim {
        for j in i..dim {
            let v: f64 = basis.iter().map(|q| q[i] * q[j]).sum();
            m.set_sym(i, j, v);
        }
    }
    m
}

/// Monte Carlo variance with a batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarEstimate {
    pub point: f64,
    pub std_error: f64,
    pub reps: usize,
    pub batches: usize,
}

/// Unbiased sample variance (two-pass).
pub(crate) fn sample_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Variance estimate of `values` with standard error from the spread of
/// per-batch variances. Batches are contiguous, in order.
pub fn batch_variance(values: &[f64], batches: usize) -> Result<VarEstimate> {
    let reps = values.len();
    if batches < 2 || reps % batches != 0 || reps / batches < 2 {
        return Err(Error::invalid(format!(
            "{reps} replicates cannot be split into {batches} equal batches of size >= 2"
        )));
    }
    let per = reps / batches;
    let batch_vars: Vec<f64> = values.chunks(per).map(sample_variance).collect();
    Ok(VarEstimate {
        point: sample_variance(values),
        std_error: (sample_variance(&batch_vars) / batches as f64).sqrt(),
        reps,
        batches,
    })
}

/// Monte Carlo `var(x^T A x)` over `reps` tensor samples; sample `r` uses
/// `stream.substream(r)`.
pub fn mc_variance(
    spec: &TensorModelSpec,
    a: &Operator,
    reps: usize,
    stream: &RngStream,
    batches: usize,
) -> Result<VarEstimate> {
    if reps < 100 {
        return Err(Error::invalid(format!("mc_variance needs reps >= 100, got {reps}")));
    }
    if spec.p != a.dim() as u128 {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: spec.p as usize,
        });
    }
    let values: Vec<f64> = (0..reps)
        .into_par_iter()
        .map_init(Vec::new, |buf, r| {
            sample_tensor(spec, stream, r as u64, buf);
            a.qform(buf).expect("dimension checked")
        })
        .collect();
    batch_variance(&values, batches)
}

fn checked_fourth_moment(spec: &TensorModelSpec) -> Result<f64> {
    spec.dist
        .fourth_moment()
        .ok_or_else(|| Error::InfiniteMoment(spec.dist.to_string()))
}

/// Exact `var(x^T x) = sum_{i,j} (K^{|i cap j|} - 1)` over pairs of
/// `d`-subsets, summed over the overlap census `C(n,d) C(d,t) C(n-d,d-t)`.
pub fn exact_variance_diag_oracle(spec: &TensorModelSpec) -> Result<f64> {
    if spec.p > EXACT_ORACLE_MAX_P {
        return Err(Error::ResourceCap {
            what: "p for the exact variance".into(),
            size: spec.p,
            cap: EXACT_ORACLE_MAX_P,
        });
    }
    let k = checked_fourth_moment(spec)?;
    let (n, d) = (spec.n, spec.d);
    let mut total = 0.0;
    for t in 1..=d {
        let pairs = binomial_or_zero(d, t)? * binomial_or_zero(n - d, d - t)?;
        total += pairs as f64 * (k.powi(t as i32) - 1.0);
    }
    Ok(spec.p as f64 * total)
}

fn binomial_or_zero(a: usize, b: usize) -> Result<BigCount> {
    if b > a {
        Ok(0)
    } else {
        binomial(a, b)
    }
}

/// Variance upper bound `p tr(A A^T) * factor(kind)`:
///
/// * diagonal: `(1 + K d/n)^d - 1`
/// * zero diagonal: `(1 + 2K d/n)^d (16 d/n) min(d, 8)`, needs `n >= 16 d`
/// * arbitrary: `64 K d^2 / n`, needs `2 K d^2 <= n` and `n >= 16 d`
///
/// The diagonal bound only uses `d <= n`, so no `n >= 16 d` check is made there.
pub fn bound_theorem2(kind: MatrixKind, p: f64, tr_aat: f64, k: f64, d: usize, n: usize) -> Result<f64> {
    if !(k >= 1.0 && k.is_finite()) {
        return Err(Error::Hypothesis(format!("K >= 1 violated (K = {k})")));
    }
    if d == 0 || d > n {
        return Err(Error::Hypothesis(format!("1 <= d <= n violated (d = {d}, n = {n})")));
    }
    let (df, nf) = (d as f64, n as f64);
    let need_16d = || {
        if n < 16 * d {
            Err(Error::Hypothesis(format!("n >= 16d violated ({n} < {})", 16 * d)))
        } else {
            Ok(())
        }
    };
    let factor = match kind {
        MatrixKind::Diagonal => (df * (k * df / nf).ln_1p()).exp_m1(),
        MatrixKind::ZeroDiagonal => {
            need_16d()?;
            (df * (2.0 * k * df / nf).ln_1p()).exp() * (16.0 * df / nf) * df.min(8.0)
        }
        MatrixKind::Arbitrary => {
            let lhs = 2.0 * k * df * df;
            if lhs > nf {
                return Err(Error::Hypothesis(format!("2K d² ≤ n violated ({lhs} > {n})")));
            }
            need_16d()?;
            64.0 * k * df * df / nf
        }
    };
    Ok(p * tr_aat * factor)
}

/// Hoeffding's lower bound `var(x^T x) >= p^2 (K - 1) d^2 / n` for i.i.d. entries.
pub fn hoeffding_lower(p: f64, k: f64, d: usize, n: usize) -> Result<f64> {
    if !(k >= 1.0 && k.is_finite()) {
        return Err(Error::Hypothesis(format!("K >= 1 finite violated (K = {k})")));
    }
    Ok(p * p * (k - 1.0) * (d * d) as f64 / n as f64)
}

/// `[c1, c2, c3, c4]`: how many elements are covered by exactly `c` of the
/// four sorted slices.
fn coverage(sets: [&[usize]; 4]) -> [usize; 4] {
    let mut pos = [0usize; 4];
    let mut hist = [0usize; 4];
    loop {
        let mut m = usize::MAX;
        for s in 0..4 {
            if let Some(&v) = sets[s].get(pos[s]) {
                m = m.min(v);
            }
        }
        if m == usize::MAX {
            return hist;
        }
        let mut c = 0;
        for s in 0..4 {
            if sets[s].get(pos[s]) == Some(&m) {
                pos[s] += 1;
                c += 1;
            }
        }
        hist[c - 1] += 1;
    }
}

/// Coverage histogram `(|Lambda_1|, .., |Lambda_4|)` of four subsets.
pub fn lambda_counts(i: &SubsetIndex, j: &SubsetIndex, k: &SubsetIndex, l: &SubsetIndex) -> Result<[usize; 4]> {
    let n = i.n();
    if [j.n(), k.n(), l.n()].iter().any(|&m| m != n) {
        return Err(Error::invalid("lambda_counts needs four subsets of the same ground set"));
    }
    Ok(coverage([i.elements(), j.elements(), k.elements(), l.elements()]))
}

fn overlap(a: &[usize], b: &[usize]) -> usize {
    let (mut x, mut y, mut c) = (0, 0, 0);
    while x < a.len() && y < b.len() {
        match a[x].cmp(&b[y]) {
            std::cmp::Ordering::Less => x += 1,
            std::cmp::Ordering::Greater => y += 1,
            std::cmp::Ordering::Equal => {
                c += 1;
                x += 1;
                y += 1;
            }
        }
    }
    c
}

fn check_gamma_args(n: usize, d: usize, t: usize) -> Result<()> {
    if !(t < d && d <= n) {
        return Err(Error::invalid(format!("gamma needs 0 <= t < d <= n, got n={n}, d={d}, t={t}")));
    }
    if 2 * d - t > n {
        return Err(Error::invalid(format!(
            "no pair of {d}-subsets of [{n}] overlaps in exactly {t} elements (2d - t > n)"
        )));
    }
    Ok(())
}

/// Lexicographically smallest `(i0, j0)` with `|i0 cap j0| = t`.
pub fn gamma_base_pair(n: usize, d: usize, t: usize) -> Result<(SubsetIndex, SubsetIndex)> {
    check_gamma_args(n, d, t)?;
    let i0 = SubsetIndex::new(n, (0..d).collect())?;
    let j0 = SubsetIndex::new(n, (0..t).chain(d..2 * d - t).collect())?;
    Ok((i0, j0))
}

/// `gamma(s, t)` by enumeration over all `(k, l)` against the smallest base pair.
pub fn gamma_brute(n: usize, d: usize, s: usize, t: usize) -> Result<BigCount> {
    let (i0, j0) = gamma_base_pair(n, d, t)?;
    gamma_brute_from(&i0, &j0, s, t)
}

/// `gamma(s, t)` counted against a given base pair with `|i0 cap j0| = t`:
/// pairs `(k, l)` with `|k cap l| = t`, no singly-covered element and
/// `|Lambda_3|/2 + |Lambda_4| = s`.
pub fn gamma_brute_from(i0: &SubsetIndex, j0: &SubsetIndex, s: usize, t: usize) -> Result<BigCount> {
    let (n, d) = (i0.n(), i0.d());
    if j0.n() != n || j0.d() != d {
        return Err(Error::invalid("base pair must be two d-subsets of the same ground set"));
    }
    check_gamma_args(n, d, t)?;
    if i0.overlap(j0) != t {
        return Err(Error::invalid(format!("base pair overlaps in {} elements, not {t}", i0.overlap(j0))));
    }
    let count = binomial(n, d)?;
    let pairs = count.saturating_mul(count);
    if pairs > GAMMA_BRUTE_MAX_PAIRS {
        return Err(Error::ResourceCap {
            what: format!("C({n},{d})^2 subset pairs"),
            size: pairs,
            cap: GAMMA_BRUTE_MAX_PAIRS,
        });
    }
    if s > t {
        return Ok(0);
    }
    let subsets: Vec<Vec<usize>> = enumerate(n, d).map(|x| x.elements().to_vec()).collect();
    let total: u64 = subsets
        .par_iter()
        .map(|k| {
            let mut c = 0u64;
            for l in &subsets {
                if overlap(k, l) != t {
                    continue;
                }
                let h = coverage([i0.elements(), j0.elements(), k, l]);
                if h[0] == 0 && h[2] % 2 == 0 && h[2] / 2 + h[3] == s {
                    c += 1;
                }
            }
            c
        })
        .sum();
    Ok(total as BigCount)
}

/// Closed form
/// `gamma(s,t) = sum_{r=0..s} C(t,r) C(2(d-t),s-r) C(t-r,s-r) C(n-2d+t,t-s) C(2(d-t),d-t)`
/// for `s <= t`, and 0 for `s > t`.
pub fn gamma_exact(n: usize, d: usize, s: usize, t: usize) -> Result<BigCount> {
    check_gamma_args(n, d, t)?;
    if s > t {
        return Ok(0);
    }
    let overflow = || Error::Overflow(format!("gamma({s},{t}) for n={n}, d={d}"));
    let outer = binomial_or_zero(n + t - 2 * d, t - s)?
        .checked_mul(binomial_or_zero(2 * (d - t), d - t)?)
        .ok_or_else(overflow)?;
    let mut inner: BigCount = 0;
    for r in 0..=s {
        let term = binomial_or_zero(t, r)?
            .checked_mul(binomial_or_zero(2 * (d - t), s - r)?)
            .and_then(|v| v.checked_mul(binomial_or_zero(t - r, s - r).ok()?))
            .ok_or_else(overflow)?;
        inner = inner.checked_add(term).ok_or_else(overflow)?;
    }
    inner.checked_mul(outer).ok_or_else(overflow)
}

/// Upper bound `2^{4(d-t)} C(n,d) C(t,s) 2^s (d/n)^{d-(t-s)}` for `s <= t`, else 0.
pub fn gamma_bound(n: usize, d: usize, s: usize, t: usize) -> Result<f64> {
    if !(t < d && d <= n) {
        return Err(Error::invalid(format!("gamma_bound needs 0 <= t < d <= n, got n={n}, d={d}, t={t}")));
    }
    if s > t {
        return Ok(0.0);
    }
    let ln2 = std::f64::consts::LN_2;
    let ln = (4 * (d - t)) as f64 * ln2
        + ln_binomial(n, d)?
        + ln_binomial(t, s)?
        + s as f64 * ln2
        + (d - (t - s)) as f64 * (d as f64 / n as f64).ln();
    Ok(ln.exp())
}
