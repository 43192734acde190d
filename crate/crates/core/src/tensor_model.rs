//! Sampling of the symmetric random tensor model.
//!
//! A base vector `X = (X_0, .., X_{n-1})` of i.i.d. standardized entries is
//! lifted to the `C(n, d)`-vector of products `prod_{a in i} X_a` over all
//! `d`-subsets `i`, in colex order. Entries are i.i.d. across `a`; laws that
//! vary with the coordinate are not modelled.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use rayon::join;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::esp;
use crate::index_space::{binomial, colex_next, unrank, BigCount};
use crate::matrix::SymMatrix;

/// Default cap on `p` for dense `p x p` storage.
pub const DEFAULT_MAX_P: usize = 4096;

/// Standardized (mean 0, variance 1) law of a single base variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EntryDistribution {
    Rademacher,
    Gaussian,
    /// `a` with probability `1/(1+a^2)`, `-1/a` otherwise.
    TwoPoint { a: f64 },
    /// Student t with `nu` degrees of freedom, divided by `sqrt(nu/(nu-2))`.
    StudentT { nu: f64 },
    /// `+-q^{-1/2}` each with probability `q/2`, else 0.
    SparseBernoulli { q: f64 },
}

impl EntryDistribution {
    pub fn two_point(a: f64) -> Result<Self> {
        if !(a > 1.0 && a.is_finite()) {
            return Err(Error::invalid(format!("two-point parameter must be > 1, got {a}")));
        }
        Ok(Self::TwoPoint { a })
    }

    pub fn student_t(nu: f64) -> Result<Self> {
        if !(nu > 2.0 && nu.is_finite()) {
            return Err(Error::invalid(format!("student-t needs nu > 2, got {nu}")));
        }
        Ok(Self::StudentT { nu })
    }

    pub fn sparse_bernoulli(q: f64) -> Result<Self> {
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::invalid(format!("sparse-bernoulli needs q in (0, 1], got {q}")));
        }
        Ok(Self::SparseBernoulli { q })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Self::Gaussian => StandardNormal.sample(rng),
            Self::TwoPoint { a } => {
                if rng.random::<f64>() < 1.0 / (1.0 + a * a) {
                    a
                } else {
                    -1.0 / a
                }
            }
            Self::StudentT { nu } => {
                let t: f64 = StudentT::new(nu).expect("validated nu").sample(rng);
                t / (nu / (nu - 2.0)).sqrt()
            }
            Self::SparseBernoulli { q } => {
                let u: f64 = rng.random();
                if u < q {
                    let v = q.sqrt().recip();
                    if u < q / 2.0 {
                        v
                    } else {
                        -v
                    }
                } else {
                    0.0
                }
            }
        }
    }

    /// Exact `E X^4`, or `None` when it is infinite.
    pub fn fourth_moment(&self) -> Option<f64> {
        match *self {
            Self::Rademacher => Some(1.0),
            Self::Gaussian => Some(3.0),
            Self::TwoPoint { a } => Some((a.powi(4) + a.powi(-2)) / (1.0 + a * a)),
            Self::StudentT { nu } => (nu > 4.0).then(|| 3.0 * (nu - 2.0) / (nu - 4.0)),
            Self::SparseBernoulli { q } => Some(1.0 / q),
        }
    }

    /// Exact `E X^3`, or `None` when it does not exist.
    pub fn third_moment(&self) -> Option<f64> {
        match *self {
            Self::Rademacher | Self::Gaussian | Self::SparseBernoulli { .. } => Some(0.0),
            Self::TwoPoint { a } => Some((a.powi(3) - a.powi(-1)) / (1.0 + a * a)),
            Self::StudentT { nu } => (nu > 3.0).then_some(0.0),
        }
    }

    /// Finite support points and probabilities, when the law is discrete.
    pub fn support(&self) -> Option<Vec<(f64, f64)>> {
        match *self {
            Self::Rademacher => Some(vec![(-1.0, 0.5), (1.0, 0.5)]),
            Self::TwoPoint { a } => {
                let w = 1.0 / (1.0 + a * a);
                Some(vec![(a, w), (-1.0 / a, 1.0 - w)])
            }
            Self::SparseBernoulli { q } => {
                let v = q.sqrt().recip();
                let mut s = vec![(v, q / 2.0), (-v, q / 2.0)];
                if q < 1.0 {
                    s.push((0.0, 1.0 - q));
                }
                Some(s)
            }
            Self::Gaussian | Self::StudentT { .. } => None,
        }
    }
}

impl fmt::Display for EntryDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Rademacher => write!(f, "rademacher"),
            Self::Gaussian => write!(f, "gaussian"),
            Self::TwoPoint { a } => write!(f, "two-point:{a}"),
            Self::StudentT { nu } => write!(f, "student-t:{nu}"),
            Self::SparseBernoulli { q } => write!(f, "sparse-bernoulli:{q}"),
        }
    }
}

fn parse_param(name: &str, param: Option<&str>) -> Result<f64> {
    let raw = param.ok_or_else(|| Error::invalid(format!("{name} needs a parameter, e.g. {name}:0.5")))?;
    raw.trim()
        .parse::<f64>()
        .map_err(|_| Error::invalid(format!("bad parameter '{raw}' for {name}")))
}

impl FromStr for EntryDistribution {
    type Err = Error;

    /// `name[:param]`: `rademacher`, `gaussian`, `two-point:a`, `student-t:nu`,
    /// `sparse-bernoulli:q`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => (n, Some(p)),
            None => (s, None),
        };
        match name.trim().to_ascii_lowercase().as_str() {
            "rademacher" => Ok(Self::Rademacher),
            "gaussian" | "normal" => Ok(Self::Gaussian),
            "two-point" | "twopoint" => Self::two_point(parse_param(name, param)?),
            "student-t" | "studentt" | "t" => Self::student_t(parse_param(name, param)?),
            "sparse-bernoulli" | "sparse" => Self::sparse_bernoulli(parse_param(name, param)?),
            other => Err(Error::invalid(format!("unknown distribution '{other}'"))),
        }
    }
}

/// Parameters `(n, d, law)` of the random tensor model; `p = C(n, d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TensorModelSpec {
    pub n: usize,
    pub d: usize,
    pub dist: EntryDistribution,
    pub p: BigCount,
}

impl TensorModelSpec {
    pub fn new(n: usize, d: usize, dist: EntryDistribution) -> Result<Self> {
        if n == 0 || d == 0 || d > n {
            return Err(Error::invalid(format!("tensor model needs 1 <= d <= n, got n={n}, d={d}")));
        }
        let p = binomial(n, d)?;
        Ok(Self { n, d, dist, p })
    }

    /// `p` as usize, subject to `cap`.
    pub fn p_capped(&self, cap: usize) -> Result<usize> {
        if self.p > cap as u128 {
            return Err(Error::ResourceCap {
                what: format!("p = C({}, {})", self.n, self.d),
                size: self.p,
                cap: cap as u128,
            });
        }
        Ok(self.p as usize)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A reproducible random stream: ChaCha keyed by `seed`, on stream `stream_id`.
///
/// Streams are counter based, so any number of them can be drawn from in any
/// order or concurrently with identical results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Child stream `index`, keyed by a hash of this stream's `(seed, stream_id)`.
    pub fn substream(&self, index: u64) -> RngStream {
        let key = splitmix64(self.seed ^ splitmix64(self.stream_id ^ 0x6A09_E667_F3BC_C908));
        RngStream::new(key, index)
    }
}

/// `n` i.i.d. draws from the spec's entry law.
pub fn sample_base(spec: &TensorModelSpec, stream: &RngStream) -> Vec<f64> {
    let mut rng = stream.rng();
    (0..spec.n).map(|_| spec.dist.sample(&mut rng)).collect()
}

/// Vectorize `X^{(x) d}`: entry at colex rank `r` is the product over `unrank(r)`.
///
/// Walks the subsets in colex order, where only the low positions change, and
/// reuses suffix products; each product is formed in descending element order
/// starting from 1.0, so results are bit-identical to [`vectorize_by_unrank`].
pub fn vectorize(x: &[f64], d: usize) -> Result<Vec<f64>> {
    let n = x.len();
    if d > n {
        return Err(Error::invalid(format!("vectorize needs d <= n, got n={n}, d={d}")));
    }
    let p = crate::index_space::binomial_usize(n, d)?;
    let mut out = Vec::with_capacity(p);
    vectorize_into(x, d, &mut out);
    Ok(out)
}

pub(crate) fn vectorize_into(x: &[f64], d: usize, out: &mut Vec<f64>) {
    out.clear();
    let n = x.len();
    let mut a: Vec<usize> = (0..d).collect();
    // suffix[j] = product of x over a[j..d]
    let mut suffix = vec![1.0f64; d + 1];
    for j in (0..d).rev() {
        suffix[j] = suffix[j + 1] * x[a[j]];
    }
    loop {
        out.push(suffix[0]);
        match colex_next(&mut a, n) {
            Some(top) => {
                for j in (0..=top).rev() {
                    suffix[j] = suffix[j + 1] * x[a[j]];
                }
            }
            None => break,
        }
    }
}

/// Reference vectorization recomputing each product from [`unrank`]; `O(p d)`.
pub fn vectorize_by_unrank(x: &[f64], d: usize) -> Result<Vec<f64>> {
    let n = x.len();
    let p = binomial(n, d)?;
    (0..p)
        .map(|r| {
            let s = unrank(r, n, d)?;
            Ok(s.elements().iter().rev().fold(1.0, |acc, &a| acc * x[a]))
        })
        .collect()
}

/// Running sum of outer products `x x^T`, upper triangle only.
#[derive(Debug, Clone, PartialEq)]
pub struct CovAccumulator {
    dim: usize,
    count: u64,
    upper: Vec<f64>,
}

impl CovAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            count: 0,
            upper: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim);
        let mut off = 0;
        for i in 0..self.dim {
            let xi = x[i];
            let row = &mut self.upper[off..off + self.dim - i];
            for (acc, &xj) in row.iter_mut().zip(&x[i..]) {
                *acc += xi * xj;
            }
            off += self.dim - i;
        }
        self.count += 1;
    }

    /// Add another partial sum. The caller fixes the merge order.
    pub fn merge(&mut self, other: &CovAccumulator) {
        assert_eq!(self.dim, other.dim, "merging accumulators of different size");
        for (a, b) in self.upper.iter_mut().zip(&other.upper) {
            *a += b;
        }
        self.count += other.count;
    }

    /// `(1/count) sum x x^T`, mirrored so the result is exactly symmetric.
    pub fn finish(&self) -> SymMatrix {
        let inv = if self.count == 0 { 0.0 } else { 1.0 / self.count as f64 };
        let scaled: Vec<f64> = self.upper.iter().map(|v| v * inv).collect();
        SymMatrix::from_packed_upper(self.dim, &scaled)
    }
}

/// Vectorized tensor sample `k` of the stream.
pub fn sample_tensor(spec: &TensorModelSpec, stream: &RngStream, k: u64, buf: &mut Vec<f64>) {
    let x = sample_base(spec, &stream.substream(k));
    vectorize_into(&x, spec.d, buf);
}

/// Sample covariance `(1/N) sum_k x_k x_k^T` over `n_samples` tensor samples.
///
/// Sample `k` draws from `stream.substream(k)`. Partial sums are reduced over
/// a binary tree whose shape depends only on `(n_samples)`, so the result is
/// bit-identical for any thread count.
pub fn sample_covariance(
    spec: &TensorModelSpec,
    n_samples: usize,
    stream: &RngStream,
    max_p: usize,
) -> Result<SymMatrix> {
    if n_samples == 0 {
        return Err(Error::invalid("sample covariance needs N >= 1"));
    }
    let p = spec.p_capped(max_p)?;
    let leaf = (n_samples.div_ceil(16)).max(64);
    let acc = accumulate_range(spec, stream, p, 0, n_samples, leaf);
    Ok(acc.finish())
}

fn accumulate_range(
    spec: &TensorModelSpec,
    stream: &RngStream,
    p: usize,
    lo: usize,
    hi: usize,
    leaf: usize,
) -> CovAccumulator {
    if hi - lo <= leaf {
        let mut acc = CovAccumulator::new(p);
        let mut buf = Vec::with_capacity(p);
        for k in lo..hi {
            sample_tensor(spec, stream, k as u64, &mut buf);
            acc.push(&buf);
        }
        return acc;
    }
    let mid = lo + (hi - lo) / 2;
    let (mut left, right) = join(
        || accumulate_range(spec, stream, p, lo, mid, leaf),
        || accumulate_range(spec, stream, p, mid, hi, leaf),
    );
    left.merge(&right);
    left
}

/// `(||vectorize(X, d)||^2, S_n^{(d)}(X_1^2, .., X_n^2))`.
pub fn squared_norm_identity_check(x: &[f64], d: usize) -> Result<(f64, f64)> {
    let v = vectorize(x, d)?;
    let norm2: f64 = v.iter().map(|t| t * t).sum();
    let z: Vec<f64> = x.iter().map(|t| t * t).collect();
    let s = esp::esp_all(&z, d)?;
    Ok((norm2, s[d].value()))
}
