//! Elementary symmetric polynomials `S_n^{(k)}(Z) = sum_{i_1<..<i_k} Z_{i_1}..Z_{i_k}`
//! of nonnegative inputs, evaluated in the log domain, and the saddle-point
//! approximation of `ln(S_n^{(d)} / C(n, d))`.

use std::cmp::Ordering;
use std::ops::{Add, Mul};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::index_space::{binomial, enumerate, ln_binomial};

/// Largest enumeration accepted by [`esp_brute`].
pub const BRUTE_MAX_SUBSETS: u128 = 1_000_000;

/// A real number stored as `sign * exp(ln)`. `sign == 0` iff the value is exactly 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogValue {
    pub ln: f64,
    pub sign: i8,
}

impl LogValue {
    pub const ZERO: LogValue = LogValue {
        ln: f64::NEG_INFINITY,
        sign: 0,
    };
    pub const ONE: LogValue = LogValue { ln: 0.0, sign: 1 };

    pub fn from_ln(ln: f64) -> Self {
        if ln == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            Self { ln, sign: 1 }
        }
    }

    pub fn from_f64(x: f64) -> Self {
        match x.partial_cmp(&0.0) {
            Some(Ordering::Greater) => Self { ln: x.ln(), sign: 1 },
            Some(Ordering::Less) => Self {
                ln: (-x).ln(),
                sign: -1,
            },
            _ => Self::ZERO,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    /// The value as `f64`; may overflow to infinity or underflow to zero.
    pub fn value(&self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => f64::from(s) * self.ln.exp(),
        }
    }

    /// `self / other` for `other != 0`.
    pub fn div(self, other: LogValue) -> LogValue {
        assert!(!other.is_zero(), "division by a zero LogValue");
        if self.is_zero() {
            return Self::ZERO;
        }
        Self {
            ln: self.ln - other.ln,
            sign: self.sign * other.sign,
        }
    }
}

impl Mul for LogValue {
    type Output = LogValue;

    fn mul(self, rhs: LogValue) -> LogValue {
        if self.is_zero() || rhs.is_zero() {
            return Self::ZERO;
        }
        Self {
            ln: self.ln + rhs.ln,
            sign: self.sign * rhs.sign,
        }
    }
}

impl Add for LogValue {
    type Output = LogValue;

    fn add(self, rhs: LogValue) -> LogValue {
        if self.is_zero() {
            return rhs;
        }
        if rhs.is_zero() {
            return self;
        }
        let (big, small) = if self.ln >= rhs.ln { (self, rhs) } else { (rhs, self) };
        let r = (small.ln - big.ln).exp();
        if big.sign == small.sign {
            Self {
                ln: big.ln + r.ln_1p(),
                sign: big.sign,
            }
        } else if r == 1.0 {
            Self::ZERO
        } else {
            Self {
                ln: big.ln + (-r).ln_1p(),
                sign: big.sign,
            }
        }
    }
}

fn check_nonnegative(z: &[f64]) -> Result<()> {
    for (index, &value) in z.iter().enumerate() {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::NegativeEntry { index, value });
        }
    }
    Ok(())
}

/// Product of two truncated polynomials with log-stored coefficients.
fn log_convolve(a: &[f64], b: &[f64], max_len: usize) -> Vec<f64> {
    let len = (a.len() + b.len() - 1).min(max_len);
    let mut out = Vec::with_capacity(len);
    let mut terms = Vec::with_capacity(a.len().min(b.len()));
    for k in 0..len {
        terms.clear();
        let j_lo = k.saturating_sub(b.len() - 1);
        let j_hi = k.min(a.len() - 1);
        let mut m = f64::NEG_INFINITY;
        for j in j_lo..=j_hi {
            let t = a[j] + b[k - j];
            if t > f64::NEG_INFINITY {
                m = m.max(t);
                terms.push(t);
            }
        }
        if terms.is_empty() {
            out.push(f64::NEG_INFINITY);
        } else {
            let s: f64 = terms.iter().map(|t| (t - m).exp()).sum();
            out.push(m + s.ln());
        }
    }
    out
}

const PAR_LEVEL_MIN: usize = 256;

/// `S_n^{(0)} = 1, .., S_n^{(d)}` for nonnegative `Z`.
///
/// The polynomials `1 + Z_k t` are multiplied over a balanced binary tree,
/// truncating at degree `d`. Every coefficient is carried as its own natural
/// log, so values far outside the `f64` range are represented without loss.
/// The tree shape depends only on `n`, which keeps results reproducible when
/// sibling nodes are evaluated in parallel.
pub fn esp_all(z: &[f64], d: usize) -> Result<Vec<LogValue>> {
    let n = z.len();
    if d > n {
        return Err(Error::invalid(format!("esp needs d <= n, got n={n}, d={d}")));
    }
    check_nonnegative(z)?;
    if n == 0 {
        return Ok(vec![LogValue::ONE]);
    }
    let max_len = d + 1;
    let mut level: Vec<Vec<f64>> = z
        .iter()
        .map(|&v| {
            let mut c = vec![0.0, v.ln()];
            c.truncate(max_len);
            c
        })
        .collect();
    while level.len() > 1 {
        let mul_pair = |pair: &[Vec<f64>]| -> Vec<f64> {
            match pair {
                [a, b] => log_convolve(a, b, max_len),
                [a] => a.clone(),
                _ => unreachable!(),
            }
        };
        level = if level.len() >= PAR_LEVEL_MIN {
            level.par_chunks(2).map(mul_pair).collect()
        } else {
            level.chunks(2).map(mul_pair).collect()
        };
    }
    let root = level.pop().expect("non-empty tree");
    let mut out: Vec<LogValue> = root.into_iter().map(LogValue::from_ln).collect();
    out.resize(max_len, LogValue::ZERO);
    Ok(out)
}

/// `S_n^{(d)}` alone.
pub fn esp(z: &[f64], d: usize) -> Result<LogValue> {
    Ok(esp_all(z, d)?[d])
}

/// `U_n^{(d)} = S_n^{(d)} / C(n, d)` in the log domain.
pub fn log_ustat(z: &[f64], d: usize) -> Result<LogValue> {
    let s = esp(z, d)?;
    if s.is_zero() {
        return Ok(LogValue::ZERO);
    }
    Ok(LogValue {
        ln: s.ln - ln_binomial(z.len(), d)?,
        sign: s.sign,
    })
}

/// Slack for [`maclaurin_check`], in log units.
pub const MACLAURIN_SLACK: f64 = 1e-12;

/// Checks `(S_n^{(d)}/C(n,d))^{1/d} <= S_n / n` in the log domain.
pub fn maclaurin_check(z: &[f64], d: usize) -> Result<bool> {
    if d == 0 {
        return Err(Error::invalid("maclaurin_check needs d >= 1"));
    }
    let all = esp_all(z, d)?;
    let n = z.len() as f64;
    let u = all[d];
    if u.is_zero() {
        return Ok(true);
    }
    let ln_u = u.ln - ln_binomial(z.len(), d)?;
    let ln_mean = all[1].ln - n.ln();
    Ok(ln_u / d as f64 <= ln_mean + MACLAURIN_SLACK)
}

/// `d (S_n / n - 1)`.
pub fn centered_mean(z: &[f64], d: usize) -> f64 {
    let n = z.len() as f64;
    d as f64 * (neumaier_sum(z.iter().copied()) / n - 1.0)
}

/// Plug-in versions of `d E Z 1(dZ > n)` and `(d^2/n) E Z^2 1(dZ <= n)`.
pub fn empirical_condition_terms(z: &[f64], d: usize) -> (f64, f64) {
    let n = z.len() as f64;
    let df = d as f64;
    let tail = neumaier_sum(z.iter().filter(|&&v| df * v > n).copied()) / n;
    let body = neumaier_sum(z.iter().filter(|&&v| df * v <= n).map(|v| v * v)) / n;
    (df * tail, df * df / n * body)
}

/// Root of `sum_k rho / (Z_k + rho) = n - d`, or the fallback `rho = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SaddleResult {
    pub rho: f64,
    pub satisfied_equation: bool,
    /// `sum_k rho/(Z_k+rho) - (n-d)` at the returned `rho`.
    pub residual: f64,
}

fn saddle_lhs(z: &[f64], rho: f64) -> f64 {
    neumaier_sum(z.iter().map(|&v| rho / (v + rho)))
}

fn saddle_slope(z: &[f64], rho: f64) -> f64 {
    z.iter().map(|&v| v / ((v + rho) * (v + rho))).sum()
}

/// Solve `sum_k rho/(Z_k+rho) = n-d` for `rho > 0`.
///
/// The left side increases strictly from `#{k: Z_k = 0}` (as `rho -> 0`) to
/// `n` (as `rho -> inf`), so a root exists iff the zero count is below `n-d`.
/// Without a root the result is `rho = 1` with `satisfied_equation = false`.
pub fn solve_rho(z: &[f64], d: usize) -> Result<SaddleResult> {
    let n = z.len();
    if d == 0 || d >= n {
        return Err(Error::invalid(format!("solve_rho needs 1 <= d < n, got n={n}, d={d}")));
    }
    check_nonnegative(z)?;
    let target = (n - d) as f64;
    let zeros = z.iter().filter(|&&v| v == 0.0).count();
    if zeros >= n - d {
        return Ok(SaddleResult {
            rho: 1.0,
            satisfied_equation: false,
            residual: saddle_lhs(z, 1.0) - target,
        });
    }
    let f = |rho: f64| saddle_lhs(z, rho) - target;

    let (mut lo, mut hi) = (1.0f64, 1.0f64);
    let f1 = f(1.0);
    if f1 == 0.0 {
        return Ok(SaddleResult {
            rho: 1.0,
            satisfied_equation: true,
            residual: 0.0,
        });
    }
    let mut guard = 0;
    if f1 < 0.0 {
        while f(hi) < 0.0 {
            lo = hi;
            hi *= 2.0;
            guard += 1;
            if guard > 2100 {
                return Err(Error::NoConvergence { index: 0, iterations: guard });
            }
        }
    } else {
        while f(lo) > 0.0 {
            hi = lo;
            lo *= 0.5;
            guard += 1;
            if guard > 2100 || lo == 0.0 {
                return Err(Error::NoConvergence { index: 0, iterations: guard });
            }
        }
    }

    // Safeguarded Newton on [lo, hi] with f(lo) <= 0 <= f(hi).
    let mut rho = (lo * hi).sqrt();
    for _ in 0..500 {
        let fr = f(rho);
        if fr == 0.0 {
            lo = rho;
            hi = rho;
            break;
        }
        if fr < 0.0 {
            lo = rho;
        } else {
            hi = rho;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
        let slope = saddle_slope(z, rho);
        let newton = rho - fr / slope;
        rho = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else if hi / lo > 4.0 {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
    }
    // pick whichever end of the final bracket has the smaller residual
    let candidates = [rho, lo, hi];
    let (rho, residual) = candidates
        .iter()
        .map(|&r| (r, f(r)))
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .expect("three candidates");
    Ok(SaddleResult {
        rho,
        satisfied_equation: true,
        residual,
    })
}

/// Saddle-point approximation
/// `ln U_n^{(d)} ~ sum_k ln(Z_k/rho + 1) - d + d ln(rho d / n)`.
pub fn asymptotic_log_ustat(z: &[f64], d: usize) -> Result<f64> {
    let saddle = solve_rho(z, d)?;
    if !saddle.satisfied_equation {
        return Err(Error::NotApplicable(
            "the saddle-point equation has no root for this Z (too many zeros); \
             the asymptotic formula does not apply"
                .into(),
        ));
    }
    Ok(asymptotic_log_ustat_at(z, d, saddle.rho))
}

pub(crate) fn asymptotic_log_ustat_at(z: &[f64], d: usize, rho: f64) -> f64 {
    let n = z.len() as f64;
    let df = d as f64;
    neumaier_sum(z.iter().map(|&v| (v / rho).ln_1p())) - df + df * (rho * df / n).ln()
}

/// Direct enumeration of `S_n^{(d)}` over all `d`-subsets, compensated summation.
pub fn esp_brute(z: &[f64], d: usize) -> Result<f64> {
    let n = z.len();
    let count = binomial(n, d)?;
    if count > BRUTE_MAX_SUBSETS {
        return Err(Error::ResourceCap {
            what: format!("C({n},{d}) subsets"),
            size: count,
            cap: BRUTE_MAX_SUBSETS,
        });
    }
    Ok(neumaier_sum(
        enumerate(n, d).map(|s| s.elements().iter().fold(1.0, |acc, &a| acc * z[a])),
    ))
}

/// Neumaier-compensated sum.
pub(crate) fn neumaier_sum(it: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in it {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
