//! Truncated-moment conditions for the tensor model: the entrywise condition
//! on `X^2` and its counterpart for a nonnegative `Z` with `E Z = 1`, both in
//! terms of a threshold `n/d`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::erf::{erf, erfc};

use crate::error::{Error, Result};
use crate::tensor_model::{EntryDistribution, RngStream};

/// Default Monte Carlo draws for truncated moments.
pub const DEFAULT_MC_REPS: usize = 1_000_000;
const DEFAULT_MC_STREAM: u64 = 0x636f_6e64;

/// Nonnegative law with unit mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ZDistribution {
    One,
    Exp,
    /// `Z = X^2` for a standardized entry law.
    Square { entry: EntryDistribution },
}

impl ZDistribution {
    pub fn square(entry: EntryDistribution) -> Self {
        Self::Square { entry }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::One => 1.0,
            Self::Exp => Exp1.sample(rng),
            Self::Square { entry } => entry.sample(rng).powi(2),
        }
    }

    /// Finite support of `Z`, merging `+-x` atoms of the entry law.
    pub fn support(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            Self::One => Some(vec![(1.0, 1.0)]),
            Self::Exp => None,
            Self::Square { entry } => {
                let mut out: Vec<(f64, f64)> = Vec::new();
                for (x, w) in entry.support()? {
                    let z = x * x;
                    match out.iter_mut().find(|(v, _)| *v == z) {
                        Some(slot) => slot.1 += w,
                        None => out.push((z, w)),
                    }
                }
                Some(out)
            }
        }
    }
}

impl fmt::Display for ZDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::One => write!(f, "one"),
            Self::Exp => write!(f, "exp"),
            Self::Square { entry } => write!(f, "square:{entry}"),
        }
    }
}

impl FromStr for ZDistribution {
    type Err = Error;

    /// `one`, `exp`, or `square:<entry law>`, e.g. `square:sparse-bernoulli:0.1`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.to_ascii_lowercase().as_str() {
            "one" | "const" | "1" => return Ok(Self::One),
            "exp" | "exponential" => return Ok(Self::Exp),
            _ => {}
        }
        match s.split_once(':') {
            Some((head, rest)) if head.eq_ignore_ascii_case("square") => Ok(Self::square(rest.parse()?)),
            _ => Err(Error::invalid(format!(
                "unknown Z law '{s}' (expected one, exp, square:<entry law>)"
            ))),
        }
    }
}

/// `E Z 1(dZ > n)`, `E Z 1(dZ <= n)` and `E Z^2 1(dZ <= n)`, with batch-mean
/// standard errors when estimated by simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncatedMoments {
    pub tail_first: f64,
    pub body_first: f64,
    pub body_second: f64,
    pub std_errors: Option<TruncatedMomentErrors>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncatedMomentErrors {
    pub tail_first: f64,
    pub body_first: f64,
    pub body_second: f64,
    /// Standard error of `tail_first + body_first`.
    pub total_first: f64,
    pub reps: usize,
    pub batches: usize,
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Closed-form truncated moments at threshold `dZ > n`, when available.
pub fn truncated_moments(z: &ZDistribution, d: usize, n: usize) -> Option<TruncatedMoments> {
    let (df, nf) = (d as f64, n as f64);
    let c = nf / df;
    let (tail_first, body_first, body_second) = match z {
        ZDistribution::Exp => {
            let e = (-c).exp();
            ((c + 1.0) * e, 1.0 - (c + 1.0) * e, 2.0 - (c * c + 2.0 * c + 2.0) * e)
        }
        ZDistribution::Square {
            entry: EntryDistribution::Gaussian,
        } => {
            let a = c.sqrt();
            let (phi, r) = (std_normal_pdf(a), a / std::f64::consts::SQRT_2);
            (
                2.0 * a * phi + erfc(r),
                erf(r) - 2.0 * a * phi,
                3.0 * erf(r) - 2.0 * phi * (a * a * a + 3.0 * a),
            )
        }
        _ => {
            let (mut t, mut b1, mut b2) = (0.0, 0.0, 0.0);
            for (v, w) in z.support()? {
                if df * v > nf {
                    t += w * v;
                } else {
                    b1 += w * v;
                    b2 += w * v * v;
                }
            }
            (t, b1, b2)
        }
    };
    Some(TruncatedMoments {
        tail_first,
        body_first,
        body_second,
        std_errors: None,
    })
}

/// Monte Carlo settings; batch `b` draws from `stream.substream(b)`.
#[derive(Debug, Clone, Copy)]
pub struct McOptions {
    pub reps: usize,
    pub batches: usize,
    pub stream: RngStream,
}

impl Default for McOptions {
    fn default() -> Self {
        Self {
            reps: DEFAULT_MC_REPS,
            batches: 20,
            stream: RngStream::new(0, DEFAULT_MC_STREAM),
        }
    }
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let b = v.len() as f64;
    let mean = v.iter().sum::<f64>() / b;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (b - 1.0);
    (mean, (var / b).sqrt())
}

/// Simulated truncated moments.
pub fn truncated_moments_mc(z: &ZDistribution, d: usize, n: usize, opts: &McOptions) -> Result<TruncatedMoments> {
    let McOptions { reps, batches, stream } = *opts;
    if batches < 2 || reps % batches != 0 || reps / batches == 0 {
        return Err(Error::invalid(format!(
            "{reps} draws cannot be split into {batches} equal batches"
        )));
    }
    let per = reps / batches;
    let (df, nf) = (d as f64, n as f64);
    let means: Vec<[f64; 4]> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream.substream(b as u64).rng();
            let mut acc = [0.0; 4];
            for _ in 0..per {
                let v = z.sample(&mut rng);
                if df * v > nf {
                    acc[0] += v;
                } else {
                    acc[1] += v;
                    acc[2] += v * v;
                }
                acc[3] += v;
            }
            acc.map(|s| s / per as f64)
        })
        .collect();
    let col = |k: usize| mean_and_se(&means.iter().map(|m| m[k]).collect::<Vec<_>>());
    let (t, t_se) = col(0);
    let (b1, b1_se) = col(1);
    let (b2, b2_se) = col(2);
    let (_, tot_se) = col(3);
    Ok(TruncatedMoments {
        tail_first: t,
        body_first: b1,
        body_second: b2,
        std_errors: Some(TruncatedMomentErrors {
            tail_first: t_se,
            body_first: b1_se,
            body_second: b2_se,
            total_first: tot_se,
            reps,
            batches,
        }),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    Analytic,
    MonteCarlo {
        reps: usize,
        std_error_tail: f64,
        std_error_fourth: f64,
    },
}

/// `d E Z 1(dZ > n)` and `(d^2/n) E Z^2 1(dZ <= n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionReport {
    pub n: usize,
    pub d: usize,
    pub term_truncated_tail: f64,
    pub term_truncated_fourth: f64,
    pub method: Method,
}

fn check_dn(d: usize, n: usize) -> Result<()> {
    if d == 0 || d > n {
        return Err(Error::invalid(format!("condition needs 1 <= d <= n, got d={d}, n={n}")));
    }
    Ok(())
}

fn report(m: &TruncatedMoments, d: usize, n: usize) -> ConditionReport {
    let (df, nf) = (d as f64, n as f64);
    let w = df * df / nf;
    let method = match m.std_errors {
        None => Method::Analytic,
        Some(e) => Method::MonteCarlo {
            reps: e.reps,
            std_error_tail: df * e.tail_first,
            std_error_fourth: w * e.body_second,
        },
    };
    ConditionReport {
        n,
        d,
        term_truncated_tail: df * m.tail_first,
        term_truncated_fourth: w * m.body_second,
        method,
    }
}

/// Condition terms for `Z`: closed form when available, simulation otherwise.
pub fn condition_thm4_with(z: &ZDistribution, d: usize, n: usize, opts: &McOptions) -> Result<ConditionReport> {
    check_dn(d, n)?;
    let m = match truncated_moments(z, d, n) {
        Some(m) => m,
        None => truncated_moments_mc(z, d, n, opts)?,
    };
    Ok(report(&m, d, n))
}

pub fn condition_thm4(z: &ZDistribution, d: usize, n: usize) -> Result<ConditionReport> {
    condition_thm4_with(z, d, n, &McOptions::default())
}

/// Condition terms for `Z`, always simulated.
pub fn condition_thm4_mc(z: &ZDistribution, d: usize, n: usize, opts: &McOptions) -> Result<ConditionReport> {
    check_dn(d, n)?;
    Ok(report(&truncated_moments_mc(z, d, n, opts)?, d, n))
}

/// Entrywise terms `d E X^2 1(dX^2 > n)` and `(d^2/n) E X^4 1(dX^2 <= n)`.
pub fn condition14(dist: EntryDistribution, d: usize, n: usize) -> Result<ConditionReport> {
    condition_thm4(&ZDistribution::square(dist), d, n)
}

pub fn condition14_with(dist: EntryDistribution, d: usize, n: usize, opts: &McOptions) -> Result<ConditionReport> {
    condition_thm4_with(&ZDistribution::square(dist), d, n, opts)
}

pub fn condition14_mc(dist: EntryDistribution, d: usize, n: usize, opts: &McOptions) -> Result<ConditionReport> {
    condition_thm4_mc(&ZDistribution::square(dist), d, n, opts)
}

/// `d` as a function of `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DRule {
    /// `floor(c * n^a)`
    Power { c: f64, a: f64 },
    /// `floor(c * sqrt(n) / ln n)`
    SqrtOverLog { c: f64 },
    Const { k: usize },
}

impl DRule {
    /// `d(n)`; errors unless `1 <= d(n) <= n`.
    pub fn eval(&self, n: usize) -> Result<usize> {
        let nf = n as f64;
        let d = match *self {
            DRule::Power { c, a } => (c * nf.powf(a) + 1e-9).floor() as usize,
            DRule::SqrtOverLog { c } => (c * nf.sqrt() / nf.ln() + 1e-9).floor() as usize,
            DRule::Const { k } => k,
        };
        if d == 0 || d > n {
            return Err(Error::invalid(format!("d-rule {self} gives d={d} at n={n}, outside [1, n]")));
        }
        Ok(d)
    }
}

impl fmt::Display for DRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DRule::Power { c, a } if c == 1.0 => write!(f, "floor(n^{a})"),
            DRule::Power { c, a } => write!(f, "floor({c}*n^{a})"),
            DRule::SqrtOverLog { c } if c == 1.0 => write!(f, "floor(sqrt(n)/ln(n))"),
            DRule::SqrtOverLog { c } => write!(f, "floor({c}*sqrt(n)/ln(n))"),
            DRule::Const { k } => write!(f, "const:{k}"),
        }
    }
}

impl FromStr for DRule {
    type Err = Error;

    /// `const:k`, `floor(n^a)`, `floor(c*n^a)`, `floor(sqrt(n))`,
    /// `floor(c*sqrt(n))`, `floor(sqrt(n)/ln(n))`, `floor(c*sqrt(n)/ln(n))`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("cannot parse d-rule '{s}'"));
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_ascii_lowercase();
        if let Some(k) = t.strip_prefix("const:") {
            return Ok(DRule::Const { k: k.parse().map_err(|_| bad())? });
        }
        let body = t
            .strip_prefix("floor(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(bad)?;
        let (c, expr) = match body.split_once('*') {
            Some((c, e)) => (c.parse::<f64>().map_err(|_| bad())?, e),
            None => (1.0, body),
        };
        if !(c > 0.0 && c.is_finite()) {
            return Err(bad());
        }
        if let Some(a) = expr.strip_prefix("n^") {
            let a = a.trim_start_matches('(').trim_end_matches(')');
            return Ok(DRule::Power { c, a: a.parse().map_err(|_| bad())? });
        }
        match expr {
            "sqrt(n)" => Ok(DRule::Power { c, a: 0.5 }),
            "sqrt(n)/ln(n)" | "sqrt(n)/log(n)" => Ok(DRule::SqrtOverLog { c }),
            _ => Err(bad()),
        }
    }
}

/// Shape of a sequence along the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    /// Identically zero.
    Zero,
    Constant,
    /// Nonincreasing with a strict overall drop.
    Decreasing,
    /// Nondecreasing with a strict overall rise.
    Increasing,
    Mixed,
}

pub fn classify_trend(v: &[f64]) -> Trend {
    if v.iter().all(|&x| x == 0.0) {
        return Trend::Zero;
    }
    let first = v[0];
    let last = v[v.len() - 1];
    if v.iter().all(|&x| (x - first).abs() <= 1e-12 * first.abs().max(1e-300)) {
        return Trend::Constant;
    }
    if v.windows(2).all(|w| w[1] <= w[0]) && last < first {
        Trend::Decreasing
    } else if v.windows(2).all(|w| w[1] >= w[0]) && last > first {
        Trend::Increasing
    } else {
        Trend::Mixed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeRow {
    pub z: ZDistribution,
    pub report: ConditionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeTable {
    pub rows: Vec<RegimeRow>,
    pub tail_trend: Trend,
    pub fourth_trend: Trend,
}

/// Both condition terms along an increasing `n_grid`, with the observed trend
/// of each. The law may depend on `n`.
pub fn regime_classifier<F>(z_of_n: F, d_rule: &DRule, n_grid: &[usize], opts: &McOptions) -> Result<RegimeTable>
where
    F: Fn(usize) -> Result<ZDistribution> + Sync,
{
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("n grid must be nonempty and strictly increasing"));
    }
    let rows = n_grid
        .par_iter()
        .map(|&n| {
            let z = z_of_n(n)?;
            let report = condition_thm4_with(&z, d_rule.eval(n)?, n, opts)?;
            Ok(RegimeRow { z, report })
        })
        .collect::<Result<Vec<_>>>()?;
    let tails: Vec<f64> = rows.iter().map(|r| r.report.term_truncated_tail).collect();
    let fourths: Vec<f64> = rows.iter().map(|r| r.report.term_truncated_fourth).collect();
    Ok(RegimeTable {
        tail_trend: classify_trend(&tails),
        fourth_trend: classify_trend(&fourths),
        rows,
    })
}
