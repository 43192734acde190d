//! The five experiments. Each returns a typed report; all randomness comes
//! from `RngStream`s derived from the seed, so output is a function of the
//! config alone.

use rayon::prelude::*;
use serde::Serialize;
use tensor_mp::concentration::{
    bound_theorem2, exact_variance_diag_oracle, gamma_bound, gamma_brute, gamma_exact, hoeffding_lower, mc_variance,
    MatrixCase, MatrixKind, VarEstimate, EXACT_ORACLE_MAX_P,
};
use tensor_mp::conditions::{regime_classifier, McOptions, RegimeTable, DEFAULT_MC_REPS};
use tensor_mp::esp::{asymptotic_log_ustat, centered_mean, empirical_condition_terms, log_ustat, maclaurin_check, solve_rho};
use tensor_mp::mp_law::{cdf, ks_distance, wasserstein1};
use tensor_mp::spectra::{eigenvalues_sym, esd_moment};
use tensor_mp::tensor_model::sample_covariance;
use tensor_mp::{Error, MpParams, Result, RngStream, TensorModelSpec};

use crate::config::{ConditionsArgs, EspLlnArgs, GammaArgs, MatrixSpec, MpEsdArgs, QformVarArgs};
use crate::report::{median, Quartiles, Report};

/// Stream ids under the run seed.
const STREAM_MATRICES: u64 = 1 << 32;
const STREAM_CONDITIONS: u64 = (1 << 32) + 1;

/// Histogram bins for `mp-esd`.
pub const HIST_BINS: usize = 100;
/// Below this `p` the ESD has too few atoms for a meaningful distance.
pub const SMALL_P_WARNING: usize = 30;

#[derive(Debug, Clone, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    /// Eigenvalue counts per bin; rounding-level negatives fall in bin 0.
    pub counts: Vec<usize>,
    /// Eigenvalues above `hi`.
    pub overflow: usize,
    /// Marchenko–Pastur probability of each bin.
    pub mp_mass: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MpEsdReplicate {
    pub replicate: usize,
    pub ks: f64,
    pub w1: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// ESD moments 1..3 against the Marchenko–Pastur values `1, 1+rho, 1+3rho+rho^2`.
    pub moments: [f64; 3],
    pub mp_moments: [f64; 3],
    pub histogram: Histogram,
}

#[derive(Debug, Clone, Serialize)]
pub struct MpEsdResult {
    pub p: usize,
    pub rho: f64,
    pub a_minus: f64,
    pub a_plus: f64,
    pub atom_mass: f64,
    pub small_p_warning: bool,
    pub ks_median: f64,
    pub w1_median: f64,
    pub replicates: Vec<MpEsdReplicate>,
}

fn histogram(eigs: &[f64], mp: &MpParams) -> Histogram {
    let hi = 1.2 * mp.a_plus;
    let width = hi / HIST_BINS as f64;
    let mut counts = vec![0usize; HIST_BINS];
    let mut overflow = 0;
    for &x in eigs {
        if x > hi {
            overflow += 1;
        } else {
            counts[((x / width).floor().max(0.0) as usize).min(HIST_BINS - 1)] += 1;
        }
    }
    let mp_mass = (0..HIST_BINS)
        .map(|b| {
            let l = b as f64 * width;
            let lower = if b == 0 { 0.0 } else { cdf(l, mp) };
            cdf(l + width, mp) - lower
        })
        .collect();
    Histogram {
        lo: 0.0,
        hi,
        counts,
        overflow,
        mp_mass,
    }
}

/// Replicate `r` uses stream `(seed, r)`.
pub fn run_mp_esd(cfg: &MpEsdArgs) -> Result<Report<MpEsdArgs, MpEsdResult>> {
    let spec = TensorModelSpec::new(cfg.n, cfg.d, cfg.dist)?;
    let p = spec.p_capped(cfg.common.max_p)?;
    if cfg.samples == 0 {
        return Err(Error::InvalidArgument("N must be >= 1".into()));
    }
    let reps = cfg.common.reps.unwrap_or(1);
    if reps == 0 {
        return Err(Error::InvalidArgument("reps must be >= 1".into()));
    }
    let rho = p as f64 / cfg.samples as f64;
    let mp = MpParams::new(rho)?;
    let mut warnings = Vec::new();
    let small = p < SMALL_P_WARNING;
    if small {
        warnings.push(format!(
            "p = {p} < {SMALL_P_WARNING}: the ESD has only {p} atoms, so distances to the continuous law are coarse"
        ));
    }
    let mp_moments = [1.0, 1.0 + rho, 1.0 + 3.0 * rho + rho * rho];
    let replicates = (0..reps)
        .map(|r| {
            let cov = sample_covariance(&spec, cfg.samples, &RngStream::new(cfg.common.seed, r as u64), p)?;
            let esd = eigenvalues_sym(&cov)?;
            Ok(MpEsdReplicate {
                replicate: r,
                ks: ks_distance(&esd, &mp),
                w1: wasserstein1(&esd, &mp),
                min_eigenvalue: esd.min(),
                max_eigenvalue: esd.max(),
                moments: [1, 2, 3].map(|k| esd_moment(&esd, k)),
                mp_moments,
                histogram: histogram(esd.eigenvalues(), &mp),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let result = MpEsdResult {
        p,
        rho,
        a_minus: mp.a_minus,
        a_plus: mp.a_plus,
        atom_mass: mp.atom_mass,
        small_p_warning: small,
        ks_median: median(replicates.iter().map(|r| r.ks)).expect("reps >= 1"),
        w1_median: median(replicates.iter().map(|r| r.w1)).expect("reps >= 1"),
        replicates,
    };
    Ok(Report::new("mp-esd", cfg.common.seed, cfg.clone(), warnings, result))
}

#[derive(Debug, Clone, Serialize)]
pub struct QformCase {
    pub matrix: MatrixSpec,
    pub kind: Option<MatrixKind>,
    pub p: usize,
    pub spectral_norm: Option<f64>,
    pub tr_aat: Option<f64>,
    pub fourth_moment: Option<f64>,
    pub mc: Option<VarEstimate>,
    pub bound: Option<f64>,
    /// `point - 3 std_error <= bound`.
    pub bound_ok: Option<bool>,
    /// Identity only.
    pub hoeffding_lower: Option<f64>,
    /// Identity only, when `p` is small enough.
    pub exact_variance: Option<f64>,
    /// Why the case was not run.
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct QformVarResult {
    pub p: usize,
    pub cases: Vec<QformCase>,
    pub all_bounds_ok: bool,
}

/// Samples come from stream `(seed, 0)`, shared by all cases; case `c`'s
/// matrix from `(seed, 2^32).substream(c)`. A case whose bound hypotheses
/// fail is reported with an error and skipped.
pub fn run_qform_var(cfg: &QformVarArgs) -> Result<Report<QformVarArgs, QformVarResult>> {
    let spec = TensorModelSpec::new(cfg.n, cfg.d, cfg.dist)?;
    let p = usize::try_from(spec.p).map_err(|_| Error::Overflow(format!("p = C({}, {})", cfg.n, cfg.d)))?;
    let reps = cfg.common.reps.unwrap_or(10_000);
    let samples = RngStream::new(cfg.common.seed, 0);
    let k = cfg.dist.fourth_moment();
    let mut cases = Vec::with_capacity(cfg.matrix.len());
    for (c, m) in cfg.matrix.iter().enumerate() {
        let stream = RngStream::new(cfg.common.seed, STREAM_MATRICES).substream(c as u64);
        let case = match *m {
            MatrixSpec::Identity => MatrixCase::identity(p),
            MatrixSpec::ZeroDiagSigns => MatrixCase::zero_diag_signs(p, &stream, cfg.block)?,
            MatrixSpec::Projection(r) => MatrixCase::projection(p, r, &stream, cfg.block)?,
        };
        let mut row = QformCase {
            matrix: *m,
            kind: Some(case.kind),
            p,
            spectral_norm: Some(case.spectral_norm),
            tr_aat: Some(case.tr_aat),
            fourth_moment: k,
            mc: None,
            bound: None,
            bound_ok: None,
            hoeffding_lower: None,
            exact_variance: None,
            error: None,
        };
        let bound = match k {
            None => Err(Error::Hypothesis(format!("E X^4 is infinite for {}", cfg.dist))),
            Some(k) => bound_theorem2(case.kind, p as f64, case.tr_aat, k, cfg.d, cfg.n),
        };
        match bound {
            Err(e @ (Error::Hypothesis(_) | Error::InfiniteMoment(_))) => row.error = Some(e.to_string()),
            Err(e) => return Err(e),
            Ok(b) => {
                let est = mc_variance(&spec, &case.operator, reps, &samples, cfg.batches)?;
                row.bound = Some(b);
                row.bound_ok = Some(est.point - 3.0 * est.std_error <= b);
                row.mc = Some(est);
                if *m == MatrixSpec::Identity {
                    row.hoeffding_lower = k.map(|k| hoeffding_lower(p as f64, k, cfg.d, cfg.n)).transpose()?;
                    if spec.p <= EXACT_ORACLE_MAX_P {
                        row.exact_variance = Some(exact_variance_diag_oracle(&spec)?);
                    }
                }
            }
        }
        cases.push(row);
    }
    let all_bounds_ok = cases.iter().all(|c| c.bound_ok != Some(false));
    let result = QformVarResult { p, cases, all_bounds_ok };
    Ok(Report::new("qform-var", cfg.common.seed, cfg.clone(), Vec::new(), result))
}

#[derive(Debug, Clone, Serialize)]
pub struct EspLlnRow {
    pub n: usize,
    pub d: usize,
    pub reps: usize,
    /// `ln U_n^{(d)}`; `-inf` (null) when `U = 0`.
    pub ln_u: Option<Quartiles>,
    /// `U_n^{(d)}`, as `exp` of the `ln U` quartiles.
    pub u: Option<Quartiles>,
    /// `d (S_n / n - 1)`.
    pub centered_mean: Option<Quartiles>,
    pub maclaurin_violations: usize,
    /// Replicates where the saddle-point equation has no root.
    pub saddle_unsolved: usize,
    pub rho: Option<Quartiles>,
    pub max_saddle_residual: f64,
    /// `|ln U - asymptotic ln U|` over replicates with a saddle point.
    pub gap: Option<Quartiles>,
    /// Plug-in `d mean(Z 1(dZ > n))`.
    pub tail_term: Option<Quartiles>,
    /// Plug-in `(d^2/n) mean(Z^2 1(dZ <= n))`.
    pub fourth_term: Option<Quartiles>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EspLlnResult {
    pub grid: Vec<EspLlnRow>,
}

struct LlnRep {
    ln_u: f64,
    centered: f64,
    maclaurin: bool,
    rho: Option<f64>,
    residual: f64,
    gap: Option<f64>,
    tail: f64,
    fourth: f64,
}

/// Replicate `r` at grid point `n` draws `Z` from `(seed, n).substream(r)`.
pub fn run_esp_lln(cfg: &EspLlnArgs) -> Result<Report<EspLlnArgs, EspLlnResult>> {
    let reps = cfg.common.reps.unwrap_or(50);
    if reps == 0 || cfg.n_grid.is_empty() {
        return Err(Error::InvalidArgument("esp-lln needs reps >= 1 and a nonempty n grid".into()));
    }
    let mut grid = Vec::with_capacity(cfg.n_grid.len());
    for &n in &cfg.n_grid {
        let d = cfg.d_rule.eval(n)?;
        if d >= n {
            return Err(Error::InvalidArgument(format!("esp-lln needs d < n, got d={d} at n={n}")));
        }
        let base = RngStream::new(cfg.common.seed, n as u64);
        let rows = (0..reps)
            .into_par_iter()
            .map(|r| {
                let mut rng = base.substream(r as u64).rng();
                let z: Vec<f64> = (0..n).map(|_| cfg.z_dist.sample(&mut rng)).collect();
                let ln_u = log_ustat(&z, d)?.ln;
                let saddle = solve_rho(&z, d)?;
                let asym = match asymptotic_log_ustat(&z, d) {
                    Ok(a) => Some(a),
                    Err(Error::NotApplicable(_)) => None,
                    Err(e) => return Err(e),
                };
                let (tail, fourth) = empirical_condition_terms(&z, d);
                Ok(LlnRep {
                    ln_u,
                    centered: centered_mean(&z, d),
                    maclaurin: maclaurin_check(&z, d)?,
                    rho: saddle.satisfied_equation.then_some(saddle.rho),
                    residual: if saddle.satisfied_equation { saddle.residual.abs() } else { 0.0 },
                    gap: asym.map(|a| (ln_u - a).abs()),
                    tail,
                    fourth,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let ln_u = Quartiles::of(rows.iter().map(|r| r.ln_u));
        grid.push(EspLlnRow {
            n,
            d,
            reps,
            u: ln_u.map(|q| Quartiles {
                q1: q.q1.exp(),
                median: q.median.exp(),
                q3: q.q3.exp(),
            }),
            ln_u,
            centered_mean: Quartiles::of(rows.iter().map(|r| r.centered)),
            maclaurin_violations: rows.iter().filter(|r| !r.maclaurin).count(),
            saddle_unsolved: rows.iter().filter(|r| r.rho.is_none()).count(),
            rho: Quartiles::of(rows.iter().filter_map(|r| r.rho)),
            max_saddle_residual: rows.iter().map(|r| r.residual).fold(0.0, f64::max),
            gap: Quartiles::of(rows.iter().filter_map(|r| r.gap)),
            tail_term: Quartiles::of(rows.iter().map(|r| r.tail)),
            fourth_term: Quartiles::of(rows.iter().map(|r| r.fourth)),
        });
    }
    Ok(Report::new("esp-lln", cfg.common.seed, cfg.clone(), Vec::new(), EspLlnResult { grid }))
}

#[derive(Debug, Clone, Serialize)]
pub struct GammaRow {
    pub n: usize,
    pub d: usize,
    pub s: usize,
    pub t: usize,
    pub gamma_brute: Option<u64>,
    pub gamma_exact: Option<u64>,
    pub gamma_bound: Option<f64>,
    pub exact_eq_brute: Option<bool>,
    pub exact_le_bound: Option<bool>,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GammaResult {
    pub rows: Vec<GammaRow>,
    pub compared: usize,
    pub mismatches: usize,
    pub bound_violations: usize,
    pub skipped: usize,
}

fn to_u64(v: u128) -> Result<u64> {
    u64::try_from(v).map_err(|_| Error::Overflow(format!("count {v} exceeds 2^64")))
}

/// Rows over `1 <= d <= d_max`, `d <= n <= n_max`, `0 <= t < d`, `0 <= s <= d`.
/// Cells with no base pair (`2d - t > n`) and counts beyond the enumeration
/// cap are reported as skipped.
pub fn run_gamma(cfg: &GammaArgs) -> Result<Report<GammaArgs, GammaResult>> {
    let mut cells = Vec::new();
    for n in 1..=cfg.n_max {
        for d in 1..=cfg.d_max.min(n) {
            for t in 0..d {
                for s in 0..=d {
                    cells.push((n, d, s, t));
                }
            }
        }
    }
    let rows: Vec<GammaRow> = cells
        .par_iter()
        .map(|&(n, d, s, t)| {
            let mut row = GammaRow {
                n,
                d,
                s,
                t,
                gamma_brute: None,
                gamma_exact: None,
                gamma_bound: None,
                exact_eq_brute: None,
                exact_le_bound: None,
                skipped: None,
            };
            if 2 * d - t > n {
                row.skipped = Some(format!("no pair of {d}-subsets of [{n}] overlaps in {t}"));
                return row;
            }
            let exact = gamma_exact(n, d, s, t).and_then(to_u64);
            let brute = gamma_brute(n, d, s, t).and_then(to_u64);
            let bound = gamma_bound(n, d, s, t);
            let mut reasons = Vec::new();
            match exact {
                Ok(v) => row.gamma_exact = Some(v),
                Err(e) => reasons.push(format!("exact: {e}")),
            }
            match brute {
                Ok(v) => row.gamma_brute = Some(v),
                Err(e) => reasons.push(format!("brute: {e}")),
            }
            match bound {
                Ok(v) => row.gamma_bound = Some(v),
                Err(e) => reasons.push(format!("bound: {e}")),
            }
            if let (Some(e), Some(b)) = (row.gamma_exact, row.gamma_brute) {
                row.exact_eq_brute = Some(e == b);
            }
            if let (Some(e), Some(b)) = (row.gamma_exact, row.gamma_bound) {
                row.exact_le_bound = Some(e as f64 <= b * (1.0 + 1e-12));
            }
            if !reasons.is_empty() {
                row.skipped = Some(reasons.join("; "));
            }
            row
        })
        .collect();
    let result = GammaResult {
        compared: rows.iter().filter(|r| r.exact_eq_brute.is_some()).count(),
        mismatches: rows.iter().filter(|r| r.exact_eq_brute == Some(false)).count(),
        bound_violations: rows.iter().filter(|r| r.exact_le_bound == Some(false)).count(),
        skipped: rows.iter().filter(|r| r.skipped.is_some()).count(),
        rows,
    };
    Ok(Report::new("gamma", cfg.common.seed, cfg.clone(), Vec::new(), result))
}

/// Monte Carlo (laws without closed forms) draws from `(seed, 2^32 + 1)`.
pub fn run_conditions(cfg: &ConditionsArgs) -> Result<Report<ConditionsArgs, RegimeTable>> {
    let opts = McOptions {
        reps: cfg.common.reps.unwrap_or(DEFAULT_MC_REPS),
        batches: 20,
        stream: RngStream::new(cfg.common.seed, STREAM_CONDITIONS),
    };
    let law = cfg.dist;
    let table = regime_classifier(|n| law.at(n), &cfg.d_rule, &cfg.n_grid, &opts)?;
    Ok(Report::new("conditions", cfg.common.seed, cfg.clone(), Vec::new(), table))
}
