//! Symmetric eigenvalues and empirical spectral distributions.
//!
//! Householder reduction to tridiagonal form followed by the implicit-shift
//! QL iteration (the EISPACK `tred2`/`tql2` pair). Eigenvectors are only
//! accumulated when asked for.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::SymMatrix;

/// Per-eigenvalue cap on QL sweeps.
const MAX_QL_ITERATIONS: usize = 60;

/// Empirical spectral distribution: eigenvalues sorted ascending, weight `1/p` each.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Esd {
    eigenvalues: Vec<f64>,
}

impl Esd {
    pub fn new(mut eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::invalid("an ESD needs at least one eigenvalue"));
        }
        if eigenvalues.iter().any(|v| v.is_nan()) {
            return Err(Error::invalid("NaN eigenvalue"));
        }
        eigenvalues.sort_by(f64::total_cmp);
        Ok(Self { eigenvalues })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    /// `mu_A((-inf, x])`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.eigenvalues.partition_point(|&v| v <= x) as f64 / self.len() as f64
    }

    /// `mu_A((-inf, x))`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        self.eigenvalues.partition_point(|&v| v < x) as f64 / self.len() as f64
    }
}

/// `p^{-1} sum_i lambda_i^k`.
pub fn esd_moment(esd: &Esd, k: u32) -> f64 {
    let s: f64 = esd.eigenvalues.iter().map(|v| v.powi(k as i32)).sum();
    s / esd.len() as f64
}

/// Eigenvalues and unit eigenvectors (`vectors[j]` belongs to `values[j]`).
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

impl EigenDecomposition {
    /// `max_j ||A v_j - lambda_j v_j||`.
    pub fn max_residual(&self, a: &SymMatrix) -> f64 {
        self.values
            .iter()
            .zip(&self.vectors)
            .map(|(&lambda, v)| {
                let av = a.matvec(v);
                av.iter()
                    .zip(v)
                    .map(|(x, y)| (x - lambda * y).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }
}

/// All eigenvalues of an exactly symmetric matrix, as an ESD.
pub fn eigenvalues_sym(a: &SymMatrix) -> Result<Esd> {
    let (values, _) = solve(a, false)?;
    Esd::new(values)
}

/// Eigenvalues with eigenvectors; for residual checks.
pub fn eigen_sym(a: &SymMatrix) -> Result<EigenDecomposition> {
    let (values, v) = solve(a, true)?;
    let n = values.len();
    let v = v.expect("vectors requested");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    Ok(EigenDecomposition {
        values: order.iter().map(|&j| values[j]).collect(),
        vectors: order.iter().map(|&j| v[j * n..(j + 1) * n].to_vec()).collect(),
    })
}

fn solve(a: &SymMatrix, want_vectors: bool) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let n = a.dim();
    if n == 0 {
        return Err(Error::invalid("empty matrix"));
    }
    if let Some((row, col)) = a.asymmetry() {
        return Err(Error::NotSymmetric { row, col });
    }
    if a.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    // Column-major working copy: `v[c * n + r]` is element (r, c). The input is
    // symmetric, so its row-major data serves as-is.
    let mut v = a.as_slice().to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(n, &mut v, &mut d, &mut e, want_vectors);
    tql(n, &mut v, &mut d, &mut e, want_vectors)?;
    Ok((d, want_vectors.then_some(v)))
}

#[inline]
fn ix(n: usize, r: usize, c: usize) -> usize {
    c * n + r
}

/// Householder reduction to tridiagonal form: diagonal in `d`, subdiagonal in `e[1..]`.
fn tridiagonalize(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64], want_vectors: bool) {
    for j in 0..n {
        d[j] = v[ix(n, n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[ix(n, i - 1, j)];
                v[ix(n, i, j)] = 0.0;
                v[ix(n, j, i)] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[ix(n, j, i)] = f;
                g = e[j] + v[ix(n, j, j)] * f;
                for k in (j + 1)..i {
                    let vkj = v[ix(n, k, j)];
                    g += vkj * d[k];
                    e[k] += vkj * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[ix(n, k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[ix(n, i - 1, j)];
                v[ix(n, i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    if !want_vectors {
        for (j, dj) in d.iter_mut().enumerate() {
            *dj = v[ix(n, j, j)];
        }
        e[0] = 0.0;
        return;
    }

    for i in 0..n - 1 {
        v[ix(n, n - 1, i)] = v[ix(n, i, i)];
        v[ix(n, i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[ix(n, k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[ix(n, k, i + 1)] * v[ix(n, k, j)];
                }
                for k in 0..=i {
                    v[ix(n, k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[ix(n, k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[ix(n, n - 1, j)];
        v[ix(n, n - 1, j)] = 0.0;
    }
    v[ix(n, n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit-shift QL on the tridiagonal `(d, e)`.
fn tql(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64], want_vectors: bool) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERATIONS {
                    return Err(Error::NoConvergence {
                        index: l,
                        iterations: MAX_QL_ITERATIONS,
                    });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if want_vectors {
                        let (lo, hi) = v.split_at_mut((i + 1) * n);
                        let col_i = &mut lo[i * n..];
                        let col_i1 = &mut hi[..n];
                        for (a, b) in col_i.iter_mut().zip(col_i1.iter_mut()) {
                            let t = *b;
                            *b = s * *a + c * t;
                            *a = c * *a - s * t;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}
