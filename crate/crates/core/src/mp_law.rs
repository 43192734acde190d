//! The Marchenko–Pastur law `mu_rho`: an atom of mass `max(1 - 1/rho, 0)` at 0
//! plus the density `sqrt((a+ - x)(x - a-)) / (2 pi x rho)` on `[a-, a+]`,
//! `a+- = (1 +- sqrt(rho))^2`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::integrate;
use crate::spectra::Esd;

/// Absolute accuracy target of the CDF quadrature.
pub const CDF_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MpParams {
    pub rho: f64,
    pub a_minus: f64,
    pub a_plus: f64,
    pub atom_mass: f64,
}

impl MpParams {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::invalid(format!("MP ratio must be positive and finite, got {rho}")));
        }
        let s = rho.sqrt();
        Ok(Self {
            rho,
            a_minus: (1.0 - s) * (1.0 - s),
            a_plus: (1.0 + s) * (1.0 + s),
            atom_mass: (1.0 - 1.0 / rho).max(0.0),
        })
    }

    /// Mass of the absolutely continuous part, `min(1, 1/rho)`.
    pub fn continuous_mass(&self) -> f64 {
        1.0 - self.atom_mass
    }

    fn width(&self) -> f64 {
        self.a_plus - self.a_minus
    }
}

/// Density of the continuous part; the atom at 0 is not included.
pub fn density(x: f64, mp: &MpParams) -> f64 {
    if x <= mp.a_minus || x >= mp.a_plus || x <= 0.0 {
        return 0.0;
    }
    ((mp.a_plus - x) * (x - mp.a_minus)).sqrt() / (2.0 * PI * x * mp.rho)
}

/// Density after the substitution `x = a- + (a+ - a-) sin^2(theta)`, which
/// removes both square-root edges: `w^2 sin^2 cos^2 / (pi rho x(theta))`.
fn theta_integrand(theta: f64, mp: &MpParams) -> f64 {
    let w = mp.width();
    let (s, c) = theta.sin_cos();
    let s2 = s * s;
    let x = mp.a_minus + w * s2;
    if x <= 0.0 {
        // only at theta = 0 with a- = 0, where the limit is w cos^2 / (pi rho)
        return w * c * c / (PI * mp.rho);
    }
    w * w * s2 * c * c / (PI * mp.rho * x)
}

fn theta_of(x: f64, mp: &MpParams) -> f64 {
    let u = ((x - mp.a_minus) / mp.width()).clamp(0.0, 1.0);
    u.sqrt().asin()
}

/// Continuous-part mass on `[a-, x]`.
fn continuous_cdf(x: f64, mp: &MpParams) -> f64 {
    if x <= mp.a_minus {
        return 0.0;
    }
    if x >= mp.a_plus {
        return mp.continuous_mass();
    }
    let t = theta_of(x, mp);
    // integrate from whichever edge is closer, for accuracy near a+
    if t <= PI / 4.0 {
        integrate(|th| theta_integrand(th, mp), 0.0, t, CDF_TOL)
    } else {
        mp.continuous_mass() - integrate(|th| theta_integrand(th, mp), t, PI / 2.0, CDF_TOL)
    }
}

/// `mu_rho((-inf, x])`.
pub fn cdf(x: f64, mp: &MpParams) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    (mp.atom_mass + continuous_cdf(x, mp)).min(1.0)
}

/// `mu_rho((-inf, x))`; differs from [`cdf`] only at the atom.
pub fn cdf_left(x: f64, mp: &MpParams) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    cdf(x, mp)
}

/// `inf { x : F(x) >= u }` for `u` in `(0, 1]`.
pub fn quantile(u: f64, mp: &MpParams) -> f64 {
    if u <= mp.atom_mass {
        return if mp.atom_mass > 0.0 { 0.0 } else { mp.a_minus };
    }
    if u >= 1.0 {
        return mp.a_plus;
    }
    let (mut lo, mut hi) = (mp.a_minus, mp.a_plus);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid, mp) >= u {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi.max(1.0) {
            break;
        }
    }
    hi
}

/// Stieltjes transform `m(z) = int dmu_rho(x) / (x - z)` for `Im z > 0`.
///
/// `m` is the root of `rho z m^2 + (z + rho - 1) m + 1 = 0` with `Im m > 0`.
pub fn stieltjes(z: Complex64, mp: &MpParams) -> Result<Complex64> {
    if !(z.im > 0.0) {
        return Err(Error::invalid(format!("Stieltjes transform needs Im z > 0, got {z}")));
    }
    let a = mp.rho * z;
    let b = z + mp.rho - 1.0;
    let disc = (b * b - 4.0 * a).sqrt();
    // cancellation-free pair of roots
    let q = if (b.conj() * disc).re >= 0.0 {
        -0.5 * (b + disc)
    } else {
        -0.5 * (b - disc)
    };
    let r1 = q / a;
    let r2 = 1.0 / q;
    Ok(if r1.im >= r2.im { r1 } else { r2 })
}

/// Kolmogorov–Smirnov distance `sup_x |F_esd(x) - F_mp(x)|`.
///
/// Both functions are right-continuous and monotone, and `F_esd` is constant
/// between eigenvalues, so the supremum is attained at one-sided limits at the
/// eigenvalues or at the atom.
pub fn ks_distance(esd: &Esd, mp: &MpParams) -> f64 {
    let mut sup: f64 = 0.0;
    let mut check = |x: f64| {
        sup = sup
            .max((esd.cdf(x) - cdf(x, mp)).abs())
            .max((esd.cdf_left(x) - cdf_left(x, mp)).abs());
    };
    let ev = esd.eigenvalues();
    let mut i = 0;
    while i < ev.len() {
        check(ev[i]);
        let v = ev[i];
        while i < ev.len() && ev[i] == v {
            i += 1;
        }
    }
    if mp.atom_mass > 0.0 {
        check(0.0);
    }
    sup
}

/// Wasserstein-1 distance `int |F_esd(x) - F_mp(x)| dx`.
///
/// Integrated segment by segment between breakpoints; each segment is split
/// where `F_mp` crosses the constant value of `F_esd` there.
pub fn wasserstein1(esd: &Esd, mp: &MpParams) -> f64 {
    let mut pts: Vec<f64> = esd.eigenvalues().to_vec();
    pts.push(mp.a_minus);
    pts.push(mp.a_plus);
    if mp.atom_mass > 0.0 {
        pts.push(0.0);
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut total = 0.0;
    for w in pts.windows(2) {
        let (l, r) = (w[0], w[1]);
        // F_esd is constant on [l, r)
        total += segment_abs_integral(l, r, esd.cdf(l), mp);
    }
    total
}

/// `int_l^r |c - F_mp(x)| dx` where `F_mp` is continuous on `(l, r)`.
fn segment_abs_integral(l: f64, r: f64, c: f64, mp: &MpParams) -> f64 {
    if r <= l {
        return 0.0;
    }
    // right limit at l: F is right-continuous, so cdf(l) is the right limit
    let fl = cdf(l, mp);
    let fr = cdf_left(r, mp);
    let g = |x: f64| cdf(x, mp);
    let seg = |a: f64, b: f64| integrate(|t| (g(t) - c).abs(), a, b, 1e-10 * (b - a) + 1e-14);
    if (fl - c) * (fr - c) >= 0.0 {
        return seg(l, r);
    }
    let (mut lo, mut hi) = (l, r);
    for _ in 0..100 {
        let m = 0.5 * (lo + hi);
        if (g(m) - c) * (fl - c) > 0.0 {
            lo = m;
        } else {
            hi = m;
        }
        if hi - lo <= 1e-14 * (1.0 + hi.abs()) {
            break;
        }
    }
    let x = 0.5 * (lo + hi);
    seg(l, x) + seg(x, r)
}
