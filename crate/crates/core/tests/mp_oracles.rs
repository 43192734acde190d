use num_complex::Complex64;
use tensor_mp::mp_law::{cdf, density, ks_distance, quantile, stieltjes, wasserstein1};
use tensor_mp::{Esd, MpParams};

/// Midpoint rule on `m` cells after `x = a + w sin^2 t`, which removes the
/// square-root edges of the density.
fn grid_integral(mp: &MpParams, hi: f64, m: usize, f: impl Fn(f64) -> f64) -> f64 {
    let (a, b) = (mp.a_minus, mp.a_plus.min(hi));
    if b <= a {
        return 0.0;
    }
    let w = mp.a_plus - mp.a_minus;
    let t_hi = ((b - a) / w).sqrt().min(1.0).asin();
    let h = t_hi / m as f64;
    (0..m)
        .map(|k| {
            let t = (k as f64 + 0.5) * h;
            let x = a + w * t.sin().powi(2);
            f(x) * density(x, mp) * w * (2.0 * t).sin() * h
        })
        .sum()
}

const RHOS: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 4.0];

#[test]
fn stieltjes_matches_quadrature() {
    for rho in RHOS {
        let mp = MpParams::new(rho).unwrap();
        for z in [
            Complex64::new(-1.0, 0.5),
            Complex64::new(1.0, 1.0),
            Complex64::new(2.5, 0.3),
            Complex64::new(10.0, 2.0),
        ] {
            let re = grid_integral(&mp, f64::INFINITY, 1_000_000, |x| (1.0 / (x - z)).re);
            let im = grid_integral(&mp, f64::INFINITY, 1_000_000, |x| (1.0 / (x - z)).im);
            let atom = if mp.atom_mass > 0.0 { mp.atom_mass / (0.0 - z) } else { Complex64::new(0.0, 0.0) };
            let want = Complex64::new(re, im) + atom;
            let got = stieltjes(z, &mp).unwrap();
            assert!((got - want).norm() < 1e-8, "rho={rho} z={z}: {got} vs {want}");
        }
    }
}

#[test]
fn cdf_matches_grid_integral() {
    for rho in RHOS {
        let mp = MpParams::new(rho).unwrap();
        for frac in [0.1, 0.3, 0.5, 0.9] {
            let x = mp.a_minus + frac * (mp.a_plus - mp.a_minus);
            let want = mp.atom_mass + grid_integral(&mp, x, 1_000_000, |_| 1.0);
            assert!((cdf(x, &mp) - want).abs() < 1e-9, "rho={rho} x={x}");
        }
    }
}

#[test]
fn first_two_moments() {
    for rho in RHOS {
        let mp = MpParams::new(rho).unwrap();
        let mass = mp.atom_mass + grid_integral(&mp, f64::INFINITY, 1_000_000, |_| 1.0);
        let m1 = grid_integral(&mp, f64::INFINITY, 1_000_000, |x| x);
        let m2 = grid_integral(&mp, f64::INFINITY, 1_000_000, |x| x * x);
        assert!((mass - 1.0).abs() < 1e-9);
        assert!((m1 - 1.0).abs() < 1e-9, "rho={rho}: {m1}");
        assert!((m2 - (1.0 + rho)).abs() < 1e-9, "rho={rho}: {m2}");
    }
}

#[test]
fn quantile_sample_is_close_in_ks_and_w1() {
    for rho in [0.25, 0.5, 2.0] {
        let mp = MpParams::new(rho).unwrap();
        let m = 2000;
        let pts: Vec<f64> = (0..m).map(|k| quantile((k as f64 + 0.5) / m as f64, &mp)).collect();
        let esd = Esd::new(pts).unwrap();
        // midpoint quantiles: KS is at most 1/(2m) off the continuous part,
        // and the atom at 0 is hit by a whole block of points
        assert!(ks_distance(&esd, &mp) <= 0.5 / m as f64 + 1e-9, "rho={rho}");
        assert!(wasserstein1(&esd, &mp) < 2e-3);
    }
}

#[test]
fn ks_is_a_sup_over_one_sided_limits() {
    let mp = MpParams::new(0.5).unwrap();
    let esd = Esd::new(vec![0.5, 1.0, 1.0, 2.0]).unwrap();
    let mut brute: f64 = 0.0;
    let m = 200_000;
    for k in 0..=m {
        let x = -0.5 + 4.0 * k as f64 / m as f64;
        brute = brute.max((esd.cdf(x) - cdf(x, &mp)).abs());
    }
    let ks = ks_distance(&esd, &mp);
    assert!(ks >= brute - 1e-12);
    assert!(ks - brute < 1e-3);
}
