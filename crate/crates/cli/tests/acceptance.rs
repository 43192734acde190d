//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Built without the libtest harness so the lines always show.

use std::process::Command as Process;
use std::time::{Duration, Instant};

use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use tensor_mp::concentration::{
    bound_theorem2, exact_variance_diag_oracle, gamma_bound, gamma_brute, gamma_exact, hoeffding_lower, MatrixKind,
    DEFAULT_BLOCK,
};
use tensor_mp::conditions::{condition14, condition14_mc, truncated_moments, McOptions, Method, ZDistribution};
use tensor_mp::esp::{esp, esp_all, esp_brute, maclaurin_check, solve_rho};
use tensor_mp::tensor_model::vectorize;
use tensor_mp::{EntryDistribution, RngStream, TensorModelSpec};
use tensor_mp_cli::config::{Common, EspLlnArgs, Format, MatrixSpec, MpEsdArgs, QformVarArgs};
use tensor_mp_cli::runners::{run_esp_lln, run_mp_esd, run_qform_var};

struct Outcome {
    pass: bool,
    detail: String,
}

fn common(seed: u64, reps: Option<usize>) -> Common {
    Common {
        seed,
        reps,
        out: None,
        format: Format::Json,
        threads: None,
        max_p: 4096,
        record_time: false,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(a.abs())
    }
}

/// Nonnegative vectors from a rotating set of laws, some with exact zeros.
fn z_draw<R: Rng>(k: u64, n: usize, rng: &mut R) -> Vec<f64> {
    let law = match k % 4 {
        0 => ZDistribution::Exp,
        1 => ZDistribution::square(EntryDistribution::Gaussian),
        2 => ZDistribution::square(EntryDistribution::sparse_bernoulli(0.4).unwrap()),
        _ => ZDistribution::square(EntryDistribution::two_point(2.0).unwrap()),
    };
    (0..n).map(|_| law.sample(rng)).collect()
}

fn c1_mp_convergence() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for (dist, pin) in [(EntryDistribution::Rademacher, 0.05), (EntryDistribution::Gaussian, 0.06)] {
        let mut ks = Vec::new();
        let mut slowest = Duration::ZERO;
        for seed in 1..=5 {
            let t = Instant::now();
            let r = run_mp_esd(&MpEsdArgs {
                n: 40,
                d: 2,
                samples: 1560,
                dist,
                common: common(seed, Some(1)),
            })
            .expect("mp-esd run");
            slowest = slowest.max(t.elapsed());
            pass &= r.result.p == 780 && r.result.rho == 0.5;
            ks.push(r.result.ks_median);
        }
        ks.sort_by(f64::total_cmp);
        let med = ks[2];
        pass &= med <= pin && slowest <= Duration::from_secs(120);
        parts.push(format!(
            "{dist}: median KS {med:.4} (<= {pin}), slowest run {:.1}s",
            slowest.as_secs_f64()
        ));
    }
    Outcome {
        pass,
        detail: format!("p=780, rho=0.5; {}", parts.join("; ")),
    }
}

fn c2_variance_bounds() -> Outcome {
    let start = Instant::now();
    let dists = [
        EntryDistribution::Rademacher,
        EntryDistribution::Gaussian,
        EntryDistribution::sparse_bernoulli(0.5).unwrap(),
    ];
    let (mut admissible, mut ok, mut clean_errors, mut bad) = (0, 0, 0, Vec::new());
    for dist in dists {
        let k = dist.fourth_moment().unwrap();
        for (n, d) in [(16usize, 1usize), (32, 2), (48, 3)] {
            let r = run_qform_var(&QformVarArgs {
                n,
                d,
                dist,
                matrix: vec![MatrixSpec::Identity, MatrixSpec::ZeroDiagSigns, MatrixSpec::Projection(0.5)],
                batches: 20,
                block: DEFAULT_BLOCK,
                common: common(2024, Some(10_000)),
            })
            .expect("qform-var run");
            for c in &r.result.cases {
                let df = d as f64;
                let inadmissible = match c.kind.unwrap() {
                    MatrixKind::Diagonal => false,
                    MatrixKind::ZeroDiagonal => n < 16 * d,
                    MatrixKind::Arbitrary => 2.0 * k * df * df > n as f64 || n < 16 * d,
                };
                match (&c.error, c.bound_ok) {
                    (Some(e), None) if inadmissible && e.contains("violated") => clean_errors += 1,
                    (None, Some(within)) if !inadmissible => {
                        admissible += 1;
                        if within {
                            ok += 1;
                        } else {
                            bad.push(format!("{dist} n={n} d={d} {}", c.matrix));
                        }
                    }
                    _ => bad.push(format!("{dist} n={n} d={d} {}: unexpected {:?}", c.matrix, c.error)),
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: bad.is_empty() && ok == admissible && secs <= 600.0,
        detail: format!(
            "{ok}/{admissible} admissible cells with point - 3se <= bound, \
             {clean_errors} inadmissible cells errored cleanly, {secs:.0}s{}",
            if bad.is_empty() {
                String::new()
            } else {
                format!("; failures: {}", bad.join(", "))
            }
        ),
    }
}

fn c3_hoeffding_sandwich() -> Outcome {
    let (mut checked, mut bad) = (0, Vec::new());
    for n in 1..=14 {
        for d in 1..=4.min(n) {
            let spec = TensorModelSpec::new(n, d, EntryDistribution::Gaussian).unwrap();
            let p = spec.p as f64;
            let lower = hoeffding_lower(p, 3.0, d, n).unwrap();
            let exact = exact_variance_diag_oracle(&spec).unwrap();
            let upper = bound_theorem2(MatrixKind::Diagonal, p, p, 3.0, d, n).unwrap();
            checked += 1;
            if !(lower <= exact * (1.0 + 1e-9) && exact <= upper * (1.0 + 1e-9)) {
                bad.push(format!("n={n} d={d}: {lower} <= {exact} <= {upper}"));
            }
        }
    }
    Outcome {
        pass: bad.is_empty(),
        detail: format!("Gaussian n<=14 d<=4: {checked} cells, {} violations {}", bad.len(), bad.join(", ")),
    }
}

fn c4_gamma() -> Outcome {
    let start = Instant::now();
    let (mut eq_checked, mut mismatches, mut no_pair) = (0, 0, 0);
    for n in 1..=8 {
        for d in 1..=3.min(n) {
            for t in 0..d {
                for s in 0..=t {
                    if 2 * d - t > n {
                        no_pair += 1;
                        continue;
                    }
                    eq_checked += 1;
                    if gamma_exact(n, d, s, t).unwrap() != gamma_brute(n, d, s, t).unwrap() {
                        mismatches += 1;
                    }
                }
            }
        }
    }
    let (mut bound_checked, mut over) = (0, 0);
    for n in 1..=12 {
        for d in 1..=4.min(n) {
            for t in 0..d {
                if 2 * d - t > n {
                    continue;
                }
                for s in 0..=t {
                    bound_checked += 1;
                    if gamma_exact(n, d, s, t).unwrap() as f64 > gamma_bound(n, d, s, t).unwrap() {
                        over += 1;
                    }
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: mismatches == 0 && over == 0 && secs <= 120.0,
        detail: format!(
            "exact == brute on {eq_checked} cells ({mismatches} mismatches; {no_pair} cells have no base pair), \
             exact <= bound on {bound_checked} cells ({over} violations), {secs:.1}s"
        ),
    }
}

/// `e_k` from power sums by Newton's identities, evaluated exactly. Every f64
/// is a rational, so the only rounding is the final conversion.
fn newton_esp_exact(z: &[f64], d: usize) -> Vec<f64> {
    let z: Vec<BigRational> = z.iter().map(|&v| BigRational::from_float(v).unwrap()).collect();
    let p: Vec<BigRational> = (0..=d as i32).map(|k| z.iter().map(|v| v.pow(k)).sum()).collect();
    let mut e = vec![BigRational::one()];
    for k in 1..=d {
        let mut s = BigRational::zero();
        for i in 1..=k {
            let term = &e[k - i] * &p[i];
            if i % 2 == 1 {
                s += term;
            } else {
                s -= term;
            }
        }
        e.push(s / BigRational::from_integer((k as i64).into()));
    }
    e.iter().map(|v| v.to_f64().unwrap()).collect()
}

/// The same recurrence in f64, reported for reference only.
fn newton_esp(z: &[f64], d: usize) -> Vec<f64> {
    let p: Vec<f64> = (0..=d).map(|k| z.iter().map(|v| v.powi(k as i32)).sum()).collect();
    let mut e = vec![1.0];
    for k in 1..=d {
        let mut s = 0.0;
        for i in 1..=k {
            let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
            s += sign * e[k - i] * p[i];
        }
        e.push(s / k as f64);
    }
    e
}

fn c5_esp_oracles() -> Outcome {
    let mut rng = RngStream::new(5, 0).rng();
    let mut worst_brute: f64 = 0.0;
    for k in 0..1000u64 {
        let n = 1 + (k as usize % 20);
        let z = z_draw(k, n, &mut rng);
        let all = esp_all(&z, n).unwrap();
        for (d, v) in all.iter().enumerate() {
            worst_brute = worst_brute.max(rel(v.value(), esp_brute(&z, d).unwrap()));
        }
    }
    let (mut worst_newton, mut worst_float): (f64, f64) = (0.0, 0.0);
    for k in 0..1000u64 {
        let n = 1 + (k as usize % 50);
        let d = 10.min(n);
        let z = z_draw(k, n, &mut rng);
        let all = esp_all(&z, d).unwrap();
        for (v, w) in all.iter().zip(newton_esp_exact(&z, d)) {
            worst_newton = worst_newton.max(rel(v.value(), w));
        }
        for (v, w) in all.iter().zip(newton_esp(&z, d)) {
            worst_float = worst_float.max(rel(v.value(), w));
        }
    }
    Outcome {
        pass: worst_brute <= 1e-10 && worst_newton <= 1e-6,
        detail: format!(
            "1000 draws n<=20, all d: max rel err vs enumeration {worst_brute:.1e} (<= 1e-10); \
             1000 draws n<=50, d<=10: max rel err vs Newton identities {worst_newton:.1e} (<= 1e-6; \
             same recurrence in f64 reaches {worst_float:.1e})"
        ),
    }
}

fn c6_maclaurin() -> Outcome {
    let mut rng = RngStream::new(6, 0).rng();
    let mut violations = 0;
    for k in 0..10_000u64 {
        let n = rng.random_range(1..=30);
        let d = rng.random_range(1..=n);
        let z = z_draw(k, n, &mut rng);
        if !maclaurin_check(&z, d).unwrap() {
            violations += 1;
        }
    }
    Outcome {
        pass: violations == 0,
        detail: format!("{violations} violations in 10000 instances, n<=30"),
    }
}

fn c7_saddle() -> Outcome {
    let start = Instant::now();
    let mut rng = RngStream::new(7, 0).rng();
    let (mut worst, mut unsolved): (f64, usize) = (0.0, 0);
    for k in 0..1000u64 {
        let n = rng.random_range(2..=300);
        let d = rng.random_range(1..n);
        // strictly positive draws, so a root exists
        let law = if k % 2 == 0 {
            ZDistribution::Exp
        } else {
            ZDistribution::square(EntryDistribution::Gaussian)
        };
        let z: Vec<f64> = (0..n).map(|_| law.sample(&mut rng)).collect();
        let s = solve_rho(&z, d).unwrap();
        if !s.satisfied_equation {
            unsolved += 1;
            continue;
        }
        let lhs: f64 = z.iter().map(|v| s.rho / (v + s.rho)).sum();
        worst = worst.max((lhs - (n - d) as f64).abs() / n as f64);
    }
    let mut worst_one: f64 = 0.0;
    for (n, d) in [(2, 1), (10, 1), (10, 9), (100, 7), (1000, 300), (5000, 4999)] {
        let s = solve_rho(&vec![1.0; n], d).unwrap();
        worst_one = worst_one.max(rel(s.rho, (n - d) as f64 / d as f64));
    }
    let r = run_esp_lln(&EspLlnArgs {
        z_dist: ZDistribution::Exp,
        d_rule: "floor(n^0.3)".parse().unwrap(),
        n_grid: vec![500, 2000, 8000],
        common: common(7, Some(50)),
    })
    .expect("esp-lln run");
    let gaps: Vec<f64> = r.result.grid.iter().map(|g| g.gap.map_or(f64::NAN, |q| q.median)).collect();
    let decreasing = gaps.windows(2).all(|w| w[1] < w[0]);
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: unsolved == 0 && worst <= 1e-10 && worst_one <= 1e-12 && decreasing && secs <= 300.0,
        detail: format!(
            "1000 instances: max |residual|/n {worst:.1e} ({unsolved} unsolved); Z=1: max rel err of rho {worst_one:.1e}; \
             median gap {gaps:.4?} at n=500,2000,8000 over 50 seeds; {secs:.1}s"
        ),
    }
}

fn c8_norm_identity() -> Outcome {
    let mut rng = RngStream::new(8, 0).rng();
    let laws = [
        EntryDistribution::Gaussian,
        EntryDistribution::Rademacher,
        EntryDistribution::two_point(3.0).unwrap(),
        EntryDistribution::student_t(5.0).unwrap(),
        EntryDistribution::sparse_bernoulli(0.5).unwrap(),
    ];
    let mut worst: f64 = 0.0;
    for k in 0..1000usize {
        let n = rng.random_range(1..=12);
        let d = rng.random_range(1..=n);
        let law = laws[k % laws.len()];
        let x: Vec<f64> = (0..n).map(|_| law.sample(&mut rng)).collect();
        let norm2: f64 = vectorize(&x, d).unwrap().iter().map(|v| v * v).sum();
        let sq: Vec<f64> = x.iter().map(|v| v * v).collect();
        worst = worst.max(rel(norm2, esp(&sq, d).unwrap().value()));
    }
    Outcome {
        pass: worst <= 1e-10,
        detail: format!("1000 draws n<=12: max rel err {worst:.1e} (<= 1e-10)"),
    }
}

fn c9_conditions() -> Outcome {
    let (mut rad_cells, mut rad_bad) = (0, 0);
    for n in 1..=60 {
        for d in 1..=n {
            let r = condition14(EntryDistribution::Rademacher, d, n).unwrap();
            rad_cells += 1;
            if r.term_truncated_tail != 0.0 || r.term_truncated_fourth != (d * d) as f64 / n as f64 {
                rad_bad += 1;
            }
        }
    }
    let opts = McOptions {
        reps: 1_000_000,
        batches: 20,
        stream: RngStream::new(9, 0),
    };
    let (mut mc_cells, mut mc_bad, mut worst_z) = (0, Vec::new(), 0.0f64);
    for q in [0.1, 0.5, 0.9] {
        let law = EntryDistribution::sparse_bernoulli(q).unwrap();
        for (d, n) in [(1, 20), (2, 20), (5, 20), (10, 20), (19, 20), (3, 100), (50, 100)] {
            let a = condition14(law, d, n).unwrap();
            let m = condition14_mc(law, d, n, &opts).unwrap();
            let Method::MonteCarlo {
                std_error_tail,
                std_error_fourth,
                ..
            } = m.method
            else {
                unreachable!("forced Monte Carlo")
            };
            mc_cells += 1;
            for (x, y, se, what) in [
                (a.term_truncated_tail, m.term_truncated_tail, std_error_tail, "tail"),
                (a.term_truncated_fourth, m.term_truncated_fourth, std_error_fourth, "fourth"),
            ] {
                let dev = (x - y).abs();
                if se > 0.0 {
                    worst_z = worst_z.max(dev / se);
                }
                if dev > 4.0 * se {
                    mc_bad.push(format!("q={q} d={d} n={n} {what}: {x} vs {y} (se {se})"));
                }
            }
        }
    }
    let laws = [
        ZDistribution::One,
        ZDistribution::Exp,
        ZDistribution::square(EntryDistribution::Rademacher),
        ZDistribution::square(EntryDistribution::Gaussian),
        ZDistribution::square(EntryDistribution::two_point(2.0).unwrap()),
        ZDistribution::square(EntryDistribution::sparse_bernoulli(0.1).unwrap()),
        ZDistribution::square(EntryDistribution::sparse_bernoulli(0.5).unwrap()),
    ];
    let mut worst_dec: f64 = 0.0;
    for z in laws {
        for n in [1, 2, 5, 20, 100, 1000] {
            for d in 1..=n.min(50) {
                let m = truncated_moments(&z, d, n).unwrap();
                worst_dec = worst_dec.max((m.tail_first + m.body_first - 1.0).abs());
            }
        }
    }
    Outcome {
        pass: rad_bad == 0 && mc_bad.is_empty() && worst_dec <= 1e-10,
        detail: format!(
            "Rademacher (0, d^2/n) exact on {rad_cells} cells ({rad_bad} off); sparse Bernoulli closed form vs 1e6-draw MC \
             on {mc_cells} cells, max |dev|/se {worst_z:.2} ({} beyond 4se); decomposition max err {worst_dec:.1e}{}",
            mc_bad.len(),
            if mc_bad.is_empty() {
                String::new()
            } else {
                format!("; {}", mc_bad.join(", "))
            }
        ),
    }
}

fn c10_determinism() -> Outcome {
    let exe = env!("CARGO_BIN_EXE_tensor-mp");
    let configs: [&[&str]; 5] = [
        &["mp-esd", "--n", "12", "--d", "2", "--N", "200", "--dist", "gaussian", "--reps", "2", "--seed", "3"],
        &[
            "qform-var",
            "--n",
            "16",
            "--d",
            "2",
            "--dist",
            "sparse-bernoulli:0.5",
            "--matrix",
            "identity,zero-diag-signs,projection:0.5",
            "--reps",
            "400",
            "--seed",
            "4",
        ],
        &["esp-lln", "--z-dist", "exp", "--n-grid", "100,400", "--reps", "10", "--seed", "5"],
        &["gamma", "--n-max", "7", "--d-max", "3"],
        &[
            "conditions",
            "--dist",
            "student-t:5",
            "--d-rule",
            "floor(n^0.3)",
            "--n-grid",
            "50,500",
            "--reps",
            "100000",
        ],
    ];
    let mut bad = Vec::new();
    for cfg in configs {
        let mut outs = Vec::new();
        for threads in ["1", "4", "1", "4"] {
            let o = Process::new(exe)
                .args(cfg)
                .args(["--threads", threads])
                .output()
                .expect("spawn tensor-mp");
            if !o.status.success() {
                bad.push(format!("{} exited with {:?}", cfg[0], o.status.code()));
            }
            outs.push(o.stdout);
        }
        if outs[0].is_empty() || outs.iter().any(|o| *o != outs[0]) {
            bad.push(format!("{} output differs", cfg[0]));
        }
    }
    Outcome {
        pass: bad.is_empty(),
        detail: format!(
            "5 subcommands x threads {{1, 4}} x 2 runs: {}",
            if bad.is_empty() {
                "byte-identical JSON".to_string()
            } else {
                bad.join(", ")
            }
        ),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("MP convergence", c1_mp_convergence),
        ("variance bounds never violated", c2_variance_bounds),
        ("Hoeffding sandwich", c3_hoeffding_sandwich),
        ("gamma combinatorics", c4_gamma),
        ("ESP oracle equivalence", c5_esp_oracles),
        ("Maclaurin inequality", c6_maclaurin),
        ("saddle point", c7_saddle),
        ("norm / ESP identity", c8_norm_identity),
        ("truncated-moment conditions", c9_conditions),
        ("determinism", c10_determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!("{} [{:>2}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
