use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tensor_mp::concentration::{gamma_bound, gamma_brute, gamma_brute_from, gamma_exact};
use tensor_mp::index_space::{binomial, rank, unrank};
use tensor_mp::SubsetIndex;

#[test]
fn gamma_exact_equals_brute() {
    for n in 1..=8 {
        for d in 1..=3.min(n) {
            for t in 0..d {
                if 2 * d - t > n {
                    continue;
                }
                for s in 0..=t + 1 {
                    assert_eq!(gamma_exact(n, d, s, t).unwrap(), gamma_brute(n, d, s, t).unwrap(), "n={n} d={d} s={s} t={t}");
                }
            }
        }
    }
}

#[test]
fn gamma_is_invariant_under_relabeling() {
    // any base pair with the same overlap gives the same count
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (n, d, t) = (8, 3, 1);
    for _ in 0..5 {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let mut i0: Vec<usize> = (0..d).map(|k| perm[k]).collect();
        let mut j0: Vec<usize> = (0..t).map(|k| perm[k]).chain((d..2 * d - t).map(|k| perm[k])).collect();
        i0.sort();
        j0.sort();
        let i0 = SubsetIndex::new(n, i0).unwrap();
        let j0 = SubsetIndex::new(n, j0).unwrap();
        for s in 0..=t {
            assert_eq!(gamma_brute_from(&i0, &j0, s, t).unwrap(), gamma_exact(n, d, s, t).unwrap());
        }
    }
}

#[test]
fn gamma_exact_below_bound() {
    for n in 1..=12 {
        for d in 1..=4.min(n) {
            for t in 0..d {
                if 2 * d - t > n {
                    continue;
                }
                for s in 0..=t {
                    let e = gamma_exact(n, d, s, t).unwrap() as f64;
                    assert!(e <= gamma_bound(n, d, s, t).unwrap() * (1.0 + 1e-12), "n={n} d={d} s={s} t={t}");
                }
            }
        }
    }
}

proptest! {
    #[test]
    fn unrank_rank_roundtrip(n in 1usize..80, d in 0usize..8, frac in 0.0f64..1.0) {
        let d = d.min(n);
        let count = binomial(n, d).unwrap();
        let r = ((count as f64 * frac) as u128).min(count - 1);
        let s = unrank(r, n, d).unwrap();
        prop_assert_eq!(rank(&s).unwrap(), r);
        prop_assert!(s.elements().windows(2).all(|w| w[0] < w[1]));
    }
}
