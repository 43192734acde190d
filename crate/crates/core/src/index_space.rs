//! Exact combinatorics for `d`-subsets of `{0, .., n-1}`.
//!
//! Subsets are ordered colexicographically, i.e. by their position in the
//! combinatorial number system: `rank({a_1 < .. < a_d}) = sum_k C(a_k, k)`.
//! This order fixes the coordinate order of every vectorized tensor in the
//! crate.

use crate::error::{Error, Result};

/// Exact subset count. Checked 128-bit; overflow is reported, never wrapped.
pub type BigCount = u128;

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Exact binomial coefficient `C(n, d)`.
pub fn binomial(n: usize, d: usize) -> Result<BigCount> {
    if d > n {
        return Err(Error::invalid(format!("binomial requires d <= n, got n={n}, d={d}")));
    }
    let k = d.min(n - d);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) is an integer; split the division so no
        // intermediate exceeds the final result by more than (n - i).
        let num = (n - i) as u128;
        let den = (i + 1) as u128;
        let g = gcd(acc, den);
        let reduced = acc / g;
        let num = num / (den / g);
        acc = reduced
            .checked_mul(num)
            .ok_or_else(|| Error::Overflow(format!("C({n},{d})")))?;
    }
    Ok(acc)
}

/// `C(n, d)` as usize, failing if it does not fit.
pub fn binomial_usize(n: usize, d: usize) -> Result<usize> {
    let b = binomial(n, d)?;
    usize::try_from(b).map_err(|_| Error::Overflow(format!("C({n},{d}) as usize")))
}

/// Natural log of `C(n, d)` by compensated summation of `ln((n-m+k)/k)`.
pub fn ln_binomial(n: usize, d: usize) -> Result<f64> {
    if d > n {
        return Err(Error::invalid(format!("ln_binomial requires d <= n, got n={n}, d={d}")));
    }
    let m = d.min(n - d);
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for k in 1..=m {
        let term = ((n - m + k) as f64 / k as f64).ln();
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    Ok(sum + comp)
}

/// A `d`-element subset of `{0, .., n-1}`, elements strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SubsetIndex {
    n: usize,
    elements: Vec<usize>,
}

impl SubsetIndex {
    pub fn new(n: usize, elements: Vec<usize>) -> Result<Self> {
        if elements.len() > n {
            return Err(Error::InvalidSubset(format!(
                "{} elements cannot be drawn from {n}",
                elements.len()
            )));
        }
        for w in elements.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidSubset(format!("{elements:?} is not strictly increasing")));
            }
        }
        if let Some(&last) = elements.last() {
            if last >= n {
                return Err(Error::InvalidSubset(format!("element {last} not in [0, {n})")));
            }
        }
        Ok(Self { n, elements })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[usize] {
        &self.elements
    }

    pub fn contains(&self, alpha: usize) -> bool {
        self.elements.binary_search(&alpha).is_ok()
    }

    /// Size of the intersection with another subset (linear merge).
    pub fn overlap(&self, other: &SubsetIndex) -> usize {
        let (a, b) = (&self.elements, &other.elements);
        let (mut i, mut j, mut c) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    c += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        c
    }

    /// 1-based rendering, for display only.
    pub fn one_based(&self) -> Vec<usize> {
        self.elements.iter().map(|a| a + 1).collect()
    }
}

/// Colex rank: `sum_{k=1..d} C(a_k, k)`.
pub fn rank(s: &SubsetIndex) -> Result<BigCount> {
    let mut r: u128 = 0;
    for (k, &a) in s.elements.iter().enumerate() {
        let c = binomial_or_zero(a, k + 1)?;
        r = r
            .checked_add(c)
            .ok_or_else(|| Error::Overflow("colex rank".into()))?;
    }
    Ok(r)
}

fn binomial_or_zero(a: usize, k: usize) -> Result<BigCount> {
    if k > a {
        Ok(0)
    } else {
        binomial(a, k)
    }
}

/// Inverse of [`rank`]: greedy decoding from the largest element down.
pub fn unrank(r: BigCount, n: usize, d: usize) -> Result<SubsetIndex> {
    let count = binomial(n, d)?;
    if r >= count {
        return Err(Error::RankOutOfRange { rank: r, count });
    }
    let mut rest = r;
    let mut elements = vec![0usize; d];
    // Largest element a_d is the largest a with C(a, d) <= rest; candidates shrink
    // monotonically, so one downward scan over a serves all positions.
    let mut a = n;
    for k in (1..=d).rev() {
        loop {
            a -= 1;
            let c = binomial_or_zero(a, k)?;
            if c <= rest {
                rest -= c;
                elements[k - 1] = a;
                break;
            }
        }
    }
    debug_assert_eq!(rest, 0);
    Ok(SubsetIndex { n, elements })
}

/// Advance `a` (a strictly increasing d-subset of `[0, n)`) to its colex
/// successor in place. Returns the highest position that changed, or `None`
/// when `a` was the last subset (in which case `a` is left untouched).
pub fn colex_next(a: &mut [usize], n: usize) -> Option<usize> {
    let d = a.len();
    for j in 0..d {
        let limit = if j + 1 < d { a[j + 1] } else { n };
        if a[j] + 1 < limit {
            a[j] += 1;
            for (i, slot) in a.iter_mut().enumerate().take(j) {
                *slot = i;
            }
            return Some(j);
        }
    }
    None
}

/// Iterator over all `d`-subsets of `[0, n)` in increasing colex rank.
#[derive(Debug, Clone)]
pub struct Subsets {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Iterator for Subsets {
    type Item = SubsetIndex;

    fn next(&mut self) -> Option<SubsetIndex> {
        let cur = self.current.as_mut()?;
        let out = SubsetIndex {
            n: self.n,
            elements: cur.clone(),
        };
        if colex_next(cur, self.n).is_none() {
            self.current = None;
        }
        Some(out)
    }
}

/// All `d`-subsets of `[0, n)` in colex order. Empty when `d > n`.
pub fn enumerate(n: usize, d: usize) -> Subsets {
    Subsets {
        n,
        current: (d <= n).then(|| (0..d).collect()),
    }
}
