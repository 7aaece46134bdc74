use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// m subsets of {0..d}, each of size t, with Σ_{j<i} 2^{|S_j ∩ S_i|} ≤ r·m.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeakDesign {
    pub t: usize,
    pub d: usize,
    /// Sorted, distinct elements of each set.
    pub sets: Vec<Vec<u32>>,
}

impl WeakDesign {
    pub fn m(&self) -> usize {
        self.sets.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignCheck {
    pub valid: bool,
    pub sizes_ok: bool,
    /// Index with the largest overlap sum, and that sum (saturating).
    pub worst_index: usize,
    pub worst_sum: u128,
    pub bound: f64,
}

fn intersection(a: &[u32], b: &[u32]) -> u32 {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Direct check of both design clauses.
pub fn verify_weak_design(design: &WeakDesign, r: f64) -> DesignCheck {
    let m = design.m();
    let bound = r * m as f64;
    let sizes_ok = design.sets.iter().all(|s| {
        s.len() == design.t && s.windows(2).all(|w| w[0] < w[1]) && s.iter().all(|&e| (e as usize) < design.d)
    });
    let mut worst_index = 0;
    let mut worst_sum = 0u128;
    for i in 0..m {
        let sum = design.sets[..i].iter().fold(0u128, |acc, sj| {
            let common = intersection(sj, &design.sets[i]);
            acc.saturating_add(if common >= 128 { u128::MAX } else { 1u128 << common })
        });
        if i == 0 || sum > worst_sum {
            worst_index = i;
            worst_sum = sum;
        }
    }
    let valid = sizes_ok && m > 0 && (worst_sum as f64) <= bound;
    DesignCheck { valid, sizes_ok, worst_index, worst_sum, bound }
}

/// ⌈t/ln 2⌉.
fn columns(t: usize) -> usize {
    (t as f64 / LN_2).ceil() as usize
}

/// t·⌈t/ln 2⌉·⌈log₂ 4m⌉.
pub(crate) fn seed_length_bound(t: usize, m: usize) -> usize {
    t * columns(t) * ((4 * m) as f64).log2().ceil() as usize
}

fn least_prime_at_least(n: usize) -> usize {
    let is_prime = |p: usize| p >= 2 && (2..).take_while(|d| d * d <= p).all(|d| !p.is_multiple_of(d));
    (n..).find(|&p| is_prime(p)).expect("primes are unbounded")
}

/// Sets {(a, p(a)) : a < t} for the first m polynomials of degree ≤ D over GF(q).
fn polynomial_design(t: usize, m: usize) -> Option<WeakDesign> {
    let q = least_prime_at_least(t);
    let degree = if m <= 1 { 0 } else { ((m as f64).ln() / (t as f64).ln()).ceil() as usize };
    let coeffs = degree + 1;
    if (q as f64).powi(coeffs as i32) < m as f64 {
        return None;
    }
    let mut sets = Vec::with_capacity(m);
    let mut c = vec![0usize; coeffs];
    for _ in 0..m {
        let set: Vec<u32> = (0..t)
            .map(|a| {
                let v = c.iter().rev().fold(0, |acc, &ci| (acc * a + ci) % q);
                (a * q + v) as u32
            })
            .collect();
        sets.push(set);
        for ci in c.iter_mut() {
            *ci += 1;
            if *ci < q {
                break;
            }
            *ci = 0;
        }
    }
    Some(WeakDesign { t, d: t * q, sets })
}

/// Greedy derandomisation of one-element-per-row sets over [t]×[ℓ], ℓ = ⌈t/ln 2⌉.
///
/// Each row value is chosen to minimise Σ_{j: s_j(c) = v} 2^{agree_j}, which
/// keeps Σ_{j<i} 2^{|S_j ∩ S_i|} ≤ (i − 1)(1 + 1/ℓ)^t ≤ 2(i − 1).
fn greedy_rows(t: usize, m: usize) -> Vec<Vec<u32>> {
    let l = columns(t);
    let mut rows: Vec<Vec<u32>> = Vec::with_capacity(m);
    let mut cost = vec![0f64; l];
    for _ in 0..m {
        let mut agree = vec![0i32; rows.len()];
        let mut mine = Vec::with_capacity(t);
        for c in 0..t {
            cost.iter_mut().for_each(|v| *v = 0.0);
            for (j, s) in rows.iter().enumerate() {
                cost[s[c] as usize] += (agree[j] as f64).exp2();
            }
            let v = (0..l).min_by(|&a, &b| cost[a].total_cmp(&cost[b])).unwrap_or(0);
            for (j, s) in rows.iter().enumerate() {
                if s[c] as usize == v {
                    agree[j] += 1;
                }
            }
            mine.push(v as u32);
        }
        rows.push(mine);
    }
    rows
}

fn rows_to_sets(rows: &[Vec<u32>], l: usize, offset: usize) -> Vec<Vec<u32>> {
    rows.iter()
        .map(|r| r.iter().enumerate().map(|(c, &v)| (offset + c * l + v as usize) as u32).collect())
        .collect()
}

fn greedy_design(t: usize, m: usize) -> WeakDesign {
    let l = columns(t);
    WeakDesign { t, d: t * l, sets: rows_to_sets(&greedy_rows(t, m), l, 0) }
}

/// Blocks of sizes ⌈rem/2⌉ over disjoint universes, each a greedy design.
fn blocked_design(t: usize, m: usize) -> WeakDesign {
    let l = columns(t);
    let mut sets = Vec::with_capacity(m);
    let mut rem = m;
    let mut offset = 0;
    while rem > 0 {
        let size = rem.div_ceil(2);
        sets.extend(rows_to_sets(&greedy_rows(t, size), l, offset));
        offset += t * l;
        rem -= size;
    }
    WeakDesign { t, d: offset, sets }
}

/// Builds a verified weak (t, r, m, d)-design with d ≤ t⌈t/ln 2⌉⌈log₂ 4m⌉.
///
/// Tries the polynomial construction, then the greedy one (r ≤ 2), then the
/// blocked one (r ≤ 1). Only a design that passes [`verify_weak_design`] is returned.
pub fn build_weak_design(t: usize, m: usize, r_target: f64) -> Result<WeakDesign> {
    if t < 2 || m == 0 {
        return Err(Error::param(format!("weak design needs t ≥ 2 and m ≥ 1, got t={t} m={m}")));
    }
    if !(r_target > 0.0) {
        return Err(Error::param(format!("r = {r_target} must be positive")));
    }
    if m == 1 {
        return Ok(WeakDesign { t, d: t, sets: vec![(0..t as u32).collect()] });
    }
    let d_max = seed_length_bound(t, m);
    let accept = |d: &WeakDesign| d.d <= d_max && verify_weak_design(d, r_target).valid;
    if let Some(d) = polynomial_design(t, m).filter(|d| accept(d)) {
        return Ok(d);
    }
    let greedy = greedy_design(t, m);
    if accept(&greedy) {
        return Ok(greedy);
    }
    let blocked = blocked_design(t, m);
    if accept(&blocked) {
        return Ok(blocked);
    }
    let check = verify_weak_design(&blocked, r_target);
    Err(Error::DesignConstruction(format!(
        "no construction met r = {r_target} for t={t} m={m}: best sum {} at index {} vs bound {}",
        check.worst_sum, check.worst_index, check.bound
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_set() {
        let d = build_weak_design(5, 1, 0.5).unwrap();
        assert_eq!(d.m(), 1);
        assert_eq!(d.d, 5);
        assert!(verify_weak_design(&d, 0.01).valid);
    }

    #[test]
    fn disjoint_family() {
        let t = 4;
        let sets: Vec<Vec<u32>> = (0..10u32).map(|i| (0..t as u32).map(|e| i * t as u32 + e).collect()).collect();
        let d = WeakDesign { t, d: 40, sets };
        let check = verify_weak_design(&d, 1.0);
        assert!(check.valid);
        assert_eq!(check.worst_sum, 9);
    }

    #[test]
    fn identical_family_fails() {
        let t = 4;
        let m = 6;
        let d = WeakDesign { t, d: t, sets: vec![(0..t as u32).collect(); m] };
        let check = verify_weak_design(&d, 2.0);
        assert!(!check.valid);
        // (i − 1)·2^t first exceeds r·m = 12 at the second set.
        assert_eq!(check.worst_index, m - 1);
        assert_eq!(check.worst_sum, 5 * 16);
        assert!(verify_weak_design(&WeakDesign { t, d: t, sets: vec![(0..t as u32).collect(); 1] }, 1.0).valid);
    }

    #[test]
    fn rejects_malformed_sets() {
        let d = WeakDesign { t: 3, d: 5, sets: vec![vec![0, 1, 7]] };
        assert!(!verify_weak_design(&d, 10.0).sizes_ok);
        let d = WeakDesign { t: 3, d: 5, sets: vec![vec![0, 1]] };
        assert!(!verify_weak_design(&d, 10.0).valid);
    }

    #[test]
    fn builder_fixtures() {
        for t in [8, 16] {
            for m in [16, 64] {
                for r in [2.0, 1.0] {
                    let d = build_weak_design(t, m, r).unwrap();
                    assert!(verify_weak_design(&d, r).valid, "t={t} m={m} r={r}");
                    assert!(d.d <= seed_length_bound(t, m));
                    assert_eq!(d.m(), m);
                }
            }
        }
        assert_eq!(seed_length_bound(16, 64), 16 * 24 * 8);
    }

    #[test]
    fn large_parameters() {
        let d = build_weak_design(142, 300, 2.0).unwrap();
        assert!(verify_weak_design(&d, 2.0).valid);
    }

    #[test]
    fn bad_arguments() {
        assert!(build_weak_design(1, 4, 2.0).is_err());
        assert!(build_weak_design(4, 0, 2.0).is_err());
        assert!(build_weak_design(4, 4, 0.0).is_err());
    }
}
