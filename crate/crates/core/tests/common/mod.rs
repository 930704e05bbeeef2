//! Brute-force oracles shared by the integration tests. These re-derive the
//! scheme's laws from the slot rule on bitmasks and never call the
//! simulators they are compared against.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Nodes `0..k` active, `k..k+n` inactive, as in `Population::leading_active`.
fn active_mask(k: usize) -> u32 {
    (1u32 << k) - 1
}

fn pattern_probability(pattern: u32, total: usize, p: f64) -> f64 {
    let chosen = pattern.count_ones() as i32;
    p.powi(chosen) * (1.0 - p).powi(total as i32 - chosen)
}

/// Exact law of `(A_1, removed_count)` after one slot with the ideal oracle,
/// by enumerating all `2^(N+k)` choice patterns.
pub fn enumerate_single_slot(n_inactive: usize, k: usize, p: f64) -> BTreeMap<(bool, usize), f64> {
    let total = n_inactive + k;
    let active = active_mask(k);
    let mut law = BTreeMap::new();
    for pattern in 0u32..(1 << total) {
        let any_active = pattern & active != 0;
        let removed = if any_active { 0 } else { pattern.count_ones() as usize };
        *law.entry((any_active, removed)).or_insert(0.0) += pattern_probability(pattern, total, p);
    }
    law
}

pub fn binomial_coefficient(n: usize, r: usize) -> f64 {
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Law the surplus chain samples from: `A = 0` with probability `q^k`, then
/// `removed ~ Binomial(N, p)`.
pub fn analytic_single_slot(n_inactive: usize, k: usize, p: f64) -> BTreeMap<(bool, usize), f64> {
    let q = 1.0 - p;
    let none = q.powi(k as i32);
    let mut law = BTreeMap::new();
    if k > 0 {
        law.insert((true, 0), 1.0 - none);
    }
    for r in 0..=n_inactive {
        let w = none * binomial_coefficient(n_inactive, r) * p.powi(r as i32) * q.powi((n_inactive - r) as i32);
        law.insert((false, r), w);
    }
    law
}

/// Exact law of `M_ℓ` (index = surplus) by propagating the distribution of
/// the potential-set bitmask slot by slot over all choice patterns.
pub fn enumerate_surplus_law(n_inactive: usize, k: usize, p: f64, slots: usize) -> Vec<f64> {
    let total = n_inactive + k;
    let active = active_mask(k);
    let all = (1u32 << total) - 1;
    let weights: Vec<f64> = (0u32..(1 << total)).map(|pat| pattern_probability(pat, total, p)).collect();
    let mut dist: HashMap<u32, f64> = HashMap::from([(all, 1.0)]);
    for _ in 0..slots {
        let mut next: HashMap<u32, f64> = HashMap::new();
        for (&state, &w) in &dist {
            for pattern in 0u32..(1 << total) {
                let after = if pattern & active != 0 { state } else { state & !pattern };
                *next.entry(after).or_insert(0.0) += w * weights[pattern as usize];
            }
        }
        dist = next;
    }
    let mut law = vec![0.0; n_inactive + 1];
    for (state, w) in dist {
        law[(state & !active).count_ones() as usize] += w;
    }
    law
}

/// Pearson chi-square goodness of fit. Adjacent bins are pooled until each
/// pooled bin expects at least 5 counts. Returns `(statistic, df, p_value)`.
pub fn chi_square(observed: &[u64], probabilities: &[f64]) -> (f64, usize, f64) {
    assert_eq!(observed.len(), probabilities.len());
    let n: u64 = observed.iter().sum();
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&obs, &prob) in observed.iter().zip(probabilities) {
        o += obs as f64;
        e += prob * n as f64;
        if e >= 5.0 {
            pooled.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => pooled.push((o, e)),
        }
    }
    let stat: f64 = pooled.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let df = pooled.len().saturating_sub(1).max(1);
    let p_value = 1.0 - ChiSquared::new(df as f64).unwrap().cdf(stat);
    (stat, df, p_value)
}
