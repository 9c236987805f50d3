//! Independent oracles for the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

/// Excursion law of a finite chain away from `anchor`, enumerated step by
/// step: `(length, sum) -> prob`, plus the mass still out after `max_len`.
pub fn excursion_law(
    p: &[Vec<f64>],
    f: &[i64],
    anchor: usize,
    max_len: u64,
) -> (BTreeMap<(u64, i64), f64>, f64) {
    let k = p.len();
    let mut out = BTreeMap::new();
    let mut live: BTreeMap<(usize, i64), f64> = BTreeMap::new();
    live.insert((anchor, f[anchor]), 1.0);
    for len in 1..=max_len {
        let mut next: BTreeMap<(usize, i64), f64> = BTreeMap::new();
        for (&(i, s), &m) in &live {
            for j in 0..k {
                let q = m * p[i][j];
                if q == 0.0 {
                    continue;
                }
                if j == anchor {
                    *out.entry((len, s)).or_default() += q;
                } else {
                    *next.entry((j, s + f[j])).or_default() += q;
                }
            }
        }
        live = next;
    }
    (out, live.values().sum())
}

pub fn block_moments(law: &BTreeMap<(u64, i64), f64>) -> (f64, f64, f64) {
    let tau: f64 = law.iter().map(|(&(l, _), p)| l as f64 * p).sum();
    let s: f64 = law.iter().map(|(&(_, s), p)| s as f64 * p).sum();
    let mu = s / tau;
    let v: f64 = law
        .iter()
        .map(|(&(l, s), p)| p * (s as f64 - mu * l as f64).powi(2))
        .sum();
    (tau, mu, v / tau)
}

/// Quenched mean and variance of the time to step from 0 to 1, by the
/// first-step recursions run from site `-(ps.len() - 1)` up to 0. `ps[0]`
/// is the deepest site; the walk is started at the homogeneous values
/// beyond it.
pub fn quenched_t1_moments(ps: &[f64], deep_p: f64) -> (f64, f64) {
    let t_far = 1.0 / (2.0 * deep_p - 1.0);
    let s_far = t_far * t_far + 4.0 * deep_p * (1.0 - deep_p) / (2.0 * deep_p - 1.0).powi(3);
    let (mut t, mut s) = (t_far, s_far);
    for &p in ps {
        let q = 1.0 - p;
        let tn = (1.0 + q * t) / p;
        let sn = (1.0 + q * (2.0 * t + 2.0 * tn + s + 2.0 * t * tn)) / p;
        t = tn;
        s = sn;
    }
    (t, s - t * t)
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// `P(Bin(n, 1/2) = k)` for all `k`, by halving Pascal rows.
pub fn binomial_half(n: u64) -> Vec<f64> {
    let mut row = vec![1.0f64];
    for _ in 0..n {
        let mut next = vec![0.0; row.len() + 1];
        for (k, &p) in row.iter().enumerate() {
            next[k] += 0.5 * p;
            next[k + 1] += 0.5 * p;
        }
        row = next;
    }
    row
}
