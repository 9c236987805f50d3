//! Oracles computed without the library's own algorithms.
#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_regen-rates"))
}

pub fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg(cmd)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .env_remove("REGEN_RATES_THREADS")
        .output()
        .expect("binary runs")
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

/// Kolmogorov distance of `(2 Bin(n, 1/2) - n) / sqrt n` to `cdf`.
pub fn rademacher_distance(n: u64, cdf: impl Fn(f64) -> f64) -> f64 {
    let pmf = binomial_half(n);
    let sn = (n as f64).sqrt();
    let mut below = 0.0;
    let mut sup = 0.0f64;
    for (k, p) in pmf.iter().enumerate() {
        let z = (2.0 * k as f64 - n as f64) / sn;
        let r = cdf(z);
        sup = sup.max((below - r).abs());
        below += p;
        sup = sup.max((below - r).abs());
    }
    sup
}

/// Block law of a finite chain between visits to `anchor`, as
/// `(length, sum, prob)`, by enumerating excursions step by step.
/// `f` must be integer valued. Returns the law and the untracked tail mass.
pub fn excursion_law(
    p: &[Vec<f64>],
    f: &[i64],
    anchor: usize,
    max_len: usize,
) -> (Vec<(u64, i64, f64)>, f64) {
    use std::collections::BTreeMap;
    let k = p.len();
    let mut out = Vec::new();
    // (state, sum) -> mass, for paths that have left the anchor and not returned
    let mut live: BTreeMap<(usize, i64), f64> = BTreeMap::new();
    let start = f[anchor];
    for j in 0..k {
        if p[anchor][j] == 0.0 {
            continue;
        }
        if j == anchor {
            out.push((1, start, p[anchor][j]));
        } else {
            *live.entry((j, start + f[j])).or_default() += p[anchor][j];
        }
    }
    for len in 2..=max_len as u64 {
        let mut next: BTreeMap<(usize, i64), f64> = BTreeMap::new();
        let mut ret: BTreeMap<i64, f64> = BTreeMap::new();
        for (&(i, s), &m) in &live {
            for j in 0..k {
                let q = m * p[i][j];
                if q == 0.0 {
                    continue;
                }
                if j == anchor {
                    *ret.entry(s).or_default() += q;
                } else {
                    *next.entry((j, s + f[j])).or_default() += q;
                }
            }
        }
        out.extend(ret.into_iter().map(|(s, q)| (len, s, q)));
        live = next;
    }
    (out, live.values().sum())
}

/// `(tau_bar, mu, sigma^2)` of a block law.
pub fn block_moments(law: &[(u64, i64, f64)]) -> (f64, f64, f64) {
    let tau: f64 = law.iter().map(|&(l, _, p)| l as f64 * p).sum();
    let s: f64 = law.iter().map(|&(_, s, p)| s as f64 * p).sum();
    let mu = s / tau;
    let var: f64 = law
        .iter()
        .map(|&(l, s, p)| p * (s as f64 - mu * l as f64).powi(2))
        .sum();
    (tau, mu, var / tau)
}

/// Law of the sum of `n` independent copies of a pair on `{0,1}^2` with
/// `probs[2 v + w]`, by listing all `4^n` outcomes. Indexed `[a][b]`.
pub fn brute_force_pairs(probs: [f64; 4], n: u32) -> Vec<Vec<f64>> {
    let mut table = vec![vec![0.0; n as usize + 1]; n as usize + 1];
    for code in 0u64..4u64.pow(n) {
        let (mut a, mut b, mut p) = (0usize, 0usize, 1.0);
        let mut c = code;
        for _ in 0..n {
            let o = (c & 3) as usize;
            c >>= 2;
            a += o >> 1;
            b += o & 1;
            p *= probs[o];
        }
        table[a][b] += p;
    }
    table
}

/// Independent Bernoulli(1/2) pair: `sup (1 + y^2) |F - psi / sqrt n|` with
/// `Sigma = diag(1/4, 1/4)`, over both sides of every jump, every row out
/// to `margin` beyond the support and the `x -> inf` limit.
pub fn bernoulli_semilocal(
    table: &[Vec<f64>],
    n: u64,
    phi: impl Fn(f64) -> f64,
    margin: i64,
) -> f64 {
    let sn = (n as f64).sqrt();
    let dens = |y: f64| (-2.0 * y * y).exp() * (2.0 / std::f64::consts::PI).sqrt();
    let psi = |x: f64, y: f64| dens(y) * phi(2.0 * x);
    let mut sup = 0.0f64;
    for b in -margin..=n as i64 + margin {
        let y = (b as f64 - n as f64 / 2.0) / sn;
        let w = 1.0 + y * y;
        let mut cdf = 0.0;
        for (a, row) in table.iter().enumerate() {
            let x = (a as f64 - n as f64 / 2.0) / sn;
            let g = psi(x, y) / sn;
            sup = sup.max(w * (cdf - g).abs());
            if (0..=n as i64).contains(&b) {
                cdf += row[b as usize];
            }
            sup = sup.max(w * (cdf - g).abs());
        }
        sup = sup.max(w * (cdf - dens(y) / sn).abs());
    }
    sup
}

/// Composite Simpson rule with `m` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Centered bivariate normal density from the explicit inverse.
pub fn bivariate_density(s11: f64, s12: f64, s22: f64, x: f64, y: f64) -> f64 {
    let det = s11 * s22 - s12 * s12;
    let q = (s22 * x * x - 2.0 * s12 * x * y + s11 * y * y) / det;
    (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
}
