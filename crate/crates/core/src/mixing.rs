//! Exact strong-mixing coefficients of small stationary chains, and the
//! rate exponent obtained from polynomial mixing with moments of order `p`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::models::FiniteMarkovChain;

/// Subset enumeration is exponential in the number of states.
pub const MAX_MIXING_STATES: usize = 14;

fn check_chain(chain: &FiniteMarkovChain) -> Result<()> {
    if chain.n_states() > MAX_MIXING_STATES {
        return Err(Error::ResourceLimit(format!(
            "{} states; at most {MAX_MIXING_STATES} supported",
            chain.n_states()
        )));
    }
    if !chain.is_irreducible() {
        return invalid("chain must be irreducible");
    }
    let period = chain.period();
    if period > 1 {
        return Err(Error::PeriodicChain { period });
    }
    Ok(())
}

/// `max_{S,T} |sum_{i in S, j in T} pi_i (P^n_ij - pi_j)|`, for the chain
/// started from its stationary law.
pub fn alpha_exact(chain: &FiniteMarkovChain, n: u64) -> Result<f64> {
    check_chain(chain)?;
    let pi = chain.stationary();
    let pn = matrix_power(&chain.matrix(), n);
    Ok(alpha_from_power(&pi, &pn))
}

fn matrix_power(m: &DMatrix<f64>, mut n: u64) -> DMatrix<f64> {
    let k = m.nrows();
    let mut acc = DMatrix::identity(k, k);
    let mut base = m.clone();
    while n > 0 {
        if n & 1 == 1 {
            acc = &acc * &base;
        }
        base = &base * &base;
        n >>= 1;
    }
    acc
}

fn alpha_from_power(pi: &[f64], pn: &DMatrix<f64>) -> f64 {
    let k = pi.len();
    let mut best = 0.0f64;
    // For fixed S the best T collects the positive (or the negative) columns.
    for s in 1u32..(1 << k) {
        let mut pos = 0.0;
        let mut neg = 0.0;
        for j in 0..k {
            let c: f64 = (0..k)
                .filter(|i| s >> i & 1 == 1)
                .map(|i| pi[i] * (pn[(i, j)] - pi[j]))
                .sum();
            if c > 0.0 {
                pos += c;
            } else {
                neg -= c;
            }
        }
        best = best.max(pos).max(neg);
    }
    best.min(0.25)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingProfile {
    pub alphas: Vec<(u64, f64)>,
    /// Largest `lambda` with `sum_n n^lambda alpha(n)` at most the cap over
    /// the profiled range.
    #[serde(with = "crate::types::ext_f64")]
    pub lambda_fit: f64,
}

/// Upper end of the `lambda_fit` search.
pub const LAMBDA_FIT_MAX: f64 = 64.0;

/// `alpha(n)` for `n = 1..=n_max`, with the fitted polynomial order.
pub fn mixing_profile(chain: &FiniteMarkovChain, n_max: u64, cap: f64) -> Result<MixingProfile> {
    check_chain(chain)?;
    if n_max == 0 {
        return invalid("n_max must be positive");
    }
    if !(cap > 0.0) {
        return invalid("cap must be positive");
    }
    let pi = chain.stationary();
    let p = chain.matrix();
    let mut pn = p.clone();
    let mut alphas = Vec::with_capacity(n_max as usize);
    for n in 1..=n_max {
        alphas.push((n, alpha_from_power(&pi, &pn)));
        pn = &pn * &p;
    }
    Ok(MixingProfile {
        lambda_fit: fit_lambda(&alphas, cap),
        alphas,
    })
}

fn fit_lambda(alphas: &[(u64, f64)], cap: f64) -> f64 {
    let weighted = |lambda: f64| -> f64 {
        alphas
            .iter()
            .map(|&(n, a)| (n as f64).powf(lambda) * a)
            .sum()
    };
    if weighted(LAMBDA_FIT_MAX) <= cap {
        return f64::INFINITY;
    }
    if weighted(0.0) > cap {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, LAMBDA_FIT_MAX);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if weighted(mid) <= cap {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// The exponent `e` in a rate `n^{-e}`, with the accompanying `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateExponent {
    pub exponent: f64,
    pub delta: f64,
}

/// `p = inf` gives `delta = lambda`; finite `p > 2` gives
/// `delta = (lambda (p - 2) - 2) / (lambda + 1 + p)`. The exponent is
/// `min(delta / 2, 1/2)`. `None` when `lambda <= 2 / (p - 2)`.
pub fn thm22_exponent(p: f64, lambda: f64) -> Option<RateExponent> {
    if !(p > 2.0) || !(lambda > 0.0) || lambda.is_infinite() {
        return None;
    }
    let delta = if p.is_infinite() {
        lambda
    } else {
        if lambda <= 2.0 / (p - 2.0) {
            return None;
        }
        (lambda * (p - 2.0) - 2.0) / (lambda + 1.0 + p)
    };
    Some(RateExponent {
        exponent: (delta / 2.0).min(0.5),
        delta,
    })
}
