//! Kolmogorov distances to the standard normal, rate sweeps over `n` and
//! log-log rate fits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gaussian::phi_cdf;
use crate::models::{BlockKind, ModelFactory, ProcessModel};
use crate::regen::draw_block_retrying;
use crate::rng::{domain, SeedSpec};
use crate::types::{BlockEstimates, DistanceModeTag, RatePoint, RateSeries};

/// Paths simulated per random stream in Monte Carlo mode.
pub const PATHS_PER_BATCH: u64 = 1024;
/// Default DKW miscoverage level.
pub const DEFAULT_DKW_BETA: f64 = 0.05;

/// `sup_t |F(t) - reference(t)|` for the empirical distribution of `sample`,
/// checking both one-sided limits at every jump.
pub fn kolmogorov_distance_sample(sample: &[f64], reference: impl Fn(f64) -> f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptyInput);
    }
    if sample.iter().any(|x| x.is_nan()) {
        return invalid("sample contains NaN");
    }
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let w = 1.0 / xs.len() as f64;
    let atoms: Vec<(f64, f64)> = xs.iter().map(|&x| (x, w)).collect();
    kolmogorov_distance_exact(&atoms, reference)
}

/// Same for a step CDF given as `(value, prob)` atoms sorted by value.
/// Equal values are merged.
pub fn kolmogorov_distance_exact(
    atoms: &[(f64, f64)],
    reference: impl Fn(f64) -> f64,
) -> Result<f64> {
    if atoms.is_empty() {
        return Err(Error::EmptyInput);
    }
    if atoms.windows(2).any(|w| w[1].0 < w[0].0) {
        return invalid("atoms must be sorted by value");
    }
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    let mut below = 0.0;
    let mut sup = 0.0f64;
    let mut i = 0;
    while i < atoms.len() {
        let x = atoms[i].0;
        let mut mass = 0.0;
        while i < atoms.len() && atoms[i].0 == x {
            mass += atoms[i].1;
            i += 1;
        }
        let r = reference(x);
        sup = sup.max((below / total - r).abs());
        below += mass;
        sup = sup.max((below / total - r).abs());
    }
    Ok(sup.min(1.0))
}

/// How a distance at fixed `n` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistanceMode {
    /// The exact law of `X_n`, when the model can enumerate it.
    Exact,
    MonteCarlo {
        n_paths: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateOptions {
    pub mode: DistanceMode,
    /// Start paths with the initial-law block rather than after a
    /// regeneration.
    pub include_first_block: bool,
    pub dkw_beta: f64,
    pub master_seed: u64,
}

impl RateOptions {
    pub fn new(mode: DistanceMode, master_seed: u64) -> Self {
        Self {
            mode,
            include_first_block: false,
            dkw_beta: DEFAULT_DKW_BETA,
            master_seed,
        }
    }
}

/// Dvoretzky-Kiefer-Wolfowitz half-width `sqrt(ln(2 / beta) / (2 m))`.
pub fn dkw_bound(n_paths: u64, beta: f64) -> f64 {
    ((2.0 / beta).ln() / (2.0 * n_paths as f64)).sqrt()
}

/// Kolmogorov distance between `(X_n - n mu) / (sigma sqrt n)` and the
/// standard normal.
///
/// Exact mode centers and scales with the model's exact block law when it
/// has one; Monte Carlo mode uses the closed-form `mu` when known, else
/// `est.mu_hat`, and always `est.sigma2_hat`.
pub fn regen_clt_distance(
    factory: &dyn ModelFactory,
    est: &BlockEstimates,
    n: u64,
    opts: &RateOptions,
) -> Result<RatePoint> {
    if est.degenerate || !(est.sigma2_hat > 0.0) {
        return Err(Error::DegenerateSigma);
    }
    if n == 0 {
        return invalid("n must be positive");
    }
    match opts.mode {
        DistanceMode::Exact => exact_distance(factory, est, n, opts.include_first_block),
        DistanceMode::MonteCarlo { n_paths } => {
            monte_carlo_distance(factory, est, n, n_paths, opts)
        }
    }
}

fn exact_distance(
    factory: &dyn ModelFactory,
    est: &BlockEstimates,
    n: u64,
    include_first: bool,
) -> Result<RatePoint> {
    let model = factory.instantiate()?;
    let (mu, sigma2) = match model.exact_block_law() {
        Some(law) => (law.mu(), law.sigma2()),
        None => (est.mu_hat, est.sigma2_hat),
    };
    if !(sigma2 > 0.0) {
        return Err(Error::DegenerateSigma);
    }
    let law = model.exact_value_law(n, include_first)?;
    let scale = (sigma2 * n as f64).sqrt();
    let centre = n as f64 * mu;
    let atoms: Vec<(f64, f64)> = law
        .iter()
        .map(|&(v, p)| ((v - centre) / scale, p))
        .collect();
    Ok(RatePoint {
        n,
        distance: kolmogorov_distance_exact(&atoms, phi_cdf)?,
        dkw_bound: 0.0,
        n_paths: 0,
        mode: DistanceModeTag::Exact,
        mean_snap_offset: 0.0,
    })
}

/// One simulated value of `X_n`, and the actual end time when the model
/// cannot be cut mid-block.
fn simulate_path(
    model: &mut dyn ProcessModel,
    rng: &mut crate::rng::Stream,
    n: u64,
    include_first: bool,
    trace: &mut Vec<f64>,
    counters: &mut (u64, u64),
) -> Result<(f64, u64)> {
    let traces = model.traces_increments();
    let mut t = 0u64;
    let mut x = 0.0;
    let mut kind = if include_first {
        BlockKind::First
    } else {
        BlockKind::Regular
    };
    while t < n {
        let tr = if traces { Some(&mut *trace) } else { None };
        let b = draw_block_retrying(model, kind, rng, tr, &mut counters.0, &mut counters.1)?;
        kind = BlockKind::Regular;
        if t + b.length <= n {
            t += b.length;
            x += b.sum;
        } else if traces {
            let k = (n - t) as usize;
            x += trace[..k].iter().sum::<f64>();
            t = n;
        } else {
            // snap to the nearer block boundary
            if n - t >= t + b.length - n {
                t += b.length;
                x += b.sum;
            }
            break;
        }
    }
    Ok((x, t))
}

fn monte_carlo_distance(
    factory: &dyn ModelFactory,
    est: &BlockEstimates,
    n: u64,
    n_paths: u64,
    opts: &RateOptions,
) -> Result<RatePoint> {
    if n_paths == 0 {
        return invalid("n_paths must be positive");
    }
    if !(opts.dkw_beta > 0.0 && opts.dkw_beta < 1.0) {
        return invalid("dkw_beta must lie in (0, 1)");
    }
    let mu = factory
        .instantiate()?
        .closed_form_mu()
        .unwrap_or(est.mu_hat);
    let sigma = est.sigma2_hat.sqrt();
    let seed = opts.master_seed ^ n.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let batches = n_paths.div_ceil(PATHS_PER_BATCH);
    let results: Vec<(Vec<f64>, u64)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let count = PATHS_PER_BATCH.min(n_paths - b * PATHS_PER_BATCH);
            let mut model = factory.instantiate()?;
            let mut rng = SeedSpec::for_domain(seed, domain::PATHS, b).stream();
            let mut trace = Vec::new();
            let mut counters = (0u64, 0u64);
            let mut z = Vec::with_capacity(count as usize);
            let mut offsets = 0u64;
            for _ in 0..count {
                let (x, t) = simulate_path(
                    model.as_mut(),
                    &mut rng,
                    n,
                    opts.include_first_block,
                    &mut trace,
                    &mut counters,
                )?;
                offsets += t.abs_diff(n);
                z.push((x - t as f64 * mu) / (sigma * (t as f64).sqrt()));
            }
            Ok((z, offsets))
        })
        .collect::<Result<_>>()?;
    let mut sample = Vec::with_capacity(n_paths as usize);
    let mut offsets = 0u64;
    for (z, o) in results {
        sample.extend(z);
        offsets += o;
    }
    Ok(RatePoint {
        n,
        distance: kolmogorov_distance_sample(&sample, phi_cdf)?,
        dkw_bound: dkw_bound(n_paths, opts.dkw_beta),
        n_paths,
        mode: DistanceModeTag::MonteCarlo,
        mean_snap_offset: offsets as f64 / n_paths as f64,
    })
}

/// Distances over a strictly increasing list of at least three `n`.
pub fn rate_sweep(
    factory: &dyn ModelFactory,
    est: &BlockEstimates,
    ns: &[u64],
    opts: &RateOptions,
    delta: f64,
) -> Result<RateSeries> {
    if ns.len() < 3 {
        return invalid("a rate sweep needs at least 3 values of n");
    }
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("sweep n values must be strictly increasing");
    }
    let points: Vec<RatePoint> = ns
        .par_iter()
        .map(|&n| regen_clt_distance(factory, est, n, opts))
        .collect::<Result<_>>()?;
    RateSeries::new(points, delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub n_min: u64,
    pub n_max: u64,
    pub n_points: usize,
    /// `max_n n^{delta/2} distance_n`.
    pub sup_constant: f64,
    pub delta: f64,
}

/// Least-squares fit of `ln distance` on `ln n`. Zero distances are dropped
/// with a warning.
pub fn fit_rate(series: &RateSeries) -> Result<RateFit> {
    let kept: Vec<&RatePoint> = series
        .points
        .iter()
        .filter(|p| {
            if p.distance > 0.0 {
                true
            } else {
                log::warn!("dropping zero distance at n = {}", p.n);
                false
            }
        })
        .collect();
    if kept.len() < 3 {
        return invalid(format!("only {} positive distances; need 3", kept.len()));
    }
    let xs: Vec<f64> = kept.iter().map(|p| (p.n as f64).ln()).collect();
    let ys: Vec<f64> = kept.iter().map(|p| p.distance.ln()).collect();
    let m = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / m;
    let ybar = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - xbar) * (y - ybar))
        .sum();
    let syy: f64 = ys.iter().map(|y| (y - ybar).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r2 = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let sup_constant = kept
        .iter()
        .map(|p| (p.n as f64).powf(series.delta / 2.0) * p.distance)
        .fold(0.0, f64::max);
    Ok(RateFit {
        slope,
        intercept,
        r2,
        n_min: kept[0].n,
        n_max: kept[kept.len() - 1].n,
        n_points: kept.len(),
        sup_constant,
        delta: series.delta,
    })
}
