//! Block harvesting and the regenerative moment estimators.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gaussian::CovarianceMatrix2;
use crate::models::{BlockKind, ModelFactory, ProcessModel};
use crate::rng::{domain, SeedSpec, Stream};
use crate::types::{BlockEstimates, BlockSample, MomentEstimate};

/// Jackknife groups used for standard errors.
pub const JACKKNIFE_GROUPS: usize = 20;
/// Fraction of the largest block lengths fed to the Hill estimator.
pub const HILL_TOP_FRACTION: f64 = 0.05;
/// Below this many blocks no tail index is reported.
pub const HILL_MIN_BLOCKS: usize = 100;

/// Attempts before persistent censoring aborts a harvest.
const MIN_ATTEMPTS_BEFORE_ABORT: u64 = 100;
const ABORT_CENSOR_FRACTION: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarvestPlan {
    pub n_blocks: usize,
    pub n_streams: usize,
    pub delta: f64,
    #[serde(default)]
    pub include_first_block: bool,
}

impl HarvestPlan {
    pub fn validate(&self) -> Result<()> {
        if self.n_blocks < 2 {
            return invalid("n_blocks must be at least 2");
        }
        if self.n_streams == 0 {
            return invalid("n_streams must be positive");
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return invalid(format!("delta must lie in (0,1], got {}", self.delta));
        }
        Ok(())
    }
}

/// A harvested block with its stream and position in generation order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarvestedBlock {
    pub stream: u64,
    pub index: u64,
    #[serde(flatten)]
    pub sample: BlockSample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Harvest {
    /// Post-regeneration blocks, stream by stream.
    pub blocks: Vec<HarvestedBlock>,
    pub first_block: Option<BlockSample>,
    /// Block draws attempted, including censored ones.
    pub attempts: u64,
    /// Draws that failed with a censored trajectory.
    pub censored_attempts: u64,
    /// Regeneration candidates the models discarded at the horizon.
    pub censored_candidates: u64,
}

impl Harvest {
    pub fn samples(&self) -> Vec<BlockSample> {
        self.blocks.iter().map(|b| b.sample).collect()
    }
}

#[derive(Debug, Default)]
struct DrawStats {
    attempts: u64,
    censored: u64,
}

/// Draws one block, retrying censored trajectories until the censoring
/// rate makes further attempts pointless.
fn draw_with_retry(
    model: &mut dyn ProcessModel,
    kind: BlockKind,
    rng: &mut Stream,
    trace: Option<&mut Vec<f64>>,
    stats: &mut DrawStats,
) -> Result<BlockSample> {
    let mut trace = trace;
    loop {
        stats.attempts += 1;
        match model.draw_block(kind, rng, trace.as_deref_mut()) {
            Ok(b) => return Ok(b),
            Err(Error::CensoredBlock { .. }) => {
                stats.censored += 1;
                if stats.attempts >= MIN_ATTEMPTS_BEFORE_ABORT
                    && stats.censored as f64 >= ABORT_CENSOR_FRACTION * stats.attempts as f64
                {
                    return Err(Error::HarvestFailed {
                        attempts: stats.attempts,
                        censored: stats.censored,
                    });
                }
            }
            Err(e) => return Err(e),
        }
    }
}

/// Censoring-tolerant draw with caller-held counters, for path simulation.
pub(crate) fn draw_block_retrying(
    model: &mut dyn ProcessModel,
    kind: BlockKind,
    rng: &mut Stream,
    trace: Option<&mut Vec<f64>>,
    attempts: &mut u64,
    censored: &mut u64,
) -> Result<BlockSample> {
    let mut stats = DrawStats {
        attempts: *attempts,
        censored: *censored,
    };
    let r = draw_with_retry(model, kind, rng, trace, &mut stats);
    *attempts = stats.attempts;
    *censored = stats.censored;
    r
}

/// Draws `plan.n_blocks` regular blocks split over `plan.n_streams`
/// independent streams; the split and the output depend only on the plan
/// and seed.
pub fn harvest(
    factory: &dyn ModelFactory,
    plan: &HarvestPlan,
    master_seed: u64,
) -> Result<Harvest> {
    plan.validate()?;
    let per = plan.n_blocks / plan.n_streams;
    let extra = plan.n_blocks % plan.n_streams;
    let parts: Vec<(Vec<HarvestedBlock>, DrawStats, u64)> = (0..plan.n_streams)
        .into_par_iter()
        .map(|s| {
            let count = per + usize::from(s < extra);
            let mut model = factory.instantiate()?;
            let mut rng = SeedSpec::for_domain(master_seed, domain::HARVEST, s as u64).stream();
            let mut stats = DrawStats::default();
            let mut out = Vec::with_capacity(count);
            for i in 0..count {
                let b = draw_with_retry(
                    model.as_mut(),
                    BlockKind::Regular,
                    &mut rng,
                    None,
                    &mut stats,
                )?;
                debug_assert!(b.is_valid(), "{b:?}");
                out.push(HarvestedBlock {
                    stream: s as u64,
                    index: i as u64,
                    sample: b,
                });
            }
            Ok((out, stats, model.censored_count()))
        })
        .collect::<Result<_>>()?;
    let first_block = if plan.include_first_block {
        let mut model = factory.instantiate()?;
        let mut rng = SeedSpec::for_domain(master_seed, domain::FIRST_BLOCK, 0).stream();
        let mut stats = DrawStats::default();
        Some(draw_with_retry(
            model.as_mut(),
            BlockKind::First,
            &mut rng,
            None,
            &mut stats,
        )?)
    } else {
        None
    };
    let mut h = Harvest {
        blocks: Vec::with_capacity(plan.n_blocks),
        first_block,
        attempts: 0,
        censored_attempts: 0,
        censored_candidates: 0,
    };
    for (blocks, stats, cand) in parts {
        h.blocks.extend(blocks);
        h.attempts += stats.attempts;
        h.censored_attempts += stats.censored;
        h.censored_candidates += cand;
    }
    Ok(h)
}

/// Core statistics of a block list, without standard errors.
#[derive(Debug, Clone, Copy)]
struct Core {
    mu: f64,
    tau_bar: f64,
    sigma2: f64,
    s12: f64,
    s22: f64,
}

fn core_stats(blocks: &[BlockSample]) -> Core {
    let k = blocks.len() as f64;
    let sum_s: f64 = blocks.iter().map(|b| b.sum).sum();
    let sum_l: f64 = blocks.iter().map(|b| b.length as f64).sum();
    let mu = sum_s / sum_l;
    let tau_bar = sum_l / k;
    let mut m11 = 0.0;
    let mut m12 = 0.0;
    let mut m22 = 0.0;
    for b in blocks {
        let l = b.length as f64;
        // the centered sums have mean exactly zero in exact arithmetic
        let c = b.sum - l * mu;
        let dl = l - tau_bar;
        m11 += c * c;
        m12 += c * dl;
        m22 += dl * dl;
    }
    let alpha_sq = m11 / k;
    Core {
        mu,
        tau_bar,
        sigma2: alpha_sq / tau_bar,
        s12: m12 / k,
        s22: m22 / k,
    }
}

/// Group jackknife: `stat` is evaluated with each of `g` contiguous groups
/// removed.
fn jackknife_se(n: usize, groups: usize, stat: impl Fn(&[std::ops::Range<usize>]) -> f64) -> f64 {
    let g = groups.min(n);
    if g < 2 {
        return f64::NAN;
    }
    let bounds: Vec<usize> = (0..=g).map(|i| i * n / g).collect();
    let reps: Vec<f64> = (0..g)
        .map(|j| {
            let keep = [0..bounds[j], bounds[j + 1]..n];
            stat(&keep)
        })
        .collect();
    let mean = reps.iter().sum::<f64>() / g as f64;
    let ss: f64 = reps.iter().map(|r| (r - mean).powi(2)).sum();
    ((g as f64 - 1.0) / g as f64 * ss).sqrt()
}

fn gather(blocks: &[BlockSample], keep: &[std::ops::Range<usize>]) -> Vec<BlockSample> {
    keep.iter()
        .flat_map(|r| blocks[r.clone()].iter().copied())
        .collect()
}

/// Name of the length moment entry in `moment_diag`.
pub fn length_moment_name() -> &'static str {
    "E[tau^(2+delta)]"
}

/// Name of the total-variation moment entry in `moment_diag`.
pub fn abs_sum_moment_name() -> &'static str {
    "E[abs_sum^(2+delta)]"
}

/// Plug-in estimates of `mu`, `sigma^2`, `tau_bar` and the covariance of
/// `(S - mu L, L)`, with group-jackknife standard errors.
pub fn estimate(blocks: &[BlockSample], delta: f64) -> Result<BlockEstimates> {
    if blocks.len() < 2 {
        return invalid("estimation needs at least 2 blocks");
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return invalid(format!("delta must lie in (0,1], got {delta}"));
    }
    if let Some(b) = blocks.iter().find(|b| !b.is_valid()) {
        return invalid(format!("invalid block {b:?}"));
    }
    let n = blocks.len();
    let identical = blocks
        .iter()
        .all(|b| b.length == blocks[0].length && b.sum == blocks[0].sum);
    let mut c = core_stats(blocks);
    if identical {
        c.sigma2 = 0.0;
        c.s12 = 0.0;
        c.s22 = 0.0;
    }
    let cov_a = CovarianceMatrix2 {
        s11: c.sigma2 * c.tau_bar,
        s12: c.s12,
        s22: c.s22,
    };
    let se_of = |f: fn(&Core) -> f64| {
        jackknife_se(n, JACKKNIFE_GROUPS, |keep| {
            f(&core_stats(&gather(blocks, keep)))
        })
    };
    let (mu_se, sigma2_se, tau_bar_se) = if identical {
        (0.0, 0.0, 0.0)
    } else {
        (se_of(|c| c.mu), se_of(|c| c.sigma2), se_of(|c| c.tau_bar))
    };
    let p = 2.0 + delta;
    let mut moment_diag = BTreeMap::new();
    for (name, f) in [
        (
            length_moment_name(),
            (|b: &BlockSample| b.length as f64) as fn(&BlockSample) -> f64,
        ),
        (abs_sum_moment_name(), |b: &BlockSample| b.abs_sum),
    ] {
        let vals: Vec<f64> = blocks.iter().map(|b| f(b).powf(p)).collect();
        let mean_of = |keep: &[std::ops::Range<usize>]| {
            let (s, m) = keep
                .iter()
                .flat_map(|r| vals[r.clone()].iter())
                .fold((0.0, 0usize), |(s, m), v| (s + v, m + 1));
            s / m as f64
        };
        let value = mean_of(&[(0..n)]);
        let se = jackknife_se(n, JACKKNIFE_GROUPS, mean_of);
        moment_diag.insert(name.to_string(), MomentEstimate { value, se });
    }
    let lengths: Vec<f64> = blocks.iter().map(|b| b.length as f64).collect();
    Ok(BlockEstimates {
        mu_hat: c.mu,
        sigma2_hat: c.sigma2,
        tau_bar: c.tau_bar,
        cov_a,
        n_blocks: n,
        mu_se,
        sigma2_se,
        tau_bar_se,
        moment_diag,
        length_tail_index: hill_tail_index(&lengths, HILL_TOP_FRACTION),
        degenerate: identical || c.sigma2 == 0.0,
    })
}

/// Hill estimate of the tail index from the top `top_fraction` order
/// statistics. `None` below [`HILL_MIN_BLOCKS`] values; `+inf` when the top
/// values are all tied.
pub fn hill_tail_index(values: &[f64], top_fraction: f64) -> Option<f64> {
    if values.len() < HILL_MIN_BLOCKS || !(top_fraction > 0.0 && top_fraction < 1.0) {
        return None;
    }
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    let k = ((top_fraction * v.len() as f64).floor() as usize).max(1);
    let threshold = v[k];
    if !(threshold > 0.0) {
        return None;
    }
    let h = v[..k].iter().map(|x| (x / threshold).ln()).sum::<f64>() / k as f64;
    Some(if h > 0.0 { 1.0 / h } else { f64::INFINITY })
}

/// Moment diagnostics for the rate theorem's hypotheses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub delta: f64,
    pub moments: BTreeMap<String, MomentEstimate>,
    #[serde(with = "crate::types::ext_f64_opt")]
    pub tail_index: Option<f64>,
    /// Set when the tail index is below `2 + delta`.
    pub flagged: bool,
}

pub fn moment_gate(est: &BlockEstimates, delta: f64) -> GateReport {
    let tail = est.length_tail_index;
    GateReport {
        delta,
        moments: est.moment_diag.clone(),
        tail_index: tail,
        flagged: tail.is_some_and(|t| t < 2.0 + delta),
    }
}

/// `(n - m - k tau_bar) / sqrt(k)`.
pub fn y_knm(k: u64, n: u64, m: u64, tau_bar: f64) -> f64 {
    (n as f64 - m as f64 - k as f64 * tau_bar) / (k as f64).sqrt()
}
