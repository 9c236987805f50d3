//! Value types shared across the crate.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::gaussian::CovarianceMatrix2;

/// One regeneration block: the increments of time, position and total
/// variation between two successive regeneration times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockSample {
    pub length: u64,
    pub sum: f64,
    pub abs_sum: f64,
}

impl BlockSample {
    pub fn new(length: u64, sum: f64, abs_sum: f64) -> Result<Self> {
        let b = Self {
            length,
            sum,
            abs_sum,
        };
        if !b.is_valid() {
            return invalid(format!("block violates invariants: {b:?}"));
        }
        Ok(b)
    }

    /// `length >= 1`, `abs_sum >= |sum|`, everything finite.
    pub fn is_valid(&self) -> bool {
        let slack = 1e-9 * (1.0 + self.abs_sum.abs());
        self.length >= 1
            && self.sum.is_finite()
            && self.abs_sum.is_finite()
            && self.abs_sum >= 0.0
            && self.abs_sum + slack >= self.sum.abs()
    }
}

/// A point estimate with its jackknife standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub value: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockEstimates {
    pub mu_hat: f64,
    pub sigma2_hat: f64,
    pub tau_bar: f64,
    pub cov_a: CovarianceMatrix2,
    pub n_blocks: usize,
    pub mu_se: f64,
    pub sigma2_se: f64,
    pub tau_bar_se: f64,
    /// Keyed by moment name; `BTreeMap` keeps JSON output ordered.
    pub moment_diag: BTreeMap<String, MomentEstimate>,
    /// Hill tail index of block lengths; `None` below the sample-size floor,
    /// `+inf` when the top order statistics are all tied.
    #[serde(with = "crate::types::ext_f64_opt")]
    pub length_tail_index: Option<f64>,
    pub degenerate: bool,
}

impl BlockEstimates {
    /// Top-left entry of `cov_a`.
    pub fn alpha_sq(&self) -> f64 {
        self.cov_a.s11
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceModeTag {
    Exact,
    MonteCarlo,
}

impl DistanceModeTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            DistanceModeTag::Exact => "exact",
            DistanceModeTag::MonteCarlo => "monte_carlo",
        }
    }
}

/// One row of a rate sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: u64,
    pub distance: f64,
    /// DKW half-width at the configured confidence; zero in exact mode.
    pub dkw_bound: f64,
    pub n_paths: u64,
    pub mode: DistanceModeTag,
    /// Mean |n' - n| when trajectories had to snap to block boundaries.
    pub mean_snap_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSeries {
    pub points: Vec<RatePoint>,
    pub delta: f64,
}

impl RateSeries {
    pub fn new(points: Vec<RatePoint>, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return invalid(format!("delta must lie in (0,1], got {delta}"));
        }
        if points.windows(2).any(|w| w[0].n >= w[1].n) {
            return invalid("rate series n values must be strictly increasing");
        }
        if let Some(p) = points
            .iter()
            .find(|p| p.n == 0 || !(0.0..=1.0).contains(&p.distance))
        {
            return invalid(format!("rate point out of range: {p:?}"));
        }
        Ok(Self { points, delta })
    }

    /// Convenience constructor for bare `(n, distance)` pairs.
    pub fn from_pairs(pairs: &[(u64, f64)], delta: f64) -> Result<Self> {
        let points = pairs
            .iter()
            .map(|&(n, distance)| RatePoint {
                n,
                distance,
                dkw_bound: 0.0,
                n_paths: 0,
                mode: DistanceModeTag::Exact,
                mean_snap_offset: 0.0,
            })
            .collect();
        Self::new(points, delta)
    }
}

/// JSON has no infinity; these helpers write `"inf"` / `"-inf"` instead.
pub mod ext_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else if *v < 0.0 {
            s.serialize_str("-inf")
        } else {
            s.serialize_str("nan")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("bad float {other}"))),
            },
        }
    }
}

pub mod ext_f64_opt {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Wrap(#[serde(with = "super::ext_f64")] f64);

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.map(Wrap).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}
