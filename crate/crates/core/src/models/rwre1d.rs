use rand::Rng;
use serde::{Deserialize, Serialize};

use super::regen_scan::Chunk;
use super::{
    find_regenerations, split_trajectory, BlockBuffer, BlockKind, Environment1d, ProcessModel,
    SiteLaw,
};
use crate::error::{invalid, Error, Result};
use crate::rng::{SeedSpec, Stream};
use crate::rwre::RhoLaw;
use crate::types::BlockSample;

/// Trajectory length and confirmation window for regeneration detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WalkLimits {
    pub horizon: u64,
    pub confirmation: u64,
}

impl Default for WalkLimits {
    fn default() -> Self {
        Self {
            horizon: 1 << 16,
            confirmation: 512,
        }
    }
}

impl WalkLimits {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.confirmation == 0 {
            return invalid("horizon and confirmation must be positive");
        }
        if self.confirmation > self.horizon {
            return invalid(format!(
                "confirmation {} exceeds horizon {}",
                self.confirmation, self.horizon
            ));
        }
        if self.horizon > 1 << 32 {
            return invalid("horizon above 2^32 steps");
        }
        Ok(())
    }
}

/// Which regenerative structure of the walk the blocks describe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rwre1dView {
    /// Indexed by time: length is elapsed time, sum is displacement.
    Position,
    /// Indexed by level: length is sites crossed, sum is elapsed time.
    Hitting,
}

/// Nearest-neighbor walk on Z in an i.i.d. environment, cut at its
/// rightward regeneration times. Each trajectory runs in a fresh
/// environment.
#[derive(Debug)]
pub struct Rwre1dModel {
    law: SiteLaw,
    limits: WalkLimits,
    view: Rwre1dView,
    rho: RhoLaw,
    buffer: BlockBuffer,
    censored: u64,
    path: Vec<f64>,
    hits: Vec<usize>,
}

impl Rwre1dModel {
    pub fn new(law: SiteLaw, limits: WalkLimits, view: Rwre1dView) -> Result<Self> {
        law.validate()?;
        limits.validate()?;
        let rho = RhoLaw::from_site_law(&law)?;
        Ok(Self {
            law,
            limits,
            view,
            rho,
            buffer: BlockBuffer::default(),
            censored: 0,
            path: Vec::new(),
            hits: Vec::new(),
        })
    }

    pub fn view(&self) -> Rwre1dView {
        self.view
    }

    /// Simulates one trajectory from the origin of a fresh environment and
    /// splits it at the confirmed regeneration times. Returns the initial
    /// segment and the regular blocks.
    fn trajectory(&mut self, rng: &mut Stream) -> Result<((BlockSample, Vec<f64>), Chunk)> {
        let env_seed = SeedSpec::new(rng.random::<u64>(), 0);
        let mut env = Environment1d::new(self.law.clone(), env_seed)?;
        let h = self.limits.horizon as usize;
        self.path.clear();
        self.path.reserve(h + 1);
        self.hits.clear();
        self.hits.push(0);
        let mut x: i64 = 0;
        let mut max = 0i64;
        self.path.push(0.0);
        for t in 1..=h {
            let p = env.get(x)?;
            if rng.random::<f64>() < p {
                x += 1;
            } else {
                x -= 1;
            }
            if x > max {
                max = x;
                self.hits.push(t);
            }
            self.path.push(x as f64);
        }
        let scan = find_regenerations(&self.path, self.limits.confirmation as usize);
        self.censored += scan.censored;
        if scan.times.is_empty() {
            return Err(Error::CensoredBlock {
                horizon: self.limits.horizon,
                censored: self.censored,
            });
        }
        let mut cuts = Vec::with_capacity(scan.times.len() + 1);
        cuts.push(0usize);
        cuts.extend(scan.times);
        let path = &self.path;
        let hits = &self.hits;
        let view = self.view;
        Ok(split_trajectory(&cuts, |a, b, incs| match view {
            Rwre1dView::Position => {
                incs.extend(path[a..=b].windows(2).map(|s| s[1] - s[0]));
                let len = (b - a) as u64;
                BlockSample {
                    length: len,
                    sum: path[b] - path[a],
                    abs_sum: len as f64,
                }
            }
            Rwre1dView::Hitting => {
                let (la, lb) = (path[a] as usize, path[b] as usize);
                incs.extend(hits[la..=lb].windows(2).map(|s| (s[1] - s[0]) as f64));
                let elapsed = (b - a) as f64;
                BlockSample {
                    length: (lb - la) as u64,
                    sum: elapsed,
                    abs_sum: elapsed,
                }
            }
        }))
    }
}

impl ProcessModel for Rwre1dModel {
    fn draw_block(
        &mut self,
        kind: BlockKind,
        rng: &mut Stream,
        trace: Option<&mut Vec<f64>>,
    ) -> Result<BlockSample> {
        if kind == BlockKind::First {
            let ((sample, incs), chunk) = self.trajectory(rng)?;
            self.buffer.stash(chunk);
            if let Some(t) = trace {
                t.clear();
                t.extend_from_slice(&incs);
            }
            return Ok(sample);
        }
        if self.buffer.is_empty() {
            let (_, chunk) = self.trajectory(rng)?;
            self.buffer.stash(chunk);
        }
        self.buffer.pop(trace).ok_or(Error::CensoredBlock {
            horizon: self.limits.horizon,
            censored: self.censored,
        })
    }

    fn traces_increments(&self) -> bool {
        true
    }

    fn closed_form_mu(&self) -> Option<f64> {
        let v = self.rho.speed().ok()?;
        match self.view {
            Rwre1dView::Position => Some(v),
            Rwre1dView::Hitting if v > 0.0 => Some(1.0 / v),
            Rwre1dView::Hitting => None,
        }
    }

    fn censored_count(&self) -> u64 {
        self.censored
    }
}
