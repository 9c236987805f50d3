//! Regenerative process generators.
//!
//! A model draws regeneration blocks: the first block under the initial
//! law, every later block under the post-regeneration law. Models that can
//! also report per-step increments let trajectories be cut mid-block.

mod env;
mod iid;
mod lattice_walk;
mod markov;
mod regen_scan;
mod rwre1d;

pub use env::{Environment1d, SiteLaw};
pub use iid::IidModel;
pub use lattice_walk::{LatticeSiteLaw, LatticeWalkConfig, LatticeWalkModel};
pub use markov::{FiniteMarkovChain, MarkovAdditiveModel};
pub use regen_scan::{find_regenerations, RegenScan};
use regen_scan::{split_trajectory, BlockBuffer};
pub use rwre1d::{Rwre1dModel, Rwre1dView, WalkLimits};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rng::Stream;
use crate::types::BlockSample;

/// Which law a block is drawn under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    /// The segment `[0, tau_1]` under the initial law.
    First,
    /// A segment between two later regenerations.
    Regular,
}

pub trait ProcessModel: Send {
    /// Draws one block. If `trace` is given and [`traces_increments`] is true,
    /// it is cleared and filled with the per-step increments of the block.
    ///
    /// [`traces_increments`]: ProcessModel::traces_increments
    fn draw_block(
        &mut self,
        kind: BlockKind,
        rng: &mut Stream,
        trace: Option<&mut Vec<f64>>,
    ) -> Result<BlockSample>;

    fn traces_increments(&self) -> bool {
        false
    }

    fn next_block(&mut self, rng: &mut Stream) -> Result<BlockSample> {
        self.draw_block(BlockKind::Regular, rng, None)
    }

    fn first_block(&mut self, rng: &mut Stream) -> Result<BlockSample> {
        self.draw_block(BlockKind::First, rng, None)
    }

    /// Exact pmf of one regular block, when enumerable.
    fn exact_block_law(&self) -> Option<BlockLaw> {
        None
    }

    /// Exact law of the process value `X_n`, as increasing `(value, prob)`
    /// atoms. `include_first` selects the initial law instead of the
    /// post-regeneration law.
    fn exact_value_law(&self, _n: u64, _include_first: bool) -> Result<Vec<(f64, f64)>> {
        Err(crate::error::Error::ExactUnavailable)
    }

    /// Limit of `X_n / n` when known in closed form.
    fn closed_form_mu(&self) -> Option<f64> {
        None
    }

    /// Regeneration candidates discarded so far because their confirmation
    /// window ran past the simulation horizon.
    fn censored_count(&self) -> u64 {
        0
    }
}

/// Builds independent model instances, one per random stream.
pub trait ModelFactory: Sync {
    fn instantiate(&self) -> Result<Box<dyn ProcessModel>>;
}

impl<F> ModelFactory for F
where
    F: Fn() -> Result<Box<dyn ProcessModel>> + Sync,
{
    fn instantiate(&self) -> Result<Box<dyn ProcessModel>> {
        self()
    }
}

/// Declarative model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Iid {
        values: Vec<f64>,
        probs: Vec<f64>,
    },
    Markov(FiniteMarkovChain),
    Rwre1dPosition {
        law: SiteLaw,
        #[serde(default)]
        limits: WalkLimits,
    },
    Rwre1dHitting {
        law: SiteLaw,
        #[serde(default)]
        limits: WalkLimits,
    },
    Lattice(LatticeWalkConfig),
}

impl ModelSpec {
    pub fn build(&self) -> Result<Box<dyn ProcessModel>> {
        Ok(match self {
            ModelSpec::Iid { values, probs } => Box::new(IidModel::new(values, probs)?),
            ModelSpec::Markov(chain) => Box::new(MarkovAdditiveModel::new(chain.clone())?),
            ModelSpec::Rwre1dPosition { law, limits } => Box::new(Rwre1dModel::new(
                law.clone(),
                *limits,
                Rwre1dView::Position,
            )?),
            ModelSpec::Rwre1dHitting { law, limits } => {
                Box::new(Rwre1dModel::new(law.clone(), *limits, Rwre1dView::Hitting)?)
            }
            ModelSpec::Lattice(cfg) => Box::new(LatticeWalkModel::new(cfg.clone())?),
        })
    }
}

impl ModelFactory for ModelSpec {
    fn instantiate(&self) -> Result<Box<dyn ProcessModel>> {
        self.build()
    }
}

/// One atom of an exact block law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockAtom {
    pub length: u64,
    pub sum: f64,
    pub prob: f64,
}

/// Exact pmf over `(length, sum)` of one post-regeneration block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockLaw {
    pub atoms: Vec<BlockAtom>,
    /// Probability mass beyond the enumeration cutoff.
    pub tail_mass: f64,
}

impl BlockLaw {
    fn expect(&self, f: impl Fn(&BlockAtom) -> f64) -> f64 {
        let mass: f64 = self.atoms.iter().map(|a| a.prob).sum();
        self.atoms.iter().map(|a| a.prob * f(a)).sum::<f64>() / mass
    }

    pub fn tau_bar(&self) -> f64 {
        self.expect(|a| a.length as f64)
    }

    pub fn mu(&self) -> f64 {
        self.expect(|a| a.sum) / self.tau_bar()
    }

    /// `E[(S - mu L)^2] / E[L]`.
    pub fn sigma2(&self) -> f64 {
        let mu = self.mu();
        self.expect(|a| (a.sum - mu * a.length as f64).powi(2)) / self.tau_bar()
    }
}
