//! Experiment files (TOML). Unknown keys are rejected.

use std::path::{Path, PathBuf};

use regen_core::models::{FiniteMarkovChain, SiteLaw, WalkLimits};
use regen_core::rates::{DistanceMode, RateOptions, DEFAULT_DKW_BETA};
use regen_core::rwre::Sigma0Plan;
use regen_core::{HarvestPlan, ModelSpec};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub master_seed: u64,
    pub output_dir: Option<PathBuf>,
    pub model: Option<ModelSpec>,
    pub plan: Option<HarvestPlan>,
    pub sweep: Option<SweepConfig>,
    pub llt: Option<LltConfig>,
    pub rwre: Option<RwreConfig>,
    pub mixing: Option<MixingConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub ns: Vec<u64>,
    pub mode: ModeName,
    pub n_paths: Option<u64>,
    #[serde(default)]
    pub include_first_block: bool,
    #[serde(default = "default_beta")]
    pub dkw_beta: f64,
}

fn default_beta() -> f64 {
    DEFAULT_DKW_BETA
}

impl SweepConfig {
    pub fn options(&self, master_seed: u64) -> Result<RateOptions, String> {
        let mode = match (self.mode, self.n_paths) {
            (ModeName::Exact, None) => DistanceMode::Exact,
            (ModeName::Exact, Some(_)) => {
                return Err("n_paths is only used in monte_carlo mode".into())
            }
            (ModeName::MonteCarlo, Some(n_paths)) if n_paths > 0 => {
                DistanceMode::MonteCarlo { n_paths }
            }
            (ModeName::MonteCarlo, _) => {
                return Err("monte_carlo mode needs a positive n_paths".into())
            }
        };
        if !(self.dkw_beta > 0.0 && self.dkw_beta < 1.0) {
            return Err("dkw_beta must lie in (0, 1)".into());
        }
        if self.ns.len() < 3 || self.ns.windows(2).any(|w| w[0] >= w[1]) || self.ns[0] == 0 {
            return Err("sweep.ns needs at least 3 strictly increasing positive values".into());
        }
        Ok(RateOptions {
            mode,
            include_first_block: self.include_first_block,
            dkw_beta: self.dkw_beta,
            master_seed,
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LltConfig {
    /// Rows `[v, w, prob]`.
    pub table: Vec<[f64; 3]>,
    pub ns: Vec<u64>,
    #[serde(default)]
    pub x_grid: Vec<f64>,
    #[serde(default = "default_llt_delta")]
    pub delta: f64,
}

fn default_llt_delta() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RwreView {
    Position,
    Hitting,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RwreConfig {
    pub law: SiteLaw,
    #[serde(default)]
    pub limits: WalkLimits,
    pub sigma0: Option<Sigma0Config>,
    /// Runs a rate sweep on this view of the walk; needs `plan` and `sweep`.
    pub view: Option<RwreView>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sigma0Config {
    pub n_envs: usize,
    pub truncation: usize,
    pub replicas: usize,
}

impl From<Sigma0Config> for Sigma0Plan {
    fn from(c: Sigma0Config) -> Self {
        Sigma0Plan {
            n_envs: c.n_envs,
            truncation: c.truncation,
            replicas: c.replicas,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixingConfig {
    pub chain: FiniteMarkovChain,
    pub n_max: u64,
    #[serde(default = "default_cap")]
    pub cap: f64,
    /// Moment order for the rate exponent; `inf` allowed.
    pub p: Option<f64>,
}

fn default_cap() -> f64 {
    1.0
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), String> {
        if let Some(m) = &self.model {
            m.build().map_err(|e| format!("model: {e}"))?;
        }
        if let Some(p) = &self.plan {
            p.validate().map_err(|e| format!("plan: {e}"))?;
        }
        if let Some(s) = &self.sweep {
            s.options(self.master_seed)?;
        }
        if let Some(r) = &self.rwre {
            r.law.validate().map_err(|e| format!("rwre.law: {e}"))?;
            r.limits
                .validate()
                .map_err(|e| format!("rwre.limits: {e}"))?;
        }
        if let Some(l) = &self.llt {
            if l.ns.is_empty() || l.ns.contains(&0) {
                return Err("llt.ns needs positive values".into());
            }
            if !(l.delta > 0.0 && l.delta <= 1.0) {
                return Err("llt.delta must lie in (0, 1]".into());
            }
        }
        if let Some(m) = &self.mixing {
            if m.n_max == 0 || !(m.cap > 0.0) {
                return Err("mixing needs n_max >= 1 and cap > 0".into());
            }
        }
        Ok(())
    }

    /// The named section, or a config error.
    pub fn require<'a, T>(section: &'a Option<T>, name: &str) -> Result<&'a T, String> {
        section
            .as_ref()
            .ok_or_else(|| format!("missing [{name}] section"))
    }
}
