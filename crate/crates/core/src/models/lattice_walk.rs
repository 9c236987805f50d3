use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::regen_scan::Chunk;
use super::{
    find_regenerations, split_trajectory, BlockBuffer, BlockKind, ProcessModel, SiteLaw, WalkLimits,
};
use crate::error::{invalid, Error, Result};
use crate::rng::{SeedSpec, Stream};
use crate::types::BlockSample;

/// Law of the jump vector at one site. Directions are ordered
/// `+e1, -e1, +e2, -e2, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LatticeSiteLaw {
    /// The same jump vector at every site.
    Fixed {
        probs: Vec<f64>,
    },
    /// One of finitely many jump vectors.
    Discrete {
        vectors: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
    Dirichlet {
        alphas: Vec<f64>,
    },
    /// A one-dimensional site law read as `[omega(1), 1 - omega(1)]`.
    Embedded1d {
        law: SiteLaw,
    },
}

fn check_vector(v: &[f64], d: usize) -> Result<()> {
    if v.len() != 2 * d {
        return invalid(format!(
            "jump vector has {} entries, expected {}",
            v.len(),
            2 * d
        ));
    }
    if v.iter().any(|p| !(*p >= 0.0)) || (v.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return invalid("jump vector must be a probability vector");
    }
    Ok(())
}

impl LatticeSiteLaw {
    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            LatticeSiteLaw::Fixed { probs } => check_vector(probs, d),
            LatticeSiteLaw::Discrete { vectors, weights } => {
                if vectors.is_empty() || vectors.len() != weights.len() {
                    return invalid("discrete site law needs matching vectors and weights");
                }
                for v in vectors {
                    check_vector(v, d)?;
                }
                if weights.iter().any(|w| !(*w >= 0.0))
                    || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12
                {
                    return invalid("discrete site-law weights must sum to 1");
                }
                Ok(())
            }
            LatticeSiteLaw::Dirichlet { alphas } => {
                if alphas.len() != 2 * d || alphas.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
                    return invalid("Dirichlet needs 2d positive parameters");
                }
                Ok(())
            }
            LatticeSiteLaw::Embedded1d { law } => {
                if d != 1 {
                    return invalid("embedded one-dimensional law needs dimension 1");
                }
                law.validate()
            }
        }
    }

    /// Draws a jump vector and returns its cumulative sums.
    fn sample_cumulative(&self, rng: &mut Stream, out: &mut Vec<f64>) {
        out.clear();
        match self {
            LatticeSiteLaw::Fixed { probs } => out.extend_from_slice(probs),
            LatticeSiteLaw::Discrete { vectors, weights } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = vectors.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        pick = i;
                        break;
                    }
                }
                out.extend_from_slice(&vectors[pick]);
            }
            LatticeSiteLaw::Dirichlet { alphas } => {
                for &a in alphas {
                    out.push(Gamma::new(a, 1.0).expect("validated").sample(rng));
                }
                let z: f64 = out.iter().sum();
                out.iter_mut().for_each(|g| *g /= z);
            }
            LatticeSiteLaw::Embedded1d { law } => {
                let p = law.sample(rng);
                out.extend_from_slice(&[p, 1.0 - p]);
            }
        }
        let mut acc = 0.0;
        for p in out.iter_mut() {
            acc += *p;
            *p = acc;
        }
    }
}

fn default_limits_horizon() -> u64 {
    WalkLimits::default().horizon
}

fn default_limits_confirmation() -> u64 {
    WalkLimits::default().confirmation
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeWalkConfig {
    pub dimension: usize,
    pub site_law: LatticeSiteLaw,
    pub direction_u: Vec<f64>,
    pub projection_w: Vec<f64>,
    #[serde(default = "default_limits_horizon")]
    pub horizon: u64,
    #[serde(default = "default_limits_confirmation")]
    pub confirmation: u64,
    /// Track `sum |dX . w|` exactly instead of bounding it by the length.
    #[serde(default)]
    pub exact_abs_sum: bool,
}

impl LatticeWalkConfig {
    pub fn limits(&self) -> WalkLimits {
        WalkLimits {
            horizon: self.horizon,
            confirmation: self.confirmation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dimension;
        if d == 0 {
            return invalid("dimension must be positive");
        }
        for (name, v) in [
            ("direction_u", &self.direction_u),
            ("projection_w", &self.projection_w),
        ] {
            if v.len() != d {
                return invalid(format!("{name} has {} entries, expected {d}", v.len()));
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return invalid(format!("{name} has norm {norm}, expected 1"));
            }
        }
        self.limits().validate()?;
        self.site_law.validate(d)
    }
}

/// Nearest-neighbor walk in an i.i.d. environment on Z^d, regenerating in
/// direction `u` and reporting the projection on `w`.
#[derive(Debug)]
pub struct LatticeWalkModel {
    cfg: LatticeWalkConfig,
    buffer: BlockBuffer,
    censored: u64,
}

impl LatticeWalkModel {
    pub fn new(cfg: LatticeWalkConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            buffer: BlockBuffer::default(),
            censored: 0,
        })
    }

    fn trajectory(&mut self, rng: &mut Stream) -> Result<((BlockSample, Vec<f64>), Chunk)> {
        let d = self.cfg.dimension;
        let h = self.cfg.horizon as usize;
        let mut env_rng = SeedSpec::new(rng.random::<u64>(), 0).stream();
        let mut sites: HashMap<Vec<i64>, usize> = HashMap::new();
        let mut table: Vec<f64> = Vec::new();
        let mut scratch = Vec::with_capacity(2 * d);
        let mut pos = vec![0i64; d];
        let dot = |x: &[i64], v: &[f64]| x.iter().zip(v).map(|(a, b)| *a as f64 * b).sum::<f64>();
        let mut proj_u = Vec::with_capacity(h + 1);
        let mut proj_w = Vec::with_capacity(h + 1);
        proj_u.push(0.0);
        proj_w.push(0.0);
        for _ in 0..h {
            let slot = match sites.get(pos.as_slice()) {
                Some(&s) => s,
                None => {
                    self.cfg
                        .site_law
                        .sample_cumulative(&mut env_rng, &mut scratch);
                    let s = table.len() / (2 * d);
                    table.extend_from_slice(&scratch);
                    sites.insert(pos.clone(), s);
                    s
                }
            };
            let cum = &table[slot * 2 * d..(slot + 1) * 2 * d];
            let u: f64 = rng.random();
            let dir = cum
                .iter()
                .position(|&c| u < c)
                .unwrap_or_else(|| last_positive(cum));
            let axis = dir / 2;
            if dir % 2 == 0 {
                pos[axis] += 1;
            } else {
                pos[axis] -= 1;
            }
            proj_u.push(dot(&pos, &self.cfg.direction_u));
            proj_w.push(dot(&pos, &self.cfg.projection_w));
        }
        let scan = find_regenerations(&proj_u, self.cfg.confirmation as usize);
        self.censored += scan.censored;
        if scan.times.is_empty() {
            return Err(Error::CensoredBlock {
                horizon: self.cfg.horizon,
                censored: self.censored,
            });
        }
        assert!(
            scan.times.windows(2).all(|w| proj_u[w[0]] < proj_u[w[1]]),
            "regeneration levels must increase strictly"
        );
        let mut cuts = Vec::with_capacity(scan.times.len() + 1);
        cuts.push(0usize);
        cuts.extend(scan.times);
        let exact = self.cfg.exact_abs_sum;
        Ok(split_trajectory(&cuts, |a, b, incs| {
            let start = incs.len();
            incs.extend(proj_w[a..=b].windows(2).map(|s| s[1] - s[0]));
            let len = (b - a) as u64;
            let abs_sum = if exact {
                incs[start..].iter().map(|x| x.abs()).sum()
            } else {
                len as f64
            };
            BlockSample {
                length: len,
                sum: proj_w[b] - proj_w[a],
                abs_sum,
            }
        }))
    }
}

/// Index of the last direction with positive mass, for the rare `u` that
/// rounding pushes past the final cumulative sum.
fn last_positive(cum: &[f64]) -> usize {
    let mut prev = 0.0;
    let mut last = 0;
    for (i, &c) in cum.iter().enumerate() {
        if c > prev {
            last = i;
        }
        prev = c;
    }
    last
}

impl ProcessModel for LatticeWalkModel {
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
            horizon: self.cfg.horizon,
            censored: self.censored,
        })
    }

    fn traces_increments(&self) -> bool {
        true
    }

    fn censored_count(&self) -> u64 {
        self.censored
    }
}
