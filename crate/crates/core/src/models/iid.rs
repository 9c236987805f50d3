use rand::Rng;

use super::{BlockAtom, BlockKind, BlockLaw, ProcessModel};
use crate::error::{invalid, Result};
use crate::lattice::LatticePmf;
use crate::rng::Stream;
use crate::types::BlockSample;

/// Sums of i.i.d. increments with `tau_k = k`.
#[derive(Debug, Clone)]
pub struct IidModel {
    values: Vec<f64>,
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

impl IidModel {
    pub fn new(values: &[f64], probs: &[f64]) -> Result<Self> {
        if values.is_empty() || values.len() != probs.len() {
            return invalid("increment law needs matching, non-empty values and probs");
        }
        if probs.iter().any(|p| !(*p >= 0.0)) || values.iter().any(|v| !v.is_finite()) {
            return invalid("increment law has negative probability or non-finite value");
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return invalid(format!("increment pmf sums to {total}, not 1"));
        }
        let cumulative = probs
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        Ok(Self {
            values: values.to_vec(),
            probs: probs.to_vec(),
            cumulative,
        })
    }

    fn sample(&self, rng: &mut Stream) -> f64 {
        let u: f64 = rng.random();
        let i = self
            .cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.values.len() - 1);
        self.values[i]
    }
}

impl ProcessModel for IidModel {
    fn draw_block(
        &mut self,
        _kind: BlockKind,
        rng: &mut Stream,
        trace: Option<&mut Vec<f64>>,
    ) -> Result<BlockSample> {
        let x = self.sample(rng);
        if let Some(t) = trace {
            t.clear();
            t.push(x);
        }
        Ok(BlockSample {
            length: 1,
            sum: x,
            abs_sum: x.abs(),
        })
    }

    fn traces_increments(&self) -> bool {
        true
    }

    fn exact_block_law(&self) -> Option<BlockLaw> {
        Some(BlockLaw {
            atoms: self
                .values
                .iter()
                .zip(&self.probs)
                .map(|(&sum, &prob)| BlockAtom {
                    length: 1,
                    sum,
                    prob,
                })
                .collect(),
            tail_mass: 0.0,
        })
    }

    fn exact_value_law(&self, n: u64, _include_first: bool) -> Result<Vec<(f64, f64)>> {
        let pmf = LatticePmf::from_atoms(&self.values, &self.probs)?;
        Ok(pmf.power(n)?.atoms())
    }

    fn closed_form_mu(&self) -> Option<f64> {
        Some(
            self.values
                .iter()
                .zip(&self.probs)
                .map(|(v, p)| v * p)
                .sum(),
        )
    }
}
