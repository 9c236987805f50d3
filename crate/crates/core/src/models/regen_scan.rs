use std::collections::VecDeque;
use std::ops::Range;

use crate::types::BlockSample;

/// Blocks kept from earlier trajectories before the oldest are dropped.
const MAX_BUFFERED_BLOCKS: usize = 1 << 16;

/// Confirmed directional regeneration times of one finite trajectory.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RegenScan {
    /// Increasing times `n >= 1`.
    pub times: Vec<usize>,
    /// Candidates dropped because `n + confirmation` exceeds the horizon.
    pub censored: u64,
}

/// Scans projected positions `proj[0..=H]` for times `n >= 1` with
/// `max_{m<n} proj[m] < proj[n] <= min_{n<=m<=H} proj[m]`, keeping those
/// whose confirmation window `[n, n + confirmation]` fits in the horizon.
pub fn find_regenerations(proj: &[f64], confirmation: usize) -> RegenScan {
    let mut scan = RegenScan::default();
    if proj.len() < 2 {
        return scan;
    }
    let horizon = proj.len() - 1;
    let mut suffix_min = vec![0.0; proj.len()];
    let mut m = f64::INFINITY;
    for i in (0..proj.len()).rev() {
        m = m.min(proj[i]);
        suffix_min[i] = m;
    }
    let mut prefix_max = proj[0];
    for n in 1..=horizon {
        let x = proj[n];
        if x > prefix_max && x <= suffix_min[n] {
            if n + confirmation <= horizon {
                scan.times.push(n);
            } else {
                scan.censored += 1;
            }
        }
        prefix_max = prefix_max.max(x);
    }
    scan
}

/// Regular blocks of one trajectory with their per-step increments.
#[derive(Debug, Default)]
pub(crate) struct Chunk {
    blocks: VecDeque<(BlockSample, Range<usize>)>,
    increments: Vec<f64>,
}

impl Chunk {
    pub(crate) fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
}

/// Cuts a trajectory at `0 = cuts[0] < cuts[1] < ...`. `block(a, b, incs)`
/// appends the increments of segment `[a, b]` and returns its sample.
/// Returns the initial segment separately from the regular blocks.
pub(crate) fn split_trajectory(
    cuts: &[usize],
    mut block: impl FnMut(usize, usize, &mut Vec<f64>) -> BlockSample,
) -> ((BlockSample, Vec<f64>), Chunk) {
    assert!(cuts.len() >= 2, "need at least one regeneration");
    let mut chunk = Chunk::default();
    let mut first = Vec::new();
    let s0 = block(cuts[0], cuts[1], &mut first);
    for w in cuts[1..].windows(2) {
        let start = chunk.increments.len();
        let sample = block(w[0], w[1], &mut chunk.increments);
        chunk
            .blocks
            .push_back((sample, start..chunk.increments.len()));
    }
    ((s0, first), chunk)
}

/// FIFO of regular blocks from past trajectories. Old chunks are dropped
/// once the buffer is large; dropping never looks at block values.
#[derive(Debug, Default)]
pub(crate) struct BlockBuffer {
    chunks: VecDeque<Chunk>,
    buffered: usize,
}

impl BlockBuffer {
    pub(crate) fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub(crate) fn stash(&mut self, chunk: Chunk) {
        if chunk.is_empty() {
            return;
        }
        self.buffered += chunk.blocks.len();
        self.chunks.push_back(chunk);
        while self.buffered > MAX_BUFFERED_BLOCKS && self.chunks.len() > 1 {
            let old = self.chunks.pop_front().expect("non-empty");
            self.buffered -= old.blocks.len();
        }
    }

    pub(crate) fn pop(&mut self, trace: Option<&mut Vec<f64>>) -> Option<BlockSample> {
        let chunk = self.chunks.front_mut()?;
        let (sample, range) = chunk
            .blocks
            .pop_front()
            .expect("stored chunks are non-empty");
        if let Some(t) = trace {
            t.clear();
            t.extend_from_slice(&chunk.increments[range]);
        }
        self.buffered -= 1;
        if chunk.blocks.is_empty() {
            self.chunks.pop_front();
        }
        Some(sample)
    }
}
