//! Agreement between the foreign-key sampler and the analytic link law.
//!
//! For each child block vector, the analytic link probabilities of all parent rows are
//! summed per parent block vector and compared with the block frequencies of
//! sampled links.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::Result;
use crate::fk::{link_probabilities, FkPlan};
use crate::rng::SeededRng;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockFidelity {
    /// 1-based block labels of the child rows.
    pub child_blocks: Vec<usize>,
    /// Indexed by parent composite block.
    pub analytic: Vec<f64>,
    pub empirical: Vec<f64>,
    pub total_variation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FidelityReport {
    pub samples_per_child_block: usize,
    pub blocks: Vec<BlockFidelity>,
    pub max_total_variation: f64,
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Analytic link masses of one child block vector aggregated per parent block.
pub fn analytic_block_masses(plan: &FkPlan, child_blocks: &[u8]) -> Result<Vec<f64>> {
    let probs: Vec<f64> = link_probabilities(child_blocks, &plan.parent, &plan.stack)?;
    let mut masses = vec![0.0; plan.parent.num_composites()];
    for (j, p) in probs.iter().enumerate() {
        masses[plan.parent.composite(plan.parent.row_blocks(j))] += p;
    }
    Ok(masses)
}

/// Compares analytic and sampled parent-block frequencies for every child
/// block vector that occurs in the child table.
pub fn hsbm_fidelity(plan: &FkPlan, samples_per_child_block: usize, rng: &mut SeededRng) -> Result<FidelityReport> {
    let child = &plan.child;
    let present: BTreeSet<Vec<u8>> = (0..child.num_rows()).map(|i| child.row_blocks(i).to_vec()).collect();
    let mut sampler = plan.sampler();
    let mut blocks = Vec::with_capacity(present.len());
    for labels in present {
        let analytic = analytic_block_masses(plan, &labels)?;
        let mut counts = vec![0usize; analytic.len()];
        for _ in 0..samples_per_child_block {
            let row = sampler.sample_for_blocks(&labels, rng) as usize - 1;
            counts[plan.parent.composite(plan.parent.row_blocks(row))] += 1;
        }
        let n = samples_per_child_block.max(1) as f64;
        let empirical: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
        blocks.push(BlockFidelity {
            child_blocks: labels.iter().map(|&b| b as usize + 1).collect(),
            total_variation: total_variation(&analytic, &empirical),
            analytic,
            empirical,
        });
    }
    let max_total_variation = blocks.iter().map(|b| b.total_variation).fold(0.0, f64::max);
    Ok(FidelityReport {
        samples_per_child_block,
        blocks,
        max_total_variation,
    })
}
