//! Stage 2: foreign keys from a hierarchical stochastic block model.
//!
//! Child and parent rows carry one block label per level. The score of a
//! (child, parent) pair is the product over levels of the block-pair entry of
//! that level's matrix, and each child row picks its parent with probability
//! proportional to the score.

use crate::config::GenConfig;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::SeededRng;
use crate::scalar::Scalar;

pub const SAME_BLOCK_PROBABILITY: f64 = 0.9;
pub const CROSS_BLOCK_RANGE: (f64, f64) = (0.001, 0.002);

/// Per-row block labels over `L` levels (labels 0-based internally).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockHierarchy {
    blocks_per_level: Vec<usize>,
    labels: Vec<u8>,
    num_rows: usize,
}

impl BlockHierarchy {
    /// Independent uniform label per row and level.
    pub fn assign(num_rows: usize, blocks_per_level: &[usize], rng: &mut SeededRng) -> Result<Self> {
        Self::check_shape(num_rows, blocks_per_level)?;
        let levels = blocks_per_level.len();
        let mut labels = Vec::with_capacity(num_rows * levels);
        for _ in 0..num_rows {
            for &b in blocks_per_level {
                labels.push(rng.index(b) as u8);
            }
        }
        Ok(Self {
            blocks_per_level: blocks_per_level.to_vec(),
            labels,
            num_rows,
        })
    }

    /// Explicit 0-based labels, one vector per row.
    pub fn from_labels(blocks_per_level: &[usize], rows: &[Vec<usize>]) -> Result<Self> {
        Self::check_shape(rows.len(), blocks_per_level)?;
        let mut labels = Vec::with_capacity(rows.len() * blocks_per_level.len());
        for (i, row) in rows.iter().enumerate() {
            if row.len() != blocks_per_level.len() {
                return Err(Error::Usage(format!("row {i} has {} levels", row.len())));
            }
            for (&b, &limit) in row.iter().zip(blocks_per_level) {
                if b >= limit {
                    return Err(Error::Usage(format!("row {i}: block {b} outside 0..{limit}")));
                }
                labels.push(b as u8);
            }
        }
        Ok(Self {
            blocks_per_level: blocks_per_level.to_vec(),
            labels,
            num_rows: rows.len(),
        })
    }

    fn check_shape(num_rows: usize, blocks_per_level: &[usize]) -> Result<()> {
        if num_rows == 0 {
            return Err(Error::Structural("a block hierarchy needs at least one row".into()));
        }
        if blocks_per_level.is_empty() || blocks_per_level.iter().any(|&b| b == 0 || b > 255) {
            return Err(Error::Usage(format!("invalid blocks per level {blocks_per_level:?}")));
        }
        Ok(())
    }

    pub fn levels(&self) -> usize {
        self.blocks_per_level.len()
    }

    pub fn blocks_per_level(&self) -> &[usize] {
        &self.blocks_per_level
    }

    pub fn num_rows(&self) -> usize {
        self.num_rows
    }

    /// 0-based labels of `row`, one per level.
    #[inline]
    pub fn row_blocks(&self, row: usize) -> &[u8] {
        let l = self.levels();
        &self.labels[row * l..(row + 1) * l]
    }

    /// Mixed-radix index of the full label vector.
    pub fn composite(&self, labels: &[u8]) -> usize {
        labels
            .iter()
            .zip(&self.blocks_per_level)
            .fold(0, |acc, (&b, &radix)| acc * radix + b as usize)
    }

    pub fn num_composites(&self) -> usize {
        self.blocks_per_level.iter().product()
    }
}

/// One `parent_blocks x child_blocks` matrix per level.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockMatrixStack<T> {
    levels: Vec<Matrix<T>>,
}

impl<T: Scalar> BlockMatrixStack<T> {
    pub fn new(levels: Vec<Matrix<T>>) -> Result<Self> {
        for (l, m) in levels.iter().enumerate() {
            if m.as_slice().iter().any(|v| !(*v > T::zero()) || !v.is_finite()) {
                return Err(Error::Usage(format!("level {l} has a non-positive entry")));
            }
        }
        Ok(Self { levels })
    }

    pub fn levels(&self) -> &[Matrix<T>] {
        &self.levels
    }

    /// `s = prod_l P[l][parent_l, child_l]`.
    #[inline]
    pub fn score(&self, parent: &[u8], child: &[u8]) -> T {
        self.levels
            .iter()
            .zip(parent.iter().zip(child))
            .fold(T::one(), |acc, (m, (&p, &c))| acc * m.get(p as usize, c as usize))
    }

    pub fn scaled(&self, factor: T) -> Self {
        let mut out = self.clone();
        for m in &mut out.levels {
            m.scale(factor);
        }
        out
    }
}

/// Entry `(i, j)` is 0.9 when `i == j (mod max(rows, cols))` and uniform on
/// `[0.001, 0.002]` otherwise.
pub fn sample_block_matrix<T: Scalar>(parent_blocks: usize, child_blocks: usize, rng: &mut SeededRng) -> Matrix<T> {
    let modulus = parent_blocks.max(child_blocks).max(1);
    Matrix::from_fn(parent_blocks, child_blocks, |i, j| {
        if i % modulus == j % modulus {
            T::of(SAME_BLOCK_PROBABILITY)
        } else {
            T::of(rng.uniform_range(CROSS_BLOCK_RANGE.0, CROSS_BLOCK_RANGE.1))
        }
    })
}

/// Link distribution of one child row over every parent row.
pub fn link_probabilities<T: Scalar>(
    child_blocks: &[u8],
    parent: &BlockHierarchy,
    stack: &BlockMatrixStack<T>,
) -> Result<Vec<T>> {
    if child_blocks.len() != parent.levels() || stack.levels().len() != parent.levels() {
        return Err(Error::Usage("hierarchy levels do not match".into()));
    }
    let scores: Vec<T> = (0..parent.num_rows())
        .map(|j| stack.score(parent.row_blocks(j), child_blocks))
        .collect();
    let total = scores.iter().fold(T::zero(), |a, b| a + *b);
    if !(total > T::zero()) {
        return Err(Error::Structural("all link scores are zero".into()));
    }
    Ok(scores.into_iter().map(|s| s / total).collect())
}

/// Hierarchies and matrices for one (child, parent) table pair.
#[derive(Clone, Debug, PartialEq)]
pub struct FkPlan {
    pub child: BlockHierarchy,
    pub parent: BlockHierarchy,
    pub stack: BlockMatrixStack<f64>,
}

impl FkPlan {
    pub fn new(child: BlockHierarchy, parent: BlockHierarchy, stack: BlockMatrixStack<f64>) -> Result<Self> {
        if child.levels() != parent.levels() || stack.levels().len() != child.levels() {
            return Err(Error::Usage("child, parent and matrices must share the level count".into()));
        }
        for (l, m) in stack.levels().iter().enumerate() {
            if m.rows() != parent.blocks_per_level()[l] || m.cols() != child.blocks_per_level()[l] {
                return Err(Error::Usage(format!("matrix shape mismatch at level {l}")));
            }
        }
        Ok(Self { child, parent, stack })
    }

    /// Shared level count, independent block counts per level and side.
    pub fn sample(child_rows: usize, parent_rows: usize, config: &GenConfig, rng: &mut SeededRng) -> Result<Self> {
        if parent_rows == 0 {
            return Err(Error::Structural("parent table is empty".into()));
        }
        let levels = config.hsbm_levels.draw(rng)?;
        let mut child_blocks = Vec::with_capacity(levels);
        let mut parent_blocks = Vec::with_capacity(levels);
        for _ in 0..levels {
            child_blocks.push(config.hsbm_clusters_per_level.draw(rng)?);
            parent_blocks.push(config.hsbm_clusters_per_level.draw(rng)?);
        }
        let matrices = parent_blocks
            .iter()
            .zip(&child_blocks)
            .map(|(&p, &c)| sample_block_matrix(p, c, rng))
            .collect();
        let child = BlockHierarchy::assign(child_rows, &child_blocks, rng)?;
        let parent = BlockHierarchy::assign(parent_rows, &parent_blocks, rng)?;
        Self::new(child, parent, BlockMatrixStack::new(matrices)?)
    }

    pub fn sampler(&self) -> FkSampler<'_> {
        FkSampler::new(self)
    }
}

/// Two-stage sampler: parent rows sharing a label vector share a score, so a
/// child row first picks a parent group with weight `score * size`, then a
/// row uniformly inside it. Same distribution as the row-level categorical.
pub struct FkSampler<'a> {
    plan: &'a FkPlan,
    /// (labels, 1-based parent rows) per non-empty parent group.
    groups: Vec<(Vec<u8>, Vec<u32>)>,
    cumulative: Vec<Option<Vec<f64>>>,
}

impl<'a> FkSampler<'a> {
    fn new(plan: &'a FkPlan) -> Self {
        let parent = &plan.parent;
        let mut by_composite: Vec<Vec<u32>> = vec![Vec::new(); parent.num_composites()];
        for j in 0..parent.num_rows() {
            by_composite[parent.composite(parent.row_blocks(j))].push(j as u32 + 1);
        }
        let groups = by_composite
            .into_iter()
            .filter(|rows| !rows.is_empty())
            .map(|rows| (parent.row_blocks(rows[0] as usize - 1).to_vec(), rows))
            .collect();
        Self {
            plan,
            groups,
            cumulative: vec![None; plan.child.num_composites()],
        }
    }

    /// 1-based parent row for a child with the given label vector.
    pub fn sample_for_blocks(&mut self, child_blocks: &[u8], rng: &mut SeededRng) -> u32 {
        let key = self.plan.child.composite(child_blocks);
        if self.cumulative[key].is_none() {
            let mut acc = 0.0;
            let cum = self
                .groups
                .iter()
                .map(|(labels, rows)| {
                    acc += self.plan.stack.score(labels, child_blocks) * rows.len() as f64;
                    acc
                })
                .collect();
            self.cumulative[key] = Some(cum);
        }
        let cum = self.cumulative[key].as_ref().expect("filled above");
        let total = *cum.last().expect("parent has rows");
        let target = rng.uniform() * total;
        let g = cum.partition_point(|&c| c <= target).min(cum.len() - 1);
        let rows = &self.groups[g].1;
        rows[rng.index(rows.len())]
    }

    pub fn sample_for_row(&mut self, child_row: usize, rng: &mut SeededRng) -> u32 {
        let blocks = self.plan.child.row_blocks(child_row).to_vec();
        self.sample_for_blocks(&blocks, rng)
    }
}

/// One 1-based parent row index per child row.
pub fn populate_foreign_keys(plan: &FkPlan, rng: &mut SeededRng) -> Result<Vec<u32>> {
    if plan.parent.num_rows() == 0 {
        return Err(Error::Structural("parent table is empty".into()));
    }
    let mut sampler = plan.sampler();
    Ok((0..plan.child.num_rows())
        .map(|i| sampler.sample_for_row(i, rng))
        .collect())
}
