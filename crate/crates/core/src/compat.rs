//! The combination tree.
//!
//! A node holds the blocks committed so far and a reduced compatibility
//! matrix in which the rows and columns of committed tasks are zeroed. Each
//! edge commits one block: a single task or an allowed pair. A node whose
//! matrix is all zero is a leaf, and its committed blocks partition the task
//! set.
//!
//! Children are generated canonically: only the lowest-indexed unassigned
//! task is branched on, so every partition is reached along exactly one path.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

/// Default cap on the task count accepted by [`enumerate_partitions`].
pub const ENUMERATION_CAP: usize = 14;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NotSquare {
        row: usize,
        len: usize,
        expected: usize,
    },
    NotBinary {
        row: usize,
        col: usize,
        value: i64,
    },
    ZeroDiagonal {
        index: usize,
    },
    Asymmetric {
        row: usize,
        col: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotSquare { row, len, expected } => {
                write!(f, "row {row} has {len} entries, expected {expected}")
            }
            Violation::NotBinary { row, col, value } => {
                write!(f, "entry ({row},{col}) = {value} is not 0 or 1")
            }
            Violation::ZeroDiagonal { index } => write!(f, "zero diagonal at ({index},{index})"),
            Violation::Asymmetric { row, col } => write!(f, "asymmetric at ({row},{col})"),
        }
    }
}

/// Checks squareness, 0/1 entries, unit diagonal and symmetry. Returns every
/// violation found; an empty list means the matrix is valid.
pub fn validate(rows: &[Vec<i64>]) -> Vec<Violation> {
    let n = rows.len();
    let mut out = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            out.push(Violation::NotSquare {
                row: i,
                len: row.len(),
                expected: n,
            });
        }
    }
    if !out.is_empty() {
        return out;
    }
    for i in 0..n {
        for j in 0..n {
            let v = rows[i][j];
            if v != 0 && v != 1 {
                out.push(Violation::NotBinary {
                    row: i,
                    col: j,
                    value: v,
                });
            }
        }
    }
    for i in 0..n {
        if rows[i][i] == 0 {
            out.push(Violation::ZeroDiagonal { index: i });
        }
        for j in i + 1..n {
            if rows[i][j] != rows[j][i] {
                out.push(Violation::Asymmetric { row: i, col: j });
            }
        }
    }
    out
}

/// Symmetric 0/1 matrix of allowed pairwise combinations.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CompatibilityMatrix {
    n: usize,
    entries: Vec<bool>,
}

impl CompatibilityMatrix {
    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self> {
        let violations = validate(rows);
        if !violations.is_empty() {
            return Err(Error::InvalidMatrix(violations));
        }
        let n = rows.len();
        Ok(Self {
            n,
            entries: rows.iter().flatten().map(|v| *v == 1).collect(),
        })
    }

    /// No concurrency allowed.
    pub fn identity(n: usize) -> Self {
        let mut entries = vec![false; n * n];
        for i in 0..n {
            entries[i * n + i] = true;
        }
        Self { n, entries }
    }

    /// Every pair allowed.
    pub fn full(n: usize) -> Self {
        Self {
            n,
            entries: vec![true; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.entries[i * self.n + j]
    }

    fn set(&mut self, i: usize, j: usize, v: bool) {
        self.entries[i * self.n + j] = v;
        self.entries[j * self.n + i] = v;
    }

    pub fn rows(&self) -> Vec<Vec<i64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) as i64).collect())
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|e| !e)
    }

    /// Number of allowed off-diagonal pairs.
    pub fn pair_count(&self) -> usize {
        (0..self.n)
            .map(|i| (i + 1..self.n).filter(|&j| self.get(i, j)).count())
            .sum()
    }

    /// Sub-matrix over the given task indices, in the given order.
    pub fn restrict(&self, indices: &[usize]) -> Self {
        let n = indices.len();
        let mut entries = Vec::with_capacity(n * n);
        for &i in indices {
            for &j in indices {
                entries.push(self.get(i, j));
            }
        }
        Self { n, entries }
    }

    fn zero_task(&mut self, t: usize) {
        for k in 0..self.n {
            self.set(t, k, false);
        }
    }
}

/// One or two task indices executed together. For pairs `first < second`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Block {
    pub first: usize,
    pub second: Option<usize>,
}

impl Block {
    pub fn single(t: usize) -> Self {
        Self {
            first: t,
            second: None,
        }
    }

    pub fn pair(a: usize, b: usize) -> Self {
        let (first, second) = if a < b { (a, b) } else { (b, a) };
        Self {
            first,
            second: Some(second),
        }
    }

    pub fn is_pair(&self) -> bool {
        self.second.is_some()
    }

    pub fn members(&self) -> impl Iterator<Item = usize> {
        std::iter::once(self.first).chain(self.second)
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.second {
            Some(s) => write!(f, "{{{},{}}}", self.first, s),
            None => write!(f, "{{{}}}", self.first),
        }
    }
}

/// Disjoint blocks covering every task, sorted by their lowest member.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct Partition {
    blocks: Vec<Block>,
}

impl Partition {
    pub fn new(mut blocks: Vec<Block>) -> Self {
        blocks.sort();
        Self { blocks }
    }

    /// Regular (non-concurrent) operation: every task on its own.
    pub fn singletons(n: usize) -> Self {
        Self {
            blocks: (0..n).map(Block::single).collect(),
        }
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn pair_count(&self) -> usize {
        self.blocks.iter().filter(|b| b.is_pair()).count()
    }

    /// Blocks disjoint, union `0..n`, every pair allowed by `c`.
    pub fn is_valid_for(&self, c: &CompatibilityMatrix) -> bool {
        let mut seen = vec![false; c.n()];
        for b in &self.blocks {
            for m in b.members() {
                if m >= c.n() || seen[m] {
                    return false;
                }
                seen[m] = true;
            }
            if let Some(s) = b.second {
                if !c.get(b.first, s) {
                    return false;
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, b) in self.blocks.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{b}")?;
        }
        f.write_str("}")
    }
}

/// A node of the combination tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionNode {
    committed: Vec<Block>,
    remaining: CompatibilityMatrix,
}

impl PartitionNode {
    pub fn root(c: &CompatibilityMatrix) -> Self {
        Self {
            committed: Vec::new(),
            remaining: c.clone(),
        }
    }

    pub fn committed(&self) -> &[Block] {
        &self.committed
    }

    pub fn remaining(&self) -> &CompatibilityMatrix {
        &self.remaining
    }

    pub fn is_leaf(&self) -> bool {
        self.remaining.is_zero()
    }

    fn lowest_unassigned(&self) -> Option<usize> {
        (0..self.remaining.n()).find(|&i| self.remaining.get(i, i))
    }

    /// `[{p}]` followed by `{p,q}` for each still-compatible `q > p`, where
    /// `p` is the lowest unassigned task.
    pub fn children(&self) -> Result<Vec<Block>> {
        let p = self.lowest_unassigned().ok_or(Error::NoChildrenAtLeaf)?;
        let mut out = vec![Block::single(p)];
        out.extend(
            (p + 1..self.remaining.n())
                .filter(|&q| self.remaining.get(p, q))
                .map(|q| Block::pair(p, q)),
        );
        Ok(out)
    }

    fn is_child(&self, b: &Block) -> bool {
        match self.lowest_unassigned() {
            Some(p) if b.first == p => match b.second {
                None => true,
                Some(q) => q < self.remaining.n() && self.remaining.get(p, q),
            },
            _ => false,
        }
    }

    /// Commits `b` and zeroes its members' rows and columns.
    pub fn apply_block(&self, b: Block) -> Result<Self> {
        if !self.is_child(&b) {
            return Err(Error::IllegalBlock);
        }
        let mut next = self.clone();
        for m in b.members() {
            next.remaining.zero_task(m);
        }
        next.committed.push(b);
        Ok(next)
    }

    /// The committed blocks as a partition; meaningful at a leaf.
    pub fn partition(&self) -> Partition {
        Partition::new(self.committed.clone())
    }
}

pub fn enumerate_partitions(c: &CompatibilityMatrix) -> Result<Vec<Partition>> {
    enumerate_partitions_with_cap(c, ENUMERATION_CAP)
}

/// Depth-first walk of the full combination tree.
pub fn enumerate_partitions_with_cap(
    c: &CompatibilityMatrix,
    cap: usize,
) -> Result<Vec<Partition>> {
    if c.n() > cap {
        return Err(Error::TreeTooLarge { n: c.n(), cap });
    }
    let mut out = Vec::new();
    let mut stack = vec![PartitionNode::root(c)];
    while let Some(node) = stack.pop() {
        if node.is_leaf() {
            out.push(node.partition());
            continue;
        }
        let children = node.children()?;
        // reversed so the first child is explored first
        for b in children.into_iter().rev() {
            stack.push(node.apply_block(b)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    // R, E, C from the worked example: radar and comms may share the aperture.
    fn rec() -> CompatibilityMatrix {
        CompatibilityMatrix::from_rows(&[vec![1, 0, 1], vec![0, 1, 0], vec![1, 0, 1]]).unwrap()
    }
    const R: usize = 0;
    const E: usize = 1;
    const C: usize = 2;

    #[test]
    fn validate_examples() {
        assert!(validate(&CompatibilityMatrix::identity(3).rows()).is_empty());
        assert!(validate(&rec().rows()).is_empty());
        let v = validate(&[vec![1, 1], vec![0, 1]]);
        assert_eq!(v, vec![Violation::Asymmetric { row: 0, col: 1 }]);
        assert_eq!(v[0].to_string(), "asymmetric at (0,1)");
    }

    #[test]
    fn validate_reports_every_violation() {
        let v = validate(&[vec![0, 2], vec![1, 1]]);
        assert_eq!(
            v,
            vec![
                Violation::NotBinary {
                    row: 0,
                    col: 1,
                    value: 2
                },
                Violation::ZeroDiagonal { index: 0 },
                Violation::Asymmetric { row: 0, col: 1 },
            ]
        );
        assert_eq!(
            validate(&[vec![1, 0], vec![0]]),
            vec![Violation::NotSquare {
                row: 1,
                len: 1,
                expected: 2
            }]
        );
    }

    #[test]
    fn children_of_worked_example() {
        let root = PartitionNode::root(&rec());
        assert_eq!(
            root.children().unwrap(),
            vec![Block::single(R), Block::pair(R, C)]
        );

        let rc = root.apply_block(Block::pair(R, C)).unwrap();
        assert_eq!(
            rc.remaining().rows(),
            vec![vec![0, 0, 0], vec![0, 1, 0], vec![0, 0, 0]]
        );
        assert_eq!(rc.children().unwrap(), vec![Block::single(E)]);

        let leaf = rc.apply_block(Block::single(E)).unwrap();
        assert!(leaf.is_leaf());
        assert_eq!(leaf.children(), Err(Error::NoChildrenAtLeaf));
        assert_eq!(
            leaf.partition(),
            Partition::new(vec![Block::pair(R, C), Block::single(E)])
        );
    }

    #[test]
    fn apply_block_rejects_illegal_blocks() {
        let root = PartitionNode::root(&rec());
        assert_eq!(
            root.apply_block(Block::pair(R, E)),
            Err(Error::IllegalBlock)
        );
        // not the lowest unassigned task
        assert_eq!(root.apply_block(Block::single(E)), Err(Error::IllegalBlock));
        assert_eq!(
            root.apply_block(Block::pair(R, 9)),
            Err(Error::IllegalBlock)
        );
    }

    #[test]
    fn apply_block_leaves_parent_untouched() {
        let id2 = PartitionNode::root(&CompatibilityMatrix::identity(2));
        let child = id2.apply_block(Block::single(0)).unwrap();
        assert_eq!(child.remaining().rows(), vec![vec![0, 0], vec![0, 1]]);
        assert_eq!(id2.remaining().rows(), vec![vec![1, 0], vec![0, 1]]);
        assert!(id2.committed().is_empty());
    }

    #[test]
    fn identity_nodes_have_one_child() {
        let mut node = PartitionNode::root(&CompatibilityMatrix::identity(4));
        for t in 0..4 {
            assert_eq!(node.children().unwrap(), vec![Block::single(t)]);
            node = node.apply_block(Block::single(t)).unwrap();
        }
        assert!(node.is_leaf());
    }

    #[test]
    fn leaf_conditions() {
        assert!(!PartitionNode::root(&CompatibilityMatrix::identity(1)).is_leaf());
        let empty = PartitionNode::root(&CompatibilityMatrix::identity(0));
        assert!(empty.is_leaf());
        assert_eq!(
            enumerate_partitions(&CompatibilityMatrix::identity(0)).unwrap(),
            vec![Partition::new(vec![])]
        );
    }

    #[test]
    fn enumerate_worked_example() {
        let parts = enumerate_partitions(&rec()).unwrap();
        assert_eq!(
            parts,
            vec![
                Partition::singletons(3),
                Partition::new(vec![Block::pair(R, C), Block::single(E)]),
            ]
        );
    }

    #[test]
    fn enumerate_identity_and_full() {
        assert_eq!(
            enumerate_partitions(&CompatibilityMatrix::identity(6)).unwrap(),
            vec![Partition::singletons(6)]
        );
        assert_eq!(
            enumerate_partitions(&CompatibilityMatrix::full(4))
                .unwrap()
                .len(),
            10
        );
    }

    #[test]
    fn enumerate_cap() {
        assert_eq!(
            enumerate_partitions(&CompatibilityMatrix::identity(15)),
            Err(Error::TreeTooLarge {
                n: 15,
                cap: ENUMERATION_CAP
            })
        );
    }

    #[test]
    fn restrict_keeps_selected_pairs() {
        let sub = rec().restrict(&[C, R]);
        assert_eq!(sub.rows(), vec![vec![1, 1], vec![1, 1]]);
        assert_eq!(rec().pair_count(), 1);
    }
}
