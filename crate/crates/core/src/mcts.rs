//! Monte Carlo tree search over the combination tree.
//!
//! Each iteration descends by UCT through fully expanded nodes, expands one
//! untried child, completes the partition by uniform random choices and
//! scores the leaf with the greedy allocator. Every node keeps the running
//! mean of normalised rollout values (used for selection) and the best raw
//! utility seen below it together with the partition that achieved it.
//!
//! The regular non-concurrent operation (all singletons) is evaluated before
//! the first iteration and seeds the root's best value, so a search never
//! returns anything worse than it, whatever the budget.

use std::collections::{HashMap, VecDeque};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocator::greedy_indices;
use crate::compat::{Block, CompatibilityMatrix, Partition, PartitionNode};
use crate::composite::PairComposer;
use crate::error::{Error, Result};
use crate::model::{Allocation, ResourceVector, Task, TaskType};

/// Standard UCT constant for rewards in `[0, 1]`.
pub const DEFAULT_CP: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exploitation {
    /// Running mean of normalised rollout values.
    #[default]
    Mean,
    /// Normalised best raw utility seen below the node.
    Best,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MctsParams {
    pub cp: f64,
    #[serde(default)]
    pub exploitation: Exploitation,
}

impl Default for MctsParams {
    fn default() -> Self {
        Self {
            cp: DEFAULT_CP,
            exploitation: Exploitation::Mean,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SearchBudget {
    pub max_iterations: Option<u64>,
    pub deadline: Option<Duration>,
}

impl SearchBudget {
    pub fn iterations(n: u64) -> Self {
        Self {
            max_iterations: Some(n),
            deadline: None,
        }
    }

    pub fn time(d: Duration) -> Self {
        Self {
            max_iterations: None,
            deadline: Some(d),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations.is_none() && self.deadline.is_none() {
            return Err(Error::EmptyBudget);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MctsStats {
    pub visits: u64,
    pub mean_value: f64,
    pub best_value: f64,
    pub best_partition: Option<Partition>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best_partition: Partition,
    pub best_allocation: Allocation,
    pub best_utility: f64,
    pub baseline_utility: f64,
    pub iterations_run: u64,
    pub leaf_evaluations: usize,
    /// `(iteration, best so far)`, one entry per improvement; iteration 0 is
    /// the baseline.
    pub utility_trace: Vec<(u64, f64)>,
}

/// Scores leaves of one combination tree. Pair tables for every allowed pair
/// are composed up front and only read afterwards, so one evaluator can be
/// shared by concurrent searches.
pub struct LeafEvaluator {
    tasks: Vec<Task>,
    compat: CompatibilityMatrix,
    bounds: ResourceVector,
    pairs: HashMap<(usize, usize), Task>,
}

impl LeafEvaluator {
    pub fn new(
        compat: &CompatibilityMatrix,
        tasks: &[Task],
        bounds: &ResourceVector,
        rule: &dyn PairComposer,
    ) -> Result<Self> {
        if compat.n() != tasks.len() {
            return Err(Error::InvalidProblem(format!(
                "compatibility matrix is {n}x{n} but there are {} tasks",
                tasks.len(),
                n = compat.n()
            )));
        }
        let mut pairs = HashMap::new();
        for i in 0..tasks.len() {
            for j in i + 1..tasks.len() {
                if compat.get(i, j) {
                    pairs.insert((i, j), rule.compose_pair(&tasks[i], &tasks[j])?);
                }
            }
        }
        Ok(Self {
            tasks: tasks.to_vec(),
            compat: compat.clone(),
            bounds: bounds.clone(),
            pairs,
        })
    }

    pub fn compat(&self) -> &CompatibilityMatrix {
        &self.compat
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    /// The executable standing for `b`.
    pub fn executable(&self, b: &Block) -> &Task {
        match b.second {
            None => &self.tasks[b.first],
            Some(s) => &self.pairs[&(b.first, s)],
        }
    }

    /// Greedy allocation of the problem induced by `part`. Same result as
    /// `build_problem` followed by `allocate_greedy`.
    pub fn evaluate(&self, part: &Partition) -> Result<Allocation> {
        let mut execs: Vec<&Task> = part.blocks().iter().map(|b| self.executable(b)).collect();
        execs.sort_by_key(|t| t.id);
        let choice = greedy_indices(&execs, &self.bounds)?;
        Ok(Allocation::from_indices(&execs, self.bounds.dim(), &choice))
    }

    /// Per-task view of an allocation of `part`: pairs are split back into
    /// their members with penalised quality and utility.
    pub fn outcomes(&self, part: &Partition, alloc: &Allocation) -> Vec<TaskOutcome> {
        let tasks = &self.tasks;
        let mut out = Vec::with_capacity(tasks.len());
        for b in part.blocks() {
            let exec = self.executable(b);
            let cid = alloc.choices[&exec.id];
            let ix = exec
                .configs
                .iter()
                .position(|c| c.id == cid)
                .expect("allocated config exists");
            match b.second {
                None => {
                    let t = &tasks[b.first];
                    out.push(single_outcome(t, ix, None));
                }
                Some(s) => {
                    let (a, bt) = (&tasks[b.first], &tasks[s]);
                    let origin = exec
                        .origin
                        .as_ref()
                        .expect("pair blocks carry their origin");
                    match &origin.choices[ix] {
                        None => {
                            out.push(single_outcome(a, a.null_index().unwrap(), Some(bt.id)));
                            out.push(single_outcome(bt, bt.null_index().unwrap(), Some(a.id)));
                        }
                        Some(pc) => {
                            let mut oa = single_outcome(a, pc.first, Some(bt.id));
                            oa.quality = pc.first_quality;
                            oa.utility = pc.first_utility;
                            let mut ob = single_outcome(bt, pc.second, Some(a.id));
                            ob.quality = pc.second_quality;
                            ob.utility = pc.second_utility;
                            out.push(oa);
                            out.push(ob);
                        }
                    }
                }
            }
        }
        out.sort_by_key(|o| o.task_id);
        out
    }
}

/// What one task ended up doing in an epoch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskOutcome {
    pub task_id: u64,
    pub task_type: TaskType,
    pub config_id: usize,
    pub is_null: bool,
    pub quality: f64,
    /// Weighted utility attributed to this task.
    pub utility: f64,
    /// Weighted utility this task would have at its null configuration.
    pub null_utility: f64,
    pub paired_with: Option<u64>,
}

impl TaskOutcome {
    pub fn is_concurrent(&self) -> bool {
        self.paired_with.is_some() && !self.is_null
    }
}

fn single_outcome(t: &Task, ix: usize, paired_with: Option<u64>) -> TaskOutcome {
    let c = &t.configs[ix];
    TaskOutcome {
        task_id: t.id,
        task_type: t.task_type,
        config_id: c.id,
        is_null: c.is_null(),
        quality: c.quality,
        utility: t.weight * c.utility,
        null_utility: t.null_config().map_or(0.0, |n| t.weight * n.utility),
        paired_with,
    }
}

/// UCT score: exploitation term plus `2 Cp sqrt(2 ln N / n)`.
pub fn uct_score(exploit: f64, parent_visits: u64, child_visits: u64, cp: f64) -> f64 {
    exploit + 2.0 * cp * (2.0 * (parent_visits as f64).ln() / child_visits as f64).sqrt()
}

struct TreeNode {
    state: PartitionNode,
    children: Vec<usize>,
    untried: VecDeque<Block>,
    stats: MctsStats,
}

/// One search instance. Single-threaded; owns its tree and leaf memo.
pub struct Search<'e> {
    evaluator: &'e LeafEvaluator,
    params: MctsParams,
    rng: ChaCha8Rng,
    nodes: Vec<TreeNode>,
    memo: HashMap<Partition, Allocation>,
    baseline_utility: f64,
    min_seen: f64,
    max_seen: f64,
    iterations: u64,
    trace: Vec<(u64, f64)>,
}

impl<'e> Search<'e> {
    /// Evaluates the all-singleton baseline and seeds the root with it.
    pub fn new(evaluator: &'e LeafEvaluator, params: MctsParams, seed: u64) -> Result<Self> {
        let root_state = PartitionNode::root(&evaluator.compat);
        let untried = if root_state.is_leaf() {
            VecDeque::new()
        } else {
            root_state.children()?.into()
        };
        let baseline = Partition::singletons(evaluator.tasks.len());
        let alloc = evaluator.evaluate(&baseline)?;
        let u = alloc.total_utility;
        let mut memo = HashMap::new();
        memo.insert(baseline.clone(), alloc);
        Ok(Self {
            evaluator,
            params,
            rng: ChaCha8Rng::seed_from_u64(seed),
            nodes: vec![TreeNode {
                state: root_state,
                children: Vec::new(),
                untried,
                stats: MctsStats {
                    visits: 0,
                    mean_value: 0.0,
                    best_value: u,
                    best_partition: Some(baseline),
                },
            }],
            memo,
            baseline_utility: u,
            min_seen: u,
            max_seen: u,
            iterations: 0,
            trace: vec![(0, u)],
        })
    }

    pub fn root_stats(&self) -> &MctsStats {
        &self.nodes[0].stats
    }

    pub fn stats(&self, node: usize) -> &MctsStats {
        &self.nodes[node].stats
    }

    pub fn children_of(&self, node: usize) -> &[usize] {
        &self.nodes[node].children
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    pub fn leaf_evaluations(&self) -> usize {
        self.memo.len()
    }

    /// Maps a raw utility onto `[0, 1]` using the baseline and the range seen
    /// so far; 0.5 when that range is empty.
    pub fn normalize(&self, u: f64) -> f64 {
        let lo = self.min_seen.min(self.baseline_utility);
        let span = self.max_seen - lo;
        if span > 0.0 {
            ((u - lo) / span).clamp(0.0, 1.0)
        } else {
            0.5
        }
    }

    /// UCT choice among the children of a fully expanded node; ties keep
    /// canonical child order.
    ///
    /// # Panics
    /// If the node still has untried children or has none at all.
    pub fn select(&self, node: usize) -> usize {
        let n = &self.nodes[node];
        assert!(
            n.untried.is_empty() && !n.children.is_empty(),
            "select called on a node that is not fully expanded"
        );
        let mut best: Option<(usize, f64)> = None;
        for &c in &n.children {
            let s = &self.nodes[c].stats;
            let exploit = match self.params.exploitation {
                Exploitation::Mean => s.mean_value,
                Exploitation::Best => self.normalize(s.best_value),
            };
            let score = uct_score(exploit, n.stats.visits, s.visits, self.params.cp);
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((c, score));
            }
        }
        best.expect("non-empty children").0
    }

    fn expand(&mut self, node: usize) -> Result<usize> {
        let b = self.nodes[node]
            .untried
            .pop_front()
            .expect("expand needs an untried child");
        let state = self.nodes[node].state.apply_block(b)?;
        let untried = if state.is_leaf() {
            VecDeque::new()
        } else {
            state.children()?.into()
        };
        self.nodes.push(TreeNode {
            state,
            children: Vec::new(),
            untried,
            stats: MctsStats::default(),
        });
        let id = self.nodes.len() - 1;
        self.nodes[node].children.push(id);
        Ok(id)
    }

    /// Completes `node` to a leaf by uniform random child choices and scores
    /// it. Leaves are evaluated once and memoised.
    pub fn rollout(&mut self, node: &PartitionNode) -> Result<(Partition, f64)> {
        let mut state = node.clone();
        while !state.is_leaf() {
            let children = state.children()?;
            let pick = children[self.rng.gen_range(0..children.len())];
            state = state.apply_block(pick)?;
        }
        let part = state.partition();
        let u = self.score(&part)?;
        Ok((part, u))
    }

    fn score(&mut self, part: &Partition) -> Result<f64> {
        if let Some(a) = self.memo.get(part) {
            return Ok(a.total_utility);
        }
        let a = self.evaluator.evaluate(part)?;
        let u = a.total_utility;
        self.memo.insert(part.clone(), a);
        Ok(u)
    }

    /// Pushes one rollout result up `path` (root first).
    pub fn backpropagate(&mut self, path: &[usize], raw_utility: f64, partition: &Partition) {
        self.min_seen = self.min_seen.min(raw_utility);
        self.max_seen = self.max_seen.max(raw_utility);
        let v = self.normalize(raw_utility);
        for &id in path {
            let s = &mut self.nodes[id].stats;
            s.visits += 1;
            s.mean_value += (v - s.mean_value) / s.visits as f64;
            if s.best_partition.is_none() || raw_utility > s.best_value {
                s.best_value = raw_utility;
                s.best_partition = Some(partition.clone());
            }
        }
    }

    /// One select / expand / rollout / backpropagate pass.
    pub fn iterate(&mut self) -> Result<()> {
        self.iterations += 1;
        let mut path = vec![0];
        let mut node = 0;
        loop {
            let n = &self.nodes[node];
            if n.state.is_leaf() {
                break;
            }
            if !n.untried.is_empty() {
                node = self.expand(node)?;
                path.push(node);
                break;
            }
            node = self.select(node);
            path.push(node);
        }
        let state = self.nodes[node].state.clone();
        let (part, u) = self.rollout(&state)?;
        let before = self.nodes[0].stats.best_value;
        self.backpropagate(&path, u, &part);
        if u > before {
            self.trace.push((self.iterations, u));
        }
        Ok(())
    }

    pub fn run(mut self, budget: SearchBudget) -> Result<SearchResult> {
        budget.validate()?;
        let start = Instant::now();
        loop {
            if budget.max_iterations.is_some_and(|m| self.iterations >= m)
                || budget.deadline.is_some_and(|d| start.elapsed() >= d)
            {
                break;
            }
            self.iterate()?;
        }
        Ok(self.finish())
    }

    pub fn finish(mut self) -> SearchResult {
        let root = &self.nodes[0].stats;
        let best_partition = root
            .best_partition
            .clone()
            .expect("root seeded with baseline");
        let best_utility = root.best_value;
        let best_allocation = self
            .memo
            .remove(&best_partition)
            .expect("best partition was evaluated");
        SearchResult {
            best_partition,
            best_allocation,
            best_utility,
            baseline_utility: self.baseline_utility,
            iterations_run: self.iterations,
            leaf_evaluations: self.memo.len() + 1,
            utility_trace: self.trace,
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn search(
    compat: &CompatibilityMatrix,
    tasks: &[Task],
    bounds: &ResourceVector,
    rule: &dyn PairComposer,
    budget: SearchBudget,
    seed: u64,
    params: MctsParams,
) -> Result<SearchResult> {
    budget.validate()?;
    let evaluator = LeafEvaluator::new(compat, tasks, bounds, rule)?;
    Search::new(&evaluator, params, seed)?.run(budget)
}

/// Independent searches with different seeds over one shared evaluator,
/// merged by best utility (earlier seed wins ties). Iteration and evaluation
/// counts are summed; the trace is the winner's.
pub fn search_root_parallel(
    evaluator: &LeafEvaluator,
    budget: SearchBudget,
    seeds: &[u64],
    params: MctsParams,
) -> Result<SearchResult> {
    budget.validate()?;
    if seeds.is_empty() {
        return Err(Error::InvalidProblem("no seeds given".into()));
    }
    let results = seeds
        .par_iter()
        .map(|&s| Search::new(evaluator, params, s)?.run(budget))
        .collect::<Result<Vec<_>>>()?;
    let iterations: u64 = results.iter().map(|r| r.iterations_run).sum();
    let evaluations: usize = results.iter().map(|r| r.leaf_evaluations).sum();
    let mut best = results
        .into_iter()
        .reduce(|a, b| {
            if b.best_utility > a.best_utility {
                b
            } else {
                a
            }
        })
        .expect("at least one seed");
    best.iterations_run = iterations;
    best.leaf_evaluations = evaluations;
    Ok(best)
}
