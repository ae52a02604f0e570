#![allow(dead_code)]

use std::collections::BTreeSet;

use qram_core::compat::{CompatibilityMatrix, Partition};
use qram_core::composite::{DimMode, SplitApertureRule};
use qram_core::model::{ConfigurationPoint, Problem, ResourceVector, Task, TaskType};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random task: null config plus `extra` configs with resources in [0, 0.6]
/// per dimension and utility growing sublinearly with total usage.
pub fn random_task(rng: &mut impl Rng, id: u64, dim: usize, extra: usize) -> Task {
    let mut configs = vec![ConfigurationPoint {
        id: 0,
        resources: ResourceVector::zeros(dim),
        quality: 0.0,
        utility: 0.0,
    }];
    for c in 1..=extra {
        let r: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.01..0.6)).collect();
        let load: f64 = r.iter().sum();
        let utility = load.sqrt() * rng.gen_range(0.5..1.5) * 10.0;
        configs.push(ConfigurationPoint {
            id: c,
            resources: ResourceVector::new(r).unwrap(),
            quality: rng.gen_range(0.0..1.0),
            utility,
        });
    }
    let t = TaskType::ALL[rng.gen_range(0..TaskType::ALL.len())];
    Task::new(id, t, rng.gen_range(0.5..2.0), configs).unwrap()
}

/// Up to `max_execs` executables with up to `max_configs` configs each.
pub fn random_problem(
    rng: &mut impl Rng,
    max_execs: usize,
    max_configs: usize,
    dim: usize,
) -> Problem {
    let n = rng.gen_range(1..=max_execs);
    let tasks = (0..n)
        .map(|i| {
            let extra = rng.gen_range(1..max_configs);
            random_task(rng, i as u64, dim, extra)
        })
        .collect();
    let bounds = (0..dim).map(|_| rng.gen_range(0.4..1.5)).collect();
    Problem::new(
        tasks,
        ResourceVector::new(bounds).unwrap(),
        Default::default(),
    )
    .unwrap()
}

pub fn random_tasks(rng: &mut impl Rng, n: usize, dim: usize, max_configs: usize) -> Vec<Task> {
    (0..n)
        .map(|i| {
            let extra = rng.gen_range(1..max_configs);
            random_task(rng, i as u64, dim, extra)
        })
        .collect()
}

pub fn random_bounds(rng: &mut impl Rng, dim: usize) -> ResourceVector {
    ResourceVector::new((0..dim).map(|_| rng.gen_range(0.4..1.5)).collect()).unwrap()
}

/// Random symmetric 0/1 matrix with unit diagonal.
pub fn random_compat(rng: &mut impl Rng, n: usize, density: f64) -> CompatibilityMatrix {
    let mut rows = vec![vec![0i64; n]; n];
    for i in 0..n {
        rows[i][i] = 1;
        for j in i + 1..n {
            if rng.gen_bool(density) {
                rows[i][j] = 1;
                rows[j][i] = 1;
            }
        }
    }
    CompatibilityMatrix::from_rows(&rows).unwrap()
}

/// Three-dimensional rule (time overlaps, aperture shared, power adds)
/// with random per-type penalty exponents.
pub fn random_rule(rng: &mut impl Rng) -> SplitApertureRule {
    let mut rule = SplitApertureRule::new(vec![DimMode::Max, DimMode::Share, DimMode::Add]);
    for t in TaskType::ALL {
        if rng.gen_bool(0.5) {
            rule.gamma_by_type.insert(t, rng.gen_range(0.0..1.5));
        }
    }
    rule
}

pub fn as_blocks(p: &Partition) -> Vec<Vec<usize>> {
    p.blocks().iter().map(|b| b.members().collect()).collect()
}

/// Every matching of the compatibility graph, built by including or
/// excluding each allowed edge in turn; unmatched tasks become singletons.
pub fn brute_force_partitions(c: &CompatibilityMatrix) -> BTreeSet<Vec<Vec<usize>>> {
    let n = c.n();
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| c.get(i, j))
        .collect();
    let mut out = BTreeSet::new();
    fn go(
        k: usize,
        edges: &[(usize, usize)],
        used: &mut Vec<bool>,
        chosen: &mut Vec<(usize, usize)>,
        out: &mut BTreeSet<Vec<Vec<usize>>>,
    ) {
        if k == edges.len() {
            let mut blocks: Vec<Vec<usize>> = chosen.iter().map(|&(a, b)| vec![a, b]).collect();
            blocks.extend((0..used.len()).filter(|&t| !used[t]).map(|t| vec![t]));
            blocks.sort();
            out.insert(blocks);
            return;
        }
        go(k + 1, edges, used, chosen, out);
        let (a, b) = edges[k];
        if !used[a] && !used[b] {
            used[a] = true;
            used[b] = true;
            chosen.push((a, b));
            go(k + 1, edges, used, chosen, out);
            chosen.pop();
            used[a] = false;
            used[b] = false;
        }
    }
    go(0, &edges, &mut vec![false; n], &mut Vec::new(), &mut out);
    out
}

/// I(n) = I(n-1) + (n-1) I(n-2), I(0) = I(1) = 1.
pub fn involutions(n: usize) -> u64 {
    let (mut a, mut b) = (1u64, 1u64);
    for k in 2..=n {
        let next = b + (k as u64 - 1) * a;
        a = b;
        b = next;
    }
    b
}
