//! Composition of two compatible tasks into one executable block, and
//! construction of the allocation problem for a whole partition.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::compat::{CompatibilityMatrix, Partition};
use crate::error::{Error, Result};
use crate::model::{
    BlockOrigin, ConfigurationPoint, Environment, PairChoice, Problem, ResourceVector, Task,
    TaskType,
};

/// How one resource dimension combines when two tasks run concurrently.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DimMode {
    /// Divided between the members by the split fraction (aperture).
    Share,
    /// Members overlap in time; the longer one counts.
    Max,
    /// Members draw on it independently (power).
    Add,
}

/// Something that can turn two tasks into one concurrent block.
pub trait PairComposer: Sync {
    fn name(&self) -> &str;

    /// `a` is the member with the lower task index in the partition.
    fn compose_pair(&self, a: &Task, b: &Task) -> Result<Task>;
}

/// Deterministic id of the block made of tasks `a` and `b`. Singleton ids
/// live below 2^32, block ids above.
pub fn pair_block_id(a: u64, b: u64) -> u64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    ((lo + 1) << 32) | hi
}

pub const MAX_TASK_ID: u64 = u32::MAX as u64;

/// Split-aperture concurrency: the first member gets a share `f` of the
/// aperture, the second `1 - f`, and each member's utility and quality are
/// scaled by `share^gamma`, with `gamma` chosen by task type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitApertureRule {
    #[serde(default = "default_fractions")]
    pub split_fractions: Vec<f64>,
    #[serde(default)]
    pub gamma_by_type: BTreeMap<TaskType, f64>,
    #[serde(default = "default_gamma")]
    pub default_gamma: f64,
    pub dim_modes: Vec<DimMode>,
}

fn default_fractions() -> Vec<f64> {
    vec![0.25, 0.5, 0.75]
}

fn default_gamma() -> f64 {
    1.0
}

impl SplitApertureRule {
    /// Default fractions and a linear penalty for every type.
    pub fn new(dim_modes: Vec<DimMode>) -> Self {
        Self {
            split_fractions: default_fractions(),
            gamma_by_type: BTreeMap::new(),
            default_gamma: default_gamma(),
            dim_modes,
        }
    }

    /// Dimensions named `aperture` are shared, everything else adds.
    pub fn for_dimensions<S: AsRef<str>>(names: &[S]) -> Self {
        Self::new(
            names
                .iter()
                .map(|n| {
                    if n.as_ref().eq_ignore_ascii_case("aperture") {
                        DimMode::Share
                    } else {
                        DimMode::Add
                    }
                })
                .collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let fr = &self.split_fractions;
        if fr.is_empty() {
            return Err(Error::InvalidRule("split_fractions is empty".into()));
        }
        if let Some(f) = fr.iter().find(|f| !(**f > 0.0 && **f < 1.0)) {
            return Err(Error::InvalidRule(format!(
                "split fraction {f} not in (0,1)"
            )));
        }
        if fr.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidRule(
                "split_fractions must be strictly ascending".into(),
            ));
        }
        let gammas = std::iter::once(&self.default_gamma).chain(self.gamma_by_type.values());
        if let Some(g) = gammas.into_iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(Error::InvalidRule(format!("gamma {g} must be >= 0")));
        }
        Ok(())
    }

    pub fn gamma(&self, t: TaskType) -> f64 {
        self.gamma_by_type
            .get(&t)
            .copied()
            .unwrap_or(self.default_gamma)
    }

    /// Degraded value for a member running on `fraction` of the aperture.
    /// Non-decreasing in `fraction`, identity at 1.
    pub fn penalty(&self, value: f64, fraction: f64, t: TaskType) -> f64 {
        value * fraction.powf(self.gamma(t))
    }
}

impl PairComposer for SplitApertureRule {
    fn name(&self) -> &str {
        "split_aperture"
    }

    fn compose_pair(&self, a: &Task, b: &Task) -> Result<Task> {
        if a.dim() != b.dim() || a.dim() != self.dim_modes.len() {
            return Err(Error::IncompatibleResourceSpaces);
        }
        for t in [a, b] {
            if t.id > MAX_TASK_ID {
                return Err(Error::InvalidTask {
                    task_id: t.id,
                    reason: "task ids must fit in 32 bits to be composed".into(),
                });
            }
        }
        let null_a = a.null_config().ok_or(Error::NoNullConfiguration)?;
        let null_b = b.null_config().ok_or(Error::NoNullConfiguration)?;

        let mut configs = vec![ConfigurationPoint {
            id: 0,
            resources: ResourceVector::zeros(a.dim()),
            quality: 0.0,
            utility: a.weight * null_a.utility + b.weight * null_b.utility,
        }];
        let mut choices = vec![None];

        for (ia, ca) in a.configs.iter().enumerate().filter(|(_, c)| !c.is_null()) {
            for (ib, cb) in b.configs.iter().enumerate().filter(|(_, c)| !c.is_null()) {
                for &f in &self.split_fractions {
                    let g = 1.0 - f;
                    let resources = self
                        .dim_modes
                        .iter()
                        .enumerate()
                        .map(|(j, mode)| {
                            let (ra, rb) = (ca.resources[j], cb.resources[j]);
                            match mode {
                                DimMode::Share => f * ra + g * rb,
                                DimMode::Max => ra.max(rb),
                                DimMode::Add => ra + rb,
                            }
                        })
                        .collect();
                    let qa = self.penalty(ca.quality, f, a.task_type);
                    let qb = self.penalty(cb.quality, g, b.task_type);
                    let ua = a.weight * self.penalty(ca.utility, f, a.task_type);
                    let ub = b.weight * self.penalty(cb.utility, g, b.task_type);
                    configs.push(ConfigurationPoint {
                        id: configs.len(),
                        resources: ResourceVector::from_raw(resources),
                        quality: f * qa + g * qb,
                        utility: ua + ub,
                    });
                    choices.push(Some(PairChoice {
                        first: ia,
                        second: ib,
                        fraction: f,
                        first_quality: qa,
                        second_quality: qb,
                        first_utility: ua,
                        second_utility: ub,
                    }));
                }
            }
        }

        Ok(Task {
            id: pair_block_id(a.id, b.id),
            task_type: a.task_type,
            weight: 1.0,
            configs,
            origin: Some(BlockOrigin {
                members: [a.id, b.id],
                choices,
            }),
        })
    }
}

/// The allocation problem for one leaf of the combination tree: singleton
/// blocks carry their task unchanged, pairs go through `rule`.
pub fn build_problem(
    part: &Partition,
    tasks: &[Task],
    bounds: &ResourceVector,
    env: &Environment,
    rule: &dyn PairComposer,
) -> Result<Problem> {
    if !part.is_valid_for(&CompatibilityMatrix::full(tasks.len())) {
        return Err(Error::InvalidProblem(format!(
            "partition {part} does not cover {} tasks",
            tasks.len()
        )));
    }
    let executables = part
        .blocks()
        .iter()
        .map(|b| match b.second {
            None => Ok(tasks[b.first].clone()),
            Some(s) => rule.compose_pair(&tasks[b.first], &tasks[s]),
        })
        .collect::<Result<Vec<_>>>()?;
    Problem::new(executables, bounds.clone(), env.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocator::allocate_greedy;
    use crate::compat::Block;

    fn cfg(id: usize, r: &[f64], q: f64, u: f64) -> ConfigurationPoint {
        ConfigurationPoint {
            id,
            resources: ResourceVector::new(r.to_vec()).unwrap(),
            quality: q,
            utility: u,
        }
    }

    fn two_dim_rule() -> SplitApertureRule {
        SplitApertureRule::new(vec![DimMode::Share, DimMode::Add])
    }

    fn task_a() -> Task {
        Task::new(
            1,
            TaskType::Sar,
            1.0,
            vec![
                cfg(0, &[0.0, 0.0], 0.0, 0.0),
                cfg(1, &[1.0, 0.4], 0.9, 10.0),
            ],
        )
        .unwrap()
    }

    fn task_b() -> Task {
        Task::new(
            2,
            TaskType::Track,
            1.0,
            vec![
                cfg(0, &[0.0, 0.0], 0.0, 0.0),
                cfg(1, &[0.2, 0.1], 0.5, 3.0),
                cfg(2, &[0.5, 0.2], 1.0, 6.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn linear_penalty_halves_both() {
        let block = two_dim_rule().compose_pair(&task_a(), &task_b()).unwrap();
        let origin = block.origin.as_ref().unwrap();
        let ix = origin
            .choices
            .iter()
            .position(|c| {
                c.as_ref()
                    .is_some_and(|c| c.first == 1 && c.second == 2 && c.fraction == 0.5)
            })
            .unwrap();
        let c = &block.configs[ix];
        assert_eq!(c.utility, 8.0);
        assert_eq!(c.resources.values(), &[0.5 * 1.0 + 0.5 * 0.5, 0.4 + 0.2]);
        assert_eq!(origin.choices[ix].as_ref().unwrap().second_quality, 0.5);
    }

    #[test]
    fn table_size_and_null() {
        let rule = two_dim_rule();
        let block = rule.compose_pair(&task_a(), &task_b()).unwrap();
        assert_eq!(block.configs.len(), 2 * 3 + 1);
        assert_eq!(block.weight, 1.0);
        assert_eq!(block.id, pair_block_id(1, 2));
        assert!(block.validate().is_ok());
        let null = block.null_config().unwrap();
        assert_eq!(null.utility, 0.0);
    }

    #[test]
    fn null_block_keeps_member_null_utilities() {
        let mut a = task_a();
        a.weight = 2.0;
        a.configs[0].utility = 1.5;
        let mut b = task_b();
        b.configs[0].utility = 0.25;
        let block = two_dim_rule().compose_pair(&a, &b).unwrap();
        assert_eq!(block.null_config().unwrap().utility, 2.0 * 1.5 + 0.25);
    }

    #[test]
    fn identity_at_full_aperture() {
        let rule = two_dim_rule();
        assert_eq!(rule.penalty(7.0, 1.0, TaskType::Sar), 7.0);
        let mut r = two_dim_rule();
        r.gamma_by_type.insert(TaskType::Sar, 0.3);
        assert_eq!(r.penalty(7.0, 1.0, TaskType::Sar), 7.0);
        assert!(r.penalty(7.0, 0.5, TaskType::Sar) > rule.penalty(7.0, 0.5, TaskType::Sar));
    }

    #[test]
    fn dim_modes_combine() {
        let rule = SplitApertureRule {
            split_fractions: vec![0.25],
            gamma_by_type: BTreeMap::new(),
            default_gamma: 0.0,
            dim_modes: vec![DimMode::Max, DimMode::Share],
        };
        let block = rule.compose_pair(&task_a(), &task_b()).unwrap();
        // a=(1.0,0.4) b=(0.2,0.1)
        assert_eq!(
            block.configs[1].resources.values(),
            &[1.0, 0.25 * 0.4 + 0.75 * 0.1]
        );
        // gamma 0: no degradation
        assert_eq!(block.configs[1].utility, 13.0);
    }

    #[test]
    fn mismatched_dimensions() {
        let one_dim = Task::new(3, TaskType::Comm, 1.0, vec![cfg(0, &[0.0], 0.0, 0.0)]).unwrap();
        assert_eq!(
            two_dim_rule().compose_pair(&task_a(), &one_dim),
            Err(Error::IncompatibleResourceSpaces)
        );
        let rule = SplitApertureRule::new(vec![DimMode::Share]);
        assert_eq!(
            rule.compose_pair(&task_a(), &task_b()),
            Err(Error::IncompatibleResourceSpaces)
        );
    }

    #[test]
    fn rule_validation() {
        let mut r = two_dim_rule();
        assert!(r.validate().is_ok());
        r.split_fractions = vec![0.5, 0.25];
        assert!(r.validate().is_err());
        r.split_fractions = vec![0.0, 0.5];
        assert!(r.validate().is_err());
        r.split_fractions = vec![0.5];
        r.gamma_by_type.insert(TaskType::Ew, -1.0);
        assert!(r.validate().is_err());
    }

    #[test]
    fn for_dimensions_shares_aperture_only() {
        let r = SplitApertureRule::for_dimensions(&["time", "Aperture", "power"]);
        assert_eq!(
            r.dim_modes,
            vec![DimMode::Add, DimMode::Share, DimMode::Add]
        );
    }

    #[test]
    fn build_problem_singletons_unchanged() {
        let tasks = vec![task_a(), task_b()];
        let bounds = ResourceVector::new(vec![1.0, 1.0]).unwrap();
        let p = build_problem(
            &Partition::singletons(2),
            &tasks,
            &bounds,
            &Environment::new(),
            &two_dim_rule(),
        )
        .unwrap();
        assert_eq!(p.executables(), &tasks[..]);
        let direct = Problem::new(tasks.clone(), bounds, Environment::new()).unwrap();
        assert_eq!(
            allocate_greedy(&p).unwrap(),
            allocate_greedy(&direct).unwrap()
        );
    }

    #[test]
    fn build_problem_pairs_and_empty() {
        let c = Task::new(5, TaskType::Ew, 1.0, vec![cfg(0, &[0.0, 0.0], 0.0, 0.0)]).unwrap();
        let tasks = vec![task_a(), c, task_b()];
        let bounds = ResourceVector::new(vec![1.0, 1.0]).unwrap();
        let part = Partition::new(vec![Block::pair(0, 2), Block::single(1)]);
        let p =
            build_problem(&part, &tasks, &bounds, &Environment::new(), &two_dim_rule()).unwrap();
        let ids: Vec<u64> = p.executables().iter().map(|t| t.id).collect();
        assert_eq!(ids, vec![5, pair_block_id(1, 2)]);

        let empty = build_problem(
            &Partition::new(vec![]),
            &[],
            &bounds,
            &Environment::new(),
            &two_dim_rule(),
        )
        .unwrap();
        assert!(empty.executables().is_empty());
        assert_eq!(allocate_greedy(&empty).unwrap().total_utility, 0.0);

        let bad = Partition::new(vec![Block::single(0)]);
        assert!(
            build_problem(&bad, &tasks, &bounds, &Environment::new(), &two_dim_rule()).is_err()
        );
    }
}
