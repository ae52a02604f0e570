//! Problem data: tasks, their configuration tables, resource vectors and
//! the allocation produced for a set of executables.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack used when checking `used <= bound` on floating point sums.
pub const FEASIBILITY_RTOL: f64 = 1e-9;

/// Non-negative resource amounts, one entry per resource dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResourceVector(Vec<f64>);

impl ResourceVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidProblem(format!(
                "resource amount {v} is negative or not finite"
            )));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|v| *v == 0.0)
    }

    /// Componentwise `self <= bounds`, with a relative slack of [`FEASIBILITY_RTOL`].
    pub fn fits_within(&self, bounds: &ResourceVector) -> bool {
        self.0
            .iter()
            .zip(&bounds.0)
            .all(|(u, b)| within_bound(*u, *b))
    }

    pub(crate) fn add_assign(&mut self, other: &ResourceVector) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }

    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        Self(values)
    }
}

impl Index<usize> for ResourceVector {
    type Output = f64;

    fn index(&self, index: usize) -> &f64 {
        &self.0[index]
    }
}

pub(crate) fn within_bound(used: f64, bound: f64) -> bool {
    used <= bound + FEASIBILITY_RTOL * bound.abs()
}

/// One discrete operating point of a task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigurationPoint {
    pub id: usize,
    pub resources: ResourceVector,
    #[serde(default)]
    pub quality: f64,
    pub utility: f64,
}

impl ConfigurationPoint {
    pub fn is_null(&self) -> bool {
        self.resources.is_zero()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskType {
    Search,
    Track,
    Sar,
    Gmti,
    Comm,
    Ew,
    Hrrp,
    Other,
}

impl TaskType {
    pub const ALL: [TaskType; 8] = [
        TaskType::Search,
        TaskType::Track,
        TaskType::Sar,
        TaskType::Gmti,
        TaskType::Comm,
        TaskType::Ew,
        TaskType::Hrrp,
        TaskType::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskType::Search => "search",
            TaskType::Track => "track",
            TaskType::Sar => "sar",
            TaskType::Gmti => "gmti",
            TaskType::Comm => "comm",
            TaskType::Ew => "ew",
            TaskType::Hrrp => "hrrp",
            TaskType::Other => "other",
        }
    }

    /// Whether tasks of this type transmit RF energy. Passive electronic
    /// support (`ew`) is the only receive-only type.
    pub fn is_emitting(self) -> bool {
        !matches!(self, TaskType::Ew)
    }
}

impl fmt::Display for TaskType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where a configuration of a composed block came from.
#[derive(Debug, Clone, PartialEq)]
pub struct PairChoice {
    /// Index into the first member's configuration table.
    pub first: usize,
    /// Index into the second member's configuration table.
    pub second: usize,
    /// Aperture share given to the first member.
    pub fraction: f64,
    /// Member qualities after the sub-aperture penalty.
    pub first_quality: f64,
    pub second_quality: f64,
    /// Weighted member utilities after the penalty; they sum to the block
    /// configuration's utility.
    pub first_utility: f64,
    pub second_utility: f64,
}

/// Provenance of a composed two-task block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockOrigin {
    pub members: [u64; 2],
    /// One entry per block configuration; `None` for the null configuration.
    pub choices: Vec<Option<PairChoice>>,
}

/// A schedulable executable: either a single task or a composed pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: u64,
    pub task_type: TaskType,
    pub weight: f64,
    pub configs: Vec<ConfigurationPoint>,
    pub origin: Option<BlockOrigin>,
}

impl Task {
    /// Builds a task and checks its table: non-empty, unique config ids,
    /// non-negative utilities, one shared dimensionality and exactly one
    /// all-zero (null) configuration.
    pub fn new(
        id: u64,
        task_type: TaskType,
        weight: f64,
        configs: Vec<ConfigurationPoint>,
    ) -> Result<Self> {
        let task = Self {
            id,
            task_type,
            weight,
            configs,
            origin: None,
        };
        task.validate()?;
        Ok(task)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Error::InvalidTask {
            task_id: self.id,
            reason,
        };
        if !(self.weight.is_finite() && self.weight > 0.0) {
            return Err(fail(format!("weight {} must be positive", self.weight)));
        }
        let Some(first) = self.configs.first() else {
            return Err(Error::EmptyConfigurationTable);
        };
        let dim = first.resources.dim();
        let mut ids = std::collections::BTreeSet::new();
        let mut nulls = 0;
        for c in &self.configs {
            if !ids.insert(c.id) {
                return Err(fail(format!("duplicate config id {}", c.id)));
            }
            if c.resources.dim() != dim {
                return Err(fail(format!(
                    "config {} has {} resource dimensions, expected {dim}",
                    c.id,
                    c.resources.dim()
                )));
            }
            if !(c.utility.is_finite() && c.utility >= 0.0) {
                return Err(fail(format!("config {} has negative utility", c.id)));
            }
            if c.is_null() {
                nulls += 1;
            }
        }
        match nulls {
            0 => Err(Error::NoNullConfiguration),
            1 => Ok(()),
            _ => Err(fail("more than one zero-resource configuration".into())),
        }
    }

    pub fn dim(&self) -> usize {
        self.configs.first().map_or(0, |c| c.resources.dim())
    }

    pub fn null_index(&self) -> Option<usize> {
        self.configs.iter().position(ConfigurationPoint::is_null)
    }

    pub fn null_config(&self) -> Option<&ConfigurationPoint> {
        self.configs.iter().find(|c| c.is_null())
    }

    /// Copy of this task with only the null configuration left.
    pub fn null_only(&self) -> Task {
        let mut t = self.clone();
        t.configs.retain(ConfigurationPoint::is_null);
        if let Some(origin) = t.origin.as_mut() {
            origin.choices.retain(Option::is_none);
        }
        t
    }

    pub fn weighted_utility(&self, index: usize) -> f64 {
        self.weight * self.configs[index].utility
    }
}

/// Environmental condition values. Carried alongside a problem; the
/// allocator only ever sees their effect through the configuration tables.
pub type Environment = BTreeMap<String, f64>;

/// A Q-RAM instance over a fixed set of executables.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    executables: Vec<Task>,
    bounds: ResourceVector,
    environment: Environment,
}

impl Problem {
    /// Executables are kept sorted by id; ids must be unique.
    pub fn new(
        mut executables: Vec<Task>,
        bounds: ResourceVector,
        environment: Environment,
    ) -> Result<Self> {
        for t in &executables {
            if t.configs.is_empty() {
                return Err(Error::EmptyConfigurationTable);
            }
            if t.dim() != bounds.dim() {
                return Err(Error::DimensionMismatch {
                    expected: bounds.dim(),
                    got: t.dim(),
                });
            }
        }
        executables.sort_by_key(|t| t.id);
        if let Some(w) = executables.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::InvalidProblem(format!(
                "duplicate executable id {}",
                w[0].id
            )));
        }
        Ok(Self {
            executables,
            bounds,
            environment,
        })
    }

    pub fn executables(&self) -> &[Task] {
        &self.executables
    }

    pub fn bounds(&self) -> &ResourceVector {
        &self.bounds
    }

    pub fn environment(&self) -> &Environment {
        &self.environment
    }

    /// Utility when every executable sits at its null configuration.
    pub fn null_utility(&self) -> f64 {
        self.executables
            .iter()
            .map(|t| t.null_config().map_or(0.0, |c| t.weight * c.utility))
            .sum()
    }
}

/// One configuration per executable, with aggregate usage and utility.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Allocation {
    /// executable id -> config id
    pub choices: BTreeMap<u64, usize>,
    pub total_utility: f64,
    pub used: ResourceVector,
}

impl Allocation {
    /// Assembles an allocation from per-executable config indices.
    pub(crate) fn from_indices(execs: &[&Task], dim: usize, indices: &[usize]) -> Self {
        let mut used = ResourceVector::zeros(dim);
        let mut total_utility = 0.0;
        let mut choices = BTreeMap::new();
        for (t, &ix) in execs.iter().zip(indices) {
            let c = &t.configs[ix];
            used.add_assign(&c.resources);
            total_utility += t.weight * c.utility;
            choices.insert(t.id, c.id);
        }
        Self {
            choices,
            total_utility,
            used,
        }
    }
}
