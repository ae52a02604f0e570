//! JSON problem files.
//!
//! ```json
//! {
//!   "resources": { "names": ["time", "aperture", "power"], "bounds": [1.0, 1.0, 1.0] },
//!   "environment": { "threat_level": 0.4 },
//!   "tasks": [
//!     { "id": 0, "type": "track", "weight": 1.5,
//!       "configs": [ { "id": 0, "resources": [0, 0, 0], "quality": 0, "utility": 0 },
//!                    { "id": 1, "resources": [0.1, 0.1, 0.05], "quality": 0.8, "utility": 5 } ] }
//!   ],
//!   "compat": [[1]],
//!   "composition": { "split_fractions": [0.25, 0.5, 0.75],
//!                    "gamma_by_type": { "sar": 0.1 }, "default_gamma": 1.0,
//!                    "dim_modes": ["max", "share", "add"] }
//! }
//! ```
//!
//! `environment`, `compat` (identity) and `composition` are optional. Without
//! `dim_modes`, a dimension named `aperture` is shared and all others add.

use std::collections::{BTreeMap, BTreeSet};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::compat::CompatibilityMatrix;
use crate::composite::{DimMode, SplitApertureRule, MAX_TASK_ID};
use crate::error::{Error, Result};
use crate::model::{ConfigurationPoint, Environment, Problem, ResourceVector, Task, TaskType};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourcesSpec {
    pub names: Vec<String>,
    pub bounds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub id: u64,
    #[serde(rename = "type")]
    pub task_type: TaskType,
    pub weight: f64,
    pub configs: Vec<ConfigurationPoint>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompositionSpec {
    #[serde(default)]
    pub split_fractions: Option<Vec<f64>>,
    #[serde(default)]
    pub gamma_by_type: BTreeMap<TaskType, f64>,
    #[serde(default)]
    pub default_gamma: Option<f64>,
    #[serde(default)]
    pub dim_modes: Option<Vec<DimMode>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub resources: ResourcesSpec,
    #[serde(default)]
    pub environment: Environment,
    pub tasks: Vec<TaskSpec>,
    #[serde(default)]
    pub compat: Option<Vec<Vec<i64>>>,
    #[serde(default)]
    pub composition: Option<CompositionSpec>,
}

/// A validated problem file.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedProblem {
    pub resource_names: Vec<String>,
    pub bounds: ResourceVector,
    pub environment: Environment,
    pub tasks: Vec<Task>,
    pub compat: CompatibilityMatrix,
    pub rule: SplitApertureRule,
}

impl LoadedProblem {
    /// The non-concurrent problem over the file's tasks.
    pub fn problem(&self) -> Result<Problem> {
        Problem::new(
            self.tasks.clone(),
            self.bounds.clone(),
            self.environment.clone(),
        )
    }
}

/// Deserializes JSON, reporting the path of the first offending field.
pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Schema {
            path,
            message: e.into_inner().to_string(),
        }
    })
}

pub fn parse_problem(text: &str) -> Result<LoadedProblem> {
    from_json::<ProblemFile>(text)?.validate()
}

impl ProblemFile {
    pub fn validate(self) -> Result<LoadedProblem> {
        let (bounds, tasks, compat, rule) = build_common(
            &self.resources,
            &self.tasks,
            self.compat.as_deref(),
            self.composition.as_ref(),
        )?;
        Ok(LoadedProblem {
            resource_names: self.resources.names,
            bounds,
            environment: self.environment,
            tasks,
            compat,
            rule,
        })
    }
}

pub(crate) fn build_common(
    resources: &ResourcesSpec,
    task_specs: &[TaskSpec],
    compat: Option<&[Vec<i64>]>,
    composition: Option<&CompositionSpec>,
) -> Result<(
    ResourceVector,
    Vec<Task>,
    CompatibilityMatrix,
    SplitApertureRule,
)> {
    let k = resources.names.len();
    if resources.bounds.len() != k {
        return Err(schema(
            "resources.bounds",
            format!("{} bounds for {k} resource names", resources.bounds.len()),
        ));
    }
    if resources
        .bounds
        .iter()
        .any(|b| !(b.is_finite() && *b > 0.0))
    {
        return Err(Error::NonPositiveBound);
    }
    let bounds = ResourceVector::new(resources.bounds.clone())?;

    let mut ids = BTreeSet::new();
    let mut tasks = Vec::with_capacity(task_specs.len());
    for (i, spec) in task_specs.iter().enumerate() {
        if spec.id > MAX_TASK_ID {
            return Err(schema(
                format!("tasks[{i}].id"),
                "task id must fit in 32 bits",
            ));
        }
        if !ids.insert(spec.id) {
            return Err(schema(
                format!("tasks[{i}].id"),
                format!("duplicate task id {}", spec.id),
            ));
        }
        for (c, cfg) in spec.configs.iter().enumerate() {
            if cfg.resources.dim() != k {
                return Err(schema(
                    format!("tasks[{i}].configs[{c}].resources"),
                    format!("expected {k} values, got {}", cfg.resources.dim()),
                ));
            }
            if cfg
                .resources
                .values()
                .iter()
                .any(|v| !(v.is_finite() && *v >= 0.0))
            {
                return Err(schema(
                    format!("tasks[{i}].configs[{c}].resources"),
                    "resource amounts must be non-negative",
                ));
            }
        }
        tasks.push(Task::new(
            spec.id,
            spec.task_type,
            spec.weight,
            spec.configs.clone(),
        )?);
    }

    let compat = match compat {
        None => CompatibilityMatrix::identity(tasks.len()),
        Some(rows) => {
            let m = CompatibilityMatrix::from_rows(rows)?;
            if m.n() != tasks.len() {
                return Err(schema(
                    "compat",
                    format!("{}x{} matrix for {} tasks", m.n(), m.n(), tasks.len()),
                ));
            }
            m
        }
    };

    let spec = composition.cloned().unwrap_or_default();
    let mut rule = match spec.dim_modes {
        Some(modes) => SplitApertureRule::new(modes),
        None => SplitApertureRule::for_dimensions(&resources.names),
    };
    if rule.dim_modes.len() != k {
        return Err(schema(
            "composition.dim_modes",
            format!("{} modes for {k} resource dimensions", rule.dim_modes.len()),
        ));
    }
    if let Some(f) = spec.split_fractions {
        rule.split_fractions = f;
    }
    if let Some(g) = spec.default_gamma {
        rule.default_gamma = g;
    }
    rule.gamma_by_type = spec.gamma_by_type;
    rule.validate()?;
    Ok((bounds, tasks, compat, rule))
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.into(),
        message: message.into(),
    }
}
