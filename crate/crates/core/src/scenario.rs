//! Storyboard simulation.
//!
//! A scenario is a timeline of task requests over a fixed set of task
//! templates. Every epoch the active requests become an allocation problem,
//! solved either in standard mode (every task on its own) or in
//! multioperation mode (combination-tree search). Emission control windows
//! force every emitting task to its null configuration. A simple track-error
//! proxy grows while a target is not illuminated and shrinks with the
//! quality the tracking task receives.
//!
//! Monte Carlo randomisation (request start jitter, multiplicative utility
//! noise) is drawn from the run seed only, so both modes see the same world
//! for a given seed.

use std::collections::HashMap;
use std::io::Write;

use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocator::allocate_greedy;
use crate::compat::{CompatibilityMatrix, Partition};
use crate::composite::SplitApertureRule;
use crate::error::{Error, Result};
use crate::io::{build_common, from_json, CompositionSpec, ResourcesSpec, TaskSpec};
pub use crate::mcts::TaskOutcome;
use crate::mcts::{Exploitation, LeafEvaluator, MctsParams, Search, SearchBudget, DEFAULT_CP};
use crate::model::{Environment, Problem, ResourceVector, Task, TaskType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Standard,
    Multioperation,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Standard => "standard",
            Mode::Multioperation => "multioperation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestEvent {
    pub task_id: u64,
    pub start_s: f64,
    /// Open-ended when absent.
    #[serde(default)]
    pub end_s: Option<f64>,
    /// Recurring requests (surveillance, tracking, data link) are not
    /// jittered between Monte Carlo runs.
    #[serde(default)]
    pub recurring: bool,
}

impl RequestEvent {
    /// Half-open window `[start, end)`.
    pub fn covers(&self, t_s: f64) -> bool {
        self.start_s <= t_s && self.end_s.is_none_or(|e| t_s < e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    /// Tracking task serving this target.
    pub task_id: u64,
    #[serde(default = "default_initial_error")]
    pub initial_error_m: f64,
    /// Multiplier on the growth rate for this target.
    #[serde(default = "one")]
    pub growth_scale: f64,
}

fn default_initial_error() -> f64 {
    100.0
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackingSpec {
    #[serde(default = "default_growth")]
    pub growth_rate_m_per_s: f64,
    #[serde(default = "default_floor")]
    pub floor_m: f64,
    #[serde(default)]
    pub targets: Vec<TargetSpec>,
}

fn default_growth() -> f64 {
    50.0
}

fn default_floor() -> f64 {
    10.0
}

impl Default for TrackingSpec {
    fn default() -> Self {
        Self {
            growth_rate_m_per_s: default_growth(),
            floor_m: default_floor(),
            targets: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomizationSpec {
    /// Non-recurring request windows shift by up to this many seconds.
    #[serde(default)]
    pub start_jitter_s: f64,
    /// Per-task utility factor drawn from `1 ± utility_noise`.
    #[serde(default)]
    pub utility_noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpec {
    #[serde(default = "default_iterations")]
    pub iterations: u64,
    #[serde(default = "default_cp")]
    pub cp: f64,
    #[serde(default)]
    pub exploitation: Exploitation,
}

fn default_iterations() -> u64 {
    200
}

fn default_cp() -> f64 {
    DEFAULT_CP
}

impl Default for SearchSpec {
    fn default() -> Self {
        Self {
            iterations: default_iterations(),
            cp: default_cp(),
            exploitation: Exploitation::Mean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvUpdate {
    pub t_s: f64,
    pub values: Environment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: String,
    pub duration_s: f64,
    #[serde(default = "one")]
    pub epoch_s: f64,
    pub resources: ResourcesSpec,
    #[serde(default)]
    pub environment: Environment,
    #[serde(default)]
    pub env_timeline: Vec<EnvUpdate>,
    pub tasks: Vec<TaskSpec>,
    #[serde(default)]
    pub compat: Option<Vec<Vec<i64>>>,
    #[serde(default)]
    pub composition: Option<CompositionSpec>,
    pub requests: Vec<RequestEvent>,
    #[serde(default)]
    pub emcon_windows: Vec<[f64; 2]>,
    #[serde(default)]
    pub tracking: TrackingSpec,
    #[serde(default)]
    pub randomization: RandomizationSpec,
    #[serde(default)]
    pub search: SearchSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub duration_s: f64,
    pub epoch_s: f64,
    pub resource_names: Vec<String>,
    pub bounds: ResourceVector,
    pub environment: Environment,
    pub env_timeline: Vec<EnvUpdate>,
    pub tasks: Vec<Task>,
    pub compat: CompatibilityMatrix,
    pub rule: SplitApertureRule,
    pub requests: Vec<RequestEvent>,
    pub emcon_windows: Vec<(f64, f64)>,
    pub tracking: TrackingSpec,
    pub randomization: RandomizationSpec,
    pub search: SearchSpec,
}

pub fn load_scenario(text: &str) -> Result<Scenario> {
    from_json::<ScenarioFile>(text)?.validate()
}

impl ScenarioFile {
    pub fn validate(self) -> Result<Scenario> {
        let mut v = Vec::new();
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            v.push(format!("duration_s: {} must be positive", self.duration_s));
        }
        if !(self.epoch_s.is_finite() && self.epoch_s > 0.0) {
            v.push(format!("epoch_s: {} must be positive", self.epoch_s));
        }
        for (i, [s, e]) in self.emcon_windows.iter().enumerate() {
            if !(0.0 <= *s && s <= e && *e <= self.duration_s) {
                v.push(format!(
                    "emcon_windows[{i}]: [{s}, {e}] not an interval within [0, {}]",
                    self.duration_s
                ));
            }
        }
        let known = |id: u64| self.tasks.iter().any(|t| t.id == id);
        for (i, r) in self.requests.iter().enumerate() {
            if !known(r.task_id) {
                v.push(format!("requests[{i}].task_id: unknown task {}", r.task_id));
            }
            if let Some(e) = r.end_s {
                if !(r.start_s < e) {
                    v.push(format!(
                        "requests[{i}]: start_s {} not before end_s {e}",
                        r.start_s
                    ));
                }
            }
        }
        for (i, t) in self.tracking.targets.iter().enumerate() {
            if !known(t.task_id) {
                v.push(format!(
                    "tracking.targets[{i}].task_id: unknown task {}",
                    t.task_id
                ));
            }
            if !(t.initial_error_m >= self.tracking.floor_m) {
                v.push(format!(
                    "tracking.targets[{i}].initial_error_m: below floor"
                ));
            }
            if !(t.growth_scale > 0.0) {
                v.push(format!(
                    "tracking.targets[{i}].growth_scale: must be positive"
                ));
            }
        }
        if !(self.tracking.growth_rate_m_per_s >= 0.0) {
            v.push("tracking.growth_rate_m_per_s: must be non-negative".into());
        }
        if !(self.tracking.floor_m >= 0.0) {
            v.push("tracking.floor_m: must be non-negative".into());
        }
        if !(self.randomization.start_jitter_s >= 0.0) {
            v.push("randomization.start_jitter_s: must be non-negative".into());
        }
        if !(0.0..1.0).contains(&self.randomization.utility_noise) {
            v.push("randomization.utility_noise: must be in [0, 1)".into());
        }
        if !(self.search.cp >= 0.0) {
            v.push("search.cp: must be non-negative".into());
        }
        if !v.is_empty() {
            return Err(Error::InvalidScenario(v));
        }
        let (bounds, tasks, compat, rule) = build_common(
            &self.resources,
            &self.tasks,
            self.compat.as_deref(),
            self.composition.as_ref(),
        )?;
        Ok(Scenario {
            name: self.name,
            duration_s: self.duration_s,
            epoch_s: self.epoch_s,
            resource_names: self.resources.names,
            bounds,
            environment: self.environment,
            env_timeline: self.env_timeline,
            tasks,
            compat,
            rule,
            requests: self.requests,
            emcon_windows: self.emcon_windows.iter().map(|[s, e]| (*s, *e)).collect(),
            tracking: self.tracking,
            randomization: self.randomization,
            search: self.search,
        })
    }
}

impl Scenario {
    pub fn epoch_times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..)
            .map(|k| k as f64 * self.epoch_s)
            .take_while(|t| *t < self.duration_s)
    }

    pub fn in_emcon(&self, t_s: f64) -> bool {
        self.emcon_windows
            .iter()
            .any(|(s, e)| *s <= t_s && t_s <= *e)
    }

    /// Base environment overlaid with every timeline update at or before `t_s`.
    pub fn environment_at(&self, t_s: f64) -> Environment {
        let mut env = self.environment.clone();
        for u in self.env_timeline.iter().filter(|u| u.t_s <= t_s) {
            env.extend(u.values.iter().map(|(k, v)| (k.clone(), *v)));
        }
        env
    }
}

/// Ids of tasks with a request covering `t_s`, in task order.
pub fn active_requests(sc: &Scenario, t_s: f64) -> Vec<u64> {
    active_indices(&sc.tasks, &sc.requests, t_s)
        .into_iter()
        .map(|i| sc.tasks[i].id)
        .collect()
}

fn active_indices(tasks: &[Task], requests: &[RequestEvent], t_s: f64) -> Vec<usize> {
    (0..tasks.len())
        .filter(|&i| {
            requests
                .iter()
                .any(|r| r.task_id == tasks[i].id && r.covers(t_s))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrackState {
    pub track_id: usize,
    pub error_m: f64,
    pub last_update_s: f64,
}

/// Advances one track by `dt_s`. Without illumination the error grows
/// linearly; otherwise it relaxes toward the floor in proportion to the
/// allocated quality.
pub fn track_error_update(
    tr: &TrackState,
    allocated_quality: f64,
    dt_s: f64,
    growth_m_per_s: f64,
    floor_m: f64,
) -> TrackState {
    let q = allocated_quality.clamp(0.0, 1.0);
    let error_m = if q == 0.0 {
        tr.error_m + growth_m_per_s * dt_s
    } else {
        (tr.error_m * (1.0 - q) + floor_m * q).max(floor_m)
    };
    TrackState {
        track_id: tr.track_id,
        error_m,
        last_update_s: tr.last_update_s + dt_s,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub t_s: f64,
    pub mode: Mode,
    pub total_utility: f64,
    pub track_error_mean_m: f64,
    pub track_error_q3_m: f64,
    /// Indexed like [`TaskType::ALL`].
    pub concurrency_share: [f64; 8],
    /// Any emitting task at a non-null configuration.
    pub emitting: bool,
    pub emcon: bool,
    pub tasks: Vec<TaskOutcome>,
}

impl EpochRecord {
    pub fn share(&self, t: TaskType) -> f64 {
        self.concurrency_share[TaskType::ALL.iter().position(|x| *x == t).unwrap()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsSeries {
    pub mode: Mode,
    pub seed: u64,
    pub epoch_s: f64,
    pub records: Vec<EpochRecord>,
}

impl MetricsSeries {
    /// Time-integrated utility: `sum(epoch utility) * epoch_s`.
    pub fn total_utility(&self) -> f64 {
        self.records.iter().map(|r| r.total_utility).sum::<f64>() * self.epoch_s
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![
            "t_s".to_string(),
            "mode".into(),
            "total_utility".into(),
            "track_error_mean_m".into(),
            "track_error_q3_m".into(),
        ];
        header.extend(TaskType::ALL.iter().map(|t| format!("share_{t}")));
        header.push("emitting".into());
        w.write_record(&header).map_err(csv_err)?;
        for r in &self.records {
            let mut row = vec![
                r.t_s.to_string(),
                r.mode.as_str().to_string(),
                r.total_utility.to_string(),
                r.track_error_mean_m.to_string(),
                r.track_error_q3_m.to_string(),
            ];
            row.extend(r.concurrency_share.iter().map(f64::to_string));
            row.push(r.emitting.to_string());
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()
            .map_err(|e| Error::InvalidProblem(format!("writing CSV: {e}")))?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidProblem(format!("writing CSV: {e}"))
}

/// Linear-interpolation quantile of `values` (sorted copy taken).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Per-run world: jittered requests and noisy task tables.
struct RunWorld {
    requests: Vec<RequestEvent>,
    tasks: Vec<Task>,
}

fn draw_world(sc: &Scenario, seed: u64) -> RunWorld {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = sc.randomization.start_jitter_s;
    let requests = sc
        .requests
        .iter()
        .map(|r| {
            let mut r = r.clone();
            if !r.recurring && jitter > 0.0 {
                let shift = rng.gen_range(-jitter..=jitter).max(-r.start_s);
                r.start_s += shift;
                r.end_s = r.end_s.map(|e| e + shift);
            }
            r
        })
        .collect();
    let noise = sc.randomization.utility_noise;
    let tasks = sc
        .tasks
        .iter()
        .map(|t| {
            let mut t = t.clone();
            if noise > 0.0 {
                let factor = 1.0 + rng.gen_range(-noise..=noise);
                t.configs.iter_mut().for_each(|c| c.utility *= factor);
            }
            t
        })
        .collect();
    RunWorld { requests, tasks }
}

/// Cached decision for one (active set, EMCON) situation.
#[derive(Clone)]
struct Decision {
    utility: f64,
    tasks: Vec<TaskOutcome>,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn situation_seed(seed: u64, active: &[usize], emcon: bool) -> u64 {
    let mut h = splitmix(seed ^ emcon as u64);
    for &i in active {
        h = splitmix(h ^ i as u64);
    }
    h
}

fn decide(
    sc: &Scenario,
    world: &RunWorld,
    mode: Mode,
    active: &[usize],
    emcon: bool,
    env: &Environment,
    seed: u64,
) -> Result<Decision> {
    let tasks: Vec<Task> = active
        .iter()
        .map(|&i| {
            let t = &world.tasks[i];
            if emcon && t.task_type.is_emitting() {
                t.null_only()
            } else {
                t.clone()
            }
        })
        .collect();
    match mode {
        Mode::Standard => {
            let ev = LeafEvaluator::new(
                &CompatibilityMatrix::identity(tasks.len()),
                &tasks,
                &sc.bounds,
                &sc.rule,
            )?;
            let problem = Problem::new(tasks.clone(), sc.bounds.clone(), env.clone())?;
            let alloc = allocate_greedy(&problem)?;
            let part = Partition::singletons(tasks.len());
            Ok(Decision {
                utility: alloc.total_utility,
                tasks: ev.outcomes(&part, &alloc),
            })
        }
        Mode::Multioperation => {
            let compat = sc.compat.restrict(active);
            let ev = LeafEvaluator::new(&compat, &tasks, &sc.bounds, &sc.rule)?;
            let params = MctsParams {
                cp: sc.search.cp,
                exploitation: sc.search.exploitation,
            };
            let result = Search::new(&ev, params, situation_seed(seed, active, emcon))?
                .run(SearchBudget::iterations(sc.search.iterations))?;
            Ok(Decision {
                utility: result.best_utility,
                tasks: ev.outcomes(&result.best_partition, &result.best_allocation),
            })
        }
    }
}

/// One Monte Carlo run of the scenario. Deterministic in `seed`.
pub fn run(sc: &Scenario, mode: Mode, seed: u64) -> Result<MetricsSeries> {
    let world = draw_world(sc, seed);
    let tr = &sc.tracking;
    let mut tracks: Vec<TrackState> = tr
        .targets
        .iter()
        .enumerate()
        .map(|(i, t)| TrackState {
            track_id: i,
            error_m: t.initial_error_m,
            last_update_s: 0.0,
        })
        .collect();
    let mut cache: HashMap<(Vec<usize>, bool), Decision> = HashMap::new();
    let mut records = Vec::new();

    for t_s in sc.epoch_times() {
        let active = active_indices(&world.tasks, &world.requests, t_s);
        let emcon = sc.in_emcon(t_s);
        let key = (active, emcon);
        let decision = match cache.get(&key) {
            Some(d) => d.clone(),
            None => {
                let env = sc.environment_at(t_s);
                let d = decide(sc, &world, mode, &key.0, emcon, &env, seed)?;
                debug!(
                    "t={t_s} {} active={:?} emcon={emcon} utility={}",
                    mode.as_str(),
                    key.0,
                    d.utility
                );
                cache.insert(key, d.clone());
                d
            }
        };

        for (track, target) in tracks.iter_mut().zip(&tr.targets) {
            let q = decision
                .tasks
                .iter()
                .find(|o| o.task_id == target.task_id && !o.is_null)
                .map_or(0.0, |o| o.quality);
            *track = track_error_update(
                track,
                q,
                sc.epoch_s,
                tr.growth_rate_m_per_s * target.growth_scale,
                tr.floor_m,
            );
        }
        let errors: Vec<f64> = tracks.iter().map(|t| t.error_m).collect();
        let mean = if errors.is_empty() {
            0.0
        } else {
            errors.iter().sum::<f64>() / errors.len() as f64
        };

        let mut share = [0.0; 8];
        for (k, ty) in TaskType::ALL.iter().enumerate() {
            let of_type: Vec<&TaskOutcome> = decision
                .tasks
                .iter()
                .filter(|o| o.task_type == *ty)
                .collect();
            if !of_type.is_empty() {
                share[k] = of_type.iter().filter(|o| o.is_concurrent()).count() as f64
                    / of_type.len() as f64;
            }
        }

        records.push(EpochRecord {
            t_s,
            mode,
            total_utility: decision.utility,
            track_error_mean_m: mean,
            track_error_q3_m: quantile(&errors, 0.75),
            concurrency_share: share,
            emitting: decision
                .tasks
                .iter()
                .any(|o| o.task_type.is_emitting() && !o.is_null),
            emcon,
            tasks: decision.tasks,
        });
    }

    Ok(MetricsSeries {
        mode,
        seed,
        epoch_s: sc.epoch_s,
        records,
    })
}

/// The five statistics reported per mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            median: quantile(values, 0.5),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean,
            std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunTotals {
    pub seed: u64,
    pub standard: f64,
    pub multioperation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonSummary {
    pub scenario: String,
    pub runs: usize,
    pub base_seed: u64,
    pub standard: Summary,
    pub multioperation: Summary,
    pub per_run: Vec<RunTotals>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRun {
    pub seed: u64,
    pub standard: MetricsSeries,
    pub multioperation: MetricsSeries,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub summary: ComparisonSummary,
    pub runs: Vec<ComparisonRun>,
}

/// `n_runs` seeded runs of both modes (seeds `base_seed + i`), executed in
/// parallel and reported in run order.
pub fn compare(sc: &Scenario, n_runs: usize, base_seed: u64) -> Result<Comparison> {
    if n_runs == 0 {
        return Err(Error::InvalidScenario(vec![
            "runs: must be at least 1".into()
        ]));
    }
    let runs = (0..n_runs as u64)
        .into_par_iter()
        .map(|i| {
            let seed = base_seed.wrapping_add(i);
            Ok(ComparisonRun {
                seed,
                standard: run(sc, Mode::Standard, seed)?,
                multioperation: run(sc, Mode::Multioperation, seed)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let per_run: Vec<RunTotals> = runs
        .iter()
        .map(|r| RunTotals {
            seed: r.seed,
            standard: r.standard.total_utility(),
            multioperation: r.multioperation.total_utility(),
        })
        .collect();
    let std_totals: Vec<f64> = per_run.iter().map(|r| r.standard).collect();
    let multi_totals: Vec<f64> = per_run.iter().map(|r| r.multioperation).collect();
    Ok(Comparison {
        summary: ComparisonSummary {
            scenario: sc.name.clone(),
            runs: n_runs,
            base_seed,
            standard: Summary::of(&std_totals),
            multioperation: Summary::of(&multi_totals),
            per_run,
        },
        runs,
    })
}

/// The bundled storyboard.
pub const CROWN_LIKE: &str = include_str!("../data/crown_like.json");

#[cfg(test)]
mod tests {
    use super::*;

    fn tr(e: f64) -> TrackState {
        TrackState {
            track_id: 0,
            error_m: e,
            last_update_s: 0.0,
        }
    }

    #[test]
    fn track_error_examples() {
        let mut t = tr(100.0);
        for _ in 0..70 {
            t = track_error_update(&t, 0.0, 1.0, 50.0, 10.0);
        }
        assert_eq!(t.error_m, 3600.0);
        assert_eq!(t.last_update_s, 70.0);
        assert_eq!(
            track_error_update(&tr(5000.0), 1.0, 1.0, 50.0, 10.0).error_m,
            10.0
        );
        assert_eq!(
            track_error_update(&tr(200.0), 0.5, 1.0, 50.0, 10.0).error_m,
            105.0
        );
    }

    #[test]
    fn higher_quality_lower_error() {
        let lo = track_error_update(&tr(800.0), 0.2, 1.0, 50.0, 10.0).error_m;
        let hi = track_error_update(&tr(800.0), 0.7, 1.0, 50.0, 10.0).error_m;
        assert!(hi < lo);
        assert!(track_error_update(&tr(10.0), 0.3, 1.0, 50.0, 10.0).error_m >= 10.0);
    }

    #[test]
    fn quantiles() {
        assert_eq!(quantile(&[], 0.75), 0.0);
        assert_eq!(quantile(&[4.0], 0.75), 4.0);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.75), 3.25);
        assert_eq!(quantile(&[3.0, 1.0, 2.0], 0.5), 2.0);
    }

    #[test]
    fn summary_of_one_run() {
        let s = Summary::of(&[42.0]);
        assert_eq!(
            (s.median, s.min, s.max, s.mean, s.std),
            (42.0, 42.0, 42.0, 42.0, 0.0)
        );
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.median, 2.5);
        assert!((s.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn request_windows_are_half_open() {
        let r = RequestEvent {
            task_id: 0,
            start_s: 60.0,
            end_s: Some(130.0),
            recurring: false,
        };
        assert!(!r.covers(59.0));
        assert!(r.covers(60.0));
        assert!(r.covers(129.0));
        assert!(!r.covers(130.0));
    }
}
