//! Q-RAM allocation for a fixed set of executables.
//!
//! The greedy allocator walks each executable's concave majorant in
//! compound-cost space, always taking the upgrade with the best marginal
//! utility per unit cost that still fits the vector bounds, followed by a
//! pairwise-exchange polish. The exact allocator enumerates every choice
//! vector and exists to check the greedy one on small instances.

use crate::error::{Error, Result};
use crate::model::{Allocation, Problem, ResourceVector, Task};

/// Default cap on the number of choice vectors the exact oracle will visit.
pub const EXACT_ORACLE_CAP: usize = 1_000_000;

/// Relative tolerance under which two marginal utilities count as tied.
const TIE_RTOL: f64 = 1e-12;

fn strictly_greater(a: f64, b: f64) -> bool {
    a > b + TIE_RTOL * a.abs().max(b.abs())
}

/// Indices of the points on the upper-left concave frontier of
/// `(cost, utility)` pairs, by ascending cost.
///
/// The first index is a minimum-cost point (highest utility among those).
/// Each following point is the one reachable with the steepest positive
/// slope; collinear points are all kept.
pub fn concave_majorant(points: &[(f64, f64)]) -> Result<Vec<usize>> {
    if points.is_empty() {
        return Err(Error::EmptyConfigurationTable);
    }
    let mut cur = 0;
    for (i, &(c, u)) in points.iter().enumerate().skip(1) {
        let (bc, bu) = points[cur];
        if c < bc || (c == bc && u > bu) {
            cur = i;
        }
    }
    let mut hull = vec![cur];
    loop {
        let (cc, cu) = points[cur];
        let mut next: Option<(usize, f64)> = None;
        for (j, &(c, u)) in points.iter().enumerate() {
            if c <= cc || u <= cu {
                continue;
            }
            let slope = (u - cu) / (c - cc);
            let take = match next {
                None => true,
                Some((k, best)) => {
                    strictly_greater(slope, best)
                        || (!strictly_greater(best, slope) && c < points[k].0)
                }
            };
            if take {
                next = Some((j, slope));
            }
        }
        match next {
            Some((j, _)) => {
                hull.push(j);
                cur = j;
            }
            None => return Ok(hull),
        }
    }
}

/// Load-normalised L1 cost: `sum_j r_j / R_j`.
pub fn compound_cost(r: &ResourceVector, bounds: &ResourceVector) -> Result<f64> {
    if r.dim() != bounds.dim() {
        return Err(Error::DimensionMismatch {
            expected: bounds.dim(),
            got: r.dim(),
        });
    }
    check_bounds(bounds)?;
    Ok(r.values()
        .iter()
        .zip(bounds.values())
        .map(|(x, b)| x / b)
        .sum())
}

fn check_bounds(bounds: &ResourceVector) -> Result<()> {
    if bounds.values().iter().any(|b| !(*b > 0.0)) {
        return Err(Error::NonPositiveBound);
    }
    Ok(())
}

pub fn allocate_greedy(p: &Problem) -> Result<Allocation> {
    let execs: Vec<&Task> = p.executables().iter().collect();
    let choice = greedy_indices(&execs, p.bounds())?;
    Ok(Allocation::from_indices(&execs, p.bounds().dim(), &choice))
}

/// Greedy marginal-utility allocation; returns one config index per executable.
///
/// Each round, every executable proposes the first step of the concave
/// majorant (in compound cost) of its configurations that are still feasible
/// given everyone else's current usage. A step that raises utility without
/// raising cost ranks ahead of any priced step. The best proposal is applied
/// and the round repeats until nobody can improve.
///
/// The climb runs from the all-null vector and from one seed per executable
/// (that executable alone at its best configuration that fits). Each result
/// is polished by pairwise exchange and the best one is returned; the
/// all-null start wins ties.
pub(crate) fn greedy_indices(execs: &[&Task], bounds: &ResourceVector) -> Result<Vec<usize>> {
    check_bounds(bounds)?;
    let mut costs = Vec::with_capacity(execs.len());
    let mut nulls = Vec::with_capacity(execs.len());
    for t in execs {
        if t.dim() != bounds.dim() {
            return Err(Error::DimensionMismatch {
                expected: bounds.dim(),
                got: t.dim(),
            });
        }
        nulls.push(t.null_index().ok_or(Error::NoNullConfiguration)?);
        costs.push(
            t.configs
                .iter()
                .map(|c| compound_cost(&c.resources, bounds))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    let utility = |choice: &[usize]| -> f64 {
        execs
            .iter()
            .zip(choice)
            .map(|(t, &k)| t.weighted_utility(k))
            .sum()
    };

    // all-null, then each executable alone at its best standalone config
    let mut starts = vec![nulls.clone()];
    for (i, t) in execs.iter().enumerate() {
        let top = (0..t.configs.len())
            .filter(|&k| k != nulls[i] && t.configs[k].resources.fits_within(bounds))
            .fold(None, |acc: Option<usize>, k| match acc {
                Some(b) if !strictly_greater(t.weighted_utility(k), t.weighted_utility(b)) => {
                    Some(b)
                }
                _ => Some(k),
            });
        if let Some(k) = top {
            let mut start = nulls.clone();
            start[i] = k;
            starts.push(start);
        }
    }

    let mut best: Option<(Vec<usize>, f64)> = None;
    for start in starts {
        let mut cand = climb(execs, bounds, &costs, start);
        exchange(execs, bounds, &mut cand);
        let u = utility(&cand);
        if best.as_ref().is_none_or(|(_, b)| strictly_greater(u, *b)) {
            best = Some((cand, u));
        }
    }
    Ok(best.map(|(c, _)| c).unwrap_or_default())
}

/// Pairwise exchange: re-pick the configurations of two executables at once
/// whenever that raises total utility, until no such move is left.
fn exchange(execs: &[&Task], bounds: &ResourceVector, current: &mut [usize]) {
    let dim = bounds.dim();
    let n = execs.len();
    loop {
        let mut used = vec![0.0; dim];
        for (t, &ix) in execs.iter().zip(current.iter()) {
            for (u, r) in used.iter_mut().zip(t.configs[ix].resources.values()) {
                *u += r;
            }
        }
        // (i, a, j, b, gain)
        let mut best: Option<(usize, usize, usize, usize, f64)> = None;
        for i in 0..n {
            let ti = execs[i];
            let ri = ti.configs[current[i]].resources.values();
            for j in i + 1..n {
                let tj = execs[j];
                let rj = tj.configs[current[j]].resources.values();
                let base = ti.weighted_utility(current[i]) + tj.weighted_utility(current[j]);
                let rest: Vec<f64> = (0..dim).map(|d| used[d] - ri[d] - rj[d]).collect();
                for (a, ca) in ti.configs.iter().enumerate() {
                    let ua = ti.weighted_utility(a);
                    let ra = ca.resources.values();
                    if !(0..dim).all(|d| crate::model::within_bound(rest[d] + ra[d], bounds[d])) {
                        continue;
                    }
                    for (b, cb) in tj.configs.iter().enumerate() {
                        let gain = ua + tj.weighted_utility(b) - base;
                        if !strictly_greater(gain, 0.0)
                            || best.as_ref().is_some_and(|m| !strictly_greater(gain, m.4))
                        {
                            continue;
                        }
                        let rb = cb.resources.values();
                        if (0..dim)
                            .all(|d| crate::model::within_bound(rest[d] + ra[d] + rb[d], bounds[d]))
                        {
                            best = Some((i, a, j, b, gain));
                        }
                    }
                }
            }
        }
        match best {
            Some((i, a, j, b, _)) => {
                current[i] = a;
                current[j] = b;
            }
            None => return,
        }
    }
}

fn climb(
    execs: &[&Task],
    bounds: &ResourceVector,
    costs: &[Vec<f64>],
    mut current: Vec<usize>,
) -> Vec<usize> {
    let dim = bounds.dim();
    let mut used = vec![0.0; dim];
    for (t, &ix) in execs.iter().zip(&current) {
        for (u, r) in used.iter_mut().zip(t.configs[ix].resources.values()) {
            *u += r;
        }
    }

    loop {
        // (exec, config, step)
        let mut best: Option<(usize, usize, Step)> = None;
        for (i, t) in execs.iter().enumerate() {
            let cur = current[i];
            let cur_u = t.weighted_utility(cur);
            let cur_r = t.configs[cur].resources.values();
            let mut local: Option<(usize, Step)> = None;
            for (k, c) in t.configs.iter().enumerate() {
                let gain = t.weighted_utility(k) - cur_u;
                if k == cur || gain <= 0.0 {
                    continue;
                }
                let r = c.resources.values();
                let fits = (0..dim)
                    .all(|j| crate::model::within_bound(used[j] - cur_r[j] + r[j], bounds[j]));
                if !fits {
                    continue;
                }
                let step = Step::new(gain, costs[i][k] - costs[i][cur]);
                if local.as_ref().is_none_or(|(_, s)| step.beats(s)) {
                    local = Some((k, step));
                }
            }
            if let Some((k, step)) = local {
                // equal marginals keep the lower executable
                if best.as_ref().is_none_or(|(_, _, s)| step.outranks(s)) {
                    best = Some((i, k, step));
                }
            }
        }
        let Some((i, k, _)) = best else { break };
        current[i] = k;
        used.iter_mut().for_each(|u| *u = 0.0);
        for (t, &ix) in execs.iter().zip(&current) {
            for (u, r) in used.iter_mut().zip(t.configs[ix].resources.values()) {
                *u += r;
            }
        }
    }
    current
}

/// A candidate upgrade, ordered by marginal utility per unit compound cost.
#[derive(Debug, Clone, Copy)]
enum Step {
    /// Utility gain at no extra cost; larger gain first.
    Free { gain: f64 },
    /// Gain per unit of extra cost; among equal slopes the cheaper step
    /// comes first, which keeps collinear majorant points.
    Priced { slope: f64, cost: f64 },
}

impl Step {
    fn new(gain: f64, extra_cost: f64) -> Self {
        if extra_cost <= 0.0 {
            Step::Free { gain }
        } else {
            Step::Priced {
                slope: gain / extra_cost,
                cost: extra_cost,
            }
        }
    }

    fn outranks(&self, other: &Step) -> bool {
        match (self, other) {
            (Step::Free { gain: a }, Step::Free { gain: b }) => strictly_greater(*a, *b),
            (Step::Free { .. }, Step::Priced { .. }) => true,
            (Step::Priced { .. }, Step::Free { .. }) => false,
            (Step::Priced { slope: a, .. }, Step::Priced { slope: b, .. }) => {
                strictly_greater(*a, *b)
            }
        }
    }

    fn beats(&self, other: &Step) -> bool {
        match (self, other) {
            (Step::Free { gain: a }, Step::Free { gain: b }) => strictly_greater(*a, *b),
            (Step::Free { .. }, Step::Priced { .. }) => true,
            (Step::Priced { .. }, Step::Free { .. }) => false,
            (Step::Priced { slope: a, cost: ca }, Step::Priced { slope: b, cost: cb }) => {
                strictly_greater(*a, *b) || (!strictly_greater(*b, *a) && ca < cb)
            }
        }
    }
}

pub fn allocate_exact(p: &Problem) -> Result<Allocation> {
    allocate_exact_with_cap(p, EXACT_ORACLE_CAP)
}

/// Exhaustive search over all choice vectors. Ties keep the first optimum in
/// lexicographic (executable id, config id) order.
pub fn allocate_exact_with_cap(p: &Problem, cap: usize) -> Result<Allocation> {
    let execs: Vec<&Task> = p.executables().iter().collect();
    let combinations: f64 = execs.iter().map(|t| t.configs.len() as f64).product();
    if combinations > cap as f64 {
        return Err(Error::OracleTooLarge { combinations, cap });
    }
    check_bounds(p.bounds())?;
    for t in &execs {
        if t.null_index().is_none() {
            return Err(Error::NoNullConfiguration);
        }
    }
    let dim = p.bounds().dim();
    let bounds = p.bounds().values();

    // Visit configs in id order so the first optimum found wins ties.
    let orders: Vec<Vec<usize>> = execs
        .iter()
        .map(|t| {
            let mut ix: Vec<usize> = (0..t.configs.len()).collect();
            ix.sort_by_key(|&i| t.configs[i].id);
            ix
        })
        .collect();

    let n = execs.len();
    let mut digits = vec![0usize; n];
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let mut used = vec![0.0; dim];
        let mut utility = 0.0;
        for (k, t) in execs.iter().enumerate() {
            let ix = orders[k][digits[k]];
            let c = &t.configs[ix];
            for (u, r) in used.iter_mut().zip(c.resources.values()) {
                *u += r;
            }
            utility += t.weight * c.utility;
        }
        let feasible = used
            .iter()
            .zip(bounds)
            .all(|(u, b)| crate::model::within_bound(*u, *b));
        if feasible && best.as_ref().is_none_or(|(b, _)| utility > *b) {
            let choice = (0..n).map(|k| orders[k][digits[k]]).collect();
            best = Some((utility, choice));
        }
        // odometer, last executable fastest
        let mut k = n;
        loop {
            if k == 0 {
                let (_, choice) = best.expect("all-null vector is always feasible");
                return Ok(Allocation::from_indices(&execs, dim, &choice));
            }
            k -= 1;
            digits[k] += 1;
            if digits[k] < orders[k].len() {
                break;
            }
            digits[k] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ConfigurationPoint, TaskType};

    fn rv(v: &[f64]) -> ResourceVector {
        ResourceVector::new(v.to_vec()).unwrap()
    }

    fn task(id: u64, weight: f64, table: &[(&[f64], f64)]) -> Task {
        let configs = table
            .iter()
            .enumerate()
            .map(|(i, (r, u))| ConfigurationPoint {
                id: i,
                resources: rv(r),
                quality: 0.0,
                utility: *u,
            })
            .collect();
        Task::new(id, TaskType::Other, weight, configs).unwrap()
    }

    #[test]
    fn majorant_examples() {
        assert_eq!(concave_majorant(&[(0.0, 0.0)]).unwrap(), vec![0]);
        assert_eq!(
            concave_majorant(&[(0.0, 0.0), (1.0, 5.0), (2.0, 8.0)]).unwrap(),
            vec![0, 1, 2]
        );
        assert_eq!(
            concave_majorant(&[(0.0, 0.0), (1.0, 1.0), (2.0, 6.0)]).unwrap(),
            vec![0, 2]
        );
        assert_eq!(concave_majorant(&[]), Err(Error::EmptyConfigurationTable));
    }

    #[test]
    fn majorant_skips_dominated_and_unsorted_points() {
        // (3,2) is dominated by (1,5); input order is shuffled
        let pts = [(2.0, 8.0), (3.0, 2.0), (0.0, 0.0), (1.0, 5.0)];
        assert_eq!(concave_majorant(&pts).unwrap(), vec![2, 3, 0]);
    }

    #[test]
    fn compound_cost_examples() {
        let c = |r: &[f64], b: &[f64]| compound_cost(&rv(r), &rv(b));
        assert_eq!(c(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(c(&[1.0, 1.0], &[1.0, 1.0]).unwrap(), 2.0);
        assert!((c(&[0.5, 0.25], &[1.0, 0.5]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(c(&[0.5, 0.25], &[1.0, 0.0]), Err(Error::NonPositiveBound));
    }

    #[test]
    fn nothing_fits_gives_all_null() {
        let eps = 1e-3;
        let p = Problem::new(
            vec![
                task(0, 1.0, &[(&[0.0, 0.0], 0.5), (&[0.01, 0.0], 3.0)]),
                task(1, 2.0, &[(&[0.0, 0.0], 0.25), (&[0.0, 0.5], 9.0)]),
            ],
            rv(&[eps, eps]),
            Default::default(),
        )
        .unwrap();
        let a = allocate_greedy(&p).unwrap();
        assert_eq!(a.choices.values().copied().collect::<Vec<_>>(), vec![0, 0]);
        assert_eq!(a.total_utility, 0.5 + 2.0 * 0.25);
        assert_eq!(a.total_utility, p.null_utility());
    }

    #[test]
    fn single_task_takes_unconstrained_maximum() {
        let p = Problem::new(
            vec![task(7, 1.0, &[(&[0.0], 0.0), (&[0.5], 10.0)])],
            rv(&[1.0]),
            Default::default(),
        )
        .unwrap();
        let a = allocate_greedy(&p).unwrap();
        assert_eq!(a.choices[&7], 1);
        assert_eq!(a.total_utility, 10.0);
        assert_eq!(a.used.values(), &[0.5]);
    }

    #[test]
    fn missing_null_is_rejected() {
        let t = Task {
            id: 0,
            task_type: TaskType::Other,
            weight: 1.0,
            configs: vec![ConfigurationPoint {
                id: 0,
                resources: rv(&[0.2]),
                quality: 0.0,
                utility: 1.0,
            }],
            origin: None,
        };
        let p = Problem::new(vec![t], rv(&[1.0]), Default::default()).unwrap();
        assert_eq!(allocate_greedy(&p), Err(Error::NoNullConfiguration));
        assert_eq!(allocate_exact(&p), Err(Error::NoNullConfiguration));
    }

    #[test]
    fn exact_picks_higher_weighted_upgrade() {
        // bounds admit exactly one of the two non-null choices
        let p = Problem::new(
            vec![
                task(0, 1.0, &[(&[0.0], 0.0), (&[0.6], 5.0)]),
                task(1, 2.0, &[(&[0.0], 0.0), (&[0.6], 3.0)]),
            ],
            rv(&[1.0]),
            Default::default(),
        )
        .unwrap();
        let a = allocate_exact(&p).unwrap();
        assert_eq!(a.choices[&0], 0);
        assert_eq!(a.choices[&1], 1);
        assert_eq!(a.total_utility, 6.0);
    }

    #[test]
    fn exact_all_null_tables() {
        let p = Problem::new(
            vec![
                task(0, 3.0, &[(&[0.0], 1.5)]),
                task(1, 1.0, &[(&[0.0], 0.0)]),
            ],
            rv(&[1.0]),
            Default::default(),
        )
        .unwrap();
        assert_eq!(allocate_exact(&p).unwrap().total_utility, 4.5);
        assert_eq!(allocate_greedy(&p).unwrap().total_utility, 4.5);
    }

    #[test]
    fn exact_cap_is_enforced() {
        let t = |id| task(id, 1.0, &[(&[0.0], 0.0), (&[0.1], 1.0), (&[0.2], 1.5)]);
        let p = Problem::new((0..5).map(t).collect(), rv(&[1.0]), Default::default()).unwrap();
        assert!(matches!(
            allocate_exact_with_cap(&p, 100),
            Err(Error::OracleTooLarge { .. })
        ));
        assert!(allocate_exact_with_cap(&p, 243).is_ok());
    }

    #[test]
    fn empty_problem_is_zero() {
        let p = Problem::new(vec![], rv(&[1.0]), Default::default()).unwrap();
        assert_eq!(allocate_greedy(&p).unwrap().total_utility, 0.0);
        assert_eq!(allocate_exact(&p).unwrap().total_utility, 0.0);
    }
}
