//! Centralized reference computations used to check the distributed solver:
//! whole-assignment fitness, brute-force lattice optima for small instances,
//! and the anytime property of a cost trace.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AgentId, Assignment, CdcopInstance, ModelError, Objective};

/// Upper bound on the number of lattice points a grid search may visit.
pub const MAX_GRID_POINTS: u64 = 10_000_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("grid of {points_per_dim}^{dims} points exceeds the limit of {MAX_GRID_POINTS}")]
    TooLarge { points_per_dim: usize, dims: usize },
    #[error("instance has {dims} agents, more than the configured maximum of {max_dims}")]
    TooManyDims { dims: usize, max_dims: usize },
    #[error("points_per_dim must be at least 2, got {0}")]
    TooFewPoints(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Internal-sign cost of a complete assignment.
pub fn centralized_fitness(inst: &CdcopInstance, asg: &Assignment) -> Result<f64, ModelError> {
    inst.global_cost(asg)
}

/// Recomputes the cost agent by agent: each agent sums every function whose
/// scope contains it, and the total is halved. Scans the function list
/// directly instead of using the instance's incidence lists.
pub fn local_sum_fitness(inst: &CdcopInstance, asg: &Assignment) -> Result<f64, ModelError> {
    let mut total = 0.0;
    for agent in inst.agents() {
        for (idx, f) in inst.functions().iter().enumerate() {
            if f.scope.contains(&agent) {
                total += inst.constraint_cost(idx, asg)?;
            }
        }
    }
    Ok(total / 2.0)
}

/// `|a − b| ≤ tol · max(|a|, |b|, 1)`.
pub fn approx_eq_rel(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSearchSpec {
    pub points_per_dim: usize,
    pub max_dims: usize,
}

impl Default for GridSearchSpec {
    fn default() -> Self {
        GridSearchSpec { points_per_dim: 21, max_dims: 8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOptimum {
    pub assignment: Assignment,
    /// Cost in the instance's own sign.
    pub cost: f64,
    /// Largest lattice spacing over all domains.
    pub resolution: f64,
    pub points_visited: u64,
}

/// Exhaustive search over the lattice with `points_per_dim` evenly spaced
/// values per domain, endpoints included. Ties go to the lexicographically
/// smallest assignment.
pub fn grid_optimum(inst: &CdcopInstance, spec: &GridSearchSpec) -> Result<GridOptimum, OracleError> {
    let n = inst.num_agents();
    let p = spec.points_per_dim;
    if p < 2 {
        return Err(OracleError::TooFewPoints(p));
    }
    if n > spec.max_dims {
        return Err(OracleError::TooManyDims { dims: n, max_dims: spec.max_dims });
    }
    let total = (p as u64)
        .checked_pow(n as u32)
        .filter(|&t| t <= MAX_GRID_POINTS)
        .ok_or(OracleError::TooLarge { points_per_dim: p, dims: n })?;

    let axes: Vec<Vec<f64>> = inst
        .domains()
        .iter()
        .map(|d| {
            let step = d.width() / (p - 1) as f64;
            (0..p).map(|i| if i == p - 1 { d.ub } else { d.lb + step * i as f64 }).collect()
        })
        .collect();
    let resolution = inst.domains().iter().map(|d| d.width() / (p - 1) as f64).fold(0.0, f64::max);

    let mut index = vec![0usize; n];
    let mut point: Vec<f64> = axes.iter().map(|a| a[0]).collect();
    let mut best = (f64::INFINITY, point.clone());
    for _ in 0..total {
        let mut cost = 0.0;
        for (idx, f) in inst.functions().iter().enumerate() {
            let [a, b] = f.scope;
            cost += inst.eval_function(idx, point[a.0], point[b.0]).map_err(ModelError::from)?;
        }
        if cost < best.0 {
            best = (cost, point.clone());
        }
        // odometer with the last agent varying fastest
        for d in (0..n).rev() {
            index[d] += 1;
            if index[d] < p {
                point[d] = axes[d][index[d]];
                break;
            }
            index[d] = 0;
            point[d] = axes[d][0];
        }
    }
    Ok(GridOptimum {
        assignment: Assignment::new(best.1),
        cost: inst.to_original(best.0),
        resolution,
        points_visited: total,
    })
}

/// Checks that an internal-sign cost trace never increases. Returns the
/// index of the first entry that is worse than its predecessor.
pub fn check_anytime(trace: &[f64]) -> Result<(), usize> {
    match trace.windows(2).position(|w| w[1] > w[0] || w[1].is_nan()) {
        Some(i) => Err(i + 1),
        None => Ok(()),
    }
}

/// Same as [`check_anytime`] for a trace in the instance's own sign, so a
/// maximization trace must never decrease.
pub fn check_anytime_for(objective: Objective, trace: &[f64]) -> Result<(), usize> {
    let internal: Vec<f64> = trace.iter().map(|c| objective.sign() * c).collect();
    check_anytime(&internal)
}

/// Full assignment formed by taking coordinate `agent` from `coord(agent)`.
pub fn assemble<F: Fn(AgentId) -> f64>(inst: &CdcopInstance, coord: F) -> Assignment {
    Assignment::new(inst.agents().map(coord).collect())
}
