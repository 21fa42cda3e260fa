//! The PCD solver: K particles sliced across agents, evaluated by a fitness
//! convergecast, synchronized by a best-particle broadcast and moved with
//! guaranteed-convergence PSO updates. With crossover enabled each agent
//! also recombines two of its own particles every cycle.

mod agent;
pub mod config;
pub mod control;
pub mod swarm;

use std::time::Duration;

use thiserror::Error;

pub use agent::{CrossoverEvent, PcdAgent};
pub use config::{inertia_weight, ConfigError, InertiaSchedule, SwarmConfig};
pub use control::GcpsoControl;
pub use swarm::{LocalSwarm, UpdateRule};

use crate::expr::EvalError;
use crate::model::{AgentId, Assignment, CdcopInstance};
use crate::pseudo_tree::{validate_pseudo_tree, PseudoTree, TreeViolation};
use crate::runtime::{BestPayload, CycleStats, LogEntry, RuntimeError, Simulator};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("pseudo-tree does not match the instance: {0:?}")]
    Tree(Vec<TreeViolation>),
    #[error("{agent} evaluating function {function}: {source}")]
    Eval { agent: AgentId, function: usize, source: EvalError },
    #[error("{agent} has no VALUE from {from}")]
    MissingValue { agent: AgentId, from: AgentId },
    #[error("{agent} has no COST from {from}")]
    MissingCost { agent: AgentId, from: AgentId },
    #[error("{agent} has no BEST from its parent")]
    MissingBest { agent: AgentId },
    #[error("expected {expected} initial particles of length {agents}")]
    InitialPositions { expected: usize, agents: usize },
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
}

/// One cycle of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    pub cycle: usize,
    /// Global best cost in the instance's own sign.
    pub g_best_cost: f64,
    /// Global best cost in minimization sign.
    pub g_best_internal: f64,
    pub g_best: Assignment,
    pub stats: CycleStats,
    pub cumulative_hops: usize,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub records: Vec<CycleRecord>,
    /// Final global best assignment and its cost in the instance's sign.
    pub best: Assignment,
    pub best_cost: f64,
    pub message_log: Option<Vec<LogEntry>>,
}

impl RunTrace {
    pub fn g_best_costs(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.g_best_cost).collect()
    }

    pub fn g_best_internal(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.g_best_internal).collect()
    }

    pub fn cycle_stats(&self) -> Vec<CycleStats> {
        self.records.iter().map(|r| r.stats.clone()).collect()
    }
}

/// Read-only view of all agents after a cycle, for tests and diagnostics.
pub struct CycleSnapshot<'s, 'a> {
    pub cycle: usize,
    pub agents: &'s [PcdAgent<'a>],
    pub root: AgentId,
}

impl CycleSnapshot<'_, '_> {
    /// Full assignment of particle `k` as evaluated this cycle.
    pub fn evaluated_particle(&self, k: usize) -> Assignment {
        Assignment::new(self.agents.iter().map(|a| a.evaluated_x[k]).collect())
    }

    /// Complete fitness of every particle as computed at the root.
    pub fn root_fitness(&self) -> &[f64] {
        &self.agents[self.root.0].swarm.fitness
    }

    pub fn best(&self) -> &BestPayload {
        &self.agents[self.root.0].last_best
    }
}

pub struct Solver<'a> {
    inst: &'a CdcopInstance,
    tree: &'a PseudoTree,
    config: SwarmConfig,
    log_messages: bool,
    initial: Option<Vec<Assignment>>,
    fixed_draws: Option<(f64, f64)>,
}

impl<'a> Solver<'a> {
    pub fn new(inst: &'a CdcopInstance, tree: &'a PseudoTree, config: SwarmConfig) -> Result<Self, SolverError> {
        config.validate()?;
        let violations = validate_pseudo_tree(tree, inst);
        if !violations.is_empty() {
            return Err(SolverError::Tree(violations));
        }
        Ok(Solver { inst, tree, config, log_messages: false, initial: None, fixed_draws: None })
    }

    /// Starts from the given particles (one full assignment each, clamped
    /// to the domains) instead of random positions.
    pub fn with_initial_positions(mut self, particles: Vec<Assignment>) -> Result<Self, SolverError> {
        let agents = self.inst.num_agents();
        if particles.len() != self.config.particles || particles.iter().any(|p| p.len() != agents) {
            return Err(SolverError::InitialPositions { expected: self.config.particles, agents });
        }
        self.initial = Some(particles);
        Ok(self)
    }

    /// Replaces the per-cycle random coefficients `r1`, `r2` with constants
    /// on every agent. Meant for reproducing hand-computed traces.
    pub fn with_fixed_draws(mut self, r1: f64, r2: f64) -> Self {
        self.fixed_draws = Some((r1, r2));
        self
    }

    pub fn with_message_log(mut self) -> Self {
        self.log_messages = true;
        self
    }

    pub fn config(&self) -> &SwarmConfig {
        &self.config
    }

    pub fn run(&self) -> Result<RunTrace, SolverError> {
        self.run_observed(|_| {})
    }

    /// Runs `max_cycles` cycles, calling `observe` after each one.
    pub fn run_observed<F>(&self, mut observe: F) -> Result<RunTrace, SolverError>
    where
        F: FnMut(&CycleSnapshot<'_, 'a>),
    {
        let inst = self.inst;
        let mut agents: Vec<PcdAgent<'a>> = inst
            .agents()
            .map(|a| match &self.initial {
                Some(ps) => {
                    let d = inst.domain(a);
                    let x = ps.iter().map(|p| d.clamp(p.values()[a.0])).collect();
                    PcdAgent::with_swarm(inst, self.tree, a, &self.config, LocalSwarm::from_positions(x))
                }
                None => PcdAgent::new(inst, self.tree, a, &self.config),
            })
            .collect();
        for agent in &mut agents {
            agent.set_fixed_draws(self.fixed_draws);
        }
        let mut sim = Simulator::new(self.tree, self.config.particles);
        if self.log_messages {
            sim = sim.with_message_log();
        }
        let root = self.tree.root;
        let mut records = Vec::with_capacity(self.config.max_cycles);
        let mut elapsed = Duration::ZERO;
        for _ in 0..self.config.max_cycles {
            let stats = match sim.run_cycle(&mut agents) {
                Ok(s) => s,
                Err(e) => return Err(agents.iter_mut().find_map(PcdAgent::take_error).unwrap_or(e.into())),
            };
            elapsed += stats.duration;
            let g_best_internal = agents[root.0].swarm.g_best_fitness;
            let g_best = Assignment::new(
                agents.iter().map(|a| a.swarm.g_best_x.expect("global best set after the first cycle")).collect(),
            );
            observe(&CycleSnapshot { cycle: stats.cycle, agents: &agents, root });
            records.push(CycleRecord {
                cycle: stats.cycle,
                g_best_cost: inst.to_original(g_best_internal),
                g_best_internal,
                g_best,
                cumulative_hops: sim.cumulative_hops(),
                elapsed,
                stats,
            });
        }
        let last = records.last().expect("at least one cycle");
        Ok(RunTrace {
            best: last.g_best.clone(),
            best_cost: last.g_best_cost,
            message_log: sim.message_log().map(<[LogEntry]>::to_vec),
            records,
        })
    }
}

pub fn solve(inst: &CdcopInstance, tree: &PseudoTree, config: &SwarmConfig) -> Result<RunTrace, SolverError> {
    Solver::new(inst, tree, *config)?.run()
}
