//! Continuous DCOP instances: agents, interval domains and binary cost
//! functions, plus evaluation of full assignments.
//!
//! Each agent owns exactly one variable, so agent and variable indices
//! coincide. Instances with a maximization objective keep their original
//! expressions (so they serialize unchanged) and are negated on evaluation;
//! every cost returned by this module is in minimization sign.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::ops::Index;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{EvalError, Expr, Program};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub usize);

/// Agents and variables are in bijection.
pub type VarId = AgentId;

impl AgentId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Domain {
    pub lb: f64,
    pub ub: f64,
}

impl Domain {
    pub fn new(lb: f64, ub: f64) -> Self {
        Domain { lb, ub }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lb <= x && x <= self.ub
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lb, self.ub)
    }

    pub fn width(&self) -> f64 {
        self.ub - self.lb
    }
}

impl From<[f64; 2]> for Domain {
    fn from([lb, ub]: [f64; 2]) -> Self {
        Domain { lb, ub }
    }
}

impl From<Domain> for [f64; 2] {
    fn from(d: Domain) -> Self {
        [d.lb, d.ub]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Min,
    Max,
}

impl Objective {
    /// Factor mapping an original-sign value to internal minimization sign
    /// and back (it is its own inverse).
    pub fn sign(self) -> f64 {
        match self {
            Objective::Min => 1.0,
            Objective::Max => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostFunction {
    pub id: usize,
    pub scope: [AgentId; 2],
    pub expr: Expr,
}

impl CostFunction {
    pub fn new(id: usize, first: AgentId, second: AgentId, expr: Expr) -> Self {
        CostFunction { id, scope: [first, second], expr }
    }

    /// The scope variable other than `agent`, if `agent` is in scope.
    pub fn other(&self, agent: AgentId) -> Option<AgentId> {
        match self.scope {
            [a, b] if a == agent => Some(b),
            [a, b] if b == agent => Some(a),
            _ => None,
        }
    }
}

/// A complete assignment, one value per variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment(Vec<f64>);

impl Assignment {
    pub fn new(values: Vec<f64>) -> Self {
        Assignment(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Index<AgentId> for Assignment {
    type Output = f64;
    fn index(&self, a: AgentId) -> &f64 {
        &self.0[a.0]
    }
}

impl From<Vec<f64>> for Assignment {
    fn from(v: Vec<f64>) -> Self {
        Assignment(v)
    }
}

/// A broken instance invariant, as reported by [`CdcopInstance::validate`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("instance has no agents")]
    NoAgents,
    #[error("expected {expected} domains, found {found}")]
    DomainCount { expected: usize, found: usize },
    #[error("degenerate domain for {var}: [{lb}, {ub}]")]
    DegenerateDomain { var: VarId, lb: f64, ub: f64 },
    #[error("non-finite domain bound for {var}")]
    NonFiniteDomain { var: VarId },
    #[error("function {id} has duplicate id")]
    DuplicateId { id: usize },
    #[error("function {id} scope references unknown variable {var}")]
    UnknownVariable { id: usize, var: VarId },
    #[error("function {id} is a self-loop on {var}")]
    SelfLoop { id: usize, var: VarId },
    #[error("functions {first} and {second} share the scope {{{a}, {b}}}")]
    DuplicateScope { first: usize, second: usize, a: VarId, b: VarId },
    #[error("function {id} does not reference both scope slots")]
    SlotUsage { id: usize },
    #[error("function {id} contains a non-finite constant")]
    NonFiniteConstant { id: usize },
    #[error("disconnected graph: {components} components")]
    Disconnected { components: usize },
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid instance: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("malformed instance file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown cost function index {0}")]
    UnknownFunction(usize),
    #[error("assignment has {found} values, instance has {expected} variables")]
    AssignmentLength { expected: usize, found: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    num_agents: usize,
    domains: Vec<Domain>,
    objective: Objective,
    functions: Vec<CostFunction>,
}

/// A C-DCOP instance. Functions are kept sorted by id; the position of a
/// function in that order is its index for [`CdcopInstance::constraint_cost`].
#[derive(Debug, Clone)]
pub struct CdcopInstance {
    num_agents: usize,
    domains: Vec<Domain>,
    objective: Objective,
    functions: Vec<CostFunction>,
    programs: Vec<Program>,
    incident: Vec<Vec<usize>>,
}

impl PartialEq for CdcopInstance {
    fn eq(&self, other: &Self) -> bool {
        self.num_agents == other.num_agents
            && self.domains == other.domains
            && self.objective == other.objective
            && self.functions == other.functions
    }
}

impl CdcopInstance {
    /// Builds an instance without checking its invariants; see
    /// [`CdcopInstance::validate`]. Scopes naming unknown variables are
    /// left out of the incidence lists.
    pub fn new(
        num_agents: usize,
        domains: Vec<Domain>,
        objective: Objective,
        mut functions: Vec<CostFunction>,
    ) -> Self {
        functions.sort_by_key(|f| f.id);
        let programs = functions.iter().map(|f| f.expr.compile()).collect();
        let mut incident = vec![Vec::new(); num_agents];
        for (idx, f) in functions.iter().enumerate() {
            let [a, b] = f.scope;
            if a.0 < num_agents && b.0 < num_agents && a != b {
                incident[a.0].push(idx);
                incident[b.0].push(idx);
            }
        }
        CdcopInstance { num_agents, domains, objective, functions, programs, incident }
    }

    /// Builds and validates.
    pub fn try_new(
        num_agents: usize,
        domains: Vec<Domain>,
        objective: Objective,
        functions: Vec<CostFunction>,
    ) -> Result<Self, ModelError> {
        CdcopInstance::new(num_agents, domains, objective, functions).validated()
    }

    pub fn validated(self) -> Result<Self, ModelError> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(ModelError::Invalid(violations))
        }
    }

    pub fn num_agents(&self) -> usize {
        self.num_agents
    }

    pub fn agents(&self) -> impl Iterator<Item = AgentId> {
        (0..self.num_agents).map(AgentId)
    }

    pub fn domains(&self) -> &[Domain] {
        &self.domains
    }

    pub fn domain(&self, var: VarId) -> Domain {
        self.domains[var.0]
    }

    pub fn objective(&self) -> Objective {
        self.objective
    }

    pub fn functions(&self) -> &[CostFunction] {
        &self.functions
    }

    pub fn function(&self, idx: usize) -> Option<&CostFunction> {
        self.functions.get(idx)
    }

    pub fn num_edges(&self) -> usize {
        self.functions.len()
    }

    /// Indices of the functions whose scope contains `agent`, ascending.
    pub fn incident_functions(&self, agent: AgentId) -> &[usize] {
        &self.incident[agent.0]
    }

    /// Constraint-graph neighbors of `agent`, ascending and deduplicated.
    pub fn neighbors(&self, agent: AgentId) -> Vec<AgentId> {
        let mut n: Vec<AgentId> =
            self.incident[agent.0].iter().filter_map(|&f| self.functions[f].other(agent)).collect();
        n.sort_unstable();
        n.dedup();
        n
    }

    /// Cost of function `idx` with its scope bound to `first` and `second`,
    /// in minimization sign.
    #[inline]
    pub fn eval_function(&self, idx: usize, first: f64, second: f64) -> Result<f64, EvalError> {
        Ok(self.objective.sign() * self.programs[idx].eval(first, second)?)
    }

    /// Adds the minimization-sign cost of function `idx` at every pair
    /// `(first[i], second[i])` to `acc[i]`.
    pub fn eval_function_add_batch(
        &self,
        idx: usize,
        first: &[f64],
        second: &[f64],
        acc: &mut [f64],
        scratch: &mut Vec<f64>,
    ) -> Result<(), EvalError> {
        self.programs[idx].eval_add_batch(first, second, self.objective.sign(), acc, scratch)
    }

    /// Cost of function `idx` under a complete assignment.
    pub fn constraint_cost(&self, idx: usize, asg: &Assignment) -> Result<f64, ModelError> {
        self.check_len(asg)?;
        let f = self.functions.get(idx).ok_or(ModelError::UnknownFunction(idx))?;
        let [a, b] = f.scope;
        Ok(self.objective.sign() * f.expr.eval(asg[a], asg[b])?)
    }

    /// Sum of all function costs. This walks the expression trees directly
    /// rather than the compiled programs.
    pub fn global_cost(&self, asg: &Assignment) -> Result<f64, ModelError> {
        self.check_len(asg)?;
        let mut total = 0.0;
        for idx in 0..self.functions.len() {
            total += self.constraint_cost(idx, asg)?;
        }
        Ok(total)
    }

    /// Converts an internal (minimization) cost to the instance's own sign.
    pub fn to_original(&self, cost: f64) -> f64 {
        self.objective.sign() * cost
    }

    fn check_len(&self, asg: &Assignment) -> Result<(), ModelError> {
        if asg.len() != self.num_agents {
            return Err(ModelError::AssignmentLength { expected: self.num_agents, found: asg.len() });
        }
        Ok(())
    }

    /// Checks every instance invariant. Never fails; an empty list means the
    /// instance is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.num_agents == 0 {
            out.push(Violation::NoAgents);
        }
        if self.domains.len() != self.num_agents {
            out.push(Violation::DomainCount { expected: self.num_agents, found: self.domains.len() });
        }
        for (i, d) in self.domains.iter().enumerate() {
            if !d.lb.is_finite() || !d.ub.is_finite() {
                out.push(Violation::NonFiniteDomain { var: AgentId(i) });
            } else if d.lb >= d.ub {
                out.push(Violation::DegenerateDomain { var: AgentId(i), lb: d.lb, ub: d.ub });
            }
        }
        let mut scopes: BTreeMap<(AgentId, AgentId), usize> = BTreeMap::new();
        for (pos, f) in self.functions.iter().enumerate() {
            if pos > 0 && self.functions[pos - 1].id == f.id {
                out.push(Violation::DuplicateId { id: f.id });
            }
            let [a, b] = f.scope;
            let mut scope_ok = true;
            for v in [a, b] {
                if v.0 >= self.num_agents {
                    out.push(Violation::UnknownVariable { id: f.id, var: v });
                    scope_ok = false;
                }
            }
            if a == b {
                out.push(Violation::SelfLoop { id: f.id, var: a });
                scope_ok = false;
            }
            if scope_ok {
                let key = (a.min(b), a.max(b));
                if let Some(&first) = scopes.get(&key) {
                    out.push(Violation::DuplicateScope { first, second: f.id, a: key.0, b: key.1 });
                } else {
                    scopes.insert(key, f.id);
                }
            }
            if f.expr.slots() != (true, true) {
                out.push(Violation::SlotUsage { id: f.id });
            }
            if !f.expr.constants_finite() {
                out.push(Violation::NonFiniteConstant { id: f.id });
            }
        }
        if self.num_agents > 0 {
            let components = self.count_components();
            if components > 1 {
                out.push(Violation::Disconnected { components });
            }
        }
        out
    }

    fn count_components(&self) -> usize {
        let mut seen = vec![false; self.num_agents];
        let mut components = 0;
        for start in 0..self.num_agents {
            if seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            let mut queue = VecDeque::from([AgentId(start)]);
            while let Some(a) = queue.pop_front() {
                for n in self.neighbors(a) {
                    if !seen[n.0] {
                        seen[n.0] = true;
                        queue.push_back(n);
                    }
                }
            }
        }
        components
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let file: InstanceFile = serde_json::from_str(text)?;
        CdcopInstance::try_new(file.num_agents, file.domains, file.objective, file.functions)
    }

    pub fn to_json(&self) -> String {
        let file = InstanceFile {
            num_agents: self.num_agents,
            domains: self.domains.clone(),
            objective: self.objective,
            functions: self.functions.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("instance serializes");
        s.push('\n');
        s
    }
}
