//! One agent's slice of the population: its own coordinate and velocity for
//! each of the K particles, plus the best-position bookkeeping it needs.

use rand::Rng;

use crate::model::{AgentId, CdcopInstance, Domain};
use crate::runtime::BestPayload;

use super::SolverError;

#[derive(Debug, Clone, PartialEq)]
pub struct LocalSwarm {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    /// Sum of this agent's incident function costs, per particle.
    pub local_fitness: Vec<f64>,
    /// Local fitness plus the children's subtree fitness; halved at the root
    /// into the complete fitness.
    pub fitness: Vec<f64>,
    pub p_best_x: Vec<Option<f64>>,
    /// Authoritative only at the root; other agents keep `+∞`.
    pub p_best_fitness: Vec<f64>,
    pub g_best_x: Option<f64>,
    /// Root only, like `p_best_fitness`.
    pub g_best_fitness: f64,
    /// Crossover selection probabilities from the latest evaluation.
    pub b_p: Vec<f64>,
    scratch: Vec<f64>,
}

/// Coefficients for one velocity/position update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateRule {
    pub w: f64,
    pub c1: f64,
    pub c2: f64,
    pub r1: f64,
    pub r2: f64,
    pub rho: f64,
    /// Scale the whole non-best update by `w` instead of only the velocity.
    pub constriction: bool,
    /// Particle holding the global best; it gets the guaranteed-convergence
    /// update.
    pub best: Option<usize>,
}

impl LocalSwarm {
    /// Zero velocities and positions drawn uniformly from `domain`.
    pub fn initialize<R: Rng>(particles: usize, domain: Domain, rng: &mut R) -> Self {
        let x = (0..particles).map(|_| rng.gen_range(domain.lb..=domain.ub)).collect();
        LocalSwarm::from_positions(x)
    }

    pub fn from_positions(x: Vec<f64>) -> Self {
        let k = x.len();
        LocalSwarm {
            x,
            v: vec![0.0; k],
            local_fitness: vec![0.0; k],
            fitness: vec![0.0; k],
            p_best_x: vec![None; k],
            p_best_fitness: vec![f64::INFINITY; k],
            g_best_x: None,
            g_best_fitness: f64::INFINITY,
            b_p: vec![0.0; k],
            scratch: Vec::new(),
        }
    }

    pub fn particles(&self) -> usize {
        self.x.len()
    }

    /// Local fitness of every particle from the neighbors' positions.
    /// `neighbor_x` returns the VALUE payload received from a neighbor.
    pub fn evaluate_local<'a, F>(&mut self, inst: &CdcopInstance, me: AgentId, neighbor_x: F) -> Result<(), SolverError>
    where
        F: Fn(AgentId) -> Option<&'a [f64]>,
    {
        self.local_fitness.iter_mut().for_each(|f| *f = 0.0);
        for &idx in inst.incident_functions(me) {
            let f = &inst.functions()[idx];
            let other = f.other(me).expect("incident function contains the agent");
            let theirs = neighbor_x(other).ok_or(SolverError::MissingValue { agent: me, from: other })?;
            let (a, b) = if f.scope[0] == me { (&self.x[..], theirs) } else { (theirs, &self.x[..]) };
            inst.eval_function_add_batch(idx, a, b, &mut self.local_fitness, &mut self.scratch)
                .map_err(|source| SolverError::Eval { agent: me, function: f.id, source })?;
        }
        Ok(())
    }

    /// Adds the children's subtree fitness to the local fitness; the root
    /// halves the total since every function was counted by both of its
    /// scope agents.
    pub fn aggregate<'a, I>(&mut self, child_costs: I, is_root: bool)
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        self.fitness.copy_from_slice(&self.local_fitness);
        for cost in child_costs {
            for (f, c) in self.fitness.iter_mut().zip(cost) {
                *f += c;
            }
        }
        if is_root {
            self.fitness.iter_mut().for_each(|f| *f /= 2.0);
        }
    }

    /// Root-side best update using strict comparisons. Returns the improved
    /// particles and, if the global best improved, the new best particle.
    pub fn root_best_update(&mut self) -> BestPayload {
        let mut out = BestPayload::default();
        for k in 0..self.x.len() {
            let f = self.fitness[k];
            if f < self.p_best_fitness[k] {
                self.p_best_x[k] = Some(self.x[k]);
                self.p_best_fitness[k] = f;
                out.improved.push(k);
            }
            if f < self.g_best_fitness {
                self.g_best_x = Some(self.x[k]);
                self.g_best_fitness = f;
                out.star = Some(k);
            }
        }
        out
    }

    /// Non-root side: snapshot own coordinates for the improved particles and
    /// adopt the new global best coordinate.
    pub fn apply_best(&mut self, best: &BestPayload) {
        for &k in &best.improved {
            self.p_best_x[k] = Some(self.x[k]);
        }
        if let Some(k) = best.star {
            self.g_best_x = Some(self.x[k]);
        }
    }

    /// Selection probabilities proportional to `|local_fitness|`. Returns
    /// `None` when every local fitness is zero (or the sum is not finite).
    pub fn crossover_probabilities(&self) -> Option<Vec<f64>> {
        let total: f64 = self.local_fitness.iter().map(|f| f.abs()).sum();
        if total > 0.0 && total.is_finite() {
            Some(self.local_fitness.iter().map(|f| f.abs() / total).collect())
        } else {
            None
        }
    }

    /// Draws two distinct particles by weighted sampling without replacement,
    /// falling back to uniform weights when they are degenerate.
    pub fn select_pair<R: Rng>(weights: Option<&[f64]>, particles: usize, rng: &mut R) -> (usize, usize) {
        assert!(particles >= 2, "crossover needs two particles");
        let mut w: Vec<f64> = match weights {
            Some(w) => w.to_vec(),
            None => vec![1.0; particles],
        };
        let a = weighted_index(&w, rng);
        w[a] = 0.0;
        if w.iter().sum::<f64>() <= 0.0 {
            w = vec![1.0; particles];
            w[a] = 0.0;
        }
        let b = weighted_index(&w, rng);
        (a, b)
    }

    /// Arithmetic crossover of particles `a` and `b` with mixing factor `r`.
    /// Velocities are recombined only when their sum is non-zero; the return
    /// value says whether that happened.
    pub fn crossover_pair(&mut self, a: usize, b: usize, r: f64, domain: Domain) -> bool {
        let (xa, xb) = (self.x[a], self.x[b]);
        self.x[a] = domain.clamp(r * xa + (1.0 - r) * xb);
        self.x[b] = domain.clamp(r * xb + (1.0 - r) * xa);
        let (va, vb) = (self.v[a], self.v[b]);
        let sum = va + vb;
        if sum.abs() != 0.0 {
            let dir = sum / sum.abs();
            self.v[a] = dir * va.abs();
            self.v[b] = dir * vb.abs();
            true
        } else {
            false
        }
    }

    /// Velocity and position update for every particle not in `skip`;
    /// positions are clamped to `domain`, velocities are left as computed.
    pub fn variable_update(&mut self, rule: &UpdateRule, skip: &[usize], domain: Domain) {
        for k in 0..self.x.len() {
            if skip.contains(&k) {
                continue;
            }
            let x = self.x[k];
            let v = self.v[k];
            let g = self.g_best_x.unwrap_or(x);
            let new_v = if rule.best == Some(k) {
                -x + g + rule.w * v + rule.rho * (1.0 - 2.0 * rule.r2)
            } else {
                let p = self.p_best_x[k].unwrap_or(x);
                let pull = rule.r1 * rule.c1 * (p - x) + rule.r2 * rule.c2 * (g - x);
                if rule.constriction {
                    rule.w * (v + pull)
                } else {
                    rule.w * v + pull
                }
            };
            self.v[k] = new_v;
            self.x[k] = domain.clamp(x + new_v);
        }
    }
}

fn weighted_index<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        last = i;
        if u < w {
            return i;
        }
        u -= w;
    }
    last
}
