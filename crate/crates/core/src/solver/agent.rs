use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::model::{AgentId, CdcopInstance, Domain};
use crate::pseudo_tree::PseudoTree;
use crate::rng::{agent_stream, Stream};
use crate::runtime::{BestPayload, CycleAgent, Inbox, RuntimeError};

use super::config::{inertia_weight, InertiaSchedule, SwarmConfig};
use super::control::GcpsoControl;
use super::swarm::{LocalSwarm, UpdateRule};
use super::SolverError;

/// Outcome of one agent's crossover step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossoverEvent {
    pub pair: (usize, usize),
    pub r: f64,
    pub velocities_blended: bool,
}

/// A PCD agent: owns its swarm slice and control state and talks to the
/// rest of the system only through the runtime.
pub struct PcdAgent<'a> {
    id: AgentId,
    inst: &'a CdcopInstance,
    domain: Domain,
    is_root: bool,
    children: Vec<AgentId>,
    config: SwarmConfig,
    pub swarm: LocalSwarm,
    pub control: GcpsoControl,
    /// Positions sent in the latest VALUE message, i.e. the ones evaluated
    /// this cycle.
    pub evaluated_x: Vec<f64>,
    /// BEST payload seen this cycle.
    pub last_best: BestPayload,
    pub last_crossover: Option<CrossoverEvent>,
    update_rng: ChaCha8Rng,
    crossover_rng: ChaCha8Rng,
    fixed_draws: Option<(f64, f64)>,
    error: Option<SolverError>,
}

impl<'a> PcdAgent<'a> {
    pub fn new(inst: &'a CdcopInstance, tree: &PseudoTree, id: AgentId, config: &SwarmConfig) -> Self {
        let domain = inst.domain(id);
        let mut init = agent_stream(config.seed, id, Stream::Init);
        let swarm = LocalSwarm::initialize(config.particles, domain, &mut init);
        Self::with_swarm(inst, tree, id, config, swarm)
    }

    pub(crate) fn with_swarm(
        inst: &'a CdcopInstance,
        tree: &PseudoTree,
        id: AgentId,
        config: &SwarmConfig,
        swarm: LocalSwarm,
    ) -> Self {
        let domain = inst.domain(id);
        PcdAgent {
            id,
            inst,
            domain,
            is_root: tree.is_root(id),
            children: tree.children(id).to_vec(),
            config: *config,
            swarm,
            control: GcpsoControl::default(),
            evaluated_x: Vec::new(),
            last_best: BestPayload::default(),
            last_crossover: None,
            update_rng: agent_stream(config.seed, id, Stream::Update),
            crossover_rng: agent_stream(config.seed, id, Stream::Crossover),
            fixed_draws: None,
            error: None,
        }
    }

    pub(crate) fn set_fixed_draws(&mut self, draws: Option<(f64, f64)>) {
        self.fixed_draws = draws;
    }

    pub fn id(&self) -> AgentId {
        self.id
    }

    pub fn take_error(&mut self) -> Option<SolverError> {
        self.error.take()
    }

    fn fail(&mut self, err: SolverError) -> RuntimeError {
        let reason = err.to_string();
        self.error = Some(err);
        RuntimeError::Agent { agent: self.id, reason }
    }

    fn crossover(&mut self) -> Vec<usize> {
        let k = self.swarm.particles();
        let weights = self.swarm.crossover_probabilities();
        self.swarm.b_p = weights.clone().unwrap_or_else(|| vec![0.0; k]);
        let (a, b) = LocalSwarm::select_pair(weights.as_deref(), k, &mut self.crossover_rng);
        let r: f64 = self.crossover_rng.gen();
        let blended = self.swarm.crossover_pair(a, b, r, self.domain);
        self.last_crossover = Some(CrossoverEvent { pair: (a, b), r, velocities_blended: blended });
        if blended {
            vec![a, b]
        } else {
            Vec::new()
        }
    }
}

impl CycleAgent for PcdAgent<'_> {
    fn value_payload(&mut self) -> Vec<f64> {
        self.evaluated_x.clone_from(&self.swarm.x);
        self.swarm.x.clone()
    }

    fn evaluate(&mut self, inbox: &Inbox) -> Result<Option<Vec<f64>>, RuntimeError> {
        if let Err(e) = self.swarm.evaluate_local(self.inst, self.id, |a| inbox.value_from(a)) {
            return Err(self.fail(e));
        }
        let mut costs = Vec::with_capacity(self.children.len());
        for &c in &self.children {
            match inbox.cost_from(c) {
                Some(v) => costs.push(v),
                None => return Err(self.fail(SolverError::MissingCost { agent: self.id, from: c })),
            }
        }
        self.swarm.aggregate(costs, self.is_root);
        Ok((!self.is_root).then(|| self.swarm.fitness.clone()))
    }

    fn best(&mut self, inbox: &Inbox) -> Result<BestPayload, RuntimeError> {
        let best = if self.is_root {
            self.swarm.root_best_update()
        } else {
            let Some(best) = inbox.best().cloned() else {
                return Err(self.fail(SolverError::MissingBest { agent: self.id }));
            };
            self.swarm.apply_best(&best);
            best
        };
        self.last_best.clone_from(&best);
        Ok(best)
    }

    fn end_cycle(&mut self) {
        let skip = if self.config.crossover { self.crossover() } else { Vec::new() };

        let improved = self.last_best.star.is_some();
        self.control = self.control.update(improved, &self.config);
        if let Some(k) = self.last_best.star {
            self.control.best = Some(k);
        }

        let w = inertia_weight(self.config.inertia, self.control.t, self.config.max_cycles)
            .expect("validated configuration");
        let (r1, r2) = match self.fixed_draws {
            Some(d) => d,
            None => (self.update_rng.gen(), self.update_rng.gen()),
        };
        let rule = UpdateRule {
            w,
            c1: self.config.c1,
            c2: self.config.c2,
            r1,
            r2,
            rho: self.control.rho,
            constriction: matches!(self.config.inertia, InertiaSchedule::Constriction { .. }),
            best: self.control.best,
        };
        self.swarm.variable_update(&rule, &skip, self.domain);
    }
}
