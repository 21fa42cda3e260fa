//! Synchronous message-passing substrate.
//!
//! A cycle runs in three barriered phases over a [`PseudoTree`]:
//!
//! 1. VALUE exchange: every agent sends its particle positions to each
//!    constraint-graph neighbor.
//! 2. COST convergecast: agents run deepest first; an agent's callback runs
//!    only once all of its neighbors' VALUE and children's COST messages
//!    have been delivered, and its COST goes to its parent.
//! 3. BEST broadcast: root first; each agent forwards what it computes to
//!    its children.
//!
//! A final local step ([`CycleAgent::end_cycle`]) exchanges no messages.
//! Every message is counted, and optionally logged.

use std::io;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::AgentId;
use crate::pseudo_tree::PseudoTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MessageKind {
    Value,
    Cost,
    Best,
}

/// Particles whose personal best improved, plus the new global best
/// particle when the global best improved.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BestPayload {
    pub improved: Vec<usize>,
    pub star: Option<usize>,
}

impl BestPayload {
    /// Scalars on the wire. A global best particle always improved its own
    /// best too, so it travels as a marked entry of `improved`; only a star
    /// outside that list costs an extra index.
    pub fn scalars(&self) -> usize {
        let extra = self.star.is_some_and(|k| !self.improved.contains(&k));
        self.improved.len() + usize::from(extra)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    /// Shared between all recipients of the same broadcast.
    Value(Arc<[f64]>),
    Cost(Vec<f64>),
    Best(Arc<BestPayload>),
}

impl Payload {
    pub fn kind(&self) -> MessageKind {
        match self {
            Payload::Value(_) => MessageKind::Value,
            Payload::Cost(_) => MessageKind::Cost,
            Payload::Best(_) => MessageKind::Best,
        }
    }

    /// Number of scalars carried.
    pub fn scalars(&self) -> usize {
        match self {
            Payload::Value(v) => v.len(),
            Payload::Cost(v) => v.len(),
            Payload::Best(b) => b.scalars(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub from: AgentId,
    pub to: AgentId,
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuntimeError {
    #[error("deadlock: {agent} waits for a {kind:?} message from {from} that was never sent")]
    DeadlockDetected { agent: AgentId, from: AgentId, kind: MessageKind },
    #[error("{agent} received a second {kind:?} message from {from} in one cycle")]
    Duplicate { agent: AgentId, from: AgentId, kind: MessageKind },
    #[error("{from} sent a malformed {kind:?} payload: {reason}")]
    BadPayload { from: AgentId, kind: MessageKind, reason: String },
    #[error("root {0} produced a COST message")]
    RootCost(AgentId),
    #[error("{agent} failed: {reason}")]
    Agent { agent: AgentId, reason: String },
    #[error("{0} agents supplied for a {1}-agent tree")]
    AgentCount(usize, usize),
}

/// Messages delivered to one agent during the current cycle.
#[derive(Debug, Clone, Default)]
pub struct Inbox {
    /// Indexed by sender.
    values: Vec<Option<Arc<[f64]>>>,
    costs: Vec<Option<Vec<f64>>>,
    best: Option<(AgentId, Arc<BestPayload>)>,
}

fn slot<T>(slots: &mut Vec<Option<T>>, from: AgentId) -> &mut Option<T> {
    if slots.len() <= from.0 {
        slots.resize_with(from.0 + 1, || None);
    }
    &mut slots[from.0]
}

impl Inbox {
    pub fn value_from(&self, a: AgentId) -> Option<&[f64]> {
        self.values.get(a.0)?.as_deref()
    }

    pub fn cost_from(&self, a: AgentId) -> Option<&[f64]> {
        self.costs.get(a.0)?.as_deref()
    }

    pub fn best(&self) -> Option<&BestPayload> {
        self.best.as_ref().map(|(_, b)| &**b)
    }

    fn clear(&mut self) {
        self.values.iter_mut().for_each(|v| *v = None);
        self.costs.iter_mut().for_each(|v| *v = None);
        self.best = None;
    }

    fn deliver(&mut self, to: AgentId, msg: Message) -> Result<(), RuntimeError> {
        let kind = msg.payload.kind();
        let from = msg.from;
        let dup = match msg.payload {
            Payload::Value(v) => slot(&mut self.values, from).replace(v).is_some(),
            Payload::Cost(v) => slot(&mut self.costs, from).replace(v).is_some(),
            Payload::Best(b) => self.best.replace((from, b)).is_some(),
        };
        if dup {
            return Err(RuntimeError::Duplicate { agent: to, from, kind });
        }
        Ok(())
    }
}

/// Per-agent behavior for one protocol cycle.
pub trait CycleAgent {
    /// Positions to send to every neighbor in phase 1.
    fn value_payload(&mut self) -> Vec<f64>;

    /// Phase 2. The inbox holds VALUE from every neighbor and COST from every
    /// child. Non-root agents return the COST payload for their parent; the
    /// root returns `None`.
    fn evaluate(&mut self, inbox: &Inbox) -> Result<Option<Vec<f64>>, RuntimeError>;

    /// Phase 3. The inbox holds BEST from the parent (none for the root).
    /// The returned payload is forwarded to every child.
    fn best(&mut self, inbox: &Inbox) -> Result<BestPayload, RuntimeError>;

    /// Local work after the broadcast; sends nothing.
    fn end_cycle(&mut self);
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentTraffic {
    pub value: usize,
    pub cost: usize,
    pub best: usize,
    pub scalars: usize,
}

impl AgentTraffic {
    pub fn messages(&self) -> usize {
        self.value + self.cost + self.best
    }

    fn add(&mut self, kind: MessageKind, scalars: usize) {
        match kind {
            MessageKind::Value => self.value += 1,
            MessageKind::Cost => self.cost += 1,
            MessageKind::Best => self.best += 1,
        }
        self.scalars += scalars;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleStats {
    pub cycle: usize,
    pub value: usize,
    pub cost: usize,
    pub best: usize,
    pub payload_scalars: usize,
    /// Traffic sent by each agent this cycle.
    pub per_agent: Vec<AgentTraffic>,
    /// Message hops on the critical path: one for the VALUE exchange plus
    /// the tree height for each of the convergecast and the broadcast.
    pub hops: usize,
    pub duration: Duration,
}

impl CycleStats {
    pub fn total(&self) -> usize {
        self.value + self.cost + self.best
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub cycle: usize,
    pub kind: MessageKind,
    pub from: usize,
    pub to: usize,
    pub payload_len: usize,
}

/// Writes a message log as CSV with header `cycle,kind,from,to,payload_len`.
pub fn write_message_log<W: io::Write>(entries: &[LogEntry], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for e in entries {
        w.serialize(e)?;
    }
    w.flush()?;
    Ok(())
}

/// Drives agents through cycles over a fixed tree.
pub struct Simulator<'t> {
    tree: &'t PseudoTree,
    particles: usize,
    cycle: usize,
    hops: usize,
    inboxes: Vec<Inbox>,
    bottom_up: Vec<AgentId>,
    top_down: Vec<AgentId>,
    log: Option<Vec<LogEntry>>,
}

impl<'t> Simulator<'t> {
    /// `particles` is the payload length every VALUE and COST must have and
    /// the exclusive bound on BEST indices.
    pub fn new(tree: &'t PseudoTree, particles: usize) -> Self {
        Simulator {
            tree,
            particles,
            cycle: 0,
            hops: 0,
            inboxes: vec![Inbox::default(); tree.num_agents()],
            bottom_up: tree.bottom_up(),
            top_down: tree.top_down(),
            log: None,
        }
    }

    pub fn with_message_log(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    pub fn message_log(&self) -> Option<&[LogEntry]> {
        self.log.as_deref()
    }

    pub fn cycles_run(&self) -> usize {
        self.cycle
    }

    /// Cumulative critical-path hops over all cycles run so far.
    pub fn cumulative_hops(&self) -> usize {
        self.hops
    }

    pub fn run_cycle<A: CycleAgent>(&mut self, agents: &mut [A]) -> Result<CycleStats, RuntimeError> {
        let tree = self.tree;
        let n = tree.num_agents();
        if agents.len() != n {
            return Err(RuntimeError::AgentCount(agents.len(), n));
        }
        let start = Instant::now();
        self.cycle += 1;
        for inbox in &mut self.inboxes {
            inbox.clear();
        }
        let mut traffic = vec![AgentTraffic::default(); n];

        // Phase 1: every agent's VALUE goes out before anyone evaluates.
        for (i, agent) in agents.iter_mut().enumerate() {
            let from = AgentId(i);
            let payload: Arc<[f64]> = agent.value_payload().into();
            self.check_vector(from, MessageKind::Value, &payload)?;
            for &to in tree.neighbors(from) {
                self.send(&mut traffic, Message { from, to, payload: Payload::Value(Arc::clone(&payload)) })?;
            }
        }

        // Phase 2: convergecast.
        for idx in 0..self.bottom_up.len() {
            let a = self.bottom_up[idx];
            let inbox = &self.inboxes[a.0];
            for &nb in tree.neighbors(a) {
                if inbox.value_from(nb).is_none() {
                    return Err(RuntimeError::DeadlockDetected { agent: a, from: nb, kind: MessageKind::Value });
                }
            }
            for &c in tree.children(a) {
                if inbox.cost_from(c).is_none() {
                    return Err(RuntimeError::DeadlockDetected { agent: a, from: c, kind: MessageKind::Cost });
                }
            }
            let cost = agents[a.0].evaluate(inbox)?;
            match (tree.parent(a), cost) {
                (Some(p), Some(payload)) => {
                    self.check_vector(a, MessageKind::Cost, &payload)?;
                    self.send(&mut traffic, Message { from: a, to: p, payload: Payload::Cost(payload) })?;
                }
                (None, Some(_)) => return Err(RuntimeError::RootCost(a)),
                // A missing COST surfaces as the parent's deadlock.
                (_, None) => {}
            }
        }

        // Phase 3: broadcast.
        for idx in 0..self.top_down.len() {
            let a = self.top_down[idx];
            if let Some(p) = tree.parent(a) {
                if self.inboxes[a.0].best().is_none() {
                    return Err(RuntimeError::DeadlockDetected { agent: a, from: p, kind: MessageKind::Best });
                }
            }
            let best = agents[a.0].best(&self.inboxes[a.0])?;
            if let Some(&bad) = best.improved.iter().find(|&&k| k >= self.particles) {
                return Err(self.bad(a, MessageKind::Best, format!("particle index {bad} out of range")));
            }
            if let Some(k) = best.star.filter(|&k| k >= self.particles) {
                return Err(self.bad(a, MessageKind::Best, format!("global best index {k} out of range")));
            }
            let best = Arc::new(best);
            for &c in tree.children(a) {
                self.send(&mut traffic, Message { from: a, to: c, payload: Payload::Best(Arc::clone(&best)) })?;
            }
        }

        for agent in agents.iter_mut() {
            agent.end_cycle();
        }

        let hops = 1 + 2 * tree.height();
        self.hops += hops;
        let sum = |f: fn(&AgentTraffic) -> usize| traffic.iter().map(f).sum::<usize>();
        Ok(CycleStats {
            cycle: self.cycle,
            value: sum(|t| t.value),
            cost: sum(|t| t.cost),
            best: sum(|t| t.best),
            payload_scalars: sum(|t| t.scalars),
            per_agent: traffic,
            hops,
            duration: start.elapsed(),
        })
    }

    fn send(&mut self, traffic: &mut [AgentTraffic], msg: Message) -> Result<(), RuntimeError> {
        let kind = msg.payload.kind();
        let scalars = msg.payload.scalars();
        traffic[msg.from.0].add(kind, scalars);
        if let Some(log) = &mut self.log {
            log.push(LogEntry { cycle: self.cycle, kind, from: msg.from.0, to: msg.to.0, payload_len: scalars });
        }
        let to = msg.to;
        self.inboxes[to.0].deliver(to, msg)
    }

    fn check_vector(&self, from: AgentId, kind: MessageKind, v: &[f64]) -> Result<(), RuntimeError> {
        if v.len() != self.particles {
            return Err(self.bad(from, kind, format!("length {} != {}", v.len(), self.particles)));
        }
        Ok(())
    }

    fn bad(&self, from: AgentId, kind: MessageKind, reason: String) -> RuntimeError {
        RuntimeError::BadPayload { from, kind, reason }
    }
}

/// Message counts every full cycle must produce on `tree`:
/// `(VALUE, COST, BEST) = (2|E|, |A|−1, |A|−1)`.
pub fn expected_counts(tree: &PseudoTree) -> (usize, usize, usize) {
    let n = tree.num_agents();
    (2 * tree.num_edges(), n.saturating_sub(1), n.saturating_sub(1))
}

/// Upper bound on the scalars `agent` sends in one cycle with `particles`
/// particles: `K·(|N| + 1 + |CH|)`, one K-vector per VALUE, COST and BEST
/// message.
pub fn payload_bound(tree: &PseudoTree, agent: AgentId, particles: usize) -> usize {
    let nb = tree.neighbors(agent).len();
    let ch = tree.children(agent).len();
    particles * (nb + 1 + ch)
}

/// Aggregate traffic over a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MessageStats {
    pub cycles: usize,
    pub per_agent: Vec<AgentTraffic>,
    /// Largest single-cycle scalar count per agent.
    pub peak_scalars: Vec<usize>,
}

impl MessageStats {
    pub fn total_messages(&self) -> usize {
        self.per_agent.iter().map(AgentTraffic::messages).sum()
    }
}

pub fn message_stats(cycles: &[CycleStats]) -> MessageStats {
    let n = cycles.first().map_or(0, |c| c.per_agent.len());
    let mut stats =
        MessageStats { cycles: cycles.len(), per_agent: vec![AgentTraffic::default(); n], peak_scalars: vec![0; n] };
    for c in cycles {
        for (i, t) in c.per_agent.iter().enumerate() {
            let acc = &mut stats.per_agent[i];
            acc.value += t.value;
            acc.cost += t.cost;
            acc.best += t.best;
            acc.scalars += t.scalars;
            stats.peak_scalars[i] = stats.peak_scalars[i].max(t.scalars);
        }
    }
    stats
}

/// Returns the first `(cycle, agent, sent, bound)` exceeding [`payload_bound`].
pub fn check_payload_bound(
    cycles: &[CycleStats],
    tree: &PseudoTree,
    particles: usize,
) -> Result<(), (usize, AgentId, usize, usize)> {
    for c in cycles {
        for (i, t) in c.per_agent.iter().enumerate() {
            let bound = payload_bound(tree, AgentId(i), particles);
            if t.scalars > bound {
                return Err((c.cycle, AgentId(i), t.scalars, bound));
            }
        }
    }
    Ok(())
}
