//! Breadth-first pseudo-tree over the constraint graph.
//!
//! The tree orders agents for the fitness convergecast (leaves to root) and
//! the best-particle broadcast (root to leaves). Edges of the constraint
//! graph that are not tree edges stay as neighbor links.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{AgentId, CdcopInstance};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PseudoTree {
    pub root: AgentId,
    pub parent: Vec<Option<AgentId>>,
    pub children: Vec<Vec<AgentId>>,
    pub neighbors: Vec<Vec<AgentId>>,
    pub depth: Vec<usize>,
    pub height: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("root {root} is not an agent of a {agents}-agent instance")]
    InvalidRoot { root: AgentId, agents: usize },
    #[error("constraint graph is disconnected: {unreached} agent(s) unreachable from the root")]
    Disconnected { unreached: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeViolation {
    #[error("tree covers {found} agents, instance has {expected}")]
    Size { expected: usize, found: usize },
    #[error("root {0} has a parent")]
    RootHasParent(AgentId),
    #[error("{0} has no parent")]
    MissingParent(AgentId),
    #[error("{child} lists {parent} as parent but is not among its children")]
    ParentChildMismatch { child: AgentId, parent: AgentId },
    #[error("{child} appears as child of {parent} but has a different parent")]
    StrayChild { child: AgentId, parent: AgentId },
    #[error("parent links from {0} never reach the root")]
    Cycle(AgentId),
    #[error("child {child} of {parent} is not a constraint-graph neighbor")]
    ChildNotNeighbor { child: AgentId, parent: AgentId },
    #[error("neighbor set of {0} differs from the constraint graph")]
    NeighborMismatch(AgentId),
    #[error("depth of {agent} is {recorded}, expected {expected}")]
    Depth { agent: AgentId, recorded: usize, expected: usize },
    #[error("height is {recorded}, expected {expected}")]
    Height { recorded: usize, expected: usize },
}

/// Builds the BFS tree from `root`. Agents are discovered in queue order and
/// each agent enqueues its unvisited neighbors in ascending id.
pub fn build_bfs(inst: &CdcopInstance, root: AgentId) -> Result<PseudoTree, TreeError> {
    let n = inst.num_agents();
    if root.0 >= n {
        return Err(TreeError::InvalidRoot { root, agents: n });
    }
    let neighbors: Vec<Vec<AgentId>> = inst.agents().map(|a| inst.neighbors(a)).collect();
    let mut parent = vec![None; n];
    let mut children = vec![Vec::new(); n];
    let mut depth = vec![0usize; n];
    let mut seen = vec![false; n];
    seen[root.0] = true;
    let mut queue = VecDeque::from([root]);
    let mut reached = 1;
    while let Some(a) = queue.pop_front() {
        for &b in &neighbors[a.0] {
            if !seen[b.0] {
                seen[b.0] = true;
                reached += 1;
                parent[b.0] = Some(a);
                children[a.0].push(b);
                depth[b.0] = depth[a.0] + 1;
                queue.push_back(b);
            }
        }
    }
    if reached < n {
        return Err(TreeError::Disconnected { unreached: n - reached });
    }
    let height = depth.iter().copied().max().unwrap_or(0);
    Ok(PseudoTree { root, parent, children, neighbors, depth, height })
}

impl PseudoTree {
    pub fn num_agents(&self) -> usize {
        self.parent.len()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_root(&self, a: AgentId) -> bool {
        a == self.root
    }

    pub fn parent(&self, a: AgentId) -> Option<AgentId> {
        self.parent[a.0]
    }

    pub fn children(&self, a: AgentId) -> &[AgentId] {
        &self.children[a.0]
    }

    pub fn neighbors(&self, a: AgentId) -> &[AgentId] {
        &self.neighbors[a.0]
    }

    pub fn depth(&self, a: AgentId) -> usize {
        self.depth[a.0]
    }

    /// Agents ordered root first, by depth then id.
    pub fn top_down(&self) -> Vec<AgentId> {
        let mut order: Vec<AgentId> = (0..self.num_agents()).map(AgentId).collect();
        order.sort_by_key(|a| (self.depth[a.0], a.0));
        order
    }

    /// Agents ordered deepest first, ties by id. Every agent comes after all
    /// of its children.
    pub fn bottom_up(&self) -> Vec<AgentId> {
        let mut order: Vec<AgentId> = (0..self.num_agents()).map(AgentId).collect();
        order.sort_by_key(|a| (std::cmp::Reverse(self.depth[a.0]), a.0));
        order
    }

    /// Number of undirected constraint-graph edges.
    pub fn num_edges(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edge list with `tree` / `non-tree` tags, one `u v tag` line per
    /// undirected edge, sorted by `(u, v)` with `u < v`.
    pub fn dump_edges(&self) -> String {
        let mut out = String::new();
        for (u, ns) in self.neighbors.iter().enumerate() {
            for v in ns.iter().filter(|v| v.0 > u) {
                let tree = self.parent[v.0] == Some(AgentId(u)) || self.parent[u] == Some(*v);
                let tag = if tree { "tree" } else { "non-tree" };
                let _ = writeln!(out, "{u} {} {tag}", v.0);
            }
        }
        out
    }
}

/// Checks the structural invariants of `tree` against `inst`.
pub fn validate_pseudo_tree(tree: &PseudoTree, inst: &CdcopInstance) -> Vec<TreeViolation> {
    let n = inst.num_agents();
    let mut out = Vec::new();
    let sizes = [tree.parent.len(), tree.children.len(), tree.neighbors.len(), tree.depth.len()];
    if sizes.iter().any(|&s| s != n) || tree.root.0 >= n {
        out.push(TreeViolation::Size { expected: n, found: tree.parent.len() });
        return out;
    }

    for a in inst.agents() {
        let graph: BTreeSet<AgentId> = inst.neighbors(a).into_iter().collect();
        let recorded: BTreeSet<AgentId> = tree.neighbors[a.0].iter().copied().collect();
        if graph != recorded || recorded.len() != tree.neighbors[a.0].len() {
            out.push(TreeViolation::NeighborMismatch(a));
        }
        match tree.parent[a.0] {
            Some(_) if a == tree.root => out.push(TreeViolation::RootHasParent(a)),
            None if a != tree.root => out.push(TreeViolation::MissingParent(a)),
            Some(p) if p.0 >= n || !tree.children[p.0].contains(&a) => {
                out.push(TreeViolation::ParentChildMismatch { child: a, parent: p })
            }
            _ => {}
        }
        for &c in &tree.children[a.0] {
            if c.0 >= n || tree.parent[c.0] != Some(a) {
                out.push(TreeViolation::StrayChild { child: c, parent: a });
            }
            if !graph.contains(&c) {
                out.push(TreeViolation::ChildNotNeighbor { child: c, parent: a });
            }
        }
    }

    // Walk parent links; a walk longer than n steps means a cycle.
    let mut depths = vec![None; n];
    for a in inst.agents() {
        let mut cur = a;
        let mut steps = 0usize;
        while let Some(p) = tree.parent[cur.0] {
            if p.0 >= n || steps > n {
                break;
            }
            cur = p;
            steps += 1;
        }
        if cur == tree.root && steps <= n {
            depths[a.0] = Some(steps);
        } else {
            out.push(TreeViolation::Cycle(a));
        }
    }
    if depths.iter().all(Option::is_some) {
        for a in inst.agents() {
            let expected = depths[a.0].unwrap();
            if tree.depth[a.0] != expected {
                out.push(TreeViolation::Depth { agent: a, recorded: tree.depth[a.0], expected });
            }
        }
        let expected = depths.iter().flatten().copied().max().unwrap_or(0);
        if tree.height != expected {
            out.push(TreeViolation::Height { recorded: tree.height, expected });
        }
    }
    out
}
