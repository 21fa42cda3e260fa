//! Hand-worked values for one cycle on the four-agent example, shared by the
//! worked-trace tests and the acceptance harness.
#![allow(dead_code)]

use pcd::model::{AgentId, Assignment, CdcopInstance};
use pcd::pseudo_tree::build_bfs;
use pcd::solver::{InertiaSchedule, Solver, SwarmConfig};

pub const PARTICLES: [[f64; 4]; 4] =
    [[-1.0, 1.2, -2.0, 2.0], [-2.0, 2.0, -1.0, 1.0], [0.0, 1.0, 2.0, -2.0], [1.1, -1.0, 1.5, 0.5]];

// [agent][particle]
pub const LOCAL_FITNESS: [[f64; 4]; 4] =
    [[-1.44, 14.00, -9.00, 6.64], [-0.44, 0.00, -1.00, 0.21], [21.00, 12.00, 16.00, 7.51], [10.00, 10.00, 8.00, 4.92]];

// Root column holds the complete (halved) fitness. The fourth particle is
// 9.64: (6.64 + 0.21 + 7.51 + 4.92) / 2, which is also its true global cost.
pub const FITNESS: [[f64; 4]; 4] =
    [[14.56, 18.00, 7.00, 9.64], [-0.44, 0.00, -1.00, 0.21], [21.00, 12.00, 16.00, 7.51], [10.00, 10.00, 8.00, 4.92]];

pub const B_P: [[f64; 4]; 4] = [
    [0.046, 0.450, 0.290, 0.214],
    [0.267, 0.000, 0.606, 0.127],
    [0.372, 0.212, 0.283, 0.133],
    [0.304, 0.304, 0.243, 0.149],
];

// After the variable update, [agent][particle] = (v, x).
pub const UPDATED: [[(f64, f64); 4]; 4] = [
    [(0.60, -0.40), (1.19, -0.81), (0.20, 0.20), (-0.66, 0.44)],
    [(-0.12, 1.08), (-0.60, 1.40), (0.20, 1.20), (1.19, 0.19)],
    [(2.38, 0.38), (1.79, 0.79), (0.20, 2.20), (0.30, 1.80)],
    [(-2.38, -0.38), (-1.79, -0.79), (0.20, -1.80), (-1.49, -0.99)],
];

pub fn round_to(x: f64, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    (x * s).round() / s
}

pub fn instance() -> CdcopInstance {
    CdcopInstance::from_json(include_str!("../data/four_agent.json")).unwrap()
}

pub fn config() -> SwarmConfig {
    SwarmConfig { particles: 4, inertia: InertiaSchedule::Fixed { w: 0.72 }, max_cycles: 1, ..SwarmConfig::default() }
}

pub struct Observed {
    pub local: Vec<Vec<f64>>,
    pub fitness: Vec<Vec<f64>>,
    pub b_p: Vec<Vec<f64>>,
    pub p_best: Vec<Vec<Option<f64>>>,
    pub g_best: Vec<Option<f64>>,
    pub improved: Vec<usize>,
    pub star: Option<usize>,
    pub g_best_fitness: f64,
    pub x: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

pub fn run_one_cycle() -> Observed {
    let inst = instance();
    let tree = build_bfs(&inst, AgentId(0)).unwrap();
    let initial = PARTICLES.iter().map(|p| Assignment::new(p.to_vec())).collect();
    let solver = Solver::new(&inst, &tree, config())
        .unwrap()
        .with_initial_positions(initial)
        .unwrap()
        .with_fixed_draws(0.7, 0.4);
    let mut seen = None;
    solver
        .run_observed(|snap| {
            let agents = snap.agents;
            seen = Some(Observed {
                local: agents.iter().map(|a| a.swarm.local_fitness.clone()).collect(),
                fitness: agents.iter().map(|a| a.swarm.fitness.clone()).collect(),
                b_p: agents.iter().map(|a| a.swarm.crossover_probabilities().unwrap()).collect(),
                p_best: agents.iter().map(|a| a.swarm.p_best_x.clone()).collect(),
                g_best: agents.iter().map(|a| a.swarm.g_best_x).collect(),
                improved: snap.best().improved.clone(),
                star: snap.best().star,
                g_best_fitness: agents[0].swarm.g_best_fitness,
                x: agents.iter().map(|a| a.swarm.x.clone()).collect(),
                v: agents.iter().map(|a| a.swarm.v.clone()).collect(),
            });
        })
        .unwrap();
    seen.unwrap()
}
