//! Seeded generators for the four benchmark families: Erdős–Rényi random
//! graphs, random trees, Barabási–Albert scale-free networks and the sensor
//! grid. Every generator is a pure function of its spec.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::Expr;
use crate::model::{AgentId, CdcopInstance, CostFunction, Domain, ModelError, Objective};

/// Retry budget for drawing a connected Erdős–Rényi graph.
pub const ER_MAX_ATTEMPTS: usize = 100;

/// Numerator of the sensor utility.
pub const SENSOR_C: f64 = 10_000.0;

/// Distance between the left edges of two horizontally adjacent sensor
/// cells. One unit wider than the cell so that sensors in neighbouring
/// cells are never co-located.
pub const SENSOR_CELL_PITCH: f64 = 11.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    ErdosRenyi { n: usize, p: f64 },
    RandomTree { n: usize },
    BarabasiAlbert { n: usize, m: usize },
    SensorGrid { rows: usize, cols: usize },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::ErdosRenyi { .. } => "erdos_renyi",
            Family::RandomTree { .. } => "random_tree",
            Family::BarabasiAlbert { .. } => "barabasi_albert",
            Family::SensorGrid { .. } => "sensor_grid",
        }
    }

    /// Domain used when a `BenchSpec` does not override it.
    pub fn default_domain(&self) -> Domain {
        match self {
            Family::ErdosRenyi { .. } | Family::RandomTree { .. } => Domain::new(-50.0, 50.0),
            Family::BarabasiAlbert { .. } => Domain::new(-20.0, 20.0),
            Family::SensorGrid { .. } => Domain::new(0.0, 10.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSpec {
    pub family: Family,
    #[serde(default)]
    pub domain: Option<Domain>,
    /// Range of the quadratic coefficients; unused by the sensor grid.
    #[serde(default = "default_coeff_range")]
    pub coeff_range: (f64, f64),
    #[serde(default)]
    pub seed: u64,
}

fn default_coeff_range() -> (f64, f64) {
    (-5.0, 5.0)
}

impl BenchSpec {
    pub fn new(family: Family, seed: u64) -> Self {
        BenchSpec { family, domain: None, coeff_range: default_coeff_range(), seed }
    }

    pub fn domain(&self) -> Domain {
        self.domain.unwrap_or_else(|| self.family.default_domain())
    }
}

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid benchmark spec: {0}")]
    InvalidSpec(String),
    #[error("no connected graph after {attempts} attempts; p is too small for n")]
    GenerationFailed { attempts: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl BenchSpec {
    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |msg: String| Err(GenError::InvalidSpec(msg));
        match self.family {
            Family::ErdosRenyi { n, p } => {
                if n < 2 {
                    return bad(format!("n must be at least 2, got {n}"));
                }
                if !(p > 0.0 && p <= 1.0) {
                    return bad(format!("p must be in (0, 1], got {p}"));
                }
            }
            Family::RandomTree { n } if n < 2 => return bad(format!("n must be at least 2, got {n}")),
            Family::BarabasiAlbert { n, m } => {
                if m < 1 {
                    return bad("m must be at least 1".into());
                }
                if n <= m {
                    return bad(format!("n must exceed m, got n={n}, m={m}"));
                }
            }
            Family::SensorGrid { rows, cols } if rows < 2 || cols < 2 => {
                return bad(format!("grid must be at least 2x2, got {rows}x{cols}"));
            }
            _ => {}
        }
        let d = self.domain();
        if !(d.lb.is_finite() && d.ub.is_finite() && d.lb < d.ub) {
            return bad(format!("degenerate domain [{}, {}]", d.lb, d.ub));
        }
        if matches!(self.family, Family::SensorGrid { .. }) && d.width() >= SENSOR_CELL_PITCH {
            return bad(format!("sensor domain must be narrower than the cell pitch {SENSOR_CELL_PITCH}"));
        }
        let (lo, hi) = self.coeff_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return bad(format!("invalid coefficient range [{lo}, {hi}]"));
        }
        Ok(())
    }
}

/// Generates the instance described by `spec`.
pub fn generate(spec: &BenchSpec) -> Result<CdcopInstance, GenError> {
    spec.validate()?;
    let domain = spec.domain();
    match spec.family {
        Family::ErdosRenyi { n, p } => gen_erdos_renyi(n, p, domain, spec.coeff_range, spec.seed),
        Family::RandomTree { n } => gen_random_tree(n, domain, spec.coeff_range, spec.seed),
        Family::BarabasiAlbert { n, m } => gen_barabasi_albert(n, m, domain, spec.coeff_range, spec.seed),
        Family::SensorGrid { rows, cols } => gen_sensor_grid_in(rows, cols, domain, spec.seed),
    }
}

pub fn gen_erdos_renyi(
    n: usize,
    p: f64,
    domain: Domain,
    coeff_range: (f64, f64),
    seed: u64,
) -> Result<CdcopInstance, GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..ER_MAX_ATTEMPTS {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen_bool(p) {
                    edges.push((i, j));
                }
            }
        }
        if is_connected(n, &edges) {
            return quadratic_instance(n, &edges, domain, coeff_range, &mut rng);
        }
    }
    Err(GenError::GenerationFailed { attempts: ER_MAX_ATTEMPTS })
}

pub fn gen_random_tree(
    n: usize,
    domain: Domain,
    coeff_range: (f64, f64),
    seed: u64,
) -> Result<CdcopInstance, GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges: Vec<_> = (1..n).map(|i| (rng.gen_range(0..i), i)).collect();
    quadratic_instance(n, &edges, domain, coeff_range, &mut rng)
}

pub fn gen_barabasi_albert(
    n: usize,
    m: usize,
    domain: Domain,
    coeff_range: (f64, f64),
    seed: u64,
) -> Result<CdcopInstance, GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    // every node appears once per incident edge
    let mut ends: Vec<usize> = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            edges.push((i, j));
            ends.extend([i, j]);
        }
    }
    for new in m..n {
        let mut targets: Vec<usize> = Vec::with_capacity(m);
        while targets.len() < m {
            let t = if ends.is_empty() { rng.gen_range(0..new) } else { ends[rng.gen_range(0..ends.len())] };
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for t in targets {
            edges.push((t, new));
            ends.extend([t, new]);
        }
    }
    quadratic_instance(n, &edges, domain, coeff_range, &mut rng)
}

/// Sensor grid with cells of width 10.
pub fn gen_sensor_grid(rows: usize, cols: usize, seed: u64) -> Result<CdcopInstance, GenError> {
    gen_sensor_grid_in(rows, cols, Domain::new(0.0, 10.0), seed)
}

fn gen_sensor_grid_in(rows: usize, cols: usize, domain: Domain, seed: u64) -> Result<CdcopInstance, GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = |row: usize, col: usize| row * cols + col;
    let mut edges = Vec::new();
    for row in 0..rows {
        for col in 0..cols {
            if col + 1 < cols {
                edges.push((id(row, col), id(row, col + 1)));
            }
            if row + 1 < rows {
                edges.push((id(row, col), id(row + 1, col)));
            }
        }
    }
    edges.sort_unstable();
    let functions = edges
        .iter()
        .enumerate()
        .map(|(fid, &(i, j))| {
            let (ri, rj) = (rng.gen_range(domain.lb..=domain.ub), rng.gen_range(domain.lb..=domain.ub));
            let eta = rng.gen_range(1.0..=10.0);
            let dx = SENSOR_CELL_PITCH * ((i % cols) as f64 - (j % cols) as f64);
            let dy = SENSOR_CELL_PITCH * ((i / cols) as f64 - (j / cols) as f64);
            CostFunction::new(fid, AgentId(i), AgentId(j), sensor_utility(dx, dy, ri, rj, eta))
        })
        .collect();
    let inst = CdcopInstance::try_new(rows * cols, vec![domain; rows * cols], Objective::Max, functions)?;
    Ok(inst)
}

/// `C / (d² · λ)` with `d² = (x0 − x1 + dx)² + dy²` and
/// `λ = (ri − x0)² + (rj − x1)² + η`.
pub fn sensor_utility(dx: f64, dy: f64, ri: f64, rj: f64, eta: f64) -> Expr {
    let mut sep = Expr::x0() - Expr::x1();
    if dx != 0.0 {
        sep = sep + Expr::constant(dx);
    }
    let mut d2 = sep.pow(2);
    if dy != 0.0 {
        d2 = d2 + Expr::constant(dy * dy);
    }
    let lambda =
        (Expr::constant(ri) - Expr::x0()).pow(2) + (Expr::constant(rj) - Expr::x1()).pow(2) + Expr::constant(eta);
    Expr::constant(SENSOR_C) / (d2 * lambda)
}

fn quadratic_instance(
    n: usize,
    edges: &[(usize, usize)],
    domain: Domain,
    (lo, hi): (f64, f64),
    rng: &mut ChaCha8Rng,
) -> Result<CdcopInstance, GenError> {
    let functions = edges
        .iter()
        .enumerate()
        .map(|(fid, &(i, j))| {
            let (a, b, c) = (rng.gen_range(lo..=hi), rng.gen_range(lo..=hi), rng.gen_range(lo..=hi));
            CostFunction::new(fid, AgentId(i), AgentId(j), Expr::quadratic(a, b, c))
        })
        .collect();
    Ok(CdcopInstance::try_new(n, vec![domain; n], Objective::Min, functions)?)
}

fn is_connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = stack.pop() {
        for &w in &adj[u] {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                stack.push(w);
            }
        }
    }
    count == n
}
