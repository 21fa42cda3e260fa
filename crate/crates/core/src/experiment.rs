//! Experiment driver: runs the solver variants over seed ensembles, writes
//! one CSV trace per run and a JSON summary, and formats comparison tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::benchgen::{self, BenchSpec, GenError};
use crate::model::{AgentId, CdcopInstance, ModelError, Objective};
use crate::oracle::check_anytime;
use crate::pseudo_tree::{build_bfs, PseudoTree, TreeError};
use crate::rng::derive_seed;
use crate::runtime::{check_payload_bound, expected_counts};
use crate::solver::{RunTrace, SolverError, SwarmConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Pcd,
    PcdCrossover,
}

impl Variant {
    pub const ALL: [Variant; 2] = [Variant::Pcd, Variant::PcdCrossover];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Pcd => "pcd",
            Variant::PcdCrossover => "pcd_crossover",
        }
    }

    /// Stable tag mixed into run seeds.
    fn tag(self) -> u64 {
        match self {
            Variant::Pcd => 1,
            Variant::PcdCrossover => 2,
        }
    }

    pub fn configure(self, base: &SwarmConfig) -> SwarmConfig {
        SwarmConfig { crossover: self == Variant::PcdCrossover, ..*base }
    }
}

impl std::str::FromStr for Variant {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL.into_iter().find(|v| v.name() == s).ok_or_else(|| ExperimentError::UnknownVariant(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceSource {
    /// Instance files, used in order.
    Files(Vec<PathBuf>),
    /// Generate `num_instances` instances; the `BenchSpec` seed is replaced
    /// by one derived from the master seed and the instance index.
    Generate(BenchSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub source: InstanceSource,
    #[serde(default)]
    pub swarm: SwarmConfig,
    #[serde(default = "all_variants")]
    pub variants: Vec<Variant>,
    #[serde(default = "one")]
    pub num_instances: usize,
    #[serde(default = "one")]
    pub repeats: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub root: usize,
    /// Record elapsed wall-clock time in traces. When off the column is 0,
    /// which makes trace files byte-reproducible.
    #[serde(default = "yes")]
    pub wall_clock: bool,
    pub output_dir: PathBuf,
}

fn all_variants() -> Vec<Variant> {
    Variant::ALL.to_vec()
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error("unknown variant `{0}`")]
    UnknownVariant(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Instance { path: PathBuf, source: ModelError },
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io { path: path.to_path_buf(), source }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.repeats < 1 {
            return Err(ExperimentError::Config("repeats must be at least 1".into()));
        }
        if self.num_instances < 1 {
            return Err(ExperimentError::Config("num_instances must be at least 1".into()));
        }
        if self.variants.is_empty() {
            return Err(ExperimentError::Config("variant list is empty".into()));
        }
        if let InstanceSource::Files(files) = &self.source {
            if files.len() < self.num_instances {
                return Err(ExperimentError::Config(format!(
                    "{} instance files given, {} requested",
                    files.len(),
                    self.num_instances
                )));
            }
        }
        self.swarm.validate().map_err(SolverError::from)?;
        Ok(())
    }

    /// Seed for one run; independent of which other variants are listed.
    pub fn run_seed(&self, instance: usize, repeat: usize, variant: Variant) -> u64 {
        derive_seed(&[self.master_seed, instance as u64, repeat as u64, variant.tag()])
    }

    pub fn instance_seed(&self, instance: usize) -> u64 {
        derive_seed(&[self.master_seed, instance as u64])
    }

    pub fn load_instance(&self, index: usize) -> Result<CdcopInstance, ExperimentError> {
        match &self.source {
            InstanceSource::Files(files) => {
                let path = &files[index];
                let text = fs::read_to_string(path).map_err(io_err(path))?;
                CdcopInstance::from_json(&text)
                    .and_then(CdcopInstance::validated)
                    .map_err(|source| ExperimentError::Instance { path: path.clone(), source })
            }
            InstanceSource::Generate(spec) => {
                let spec = BenchSpec { seed: self.instance_seed(index), ..*spec };
                Ok(benchgen::generate(&spec)?)
            }
        }
    }

    pub fn trace_path(&self, instance: usize, repeat: usize, variant: Variant) -> PathBuf {
        self.output_dir.join("traces").join(format!("inst{instance:03}_rep{repeat:03}_{}.csv", variant.name()))
    }
}

/// One row of a per-run trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub cycle: usize,
    pub elapsed_ms: f64,
    /// Cumulative critical-path message hops.
    pub hops: usize,
    /// Global best cost in the instance's own sign.
    pub g_best_cost: f64,
    pub messages_value: usize,
    pub messages_cost: usize,
    pub messages_best: usize,
}

pub fn trace_rows(trace: &RunTrace, wall_clock: bool) -> Vec<TraceRow> {
    trace
        .records
        .iter()
        .map(|r| TraceRow {
            cycle: r.cycle,
            elapsed_ms: if wall_clock { r.elapsed.as_secs_f64() * 1e3 } else { 0.0 },
            hops: r.cumulative_hops,
            g_best_cost: r.g_best_cost,
            messages_value: r.stats.value,
            messages_cost: r.stats.cost,
            messages_best: r.stats.best,
        })
        .collect()
}

pub fn write_trace<W: io::Write>(rows: &[TraceRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace<R: io::Read>(input: R) -> Result<Vec<TraceRow>, csv::Error> {
    csv::Reader::from_reader(input).deserialize().collect()
}

/// Checks one run against the per-cycle message laws. Returns a description
/// of every violation found.
pub fn audit_run(tree: &PseudoTree, config: &SwarmConfig, trace: &RunTrace) -> Vec<String> {
    let mut out = Vec::new();
    let (value, cost, best) = expected_counts(tree);
    let internal = trace.g_best_internal();
    if let Err(i) = check_anytime(&internal) {
        out.push(format!("global best worsened at cycle {}", trace.records[i].cycle));
    }
    for r in &trace.records {
        let s = &r.stats;
        if (s.value, s.cost, s.best) != (value, cost, best) {
            out.push(format!(
                "cycle {}: counts {}/{}/{} expected {value}/{cost}/{best}",
                s.cycle, s.value, s.cost, s.best
            ));
        }
        if let Err((cycle, agent, sent, bound)) = check_payload_bound(std::slice::from_ref(s), tree, config.particles) {
            out.push(format!("cycle {cycle}: {agent} sent {sent} scalars, bound {bound}"));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    /// Mean global best cost over all runs, per cycle.
    pub mean_cost_per_cycle: Vec<f64>,
    /// Mean final cost over each instance's repeats.
    pub final_mean_per_instance: Vec<f64>,
    pub final_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinRate {
    pub variant: Variant,
    pub against: Variant,
    /// Instances where `variant`'s mean final cost is strictly better.
    pub wins: usize,
    pub ties: usize,
    pub losses: usize,
    /// `wins / instances`.
    pub win_rate: f64,
    /// `(wins + ties) / instances`.
    pub at_least_as_good: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub objective: Objective,
    pub num_instances: usize,
    pub repeats: usize,
    pub cycles: usize,
    pub particles: usize,
    pub variants: BTreeMap<Variant, VariantSummary>,
    pub win_rates: Vec<WinRate>,
    pub runs: usize,
    /// Invariant violations found while auditing runs; empty when all
    /// checks passed.
    pub violations: Vec<String>,
}

impl Summary {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn better(objective: Objective, a: f64, b: f64) -> bool {
    objective.sign() * a < objective.sign() * b
}

/// Runs every (instance, repeat, variant) combination, writing instance
/// files, traces and `summary.json` under the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Summary, ExperimentError> {
    cfg.validate()?;
    let traces_dir = cfg.output_dir.join("traces");
    let instances_dir = cfg.output_dir.join("instances");
    fs::create_dir_all(&traces_dir).map_err(io_err(&traces_dir))?;
    fs::create_dir_all(&instances_dir).map_err(io_err(&instances_dir))?;

    let mut variants = cfg.variants.clone();
    variants.sort();
    variants.dedup();

    let mut objective = Objective::Min;
    let mut sums: BTreeMap<Variant, Vec<f64>> = BTreeMap::new();
    let mut finals: BTreeMap<Variant, Vec<f64>> = BTreeMap::new();
    let mut violations = Vec::new();
    let mut runs = 0;

    for i in 0..cfg.num_instances {
        let inst = cfg.load_instance(i)?;
        objective = inst.objective();
        let inst_path = instances_dir.join(format!("inst{i:03}.json"));
        fs::write(&inst_path, inst.to_json()).map_err(io_err(&inst_path))?;
        let tree = build_bfs(&inst, AgentId(cfg.root))?;
        for &variant in &variants {
            let mut final_sum = 0.0;
            for rep in 0..cfg.repeats {
                let config = SwarmConfig { seed: cfg.run_seed(i, rep, variant), ..variant.configure(&cfg.swarm) };
                let trace = crate::solver::solve(&inst, &tree, &config)?;
                for v in audit_run(&tree, &config, &trace) {
                    violations.push(format!("instance {i}, repeat {rep}, {}: {v}", variant.name()));
                }
                let costs = trace.g_best_costs();
                let acc = sums.entry(variant).or_insert_with(|| vec![0.0; costs.len()]);
                for (a, c) in acc.iter_mut().zip(&costs) {
                    *a += c;
                }
                final_sum += trace.best_cost;

                let path = cfg.trace_path(i, rep, variant);
                let file = fs::File::create(&path).map_err(io_err(&path))?;
                write_trace(&trace_rows(&trace, cfg.wall_clock), io::BufWriter::new(file))
                    .map_err(|source| ExperimentError::Csv { path: path.clone(), source })?;
                runs += 1;
            }
            finals.entry(variant).or_default().push(final_sum / cfg.repeats as f64);
        }
    }

    let per_variant_runs = (cfg.num_instances * cfg.repeats) as f64;
    let summaries: BTreeMap<Variant, VariantSummary> = variants
        .iter()
        .map(|&v| {
            let per_instance = finals[&v].clone();
            let final_mean = per_instance.iter().sum::<f64>() / per_instance.len() as f64;
            let curve = sums[&v].iter().map(|s| s / per_variant_runs).collect();
            (v, VariantSummary { mean_cost_per_cycle: curve, final_mean_per_instance: per_instance, final_mean })
        })
        .collect();

    let mut win_rates = Vec::new();
    for &a in &variants {
        for &b in &variants {
            if a == b {
                continue;
            }
            let (fa, fb) = (&summaries[&a].final_mean_per_instance, &summaries[&b].final_mean_per_instance);
            let wins = fa.iter().zip(fb).filter(|(x, y)| better(objective, **x, **y)).count();
            let losses = fa.iter().zip(fb).filter(|(x, y)| better(objective, **y, **x)).count();
            let ties = fa.len() - wins - losses;
            let n = fa.len() as f64;
            win_rates.push(WinRate {
                variant: a,
                against: b,
                wins,
                ties,
                losses,
                win_rate: wins as f64 / n,
                at_least_as_good: (wins + ties) as f64 / n,
            });
        }
    }

    let summary = Summary {
        objective,
        num_instances: cfg.num_instances,
        repeats: cfg.repeats,
        cycles: cfg.swarm.max_cycles,
        particles: cfg.swarm.particles,
        variants: summaries,
        win_rates,
        runs,
        violations,
    };
    let path = cfg.output_dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(summary)
}

/// Text table of mean final cost per variant, one row per setting. With two
/// or more columns a final column gives the relative improvement of the
/// last variant over the first, `(base − improved) / |base|` for
/// minimization (sign flipped for maximization).
pub fn emit_anytime_table(rows: &[(&str, &Summary)], columns: &[&str]) -> Result<String, ExperimentError> {
    let variants: Vec<Variant> = columns.iter().map(|c| c.parse()).collect::<Result<_, _>>()?;
    let mut table: Vec<Vec<String>> = Vec::new();
    let mut header = vec!["setting".to_string()];
    header.extend(columns.iter().map(|c| c.to_string()));
    if variants.len() >= 2 {
        header.push("improvement".into());
    }
    table.push(header);
    for (setting, summary) in rows {
        let mut line = vec![setting.to_string()];
        let mut means = Vec::new();
        for v in &variants {
            let s = summary.variants.get(v).ok_or_else(|| ExperimentError::UnknownVariant(v.name().into()))?;
            means.push(s.final_mean);
            line.push(format!("{:.4}", s.final_mean));
        }
        if variants.len() >= 2 {
            line.push(format!("{:.2}%", 100.0 * improvement(summary.objective, means[0], means[means.len() - 1])));
        }
        table.push(line);
    }
    let widths: Vec<usize> = (0..table[0].len()).map(|c| table.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for (i, row) in table.iter().enumerate() {
        let cells: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        if i == 0 {
            let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
        }
    }
    Ok(out)
}

/// Relative improvement of `improved` over `base`; positive is better.
pub fn improvement(objective: Objective, base: f64, improved: f64) -> f64 {
    objective.sign() * (base - improved) / base.abs()
}
