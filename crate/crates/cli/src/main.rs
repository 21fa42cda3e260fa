use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use pcd::benchgen::{generate, BenchSpec, Family};
use pcd::experiment::{
    audit_run, emit_anytime_table, run_experiment, trace_rows, write_trace, ExperimentConfig, InstanceSource, Variant,
};
use pcd::model::{AgentId, Assignment, CdcopInstance, Domain};
use pcd::oracle::{centralized_fitness, grid_optimum, GridSearchSpec};
use pcd::pseudo_tree::build_bfs;
use pcd::rng::derive_seed;
use pcd::runtime::write_message_log;
use pcd::solver::{InertiaSchedule, Solver, SwarmConfig};

/// Particle-swarm solvers for continuous DCOPs.
#[derive(Parser)]
#[command(name = "pcd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate benchmark instance files.
    Gen(GenArgs),
    /// Solve one instance and report the best assignment found.
    Solve(SolveArgs),
    /// Run variants over an instance ensemble and write traces plus a summary.
    Experiment(ExperimentArgs),
    /// Brute-force lattice optimum of a small instance.
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyKind {
    ErdosRenyi,
    RandomTree,
    BarabasiAlbert,
    SensorGrid,
}

#[derive(Args)]
struct FamilyArgs {
    #[arg(long, value_enum)]
    family: Option<FamilyKind>,
    /// Number of agents (all families except the sensor grid).
    #[arg(long)]
    n: Option<usize>,
    /// Edge probability for Erdős–Rényi graphs.
    #[arg(long, default_value_t = 0.2)]
    p: f64,
    /// Edges added per new node for Barabási–Albert graphs.
    #[arg(long, default_value_t = 3)]
    m: usize,
    #[arg(long, default_value_t = 8)]
    rows: usize,
    #[arg(long, default_value_t = 8)]
    cols: usize,
    /// Domain lower bound; needs --ub as well.
    #[arg(long, requires = "ub", allow_hyphen_values = true)]
    lb: Option<f64>,
    #[arg(long, requires = "lb", allow_hyphen_values = true)]
    ub: Option<f64>,
    #[arg(long, default_value_t = -5.0, allow_hyphen_values = true)]
    coeff_min: f64,
    #[arg(long, default_value_t = 5.0, allow_hyphen_values = true)]
    coeff_max: f64,
}

impl FamilyArgs {
    fn spec(&self, seed: u64) -> Result<Option<BenchSpec>> {
        let Some(kind) = self.family else { return Ok(None) };
        let n = || self.n.context("--n is required for this family");
        let family = match kind {
            FamilyKind::ErdosRenyi => Family::ErdosRenyi { n: n()?, p: self.p },
            FamilyKind::RandomTree => Family::RandomTree { n: n()? },
            FamilyKind::BarabasiAlbert => Family::BarabasiAlbert { n: n()?, m: self.m },
            FamilyKind::SensorGrid => Family::SensorGrid { rows: self.rows, cols: self.cols },
        };
        let spec = BenchSpec {
            family,
            domain: self.lb.zip(self.ub).map(|(lb, ub)| Domain::new(lb, ub)),
            coeff_range: (self.coeff_min, self.coeff_max),
            seed,
        };
        spec.validate()?;
        Ok(Some(spec))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum InertiaKind {
    Adaptive,
    AdaptiveLiteral,
    Fixed,
    Constriction,
}

/// Swarm settings. Each flag overrides the matching key of `--swarm-config`, or
/// the default when no file is given.
#[derive(Args)]
struct SwarmArgs {
    /// JSON file with swarm settings.
    #[arg(long = "swarm-config")]
    swarm_config: Option<PathBuf>,
    #[arg(long)]
    particles: Option<usize>,
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    c2: Option<f64>,
    #[arg(long, value_enum)]
    inertia: Option<InertiaKind>,
    /// Weight for the fixed schedule.
    #[arg(long)]
    w: Option<f64>,
    #[arg(long)]
    w_max: Option<f64>,
    #[arg(long)]
    w_min: Option<f64>,
    /// Constriction φ; sets c1 = c2 = φ/2 unless they are given.
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long)]
    max_successes: Option<u32>,
    #[arg(long)]
    max_failures: Option<u32>,
    #[arg(long)]
    cycles: Option<usize>,
    #[arg(long)]
    crossover: bool,
}

impl SwarmArgs {
    fn apply(&self, base: SwarmConfig) -> Result<SwarmConfig> {
        let mut c = match &self.swarm_config {
            Some(path) => serde_json::from_str(&read(path)?).with_context(|| format!("{}", path.display()))?,
            None => base,
        };
        c.particles = self.particles.unwrap_or(c.particles);
        c.max_successes = self.max_successes.unwrap_or(c.max_successes);
        c.max_failures = self.max_failures.unwrap_or(c.max_failures);
        c.max_cycles = self.cycles.unwrap_or(c.max_cycles);
        c.crossover |= self.crossover;
        let (w_max, w_min) = match c.inertia {
            InertiaSchedule::AdaptiveW { w_max, w_min } | InertiaSchedule::AdaptiveWLiteral { w_max, w_min } => {
                (w_max, w_min)
            }
            _ => (1.4, 0.4),
        };
        let (w_max, w_min) = (self.w_max.unwrap_or(w_max), self.w_min.unwrap_or(w_min));
        c.inertia = match self.inertia {
            None => c.inertia,
            Some(InertiaKind::Adaptive) => InertiaSchedule::AdaptiveW { w_max, w_min },
            Some(InertiaKind::AdaptiveLiteral) => InertiaSchedule::AdaptiveWLiteral { w_max, w_min },
            Some(InertiaKind::Fixed) => InertiaSchedule::Fixed { w: self.w.context("--inertia fixed needs --w")? },
            Some(InertiaKind::Constriction) => {
                let phi = self.phi.unwrap_or(4.1);
                c.c1 = phi / 2.0;
                c.c2 = phi / 2.0;
                InertiaSchedule::Constriction { phi }
            }
        };
        c.c1 = self.c1.unwrap_or(c.c1);
        c.c2 = self.c2.unwrap_or(c.c2);
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of instances. With more than one, instance i uses a seed
    /// derived from --seed and i, matching `experiment --master-seed`.
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Output file for a single instance, or directory for several.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    #[command(flatten)]
    swarm: SwarmArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0)]
    root: usize,
    /// Write the per-cycle trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write every message as CSV.
    #[arg(long)]
    message_log: Option<PathBuf>,
    /// Print the pseudo-tree edge list before solving.
    #[arg(long)]
    dump_tree: bool,
    /// Leave the elapsed column of the trace at zero.
    #[arg(long)]
    no_wall_clock: bool,
    /// Print the effective swarm configuration and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON experiment configuration; flags below override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Instance files to use instead of generating.
    #[arg(long, num_args = 1.., conflicts_with = "family")]
    instances: Vec<PathBuf>,
    #[command(flatten)]
    family: FamilyArgs,
    #[command(flatten)]
    swarm: SwarmArgs,
    #[arg(long)]
    num_instances: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Comma-separated list of `pcd`, `pcd_crossover`.
    #[arg(long, value_delimiter = ',')]
    variants: Vec<Variant>,
    #[arg(long)]
    master_seed: Option<u64>,
    #[arg(long)]
    root: Option<usize>,
    #[arg(long)]
    no_wall_clock: bool,
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args)]
struct OracleArgs {
    instance: PathBuf,
    #[arg(long, default_value_t = 21)]
    points: usize,
    #[arg(long, default_value_t = 8)]
    max_dims: usize,
    /// Also print the cost of this comma-separated assignment.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    assignment: Vec<f64>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_instance(path: &Path) -> Result<CdcopInstance> {
    CdcopInstance::from_json(&read(path)?)
        .and_then(CdcopInstance::validated)
        .with_context(|| format!("loading {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn gen(args: GenArgs) -> Result<bool> {
    if args.count == 0 {
        bail!("--count must be at least 1");
    }
    let Some(spec) = args.family.spec(args.seed)? else { bail!("--family is required") };
    if args.count == 1 {
        let inst = generate(&spec)?;
        create(&args.out)?.write_all(inst.to_json().as_bytes())?;
        println!("{}", args.out.display());
        return Ok(true);
    }
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    for i in 0..args.count {
        let inst = generate(&BenchSpec { seed: derive_seed(&[args.seed, i as u64]), ..spec })?;
        let path = args.out.join(format!("inst{i:03}.json"));
        create(&path)?.write_all(inst.to_json().as_bytes())?;
        println!("{}", path.display());
    }
    Ok(true)
}

fn solve(args: SolveArgs) -> Result<bool> {
    let mut config = args.swarm.apply(SwarmConfig::default())?;
    config.seed = args.seed.unwrap_or(config.seed);
    if args.print_config {
        println!("{}", serde_json::to_string_pretty(&config)?);
        return Ok(true);
    }
    let inst = load_instance(&args.instance)?;
    if args.root >= inst.num_agents() {
        bail!("root {} out of range for {} agents", args.root, inst.num_agents());
    }
    let tree = build_bfs(&inst, AgentId(args.root))?;
    if args.dump_tree {
        print!("{}", tree.dump_edges());
    }
    let mut solver = Solver::new(&inst, &tree, config)?;
    if args.message_log.is_some() {
        solver = solver.with_message_log();
    }
    let trace = solver.run()?;

    if let Some(path) = &args.trace {
        write_trace(&trace_rows(&trace, !args.no_wall_clock), create(path)?)?;
    }
    if let (Some(path), Some(log)) = (&args.message_log, &trace.message_log) {
        write_message_log(log, create(path)?)?;
    }
    let messages: usize = trace.records.iter().map(|r| r.stats.total()).sum();
    println!("best cost: {}", trace.best_cost);
    println!("assignment: {:?}", trace.best.values());
    println!(
        "cycles: {}, messages: {messages}, hops: {}",
        trace.records.len(),
        trace.records.last().map_or(0, |r| r.cumulative_hops)
    );

    let violations = audit_run(&tree, &config, &trace);
    for v in &violations {
        eprintln!("invariant violated: {v}");
    }
    Ok(violations.is_empty())
}

fn experiment(args: ExperimentArgs) -> Result<bool> {
    let files = (!args.instances.is_empty()).then(|| InstanceSource::Files(args.instances.clone()));
    let generated = args.family.spec(0)?.map(InstanceSource::Generate);
    let source = files.or(generated);
    let mut cfg = match &args.config {
        Some(path) => serde_json::from_str(&read(path)?).with_context(|| format!("{}", path.display()))?,
        None => ExperimentConfig {
            source: source.clone().context("an instance source is required: --instances or --family")?,
            swarm: SwarmConfig::default(),
            variants: Variant::ALL.to_vec(),
            num_instances: args.instances.len().max(1),
            repeats: 1,
            master_seed: 0,
            root: 0,
            wall_clock: true,
            output_dir: args.out.clone().context("--out is required")?,
        },
    };
    if let Some(source) = source {
        cfg.source = source;
    }
    cfg.swarm = args.swarm.apply(cfg.swarm)?;
    if !args.variants.is_empty() {
        cfg.variants = args.variants.clone();
    }
    cfg.num_instances = args.num_instances.unwrap_or(cfg.num_instances);
    cfg.repeats = args.repeats.unwrap_or(cfg.repeats);
    cfg.master_seed = args.master_seed.unwrap_or(cfg.master_seed);
    cfg.root = args.root.unwrap_or(cfg.root);
    cfg.wall_clock &= !args.no_wall_clock;
    if let Some(out) = args.out {
        cfg.output_dir = out;
    }
    if args.print_config {
        println!("{}", serde_json::to_string_pretty(&cfg)?);
        return Ok(true);
    }

    let summary = run_experiment(&cfg)?;
    let columns: Vec<&str> = summary.variants.keys().map(|v| v.name()).collect();
    let setting = match &cfg.source {
        InstanceSource::Files(_) => "files",
        InstanceSource::Generate(spec) => spec.family.name(),
    };
    print!("{}", emit_anytime_table(&[(setting, &summary)], &columns)?);
    for w in &summary.win_rates {
        println!("{} vs {}: {} wins, {} ties, {} losses", w.variant.name(), w.against.name(), w.wins, w.ties, w.losses);
    }
    println!("{} runs written to {}", summary.runs, cfg.output_dir.display());
    for v in &summary.violations {
        eprintln!("invariant violated: {v}");
    }
    Ok(summary.passed())
}

fn oracle(args: OracleArgs) -> Result<bool> {
    let inst = load_instance(&args.instance)?;
    if !args.assignment.is_empty() {
        let asg = Assignment::new(args.assignment.clone());
        let cost = inst.to_original(centralized_fitness(&inst, &asg)?);
        println!("assignment cost: {cost}");
    }
    let opt = grid_optimum(&inst, &GridSearchSpec { points_per_dim: args.points, max_dims: args.max_dims })?;
    println!("lattice optimum: {}", opt.cost);
    println!("assignment: {:?}", opt.assignment.values());
    println!("resolution: {}, points visited: {}", opt.resolution, opt.points_visited);
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Solve(a) => solve(a),
        Command::Experiment(a) => experiment(a),
        Command::Oracle(a) => oracle(a),
    };
    let _ = io::stdout().flush();
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
