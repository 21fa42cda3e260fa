//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod golden;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use pcd::benchgen::{generate, BenchSpec, Family};
use pcd::experiment::{read_trace, run_experiment, ExperimentConfig, InstanceSource, Variant};
use pcd::expr::Expr;
use pcd::model::{AgentId, CdcopInstance, CostFunction, Domain, Objective};
use pcd::oracle::{approx_eq_rel, centralized_fitness, check_anytime, check_anytime_for};
use pcd::pseudo_tree::{build_bfs, PseudoTree};
use pcd::rng::derive_seed;
use pcd::runtime::{check_payload_bound, expected_counts, payload_bound};
use pcd::solver::{inertia_weight, solve, InertiaSchedule, RunTrace, Solver, SwarmConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Check<'a> = Box<dyn FnOnce() -> Outcome + 'a>;

const SUITE_PARTICLES: usize = 50;
const SUITE_CYCLES: usize = 200;
const SUITE_INSTANCES: usize = 25;
const SUITE_SEEDS: usize = 20;

fn suite_config(seed: u64) -> SwarmConfig {
    SwarmConfig { particles: SUITE_PARTICLES, max_cycles: SUITE_CYCLES, seed, ..SwarmConfig::default() }
}

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn first_few(errors: &[String]) -> String {
    let shown: Vec<&str> = errors.iter().take(3).map(String::as_str).collect();
    format!("{} violations, e.g. {}", errors.len(), shown.join("; "))
}

// criterion 1

fn golden_trace() -> Outcome {
    use golden::*;
    let start = Instant::now();
    let o = run_one_cycle();
    let mut bad = Vec::new();
    let mut checked = 0;
    let mut cmp = |what: String, got: f64, want: f64, dp: i32| {
        checked += 1;
        if round_to(got, dp) != want {
            bad.push(format!("{what}: got {got}, want {want}"));
        }
    };
    for i in 0..4 {
        for k in 0..4 {
            cmp(format!("local a{i} p{k}"), o.local[i][k], LOCAL_FITNESS[i][k], 2);
            cmp(format!("fitness a{i} p{k}"), o.fitness[i][k], FITNESS[i][k], 2);
            cmp(format!("b_p a{i} p{k}"), o.b_p[i][k], B_P[i][k], 3);
            cmp(format!("v a{i} p{k}"), o.v[i][k], UPDATED[i][k].0, 2);
            cmp(format!("x a{i} p{k}"), o.x[i][k], UPDATED[i][k].1, 2);
        }
    }
    if o.improved != [0, 1, 2, 3] {
        bad.push(format!("PB = {:?}", o.improved));
    }
    if o.star != Some(2) {
        bad.push(format!("P* = {:?}", o.star));
    }
    if o.g_best != [Some(0.0), Some(1.0), Some(2.0), Some(-2.0)] {
        bad.push(format!("g_best = {:?}", o.g_best));
    }
    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(1) {
        bad.push(format!("took {elapsed:?}"));
    }
    ensure(bad.is_empty(), if bad.is_empty() { format!("{checked} values, {elapsed:.2?}") } else { first_few(&bad) })
}

// criteria 2, 4 and 5 share one suite of runs

struct Suite {
    runs: usize,
    elapsed: Duration,
    anytime: Vec<String>,
    counts: Vec<String>,
    bound: Vec<String>,
    /// Largest sent/bound ratio seen for any agent in any cycle.
    peak_ratio: f64,
}

fn families() -> [Family; 4] {
    [
        Family::ErdosRenyi { n: 50, p: 0.2 },
        Family::RandomTree { n: 50 },
        Family::BarabasiAlbert { n: 100, m: 3 },
        Family::SensorGrid { rows: 8, cols: 8 },
    ]
}

fn audit(label: &str, inst: &CdcopInstance, tree: &PseudoTree, trace: &RunTrace, suite: &mut Suite) {
    if let Err(i) = check_anytime(&trace.g_best_internal()) {
        suite.anytime.push(format!("{label}: internal cost rose at cycle {}", i + 1));
    }
    if let Err(i) = check_anytime_for(inst.objective(), &trace.g_best_costs()) {
        suite.anytime.push(format!("{label}: reported cost worsened at cycle {}", i + 1));
    }
    let want = expected_counts(tree);
    for r in &trace.records {
        let s = &r.stats;
        if (s.value, s.cost, s.best) != want {
            suite.counts.push(format!("{label} cycle {}: {}/{}/{} vs {want:?}", s.cycle, s.value, s.cost, s.best));
        }
        for (i, t) in s.per_agent.iter().enumerate() {
            let bound = payload_bound(tree, AgentId(i), SUITE_PARTICLES);
            suite.peak_ratio = suite.peak_ratio.max(t.scalars as f64 / bound as f64);
        }
    }
    if let Err((cycle, agent, sent, bound)) = check_payload_bound(&trace.cycle_stats(), tree, SUITE_PARTICLES) {
        suite.bound.push(format!("{label} cycle {cycle}: {agent} sent {sent} > {bound}"));
    }
}

fn run_suite() -> Result<Suite, String> {
    let start = Instant::now();
    let mut suite =
        Suite { runs: 0, elapsed: Duration::ZERO, anytime: vec![], counts: vec![], bound: vec![], peak_ratio: 0.0 };
    for (f, family) in families().into_iter().enumerate() {
        for i in 0..SUITE_INSTANCES {
            let spec = BenchSpec::new(family, derive_seed(&[0xACCE, f as u64, i as u64]));
            let inst = generate(&spec).map_err(|e| format!("{}: {e}", family.name()))?;
            let tree = build_bfs(&inst, AgentId(0)).map_err(|e| e.to_string())?;
            for s in 0..SUITE_SEEDS {
                let seed = derive_seed(&[f as u64, i as u64, s as u64]);
                for variant in Variant::ALL {
                    let config = variant.configure(&suite_config(seed));
                    let trace = solve(&inst, &tree, &config).map_err(|e| e.to_string())?;
                    let label = format!("{} #{i} seed {s} {}", family.name(), variant.name());
                    audit(&label, &inst, &tree, &trace, &mut suite);
                    suite.runs += 1;
                }
            }
        }
    }
    suite.elapsed = start.elapsed();
    Ok(suite)
}

fn anytime(suite: &Suite) -> Outcome {
    let mut bad = suite.anytime.clone();
    if suite.elapsed >= Duration::from_secs(300) {
        bad.push(format!("suite took {:.1?}", suite.elapsed));
    }
    ensure(
        bad.is_empty(),
        if bad.is_empty() { format!("{} traces, {:.1?}", suite.runs, suite.elapsed) } else { first_few(&bad) },
    )
}

// criterion 3

fn fitness_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut bad = Vec::new();
    let mut worst: f64 = 0.0;
    let probes = 100;
    for probe in 0..probes {
        let family = match probe % 4 {
            0 => Family::ErdosRenyi { n: rng.gen_range(5..30), p: 0.3 },
            1 => Family::RandomTree { n: rng.gen_range(3..30) },
            2 => Family::BarabasiAlbert { n: rng.gen_range(5..30), m: 2 },
            _ => Family::SensorGrid { rows: rng.gen_range(2..5), cols: rng.gen_range(2..5) },
        };
        let inst = generate(&BenchSpec::new(family, rng.gen())).map_err(|e| e.to_string())?;
        let root = AgentId(rng.gen_range(0..inst.num_agents()));
        let tree = build_bfs(&inst, root).map_err(|e| e.to_string())?;
        let config = SwarmConfig {
            particles: rng.gen_range(2..40),
            max_cycles: rng.gen_range(1..60),
            crossover: rng.gen(),
            seed: rng.gen(),
            ..SwarmConfig::default()
        };
        let cycle = rng.gen_range(1..=config.max_cycles);
        let k = rng.gen_range(0..config.particles);
        let mut seen = None;
        Solver::new(&inst, &tree, config)
            .map_err(|e| e.to_string())?
            .run_observed(|snap| {
                if snap.cycle == cycle {
                    seen = Some((snap.root_fitness()[k], snap.evaluated_particle(k)));
                }
            })
            .map_err(|e| e.to_string())?;
        let (root_fitness, particle) = seen.ok_or("probe cycle never observed")?;
        let want = centralized_fitness(&inst, &particle).map_err(|e| e.to_string())?;
        worst = worst.max((root_fitness - want).abs() / want.abs().max(1.0));
        if !approx_eq_rel(root_fitness, want, 1e-9) {
            bad.push(format!(
                "probe {probe} ({}, cycle {cycle}, particle {k}): {root_fitness} vs {want}",
                family.name()
            ));
        }
    }
    ensure(
        bad.is_empty(),
        if bad.is_empty() { format!("{probes} probes, worst relative error {worst:.1e}") } else { first_few(&bad) },
    )
}

// criteria 4 and 5 on the worked example, on top of the suite

fn worked_example_trace() -> Result<(PseudoTree, RunTrace), String> {
    let inst = golden::instance();
    let tree = build_bfs(&inst, AgentId(0)).map_err(|e| e.to_string())?;
    let trace = solve(&inst, &tree, &SwarmConfig { crossover: true, ..suite_config(1) }).map_err(|e| e.to_string())?;
    Ok((tree, trace))
}

fn message_counts(suite: &Suite) -> Outcome {
    let mut bad = suite.counts.clone();
    let (tree, trace) = worked_example_trace()?;
    if expected_counts(&tree) != (8, 3, 3) {
        bad.push(format!("worked example expects {:?}", expected_counts(&tree)));
    }
    for r in &trace.records {
        let s = &r.stats;
        if (s.value, s.cost, s.best) != (8, 3, 3) {
            bad.push(format!("worked example cycle {}: {}/{}/{}", s.cycle, s.value, s.cost, s.best));
        }
    }
    ensure(
        bad.is_empty(),
        if bad.is_empty() {
            format!("{} runs plus worked example at 8/3/3 for {} cycles", suite.runs, trace.records.len())
        } else {
            first_few(&bad)
        },
    )
}

fn message_size(suite: &Suite) -> Outcome {
    let mut bad = suite.bound.clone();
    let (tree, trace) = worked_example_trace()?;
    if let Err((cycle, agent, sent, bound)) = check_payload_bound(&trace.cycle_stats(), &tree, SUITE_PARTICLES) {
        bad.push(format!("worked example cycle {cycle}: {agent} sent {sent} > {bound}"));
    }
    ensure(
        bad.is_empty(),
        if bad.is_empty() {
            format!("bound K(|N|+1+|CH|) with c = 0, peak use {:.1}% of bound", 100.0 * suite.peak_ratio)
        } else {
            first_few(&bad)
        },
    )
}

// criterion 6

fn sphere_sanity() -> Outcome {
    let sphere = Expr::x0().pow(2) + Expr::x1().pow(2);
    let inst = CdcopInstance::try_new(
        2,
        vec![Domain::new(-50.0, 50.0); 2],
        Objective::Min,
        vec![CostFunction::new(0, AgentId(0), AgentId(1), sphere)],
    )
    .map_err(|e| e.to_string())?;
    let tree = build_bfs(&inst, AgentId(0)).map_err(|e| e.to_string())?;
    let seeds = 100;
    let mut hits = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..seeds {
        let config = SwarmConfig { particles: 200, max_cycles: 500, seed, ..SwarmConfig::default() };
        let trace = solve(&inst, &tree, &config).map_err(|e| e.to_string())?;
        worst = worst.max(trace.best_cost);
        if trace.best_cost < 1e-2 {
            hits += 1;
        }
    }
    ensure(hits * 100 >= 95 * seeds, format!("{hits}/{seeds} seeds below 1e-2, worst {worst:.2e}"))
}

// criterion 7

fn crossover_benefit() -> Outcome {
    let instances = 25;
    let repeats = 20;
    let mut as_good = 0;
    let mut strictly = 0;
    let (mut sum_pcd, mut sum_x) = (0.0, 0.0);
    for i in 0..instances {
        let inst = generate(&BenchSpec::new(Family::ErdosRenyi { n: 30, p: 0.2 }, derive_seed(&[0xC7, i])))
            .map_err(|e| e.to_string())?;
        let tree = build_bfs(&inst, AgentId(0)).map_err(|e| e.to_string())?;
        let mut means = [0.0; 2];
        for (slot, variant) in Variant::ALL.into_iter().enumerate() {
            for rep in 0..repeats {
                // matched: both variants start from the same seed
                let config = variant.configure(&suite_config(derive_seed(&[0xC7, i, rep])));
                means[slot] += solve(&inst, &tree, &config).map_err(|e| e.to_string())?.best_cost / repeats as f64;
            }
        }
        sum_pcd += means[0];
        sum_x += means[1];
        if means[1] <= means[0] {
            as_good += 1;
        }
        if means[1] < means[0] {
            strictly += 1;
        }
    }
    let detail = format!(
        "crossover at least as good on {as_good}/{instances} ({strictly} strictly better), mean {:.1} vs {:.1}",
        sum_x / instances as f64,
        sum_pcd / instances as f64
    );
    ensure(as_good * 100 >= 60 * instances as usize, detail)
}

// criterion 8

fn read_tree(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).map_err(|e| e.to_string())? {
            let path = entry.map_err(|e| e.to_string())?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, fs::read(&path).map_err(|e| e.to_string())?));
            }
        }
    }
    out.sort();
    Ok(out)
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |name: &str, wall_clock: bool| -> Result<std::path::PathBuf, String> {
        let cfg = ExperimentConfig {
            source: InstanceSource::Generate(BenchSpec::new(Family::ErdosRenyi { n: 12, p: 0.3 }, 8)),
            swarm: SwarmConfig { particles: 20, max_cycles: 50, ..SwarmConfig::default() },
            variants: Variant::ALL.to_vec(),
            num_instances: 3,
            repeats: 3,
            master_seed: 2024,
            root: 0,
            wall_clock,
            output_dir: tmp.path().join(name),
        };
        run_experiment(&cfg).map_err(|e| e.to_string())?;
        Ok(cfg.output_dir)
    };
    let a = read_tree(&run("a", false)?)?;
    let b = read_tree(&run("b", false)?)?;
    let mut bad = Vec::new();
    if a.len() != b.len() {
        bad.push(format!("{} files vs {}", a.len(), b.len()));
    }
    for ((pa, ba), (pb, bb)) in a.iter().zip(&b) {
        if pa != pb || ba != bb {
            bad.push(format!("{pa} differs"));
        }
    }
    // with timings recorded, everything but the elapsed column still matches
    let timed = run("c", true)?;
    for (rel, bytes) in a.iter().filter(|(p, _)| p.ends_with(".csv")) {
        let strip = |rows: Vec<pcd::experiment::TraceRow>| {
            rows.into_iter()
                .map(|r| (r.cycle, r.hops, r.g_best_cost.to_bits(), r.messages_value, r.messages_cost, r.messages_best))
                .collect::<Vec<_>>()
        };
        let plain = strip(read_trace(bytes.as_slice()).map_err(|e| e.to_string())?);
        let with_time =
            strip(read_trace(fs::File::open(timed.join(rel)).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?);
        if plain != with_time {
            bad.push(format!("{rel} differs when timed"));
        }
    }
    let traces = a.iter().filter(|(p, _)| p.ends_with(".csv")).count();
    ensure(
        bad.is_empty(),
        if bad.is_empty() { format!("{} files identical, {traces} traces", a.len()) } else { first_few(&bad) },
    )
}

// criterion 9

fn constriction() -> Outcome {
    let mut bad = Vec::new();
    let mut w = f64::NAN;
    for t in [0, 1, 250, 499] {
        w = inertia_weight(InertiaSchedule::Constriction { phi: 4.1 }, t, 500).map_err(|e| e.to_string())?;
        if (w - 0.7298).abs() > 1e-4 {
            bad.push(format!("cycle {t}: w = {w}"));
        }
    }
    if let Err(e) = SwarmConfig::constriction(4.1).validate() {
        bad.push(e.to_string());
    }
    ensure(bad.is_empty(), if bad.is_empty() { format!("w = {w:.6}") } else { first_few(&bad) })
}

fn guarded<F: FnOnce() -> Outcome>(f: F) -> Outcome {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(p) => Err(format!(
            "panicked: {}",
            p.downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default()
        )),
    }
}

fn main() -> ExitCode {
    let suite_result = match catch_unwind(run_suite) {
        Ok(r) => r,
        Err(_) => Err("suite panicked".to_string()),
    };
    let suite_ref = &suite_result;
    let from_suite = |f: fn(&Suite) -> Outcome| {
        move || match suite_ref {
            Ok(s) => f(s),
            Err(e) => Err(format!("suite failed: {e}")),
        }
    };
    let criteria: Vec<(&str, Check)> = vec![
        ("golden trace on the worked example", Box::new(golden_trace)),
        ("anytime property over the benchmark suite", Box::new(from_suite(anytime))),
        ("root fitness equals centralized fitness", Box::new(fitness_equivalence)),
        ("exact message counts per cycle", Box::new(from_suite(message_counts))),
        ("per-agent payload within bound", Box::new(from_suite(message_size))),
        ("convergence on the sphere", Box::new(sphere_sanity)),
        ("crossover benefit with matched seeds", Box::new(crossover_benefit)),
        ("byte-identical reruns", Box::new(determinism)),
        ("constriction weight", Box::new(constriction)),
    ];
    let mut failed = 0;
    for (n, (title, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let (tag, detail) = match guarded(check) {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} criterion {}: {title} ({detail}; {:.2?})", n + 1, start.elapsed());
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
