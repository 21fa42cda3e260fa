use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn pcd(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcd")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn worked_example() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/four_agent.json")
}

#[test]
fn gen_then_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let o = pcd(&["gen", "--family", "random-tree", "--n", "4", "--seed", "9", "-o", "tree.json"], dir.path());
    assert!(o.status.success(), "{o:?}");
    let text = fs::read_to_string(dir.path().join("tree.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["num_agents"], 4);
    assert_eq!(json["functions"].as_array().unwrap().len(), 3);

    let o = pcd(&["oracle", "tree.json", "--points", "5", "--assignment", "0,0,0,0"], dir.path());
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("assignment cost: 0\n"), "{out}");
    assert!(out.contains("points visited: 625"), "{out}");
}

#[test]
fn gen_many_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        let o = pcd(
            &[
                "gen",
                "--family",
                "sensor-grid",
                "--rows",
                "2",
                "--cols",
                "3",
                "--count",
                "3",
                "--seed",
                "5",
                "-o",
                name,
            ],
            dir.path(),
        );
        assert!(o.status.success());
    }
    for i in 0..3 {
        let f = format!("inst{i:03}.json");
        assert_eq!(fs::read(dir.path().join("a").join(&f)).unwrap(), fs::read(dir.path().join("b").join(&f)).unwrap());
    }
    assert_ne!(
        fs::read(dir.path().join("a/inst000.json")).unwrap(),
        fs::read(dir.path().join("a/inst001.json")).unwrap()
    );
}

#[test]
fn oracle_finds_the_worked_example_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let o = pcd(&["oracle", worked_example().to_str().unwrap()], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("lattice optimum: -100\n"));
}

#[test]
fn solve_writes_trace_log_and_tree() {
    let dir = tempfile::tempdir().unwrap();
    let inst = worked_example();
    let o = pcd(
        &[
            "solve",
            inst.to_str().unwrap(),
            "--particles",
            "20",
            "--cycles",
            "40",
            "--crossover",
            "--dump-tree",
            "--trace",
            "out/trace.csv",
            "--message-log",
            "out/log.csv",
            "--no-wall-clock",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.starts_with("0 1 tree\n0 2 tree\n0 3 tree\n2 3 non-tree\n"), "{out}");
    assert!(out.contains("cycles: 40, messages: 560, hops: 120"), "{out}");

    let trace = fs::read_to_string(dir.path().join("out/trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("cycle,elapsed_ms,hops,g_best_cost,messages_value,messages_cost,messages_best"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 40);
    assert!(rows.iter().all(|r| r[1] == "0.0" && r[4..] == ["8", "3", "3"]));
    let costs: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(costs.windows(2).all(|w| w[1] <= w[0]));

    let log = fs::read_to_string(dir.path().join("out/log.csv")).unwrap();
    assert_eq!(log.lines().count(), 1 + 40 * 14);
}

#[test]
fn print_config_merges_flags() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("swarm.json"), r#"{"particles": 7, "max_cycles": 9}"#).unwrap();
    let o = pcd(
        &["solve", "unused.json", "--swarm-config", "swarm.json", "--cycles", "11", "--seed", "4", "--print-config"],
        dir.path(),
    );
    assert!(o.status.success());
    let c: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(c["particles"], 7);
    assert_eq!(c["max_cycles"], 11);
    assert_eq!(c["seed"], 4);
    assert_eq!(c["c1"], 1.49);
    assert_eq!(c["inertia"]["kind"], "adaptive_w");
}

#[test]
fn experiment_reruns_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &str| {
        let args = [
            "experiment",
            "--family",
            "erdos-renyi",
            "--n",
            "8",
            "--p",
            "0.4",
            "--num-instances",
            "2",
            "--repeats",
            "2",
            "--particles",
            "10",
            "--cycles",
            "25",
            "--master-seed",
            "77",
            "--no-wall-clock",
            "-o",
            out,
        ];
        let o = pcd(&args, dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        stdout(&o)
    };
    let (a, b) = (run("a"), run("b"));
    assert_eq!(a.replace(" to a", ""), b.replace(" to b", ""));
    assert!(a.contains("8 runs written"));
    for f in ["summary.json", "traces/inst001_rep001_pcd_crossover.csv", "instances/inst000.json"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn sensor_experiment_reports_positive_utilities() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "experiment",
        "--family",
        "sensor-grid",
        "--rows",
        "2",
        "--cols",
        "2",
        "--repeats",
        "2",
        "--particles",
        "10",
        "--cycles",
        "20",
        "--variants",
        "pcd",
        "-o",
        "s",
    ];
    let o = pcd(&args, dir.path());
    assert!(o.status.success());
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("s/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["objective"], "max");
    let curve = summary["variants"]["pcd"]["mean_cost_per_cycle"].as_array().unwrap();
    let curve: Vec<f64> = curve.iter().map(|c| c.as_f64().unwrap()).collect();
    assert!(curve[0] > 0.0);
    assert!(curve.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn errors_exit_with_status_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 4] = [
        &["solve", "missing.json"],
        &["solve", "x.json", "--particles", "1", "--print-config"],
        &["experiment", "-o", "x"],
        &["gen", "--family", "erdos-renyi", "-o", "x.json"],
    ];
    for args in cases {
        let o = pcd(args, dir.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error: "));
    }
    let o = pcd(&["experiment", "--family", "random-tree", "--n", "3", "--variants", "nope", "-o", "x"], dir.path());
    assert!(!o.status.success());
}
