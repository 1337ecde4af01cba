use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use adaseq::WeightedDigraph;
use tempfile::TempDir;

fn adaseq(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adaseq"))
        .current_dir(dir)
        .env_remove("ADASEQ_JOBS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const FIVE_USERS: &str = "user_id,item,position\n\
u1,y,0\nu1,z,1\nu1,p,2\n\
u2,y,0\nu2,z,1\n\
u3,z,0\nu3,p,1\nu3,y,2\n\
u4,p,0\nu4,y,1\nu4,x,2\n\
u5,z,0\nu5,p,1\nu5,x,2\n";

#[test]
fn build_graph_two_user_log() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("log.csv"),
        "user_id,item,position\nu1,a,0\nu1,b,1\nu2,a,0\n",
    )
    .unwrap();
    let out = adaseq(
        dir.path(),
        &[
            "build-graph",
            "--task",
            "purchase",
            "--input",
            "log.csv",
            "--out",
            "g.tsv",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let g = WeightedDigraph::read_tsv(fs::read(dir.path().join("g.tsv")).unwrap().as_slice()).unwrap();
    let weights: Vec<(String, String, f64)> = g
        .edges()
        .iter()
        .map(|e| {
            (
                g.label(e.src()).unwrap().into(),
                g.label(e.dst()).unwrap().into(),
                e.weight,
            )
        })
        .collect();
    assert_eq!(
        weights,
        [
            ("a".into(), "a".into(), 1.0),
            ("a".into(), "b".into(), 0.5),
            ("b".into(), "b".into(), 0.5)
        ]
    );
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("g.tsv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "build-graph");
    assert_eq!(manifest["outputs"][0], "g.tsv");
    assert!(manifest["version"].is_string() && manifest["wall_clock_secs"].is_number());
}

#[test]
fn build_graph_empty_and_malformed() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("empty.csv"), "").unwrap();
    let out = adaseq(
        dir.path(),
        &[
            "build-graph",
            "--task",
            "purchase",
            "--input",
            "empty.csv",
            "--out",
            "e.tsv",
        ],
    );
    assert_eq!(code(&out), 0);
    assert_eq!(fs::read_to_string(dir.path().join("e.tsv")).unwrap(), "#vertices 0\n");

    fs::write(
        dir.path().join("bad.csv"),
        "user_id,item,position\nu1,a,0\nu1,b,later\n",
    )
    .unwrap();
    let out = adaseq(
        dir.path(),
        &[
            "build-graph",
            "--task",
            "purchase",
            "--input",
            "bad.csv",
            "--out",
            "b.tsv",
        ],
    );
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn build_navigation_graph_needs_links() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("paths.tsv"), "p1\ta b c\np2\ta b\n").unwrap();
    let out = adaseq(
        dir.path(),
        &[
            "build-graph",
            "--task",
            "navigation",
            "--input",
            "paths.tsv",
            "--out",
            "n.tsv",
        ],
    );
    assert_eq!(code(&out), 1);
    fs::write(dir.path().join("links.csv"), "src,dst\na,b\nb,c\n").unwrap();
    let out = adaseq(
        dir.path(),
        &[
            "build-graph",
            "--task",
            "navigation",
            "--input",
            "paths.tsv",
            "--links",
            "links.csv",
            "--out",
            "n.tsv",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let g = WeightedDigraph::read_tsv(fs::read(dir.path().join("n.tsv")).unwrap().as_slice()).unwrap();
    assert_eq!(g.edge_count(), 2);
    assert!(g.edges().iter().all(|e| e.weight == 1.0 && e.src() != e.dst()));
}

fn run_purchase(dir: &Path, out: &str, extra: &[&str]) -> Output {
    let mut args = vec![
        "run",
        "--task",
        "purchase",
        "--input",
        "log.csv",
        "--policies",
        "frequency,greedy,adaptive-greedy",
        "--g",
        "1",
        "--k",
        "3",
        "--min-count",
        "1",
        "--out",
        out,
    ];
    args.extend_from_slice(extra);
    adaseq(dir, &args)
}

#[test]
fn run_is_deterministic_and_writes_one_row_per_trial() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("log.csv"), FIVE_USERS).unwrap();
    for name in ["a.csv", "b.csv"] {
        let out = run_purchase(dir.path(), name, &["--seed", "7", "--trials", "5", "--jobs", "2"]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.csv")).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert!(!text.contains('\r'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "trial,policy,users,skipped,accuracy,sequence,relevance");
    for policy in ["frequency", "greedy", "adaptive-greedy"] {
        assert_eq!(lines.iter().filter(|l| l.split(',').nth(1) == Some(policy)).count(), 5);
    }
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("a.csv.summary.json")).unwrap()).unwrap();
    assert_eq!(summary["policies"].as_array().unwrap().len(), 3);
    assert_eq!(summary["config"]["seed"], 7);
    assert!(dir.path().join("a.csv.manifest.json").exists());
}

#[test]
fn run_config_file_with_flag_override() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("log.csv"), FIVE_USERS).unwrap();
    fs::write(
        dir.path().join("cfg.json"),
        r#"{"task": "purchase", "g": 1, "k": 3, "trials": 3, "seed": 7, "min_count": 1}"#,
    )
    .unwrap();
    let out = adaseq(
        dir.path(),
        &[
            "run",
            "--config",
            "cfg.json",
            "--trials",
            "2",
            "--input",
            "log.csv",
            "--policies",
            "frequency",
            "--out",
            "r.csv",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert_eq!(rows.lines().count(), 3);
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("r.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"], "cfg.json");
    assert_eq!(manifest["seed"], 7);

    fs::write(dir.path().join("typo.json"), r#"{"task": "purchase", "budget": 3}"#).unwrap();
    let out = adaseq(
        dir.path(),
        &[
            "run",
            "--config",
            "typo.json",
            "--input",
            "log.csv",
            "--policies",
            "frequency",
            "--out",
            "t.csv",
        ],
    );
    assert_eq!(code(&out), 1);
}

#[test]
fn run_with_oversized_prefix_warns() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("log.csv"), FIVE_USERS).unwrap();
    let out = adaseq(
        dir.path(),
        &[
            "run",
            "--task",
            "purchase",
            "--input",
            "log.csv",
            "--policies",
            "frequency",
            "--g",
            "10",
            "--min-count",
            "1",
            "--out",
            "r.csv",
        ],
    );
    assert_eq!(code(&out), 0);
    assert!(stderr(&out).contains("warning"));
    let rows = fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert!(rows.lines().skip(1).all(|l| l.split(',').nth(2) == Some("0")));
}

#[test]
fn run_rejects_unknown_policy() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("log.csv"), FIVE_USERS).unwrap();
    let out = adaseq(
        dir.path(),
        &[
            "run",
            "--task",
            "purchase",
            "--input",
            "log.csv",
            "--policies",
            "greedy,oracle",
            "--out",
            "r.csv",
        ],
    );
    assert_eq!(code(&out), 2);
    assert!(!dir.path().join("r.csv").exists());
}

#[test]
fn verify_campaign_rows() {
    let dir = TempDir::new().unwrap();
    let out = adaseq(
        dir.path(),
        &[
            "verify",
            "--instances",
            "200",
            "--max-vertices",
            "6",
            "--seed",
            "0",
            "--out",
            "v.csv",
            "--jobs",
            "4",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("v.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "seed,n,edges,d_in,gamma_hat,greedy,opt,bound,ratio,holds");
    assert_eq!(lines.len(), 201);
    assert!(lines[1..].iter().all(|l| l.ends_with(",true")));

    let out = adaseq(dir.path(), &["verify", "--instances", "0"]);
    assert_eq!(code(&out), 0);
    assert_eq!(
        stdout(&out),
        "seed,n,edges,d_in,gamma_hat,greedy,opt,bound,ratio,holds\n"
    );

    let out = adaseq(dir.path(), &["verify", "--max-vertices", "12"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn verify_is_deterministic_across_job_counts() {
    let dir = TempDir::new().unwrap();
    let one = adaseq(dir.path(), &["verify", "--instances", "20", "--seed", "5", "--hyper"]);
    let four = adaseq(
        dir.path(),
        &["--jobs", "4", "verify", "--instances", "20", "--seed", "5", "--hyper"],
    );
    assert_eq!(code(&one), 0, "{}", stderr(&one));
    assert_eq!(one.stdout, four.stdout);
}

const MOVIE_TSV: &str = "#vertices 3\n0\t0\t1\n1\t1\t1\n2\t2\t1\n0\t1\t1\n0\t2\t1\n1\t2\t1\n";

fn gamma_line(out: &Output) -> f64 {
    let text = stdout(out);
    let line = text
        .lines()
        .find(|l| l.starts_with("gamma_hat "))
        .expect("gamma_hat line");
    line["gamma_hat ".len()..].parse().unwrap()
}

#[test]
fn estimate_gamma_examples() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("movie.tsv"), MOVIE_TSV).unwrap();
    let out = adaseq(
        dir.path(),
        &[
            "estimate-gamma",
            "--graph",
            "movie.tsv",
            "--utility",
            "counting",
            "--q",
            "0.5",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(gamma_line(&out) <= 0.5);
    assert!(stdout(&out).lines().any(|l| l.starts_with("witness {")));

    let out = adaseq(
        dir.path(),
        &[
            "estimate-gamma",
            "--graph",
            "movie.tsv",
            "--utility",
            "linear",
            "--states",
            "1,0,1",
            "--out",
            "g.json",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("gamma_hat 1.000000"));
    let saved: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("g.json")).unwrap()).unwrap();
    assert_eq!(saved["gamma_hat"], 1.0);

    fs::write(dir.path().join("one.tsv"), "#vertices 2\n0\t1\t0.7\n").unwrap();
    let out = adaseq(dir.path(), &["estimate-gamma", "--graph", "one.tsv", "--q", "0.3"]);
    assert_eq!(gamma_line(&out), 1.0);

    fs::write(dir.path().join("h.txt"), "#vertices 3\n0 1 2\n1 2\n").unwrap();
    let out = adaseq(
        dir.path(),
        &[
            "estimate-gamma",
            "--graph",
            "h.txt",
            "--hyper",
            "--utility",
            "linear",
            "--states",
            "1,1,1",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(gamma_line(&out), 1.0);

    let out = adaseq(
        dir.path(),
        &["estimate-gamma", "--graph", "movie.tsv", "--probs", "0.5,0.5"],
    );
    assert_eq!(code(&out), 1);
}

#[test]
fn estimate_gamma_guard() {
    let dir = TempDir::new().unwrap();
    let mut tsv = String::from("#vertices 4\n");
    for s in 0..4 {
        for d in 0..3 {
            tsv.push_str(&format!("{s}\t{d}\t0.5\n"));
        }
    }
    fs::write(dir.path().join("big.tsv"), tsv).unwrap();
    let out = adaseq(dir.path(), &["estimate-gamma", "--graph", "big.tsv"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

fn solve(dir: &Path, edges: &str, k: &str) -> String {
    fs::write(dir.join("g.txt"), edges).unwrap();
    let out = adaseq(
        dir,
        &["reduce-dks", "--input", "g.txt", "--out", "d.tsv", "--solve", "--k", k],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    stdout(&out).lines().next().unwrap().to_string()
}

#[test]
fn reduce_dks_examples() {
    let dir = TempDir::new().unwrap();
    assert_eq!(solve(dir.path(), "0 1\n1 2\n0 2\n", "3"), "max_f 3");
    let g = WeightedDigraph::read_tsv(fs::read(dir.path().join("d.tsv")).unwrap().as_slice()).unwrap();
    assert_eq!(g.edge_count(), 6);
    assert_eq!(solve(dir.path(), "0 1\n1 2\n", "2"), "max_f 1");
    assert_eq!(solve(dir.path(), "#vertices 4\n", "3"), "max_f 0");

    fs::write(dir.path().join("loop.txt"), "1 1\n").unwrap();
    let out = adaseq(dir.path(), &["reduce-dks", "--input", "loop.txt", "--out", "d.tsv"]);
    assert_eq!(code(&out), 1);
    let out = adaseq(
        dir.path(),
        &["reduce-dks", "--input", "loop.txt", "--out", "d.tsv", "--solve"],
    );
    assert_eq!(code(&out), 2);
}
