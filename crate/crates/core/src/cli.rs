//! The `adaseq` command line.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::{
    run_navigation_experiment, run_purchase_experiment, ConfigFields, ExperimentConfig, PolicyKind, Task,
};
use crate::graph::{OrderedHypergraph, WeightedDigraph};
use crate::ingest::{build_navigation_graph, build_purchase_graph, LinkTable, SequenceLog};
use crate::oracle::{
    dks_instance, estimate_gamma, optimal_sequence, run_campaign, CampaignConfig, CampaignRow, Instance, UtilityKind,
    DEFAULT_MAX_SET,
};
use crate::policy::TieBreak;
use crate::states::{EdgeStateRule, Realization, StateDistribution};
use crate::utility::{BundledUtility, CoverageUtility, LinearUtility};

pub const EXIT_INPUT: u8 = 1;
pub const EXIT_GUARD: u8 = 2;
pub const EXIT_VERIFY: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "adaseq",
    version,
    about = "Adaptive sequence recommendation over weighted graphs"
)]
pub struct Cli {
    /// Worker threads for independent instances and users.
    #[arg(long, global = true, env = "ADASEQ_JOBS", default_value_t = 1)]
    pub jobs: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a purchase or navigation graph from a log.
    BuildGraph(BuildGraphArgs),
    /// Run the train/test experiment and write per-trial metrics.
    Run(RunArgs),
    /// Check the approximation bound on seeded random instances.
    Verify(VerifyArgs),
    /// Enumerate the submodularity ratio of a small instance.
    EstimateGamma(GammaArgs),
    /// Bidirect an undirected graph, optionally solving it exactly.
    ReduceDks(DksArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TaskArg {
    Purchase,
    Navigation,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Purchase => Task::Purchase,
            TaskArg::Navigation => Task::Navigation,
        }
    }
}

#[derive(Debug, Args)]
pub struct BuildGraphArgs {
    #[arg(long, value_enum)]
    pub task: TaskArg,
    /// Sequence log (CSV `user_id,item,position` or TSV `user<TAB>items`).
    #[arg(long)]
    pub input: PathBuf,
    /// Link table CSV, required for navigation.
    #[arg(long)]
    pub links: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub min_count: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON experiment config; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub links: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub policies: Vec<PolicyKind>,
    #[arg(long, value_enum)]
    pub task: Option<TaskArg>,
    #[arg(long)]
    pub g: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub split: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub min_count: Option<usize>,
    /// Metrics CSV; the summary goes to the same path with `.summary.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum UtilityArg {
    Coverage,
    Linear,
    Counting,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 200)]
    pub instances: usize,
    #[arg(long, default_value_t = 6)]
    pub max_vertices: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use random ordered hypergraphs instead of digraphs.
    #[arg(long)]
    pub hyper: bool,
    #[arg(long, default_value_t = 3)]
    pub max_rank: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_SET)]
    pub max_set: usize,
    #[arg(long, value_enum, default_value = "coverage")]
    pub utility: UtilityArg,
    /// Draw deterministic states instead of independent Bernoulli ones.
    #[arg(long)]
    pub point_mass: bool,
    /// Report CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RuleArg {
    Start,
    End,
    All,
    Any,
}

impl From<RuleArg> for EdgeStateRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Start => EdgeStateRule::StartVertex,
            RuleArg::End => EdgeStateRule::EndVertex,
            RuleArg::All => EdgeStateRule::AllOf,
            RuleArg::Any => EdgeStateRule::AnyOf,
        }
    }
}

#[derive(Debug, Args)]
pub struct GammaArgs {
    /// Graph file: weighted TSV, or the hypergraph text format with `--hyper`.
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub hyper: bool,
    #[arg(long, value_enum, default_value = "coverage")]
    pub utility: UtilityArg,
    #[arg(long, value_enum, default_value = "start")]
    pub rule: RuleArg,
    /// Probability of state 1, shared by every vertex.
    #[arg(long, conflicts_with_all = ["probs", "states"])]
    pub q: Option<f64>,
    /// Comma-separated per-vertex probabilities of state 1.
    #[arg(long, value_delimiter = ',', conflicts_with = "states")]
    pub probs: Option<Vec<f64>>,
    /// Comma-separated deterministic vertex states.
    #[arg(long, value_delimiter = ',')]
    pub states: Option<Vec<u8>>,
    #[arg(long, default_value_t = DEFAULT_MAX_SET)]
    pub max_set: usize,
    /// Estimate and witness as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DksArgs {
    /// Undirected edges, one `u v` pair per line; `#vertices n` sets the vertex count.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, requires = "k")]
    pub solve: bool,
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    config: Option<String>,
    inputs: Vec<String>,
    outputs: Vec<String>,
    seed: Option<u64>,
    version: &'static str,
    wall_clock_secs: f64,
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn with_suffix(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn write_manifest(out: &Path, manifest: &RunManifest<'_>) -> Result<()> {
    let file = File::create(manifest_path(out))?;
    serde_json::to_writer_pretty(BufWriter::new(file), manifest)?;
    Ok(())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::input(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn read_links(path: Option<&Path>) -> Result<LinkTable> {
    match path {
        Some(p) => LinkTable::parse_csv(open(p)?),
        None => Err(Error::input("navigation needs --links")),
    }
}

fn build_graph(args: &BuildGraphArgs, started: Instant) -> Result<()> {
    let log = SequenceLog::parse(open(&args.input)?)?;
    let mut inputs = vec![display(&args.input)];
    let graph = match args.task {
        TaskArg::Purchase => build_purchase_graph(&log, args.min_count)?,
        TaskArg::Navigation => {
            let links = read_links(args.links.as_deref())?;
            inputs.push(display(args.links.as_deref().expect("checked by read_links")));
            let nav = build_navigation_graph(&log, &links, args.min_count)?;
            if nav.dropped > 0 {
                eprintln!("dropped {} transitions that are not links", nav.dropped);
            }
            nav.graph
        }
    };
    let mut out = create(&args.out)?;
    graph.write_tsv(&mut out)?;
    out.flush()?;
    write_manifest(
        &args.out,
        &RunManifest {
            command: "build-graph",
            config: None,
            inputs,
            outputs: vec![display(&args.out)],
            seed: None,
            version: env!("CARGO_PKG_VERSION"),
            wall_clock_secs: started.elapsed().as_secs_f64(),
        },
    )
}

fn run(args: &RunArgs, started: Instant) -> Result<()> {
    let mut fields: ConfigFields = match &args.config {
        Some(p) => serde_json::from_reader(open(p)?)?,
        None => ConfigFields::default(),
    };
    if let Some(t) = args.task {
        fields.task = Some(t.into());
    }
    fields.g = args.g.or(fields.g);
    fields.k = args.k.or(fields.k);
    fields.split = args.split.or(fields.split);
    fields.trials = args.trials.or(fields.trials);
    fields.seed = args.seed.or(fields.seed);
    fields.min_count = args.min_count.or(fields.min_count);
    let cfg = ExperimentConfig::try_from(fields)?;

    let log = SequenceLog::parse(open(&args.input)?)?;
    let mut inputs = vec![display(&args.input)];
    let report = match cfg.task {
        Task::Purchase => run_purchase_experiment(&log, &cfg, &args.policies)?,
        Task::Navigation => {
            let links = read_links(args.links.as_deref())?;
            inputs.push(display(args.links.as_deref().expect("checked by read_links")));
            run_navigation_experiment(&log, &links, &cfg, &args.policies)?
        }
    };
    if report.rows.iter().all(|r| r.users == 0) {
        eprintln!(
            "warning: no test user has more than g = {} items; the report is empty",
            cfg.g
        );
    }
    let mut out = create(&args.out)?;
    report.write_csv(&mut out)?;
    out.flush()?;
    let summary = with_suffix(&args.out, ".summary.json");
    let mut s = create(&summary)?;
    s.write_all(report.summary_json()?.as_bytes())?;
    s.write_all(b"\n")?;
    s.flush()?;
    write_manifest(
        &args.out,
        &RunManifest {
            command: "run",
            config: args.config.as_deref().map(display),
            inputs,
            outputs: vec![display(&args.out), display(&summary)],
            seed: Some(cfg.seed),
            version: env!("CARGO_PKG_VERSION"),
            wall_clock_secs: started.elapsed().as_secs_f64(),
        },
    )
}

/// Writes the `verify` report: one row per instance.
pub fn write_verify_csv<W: Write>(rows: &[CampaignRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record([
        "seed",
        "n",
        "edges",
        "d_in",
        "gamma_hat",
        "greedy",
        "opt",
        "bound",
        "ratio",
        "holds",
    ])?;
    for row in rows {
        let r = &row.report;
        w.write_record([
            row.seed.to_string(),
            row.n.to_string(),
            row.edges.to_string(),
            r.d_in.to_string(),
            r.gamma_hat.to_string(),
            r.greedy_value.to_string(),
            r.opt_value.to_string(),
            r.bound.to_string(),
            r.ratio.to_string(),
            r.holds.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn verify(args: &VerifyArgs, started: Instant) -> Result<bool> {
    let cfg = CampaignConfig {
        instances: args.instances,
        seed: args.seed,
        max_vertices: args.max_vertices,
        hypergraph: args.hyper,
        max_rank: args.max_rank,
        utility: match args.utility {
            UtilityArg::Coverage => UtilityKind::Coverage,
            UtilityArg::Linear | UtilityArg::Counting => UtilityKind::Linear,
        },
        point_mass: args.point_mass,
        max_set: args.max_set,
        tie: TieBreak::LowestId,
    };
    let rows = run_campaign(&cfg)?;
    match &args.out {
        Some(path) => {
            let mut out = create(path)?;
            write_verify_csv(&rows, &mut out)?;
            out.flush()?;
            write_manifest(
                path,
                &RunManifest {
                    command: "verify",
                    config: None,
                    inputs: Vec::new(),
                    outputs: vec![display(path)],
                    seed: Some(args.seed),
                    version: env!("CARGO_PKG_VERSION"),
                    wall_clock_secs: started.elapsed().as_secs_f64(),
                },
            )?;
        }
        None => write_verify_csv(&rows, io::stdout().lock())?,
    }
    let failures = rows.iter().filter(|r| !r.report.holds).count();
    if failures > 0 {
        eprintln!("{failures} of {} instances violate the bound", rows.len());
    }
    Ok(failures == 0)
}

fn gamma_dist(args: &GammaArgs, n: usize) -> Result<StateDistribution> {
    match (&args.states, &args.probs, args.q) {
        (Some(states), _, _) => {
            if states.len() != n {
                return Err(Error::input(format!("{} states for {n} vertices", states.len())));
            }
            if let Some(s) = states.iter().find(|&&s| s > 1) {
                return Err(Error::input(format!("vertex state {s} is not binary")));
            }
            Ok(StateDistribution::point_mass(Realization::from_bits(states)))
        }
        (None, Some(probs), _) => {
            if probs.len() != n {
                return Err(Error::input(format!("{} probabilities for {n} vertices", probs.len())));
            }
            StateDistribution::bernoulli(probs.clone())
        }
        (None, None, q) => StateDistribution::uniform(n, q.unwrap_or(0.5)),
    }
}

fn estimate_gamma_cmd(args: &GammaArgs, started: Instant) -> Result<()> {
    let rule: EdgeStateRule = args.rule.into();
    let estimate = if args.hyper {
        let graph = OrderedHypergraph::read_text(open(&args.graph)?)?;
        let m = graph.edge_count();
        let utility = match args.utility {
            UtilityArg::Coverage => BundledUtility::Coverage(CoverageUtility::from_hypergraph(&graph, vec![1.0; m])?),
            UtilityArg::Linear | UtilityArg::Counting => BundledUtility::Linear(LinearUtility::counting(m)),
        };
        let dist = gamma_dist(args, graph.vertex_count())?;
        estimate_gamma(
            &Instance {
                graph,
                utility,
                rule,
                dist,
                k: 0,
            },
            args.max_set,
        )?
    } else {
        let graph = WeightedDigraph::read_tsv(open(&args.graph)?)?;
        let utility = match args.utility {
            UtilityArg::Coverage => BundledUtility::Coverage(CoverageUtility::from_digraph(&graph)),
            UtilityArg::Linear => BundledUtility::Linear(LinearUtility::new(graph.weights())?),
            UtilityArg::Counting => BundledUtility::Linear(LinearUtility::counting(graph.edge_count())),
        };
        let dist = gamma_dist(args, graph.vertex_count())?;
        estimate_gamma(
            &Instance {
                graph,
                utility,
                rule,
                dist,
                k: 0,
            },
            args.max_set,
        )?
    };
    println!("gamma_hat {:.6}", estimate.gamma_hat);
    match &estimate.witness {
        Some(w) => println!("witness {}", serde_json::to_string(w)?),
        None => println!("witness none"),
    }
    if let Some(path) = &args.out {
        let mut out = create(path)?;
        serde_json::to_writer_pretty(&mut out, &estimate)?;
        out.write_all(b"\n")?;
        out.flush()?;
        write_manifest(
            path,
            &RunManifest {
                command: "estimate-gamma",
                config: None,
                inputs: vec![display(&args.graph)],
                outputs: vec![display(path)],
                seed: None,
                version: env!("CARGO_PKG_VERSION"),
                wall_clock_secs: started.elapsed().as_secs_f64(),
            },
        )?;
    }
    Ok(())
}

/// Parses `u v` pairs, one per line, with an optional `#vertices n` header.
/// Without the header the vertex count is one more than the largest id.
pub fn read_undirected(text: &str) -> Result<(usize, Vec<(usize, usize)>)> {
    let mut n = None;
    let mut edges = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("#vertices") {
            n = Some(rest.trim().parse().map_err(|_| Error::Parse {
                line: i + 1,
                msg: format!("bad vertex count {:?}", rest.trim()),
            })?);
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let ids: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        let parse = |s: &str| {
            s.parse::<usize>().map_err(|_| Error::Parse {
                line: i + 1,
                msg: format!("bad vertex id {s:?}"),
            })
        };
        match ids.as_slice() {
            [u, v] => edges.push((parse(u)?, parse(v)?)),
            _ => {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: "expected `u v`".into(),
                })
            }
        }
    }
    let n = n.unwrap_or_else(|| edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0));
    Ok((n, edges))
}

fn reduce_dks(args: &DksArgs, started: Instant) -> Result<()> {
    let text = io::read_to_string(open(&args.input)?)?;
    let (n, edges) = read_undirected(&text)?;
    let inst = dks_instance(n, &edges, args.k.unwrap_or(0))?;
    let mut out = create(&args.out)?;
    inst.graph.write_tsv(&mut out)?;
    out.flush()?;
    if args.solve {
        let (seq, value) = optimal_sequence(&inst)?;
        println!("max_f {}", value + 0.0);
        let ids: Vec<String> = seq.indices().iter().map(usize::to_string).collect();
        println!("sequence {}", ids.join(" "));
    }
    write_manifest(
        &args.out,
        &RunManifest {
            command: "reduce-dks",
            config: None,
            inputs: vec![display(&args.input)],
            outputs: vec![display(&args.out)],
            seed: None,
            version: env!("CARGO_PKG_VERSION"),
            wall_clock_secs: started.elapsed().as_secs_f64(),
        },
    )
}

fn exit_for(err: &Error) -> u8 {
    if err.is_guard() {
        EXIT_GUARD
    } else {
        EXIT_INPUT
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.max(1))
        .build_global()
    {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_GUARD);
    }
    let started = Instant::now();
    let outcome = match &cli.command {
        Command::BuildGraph(a) => build_graph(a, started).map(|_| true),
        Command::Run(a) => run(a, started).map(|_| true),
        Command::Verify(a) => verify(a, started),
        Command::EstimateGamma(a) => estimate_gamma_cmd(a, started).map(|_| true),
        Command::ReduceDks(a) => reduce_dks(a, started).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VERIFY),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}
