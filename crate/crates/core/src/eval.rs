//! Recommendation metrics and the train/test experiment harness.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{VertexId, WeightedDigraph};
use crate::ingest::{build_navigation_graph, build_purchase_graph, LinkTable, SequenceLog};
use crate::policy::{
    adaptive_sequence_greedy, frequency_baseline, nonadaptive_sequence_greedy, path_constrained_greedy, FnFeedback,
    GreedyOptions, Problem,
};
use crate::states::{EdgeStateRule, State, VertexPrior};
use crate::utility::CoverageUtility;

/// Number of recommended items the user actually went on to pick.
pub fn accuracy_score<T: Eq + std::hash::Hash>(recs: &[T], future: &[T]) -> usize {
    let future: HashSet<&T> = future.iter().collect();
    recs.iter()
        .collect::<HashSet<_>>()
        .iter()
        .filter(|r| future.contains(*r))
        .count()
}

/// Ordered pairs `(a, b)` with `a` before `b` in both lists.
pub fn sequence_score<T: Eq + std::hash::Hash + fmt::Debug>(recs: &[T], future: &[T]) -> Result<usize> {
    let mut at: HashMap<&T, usize> = HashMap::new();
    for (i, item) in future.iter().enumerate() {
        if at.insert(item, i).is_some() {
            return Err(Error::input(format!("duplicate item {item:?} in the true sequence")));
        }
    }
    let mut seen = HashSet::new();
    let mut common: Vec<usize> = Vec::new();
    for item in recs {
        if !seen.insert(item) {
            return Err(Error::input(format!("duplicate item {item:?} in the recommendations")));
        }
        if let Some(&i) = at.get(item) {
            common.push(i);
        }
    }
    let mut pairs = 0;
    for (a, &i) in common.iter().enumerate() {
        pairs += common[a + 1..].iter().filter(|&&j| i < j).count();
    }
    Ok(pairs)
}

fn bfs_to(links: &WeightedDigraph, target: VertexId) -> Vec<Option<usize>> {
    let mut dist = vec![None; links.vertex_count()];
    dist[target.0] = Some(0);
    let mut queue = VecDeque::from([target]);
    while let Some(v) = queue.pop_front() {
        let d = dist[v.0].expect("queued vertices have a distance");
        for &e in links.in_edges(v) {
            let u = links.edge(e).src();
            if dist[u.0].is_none() {
                dist[u.0] = Some(d + 1);
                queue.push_back(u);
            }
        }
    }
    dist
}

/// Longest finite shortest-path length in the graph.
pub fn graph_diameter(links: &WeightedDigraph) -> usize {
    (0..links.vertex_count())
        .flat_map(|t| bfs_to(links, VertexId(t)).into_iter().flatten())
        .max()
        .unwrap_or(0)
}

/// Mean shortest-path length to `target` over the out-neighbours of
/// `final_page`. Unreachable neighbours, and a page with no out-neighbours,
/// score `penalty`.
pub fn relevance_distance_with(final_page: VertexId, target: VertexId, links: &WeightedDigraph, penalty: f64) -> f64 {
    if final_page == target {
        return 0.0;
    }
    let out = links.out_edges(final_page);
    if out.is_empty() {
        return penalty;
    }
    let dist = bfs_to(links, target);
    let total: f64 = out
        .iter()
        .map(|&e| dist[links.edge(e).dst().0].map_or(penalty, |d| d as f64))
        .sum();
    total / out.len() as f64
}

/// [`relevance_distance_with`] using the graph diameter plus one as the penalty.
pub fn relevance_distance(final_page: VertexId, target: VertexId, links: &WeightedDigraph) -> f64 {
    let penalty = graph_diameter(links) as f64 + 1.0;
    relevance_distance_with(final_page, target, links, penalty)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Purchase,
    Navigation,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Purchase => "purchase",
            Task::Navigation => "navigation",
        })
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "purchase" => Ok(Task::Purchase),
            "navigation" => Ok(Task::Navigation),
            other => Err(Error::input(format!("unknown task {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    AdaptiveGreedy,
    /// Non-adaptive sequence greedy.
    Greedy,
    Frequency,
    PathGreedy,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::AdaptiveGreedy,
        PolicyKind::Greedy,
        PolicyKind::Frequency,
        PolicyKind::PathGreedy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::AdaptiveGreedy => "adaptive-greedy",
            PolicyKind::Greedy => "greedy",
            PolicyKind::Frequency => "frequency",
            PolicyKind::PathGreedy => "path-greedy",
        }
    }

    fn supports(self, task: Task) -> bool {
        match task {
            Task::Purchase => self != PolicyKind::PathGreedy,
            Task::Navigation => self == PolicyKind::PathGreedy,
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::input(format!("unknown policy {s:?}")))
    }
}

/// Optional fields of an experiment config, as read from JSON.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFields {
    pub task: Option<Task>,
    pub g: Option<usize>,
    pub k: Option<usize>,
    pub split: Option<f64>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub min_count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConfigFields")]
pub struct ExperimentConfig {
    pub task: Task,
    /// Length of the given prefix.
    pub g: usize,
    /// Recommendation budget.
    pub k: usize,
    /// Fraction of users used for training.
    pub split: f64,
    pub trials: usize,
    pub seed: u64,
    /// Minimum users per item (purchase) or visits per page (navigation).
    pub min_count: usize,
}

impl ExperimentConfig {
    pub fn defaults(task: Task) -> Self {
        match task {
            Task::Purchase => ExperimentConfig {
                task,
                g: 4,
                k: 5,
                split: 0.8,
                trials: 5,
                seed: 0,
                min_count: 50,
            },
            Task::Navigation => ExperimentConfig {
                task,
                g: 3,
                k: 5,
                split: 0.8,
                trials: 5,
                seed: 0,
                min_count: 100,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::input(format!(
                "split {} must lie strictly between 0 and 1",
                self.split
            )));
        }
        if self.trials == 0 {
            return Err(Error::input("trials must be at least 1"));
        }
        if self.min_count == 0 {
            return Err(Error::input("min_count must be at least 1"));
        }
        Ok(())
    }
}

impl TryFrom<ConfigFields> for ExperimentConfig {
    type Error = Error;

    fn try_from(f: ConfigFields) -> Result<Self> {
        let base = ExperimentConfig::defaults(f.task.unwrap_or(Task::Purchase));
        let cfg = ExperimentConfig {
            task: base.task,
            g: f.g.unwrap_or(base.g),
            k: f.k.unwrap_or(base.k),
            split: f.split.unwrap_or(base.split),
            trials: f.trials.unwrap_or(base.trials),
            seed: f.seed.unwrap_or(base.seed),
            min_count: f.min_count.unwrap_or(base.min_count),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One test user's outcome under one policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserScore {
    pub trial: usize,
    pub policy: PolicyKind,
    pub user: String,
    pub recs: Vec<String>,
    pub accuracy: Option<usize>,
    pub sequence: Option<usize>,
    pub relevance: Option<f64>,
}

/// Per-trial means for one policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub policy: PolicyKind,
    pub users: usize,
    pub skipped: usize,
    pub accuracy: Option<f64>,
    pub sequence: Option<f64>,
    pub relevance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Standard error across trials; 0 with a single trial.
    pub std_err: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: PolicyKind,
    pub accuracy: Option<MetricSummary>,
    pub sequence: Option<MetricSummary>,
    pub relevance: Option<MetricSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub config: ExperimentConfig,
    pub rows: Vec<TrialRow>,
    pub users: Vec<UserScore>,
    /// Transitions dropped while building navigation graphs, summed over trials.
    pub dropped_transitions: usize,
}

fn summarize(values: impl Iterator<Item = Option<f64>>) -> Option<MetricSummary> {
    let xs: Vec<f64> = values.flatten().collect();
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std_err = if xs.len() > 1 {
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Some(MetricSummary {
        mean,
        std_err,
        trials: xs.len(),
    })
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

impl MetricReport {
    pub fn score(&self, trial: usize, policy: PolicyKind, user: &str) -> Option<&UserScore> {
        self.users
            .iter()
            .find(|u| u.trial == trial && u.policy == policy && u.user == user)
    }

    pub fn summary(&self) -> Vec<PolicySummary> {
        let mut policies: Vec<PolicyKind> = Vec::new();
        for row in &self.rows {
            if !policies.contains(&row.policy) {
                policies.push(row.policy);
            }
        }
        policies
            .into_iter()
            .map(|policy| {
                let rows: Vec<&TrialRow> = self.rows.iter().filter(|r| r.policy == policy).collect();
                PolicySummary {
                    policy,
                    accuracy: summarize(rows.iter().map(|r| r.accuracy)),
                    sequence: summarize(rows.iter().map(|r| r.sequence)),
                    relevance: summarize(rows.iter().map(|r| r.relevance)),
                }
            })
            .collect()
    }

    /// One row per policy per trial.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record([
            "trial",
            "policy",
            "users",
            "skipped",
            "accuracy",
            "sequence",
            "relevance",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.trial.to_string(),
                r.policy.to_string(),
                r.users.to_string(),
                r.skipped.to_string(),
                fmt_opt(r.accuracy),
                fmt_opt(r.sequence),
                fmt_opt(r.relevance),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Summary<'a> {
            config: &'a ExperimentConfig,
            policies: Vec<PolicySummary>,
            dropped_transitions: usize,
        }
        Ok(serde_json::to_string_pretty(&Summary {
            config: &self.config,
            policies: self.summary(),
            dropped_transitions: self.dropped_transitions,
        })?)
    }
}

/// Shuffles `0..n` with a trial-specific seed and takes the first
/// `round(split · n)` as training indices.
pub fn split_users(n: usize, split: f64, seed: u64, trial: usize) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(trial as u64));
    order.shuffle(&mut rng);
    let cut = ((split * n as f64).round() as usize).min(n);
    let test = order.split_off(cut);
    (order, test)
}

type Entry = (String, Vec<String>);

fn check_policies(task: Task, policies: &[PolicyKind]) -> Result<()> {
    match policies.iter().find(|p| !p.supports(task)) {
        Some(p) => Err(Error::input(format!("policy {p} does not apply to the {task} task"))),
        None => Ok(()),
    }
}

fn name_index(g: &WeightedDigraph) -> HashMap<&str, VertexId> {
    g.labels()
        .unwrap_or_default()
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), VertexId(i)))
        .collect()
}

fn names(g: &WeightedDigraph, vs: &[VertexId]) -> Vec<String> {
    vs.iter().map(|&v| g.label(v).unwrap_or_default().to_string()).collect()
}

fn trial_rows(trial: usize, policies: &[PolicyKind], scores: &[UserScore], skipped: usize) -> Vec<TrialRow> {
    policies
        .iter()
        .map(|&policy| {
            let mine: Vec<&UserScore> = scores.iter().filter(|s| s.policy == policy).collect();
            let mean = |f: &dyn Fn(&UserScore) -> Option<f64>| -> Option<f64> {
                let xs: Vec<f64> = mine.iter().filter_map(|s| f(s)).collect();
                (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
            };
            TrialRow {
                trial,
                policy,
                users: mine.len(),
                skipped,
                accuracy: mean(&|s| s.accuracy.map(|a| a as f64)),
                sequence: mean(&|s| s.sequence.map(|a| a as f64)),
                relevance: mean(&|s| s.relevance),
            }
        })
        .collect()
}

/// One purchase trial with explicit train and test users.
///
/// Each test user reveals their first `g` items, which are known to be in
/// state 1; a pick is in state 1 iff the user bought it after position `g`.
pub fn purchase_trial(
    train: &[Entry],
    test: &[Entry],
    cfg: &ExperimentConfig,
    policies: &[PolicyKind],
    trial: usize,
) -> Result<(Vec<TrialRow>, Vec<UserScore>)> {
    check_policies(Task::Purchase, policies)?;
    let graph = build_purchase_graph(&SequenceLog::new(train.iter().cloned()), cfg.min_count)?;
    let utility = CoverageUtility::from_digraph(&graph);
    let rule = EdgeStateRule::StartVertex;
    let index = name_index(&graph);
    // Add-one estimate of the purchase rate over the same population as the
    // self-loop weights. An item every training user bought must still allow
    // a test user who did not buy it.
    let mut buyers = vec![0usize; graph.vertex_count()];
    let mut population = 0usize;
    for (_, items) in train {
        let mine: HashSet<VertexId> = items.iter().filter_map(|it| index.get(it.as_str()).copied()).collect();
        population += usize::from(!mine.is_empty());
        for v in mine {
            buyers[v.0] += 1;
        }
    }
    let q: Vec<f64> = buyers
        .iter()
        .map(|&b| (b + 1) as f64 / (population + 2) as f64)
        .collect();
    let prior = VertexPrior::bernoulli(&q)?;
    let problem = Problem::new(&graph, &utility, &rule, &prior);

    let eligible: Vec<&Entry> = test.iter().filter(|(_, items)| items.len() > cfg.g).collect();
    let skipped = test.len() - eligible.len();
    let per_user: Vec<Vec<UserScore>> = eligible
        .par_iter()
        .map(|(user, items)| -> Result<Vec<UserScore>> {
            let future = &items[cfg.g..];
            let prefix: Vec<VertexId> = items[..cfg.g]
                .iter()
                .filter_map(|it| index.get(it.as_str()).copied())
                .collect();
            let opts = GreedyOptions::new(cfg.k).with_prefix(prefix.clone(), State::ONE)?;
            let bought: HashSet<&str> = future.iter().map(String::as_str).collect();
            let mut out = Vec::new();
            for &policy in policies {
                let recs = match policy {
                    PolicyKind::Frequency => frequency_baseline(&graph, cfg.k, &prefix).as_slice().to_vec(),
                    PolicyKind::Greedy => nonadaptive_sequence_greedy(&problem, &opts)?.appended().to_vec(),
                    PolicyKind::AdaptiveGreedy => {
                        let mut feedback = FnFeedback(|v: VertexId| {
                            Some(State(bought.contains(graph.label(v).unwrap_or_default()) as u8))
                        });
                        adaptive_sequence_greedy(&problem, &mut feedback, &opts)?
                            .appended()
                            .to_vec()
                    }
                    PolicyKind::PathGreedy => unreachable!("rejected by check_policies"),
                };
                let recs = names(&graph, &recs);
                out.push(UserScore {
                    trial,
                    policy,
                    user: user.clone(),
                    accuracy: Some(accuracy_score(&recs, future)),
                    sequence: Some(sequence_score(&recs, future)?),
                    relevance: None,
                    recs,
                });
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let scores: Vec<UserScore> = per_user.into_iter().flatten().collect();
    Ok((trial_rows(trial, policies, &scores, skipped), scores))
}

/// One navigation trial with explicit train and test paths.
///
/// The frontier starts at the `g`-th page. A pick is in state 1 iff it is the
/// path's next page after the frontier, which then advances. Runs stop at the
/// path's last page, and each user scores the relevance distance from the
/// last confirmed page to that target on the link graph.
pub fn navigation_trial(
    train: &[Entry],
    test: &[Entry],
    links: &LinkTable,
    cfg: &ExperimentConfig,
    policies: &[PolicyKind],
    trial: usize,
) -> Result<(Vec<TrialRow>, Vec<UserScore>, usize)> {
    check_policies(Task::Navigation, policies)?;
    if cfg.g == 0 {
        return Err(Error::input("navigation needs g ≥ 1 to have a starting page"));
    }
    let nav = build_navigation_graph(&SequenceLog::new(train.iter().cloned()), links, cfg.min_count)?;
    let graph = &nav.graph;
    let utility = CoverageUtility::from_digraph(graph);
    let rule = EdgeStateRule::StartVertex;
    let prior = VertexPrior::bernoulli(&vec![0.5; graph.vertex_count()])?;
    let problem = Problem::new(graph, &utility, &rule, &prior);
    let index = name_index(graph);
    let link_graph = links.to_graph();
    let link_index = name_index(&link_graph);
    let penalty = graph_diameter(&link_graph) as f64 + 1.0;

    let eligible: Vec<&Entry> = test.iter().filter(|(_, pages)| pages.len() > cfg.g).collect();
    let skipped = test.len() - eligible.len();
    let per_user: Vec<Vec<UserScore>> = eligible
        .par_iter()
        .map(|(user, pages)| -> Result<Vec<UserScore>> {
            let target = pages.last().expect("paths longer than g");
            let prefix: Vec<VertexId> = pages[..cfg.g]
                .iter()
                .filter_map(|p| index.get(p.as_str()).copied())
                .collect();
            let opts = GreedyOptions::new(cfg.k).with_prefix(prefix, State::ONE)?;
            let mut out = Vec::new();
            for &policy in policies {
                let mut at = cfg.g - 1;
                let mut recs = Vec::new();
                if let Some(&start) = index.get(pages[at].as_str()) {
                    let mut feedback = FnFeedback(|v: VertexId| {
                        let hit = pages.get(at + 1).map(String::as_str) == graph.label(v);
                        if hit {
                            at += 1;
                        }
                        Some(State(hit as u8))
                    });
                    let stop = index.get(target.as_str()).copied();
                    let trace = path_constrained_greedy(&problem, &mut feedback, &opts, start, stop)?;
                    recs = names(graph, trace.appended());
                }
                let relevance = match (link_index.get(pages[at].as_str()), link_index.get(target.as_str())) {
                    _ if pages[at] == *target => 0.0,
                    (Some(&f), Some(&t)) => relevance_distance_with(f, t, &link_graph, penalty),
                    _ => penalty,
                };
                debug_assert_eq!(policy, PolicyKind::PathGreedy);
                out.push(UserScore {
                    trial,
                    policy,
                    user: user.clone(),
                    recs,
                    accuracy: None,
                    sequence: None,
                    relevance: Some(relevance),
                });
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let scores: Vec<UserScore> = per_user.into_iter().flatten().collect();
    Ok((trial_rows(trial, policies, &scores, skipped), scores, nav.dropped))
}

pub fn run_purchase_experiment(
    log: &SequenceLog,
    cfg: &ExperimentConfig,
    policies: &[PolicyKind],
) -> Result<MetricReport> {
    cfg.validate()?;
    check_policies(Task::Purchase, policies)?;
    let mut report = MetricReport {
        config: cfg.clone(),
        rows: Vec::new(),
        users: Vec::new(),
        dropped_transitions: 0,
    };
    for trial in 0..cfg.trials {
        let (train, test) = split_users(log.len(), cfg.split, cfg.seed, trial);
        let pick = |ids: &[usize]| -> Vec<Entry> { ids.iter().map(|&i| log.entries()[i].clone()).collect() };
        let (rows, users) = purchase_trial(&pick(&train), &pick(&test), cfg, policies, trial)?;
        report.rows.extend(rows);
        report.users.extend(users);
    }
    Ok(report)
}

pub fn run_navigation_experiment(
    paths: &SequenceLog,
    links: &LinkTable,
    cfg: &ExperimentConfig,
    policies: &[PolicyKind],
) -> Result<MetricReport> {
    cfg.validate()?;
    check_policies(Task::Navigation, policies)?;
    let mut report = MetricReport {
        config: cfg.clone(),
        rows: Vec::new(),
        users: Vec::new(),
        dropped_transitions: 0,
    };
    for trial in 0..cfg.trials {
        let (train, test) = split_users(paths.len(), cfg.split, cfg.seed, trial);
        let pick = |ids: &[usize]| -> Vec<Entry> { ids.iter().map(|&i| paths.entries()[i].clone()).collect() };
        let (rows, users, dropped) = navigation_trial(&pick(&train), &pick(&test), links, cfg, policies, trial)?;
        report.rows.extend(rows);
        report.users.extend(users);
        report.dropped_transitions += dropped;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn entry(user: &str, items: &[&str]) -> Entry {
        (user.to_string(), items.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy_score(&["a", "b"], &["b", "c"]), 1);
        assert_eq!(accuracy_score::<&str>(&[], &["b"]), 0);
        assert_eq!(accuracy_score(&["a", "c"], &["c", "b", "a"]), 2);
    }

    #[test]
    fn sequence_examples() {
        assert_eq!(sequence_score(&["a", "b", "c", "d"], &["a", "b", "c", "d"]).unwrap(), 6);
        assert_eq!(sequence_score(&["a", "b", "c"], &["c", "b", "a"]).unwrap(), 0);
        assert_eq!(sequence_score(&["a", "b", "c"], &["a", "c", "b"]).unwrap(), 2);
        assert!(sequence_score(&["a", "a"], &["a"]).is_err());
        assert!(sequence_score(&["a"], &["b", "b"]).is_err());
    }

    fn line_graph() -> WeightedDigraph {
        WeightedDigraph::new(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    #[test]
    fn relevance_examples() {
        let g = line_graph();
        assert_eq!(relevance_distance(VertexId(2), VertexId(2), &g), 0.0);
        assert_eq!(relevance_distance(VertexId(0), VertexId(2), &g), 1.0);
        // 0 -> {3 = target, 1}, 1 -> 2 -> 3.
        let g = WeightedDigraph::new(4, [(0, 3, 1.0), (0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]).unwrap();
        assert_eq!(relevance_distance(VertexId(0), VertexId(3), &g), 1.0);
        // No out-neighbours: diameter 2 on the line, so the penalty is 3.
        assert_eq!(relevance_distance(VertexId(2), VertexId(0), &line_graph()), 3.0);
    }

    #[test]
    fn split_is_seeded() {
        let a = split_users(5, 0.8, 7, 0);
        assert_eq!(a, split_users(5, 0.8, 7, 0));
        assert_eq!(a.0.len(), 4);
        assert_eq!(split_users(3, 0.8, 1, 0).0.len(), 2);
    }

    #[test]
    fn config_defaults_follow_task() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"task": "navigation", "k": 2}"#).unwrap();
        assert_eq!((cfg.g, cfg.k, cfg.min_count), (3, 2, 100));
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"split": 1.5}"#).is_err());
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn zero_budget_purchase_report_is_all_zero() {
        let log = SequenceLog::new([
            ("u1", vec!["a", "b", "c"]),
            ("u2", vec!["a", "c", "b"]),
            ("u3", vec!["b", "c", "a"]),
        ]);
        let cfg = ExperimentConfig {
            k: 0,
            g: 1,
            min_count: 1,
            trials: 2,
            ..ExperimentConfig::defaults(Task::Purchase)
        };
        let report = run_purchase_experiment(&log, &cfg, &[PolicyKind::Frequency, PolicyKind::AdaptiveGreedy]).unwrap();
        assert!(report
            .users
            .iter()
            .all(|u| u.accuracy == Some(0) && u.sequence == Some(0)));
        assert_eq!(report.rows.len(), 4);
    }

    #[test]
    fn zero_budget_navigation_scores_the_gth_page() {
        let links = LinkTable::new([("a", "b"), ("b", "c"), ("c", "d")]);
        let train = [entry("p1", &["a", "b", "c", "d"])];
        let test = [entry("p2", &["a", "b", "c", "d"])];
        let cfg = ExperimentConfig {
            k: 0,
            g: 2,
            min_count: 1,
            ..ExperimentConfig::defaults(Task::Navigation)
        };
        let (_, users, _) = navigation_trial(&train, &test, &links, &cfg, &[PolicyKind::PathGreedy], 0).unwrap();
        // From b the only neighbour c is one step from d.
        assert_eq!(users[0].relevance, Some(1.0));

        let cfg = ExperimentConfig { k: 5, ..cfg };
        let (_, users, _) = navigation_trial(&train, &test, &links, &cfg, &[PolicyKind::PathGreedy], 0).unwrap();
        assert_eq!(users[0].relevance, Some(0.0));
        assert_eq!(users[0].recs, ["c", "d"]);
    }

    #[test]
    fn universally_bought_item_can_be_rejected() {
        // Every training user bought p, the test user did not.
        let train = [entry("t1", &["x", "p"]), entry("t2", &["x", "p"])];
        let test = [entry("h", &["x", "y", "z"])];
        let cfg = ExperimentConfig {
            k: 3,
            g: 1,
            min_count: 1,
            ..ExperimentConfig::defaults(Task::Purchase)
        };
        let (_, users) = purchase_trial(&train, &test, &cfg, &[PolicyKind::AdaptiveGreedy], 0).unwrap();
        assert_eq!(users[0].recs, ["p"]);
        assert_eq!(users[0].accuracy, Some(0));
    }

    #[test]
    fn policies_are_checked_per_task() {
        let log = SequenceLog::new([("u1", vec!["a", "b"])]);
        let cfg = ExperimentConfig::defaults(Task::Purchase);
        assert!(run_purchase_experiment(&log, &cfg, &[PolicyKind::PathGreedy]).is_err());
        assert_eq!("greedy".parse::<PolicyKind>().unwrap(), PolicyKind::Greedy);
        assert!("best".parse::<PolicyKind>().is_err());
    }

    proptest! {
        #[test]
        fn metric_bounds(recs in prop::collection::hash_set(0u8..10, 0..6), future in prop::collection::hash_set(0u8..10, 0..6)) {
            let recs: Vec<u8> = recs.into_iter().collect();
            let future: Vec<u8> = future.into_iter().collect();
            let acc = accuracy_score(&recs, &future);
            prop_assert!(acc <= recs.len().min(future.len()));
            let seq = sequence_score(&recs, &future).unwrap();
            prop_assert_eq!(seq, sequence_score(&future, &recs).unwrap());
            prop_assert!(seq <= acc * acc.saturating_sub(1) / 2);
            let reversed: Vec<u8> = recs.iter().rev().copied().collect();
            prop_assert_eq!(sequence_score(&recs, &reversed).unwrap(), 0);
        }
    }
}
