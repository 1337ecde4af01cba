//! Turning raw logs into the purchase and navigation graphs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;

use crate::error::{Error, Result};
use crate::graph::WeightedDigraph;

/// Ordered item lists per user, each list deduplicated keeping first occurrences.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SequenceLog {
    entries: Vec<(String, Vec<String>)>,
}

fn dedup_first(items: Vec<String>) -> Vec<String> {
    let mut seen = BTreeSet::new();
    items.into_iter().filter(|it| seen.insert(it.clone())).collect()
}

impl SequenceLog {
    /// Builds a log from `(user, items)` pairs; entries for a repeated user are
    /// concatenated in input order.
    pub fn new<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = (S, Vec<S>)>,
        S: Into<String>,
    {
        let mut order: Vec<String> = Vec::new();
        let mut items: HashMap<String, Vec<String>> = HashMap::new();
        for (user, list) in entries {
            let user = user.into();
            let slot = items.entry(user.clone()).or_insert_with(|| {
                order.push(user.clone());
                Vec::new()
            });
            slot.extend(list.into_iter().map(Into::into));
        }
        let entries = order
            .into_iter()
            .map(|u| {
                let list = items.remove(&u).unwrap_or_default();
                (u, dedup_first(list))
            })
            .collect();
        SequenceLog { entries }
    }

    pub fn entries(&self) -> &[(String, Vec<String>)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, user: &str) -> Option<&[String]> {
        self.entries
            .iter()
            .find(|(u, _)| u == user)
            .map(|(_, items)| items.as_slice())
    }

    /// Parses `user_id,item,position` rows; the header row is optional.
    /// Users keep their first-appearance order, items are sorted by position.
    pub fn parse_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(input);
        let mut rows: Vec<(String, i64, usize, String)> = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let line = record.position().map_or(i + 1, |p| p.line() as usize);
            if record.iter().all(str::is_empty) {
                continue;
            }
            if record.len() != 3 {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected `user_id,item,position`, found {} fields", record.len()),
                });
            }
            if i == 0 && &record[2] == "position" {
                continue;
            }
            let position: i64 = record[2].parse().map_err(|_| Error::Parse {
                line,
                msg: format!("position {:?} is not an integer", &record[2]),
            })?;
            if record[0].is_empty() || record[1].is_empty() {
                return Err(Error::Parse {
                    line,
                    msg: "empty user or item".into(),
                });
            }
            rows.push((record[0].to_string(), position, rows.len(), record[1].to_string()));
        }
        let mut order: Vec<String> = Vec::new();
        let mut per_user: HashMap<String, Vec<(i64, usize, String)>> = HashMap::new();
        for (user, pos, seq, item) in rows {
            per_user
                .entry(user.clone())
                .or_insert_with(|| {
                    order.push(user);
                    Vec::new()
                })
                .push((pos, seq, item));
        }
        Ok(SequenceLog::new(order.into_iter().map(|u| {
            let mut list = per_user.remove(&u).unwrap_or_default();
            list.sort();
            (u, list.into_iter().map(|(_, _, item)| item).collect())
        })))
    }

    /// Parses one user per line: `user_id<TAB>item1 item2 ...`.
    pub fn parse_tsv<R: BufRead>(input: R) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (user, items) = line.split_once('\t').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: "expected `user_id<TAB>items`".into(),
            })?;
            let user = user.trim();
            if user.is_empty() {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: "empty user id".into(),
                });
            }
            entries.push((user.to_string(), items.split_whitespace().map(str::to_string).collect()));
        }
        Ok(SequenceLog::new(entries))
    }

    /// TSV if the first non-blank line has a tab, CSV otherwise.
    pub fn parse<R: BufRead>(mut input: R) -> Result<Self> {
        let mut text = String::new();
        input.read_to_string(&mut text)?;
        let tabbed = text
            .lines()
            .find(|l| !l.trim().is_empty())
            .is_some_and(|l| l.contains('\t'));
        if tabbed {
            Self::parse_tsv(text.as_bytes())
        } else {
            Self::parse_csv(text.as_bytes())
        }
    }
}

/// Directed links between named pages.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LinkTable {
    links: BTreeSet<(String, String)>,
}

impl LinkTable {
    pub fn new<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, S)>,
        S: Into<String>,
    {
        LinkTable {
            links: pairs.into_iter().map(|(a, b)| (a.into(), b.into())).collect(),
        }
    }

    /// Parses `src,dst` rows with an optional `src,dst` header.
    pub fn parse_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(input);
        let mut links = BTreeSet::new();
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let line = record.position().map_or(i + 1, |p| p.line() as usize);
            if record.iter().all(str::is_empty) {
                continue;
            }
            if record.len() != 2 || record[0].is_empty() || record[1].is_empty() {
                return Err(Error::Parse {
                    line,
                    msg: "expected `src,dst`".into(),
                });
            }
            if i == 0 && &record[0] == "src" && &record[1] == "dst" {
                continue;
            }
            links.insert((record[0].to_string(), record[1].to_string()));
        }
        Ok(LinkTable { links })
    }

    pub fn contains(&self, src: &str, dst: &str) -> bool {
        self.links.contains(&(src.to_string(), dst.to_string()))
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.links.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }

    /// Every page named in the table, sorted.
    pub fn pages(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.links.iter().flat_map(|(a, b)| [a, b]).collect();
        set.into_iter().cloned().collect()
    }

    /// Unit-weight digraph over [`pages`](Self::pages), labelled by name.
    pub fn to_graph(&self) -> WeightedDigraph {
        let pages = self.pages();
        let index: HashMap<&str, usize> = pages.iter().enumerate().map(|(i, p)| (p.as_str(), i)).collect();
        let arcs = self
            .links
            .iter()
            .map(|(a, b)| (index[a.as_str()], index[b.as_str()], 1.0));
        WeightedDigraph::new(pages.len(), arcs)
            .and_then(|g| g.with_labels(pages.clone()))
            .expect("links are distinct and in range")
    }
}

fn labelled(names: Vec<String>, arcs: Vec<(usize, usize, f64)>) -> WeightedDigraph {
    WeightedDigraph::new(names.len(), arcs)
        .and_then(|g| g.with_labels(names))
        .expect("ingested arcs are distinct with weights in [0, 1]")
}

/// Purchase graph: `w_ii` is the share of users who bought `i`, `w_ij` the
/// share of `i`'s buyers who bought `j` at any later position.
///
/// Items bought by fewer than `min_count` users are dropped first; the user
/// population is then the users left with at least one item.
pub fn build_purchase_graph(log: &SequenceLog, min_count: usize) -> Result<WeightedDigraph> {
    if min_count == 0 {
        return Err(Error::input("min_count must be at least 1"));
    }
    let mut buyers: BTreeMap<&str, usize> = BTreeMap::new();
    for (_, items) in log.entries() {
        for item in items {
            *buyers.entry(item.as_str()).or_default() += 1;
        }
    }
    let names: Vec<String> = buyers
        .iter()
        .filter(|(_, &c)| c >= min_count)
        .map(|(name, _)| name.to_string())
        .collect();
    let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();

    let mut population = 0usize;
    let mut pairs: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (_, items) in log.entries() {
        let kept: Vec<usize> = items.iter().filter_map(|it| index.get(it.as_str()).copied()).collect();
        if kept.is_empty() {
            continue;
        }
        population += 1;
        for (a, &i) in kept.iter().enumerate() {
            for &j in &kept[a + 1..] {
                *pairs.entry((i, j)).or_default() += 1;
            }
        }
    }
    let counts: Vec<usize> = names.iter().map(|n| buyers[n.as_str()]).collect();
    let mut arcs: Vec<(usize, usize, f64)> = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| (i, i, c as f64 / population as f64))
        .collect();
    arcs.extend(pairs.into_iter().map(|((i, j), c)| (i, j, c as f64 / counts[i] as f64)));
    Ok(labelled(names, arcs))
}

/// A navigation graph with the number of transitions dropped for not being links.
#[derive(Debug, Clone, PartialEq)]
pub struct NavigationGraph {
    pub graph: WeightedDigraph,
    pub dropped: usize,
}

/// Navigation graph: `w_ij` is the share of transitions out of `i` that go to `j`.
///
/// Pages visited by fewer than `min_visits` paths are removed together with
/// every transition touching them. Transitions that are not links are dropped
/// and counted, but still count towards the denominator of their source.
pub fn build_navigation_graph(paths: &SequenceLog, links: &LinkTable, min_visits: usize) -> Result<NavigationGraph> {
    if min_visits == 0 {
        return Err(Error::input("min_visits must be at least 1"));
    }
    let mut visits: BTreeMap<&str, usize> = BTreeMap::new();
    for (_, pages) in paths.entries() {
        for page in pages {
            *visits.entry(page.as_str()).or_default() += 1;
        }
    }
    let names: Vec<String> = visits
        .iter()
        .filter(|(_, &c)| c >= min_visits)
        .map(|(name, _)| name.to_string())
        .collect();
    let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();

    let mut outgoing = vec![0usize; names.len()];
    let mut moves: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut dropped = 0;
    for (_, pages) in paths.entries() {
        for step in pages.windows(2) {
            let (Some(&i), Some(&j)) = (index.get(step[0].as_str()), index.get(step[1].as_str())) else {
                continue;
            };
            outgoing[i] += 1;
            if i != j && links.contains(&step[0], &step[1]) {
                *moves.entry((i, j)).or_default() += 1;
            } else {
                dropped += 1;
            }
        }
    }
    let arcs = moves
        .into_iter()
        .map(|((i, j), c)| (i, j, c as f64 / outgoing[i] as f64))
        .collect();
    Ok(NavigationGraph {
        graph: labelled(names, arcs),
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::VertexId;
    use proptest::prelude::*;

    fn weight(g: &WeightedDigraph, a: &str, b: &str) -> Option<f64> {
        let id = |name: &str| VertexId(g.labels().unwrap().iter().position(|l| l == name).unwrap());
        g.find_edge(id(a), id(b)).map(|e| g.edge(e).weight)
    }

    #[test]
    fn purchase_two_users() {
        let log = SequenceLog::new([("u1", vec!["a", "b"]), ("u2", vec!["a"])]);
        let g = build_purchase_graph(&log, 1).unwrap();
        assert_eq!(weight(&g, "a", "a"), Some(1.0));
        assert_eq!(weight(&g, "b", "b"), Some(0.5));
        assert_eq!(weight(&g, "a", "b"), Some(0.5));
        assert_eq!(weight(&g, "b", "a"), None);

        let filtered = build_purchase_graph(&log, 2).unwrap();
        assert_eq!(filtered.vertex_count(), 1);
        assert_eq!(filtered.edge_count(), 1);
        assert_eq!(weight(&filtered, "a", "a"), Some(1.0));

        let empty = build_purchase_graph(&SequenceLog::default(), 1).unwrap();
        assert_eq!(empty.vertex_count(), 0);
    }

    #[test]
    fn purchase_counts_any_earlier_position() {
        let log = SequenceLog::new([("u1", vec!["a", "x", "b"]), ("u2", vec!["b", "a"])]);
        let g = build_purchase_graph(&log, 1).unwrap();
        assert_eq!(weight(&g, "a", "b"), Some(0.5));
        assert_eq!(weight(&g, "b", "a"), Some(0.5));
        assert_eq!(weight(&g, "a", "x"), Some(0.5));
    }

    #[test]
    fn navigation_transitions() {
        let paths = SequenceLog::new([("p1", vec!["a", "b", "c"]), ("p2", vec!["a", "b"])]);
        let links = LinkTable::new([("a", "b"), ("b", "c")]);
        let nav = build_navigation_graph(&paths, &links, 1).unwrap();
        assert_eq!(weight(&nav.graph, "a", "b"), Some(1.0));
        assert_eq!(weight(&nav.graph, "b", "c"), Some(1.0));
        assert_eq!(nav.dropped, 0);

        let sparse = LinkTable::new([("a", "b")]);
        let nav = build_navigation_graph(&paths, &sparse, 1).unwrap();
        assert_eq!(nav.dropped, 1);
        assert_eq!(weight(&nav.graph, "b", "c"), None);

        let empty = build_navigation_graph(&SequenceLog::default(), &links, 1).unwrap();
        assert_eq!(empty.graph.vertex_count(), 0);
    }

    #[test]
    fn csv_log_sorts_by_position_and_dedups() {
        let text = "user_id,item,position\nu1,b,2\nu2,z,1\nu1,a,1\nu1,a,3\n";
        let log = SequenceLog::parse(text.as_bytes()).unwrap();
        assert_eq!(log.get("u1").unwrap(), ["a", "b"]);
        assert_eq!(log.entries()[1].0, "u2");
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let err = SequenceLog::parse_csv("u1,a,1\nu1,b,x\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = SequenceLog::parse_csv("u1,a,1\nu1,b\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn tsv_log() {
        let log = SequenceLog::parse("u1\ta b a c\n\nu2\t\n".as_bytes()).unwrap();
        assert_eq!(log.get("u1").unwrap(), ["a", "b", "c"]);
        assert!(log.get("u2").unwrap().is_empty());
        assert!(matches!(
            SequenceLog::parse_tsv("u1 a b\n".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn link_table_csv() {
        let links = LinkTable::parse_csv("src,dst\na,b\na,b\nb,c\n".as_bytes()).unwrap();
        assert_eq!(links.len(), 2);
        assert_eq!(links.pages(), ["a", "b", "c"]);
        assert_eq!(links.to_graph().edge_count(), 2);
    }

    fn paths() -> impl Strategy<Value = Vec<Vec<u8>>> {
        prop::collection::vec(prop::collection::vec(0u8..6, 0..8), 0..8)
    }

    fn as_log(raw: &[Vec<u8>]) -> SequenceLog {
        SequenceLog::new(
            raw.iter()
                .enumerate()
                .map(|(u, items)| (format!("u{u}"), items.iter().map(|i| format!("p{i}")).collect())),
        )
    }

    proptest! {
        #[test]
        fn navigation_out_weights_sum_to_at_most_one(raw in paths(), keep in prop::collection::vec(any::<bool>(), 36), min in 1usize..3) {
            let log = as_log(&raw);
            let links = LinkTable::new((0..36).filter(|&i| keep[i]).map(|i| (format!("p{}", i / 6), format!("p{}", i % 6))));
            let nav = build_navigation_graph(&log, &links, min).unwrap();
            let g = &nav.graph;
            for v in 0..g.vertex_count() {
                let total: f64 = g.out_edges(VertexId(v)).iter().map(|&e| g.edge(e).weight).sum();
                prop_assert!(total <= 1.0 + 1e-9);
                prop_assert!(g.self_loop_weight(VertexId(v)).is_none());
            }
            if nav.dropped == 0 {
                for v in 0..g.vertex_count() {
                    let out = g.out_edges(VertexId(v));
                    if !out.is_empty() {
                        let total: f64 = out.iter().map(|&e| g.edge(e).weight).sum();
                        prop_assert!((total - 1.0).abs() <= 1e-9);
                    }
                }
            }
        }

        #[test]
        fn purchase_weights_and_loops(raw in paths(), min in 1usize..3) {
            let log = as_log(&raw);
            let g = build_purchase_graph(&log, min).unwrap();
            for v in 0..g.vertex_count() {
                prop_assert!(g.self_loop_weight(VertexId(v)).is_some());
            }
            prop_assert!(g.edges().iter().all(|e| e.weight > 0.0 && e.weight <= 1.0));
            let mut a = Vec::new();
            let mut b = Vec::new();
            g.write_tsv(&mut a).unwrap();
            build_purchase_graph(&as_log(&raw), min).unwrap().write_tsv(&mut b).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
