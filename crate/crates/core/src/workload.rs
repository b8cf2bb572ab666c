//! Query workloads and the benchmark runner.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use thiserror::Error;

use crate::index::Index;
use crate::matcher::{evaluate_twig, ResultSet};
use crate::metrics::{AccessLog, LabelList, Metrics};
use crate::oracle::{leaf_scan_match, naive_match, MaterializedDoc};
use crate::path_guide::GuideId;
use crate::twig::{parse, Axis, NodeTest, ParseError, TwigNodeId, TwigPattern};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Engine {
    Dt,
    LeafScan,
    Naive,
}

impl Engine {
    pub const ALL: [Engine; 3] = [Engine::Dt, Engine::LeafScan, Engine::Naive];

    pub fn name(self) -> &'static str {
        match self {
            Engine::Dt => "dt",
            Engine::LeafScan => "leafscan",
            Engine::Naive => "naive",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown engine {0:?} (expected dt, leafscan or naive)")]
pub struct UnknownEngine(pub String);

impl FromStr for Engine {
    type Err = UnknownEngine;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dt" => Ok(Engine::Dt),
            "leafscan" => Ok(Engine::LeafScan),
            "naive" => Ok(Engine::Naive),
            other => Err(UnknownEngine(other.to_owned())),
        }
    }
}

/// Runs `twig` with the chosen engine. The naive engine materializes the
/// whole document first and is charged for reading every extent.
pub fn run(index: &Index, twig: &TwigPattern, engine: Engine) -> (ResultSet, Metrics) {
    let log = AccessLog::new();
    match engine {
        Engine::Dt => evaluate_twig(index, twig, &log),
        Engine::LeafScan => leaf_scan_match(index, twig, &log),
        Engine::Naive => {
            let started = Instant::now();
            let pg = index.guide();
            for g in pg.ids() {
                let list = LabelList::tracked(pg.extent(g).labels(), g, &log);
                (0..list.len()).for_each(|i| {
                    list.get(i);
                });
            }
            let result = naive_match(&MaterializedDoc::from_guide(pg), twig);
            let mut metrics = log.snapshot();
            metrics.elapsed = started.elapsed();
            (result, metrics)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamedQuery {
    pub name: String,
    pub text: String,
}

impl NamedQuery {
    pub fn new(name: impl Into<String>, text: impl Into<String>) -> Self {
        NamedQuery { name: name.into(), text: text.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorkloadError {
    #[error("line {line}: {source}")]
    Query { line: usize, source: ParseError },
    #[error("line {line}: expected `name<TAB>query` or a bare query")]
    Malformed { line: usize },
    #[error("workload has no queries")]
    Empty,
}

/// Parses a workload file: one query per line, optionally preceded by a
/// name and a tab. Blank lines and lines starting with `#` are skipped.
pub fn parse_workload(text: &str) -> Result<Vec<NamedQuery>, WorkloadError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end();
        if line.trim_start().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let (name, query) = match line.split_once('\t') {
            Some((name, query)) => (name.trim().to_owned(), query.trim()),
            None => (format!("Q{}", out.len() + 1), line.trim_start()),
        };
        if name.is_empty() || query.is_empty() {
            return Err(WorkloadError::Malformed { line: i + 1 });
        }
        parse(query).map_err(|source| WorkloadError::Query { line: i + 1, source })?;
        out.push(NamedQuery::new(name, query));
    }
    if out.is_empty() {
        return Err(WorkloadError::Empty);
    }
    Ok(out)
}

/// Length sweep: `A1` .. `A8` are child-axis paths of 2 to 9 steps, each
/// one step longer at the top than the last, all ending at the same guide
/// node. Each query's matches are therefore a subset of the previous one's.
///
/// The anchor is the guide node at depth 8 or more with the largest extent.
/// Returns an empty list if the document is shallower than that.
pub fn single_branch_sweep(index: &Index) -> Vec<NamedQuery> {
    let pg = index.guide();
    let anchor =
        pg.nodes().iter().filter(|n| n.depth >= 8).max_by_key(|n| (pg.extent(n.id).len(), std::cmp::Reverse(n.id)));
    let Some(anchor) = anchor else {
        return Vec::new();
    };
    let tags = pg.path_tags(anchor.id);
    (2..=9)
        .map(|len| {
            let path: String = tags[tags.len() - len..].iter().map(|t| format!("/{t}")).collect();
            NamedQuery::new(format!("A{}", len - 1), format!("/{path}"))
        })
        .collect()
}

/// Branch sweep: `B1` .. `B4` hang 2 to 5 leaves, each with its own tag,
/// under one join point. Each query adds one branch to the previous one.
///
/// The join point is the most frequent tag; the leaves are the remaining
/// tags in frequency order. Needs at least six distinct tags.
pub fn multi_branch_sweep(index: &Index) -> Vec<NamedQuery> {
    let pg = index.guide();
    let mut counts: Vec<(String, usize)> = Vec::new();
    for node in pg.nodes() {
        let n = pg.extent(node.id).len();
        match counts.iter_mut().find(|(t, _)| *t == node.tag) {
            Some((_, c)) => *c += n,
            None => counts.push((node.tag.clone(), n)),
        }
    }
    counts.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    if counts.len() < 6 {
        return Vec::new();
    }
    let jp = &counts[0].0;
    let leaves: Vec<&str> = counts[1..6].iter().map(|(t, _)| t.as_str()).collect();
    (2..=5)
        .map(|k| {
            let preds: String = leaves[..k - 1].iter().map(|t| format!("[./{t}]")).collect();
            NamedQuery::new(format!("B{}", k - 1), format!("//{jp}{preds}/{}", leaves[k - 1]))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchRow {
    pub query_name: String,
    pub query: String,
    pub engine: Engine,
    pub results: usize,
    pub metrics: Metrics,
}

impl BenchRow {
    pub const COLUMNS: [&'static str; 7] =
        ["query_name", "query", "engine", "results", "nodes_read", "bytes_scanned", "micros"];

    /// The row's values in [`BenchRow::COLUMNS`] order.
    pub fn fields(&self) -> [String; 7] {
        [
            self.query_name.clone(),
            self.query.clone(),
            self.engine.to_string(),
            self.results.to_string(),
            self.metrics.nodes_read.to_string(),
            self.metrics.bytes_scanned.to_string(),
            self.metrics.elapsed.as_micros().to_string(),
        ]
    }
}

/// Runs every query under every engine, in that order. Each pair is run
/// once untimed before the measured run.
pub fn run_bench(index: &Index, queries: &[NamedQuery], engines: &[Engine]) -> Result<Vec<BenchRow>, ParseError> {
    let mut rows = Vec::with_capacity(queries.len() * engines.len());
    for q in queries {
        let twig = parse(&q.text)?;
        for &engine in engines {
            run(index, &twig, engine);
            let (result, metrics) = run(index, &twig, engine);
            rows.push(BenchRow {
                query_name: q.name.clone(),
                query: q.text.clone(),
                engine,
                results: result.len(),
                metrics,
            });
        }
    }
    Ok(rows)
}

/// Shape limits for [`random_twig`].
#[derive(Debug, Clone)]
pub struct TwigShape {
    pub max_branches: usize,
    pub max_join_points: usize,
    pub max_depth: usize,
    pub tags: Vec<String>,
    /// Chance that a node test is `*`.
    pub wildcard: f64,
    /// Chance that a step uses the descendant axis.
    pub descendant: f64,
}

impl Default for TwigShape {
    fn default() -> Self {
        TwigShape {
            max_branches: 5,
            max_join_points: 3,
            max_depth: 6,
            tags: ["A", "B", "C", "D", "E", "F"].map(String::from).to_vec(),
            wildcard: 0.15,
            descendant: 0.5,
        }
    }
}

/// Draws a random twig within `shape`: a first root-to-leaf path, then
/// further paths grafted onto existing inner nodes.
pub fn random_twig<R: Rng>(rng: &mut R, shape: &TwigShape) -> TwigPattern {
    let test = |rng: &mut R| {
        if rng.gen_bool(shape.wildcard) {
            NodeTest::Wildcard
        } else {
            NodeTest::Name(shape.tags[rng.gen_range(0..shape.tags.len())].clone())
        }
    };
    let axis = |rng: &mut R| if rng.gen_bool(shape.descendant) { Axis::Descendant } else { Axis::Child };

    let root_axis = axis(rng);
    let root_test = test(rng);
    let mut twig = TwigPattern::new(root_axis, root_test);
    let max_depth = shape.max_depth.max(1);
    let first_len = rng.gen_range(0..max_depth);
    let mut at = twig.root();
    for _ in 0..first_len {
        let (a, t) = (axis(rng), test(rng));
        at = twig.add_child(at, a, t);
    }

    let branches = rng.gen_range(1..=shape.max_branches.max(1));
    for _ in 1..branches {
        let inner: Vec<TwigNodeId> = twig
            .preorder()
            .into_iter()
            .filter(|&id| !twig.node(id).children.is_empty() && twig.depth(id) + 1 < max_depth)
            .filter(|&id| twig.is_join_point(id) || jp_count(&twig) < shape.max_join_points)
            .collect();
        if inner.is_empty() {
            break;
        }
        let mut at = inner[rng.gen_range(0..inner.len())];
        let room = max_depth - 1 - twig.depth(at);
        for _ in 0..rng.gen_range(1..=room.min(3)) {
            let (a, t) = (axis(rng), test(rng));
            at = twig.add_child(at, a, t);
        }
    }
    twig
}

fn jp_count(twig: &TwigPattern) -> usize {
    twig.preorder().into_iter().filter(|&id| twig.is_join_point(id)).count()
}

/// Guide nodes a query's DT plan is allowed to read: the leaf-slot guide
/// nodes of every record.
pub fn plan_guides(index: &Index, twig: &TwigPattern) -> BTreeSet<GuideId> {
    let plan = crate::matcher::Plan::new(index.guide(), twig.clone());
    match &plan.schema {
        None => plan.direct.iter().copied().collect(),
        Some(schema) => schema.branch_guides(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::{generate, GeneratorConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// First generated document from `seed` on that reaches `nodes` elements.
    fn index(nodes: usize, seed: u64) -> Index {
        (seed..)
            .map(|seed| GeneratorConfig { target_node_count: nodes, seed, ..GeneratorConfig::default() })
            .map(|config| generate(&config).unwrap())
            .find(|g| g.node_count == nodes)
            .map(|g| Index::from_xml_bytes(&g.xml).unwrap())
            .unwrap()
    }

    #[test]
    fn engine_names_round_trip() {
        for e in Engine::ALL {
            assert_eq!(e.name().parse::<Engine>().unwrap(), e);
        }
        assert!("sax".parse::<Engine>().is_err());
    }

    #[test]
    fn workload_file_format() {
        let w = parse_workload("# sweep\nfirst\t//A/B\n\n//C[./D]/E\n").unwrap();
        assert_eq!(w, [NamedQuery::new("first", "//A/B"), NamedQuery::new("Q2", "//C[./D]/E")]);
        assert!(matches!(parse_workload("x\t//A["), Err(WorkloadError::Query { line: 1, .. })));
        assert!(matches!(parse_workload("\t//A"), Err(WorkloadError::Malformed { line: 1 })));
        assert_eq!(parse_workload("# nothing\n"), Err(WorkloadError::Empty));
    }

    #[test]
    fn sweeps_have_the_expected_shape() {
        let idx = index(5_000, 7);
        let single = single_branch_sweep(&idx);
        assert_eq!(single.len(), 8);
        for (i, q) in single.iter().enumerate() {
            let twig = parse(&q.text).unwrap();
            assert_eq!(twig.len(), i + 2, "{}", q.text);
            assert!(twig.leaves().len() == 1);
        }
        let multi = multi_branch_sweep(&idx);
        assert_eq!(multi.len(), 4);
        for (i, q) in multi.iter().enumerate() {
            assert_eq!(parse(&q.text).unwrap().leaves().len(), i + 2, "{}", q.text);
        }
    }

    #[test]
    fn bench_rows_per_engine() {
        let idx = index(2_000, 3);
        let queries = multi_branch_sweep(&idx);
        let rows = run_bench(&idx, &queries, &Engine::ALL).unwrap();
        assert_eq!(rows.len(), 12);
        for chunk in rows.chunks(3) {
            assert_eq!(chunk[0].results, chunk[2].results);
            assert_eq!(chunk[1].results, chunk[2].results);
        }
        assert_eq!(rows[0].fields()[..3], ["B1".to_owned(), queries[0].text.clone(), "dt".to_owned()]);
    }

    #[test]
    fn random_twigs_respect_shape() {
        let shape = TwigShape::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let t = random_twig(&mut rng, &shape);
            assert!(t.leaves().len() <= shape.max_branches);
            assert!(jp_count(&t) <= shape.max_join_points);
            assert!(t.preorder().into_iter().all(|id| t.depth(id) < shape.max_depth));
            assert_eq!(parse(&t.to_string()).unwrap(), t);
        }
    }
}
