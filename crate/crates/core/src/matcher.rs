//! Executes a plan against extent lists.
//!
//! The workhorse is a prefix-grouped merge: every input list is sorted, so
//! the level-`L` prefixes of its labels are non-decreasing. The merge compares
//! the current prefixes, jumps the list holding the smallest one past it, and
//! when all prefixes agree emits the cross product of the equal-prefix runs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::Range;
use std::rc::Rc;
use std::time::Instant;

use crate::dewey::DeweyLabel;
use crate::dt::{build_dt_schema, DtSchema, SlotKind};
use crate::index::Index;
use crate::metrics::{AccessLog, LabelList, Metrics};
use crate::path_guide::{GuideId, PathGuide};
use crate::twig::{parse, split, Decomposition, ParseError, TwigPattern};

/// One answer: a data label per twig leaf, in leaf preorder.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MatchTuple {
    pub leaves: Vec<DeweyLabel>,
}

impl MatchTuple {
    pub fn new(leaves: Vec<DeweyLabel>) -> Self {
        MatchTuple { leaves }
    }
}

impl fmt::Display for MatchTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, label) in self.leaves.iter().enumerate() {
            if i > 0 {
                f.write_str("\t")?;
            }
            write!(f, "{label}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ResultSet {
    /// Sorted and duplicate-free.
    pub tuples: Vec<MatchTuple>,
    /// Distinct data nodes matched by the shallowest join point; for a query
    /// without join points, the matched leaf labels.
    pub jp_labels: Vec<DeweyLabel>,
}

impl ResultSet {
    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }
}

/// A position in a sorted label list.
#[derive(Debug, Clone, Copy)]
pub struct Cursor<'a> {
    list: LabelList<'a>,
    position: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(list: LabelList<'a>) -> Self {
        Cursor { list, position: 0 }
    }

    pub fn at(list: LabelList<'a>, position: usize) -> Self {
        assert!(position <= list.len(), "cursor past end of list");
        Cursor { list, position }
    }

    pub fn position(&self) -> usize {
        self.position
    }

    pub fn is_end(&self) -> bool {
        self.position >= self.list.len()
    }

    pub fn current(&self) -> Option<&'a DeweyLabel> {
        (!self.is_end()).then(|| self.list.get(self.position))
    }
}

fn level_prefix(label: &DeweyLabel, level: usize) -> &[u32] {
    label.prefix_slice(level).unwrap_or_else(|e| panic!("join level contract violated for {label}: {e}"))
}

/// Smallest position at or after `from` whose level-prefix is greater than
/// `bound`, or the list length. Gallops unless `log` asks for linear jumps.
fn jump_position(list: LabelList<'_>, from: usize, level: usize, bound: &[u32], log: Option<&AccessLog>) -> usize {
    let len = list.len();
    if let Some(log) = log {
        log.jumped();
    }
    let mut probes = 0u64;
    let mut within = |i: usize| {
        probes += 1;
        level_prefix(list.get(i), level) <= bound
    };
    let landing = if log.is_some_and(AccessLog::linear_jumps) {
        let mut i = from;
        while i < len && within(i) {
            i += 1;
        }
        i
    } else if from >= len || !within(from) {
        from.min(len)
    } else {
        // within(lo) holds; hi is the first known position past the bound
        let mut lo = from;
        let mut step = 1;
        let mut hi = loop {
            let probe = lo + step;
            if probe >= len {
                break len;
            }
            if within(probe) {
                lo = probe;
                step <<= 1;
            } else {
                break probe;
            }
        };
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if within(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };
    if let Some(log) = log {
        log.compared(probes);
    }
    landing
}

/// Advances `c` to the first label whose `level`-prefix is greater than
/// `bound`. `bound` must have exactly `level` components.
pub fn jump<'a>(c: Cursor<'a>, level: usize, bound: &[u32]) -> Cursor<'a> {
    debug_assert_eq!(bound.len(), level);
    let position = jump_position(c.list, c.position, level, bound, None);
    Cursor { list: c.list, position }
}

/// Same as [`jump`], reporting to `log`.
pub fn jump_logged<'a>(c: Cursor<'a>, level: usize, bound: &[u32], log: &AccessLog) -> Cursor<'a> {
    debug_assert_eq!(bound.len(), level);
    let position = jump_position(c.list, c.position, level, bound, Some(log));
    Cursor { list: c.list, position }
}

/// Calls `emit` once per prefix group shared by all lists, with the run of
/// each list holding that prefix. Groups arrive in ascending prefix order.
pub fn merge_groups<F>(lists: &[LabelList<'_>], level: usize, log: Option<&AccessLog>, mut emit: F)
where
    F: FnMut(&[Range<usize>]),
{
    if lists.is_empty() || lists.iter().any(LabelList::is_empty) {
        return;
    }
    let m = lists.len();
    let mut pos = vec![0usize; m];
    let mut runs: Vec<Range<usize>> = vec![0..0; m];
    loop {
        let heads: Vec<&[u32]> = (0..m).map(|i| level_prefix(lists[i].get(pos[i]), level)).collect();
        let mut min = heads[0];
        let mut max = heads[0];
        for head in &heads[1..] {
            if *head < min {
                min = head;
            }
            if *head > max {
                max = head;
            }
        }
        if let Some(log) = log {
            log.compared(2 * (m as u64 - 1));
        }
        if min == max {
            for i in 0..m {
                let end = jump_position(lists[i], pos[i], level, max, log);
                runs[i] = pos[i]..end;
                pos[i] = end;
            }
            emit(&runs);
            if (0..m).any(|i| pos[i] >= lists[i].len()) {
                return;
            }
        } else {
            let min = min.to_vec();
            for i in 0..m {
                if heads[i] == min.as_slice() {
                    pos[i] = jump_position(lists[i], pos[i], level, &min, log);
                    if pos[i] >= lists[i].len() {
                        return;
                    }
                }
            }
        }
    }
}

/// All pairs of labels from `a` and `b` with equal `level`-prefixes.
pub fn match_pair(a: &[DeweyLabel], b: &[DeweyLabel], level: usize) -> Vec<(DeweyLabel, DeweyLabel)> {
    let lists = [LabelList::untracked(a), LabelList::untracked(b)];
    let mut out = Vec::new();
    merge_groups(&lists, level, None, |runs| {
        for x in &a[runs[0].clone()] {
            for y in &b[runs[1].clone()] {
                out.push((x.clone(), y.clone()));
            }
        }
    });
    out
}

/// All M-tuples, one label per list, with pairwise equal `level`-prefixes.
pub fn match_multiway(lists: &[&[DeweyLabel]], level: usize) -> Vec<Vec<DeweyLabel>> {
    let wrapped: Vec<LabelList<'_>> = lists.iter().map(|l| LabelList::untracked(l)).collect();
    let mut out = Vec::new();
    merge_groups(&wrapped, level, None, |runs| {
        let mut partial: Vec<Vec<DeweyLabel>> = vec![Vec::new()];
        for (list, run) in lists.iter().zip(runs) {
            partial = partial
                .into_iter()
                .flat_map(|p| {
                    list[run.clone()].iter().map(move |x| {
                        let mut next = p.clone();
                        next.push(x.clone());
                        next
                    })
                })
                .collect();
        }
        out.extend(partial);
    });
    out
}

type Partial = Vec<Option<DeweyLabel>>;

/// Labels matched by one record for one shared prefix, per slot.
struct Group {
    record: usize,
    runs: Vec<Vec<DeweyLabel>>,
}

#[derive(Default)]
struct TableOutput {
    /// Join-point guide node -> join-point label -> groups.
    by_guide: BTreeMap<GuideId, BTreeMap<DeweyLabel, Vec<Group>>>,
    /// Sorted join-point labels per guide node, the stream a parent slot reads.
    streams: HashMap<GuideId, Vec<DeweyLabel>>,
}

struct Expander<'s> {
    schema: &'s DtSchema,
    outputs: &'s [TableOutput],
    width: usize,
    memo: HashMap<(usize, DeweyLabel), Rc<Vec<Partial>>>,
}

impl Expander<'_> {
    fn expand(&mut self, table: usize, guide: GuideId, label: &DeweyLabel) -> Rc<Vec<Partial>> {
        if let Some(done) = self.memo.get(&(table, label.clone())) {
            return Rc::clone(done);
        }
        let schema = self.schema;
        let outputs = self.outputs;
        let t = &schema.tables[table];
        let groups = outputs[table].by_guide.get(&guide).and_then(|m| m.get(label)).map_or(&[][..], Vec::as_slice);
        let mut result: BTreeSet<Partial> = BTreeSet::new();
        for group in groups {
            let record = &t.records[group.record];
            let mut partials: Vec<Partial> = vec![vec![None; self.width]];
            for (s, slot) in t.slots.iter().enumerate() {
                let run = &group.runs[s];
                let mut next = Vec::with_capacity(partials.len() * run.len());
                match *slot {
                    SlotKind::Branch(b) => {
                        for p in &partials {
                            for x in run {
                                let mut q = p.clone();
                                q[b] = Some(x.clone());
                                next.push(q);
                            }
                        }
                    }
                    SlotKind::Nested(child) => {
                        for y in run {
                            let subs = self.expand(child, record.ends[s], y);
                            for p in &partials {
                                for sub in subs.iter() {
                                    let mut q = p.clone();
                                    for (k, v) in sub.iter().enumerate() {
                                        if v.is_some() {
                                            q[k] = v.clone();
                                        }
                                    }
                                    next.push(q);
                                }
                            }
                        }
                    }
                }
                partials = next;
            }
            result.extend(partials);
        }
        let result = Rc::new(result.into_iter().collect::<Vec<_>>());
        self.memo.insert((table, label.clone()), Rc::clone(&result));
        result
    }
}

/// Evaluates `schema` deepest table first.
///
/// Branch slots merge guide extents; a nested slot merges the sorted
/// join-point labels produced by the deeper table for that guide node, so a
/// parent group only ever pairs with child groups that fully matched.
pub fn match_proc(schema: &DtSchema, pg: &PathGuide, d: &Decomposition, log: &AccessLog) -> ResultSet {
    let mut outputs: Vec<TableOutput> = Vec::with_capacity(schema.tables.len());
    for table in &schema.tables {
        let mut output = TableOutput::default();
        for (r, record) in table.records.iter().enumerate() {
            let empty: &[DeweyLabel] = &[];
            let lists: Vec<LabelList<'_>> = table
                .slots
                .iter()
                .zip(&record.ends)
                .map(|(slot, &g)| match *slot {
                    SlotKind::Branch(_) => LabelList::tracked(pg.extent(g).labels(), g, log),
                    SlotKind::Nested(child) => {
                        LabelList::untracked(outputs[child].streams.get(&g).map_or(empty, Vec::as_slice))
                    }
                })
                .collect();
            let level = record.jp_level;
            let per_label = output.by_guide.entry(record.jp_guide).or_default();
            merge_groups(&lists, level, Some(log), |runs| {
                let collected: Vec<Vec<DeweyLabel>> = lists
                    .iter()
                    .zip(runs)
                    .map(|(list, run)| run.clone().map(|i| list.get(i).clone()).collect())
                    .collect();
                let key = collected[0][0].prefix(level).expect("level checked by merge");
                per_label.entry(key).or_default().push(Group { record: r, runs: collected });
            });
        }
        output.streams = output.by_guide.iter().map(|(&g, labels)| (g, labels.keys().cloned().collect())).collect();
        outputs.push(output);
    }

    let top = schema.tables.len() - 1;
    let top_labels: Vec<(GuideId, DeweyLabel)> =
        outputs[top].by_guide.iter().flat_map(|(&g, labels)| labels.keys().map(move |l| (g, l.clone()))).collect();
    let mut expander = Expander { schema, outputs: &outputs, width: d.branches.len(), memo: HashMap::new() };
    let mut tuples: BTreeSet<MatchTuple> = BTreeSet::new();
    let mut jp_labels: BTreeSet<DeweyLabel> = BTreeSet::new();
    for (g, label) in top_labels {
        let partials = expander.expand(top, g, &label);
        for p in partials.iter() {
            let leaves = p.iter().map(|x| x.clone().expect("every leaf bound")).collect();
            tuples.insert(MatchTuple::new(leaves));
        }
        if !partials.is_empty() {
            jp_labels.insert(label);
        }
    }
    ResultSet { tuples: tuples.into_iter().collect(), jp_labels: jp_labels.into_iter().collect() }
}

/// Parsed, decomposed, and (for join queries) compiled query.
#[derive(Debug, Clone)]
pub struct Plan {
    pub twig: TwigPattern,
    pub decomposition: Decomposition,
    /// Guide nodes answering a single-branch query.
    pub direct: Vec<GuideId>,
    /// `None` for single-branch queries.
    pub schema: Option<DtSchema>,
}

impl Plan {
    pub fn new(pg: &PathGuide, twig: TwigPattern) -> Plan {
        let decomposition = split(&twig);
        if decomposition.jps.is_empty() {
            let direct = pg.eval_single_branch(&decomposition.branches[0]);
            Plan { twig, decomposition, direct, schema: None }
        } else {
            let schema = build_dt_schema(pg, &decomposition);
            Plan { twig, decomposition, direct: Vec::new(), schema: Some(schema) }
        }
    }

    pub fn explain(&self, pg: &PathGuide) -> String {
        match &self.schema {
            None => {
                let paths: Vec<String> = self.direct.iter().map(|&g| pg.path_string(g)).collect();
                format!(
                    "single-branch query {}: no DT required\nmatched guide nodes: {}\n",
                    self.decomposition.branches[0],
                    if paths.is_empty() { "none".to_owned() } else { paths.join(", ") }
                )
            }
            Some(schema) => crate::dt::explain(schema, pg, &self.decomposition),
        }
    }
}

/// Runs a plan. Single-branch plans read the matched extents directly.
pub fn execute(plan: &Plan, pg: &PathGuide, log: &AccessLog) -> ResultSet {
    match &plan.schema {
        None => {
            let mut labels: Vec<DeweyLabel> = Vec::new();
            for &g in &plan.direct {
                let list = LabelList::tracked(pg.extent(g).labels(), g, log);
                labels.extend((0..list.len()).map(|i| list.get(i).clone()));
            }
            labels.sort_unstable();
            ResultSet { tuples: labels.iter().map(|l| MatchTuple::new(vec![l.clone()])).collect(), jp_labels: labels }
        }
        Some(schema) if schema.is_empty() => ResultSet::default(),
        Some(schema) => match_proc(schema, pg, &plan.decomposition, log),
    }
}

/// Parse, plan, and run `query` against `index`.
pub fn evaluate(index: &Index, query: &str) -> Result<(ResultSet, Metrics), ParseError> {
    let twig = parse(query)?;
    Ok(evaluate_twig(index, &twig, &AccessLog::new()))
}

pub fn evaluate_twig(index: &Index, twig: &TwigPattern, log: &AccessLog) -> (ResultSet, Metrics) {
    let started = Instant::now();
    let plan = Plan::new(index.guide(), twig.clone());
    let result = execute(&plan, index.guide(), log);
    let mut metrics = log.snapshot();
    metrics.tables = plan.schema.as_ref().map_or(0, |s| s.tables.len());
    metrics.elapsed = started.elapsed();
    (result, metrics)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(items: &[&str]) -> Vec<DeweyLabel> {
        items.iter().map(|s| s.parse().unwrap()).collect()
    }

    #[test]
    fn jump_past_prefix() {
        let list = labels(&["1.2.2.1", "1.3.3.1", "1.3.4", "2.1.1"]);
        let c = Cursor::new(LabelList::untracked(&list));
        let c = jump(c, 2, &[1, 2]);
        assert_eq!(c.current().unwrap().to_string(), "1.3.3.1");
        let c = jump(c, 2, &[1, 3]);
        assert_eq!(c.position(), 3);
        let c = jump(c, 1, &[9]);
        assert!(c.is_end());
        assert!(c.current().is_none());
    }

    #[test]
    fn jump_is_a_no_op_when_already_past() {
        let list = labels(&["1.5", "1.6"]);
        let c = Cursor::at(LabelList::untracked(&list), 1);
        assert_eq!(jump(c, 1, &[0]).position(), 1);
    }

    #[test]
    fn pair_fixture() {
        let a = labels(&["1.1.1", "1.2.2.1", "1.3.2"]);
        let b = labels(&["1.1.2", "1.2.9", "1.3.3.1"]);
        let got: Vec<(String, String)> =
            match_pair(&a, &b, 2).into_iter().map(|(x, y)| (x.to_string(), y.to_string())).collect();
        let want: Vec<(String, String)> = [("1.1.1", "1.1.2"), ("1.2.2.1", "1.2.9"), ("1.3.2", "1.3.3.1")]
            .iter()
            .map(|(x, y)| (x.to_string(), y.to_string()))
            .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn pair_level_zero_is_cross_product() {
        let a = labels(&["1", "2.1"]);
        let b = labels(&["3", "4", "5.5"]);
        assert_eq!(match_pair(&a, &b, 0).len(), 6);
    }

    #[test]
    fn pair_disjoint_prefixes() {
        let a = labels(&["1.1", "3.1"]);
        let b = labels(&["2.1", "4.1"]);
        assert!(match_pair(&a, &b, 1).is_empty());
    }

    #[test]
    fn multiway_groups() {
        let a = labels(&["1.1", "2.1", "2.2"]);
        let b = labels(&["2.5", "3.1"]);
        let c = labels(&["1.9", "2.3", "2.4"]);
        let got = match_multiway(&[&a, &b, &c], 1);
        assert_eq!(got.len(), 4);
        assert!(got.iter().all(|t| t.iter().all(|l| l.components()[0] == 2)));
        assert!(match_multiway(&[&a, &[], &c], 1).is_empty());
        let pair = match_multiway(&[&a, &c], 1);
        let as_pairs: Vec<Vec<DeweyLabel>> = match_pair(&a, &c, 1).into_iter().map(|(x, y)| vec![x, y]).collect();
        assert_eq!(pair, as_pairs);
    }

    #[test]
    #[should_panic(expected = "join level contract")]
    fn level_beyond_label_is_reported() {
        let a = labels(&["1"]);
        match_pair(&a, &a, 2);
    }
}
