//! Reference evaluators.
//!
//! [`naive_match`] embeds the twig into a fully materialized document by
//! plain structural recursion and is the ground truth for everything else.
//! [`leaf_scan_match`] is the tag-indexed baseline: it scans every extent
//! whose tag matches a query leaf, checks each label's path, and joins the
//! surviving labels on their join-point prefixes with no plan.

use std::collections::{BTreeSet, HashMap};
use std::rc::Rc;
use std::time::Instant;

use crate::dewey::DeweyLabel;
use crate::document::NodeEvent;
use crate::index::Index;
use crate::matcher::{MatchTuple, ResultSet};
use crate::metrics::{AccessLog, LabelList, Metrics};
use crate::path_guide::{GuideId, PathGuide};
use crate::twig::{jp_order, split, Axis, Step, TwigNodeId, TwigPattern};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocNode {
    pub label: DeweyLabel,
    pub tag: String,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// One past the last preorder index of this node's subtree.
    pub subtree_end: usize,
}

/// The whole document as a tree, nodes in preorder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaterializedDoc {
    pub nodes: Vec<DocNode>,
}

impl MaterializedDoc {
    /// Builds the tree from events in document order.
    pub fn from_events<I: IntoIterator<Item = NodeEvent>>(events: I) -> MaterializedDoc {
        let mut nodes: Vec<DocNode> = Vec::new();
        let mut stack: Vec<usize> = Vec::new();
        for event in events {
            while let Some(&top) = stack.last() {
                if nodes[top].label.is_ancestor_or_self(&event.label) {
                    break;
                }
                nodes[top].subtree_end = nodes.len();
                stack.pop();
            }
            let id = nodes.len();
            let parent = stack.last().copied();
            if let Some(p) = parent {
                nodes[p].children.push(id);
            }
            nodes.push(DocNode { label: event.label, tag: event.tag, parent, children: Vec::new(), subtree_end: 0 });
            stack.push(id);
        }
        for id in stack {
            nodes[id].subtree_end = nodes.len();
        }
        MaterializedDoc { nodes }
    }

    /// Rebuilds the document from the guide's extents.
    pub fn from_guide(pg: &PathGuide) -> MaterializedDoc {
        let mut events: Vec<NodeEvent> = pg
            .nodes()
            .iter()
            .flat_map(|n| pg.extent(n.id).labels().iter().map(|l| NodeEvent { label: l.clone(), tag: n.tag.clone() }))
            .collect();
        events.sort_by(|a, b| a.label.cmp(&b.label));
        MaterializedDoc::from_events(events)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Leaf bindings (doc node per leaf of a subtree, in leaf order) plus the
/// node bound to the top join point, if it lies in that subtree.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Embedding {
    leaves: Vec<usize>,
    jp: Option<usize>,
}

struct Naive<'a> {
    doc: &'a MaterializedDoc,
    twig: &'a TwigPattern,
    top_jp: Option<TwigNodeId>,
    memo: HashMap<(usize, usize), Rc<Vec<Embedding>>>,
    budget: usize,
}

impl Naive<'_> {
    fn candidates(&self, parent: usize, axis: Axis) -> Vec<usize> {
        let node = &self.doc.nodes[parent];
        match axis {
            Axis::Child => node.children.clone(),
            Axis::Descendant => (parent + 1..node.subtree_end).collect(),
        }
    }

    /// All embeddings of the twig subtree at `t` with `t` bound to doc node
    /// `x`. `None` once the budget is exhausted.
    fn embed(&mut self, t: TwigNodeId, x: usize) -> Option<Rc<Vec<Embedding>>> {
        if let Some(done) = self.memo.get(&(t.0, x)) {
            return Some(Rc::clone(done));
        }
        let tn = self.twig.node(t);
        let mut acc: Vec<Embedding> = Vec::new();
        if tn.test.matches(&self.doc.nodes[x].tag) {
            let jp = (Some(t) == self.top_jp).then_some(x);
            acc.push(Embedding { leaves: Vec::new(), jp });
            if tn.children.is_empty() {
                acc[0].leaves.push(x);
            }
            for &c in &tn.children {
                let axis = self.twig.node(c).axis;
                let mut below: BTreeSet<Embedding> = BTreeSet::new();
                for y in self.candidates(x, axis) {
                    below.extend(self.embed(c, y)?.iter().cloned());
                }
                let mut next = Vec::with_capacity(acc.len() * below.len());
                for a in &acc {
                    for b in &below {
                        let mut leaves = a.leaves.clone();
                        leaves.extend_from_slice(&b.leaves);
                        next.push(Embedding { leaves, jp: a.jp.or(b.jp) });
                    }
                }
                if next.len() > self.budget {
                    return None;
                }
                acc = next;
                if acc.is_empty() {
                    break;
                }
            }
        }
        let acc = Rc::new(acc);
        self.memo.insert((t.0, x), Rc::clone(&acc));
        Some(acc)
    }
}

/// Exhaustive matcher. Gives up with `None` if some intermediate result
/// exceeds `budget` embeddings.
pub fn naive_match_bounded(doc: &MaterializedDoc, twig: &TwigPattern, budget: usize) -> Option<ResultSet> {
    let mut naive = Naive { doc, twig, top_jp: twig.top_join_point(), memo: HashMap::new(), budget };
    let root = twig.node(twig.root());
    let starts: Vec<usize> = match root.axis {
        Axis::Child => vec![0],
        Axis::Descendant => (0..doc.nodes.len()).collect(),
    };
    let mut tuples: BTreeSet<MatchTuple> = BTreeSet::new();
    let mut jp_nodes: BTreeSet<usize> = BTreeSet::new();
    if doc.nodes.is_empty() {
        return Some(ResultSet::default());
    }
    for x in starts {
        for e in naive.embed(twig.root(), x)?.iter() {
            tuples.insert(MatchTuple::new(e.leaves.iter().map(|&n| doc.nodes[n].label.clone()).collect()));
            jp_nodes.insert(e.jp.unwrap_or(e.leaves[0]));
        }
        if tuples.len() > budget {
            return None;
        }
    }
    let mut jp_labels: Vec<DeweyLabel> = jp_nodes.into_iter().map(|n| doc.nodes[n].label.clone()).collect();
    jp_labels.sort();
    Some(ResultSet { tuples: tuples.into_iter().collect(), jp_labels })
}

pub fn naive_match(doc: &MaterializedDoc, twig: &TwigPattern) -> ResultSet {
    naive_match_bounded(doc, twig, usize::MAX).expect("unbounded")
}

/// Depths at which the steps listed in `pins` can sit when `steps` is
/// embedded into the root path `tags` with the last step on the last tag.
/// Each returned vector has one depth per pin, in pin order.
pub fn pinned_depths(tags: &[&str], steps: &[Step], pins: &[usize]) -> Vec<Vec<usize>> {
    fn go(
        tags: &[&str],
        steps: &[Step],
        pins: &[usize],
        i: usize,
        d: usize,
        memo: &mut HashMap<(usize, usize), Rc<Vec<Vec<usize>>>>,
    ) -> Rc<Vec<Vec<usize>>> {
        if let Some(done) = memo.get(&(i, d)) {
            return Rc::clone(done);
        }
        let mut out: Vec<Vec<usize>> = Vec::new();
        if steps[i].test.matches(tags[d]) {
            let here: Vec<usize> = if pins.contains(&i) { vec![d] } else { Vec::new() };
            if i + 1 == steps.len() {
                if d + 1 == tags.len() {
                    out.push(here);
                }
            } else {
                let next: Vec<usize> = match steps[i + 1].axis {
                    Axis::Child => (d + 1..tags.len().min(d + 2)).collect(),
                    Axis::Descendant => (d + 1..tags.len()).collect(),
                };
                for nd in next {
                    for tail in go(tags, steps, pins, i + 1, nd, memo).iter() {
                        let mut v = here.clone();
                        v.extend_from_slice(tail);
                        out.push(v);
                    }
                }
            }
        }
        out.sort();
        out.dedup();
        let out = Rc::new(out);
        memo.insert((i, d), Rc::clone(&out));
        out
    }

    if steps.is_empty() || tags.is_empty() {
        return Vec::new();
    }
    let mut memo = HashMap::new();
    let starts: Vec<usize> = match steps[0].axis {
        Axis::Child => vec![0],
        Axis::Descendant => (0..tags.len()).collect(),
    };
    let mut all: Vec<Vec<usize>> =
        starts.into_iter().flat_map(|d| go(tags, steps, pins, 0, d, &mut memo).as_ref().clone()).collect();
    all.sort();
    all.dedup();
    all
}

type Partial = Vec<Option<DeweyLabel>>;
type JoinKey = (Vec<usize>, DeweyLabel);
/// A leaf-tag label that passed the path check, with its pinned depths.
type Survivor = (DeweyLabel, Rc<Vec<Vec<usize>>>);

/// Tag-indexed baseline evaluation.
pub fn leaf_scan_match(index: &Index, twig: &TwigPattern, log: &AccessLog) -> (ResultSet, Metrics) {
    let started = Instant::now();
    let pg = index.guide();
    let d = split(twig);
    let width = d.branches.len();

    // JPs on each branch, shallowest first
    let mut chain: Vec<Vec<usize>> = vec![Vec::new(); width];
    for (j, jp) in d.jps.iter().enumerate() {
        for child in &jp.children {
            for &b in &child.branches {
                chain[b].push(j);
            }
        }
    }
    for c in &mut chain {
        c.sort_by_key(|&j| d.jps[j].depth);
    }

    // Scan the name index of every leaf and keep labels whose path fits.
    let mut scanned: Vec<Vec<Survivor>> = Vec::with_capacity(width);
    for (b, branch) in d.branches.iter().enumerate() {
        let leaf_test = &branch.steps.last().expect("non-empty branch").test;
        let sources: Vec<GuideId> = match leaf_test {
            crate::twig::NodeTest::Name(tag) => pg.nodes_with_tag(tag).to_vec(),
            crate::twig::NodeTest::Wildcard => pg.ids().collect(),
        };
        let pins: Vec<usize> = chain[b].iter().map(|&j| d.jps[j].depth).collect();
        let mut kept = Vec::new();
        for g in sources {
            let list = LabelList::tracked(pg.extent(g).labels(), g, log);
            let tags = pg.path_tags(g);
            let depths = Rc::new(pinned_depths(&tags, &branch.steps, &pins));
            for i in 0..list.len() {
                let label = list.get(i);
                if !depths.is_empty() {
                    kept.push((label.clone(), Rc::clone(&depths)));
                }
            }
        }
        kept.sort_by(|a, b| a.0.cmp(&b.0));
        scanned.push(kept);
    }

    let result = if d.jps.is_empty() {
        let labels: Vec<DeweyLabel> = scanned[0].iter().map(|(l, _)| l.clone()).collect();
        ResultSet { tuples: labels.iter().map(|l| MatchTuple::new(vec![l.clone()])).collect(), jp_labels: labels }
    } else {
        let mut rows: HashMap<usize, HashMap<JoinKey, Vec<Partial>>> = HashMap::new();
        for j in jp_order(&d) {
            let jp = &d.jps[j];
            let k = chain[jp.children[0].branches[0]].iter().position(|&x| x == j).expect("jp on chain");
            let mut joined: Option<HashMap<JoinKey, Vec<Partial>>> = None;
            for child in &jp.children {
                let mut slot: HashMap<JoinKey, Vec<Partial>> = HashMap::new();
                match child.nested {
                    None => {
                        let b = child.branches[0];
                        for (label, depths) in &scanned[b] {
                            for dv in depths.iter() {
                                let key = (dv[..=k].to_vec(), label.prefix(dv[k]).expect("pinned above leaf"));
                                let mut p = vec![None; width];
                                p[b] = Some(label.clone());
                                slot.entry(key).or_default().push(p);
                            }
                        }
                    }
                    Some(n) => {
                        for ((dv, label), parts) in rows.remove(&n).unwrap_or_default() {
                            let key = (dv[..=k].to_vec(), label.prefix(dv[k]).expect("pinned above child"));
                            slot.entry(key).or_default().extend(parts);
                        }
                    }
                }
                joined = Some(match joined {
                    None => slot,
                    Some(acc) => acc
                        .into_iter()
                        .filter_map(|(key, left)| {
                            let right = slot.get(&key)?;
                            let mut both = Vec::with_capacity(left.len() * right.len());
                            for l in &left {
                                for r in right {
                                    both.push(l.iter().zip(r).map(|(x, y)| x.clone().or_else(|| y.clone())).collect());
                                }
                            }
                            Some((key, both))
                        })
                        .collect(),
                });
            }
            rows.insert(j, joined.unwrap_or_default());
        }
        let top = d.top_jp().expect("has join points");
        let mut tuples: BTreeSet<MatchTuple> = BTreeSet::new();
        let mut jp_labels: BTreeSet<DeweyLabel> = BTreeSet::new();
        for ((_, label), parts) in rows.remove(&top).unwrap_or_default() {
            jp_labels.insert(label);
            for p in parts {
                tuples.insert(MatchTuple::new(p.into_iter().map(|x| x.expect("every leaf bound")).collect()));
            }
        }
        ResultSet { tuples: tuples.into_iter().collect(), jp_labels: jp_labels.into_iter().collect() }
    };
    let mut metrics = log.snapshot();
    metrics.elapsed = started.elapsed();
    (result, metrics)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::ingest_bytes;
    use crate::twig::parse;

    fn doc(xml: &str) -> MaterializedDoc {
        MaterializedDoc::from_events(ingest_bytes(xml.as_bytes()).unwrap())
    }

    fn strings(r: &ResultSet) -> Vec<String> {
        r.tuples.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn single_node() {
        let r = naive_match(&doc("<A/>"), &parse("/A").unwrap());
        assert_eq!(strings(&r), ["ε"]);
    }

    #[test]
    fn missing_leaf_means_no_answer() {
        let r = naive_match(&doc("<A><B/><C/></A>"), &parse("//A[.//B]//C//D").unwrap());
        assert!(r.is_empty());
    }

    #[test]
    fn hand_enumerated_twig() {
        let xml = "<A><B/><C><D/><D/></C><X><A><B/><C><D/></C></A></X></A>";
        // outer A=ε: B in {1, 3.1.1}, D in {2.1, 2.2, 3.1.2.1}
        // inner A=3.1: B=3.1.1, D=3.1.2.1 (already covered)
        let r = naive_match(&doc(xml), &parse("//A[.//B]//C//D").unwrap());
        assert_eq!(strings(&r), ["1\t2.1", "1\t2.2", "1\t3.1.2.1", "3.1.1\t2.1", "3.1.1\t2.2", "3.1.1\t3.1.2.1",]);
        let jps: Vec<String> = r.jp_labels.iter().map(|l| l.to_string()).collect();
        assert_eq!(jps, ["ε", "3.1"]);
    }

    #[test]
    fn doc_from_guide_matches_events() {
        let xml = b"<A><B><C/></B><C/><B/></A>";
        let events = ingest_bytes(xml).unwrap();
        let pg = PathGuide::build(events.clone()).unwrap();
        assert_eq!(MaterializedDoc::from_guide(&pg), MaterializedDoc::from_events(events));
        let d = MaterializedDoc::from_guide(&pg);
        assert_eq!(d.nodes[0].subtree_end, 5);
        assert_eq!(d.nodes[1].subtree_end, 3);
    }

    #[test]
    fn bounded_match_gives_up() {
        let xml = "<A><B/><B/><B/><C/><C/><C/></A>";
        let twig = parse("/A[./B]/C").unwrap();
        assert!(naive_match_bounded(&doc(xml), &twig, 4).is_none());
        assert_eq!(naive_match_bounded(&doc(xml), &twig, 9).unwrap().len(), 9);
    }

    #[test]
    fn pinned_depth_enumeration() {
        let s = |q: &str| split(&parse(q).unwrap()).branches[0].steps.clone();
        assert_eq!(pinned_depths(&["A", "X", "A", "B"], &s("//A//B"), &[0]), vec![vec![0], vec![2]]);
        assert_eq!(pinned_depths(&["A", "X", "A", "B"], &s("//A/B"), &[0]), vec![vec![2]]);
        assert!(pinned_depths(&["A", "B", "C"], &s("/B/C"), &[0]).is_empty());
        assert_eq!(pinned_depths(&["A", "B", "C"], &s("//*"), &[]), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn leaf_scan_agrees_and_reads_more() {
        let xml = "<R><A><B/><C/></A><X><B/><B/><C/></X><A><C/><B/></A></R>";
        let index = Index::from_xml_bytes(xml.as_bytes()).unwrap();
        let twig = parse("//A[./B]/C").unwrap();
        let truth = naive_match(&MaterializedDoc::from_guide(index.guide()), &twig);
        let (scan, scan_m) = leaf_scan_match(&index, &twig, &AccessLog::new());
        assert_eq!(scan, truth);
        let (dt, dt_m) = crate::matcher::evaluate_twig(&index, &twig, &AccessLog::new());
        assert_eq!(dt, truth);
        assert!(scan_m.nodes_read > dt_m.nodes_read, "{scan_m:?} vs {dt_m:?}");
    }
}
