//! Path summary of a document: one guide node per distinct root-to-node tag
//! path, each holding the sorted labels of the elements on that path.

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

use crate::dewey::DeweyLabel;
use crate::document::NodeEvent;
use crate::twig::{Axis, SingleBranchQuery, Step};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GuideId(pub u32);

impl GuideId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for GuideId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "g{}", self.0)
    }
}

/// Labels of one guide node, strictly ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExtentList {
    labels: Vec<DeweyLabel>,
}

impl ExtentList {
    /// Wraps `labels`, which must be strictly ascending.
    pub fn from_sorted(labels: Vec<DeweyLabel>) -> Option<Self> {
        labels.windows(2).all(|w| w[0] < w[1]).then_some(ExtentList { labels })
    }

    pub fn labels(&self) -> &[DeweyLabel] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Size of the compact encoding of every label.
    pub fn encoded_len(&self) -> usize {
        self.labels.iter().map(DeweyLabel::encoded_len).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuideNode {
    pub id: GuideId,
    pub tag: String,
    pub parent: Option<GuideId>,
    pub depth: usize,
    pub children: Vec<GuideId>,
    extent: ExtentList,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GuideError {
    #[error("element {label} has no open parent")]
    Orphan { label: DeweyLabel },
    #[error("element {label} is out of document order")]
    OutOfOrder { label: DeweyLabel },
    #[error("document has no elements")]
    Empty,
    #[error("guide node table is inconsistent: {0}")]
    Inconsistent(String),
}

#[derive(Debug)]
pub struct PathGuide {
    nodes: Vec<GuideNode>,
    tag_index: HashMap<String, Vec<GuideId>>,
    extent_reads: AtomicU64,
}

impl Clone for PathGuide {
    fn clone(&self) -> Self {
        PathGuide { nodes: self.nodes.clone(), tag_index: self.tag_index.clone(), extent_reads: AtomicU64::new(0) }
    }
}

impl PartialEq for PathGuide {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
    }
}

impl Eq for PathGuide {}

impl PathGuide {
    /// Builds the guide in one pass over events in document order.
    pub fn build<I>(events: I) -> Result<PathGuide, GuideError>
    where
        I: IntoIterator<Item = NodeEvent>,
    {
        let mut nodes: Vec<GuideNode> = Vec::new();
        // (guide node, data label) of each open element
        let mut stack: Vec<(GuideId, DeweyLabel)> = Vec::new();
        let mut last: Option<DeweyLabel> = None;
        for event in events {
            if let Some(prev) = &last {
                if event.label <= *prev {
                    return Err(GuideError::OutOfOrder { label: event.label });
                }
            }
            let depth = event.label.level();
            stack.truncate(depth);
            let parent = match stack.last() {
                None if depth == 0 && nodes.is_empty() => None,
                Some((gid, plabel)) if stack.len() == depth && plabel.is_ancestor_or_self(&event.label) => Some(*gid),
                _ => return Err(GuideError::Orphan { label: event.label }),
            };
            let existing = parent
                .and_then(|p| nodes[p.index()].children.iter().copied().find(|c| nodes[c.index()].tag == event.tag));
            let gid = match existing {
                Some(gid) => gid,
                None => {
                    let gid = GuideId(nodes.len() as u32);
                    nodes.push(GuideNode {
                        id: gid,
                        tag: event.tag.clone(),
                        parent,
                        depth,
                        children: Vec::new(),
                        extent: ExtentList::default(),
                    });
                    if let Some(p) = parent {
                        nodes[p.index()].children.push(gid);
                    }
                    gid
                }
            };
            nodes[gid.index()].extent.labels.push(event.label.clone());
            last = Some(event.label.clone());
            stack.push((gid, event.label));
        }
        if nodes.is_empty() {
            return Err(GuideError::Empty);
        }
        Ok(Self::from_nodes_unchecked(nodes))
    }

    fn from_nodes_unchecked(nodes: Vec<GuideNode>) -> PathGuide {
        let mut tag_index: HashMap<String, Vec<GuideId>> = HashMap::new();
        for node in &nodes {
            tag_index.entry(node.tag.clone()).or_default().push(node.id);
        }
        PathGuide { nodes, tag_index, extent_reads: AtomicU64::new(0) }
    }

    /// Reassembles a guide from its node table, as stored in an index file.
    /// `parents[i]` and `extents[i]` belong to guide node `i`.
    pub fn from_parts(
        tags: Vec<String>,
        parents: Vec<Option<GuideId>>,
        depths: Vec<usize>,
        extents: Vec<ExtentList>,
    ) -> Result<PathGuide, GuideError> {
        let n = tags.len();
        if n == 0 {
            return Err(GuideError::Empty);
        }
        if parents.len() != n || depths.len() != n || extents.len() != n {
            return Err(GuideError::Inconsistent("column lengths differ".into()));
        }
        let mut nodes: Vec<GuideNode> = Vec::with_capacity(n);
        for (i, ((tag, parent), (depth, extent))) in
            tags.into_iter().zip(parents).zip(depths.into_iter().zip(extents)).enumerate()
        {
            match parent {
                None if i == 0 && depth == 0 => {}
                Some(p) if p.index() < i && nodes[p.index()].depth + 1 == depth => {
                    let siblings = &nodes[p.index()].children;
                    if siblings.iter().any(|s| nodes[s.index()].tag == tag) {
                        return Err(GuideError::Inconsistent(format!("duplicate child tag {tag} at node {i}")));
                    }
                    nodes[p.index()].children.push(GuideId(i as u32));
                }
                _ => return Err(GuideError::Inconsistent(format!("bad parent or depth at node {i}"))),
            }
            if extent.is_empty() || extent.labels.iter().any(|l| l.level() != depth) {
                return Err(GuideError::Inconsistent(format!("bad extent at node {i}")));
            }
            nodes.push(GuideNode { id: GuideId(i as u32), tag, parent, depth, children: Vec::new(), extent });
        }
        Ok(Self::from_nodes_unchecked(nodes))
    }

    pub fn root(&self) -> GuideId {
        GuideId(0)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: GuideId) -> &GuideNode {
        &self.nodes[id.index()]
    }

    pub fn nodes(&self) -> &[GuideNode] {
        &self.nodes
    }

    pub fn ids(&self) -> impl Iterator<Item = GuideId> + '_ {
        (0..self.nodes.len() as u32).map(GuideId)
    }

    /// Guide nodes carrying `tag`, ascending.
    pub fn nodes_with_tag(&self, tag: &str) -> &[GuideId] {
        self.tag_index.get(tag).map_or(&[], Vec::as_slice)
    }

    /// Extent of `id`. Every call is counted; see [`PathGuide::extent_reads`].
    pub fn extent(&self, id: GuideId) -> &ExtentList {
        self.extent_reads.fetch_add(1, Ordering::Relaxed);
        &self.nodes[id.index()].extent
    }

    /// Number of [`PathGuide::extent`] calls so far.
    pub fn extent_reads(&self) -> u64 {
        self.extent_reads.load(Ordering::Relaxed)
    }

    /// Number of elements in the document.
    pub fn element_count(&self) -> usize {
        self.nodes.iter().map(|n| n.extent.len()).sum()
    }

    /// Tags from the guide root down to `id`.
    pub fn path_tags(&self, id: GuideId) -> Vec<&str> {
        let mut tags = Vec::with_capacity(self.node(id).depth + 1);
        let mut cur = Some(id);
        while let Some(c) = cur {
            tags.push(self.node(c).tag.as_str());
            cur = self.node(c).parent;
        }
        tags.reverse();
        tags
    }

    /// `/A/B/C` form of the root path of `id`.
    pub fn path_string(&self, id: GuideId) -> String {
        self.path_tags(id).iter().map(|t| format!("/{t}")).collect()
    }

    pub fn is_ancestor_or_self(&self, a: GuideId, mut b: GuideId) -> bool {
        let target = self.node(a).depth;
        while self.node(b).depth > target {
            b = self.node(b).parent.expect("non-root has a parent");
        }
        a == b
    }

    /// Guide nodes strictly below `from` whose path segment below `from`
    /// matches `steps`; the first step's axis is relative to `from`. With
    /// `from = None` the steps are matched from the virtual document node,
    /// so the guide root itself is a candidate for the first step.
    pub fn eval_from(&self, from: Option<GuideId>, steps: &[Step]) -> Vec<GuideId> {
        let mut out = Vec::new();
        if steps.is_empty() {
            return out;
        }
        let start: &[GuideId] = match from {
            None => std::slice::from_ref(&self.nodes[0].id),
            Some(id) => &self.node(id).children,
        };
        // Each guide node has exactly one root path, so every node is visited
        // once with the set of step positions still pending at its parent.
        let mut work: Vec<(GuideId, Vec<usize>)> = start.iter().rev().map(|&g| (g, vec![0])).collect();
        while let Some((gid, pending)) = work.pop() {
            let node = self.node(gid);
            let mut next: Vec<usize> = Vec::new();
            let mut hit = false;
            for &i in &pending {
                let step = &steps[i];
                if step.test.matches(&node.tag) {
                    if i + 1 == steps.len() {
                        hit = true;
                    } else {
                        next.push(i + 1);
                    }
                }
                if step.axis == Axis::Descendant {
                    next.push(i);
                }
            }
            if hit {
                out.push(gid);
            }
            next.sort_unstable();
            next.dedup();
            if !next.is_empty() {
                work.extend(node.children.iter().rev().map(|&c| (c, next.clone())));
            }
        }
        out.sort_unstable();
        out
    }

    /// Guide nodes whose root path matches the whole branch. Reads no extent.
    pub fn eval_single_branch(&self, q: &SingleBranchQuery) -> Vec<GuideId> {
        self.eval_steps(&q.steps)
    }

    pub fn eval_steps(&self, steps: &[Step]) -> Vec<GuideId> {
        self.eval_from(None, steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::ingest_bytes;
    use crate::twig::{parse, split};

    fn guide(xml: &str) -> PathGuide {
        PathGuide::build(ingest_bytes(xml.as_bytes()).unwrap()).unwrap()
    }

    fn eval(pg: &PathGuide, q: &str) -> Vec<String> {
        let d = split(&parse(q).unwrap());
        pg.eval_single_branch(&d.branches[0]).into_iter().map(|g| pg.path_string(g)).collect()
    }

    #[test]
    fn homonymous_siblings_share_a_node() {
        let pg = guide("<A><B/><B/></A>");
        assert_eq!(pg.len(), 2);
        let b = pg.node(GuideId(1));
        assert_eq!(b.tag, "B");
        let labels: Vec<String> = pg.extent(b.id).labels().iter().map(|l| l.to_string()).collect();
        assert_eq!(labels, ["1", "2"]);
    }

    #[test]
    fn same_tag_on_different_paths() {
        let pg = guide("<A><B><C/></B><C/></A>");
        let paths: Vec<String> = pg.ids().map(|g| pg.path_string(g)).collect();
        assert_eq!(paths, ["/A", "/A/B", "/A/B/C", "/A/C"]);
        assert_eq!(pg.nodes_with_tag("C"), &[GuideId(2), GuideId(3)]);
        assert_eq!(pg.element_count(), 4);
    }

    #[test]
    fn single_branch_evaluation() {
        let pg = guide("<A><B/><B/></A>");
        assert_eq!(eval(&pg, "/A/B"), ["/A/B"]);
        let pg = guide("<A><B><C/></B><C/></A>");
        assert_eq!(eval(&pg, "//C"), ["/A/B/C", "/A/C"]);
        assert_eq!(eval(&pg, "/A/C"), ["/A/C"]);
        assert_eq!(eval(&pg, "/A//C"), ["/A/B/C", "/A/C"]);
        assert_eq!(eval(&pg, "/A/*/C"), ["/A/B/C"]);
        assert_eq!(eval(&pg, "//A"), ["/A"]);
        assert_eq!(eval(&pg, "/B"), Vec::<String>::new());
        assert_eq!(eval(&pg, "//*//*"), ["/A/B", "/A/B/C", "/A/C"]);
    }

    #[test]
    fn recursive_tags() {
        let pg = guide("<A><X><A><B/></A></X><B/></A>");
        assert_eq!(eval(&pg, "//A/B"), ["/A/X/A/B", "/A/B"]);
        assert_eq!(eval(&pg, "//A//A/B"), ["/A/X/A/B"]);
        assert_eq!(eval(&pg, "/A/B"), ["/A/B"]);
    }

    #[test]
    fn evaluation_reads_no_extents() {
        let pg = guide("<A><B><C/></B><C/></A>");
        let before = pg.extent_reads();
        eval(&pg, "//A//*");
        assert_eq!(pg.extent_reads(), before);
    }

    #[test]
    fn build_rejects_bad_streams() {
        let events = ingest_bytes(b"<A><B><C/></B></A>").unwrap();
        let mut skipped = events.clone();
        skipped.remove(1);
        assert!(matches!(PathGuide::build(skipped), Err(GuideError::Orphan { .. })));
        let mut reversed = ingest_bytes(b"<A><B/><C/></A>").unwrap();
        reversed.swap(1, 2);
        assert!(matches!(PathGuide::build(reversed), Err(GuideError::OutOfOrder { .. })));
        assert_eq!(PathGuide::build(Vec::new()), Err(GuideError::Empty));
    }
}
