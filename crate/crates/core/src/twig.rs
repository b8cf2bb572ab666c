//! Twig patterns: parsing, printing, and decomposition into single-branch
//! queries joined at join points.
//!
//! Query syntax:
//!
//! ```text
//! Query     := ('/' | '//') Step (('/' | '//') Step)*
//! Step      := Test Predicate*
//! Test      := NAME | '*'
//! Predicate := '[' RelPath ']'
//! RelPath   := ('./' | './/')? Step (('/' | '//') Step)*
//! ```
//!
//! A predicate without a leading `./` or `.//` is a child step, as in
//! `/S/VP/PP[IN]/NP`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    Child,
    Descendant,
}

impl Axis {
    fn separator(self) -> &'static str {
        match self {
            Axis::Child => "/",
            Axis::Descendant => "//",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeTest {
    Name(String),
    Wildcard,
}

impl NodeTest {
    pub fn name(name: &str) -> Self {
        NodeTest::Name(name.to_owned())
    }

    pub fn matches(&self, tag: &str) -> bool {
        match self {
            NodeTest::Wildcard => true,
            NodeTest::Name(name) => name == tag,
        }
    }
}

impl fmt::Display for NodeTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeTest::Name(name) => f.write_str(name),
            NodeTest::Wildcard => f.write_str("*"),
        }
    }
}

/// One location step: the axis from the previous step (or from the virtual
/// document node, for the first step) plus a node test.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Step {
    pub axis: Axis,
    pub test: NodeTest,
}

impl Step {
    pub fn new(axis: Axis, test: NodeTest) -> Self {
        Step { axis, test }
    }
}

/// Prints steps as a path, e.g. `//A/B//*`.
pub fn format_steps(steps: &[Step]) -> String {
    let mut out = String::new();
    for step in steps {
        out.push_str(step.axis.separator());
        out.push_str(&step.test.to_string());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TwigNodeId(pub usize);

#[derive(Debug, Clone)]
pub struct TwigNode {
    pub test: NodeTest,
    /// Axis of the edge from the parent; for the root, from the document.
    pub axis: Axis,
    pub parent: Option<TwigNodeId>,
    pub children: Vec<TwigNodeId>,
}

/// A query tree. Node 0 is the root.
#[derive(Debug, Clone)]
pub struct TwigPattern {
    nodes: Vec<TwigNode>,
}

impl TwigPattern {
    pub fn new(axis: Axis, test: NodeTest) -> Self {
        TwigPattern { nodes: vec![TwigNode { test, axis, parent: None, children: Vec::new() }] }
    }

    pub fn root(&self) -> TwigNodeId {
        TwigNodeId(0)
    }

    pub fn add_child(&mut self, parent: TwigNodeId, axis: Axis, test: NodeTest) -> TwigNodeId {
        let id = TwigNodeId(self.nodes.len());
        self.nodes.push(TwigNode { test, axis, parent: Some(parent), children: Vec::new() });
        self.nodes[parent.0].children.push(id);
        id
    }

    pub fn node(&self, id: TwigNodeId) -> &TwigNode {
        &self.nodes[id.0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node ids in preorder.
    pub fn preorder(&self) -> Vec<TwigNodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root()];
        while let Some(id) = stack.pop() {
            out.push(id);
            stack.extend(self.node(id).children.iter().rev().copied());
        }
        out
    }

    /// End nodes in preorder. Query results list one label per leaf in this
    /// order.
    pub fn leaves(&self) -> Vec<TwigNodeId> {
        self.preorder().into_iter().filter(|&id| self.node(id).children.is_empty()).collect()
    }

    pub fn is_join_point(&self, id: TwigNodeId) -> bool {
        self.node(id).children.len() >= 2
    }

    pub fn depth(&self, mut id: TwigNodeId) -> usize {
        let mut depth = 0;
        while let Some(parent) = self.node(id).parent {
            depth += 1;
            id = parent;
        }
        depth
    }

    /// Steps from the root down to `id`, inclusive.
    pub fn steps_to(&self, id: TwigNodeId) -> Vec<Step> {
        let mut chain = vec![id];
        while let Some(parent) = self.node(*chain.last().unwrap()).parent {
            chain.push(parent);
        }
        chain.iter().rev().map(|&n| Step::new(self.node(n).axis, self.node(n).test.clone())).collect()
    }

    /// The shallowest join point, if any.
    pub fn top_join_point(&self) -> Option<TwigNodeId> {
        let mut id = self.root();
        loop {
            match self.node(id).children.len() {
                0 => return None,
                1 => id = self.node(id).children[0],
                _ => return Some(id),
            }
        }
    }

    fn subtree_eq(&self, a: TwigNodeId, other: &TwigPattern, b: TwigNodeId) -> bool {
        let (x, y) = (self.node(a), other.node(b));
        x.test == y.test
            && x.axis == y.axis
            && x.children.len() == y.children.len()
            && x.children.iter().zip(&y.children).all(|(&ca, &cb)| self.subtree_eq(ca, other, cb))
    }

    fn write_node(&self, id: TwigNodeId, out: &mut String) {
        let node = self.node(id);
        out.push_str(&node.test.to_string());
        if let Some((&trunk, predicates)) = node.children.split_last() {
            for &p in predicates {
                out.push_str("[.");
                out.push_str(self.node(p).axis.separator());
                self.write_node(p, out);
                out.push(']');
            }
            out.push_str(self.node(trunk).axis.separator());
            self.write_node(trunk, out);
        }
    }
}

/// Structural equality: same tests, axes, and child order.
impl PartialEq for TwigPattern {
    fn eq(&self, other: &Self) -> bool {
        self.subtree_eq(self.root(), other, other.root())
    }
}

impl Eq for TwigPattern {}

/// Canonical text: every child but the last is a predicate, the last child
/// continues the path.
impl fmt::Display for TwigPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::from(self.node(self.root()).axis.separator());
        self.write_node(self.root(), &mut out);
        f.write_str(&out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at position {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("empty step at position {pos}")]
    EmptyStep { pos: usize },
    #[error("unterminated predicate opened at position {pos}")]
    UnterminatedPredicate { pos: usize },
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
    twig: Option<TwigPattern>,
}

impl<'a> Parser<'a> {
    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn syntax(&self, message: impl Into<String>) -> ParseError {
        ParseError::Syntax { pos: self.pos, message: message.into() }
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.text.len() - trimmed.len();
    }

    fn axis(&mut self) -> Option<Axis> {
        self.skip_ws();
        if self.rest().starts_with("//") {
            self.pos += 2;
            Some(Axis::Descendant)
        } else if self.rest().starts_with('/') {
            self.pos += 1;
            Some(Axis::Child)
        } else {
            None
        }
    }

    fn test(&mut self) -> Result<NodeTest, ParseError> {
        self.skip_ws();
        let rest = self.rest();
        if rest.starts_with('*') {
            self.pos += 1;
            return Ok(NodeTest::Wildcard);
        }
        let mut end = 0;
        for (i, c) in rest.char_indices() {
            let ok = if i == 0 {
                c.is_alphabetic() || c == '_' || c == ':'
            } else {
                c.is_alphanumeric() || matches!(c, '_' | ':' | '-' | '.')
            };
            if !ok {
                break;
            }
            end = i + c.len_utf8();
        }
        if end == 0 {
            return match rest.chars().next() {
                None | Some('/') | Some('[') | Some(']') => Err(ParseError::EmptyStep { pos: self.pos }),
                Some(c) => Err(self.syntax(format!("unexpected character {c:?}"))),
            };
        }
        self.pos += end;
        Ok(NodeTest::Name(rest[..end].to_owned()))
    }

    /// Parses `Test Predicate*` and attaches it under `parent`.
    fn step(&mut self, parent: Option<TwigNodeId>, axis: Axis) -> Result<TwigNodeId, ParseError> {
        let test = self.test()?;
        let id = match (parent, self.twig.as_mut()) {
            (Some(parent), Some(twig)) => twig.add_child(parent, axis, test),
            _ => {
                self.twig = Some(TwigPattern::new(axis, test));
                TwigNodeId(0)
            }
        };
        loop {
            self.skip_ws();
            if !self.rest().starts_with('[') {
                break;
            }
            let open = self.pos;
            self.pos += 1;
            self.skip_ws();
            let first_axis = if self.rest().starts_with(".//") {
                self.pos += 3;
                Axis::Descendant
            } else if self.rest().starts_with("./") {
                self.pos += 2;
                Axis::Child
            } else {
                Axis::Child
            };
            self.path(id, first_axis)?;
            self.skip_ws();
            if !self.rest().starts_with(']') {
                if self.rest().is_empty() {
                    return Err(ParseError::UnterminatedPredicate { pos: open });
                }
                return Err(self.syntax("expected ']'"));
            }
            self.pos += 1;
        }
        Ok(id)
    }

    /// Parses `Step (('/'|'//') Step)*` below `parent`.
    fn path(&mut self, parent: TwigNodeId, first_axis: Axis) -> Result<(), ParseError> {
        let mut last = self.step(Some(parent), first_axis)?;
        while let Some(axis) = self.axis() {
            last = self.step(Some(last), axis)?;
        }
        Ok(())
    }

    fn query(mut self) -> Result<TwigPattern, ParseError> {
        let axis = self.axis().ok_or_else(|| self.syntax("query must start with '/' or '//'"))?;
        let mut last = self.step(None, axis)?;
        while let Some(axis) = self.axis() {
            last = self.step(Some(last), axis)?;
        }
        self.skip_ws();
        if !self.rest().is_empty() {
            return Err(self.syntax("unexpected trailing input"));
        }
        Ok(self.twig.expect("at least one step"))
    }
}

pub fn parse(text: &str) -> Result<TwigPattern, ParseError> {
    Parser { text, pos: 0, twig: None }.query()
}

/// Root-to-leaf path of one end node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SingleBranchQuery {
    pub steps: Vec<Step>,
    pub leaf: TwigNodeId,
}

impl fmt::Display for SingleBranchQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_steps(&self.steps))
    }
}

/// One child subtree of a join point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JpChild {
    pub node: TwigNodeId,
    /// Indices of the branches ending below this child.
    pub branches: Vec<usize>,
    /// The first join point inside this child's subtree, as an index into
    /// [`Decomposition::jps`]. `None` means the child is a plain branch.
    pub nested: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinPoint {
    pub node: TwigNodeId,
    /// Twig depth; the root is 0. Also the step index of the join point in
    /// every branch below it.
    pub depth: usize,
    pub children: Vec<JpChild>,
}

impl JoinPoint {
    /// Leaves below each child, the partition this join point imposes.
    pub fn partition(&self) -> Vec<Vec<usize>> {
        self.children.iter().map(|c| c.branches.clone()).collect()
    }

    pub fn first_branch(&self) -> usize {
        self.children[0].branches[0]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decomposition {
    pub branches: Vec<SingleBranchQuery>,
    /// Join points in twig preorder.
    pub jps: Vec<JoinPoint>,
}

impl Decomposition {
    /// Steps from the twig root to join point `jp`, inclusive.
    pub fn jp_steps(&self, jp: usize) -> &[Step] {
        let jp = &self.jps[jp];
        &self.branches[jp.first_branch()].steps[..=jp.depth]
    }

    /// Steps strictly below join point `jp` down to the end of child `child`:
    /// the leaf for a plain branch, the nested join point otherwise.
    pub fn child_steps(&self, jp: usize, child: usize) -> &[Step] {
        let point = &self.jps[jp];
        let c = &point.children[child];
        let steps = &self.branches[c.branches[0]].steps;
        match c.nested {
            None => &steps[point.depth + 1..],
            Some(nested) => &steps[point.depth + 1..=self.jps[nested].depth],
        }
    }

    /// Index of the shallowest join point.
    pub fn top_jp(&self) -> Option<usize> {
        (0..self.jps.len()).min_by_key(|&j| self.jps[j].depth)
    }

    /// Rebuilds the twig from the branches and the join-point partition.
    pub fn reassemble(&self) -> TwigPattern {
        let first = &self.branches[0].steps;
        let mut twig = TwigPattern::new(first[0].axis, first[0].test.clone());
        // node ids along each branch, indexed by step
        let mut chains: Vec<Vec<TwigNodeId>> = Vec::with_capacity(self.branches.len());
        for (i, branch) in self.branches.iter().enumerate() {
            let (shared_depth, donor) = (0..i).map(|j| (self.shared_depth(i, j), j)).max().unwrap_or((0, usize::MAX));
            let mut chain: Vec<TwigNodeId> =
                if donor == usize::MAX { vec![twig.root()] } else { chains[donor][..=shared_depth].to_vec() };
            for step in &branch.steps[chain.len()..] {
                let parent = *chain.last().unwrap();
                chain.push(twig.add_child(parent, step.axis, step.test.clone()));
            }
            chains.push(chain);
        }
        twig
    }

    /// Depth of the deepest join point where branches `a` and `b` meet.
    pub fn shared_depth(&self, a: usize, b: usize) -> usize {
        self.jps
            .iter()
            .filter(|jp| {
                let child_of = |x| jp.children.iter().position(|c| c.branches.contains(&x));
                matches!((child_of(a), child_of(b)), (Some(p), Some(q)) if p != q)
            })
            .map(|jp| jp.depth)
            .max()
            .unwrap_or(0)
    }
}

pub fn split(twig: &TwigPattern) -> Decomposition {
    let leaves = twig.leaves();
    let branches: Vec<SingleBranchQuery> =
        leaves.iter().map(|&leaf| SingleBranchQuery { steps: twig.steps_to(leaf), leaf }).collect();

    let jp_nodes: Vec<TwigNodeId> = twig.preorder().into_iter().filter(|&id| twig.is_join_point(id)).collect();

    let below = |node: TwigNodeId| -> Vec<usize> {
        let mut found = Vec::new();
        let mut stack = vec![node];
        while let Some(id) = stack.pop() {
            if twig.node(id).children.is_empty() {
                found.push(leaves.iter().position(|&l| l == id).expect("leaf"));
            }
            stack.extend(twig.node(id).children.iter().copied());
        }
        found.sort_unstable();
        found
    };
    let first_jp_under = |mut node: TwigNodeId| -> Option<usize> {
        loop {
            match twig.node(node).children.len() {
                0 => return None,
                1 => node = twig.node(node).children[0],
                _ => return jp_nodes.iter().position(|&j| j == node),
            }
        }
    };

    let jps = jp_nodes
        .iter()
        .map(|&node| JoinPoint {
            node,
            depth: twig.depth(node),
            children: twig
                .node(node)
                .children
                .iter()
                .map(|&child| JpChild { node: child, branches: below(child), nested: first_jp_under(child) })
                .collect(),
        })
        .collect();

    Decomposition { branches, jps }
}

/// Join points deepest first; ties go to the one whose leftmost leaf comes
/// first.
pub fn jp_order(d: &Decomposition) -> Vec<usize> {
    let mut order: Vec<usize> = (0..d.jps.len()).collect();
    order.sort_by_key(|&j| (std::cmp::Reverse(d.jps[j].depth), d.jps[j].first_branch()));
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    fn name(n: &str) -> NodeTest {
        NodeTest::name(n)
    }

    #[test]
    fn parses_book_query() {
        let twig = parse("//book[./title/xml]//author//jane").unwrap();
        let mut expected = TwigPattern::new(Axis::Descendant, name("book"));
        let title = expected.add_child(expected.root(), Axis::Child, name("title"));
        expected.add_child(title, Axis::Child, name("xml"));
        let author = expected.add_child(expected.root(), Axis::Descendant, name("author"));
        expected.add_child(author, Axis::Descendant, name("jane"));
        assert_eq!(twig, expected);
        assert_eq!(twig.top_join_point(), Some(twig.root()));
        assert_eq!(split(&twig).jps.len(), 1);
    }

    #[test]
    fn parses_chain_without_join_point() {
        let twig = parse("/site/people/person/gender").unwrap();
        assert_eq!(twig.len(), 4);
        assert_eq!(twig.leaves().len(), 1);
        assert_eq!(twig.top_join_point(), None);
        assert_eq!(twig.node(twig.root()).axis, Axis::Child);
    }

    #[test]
    fn parses_three_way_join() {
        let twig = parse("//A[./C][./D]/B").unwrap();
        let root = twig.node(twig.root());
        assert_eq!(root.children.len(), 3);
        let tests: Vec<String> = root.children.iter().map(|&c| twig.node(c).test.to_string()).collect();
        assert_eq!(tests, ["C", "D", "B"]);
        assert!(root.children.iter().all(|&c| twig.node(c).axis == Axis::Child));
        let d = split(&twig);
        assert_eq!(d.jps.len(), 1);
        assert_eq!(d.jps[0].children.len(), 3);
        // the missing slash form is rejected
        assert!(parse("//A[./C][./D]B").is_err());
    }

    #[test]
    fn bare_predicate_is_child_step() {
        let a = parse("/S/VP/PP[IN]/NP/VBN").unwrap();
        let b = parse("/S/VP/PP[./IN]/NP/VBN").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn syntax_errors() {
        assert!(matches!(parse("A/B"), Err(ParseError::Syntax { pos: 0, .. })));
        assert!(matches!(parse("//A//"), Err(ParseError::EmptyStep { pos: 5 })));
        assert!(matches!(parse("//A[./B"), Err(ParseError::UnterminatedPredicate { pos: 3 })));
        assert!(matches!(parse("//A[./B]]"), Err(ParseError::Syntax { pos: 8, .. })));
        assert!(matches!(parse("//A/#"), Err(ParseError::Syntax { pos: 4, .. })));
        assert!(matches!(parse(""), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse("//A[]"), Err(ParseError::EmptyStep { .. })));
    }

    #[test]
    fn print_is_canonical() {
        for q in ["//book[./title/xml]//author//jane", "//A[./C][./D]/B", "/a//*[.//b[./c]/d]/e", "/x"] {
            let twig = parse(q).unwrap();
            assert_eq!(twig.to_string(), q);
            assert_eq!(parse(&twig.to_string()).unwrap(), twig);
        }
        // a single predicate child prints as a plain path
        assert_eq!(parse("/A[./B]").unwrap().to_string(), "/A/B");
    }

    #[test]
    fn split_two_branches() {
        let d = split(&parse("//A[.//B]//C//D").unwrap());
        let texts: Vec<String> = d.branches.iter().map(|b| b.to_string()).collect();
        assert_eq!(texts, ["//A//B", "//A//C//D"]);
        assert_eq!(d.jps.len(), 1);
        assert_eq!(d.jps[0].depth, 0);
        assert_eq!(d.jps[0].partition(), vec![vec![0], vec![1]]);
    }

    #[test]
    fn split_chain() {
        let d = split(&parse("//A/B//C").unwrap());
        assert_eq!(d.branches.len(), 1);
        assert!(d.jps.is_empty());
        assert!(jp_order(&d).is_empty());
        assert_eq!(d.branches[0].steps.len(), 3);
    }

    #[test]
    fn split_nested_join_points() {
        let twig = parse("//A[.//B[./C]/D]//E").unwrap();
        assert_eq!(twig, parse("//A[.//B[./C][./D]]//E").unwrap());
        let d = split(&twig);
        assert_eq!(d.branches.len(), 3);
        assert_eq!(d.jps.len(), 2);
        let a = &d.jps[0];
        let b = &d.jps[1];
        assert_eq!(twig.node(a.node).test, name("A"));
        assert_eq!(twig.node(b.node).test, name("B"));
        assert_eq!(b.partition(), vec![vec![0], vec![1]]);
        assert_eq!(a.partition(), vec![vec![0, 1], vec![2]]);
        assert_eq!(a.children[0].nested, Some(1));
        assert_eq!(a.children[1].nested, None);
        assert_eq!(jp_order(&d), vec![1, 0]);
        assert_eq!(format_steps(d.jp_steps(1)), "//A//B");
        assert_eq!(format_steps(d.child_steps(0, 0)), "//B");
        assert_eq!(format_steps(d.child_steps(0, 1)), "//E");
        assert_eq!(format_steps(d.child_steps(1, 1)), "/D");
        assert_eq!(d.top_jp(), Some(0));
        assert_eq!(d.reassemble(), twig);
    }

    #[test]
    fn jp_order_ties_by_leftmost_leaf() {
        let twig = parse("//R[./X[./a][./b]]/Y[./c]/d").unwrap();
        let d = split(&twig);
        let order: Vec<String> = jp_order(&d).into_iter().map(|j| twig.node(d.jps[j].node).test.to_string()).collect();
        assert_eq!(order, ["X", "Y", "R"]);
    }
}
