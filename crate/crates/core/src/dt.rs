//! DataTables: the search plan compiled from single-branch results on the
//! path guide.
//!
//! A record names, for one join point, the guide nodes whose extents must be
//! merged and the prefix level at which their labels have to agree. Building
//! the plan only walks the guide; no extent is touched.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::path_guide::{GuideId, PathGuide};
use crate::twig::{format_steps, jp_order, Decomposition, Step};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SlotKind {
    /// A plain branch, by index into [`Decomposition::branches`]. The slot
    /// holds the guide node of the branch end.
    Branch(usize),
    /// A nested join point, by index into [`DtSchema::tables`]. The slot holds
    /// the guide node of that join point.
    Nested(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DtRecord {
    pub ends: Vec<GuideId>,
    pub jp_level: usize,
    pub jp_guide: GuideId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataTable {
    /// Index into [`Decomposition::jps`].
    pub jp: usize,
    pub slots: Vec<SlotKind>,
    pub records: Vec<DtRecord>,
}

impl DataTable {
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// DataTables in evaluation order, deepest join point first. The last table
/// belongs to the shallowest join point and yields the query answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DtSchema {
    pub tables: Vec<DataTable>,
}

impl DtSchema {
    pub fn top(&self) -> &DataTable {
        self.tables.last().expect("schema has at least one table")
    }

    /// An empty top table means the query has no answer.
    pub fn is_empty(&self) -> bool {
        self.top().is_empty()
    }

    /// Every guide node named in a branch slot of some record.
    pub fn branch_guides(&self) -> BTreeSet<GuideId> {
        let mut out = BTreeSet::new();
        for table in &self.tables {
            for record in &table.records {
                for (slot, end) in table.slots.iter().zip(&record.ends) {
                    if matches!(slot, SlotKind::Branch(_)) {
                        out.insert(*end);
                    }
                }
            }
        }
        out
    }

    /// `(parent table, slot)` consuming the output of each table; `None` for
    /// the top table.
    pub fn linkage(&self) -> Vec<Option<(usize, usize)>> {
        let mut out = vec![None; self.tables.len()];
        for (t, table) in self.tables.iter().enumerate() {
            for (s, slot) in table.slots.iter().enumerate() {
                if let SlotKind::Nested(child) = slot {
                    out[*child] = Some((t, s));
                }
            }
        }
        out
    }
}

/// One column of a DataTable under construction.
#[derive(Debug, Clone, Copy)]
pub struct SlotInput<'a> {
    /// Steps from just below the join point to the slot's node.
    pub steps: &'a [Step],
    /// Guide nodes allowed in this column, ascending.
    pub candidates: &'a [GuideId],
}

fn intersect_sorted(a: &[GuideId], b: &[GuideId]) -> Vec<GuideId> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// Records for one join point.
///
/// For every guide node `g` matching `jp_steps` and every choice of one
/// candidate per slot lying below `g` along that slot's steps, emits
/// `(choice, depth(g), g)`. A candidate tuple may join at several `g` when
/// descendant axes let the join point sit at different depths.
pub fn build_dt(pg: &PathGuide, jp_steps: &[Step], slots: &[SlotInput<'_>]) -> Vec<DtRecord> {
    if slots.iter().any(|s| s.candidates.is_empty()) {
        return Vec::new();
    }
    let mut records = Vec::new();
    'jp: for g in pg.eval_steps(jp_steps) {
        let mut columns: Vec<Vec<GuideId>> = Vec::with_capacity(slots.len());
        for slot in slots {
            let column = intersect_sorted(&pg.eval_from(Some(g), slot.steps), slot.candidates);
            if column.is_empty() {
                continue 'jp;
            }
            columns.push(column);
        }
        let level = pg.node(g).depth;
        let mut choice = vec![0usize; columns.len()];
        loop {
            records.push(DtRecord {
                ends: choice.iter().zip(&columns).map(|(&i, col)| col[i]).collect(),
                jp_level: level,
                jp_guide: g,
            });
            // odometer over the columns, last column fastest
            let mut k = columns.len();
            loop {
                if k == 0 {
                    continue 'jp;
                }
                k -= 1;
                choice[k] += 1;
                if choice[k] < columns[k].len() {
                    break;
                }
                choice[k] = 0;
            }
        }
    }
    records
}

/// DataTables for every join point of `d`, deepest first.
///
/// # Panics
///
/// If `d` has no join point; single-branch queries need no plan.
pub fn build_dt_schema(pg: &PathGuide, d: &Decomposition) -> DtSchema {
    assert!(!d.jps.is_empty(), "a query without join points needs no DataTable");
    let order = jp_order(d);
    let mut table_of: HashMap<usize, usize> = HashMap::new();
    let mut branch_results: HashMap<usize, Vec<GuideId>> = HashMap::new();
    let mut tables: Vec<DataTable> = Vec::with_capacity(order.len());

    for &j in &order {
        let jp = &d.jps[j];
        let mut slots = Vec::with_capacity(jp.children.len());
        let mut candidates: Vec<Vec<GuideId>> = Vec::with_capacity(jp.children.len());
        for child in &jp.children {
            match child.nested {
                Some(n) => {
                    let t = table_of[&n];
                    slots.push(SlotKind::Nested(t));
                    let mut guides: Vec<GuideId> = tables[t].records.iter().map(|r| r.jp_guide).collect();
                    guides.sort_unstable();
                    guides.dedup();
                    candidates.push(guides);
                }
                None => {
                    let b = child.branches[0];
                    slots.push(SlotKind::Branch(b));
                    let result = branch_results.entry(b).or_insert_with(|| pg.eval_single_branch(&d.branches[b]));
                    candidates.push(result.clone());
                }
            }
        }
        let inputs: Vec<SlotInput<'_>> =
            (0..slots.len()).map(|c| SlotInput { steps: d.child_steps(j, c), candidates: &candidates[c] }).collect();
        let records = build_dt(pg, d.jp_steps(j), &inputs);
        table_of.insert(j, tables.len());
        tables.push(DataTable { jp: j, slots, records });
    }

    // Keep only deeper records some shallower record actually consumes.
    for t in (0..tables.len()).rev() {
        let (lower, upper) = tables.split_at_mut(t);
        let table = &upper[0];
        for (s, slot) in table.slots.iter().enumerate() {
            if let SlotKind::Nested(child) = *slot {
                let used: BTreeSet<GuideId> = table.records.iter().map(|r| r.ends[s]).collect();
                lower[child].records.retain(|r| used.contains(&r.jp_guide));
            }
        }
    }

    DtSchema { tables }
}

/// Human-readable plan.
pub fn explain(schema: &DtSchema, pg: &PathGuide, d: &Decomposition) -> String {
    let mut out = String::new();
    for (t, table) in schema.tables.iter().enumerate() {
        let _ = writeln!(
            out,
            "DT{} join point {} ({} records)",
            t + 1,
            format_steps(d.jp_steps(table.jp)),
            table.records.len()
        );
        for (s, slot) in table.slots.iter().enumerate() {
            let what = match slot {
                SlotKind::Branch(b) => format!("branch {} {}", b + 1, d.branches[*b]),
                SlotKind::Nested(c) => format!("output of DT{}", c + 1),
            };
            let _ = writeln!(out, "  column {}: {} via {}", s + 1, what, format_steps(d.child_steps(table.jp, s)));
        }
        for record in &table.records {
            let ends: Vec<String> = record.ends.iter().map(|&e| pg.path_string(e)).collect();
            let _ = writeln!(
                out,
                "  [{}] join at {} level {}",
                ends.join(", "),
                pg.path_string(record.jp_guide),
                record.jp_level
            );
        }
    }
    if schema.is_empty() {
        out.push_str("plan is empty: no answer\n");
    }
    out
}
