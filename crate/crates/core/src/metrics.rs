//! Access accounting for query evaluation.
//!
//! `nodes_read` and `bytes_scanned` count distinct extent labels materialized
//! during one evaluation: a label touched twice (by a jump probe and again as
//! a run member, say) is counted once, the way a block read from disk is
//! paid for once.

use std::cell::{Cell, RefCell};
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::time::Duration;

use crate::dewey::DeweyLabel;
use crate::path_guide::GuideId;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Metrics {
    pub nodes_read: u64,
    pub bytes_scanned: u64,
    pub prefix_comparisons: u64,
    pub jumps: u64,
    /// Number of DataTables built for the query.
    pub tables: usize,
    /// Guide nodes whose extent was read.
    pub extents_read: BTreeSet<GuideId>,
    pub elapsed: Duration,
}

impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "nodes_read={}, bytes_scanned={}, micros={}",
            self.nodes_read,
            self.bytes_scanned,
            self.elapsed.as_micros()
        )
    }
}

/// Per-evaluation access log. Single-threaded; one per query.
#[derive(Debug, Default)]
pub struct AccessLog {
    linear_jumps: bool,
    touched: RefCell<HashMap<GuideId, Vec<bool>>>,
    nodes_read: Cell<u64>,
    bytes_scanned: Cell<u64>,
    prefix_comparisons: Cell<u64>,
    jumps: Cell<u64>,
}

impl AccessLog {
    pub fn new() -> Self {
        AccessLog::default()
    }

    /// A log whose jumps scan forward one label at a time instead of
    /// galloping.
    pub fn linear() -> Self {
        AccessLog { linear_jumps: true, ..AccessLog::default() }
    }

    pub fn linear_jumps(&self) -> bool {
        self.linear_jumps
    }

    pub(crate) fn touch(&self, source: GuideId, len: usize, pos: usize, label: &DeweyLabel) {
        let mut touched = self.touched.borrow_mut();
        let seen = touched.entry(source).or_insert_with(|| vec![false; len]);
        if !seen[pos] {
            seen[pos] = true;
            self.nodes_read.set(self.nodes_read.get() + 1);
            self.bytes_scanned.set(self.bytes_scanned.get() + label.encoded_len() as u64);
        }
    }

    /// Registers an extent as opened even if no label ends up being read.
    pub(crate) fn open(&self, source: GuideId, len: usize) {
        self.touched.borrow_mut().entry(source).or_insert_with(|| vec![false; len]);
    }

    pub(crate) fn compared(&self, n: u64) {
        self.prefix_comparisons.set(self.prefix_comparisons.get() + n);
    }

    pub(crate) fn jumped(&self) {
        self.jumps.set(self.jumps.get() + 1);
    }

    pub fn nodes_read(&self) -> u64 {
        self.nodes_read.get()
    }

    pub fn snapshot(&self) -> Metrics {
        Metrics {
            nodes_read: self.nodes_read.get(),
            bytes_scanned: self.bytes_scanned.get(),
            prefix_comparisons: self.prefix_comparisons.get(),
            jumps: self.jumps.get(),
            tables: 0,
            extents_read: self.touched.borrow().keys().copied().collect(),
            elapsed: Duration::ZERO,
        }
    }
}

/// A sorted label list that reports reads to an [`AccessLog`] when it comes
/// from an extent.
#[derive(Debug, Clone, Copy)]
pub struct LabelList<'a> {
    labels: &'a [DeweyLabel],
    source: Option<(GuideId, &'a AccessLog)>,
}

impl<'a> LabelList<'a> {
    pub fn untracked(labels: &'a [DeweyLabel]) -> Self {
        LabelList { labels, source: None }
    }

    pub fn tracked(labels: &'a [DeweyLabel], source: GuideId, log: &'a AccessLog) -> Self {
        log.open(source, labels.len());
        LabelList { labels, source: Some((source, log)) }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Reads label `pos`.
    pub fn get(&self, pos: usize) -> &'a DeweyLabel {
        let label = &self.labels[pos];
        if let Some((source, log)) = self.source {
            log.touch(source, self.labels.len(), pos, label);
        }
        label
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeated_reads_count_once() {
        let labels: Vec<DeweyLabel> = ["1.1", "1.200", "2.1"].iter().map(|s| s.parse().unwrap()).collect();
        let log = AccessLog::new();
        let list = LabelList::tracked(&labels, GuideId(3), &log);
        list.get(1);
        list.get(1);
        list.get(0);
        let m = log.snapshot();
        assert_eq!(m.nodes_read, 2);
        assert_eq!(m.bytes_scanned, 3 + 2);
        assert_eq!(m.extents_read.into_iter().collect::<Vec<_>>(), vec![GuideId(3)]);
        LabelList::untracked(&labels).get(2);
        assert_eq!(log.nodes_read(), 2);
    }

    #[test]
    fn metrics_line_format() {
        let m = Metrics { nodes_read: 5, bytes_scanned: 12, elapsed: Duration::from_micros(34), ..Default::default() };
        assert_eq!(m.to_string(), "nodes_read=5, bytes_scanned=12, micros=34");
    }
}
