//! XML ingestion into Dewey-labeled element events, and the random tree
//! generator used for the synthetic workloads.

use std::io::{BufRead, Write};

use quick_xml::events::Event;
use quick_xml::Reader;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dewey::DeweyLabel;

pub const DEFAULT_MAX_ELEMENT_DEPTH: usize = 64;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed XML at byte {offset}: {message}")]
    Malformed { offset: u64, message: String },
    #[error("element nesting at byte {offset} exceeds the depth limit of {limit}")]
    TooDeep { offset: u64, limit: usize },
    #[error("I/O error while reading XML: {0}")]
    Io(#[from] std::io::Error),
}

/// One element of the input, in document order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeEvent {
    pub label: DeweyLabel,
    pub tag: String,
}

impl NodeEvent {
    pub fn depth(&self) -> usize {
        self.label.level()
    }
}

/// Streaming element labeler. Yields one [`NodeEvent`] per element in
/// preorder; everything that is not an element is skipped.
pub struct Ingest<R: BufRead> {
    reader: Reader<R>,
    buf: Vec<u8>,
    /// Ordinal handed to the next child, one entry per open element.
    next_ordinal: Vec<u32>,
    /// Label of the innermost open element.
    path: Vec<u32>,
    max_depth: usize,
    seen_root: bool,
    done: bool,
}

pub fn ingest<R: BufRead>(input: R) -> Ingest<R> {
    Ingest::with_depth_limit(input, DEFAULT_MAX_ELEMENT_DEPTH)
}

/// Convenience wrapper collecting every event of an in-memory document.
pub fn ingest_bytes(xml: &[u8]) -> Result<Vec<NodeEvent>, IngestError> {
    ingest(xml).collect()
}

impl<R: BufRead> Ingest<R> {
    pub fn with_depth_limit(input: R, max_depth: usize) -> Self {
        let mut reader = Reader::from_reader(input);
        reader.config_mut().check_end_names = true;
        Ingest {
            reader,
            buf: Vec::new(),
            next_ordinal: Vec::new(),
            path: Vec::new(),
            max_depth,
            seen_root: false,
            done: false,
        }
    }

    fn malformed(&self, message: impl Into<String>) -> IngestError {
        IngestError::Malformed { offset: self.reader.buffer_position(), message: message.into() }
    }

    /// Opens an element; returns its event. `empty` elements are closed
    /// immediately.
    fn open(&mut self, tag: String, empty: bool) -> Result<NodeEvent, IngestError> {
        let label = if self.next_ordinal.is_empty() {
            if self.seen_root {
                return Err(self.malformed("more than one document element"));
            }
            self.seen_root = true;
            DeweyLabel::root()
        } else {
            let depth = self.next_ordinal.len();
            if depth >= self.max_depth {
                return Err(IngestError::TooDeep { offset: self.reader.buffer_position(), limit: self.max_depth });
            }
            let slot = self.next_ordinal.last_mut().expect("open element");
            let ordinal = *slot;
            *slot += 1;
            self.path.push(ordinal);
            DeweyLabel::from_components(self.path.clone()).expect("ordinals start at 1")
        };
        if empty {
            if !self.next_ordinal.is_empty() {
                self.path.pop();
            }
        } else {
            self.next_ordinal.push(1);
        }
        Ok(NodeEvent { label, tag })
    }

    fn close(&mut self) -> Result<(), IngestError> {
        if self.next_ordinal.pop().is_none() {
            return Err(self.malformed("unexpected end tag"));
        }
        if !self.next_ordinal.is_empty() {
            self.path.pop();
        }
        Ok(())
    }

    fn step(&mut self) -> Result<Option<NodeEvent>, IngestError> {
        loop {
            self.buf.clear();
            let event = match self.reader.read_event_into(&mut self.buf) {
                Ok(event) => event,
                Err(err) => {
                    return Err(IngestError::Malformed {
                        offset: self.reader.error_position(),
                        message: err.to_string(),
                    })
                }
            };
            match event {
                Event::Start(start) => {
                    let tag = String::from_utf8_lossy(start.name().as_ref()).into_owned();
                    return self.open(tag, false).map(Some);
                }
                Event::Empty(start) => {
                    let tag = String::from_utf8_lossy(start.name().as_ref()).into_owned();
                    return self.open(tag, true).map(Some);
                }
                Event::End(_) => self.close()?,
                Event::Text(text) => {
                    let outside = self.next_ordinal.is_empty();
                    if outside && text.iter().any(|b| !b.is_ascii_whitespace()) {
                        return Err(self.malformed("text outside the document element"));
                    }
                }
                Event::CData(_) if self.next_ordinal.is_empty() => {
                    return Err(self.malformed("CDATA outside the document element"));
                }
                Event::Eof => {
                    if !self.next_ordinal.is_empty() {
                        return Err(self.malformed("unclosed element at end of input"));
                    }
                    if !self.seen_root {
                        return Err(self.malformed("no document element"));
                    }
                    return Ok(None);
                }
                _ => {}
            }
        }
    }
}

impl<R: BufRead> Iterator for Ingest<R> {
    type Item = Result<NodeEvent, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.step() {
            Ok(Some(event)) => Some(Ok(event)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(err) => {
                self.done = true;
                Some(Err(err))
            }
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("max_depth must be at least 1")]
    ZeroDepth,
    #[error("max_fanout must be at least 1")]
    ZeroFanout,
    #[error("tag alphabet is empty")]
    EmptyAlphabet,
    #[error("{0:?} is not a usable element name")]
    BadTag(String),
}

/// Shape of a synthetic document. Depth counts levels, so the document
/// element alone is depth 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorConfig {
    pub max_depth: usize,
    pub max_fanout: usize,
    pub tag_alphabet: Vec<String>,
    pub seed: u64,
    pub target_node_count: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            max_depth: 12,
            max_fanout: 10,
            tag_alphabet: ["A", "B", "C", "D", "E", "F"].map(String::from).to_vec(),
            seed: 0,
            target_node_count: 100_000,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_depth == 0 {
            return Err(ConfigError::ZeroDepth);
        }
        if self.max_fanout == 0 {
            return Err(ConfigError::ZeroFanout);
        }
        if self.tag_alphabet.is_empty() {
            return Err(ConfigError::EmptyAlphabet);
        }
        for tag in &self.tag_alphabet {
            if !is_simple_name(tag) {
                return Err(ConfigError::BadTag(tag.clone()));
            }
        }
        Ok(())
    }
}

pub(crate) fn is_simple_name(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generated {
    pub xml: Vec<u8>,
    pub node_count: usize,
}

struct Generator<'a, W: Write> {
    config: &'a GeneratorConfig,
    rng: ChaCha8Rng,
    out: W,
    emitted: usize,
}

impl<W: Write> Generator<'_, W> {
    fn budget_left(&self) -> bool {
        self.emitted < self.config.target_node_count.max(1)
    }

    fn node(&mut self, depth: usize) -> std::io::Result<()> {
        let tag = self.config.tag_alphabet.choose(&mut self.rng).expect("validated alphabet").clone();
        self.emitted += 1;
        let children = if depth >= self.config.max_depth { 0 } else { self.rng.gen_range(0..=self.config.max_fanout) };
        if children == 0 || !self.budget_left() {
            return write!(self.out, "<{tag}/>");
        }
        write!(self.out, "<{tag}>")?;
        for _ in 0..children {
            if !self.budget_left() {
                break;
            }
            self.node(depth + 1)?;
        }
        write!(self.out, "</{tag}>")
    }
}

/// Writes a random document to `out` and returns the number of elements.
///
/// Top-down recursive expansion: every node draws its child count uniformly
/// from `0..=max_fanout` (none at `max_depth`) and every child draws its tag
/// uniformly from the alphabet. No element is created once
/// `target_node_count` elements exist.
pub fn generate_to<W: Write>(config: &GeneratorConfig, out: W) -> Result<usize, GenerateError> {
    config.validate()?;
    let mut generator = Generator { config, rng: ChaCha8Rng::seed_from_u64(config.seed), out, emitted: 0 };
    generator.node(1)?;
    Ok(generator.emitted)
}

pub fn generate(config: &GeneratorConfig) -> Result<Generated, GenerateError> {
    let mut xml = Vec::new();
    let node_count = generate_to(config, &mut xml)?;
    Ok(Generated { xml, node_count })
}

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("I/O error while writing XML: {0}")]
    Io(#[from] std::io::Error),
}
