//! In-memory index and its on-disk form.
//!
//! File layout, all integers little-endian:
//!
//! ```text
//! header   magic "GTWIGIDX", u32 version, u64 element count,
//!          u32 guide node count, u32 max depth
//! guide    per node: u32 id, u32 parent (u32::MAX for the root),
//!          u32 depth, u32 tag length, tag bytes (UTF-8)
//! extents  per node: u64 label count, u64 byte length, encoded labels
//! footer   u32 CRC-32 of every preceding byte
//! ```
//!
//! Labels inside an extent block are stored back to back; every label of a
//! block has the owning node's depth as its level, which delimits them.

use std::io::{self, BufRead};
use std::path::Path;

use thiserror::Error;

use crate::dewey::{decode_prefixed, encode_into, LabelError};
use crate::document::{ingest, IngestError};
use crate::path_guide::{ExtentList, GuideError, GuideId, PathGuide};

pub const MAGIC: &[u8; 8] = b"GTWIGIDX";
pub const FORMAT_VERSION: u32 = 1;
const NO_PARENT: u32 = u32::MAX;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Guide(#[from] GuideError),
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("not an index file (bad magic)")]
    BadMagic,
    #[error("unsupported index format version {0}")]
    Version(u32),
    #[error("index checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("index file truncated")]
    Truncated,
    #[error("corrupt index: {0}")]
    Corrupt(String),
    #[error("corrupt label in extent of guide node {node}: {source}")]
    Label { node: u32, source: LabelError },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Index {
    guide: PathGuide,
}

impl Index {
    pub fn new(guide: PathGuide) -> Self {
        Index { guide }
    }

    pub fn from_xml<R: BufRead>(input: R) -> Result<Index, IndexError> {
        let events = ingest(input).collect::<Result<Vec<_>, _>>()?;
        Ok(Index::new(PathGuide::build(events)?))
    }

    pub fn from_xml_bytes(xml: &[u8]) -> Result<Index, IndexError> {
        Index::from_xml(xml)
    }

    pub fn guide(&self) -> &PathGuide {
        &self.guide
    }

    pub fn element_count(&self) -> usize {
        self.guide.element_count()
    }

    pub fn max_depth(&self) -> usize {
        self.guide.nodes().iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Total size of the encoded extent blocks.
    pub fn extent_bytes(&self) -> u64 {
        self.guide.nodes().iter().map(|n| self.guide.extent(n.id).encoded_len() as u64).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let pg = &self.guide;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.element_count() as u64).to_le_bytes());
        out.extend_from_slice(&(pg.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.max_depth() as u32).to_le_bytes());
        for node in pg.nodes() {
            out.extend_from_slice(&node.id.0.to_le_bytes());
            out.extend_from_slice(&node.parent.map_or(NO_PARENT, |p| p.0).to_le_bytes());
            out.extend_from_slice(&(node.depth as u32).to_le_bytes());
            out.extend_from_slice(&(node.tag.len() as u32).to_le_bytes());
            out.extend_from_slice(node.tag.as_bytes());
        }
        let mut block = Vec::new();
        for node in pg.nodes() {
            let extent = pg.extent(node.id);
            block.clear();
            for label in extent.labels() {
                encode_into(label, &mut block);
            }
            out.extend_from_slice(&(extent.len() as u64).to_le_bytes());
            out.extend_from_slice(&(block.len() as u64).to_le_bytes());
            out.extend_from_slice(&block);
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Index, IndexError> {
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
            return Err(IndexError::BadMagic);
        }
        if bytes.len() < MAGIC.len() + 4 + 4 {
            return Err(IndexError::Truncated);
        }
        let (body, footer) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(footer.try_into().expect("4 bytes"));
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(IndexError::Checksum { stored, computed });
        }

        let mut r = ByteReader { bytes: body, at: MAGIC.len() };
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(IndexError::Version(version));
        }
        let element_count = r.u64()?;
        let node_count = r.u32()? as usize;
        let _max_depth = r.u32()?;

        let mut tags = Vec::with_capacity(node_count);
        let mut parents = Vec::with_capacity(node_count);
        let mut depths = Vec::with_capacity(node_count);
        for i in 0..node_count {
            let id = r.u32()?;
            if id as usize != i {
                return Err(IndexError::Corrupt(format!("guide node {i} stored as {id}")));
            }
            let parent = r.u32()?;
            parents.push((parent != NO_PARENT).then_some(GuideId(parent)));
            depths.push(r.u32()? as usize);
            let len = r.u32()? as usize;
            let tag = std::str::from_utf8(r.take(len)?)
                .map_err(|_| IndexError::Corrupt(format!("tag of guide node {i} is not UTF-8")))?;
            tags.push(tag.to_owned());
        }

        let mut extents = Vec::with_capacity(node_count);
        for (i, &depth) in depths.iter().enumerate() {
            let count = r.u64()? as usize;
            let len = r.u64()? as usize;
            let mut block = r.take(len)?;
            let mut labels = Vec::with_capacity(count.min(block.len() + 1));
            for _ in 0..count {
                let (label, used) =
                    decode_prefixed(block, depth).map_err(|source| IndexError::Label { node: i as u32, source })?;
                labels.push(label);
                block = &block[used..];
            }
            if !block.is_empty() {
                return Err(IndexError::Corrupt(format!("extent {i} has trailing bytes")));
            }
            let extent = ExtentList::from_sorted(labels)
                .ok_or_else(|| IndexError::Corrupt(format!("extent {i} is not sorted")))?;
            extents.push(extent);
        }
        if r.at != body.len() {
            return Err(IndexError::Corrupt("trailing bytes before checksum".into()));
        }

        let guide = PathGuide::from_parts(tags, parents, depths, extents)?;
        if guide.element_count() as u64 != element_count {
            return Err(IndexError::Corrupt("element count does not match extents".into()));
        }
        Ok(Index::new(guide))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), IndexError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Index, IndexError> {
        Index::from_bytes(&std::fs::read(path)?)
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IndexError> {
        let end = self.at.checked_add(n).ok_or(IndexError::Truncated)?;
        if end > self.bytes.len() {
            return Err(IndexError::Truncated);
        }
        let out = &self.bytes[self.at..end];
        self.at = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, IndexError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, IndexError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
