//! Dewey (hierarchical) labels.
//!
//! A label lists the 1-based child ordinals on the way down from the document
//! element, which itself carries the empty label `ε`. Labels order like
//! document preorder: component-wise, with a proper prefix sorting before its
//! extensions.
//!
//! The compact byte form encodes every component as an order-preserving
//! variable-length integer, so concatenated encodings compare bytewise exactly
//! like the component sequences they came from:
//!
//! | first byte  | extra bytes | payload bits |
//! |-------------|-------------|--------------|
//! | `0xxxxxxx`  | 0           | 7            |
//! | `10xxxxxx`  | 1           | 14           |
//! | `110xxxxx`  | 2           | 21           |
//! | `1110xxxx`  | 3           | 28           |
//! | `11110xxx`  | 4           | 35           |
//!
//! Payload bits are big-endian. A value must use the shortest class that
//! holds it; anything else is rejected on decode.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelError {
    #[error("child ordinal must be at least 1")]
    ZeroOrdinal,
    #[error("prefix level {level} exceeds label level {available}")]
    PrefixTooLong { level: usize, available: usize },
    #[error("truncated label encoding at byte {0}")]
    Truncated(usize),
    #[error("non-canonical label encoding at byte {0}")]
    NonCanonical(usize),
    #[error("invalid label text {0:?}")]
    Syntax(String),
}

/// Hierarchical node identifier. The document element is `ε`.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DeweyLabel(Vec<u32>);

impl DeweyLabel {
    /// The empty label of the document element.
    pub fn root() -> Self {
        DeweyLabel(Vec::new())
    }

    pub fn from_components(components: Vec<u32>) -> Result<Self, LabelError> {
        if components.contains(&0) {
            return Err(LabelError::ZeroOrdinal);
        }
        Ok(DeweyLabel(components))
    }

    pub fn components(&self) -> &[u32] {
        &self.0
    }

    pub fn level(&self) -> usize {
        self.0.len()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    /// Label of the `n`-th child of `self`.
    pub fn child(&self, n: u32) -> Result<Self, LabelError> {
        if n == 0 {
            return Err(LabelError::ZeroOrdinal);
        }
        let mut components = Vec::with_capacity(self.0.len() + 1);
        components.extend_from_slice(&self.0);
        components.push(n);
        Ok(DeweyLabel(components))
    }

    /// The ancestor-or-self of `self` at `level`.
    pub fn prefix(&self, level: usize) -> Result<Self, LabelError> {
        self.prefix_slice(level).map(|p| DeweyLabel(p.to_vec()))
    }

    /// Borrowed form of [`DeweyLabel::prefix`].
    pub fn prefix_slice(&self, level: usize) -> Result<&[u32], LabelError> {
        if level > self.0.len() {
            return Err(LabelError::PrefixTooLong { level, available: self.0.len() });
        }
        Ok(&self.0[..level])
    }

    pub fn is_ancestor_or_self(&self, other: &DeweyLabel) -> bool {
        other.0.starts_with(&self.0)
    }

    /// Number of bytes [`encode`] produces for this label.
    pub fn encoded_len(&self) -> usize {
        self.0.iter().map(|&c| component_width(c)).sum()
    }
}

pub fn child_label(parent: &DeweyLabel, n: u32) -> Result<DeweyLabel, LabelError> {
    parent.child(n)
}

pub fn prefix(label: &DeweyLabel, level: usize) -> Result<DeweyLabel, LabelError> {
    label.prefix(level)
}

pub fn compare(a: &DeweyLabel, b: &DeweyLabel) -> Ordering {
    a.cmp(b)
}

pub fn is_ancestor_or_self(a: &DeweyLabel, b: &DeweyLabel) -> bool {
    a.is_ancestor_or_self(b)
}

impl fmt::Display for DeweyLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("ε");
        }
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for DeweyLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "⟨{self}⟩")
    }
}

/// Accepts the dotted form `1.3.7`, the slashed form `1/2/2/1`, and `ε` (or
/// the empty string) for the root.
impl FromStr for DeweyLabel {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() || s == "ε" {
            return Ok(DeweyLabel::root());
        }
        let sep = if s.contains('/') { '/' } else { '.' };
        let components = s
            .split(sep)
            .map(|part| part.parse::<u32>().map_err(|_| LabelError::Syntax(s.to_owned())))
            .collect::<Result<Vec<_>, _>>()?;
        DeweyLabel::from_components(components)
    }
}

const CLASS_LIMITS: [u64; 5] = [1 << 7, 1 << 14, 1 << 21, 1 << 28, 1 << 35];
const CLASS_TAGS: [u8; 5] = [0x00, 0x80, 0xC0, 0xE0, 0xF0];
const CLASS_MASKS: [u8; 5] = [0x7F, 0x3F, 0x1F, 0x0F, 0x07];

fn component_width(c: u32) -> usize {
    CLASS_LIMITS.iter().position(|&limit| u64::from(c) < limit).map_or(5, |class| class + 1)
}

fn encode_component(c: u32, out: &mut Vec<u8>) {
    let width = component_width(c);
    let class = width - 1;
    let value = u64::from(c);
    let first = CLASS_TAGS[class] | ((value >> (8 * class)) as u8 & CLASS_MASKS[class]);
    out.push(first);
    for i in (0..class).rev() {
        out.push((value >> (8 * i)) as u8);
    }
}

/// Appends the compact form of `label` to `out`.
pub fn encode_into(label: &DeweyLabel, out: &mut Vec<u8>) {
    for &c in &label.0 {
        encode_component(c, out);
    }
}

pub fn encode(label: &DeweyLabel) -> Vec<u8> {
    let mut out = Vec::with_capacity(label.encoded_len());
    encode_into(label, &mut out);
    out
}

/// Decodes one component starting at `bytes[at]`; returns the value and the
/// number of bytes consumed.
fn decode_component(bytes: &[u8], at: usize) -> Result<(u32, usize), LabelError> {
    let first = bytes[at];
    let class = first.leading_ones() as usize;
    if class > 4 {
        return Err(LabelError::NonCanonical(at));
    }
    let end = at + class + 1;
    if end > bytes.len() {
        return Err(LabelError::Truncated(bytes.len()));
    }
    let mut value = u64::from(first & CLASS_MASKS[class]);
    for &b in &bytes[at + 1..end] {
        value = (value << 8) | u64::from(b);
    }
    let floor = if class == 0 { 1 } else { CLASS_LIMITS[class - 1] };
    if value < floor || value > u64::from(u32::MAX) {
        return Err(LabelError::NonCanonical(at));
    }
    Ok((value as u32, class + 1))
}

pub fn decode(bytes: &[u8]) -> Result<DeweyLabel, LabelError> {
    let mut components = Vec::new();
    let mut at = 0;
    while at < bytes.len() {
        let (c, used) = decode_component(bytes, at)?;
        components.push(c);
        at += used;
    }
    Ok(DeweyLabel(components))
}

/// Decodes a label of exactly `level` components from the front of `bytes`,
/// returning it with the number of bytes consumed. Extent blocks store labels
/// back to back without separators; the owning guide node fixes the level.
pub fn decode_prefixed(bytes: &[u8], level: usize) -> Result<(DeweyLabel, usize), LabelError> {
    let mut components = Vec::with_capacity(level);
    let mut at = 0;
    for _ in 0..level {
        if at >= bytes.len() {
            return Err(LabelError::Truncated(at));
        }
        let (c, used) = decode_component(bytes, at)?;
        components.push(c);
        at += used;
    }
    Ok((DeweyLabel(components), at))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l(s: &str) -> DeweyLabel {
        s.parse().unwrap()
    }

    #[test]
    fn child_label_extends_parent() {
        assert_eq!(child_label(&l("1.3"), 7).unwrap(), l("1.3.7"));
        assert_eq!(child_label(&DeweyLabel::root(), 1).unwrap(), l("1"));
        let ten = child_label(&l("2"), 10).unwrap();
        assert_eq!(ten.components(), &[2, 10]);
        assert_eq!(child_label(&l("2"), 0), Err(LabelError::ZeroOrdinal));
    }

    #[test]
    fn prefix_levels() {
        assert_eq!(prefix(&l("1/2/2/1"), 2).unwrap(), l("1.2"));
        assert_eq!(prefix(&l("1.3.7"), 0).unwrap(), DeweyLabel::root());
        assert_eq!(prefix(&l("1.3.7"), 3).unwrap(), l("1.3.7"));
        assert_eq!(prefix(&l("1.3.7"), 4), Err(LabelError::PrefixTooLong { level: 4, available: 3 }));
    }

    #[test]
    fn compare_examples() {
        assert_eq!(compare(&l("1.2.2.1"), &l("1.3.3.1")), Ordering::Less);
        assert_eq!(compare(&l("1.3"), &l("1.3.7")), Ordering::Less);
        assert_eq!(compare(&l("1.10"), &l("1.9")), Ordering::Greater);
    }

    #[test]
    fn ancestor_examples() {
        assert!(is_ancestor_or_self(&l("1.2"), &l("1.2.2.1")));
        assert!(!is_ancestor_or_self(&l("1.2"), &l("1.3.3.1")));
        assert!(is_ancestor_or_self(&DeweyLabel::root(), &l("4.5.6")));
    }

    #[test]
    fn text_forms() {
        assert_eq!(DeweyLabel::root().to_string(), "ε");
        assert_eq!(l("1/2/2/1").to_string(), "1.2.2.1");
        assert!("1..2".parse::<DeweyLabel>().is_err());
        assert!("1.0".parse::<DeweyLabel>().is_err());
    }

    #[test]
    fn encoding_basics() {
        assert!(encode(&DeweyLabel::root()).is_empty());
        assert_eq!(decode(&encode(&l("1.3.7"))).unwrap(), l("1.3.7"));
        assert_eq!(encode(&l("1.3.7")), vec![1, 3, 7]);
        // class boundaries
        for c in [127u32, 128, 16383, 16384, (1 << 21) - 1, 1 << 21, (1 << 28) - 1, 1 << 28, u32::MAX] {
            let label = DeweyLabel::from_components(vec![c]).unwrap();
            let bytes = encode(&label);
            assert_eq!(bytes.len(), label.encoded_len());
            assert_eq!(decode(&bytes).unwrap(), label);
        }
    }

    #[test]
    fn decode_rejects_bad_input() {
        // 2-byte class with a payload that fits in one byte
        assert_eq!(decode(&[0x80, 0x05]), Err(LabelError::NonCanonical(0)));
        // zero ordinal
        assert_eq!(decode(&[0x00]), Err(LabelError::NonCanonical(0)));
        // missing continuation byte
        assert_eq!(decode(&[0x01, 0xC0, 0x01]), Err(LabelError::Truncated(3)));
        // 5 leading ones is not a class
        assert_eq!(decode(&[0xF8]), Err(LabelError::NonCanonical(0)));
        // above u32
        assert_eq!(decode(&[0xF7, 0xFF, 0xFF, 0xFF, 0xFF]), Err(LabelError::NonCanonical(0)));
    }

    #[test]
    fn decode_prefixed_splits_concatenation() {
        let mut bytes = encode(&l("1.300"));
        bytes.extend(encode(&l("2.5")));
        let (first, used) = decode_prefixed(&bytes, 2).unwrap();
        assert_eq!(first, l("1.300"));
        let (second, rest) = decode_prefixed(&bytes[used..], 2).unwrap();
        assert_eq!(second, l("2.5"));
        assert_eq!(used + rest, bytes.len());
        assert!(decode_prefixed(&bytes[..2], 2).is_err());
    }
}
