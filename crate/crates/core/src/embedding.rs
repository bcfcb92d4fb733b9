//! Entity embeddings: a deterministic toy embedder and a loader for
//! embedding tables exported offline (one JSON record per line).

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// FNV-1a 64-bit offset basis, used to hash character trigrams.
pub const TRIGRAM_HASH_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
/// FNV-1a 64-bit prime.
pub const TRIGRAM_HASH_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Dimension used for toy embeddings when no table dimension is available.
pub const DEFAULT_TOY_DIM: usize = 64;

/// Lowercase, trim, and collapse internal whitespace runs to one space.
pub fn normalize_text(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::input("embedding vector must have dim >= 1"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!("embedding value at index {i} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(self.0.iter().map(|v| v * c).collect())
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(TRIGRAM_HASH_OFFSET, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(TRIGRAM_HASH_PRIME)
    })
}

/// Deterministic stand-in encoder.
///
/// The normalized text is wrapped as `^text$` and every character trigram
/// is hashed with FNV-1a. The low bits pick one of `dim` buckets, bits 32..48
/// give a weight in `[0.5, 1.5)` added to that bucket. The accumulated vector
/// is scaled to unit Euclidean norm. All weights are positive, so the vector
/// is never zero.
pub fn embed_toy(text: &str, dim: usize) -> Result<EmbeddingVector> {
    if dim < 2 {
        return Err(Error::config(format!("toy embedding dim must be >= 2, got {dim}")));
    }
    let norm = normalize_text(text);
    if norm.is_empty() {
        return Err(Error::input("entity text is empty after normalization"));
    }
    let chars: Vec<char> = std::iter::once('^')
        .chain(norm.chars())
        .chain(std::iter::once('$'))
        .collect();
    let mut acc = vec![0.0f64; dim];
    let mut buf = [0u8; 12];
    for tri in chars.windows(3) {
        let mut len = 0;
        for c in tri {
            len += c.encode_utf8(&mut buf[len..]).len();
        }
        let h = fnv1a(&buf[..len]);
        let bucket = (h % dim as u64) as usize;
        let weight = 0.5 + ((h >> 32) & 0xffff) as f64 / 65536.0;
        acc[bucket] += weight;
    }
    let n = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
    acc.iter_mut().for_each(|v| *v /= n);
    EmbeddingVector::new(acc)
}

/// Immutable map from normalized entity text to vectors of one shared dimension.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingTable {
    entries: BTreeMap<String, EmbeddingVector>,
    dim: Option<usize>,
    source_tag: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableRecord {
    text: String,
    vec: Vec<f64>,
}

impl EmbeddingTable {
    pub fn empty(source_tag: impl Into<String>) -> Self {
        Self {
            entries: BTreeMap::new(),
            dim: None,
            source_tag: source_tag.into(),
        }
    }

    /// Build a table from `(text, vector)` pairs. Keys are normalized;
    /// duplicate keys and mixed dimensions are rejected.
    pub fn from_entries<I, S>(source_tag: impl Into<String>, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: AsRef<str>,
    {
        let mut table = Self::empty(source_tag);
        for (text, vec) in entries {
            table.insert(text.as_ref(), vec)?;
        }
        Ok(table)
    }

    fn insert(&mut self, text: &str, vec: Vec<f64>) -> Result<()> {
        let key = normalize_text(text);
        if key.is_empty() {
            return Err(Error::input("table entry has empty text"));
        }
        let v = EmbeddingVector::new(vec).map_err(|e| Error::input(format!("entry {key:?}: {e}")))?;
        match self.dim {
            Some(d) if d != v.dim() => {
                return Err(Error::input(format!(
                    "entry {key:?} has dim {}, table dim is {d}",
                    v.dim()
                )))
            }
            None => self.dim = Some(v.dim()),
            _ => {}
        }
        if self.entries.insert(key.clone(), v).is_some() {
            return Err(Error::input(format!("duplicate table entry {key:?}")));
        }
        Ok(())
    }

    pub fn from_reader<R: BufRead>(reader: R, source_tag: impl Into<String>) -> Result<Self> {
        let mut table = Self::empty(source_tag);
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: TableRecord = serde_json::from_str(&line)
                .map_err(|e| Error::input(format!("line {}: {e}", lineno + 1)))?;
            table
                .insert(&rec.text, rec.vec)
                .map_err(|e| Error::input(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(std::io::BufReader::new(file), path.display().to_string())
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn source_tag(&self) -> &str {
        &self.source_tag
    }

    pub fn get(&self, text: &str) -> Option<&EmbeddingVector> {
        self.entries.get(&normalize_text(text))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedEmbedding {
    pub vector: EmbeddingVector,
    /// True when the text was missing from the table and a toy vector was used.
    pub fallback: bool,
}

/// Look `text` up in `table`, falling back to a toy embedding of the table's
/// dimension (or `fallback_dim` for an empty table).
pub fn resolve_embedding(
    table: &EmbeddingTable,
    text: &str,
    fallback_dim: usize,
) -> Result<ResolvedEmbedding> {
    if normalize_text(text).is_empty() {
        return Err(Error::input("entity text is empty after normalization"));
    }
    if let Some(v) = table.get(text) {
        return Ok(ResolvedEmbedding { vector: v.clone(), fallback: false });
    }
    let dim = table.dim().unwrap_or(fallback_dim);
    Ok(ResolvedEmbedding { vector: embed_toy(text, dim)?, fallback: true })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_collapses_case_and_space() {
        assert_eq!(normalize_text("  Traffic \t LIGHT "), "traffic light");
        assert_eq!(normalize_text("   "), "");
    }

    #[test]
    fn toy_is_deterministic_unit_norm() {
        let a = embed_toy("camel", 8).unwrap();
        let b = embed_toy("camel", 8).unwrap();
        assert_eq!(a, b);
        assert!((a.norm() - 1.0).abs() <= 1e-12);
        assert_eq!(a, embed_toy("Camel ", 8).unwrap());
    }

    #[test]
    fn toy_rejects_bad_inputs() {
        assert!(matches!(embed_toy("  ", 8), Err(Error::InvalidInput(_))));
        assert!(matches!(embed_toy("camel", 1), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn toy_handles_short_and_non_ascii_text() {
        let a = embed_toy("a", 4).unwrap();
        assert!((a.norm() - 1.0).abs() <= 1e-12);
        let b = embed_toy("größe", 4).unwrap();
        assert!((b.norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn resolve_hits_normalized_key() {
        let table = EmbeddingTable::from_entries("t", [("camel", vec![1.0, 0.0])]).unwrap();
        let r = resolve_embedding(&table, "CAMEL", 8).unwrap();
        assert_eq!(r.vector.values(), &[1.0, 0.0]);
        assert!(!r.fallback);
    }

    #[test]
    fn resolve_falls_back_to_toy() {
        let empty = EmbeddingTable::empty("none");
        let r = resolve_embedding(&empty, "camel", 8).unwrap();
        assert!(r.fallback);
        assert_eq!(r.vector, embed_toy("camel", 8).unwrap());

        let table = EmbeddingTable::from_entries("t", [("camel", vec![1.0, 0.0, 0.0, 0.0])]).unwrap();
        let r = resolve_embedding(&table, "zebra", 8).unwrap();
        assert!(r.fallback);
        assert_eq!(r.vector, embed_toy("zebra", 4).unwrap());

        assert!(resolve_embedding(&table, " ", 8).is_err());
    }

    #[test]
    fn loader_validates_records() {
        let ok = "{\"text\": \"Camel\", \"vec\": [1.0, 2.0]}\n{\"text\": \"violin\", \"vec\": [0.5, 0.5]}\n";
        let t = EmbeddingTable::from_reader(ok.as_bytes(), "mem").unwrap();
        assert_eq!(t.dim(), Some(2));
        assert_eq!(t.len(), 2);
        assert!(t.get("camel").is_some());

        let mixed = "{\"text\": \"a\", \"vec\": [1.0, 2.0]}\n{\"text\": \"b\", \"vec\": [1.0]}\n";
        assert!(EmbeddingTable::from_reader(mixed.as_bytes(), "mem").is_err());

        let dup = "{\"text\": \"a\", \"vec\": [1.0]}\n{\"text\": \"A \", \"vec\": [2.0]}\n";
        assert!(EmbeddingTable::from_reader(dup.as_bytes(), "mem").is_err());

        let extra = "{\"text\": \"a\", \"vec\": [1.0], \"x\": 1}\n";
        assert!(EmbeddingTable::from_reader(extra.as_bytes(), "mem").is_err());

        let empty_vec = "{\"text\": \"a\", \"vec\": []}\n";
        assert!(EmbeddingTable::from_reader(empty_vec.as_bytes(), "mem").is_err());
    }
}
