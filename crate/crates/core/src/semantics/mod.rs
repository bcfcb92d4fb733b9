//! Prompt-level semantic distance and the shared 2D semantic plane.
//!
//! The distance of a prompt is the mean Euclidean distance between the
//! embeddings of its annotated entity pairs. Entities are never extracted
//! from free text here; they arrive annotated.

mod pca;

pub use pca::{pca_project, PcaFit, ProjectedPoint};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedding::{resolve_embedding, EmbeddingTable, EmbeddingVector, DEFAULT_TOY_DIM};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairPolicy {
    AllPairs,
    AnnotatedPairs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub text: String,
    pub entities: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<[usize; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_policy: Option<PairPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_sem: Option<f64>,
}

impl PromptSpec {
    pub fn new(text: impl Into<String>, entities: Vec<String>) -> Self {
        Self {
            text: text.into(),
            entities,
            pairs: None,
            pair_policy: None,
            d_sem: None,
        }
    }

    pub fn with_pairs(mut self, pairs: Vec<[usize; 2]>) -> Self {
        self.pairs = Some(pairs);
        self.pair_policy = Some(PairPolicy::AnnotatedPairs);
        self
    }

    pub fn with_distance(mut self, d_sem: f64) -> Self {
        self.d_sem = Some(d_sem);
        self
    }

    /// Explicit pairs imply `annotated-pairs` when no policy is given.
    pub fn policy(&self) -> PairPolicy {
        self.pair_policy.unwrap_or(if self.pairs.is_some() {
            PairPolicy::AnnotatedPairs
        } else {
            PairPolicy::AllPairs
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.entities.is_empty() {
            return Err(Error::input("prompt must annotate at least one entity"));
        }
        if let Some(pairs) = &self.pairs {
            let mut seen = std::collections::BTreeSet::new();
            for &[i, j] in pairs {
                let n = self.entities.len();
                if i >= n || j >= n {
                    return Err(Error::input(format!("pair ({i},{j}) out of range for {n} entities")));
                }
                if i == j {
                    return Err(Error::input(format!("pair ({i},{j}) pairs an entity with itself")));
                }
                if !seen.insert((i.min(j), i.max(j))) {
                    return Err(Error::input(format!("duplicate pair ({i},{j})")));
                }
            }
        }
        if let Some(d) = self.d_sem {
            if !d.is_finite() || d < 0.0 {
                return Err(Error::input(format!("cached d_sem {d} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    /// The pair set E under the prompt's policy.
    pub fn pair_set(&self) -> Vec<(usize, usize)> {
        match self.policy() {
            PairPolicy::AllPairs => {
                let n = self.entities.len();
                (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
            }
            PairPolicy::AnnotatedPairs => self
                .pairs
                .iter()
                .flatten()
                .map(|&[i, j]| (i, j))
                .collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let prompt: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        prompt.validate()?;
        Ok(prompt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemanticDistance {
    pub value: f64,
    pub pair_count: usize,
}

/// Where pair distances are measured.
#[derive(Debug, Clone, Copy)]
pub enum DistanceSpace<'a> {
    /// Raw embedding space.
    Raw,
    /// A fitted 2D semantic plane.
    Plane(&'a PcaFit),
}

/// Mean pair distance over raw embeddings, without touching the cache.
pub fn compute_semantic_distance(prompt: &PromptSpec, table: &EmbeddingTable) -> Result<SemanticDistance> {
    compute_semantic_distance_in(prompt, table, DistanceSpace::Raw)
}

pub fn compute_semantic_distance_in(
    prompt: &PromptSpec,
    table: &EmbeddingTable,
    space: DistanceSpace<'_>,
) -> Result<SemanticDistance> {
    prompt.validate()?;
    let pairs = prompt.pair_set();
    if pairs.is_empty() {
        return Err(Error::NotComputable(format!(
            "prompt {:?} has {} entities and no pairs",
            prompt.text,
            prompt.entities.len()
        )));
    }
    let embeddings = prompt
        .entities
        .iter()
        .map(|e| resolve_embedding(table, e, DEFAULT_TOY_DIM).map(|r| r.vector))
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<EmbeddingVector> = match space {
        DistanceSpace::Raw => embeddings,
        DistanceSpace::Plane(fit) => embeddings
            .iter()
            .map(|v| fit.project(v).and_then(EmbeddingVector::new))
            .collect::<Result<_>>()?,
    };
    let total: f64 = pairs.iter().map(|&(i, j)| points[i].distance(&points[j])).sum();
    Ok(SemanticDistance {
        value: total / pairs.len() as f64,
        pair_count: pairs.len(),
    })
}

/// Computes the distance and caches it into `prompt.d_sem`.
pub fn semantic_distance(prompt: &mut PromptSpec, table: &EmbeddingTable) -> Result<SemanticDistance> {
    let d = compute_semantic_distance(prompt, table)?;
    prompt.d_sem = Some(d.value);
    Ok(d)
}

/// Distance as used by the search loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PromptDistance {
    pub value: f64,
    /// Set when the prompt has a single entity and the distance was defined as 0.
    pub degenerate: bool,
}

/// Uses a cached `d_sem` when present; otherwise computes it, treating a
/// prompt without pairs as distance 0 (flagged) so the search can still run.
pub fn prompt_distance(prompt: &PromptSpec, table: Option<&EmbeddingTable>) -> Result<PromptDistance> {
    prompt.validate()?;
    if let Some(d) = prompt.d_sem {
        return Ok(PromptDistance { value: d, degenerate: false });
    }
    let empty;
    let table = match table {
        Some(t) => t,
        None => {
            empty = EmbeddingTable::empty("toy");
            &empty
        }
    };
    match compute_semantic_distance(prompt, table) {
        Ok(d) => Ok(PromptDistance { value: d.value, degenerate: false }),
        Err(Error::NotComputable(msg)) => {
            log::warn!("{msg}; using distance 0");
            Ok(PromptDistance { value: 0.0, degenerate: true })
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(entries: &[(&str, &[f64])]) -> EmbeddingTable {
        EmbeddingTable::from_entries("t", entries.iter().map(|(k, v)| (*k, v.to_vec()))).unwrap()
    }

    fn prompt(entities: &[&str]) -> PromptSpec {
        PromptSpec::new("p", entities.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn single_pair_is_euclidean_norm() {
        let t = table(&[("a", &[0.0, 0.0]), ("b", &[3.0, 4.0])]);
        let mut p = prompt(&["a", "b"]);
        let d = semantic_distance(&mut p, &t).unwrap();
        assert_eq!(d.value, 5.0);
        assert_eq!(d.pair_count, 1);
        assert_eq!(p.d_sem, Some(5.0));
    }

    #[test]
    fn identical_entities_are_zero() {
        let t = table(&[("a", &[1.0, 2.0])]);
        let d = compute_semantic_distance(&prompt(&["a", "A"]), &t).unwrap();
        assert_eq!(d.value, 0.0);
    }

    #[test]
    fn explicit_pairs_override_all_pairs() {
        let t = table(&[("a", &[0.0, 0.0]), ("b", &[1.0, 0.0]), ("c", &[0.0, 2.0])]);
        let p = prompt(&["a", "b", "c"]).with_pairs(vec![[2, 0]]);
        let d = compute_semantic_distance(&p, &t).unwrap();
        assert_eq!(d.value, 2.0);
        assert_eq!(d.pair_count, 1);
    }

    #[test]
    fn single_entity_errors_standalone_but_not_in_search() {
        let t = table(&[("a", &[0.0, 0.0])]);
        let p = prompt(&["a"]);
        assert!(matches!(compute_semantic_distance(&p, &t), Err(Error::NotComputable(_))));
        let d = prompt_distance(&p, Some(&t)).unwrap();
        assert_eq!(d, PromptDistance { value: 0.0, degenerate: true });
    }

    #[test]
    fn malformed_pairs_rejected() {
        let t = table(&[("a", &[0.0]), ("b", &[1.0])]);
        for pairs in [vec![[0, 0]], vec![[0, 5]], vec![[0, 1], [1, 0]]] {
            let p = prompt(&["a", "b"]).with_pairs(pairs);
            assert!(matches!(compute_semantic_distance(&p, &t), Err(Error::InvalidInput(_))));
        }
        let empty = prompt(&["a", ""]);
        assert!(matches!(compute_semantic_distance(&empty, &t), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn prompt_file_schema() {
        let json = r#"{"text": "The camel is dancing.", "entities": ["camel", "dancing"], "pairs": [[0, 1]], "pair_policy": "annotated-pairs"}"#;
        let p: PromptSpec = serde_json::from_str(json).unwrap();
        assert_eq!(p.policy(), PairPolicy::AnnotatedPairs);
        assert_eq!(p.pair_set(), vec![(0, 1)]);
        let back: PromptSpec = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn plane_distance_available() {
        let t = table(&[("a", &[0.0, 0.0, 0.0]), ("b", &[3.0, 4.0, 0.0]), ("c", &[1.0, -1.0, 0.0])]);
        let vs: Vec<_> = ["a", "b", "c"].iter().map(|k| t.get(k).unwrap().clone()).collect();
        let fit = PcaFit::fit(&vs, 2).unwrap();
        let p = prompt(&["a", "b"]);
        let d = compute_semantic_distance_in(&p, &t, DistanceSpace::Plane(&fit)).unwrap();
        assert!((d.value - 5.0).abs() < 1e-10);
    }
}
