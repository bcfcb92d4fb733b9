//! Long-distance prompt-suite construction.
//!
//! Concepts are embedded, projected jointly onto one 2D plane, and each
//! concept is paired with its most distant partner. Candidates are ranked by
//! plane distance and the top `k` are rendered through fixed templates.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedding::{normalize_text, resolve_embedding, EmbeddingTable, DEFAULT_TOY_DIM};
use crate::error::{Error, Result};
use crate::semantics::{pca_project, PairPolicy, PromptSpec};

/// The built-in template set.
pub const DEFAULT_TEMPLATE: &str = "ldt-v1";

const HISTOGRAM_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptCatalog {
    #[serde(default)]
    pub objects: Vec<String>,
    #[serde(default)]
    pub actions: Vec<String>,
    #[serde(default)]
    pub provenance: String,
}

impl ConceptCatalog {
    /// Normalizes and deduplicates both lists, keeping first occurrences.
    pub fn new(objects: Vec<String>, actions: Vec<String>, provenance: impl Into<String>) -> Result<Self> {
        let dedup = |list: Vec<String>| -> Result<Vec<String>> {
            let mut seen = BTreeSet::new();
            let mut out = Vec::new();
            for s in list {
                let n = normalize_text(&s);
                if n.is_empty() {
                    return Err(Error::input("catalog contains an empty concept"));
                }
                if seen.insert(n.clone()) {
                    out.push(n);
                }
            }
            Ok(out)
        };
        let catalog = Self {
            objects: dedup(objects)?,
            actions: dedup(actions)?,
            provenance: provenance.into(),
        };
        if catalog.objects.is_empty() && catalog.actions.is_empty() {
            return Err(Error::input("catalog has no objects and no actions"));
        }
        Ok(catalog)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw: ConceptCatalog = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Self::new(raw.objects, raw.actions, raw.provenance)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairKind {
    ObjectAction,
    ActionAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptPair {
    pub a: String,
    pub b: String,
    pub kind: PairKind,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistantPairs {
    pub pairs: Vec<ConceptPair>,
    /// Set when `top_k` exceeded the number of candidates.
    pub truncated: bool,
}

/// Descending distance, then lexicographic `(a, b)`.
pub fn rank_order(x: &ConceptPair, y: &ConceptPair) -> Ordering {
    y.distance
        .total_cmp(&x.distance)
        .then_with(|| x.a.cmp(&y.a))
        .then_with(|| x.b.cmp(&y.b))
}

fn plane_distance(p: [f64; 2], q: [f64; 2]) -> f64 {
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

/// Project objects ∪ actions onto one shared plane. Returns coordinates for
/// objects and actions in catalog order.
pub fn project_catalog(
    catalog: &ConceptCatalog,
    table: &EmbeddingTable,
) -> Result<(Vec<[f64; 2]>, Vec<[f64; 2]>)> {
    let mut union: Vec<String> = Vec::new();
    let mut seen = BTreeSet::new();
    for c in catalog.objects.iter().chain(&catalog.actions) {
        if seen.insert(c.clone()) {
            union.push(c.clone());
        }
    }
    let mut fallbacks = 0usize;
    let labelled = union
        .iter()
        .map(|c| {
            let r = resolve_embedding(table, c, DEFAULT_TOY_DIM)?;
            fallbacks += usize::from(r.fallback);
            Ok((c.clone(), r.vector))
        })
        .collect::<Result<Vec<_>>>()?;
    if fallbacks > 0 {
        log::warn!("{fallbacks} of {} concepts missing from table; using toy embeddings", union.len());
    }
    let projected = pca_project(&labelled)?;
    let lookup = |c: &String| {
        let i = union.iter().position(|u| u == c).expect("concept in union");
        projected[i].coords
    };
    Ok((
        catalog.objects.iter().map(lookup).collect(),
        catalog.actions.iter().map(lookup).collect(),
    ))
}

/// Most distant partner of `anchor` among `pool` (excluding identical text);
/// ties go to the lexicographically smallest partner.
fn farthest<'a>(
    anchor: &str,
    at: [f64; 2],
    pool: &'a [String],
    coords: &[[f64; 2]],
) -> Option<(&'a String, f64)> {
    let mut best: Option<(&String, f64)> = None;
    for (cand, &c) in pool.iter().zip(coords) {
        if cand == anchor {
            continue;
        }
        let d = plane_distance(at, c);
        best = match best {
            Some((b, bd)) if bd > d || (bd == d && b <= cand) => Some((b, bd)),
            _ => Some((cand, d)),
        };
    }
    best
}

/// All candidate pairs of `kind`, sorted by [`rank_order`].
pub fn candidate_pairs(
    catalog: &ConceptCatalog,
    table: &EmbeddingTable,
    kind: PairKind,
) -> Result<Vec<ConceptPair>> {
    match kind {
        PairKind::ObjectAction if catalog.objects.is_empty() || catalog.actions.is_empty() => {
            return Err(Error::input("object-action pairs need objects and actions"))
        }
        PairKind::ActionAction if catalog.actions.len() < 2 => {
            return Err(Error::input("action-action pairs need at least two actions"))
        }
        _ => {}
    }
    let (obj_xy, act_xy) = project_catalog(catalog, table)?;
    let mut out = Vec::new();
    match kind {
        PairKind::ObjectAction => {
            for (o, &xy) in catalog.objects.iter().zip(&obj_xy) {
                if let Some((a, d)) = farthest(o, xy, &catalog.actions, &act_xy) {
                    out.push(ConceptPair { a: o.clone(), b: a.clone(), kind, distance: d });
                }
            }
        }
        PairKind::ActionAction => {
            let mut seen = BTreeSet::new();
            for (a, &xy) in catalog.actions.iter().zip(&act_xy) {
                if let Some((b, d)) = farthest(a, xy, &catalog.actions, &act_xy) {
                    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                    if seen.insert((lo.clone(), hi.clone())) {
                        out.push(ConceptPair { a: lo.clone(), b: hi.clone(), kind, distance: d });
                    }
                }
            }
        }
    }
    out.sort_by(rank_order);
    Ok(out)
}

pub fn build_distant_pairs(
    catalog: &ConceptCatalog,
    table: &EmbeddingTable,
    kind: PairKind,
    top_k: usize,
) -> Result<DistantPairs> {
    if top_k == 0 {
        return Err(Error::config("top_k must be >= 1"));
    }
    let mut pairs = candidate_pairs(catalog, table, kind)?;
    let truncated = top_k > pairs.len();
    if truncated {
        log::warn!("top_k {top_k} exceeds {} candidates; returning all", pairs.len());
    }
    pairs.truncate(top_k);
    Ok(DistantPairs { pairs, truncated })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceStats {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub bins: Vec<HistogramBin>,
}

impl DistanceStats {
    pub fn from_distances(ds: &[f64]) -> Self {
        if ds.is_empty() {
            return Self { count: 0, mean: 0.0, min: 0.0, max: 0.0, bins: Vec::new() };
        }
        let min = ds.iter().copied().fold(f64::INFINITY, f64::min);
        let max = ds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = ds.iter().sum::<f64>() / ds.len() as f64;
        let width = (max - min) / HISTOGRAM_BINS as f64;
        let mut bins: Vec<HistogramBin> = (0..HISTOGRAM_BINS)
            .map(|i| HistogramBin {
                lo: min + width * i as f64,
                hi: if i + 1 == HISTOGRAM_BINS { max } else { min + width * (i + 1) as f64 },
                count: 0,
            })
            .collect();
        for &d in ds {
            let i = if width > 0.0 {
                (((d - min) / width) as usize).min(HISTOGRAM_BINS - 1)
            } else {
                0
            };
            bins[i].count += 1;
        }
        Self { count: ds.len(), mean, min, max, bins }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteManifest {
    pub template_id: String,
    pub pairs: Vec<ConceptPair>,
    pub prompts: Vec<PromptSpec>,
    pub stats: DistanceStats,
}

fn render_one(pair: &ConceptPair) -> PromptSpec {
    let text = match pair.kind {
        PairKind::ObjectAction => format!("The {} is {}.", pair.a, pair.b),
        PairKind::ActionAction => format!("A person {}, then {}.", pair.a, pair.b),
    };
    PromptSpec {
        text,
        entities: vec![pair.a.clone(), pair.b.clone()],
        pairs: Some(vec![[0, 1]]),
        pair_policy: Some(PairPolicy::AnnotatedPairs),
        d_sem: None,
    }
}

pub fn render_prompts(pairs: &[ConceptPair], template_id: &str) -> Result<SuiteManifest> {
    if template_id != DEFAULT_TEMPLATE {
        return Err(Error::config(format!(
            "unknown template {template_id:?} (available: {DEFAULT_TEMPLATE})"
        )));
    }
    let distances: Vec<f64> = pairs.iter().map(|p| p.distance).collect();
    Ok(SuiteManifest {
        template_id: template_id.to_string(),
        pairs: pairs.to_vec(),
        prompts: pairs.iter().map(render_one).collect(),
        stats: DistanceStats::from_distances(&distances),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(a: &str, b: &str, kind: PairKind) -> ConceptPair {
        ConceptPair { a: a.into(), b: b.into(), kind, distance: 1.0 }
    }

    #[test]
    fn object_action_template() {
        let m = render_prompts(&[pair("traffic light", "dancing", PairKind::ObjectAction)], DEFAULT_TEMPLATE).unwrap();
        assert_eq!(m.prompts[0].text, "The traffic light is dancing.");
        assert_eq!(m.prompts[0].entities, vec!["traffic light", "dancing"]);
        assert_eq!(m.prompts[0].pair_set(), vec![(0, 1)]);
    }

    #[test]
    fn action_action_template() {
        let m = render_prompts(
            &[pair("polishes furniture", "packs cleaning products", PairKind::ActionAction)],
            DEFAULT_TEMPLATE,
        )
        .unwrap();
        assert_eq!(m.prompts[0].text, "A person polishes furniture, then packs cleaning products.");
    }

    #[test]
    fn rendering_is_byte_stable() {
        let pairs = vec![
            pair("camel", "juggling", PairKind::ObjectAction),
            pair("swims", "knits", PairKind::ActionAction),
        ];
        let a = serde_json::to_string(&render_prompts(&pairs, DEFAULT_TEMPLATE).unwrap()).unwrap();
        let b = serde_json::to_string(&render_prompts(&pairs, DEFAULT_TEMPLATE).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_template_rejected() {
        assert!(matches!(render_prompts(&[], "gpt"), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn catalog_dedups_after_normalization() {
        let c = ConceptCatalog::new(
            vec!["Camel".into(), "camel ".into(), "violin".into()],
            vec![],
            "x",
        )
        .unwrap();
        assert_eq!(c.objects, vec!["camel", "violin"]);
        assert!(ConceptCatalog::new(vec![], vec![], "x").is_err());
    }

    #[test]
    fn histogram_mean_and_counts() {
        let s = DistanceStats::from_distances(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.bins.iter().map(|b| b.count).sum::<usize>(), 4);
        assert_eq!(s.bins.last().unwrap().count, 1);
        let flat = DistanceStats::from_distances(&[2.0, 2.0]);
        assert_eq!(flat.bins[0].count, 2);
    }
}
