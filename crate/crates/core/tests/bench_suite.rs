use imagery::bench::{build_distant_pairs, render_prompts, ConceptCatalog, PairKind, DEFAULT_TEMPLATE};
use imagery::embedding::EmbeddingTable;

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// Objects huddle near the origin and one action sits far out, so every
/// object pairs with it. The plane is the table's own 2D space.
#[test]
fn planted_outlier_is_every_objects_partner() {
    let catalog = ConceptCatalog::new(
        strings(&["cup", "lamp", "shoe"]),
        strings(&["sleeping", "flying", "melting"]),
        "planted",
    )
    .unwrap();
    let table = EmbeddingTable::from_entries(
        "planted",
        [
            ("cup", vec![0.0, 0.1]),
            ("lamp", vec![0.2, 0.0]),
            ("shoe", vec![-0.1, -0.1]),
            ("sleeping", vec![0.5, 0.5]),
            ("flying", vec![10.0, -2.0]),
            ("melting", vec![-0.4, 0.6]),
        ],
    )
    .unwrap();
    let got = build_distant_pairs(&catalog, &table, PairKind::ObjectAction, 3).unwrap();
    assert!(!got.truncated);
    assert!(got.pairs.iter().all(|p| p.b == "flying"));
    // Plane distances equal raw 2D distances up to rotation.
    let shoe = got.pairs.iter().find(|p| p.a == "shoe").unwrap();
    assert!((shoe.distance - (10.1f64.powi(2) + 1.9f64.powi(2)).sqrt()).abs() < 1e-9);
    assert_eq!(got.pairs[0].a, "shoe");

    let aa = build_distant_pairs(&catalog, &table, PairKind::ActionAction, 5).unwrap();
    assert!(aa.truncated);
    assert_eq!(aa.pairs.len(), 2);
    assert!(aa.pairs.iter().all(|p| p.a == "flying" || p.b == "flying"));
}

#[test]
fn full_scale_suite_has_160_prompts_per_kind() {
    let catalog = ConceptCatalog::new(
        (0..1938).map(|i| format!("object number {i}")).collect(),
        (0..901).map(|i| format!("doing action {i}")).collect(),
        "synthetic",
    )
    .unwrap();
    let table = EmbeddingTable::empty("toy");
    let mut pairs = Vec::new();
    for kind in [PairKind::ObjectAction, PairKind::ActionAction] {
        let got = build_distant_pairs(&catalog, &table, kind, 160).unwrap();
        assert!(!got.truncated);
        assert_eq!(got.pairs.len(), 160);
        assert!(got.pairs.windows(2).all(|w| w[0].distance >= w[1].distance));
        pairs.extend(got.pairs);
    }
    let manifest = render_prompts(&pairs, DEFAULT_TEMPLATE).unwrap();
    assert_eq!(manifest.prompts.len(), 320);
    assert_eq!(manifest.stats.count, 320);
    assert!(manifest.prompts[..160].iter().all(|p| p.text.starts_with("The ")));
    assert!(manifest.prompts[160..].iter().all(|p| p.text.starts_with("A person ")));
}
