use proptest::prelude::*;
use ultracoral::growth::{grow, BranchNode, CoralTree, GrowthConfig, Model};
use ultracoral::io::{lsys, svg, EmitterRegistry, RunConfig, TreeDocument};
use ultracoral::kinetics::SpeciesState;

fn leaf(path: Vec<u8>, lifetime: f64, halted: bool) -> BranchNode {
    BranchNode {
        path,
        birth_time: 0.0,
        crossing_time: Some(lifetime),
        lifetime,
        omega: Some(2.0),
        halted,
        continuation: false,
        degenerate: false,
        first_saturation_time: None,
        birth_state: SpeciesState::new(8.0, 10.0, 0.0),
        crossing_state: None,
        children: Vec::new(),
    }
}

fn tree_of(root: BranchNode) -> CoralTree {
    CoralTree {
        p: 2,
        final_level: 0,
        root,
        levels: Vec::new(),
    }
}

fn bifurcation(l0: f64, l1: f64, l2: f64) -> CoralTree {
    let mut root = leaf(vec![], l0, false);
    root.children = vec![leaf(vec![0], l1, true), leaf(vec![1], l2, true)];
    tree_of(root)
}

fn grown(seed: u64) -> CoralTree {
    grow(
        &Model::default(),
        &GrowthConfig {
            seed,
            ..Default::default()
        },
        SpeciesState::new(8.0, 10.0, 0.0),
    )
    .unwrap()
}

#[test]
fn json_document_round_trips() {
    let mut cfg = RunConfig::default();
    cfg.growth.seed = 42;
    let doc = TreeDocument::new(cfg, grown(42));
    let text = doc.to_json();
    assert_eq!(TreeDocument::from_json(&text).unwrap(), doc);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    for key in [
        "schema_version",
        "config",
        "out_of_regime",
        "sync_rule",
        "tree",
        "metrics",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    let root = &v["tree"]["root"];
    for key in [
        "path",
        "birth_time",
        "crossing_time",
        "lifetime",
        "omega",
        "halted",
        "continuation",
        "children",
    ] {
        assert!(root.get(key).is_some(), "node missing {key}");
    }
}

#[test]
fn single_node_renders_one_segment() {
    let t = tree_of(leaf(vec![], 3.5, false));
    assert_eq!(svg::layout(&t, 25.0, Some(10.0)).len(), 1);
    let doc = svg::render(&t, 25.0, Some(10.0));
    assert_eq!(doc.matches("<line").count(), 1);
    assert!(doc.starts_with("<svg") && doc.trim_end().ends_with("</svg>"));
}

#[test]
fn segment_lengths_follow_lifetimes() {
    let t = bifurcation(2.0, 6.90514, 17.11237);
    let segs = svg::layout(&t, 25.0, Some(3.0));
    assert!((segs[0].length() - 6.0).abs() < 1e-12);
    let ratio = segs[2].length() / segs[1].length();
    assert!((ratio - 17.11237 / 6.90514).abs() < 1e-12);
    // halted leaves are marked
    assert_eq!(svg::render(&t, 25.0, Some(3.0)).matches("<circle").count(), 2);
}

#[test]
fn symmetric_tree_draws_symmetrically() {
    let t = bifurcation(2.0, 4.0, 4.0);
    let segs = svg::layout(&t, 25.0, None);
    assert!(segs[0].x1.abs() < 1e-12);
    assert!((segs[1].x1 + segs[2].x1).abs() < 1e-9);
    assert!((segs[1].y1 - segs[2].y1).abs() < 1e-9);
    assert!(segs[1].x1 < 0.0, "first child turns left");
}

#[test]
fn svg_is_deterministic() {
    let t = grown(3);
    assert_eq!(svg::render(&t, 25.0, None), svg::render(&t, 25.0, None));
}

#[test]
fn lsystem_examples() {
    assert_eq!(lsys::emit(&tree_of(leaf(vec![], 1.5, false)), 25.0), "F(1.5)");
    assert_eq!(
        lsys::emit(&bifurcation(2.0, 3.0, 4.25), 25.0),
        "F(2)[+(25)F(3)][-(25)F(4.25)]"
    );
}

#[test]
fn lsystem_round_trip_recovers_topology_and_lifetimes() {
    let t = grown(11);
    let parsed = lsys::parse(&lsys::emit(&t, 30.0)).unwrap();
    fn check(node: &BranchNode, l: &lsys::LNode) {
        assert_eq!(node.lifetime, l.length);
        assert_eq!(node.children.len(), l.children.len());
        for (a, b) in node.children.iter().zip(&l.children) {
            check(a, b);
        }
    }
    check(&t.root, &parsed);
    assert_eq!(parsed.children[0].turn, 30.0);
    assert_eq!(parsed.children[1].turn, -30.0);
}

#[test]
fn lsystem_parse_errors() {
    assert!(lsys::parse("F(1)[").is_err());
    assert!(lsys::parse("F(x)").is_err());
    assert!(lsys::parse("F(1)[*(2)F(1)]").is_err());
    assert!(lsys::parse("F(1)]").is_err());
}

#[test]
fn emitter_registry_covers_all_formats() {
    let reg = EmitterRegistry::default();
    assert_eq!(reg.names(), vec!["csv", "json", "svg", "lsys"]);
    let doc = TreeDocument::new(RunConfig::default(), grown(0));
    for name in reg.names() {
        let e = reg.get(name).unwrap();
        assert_eq!(e.extension(), name);
        assert!(!e.emit(&doc).is_empty());
    }
    assert!(reg.get("png").is_none());
}

fn arb_tree(p: usize) -> impl Strategy<Value = BranchNode> {
    let base = (0.01..50.0f64).prop_map(|l| leaf(vec![], l, true));
    base.prop_recursive(4, 64, p as u32, move |inner| {
        ((0.01..50.0f64), prop::collection::vec(inner, p)).prop_map(|(l, children)| {
            let mut node = leaf(vec![], l, false);
            node.children = children;
            node
        })
    })
}

fn count(n: &BranchNode) -> usize {
    1 + n.children.iter().map(count).sum::<usize>()
}

proptest! {
    #[test]
    fn brackets_balance_on_random_trees(root in arb_tree(2)) {
        let s = lsys::emit(&tree_of(root.clone()), 25.0);
        prop_assert!(lsys::brackets_balanced(&s));
        let parsed = lsys::parse(&s).unwrap();
        prop_assert_eq!(parsed.count(), count(&root));
    }

    #[test]
    fn ternary_trees_round_trip(root in arb_tree(3)) {
        let s = lsys::emit(&tree_of(root.clone()), 40.0);
        prop_assert!(lsys::brackets_balanced(&s));
        let parsed = lsys::parse(&s).unwrap();
        prop_assert_eq!(parsed.count(), count(&root));
        prop_assert_eq!(parsed.length, root.lifetime);
    }

    #[test]
    fn layout_lengths_are_proportional(root in arb_tree(2), scale in 0.1..20.0f64) {
        let t = tree_of(root);
        let segs = svg::layout(&t, 25.0, Some(scale));
        let nodes = t.root.nodes();
        prop_assert_eq!(segs.len(), nodes.len());
        for (s, n) in segs.iter().zip(nodes) {
            prop_assert!((s.length() - n.lifetime * scale).abs() <= 1e-9 * n.lifetime * scale);
        }
    }
}
