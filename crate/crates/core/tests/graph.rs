mod common;

use std::collections::BTreeSet;

use causal_oed::graph::{enumerate_dags, Dag, NodeSet};
use common::{arb_dag, brute_force_dags, brute_mec, to_dag};
use proptest::prelude::*;

#[test]
fn enumeration_matches_adjacency_scan() {
    for n in 1..=4 {
        let ours: BTreeSet<Vec<(usize, usize)>> =
            enumerate_dags(n).unwrap().iter().map(|g| g.edges()).collect();
        let brute: BTreeSet<_> = brute_force_dags(n).into_iter().collect();
        assert_eq!(ours, brute, "n = {n}");
    }
    assert_eq!(enumerate_dags(5).unwrap().len(), 29_281);
}

#[test]
fn mec_keys_match_brute_classes() {
    for n in 2..=4 {
        let dags = brute_force_dags(n);
        let ours: BTreeSet<_> = dags.iter().map(|e| to_dag(n, e).mec_key()).collect();
        let brute: BTreeSet<_> = dags.iter().map(|e| brute_mec(n, e)).collect();
        assert_eq!(ours.len(), brute.len(), "n = {n}");
        // same partition: two DAGs share a key iff they share a brute class
        for a in &dags {
            for b in &dags {
                let same_ours = to_dag(n, a).mec_key() == to_dag(n, b).mec_key();
                assert_eq!(same_ours, brute_mec(n, a) == brute_mec(n, b));
            }
        }
    }
}

proptest! {
    #[test]
    fn surgery_removes_only_incoming(g in arb_dag(7), e in 0usize..7) {
        let e = e % g.num_nodes();
        let s = g.surgery(e);
        prop_assert!(s.parents(e).is_empty());
        for (u, v) in g.edges() {
            prop_assert_eq!(s.has_edge(u, v), v != e);
        }
        prop_assert_eq!(s.surgery(e), s.clone());
    }

    #[test]
    fn relations_are_consistent(g in arb_dag(7), e in 0usize..7) {
        let e = e % g.num_nodes();
        let r = g.relations(e);
        prop_assert!(r.children.is_subset(r.descendants));
        prop_assert!(!r.descendants.contains(e));
        prop_assert!(r.parents.intersection(r.descendants).is_empty());
        for c in r.children.iter() {
            prop_assert!(g.parents(c).contains(e));
        }
    }

    #[test]
    fn topological_order_respects_edges(g in arb_dag(8)) {
        let order = g.topological_order();
        let mut pos = vec![0; g.num_nodes()];
        for (i, &v) in order.iter().enumerate() {
            pos[v] = i;
        }
        for (u, v) in g.edges() {
            prop_assert!(pos[u] < pos[v]);
        }
    }

    #[test]
    fn mec_key_matches_brute(g in arb_dag(7)) {
        let (skel, vs) = brute_mec(g.num_nodes(), &g.edges());
        let key = g.mec_key();
        prop_assert_eq!(key.skeleton, skel.into_iter().collect::<Vec<_>>());
        prop_assert_eq!(key.vstructures, vs.into_iter().collect::<Vec<_>>());
    }

    #[test]
    fn json_roundtrip(g in arb_dag(8)) {
        let text = serde_json::to_string(&g).unwrap();
        let back: Dag = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, g);
    }

    #[test]
    fn nodeset_ops(a in any::<u32>(), b in any::<u32>()) {
        let (x, y) = (NodeSet::from_bits(a & 0x1ff_ffff), NodeSet::from_bits(b & 0x1ff_ffff));
        prop_assert_eq!(x.union(y).len() + x.intersection(y).len(), x.len() + y.len());
        prop_assert!(x.difference(y).intersection(y).is_empty());
        prop_assert_eq!(x.iter().collect::<NodeSet>(), x);
    }
}

#[test]
fn cyclic_edge_lists_are_rejected() {
    assert!(Dag::from_edges(3, &[(0, 1), (1, 2), (2, 0)]).is_err());
    assert!(serde_json::from_str::<Dag>(r#"{"num_nodes": 2, "edges": [[0, 1], [1, 0]]}"#).is_err());
    assert!(serde_json::from_str::<Dag>(r#"{"num_nodes": 2, "edges": [], "extra": 1}"#).is_err());
}
