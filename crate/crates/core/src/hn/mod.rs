//! Level assignment and construction of hierarchical neighbor graphs,
//! including the radius-bounded variant.

mod graph;
mod io;
mod levels;

pub(crate) use graph::Slot;
pub use graph::{build_graph, build_radius_bounded, build_with_levels, Edge, HnGraph, HnNode};
pub use io::{read_graph, write_graph};
pub use levels::{
    assign_level, det_level, draw_promotion, LevelAssignment, Params, WeightAssignment, DEFAULT_CAP_HEADROOM,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{poisson_points, uniform_points, Point, PointSet, Region};
    use crate::spatial::SearchStrategy;
    use crate::NodeId;
    use proptest::prelude::*;

    fn line(xs: &[f64]) -> PointSet<f64> {
        let pts = xs.iter().map(|&x| Point::new(x, 0.0)).collect();
        PointSet::from_points(Region::square(10.0).unwrap(), pts, 0).unwrap()
    }

    fn forced(ps: &PointSet<f64>, levels: Vec<u32>) -> HnGraph<f64> {
        build_with_levels(
            ps,
            &WeightAssignment::unit(ps.len()),
            &LevelAssignment::forced(levels),
            Params::new(0.5).unwrap(),
            None,
            0,
            SearchStrategy::BruteForce,
        )
        .unwrap()
    }

    fn edge_pairs(g: &HnGraph<f64>) -> Vec<(usize, usize)> {
        g.edges().iter().map(|e| (e.u.0, e.v.0)).collect()
    }

    #[test]
    fn degenerate_inputs() {
        let region = Region::square(10.0).unwrap();
        let p = Params::new(0.5).unwrap();
        let empty = build_graph(&PointSet::empty(region), &WeightAssignment::unit(0), p, 1).unwrap();
        assert!(empty.is_empty());
        assert!(empty.height().is_err());
        assert!(empty.level_sets().is_empty());

        let one = build_graph(&line(&[1.0]), &WeightAssignment::unit(1), p, 1).unwrap();
        assert_eq!(one.edge_count(), 0);
        assert_eq!(one.height().unwrap(), one.level(NodeId(0)));
        assert_eq!(one.parent(NodeId(0)), None);
    }

    #[test]
    fn two_points_one_parent_link() {
        let g = forced(&line(&[0.0, 5.0]), vec![0, 1]);
        assert_eq!(edge_pairs(&g), vec![(0, 1)]);
        assert_eq!(g.parent(NodeId(0)), Some(NodeId(1)));
        assert_eq!(g.edges()[0].level, 0);
    }

    #[test]
    fn collinear_hand_trace() {
        let g = forced(&line(&[0.0, 1.0, 3.0]), vec![0, 1, 0]);
        assert_eq!(edge_pairs(&g), vec![(0, 1), (1, 2)]);
        assert_eq!(g.parent(NodeId(2)), Some(NodeId(1)));
    }

    #[test]
    fn closed_ball_and_parent_ties() {
        // Node 0 at the origin; higher nodes 1 and 2 both at distance 2;
        // same-level node 3 exactly on the ball boundary.
        let pts = vec![Point::new(5.0, 5.0), Point::new(7.0, 5.0), Point::new(3.0, 5.0), Point::new(5.0, 7.0)];
        let ps = PointSet::from_points(Region::square(10.0).unwrap(), pts, 0).unwrap();
        let g = forced(&ps, vec![0, 1, 1, 0]);
        assert_eq!(g.parent(NodeId(0)), Some(NodeId(1)));
        assert_eq!(g.parent_candidates(NodeId(0)), vec![NodeId(1), NodeId(2)]);
        assert!(g.has_edge(NodeId(0), NodeId(2)));
        assert!(g.has_edge(NodeId(0), NodeId(3)));
        // The top level {1, 2} is a clique.
        assert!(g.has_edge(NodeId(1), NodeId(2)));
    }

    #[test]
    fn radius_bounded_examples() {
        let ps = line(&[0.0, 5.0]);
        let w = WeightAssignment::unit(2);
        let lv = LevelAssignment::forced(vec![0, 1]);
        let p = Params::new(0.5).unwrap();
        let cut = build_with_levels(&ps, &w, &lv, p, Some(&[4.0, 4.0]), 0, SearchStrategy::Grid).unwrap();
        assert_eq!(cut.edge_count(), 0);
        assert_eq!(cut.parent(NodeId(0)), None);
        assert!(build_with_levels(&ps, &w, &lv, p, Some(&[0.0, 1.0]), 0, SearchStrategy::Grid).is_err());

        let region = Region::square(10.0).unwrap();
        let ps = uniform_points(region, 300, 5);
        let w = WeightAssignment::unit(300);
        let full = build_graph(&ps, &w, p, 9).unwrap();
        let inf = build_radius_bounded(&ps, &w, p, &vec![f64::INFINITY; 300], 9).unwrap();
        assert_eq!(full.edges(), inf.edges());
    }

    #[test]
    fn level_set_examples() {
        let g = forced(&line(&[0.0, 1.0]), vec![0, 0]);
        assert_eq!(g.level_sets(), vec![vec![NodeId(0), NodeId(1)]]);
        let g = forced(&line(&[0.0, 1.0]), vec![0, 2]);
        assert_eq!(g.level_sets(), vec![vec![NodeId(0), NodeId(1)], vec![NodeId(1)], vec![NodeId(1)]]);
        assert_eq!(g.height().unwrap(), 2);
    }

    #[test]
    fn heavy_node_lifts_height() {
        let ps = uniform_points(Region::square(10.0).unwrap(), 20, 3);
        let mut w = vec![1.0; 20];
        w[7] = 8.0;
        let g = build_graph(&ps, &WeightAssignment::new(w).unwrap(), Params::new(0.5).unwrap(), 4).unwrap();
        assert!(g.height().unwrap() >= 3);
    }

    #[test]
    fn serialization_round_trip() {
        let region = Region::torus(3.0).unwrap();
        let ps = poisson_points::<f64>(region, 20.0, 2).unwrap();
        let mut w = vec![1.0; ps.len()];
        w[0] = 5.5;
        let w = WeightAssignment::new(w).unwrap();
        let p = Params::new(0.5).unwrap();
        let g = build_graph(&ps, &w, p, 12).unwrap();
        let text = write_graph(&g);
        let back: HnGraph<f64> = read_graph(&text).unwrap();
        assert_eq!(back, g);
        assert_eq!(write_graph(&back), text);

        let radii: Vec<f64> = (0..ps.len()).map(|i| 0.2 + 0.01 * i as f64).collect();
        let b = build_radius_bounded(&ps, &w, p, &radii, 12).unwrap();
        let text = write_graph(&b);
        assert_eq!(write_graph(&read_graph::<f64>(&text).unwrap()), text);
    }

    #[test]
    fn serialization_rejects_tampering() {
        let ps = uniform_points(Region::square(5.0).unwrap(), 30, 1);
        let g = build_graph(&ps, &WeightAssignment::unit(30), Params::new(0.5).unwrap(), 1).unwrap();
        let text = write_graph(&g);
        let dropped: String = {
            let mut lines: Vec<&str> = text.lines().collect();
            lines.pop();
            lines.join("\n")
        };
        assert!(read_graph::<f64>(&dropped).is_err());
        assert!(matches!(read_graph::<f64>("nope"), Err(crate::Error::Parse { line: 1, .. })));
        let bad = text.replacen("node 0 ", "node 0 x", 1);
        assert!(matches!(read_graph::<f64>(&bad), Err(crate::Error::Parse { line: 3, .. })));
    }

    #[test]
    fn f32_build_matches_invariants() {
        let ps = uniform_points::<f32>(Region::torus(1.0).unwrap(), 400, 8);
        let g = build_graph(&ps, &WeightAssignment::unit(400), Params::new(0.5f32).unwrap(), 8).unwrap();
        g.check_invariants().unwrap();
        assert!(crate::metrics::is_connected(&g));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn construction_invariants(seed in any::<u64>(), n in 1usize..120, torus in any::<bool>(), p in 0.2..0.8f64) {
            let region = if torus { Region::torus(10.0).unwrap() } else { Region::square(10.0).unwrap() };
            let ps = uniform_points(region, n, seed);
            let w = WeightAssignment::unit(n);
            let params = Params::new(p).unwrap();
            let g = build_graph(&ps, &w, params, seed).unwrap();
            prop_assert!(g.check_invariants().is_ok(), "{:?}", g.check_invariants());
            prop_assert!(crate::metrics::is_connected(&g));
            let sets = g.level_sets();
            prop_assert_eq!(sets[0].len(), n);
            for pair in sets.windows(2) {
                prop_assert!(pair[1].iter().all(|u| pair[0].contains(u)));
            }
            // Level-edge property and parent-link ordering.
            for u in g.ids() {
                for &v in g.initiated(u) {
                    if g.level(v) == g.level(u) {
                        if let Some(r) = g.ball_radius(u) {
                            prop_assert!(g.distance(u, v) <= r);
                        }
                    } else {
                        prop_assert!(g.level(v) > g.level(u));
                    }
                }
            }
            let top = g.height().unwrap();
            let tops: Vec<_> = g.ids().filter(|&u| g.level(u) == top).collect();
            for &a in &tops {
                for &b in &tops {
                    prop_assert!(a == b || g.has_edge(a, b));
                }
            }
        }

        #[test]
        fn grid_and_linear_scan_agree(seed in any::<u64>(), n in 0usize..300, torus in any::<bool>()) {
            let region = if torus { Region::torus(7.0).unwrap() } else { Region::square(7.0).unwrap() };
            let ps = uniform_points(region, n, seed);
            let w = WeightAssignment::unit(n);
            let params = Params::new(0.5).unwrap();
            let lv = LevelAssignment::draw(&w, &params, seed).unwrap();
            let a = build_with_levels(&ps, &w, &lv, params, None, seed, SearchStrategy::Grid).unwrap();
            let b = build_with_levels(&ps, &w, &lv, params, None, seed, SearchStrategy::BruteForce).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn bounded_is_subgraph(seed in any::<u64>(), n in 1usize..150, r in 0.2..4.0f64) {
            let region = Region::square(10.0).unwrap();
            let ps = uniform_points(region, n, seed);
            let w = WeightAssignment::unit(n);
            let params = Params::new(0.5).unwrap();
            let full = build_graph(&ps, &w, params, seed).unwrap();
            let cut = build_radius_bounded(&ps, &w, params, &vec![r; n], seed).unwrap();
            prop_assert_eq!(full.level_assignment(), cut.level_assignment());
            let all: std::collections::BTreeSet<_> = full.edges().into_iter().collect();
            for e in cut.edges() {
                prop_assert!(all.contains(&e));
                let (a, b) = (e.u, e.v);
                let ok = (cut.initiated(a).contains(&b) && cut.distance(a, b) <= r)
                    || (cut.initiated(b).contains(&a) && cut.distance(a, b) <= r);
                prop_assert!(ok);
            }
            for u in cut.ids() {
                if let Some(pu) = cut.parent(u) {
                    prop_assert!(cut.distance(u, pu) <= r);
                }
            }
        }
    }
}
