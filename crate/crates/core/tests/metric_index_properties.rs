use std::sync::Arc;

use disc_core::data::{gen_clustered, gen_uniform};
use disc_core::metrics::annulus_independence_bound;
use disc_core::mtree::{AccessCounter, NodeShade, QueryOptions};
use disc_core::{Dataset, MTree, MTreeConfig, Metric, Point};
use proptest::prelude::*;

fn numeric_point(id: usize) -> impl Strategy<Value = Point> {
    prop::collection::vec(0.0f64..=1.0, 3).prop_map(move |c| Point::numeric(id, c))
}

fn categorical_point(id: usize) -> impl Strategy<Value = Point> {
    prop::collection::vec(0u32..4, 5).prop_map(move |c| Point::categorical(id, c))
}

fn check_metric_axioms(metric: Metric, a: &Point, b: &Point, c: &Point) -> Result<(), TestCaseError> {
    let ab = metric.distance(a, b).unwrap();
    let ba = metric.distance(b, a).unwrap();
    let bc = metric.distance(b, c).unwrap();
    let ac = metric.distance(a, c).unwrap();
    prop_assert!(ab >= 0.0);
    prop_assert_eq!(ab, ba);
    prop_assert_eq!(metric.distance(a, a).unwrap(), 0.0);
    prop_assert!(ac <= ab + bc + 1e-12);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn numeric_metrics_are_symmetric_and_triangular(a in numeric_point(0), b in numeric_point(1), c in numeric_point(2)) {
        check_metric_axioms(Metric::Euclidean, &a, &b, &c)?;
        check_metric_axioms(Metric::Manhattan, &a, &b, &c)?;
    }

    #[test]
    fn hamming_is_symmetric_and_triangular(a in categorical_point(0), b in categorical_point(1), c in categorical_point(2)) {
        check_metric_axioms(Metric::Hamming, &a, &b, &c)?;
    }
}

proptest! {
    #[test]
    fn annulus_bound_grows_with_the_outer_radius(r1 in 0.01f64..0.5, f1 in 1.0f64..20.0, f2 in 1.0f64..20.0) {
        let (lo, hi) = if f1 <= f2 { (f1, f2) } else { (f2, f1) };
        for metric in [Metric::Euclidean, Metric::Manhattan] {
            let a = annulus_independence_bound(metric, 2, r1, r1 * lo).unwrap();
            let b = annulus_independence_bound(metric, 2, r1, r1 * hi).unwrap();
            prop_assert!(a <= b);
        }
    }

    #[test]
    fn pruned_queries_never_cost_more(seed in 0u64..500, grey_share in 0.0f64..1.0, r in 0.0f64..0.3) {
        let data = Arc::new(gen_clustered(600, 2, 5, seed).unwrap());
        let tree = MTree::build(data.clone(), Metric::Euclidean, MTreeConfig::with_capacity(8)).unwrap();
        let cut = (grey_share * data.len() as f64) as usize;
        let shade = NodeShade::new(&tree, |id| id >= cut);
        let center = data.points()[seed as usize % data.len()].clone();
        let mut plain = AccessCounter::default();
        let mut pruned = AccessCounter::default();
        let all = tree.range_query(&center, r, QueryOptions::default(), &mut plain).unwrap();
        let some = tree.range_query(&center, r, QueryOptions::default().pruned(&shade), &mut pruned).unwrap();
        prop_assert!(pruned.node_accesses <= plain.node_accesses);
        // Whatever pruning drops is inactive.
        for id in all.iter().filter(|id| !some.contains(id)) {
            prop_assert!(*id < cut);
        }
    }
}

#[test]
fn build_time_counts_match_brute_force() {
    let data = Arc::new(gen_uniform(200, 2, 11).unwrap());
    let tree = MTree::build(data.clone(), Metric::Euclidean, MTreeConfig::default().counting(0.1)).unwrap();
    let (radius, counts) = tree.build_counts().unwrap();
    assert_eq!(radius, 0.1);
    for (p, &count) in counts.iter().enumerate() {
        let truth = (0..data.len()).filter(|&q| q != p && data.dist(Metric::Euclidean, p, q) <= 0.1).count();
        assert_eq!(count as usize, truth, "object {p}");
    }
    assert!(tree.build_counter().node_accesses > 0);
}

#[test]
fn ten_thousand_points_chain_once_each() {
    let data = Arc::new(gen_uniform(10_000, 2, 1).unwrap());
    let tree = MTree::build(data, Metric::Euclidean, MTreeConfig::default()).unwrap();
    let mut seen: Vec<usize> = tree.leaf_iter().map(|e| e.object).collect();
    assert_eq!(seen.len(), 10_000);
    seen.sort_unstable();
    seen.dedup();
    assert_eq!(seen.len(), 10_000);
    tree.audit().unwrap();
    let fat = tree.fat_factor();
    assert!((0.0..=1.0).contains(&fat));
}

#[test]
fn hamming_distance_of_camera_like_rows() {
    let data = Dataset::categorical(&[vec!["A", "3"], vec!["A", "5"], vec!["B", "5"]]).unwrap();
    assert_eq!(data.dist(Metric::Hamming, 0, 1), 1.0);
    assert_eq!(data.dist(Metric::Hamming, 0, 2), 2.0);
    assert!(Metric::Euclidean.distance(&data.points()[0], &data.points()[1]).is_err());
}
