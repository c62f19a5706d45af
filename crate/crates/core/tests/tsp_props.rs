mod common;

use common::layout;
use proptest::prelude::*;
use uavwpt::tsp::{best_two_opt_gain, path_length, plan_open_path, plan_open_path_seeded, EXACT_MAX_POINTS};
use uavwpt::Point;

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

fn brute_open(points: &[Point]) -> f64 {
    permutations(points.len())
        .iter()
        .map(|p| path_length(points, p))
        .fold(f64::INFINITY, f64::min)
}

fn brute_closed(points: &[Point]) -> f64 {
    permutations(points.len())
        .iter()
        .map(|p| path_length(points, p) + points[p[p.len() - 1]].dist(points[p[0]]))
        .fold(f64::INFINITY, f64::min)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exact_regime_equals_brute_force(pts in layout(1..=8, 50.0), v in 0.5..20.0f64) {
        let plan = plan_open_path(&pts, v).unwrap();
        let mut sorted = plan.order.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..pts.len()).collect::<Vec<_>>());
        prop_assert_eq!(plan.d_fly, brute_open(&pts));
        prop_assert_eq!(plan.leg_lengths.len(), pts.len() - 1);
        prop_assert_eq!(plan.d_fly, plan.leg_lengths.iter().sum::<f64>());
        prop_assert_eq!(plan.t_fly, plan.d_fly / v);
    }

    #[test]
    fn open_path_never_longer_than_closed_tour(pts in layout(2..=7, 50.0)) {
        let plan = plan_open_path(&pts, 1.0).unwrap();
        prop_assert!(plan.d_fly <= brute_closed(&pts));
    }

    #[test]
    fn heuristic_regime_is_two_opt_stable(pts in layout(EXACT_MAX_POINTS + 1..=30, 100.0), seed in any::<u64>()) {
        let plan = plan_open_path_seeded(&pts, 3.0, seed).unwrap();
        let mut sorted = plan.order.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..pts.len()).collect::<Vec<_>>());
        prop_assert!(best_two_opt_gain(&pts, &plan.order) <= 1e-9);
        prop_assert!((plan.d_fly - path_length(&pts, &plan.order)).abs() <= 1e-9);
        // same seed, same answer
        prop_assert_eq!(plan_open_path_seeded(&pts, 3.0, seed).unwrap(), plan);
    }
}

#[test]
fn two_and_five_point_cases() {
    let two = [Point::new(0.0, 0.0), Point::new(3.0, 4.0)];
    let plan = plan_open_path(&two, 2.0).unwrap();
    assert_eq!(plan.d_fly, 5.0);
    assert_eq!(plan.t_fly, 2.5);

    let five = [
        Point::new(0.0, 0.0),
        Point::new(10.0, 1.0),
        Point::new(2.0, 7.0),
        Point::new(8.0, 8.0),
        Point::new(5.0, -3.0),
    ];
    assert_eq!(plan_open_path(&five, 1.0).unwrap().d_fly, brute_open(&five));
}

#[test]
fn single_point_has_no_legs() {
    let plan = plan_open_path(&[Point::new(1.0, 1.0)], 1.0).unwrap();
    assert_eq!(plan.order, vec![0]);
    assert_eq!(plan.d_fly, 0.0);
}

#[test]
fn degenerate_inputs_are_rejected() {
    assert!(plan_open_path(&[], 1.0).is_err());
    assert!(plan_open_path(&[Point::new(0.0, 0.0), Point::new(1.0, 0.0)], 0.0).is_err());
}
