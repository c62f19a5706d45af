mod common;

use common::{layout, rel, scenario};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uavwpt::minmax::{dual_value_and_subgradient, solve_dual_ellipsoid, solve_p3, time_sharing_lp};
use uavwpt::sum_energy::{solve_p1, two_er_threshold};
use uavwpt::{Point, Scenario, Segment};

fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|m| l[i][m] * l[j][m]).sum();
            if i == j {
                let d = a[i][i] - s;
                if d <= 0.0 {
                    return None;
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

/// `xᵀ A⁻¹ x` through the Cholesky factor.
fn ellipsoid_norm(l: &[Vec<f64>], x: &[f64]) -> f64 {
    let n = x.len();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|m| l[i][m] * y[m]).sum();
        y[i] = (x[i] - s) / l[i][i];
    }
    y.iter().map(|v| v * v).sum()
}

fn random_simplex<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| -rng.gen_range(1e-9f64..1.0).ln()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

#[test]
fn symmetric_pairs_and_triangles_get_equal_weights() {
    for d in [2.0, 10.0] {
        let sol = solve_p3(&Scenario::two_er(d, 5.0, 10.0).unwrap()).unwrap();
        for l in &sol.certificate_lambda {
            assert!((l - 0.5).abs() <= 1e-3, "D = {d}: lambda {:?}", sol.certificate_lambda);
        }
    }
    let r = 8.0;
    let tri: Vec<Point> = (0..3)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / 3.0;
            Point::new(r * a.cos(), r * a.sin())
        })
        .collect();
    let sol = solve_p3(&scenario(tri, 5.0, 10.0)).unwrap();
    for l in &sol.certificate_lambda {
        assert!((l - 1.0 / 3.0).abs() <= 1e-3, "lambda {:?}", sol.certificate_lambda);
    }
}

#[test]
fn duplicated_receiver_gives_flat_dual() {
    let p = Point::new(1.0, 2.0);
    let scn = scenario(vec![p, p], 5.0, 10.0);
    let (f0, _) = dual_value_and_subgradient(&scn, &[0.5, 0.5]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let (f, _) = dual_value_and_subgradient(&scn, &random_simplex(&mut rng, 2)).unwrap();
        assert!(rel(f, f0) <= 1e-12);
    }
}

#[test]
fn off_simplex_weights_are_rejected() {
    let scn = Scenario::two_er(4.0, 5.0, 10.0).unwrap();
    assert!(dual_value_and_subgradient(&scn, &[0.7, 0.7]).is_err());
    assert!(dual_value_and_subgradient(&scn, &[1.0]).is_err());
    assert!(dual_value_and_subgradient(&scn, &[1.2, -0.2]).is_err());
}

#[test]
fn three_location_lp_matches_simplex_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let k = rng.gen_range(2..=4);
        let powers: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..k).map(|_| rng.gen_range(0.1..1.0)).collect())
            .collect();
        let budget = 10.0;
        let ts = time_sharing_lp(&powers, budget, &vec![0.0; k]).unwrap();
        assert!(rel(ts.durations.iter().sum(), budget) <= 1e-12);
        assert!(ts.durations.iter().all(|&t| t >= 0.0));
        let achieved = (0..k)
            .map(|j| (0..3).map(|g| ts.durations[g] * powers[g][j]).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        assert!(rel(achieved, ts.energy) <= 1e-9);

        let n = 600;
        let mut best = f64::NEG_INFINITY;
        for a in 0..=n {
            for b in 0..=(n - a) {
                let t = [a as f64, b as f64, (n - a - b) as f64].map(|v| v / n as f64 * budget);
                let e = (0..k)
                    .map(|j| (0..3).map(|g| t[g] * powers[g][j]).sum::<f64>())
                    .fold(f64::INFINITY, f64::min);
                best = best.max(e);
            }
        }
        // the grid optimum is feasible, and the LP optimum is at most one
        // grid cell (in every duration) away from a grid point
        assert!(ts.energy >= best * (1.0 - 1e-12));
        assert!(ts.energy <= best + 2.0 * budget / n as f64, "{} vs {best}", ts.energy);
        let dsum: f64 = ts.duals.iter().sum();
        assert!((dsum - 1.0).abs() <= 1e-9 && ts.duals.iter().all(|&y| y >= -1e-12));
    }
}

#[test]
fn zero_budget_returns_base_minimum() {
    let ts = time_sharing_lp(&[vec![1.0, 2.0]], 0.0, &[3.0, 5.0]).unwrap();
    assert_eq!(ts.energy, 3.0);
}

#[test]
fn ellipsoid_state_is_well_formed() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..4 {
        let ers: Vec<Point> = (0..4)
            .map(|_| Point::new(rng.gen_range(0.0..20.0), rng.gen_range(0.0..20.0)))
            .collect();
        let st = solve_dual_ellipsoid(&scenario(ers, 5.0, 10.0), 1e-5).unwrap();
        let l = cholesky(&st.ellipsoid_shape).expect("shape is positive definite");
        let red: Vec<f64> = st.lambda[..3]
            .iter()
            .zip(&st.ellipsoid_center)
            .map(|(a, c)| a - c)
            .collect();
        assert!(ellipsoid_norm(&l, &red) <= 1.0 + 1e-9);
        assert!(st.lower_bound <= st.dual_value);
        assert!((st.lambda.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn p3_solution_satisfies_duality_and_fairness(ers in layout(2..=5, 25.0), seed in any::<u64>()) {
        let t = 10.0;
        let scn = scenario(ers, 5.0, t);
        let sol = solve_p3(&scn).unwrap();
        let set = &sol.hover_set;
        prop_assert!(!set.is_empty());
        prop_assert!(rel(set.durations.iter().sum(), t) <= 1e-9);

        // strong duality up to the tolerance, weak duality everywhere
        prop_assert!(sol.relative_gap <= 1e-4, "gap {}", sol.relative_gap);
        prop_assert!(sol.report.min_energy <= sol.upper_bound_certificate * (1.0 + 1e-12));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..10 {
            let lambda = random_simplex(&mut rng, scn.num_ers());
            let (f, _) = dual_value_and_subgradient(&scn, &lambda).unwrap();
            prop_assert!(sol.report.min_energy <= f * (1.0 + 1e-9));
        }

        // complementary slackness
        for (k, &l) in sol.lambda_star.iter().enumerate() {
            if l > 1e-6 {
                let e = sol.report.per_er_energy[k];
                prop_assert!(rel(e, sol.report.min_energy) <= 1e-9, "er {} lambda {} energy {} vs {}", k, l, e, sol.report.min_energy);
            }
        }

        // the trajectory realizes the hover set
        let hovers: Vec<(Point, f64)> = sol.trajectory.segments.iter().map(|s| match *s {
            Segment::Hover { xy, duration } => (xy, duration),
            Segment::Fly { .. } => panic!("ideal trajectory must not fly"),
        }).collect();
        let expected: Vec<(Point, f64)> = set.locations.iter().cloned().zip(set.durations.iter().cloned())
            .filter(|&(_, d)| d >= 1e-9).collect();
        prop_assert_eq!(hovers, expected);

        // fairness dominates the best sum-energy hover
        let p1 = solve_p1(&scn, 0.05).unwrap();
        prop_assert!(sol.report.min_energy >= p1.report.min_energy * (1.0 - 1e-9));
    }
}

#[test]
fn far_apart_pair_matches_sum_energy_optimum() {
    for d in [7.0, 10.0, 16.0] {
        assert!(d > two_er_threshold(5.0));
        let scn = Scenario::two_er(d, 5.0, 10.0).unwrap();
        let p3 = solve_p3(&scn).unwrap();
        let p1 = solve_p1(&scn, 0.05).unwrap();
        assert!(rel(p3.report.sum_energy, p1.report.sum_energy) <= 1e-6, "D = {d}");
    }
}
