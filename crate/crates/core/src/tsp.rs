//! Shortest open path through a set of points.
//!
//! An open path with free endpoints is a closed tour through the points plus
//! one dummy node at distance zero from all of them. Up to 15 points the tour
//! is solved exactly by Held–Karp; beyond that by nearest-neighbor starts and
//! random restarts polished with 2-opt.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;

/// Largest point count solved exactly (Γ + 1 nodes with the dummy).
pub const EXACT_MAX_POINTS: usize = 15;
/// Seed used when the caller does not supply one.
pub const DEFAULT_SEED: u64 = 0x5eed;
const RANDOM_RESTARTS: usize = 16;
const IMPROVE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPlan {
    /// Visiting order as indices into the input points.
    pub order: Vec<usize>,
    /// `leg_lengths[i]` joins `order[i]` and `order[i + 1]`, meters.
    pub leg_lengths: Vec<f64>,
    pub d_fly: f64,
    pub t_fly: f64,
}

/// Length of the open path visiting `points` in `order`, summed left to right.
pub fn path_length(points: &[Point], order: &[usize]) -> f64 {
    order
        .windows(2)
        .fold(0.0, |acc, w| acc + points[w[0]].dist(points[w[1]]))
}

pub fn plan_open_path(points: &[Point], speed: f64) -> Result<PathPlan> {
    plan_open_path_seeded(points, speed, DEFAULT_SEED)
}

/// Like [`plan_open_path`]; `seed` drives the random restarts of the
/// heuristic regime and has no effect on exact solves.
pub fn plan_open_path_seeded(points: &[Point], speed: f64, seed: u64) -> Result<PathPlan> {
    if points.is_empty() {
        return Err(Error::domain("path planning needs at least one point"));
    }
    if !(speed.is_finite() && speed > 0.0) {
        return Err(Error::domain(format!("speed must be > 0, got {speed}")));
    }
    if points.iter().any(|p| !p.is_finite()) {
        return Err(Error::domain("points must be finite"));
    }
    let order = if points.len() <= EXACT_MAX_POINTS {
        held_karp(points)
    } else {
        heuristic(points, seed)
    };
    let leg_lengths: Vec<f64> = order
        .windows(2)
        .map(|w| points[w[0]].dist(points[w[1]]))
        .collect();
    let d_fly = leg_lengths.iter().fold(0.0, |a, l| a + l);
    Ok(PathPlan {
        order,
        leg_lengths,
        d_fly,
        t_fly: d_fly / speed,
    })
}

/// Exact shortest open path.
///
/// `best[S][j]` is the shortest left-to-right float sum of a path covering
/// `S` and ending at `j`, so the optimum equals a brute-force minimum
/// bit for bit.
fn held_karp(points: &[Point]) -> Vec<usize> {
    let n = points.len();
    if n == 1 {
        return vec![0];
    }
    let d: Vec<Vec<f64>> = points
        .iter()
        .map(|&a| points.iter().map(|&b| a.dist(b)).collect())
        .collect();
    let full = (1usize << n) - 1;
    let mut best = vec![f64::INFINITY; (full + 1) * n];
    for j in 0..n {
        best[(1 << j) * n + j] = 0.0;
    }
    for set in 1..=full {
        for j in 0..n {
            let cur = best[set * n + j];
            if set & (1 << j) == 0 || cur == f64::INFINITY {
                continue;
            }
            for k in 0..n {
                if set & (1 << k) != 0 {
                    continue;
                }
                let next = set | (1 << k);
                let cand = cur + d[j][k];
                if cand < best[next * n + k] {
                    best[next * n + k] = cand;
                }
            }
        }
    }

    let opt = (0..n).map(|j| best[full * n + j]).fold(f64::INFINITY, f64::min);
    let mut end = (0..n).find(|&j| best[full * n + j] == opt).unwrap();
    let mut set = full;
    let mut rev = vec![end];
    while set.count_ones() > 1 {
        let prev_set = set & !(1 << end);
        let target = best[set * n + end];
        let prev = (0..n)
            .find(|&i| prev_set & (1 << i) != 0 && best[prev_set * n + i] + d[i][end] == target)
            .expect("Held-Karp table is consistent");
        rev.push(prev);
        set = prev_set;
        end = prev;
    }
    // `rev` is the path read backwards; keep whichever orientation is
    // lexicographically smaller among those attaining the optimum.
    let mut fwd = rev.clone();
    fwd.reverse();
    if path_length(points, &rev) == opt && rev < fwd {
        rev
    } else {
        fwd
    }
}

fn heuristic(points: &[Point], seed: u64) -> Vec<usize> {
    let n = points.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut consider = |mut order: Vec<usize>| {
        two_opt(points, &mut order);
        let len = path_length(points, &order);
        let better = match &best {
            None => true,
            Some((bl, bo)) => len < *bl || (len == *bl && order < *bo),
        };
        if better {
            best = Some((len, order));
        }
    };
    for start in 0..n {
        consider(nearest_neighbor(points, start));
    }
    for _ in 0..RANDOM_RESTARTS {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        consider(order);
    }
    best.unwrap().1
}

fn nearest_neighbor(points: &[Point], start: usize) -> Vec<usize> {
    let n = points.len();
    let mut used = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut cur = start;
    used[cur] = true;
    order.push(cur);
    for _ in 1..n {
        let next = (0..n)
            .filter(|&j| !used[j])
            .min_by(|&a, &b| points[cur].dist(points[a]).total_cmp(&points[cur].dist(points[b])))
            .unwrap();
        used[next] = true;
        order.push(next);
        cur = next;
    }
    order
}

/// Gain of reversing `order[i..=j]` of an open path (positive = shorter).
fn reversal_gain(points: &[Point], order: &[usize], i: usize, j: usize) -> f64 {
    let n = order.len();
    let p = |idx: usize| points[order[idx]];
    let mut old = 0.0;
    let mut new = 0.0;
    if i > 0 {
        old += p(i - 1).dist(p(i));
        new += p(i - 1).dist(p(j));
    }
    if j + 1 < n {
        old += p(j).dist(p(j + 1));
        new += p(i).dist(p(j + 1));
    }
    old - new
}

/// Open-path 2-opt, including reversals of a prefix or suffix, run until no
/// reversal shortens the path.
pub fn two_opt(points: &[Point], order: &mut [usize]) {
    let n = order.len();
    if n < 3 {
        return;
    }
    loop {
        let mut improved = false;
        for i in 0..n - 1 {
            for j in i + 1..n {
                if (i, j) == (0, n - 1) {
                    continue;
                }
                if reversal_gain(points, order, i, j) > IMPROVE_EPS {
                    order[i..=j].reverse();
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
}

/// Largest improvement any single reversal would still give.
pub fn best_two_opt_gain(points: &[Point], order: &[usize]) -> f64 {
    let n = order.len();
    let mut best = 0.0f64;
    for i in 0..n.saturating_sub(1) {
        for j in i + 1..n {
            best = best.max(reversal_gain(points, order, i, j));
        }
    }
    best
}
