//! Exhaustive grid search over the receiver bounding box followed by a
//! local Newton polish.
//!
//! The objectives searched here are nonnegative combinations of the
//! per-receiver powers `Q_k`, whose maximizers always lie in the box spanned
//! by the receivers. The grid stores each `Q_k` once ([`PowerGrid`]) so that
//! repeated searches with different weights (the dual iterations) cost one
//! pass of multiply-adds over the grid.

use crate::geometry::{BoundingBox, Point};
use crate::model::Scenario;
use crate::par::Exec;

/// Powers within this absolute distance of the best are treated as ties.
pub const TIE_TOL_W: f64 = 1e-12;
/// Polished maximizers are reported once their gradient norm is below this.
pub const GRAD_TOL: f64 = 1e-9;

/// Grid pitch used when the caller does not choose one:
/// `max(0.05 m, box diagonal / 2000)`.
pub fn default_grid_step(bbox: &BoundingBox) -> f64 {
    (bbox.diagonal() / 2000.0).max(0.05)
}

/// A rectangular lattice covering a box, both ends included, with pitch at
/// most the requested step.
#[derive(Debug, Clone)]
pub struct Grid {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let width = hi - lo;
    if width <= 0.0 {
        return vec![lo];
    }
    let n = (width / step).ceil() as usize + 1;
    let pitch = width / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + i as f64 * pitch })
        .collect()
}

impl Grid {
    pub fn new(bbox: &BoundingBox, step: f64) -> Self {
        assert!(step > 0.0, "grid step must be positive");
        Grid {
            xs: axis(bbox.x_min, bbox.x_max, step),
            ys: axis(bbox.y_min, bbox.y_max, step),
        }
    }

    pub fn len(&self) -> usize {
        self.xs.len() * self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.xs.len(), self.ys.len())
    }

    /// Largest spacing between neighboring lattice points along an axis.
    pub fn pitch(&self) -> f64 {
        let p = |v: &[f64]| if v.len() > 1 { v[1] - v[0] } else { 0.0 };
        p(&self.xs).max(p(&self.ys))
    }

    /// Points are stored x-major, so index order is lexicographic in (x, y).
    pub fn point(&self, idx: usize) -> Point {
        let ny = self.ys.len();
        Point::new(self.xs[idx / ny], self.ys[idx % ny])
    }

    pub fn evaluate<F>(&self, f: F, exec: Exec) -> Vec<f64>
    where
        F: Fn(Point) -> f64 + Sync + Send,
    {
        exec.map_range(self.xs.len(), |i| {
            let x = self.xs[i];
            self.ys.iter().map(|&y| f(Point::new(x, y))).collect::<Vec<_>>()
        })
        .concat()
    }

    /// Index of the largest value; exact ties go to the smallest `(x, y)`.
    pub fn argmax(values: &[f64]) -> usize {
        let mut best = 0;
        for (i, &v) in values.iter().enumerate().skip(1) {
            if v > values[best] {
                best = i;
            }
        }
        best
    }

    /// Indices that are at least as large as all of their 8 neighbors,
    /// sorted by decreasing value (ties by index).
    pub fn local_maxima(&self, values: &[f64]) -> Vec<usize> {
        let (nx, ny) = self.shape();
        let mut out = Vec::new();
        for i in 0..nx {
            for j in 0..ny {
                let v = values[i * ny + j];
                let mut is_max = true;
                'nb: for di in -1i64..=1 {
                    for dj in -1i64..=1 {
                        if di == 0 && dj == 0 {
                            continue;
                        }
                        let (a, b) = (i as i64 + di, j as i64 + dj);
                        if a < 0 || b < 0 || a >= nx as i64 || b >= ny as i64 {
                            continue;
                        }
                        if values[a as usize * ny + b as usize] > v {
                            is_max = false;
                            break 'nb;
                        }
                    }
                }
                if is_max {
                    out.push(i * ny + j);
                }
            }
        }
        out.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        out
    }
}

/// Per-receiver power fields sampled on a [`Grid`].
#[derive(Debug, Clone)]
pub struct PowerGrid {
    grid: Grid,
    fields: Vec<Vec<f64>>,
    exec: Exec,
}

impl PowerGrid {
    pub fn new(scn: &Scenario, step: f64, exec: Exec) -> Self {
        let grid = Grid::new(&scn.bounding_box(), step);
        let fields = (0..scn.num_ers())
            .map(|k| grid.evaluate(|p| scn.power(p, k), exec))
            .collect();
        PowerGrid { grid, fields, exec }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `Σ_k w_k Q_k` at every grid point.
    pub fn weighted(&self, weights: &[f64]) -> Vec<f64> {
        debug_assert_eq!(weights.len(), self.fields.len());
        let n = self.grid.len();
        let chunk = 4096;
        let chunks = n.div_ceil(chunk);
        self.exec
            .map_range(chunks, |c| {
                let lo = c * chunk;
                let hi = (lo + chunk).min(n);
                let mut acc = vec![0.0; hi - lo];
                for (w, field) in weights.iter().zip(&self.fields) {
                    if *w == 0.0 {
                        continue;
                    }
                    for (a, q) in acc.iter_mut().zip(&field[lo..hi]) {
                        *a += w * q;
                    }
                }
                acc
            })
            .concat()
    }

    /// `min_k Q_k` at every grid point.
    pub fn min_field(&self) -> Vec<f64> {
        let n = self.grid.len();
        (0..n)
            .map(|i| self.fields.iter().map(|f| f[i]).fold(f64::INFINITY, f64::min))
            .collect()
    }
}

/// `Σ_k w_k Q_k(p)` together with its gradient and Hessian.
#[derive(Debug, Clone)]
pub struct WeightedPower<'a> {
    scn: &'a Scenario,
    weights: Vec<f64>,
}

impl<'a> WeightedPower<'a> {
    pub fn new(scn: &'a Scenario, weights: Vec<f64>) -> Self {
        assert_eq!(weights.len(), scn.num_ers());
        WeightedPower { scn, weights }
    }

    pub fn uniform(scn: &'a Scenario) -> Self {
        WeightedPower::new(scn, vec![1.0; scn.num_ers()])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn value(&self, p: Point) -> f64 {
        self.scn.weighted_power(p, &self.weights)
    }

    /// Returns `(value, gradient, [h_xx, h_xy, h_yy])`.
    pub fn derivatives(&self, p: Point) -> (f64, [f64; 2], [f64; 3]) {
        let c = self.scn.beta0_p();
        let h2 = self.scn.altitude().powi(2);
        let mut v = 0.0;
        let mut g = [0.0; 2];
        let mut h = [0.0; 3];
        for (w, e) in self.weights.iter().zip(self.scn.ers()) {
            if *w == 0.0 {
                continue;
            }
            let u = p - *e;
            let z = u.x * u.x + u.y * u.y + h2;
            let wc = w * c;
            let q = wc / z;
            let z2 = z * z;
            let z3 = z2 * z;
            v += q;
            g[0] -= 2.0 * wc * u.x / z2;
            g[1] -= 2.0 * wc * u.y / z2;
            h[0] += -2.0 * wc / z2 + 8.0 * wc * u.x * u.x / z3;
            h[1] += 8.0 * wc * u.x * u.y / z3;
            h[2] += -2.0 * wc / z2 + 8.0 * wc * u.y * u.y / z3;
        }
        (v, g, h)
    }
}

/// A polished local maximizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximizer {
    pub point: Point,
    pub value: f64,
    pub grad_norm: f64,
}

/// Gradient with components that push out of the box through an active
/// bound removed.
fn projected_grad(p: Point, g: [f64; 2], bbox: &BoundingBox) -> [f64; 2] {
    let mut out = g;
    if (p.x <= bbox.x_min && g[0] < 0.0) || (p.x >= bbox.x_max && g[0] > 0.0) {
        out[0] = 0.0;
    }
    if (p.y <= bbox.y_min && g[1] < 0.0) || (p.y >= bbox.y_max && g[1] > 0.0) {
        out[1] = 0.0;
    }
    out
}

/// Safeguarded Newton ascent from `start`, kept inside `bbox`.
pub fn polish(obj: &WeightedPower<'_>, start: Point, bbox: &BoundingBox) -> Maximizer {
    let mut p = bbox.clamp(start);
    let (mut v, mut g, mut h) = obj.derivatives(p);
    for _ in 0..200 {
        let pg = projected_grad(p, g, bbox);
        let gn = pg[0].hypot(pg[1]);
        if gn == 0.0 {
            break;
        }
        let det = h[0] * h[2] - h[1] * h[1];
        let dir = if h[0] < 0.0 && det > 0.0 {
            // −H⁻¹ g
            Point::new(
                -(h[2] * pg[0] - h[1] * pg[1]) / det,
                -(-h[1] * pg[0] + h[0] * pg[1]) / det,
            )
        } else {
            let curv = (h[0].abs() + h[1].abs()).max(h[1].abs() + h[2].abs());
            let scale = if curv > 0.0 { 1.0 / curv } else { 1.0 };
            Point::new(pg[0] * scale, pg[1] * scale)
        };
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-12 {
            let cand = bbox.clamp(p + dir * t);
            let cv = obj.value(cand);
            if cv > v || (cv == v && cand != p && t == 1.0) {
                let step = cand.dist(p);
                p = cand;
                (v, g, h) = obj.derivatives(p);
                moved = step > 1e-14 * (1.0 + p.norm());
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    let pg = projected_grad(p, g, bbox);
    Maximizer {
        point: p,
        value: v,
        grad_norm: pg[0].hypot(pg[1]),
    }
}

/// Grid local maxima more than this fraction below the grid maximum are not
/// polished; discretization error on a peak is far smaller.
const START_WINDOW: f64 = 0.05;

/// Polishes the best grid local maxima of `values` (at most `max_starts` of
/// them) and returns the distinct maximizers, best first. Points closer
/// than `merge_radius` collapse onto the better one.
pub fn polish_candidates(
    obj: &WeightedPower<'_>,
    grid: &Grid,
    values: &[f64],
    bbox: &BoundingBox,
    max_starts: usize,
    merge_radius: f64,
) -> Vec<Maximizer> {
    let starts = grid.local_maxima(values);
    let floor = values[starts[0]] * (1.0 - START_WINDOW);
    let mut polished: Vec<Maximizer> = starts
        .iter()
        .take_while(|&&i| values[i] >= floor)
        .take(max_starts)
        .map(|&i| polish(obj, grid.point(i), bbox))
        .collect();
    polished.sort_by(|a, b| {
        b.value
            .total_cmp(&a.value)
            .then_with(|| a.point.lex_cmp(&b.point))
    });
    let mut distinct: Vec<Maximizer> = Vec::new();
    for m in polished {
        if distinct.iter().all(|d| d.point.dist(m.point) >= merge_radius) {
            distinct.push(m);
        }
    }
    distinct
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_includes_box_corners() {
        let b = BoundingBox {
            x_min: -1.0,
            x_max: 2.0,
            y_min: 0.0,
            y_max: 0.0,
        };
        let g = Grid::new(&b, 0.7);
        let (nx, ny) = g.shape();
        assert_eq!(ny, 1);
        assert_eq!(nx, 6);
        assert_eq!(g.point(0), Point::new(-1.0, 0.0));
        assert_eq!(g.point(nx - 1), Point::new(2.0, 0.0));
        assert!(g.pitch() <= 0.7);
    }

    #[test]
    fn argmax_breaks_ties_lexicographically() {
        assert_eq!(Grid::argmax(&[1.0, 3.0, 2.0, 3.0]), 1);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let scn = Scenario::new(
            vec![Point::new(0.0, 0.0), Point::new(7.0, 2.0), Point::new(3.0, -4.0)],
            5.0,
            10.0,
            1e-3,
            1.0,
            1.0,
        )
        .unwrap();
        let obj = WeightedPower::new(&scn, vec![0.2, 0.5, 0.3]);
        let p = Point::new(2.3, 0.7);
        let (_, g, h) = obj.derivatives(p);
        let eps = 1e-5;
        let dx = (obj.value(p + Point::new(eps, 0.0)) - obj.value(p - Point::new(eps, 0.0))) / (2.0 * eps);
        let dy = (obj.value(p + Point::new(0.0, eps)) - obj.value(p - Point::new(0.0, eps))) / (2.0 * eps);
        assert!(((dx - g[0]) / g[0]).abs() < 1e-6);
        assert!(((dy - g[1]) / g[1]).abs() < 1e-6);
        let gx = |q: Point| obj.derivatives(q).1;
        let hxy = (gx(p + Point::new(0.0, eps))[0] - gx(p - Point::new(0.0, eps))[0]) / (2.0 * eps);
        assert!(((hxy - h[1]) / h[1]).abs() < 1e-5);
    }

    #[test]
    fn polish_reaches_single_receiver() {
        let scn = Scenario::new(vec![Point::new(1.0, -2.0)], 5.0, 10.0, 1e-3, 1.0, 1.0).unwrap();
        let b = BoundingBox {
            x_min: -5.0,
            x_max: 5.0,
            y_min: -5.0,
            y_max: 5.0,
        };
        let m = polish(&WeightedPower::uniform(&scn), Point::new(3.0, 3.0), &b);
        assert!(m.point.dist(Point::new(1.0, -2.0)) < 1e-10);
        assert!(m.grad_norm <= GRAD_TOL);
    }
}
