//! Successive convex refinement of a discretized trajectory.
//!
//! Per slot the received energy `cΔ / z` (with `z` the squared 3-D
//! distance) is convex in `z`, so its tangent at the current iterate,
//! `cΔ(2/z₀ − z/z₀²)`, is a concave quadratic lower bound in the position
//! that is tight at the iterate. Maximizing the minimum of these bounds
//! under the per-slot step limit can only raise the true objective.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::model::Scenario;
use crate::par::Exec;
use crate::trajectory::{discrete_energies, DiscreteTrajectory, Trajectory};

/// Target relative duality gap of the subproblem solve.
pub const KKT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITERS: usize = 200;
pub const DEFAULT_REL_TOL: f64 = 1e-6;

const MAX_OUTER: usize = 40;
const MAX_NEWTON: usize = 80;
const NEWTON_TOL: f64 = 1e-10;
const BARRIER_GROWTH: f64 = 16.0;
/// Relative shrink of the warm start about its mean, for strict feasibility.
const SHRINK: f64 = 1e-3;

/// Default slot count: enough that one slot moves the UAV by at most `H/8`.
pub fn default_slots(scn: &Scenario) -> usize {
    let n = (8.0 * scn.horizon() * scn.max_speed() / scn.altitude()).ceil();
    if n.is_finite() {
        (n as usize).max(100)
    } else {
        100
    }
}

/// Samples `traj` at the slot midpoints `(n − ½)Δ`, `Δ = duration / n_slots`.
pub fn discretize(traj: &Trajectory, n_slots: usize) -> Result<DiscreteTrajectory> {
    if n_slots == 0 {
        return Err(Error::domain("need at least one slot"));
    }
    let t = traj.duration();
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain("trajectory must have positive duration"));
    }
    let dt = t / n_slots as f64;
    let times: Vec<f64> = (0..n_slots).map(|n| (n as f64 + 0.5) * dt).collect();
    DiscreteTrajectory::new(traj.positions_at(&times), dt)
}

/// Concave per-slot lower bounds `a_kn − b_kn·(|p − e_k|² + H²)` of the
/// slot energies, built at an expansion trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateModel {
    ers: Vec<Point>,
    h2: f64,
    /// `β₀P·Δ`.
    c_dt: f64,
    /// Squared 3-D distance at the expansion point, `[k][n]`.
    z0: Vec<Vec<f64>>,
}

impl SurrogateModel {
    pub fn num_slots(&self) -> usize {
        self.z0.first().map_or(0, Vec::len)
    }

    /// `(a, b)` of slot `n` for receiver `k`.
    pub fn coefficients(&self, k: usize, n: usize) -> (f64, f64) {
        let z0 = self.z0[k][n];
        (2.0 * self.c_dt / z0, self.c_dt / (z0 * z0))
    }

    pub fn value(&self, k: usize, n: usize, p: Point) -> f64 {
        let (a, b) = self.coefficients(k, n);
        a - b * (p.dist_sq(self.ers[k]) + self.h2)
    }

    pub fn gradient(&self, k: usize, n: usize, p: Point) -> [f64; 2] {
        let (_, b) = self.coefficients(k, n);
        let u = p - self.ers[k];
        [-2.0 * b * u.x, -2.0 * b * u.y]
    }

    /// Lower-bound energy of every receiver along `points`.
    pub fn energies(&self, points: &[Point]) -> Vec<f64> {
        (0..self.ers.len())
            .map(|k| {
                points
                    .iter()
                    .enumerate()
                    .map(|(n, &p)| self.value(k, n, p))
                    .sum()
            })
            .collect()
    }

    pub fn min_energy(&self, points: &[Point]) -> f64 {
        self.energies(points).into_iter().fold(f64::INFINITY, f64::min)
    }
}

pub fn build_surrogate(scn: &Scenario, iterate: &DiscreteTrajectory) -> SurrogateModel {
    let h2 = scn.altitude() * scn.altitude();
    let ers = scn.ers().to_vec();
    let z0 = Exec::default().map_range(ers.len(), |k| {
        iterate
            .points
            .iter()
            .map(|p| p.dist_sq(ers[k]) + h2)
            .collect()
    });
    SurrogateModel {
        ers,
        h2,
        c_dt: scn.beta0_p() * iterate.slot_duration,
        z0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubproblemSolution {
    pub iterate: DiscreteTrajectory,
    /// Surrogate max-min energy of `iterate`, joules.
    pub surrogate_min: f64,
    /// Surrogate max-min energy of the warm start, joules.
    pub warm_surrogate_min: f64,
    /// Bound on the relative duality gap of the solve; the returned point
    /// is optimal for the subproblem within this fraction.
    pub kkt_residual: f64,
    /// Set when the Newton iteration broke down and the warm start was kept.
    pub stalled: bool,
}

type V2 = [f64; 2];
type M2 = [[f64; 2]; 2];

fn inv2(a: &M2) -> Option<M2> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if !(det > 0.0 && det.is_finite()) {
        return None;
    }
    Some([[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]])
}

fn mul2(a: &M2, b: &M2) -> M2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn apply2(a: &M2, v: V2) -> V2 {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

/// Factorization of a symmetric positive-definite block-tridiagonal matrix
/// with 2×2 blocks; `off[m]` couples slots `m − 1` and `m`.
struct BlockTridiag {
    pivot_inv: Vec<M2>,
    lower: Vec<M2>,
    off: Vec<M2>,
}

impl BlockTridiag {
    fn factor(diag: &[M2], off: Vec<M2>) -> Option<Self> {
        let n = diag.len();
        let mut pivot_inv = Vec::with_capacity(n);
        let mut lower = vec![[[0.0; 2]; 2]; n];
        pivot_inv.push(inv2(&diag[0])?);
        for m in 1..n {
            // off blocks are symmetric, so the sub-diagonal block equals off[m]
            let l = mul2(&off[m], &pivot_inv[m - 1]);
            let lo = mul2(&l, &off[m]);
            let mut piv = diag[m];
            for i in 0..2 {
                for j in 0..2 {
                    piv[i][j] -= lo[i][j];
                }
            }
            pivot_inv.push(inv2(&piv)?);
            lower[m] = l;
        }
        Some(BlockTridiag {
            pivot_inv,
            lower,
            off,
        })
    }

    fn solve(&self, b: &[V2]) -> Vec<V2> {
        let n = b.len();
        let mut y = b.to_vec();
        for m in 1..n {
            let ly = apply2(&self.lower[m], y[m - 1]);
            y[m] = [y[m][0] - ly[0], y[m][1] - ly[1]];
        }
        let mut x = vec![[0.0; 2]; n];
        x[n - 1] = apply2(&self.pivot_inv[n - 1], y[n - 1]);
        for m in (0..n - 1).rev() {
            let ox = apply2(&self.off[m + 1], x[m + 1]);
            x[m] = apply2(&self.pivot_inv[m], [y[m][0] - ox[0], y[m][1] - ox[1]]);
        }
        x
    }
}

/// Dense solve by Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if !(a[piv][col].abs() > 0.0) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[row][c] -= f * a[col][c];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// The subproblem in scaled units: maximize `t` subject to
/// `g_k = Σ_m (c[k][m] − β[k][m]·|q_m − e_k|²) − t ≥ 0` and
/// `h_m = r² − |q_m − q_{m−1}|² ≥ 0`, by a log-barrier method.
struct Barrier {
    e: Vec<V2>,
    c: Vec<Vec<f64>>,
    beta: Vec<Vec<f64>>,
    r2: f64,
}

struct Newton {
    dq: Vec<V2>,
    dt: f64,
    decrement: f64,
}

impl Barrier {
    fn num_constraints(&self, m: usize) -> usize {
        self.e.len() + m - 1
    }

    fn g(&self, q: &[V2], t: f64) -> Vec<f64> {
        self.e
            .iter()
            .enumerate()
            .map(|(k, e)| {
                q.iter()
                    .enumerate()
                    .map(|(m, p)| {
                        let (dx, dy) = (p[0] - e[0], p[1] - e[1]);
                        self.c[k][m] - self.beta[k][m] * (dx * dx + dy * dy)
                    })
                    .sum::<f64>()
                    - t
            })
            .collect()
    }

    fn h(&self, q: &[V2]) -> Vec<f64> {
        q.windows(2)
            .map(|w| {
                let (dx, dy) = (w[1][0] - w[0][0], w[1][1] - w[0][1]);
                self.r2 - (dx * dx + dy * dy)
            })
            .collect()
    }

    /// `−τt − Σ ln g − Σ ln h`, or `None` outside the strict interior.
    fn potential(&self, q: &[V2], t: f64, tau: f64) -> Option<f64> {
        let mut v = -tau * t;
        for x in self.g(q, t).into_iter().chain(self.h(q)) {
            if !(x > 0.0) {
                return None;
            }
            v -= x.ln();
        }
        Some(v)
    }

    fn newton(&self, q: &[V2], t: f64, tau: f64) -> Option<Newton> {
        let n = q.len();
        let kk = self.e.len();
        let g = self.g(q, t);
        let h = self.h(q);

        let mut grad_q = vec![[0.0; 2]; n];
        let mut grad_t = -tau;
        let mut diag = vec![[[0.0; 2]; 2]; n];
        let mut off = vec![[[0.0; 2]; 2]; n];
        // v[k] = ∇_q g_k / g_k, s[k] = ∂_t g_k / g_k
        let mut v = vec![vec![[0.0; 2]; n]; kk];
        let mut s = vec![0.0; kk];
        for k in 0..kk {
            let gk = g[k];
            grad_t += 1.0 / gk;
            s[k] = -1.0 / gk;
            for m in 0..n {
                let w = 2.0 * self.beta[k][m] / gk;
                let u = [q[m][0] - self.e[k][0], q[m][1] - self.e[k][1]];
                grad_q[m][0] += w * u[0];
                grad_q[m][1] += w * u[1];
                diag[m][0][0] += w;
                diag[m][1][1] += w;
                v[k][m] = [-w * u[0], -w * u[1]];
            }
        }
        for j in 1..n {
            let d = [q[j][0] - q[j - 1][0], q[j][1] - q[j - 1][1]];
            let hj = h[j - 1];
            for i in 0..2 {
                grad_q[j][i] += 2.0 * d[i] / hj;
                grad_q[j - 1][i] -= 2.0 * d[i] / hj;
            }
            let mut blk = [[0.0; 2]; 2];
            for a in 0..2 {
                for b in 0..2 {
                    blk[a][b] = 4.0 * d[a] * d[b] / (hj * hj) + if a == b { 2.0 / hj } else { 0.0 };
                }
            }
            for a in 0..2 {
                for b in 0..2 {
                    diag[j][a][b] += blk[a][b];
                    diag[j - 1][a][b] += blk[a][b];
                    off[j][a][b] = -blk[a][b];
                }
            }
        }

        // Hessian = [B + VVᵀ, Vs; sᵀVᵀ, sᵀs]. Eliminating dt leaves
        // (B + V P Vᵀ) dq = r̃ with the projector P = I − ssᵀ/σ, which the
        // push-through identity reduces to K × K.
        let fac = BlockTridiag::factor(&diag, off)?;
        let sigma: f64 = s.iter().map(|x| x * x).sum();
        let r_t = -grad_t;
        let mut r = vec![[0.0; 2]; n];
        for m in 0..n {
            let mut acc = [-grad_q[m][0], -grad_q[m][1]];
            for k in 0..kk {
                let f = s[k] * r_t / sigma;
                acc[0] -= v[k][m][0] * f;
                acc[1] -= v[k][m][1] * f;
            }
            r[m] = acc;
        }
        let dot = |a: &[V2], b: &[V2]| -> f64 { a.iter().zip(b).map(|(x, y)| x[0] * y[0] + x[1] * y[1]).sum() };
        let y0 = fac.solve(&r);
        let ys: Vec<Vec<V2>> = v.iter().map(|vk| fac.solve(vk)).collect();
        let gmat: Vec<Vec<f64>> = (0..kk).map(|i| (0..kk).map(|j| dot(&v[i], &ys[j])).collect()).collect();
        let z: Vec<f64> = v.iter().map(|vk| dot(vk, &y0)).collect();
        // I + G P
        let mut a = vec![vec![0.0; kk]; kk];
        for i in 0..kk {
            for j in 0..kk {
                let gp: f64 = (0..kk)
                    .map(|l| gmat[i][l] * (if l == j { 1.0 } else { 0.0 } - s[l] * s[j] / sigma))
                    .sum();
                a[i][j] = gp + if i == j { 1.0 } else { 0.0 };
            }
        }
        let w = solve_dense(a, z)?;
        let sw: f64 = s.iter().zip(&w).map(|(a, b)| a * b).sum();
        let pw: Vec<f64> = w.iter().zip(&s).map(|(wi, si)| wi - si * sw / sigma).collect();
        let mut dq = y0;
        for k in 0..kk {
            for m in 0..n {
                dq[m][0] -= ys[k][m][0] * pw[k];
                dq[m][1] -= ys[k][m][1] * pw[k];
            }
        }
        let svd: f64 = (0..kk).map(|k| s[k] * dot(&v[k], &dq)).sum();
        let dt = (r_t - svd) / sigma;
        let decrement = -(dot(&grad_q, &dq) + grad_t * dt);
        if !decrement.is_finite() {
            return None;
        }
        Some(Newton { dq, dt, decrement })
    }

    /// Path-following from the strictly feasible `(q, t)`. Returns the
    /// final point and the relative duality-gap bound `n_con/(τ·t)`.
    fn solve(&self, mut q: Vec<V2>, mut t: f64, gap_tol: f64) -> (Vec<V2>, f64, f64, bool) {
        let n_con = self.num_constraints(q.len()) as f64;
        let mut tau = n_con;
        let mut ok = true;
        for _ in 0..MAX_OUTER {
            for _ in 0..MAX_NEWTON {
                let Some(step) = self.newton(&q, t, tau) else {
                    ok = false;
                    break;
                };
                if step.decrement <= 2.0 * NEWTON_TOL {
                    break;
                }
                let phi0 = self.potential(&q, t, tau).unwrap_or(f64::INFINITY);
                let mut a = 1.0;
                let mut moved = false;
                while a >= 1e-14 {
                    let cand: Vec<V2> = q
                        .iter()
                        .zip(&step.dq)
                        .map(|(p, d)| [p[0] + a * d[0], p[1] + a * d[1]])
                        .collect();
                    let ct = t + a * step.dt;
                    if let Some(phi) = self.potential(&cand, ct, tau) {
                        if phi <= phi0 - 0.25 * a * step.decrement {
                            q = cand;
                            t = ct;
                            moved = true;
                            break;
                        }
                    }
                    a *= 0.5;
                }
                if !moved {
                    break;
                }
            }
            let gap = n_con / (tau * t.abs().max(f64::MIN_POSITIVE));
            if gap <= gap_tol || !ok {
                return (q, t, gap, ok);
            }
            tau *= BARRIER_GROWTH;
        }
        let gap = n_con / (tau * t.abs().max(f64::MIN_POSITIVE));
        (q, t, gap, ok)
    }
}

fn extent(ers: &[Point], h: f64) -> (Point, f64) {
    let bbox = crate::geometry::BoundingBox::of_points(ers).unwrap();
    let center = Point::new(0.5 * (bbox.x_min + bbox.x_max), 0.5 * (bbox.y_min + bbox.y_max));
    (center, bbox.diagonal().max(h))
}

/// Maximizes the minimum surrogate energy subject to the step limit,
/// starting from the feasible `warm`.
///
/// Solved by a log-barrier interior-point method in normalized units; the
/// Newton systems are block-tridiagonal plus a rank-K term and cost
/// `O(N·K²)` each. The warm start is shrunk slightly about its mean to make
/// it strictly feasible. If the result does not beat `warm` on the exact
/// surrogate minimum, `warm` is returned.
pub fn solve_subproblem(
    scn: &Scenario,
    sur: &SurrogateModel,
    warm: &DiscreteTrajectory,
) -> SubproblemSolution {
    let r = scn.max_speed() * warm.slot_duration;
    let tied = r == 0.0;
    let warm_min = sur.min_energy(&warm.points);
    let keep_warm = |kkt_residual: f64, stalled: bool| SubproblemSolution {
        iterate: warm.clone(),
        surrogate_min: warm_min,
        warm_surrogate_min: warm_min,
        kkt_residual,
        stalled,
    };
    if !(warm_min > 0.0 && warm_min.is_finite()) {
        return keep_warm(f64::INFINITY, true);
    }

    let (o, len) = extent(&sur.ers, sur.h2.sqrt());
    let scale_e = warm_min;
    let to_q = |p: Point| [(p.x - o.x) / len, (p.y - o.y) / len];
    let kk = sur.ers.len();
    let n = warm.points.len();
    let coef = |k: usize, slot: usize| {
        let (a, b) = sur.coefficients(k, slot);
        ((a - b * sur.h2) / scale_e, b * len * len / scale_e)
    };
    let (c, beta, q0) = if tied {
        let mut c = vec![vec![0.0]; kk];
        let mut beta = vec![vec![0.0]; kk];
        for k in 0..kk {
            for slot in 0..n {
                let (ck, bk) = coef(k, slot);
                c[k][0] += ck;
                beta[k][0] += bk;
            }
        }
        (c, beta, vec![to_q(warm.points[0])])
    } else {
        let mut c = vec![vec![0.0; n]; kk];
        let mut beta = vec![vec![0.0; n]; kk];
        for k in 0..kk {
            for slot in 0..n {
                (c[k][slot], beta[k][slot]) = coef(k, slot);
            }
        }
        let mean = warm.points.iter().fold(Point::ORIGIN, |a, &p| a + p) * (1.0 / n as f64);
        let q0 = warm
            .points
            .iter()
            .map(|&p| to_q(mean + (p - mean) * (1.0 - SHRINK)))
            .collect();
        (c, beta, q0)
    };
    let bar = Barrier {
        e: sur.ers.iter().map(|&e| to_q(e)).collect(),
        c,
        beta,
        r2: (r / len).powi(2),
    };
    let g0 = bar.g(&q0, 0.0);
    let t0 = g0.iter().copied().fold(f64::INFINITY, f64::min);
    let t0 = t0 - 0.1 * t0.abs().max(1e-3);
    if bar.h(&q0).iter().any(|&x| !(x > 0.0)) {
        return keep_warm(f64::INFINITY, true);
    }
    let (q, _, gap, ok) = bar.solve(q0, t0, 0.1 * KKT_TOL);

    let from_q = |v: V2| Point::new(o.x + len * v[0], o.y + len * v[1]);
    let mut points: Vec<Point> = if tied {
        vec![from_q(q[0]); n]
    } else {
        q.into_iter().map(from_q).collect()
    };
    // rounding in the unscaling may leave a leg a few ulps too long
    for i in 1..points.len() {
        let d = points[i].dist(points[i - 1]);
        if d > r {
            points[i] = points[i - 1] + (points[i] - points[i - 1]) * (r / d);
        }
    }
    let m = sur.min_energy(&points);
    if !(m > warm_min) {
        return keep_warm(gap, !ok);
    }
    SubproblemSolution {
        iterate: DiscreteTrajectory {
            points,
            slot_duration: warm.slot_duration,
        },
        surrogate_min: m,
        warm_surrogate_min: warm_min,
        kkt_residual: gap,
        stalled: false,
    }
}

/// One accepted outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScpStep {
    /// True objective before the step (equals the surrogate there).
    pub previous: f64,
    /// Surrogate objective after the step.
    pub surrogate: f64,
    /// True objective after the step.
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScpState {
    pub iterate: DiscreteTrajectory,
    /// True max-min energy of `iterate`, joules.
    pub objective: f64,
    pub iteration: usize,
    /// Objective after every accepted iteration, starting with the initial one.
    pub history: Vec<f64>,
    pub steps: Vec<ScpStep>,
    /// Stopped on the relative-gain test rather than the iteration cap.
    pub converged: bool,
}

fn true_min(scn: &Scenario, dt: &DiscreteTrajectory) -> f64 {
    discrete_energies(scn, dt)
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

pub fn scp_optimize(
    scn: &Scenario,
    init: &DiscreteTrajectory,
    max_iters: usize,
    rel_tol: f64,
) -> Result<ScpState> {
    init.validate(scn)?;
    if !(rel_tol >= 0.0) {
        return Err(Error::domain(format!("rel_tol must be >= 0, got {rel_tol}")));
    }
    let mut cur = init.clone();
    let mut obj = true_min(scn, &cur);
    let mut history = vec![obj];
    let mut steps = Vec::new();
    let mut converged = false;
    let mut iteration = 0;
    while iteration < max_iters {
        let sur = build_surrogate(scn, &cur);
        let sub = solve_subproblem(scn, &sur, &cur);
        let new_obj = true_min(scn, &sub.iterate);
        if new_obj < obj || sub.iterate.validate(scn).is_err() {
            converged = true;
            break;
        }
        iteration += 1;
        steps.push(ScpStep {
            previous: obj,
            surrogate: sub.surrogate_min,
            objective: new_obj,
        });
        let gain = (new_obj - obj) / obj.abs().max(f64::MIN_POSITIVE);
        cur = sub.iterate;
        obj = new_obj;
        history.push(obj);
        if gain < rel_tol {
            converged = true;
            break;
        }
    }
    Ok(ScpState {
        iterate: cur,
        objective: obj,
        iteration,
        history,
        steps,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::Segment;

    #[test]
    fn default_slot_rule() {
        let scn = Scenario::two_er(10.0, 5.0, 10.0).unwrap();
        assert_eq!(default_slots(&scn), 100);
        let scn = Scenario::two_er(10.0, 5.0, 100.0).unwrap();
        assert_eq!(default_slots(&scn), 800);
    }

    #[test]
    fn discretize_straight_leg() {
        let traj = Trajectory::new(vec![Segment::fly(Point::ORIGIN, Point::new(10.0, 0.0), 2.0)]);
        let dt = discretize(&traj, 5).unwrap();
        assert_eq!(dt.slot_duration, 1.0);
        for (n, p) in dt.points.iter().enumerate() {
            assert!((p.x - (1.0 + 2.0 * n as f64)).abs() < 1e-12);
        }
    }

    #[test]
    fn surrogate_tight_at_expansion() {
        let scn = Scenario::two_er(10.0, 5.0, 4.0).unwrap();
        let dt = DiscreteTrajectory::new(vec![Point::new(1.0, 1.0), Point::new(2.0, 1.0)], 2.0).unwrap();
        let sur = build_surrogate(&scn, &dt);
        for k in 0..2 {
            for (n, &p) in dt.points.iter().enumerate() {
                let exact = 2.0 * scn.power(p, k);
                assert!((sur.value(k, n, p) - exact).abs() < 1e-18);
            }
        }
    }

    #[test]
    fn zero_speed_keeps_points_tied() {
        let scn = Scenario::two_er(10.0, 0.0, 4.0).unwrap();
        let warm = DiscreteTrajectory::new(vec![Point::new(3.0, 1.0); 4], 1.0).unwrap();
        let sur = build_surrogate(&scn, &warm);
        let sol = solve_subproblem(&scn, &sur, &warm);
        let p0 = sol.iterate.points[0];
        assert!(sol.iterate.points.iter().all(|&p| p == p0));
        assert!(sol.surrogate_min >= sol.warm_surrogate_min);
        assert!(p0.x.abs() < 1.0);
    }

    #[test]
    fn single_receiver_moves_overhead() {
        let scn = Scenario::with_defaults(vec![Point::ORIGIN], 1.0, 10.0).unwrap();
        let warm = DiscreteTrajectory::new(vec![Point::new(3.0, 0.0); 10], 1.0).unwrap();
        let st = scp_optimize(&scn, &warm, 50, 1e-9).unwrap();
        assert!(st.history.windows(2).all(|w| w[1] >= w[0]));
        assert!(st.iterate.points.last().unwrap().norm() < 1e-3);
    }

    #[test]
    fn infeasible_init_rejected() {
        let scn = Scenario::two_er(10.0, 1.0, 2.0).unwrap();
        let init = DiscreteTrajectory::new(vec![Point::ORIGIN, Point::new(5.0, 0.0)], 1.0).unwrap();
        assert!(matches!(scp_optimize(&scn, &init, 5, 1e-6), Err(Error::Validation(_))));
    }
}
