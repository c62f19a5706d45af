//! Max-min fair energy transfer without a speed limit.
//!
//! The problem `max_traj min_k E_k` is solved through its Lagrange dual
//! `min_{λ ∈ simplex} f(λ)`, `f(λ) = T · max_{x,y} Σ_k λ_k Q_k(x, y)`.
//! The dual is minimized with the ellipsoid method; the primal solution
//! time-shares between the maximizers of the weighted power at the optimal
//! weights, with durations from a small linear program.

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::lp::{self, Constraint, Relation};
use crate::model::Scenario;
use crate::par::Exec;
use crate::search::{self, default_grid_step, Maximizer, PowerGrid, WeightedPower, TIE_TOL_W};
use crate::trajectory::{energy_along_unchecked, EnergyReport, Segment, Trajectory};

/// Tolerance on the simplex constraints of a weight vector.
pub const SIMPLEX_TOL: f64 = 1e-9;
/// Default relative accuracy of the dual objective.
pub const DEFAULT_TOL: f64 = 1e-5;
/// Relative primal/dual gap the recovered solution must reach.
pub const DUALITY_GAP_TOL: f64 = 1e-4;
/// Maximizers within this relative distance of the best are offered to the
/// time-sharing LP.
pub const ADMISSION_REL: f64 = 1e-6;

const MAX_STARTS: usize = 64;
const MAX_REFINE_ROUNDS: usize = 60;

/// State of the ellipsoid method over the weight simplex.
///
/// The ellipsoid lives in the reduced coordinates `λ_1..λ_{K−1}` with
/// `λ_K = 1 − Σ_{k<K} λ_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    /// Best weights found (full K-vector on the simplex).
    pub lambda: Vec<f64>,
    pub ellipsoid_center: Vec<f64>,
    pub ellipsoid_shape: Vec<Vec<f64>>,
    pub iteration: usize,
    /// Dual objective at `lambda`, joules.
    pub dual_value: f64,
    /// Certified lower bound on the dual optimum, joules.
    pub lower_bound: f64,
    /// False when the iteration cap was hit before the tolerance.
    pub converged: bool,
}

/// Time-shared hovering locations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoverSet {
    pub locations: Vec<Point>,
    /// `powers[γ][k] = Q_k(location γ)`.
    pub powers: Vec<Vec<f64>>,
    /// Hover duration at each location, seconds.
    pub durations: Vec<f64>,
    /// Max-min energy achieved, joules.
    pub min_energy: f64,
}

impl HoverSet {
    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdealMinMaxSolution {
    pub hover_set: HoverSet,
    /// Consecutive hovers; jumps between locations take zero time.
    pub trajectory: Trajectory,
    pub report: EnergyReport,
    pub dual: DualState,
    /// Multipliers of the final time-sharing LP; receivers with positive
    /// weight collect exactly the max-min energy.
    pub lambda_star: Vec<f64>,
    /// Weights certifying `upper_bound_certificate` (LP-refined).
    pub certificate_lambda: Vec<f64>,
    /// Smallest dual objective found; an upper bound on the optimum.
    pub upper_bound_certificate: f64,
    /// `(upper bound − min energy) / upper bound`.
    pub relative_gap: f64,
    /// Set when more hovering locations than receivers were needed.
    pub gamma_exceeds_k: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct P3Options {
    /// Relative accuracy of the ellipsoid phase.
    pub tol: f64,
    /// `None` picks [`default_grid_step`].
    pub grid_step: Option<f64>,
    /// `None` uses `⌈2K² ln(1/tol)⌉`.
    pub max_iter: Option<usize>,
    pub exec: Exec,
}

impl Default for P3Options {
    fn default() -> Self {
        P3Options {
            tol: DEFAULT_TOL,
            grid_step: None,
            max_iter: None,
            exec: Exec::default(),
        }
    }
}

fn check_simplex(lambda: &[f64], k: usize) -> Result<Vec<f64>> {
    if lambda.len() != k {
        return Err(Error::domain(format!(
            "weight vector has {} entries, expected {k}",
            lambda.len()
        )));
    }
    let sum: f64 = lambda.iter().sum();
    if lambda.iter().any(|&l| !(l >= -SIMPLEX_TOL)) || (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::domain(format!(
            "weights must lie on the simplex (sum = {sum})"
        )));
    }
    let clipped: Vec<f64> = lambda.iter().map(|l| l.max(0.0)).collect();
    let s: f64 = clipped.iter().sum();
    Ok(clipped.into_iter().map(|l| l / s).collect())
}

/// Evaluates the dual function on a cached grid of per-receiver powers.
pub struct DualOracle<'a> {
    scn: &'a Scenario,
    grid: PowerGrid,
    step: f64,
}

impl<'a> DualOracle<'a> {
    pub fn new(scn: &'a Scenario, grid_step: f64, exec: Exec) -> Result<Self> {
        if !(grid_step.is_finite() && grid_step > 0.0) {
            return Err(Error::domain(format!("grid step must be > 0, got {grid_step}")));
        }
        Ok(DualOracle {
            scn,
            grid: PowerGrid::new(scn, grid_step, exec),
            step: grid_step,
        })
    }

    pub fn with_default_grid(scn: &'a Scenario, exec: Exec) -> Result<Self> {
        DualOracle::new(scn, default_grid_step(&scn.bounding_box()), exec)
    }

    pub fn grid_step(&self) -> f64 {
        self.step
    }

    /// Polished maximizers of `Σ λ_k Q_k` whose value is within
    /// `rel_window` of the best, best first, merged within two grid steps.
    pub fn maximizers(&self, lambda: &[f64], rel_window: f64) -> Vec<Maximizer> {
        let bbox = self.scn.bounding_box();
        let obj = WeightedPower::new(self.scn, lambda.to_vec());
        if bbox.diagonal() == 0.0 {
            let p = self.scn.ers()[0];
            return vec![Maximizer {
                point: p,
                value: obj.value(p),
                grad_norm: 0.0,
            }];
        }
        let values = self.grid.weighted(lambda);
        let found = search::polish_candidates(
            &obj,
            self.grid.grid(),
            &values,
            &bbox,
            MAX_STARTS,
            2.0 * self.step,
        );
        let best = found[0].value;
        found
            .into_iter()
            .filter(|m| m.value >= best / (1.0 + rel_window) || best - m.value <= TIE_TOL_W)
            .collect()
    }

    /// `f(λ)` and the subgradient `s₀ = T·[Q_1, …, Q_K]` at the first
    /// maximizer, plus the maximizers themselves.
    pub fn evaluate(&self, lambda: &[f64]) -> (f64, Vec<f64>, Vec<Maximizer>) {
        let t = self.scn.horizon();
        let maxes = self.maximizers(lambda, ADMISSION_REL);
        let best = maxes[0];
        let sub = self.scn.powers(best.point).into_iter().map(|q| t * q).collect();
        (t * best.value, sub, maxes)
    }
}

/// All maximizers of the weighted power `Σ λ_k Q_k` within `1e-12 W` of
/// the maximum, searched over the receivers' bounding box.
pub fn weighted_power_argmax(scn: &Scenario, lambda: &[f64], grid_step: f64) -> Result<Vec<Point>> {
    let lambda = check_simplex(lambda, scn.num_ers())?;
    let oracle = DualOracle::new(scn, grid_step, Exec::default())?;
    let maxes = oracle.maximizers(&lambda, 0.0);
    let best = maxes[0].value;
    let mut pts: Vec<Point> = maxes
        .into_iter()
        .filter(|m| best - m.value <= TIE_TOL_W)
        .map(|m| m.point)
        .collect();
    pts.sort_by(Point::lex_cmp);
    Ok(pts)
}

/// Dual objective `f(λ)` in joules and a subgradient, using the default grid.
pub fn dual_value_and_subgradient(scn: &Scenario, lambda: &[f64]) -> Result<(f64, Vec<f64>)> {
    let lambda = check_simplex(lambda, scn.num_ers())?;
    let oracle = DualOracle::with_default_grid(scn, Exec::default())?;
    let (f, s, _) = oracle.evaluate(&lambda);
    Ok((f, s))
}

fn full_lambda(reduced: &[f64]) -> Vec<f64> {
    let mut l = reduced.to_vec();
    l.push(1.0 - reduced.iter().sum::<f64>());
    l
}

fn mat_vec(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

/// Record of every dual evaluation made by the ellipsoid method.
struct Visit {
    value: f64,
    maximizers: Vec<Maximizer>,
}

fn run_ellipsoid(oracle: &DualOracle<'_>, k: usize, tol: f64, max_iter: usize) -> (DualState, Vec<Visit>) {
    let n = k - 1;
    let mut center = vec![1.0 / k as f64; n];
    let mut shape: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { k as f64 } else { 0.0 }).collect())
        .collect();
    let mut best_lambda = vec![1.0 / k as f64; k];
    let mut best_value = f64::INFINITY;
    let mut lower = f64::NEG_INFINITY;
    let mut visits = Vec::new();
    let mut converged = false;
    let mut iteration = 0;

    while iteration < max_iter {
        iteration += 1;
        let lambda = full_lambda(&center);
        // Feasibility cut on the most violated constraint, otherwise an
        // objective cut in reduced coordinates.
        let (worst, viol) = lambda
            .iter()
            .enumerate()
            .map(|(i, &l)| (i, -l))
            .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        let g: Vec<f64> = if viol > 0.0 {
            if worst < n {
                (0..n).map(|j| if j == worst { -1.0 } else { 0.0 }).collect()
            } else {
                // λ_K < 0  ⇔  Σ reduced > 1
                vec![1.0; n]
            }
        } else {
            let (f, s, maxes) = oracle.evaluate(&lambda);
            let g: Vec<f64> = (0..n).map(|i| s[i] - s[n]).collect();
            let ag = mat_vec(&shape, &g);
            let spread = g.iter().zip(&ag).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt();
            lower = lower.max(f - spread);
            if f < best_value {
                best_value = f;
                best_lambda = lambda.clone();
            }
            visits.push(Visit {
                value: f,
                maximizers: maxes,
            });
            if best_value - lower.min(best_value) <= tol * best_value.abs() || spread == 0.0 {
                converged = true;
                break;
            }
            g
        };

        let ag = mat_vec(&shape, &g);
        let gag = g.iter().zip(&ag).map(|(a, b)| a * b).sum::<f64>();
        if !(gag > 0.0) {
            converged = true;
            break;
        }
        let denom = gag.sqrt();
        let dir: Vec<f64> = ag.iter().map(|v| v / denom).collect();
        if n == 1 {
            center[0] -= 0.5 * dir[0];
            shape[0][0] *= 0.25;
        } else {
            let nf = n as f64;
            for i in 0..n {
                center[i] -= dir[i] / (nf + 1.0);
            }
            let factor = nf * nf / (nf * nf - 1.0);
            for i in 0..n {
                for j in 0..n {
                    shape[i][j] = factor * (shape[i][j] - 2.0 / (nf + 1.0) * dir[i] * dir[j]);
                }
            }
            for i in 0..n {
                for j in 0..i {
                    let s = 0.5 * (shape[i][j] + shape[j][i]);
                    shape[i][j] = s;
                    shape[j][i] = s;
                }
            }
        }
    }
    if !converged {
        warn!("ellipsoid method stopped at the iteration cap ({max_iter}) before reaching tol {tol}");
    }
    (
        DualState {
            lambda: best_lambda,
            ellipsoid_center: center,
            ellipsoid_shape: shape,
            iteration,
            dual_value: best_value,
            lower_bound: lower.min(best_value),
            converged,
        },
        visits,
    )
}

fn default_max_iter(k: usize, tol: f64) -> usize {
    (2.0 * (k * k) as f64 * (1.0 / tol).ln()).ceil().max(1.0) as usize
}

/// Minimizes the dual function over the simplex with the ellipsoid method.
pub fn solve_dual_ellipsoid(scn: &Scenario, tol: f64) -> Result<DualState> {
    let opts = P3Options {
        tol,
        ..Default::default()
    };
    solve_dual_ellipsoid_with(scn, &opts)
}

pub fn solve_dual_ellipsoid_with(scn: &Scenario, opts: &P3Options) -> Result<DualState> {
    let k = scn.num_ers();
    if k < 2 {
        return Err(Error::domain("the max-min problem needs at least two receivers"));
    }
    if !(opts.tol > 0.0 && opts.tol < 1.0) {
        return Err(Error::domain(format!("tol must be in (0, 1), got {}", opts.tol)));
    }
    let step = opts.grid_step.unwrap_or_else(|| default_grid_step(&scn.bounding_box()));
    let oracle = DualOracle::new(scn, step, opts.exec)?;
    let max_iter = opts.max_iter.unwrap_or_else(|| default_max_iter(k, opts.tol));
    Ok(run_ellipsoid(&oracle, k, opts.tol, max_iter).0)
}

/// Result of the time-sharing linear program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSharing {
    pub durations: Vec<f64>,
    /// Max-min energy, joules.
    pub energy: f64,
    /// Optimal multipliers of the per-receiver energy constraints; they
    /// lie on the simplex.
    pub duals: Vec<f64>,
}

/// `max E s.t. Σ_γ τ_γ Q[γ][k] + base_k ≥ E ∀k, Σ_γ τ_γ = budget, τ ≥ 0`.
pub fn time_sharing_lp(powers: &[Vec<f64>], budget: f64, base_energy: &[f64]) -> Result<TimeSharing> {
    let gamma = powers.len();
    let k = base_energy.len();
    if !(budget >= 0.0 && budget.is_finite()) {
        return Err(Error::domain(format!("time budget must be >= 0, got {budget}")));
    }
    if gamma == 0 || k == 0 {
        return Err(Error::domain("time sharing needs at least one location and receiver"));
    }
    if powers.iter().any(|row| row.len() != k || row.iter().any(|q| !(*q >= 0.0))) {
        return Err(Error::domain("power matrix must be Γ×K and nonnegative"));
    }
    if base_energy.iter().any(|b| !b.is_finite()) {
        return Err(Error::domain("base energies must be finite"));
    }

    if budget == 0.0 {
        let (argmin, &emin) = base_energy
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        let mut duals = vec![0.0; k];
        duals[argmin] = 1.0;
        return Ok(TimeSharing {
            durations: vec![0.0; gamma],
            energy: emin,
            duals,
        });
    }

    // Work in fractions of the budget and units of the largest power so the
    // tableau entries are O(1).
    let qmax = powers
        .iter()
        .flatten()
        .copied()
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let unit = budget * qmax;
    // Variables: f_1..f_Γ (fractions), e (scaled energy, e ≥ 0 after shift).
    // E can be negative only if some base is; shift by the smallest base.
    let shift = base_energy.iter().copied().fold(f64::INFINITY, f64::min).min(0.0) / unit;
    let mut cons = Vec::with_capacity(k + 1);
    for kk in 0..k {
        let mut row: Vec<f64> = powers.iter().map(|r| -r[kk] / qmax).collect();
        row.push(1.0);
        cons.push(Constraint::new(row, Relation::Le, base_energy[kk] / unit - shift));
    }
    let mut row = vec![1.0; gamma];
    row.push(0.0);
    cons.push(Constraint::new(row, Relation::Eq, 1.0));
    let mut c = vec![0.0; gamma];
    c.push(1.0);
    let sol = lp::maximize(&c, &cons)?;

    let durations = sol.x[..gamma].iter().map(|f| f * budget).collect();
    let energy = (sol.x[gamma] + shift) * unit;
    let mut duals: Vec<f64> = sol.duals[..k].iter().map(|d| d.max(0.0)).collect();
    let s: f64 = duals.iter().sum();
    if s > 0.0 {
        duals.iter_mut().for_each(|d| *d /= s);
    }
    Ok(TimeSharing {
        durations,
        energy,
        duals,
    })
}

/// Solves the speed-unconstrained max-min problem with default options.
pub fn solve_p3(scn: &Scenario) -> Result<IdealMinMaxSolution> {
    solve_p3_with(scn, &P3Options::default())
}

pub fn solve_p3_with(scn: &Scenario, opts: &P3Options) -> Result<IdealMinMaxSolution> {
    let k = scn.num_ers();
    if k < 2 {
        return Err(Error::domain("the max-min problem needs at least two receivers"));
    }
    if !(opts.tol > 0.0 && opts.tol < 1.0) {
        return Err(Error::domain(format!("tol must be in (0, 1), got {}", opts.tol)));
    }
    let step = opts.grid_step.unwrap_or_else(|| default_grid_step(&scn.bounding_box()));
    let oracle = DualOracle::new(scn, step, opts.exec)?;
    let max_iter = opts.max_iter.unwrap_or_else(|| default_max_iter(k, opts.tol));
    let (dual, visits) = run_ellipsoid(&oracle, k, opts.tol, max_iter);
    debug!(
        "ellipsoid: {} iterations, f = {:.6e}, lower bound = {:.6e}",
        dual.iteration, dual.dual_value, dual.lower_bound
    );

    // Candidate locations: the maximizers at the best weights plus those of
    // every visited point whose dual value is close to the best.
    let merge = 0.5 * step;
    let mut pool: Vec<Point> = Vec::new();
    let add = |pool: &mut Vec<Point>, p: Point| -> bool {
        if pool.iter().all(|q| q.dist(p) >= merge) {
            pool.push(p);
            true
        } else {
            false
        }
    };
    let (_, _, at_best) = oracle.evaluate(&dual.lambda);
    for m in &at_best {
        add(&mut pool, m.point);
    }
    let near = dual.dual_value * (1.0 + 1e-2);
    for v in visits.iter().filter(|v| v.value <= near) {
        for m in &v.maximizers {
            add(&mut pool, m.point);
        }
    }

    // Column generation: the LP duals are simplex weights; their maximizers
    // either certify optimality or enter the pool.
    let mut upper = dual.dual_value;
    let mut cert_lambda = dual.lambda.clone();
    let zero = vec![0.0; k];
    let mut ts;
    let mut rounds = 0;
    loop {
        let powers: Vec<Vec<f64>> = pool.iter().map(|&p| scn.powers(p)).collect();
        ts = time_sharing_lp(&powers, scn.horizon(), &zero)?;
        rounds += 1;
        let (f, _, maxes) = oracle.evaluate(&ts.duals);
        if f < upper {
            upper = f;
            cert_lambda = ts.duals.clone();
        }
        let gap = (upper - ts.energy) / upper;
        if gap <= 0.1 * DUALITY_GAP_TOL || rounds >= MAX_REFINE_ROUNDS {
            break;
        }
        let mut grew = false;
        for m in &maxes {
            grew |= add(&mut pool, m.point);
        }
        if !grew {
            break;
        }
    }

    let mut chosen: Vec<(Point, f64)> = pool
        .iter()
        .zip(&ts.durations)
        .filter(|(_, &d)| d > 0.0)
        .map(|(&p, &d)| (p, d))
        .collect();
    chosen.sort_by(|a, b| a.0.lex_cmp(&b.0));
    let locations: Vec<Point> = chosen.iter().map(|c| c.0).collect();
    let durations: Vec<f64> = chosen.iter().map(|c| c.1).collect();
    let powers: Vec<Vec<f64>> = locations.iter().map(|&p| scn.powers(p)).collect();

    let relative_gap = (upper - ts.energy) / upper;
    if relative_gap > DUALITY_GAP_TOL {
        warn!("max-min duality gap {relative_gap:.3e} exceeds {DUALITY_GAP_TOL:.0e}");
    }
    let gamma_exceeds_k = locations.len() > k;
    if gamma_exceeds_k {
        warn!("{} hovering locations for {k} receivers", locations.len());
    }

    let trajectory = Trajectory {
        segments: locations
            .iter()
            .zip(&durations)
            .map(|(&p, &d)| Segment::hover(p, d))
            .collect(),
        ideal: locations.len() > 1,
    };
    let report = energy_along_unchecked(scn, &trajectory);
    Ok(IdealMinMaxSolution {
        hover_set: HoverSet {
            locations,
            powers,
            durations,
            min_energy: ts.energy,
        },
        trajectory,
        report,
        dual,
        lambda_star: ts.duals,
        certificate_lambda: cert_lambda,
        upper_bound_certificate: upper,
        relative_gap,
        gamma_exceeds_k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_weight_maximizer_is_overhead() {
        let scn = Scenario::with_defaults(
            vec![Point::new(0.0, 0.0), Point::new(8.0, 3.0), Point::new(2.0, 9.0)],
            5.0,
            10.0,
        )
        .unwrap();
        let pts = weighted_power_argmax(&scn, &[0.0, 1.0, 0.0], 0.1).unwrap();
        assert_eq!(pts.len(), 1);
        assert!(pts[0].dist(Point::new(8.0, 3.0)) < 1e-8);
    }

    #[test]
    fn off_simplex_weights_rejected() {
        let scn = Scenario::two_er(10.0, 5.0, 10.0).unwrap();
        assert!(matches!(
            weighted_power_argmax(&scn, &[0.7, 0.7], 0.1),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            dual_value_and_subgradient(&scn, &[1.2, -0.2]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn single_receiver_dual_is_constant() {
        let scn = Scenario::with_defaults(vec![Point::new(1.0, 1.0)], 5.0, 10.0).unwrap();
        let (f, s) = dual_value_and_subgradient(&scn, &[1.0]).unwrap();
        let peak = 10.0 * scn.beta0_p() / 25.0;
        assert!((f - peak).abs() < 1e-15);
        assert!((s[0] - peak).abs() < 1e-15);
    }

    #[test]
    fn time_sharing_single_location() {
        let ts = time_sharing_lp(&[vec![2.0, 3.0]], 4.0, &[1.0, 0.0]).unwrap();
        assert_eq!(ts.durations, vec![4.0]);
        assert!((ts.energy - 9.0).abs() < 1e-12);
    }

    #[test]
    fn time_sharing_symmetric_pair_splits_evenly() {
        let (qa, qb) = (3e-4, 1e-4);
        let ts = time_sharing_lp(&[vec![qa, qb], vec![qb, qa]], 10.0, &[0.0, 0.0]).unwrap();
        assert!((ts.durations[0] - 5.0).abs() < 1e-12);
        assert!((ts.durations[1] - 5.0).abs() < 1e-12);
        assert!((ts.energy - 10.0 * (qa + qb) / 2.0).abs() < 1e-15);
        assert!((ts.duals[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn time_sharing_zero_budget_and_errors() {
        let ts = time_sharing_lp(&[vec![1.0, 1.0]], 0.0, &[2.0, 1.0]).unwrap();
        assert_eq!(ts.energy, 1.0);
        assert!(time_sharing_lp(&[vec![1.0, 1.0]], -1.0, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn p3_needs_two_receivers() {
        let scn = Scenario::with_defaults(vec![Point::ORIGIN], 5.0, 10.0).unwrap();
        assert!(matches!(solve_p3(&scn), Err(Error::Domain(_))));
    }
}
