//! Speed-limited max-min trajectories built from hovering locations.
//!
//! The UAV visits the hovering locations along the shortest open path at
//! full speed and splits the remaining time between them with the
//! time-sharing LP, counting the energy already collected in flight. When
//! the horizon is shorter than the flight, the path is shrunk towards the
//! best single hovering point.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::minmax::{time_sharing_lp, HoverSet};
use crate::model::Scenario;
use crate::sum_energy::{two_er_threshold, two_er_xi};
use crate::trajectory::{energy_along_unchecked, leg_energy, EnergyReport, Segment, Trajectory};
use crate::tsp::{plan_open_path_seeded, DEFAULT_SEED};

/// Hovers shorter than this are left out of assembled trajectories.
pub const MIN_HOVER_S: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Every location is visited; remaining time goes to hovering.
    Full,
    /// The horizon is too short to visit every location; the path is
    /// shrunk towards the fixed point.
    Scaled,
    /// A single hover (fallback when the UAV cannot move).
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub xy: Point,
    /// `min_k Q_k(xy)`, watts.
    pub min_power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoverFlySolution {
    pub trajectory: Trajectory,
    /// Hovering locations in visiting order.
    pub locations: Vec<Point>,
    /// Hover time at each location of `locations`, seconds (may be zero).
    pub durations: Vec<f64>,
    /// Energy each receiver collects while flying, joules.
    pub fly_energy: Vec<f64>,
    /// Max-min energy of the trajectory, joules.
    pub min_energy: f64,
    pub regime: Regime,
    pub report: EnergyReport,
    /// Minimum flying time through all locations, seconds.
    pub t_fly: f64,
    /// Shrink factor `T / T_fly` in the scaled regime.
    pub kappa: Option<f64>,
    pub fixed_point: Option<FixedPoint>,
    /// Set when a fallback was taken.
    pub flagged: bool,
}

/// Smallest circle enclosing `points`: `(center, radius)`.
pub fn min_enclosing_circle(points: &[Point]) -> (Point, f64) {
    assert!(!points.is_empty());
    let outside = |c: Point, r: f64, p: Point| c.dist(p) > r * (1.0 + 1e-12) + 1e-12;
    let mut c = points[0];
    let mut r = 0.0;
    for i in 1..points.len() {
        if !outside(c, r, points[i]) {
            continue;
        }
        c = points[i];
        r = 0.0;
        for j in 0..i {
            if !outside(c, r, points[j]) {
                continue;
            }
            c = points[i].lerp(points[j], 0.5);
            r = c.dist(points[i]);
            for k in 0..j {
                if !outside(c, r, points[k]) {
                    continue;
                }
                (c, r) = circle_through(points[i], points[j], points[k]);
            }
        }
    }
    (c, r)
}

fn circle_through(a: Point, b: Point, c: Point) -> (Point, f64) {
    let (bx, by) = (b.x - a.x, b.y - a.y);
    let (cx, cy) = (c.x - a.x, c.y - a.y);
    let d = 2.0 * (bx * cy - by * cx);
    if d.abs() < 1e-300 {
        // Collinear: the circle on the farthest pair.
        let pairs = [(a, b), (a, c), (b, c)];
        let (p, q) = pairs
            .into_iter()
            .max_by(|x, y| x.0.dist(x.1).total_cmp(&y.0.dist(y.1)))
            .unwrap();
        let m = p.lerp(q, 0.5);
        return (m, m.dist(p));
    }
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    let ux = (cy * b2 - by * c2) / d;
    let uy = (bx * c2 - cx * b2) / d;
    let center = Point::new(a.x + ux, a.y + uy);
    let r = [a, b, c].iter().map(|p| center.dist(*p)).fold(0.0, f64::max);
    (center, r)
}

/// The single hovering point maximizing `min_k Q_k`.
///
/// All receivers share the same path-loss law, so the weakest one is always
/// the farthest and the optimum is the center of the smallest circle
/// enclosing the receivers.
pub fn solve_fixed_point(scn: &Scenario) -> FixedPoint {
    let (c, _) = min_enclosing_circle(scn.ers());
    let xy = scn.bounding_box().clamp(c);
    FixedPoint {
        xy,
        min_power: scn.min_power(xy),
    }
}

/// Shrinks a full-speed path of duration `t_fly` into a horizon `t`.
///
/// Every vertex `p` maps to `κp + (1−κ)·fix` with `κ = t / t_fly` and every
/// segment lasts `κ` times as long, so flight speeds are unchanged and the
/// result is the exact image of the time-scaled original.
pub fn scale_trajectory(path: &Trajectory, fix: Point, t: f64, t_fly: f64) -> Result<Trajectory> {
    if !(t > 0.0 && t < t_fly) {
        return Err(Error::domain(format!(
            "scaling needs 0 < T < T_fly, got T = {t}, T_fly = {t_fly}"
        )));
    }
    let kappa = t / t_fly;
    let map = |p: Point| p * kappa + fix * (1.0 - kappa);
    let segments = path
        .segments
        .iter()
        .map(|seg| match *seg {
            Segment::Hover { xy, duration } => Segment::hover(map(xy), duration * kappa),
            Segment::Fly { from, to, speed } => Segment::fly(map(from), map(to), speed),
        })
        .collect();
    Ok(Trajectory {
        segments,
        ideal: path.ideal,
    })
}

pub fn build_hover_fly(scn: &Scenario, locations: &[Point]) -> Result<HoverFlySolution> {
    build_hover_fly_seeded(scn, locations, DEFAULT_SEED)
}

pub fn build_hover_fly_from_set(scn: &Scenario, set: &HoverSet) -> Result<HoverFlySolution> {
    build_hover_fly(scn, &set.locations)
}

/// Successive hover-and-fly through `locations`; `seed` reaches the path
/// planner's random restarts.
pub fn build_hover_fly_seeded(
    scn: &Scenario,
    locations: &[Point],
    seed: u64,
) -> Result<HoverFlySolution> {
    if locations.is_empty() {
        return Err(Error::domain("hover-and-fly needs at least one location"));
    }
    if locations.iter().any(|p| !p.is_finite()) {
        return Err(Error::domain("hovering locations must be finite"));
    }
    let t = scn.horizon();
    let v = scn.max_speed();
    let k = scn.num_ers();

    if locations.len() == 1 || v == 0.0 {
        let (xy, flagged) = if locations.len() == 1 {
            (locations[0], false)
        } else {
            warn!("zero speed with {} locations: hovering at the best one", locations.len());
            let best = locations
                .iter()
                .copied()
                .max_by(|a, b| scn.min_power(*a).total_cmp(&scn.min_power(*b)))
                .unwrap();
            (best, true)
        };
        let trajectory = Trajectory::hover(xy, t);
        let report = energy_along_unchecked(scn, &trajectory);
        return Ok(HoverFlySolution {
            trajectory,
            locations: vec![xy],
            durations: vec![t],
            fly_energy: vec![0.0; k],
            min_energy: report.min_energy,
            regime: if flagged { Regime::Fixed } else { Regime::Full },
            report,
            t_fly: 0.0,
            kappa: None,
            fixed_point: None,
            flagged,
        });
    }

    let plan = plan_open_path_seeded(locations, v, seed)?;
    let ordered: Vec<Point> = plan.order.iter().map(|&i| locations[i]).collect();
    let legs: Vec<Segment> = ordered
        .windows(2)
        .filter(|w| w[0] != w[1])
        .map(|w| Segment::fly(w[0], w[1], v))
        .collect();

    if t < plan.t_fly {
        let fix = solve_fixed_point(scn);
        let path = Trajectory::new(legs);
        let trajectory = scale_trajectory(&path, fix.xy, t, plan.t_fly)?;
        let report = energy_along_unchecked(scn, &trajectory);
        return Ok(HoverFlySolution {
            trajectory,
            durations: vec![0.0; ordered.len()],
            locations: ordered,
            fly_energy: report.per_er_energy.clone(),
            min_energy: report.min_energy,
            regime: Regime::Scaled,
            report,
            t_fly: plan.t_fly,
            kappa: Some(t / plan.t_fly),
            fixed_point: Some(fix),
            flagged: false,
        });
    }

    let fly_energy: Vec<f64> = (0..k)
        .map(|kk| legs.iter().map(|s| s.energy(scn, kk)).sum())
        .collect();
    let powers: Vec<Vec<f64>> = ordered.iter().map(|&p| scn.powers(p)).collect();
    let budget = (t - plan.t_fly).max(0.0);
    let ts = time_sharing_lp(&powers, budget, &fly_energy)?;

    let mut segments = Vec::with_capacity(2 * ordered.len());
    for (i, (&p, &tau)) in ordered.iter().zip(&ts.durations).enumerate() {
        if tau >= MIN_HOVER_S {
            segments.push(Segment::hover(p, tau));
        }
        if let Some(&next) = ordered.get(i + 1) {
            if next != p {
                segments.push(Segment::fly(p, next, v));
            }
        }
    }
    let trajectory = Trajectory::new(segments);
    let report = energy_along_unchecked(scn, &trajectory);
    Ok(HoverFlySolution {
        trajectory,
        locations: ordered,
        durations: ts.durations,
        fly_energy,
        min_energy: report.min_energy,
        regime: Regime::Full,
        report,
        t_fly: plan.t_fly,
        kappa: None,
        fixed_point: None,
        flagged: false,
    })
}

/// Energy of the receiver at `(−D/2, 0)`; the other one receives the same
/// by mirror symmetry of every two-receiver trajectory built here.
fn symmetric_report(scn: &Scenario, traj: &Trajectory, left: usize) -> EnergyReport {
    let e: f64 = traj.segments.iter().map(|s| s.energy(scn, left)).sum();
    EnergyReport::from_energies(vec![e, e], scn.horizon())
}

/// Optimal speed-limited trajectory for two receivers at `(∓D/2, 0)`.
pub fn two_er_trajectory(scn: &Scenario) -> Result<HoverFlySolution> {
    let ers = scn.ers();
    if ers.len() != 2 {
        return Err(Error::domain("two-receiver trajectory needs exactly two receivers"));
    }
    let (a, b) = (ers[0], ers[1]);
    let tol = 1e-12 * (1.0 + a.x.abs());
    if a.y.abs() > tol || b.y.abs() > tol || (a.x + b.x).abs() > tol {
        return Err(Error::domain(
            "receivers must sit at (-D/2, 0) and (D/2, 0)",
        ));
    }
    let left = if a.x <= b.x { 0 } else { 1 };
    let d = (a.x - b.x).abs();
    let (h, v, t) = (scn.altitude(), scn.max_speed(), scn.horizon());
    let k = 2;

    let single = |xy: Point, regime: Regime| {
        let trajectory = Trajectory::hover(xy, t);
        let report = symmetric_report(scn, &trajectory, left);
        HoverFlySolution {
            trajectory,
            locations: vec![xy],
            durations: vec![t],
            fly_energy: vec![0.0; k],
            min_energy: report.min_energy,
            regime,
            report,
            t_fly: 0.0,
            kappa: None,
            fixed_point: None,
            flagged: false,
        }
    };

    if d <= two_er_threshold(h) {
        return Ok(single(Point::ORIGIN, Regime::Full));
    }
    if v == 0.0 {
        return Ok(single(Point::ORIGIN, Regime::Fixed));
    }
    let xi = two_er_xi(d, h);
    let t_fly = 2.0 * xi / v;
    let fix = FixedPoint {
        xy: Point::ORIGIN,
        min_power: scn.min_power(Point::ORIGIN),
    };
    if t <= t_fly {
        let half = v * t / 2.0;
        let trajectory = Trajectory::new(vec![Segment::fly(
            Point::new(-half, 0.0),
            Point::new(half, 0.0),
            v,
        )]);
        let report = symmetric_report(scn, &trajectory, left);
        return Ok(HoverFlySolution {
            trajectory,
            locations: vec![Point::new(-xi, 0.0), Point::new(xi, 0.0)],
            durations: vec![0.0, 0.0],
            fly_energy: report.per_er_energy.clone(),
            min_energy: report.min_energy,
            regime: Regime::Scaled,
            report,
            t_fly,
            kappa: Some(t / t_fly),
            fixed_point: Some(fix),
            flagged: false,
        });
    }

    let hover = (t - t_fly) / 2.0;
    let (l, r) = (Point::new(-xi, 0.0), Point::new(xi, 0.0));
    let fly = Segment::fly(l, r, v);
    let fly_energy = vec![leg_energy(scn, l, r, v, left); 2];
    let trajectory = Trajectory::new(vec![
        Segment::hover(l, hover),
        fly,
        Segment::hover(r, hover),
    ])
    .simplified(MIN_HOVER_S);
    let report = symmetric_report(scn, &trajectory, left);
    Ok(HoverFlySolution {
        trajectory,
        locations: vec![l, r],
        durations: vec![hover, hover],
        fly_energy,
        min_energy: report.min_energy,
        regime: Regime::Full,
        report,
        t_fly,
        kappa: None,
        fixed_point: None,
        flagged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enclosing_circle_of_triangle_and_pair() {
        let (c, r) = min_enclosing_circle(&[Point::new(-1.0, 0.0), Point::new(1.0, 0.0)]);
        assert!(c.dist(Point::ORIGIN) < 1e-15 && (r - 1.0).abs() < 1e-15);
        // obtuse triangle: circle on the long side
        let (c, r) = min_enclosing_circle(&[
            Point::new(-2.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(0.0, 0.5),
        ]);
        assert!(c.dist(Point::ORIGIN) < 1e-12 && (r - 2.0).abs() < 1e-12);
        let s3 = 3f64.sqrt();
        let (c, r) = min_enclosing_circle(&[
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(1.0, s3),
        ]);
        assert!(c.dist(Point::new(1.0, s3 / 3.0)) < 1e-12);
        assert!((r - 2.0 / s3).abs() < 1e-12);
    }

    #[test]
    fn scaling_half_way() {
        let path = Trajectory::new(vec![Segment::fly(
            Point::new(-4.0, 0.0),
            Point::new(4.0, 0.0),
            2.0,
        )]);
        let out = scale_trajectory(&path, Point::new(0.0, 2.0), 2.0, 4.0).unwrap();
        assert_eq!(out.segments[0].start(), Point::new(-2.0, 1.0));
        assert_eq!(out.segments[0].end(), Point::new(2.0, 1.0));
        assert_eq!(out.duration(), 2.0);
        assert!(scale_trajectory(&path, Point::ORIGIN, 4.0, 4.0).is_err());
    }

    #[test]
    fn single_location_hovers_throughout() {
        let scn = Scenario::two_er(10.0, 5.0, 10.0).unwrap();
        let sol = build_hover_fly(&scn, &[Point::new(1.0, 0.0)]).unwrap();
        assert_eq!(sol.trajectory.segments.len(), 1);
        let want = 10.0 * scn.min_power(Point::new(1.0, 0.0));
        assert!((sol.min_energy - want).abs() < 1e-15);
    }

    #[test]
    fn zero_speed_falls_back_to_best_location() {
        let scn = Scenario::two_er(10.0, 0.0, 10.0).unwrap();
        let sol = build_hover_fly(&scn, &[Point::new(-4.0, 0.0), Point::new(0.5, 0.0)]).unwrap();
        assert!(sol.flagged);
        assert_eq!(sol.regime, Regime::Fixed);
        assert_eq!(sol.locations, vec![Point::new(0.5, 0.0)]);
    }

    #[test]
    fn two_er_cases() {
        let near = two_er_trajectory(&Scenario::two_er(4.0, 5.0, 10.0).unwrap()).unwrap();
        assert_eq!(near.trajectory, Trajectory::hover(Point::ORIGIN, 10.0));

        let sweep = two_er_trajectory(&Scenario::two_er(10.0, 5.0, 1.0).unwrap()).unwrap();
        assert_eq!(sweep.regime, Regime::Scaled);
        assert_eq!(sweep.trajectory.start(), Some(Point::new(-2.5, 0.0)));
        assert_eq!(sweep.trajectory.end(), Some(Point::new(2.5, 0.0)));

        let full = two_er_trajectory(&Scenario::two_er(10.0, 5.0, 10.0).unwrap()).unwrap();
        let xi = two_er_xi(10.0, 5.0);
        assert!((full.durations[0] - (10.0 - 2.0 * xi / 5.0) / 2.0).abs() < 1e-12);
        assert!((full.durations[0] - 4.09).abs() < 5e-3);
        assert_eq!(full.report.per_er_energy[0], full.report.per_er_energy[1]);
    }

    #[test]
    fn off_axis_receivers_rejected() {
        let scn = Scenario::with_defaults(
            vec![Point::new(-1.0, 0.0), Point::new(1.0, 0.5)],
            5.0,
            10.0,
        )
        .unwrap();
        assert!(two_er_trajectory(&scn).is_err());
    }
}
