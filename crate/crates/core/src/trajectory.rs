//! Continuous and discretized UAV trajectories, and the energy they deliver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::model::Scenario;
use crate::quadrature::adaptive_simpson;

/// Maximum gap between the end of one segment and the start of the next.
pub const CONTINUITY_TOL: f64 = 1e-9;
/// Agreement required between the closed-form leg integral and quadrature.
pub const INTEGRAL_REL_TOL: f64 = 1e-8;
/// Relative slack on speed and step-length limits.
pub const SPEED_REL_TOL: f64 = 1e-9;

/// Legs shorter than this are treated as a hover of the leg's duration.
const DEGENERATE_LEG: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segment {
    Hover {
        xy: Point,
        #[serde(rename = "dur_s")]
        duration: f64,
    },
    Fly {
        from: Point,
        to: Point,
        #[serde(rename = "speed_mps")]
        speed: f64,
    },
}

impl Segment {
    pub fn hover(xy: Point, duration: f64) -> Self {
        Segment::Hover { xy, duration }
    }

    pub fn fly(from: Point, to: Point, speed: f64) -> Self {
        Segment::Fly { from, to, speed }
    }

    pub fn duration(&self) -> f64 {
        match *self {
            Segment::Hover { duration, .. } => duration,
            Segment::Fly { from, to, speed } => {
                let len = from.dist(to);
                if len == 0.0 {
                    0.0
                } else {
                    len / speed
                }
            }
        }
    }

    pub fn start(&self) -> Point {
        match *self {
            Segment::Hover { xy, .. } => xy,
            Segment::Fly { from, .. } => from,
        }
    }

    pub fn end(&self) -> Point {
        match *self {
            Segment::Hover { xy, .. } => xy,
            Segment::Fly { to, .. } => to,
        }
    }

    pub fn length(&self) -> f64 {
        match *self {
            Segment::Hover { .. } => 0.0,
            Segment::Fly { from, to, .. } => from.dist(to),
        }
    }

    /// Position `t` seconds into the segment (clamped to its extent).
    pub fn position_at(&self, t: f64) -> Point {
        match *self {
            Segment::Hover { xy, .. } => xy,
            Segment::Fly { from, to, speed } => {
                let len = from.dist(to);
                if len == 0.0 {
                    return from;
                }
                from.lerp(to, (t * speed / len).clamp(0.0, 1.0))
            }
        }
    }

    /// Energy delivered to receiver `k` while flying this segment.
    pub fn energy(&self, scn: &Scenario, k: usize) -> f64 {
        match *self {
            Segment::Hover { xy, duration } => duration * scn.power(xy, k),
            Segment::Fly { from, to, speed } => leg_energy(scn, from, to, speed, k),
        }
    }
}

/// A piecewise hover/fly path at the scenario altitude.
///
/// `ideal` trajectories may jump between consecutive segments in zero time;
/// they describe the speed-unconstrained multi-location hovering solutions.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub segments: Vec<Segment>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub ideal: bool,
}

impl Trajectory {
    pub fn new(segments: Vec<Segment>) -> Self {
        Trajectory {
            segments,
            ideal: false,
        }
    }

    pub fn hover(xy: Point, duration: f64) -> Self {
        Trajectory::new(vec![Segment::hover(xy, duration)])
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(Segment::duration).sum()
    }

    /// Total flown distance.
    pub fn length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }

    pub fn start(&self) -> Option<Point> {
        self.segments.first().map(Segment::start)
    }

    pub fn end(&self) -> Option<Point> {
        self.segments.last().map(Segment::end)
    }

    /// Position at time `t`, clamped to `[0, duration]`.
    pub fn position_at(&self, t: f64) -> Option<Point> {
        self.positions_at(&[t]).into_iter().next()
    }

    /// Positions at a non-decreasing sequence of times.
    pub fn positions_at(&self, times: &[f64]) -> Vec<Point> {
        debug_assert!(times.windows(2).all(|w| w[0] <= w[1]));
        let Some(last) = self.segments.last() else {
            return Vec::new();
        };
        let mut out = Vec::with_capacity(times.len());
        let mut idx = 0;
        let mut seg_start = 0.0;
        for &t in times {
            while idx + 1 < self.segments.len() {
                let d = self.segments[idx].duration();
                if t < seg_start + d {
                    break;
                }
                seg_start += d;
                idx += 1;
            }
            let seg = if idx < self.segments.len() {
                &self.segments[idx]
            } else {
                last
            };
            out.push(seg.position_at(t - seg_start));
        }
        out
    }

    /// Checks segment sanity, spatial continuity (unless ideal) and the
    /// speed limit `max_speed`.
    pub fn validate(&self, max_speed: f64) -> Result<()> {
        for (i, seg) in self.segments.iter().enumerate() {
            match *seg {
                Segment::Hover { xy, duration } => {
                    if !xy.is_finite() || !(duration.is_finite() && duration >= 0.0) {
                        return Err(Error::validation(format!(
                            "segment {i}: hover needs a finite point and duration >= 0"
                        )));
                    }
                }
                Segment::Fly { from, to, speed } => {
                    if !from.is_finite() || !to.is_finite() {
                        return Err(Error::validation(format!(
                            "segment {i}: non-finite fly endpoint"
                        )));
                    }
                    if !(speed.is_finite() && speed > 0.0) {
                        return Err(Error::validation(format!(
                            "segment {i}: fly speed must be > 0, got {speed}"
                        )));
                    }
                    if from.dist(to) > 0.0 && speed > max_speed * (1.0 + SPEED_REL_TOL) {
                        return Err(Error::validation(format!(
                            "segment {i}: speed {speed} m/s exceeds the limit {max_speed} m/s"
                        )));
                    }
                }
            }
        }
        if !self.ideal {
            for (i, w) in self.segments.windows(2).enumerate() {
                let gap = w[0].end().dist(w[1].start());
                if gap > CONTINUITY_TOL {
                    return Err(Error::validation(format!(
                        "discontinuity of {gap:.3e} m between segments {i} and {}",
                        i + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// Drops zero-duration hovers and merges consecutive hovers at the same
    /// point.
    pub fn simplified(&self, min_hover: f64) -> Trajectory {
        let mut out: Vec<Segment> = Vec::with_capacity(self.segments.len());
        for seg in &self.segments {
            match *seg {
                Segment::Hover { duration, .. } if duration < min_hover => continue,
                Segment::Hover { xy, duration } => {
                    if let Some(Segment::Hover {
                        xy: prev,
                        duration: d,
                    }) = out.last_mut()
                    {
                        if *prev == xy {
                            *d += duration;
                            continue;
                        }
                    }
                    out.push(*seg);
                }
                Segment::Fly { from, to, .. } if from == to => continue,
                Segment::Fly { .. } => out.push(*seg),
            }
        }
        Trajectory {
            segments: out,
            ideal: self.ideal,
        }
    }
}

/// A trajectory sampled once per slot of length `slot_duration`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteTrajectory {
    pub points: Vec<Point>,
    pub slot_duration: f64,
}

impl DiscreteTrajectory {
    pub fn new(points: Vec<Point>, slot_duration: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::validation("discrete trajectory needs at least one slot"));
        }
        if !(slot_duration.is_finite() && slot_duration > 0.0) {
            return Err(Error::validation(format!(
                "slot duration must be > 0, got {slot_duration}"
            )));
        }
        Ok(DiscreteTrajectory {
            points,
            slot_duration,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.points.len() as f64 * self.slot_duration
    }

    /// Largest excess of a step over the per-slot travel budget `V·Δ`
    /// (zero or negative when feasible).
    pub fn max_step_violation(&self, max_speed: f64) -> f64 {
        let budget = max_speed * self.slot_duration;
        self.points
            .windows(2)
            .map(|w| w[0].dist(w[1]) - budget)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Checks the horizon `N·Δ = T` and the per-slot step constraint.
    pub fn validate(&self, scn: &Scenario) -> Result<()> {
        if self.points.is_empty() || !(self.slot_duration > 0.0) {
            return Err(Error::validation("empty discrete trajectory"));
        }
        if let Some(n) = self.points.iter().position(|p| !p.is_finite()) {
            return Err(Error::validation(format!("slot {n} has a non-finite point")));
        }
        let horizon_err = (self.duration() - scn.horizon()).abs();
        if horizon_err > 1e-9_f64.max(1e-12 * scn.horizon()) {
            return Err(Error::validation(format!(
                "N·Δ = {} s differs from the horizon {} s",
                self.duration(),
                scn.horizon()
            )));
        }
        let budget = scn.max_speed() * self.slot_duration;
        let slack = SPEED_REL_TOL * budget + 1e-12;
        for (n, w) in self.points.windows(2).enumerate() {
            let step = w[0].dist(w[1]);
            if step > budget + slack {
                return Err(Error::validation(format!(
                    "step {} -> {} is {step:.6e} m, exceeding V·Δ = {budget:.6e} m",
                    n,
                    n + 1
                )));
            }
        }
        Ok(())
    }

    /// A continuous, speed-feasible realization: half a slot at the first
    /// sample, straight legs between consecutive samples (one slot each), and
    /// half a slot at the last sample.
    pub fn to_polyline(&self) -> Trajectory {
        let dt = self.slot_duration;
        let mut segs = Vec::with_capacity(2 * self.points.len());
        segs.push(Segment::hover(self.points[0], 0.5 * dt));
        for w in self.points.windows(2) {
            let len = w[0].dist(w[1]);
            if len == 0.0 {
                segs.push(Segment::hover(w[0], dt));
            } else {
                segs.push(Segment::fly(w[0], w[1], len / dt));
            }
        }
        segs.push(Segment::hover(*self.points.last().unwrap(), 0.5 * dt));
        Trajectory::new(segs).simplified(0.0)
    }
}

/// Energy delivered to every receiver along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub per_er_energy: Vec<f64>,
    pub min_energy: f64,
    pub sum_energy: f64,
    pub avg_power: Vec<f64>,
}

impl EnergyReport {
    /// Builds the report from per-receiver energies over a horizon of
    /// `horizon` seconds.
    pub fn from_energies(per_er_energy: Vec<f64>, horizon: f64) -> Self {
        let min_energy = per_er_energy.iter().copied().fold(f64::INFINITY, f64::min);
        let sum_energy = per_er_energy.iter().sum();
        let avg_power = per_er_energy.iter().map(|e| e / horizon).collect();
        EnergyReport {
            per_er_energy,
            min_energy,
            sum_energy,
            avg_power,
        }
    }

    pub fn min_avg_power(&self) -> f64 {
        self.avg_power.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Energy received by receiver `k` while the UAV flies the straight leg
/// `from → to` at `speed`.
///
/// With arc length `s` measured from the foot of the perpendicular dropped
/// from the receiver, the squared distance is `s² + r²`, so the integral is
/// `β₀P/(v·r) · [atan(s/r)]`. The arctangent difference is evaluated with
/// `atan2` to avoid cancellation on long legs.
pub fn leg_energy(scn: &Scenario, from: Point, to: Point, speed: f64, k: usize) -> f64 {
    let len = from.dist(to);
    if len <= DEGENERATE_LEG {
        return if len == 0.0 {
            0.0
        } else {
            len / speed * scn.power(from, k)
        };
    }
    let dir = (to - from) * (1.0 / len);
    let rel = from - scn.ers()[k];
    let s0 = rel.dot(dir);
    let perp = rel.x * dir.y - rel.y * dir.x;
    let h = scn.altitude();
    let r2 = perp * perp + h * h;
    let r = r2.sqrt();
    let s1 = s0 + len;
    let angle = (r * len).atan2(r2 + s0 * s1);
    scn.beta0_p() / (speed * r) * angle
}

/// Adaptive-quadrature evaluation of [`leg_energy`], for cross-checks.
pub fn leg_energy_quadrature(
    scn: &Scenario,
    from: Point,
    to: Point,
    speed: f64,
    k: usize,
    rel_tol: f64,
) -> f64 {
    let dur = from.dist(to) / speed;
    if dur == 0.0 {
        return 0.0;
    }
    // Q_k ≤ β₀P/H², so this bounds the absolute error relative to the
    // smallest plausible integral on the leg.
    let scale = dur * scn.power(from, k).min(scn.power(to, k));
    adaptive_simpson(
        |t| scn.power(from.lerp(to, t / dur), k),
        0.0,
        dur,
        rel_tol * scale,
        50,
    )
}

/// Per-receiver energy along a continuous trajectory.
pub fn energy_along(scn: &Scenario, traj: &Trajectory) -> Result<EnergyReport> {
    traj.validate(scn.max_speed())?;
    Ok(energy_along_unchecked(scn, traj))
}

/// [`energy_along`] without validation, for trajectories built internally.
pub(crate) fn energy_along_unchecked(scn: &Scenario, traj: &Trajectory) -> EnergyReport {
    let energies = (0..scn.num_ers())
        .map(|k| traj.segments.iter().map(|s| s.energy(scn, k)).sum())
        .collect();
    EnergyReport::from_energies(energies, scn.horizon())
}

/// Per-receiver energy of a discretized trajectory, `Σ_n Δ·Q_k(p[n])`.
pub fn energy_along_discrete(scn: &Scenario, dt: &DiscreteTrajectory) -> Result<EnergyReport> {
    dt.validate(scn)?;
    Ok(EnergyReport::from_energies(
        discrete_energies(scn, dt),
        scn.horizon(),
    ))
}

pub(crate) fn discrete_energies(scn: &Scenario, dt: &DiscreteTrajectory) -> Vec<f64> {
    (0..scn.num_ers())
        .map(|k| {
            dt.points.iter().map(|&p| scn.power(p, k)).sum::<f64>() * dt.slot_duration
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scn_one(er: Point, v: f64, t: f64) -> Scenario {
        Scenario::new(vec![er], 5.0, 10.0, 1e-3, v, t).unwrap()
    }

    #[test]
    fn hover_over_receiver_delivers_peak_power() {
        let s = scn_one(Point::new(1.0, 2.0), 1.0, 20.0);
        let r = energy_along(&s, &Trajectory::hover(Point::new(1.0, 2.0), 20.0)).unwrap();
        assert!((r.per_er_energy[0] - 20.0 * 1e-2 / 25.0).abs() < 1e-15);
        assert_eq!(r.min_energy, r.per_er_energy[0]);
        assert!((r.avg_power[0] - 4e-4).abs() < 1e-16);
    }

    #[test]
    fn symmetric_leg_gives_equal_energy() {
        let s = Scenario::new(
            vec![Point::new(-3.0, 0.0), Point::new(3.0, 0.0)],
            5.0,
            10.0,
            1e-3,
            2.0,
            5.0,
        )
        .unwrap();
        let t = Trajectory::new(vec![Segment::fly(
            Point::new(-5.0, 0.0),
            Point::new(5.0, 0.0),
            2.0,
        )]);
        let r = energy_along(&s, &t).unwrap();
        assert!((r.per_er_energy[0] - r.per_er_energy[1]).abs() < 1e-15);
    }

    #[test]
    fn leg_matches_quadrature() {
        let s = scn_one(Point::ORIGIN, 1.0, 10.0);
        let closed = leg_energy(&s, Point::new(-5.0, 0.0), Point::new(5.0, 0.0), 1.0, 0);
        // β₀P/(v·H)·(atan(1) − atan(−1)) = 1e-2/5·π/2
        let exact = 1e-2 / 5.0 * std::f64::consts::FRAC_PI_2;
        assert!(((closed - exact) / exact).abs() < 1e-14);
        let quad = leg_energy_quadrature(
            &s,
            Point::new(-5.0, 0.0),
            Point::new(5.0, 0.0),
            1.0,
            0,
            1e-12,
        );
        assert!(((closed - quad) / quad).abs() < INTEGRAL_REL_TOL);
    }

    #[test]
    fn rejects_discontinuity_and_overspeed() {
        let s = scn_one(Point::ORIGIN, 1.0, 10.0);
        let gap = Trajectory::new(vec![
            Segment::hover(Point::ORIGIN, 1.0),
            Segment::hover(Point::new(1.0, 0.0), 1.0),
        ]);
        assert!(matches!(energy_along(&s, &gap), Err(Error::Validation(_))));
        let mut ideal = gap.clone();
        ideal.ideal = true;
        assert!(energy_along(&s, &ideal).is_ok());
        let fast = Trajectory::new(vec![Segment::fly(Point::ORIGIN, Point::new(1.0, 0.0), 2.0)]);
        assert!(matches!(energy_along(&s, &fast), Err(Error::Validation(_))));
    }

    #[test]
    fn zero_length_leg_is_harmless() {
        let s = scn_one(Point::ORIGIN, 1.0, 10.0);
        assert_eq!(leg_energy(&s, Point::ORIGIN, Point::ORIGIN, 1.0, 0), 0.0);
    }

    #[test]
    fn positions_walk_segments() {
        let t = Trajectory::new(vec![
            Segment::hover(Point::ORIGIN, 2.0),
            Segment::fly(Point::ORIGIN, Point::new(4.0, 0.0), 2.0),
            Segment::hover(Point::new(4.0, 0.0), 1.0),
        ]);
        assert!((t.duration() - 5.0).abs() < 1e-15);
        let ps = t.positions_at(&[0.0, 1.0, 2.0, 3.0, 4.5, 9.0]);
        let xs: Vec<f64> = ps.iter().map(|p| p.x).collect();
        assert_eq!(xs, vec![0.0, 0.0, 0.0, 2.0, 4.0, 4.0]);
    }

    #[test]
    fn discrete_single_slot() {
        let s = scn_one(Point::ORIGIN, 1.0, 2.0);
        let dt = DiscreteTrajectory::new(vec![Point::new(3.0, 4.0)], 2.0).unwrap();
        let r = energy_along_discrete(&s, &dt).unwrap();
        assert!((r.per_er_energy[0] - 2.0 * 2e-4).abs() < 1e-17);
    }

    #[test]
    fn discrete_rejects_step_violation() {
        let s = scn_one(Point::ORIGIN, 1.0, 2.0);
        let dt = DiscreteTrajectory::new(vec![Point::ORIGIN, Point::new(2.0, 0.0)], 1.0).unwrap();
        assert!(matches!(energy_along_discrete(&s, &dt), Err(Error::Validation(_))));
    }

    #[test]
    fn trajectory_json_schema() {
        let t = Trajectory::new(vec![
            Segment::hover(Point::new(1.0, 2.0), 3.0),
            Segment::fly(Point::new(1.0, 2.0), Point::new(4.0, 6.0), 5.0),
        ]);
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(
            s,
            r#"{"segments":[{"hover":{"xy":[1.0,2.0],"dur_s":3.0}},{"fly":{"from":[1.0,2.0],"to":[4.0,6.0],"speed_mps":5.0}}]}"#
        );
        let back: Trajectory = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn polyline_preserves_duration_and_speed() {
        let dt = DiscreteTrajectory::new(
            vec![Point::ORIGIN, Point::new(1.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 0.5)],
            0.5,
        )
        .unwrap();
        let t = dt.to_polyline();
        assert!((t.duration() - 2.0).abs() < 1e-12);
        t.validate(2.0).unwrap();
    }
}
