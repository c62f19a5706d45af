#![allow(dead_code)]

use proptest::prelude::*;
use rand::Rng;
use uavwpt::{Point, Scenario, Segment, Trajectory};

pub fn point_in(side: f64) -> impl Strategy<Value = Point> {
    (0.0..side, 0.0..side).prop_map(|(x, y)| Point::new(x, y))
}

pub fn layout(k: std::ops::RangeInclusive<usize>, side: f64) -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec(point_in(side), k)
}

pub fn scenario(ers: Vec<Point>, v: f64, t: f64) -> Scenario {
    Scenario::with_defaults(ers, v, t).unwrap()
}

/// Random speed-feasible trajectory of total duration `t` inside a box of
/// `side` meters: alternating hovers and full-speed legs.
pub fn random_feasible<R: Rng>(rng: &mut R, side: f64, v: f64, t: f64) -> Trajectory {
    let mut segs = Vec::new();
    let mut left = t;
    let mut at = Point::new(rng.gen_range(0.0..side), rng.gen_range(0.0..side));
    while left > 1e-9 {
        if rng.gen_bool(0.5) || v == 0.0 {
            let d = rng.gen_range(0.0..t / 3.0).min(left);
            segs.push(Segment::hover(at, d));
            left -= d;
        } else {
            let to = Point::new(rng.gen_range(0.0..side), rng.gen_range(0.0..side));
            let speed = v * rng.gen_range(0.2..=1.0);
            let dur = at.dist(to) / speed;
            if dur > left {
                let end = at.lerp(to, left / dur);
                segs.push(Segment::fly(at, end, speed));
                at = end;
                left = 0.0;
            } else {
                segs.push(Segment::fly(at, to, speed));
                at = to;
                left -= dur;
            }
        }
    }
    Trajectory::new(segs)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
