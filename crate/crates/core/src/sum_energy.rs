//! Sum-energy maximization: the UAV hovers for the whole horizon at a point
//! maximizing the total received power `ψ(x, y) = Σ_k Q_k(x, y)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::model::Scenario;
use crate::par::Exec;
use crate::search::{self, default_grid_step, PowerGrid, WeightedPower, TIE_TOL_W};
use crate::trajectory::{energy_along_unchecked, EnergyReport, Trajectory};

/// Grid starts polished per search.
const MAX_STARTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoverPoint {
    pub xy: Point,
    /// Power received by each receiver at `xy`, watts.
    pub power_profile: Vec<f64>,
    /// Sum power at `xy`, watts.
    pub objective: f64,
}

impl HoverPoint {
    pub fn at(scn: &Scenario, xy: Point) -> Self {
        let power_profile = scn.powers(xy);
        let objective = power_profile.iter().sum();
        HoverPoint {
            xy,
            power_profile,
            objective,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumEnergySolution {
    pub hover: HoverPoint,
    pub trajectory: Trajectory,
    pub report: EnergyReport,
    /// Every detected maximizer (including `hover`), at least one grid step
    /// apart.
    pub co_optima: Vec<HoverPoint>,
}

#[derive(Debug, Clone, Copy)]
pub struct P1Options {
    /// Grid pitch in meters; `None` picks [`default_grid_step`].
    pub grid_step: Option<f64>,
    pub exec: Exec,
}

impl Default for P1Options {
    fn default() -> Self {
        P1Options {
            grid_step: None,
            exec: Exec::default(),
        }
    }
}

/// Solves the sum-energy problem with a grid of pitch `grid_step`.
pub fn solve_p1(scn: &Scenario, grid_step: f64) -> Result<SumEnergySolution> {
    solve_p1_with(
        scn,
        &P1Options {
            grid_step: Some(grid_step),
            ..Default::default()
        },
    )
}

pub fn solve_p1_with(scn: &Scenario, opts: &P1Options) -> Result<SumEnergySolution> {
    let bbox = scn.bounding_box();
    let step = opts.grid_step.unwrap_or_else(|| default_grid_step(&bbox));
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::domain(format!("grid step must be > 0, got {step}")));
    }

    let maximizers: Vec<Point> = if bbox.diagonal() == 0.0 {
        vec![scn.ers()[0]]
    } else {
        let pg = PowerGrid::new(scn, step, opts.exec);
        let values = pg.weighted(&vec![1.0; scn.num_ers()]);
        let obj = WeightedPower::uniform(scn);
        let found =
            search::polish_candidates(&obj, pg.grid(), &values, &bbox, MAX_STARTS, step);
        let best = found[0].value;
        let mut ties: Vec<Point> = found
            .iter()
            .filter(|m| best - m.value <= TIE_TOL_W)
            .map(|m| m.point)
            .collect();
        ties.sort_by(Point::lex_cmp);
        ties
    };

    let co_optima: Vec<HoverPoint> = maximizers.iter().map(|&p| HoverPoint::at(scn, p)).collect();
    let hover = co_optima[0].clone();
    let trajectory = Trajectory::hover(hover.xy, scn.horizon());
    let report = energy_along_unchecked(scn, &trajectory);
    Ok(SumEnergySolution {
        hover,
        trajectory,
        report,
        co_optima,
    })
}

/// Sum power on every grid point, for plotting.
pub fn psi_grid(scn: &Scenario, grid_step: f64, exec: Exec) -> Result<Vec<(Point, f64)>> {
    if !(grid_step.is_finite() && grid_step > 0.0) {
        return Err(Error::domain(format!("grid step must be > 0, got {grid_step}")));
    }
    let grid = search::Grid::new(&scn.bounding_box(), grid_step);
    let values = grid.evaluate(|p| scn.sum_power(p), exec);
    Ok(values
        .into_iter()
        .enumerate()
        .map(|(i, v)| (grid.point(i), v))
        .collect())
}

/// Exact maximizers of the sum power for two receivers at `(∓D/2, 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoErClosedForm {
    pub distance: f64,
    /// `2H/√3`: above this separation the midpoint stops being optimal.
    pub threshold: f64,
    /// Offset of the two symmetric maximizers; zero at or below the threshold.
    pub xi: f64,
    /// `[0]` or `[−ξ, ξ]`.
    pub maximizers: Vec<f64>,
}

pub fn two_er_threshold(altitude: f64) -> f64 {
    2.0 * altitude / 3f64.sqrt()
}

/// `ξ = sqrt(−(D²/4 + H²) + sqrt(D⁴/4 + H²D²))`, clamped at zero.
pub fn two_er_xi(distance: f64, altitude: f64) -> f64 {
    let d2 = distance * distance;
    let h2 = altitude * altitude;
    let inner = -(d2 / 4.0 + h2) + (d2 * d2 / 4.0 + h2 * d2).sqrt();
    inner.max(0.0).sqrt()
}

pub fn two_er_closed_form(distance: f64, altitude: f64) -> TwoErClosedForm {
    let threshold = two_er_threshold(altitude);
    if distance <= threshold {
        return TwoErClosedForm {
            distance,
            threshold,
            xi: 0.0,
            maximizers: vec![0.0],
        };
    }
    let xi = two_er_xi(distance, altitude);
    TwoErClosedForm {
        distance,
        threshold,
        xi,
        maximizers: vec![-xi, xi],
    }
}

/// Sum power along the line through two receivers at `(∓D/2, 0)`.
pub fn psi_hat(x: f64, distance: f64, altitude: f64, beta0_p: f64) -> f64 {
    let h2 = altitude * altitude;
    let half = distance / 2.0;
    beta0_p * (1.0 / ((x + half).powi(2) + h2) + 1.0 / ((x - half).powi(2) + h2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_receiver_hovers_overhead() {
        let scn = Scenario::with_defaults(vec![Point::new(3.0, -1.0)], 5.0, 10.0).unwrap();
        let sol = solve_p1(&scn, 0.1).unwrap();
        assert_eq!(sol.hover.xy, Point::new(3.0, -1.0));
        assert!((sol.hover.objective - scn.beta0_p() / 25.0).abs() < 1e-18);
        assert_eq!(sol.trajectory.segments.len(), 1);
    }

    #[test]
    fn close_pair_hovers_at_midpoint() {
        let scn = Scenario::two_er(4.0, 5.0, 10.0).unwrap();
        let sol = solve_p1(&scn, 0.05).unwrap();
        assert!(sol.hover.xy.dist(Point::ORIGIN) < 1e-6);
        assert_eq!(sol.co_optima.len(), 1);
    }

    #[test]
    fn distant_pair_has_two_co_optima() {
        let scn = Scenario::two_er(10.0, 5.0, 10.0).unwrap();
        let sol = solve_p1(&scn, 0.05).unwrap();
        let xi = (-50.0 + 5000f64.sqrt()).sqrt();
        assert!((xi - 4.550_899).abs() < 1e-6);
        assert_eq!(sol.co_optima.len(), 2);
        assert!((sol.co_optima[0].xy.x + xi).abs() < 1e-7);
        assert!((sol.co_optima[1].xy.x - xi).abs() < 1e-7);
        assert!((sol.report.sum_energy - 10.0 * sol.hover.objective).abs() < 1e-15);
    }

    #[test]
    fn closed_form_cases() {
        let c = two_er_closed_form(0.0, 5.0);
        assert_eq!(c.maximizers, vec![0.0]);
        let c = two_er_closed_form(5.7735, 5.0);
        assert_eq!(c.maximizers, vec![0.0]);
        assert!(two_er_xi(5.7735, 5.0) < 1e-2);
        let thr = two_er_threshold(5.0);
        assert!(two_er_xi(thr, 5.0) < 1e-6);
        let far = two_er_closed_form(100.0, 5.0);
        assert!(far.xi / 50.0 > 0.99);
        assert!(far.xi < 50.0);
    }

    #[test]
    fn psi_hat_midpoint_and_symmetry() {
        let (d, h, c) = (10.0, 5.0, 1e-2);
        assert!((psi_hat(0.0, d, h, c) - 2.0 * c / (d * d / 4.0 + h * h)).abs() < 1e-18);
        for x in [0.3, 1.7, 4.0, 12.0] {
            assert_eq!(psi_hat(-x, d, h, c), psi_hat(x, d, h, c));
        }
    }

    #[test]
    fn zero_grid_step_rejected() {
        let scn = Scenario::two_er(4.0, 5.0, 10.0).unwrap();
        assert!(matches!(solve_p1(&scn, 0.0), Err(Error::Domain(_))));
    }
}
