//! Line-of-sight power model and problem instances.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, Point};

/// An immutable problem instance. All quantities are linear SI.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    ers: Vec<Point>,
    altitude: f64,
    tx_power: f64,
    ref_gain: f64,
    max_speed: f64,
    horizon: f64,
    bbox: BoundingBox,
}

impl Scenario {
    /// `tx_power` in watts, `ref_gain` as a linear power gain at 1 m.
    pub fn new(
        ers: Vec<Point>,
        altitude: f64,
        tx_power: f64,
        ref_gain: f64,
        max_speed: f64,
        horizon: f64,
    ) -> Result<Self> {
        let bbox = BoundingBox::of_points(&ers)
            .ok_or_else(|| Error::validation("scenario needs at least one energy receiver"))?;
        if let Some(k) = ers.iter().position(|p| !p.is_finite()) {
            return Err(Error::validation(format!("receiver {k} has a non-finite coordinate")));
        }
        let positive = [
            ("altitude", altitude),
            ("tx_power", tx_power),
            ("ref_gain", ref_gain),
            ("horizon", horizon),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if !(max_speed.is_finite() && max_speed >= 0.0) {
            return Err(Error::validation(format!(
                "max_speed must be finite and >= 0, got {max_speed}"
            )));
        }
        Ok(Scenario {
            ers,
            altitude,
            tx_power,
            ref_gain,
            max_speed,
            horizon,
            bbox,
        })
    }

    /// Defaults used throughout the experiments: β₀ = −30 dB, P = 40 dBm,
    /// H = 5 m.
    pub fn with_defaults(ers: Vec<Point>, max_speed: f64, horizon: f64) -> Result<Self> {
        Scenario::new(ers, 5.0, dbm_to_watts(40.0), db_to_linear(-30.0), max_speed, horizon)
    }

    /// Two receivers at `(∓D/2, 0)` with the default radio parameters.
    pub fn two_er(distance: f64, max_speed: f64, horizon: f64) -> Result<Self> {
        Scenario::with_defaults(
            vec![Point::new(-distance / 2.0, 0.0), Point::new(distance / 2.0, 0.0)],
            max_speed,
            horizon,
        )
    }

    pub fn ers(&self) -> &[Point] {
        &self.ers
    }

    pub fn num_ers(&self) -> usize {
        self.ers.len()
    }

    pub fn altitude(&self) -> f64 {
        self.altitude
    }

    pub fn tx_power(&self) -> f64 {
        self.tx_power
    }

    pub fn ref_gain(&self) -> f64 {
        self.ref_gain
    }

    pub fn max_speed(&self) -> f64 {
        self.max_speed
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// β₀·P, the received power at unit distance.
    pub fn beta0_p(&self) -> f64 {
        self.ref_gain * self.tx_power
    }

    /// The box spanned by the receivers; every optimal hover point of the
    /// sum-power, weighted-power and max-min problems lies inside it.
    pub fn bounding_box(&self) -> BoundingBox {
        self.bbox
    }

    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        Scenario::new(
            self.ers.clone(),
            self.altitude,
            self.tx_power,
            self.ref_gain,
            self.max_speed,
            horizon,
        )
    }

    pub fn with_max_speed(&self, max_speed: f64) -> Result<Self> {
        Scenario::new(
            self.ers.clone(),
            self.altitude,
            self.tx_power,
            self.ref_gain,
            max_speed,
            self.horizon,
        )
    }

    pub fn with_tx_power(&self, tx_power: f64) -> Result<Self> {
        Scenario::new(
            self.ers.clone(),
            self.altitude,
            tx_power,
            self.ref_gain,
            self.max_speed,
            self.horizon,
        )
    }

    pub fn with_ers(&self, ers: Vec<Point>) -> Result<Self> {
        Scenario::new(
            ers,
            self.altitude,
            self.tx_power,
            self.ref_gain,
            self.max_speed,
            self.horizon,
        )
    }

    /// Power received by receiver `k` from a UAV hovering above `p`.
    pub fn received_power(&self, p: Point, k: usize) -> Result<f64> {
        if k >= self.ers.len() {
            return Err(Error::domain(format!(
                "receiver index {k} out of range (K = {})",
                self.ers.len()
            )));
        }
        Ok(self.power(p, k))
    }

    /// Unchecked variant of [`Scenario::received_power`]; panics when `k`
    /// is out of range.
    #[inline]
    pub fn power(&self, p: Point, k: usize) -> f64 {
        self.beta0_p() / (p.dist_sq(self.ers[k]) + self.altitude * self.altitude)
    }

    /// Received power at every receiver.
    pub fn powers(&self, p: Point) -> Vec<f64> {
        (0..self.ers.len()).map(|k| self.power(p, k)).collect()
    }

    /// Sum of the received powers over all receivers.
    pub fn sum_power(&self, p: Point) -> f64 {
        (0..self.ers.len()).map(|k| self.power(p, k)).sum()
    }

    /// `Σ_k w_k Q_k(p)`.
    pub fn weighted_power(&self, p: Point, weights: &[f64]) -> f64 {
        debug_assert_eq!(weights.len(), self.ers.len());
        weights
            .iter()
            .enumerate()
            .map(|(k, w)| w * self.power(p, k))
            .sum()
    }

    /// Smallest received power over the receivers.
    pub fn min_power(&self, p: Point) -> f64 {
        (0..self.ers.len())
            .map(|k| self.power(p, k))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_file(&self) -> ScenarioFile {
        ScenarioFile {
            ers: self.ers.clone(),
            altitude_m: self.altitude,
            tx_power_dbm: watts_to_dbm(self.tx_power),
            ref_gain_db: linear_to_db(self.ref_gain),
            max_speed_mps: self.max_speed,
            horizon_s: self.horizon,
        }
    }
}

/// On-disk scenario description; power and gain are logarithmic here and
/// converted once on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub ers: Vec<Point>,
    pub altitude_m: f64,
    pub tx_power_dbm: f64,
    pub ref_gain_db: f64,
    pub max_speed_mps: f64,
    pub horizon_s: f64,
}

impl ScenarioFile {
    pub fn into_scenario(self) -> Result<Scenario> {
        Scenario::new(
            self.ers,
            self.altitude_m,
            dbm_to_watts(self.tx_power_dbm),
            db_to_linear(self.ref_gain_db),
            self.max_speed_mps,
            self.horizon_s,
        )
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let file: ScenarioFile = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        file.into_scenario()
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    linear_to_db(w) + 30.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(er: Point) -> Scenario {
        Scenario::new(vec![er], 5.0, 10.0, 1e-3, 5.0, 10.0).unwrap()
    }

    #[test]
    fn received_power_hand_values() {
        let s = single(Point::ORIGIN);
        assert!((s.received_power(Point::ORIGIN, 0).unwrap() - 4.0e-4).abs() < 1e-18);
        assert!((s.received_power(Point::new(3.0, 4.0), 0).unwrap() - 2.0e-4).abs() < 1e-18);
    }

    #[test]
    fn received_power_symmetric_in_offset() {
        let s = single(Point::new(2.0, -1.0));
        for h in [0.1, 1.0, 7.5] {
            let up = s.power(Point::new(2.0, -1.0 + h), 0);
            let down = s.power(Point::new(2.0, -1.0 - h), 0);
            assert_eq!(up, down);
        }
    }

    #[test]
    fn index_out_of_range_is_domain_error() {
        let s = single(Point::ORIGIN);
        assert!(matches!(s.received_power(Point::ORIGIN, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn sum_power_single_receiver() {
        let s = single(Point::new(1.0, 1.0));
        let p = Point::new(-3.0, 2.0);
        assert_eq!(s.sum_power(p), s.power(p, 0));
    }

    #[test]
    fn invalid_scenarios_rejected() {
        assert!(Scenario::new(vec![], 5.0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(Scenario::new(vec![Point::ORIGIN], 0.0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(Scenario::new(vec![Point::ORIGIN], 5.0, -1.0, 1.0, 1.0, 1.0).is_err());
        assert!(Scenario::new(vec![Point::ORIGIN], 5.0, 1.0, 1.0, -1.0, 1.0).is_err());
        assert!(Scenario::new(vec![Point::ORIGIN], 5.0, 1.0, 1.0, 1.0, 0.0).is_err());
        assert!(Scenario::new(vec![Point::new(f64::NAN, 0.0)], 5.0, 1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn file_units_convert_at_boundary() {
        let json = r#"{"ers":[[0,0],[10,0]],"altitude_m":5,"tx_power_dbm":40,
                       "ref_gain_db":-30,"max_speed_mps":5,"horizon_s":10}"#;
        let f: ScenarioFile = serde_json::from_str(json).unwrap();
        let s = f.into_scenario().unwrap();
        assert!((s.tx_power() - 10.0).abs() < 1e-12);
        assert!((s.ref_gain() - 1e-3).abs() < 1e-18);
        let back = s.to_file();
        assert!((back.tx_power_dbm - 40.0).abs() < 1e-12);
        assert!((back.ref_gain_db + 30.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_fields_rejected() {
        let json = r#"{"ers":[[0,0]],"altitude_m":5,"tx_power_dbm":40,
                       "ref_gain_db":-30,"max_speed_mps":5,"horizon_s":10,"bogus":1}"#;
        assert!(serde_json::from_str::<ScenarioFile>(json).is_err());
    }
}
