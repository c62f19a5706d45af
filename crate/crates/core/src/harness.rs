//! Parameter sweeps over the solvers, with CSV, trajectory and manifest
//! output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::hover_fly::{build_hover_fly_seeded, solve_fixed_point, HoverFlySolution};
use crate::minmax::{solve_p3_with, IdealMinMaxSolution, P3Options};
use crate::model::{Scenario, ScenarioFile};
use crate::par::Exec;
use crate::scp::{default_slots, discretize, scp_optimize, DEFAULT_REL_TOL};
use crate::sum_energy::{solve_p1_with, P1Options};
use crate::trajectory::{energy_along_unchecked, EnergyReport, Trajectory};

pub const CSV_HEADER: &str = "method,variable,value,er_index,avg_power_w,min_avg_power_w";
/// Slack allowed in the cross-method ordering checks, watts.
pub const ORDER_SLACK_W: f64 = 1e-9;
const DEFAULT_SCP_ITERS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVariable {
    /// Diameter of the receiver layout, meters.
    D,
    /// Horizon, seconds.
    T,
    /// Speed limit, m/s.
    V,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::D => "D",
            SweepVariable::T => "T",
            SweepVariable::V => "V",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Sum-energy hover.
    P1,
    /// Speed-unconstrained max-min hovering (upper bound).
    P3,
    /// Hover-and-fly through the max-min hovering locations.
    HoverFly,
    /// Hover-and-fly refined by successive convex programming.
    Scp,
    /// Hover at the single best max-min point.
    FixedPoint,
    /// Hover-and-fly through the receiver positions.
    HoverAllErs,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::P1,
        Method::P3,
        Method::HoverFly,
        Method::Scp,
        Method::FixedPoint,
        Method::HoverAllErs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::P1 => "p1",
            Method::P3 => "p3",
            Method::HoverFly => "hover_fly",
            Method::Scp => "scp",
            Method::FixedPoint => "fixed_point",
            Method::HoverAllErs => "hover_all_ers",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub base: ScenarioFile,
    pub methods: Vec<Method>,
    /// Seed for the path planner's random restarts.
    #[serde(default)]
    pub seed: u64,
    /// Slot count for SCP; defaults to the scenario's rule.
    #[serde(default)]
    pub scp_slots: Option<usize>,
    #[serde(default)]
    pub scp_max_iters: Option<usize>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::validation("sweep needs at least one value"));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("sweep values must be finite"));
        }
        if self.values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation("sweep values must be strictly increasing"));
        }
        let lowest = self.values[0];
        let ok = match self.variable {
            SweepVariable::D | SweepVariable::T => lowest > 0.0,
            SweepVariable::V => lowest >= 0.0,
        };
        if !ok {
            return Err(Error::validation(format!(
                "{} values out of range (first is {lowest})",
                self.variable.name()
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::validation("sweep needs at least one method"));
        }
        if self.scp_slots == Some(0) {
            return Err(Error::validation("scp_slots must be >= 1"));
        }
        self.base.clone().into_scenario().map(|_| ())
    }

    pub fn load(path: &Path) -> Result<SweepSpec> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Rescales `ers` about their centroid so the largest pairwise distance
/// becomes `diameter`.
pub fn scale_layout(ers: &[Point], diameter: f64) -> Result<Vec<Point>> {
    if !(diameter >= 0.0) {
        return Err(Error::domain(format!("diameter must be >= 0, got {diameter}")));
    }
    let n = ers.len() as f64;
    let c = ers.iter().fold(Point::ORIGIN, |a, &p| a + p) * (1.0 / n);
    let d0 = ers
        .iter()
        .flat_map(|a| ers.iter().map(move |b| a.dist(*b)))
        .fold(0.0, f64::max);
    if d0 == 0.0 {
        return Err(Error::domain("cannot rescale a layout of coincident receivers"));
    }
    let s = diameter / d0;
    Ok(ers.iter().map(|&p| c + (p - c) * s).collect())
}

pub fn cell_scenario(base: &Scenario, variable: SweepVariable, value: f64) -> Result<Scenario> {
    match variable {
        SweepVariable::D => base.with_ers(scale_layout(base.ers(), value)?),
        SweepVariable::T => base.with_horizon(value),
        SweepVariable::V => base.with_max_speed(value),
    }
}

/// Outcome of one method at one sweep value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub method: Method,
    pub value: f64,
    pub value_index: usize,
    pub horizon_s: f64,
    pub report: Option<EnergyReport>,
    pub trajectory: Option<Trajectory>,
    /// Dual upper bound on the max-min energy (p3 only), joules.
    pub upper_bound: Option<f64>,
    /// Minimum flying time of the hover-and-fly methods, seconds.
    pub t_fly: Option<f64>,
    pub wall_time_s: f64,
    pub error: Option<String>,
    pub note: Option<String>,
}

impl CellResult {
    pub fn min_avg_power(&self) -> Option<f64> {
        self.report.as_ref().map(EnergyReport::min_avg_power)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub methods: Vec<Method>,
    /// Value-major, then methods in spec order.
    pub cells: Vec<CellResult>,
}

impl BenchmarkResult {
    pub fn cell(&self, method: Method, value_index: usize) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.value_index == value_index)
    }
}

struct Shared {
    p3: Option<std::result::Result<IdealMinMaxSolution, String>>,
    hover_fly: Option<std::result::Result<HoverFlySolution, String>>,
}

fn run_cell(
    spec: &SweepSpec,
    scn: &Scenario,
    method: Method,
    shared: &mut Shared,
    exec: Exec,
) -> std::result::Result<(Trajectory, EnergyReport, Option<f64>, Option<f64>, Option<String>), String>
{
    let s = |e: Error| e.to_string();
    let p3 = |shared: &mut Shared| -> std::result::Result<IdealMinMaxSolution, String> {
        shared
            .p3
            .get_or_insert_with(|| {
                let opts = P3Options {
                    exec,
                    ..Default::default()
                };
                solve_p3_with(scn, &opts).map_err(s)
            })
            .clone()
    };
    let hover_fly = |shared: &mut Shared| -> std::result::Result<HoverFlySolution, String> {
        if shared.hover_fly.is_none() {
            let hf = p3(shared).and_then(|sol| {
                build_hover_fly_seeded(scn, &sol.hover_set.locations, spec.seed).map_err(s)
            });
            shared.hover_fly = Some(hf);
        }
        shared.hover_fly.clone().unwrap()
    };

    match method {
        Method::P1 => {
            let sol = solve_p1_with(
                scn,
                &P1Options {
                    grid_step: None,
                    exec,
                },
            )
            .map_err(s)?;
            Ok((sol.trajectory, sol.report, None, None, None))
        }
        Method::P3 => {
            let sol = p3(shared)?;
            let ub = Some(sol.upper_bound_certificate);
            Ok((sol.trajectory, sol.report, ub, None, None))
        }
        Method::HoverFly => {
            let hf = hover_fly(shared)?;
            Ok((hf.trajectory, hf.report, None, Some(hf.t_fly), None))
        }
        Method::HoverAllErs => {
            let hf = build_hover_fly_seeded(scn, scn.ers(), spec.seed).map_err(s)?;
            Ok((hf.trajectory, hf.report, None, Some(hf.t_fly), None))
        }
        Method::FixedPoint => {
            let fix = solve_fixed_point(scn);
            let traj = Trajectory::hover(fix.xy, scn.horizon());
            let report = energy_along_unchecked(scn, &traj);
            Ok((traj, report, None, None, None))
        }
        Method::Scp => {
            let hf = hover_fly(shared)?;
            let slots = spec.scp_slots.unwrap_or_else(|| default_slots(scn));
            let init = discretize(&hf.trajectory, slots).map_err(s)?;
            let iters = spec.scp_max_iters.unwrap_or(DEFAULT_SCP_ITERS);
            let st = scp_optimize(scn, &init, iters, DEFAULT_REL_TOL).map_err(s)?;
            let traj = st.iterate.to_polyline();
            let report = energy_along_unchecked(scn, &traj);
            if report.min_energy >= hf.report.min_energy {
                Ok((traj, report, None, Some(hf.t_fly), None))
            } else {
                let note = "refined path delivered less than its seed; seed kept".to_string();
                Ok((hf.trajectory, hf.report, None, Some(hf.t_fly), Some(note)))
            }
        }
    }
}

pub fn run_sweep(spec: &SweepSpec) -> Result<BenchmarkResult> {
    run_sweep_with(spec, Exec::default())
}

/// Runs every method at every sweep value; sweep values are evaluated
/// concurrently under `exec`. A failing method is recorded in its cell and
/// the sweep continues.
pub fn run_sweep_with(spec: &SweepSpec, exec: Exec) -> Result<BenchmarkResult> {
    spec.validate()?;
    let base = spec.base.clone().into_scenario()?;
    let per_value = exec.map_range(spec.values.len(), |vi| {
        let value = spec.values[vi];
        let horizon_s = match spec.variable {
            SweepVariable::T => value,
            _ => base.horizon(),
        };
        let scn = cell_scenario(&base, spec.variable, value);
        let mut shared = Shared {
            p3: None,
            hover_fly: None,
        };
        spec.methods
            .iter()
            .map(|&method| {
                let start = Instant::now();
                let outcome = match &scn {
                    Ok(scn) => run_cell(spec, scn, method, &mut shared, exec),
                    Err(e) => Err(e.to_string()),
                };
                let wall_time_s = start.elapsed().as_secs_f64();
                match outcome {
                    Ok((traj, report, upper_bound, t_fly, note)) => CellResult {
                        method,
                        value,
                        value_index: vi,
                        horizon_s,
                        report: Some(report),
                        trajectory: Some(traj),
                        upper_bound,
                        t_fly,
                        wall_time_s,
                        error: None,
                        note,
                    },
                    Err(error) => {
                        log::warn!("{} at {}={value}: {error}", method.name(), spec.variable.name());
                        CellResult {
                            method,
                            value,
                            value_index: vi,
                            horizon_s,
                            report: None,
                            trajectory: None,
                            upper_bound: None,
                            t_fly: None,
                            wall_time_s,
                            error: Some(error),
                            note: None,
                        }
                    }
                }
            })
            .collect::<Vec<_>>()
    });
    Ok(BenchmarkResult {
        variable: spec.variable,
        values: spec.values.clone(),
        methods: spec.methods.clone(),
        cells: per_value.into_iter().flatten().collect(),
    })
}

/// Cross-method ordering violations, one message per failed comparison.
///
/// Checked per sweep value: the p3 dual bound dominates every other max-min
/// method, scp is at least hover_fly, and hover_fly is at least fixed_point
/// whenever `T − T_fly ≥ T·E_fix/E_p3`, the horizon beyond which the
/// time-shared hovers alone already beat the fixed point.
pub fn ordering_violations(result: &BenchmarkResult) -> Vec<String> {
    let mut out = Vec::new();
    let energy = |m: Method, vi: usize| {
        result
            .cell(m, vi)
            .and_then(|c| c.report.as_ref())
            .map(|r| r.min_energy)
    };
    for vi in 0..result.values.len() {
        let Some(t) = result.cells.iter().find(|c| c.value_index == vi).map(|c| c.horizon_s) else {
            continue;
        };
        let slack = ORDER_SLACK_W * t;
        let mut check = |hi: &str, a: Option<f64>, lo: &str, b: Option<f64>| {
            if let (Some(a), Some(b)) = (a, b) {
                if a + slack < b {
                    out.push(format!(
                        "value #{vi}: {hi} ({a:.6e} J) below {lo} ({b:.6e} J)"
                    ));
                }
            }
        };
        let ub = result.cell(Method::P3, vi).and_then(|c| c.upper_bound);
        for m in [Method::Scp, Method::HoverFly, Method::FixedPoint, Method::HoverAllErs] {
            check("p3 bound", ub, m.name(), energy(m, vi));
        }
        check("scp", energy(Method::Scp, vi), "hover_fly", energy(Method::HoverFly, vi));
        let t_fly = result.cell(Method::HoverFly, vi).and_then(|c| c.t_fly);
        if let (Some(t_fly), Some(e3), Some(efix)) =
            (t_fly, energy(Method::P3, vi), energy(Method::FixedPoint, vi))
        {
            if e3 > 0.0 && t - t_fly >= t * efix / e3 {
                check(
                    "hover_fly",
                    energy(Method::HoverFly, vi),
                    "fixed_point",
                    Some(efix),
                );
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestCell {
    pub method: Method,
    pub value: f64,
    pub wall_time_s: f64,
    pub error: Option<String>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub variable: SweepVariable,
    pub files: Vec<ManifestFile>,
    pub cells: Vec<ManifestCell>,
}

/// Long-format CSV, one row per (cell, receiver).
pub fn sweep_csv(result: &BenchmarkResult) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for cell in &result.cells {
        let Some(report) = &cell.report else { continue };
        let min = report.min_avg_power();
        for (k, p) in report.avg_power.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                cell.method.name(),
                result.variable.name(),
                cell.value,
                k,
                p,
                min
            )
            .unwrap();
        }
    }
    out
}

pub const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Plots sweep.csv: min average power per method, and per-receiver power."""
import csv
import sys
from collections import defaultdict

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "sweep.csv"
rows = list(csv.DictReader(open(path)))
if not rows:
    sys.exit("empty sweep")
variable = rows[0]["variable"]

min_curve = defaultdict(dict)
per_er = defaultdict(lambda: defaultdict(dict))
for r in rows:
    v = float(r["value"])
    min_curve[r["method"]][v] = float(r["min_avg_power_w"])
    per_er[r["method"]][int(r["er_index"])][v] = float(r["avg_power_w"])

fig, ax = plt.subplots()
for method, pts in sorted(min_curve.items()):
    xs = sorted(pts)
    ax.plot(xs, [pts[x] * 1e3 for x in xs], marker="o", label=method)
ax.set_xlabel(variable)
ax.set_ylabel("min average power (mW)")
ax.legend()
fig.savefig("min_avg_power.png", dpi=150)

for method, ers in sorted(per_er.items()):
    fig, ax = plt.subplots()
    for k, pts in sorted(ers.items()):
        xs = sorted(pts)
        ax.plot(xs, [pts[x] * 1e3 for x in xs], label=f"ER {k + 1}")
    ax.set_xlabel(variable)
    ax.set_ylabel("average power (mW)")
    ax.set_title(method)
    ax.legend(fontsize="small")
    fig.savefig(f"per_er_{method}.png", dpi=150)
"#;

fn write_file(dir: &Path, rel: &str, bytes: &[u8], files: &mut Vec<ManifestFile>) -> Result<()> {
    let path = dir.join(rel);
    fs::write(&path, bytes).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    files.push(ManifestFile {
        path: rel.to_string(),
        sha256: format!("{:x}", Sha256::digest(bytes)),
        bytes: bytes.len() as u64,
    });
    Ok(())
}

fn mkdir(path: PathBuf) -> Result<()> {
    fs::create_dir_all(&path).map_err(|source| Error::Io { path, source })
}

/// Writes `sweep.csv`, `trajectories/*.json`, `plot_sweep.py` and
/// `manifest.json` into `dir`.
pub fn emit_outputs(result: &BenchmarkResult, dir: &Path) -> Result<Manifest> {
    mkdir(dir.to_path_buf())?;
    mkdir(dir.join("trajectories"))?;
    let mut files = Vec::new();
    write_file(dir, "sweep.csv", sweep_csv(result).as_bytes(), &mut files)?;
    for cell in &result.cells {
        let Some(traj) = &cell.trajectory else { continue };
        let rel = format!(
            "trajectories/{}_{}{:03}.json",
            cell.method.name(),
            result.variable.name(),
            cell.value_index
        );
        let json = serde_json::to_string_pretty(traj).expect("trajectories serialize");
        write_file(dir, &rel, json.as_bytes(), &mut files)?;
    }
    write_file(dir, "plot_sweep.py", PLOT_SCRIPT.as_bytes(), &mut files)?;

    let manifest = Manifest {
        version: crate::VERSION.to_string(),
        variable: result.variable,
        files,
        cells: result
            .cells
            .iter()
            .map(|c| ManifestCell {
                method: c.method,
                value: c.value,
                wall_time_s: c.wall_time_s,
                error: c.error.clone(),
                note: c.note.clone(),
            })
            .collect(),
    };
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json).map_err(|source| Error::Io { path, source })?;
    Ok(manifest)
}

/// Synthetic ten-receiver layout in four clusters of 2, 1, 3 and 4
/// receivers, with the default radio parameters.
pub fn clustered_10(max_speed: f64, horizon: f64) -> Result<Scenario> {
    let ers = [
        (0.0, 0.0),
        (2.5, 1.5),
        (24.0, 3.0),
        (6.0, 22.0),
        (9.0, 25.0),
        (5.0, 26.5),
        (28.0, 20.0),
        (31.0, 22.5),
        (29.0, 26.0),
        (32.5, 18.5),
    ]
    .iter()
    .map(|&(x, y)| Point::new(x, y))
    .collect();
    Scenario::with_defaults(ers, max_speed, horizon)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_scaling_hits_diameter() {
        let ers = vec![Point::new(-1.0, 0.0), Point::new(3.0, 0.0)];
        let out = scale_layout(&ers, 10.0).unwrap();
        assert!((out[0].x + 4.0).abs() < 1e-12 && (out[1].x - 6.0).abs() < 1e-12);
        assert!(scale_layout(&[Point::ORIGIN, Point::ORIGIN], 1.0).is_err());
    }

    #[test]
    fn method_names_match_serde() {
        for m in Method::ALL {
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.name()));
        }
    }

    #[test]
    fn spec_validation() {
        let base = Scenario::two_er(10.0, 5.0, 10.0).unwrap().to_file();
        let mut spec = SweepSpec {
            variable: SweepVariable::T,
            values: vec![1.0, 2.0],
            base,
            methods: vec![Method::P1],
            seed: 0,
            scp_slots: None,
            scp_max_iters: None,
        };
        assert!(spec.validate().is_ok());
        spec.values = vec![2.0, 2.0];
        assert!(spec.validate().is_err());
        spec.values = vec![1.0];
        spec.methods.clear();
        assert!(spec.validate().is_err());
    }

    #[test]
    fn clustered_layout_has_ten_receivers() {
        assert_eq!(clustered_10(5.0, 100.0).unwrap().num_ers(), 10);
    }
}
