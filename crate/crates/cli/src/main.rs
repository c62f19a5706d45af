//! `uavwpt`: command-line front end for the trajectory solvers.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use uavwpt::harness::{emit_outputs, ordering_violations, run_sweep, SweepSpec};
use uavwpt::hover_fly::build_hover_fly_seeded;
use uavwpt::minmax::{solve_p3_with, HoverSet, P3Options};
use uavwpt::scp::{default_slots, discretize, scp_optimize, DEFAULT_MAX_ITERS, DEFAULT_REL_TOL};
use uavwpt::search::default_grid_step;
use uavwpt::sum_energy::{psi_grid, solve_p1_with, P1Options};
use uavwpt::trajectory::{energy_along, energy_along_discrete};
use uavwpt::{DiscreteTrajectory, Error, Scenario, ScenarioFile, Trajectory};

#[derive(Parser, Debug)]
#[command(name = "uavwpt", version, about = "Trajectory optimization for UAV-enabled wireless power transfer")]
struct Cli {
    /// Seed for the path planner's random restarts (large hover sets only).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for data-parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// One of error, warn, info, debug, trace.
    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Best single hovering point for the total received energy.
    SumEnergy(SumEnergyArgs),
    /// Max-min hovering locations and times without a speed limit.
    MinmaxIdeal(MinmaxArgs),
    /// Speed-limited hover-and-fly trajectory.
    HoverFly(HoverFlyArgs),
    /// Refine a trajectory by successive convex programming.
    Scp(ScpArgs),
    /// Energy delivered along a trajectory.
    Eval(EvalArgs),
    /// Run a parameter sweep and write CSV, trajectories and a manifest.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct ScenarioArg {
    /// Scenario JSON (positions in m, power in dBm, gain in dB).
    #[arg(long)]
    scenario: PathBuf,
}

#[derive(Args, Debug)]
struct SumEnergyArgs {
    #[command(flatten)]
    scenario: ScenarioArg,
    /// Search grid pitch in meters.
    #[arg(long)]
    grid_step: Option<f64>,
    /// Solution JSON (standard output if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the sum power over the box as `x,y,psi_w` CSV.
    #[arg(long)]
    psi_csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MinmaxArgs {
    #[command(flatten)]
    scenario: ScenarioArg,
    /// Relative accuracy of the dual minimization.
    #[arg(long, default_value_t = uavwpt::minmax::DEFAULT_TOL)]
    tol: f64,
    /// Solution JSON (standard output if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write per-receiver energies as CSV.
    #[arg(long)]
    energies_csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct HoverFlyArgs {
    #[command(flatten)]
    scenario: ScenarioArg,
    /// Hover set JSON (as in the `hover_set` field of `minmax-ideal`
    /// output); solved from the scenario if omitted.
    #[arg(long)]
    hover_set: Option<PathBuf>,
    /// Trajectory JSON (standard output if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the full solution (durations, regime, energies).
    #[arg(long)]
    solution: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ScpArgs {
    #[command(flatten)]
    scenario: ScenarioArg,
    /// Initial trajectory JSON.
    #[arg(long)]
    init: PathBuf,
    /// Refined trajectory JSON (standard output if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of time slots.
    #[arg(long)]
    slots: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    max_iters: usize,
    #[arg(long, default_value_t = DEFAULT_REL_TOL)]
    rel_tol: f64,
    /// Per-iteration objective as `iteration,min_energy_j` CSV.
    #[arg(long)]
    history_csv: Option<PathBuf>,
    /// Also write the refined slot positions.
    #[arg(long)]
    discrete_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    scenario: ScenarioArg,
    /// Trajectory JSON.
    #[arg(long)]
    trajectory: PathBuf,
    /// Read the trajectory as slot positions (`points`, `slot_duration`).
    #[arg(long)]
    discrete: bool,
    /// Energy report JSON (standard output if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Sweep specification JSON.
    #[arg(long)]
    spec: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn load_scenario(arg: &ScenarioArg) -> Result<Scenario, Error> {
    read_json::<ScenarioFile>(&arg.scenario)?.into_scenario()
}

fn write_text(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|source| Error::Io {
            path: p.to_path_buf(),
            source,
        })?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value).context("serializing output")?;
    text.push('\n');
    write_text(path, &text)
}

fn sum_energy(args: &SumEnergyArgs) -> anyhow::Result<()> {
    let scn = load_scenario(&args.scenario)?;
    let opts = P1Options {
        grid_step: args.grid_step,
        ..Default::default()
    };
    let sol = solve_p1_with(&scn, &opts)?;
    write_json(args.out.as_deref(), &sol)?;
    if let Some(path) = &args.psi_csv {
        let step = (scn.bounding_box().diagonal() / 200.0).max(default_grid_step(&scn.bounding_box()));
        let mut csv = String::from("x,y,psi_w\n");
        for (p, v) in psi_grid(&scn, step, Default::default())? {
            csv.push_str(&format!("{},{},{}\n", p.x, p.y, v));
        }
        write_text(Some(path), &csv)?;
    }
    Ok(())
}

fn minmax(args: &MinmaxArgs) -> anyhow::Result<()> {
    let scn = load_scenario(&args.scenario)?;
    let opts = P3Options {
        tol: args.tol,
        ..Default::default()
    };
    let sol = solve_p3_with(&scn, &opts)?;
    write_json(args.out.as_deref(), &sol)?;
    if let Some(path) = &args.energies_csv {
        let mut csv = String::from("er_index,energy_j,avg_power_w\n");
        for (k, (e, p)) in sol
            .report
            .per_er_energy
            .iter()
            .zip(&sol.report.avg_power)
            .enumerate()
        {
            csv.push_str(&format!("{k},{e},{p}\n"));
        }
        write_text(Some(path), &csv)?;
    }
    Ok(())
}

fn hover_fly(args: &HoverFlyArgs, seed: u64) -> anyhow::Result<()> {
    let scn = load_scenario(&args.scenario)?;
    let locations = match &args.hover_set {
        Some(path) => read_json::<HoverSet>(path)?.locations,
        None => solve_p3_with(&scn, &P3Options::default())?.hover_set.locations,
    };
    let sol = build_hover_fly_seeded(&scn, &locations, seed)?;
    if sol.flagged {
        log::warn!("fallback taken: single hover at {:?}", sol.locations[0]);
    }
    write_json(args.out.as_deref(), &sol.trajectory)?;
    if let Some(path) = &args.solution {
        write_json(Some(path), &sol)?;
    }
    Ok(())
}

fn scp(args: &ScpArgs) -> anyhow::Result<()> {
    let scn = load_scenario(&args.scenario)?;
    let init: Trajectory = read_json(&args.init)?;
    init.validate(scn.max_speed())?;
    let slots = args.slots.unwrap_or_else(|| default_slots(&scn));
    let dt = discretize(&init, slots)?;
    let st = scp_optimize(&scn, &dt, args.max_iters, args.rel_tol)?;
    log::info!(
        "scp: {} iterations, min energy {:.6e} -> {:.6e} J",
        st.iteration,
        st.history[0],
        st.objective
    );
    write_json(args.out.as_deref(), &st.iterate.to_polyline())?;
    if let Some(path) = &args.history_csv {
        let mut csv = String::from("iteration,min_energy_j\n");
        for (i, v) in st.history.iter().enumerate() {
            csv.push_str(&format!("{i},{v}\n"));
        }
        write_text(Some(path), &csv)?;
    }
    if let Some(path) = &args.discrete_out {
        write_json(Some(path), &st.iterate)?;
    }
    Ok(())
}

fn eval(args: &EvalArgs) -> anyhow::Result<()> {
    let scn = load_scenario(&args.scenario)?;
    let report = if args.discrete {
        let dt: DiscreteTrajectory = read_json(&args.trajectory)?;
        energy_along_discrete(&scn, &dt)?
    } else {
        let traj: Trajectory = read_json(&args.trajectory)?;
        energy_along(&scn, &traj)?
    };
    write_json(args.out.as_deref(), &report)
}

fn sweep(args: &SweepArgs, seed: Option<u64>) -> anyhow::Result<()> {
    let mut spec = SweepSpec::load(&args.spec)?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    let result = run_sweep(&spec)?;
    for v in ordering_violations(&result) {
        log::warn!("ordering check: {v}");
    }
    let manifest = emit_outputs(&result, &args.out)?;
    let failed = manifest.cells.iter().filter(|c| c.error.is_some()).count();
    eprintln!(
        "wrote {} files to {} ({} of {} cells failed)",
        manifest.files.len() + 1,
        args.out.display(),
        failed,
        manifest.cells.len()
    );
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    #[cfg(feature = "parallel")]
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    #[cfg(not(feature = "parallel"))]
    if cli.threads.is_some() {
        log::warn!("--threads ignored: built without the parallel feature");
    }
    let seed = cli.seed.unwrap_or(uavwpt::tsp::DEFAULT_SEED);
    match &cli.command {
        Command::SumEnergy(a) => sum_energy(a),
        Command::MinmaxIdeal(a) => minmax(a),
        Command::HoverFly(a) => hover_fly(a, seed),
        Command::Scp(a) => scp(a),
        Command::Eval(a) => eval(a),
        Command::Sweep(a) => sweep(a, cli.seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(cli.log_level)
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            // our own errors already embed their source in the message
            let user = match err.downcast_ref::<Error>() {
                Some(e) => {
                    eprintln!("error: {e}");
                    e.is_user_error()
                }
                None => {
                    eprintln!("error: {err:#}");
                    false
                }
            };
            ExitCode::from(if user { 2 } else { 1 })
        }
    }
}
