//! Trajectory optimization for a single UAV acting as a mobile wireless
//! power transmitter over a set of ground energy receivers.
//!
//! The crate covers the whole chain from the line-of-sight power model to
//! trajectory design:
//!
//! * [`model`] and [`trajectory`]: received power, trajectories and the
//!   energy they deliver (closed-form integration along straight legs).
//! * [`sum_energy`]: the single-location hover that maximizes total energy.
//! * [`minmax`]: max-min fair multi-location hovering without a speed limit,
//!   solved through the Lagrange dual with an ellipsoid method and a
//!   time-sharing linear program ([`lp`]).
//! * [`tsp`] and [`hover_fly`]: speed-feasible successive hover-and-fly
//!   trajectories.
//! * [`scp`]: successive convex refinement of a discretized trajectory.
//! * [`harness`]: parameter sweeps with CSV output.
//!
//! Data-parallel inner loops (grid searches, sweep cells) run on rayon when
//! the `parallel` feature is enabled; see [`par::Exec`].

pub mod error;
pub mod geometry;
pub mod harness;
pub mod hover_fly;
pub mod lp;
pub mod minmax;
pub mod model;
pub mod par;
pub mod quadrature;
pub mod scp;
pub mod search;
pub mod sum_energy;
pub mod trajectory;
pub mod tsp;

pub use error::{Error, Result};
pub use geometry::{BoundingBox, Point};
pub use model::{Scenario, ScenarioFile};
pub use trajectory::{DiscreteTrajectory, EnergyReport, Segment, Trajectory};

/// Crate version, embedded in emitted manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
