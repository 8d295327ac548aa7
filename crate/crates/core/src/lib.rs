//! Driver-error injection over vehicle trajectories.
//!
//! Every vehicle in a scenario is, at every injection time and for every
//! configured deviation angle, turned into a "zombie": it keeps its speed,
//! heads straight along the deviated direction for the distraction time, and
//! is tested against the factual trajectories of everybody else plus the
//! static roadside geometry. The first contact becomes a [`CrashEvent`]
//! scored with inelastic-collision energy, and the events aggregate into the
//! weighted `Z<ΔT>-<deg>-<w>` indicators, statistics and danger maps.
//!
//! A small time-to-collision counter ([`ttc`]) is included as a conflict
//! baseline, and [`scenario_gen`] synthesizes the reference corridors and an
//! opposing-flow road.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod collision;
pub mod dynamics;
pub mod error;
pub mod geom;
pub mod indicators;
pub mod injection;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod scenario_gen;
pub mod ttc;

pub use error::{Error, Result};
pub use geom::Vec2;
pub use injection::{CrashEvent, Partner};
pub use model::{
    InjectionParams, KinematicState, Scenario, StaticGeometry, Trajectory, VehicleAttributes,
    VehicleClass, VehicleId,
};
