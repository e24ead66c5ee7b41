//! Multi-camera aerial cinematography planning.
//!
//! Cameras move on an actor-centred spherical viewpoint lattice. A greedy
//! planner assigns each camera, in turn, the minimum-cost lattice path given
//! the cameras already planned; each path is then smoothed into a dense
//! trajectory, and a selector picks which camera's stream is live.
//!
//! The modules follow the data flow: [`lattice`] and [`world`] describe the
//! geometry, [`costmodel`] scores lattice states, [`planner`] searches paths,
//! [`smoother`] refines them, [`selector`] switches streams, and [`harness`]
//! runs the receding-horizon loop over a [`scenario`].

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod costmodel;
pub mod error;
pub mod harness;
pub mod lattice;
pub mod planner;
pub mod scenario;
pub mod selector;
pub mod smoother;
pub mod world;

pub use error::{Error, Result};
pub use harness::{benchmark, run_scenario, BenchSweep, RunReport};
pub use lattice::{ActorPose, Lattice, LatticeSpec, Vec3};
pub use planner::{plan_exhaustive, plan_greedy, PlanContext, PlanResult};
pub use scenario::Scenario;
