//! Self-contained 2D robot-navigation workbench.
//!
//! The crate simulates a differential-drive robot with a planar LiDAR in
//! polygonal worlds, trains navigation policies with soft actor-critic under
//! a composite reward (goal progress, a penalty on the rate of change of the
//! LiDAR scan, and a curriculum-gated speed bonus), and evaluates trained
//! policies with benchmark-style traversal-time scoring.
//!
//! Module map:
//!
//! - [`geom`]: points, polygons, ray intersections.
//! - [`world`]: maps, kinematics, moving obstacles, collision, raycast LiDAR.
//! - [`sensing`]: min-pool downsampling, scan change rate, reciprocal
//!   inverse-perception transform, observation assembly.
//! - [`reward`]: reward components and the curriculum schedule.
//! - [`nn`]: small fully-connected networks with exact reverse-mode
//!   gradients and an Adam optimizer.
//! - [`sac`]: squashed-Gaussian policy, twin critics, replay buffer, and the
//!   training loop.
//! - [`eval`]: episode rollouts, traversal-time scoring, grid shortest
//!   paths, procedural map generation, and change-rate comparisons.
//! - [`config`]: the run configuration schema (sectioned `key = value` text).
//! - [`checkpoint`]: versioned binary parameter snapshots.
//! - [`rng`]: a master seed fanned out into named deterministic substreams.

pub mod checkpoint;
pub mod config;
pub mod eval;
pub mod geom;
pub mod nn;
pub mod reward;
pub mod rng;
pub mod sac;
pub mod sensing;
pub mod world;

pub use config::RunConfig;
pub use geom::{Pose2, Rect, Vec2};
