//! Opening articulated objects with a low-DOF mobile manipulator.
//!
//! The crate lifts 2D detections (mask, handle pixel, articulation type)
//! into 3D articulation parameters, synthesizes end-effector waypoints for
//! drawers and hinged doors, decodes them into whole-body motion plans with
//! a warm-started sequential IK, mines base placements, and simulates
//! execution with contact correction and grasp slip.

pub mod app;
pub mod articulation;
pub mod canonical;
pub mod error;
pub mod execution;
pub mod geometry;
pub mod io;
pub mod perception;
pub mod placement;
pub mod planner;
pub mod robot;
pub mod scenario;
pub mod scene;
pub mod synth;

pub use error::{Error, Result};
