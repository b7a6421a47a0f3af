//! Canonical synthetic objects used by the experiments and tests. Every
//! object faces the robot along -x with its handle above the base-frame
//! origin.

use crate::articulation::{ArticulationParams, ArticulationType, HandleOrientation, HingeAxis};
use crate::geometry::{OrientedBox, Vec3};
use crate::scene::{ObjectGeometry, Scene};

pub const FACE_NORMAL: Vec3 = Vec3::new(-1.0, 0.0, 0.0);

pub fn drawer(handle_height: f64) -> ArticulationParams {
    ArticulationParams::drawer(Vec3::new(0.0, 0.0, handle_height), FACE_NORMAL, HandleOrientation::Horizontal)
}

/// Vertical-hinge cabinet with its hinge on the robot's right (-y) or left.
pub fn cabinet(atype: ArticulationType, handle_height: f64, radius: f64) -> ArticulationParams {
    let side = match atype {
        ArticulationType::CabinetRightHinge => -1.0,
        ArticulationType::CabinetLeftHinge => 1.0,
        _ => panic!("cabinet() needs a vertical-hinge type"),
    };
    ArticulationParams::hinged(
        atype,
        Vec3::new(0.0, 0.0, handle_height),
        FACE_NORMAL,
        HandleOrientation::Vertical,
        HingeAxis { point: Vec3::new(0.0, side * radius, 0.0), direction: Vec3::z() },
    )
}

pub fn right_cabinet(handle_height: f64, radius: f64) -> ArticulationParams {
    cabinet(ArticulationType::CabinetRightHinge, handle_height, radius)
}

pub fn left_cabinet(handle_height: f64, radius: f64) -> ArticulationParams {
    cabinet(ArticulationType::CabinetLeftHinge, handle_height, radius)
}

/// Toaster oven on a counter: door hinged along its bottom edge.
pub fn oven() -> ArticulationParams {
    ArticulationParams::hinged(
        ArticulationType::BottomHinge,
        Vec3::new(0.0, 0.0, 0.98),
        FACE_NORMAL,
        HandleOrientation::Horizontal,
        HingeAxis { point: Vec3::new(0.0, 0.0, 0.78), direction: Vec3::y() },
    )
}

pub const CANONICAL_HANDLE_HEIGHT: f64 = 0.8;
pub const CANONICAL_RADIUS: f64 = 0.4;

/// Collision scene with the default face geometry and no extra obstacles.
pub fn scene(params: &ArticulationParams) -> Scene {
    Scene::for_object(params, &ObjectGeometry::default_for(params), Vec::<OrientedBox>::new())
}
