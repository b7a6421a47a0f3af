//! Poses, camera model, plane fitting, 2D hulls and oriented boxes.

mod camera;
mod hull;
mod obb;
mod plane;

pub use camera::{backproject, project, CameraModel, DepthImage};
pub use hull::{convex_hull, min_area_rect, polygon_area, simplify_to_quad, Polygon2D};
pub use obb::OrientedBox;
pub use plane::{fit_plane, fit_plane_robust, Plane};

use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector2, Vector3};

pub type Vec3 = Vector3<f64>;
pub type Vec2 = Vector2<f64>;
/// Rigid transform: unit-quaternion rotation plus translation.
pub type Pose = Isometry3<f64>;

pub fn pose_from_parts(translation: Vec3, rotation: UnitQuaternion<f64>) -> Pose {
    Pose::from_parts(Translation3::from(translation), rotation)
}

/// Wraps an angle to (-pi, pi]. An input of exactly -pi maps to +pi.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut w = a % (2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    } else if w <= -PI {
        w += 2.0 * PI;
    }
    w
}

/// Heading of the pose's local x axis projected onto the ground plane.
pub fn heading(pose: &Pose) -> f64 {
    let x = pose.rotation * Vec3::x();
    x.y.atan2(x.x)
}

/// Rotation about `axis_dir` (unit) through `axis_point` by `angle`.
pub fn rotation_about_line(axis_point: &Vec3, axis_dir: &Vec3, angle: f64) -> Pose {
    let rot = UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_unchecked(*axis_dir), angle);
    let t = axis_point - rot * axis_point;
    pose_from_parts(t, rot)
}

/// Distance from `p` to the infinite line through `point` along unit `dir`.
pub fn distance_to_line(p: &Vec3, point: &Vec3, dir: &Vec3) -> f64 {
    let d = p - point;
    (d - dir * d.dot(dir)).norm()
}
