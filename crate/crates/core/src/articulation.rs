//! Articulation parameters, true-handle kinematics and waypoint synthesis.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix3, Rotation3, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{pose_from_parts, rotation_about_line, Pose, Vec3};

/// Full travel of a drawer, meters.
pub const DRAWER_FULL_OPEN: f64 = 0.35;
/// Full swing of a hinged door, radians.
pub const HINGE_FULL_OPEN: f64 = FRAC_PI_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArticulationType {
    Drawer,
    CabinetLeftHinge,
    CabinetRightHinge,
    /// Ovens and other doors hinged along their bottom edge.
    BottomHinge,
}

impl ArticulationType {
    pub fn is_hinged(self) -> bool {
        !matches!(self, ArticulationType::Drawer)
    }

    pub fn default_target(self) -> f64 {
        if self.is_hinged() {
            HINGE_FULL_OPEN
        } else {
            DRAWER_FULL_OPEN
        }
    }

    pub fn mirrored(self) -> Self {
        match self {
            ArticulationType::CabinetLeftHinge => ArticulationType::CabinetRightHinge,
            ArticulationType::CabinetRightHinge => ArticulationType::CabinetLeftHinge,
            other => other,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ArticulationType::Drawer => "drawer",
            ArticulationType::CabinetLeftHinge => "cabinet_left_hinge",
            ArticulationType::CabinetRightHinge => "cabinet_right_hinge",
            ArticulationType::BottomHinge => "bottom_hinge",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HandleOrientation {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HingeAxis {
    pub point: Vec3,
    /// Unit direction.
    pub direction: Vec3,
}

/// How an object opens, expressed in the robot base frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ArticulationParams {
    pub atype: ArticulationType,
    pub handle: Vec3,
    /// Unit face normal pointing toward the robot.
    pub normal: Vec3,
    pub handle_orientation: HandleOrientation,
    /// Present iff hinged.
    pub hinge_axis: Option<HingeAxis>,
    /// Present iff hinged.
    pub radius: Option<f64>,
}

/// Upward unit vector of the base frame.
pub fn up() -> Vec3 {
    Vec3::z()
}

impl ArticulationParams {
    pub fn drawer(handle: Vec3, normal: Vec3, orientation: HandleOrientation) -> Self {
        Self {
            atype: ArticulationType::Drawer,
            handle,
            normal: normal.normalize(),
            handle_orientation: orientation,
            hinge_axis: None,
            radius: None,
        }
    }

    /// Hinged object whose radius is the handle's distance to the axis.
    pub fn hinged(atype: ArticulationType, handle: Vec3, normal: Vec3, orientation: HandleOrientation, axis: HingeAxis) -> Self {
        let direction = axis.direction.normalize();
        let radius = crate::geometry::distance_to_line(&handle, &axis.point, &direction);
        Self {
            atype,
            handle,
            normal: normal.normalize(),
            handle_orientation: orientation,
            hinge_axis: Some(HingeAxis { point: axis.point, direction }),
            radius: Some(radius),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if (self.normal.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::DegenerateInput("normal must be a unit vector".into()));
        }
        if self.atype.is_hinged() {
            let (axis, radius) = self.axis_and_radius()?;
            if (axis.direction.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::DegenerateInput("hinge direction must be a unit vector".into()));
            }
            if !(radius > 0.0) {
                return Err(Error::DegenerateInput(format!("radius must be positive, got {radius}")));
            }
        }
        Ok(())
    }

    pub fn axis_and_radius(&self) -> Result<(HingeAxis, f64)> {
        match (self.hinge_axis, self.radius) {
            (Some(a), Some(r)) => Ok((a, r)),
            _ => Err(Error::MissingAxis),
        }
    }

    /// Sign of the rotation about the hinge axis that swings the handle
    /// toward the robot.
    pub fn swing_sign(&self) -> Result<f64> {
        let (axis, _) = self.axis_and_radius()?;
        let tangent = axis.direction.cross(&(self.handle - axis.point));
        Ok(if tangent.dot(&self.normal) >= 0.0 { 1.0 } else { -1.0 })
    }

    /// Rigid motion carrying the closed moving part to `opening`.
    pub fn opening_transform(&self, opening: f64) -> Result<Pose> {
        if self.atype.is_hinged() {
            let (axis, _) = self.axis_and_radius()?;
            let sign = self.swing_sign()?;
            Ok(rotation_about_line(&axis.point, &axis.direction, sign * opening))
        } else {
            Ok(pose_from_parts(self.normal * opening, UnitQuaternion::identity()))
        }
    }

    /// Gripper orientation at the closed state: local x is the approach
    /// direction (into the face), local y the finger-closing axis (across
    /// the handle).
    pub fn grasp_orientation(&self) -> UnitQuaternion<f64> {
        let x = -self.normal;
        let mut y = match self.handle_orientation {
            HandleOrientation::Horizontal => up() - x * up().dot(&x),
            HandleOrientation::Vertical => up().cross(&x),
        };
        if y.norm() < 1e-9 {
            y = Vec3::x() - x * x.x;
        }
        let y = y.normalize();
        let z = x.cross(&y);
        let m = Matrix3::from_columns(&[x, y, z]);
        UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m))
    }

    /// The same object with a different radius: the axis moves along the
    /// handle-to-axis perpendicular, everything else is unchanged.
    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        let (axis, _) = self.axis_and_radius()?;
        let d = self.handle - axis.point;
        let foot = axis.point + axis.direction * d.dot(&axis.direction);
        let toward_axis = (foot - self.handle).normalize();
        let mut out = self.clone();
        out.hinge_axis = Some(HingeAxis { point: self.handle + toward_axis * radius, direction: axis.direction });
        out.radius = Some(radius);
        Ok(out)
    }

    /// Applies a rigid transform to every geometric quantity.
    pub fn transformed(&self, pose: &Pose) -> Self {
        let p = |v: &Vec3| (pose * nalgebra::Point3::from(*v)).coords;
        let r = |v: &Vec3| pose.rotation * v;
        Self {
            atype: self.atype,
            handle: p(&self.handle),
            normal: r(&self.normal),
            handle_orientation: self.handle_orientation,
            hinge_axis: self.hinge_axis.map(|a| HingeAxis { point: p(&a.point), direction: r(&a.direction) }),
            radius: self.radius,
        }
    }

    /// Reflection across the y = 0 plane; left and right hinges swap.
    pub fn mirrored_y(&self) -> Self {
        let m = |v: &Vec3| Vec3::new(v.x, -v.y, v.z);
        Self {
            atype: self.atype.mirrored(),
            handle: m(&self.handle),
            normal: m(&self.normal),
            handle_orientation: self.handle_orientation,
            hinge_axis: self.hinge_axis.map(|a| HingeAxis { point: m(&a.point), direction: m(&a.direction) }),
            radius: self.radius,
        }
    }
}

/// Handle position of the object at `opening` (meters for drawers, radians
/// for hinged types).
pub fn handle_at(params: &ArticulationParams, opening: f64) -> Result<Vec3> {
    let t = params.opening_transform(opening)?;
    Ok((t * nalgebra::Point3::from(params.handle)).coords)
}

/// Desired end-effector poses along the object's opening path.
#[derive(Debug, Clone, PartialEq)]
pub struct WaypointTrajectory {
    pub poses: Vec<Pose>,
    /// Opening value each pose corresponds to, starting at 0.
    pub openings: Vec<f64>,
}

impl WaypointTrajectory {
    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// Left-multiplies every pose by `delta`.
    pub fn transformed(&self, delta: &Pose) -> Self {
        Self { poses: self.poses.iter().map(|p| delta * p).collect(), openings: self.openings.clone() }
    }
}

pub const DEFAULT_WAYPOINTS: usize = 10;

pub fn generate_waypoints(params: &ArticulationParams, n: usize, target: f64) -> Result<WaypointTrajectory> {
    if n < 2 {
        return Err(Error::BadCount(n));
    }
    if !(target > 0.0) {
        return Err(Error::DegenerateInput(format!("opening target must be positive, got {target}")));
    }
    if params.atype.is_hinged() {
        params.axis_and_radius()?;
    }
    let grasp = pose_from_parts(params.handle, params.grasp_orientation());
    let mut poses = Vec::with_capacity(n);
    let mut openings = Vec::with_capacity(n);
    for i in 0..n {
        let o = target * i as f64 / (n - 1) as f64;
        poses.push(params.opening_transform(o)? * grasp);
        openings.push(o);
    }
    Ok(WaypointTrajectory { poses, openings })
}
