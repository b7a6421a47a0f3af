//! Kinematic and collision model of a Stretch-like mobile manipulator: a
//! differential base that may only rotate while manipulating, a vertical
//! lift, a horizontal telescoping arm pointing out of the base's side, and a
//! yaw (optionally pitch) wrist carrying a parallel gripper.
//!
//! Base frame: x forward, y left, z up. The arm extends along the base's
//! lateral axis (`ArmSide::Right` is -y). Wrist yaw 0 points the gripper
//! along the arm; positive wrist pitch tilts the approach axis downward.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, SMatrix, UnitQuaternion, Vector4};
use serde::{Deserialize, Serialize};

use crate::articulation::ArticulationType;
use crate::error::{Error, Result};
use crate::geometry::{pose_from_parts, OrientedBox, Pose, Vec2, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gripper {
    Open,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmSide {
    Right,
    Left,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotConfig {
    pub base_xy: Vec2,
    pub base_yaw: f64,
    pub lift: f64,
    pub arm_ext: f64,
    pub wrist_yaw: f64,
    pub wrist_pitch: f64,
    pub gripper: Gripper,
}

/// Indices into the active-joint vector used by the IK and Jacobian.
pub mod joint {
    pub const BASE_YAW: usize = 0;
    pub const LIFT: usize = 1;
    pub const ARM_EXT: usize = 2;
    pub const WRIST_YAW: usize = 3;
    pub const WRIST_PITCH: usize = 4;
    pub const NAMES: [&str; 5] = ["base_yaw", "lift", "arm_ext", "wrist_yaw", "wrist_pitch"];
}

impl RobotConfig {
    pub fn joints(&self) -> [f64; 5] {
        [self.base_yaw, self.lift, self.arm_ext, self.wrist_yaw, self.wrist_pitch]
    }

    pub fn with_joints(&self, q: &[f64; 5]) -> Self {
        Self {
            base_yaw: q[0],
            lift: q[1],
            arm_ext: q[2],
            wrist_yaw: q[3],
            wrist_pitch: q[4],
            ..*self
        }
    }

    pub fn with_gripper(&self, gripper: Gripper) -> Self {
        Self { gripper, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointLimits {
    pub lift: [f64; 2],
    pub arm_ext: [f64; 2],
    pub wrist_yaw: [f64; 2],
    pub wrist_pitch: [f64; 2],
}

impl Default for JointLimits {
    fn default() -> Self {
        Self {
            lift: [0.10, 1.10],
            arm_ext: [0.0, 0.45],
            wrist_yaw: [-1.75, 2.5],
            wrist_pitch: [0.0, FRAC_PI_2],
        }
    }
}

impl JointLimits {
    /// Bounds per active joint; base yaw is unbounded.
    pub fn bounds(&self) -> [[f64; 2]; 5] {
        [[f64::NEG_INFINITY, f64::INFINITY], self.lift, self.arm_ext, self.wrist_yaw, self.wrist_pitch]
    }

    pub fn validate(&self) -> Result<()> {
        for (b, name) in self.bounds().iter().zip(joint::NAMES).skip(1) {
            if !(b[0] < b[1]) {
                return Err(Error::Schema(format!("joint limits for {name} must satisfy lo < hi")));
            }
        }
        Ok(())
    }
}

/// Link geometry used for collision checking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkDims {
    /// Chassis half extents (x, y) and full height.
    pub chassis_half: [f64; 2],
    pub chassis_height: f64,
    /// Mast half extents (x, y) and top height.
    pub mast_half: [f64; 2],
    pub mast_top: f64,
    /// Arm cross-section half width (horizontal) and half height.
    pub arm_half: [f64; 2],
    /// Gripper cross-section half width and half height.
    pub gripper_half: [f64; 2],
    /// Length of bare fingers at the tip that is left out of the gripper box.
    pub finger_clearance: f64,
}

impl Default for LinkDims {
    fn default() -> Self {
        Self {
            chassis_half: [0.17, 0.165],
            chassis_height: 0.18,
            mast_half: [0.05, 0.06],
            mast_top: 1.30,
            arm_half: [0.035, 0.03],
            gripper_half: [0.04, 0.035],
            finger_clearance: 0.03,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinematicModel {
    /// Mast position in the base frame (z ignored).
    pub mast_offset: [f64; 2],
    pub arm_side: ArmSide,
    /// Mast-to-wrist distance with the arm fully retracted.
    pub arm_retracted: f64,
    /// Height of the grasp point above the lift joint value.
    pub tip_height: f64,
    /// Wrist-axis to grasp-point length with the gripper open.
    pub fingertip_length: f64,
    /// Reduction in reach when the gripper closes.
    pub closure_shrink: f64,
    pub wrist_pitch_enabled: bool,
    pub limits: JointLimits,
    pub links: LinkDims,
}

impl Default for KinematicModel {
    fn default() -> Self {
        Self {
            mast_offset: [-0.07, 0.07],
            arm_side: ArmSide::Right,
            arm_retracted: 0.2,
            tip_height: 0.07,
            fingertip_length: 0.22,
            closure_shrink: 0.02,
            wrist_pitch_enabled: false,
            limits: JointLimits::default(),
            links: LinkDims::default(),
        }
    }
}

/// Which task-space quantities the IK drives to their targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualMode {
    /// Grasp-point position plus approach heading (4 rows).
    PositionYaw,
    /// Grasp-point position only (3 rows).
    Position,
}

impl ResidualMode {
    pub fn dim(self) -> usize {
        match self {
            ResidualMode::PositionYaw => 4,
            ResidualMode::Position => 3,
        }
    }
}

/// Order of the boxes returned by [`link_shapes`].
pub const LINK_NAMES: [&str; 4] = ["chassis", "mast", "arm", "gripper"];
pub const GRIPPER_LINK: usize = 3;

struct Frames {
    mast: Vec2,
    arm_dir: Vec2,
    wrist: Vec3,
    heading: f64,
    approach: Vec3,
    tip: Vec3,
    reach: f64,
}

impl KinematicModel {
    pub fn validate(&self) -> Result<()> {
        self.limits.validate()?;
        if !(self.fingertip_length > self.closure_shrink && self.closure_shrink > 0.0) {
            return Err(Error::Schema("need fingertip_length > closure_shrink > 0".into()));
        }
        if !(self.arm_retracted > 0.0) {
            return Err(Error::Schema("arm_retracted must be positive".into()));
        }
        Ok(())
    }

    fn side_angle(&self) -> f64 {
        match self.arm_side {
            ArmSide::Right => -FRAC_PI_2,
            ArmSide::Left => FRAC_PI_2,
        }
    }

    /// Active joints: base yaw, lift, arm extension, wrist yaw, and wrist
    /// pitch when enabled.
    pub fn active_joints(&self) -> usize {
        if self.wrist_pitch_enabled {
            5
        } else {
            4
        }
    }

    /// Documented neutral arm: mid-range lift, retracted arm, zero wrist.
    pub fn neutral(&self, base_xy: Vec2, base_yaw: f64) -> RobotConfig {
        RobotConfig {
            base_xy,
            base_yaw,
            lift: 0.5 * (self.limits.lift[0] + self.limits.lift[1]),
            arm_ext: self.limits.arm_ext[0],
            wrist_yaw: 0.0,
            wrist_pitch: 0.0,
            gripper: Gripper::Open,
        }
    }

    /// Highest reachable grasp point.
    pub fn max_tip_height(&self) -> f64 {
        let pitch_lo = if self.wrist_pitch_enabled { self.limits.wrist_pitch[0] } else { 0.0 };
        self.limits.lift[1] + self.tip_height + self.fingertip_length * (-pitch_lo.sin()).max(0.0)
    }

    /// Upper bound on the horizontal distance from the base origin to the
    /// grasp point.
    pub fn max_horizontal_reach(&self) -> f64 {
        Vec2::from(self.mast_offset).norm() + self.arm_retracted + self.limits.arm_ext[1] + self.fingertip_length
    }

    /// Model used to plan for `atype`: bottom-hinged doors swing the handle
    /// through a vertical arc, so they unlock wrist pitch.
    pub fn for_articulation(&self, atype: ArticulationType) -> Self {
        Self { wrist_pitch_enabled: self.wrist_pitch_enabled || atype == ArticulationType::BottomHinge, ..self.clone() }
    }

    /// Same robot reflected across the base x-z plane.
    pub fn mirrored(&self) -> Self {
        let mut m = self.clone();
        m.mast_offset[1] = -m.mast_offset[1];
        m.arm_side = match self.arm_side {
            ArmSide::Right => ArmSide::Left,
            ArmSide::Left => ArmSide::Right,
        };
        m.limits.wrist_yaw = [-self.limits.wrist_yaw[1], -self.limits.wrist_yaw[0]];
        m
    }

    pub fn check_limits(&self, c: &RobotConfig) -> Result<()> {
        let q = c.joints();
        for (i, b) in self.limits.bounds().iter().enumerate().skip(1) {
            if i == joint::WRIST_PITCH && !self.wrist_pitch_enabled {
                if q[i] != 0.0 {
                    return Err(Error::LimitViolation { joint: joint::NAMES[i], value: q[i], lo: 0.0, hi: 0.0 });
                }
                continue;
            }
            if !(q[i] >= b[0] - 1e-12 && q[i] <= b[1] + 1e-12) {
                return Err(Error::LimitViolation { joint: joint::NAMES[i], value: q[i], lo: b[0], hi: b[1] });
            }
        }
        if !q[0].is_finite() {
            return Err(Error::LimitViolation { joint: "base_yaw", value: q[0], lo: f64::NEG_INFINITY, hi: f64::INFINITY });
        }
        Ok(())
    }

    fn frames(&self, c: &RobotConfig) -> Frames {
        let (s, co) = c.base_yaw.sin_cos();
        let rot = |v: Vec2| Vec2::new(co * v.x - s * v.y, s * v.x + co * v.y);
        let mast = c.base_xy + rot(Vec2::from(self.mast_offset));
        let side = self.side_angle() + c.base_yaw;
        let arm_dir = Vec2::new(side.cos(), side.sin());
        let wrist_xy = mast + arm_dir * (self.arm_retracted + c.arm_ext);
        let z = c.lift + self.tip_height;
        let wrist = Vec3::new(wrist_xy.x, wrist_xy.y, z);
        let heading = side + c.wrist_yaw;
        let (sp, cp) = c.wrist_pitch.sin_cos();
        let approach = Vec3::new(cp * heading.cos(), cp * heading.sin(), -sp);
        let reach = match c.gripper {
            Gripper::Open => self.fingertip_length,
            Gripper::Closed => self.fingertip_length - self.closure_shrink,
        };
        Frames { mast, arm_dir, wrist, heading, approach, tip: wrist + approach * reach, reach }
    }

    fn gripper_rotation(heading: f64, pitch: f64) -> UnitQuaternion<f64> {
        UnitQuaternion::from_axis_angle(&Vec3::z_axis(), heading) * UnitQuaternion::from_axis_angle(&Vec3::y_axis(), pitch)
    }

    /// Grasp-frame pose without the limit check.
    pub fn fk_unchecked(&self, c: &RobotConfig) -> Pose {
        let f = self.frames(c);
        pose_from_parts(f.tip, Self::gripper_rotation(f.heading, c.wrist_pitch))
    }

    /// Grasp-point position and approach heading without the limit check.
    pub fn tip_and_heading(&self, c: &RobotConfig) -> (Vec3, f64) {
        let f = self.frames(c);
        (f.tip, f.heading)
    }

    /// Analytic 4x5 Jacobian of (grasp position, heading) with respect to
    /// (base yaw, lift, arm ext, wrist yaw, wrist pitch).
    pub fn jacobian_full(&self, c: &RobotConfig) -> SMatrix<f64, 4, 5> {
        let f = self.frames(c);
        let mut j = SMatrix::<f64, 4, 5>::zeros();
        // Base yaw: everything rotates about the vertical through base_xy.
        let lever = Vec2::new(f.tip.x - c.base_xy.x, f.tip.y - c.base_xy.y);
        j[(0, 0)] = -lever.y;
        j[(1, 0)] = lever.x;
        j[(3, 0)] = 1.0;
        j[(2, 1)] = 1.0;
        j[(0, 2)] = f.arm_dir.x;
        j[(1, 2)] = f.arm_dir.y;
        let horiz = f.reach * c.wrist_pitch.cos();
        j[(0, 3)] = -horiz * f.heading.sin();
        j[(1, 3)] = horiz * f.heading.cos();
        j[(3, 3)] = 1.0;
        let sp = c.wrist_pitch.sin();
        j[(0, 4)] = -f.reach * sp * f.heading.cos();
        j[(1, 4)] = -f.reach * sp * f.heading.sin();
        j[(2, 4)] = -f.reach * c.wrist_pitch.cos();
        j
    }

    /// Residual rows and active-joint columns of the analytic Jacobian.
    pub fn active_jacobian(&self, c: &RobotConfig, mode: ResidualMode) -> SMatrix<f64, 4, 5> {
        let mut j = self.jacobian_full(c);
        if mode == ResidualMode::Position {
            j.row_mut(3).fill(0.0);
        }
        if !self.wrist_pitch_enabled {
            j.column_mut(joint::WRIST_PITCH).fill(0.0);
        }
        j
    }

    /// Task-space vector (grasp position, heading) as a 4-vector.
    pub fn task_vector(&self, c: &RobotConfig) -> Vector4<f64> {
        let (t, h) = self.tip_and_heading(c);
        Vector4::new(t.x, t.y, t.z, h)
    }
}

/// Grasp-frame pose in base-frame coordinates.
pub fn fk(config: &RobotConfig, model: &KinematicModel) -> Result<Pose> {
    model.check_limits(config)?;
    Ok(model.fk_unchecked(config))
}

/// Jacobian of the IK residual (rows: x, y, z[, heading]) with respect to
/// the active joints (columns: base yaw, lift, arm ext, wrist yaw[, pitch]).
pub fn jacobian(config: &RobotConfig, model: &KinematicModel, mode: ResidualMode) -> Result<DMatrix<f64>> {
    model.check_limits(config)?;
    let j = model.jacobian_full(config);
    let rows = mode.dim();
    let cols = model.active_joints();
    Ok(DMatrix::from_fn(rows, cols, |r, c| j[(r, c)]))
}

/// Collision boxes for chassis, mast, arm and gripper, base-frame
/// coordinates, in [`LINK_NAMES`] order.
pub fn link_shapes(config: &RobotConfig, model: &KinematicModel) -> [OrientedBox; 4] {
    let f = model.frames(config);
    let l = &model.links;
    let base_rot = UnitQuaternion::from_axis_angle(&Vec3::z_axis(), config.base_yaw);
    let base = Vec3::new(config.base_xy.x, config.base_xy.y, 0.0);

    let chassis = OrientedBox::new(
        base + Vec3::new(0.0, 0.0, 0.5 * l.chassis_height),
        Vec3::new(l.chassis_half[0], l.chassis_half[1], 0.5 * l.chassis_height),
        base_rot,
    );
    let mast_h = 0.5 * (l.mast_top - l.chassis_height);
    let mast = OrientedBox::new(
        Vec3::new(f.mast.x, f.mast.y, l.chassis_height + mast_h),
        Vec3::new(l.mast_half[0], l.mast_half[1], mast_h),
        base_rot,
    );
    let arm_len = model.arm_retracted + config.arm_ext;
    let arm_rot = UnitQuaternion::from_axis_angle(&Vec3::z_axis(), f.heading - config.wrist_yaw);
    let arm_mid = f.mast + f.arm_dir * (0.5 * arm_len);
    let arm = OrientedBox::new(
        Vec3::new(arm_mid.x, arm_mid.y, f.wrist.z),
        Vec3::new(0.5 * arm_len, l.arm_half[0], l.arm_half[1]),
        arm_rot,
    );
    let grip_len = (f.reach - l.finger_clearance).max(0.02);
    let gripper = OrientedBox::new(
        f.wrist + f.approach * (0.5 * grip_len),
        Vec3::new(0.5 * grip_len, l.gripper_half[0], l.gripper_half[1]),
        KinematicModel::gripper_rotation(f.heading, config.wrist_pitch),
    );
    [chassis, mast, arm, gripper]
}
