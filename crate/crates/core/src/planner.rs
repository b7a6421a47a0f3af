//! Damped-least-squares IK and the sequential, warm-started planner that
//! decodes a waypoint trajectory into a whole-body motion plan.
//!
//! The base position is frozen at the initial configuration; the base may
//! only rotate while the arm joints move.

use nalgebra::{Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::articulation::{ArticulationType, WaypointTrajectory};
use crate::geometry::{heading, wrap_angle, Pose, Vec3};
use crate::robot::{joint, KinematicModel, ResidualMode, RobotConfig};
use crate::scene::{check_collision, Scene};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkSettings {
    pub damping: f64,
    pub pos_tol: f64,
    pub yaw_tol: f64,
    pub max_iterations: usize,
    pub max_step_angle: f64,
    pub max_step_length: f64,
}

impl Default for IkSettings {
    fn default() -> Self {
        Self {
            damping: 0.05,
            pos_tol: 0.005,
            yaw_tol: 2f64.to_radians(),
            max_iterations: 100,
            max_step_angle: 0.2,
            max_step_length: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkTarget {
    pub position: Vec3,
    /// Approach heading; `None` for position-only targets.
    pub yaw: Option<f64>,
}

impl IkTarget {
    pub fn from_pose(pose: &Pose, mode: ResidualMode) -> Self {
        Self {
            position: pose.translation.vector,
            yaw: (mode == ResidualMode::PositionYaw).then(|| heading(pose)),
        }
    }

    pub fn mode(&self) -> ResidualMode {
        if self.yaw.is_some() {
            ResidualMode::PositionYaw
        } else {
            ResidualMode::Position
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkResult {
    pub config: RobotConfig,
    pub residual_pos: f64,
    pub residual_yaw: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Residual mode used for each articulation type: doors and drawers fix
/// the approach heading, bottom-hinged doors constrain position only and
/// rely on the wrist pitch.
pub fn residual_mode_for(atype: ArticulationType) -> ResidualMode {
    match atype {
        ArticulationType::BottomHinge => ResidualMode::Position,
        _ => ResidualMode::PositionYaw,
    }
}

fn residual(target: &IkTarget, model: &KinematicModel, c: &RobotConfig) -> (Vector4<f64>, f64, f64) {
    let (tip, h) = model.tip_and_heading(c);
    let dp = target.position - tip;
    let dyaw = target.yaw.map_or(0.0, |y| wrap_angle(y - h));
    (Vector4::new(dp.x, dp.y, dp.z, dyaw), dp.norm(), dyaw.abs())
}

/// Damped least squares: `dq = J^T (J J^T + lambda^2 I)^-1 r`, with
/// per-joint step clamps and joint limits enforced after every step. The
/// base position never changes.
pub fn solve_ik(target: &IkTarget, seed: &RobotConfig, model: &KinematicModel, settings: &IkSettings) -> IkResult {
    let mode = target.mode();
    let bounds = model.limits.bounds();
    let lambda2 = settings.damping * settings.damping;
    let mut config = *seed;
    let mut q = config.joints();
    if !model.wrist_pitch_enabled {
        q[joint::WRIST_PITCH] = 0.0;
    }
    let mut iterations = 0;
    loop {
        config = config.with_joints(&q);
        let (r, rp, ry) = residual(target, model, &config);
        let converged = rp <= settings.pos_tol && ry <= settings.yaw_tol;
        if converged || iterations >= settings.max_iterations {
            return IkResult { config, residual_pos: rp, residual_yaw: ry, iterations, converged };
        }
        let j = model.active_jacobian(&config, mode);
        let a: Matrix4<f64> = j * j.transpose() + Matrix4::identity() * lambda2;
        let y = match a.cholesky() {
            Some(ch) => ch.solve(&r),
            None => return IkResult { config, residual_pos: rp, residual_yaw: ry, iterations, converged: false },
        };
        let dq = j.transpose() * y;
        for k in 0..5 {
            let cap = if k == joint::LIFT || k == joint::ARM_EXT { settings.max_step_length } else { settings.max_step_angle };
            q[k] = (q[k] + dq[k].clamp(-cap, cap)).clamp(bounds[k][0], bounds[k][1]);
        }
        if !model.wrist_pitch_enabled {
            q[joint::WRIST_PITCH] = 0.0;
        }
        iterations += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeqIkOptions {
    /// Seed each call with the previous solution (true) or with theta0.
    pub warm_start: bool,
    /// Extra attempts per waypoint from jittered seeds after a rejection.
    pub retries: usize,
    pub ik: IkSettings,
}

impl Default for SeqIkOptions {
    fn default() -> Self {
        Self { warm_start: true, retries: 0, ik: IkSettings::default() }
    }
}

/// Decoded plan: one configuration per accepted waypoint, in order.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionPlan {
    pub configs: Vec<RobotConfig>,
    pub achieved: usize,
    pub trajectory: WaypointTrajectory,
    /// IK iterations spent over all calls, including rejected ones.
    pub total_iterations: usize,
}

impl MotionPlan {
    pub fn is_complete(&self) -> bool {
        self.achieved == self.trajectory.len()
    }
}

fn jittered(seed: &RobotConfig, model: &KinematicModel, waypoint: usize, attempt: usize) -> RobotConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(((waypoint as u64) << 32) | attempt as u64);
    let b = model.limits.bounds();
    let mut q = seed.joints();
    q[joint::BASE_YAW] += rng.random_range(-0.3..0.3);
    q[joint::ARM_EXT] = (q[joint::ARM_EXT] + rng.random_range(-0.1..0.1)).clamp(b[2][0], b[2][1]);
    q[joint::WRIST_YAW] = (q[joint::WRIST_YAW] + rng.random_range(-0.5..0.5)).clamp(b[3][0], b[3][1]);
    seed.with_joints(&q)
}

/// Sequential IK over `traj` from `theta0`: each waypoint is accepted iff
/// the IK converges and the solution is collision-free with the object at
/// that waypoint's opening. Decoding stops at the first rejection.
pub fn seq_ik(
    theta0: &RobotConfig,
    traj: &WaypointTrajectory,
    scene: &Scene,
    model: &KinematicModel,
    mode: ResidualMode,
    options: &SeqIkOptions,
) -> MotionPlan {
    let mut configs = Vec::with_capacity(traj.len());
    let mut total_iterations = 0;
    let mut prev = *theta0;
    for (i, (pose, &opening)) in traj.poses.iter().zip(&traj.openings).enumerate() {
        let target = IkTarget::from_pose(pose, mode);
        let seed = if options.warm_start { prev } else { *theta0 };
        let mut accepted = None;
        for attempt in 0..=options.retries {
            let s = if attempt == 0 { seed } else { jittered(&seed, model, i, attempt) };
            let res = solve_ik(&target, &s, model, &options.ik);
            total_iterations += res.iterations;
            if res.converged && !check_collision(&res.config, scene, opening, model) {
                accepted = Some(res.config);
                break;
            }
        }
        match accepted {
            Some(c) => {
                configs.push(c);
                prev = c;
            }
            None => break,
        }
    }
    MotionPlan { achieved: configs.len(), configs, trajectory: traj.clone(), total_iterations }
}

/// Tolerances used to tighten plans that are about to be executed.
pub fn tracking_settings(ik: &IkSettings) -> IkSettings {
    IkSettings { pos_tol: 1e-4, yaw_tol: 1e-3, ..*ik }
}

/// Re-solves every accepted configuration of `plan`, seeded with itself, at
/// the tighter `settings`. A configuration is replaced only when the tighter
/// solve converges collision-free, so the number of achieved waypoints never
/// changes.
pub fn refine_plan(plan: &MotionPlan, scene: &Scene, model: &KinematicModel, mode: ResidualMode, settings: &IkSettings) -> MotionPlan {
    let mut out = plan.clone();
    for (i, c) in out.configs.iter_mut().enumerate() {
        let target = IkTarget::from_pose(&plan.trajectory.poses[i], mode);
        let res = solve_ik(&target, c, model, settings);
        out.total_iterations += res.iterations;
        if res.converged && !check_collision(&res.config, scene, plan.trajectory.openings[i], model) {
            *c = res.config;
        }
    }
    out
}
