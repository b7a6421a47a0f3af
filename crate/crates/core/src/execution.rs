//! Simulated execution: error injection, pre-grasp, contact correction,
//! plan update, quasi-static grasp coupling with slip, and the radius and
//! contact-correction experiments built on them.

use nalgebra::{Point3, Translation3, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::articulation::{
    generate_waypoints, handle_at, ArticulationParams, ArticulationType, HandleOrientation, DEFAULT_WAYPOINTS,
};
use crate::error::{Error, Result};
use crate::geometry::{heading, pose_from_parts, wrap_angle, Pose, Vec3};
use crate::placement::{mine, navigation_target, Heatmap, NavigationTarget, PlacementGrid};
use crate::planner::{refine_plan, residual_mode_for, seq_ik, tracking_settings, MotionPlan, SeqIkOptions};
use crate::robot::{joint, Gripper, KinematicModel, ResidualMode, RobotConfig};
use crate::scene::{ObjectGeometry, Scene};

/// Opening a drawer must reach to count as a success (m).
pub const DRAWER_SUCCESS: f64 = 0.24;
/// Opening a hinged object must reach to count as a success (rad).
pub const HINGE_SUCCESS: f64 = std::f64::consts::FRAC_PI_3;

pub const ARM_INCREMENT: f64 = 0.01;
pub const YAW_INCREMENT: f64 = std::f64::consts::PI / 180.0;
pub const LIFT_INCREMENT: f64 = 0.01;
pub const MAX_CORRECTION_STEPS: usize = 15;
pub const MAX_VERTICAL_STEPS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraspModel {
    /// Largest held-point-to-handle distance before the grasp slips (m).
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Largest closed-fingertip-to-handle distance at which closing the
    /// gripper catches the handle (m).
    #[serde(default = "default_capture")]
    pub capture: f64,
}

fn default_tolerance() -> f64 {
    0.04
}

fn default_capture() -> f64 {
    0.025
}

impl Default for GraspModel {
    fn default() -> Self {
        Self { tolerance: default_tolerance(), capture: default_capture() }
    }
}

impl GraspModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.capture > 0.0) {
            return Err(Error::Schema("grasp tolerance and capture must be positive".into()));
        }
        Ok(())
    }
}

/// One sampled perturbation. The handle offset is believed minus true; the
/// base offset is where the robot actually stands relative to where it
/// believes it stands (dx, dy in its own frame, dyaw).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorInjection {
    pub handle_offset: Vec3,
    pub base_offset: [f64; 3],
}

impl ErrorInjection {
    /// The true object expressed in the frame the robot believes it is in.
    pub fn true_in_robot_frame(&self, believed: &ArticulationParams) -> ArticulationParams {
        let shifted = believed.transformed(&Pose::from_parts(
            Translation3::from(-self.handle_offset),
            UnitQuaternion::identity(),
        ));
        let [dx, dy, dyaw] = self.base_offset;
        let actual_base = pose_from_parts(Vec3::new(dx, dy, 0.0), UnitQuaternion::from_axis_angle(&Vec3::z_axis(), dyaw));
        shifted.transformed(&actual_base.inverse())
    }
}

/// Half-widths of uniform error distributions. Depth is measured along the
/// face normal (positive = believed surface in front of the true one),
/// lateral along the face, vertical along gravity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ErrorRanges {
    pub depth: f64,
    pub lateral: f64,
    pub vertical: f64,
    pub base_xy: f64,
    /// Radians internally.
    pub base_yaw: f64,
}

impl ErrorRanges {
    pub fn sample(&self, rng: &mut impl Rng, normal: &Vec3) -> ErrorInjection {
        let mut u = |h: f64| if h > 0.0 { rng.random_range(-h..=h) } else { 0.0 };
        let (d, l, v) = (u(self.depth), u(self.lateral), u(self.vertical));
        let base_offset = [u(self.base_xy), u(self.base_xy), u(self.base_yaw)];
        let right = crate::perception::face_right(normal);
        ErrorInjection { handle_offset: normal * d + right * l + Vec3::z() * v, base_offset }
    }
}

/// Per-trial generator: independent of scheduling and worker count.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionResult {
    pub grasped: bool,
    pub corrections: usize,
    pub correction_delta: Pose,
    pub waypoints_executed: usize,
    /// Object opening after each executed waypoint.
    pub openings: Vec<f64>,
    pub final_opening: f64,
    pub success: bool,
    pub slip_step: Option<usize>,
}

pub fn success_threshold(atype: ArticulationType) -> f64 {
    if atype.is_hinged() {
        HINGE_SUCCESS
    } else {
        DRAWER_SUCCESS
    }
}

pub fn pre_grasp(plan: &MotionPlan) -> Result<RobotConfig> {
    plan.configs.first().copied().ok_or(Error::EmptyPlan)
}

/// Which joint the correction primitive moves, and by how much per step.
fn primitive(atype: ArticulationType) -> (usize, f64) {
    match atype {
        ArticulationType::CabinetLeftHinge => (joint::BASE_YAW, YAW_INCREMENT),
        _ => (joint::ARM_EXT, ARM_INCREMENT),
    }
}

fn stepped(model: &KinematicModel, c: &RobotConfig, j: usize, delta: f64) -> Result<RobotConfig> {
    let mut q = c.joints();
    q[j] += delta;
    let next = c.with_joints(&q);
    model.check_limits(&next)?;
    Ok(next)
}

/// Fingertip depth past the true face plane (positive = behind the face).
fn penetration(model: &KinematicModel, c: &RobotConfig, true_params: &ArticulationParams) -> f64 {
    let (tip, _) = model.tip_and_heading(c);
    -true_params.normal.dot(&(tip - true_params.handle))
}

/// Signed primitive step whose fingertip motion points into the face, and
/// that motion's length.
fn primitive_step(model: &KinematicModel, c: &RobotConfig, atype: ArticulationType, normal: &Vec3) -> Result<(usize, f64, f64)> {
    let (j, inc) = primitive(atype);
    let (tip0, _) = model.tip_and_heading(c);
    let mut q = c.joints();
    q[j] += inc;
    let (tip1, _) = model.tip_and_heading(&c.with_joints(&q));
    let motion = tip1 - tip0;
    let sign = if -normal.dot(&motion) >= 0.0 { 1.0 } else { -1.0 };
    Ok((j, sign * inc, motion.norm()))
}

/// Outcome of a successful contact correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correction {
    pub config: RobotConfig,
    /// Fingertip pose change, base frame: new = delta * old.
    pub delta: Pose,
    pub steps: usize,
    pub vertical_steps: usize,
}

/// Moves the gripper from `pre` in fixed increments until the fingertip
/// reaches the true face: arm extension for drawers and right hinges, base
/// rotation for left hinges. Vertical handles first get lift steps toward
/// the believed handle height. A fingertip that starts deeper than one
/// increment is backed off until it is within one increment of the face.
pub fn contact_correct(
    pre: &RobotConfig,
    believed: &ArticulationParams,
    true_params: &ArticulationParams,
    model: &KinematicModel,
) -> Result<Correction> {
    model.check_limits(pre)?;
    let mut c = *pre;

    let mut vertical_steps = 0;
    if believed.handle_orientation == HandleOrientation::Vertical {
        while vertical_steps < MAX_VERTICAL_STEPS {
            let (tip, _) = model.tip_and_heading(&c);
            let dz = believed.handle.z - tip.z;
            if dz.abs() <= 0.5 * LIFT_INCREMENT {
                break;
            }
            c = stepped(model, &c, joint::LIFT, LIFT_INCREMENT.copysign(dz))?;
            vertical_steps += 1;
        }
    }

    let (j, step, step_len) = primitive_step(model, &c, believed.atype, &true_params.normal)?;
    let mut steps = 0;
    let mut depth = penetration(model, &c, true_params);
    while depth < 0.0 {
        if steps == MAX_CORRECTION_STEPS {
            return Err(Error::NoContact(steps));
        }
        c = stepped(model, &c, j, step)?;
        steps += 1;
        depth = penetration(model, &c, true_params);
    }
    while depth > step_len && steps < MAX_CORRECTION_STEPS {
        c = stepped(model, &c, j, -step)?;
        steps += 1;
        depth = penetration(model, &c, true_params);
    }
    let delta = model.fk_unchecked(&c) * model.fk_unchecked(pre).inverse();
    Ok(Correction { config: c, delta, steps, vertical_steps })
}

/// Shifts the plan's trajectory by `delta` and re-decodes it from `seed`.
/// With `replan`, the trajectory is regenerated instead from the believed
/// object translated so its handle sits where the correction ended.
#[allow(clippy::too_many_arguments)]
pub fn update_plan(
    plan: &MotionPlan,
    delta: &Pose,
    seed: &RobotConfig,
    believed: &ArticulationParams,
    scene: &Scene,
    model: &KinematicModel,
    options: &SeqIkOptions,
    replan: bool,
) -> Result<MotionPlan> {
    let mode = residual_mode_for(believed.atype);
    let (traj, scene) = if replan {
        let moved = (delta * Point3::from(believed.handle)).coords - believed.handle;
        let shift = Pose::from_parts(Translation3::from(moved), UnitQuaternion::identity());
        let params = believed.transformed(&shift);
        let target = plan.trajectory.openings.last().copied().unwrap_or(params.atype.default_target());
        (generate_waypoints(&params, plan.trajectory.len(), target)?, scene.transformed(&shift))
    } else {
        (plan.trajectory.transformed(delta), scene.transformed(delta))
    };
    let opts = SeqIkOptions { warm_start: true, ..*options };
    let plan = seq_ik(seed, &traj, &scene, model, mode, &opts);
    Ok(refine_plan(&plan, &scene, model, mode, &tracking_settings(&options.ik)))
}

/// Golden-section minimum of `f` on [a, b], endpoints included.
fn golden_min(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) * 0.5;
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (lo + hi);
    [(a, f(a)), (mid, f(mid)), (b, f(b))]
        .into_iter()
        .min_by(|p, q| p.1.total_cmp(&q.1))
        .expect("three candidates")
}

/// Closes the gripper at the plan's first configuration and follows the
/// plan with the object coupled to the held handle point. The object opens
/// to the reachable state nearest the held point; the grasp slips when that
/// distance exceeds the tolerance.
pub fn execute(plan: &MotionPlan, true_params: &ArticulationParams, grasp: &GraspModel, model: &KinematicModel) -> Result<ExecutionResult> {
    let pre = pre_grasp(plan)?;
    let h0 = true_params.handle;
    let closed = |c: &RobotConfig| model.fk_unchecked(&c.with_gripper(Gripper::Closed));
    let grasp_pose = closed(&pre);
    let grasped = (grasp_pose.translation.vector - h0).norm() <= grasp.capture;
    let mut result = ExecutionResult {
        grasped,
        corrections: 0,
        correction_delta: Pose::identity(),
        waypoints_executed: 0,
        openings: Vec::new(),
        final_opening: 0.0,
        success: false,
        slip_step: None,
    };
    if !grasped {
        return Ok(result);
    }
    let held = grasp_pose.inverse() * Point3::from(h0);
    let upper = true_params.atype.default_target();
    let tol = if true_params.atype.is_hinged() { 1e-4 } else { 1e-5 };
    let mut phi = 0.0;
    for (i, c) in plan.configs.iter().enumerate() {
        let p = (closed(c) * held).coords;
        let dist = |x: f64| (p - handle_at(true_params, x).expect("validated params")).norm();
        let (x, d) = golden_min(dist, phi, upper, tol);
        if d > grasp.tolerance {
            result.slip_step = Some(i);
            break;
        }
        phi = x;
        result.openings.push(x);
        result.waypoints_executed = i + 1;
    }
    result.final_opening = phi;
    result.success = phi >= success_threshold(true_params.atype);
    Ok(result)
}

/// Everything needed to execute against a believed object.
#[derive(Debug, Clone)]
pub struct PlannedTask {
    pub believed: ArticulationParams,
    pub scene: Scene,
    pub heatmap: Heatmap,
    pub target: NavigationTarget,
    pub plan: MotionPlan,
}

/// Tip-motion alignment of the correction primitive with the approach
/// direction at `c` (1 = the primitive pushes straight into the face).
pub fn correction_alignment(model: &KinematicModel, c: &RobotConfig, params: &ArticulationParams) -> f64 {
    let (j, inc) = primitive(params.atype);
    let (tip0, _) = model.tip_and_heading(c);
    let mut q = c.joints();
    q[j] += inc;
    let (tip1, _) = model.tip_and_heading(&c.with_joints(&q));
    let m = tip1 - tip0;
    (params.normal.dot(&m) / m.norm()).abs()
}

/// Mines base placements for `params`, then plans from one of the
/// best-scoring cells. Cells whose plan refines to full tracking precision
/// are preferred; for objects opened with contact correction, so are cells
/// whose pre-grasp best aligns the correction primitive with the approach
/// (rounded to 0.01). Remaining ties follow the usual navigation order.
pub fn plan_task(
    params: &ArticulationParams,
    scene: &Scene,
    model: &KinematicModel,
    grid: &PlacementGrid,
    options: &SeqIkOptions,
    n_waypoints: usize,
) -> Result<PlannedTask> {
    let model = &model.for_articulation(params.atype);
    let traj = generate_waypoints(params, n_waypoints, params.atype.default_target())?;
    let mode = residual_mode_for(params.atype);
    let heatmap = mine(params, &traj, scene, model, grid, mode, options)?;
    let fine = tracking_settings(&options.ik);
    let plan_from = |t: &NavigationTarget| {
        let (xy, yaw) = t.base_pose(params);
        let plan = seq_ik(&model.neutral(xy, yaw), &traj, scene, model, mode, options);
        refine_plan(&plan, scene, model, mode, &fine)
    };
    let key = |p: &MotionPlan| {
        let tight = p.configs.iter().zip(&traj.poses).all(|(c, w)| {
            let (tip, h) = model.tip_and_heading(c);
            let yaw_ok = mode == ResidualMode::Position || wrap_angle(heading(w) - h).abs() <= fine.yaw_tol;
            (tip - w.translation.vector).norm() <= fine.pos_tol && yaw_ok
        });
        let align = match (params.atype, p.configs.first()) {
            (ArticulationType::BottomHinge, _) | (_, None) => 0,
            (_, Some(c)) => (correction_alignment(model, c, params) * 100.0).round() as i64,
        };
        (tight, align)
    };
    let mut target = navigation_target(&heatmap)?;
    let mut plan = plan_from(&target);
    if target.score > 0 {
        let mut best_key = key(&plan);
        for (k, &s) in heatmap.scores.iter().enumerate() {
            if s != target.score {
                continue;
            }
            let (ix, iy) = (k % grid.nx, k / grid.nx);
            let p = grid.cell(ix, iy);
            let cand = NavigationTarget { x: p.x, y: p.y, yaw: heatmap.best_yaw[k], score: s, ix, iy };
            let cp = plan_from(&cand);
            let ck = key(&cp);
            let closer = (p.norm(), cand.yaw.abs(), ix, iy) < (nalgebra::Vector2::new(target.x, target.y).norm(), target.yaw.abs(), target.ix, target.iy);
            if ck > best_key || (ck == best_key && closer) {
                best_key = ck;
                target = cand;
                plan = cp;
            }
        }
    }
    Ok(PlannedTask { believed: params.clone(), scene: scene.clone(), heatmap, target, plan })
}

/// One execution attempt against `true_params` (expressed in the robot's
/// believed frame).
pub fn run_trial(
    task: &PlannedTask,
    true_params: &ArticulationParams,
    model: &KinematicModel,
    grasp: &GraspModel,
    options: &SeqIkOptions,
    correct: bool,
    replan: bool,
) -> Result<ExecutionResult> {
    let model = &model.for_articulation(task.believed.atype);
    let pre = pre_grasp(&task.plan)?;
    let mut plan = task.plan.clone();
    let mut corrections = 0;
    let mut delta = Pose::identity();
    if correct {
        // A failed correction leaves the arm at the original pre-grasp.
        if let Ok(c) = contact_correct(&pre, &task.believed, true_params, model) {
            corrections = c.steps + c.vertical_steps;
            delta = c.delta;
            plan = update_plan(&task.plan, &c.delta, &c.config, &task.believed, &task.scene, model, options, replan)?;
            if plan.configs.is_empty() {
                plan.configs.push(c.config);
            }
        }
    }
    let mut r = execute(&plan, true_params, grasp, model)?;
    r.corrections = corrections;
    r.correction_delta = delta;
    Ok(r)
}

pub const DEFAULT_RADIUS_DELTAS: [f64; 11] = [-0.10, -0.08, -0.06, -0.04, -0.02, 0.0, 0.02, 0.04, 0.06, 0.08, 0.10];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub delta_r: f64,
    /// Final opening, radians.
    pub final_angle: f64,
    pub waypoints_executed: usize,
    pub planned_waypoints: usize,
}

/// Plans with the radius perturbed by each delta (handle and everything
/// else at ground truth) and executes against the true object.
pub fn radius_sweep(
    true_params: &ArticulationParams,
    deltas: &[f64],
    grasp: &GraspModel,
    model: &KinematicModel,
    obstacles: &[crate::geometry::OrientedBox],
    grid: &PlacementGrid,
    options: &SeqIkOptions,
) -> Result<Vec<SweepPoint>> {
    let (_, r) = true_params.axis_and_radius()?;
    if let Some(min) = deltas.iter().copied().reduce(f64::min) {
        if r + min <= 0.05 {
            return Err(Error::DegenerateInput(format!("radius {r} + delta {min} must exceed 0.05 m")));
        }
    }
    deltas
        .iter()
        .map(|&dr| {
            let believed = true_params.with_radius(r + dr)?;
            let scene = Scene::for_object(&believed, &ObjectGeometry::default_for(&believed), obstacles.to_vec());
            let task = plan_task(&believed, &scene, model, grid, options, DEFAULT_WAYPOINTS)?;
            let res = if task.plan.configs.is_empty() {
                None
            } else {
                Some(execute(&task.plan, true_params, grasp, model)?)
            };
            Ok(SweepPoint {
                delta_r: dr,
                final_angle: res.as_ref().map_or(0.0, |x| x.final_opening),
                waypoints_executed: res.as_ref().map_or(0, |x| x.waypoints_executed),
                planned_waypoints: task.plan.achieved,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub handle_offset: [f64; 3],
    pub base_offset: [f64; 3],
    pub with_success: bool,
    pub with_waypoints: usize,
    pub with_corrections: usize,
    pub without_success: bool,
    pub without_waypoints: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationResult {
    pub trials: Vec<TrialRecord>,
    pub with_rate: f64,
    pub without_rate: f64,
}

impl AblationResult {
    /// Count of trials by waypoints executed (0..=n), in the arm with or
    /// without correction.
    pub fn waypoint_histogram(&self, n: usize, with_correction: bool) -> Vec<usize> {
        let mut h = vec![0; n + 1];
        for t in &self.trials {
            let w = if with_correction { t.with_waypoints } else { t.without_waypoints };
            h[w.min(n)] += 1;
        }
        h
    }
}

/// Paired trials: each trial samples one error and runs the task with and
/// without contact correction against the same perturbed object.
#[allow(clippy::too_many_arguments)]
pub fn ablate_contact_correction(
    task: &PlannedTask,
    errors: &ErrorRanges,
    trials: u64,
    seed: u64,
    grasp: &GraspModel,
    model: &KinematicModel,
    options: &SeqIkOptions,
    replan: bool,
) -> Result<AblationResult> {
    if trials == 0 {
        return Err(Error::DegenerateInput("need at least one trial".into()));
    }
    let records: Result<Vec<TrialRecord>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let inj = errors.sample(&mut rng, &task.believed.normal);
            let truth = inj.true_in_robot_frame(&task.believed);
            let with = run_trial(task, &truth, model, grasp, options, true, replan)?;
            let without = run_trial(task, &truth, model, grasp, options, false, replan)?;
            Ok(TrialRecord {
                trial: t,
                handle_offset: inj.handle_offset.into(),
                base_offset: inj.base_offset,
                with_success: with.success,
                with_waypoints: with.waypoints_executed,
                with_corrections: with.corrections,
                without_success: without.success,
                without_waypoints: without.waypoints_executed,
            })
        })
        .collect();
    let trials_out = records?;
    let n = trials_out.len() as f64;
    let rate = |f: fn(&TrialRecord) -> bool| trials_out.iter().filter(|t| f(t)).count() as f64 / n;
    Ok(AblationResult { with_rate: rate(|t| t.with_success), without_rate: rate(|t| t.without_success), trials: trials_out })
}
