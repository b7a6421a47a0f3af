//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use artopen::articulation::ArticulationParams;
use artopen::geometry::{wrap_angle, OrientedBox, Vec2, Vec3};
use artopen::robot::{KinematicModel, RobotConfig};

fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Hull vertices by the all-pairs half-plane test: (a, b) is a hull edge
/// iff no point lies strictly right of a->b and every point on the line
/// lies within the segment. Returns vertices sorted lexicographically.
pub fn brute_force_hull(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    let mut verts: Vec<Vec2> = Vec::new();
    for (i, &a) in pts.iter().enumerate() {
        for (j, &b) in pts.iter().enumerate() {
            if i == j {
                continue;
            }
            let e = b - a;
            let ok = pts.iter().all(|&q| {
                let c = cross(e, q - a);
                if c < 0.0 {
                    return false;
                }
                if c == 0.0 {
                    let t = e.dot(&(q - a)) / e.norm_squared();
                    return (0.0..=1.0).contains(&t);
                }
                true
            });
            if ok {
                for v in [a, b] {
                    if !verts.contains(&v) {
                        verts.push(v);
                    }
                }
            }
        }
    }
    verts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    verts
}

fn area(v: &[Vec2]) -> f64 {
    let n = v.len();
    (0..n).map(|i| cross(v[i], v[(i + 1) % n])).sum::<f64>() * 0.5
}

/// Removes edge (i, i+1) by meeting the extensions of its neighbours.
fn collapse(v: &[Vec2], i: usize) -> Option<Vec<Vec2>> {
    let n = v.len();
    let (p, a, b, q) = (v[(i + n - 1) % n], v[i], v[(i + 1) % n], v[(i + 2) % n]);
    let (d1, d2) = (a - p, q - b);
    let den = cross(d1, d2);
    if den <= 1e-12 {
        return None;
    }
    let t = cross(b - a, d2) / den;
    if t < 0.0 {
        return None;
    }
    let x = a + d1 * t;
    let mut out = v.to_vec();
    out[i] = x;
    out.remove((i + 1) % n);
    Some(out)
}

/// Smallest quad area over every order of edge removals.
pub fn exhaustive_min_quad_area(v: &[Vec2]) -> f64 {
    if v.len() == 4 {
        return area(v);
    }
    (0..v.len()).filter_map(|i| collapse(v, i)).map(|w| exhaustive_min_quad_area(&w)).fold(f64::INFINITY, f64::min)
}

/// 4-D grid search over (base_yaw, lift, arm_ext, wrist_yaw) at 1 degree
/// and 5 mm steps for the configuration whose grasp point is nearest
/// `target` with heading within one yaw step of `yaw`. Lift only moves the
/// grasp point vertically, so its axis is searched separately; wrist yaw
/// candidates outside the heading band are skipped since they cannot
/// qualify. Returns the best grasp point.
pub fn grid_search_ik(model: &KinematicModel, base_xy: Vec2, target: &Vec3, yaw: f64) -> Option<Vec3> {
    let step = PI / 180.0;
    let l = model.limits;
    let lifts = ((l.lift[1] - l.lift[0]) / 0.005).round() as usize;
    let best_lift = (0..=lifts)
        .map(|k| l.lift[0] + k as f64 * 0.005)
        .min_by(|a, b| (a + model.tip_height - target.z).abs().total_cmp(&(b + model.tip_height - target.z).abs()))?;
    let exts = ((l.arm_ext[1] - l.arm_ext[0]) / 0.005).round() as usize;
    let wy_lo = (l.wrist_yaw[0] / step).ceil() as i64;
    let wy_hi = (l.wrist_yaw[1] / step).floor() as i64;
    let mut best: Option<(f64, Vec3)> = None;
    for by in -180..180 {
        let base_yaw = by as f64 * step;
        for wy in wy_lo..=wy_hi {
            let wrist_yaw = wy as f64 * step;
            let mut c = RobotConfig {
                base_xy,
                base_yaw,
                lift: best_lift,
                arm_ext: 0.0,
                wrist_yaw,
                wrist_pitch: 0.0,
                gripper: artopen::robot::Gripper::Open,
            };
            let (_, h) = model.tip_and_heading(&c);
            if wrap_angle(h - yaw).abs() > step {
                continue;
            }
            for k in 0..=exts {
                c.arm_ext = l.arm_ext[0] + k as f64 * 0.005;
                let (tip, _) = model.tip_and_heading(&c);
                let d = (tip - target).norm();
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, tip));
                }
            }
        }
    }
    best.map(|(_, t)| t)
}

/// Config whose arm points straight into the face of `params` with the
/// open fingertip exactly on the handle.
pub fn aligned_pre_grasp(model: &KinematicModel, params: &ArticulationParams) -> RobotConfig {
    let approach = -params.normal;
    let arm_yaw = approach.y.atan2(approach.x);
    let side = match model.arm_side {
        artopen::robot::ArmSide::Right => -PI / 2.0,
        artopen::robot::ArmSide::Left => PI / 2.0,
    };
    let mut c = model.neutral(Vec2::zeros(), arm_yaw - side);
    c.arm_ext = 0.5 * (model.limits.arm_ext[0] + model.limits.arm_ext[1]);
    c.lift = params.handle.z - model.tip_height;
    let (tip, _) = model.tip_and_heading(&c);
    c.base_xy += (params.handle - tip).xy();
    c
}

/// Points of `a` sampled on a regular lattice (`per_axis`^3 samples).
pub fn lattice(a: &OrientedBox, per_axis: usize) -> impl Iterator<Item = Vec3> + '_ {
    let r = a.rotation;
    (0..per_axis.pow(3)).map(move |k| {
        let idx = [k % per_axis, (k / per_axis) % per_axis, k / (per_axis * per_axis)];
        let local = Vec3::from_fn(|i, _| ((idx[i] as f64 + 0.5) / per_axis as f64 * 2.0 - 1.0) * a.half_extents[i]);
        a.center + r * local
    })
}

/// Whether `p` lies inside `b` with at least `margin` clearance.
pub fn deep_inside(b: &OrientedBox, p: &Vec3, margin: f64) -> bool {
    let local = b.rotation.inverse() * (p - b.center);
    (0..3).all(|i| local[i].abs() <= b.half_extents[i] - margin)
}

/// Frontal 60 x 70 cm right-hinged cabinet face, radius 0.55, seen from
/// 1.5 m.
pub fn fixture_object() -> (ArticulationParams, artopen::scene::ObjectGeometry) {
    fixture_object_scaled(1.0)
}

/// The fixture with its width (and so its radius) scaled by `s`.
pub fn fixture_object_scaled(s: f64) -> (ArticulationParams, artopen::scene::ObjectGeometry) {
    let params = artopen::canonical::right_cabinet(0.8, 0.55 * s);
    let geometry = artopen::scene::ObjectGeometry {
        left: 0.05 * s,
        right: 0.55 * s,
        below: 0.35,
        above: 0.35,
        ..artopen::scene::ObjectGeometry::default_for(&params)
    };
    (params, geometry)
}

/// Radius, handle and normal errors (m, m, degrees) of `est` against `truth`.
pub fn lift_errors(est: &ArticulationParams, truth: &ArticulationParams) -> (f64, f64, f64) {
    let r = (est.radius.unwrap_or(f64::NAN) - truth.radius.unwrap_or(f64::NAN)).abs();
    let h = (est.handle - truth.handle).norm();
    let n = est.normal.dot(&truth.normal).clamp(-1.0, 1.0).acos().to_degrees();
    (r, h, n)
}

/// 95th percentile (nearest rank).
pub fn p95(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = ((0.95 * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[k - 1]
}

/// Uniform random configuration, `margin` inside every joint limit.
pub fn random_config(rng: &mut impl rand::Rng, model: &KinematicModel, margin: f64) -> RobotConfig {
    let l = model.limits;
    let mut r = |b: [f64; 2]| rng.random_range(b[0] + margin..b[1] - margin);
    let (lift, arm_ext, wrist_yaw) = (r(l.lift), r(l.arm_ext), r(l.wrist_yaw));
    let wrist_pitch = if model.wrist_pitch_enabled { r(l.wrist_pitch) } else { 0.0 };
    RobotConfig {
        base_xy: Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
        base_yaw: rng.random_range(-PI..PI),
        lift,
        arm_ext,
        wrist_yaw,
        wrist_pitch,
        gripper: if rng.random_bool(0.5) { artopen::robot::Gripper::Open } else { artopen::robot::Gripper::Closed },
    }
}

/// Largest gap between the analytic Jacobian and central differences
/// (h = 1e-6) over `n` random configurations.
pub fn jacobian_fd_error(model: &KinematicModel, mode: artopen::robot::ResidualMode, n: usize, seed: u64) -> f64 {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let c = random_config(&mut rng, model, 1e-5);
        let j = artopen::robot::jacobian(&c, model, mode).unwrap();
        assert_eq!((j.nrows(), j.ncols()), (mode.dim(), model.active_joints()));
        for col in 0..j.ncols() {
            let (mut qp, mut qm) = (c.joints(), c.joints());
            qp[col] += h;
            qm[col] -= h;
            let (tp, tm) = (model.task_vector(&c.with_joints(&qp)), model.task_vector(&c.with_joints(&qm)));
            for row in 0..j.nrows() {
                let diff = if row == 3 { wrap_angle(tp[3] - tm[3]) } else { tp[row] - tm[row] };
                worst = worst.max((diff / (2.0 * h) - j[(row, col)]).abs());
            }
        }
    }
    worst
}

/// Solves `n` reachable targets (grasp poses of random configurations) and
/// compares each solution with the grid-search oracle. Returns the number
/// of targets that failed to converge and the largest ratio of the
/// IK-to-oracle distance to its allowance (one grid cell plus the IK
/// tolerance); a ratio <= 1 passes.
pub fn ik_vs_grid(n: usize, seed: u64) -> (usize, f64) {
    use artopen::planner::{solve_ik, IkSettings, IkTarget};
    use rand::{Rng, SeedableRng};
    let m = KinematicModel::default();
    let s = IkSettings::default();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (mut failed, mut worst) = (0, 0.0f64);
    for _ in 0..n {
        let truth = random_config(&mut rng, &m, 0.0).with_gripper(artopen::robot::Gripper::Open);
        let t = IkTarget::from_pose(&m.fk_unchecked(&truth), artopen::robot::ResidualMode::PositionYaw);
        // Seeded with the arm roughly facing the target, as the planner does.
        let seed_cfg = m.neutral(truth.base_xy, truth.base_yaw + rng.random_range(-0.3..0.3));
        let res = solve_ik(&t, &seed_cfg, &m, &s);
        let (tip, hd) = m.tip_and_heading(&res.config);
        let yaw = t.yaw.unwrap();
        if !res.converged || (tip - t.position).norm() > s.pos_tol || wrap_angle(hd - yaw).abs() > s.yaw_tol {
            failed += 1;
            continue;
        }
        let oracle = grid_search_ik(&m, truth.base_xy, &t.position, yaw).expect("non-empty grid");
        let lever = (t.position.xy() - truth.base_xy).norm();
        let step = PI / 180.0;
        let cell = (2.0 * 0.005f64.powi(2) + (lever * step).powi(2) + (m.fingertip_length * step).powi(2)).sqrt();
        worst = worst.max((tip - oracle).norm() / (cell + s.pos_tol));
    }
    (failed, worst)
}
