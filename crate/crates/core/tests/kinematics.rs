mod common;

use std::f64::consts::{FRAC_PI_2, PI};

use approx::assert_relative_eq;
use artopen::articulation::{generate_waypoints, handle_at, ArticulationParams, ArticulationType, HingeAxis, HandleOrientation};
use artopen::canonical;
use artopen::geometry::{distance_to_line, heading, wrap_angle, OrientedBox, Pose, Vec2, Vec3};
use artopen::placement::{mine, navigation_target, PlacementGrid};
use artopen::planner::{residual_mode_for, seq_ik, solve_ik, IkSettings, IkTarget, SeqIkOptions};
use artopen::robot::{fk, jacobian, link_shapes, Gripper, KinematicModel, ResidualMode, RobotConfig};
use artopen::scene::{check_collision, Scene};
use artopen::Error;
use nalgebra::{Translation3, UnitQuaternion};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random hinged object: a canonical cabinet or oven moved by a random
/// planar rigid motion.
fn hinged_object() -> impl Strategy<Value = ArticulationParams> {
    (0usize..3, 0.6..1.0f64, 0.1..0.8f64, -PI..PI, -2.0..2.0f64, -2.0..2.0f64).prop_map(|(k, h, r, yaw, x, y)| {
        let p = match k {
            0 => canonical::right_cabinet(h, r),
            1 => canonical::left_cabinet(h, r),
            _ => canonical::oven(),
        };
        p.transformed(&Pose::from_parts(Translation3::new(x, y, 0.0), UnitQuaternion::from_axis_angle(&Vec3::z_axis(), yaw)))
    })
}

fn any_object() -> impl Strategy<Value = ArticulationParams> {
    prop_oneof![
        1 => (0.3..1.1f64, -PI..PI).prop_map(|(h, yaw)| canonical::drawer(h)
            .transformed(&Pose::from_parts(Translation3::identity(), UnitQuaternion::from_axis_angle(&Vec3::z_axis(), yaw)))),
        3 => hinged_object(),
    ]
}

// Articulation.

#[test]
fn handle_at_examples() {
    let drawer = ArticulationParams::drawer(Vec3::new(1.0, 0.0, 0.7), Vec3::new(-1.0, 0.0, 0.0), HandleOrientation::Horizontal);
    assert_eq!(handle_at(&drawer, 0.0).unwrap(), drawer.handle);
    assert!((handle_at(&drawer, 0.35).unwrap() - Vec3::new(0.65, 0.0, 0.7)).norm() < 1e-12);

    let cab = ArticulationParams::hinged(
        ArticulationType::CabinetRightHinge,
        Vec3::new(1.0, 0.0, 0.7),
        Vec3::new(-1.0, 0.0, 0.0),
        HandleOrientation::Vertical,
        HingeAxis { point: Vec3::new(1.0, -0.4, 0.0), direction: Vec3::z() },
    );
    assert_relative_eq!(cab.radius.unwrap(), 0.4, epsilon = 1e-12);
    assert_eq!(handle_at(&cab, 0.0).unwrap(), cab.handle);
    assert!((handle_at(&cab, FRAC_PI_2).unwrap() - Vec3::new(0.6, -0.4, 0.7)).norm() < 1e-9);

    let mut bare = cab.clone();
    bare.hinge_axis = None;
    assert!(matches!(handle_at(&bare, 0.1), Err(Error::MissingAxis)));
}

#[test]
fn waypoint_examples() {
    let drawer = ArticulationParams::drawer(Vec3::new(1.0, 0.0, 0.7), Vec3::new(-1.0, 0.0, 0.0), HandleOrientation::Horizontal);
    let t = generate_waypoints(&drawer, 10, 0.35).unwrap();
    assert_eq!(t.len(), 10);
    for (i, p) in t.poses.iter().enumerate() {
        let expect = Vec3::new(1.0 - 0.35 * i as f64 / 9.0, 0.0, 0.7);
        assert!((p.translation.vector - expect).norm() < 1e-12);
        // Approach along -normal.
        assert!((p.rotation * Vec3::x() - Vec3::x()).norm() < 1e-12);
    }
    assert!(matches!(generate_waypoints(&drawer, 1, 0.35), Err(Error::BadCount(1))));

    let cab = canonical::right_cabinet(0.8, 0.4);
    let t = generate_waypoints(&cab, 10, FRAC_PI_2).unwrap();
    let axis = cab.hinge_axis.unwrap();
    for p in &t.poses {
        assert_relative_eq!(distance_to_line(&p.translation.vector, &axis.point, &axis.direction), 0.4, epsilon = 1e-9);
    }

    let oven = canonical::oven();
    let t = generate_waypoints(&oven, 10, FRAC_PI_2).unwrap();
    let (first, last) = (t.poses[0].translation.vector, t.poses[9].translation.vector);
    assert!(last.z < first.z);
    assert!(oven.normal.dot(&(last - first)) > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn generator_and_evaluator_agree(p in any_object(), n in 2usize..20, frac in 0.2..1.0f64) {
        let target = frac * p.atype.default_target();
        let t = generate_waypoints(&p, n, target).unwrap();
        prop_assert_eq!(t.len(), n);
        prop_assert_eq!(t.openings[0], 0.0);
        for (i, (pose, &o)) in t.poses.iter().zip(&t.openings).enumerate() {
            prop_assert!((o - i as f64 / (n - 1) as f64 * target).abs() < 1e-12);
            prop_assert!((handle_at(&p, o).unwrap() - pose.translation.vector).norm() < 1e-9);
        }
        prop_assert!(t.openings.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn hinged_chords_and_orientations_are_uniform(p in hinged_object(), n in 3usize..15) {
        let t = generate_waypoints(&p, n, FRAC_PI_2).unwrap();
        let (axis, _) = p.axis_and_radius().unwrap();
        let step = FRAC_PI_2 / (n - 1) as f64;
        let radial = |v: &Vec3| {
            let d = v - axis.point;
            d - axis.direction * d.dot(&axis.direction)
        };
        for w in t.poses.windows(2) {
            let (a, b) = (radial(&w[0].translation.vector), radial(&w[1].translation.vector));
            let angle = a.angle(&b);
            prop_assert!((angle - step).abs() < 1e-9, "chord angle {angle} vs {step}");
            let rel = w[1].rotation * w[0].rotation.inverse();
            prop_assert!((rel.angle() - step).abs() < 1e-9);
            let ax = rel.axis().unwrap();
            prop_assert!(ax.cross(&axis.direction).norm() < 1e-9);
            // The rotation is the one that carries the handle.
            let moved = rel * a;
            prop_assert!((moved - b).norm() < 1e-9);
        }
    }

    #[test]
    fn every_object_swings_toward_the_robot(p in any_object(), eps in 1e-4..1e-2f64) {
        let d = handle_at(&p, eps).unwrap() - p.handle;
        prop_assert!(d.dot(&p.normal) > 0.0);
    }
}

// Robot model.

#[test]
fn neutral_pose_and_prismatic_joints() {
    let m = KinematicModel::default();
    let home = m.neutral(Vec2::zeros(), 0.0);
    let p = fk(&home, &m).unwrap().translation.vector;
    let expect = Vec3::new(m.mast_offset[0], m.mast_offset[1] - m.arm_retracted - m.fingertip_length, 0.6 + m.tip_height);
    assert!((p - expect).norm() < 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let c = common::random_config(&mut rng, &m, 0.0);
        let mut up = c;
        up.lift = (c.lift + 0.1).min(m.limits.lift[1]);
        let dz = fk(&up, &m).unwrap().translation.z - fk(&c, &m).unwrap().translation.z;
        assert_relative_eq!(dz, up.lift - c.lift, epsilon = 1e-12);

        let open = fk(&c.with_gripper(Gripper::Open), &m).unwrap();
        let closed = fk(&c.with_gripper(Gripper::Closed), &m).unwrap();
        let approach = open.rotation * Vec3::x();
        let shift = closed.translation.vector - open.translation.vector;
        assert!((shift + approach * 0.02).norm() < 1e-12);
    }

    let mut bad = home;
    bad.lift = 1.5;
    assert!(matches!(fk(&bad, &m), Err(Error::LimitViolation { .. })));
}

fn lever_checks(model: &KinematicModel, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..200 {
        let c = common::random_config(&mut rng, model, 0.0);
        let j = jacobian(&c, model, ResidualMode::PositionYaw).unwrap();
        // Lift moves z one to one; base yaw moves the tip perpendicular to the lever.
        assert_eq!(j[(2, 1)], 1.0);
        let lever = model.task_vector(&c).xy() - c.base_xy;
        let d = Vec2::new(j[(0, 0)], j[(1, 0)]);
        assert!(d.dot(&lever).abs() < 1e-12);
        assert_relative_eq!(d.norm(), lever.norm(), epsilon = 1e-12);
    }
}

#[test]
fn jacobian_matches_finite_differences() {
    let m = KinematicModel::default();
    assert!(common::jacobian_fd_error(&m, ResidualMode::PositionYaw, 1000, 1) < 1e-5);
    let pitched = m.for_articulation(ArticulationType::BottomHinge);
    assert!(pitched.wrist_pitch_enabled);
    assert!(common::jacobian_fd_error(&pitched, ResidualMode::Position, 1000, 2) < 1e-5);
    lever_checks(&m, 3);
}

#[test]
fn base_yaw_rotates_everything_about_the_origin() {
    let m = KinematicModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let mut c = common::random_config(&mut rng, &m, 0.0);
        c.base_xy = Vec2::zeros();
        let phi = c.base_yaw;
        let zero = RobotConfig { base_yaw: 0.0, ..c };
        let rot = Pose::from_parts(Translation3::identity(), UnitQuaternion::from_axis_angle(&Vec3::z_axis(), phi));
        let a = fk(&c, &m).unwrap();
        let b = rot * fk(&zero, &m).unwrap();
        assert!((a.translation.vector - b.translation.vector).norm() < 1e-12);
        assert!(a.rotation.angle_to(&b.rotation) < 1e-9);
        for (x, y) in link_shapes(&c, &m).iter().zip(link_shapes(&zero, &m).iter()) {
            let y = y.transformed(&rot);
            assert!((x.center - y.center).norm() < 1e-12);
            assert!(x.rotation.angle_to(&y.rotation) < 1e-9);
        }
    }
}

#[test]
fn reachability_ceiling_is_below_one_point_two() {
    for m in [KinematicModel::default(), KinematicModel::default().for_articulation(ArticulationType::BottomHinge)] {
        assert!(m.max_tip_height() < 1.2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            let c = common::random_config(&mut rng, &m, 0.0);
            assert!(fk(&c, &m).unwrap().translation.z <= m.max_tip_height() + 1e-12);
        }
    }
}

#[test]
fn arm_box_tracks_extension() {
    let m = KinematicModel::default();
    let c0 = m.neutral(Vec2::zeros(), 0.0);
    let full = RobotConfig { arm_ext: m.limits.arm_ext[1], ..c0 };
    let len = |c: &RobotConfig| {
        let arm: OrientedBox = link_shapes(c, &m)[2];
        2.0 * arm.half_extents.max()
    };
    assert_relative_eq!(len(&full) - len(&c0), m.limits.arm_ext[1], epsilon = 1e-12);
    assert!(len(&c0) > 0.0);
}

// Planner.

#[test]
fn fixed_point_and_ceiling() {
    let m = KinematicModel::default();
    let s = IkSettings::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..100 {
        let c = common::random_config(&mut rng, &m, 0.0).with_gripper(Gripper::Open);
        let res = solve_ik(&IkTarget::from_pose(&fk(&c, &m).unwrap(), ResidualMode::PositionYaw), &c, &m, &s);
        assert!(res.converged && res.iterations <= 2);
        assert!(res.residual_pos <= s.pos_tol && res.residual_yaw <= s.yaw_tol);
    }
    let seed = m.neutral(Vec2::zeros(), 0.0);
    let (tip, h) = m.tip_and_heading(&seed);
    let res = solve_ik(&IkTarget { position: Vec3::new(tip.x, tip.y, 1.25), yaw: Some(h) }, &seed, &m, &s);
    assert!(!res.converged);
    assert_eq!(res.config.base_xy, seed.base_xy);
}

#[test]
fn ik_agrees_with_grid_search() {
    let (failed, worst) = common::ik_vs_grid(50, 7);
    assert_eq!(failed, 0);
    assert!(worst <= 1.0, "worst distance ratio {worst}");
}

#[test]
fn stationary_trajectory_stays_put() {
    let m = KinematicModel::default();
    let params = canonical::drawer(0.8);
    let scene = canonical::scene(&params).transformed(&Pose::from_parts(Translation3::new(10.0, 0.0, 0.0), UnitQuaternion::identity()));
    let mut theta0 = m.neutral(Vec2::new(0.1, -0.2), 0.4);
    theta0.arm_ext = 0.2;
    theta0.wrist_yaw = 0.3;
    let mut traj = generate_waypoints(&params, 10, 0.35).unwrap();
    let pose = fk(&theta0, &m).unwrap();
    traj.poses.iter_mut().for_each(|p| *p = pose);
    let plan = seq_ik(&theta0, &traj, &scene, &m, ResidualMode::PositionYaw, &SeqIkOptions::default());
    assert_eq!(plan.achieved, 10);
    for c in &plan.configs {
        assert!((c.joints().iter().zip(theta0.joints()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)) < 1e-9);
    }
}

fn canonical_objects() -> Vec<ArticulationParams> {
    vec![
        canonical::drawer(0.8),
        canonical::right_cabinet(0.8, 0.4),
        canonical::left_cabinet(0.8, 0.4),
    ]
}

#[test]
fn canonical_plans_track_and_warm_start_pays() {
    let base = KinematicModel::default();
    let grid = PlacementGrid::default();
    let warm = SeqIkOptions::default();
    let cold = SeqIkOptions { warm_start: false, ..warm };
    for params in canonical_objects() {
        let m = base.for_articulation(params.atype);
        let scene = canonical::scene(&params);
        let mode = residual_mode_for(params.atype);
        let traj = generate_waypoints(&params, 10, params.atype.default_target()).unwrap();
        let heat = mine(&params, &traj, &scene, &m, &grid, mode, &warm).unwrap();
        let target = navigation_target(&heat).unwrap();
        let (xy, yaw) = target.base_pose(&params);
        let theta0 = m.neutral(xy, yaw);
        let w = seq_ik(&theta0, &traj, &scene, &m, mode, &warm);
        assert_eq!(w.achieved, 10, "{:?}", params.atype);
        for (i, c) in w.configs.iter().enumerate() {
            assert_eq!(c.base_xy, theta0.base_xy);
            assert!(m.check_limits(c).is_ok());
            assert!(!check_collision(c, &scene, traj.openings[i], &m));
            let p = fk(c, &m).unwrap();
            assert!((p.translation.vector - traj.poses[i].translation.vector).norm() <= 0.005);
            assert!(wrap_angle(heading(&p) - heading(&traj.poses[i])).abs() <= 2f64.to_radians());
        }
        let c = seq_ik(&theta0, &traj, &scene, &m, mode, &cold);
        assert!(
            w.total_iterations < c.total_iterations,
            "{:?}: warm {} vs cold {} (cold achieved {})",
            params.atype,
            w.total_iterations,
            c.total_iterations,
            c.achieved
        );
    }
}

#[test]
fn wide_cabinet_is_infeasible_everywhere() {
    let m = KinematicModel::default();
    let params = canonical::right_cabinet(0.8, 0.6);
    let traj = generate_waypoints(&params, 10, FRAC_PI_2).unwrap();
    let heat = mine(&params, &traj, &canonical::scene(&params), &m, &PlacementGrid::default(), ResidualMode::PositionYaw, &SeqIkOptions::default())
        .unwrap();
    assert!(heat.max_score() < 10, "max {}", heat.max_score());
}

#[test]
fn collision_examples() {
    let m = KinematicModel::default();
    let params = canonical::drawer(0.8);
    let scene: Scene = canonical::scene(&params);
    let far = m.neutral(Vec2::new(-2.5, 0.0), 0.0);
    assert!(!check_collision(&far, &scene, 0.0, &m));
    let inside = m.neutral((scene.body.center).xy(), 0.0);
    assert!(check_collision(&inside, &scene, 0.0, &m));
    // An obstacle inside the chassis collides; one 1 m away does not.
    let mut cluttered = scene.clone();
    cluttered.obstacles.push(OrientedBox::axis_aligned(Vec3::new(-2.5, 0.0, 0.1), Vec3::new(0.05, 0.05, 0.05)));
    assert!(check_collision(&far, &cluttered, 0.0, &m));
    let mut clear = scene.clone();
    clear.obstacles.push(OrientedBox::axis_aligned(Vec3::new(-3.5, 0.0, 0.1), Vec3::new(0.05, 0.05, 0.05)));
    assert!(!check_collision(&far, &clear, 0.0, &m));
}
