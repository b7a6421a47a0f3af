mod common;

use artopen::articulation::{ArticulationType, HandleOrientation};
use artopen::canonical;
use artopen::geometry::{distance_to_line, Pose, Vec3};
use artopen::perception::{lift_detection, lift_detection_full, orientation_from_points, LiftOptions, Mask2D};
use artopen::synth::{fixture_camera, handle_bar_points, render};
use artopen::Error;
use nalgebra::{Translation3, UnitQuaternion};
use rayon::prelude::*;

#[test]
fn noiseless_fixture_is_recovered() {
    let (truth, geometry) = common::fixture_object();
    let cam = fixture_camera(&truth).unwrap();
    let view = render(&truth, &geometry, &cam, 0.0, 0).unwrap();
    let out = lift_detection_full(&view.detection, &view.depth, &cam, &LiftOptions::default()).unwrap();
    let est = &out.params;
    let (r, h, n) = common::lift_errors(est, &truth);
    assert!(r < 0.005 && h < 0.005 && n < 0.5, "radius {r} handle {h} normal {n}");
    assert_eq!(est.atype, ArticulationType::CabinetRightHinge);
    // The radius is by definition the handle-to-axis distance.
    let axis = est.hinge_axis.unwrap();
    assert!((est.radius.unwrap() - distance_to_line(&est.handle, &axis.point, &axis.direction)).abs() < 1e-12);
    assert!(out.warnings.is_empty());
}

#[test]
fn noisy_fixture_p95_within_bounds() {
    let (truth, geometry) = common::fixture_object();
    let cam = fixture_camera(&truth).unwrap();
    let errs: Vec<(f64, f64, f64)> = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let view = render(&truth, &geometry, &cam, 0.005, seed).unwrap();
            let est = lift_detection(&view.detection, &view.depth, &cam, &LiftOptions::default()).unwrap();
            common::lift_errors(&est, &truth)
        })
        .collect();
    let r = common::p95(errs.iter().map(|e| e.0).collect());
    let h = common::p95(errs.iter().map(|e| e.1).collect());
    assert!(r < 0.02 && h < 0.01, "p95 radius {r} handle {h}");
}

#[test]
fn moving_the_camera_leaves_the_estimate_unchanged() {
    let (truth, geometry) = common::fixture_object();
    let cam = fixture_camera(&truth).unwrap();
    let base = {
        let v = render(&truth, &geometry, &cam, 0.0, 0).unwrap();
        lift_detection(&v.detection, &v.depth, &cam, &LiftOptions::default()).unwrap()
    };
    for (dy, dz, yaw) in [(0.1, 0.05, 0.05), (-0.15, -0.1, -0.08), (0.0, 0.2, 0.0)] {
        let mut moved = cam.clone();
        let shift = Pose::from_parts(Translation3::new(0.0, dy, dz), UnitQuaternion::from_axis_angle(&Vec3::z_axis(), yaw));
        moved.pose_in_base = shift * cam.pose_in_base;
        let v = render(&truth, &geometry, &moved, 0.0, 0).unwrap();
        let est = lift_detection(&v.detection, &v.depth, &moved, &LiftOptions::default()).unwrap();
        let (r, h, n) = common::lift_errors(&est, &base);
        assert!(r < 0.005 && h < 0.005 && n < 0.5, "radius {r} handle {h} normal {n}");
    }
}

#[test]
fn radius_scales_with_width() {
    let estimate = |s: f64| {
        let (truth, geometry) = common::fixture_object_scaled(s);
        let cam = fixture_camera(&truth).unwrap();
        let v = render(&truth, &geometry, &cam, 0.0, 0).unwrap();
        lift_detection(&v.detection, &v.depth, &cam, &LiftOptions::default()).unwrap().radius.unwrap()
    };
    let r1 = estimate(1.0);
    for s in [0.7, 0.85, 1.2] {
        let ratio = estimate(s) / r1;
        assert!((ratio / s - 1.0).abs() < 0.02, "scale {s}: ratio {ratio}");
    }
}

#[test]
fn handle_bars_classify_under_jitter() {
    let horizontal = canonical::drawer(0.8);
    let vertical = canonical::right_cabinet(0.8, 0.4);
    for seed in 0..100 {
        let h = handle_bar_points(&horizontal, 40, 0.002, seed);
        assert_eq!(orientation_from_points(&h, &horizontal.normal).unwrap(), HandleOrientation::Horizontal);
        let v = handle_bar_points(&vertical, 40, 0.002, seed);
        assert_eq!(orientation_from_points(&v, &vertical.normal).unwrap(), HandleOrientation::Vertical);
    }
}

#[test]
fn lifting_reports_bad_inputs() {
    let (truth, geometry) = common::fixture_object();
    let cam = fixture_camera(&truth).unwrap();
    let view = render(&truth, &geometry, &cam, 0.0, 0).unwrap();

    let mut tiny = view.detection.clone();
    let mut bits = vec![false; tiny.mask.bits.len()];
    bits.iter_mut().skip(240 * 640 + 320).take(10).for_each(|b| *b = true);
    tiny.mask = Mask2D::new(640, 480, bits).unwrap();
    assert!(matches!(
        lift_detection(&tiny, &view.depth, &cam, &LiftOptions::default()),
        Err(Error::InsufficientDepth { valid: 10, required: 50 })
    ));

    let mut off = view.detection.clone();
    off.handle_px = (700.0, 10.0);
    assert!(matches!(lift_detection(&off, &view.depth, &cam, &LiftOptions::default()), Err(Error::OutOfBounds { .. })));

    let mut small = view.detection.clone();
    small.mask = Mask2D::empty(320, 240);
    assert!(matches!(lift_detection(&small, &view.depth, &cam, &LiftOptions::default()), Err(Error::DimensionMismatch(_))));
}
