//! Analytic pinhole renderer for synthetic perception fixtures: a flat
//! rectangular face in front of a parallel back wall.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::articulation::{ArticulationParams, HandleOrientation};
use crate::error::{Error, Result};
use crate::geometry::{pose_from_parts, project, CameraModel, DepthImage, Plane, Vec3};
use crate::perception::{face_right, Detection2D, Mask2D};
use crate::scene::ObjectGeometry;

/// Distance from the face to the background wall behind it.
pub const BACKGROUND_OFFSET: f64 = 0.6;

/// Camera looking along base +x from `position`, pitched down by `pitch`.
pub fn forward_camera(position: Vec3, pitch: f64, width: u32, height: u32, focal: f64) -> Result<CameraModel> {
    // Camera axes in the base frame: X right (-y), Y down (-z), Z forward (+x).
    let level = Matrix3::from_columns(&[-Vec3::y(), -Vec3::z(), Vec3::x()]);
    let tilt = UnitQuaternion::from_axis_angle(&Vec3::y_axis(), pitch);
    let rot = tilt * UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(level));
    CameraModel::new(
        focal,
        focal,
        (width as f64 - 1.0) * 0.5,
        (height as f64 - 1.0) * 0.5,
        width,
        height,
        pose_from_parts(position, rot),
    )
}

/// Default fixture camera: 640x480, f = 600 px, 1.5 m in front of the
/// handle at 1.2 m height, pitched so the handle is near the image centre.
pub fn fixture_camera(params: &ArticulationParams) -> Result<CameraModel> {
    let h = params.handle;
    let pos = Vec3::new(h.x - 1.5, h.y, 1.2);
    let pitch = (pos.z - h.z).atan2(1.5);
    forward_camera(pos, pitch, 640, 480, 600.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedView {
    pub depth: DepthImage,
    pub detection: Detection2D,
    /// Face corners in the base frame: upper-left, upper-right, lower-right,
    /// lower-left as seen by the robot.
    pub corners: [Vec3; 4],
}

/// Face rectangle of `params` with extents `geometry`.
pub fn face_corners(params: &ArticulationParams, geometry: &ObjectGeometry) -> [Vec3; 4] {
    let right = face_right(&params.normal);
    let up = params.normal.cross(&right);
    let h = params.handle;
    let g = geometry;
    [
        h - right * g.left + up * g.above,
        h + right * g.right + up * g.above,
        h + right * g.right - up * g.below,
        h - right * g.left - up * g.below,
    ]
}

fn inside_rect(p: &Vec3, c: &[Vec3; 4]) -> bool {
    let (o, a, b) = (c[3], c[2] - c[3], c[0] - c[3]);
    let d = p - o;
    let (s, t) = (d.dot(&a) / a.norm_squared(), d.dot(&b) / b.norm_squared());
    (0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&t)
}

/// Renders the closed face of `params` as seen by `camera`. Depth noise is
/// Gaussian with standard deviation `noise_sigma` meters, drawn from a
/// stream seeded by `seed`.
pub fn render(
    params: &ArticulationParams,
    geometry: &ObjectGeometry,
    camera: &CameraModel,
    noise_sigma: f64,
    seed: u64,
) -> Result<RenderedView> {
    let corners = face_corners(params, geometry);
    let n = params.normal;
    let face = Plane { normal: n, offset: n.dot(&params.handle) };
    let wall = Plane { normal: n, offset: face.offset - BACKGROUND_OFFSET };
    let noise = Normal::new(0.0, noise_sigma.max(0.0)).map_err(|e| Error::DegenerateInput(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let (w, h) = (camera.width, camera.height);
    let mut data = vec![0u16; w as usize * h as usize];
    let mut bits = vec![false; data.len()];
    for v in 0..h {
        for u in 0..w {
            let k = (v * w + u) as usize;
            let (o, d) = camera.ray_in_base(u as f64, v as f64);
            let hit = match face.intersect_ray(&o, &d) {
                Some(p) if inside_rect(&p, &corners) => {
                    bits[k] = true;
                    Some(p)
                }
                _ => wall.intersect_ray(&o, &d),
            };
            let Some(p) = hit else { continue };
            let z = camera.to_camera(&p).z;
            let z = if noise_sigma > 0.0 { z + noise.sample(&mut rng) } else { z };
            let mm = (z * 1000.0).round();
            data[k] = if mm >= 1.0 && mm <= u16::MAX as f64 { mm as u16 } else { 0 };
        }
    }
    let handle_px = project(&camera.to_camera(&params.handle), camera)
        .ok_or_else(|| Error::DegenerateInput("handle is behind the camera".into()))?;
    let detection = Detection2D {
        mask: Mask2D::new(w, h, bits)?,
        atype: params.atype,
        handle_px,
        handle_orientation: params.handle_orientation,
        score: 1.0,
    };
    Ok(RenderedView { depth: DepthImage::new(w, h, data)?, detection, corners })
}

/// Points sampled along a 10 cm handle bar in the face plane, with
/// isotropic Gaussian jitter.
pub fn handle_bar_points(params: &ArticulationParams, count: usize, jitter: f64, seed: u64) -> Vec<Vec3> {
    let right = face_right(&params.normal);
    let along = match params.handle_orientation {
        HandleOrientation::Horizontal => right,
        HandleOrientation::Vertical => params.normal.cross(&right),
    };
    let noise = Normal::new(0.0, jitter.max(0.0)).expect("finite jitter");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let s = if count > 1 { i as f64 / (count - 1) as f64 - 0.5 } else { 0.0 };
            let mut p = params.handle + along * (0.1 * s);
            if jitter > 0.0 {
                p += Vec3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
            }
            p
        })
        .collect()
}
