//! Geometric lifting of a 2D detection (mask, handle pixel, type) into 3D
//! articulation parameters in the robot base frame.

use crate::articulation::{up, ArticulationParams, ArticulationType, HandleOrientation, HingeAxis};
use crate::error::{Error, Result};
use crate::geometry::{
    backproject, convex_hull, fit_plane, fit_plane_robust, min_area_rect, simplify_to_quad, CameraModel, DepthImage,
    Plane, Vec2, Vec3,
};

/// Binary segmentation raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask2D {
    pub width: u32,
    pub height: u32,
    pub bits: Vec<bool>,
}

impl Mask2D {
    pub fn new(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch(format!(
                "mask has {} pixels, expected {}x{}",
                bits.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, bits })
    }

    pub fn empty(width: u32, height: u32) -> Self {
        Self { width, height, bits: vec![false; width as usize * height as usize] }
    }

    /// False outside the raster.
    pub fn get(&self, u: i64, v: i64) -> bool {
        u >= 0 && v >= 0 && u < self.width as i64 && v < self.height as i64 && self.bits[(v * self.width as i64 + u) as usize]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    fn pixels(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        let w = self.width as i64;
        self.bits.iter().enumerate().filter(|(_, b)| **b).map(move |(k, _)| (k as i64 % w, k as i64 / w))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection2D {
    pub mask: Mask2D,
    pub atype: ArticulationType,
    /// Handle keypoint (u, v) in pixels.
    pub handle_px: (f64, f64),
    pub handle_orientation: HandleOrientation,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftOptions {
    /// Minimum number of masked pixels with valid depth.
    pub min_valid_depth: usize,
    /// Refit the plane after dropping outliers.
    pub robust_plane: bool,
    /// Lift quad corners by ray-plane intersection only, ignoring depth.
    pub corners_on_plane: bool,
}

impl Default for LiftOptions {
    fn default() -> Self {
        Self { min_valid_depth: 50, robust_plane: false, corners_on_plane: false }
    }
}

/// Everything the lifting computes on the way to the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftOutput {
    pub params: ArticulationParams,
    pub plane: Plane,
    /// Quad corners in the base frame, in image order.
    pub corners: [Vec3; 4],
    pub warnings: Vec<String>,
}

/// Median of valid depths in the 5x5 window centred on (u, v).
fn window_median(depth: &DepthImage, u: i64, v: i64) -> Option<f64> {
    let mut vals: Vec<f64> = (-2..=2)
        .flat_map(|dv| (-2..=2).map(move |du| (du, dv)))
        .filter_map(|(du, dv)| depth.meters(u + du, v + dv))
        .collect();
    if vals.is_empty() {
        return None;
    }
    vals.sort_by(f64::total_cmp);
    Some(vals[vals.len() / 2])
}

fn on_plane(pixel: (f64, f64), plane: &Plane, camera: &CameraModel) -> Result<Vec3> {
    let (o, d) = camera.ray_in_base(pixel.0, pixel.1);
    plane.intersect_ray(&o, &d).ok_or_else(|| Error::DegeneratePlane(format!("pixel ray ({}, {}) misses the fitted plane", pixel.0, pixel.1)))
}

fn lift_at_depth(pixel: (f64, f64), depth_m: f64, camera: &CameraModel) -> Result<Vec3> {
    Ok(camera.to_base(&backproject(pixel, depth_m, camera)?))
}

/// Outline of the mask as the corners of its boundary pixels.
fn outline(mask: &Mask2D) -> Vec<Vec2> {
    let mut pts = Vec::new();
    for (u, v) in mask.pixels() {
        let interior = mask.get(u - 1, v) && mask.get(u + 1, v) && mask.get(u, v - 1) && mask.get(u, v + 1);
        if interior {
            continue;
        }
        for (du, dv) in [(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)] {
            pts.push(Vec2::new(u as f64 + du, v as f64 + dv));
        }
    }
    pts
}

/// Lifts a detection into the base frame: plane fit over the masked depth,
/// handle and quad corners lifted from depth (plane fallback), hinge axis
/// through the quad edge on the hinge side.
pub fn lift_detection_full(
    det: &Detection2D,
    depth: &DepthImage,
    camera: &CameraModel,
    options: &LiftOptions,
) -> Result<LiftOutput> {
    let m = &det.mask;
    if m.width != depth.width || m.height != depth.height || m.width != camera.width || m.height != camera.height {
        return Err(Error::DimensionMismatch(format!(
            "mask {}x{}, depth {}x{}, camera {}x{}",
            m.width, m.height, depth.width, depth.height, camera.width, camera.height
        )));
    }
    let mut warnings = Vec::new();

    let mut points = Vec::new();
    for (u, v) in m.pixels() {
        if let Some(d) = depth.meters(u, v) {
            points.push(lift_at_depth((u as f64, v as f64), d, camera)?);
        }
    }
    if points.len() < options.min_valid_depth {
        return Err(Error::InsufficientDepth { valid: points.len(), required: options.min_valid_depth });
    }
    let view = camera.origin_in_base();
    let plane = if options.robust_plane { fit_plane_robust(&points, &view) } else { fit_plane(&points, &view) }
        .map_err(|e| match e {
            Error::DegenerateInput(m) => Error::DegeneratePlane(m),
            e => e,
        })?;

    let (hu, hv) = det.handle_px;
    if !camera.contains(hu, hv) {
        return Err(Error::OutOfBounds { u: hu, v: hv, width: camera.width, height: camera.height });
    }
    let (iu, iv) = (hu.round() as i64, hv.round() as i64);
    if !m.get(iu, iv) {
        warnings.push(format!("handle pixel ({hu}, {hv}) lies outside the mask"));
    }
    let handle = match depth.meters(iu, iv).or_else(|| window_median(depth, iu, iv)) {
        Some(d) => lift_at_depth(det.handle_px, d, camera)?,
        None => on_plane(det.handle_px, &plane, camera)?,
    };

    let hull = convex_hull(&outline(m))?;
    let quad = match simplify_to_quad(&hull) {
        Ok(q) => q,
        Err(Error::Triangle) => min_area_rect(&hull.vertices)?,
        Err(e) => return Err(e),
    };
    let mut corners = [Vec3::zeros(); 4];
    for (c, q) in corners.iter_mut().zip(&quad) {
        let (ru, rv) = (q.x.round() as i64, q.y.round() as i64);
        // The nearest pixel inside the mask: corners sit on pixel borders.
        let px = [(ru, rv), (ru - 1, rv), (ru, rv - 1), (ru - 1, rv - 1)].into_iter().find(|&(u, v)| m.get(u, v));
        let d = if options.corners_on_plane { None } else { px.and_then(|(u, v)| depth.meters(u, v)) };
        let pixel = (q.x.clamp(0.0, (camera.width - 1) as f64), q.y.clamp(0.0, (camera.height - 1) as f64));
        *c = match d {
            Some(d) => lift_at_depth(pixel, d, camera)?,
            None => on_plane(pixel, &plane, camera)?,
        };
    }

    let normal = plane.normal;
    let params = if det.atype.is_hinged() {
        let axis = hinge_axis_from_corners(det.atype, &corners, &normal)?;
        ArticulationParams::hinged(det.atype, handle, normal, det.handle_orientation, axis)
    } else {
        ArticulationParams::drawer(handle, normal, det.handle_orientation)
    };
    Ok(LiftOutput { params, plane, corners, warnings })
}

pub fn lift_detection(
    det: &Detection2D,
    depth: &DepthImage,
    camera: &CameraModel,
    options: &LiftOptions,
) -> Result<ArticulationParams> {
    lift_detection_full(det, depth, camera, options).map(|o| o.params)
}

/// In-face unit vector pointing to the robot's right for a face with
/// outward `normal`.
pub fn face_right(normal: &Vec3) -> Vec3 {
    let r = (-normal).cross(&up());
    if r.norm() < 1e-9 {
        Vec3::y()
    } else {
        r.normalize()
    }
}

/// Axis through the two corners on the hinge side: leftmost pair for
/// left hinges, rightmost for right hinges, lowest for bottom hinges.
/// Vertical axes point up; bottom axes point to the robot's left.
pub fn hinge_axis_from_corners(atype: ArticulationType, corners: &[Vec3; 4], normal: &Vec3) -> Result<HingeAxis> {
    let right = face_right(normal);
    let key = |c: &Vec3| match atype {
        ArticulationType::CabinetLeftHinge => c.dot(&right),
        ArticulationType::CabinetRightHinge => -c.dot(&right),
        ArticulationType::BottomHinge => c.dot(&up()),
        ArticulationType::Drawer => 0.0,
    };
    let mut idx = [0usize, 1, 2, 3];
    idx.sort_by(|&a, &b| key(&corners[a]).total_cmp(&key(&corners[b])));
    let (a, b) = (corners[idx[0]], corners[idx[1]]);
    let d = b - a;
    if d.norm() < 0.02 {
        return Err(Error::DegenerateQuad(format!("hinge-side corners only {:.4} m apart", d.norm())));
    }
    let mut dir = d.normalize();
    let reference = if atype == ArticulationType::BottomHinge { -right } else { up() };
    if dir.dot(&reference) < 0.0 {
        dir = -dir;
    }
    Ok(HingeAxis { point: a, direction: dir })
}

/// Handle orientation from the handle segment's 3D points: horizontal iff
/// the spread along the in-face horizontal exceeds the vertical spread.
pub fn orientation_from_points(points: &[Vec3], normal: &Vec3) -> Result<HandleOrientation> {
    const MIN_POINTS: usize = 10;
    if points.len() < MIN_POINTS {
        return Err(Error::InsufficientPoints { got: points.len(), required: MIN_POINTS });
    }
    let horizontal = face_right(normal);
    let var = |axis: &Vec3| {
        let vals: Vec<f64> = points.iter().map(|p| p.dot(axis)).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / vals.len() as f64
    };
    Ok(if var(&horizontal) >= var(&up()) { HandleOrientation::Horizontal } else { HandleOrientation::Vertical })
}
