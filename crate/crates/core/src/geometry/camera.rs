use nalgebra::Point3;

use super::{Pose, Vec3};
use crate::error::{Error, Result};

/// Pinhole camera. Camera frame: +X right, +Y down, +Z forward.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    /// Maps camera-frame points into the robot base frame.
    pub pose_in_base: Pose,
}

impl CameraModel {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32, pose_in_base: Pose) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(Error::DegenerateInput(format!("focal lengths must be positive, got {fx}, {fy}")));
        }
        if !(0.0..width as f64).contains(&cx) || !(0.0..height as f64).contains(&cy) {
            return Err(Error::DegenerateInput(format!(
                "principal point ({cx}, {cy}) outside {width}x{height}"
            )));
        }
        Ok(Self { fx, fy, cx, cy, width, height, pose_in_base })
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u <= (self.width - 1) as f64 && v <= (self.height - 1) as f64
    }

    /// Un-normalized ray direction (z = 1) through pixel (u, v), camera frame.
    pub fn ray(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    pub fn origin_in_base(&self) -> Vec3 {
        self.pose_in_base.translation.vector
    }

    pub fn to_base(&self, p_cam: &Vec3) -> Vec3 {
        (self.pose_in_base * Point3::from(*p_cam)).coords
    }

    pub fn to_camera(&self, p_base: &Vec3) -> Vec3 {
        (self.pose_in_base.inverse() * Point3::from(*p_base)).coords
    }

    /// Base-frame ray (origin, unit direction) through pixel (u, v).
    pub fn ray_in_base(&self, u: f64, v: f64) -> (Vec3, Vec3) {
        let d = self.pose_in_base.rotation * self.ray(u, v);
        (self.origin_in_base(), d.normalize())
    }
}

/// 16-bit depth raster in millimeters; 0 marks an invalid sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u16>,
}

impl DepthImage {
    pub fn new(width: u32, height: u32, data: Vec<u16>) -> Result<Self> {
        if data.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch(format!(
                "depth data has {} samples, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn zeros(width: u32, height: u32) -> Self {
        Self { width, height, data: vec![0; width as usize * height as usize] }
    }

    pub fn raw(&self, u: u32, v: u32) -> u16 {
        self.data[(v * self.width + u) as usize]
    }

    /// Depth in meters at integer pixel (u, v), `None` when invalid or outside.
    pub fn meters(&self, u: i64, v: i64) -> Option<f64> {
        if u < 0 || v < 0 || u >= self.width as i64 || v >= self.height as i64 {
            return None;
        }
        match self.raw(u as u32, v as u32) {
            0 => None,
            mm => Some(mm as f64 / 1000.0),
        }
    }
}

/// Lifts pixel (u, v) at metric depth `depth_m` into the camera frame.
pub fn backproject(pixel: (f64, f64), depth_m: f64, camera: &CameraModel) -> Result<Vec3> {
    if !(depth_m > 0.0) {
        return Err(Error::InvalidDepth(depth_m));
    }
    let (u, v) = pixel;
    if !camera.contains(u, v) {
        return Err(Error::OutOfBounds { u, v, width: camera.width, height: camera.height });
    }
    Ok(camera.ray(u, v) * depth_m)
}

/// Projects a camera-frame point to pixel coordinates. `None` behind the camera.
pub fn project(p_cam: &Vec3, camera: &CameraModel) -> Option<(f64, f64)> {
    if p_cam.z <= 0.0 {
        return None;
    }
    Some((camera.fx * p_cam.x / p_cam.z + camera.cx, camera.fy * p_cam.y / p_cam.z + camera.cy))
}
