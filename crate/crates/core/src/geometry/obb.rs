use nalgebra::{Matrix3, Point3, UnitQuaternion};

use super::{Pose, Vec3};

/// Box with arbitrary orientation: `rotation` maps box-local axes to the
/// parent frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    pub center: Vec3,
    pub half_extents: Vec3,
    pub rotation: UnitQuaternion<f64>,
}

impl OrientedBox {
    pub fn new(center: Vec3, half_extents: Vec3, rotation: UnitQuaternion<f64>) -> Self {
        debug_assert!(half_extents.iter().all(|h| *h > 0.0), "half extents must be positive");
        Self { center, half_extents, rotation }
    }

    pub fn axis_aligned(center: Vec3, half_extents: Vec3) -> Self {
        Self::new(center, half_extents, UnitQuaternion::identity())
    }

    /// Box spanning `[lo, hi]` along the axes of `rotation` (coordinates in
    /// the rotated frame).
    pub fn from_local_bounds(lo: Vec3, hi: Vec3, rotation: UnitQuaternion<f64>) -> Self {
        Self::new(rotation * ((lo + hi) * 0.5), (hi - lo) * 0.5, rotation)
    }

    pub fn transformed(&self, pose: &Pose) -> Self {
        Self {
            center: (pose * Point3::from(self.center)).coords,
            half_extents: self.half_extents,
            rotation: pose.rotation * self.rotation,
        }
    }

    pub fn axes(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    pub fn contains_point(&self, p: &Vec3, tol: f64) -> bool {
        let local = self.rotation.inverse() * (p - self.center);
        (0..3).all(|i| local[i].abs() <= self.half_extents[i] + tol)
    }

    pub fn corners(&self) -> [Vec3; 8] {
        let a = self.axes();
        let h = self.half_extents;
        let mut out = [Vec3::zeros(); 8];
        for (k, c) in out.iter_mut().enumerate() {
            let s = |bit: usize| if k & (1 << bit) == 0 { -1.0 } else { 1.0 };
            *c = self.center + a.column(0) * (s(0) * h.x) + a.column(1) * (s(1) * h.y) + a.column(2) * (s(2) * h.z);
        }
        out
    }

    /// Separating-axis test over the 15 candidate axes. Boxes that only
    /// touch do not intersect.
    pub fn intersects(&self, other: &OrientedBox) -> bool {
        // EPS keeps degenerate edge-edge axes (parallel edges) from
        // separating; SLACK absorbs that inflation on the face axes so
        // exactly touching faces still separate.
        const EPS: f64 = 1e-9;
        const SLACK: f64 = 1e-7;
        let a_axes = self.axes();
        let b_axes = other.axes();
        let (ea, eb) = (self.half_extents, other.half_extents);
        let t_world = other.center - self.center;
        let t = a_axes.transpose() * t_world;
        let r = a_axes.transpose() * b_axes;
        let abs_r = r.map(|x| x.abs() + EPS);

        for i in 0..3 {
            let ra = ea[i];
            let rb = eb[0] * abs_r[(i, 0)] + eb[1] * abs_r[(i, 1)] + eb[2] * abs_r[(i, 2)];
            if t[i].abs() >= ra + rb - SLACK {
                return false;
            }
        }
        for j in 0..3 {
            let ra = ea[0] * abs_r[(0, j)] + ea[1] * abs_r[(1, j)] + ea[2] * abs_r[(2, j)];
            let rb = eb[j];
            let proj = t[0] * r[(0, j)] + t[1] * r[(1, j)] + t[2] * r[(2, j)];
            if proj.abs() >= ra + rb - SLACK {
                return false;
            }
        }
        for i in 0..3 {
            let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
            for j in 0..3 {
                let (j1, j2) = ((j + 1) % 3, (j + 2) % 3);
                let ra = ea[i1] * abs_r[(i2, j)] + ea[i2] * abs_r[(i1, j)];
                let rb = eb[j1] * abs_r[(i, j2)] + eb[j2] * abs_r[(i, j1)];
                let proj = t[i2] * r[(i1, j)] - t[i1] * r[(i2, j)];
                if proj.abs() >= ra + rb {
                    return false;
                }
            }
        }
        true
    }
}
