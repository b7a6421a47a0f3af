use nalgebra::{Matrix3, SymmetricEigen};

use super::Vec3;
use crate::error::{Error, Result};

/// The set `{p : normal . p = offset}` with a unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub normal: Vec3,
    pub offset: f64,
}

impl Plane {
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }

    /// Intersection of the ray `origin + t * dir` (t > 0) with the plane.
    pub fn intersect_ray(&self, origin: &Vec3, dir: &Vec3) -> Option<Vec3> {
        let denom = self.normal.dot(dir);
        if denom.abs() < 1e-12 {
            return None;
        }
        let t = (self.offset - self.normal.dot(origin)) / denom;
        (t > 0.0).then(|| origin + dir * t)
    }
}

/// Least-squares plane through `points`: the normal is the eigenvector of
/// the smallest eigenvalue of the centered covariance, oriented toward
/// `view_origin`.
pub fn fit_plane(points: &[Vec3], view_origin: &Vec3) -> Result<Plane> {
    if points.len() < 3 {
        return Err(Error::DegenerateInput(format!("plane fit needs >= 3 points, got {}", points.len())));
    }
    let n = points.len() as f64;
    let centroid = points.iter().sum::<Vec3>() / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    cov /= n;

    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (l1, l2) = (eig.eigenvalues[order[1]], eig.eigenvalues[order[2]]);
    if !(l2 > 0.0) || l1 <= 1e-12 * l2 {
        return Err(Error::DegenerateInput("points are collinear or coincident".into()));
    }

    let mut normal: Vec3 = eig.eigenvectors.column(order[0]).into_owned().normalize();
    if normal.dot(&(view_origin - centroid)) < 0.0 {
        normal = -normal;
    }
    Ok(Plane { normal, offset: normal.dot(&centroid) })
}

/// [`fit_plane`] followed by one pass dropping points whose residual
/// exceeds three times the RMS residual, then a refit.
pub fn fit_plane_robust(points: &[Vec3], view_origin: &Vec3) -> Result<Plane> {
    let first = fit_plane(points, view_origin)?;
    let rms = (points.iter().map(|p| first.signed_distance(p).powi(2)).sum::<f64>() / points.len() as f64).sqrt();
    if rms == 0.0 {
        return Ok(first);
    }
    let kept: Vec<Vec3> = points.iter().filter(|p| first.signed_distance(p).abs() <= 3.0 * rms).copied().collect();
    if kept.len() < 3 || kept.len() == points.len() {
        return Ok(first);
    }
    fit_plane(&kept, view_origin)
}
