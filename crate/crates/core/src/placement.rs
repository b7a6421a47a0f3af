//! Base-placement mining: every grid cell and candidate heading around the
//! handle is scored by how many waypoints the sequential planner decodes
//! from a neutral arm there. The best cell becomes the navigation target.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::articulation::{ArticulationParams, WaypointTrajectory};
use crate::error::{Error, Result};
use crate::geometry::{Vec2, Vec3};
use crate::planner::{seq_ik, SeqIkOptions};
use crate::robot::{KinematicModel, ResidualMode};
use crate::scene::{chassis_collides, Scene};

/// Grid of candidate base positions in the handle frame: origin at the
/// handle's floor projection, +x into the object, +y to the robot's left
/// when facing the object.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementGrid {
    /// Handle-frame coordinates of cell (0, 0).
    pub origin: Vec2,
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
    /// Candidate base headings in the handle frame.
    pub yaws: Vec<f64>,
}

impl Default for PlacementGrid {
    fn default() -> Self {
        Self { origin: Vec2::new(-1.2, -1.0), spacing: 0.05, nx: 25, ny: 41, yaws: default_yaws(8) }
    }
}

/// `n` headings evenly spaced over (-pi, pi].
pub fn default_yaws(n: usize) -> Vec<f64> {
    let step = 2.0 * PI / n as f64;
    let k0 = -(((n - 1) / 2) as i64);
    (0..n as i64).map(|k| (k0 + k) as f64 * step).collect()
}

impl PlacementGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.spacing > 0.0) || self.nx == 0 || self.ny == 0 || self.yaws.is_empty() {
            return Err(Error::Schema("placement grid needs spacing > 0, nx, ny >= 1 and at least one yaw".into()));
        }
        Ok(())
    }

    pub fn cell(&self, ix: usize, iy: usize) -> Vec2 {
        self.origin + Vec2::new(ix as f64, iy as f64) * self.spacing
    }
}

/// Rigid 2D frame attached to the handle footprint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandleFrame {
    pub origin: Vec2,
    /// Heading of the frame's +x axis (into the object) in the base frame.
    pub yaw: f64,
}

impl HandleFrame {
    pub fn of(params: &ArticulationParams) -> Self {
        let into = Vec2::new(-params.normal.x, -params.normal.y);
        Self { origin: params.handle.xy(), yaw: into.y.atan2(into.x) }
    }

    pub fn to_world(&self, p: Vec2, yaw: f64) -> (Vec2, f64) {
        let (s, c) = self.yaw.sin_cos();
        (self.origin + Vec2::new(c * p.x - s * p.y, s * p.x + c * p.y), self.yaw + yaw)
    }

    pub fn to_local(&self, p: Vec2, yaw: f64) -> (Vec2, f64) {
        let (s, c) = self.yaw.sin_cos();
        let d = p - self.origin;
        (Vec2::new(c * d.x + s * d.y, -s * d.x + c * d.y), crate::geometry::wrap_angle(yaw - self.yaw))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub grid: PlacementGrid,
    /// Row-major by `iy * nx + ix`: waypoints achieved, best over headings.
    pub scores: Vec<usize>,
    /// Heading (handle frame) that achieved the cell's score.
    pub best_yaw: Vec<f64>,
    pub waypoints: usize,
}

impl Heatmap {
    pub fn score(&self, ix: usize, iy: usize) -> usize {
        self.scores[iy * self.grid.nx + ix]
    }

    pub fn max_score(&self) -> usize {
        self.scores.iter().copied().max().unwrap_or(0)
    }

    /// Size of the largest 4-connected group of cells scoring `score`.
    pub fn largest_region(&self, score: usize) -> usize {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let mut seen = vec![false; nx * ny];
        let mut best = 0;
        for start in 0..nx * ny {
            if seen[start] || self.scores[start] != score {
                continue;
            }
            let mut stack = vec![start];
            seen[start] = true;
            let mut size = 0;
            while let Some(k) = stack.pop() {
                size += 1;
                let (ix, iy) = (k % nx, k / nx);
                let mut push = |j: usize| {
                    if !seen[j] && self.scores[j] == score {
                        seen[j] = true;
                        stack.push(j);
                    }
                };
                if ix > 0 {
                    push(k - 1);
                }
                if ix + 1 < nx {
                    push(k + 1);
                }
                if iy > 0 {
                    push(k - nx);
                }
                if iy + 1 < ny {
                    push(k + nx);
                }
            }
            best = best.max(size);
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavigationTarget {
    /// Handle-frame base position and heading.
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub score: usize,
    pub ix: usize,
    pub iy: usize,
}

impl NavigationTarget {
    /// Base-frame position and heading for the object `params`.
    pub fn base_pose(&self, params: &ArticulationParams) -> (Vec2, f64) {
        HandleFrame::of(params).to_world(Vec2::new(self.x, self.y), self.yaw)
    }
}

/// Score of one base placement: 0 when the chassis starts in collision or
/// the first waypoint is out of horizontal reach, else waypoints decoded.
pub fn score_placement(
    base: Vec2,
    yaw: f64,
    traj: &WaypointTrajectory,
    scene: &Scene,
    model: &KinematicModel,
    mode: ResidualMode,
    options: &SeqIkOptions,
) -> usize {
    let theta0 = model.neutral(base, yaw);
    if chassis_collides(&theta0, scene, model) {
        return 0;
    }
    let first: Vec3 = traj.poses[0].translation.vector;
    if (first.xy() - base).norm() > model.max_horizontal_reach() + options.ik.pos_tol {
        return 0;
    }
    seq_ik(&theta0, traj, scene, model, mode, options).achieved
}

fn mine_cell(
    grid: &PlacementGrid,
    frame: &HandleFrame,
    k: usize,
    traj: &WaypointTrajectory,
    scene: &Scene,
    model: &KinematicModel,
    mode: ResidualMode,
    options: &SeqIkOptions,
) -> (usize, f64) {
    let (ix, iy) = (k % grid.nx, k / grid.nx);
    let local = grid.cell(ix, iy);
    let mut best = (0usize, f64::NAN);
    for &yaw in &grid.yaws {
        let (base, world_yaw) = frame.to_world(local, yaw);
        let s = score_placement(base, world_yaw, traj, scene, model, mode, options);
        let better = best.1.is_nan() || s > best.0 || (s == best.0 && yaw.abs() < best.1.abs());
        if better {
            best = (s, yaw);
        }
    }
    best
}

/// Scores every cell of `grid` for opening the object along `traj`. Cells
/// are evaluated in parallel; the result does not depend on the worker
/// count.
pub fn mine(
    params: &ArticulationParams,
    traj: &WaypointTrajectory,
    scene: &Scene,
    model: &KinematicModel,
    grid: &PlacementGrid,
    mode: ResidualMode,
    options: &SeqIkOptions,
) -> Result<Heatmap> {
    grid.validate()?;
    let frame = HandleFrame::of(params);
    let cells: Vec<(usize, f64)> = (0..grid.nx * grid.ny)
        .into_par_iter()
        .map(|k| mine_cell(grid, &frame, k, traj, scene, model, mode, options))
        .collect();
    let (scores, best_yaw) = cells.into_iter().unzip();
    Ok(Heatmap { grid: grid.clone(), scores, best_yaw, waypoints: traj.len() })
}

/// Highest-scoring cell; ties go to the cell nearest the handle footprint,
/// then the smallest |heading|, then the lowest (ix, iy).
pub fn navigation_target(heatmap: &Heatmap) -> Result<NavigationTarget> {
    let g = &heatmap.grid;
    if heatmap.scores.is_empty() {
        return Err(Error::EmptyHeatmap);
    }
    let mut best: Option<NavigationTarget> = None;
    for ix in 0..g.nx {
        for iy in 0..g.ny {
            let k = iy * g.nx + ix;
            let p = g.cell(ix, iy);
            let cand = NavigationTarget { x: p.x, y: p.y, yaw: heatmap.best_yaw[k], score: heatmap.scores[k], ix, iy };
            let take = match &best {
                None => true,
                Some(b) => {
                    let key = |t: &NavigationTarget| (Vec2::new(t.x, t.y).norm(), t.yaw.abs());
                    let (cd, cy) = key(&cand);
                    let (bd, by) = key(b);
                    cand.score > b.score || (cand.score == b.score && (cd < bd || (cd == bd && cy < by)))
                }
            };
            if take {
                best = Some(cand);
            }
        }
    }
    best.ok_or(Error::EmptyHeatmap)
}
