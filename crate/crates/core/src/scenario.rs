//! Scenario files and run manifests. Files hold lengths in meters and
//! angles in degrees; everything is converted to radians on load. Unknown
//! keys are rejected everywhere.

use std::path::{Path, PathBuf};

use nalgebra::{Quaternion, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::articulation::{ArticulationParams, ArticulationType, HandleOrientation, HingeAxis};
use crate::error::{Error, Result};
use crate::execution::{ErrorInjection, ErrorRanges, GraspModel, DEFAULT_RADIUS_DELTAS};
use crate::geometry::{pose_from_parts, CameraModel, OrientedBox, Vec2, Vec3};
use crate::placement::{default_yaws, PlacementGrid};
use crate::planner::SeqIkOptions;
use crate::robot::{ArmSide, KinematicModel, LinkDims};
use crate::scene::ObjectGeometry;

/// Articulation parameters as stored in files. `radius` is derived from the
/// handle and axis; when given it must agree with them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsDto {
    #[serde(rename = "type")]
    pub atype: ArticulationType,
    pub handle: [f64; 3],
    pub normal: [f64; 3],
    pub handle_orientation: HandleOrientation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hinge_axis: Option<AxisDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<ObjectGeometry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisDto {
    pub point: [f64; 3],
    pub direction: [f64; 3],
}

/// Radius agreement required between a stored radius and the axis.
const RADIUS_TOL: f64 = 1e-6;

impl ParamsDto {
    pub fn from_params(p: &ArticulationParams) -> Self {
        Self {
            atype: p.atype,
            handle: p.handle.into(),
            normal: p.normal.into(),
            handle_orientation: p.handle_orientation,
            hinge_axis: p.hinge_axis.map(|a| AxisDto { point: a.point.into(), direction: a.direction.into() }),
            radius: p.radius,
            geometry: None,
        }
    }

    pub fn to_params(&self) -> Result<ArticulationParams> {
        let normal = Vec3::from(self.normal);
        if !(normal.norm() > 1e-9) {
            return Err(Error::Schema("object normal must be nonzero".into()));
        }
        let handle = Vec3::from(self.handle);
        let params = match (self.atype.is_hinged(), self.hinge_axis) {
            (false, None) => ArticulationParams::drawer(handle, normal, self.handle_orientation),
            (false, Some(_)) => return Err(Error::Schema("a drawer has no hinge_axis".into())),
            (true, None) => return Err(Error::MissingAxis),
            (true, Some(a)) => {
                let direction = Vec3::from(a.direction);
                if !(direction.norm() > 1e-9) {
                    return Err(Error::Schema("hinge axis direction must be nonzero".into()));
                }
                ArticulationParams::hinged(
                    self.atype,
                    handle,
                    normal,
                    self.handle_orientation,
                    HingeAxis { point: Vec3::from(a.point), direction },
                )
            }
        };
        match (self.radius, params.radius) {
            (Some(_), None) => return Err(Error::Schema("a drawer has no radius".into())),
            (Some(r), Some(d)) if (r - d).abs() > RADIUS_TOL => {
                return Err(Error::Schema(format!("radius {r} disagrees with the axis distance {d}")));
            }
            _ => {}
        }
        Ok(params)
    }
}

/// Pinhole camera file. `rotation` is the unit quaternion (w, x, y, z)
/// mapping camera axes (X right, Y down, Z forward) into the base frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraDto {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub position: [f64; 3],
    pub rotation: [f64; 4],
}

impl CameraDto {
    pub fn from_camera(c: &CameraModel) -> Self {
        let q = c.pose_in_base.rotation.into_inner();
        Self {
            fx: c.fx,
            fy: c.fy,
            cx: c.cx,
            cy: c.cy,
            width: c.width,
            height: c.height,
            position: c.pose_in_base.translation.vector.into(),
            rotation: [q.w, q.i, q.j, q.k],
        }
    }

    pub fn to_camera(&self) -> Result<CameraModel> {
        let [w, x, y, z] = self.rotation;
        let q = Quaternion::new(w, x, y, z);
        if !(q.norm() > 1e-9) {
            return Err(Error::Schema("camera rotation quaternion must be nonzero".into()));
        }
        let pose = pose_from_parts(Vec3::from(self.position), UnitQuaternion::from_quaternion(q));
        CameraModel::new(self.fx, self.fy, self.cx, self.cy, self.width, self.height, pose)
    }
}

/// Detection inputs for perception. Paths are relative to the scenario
/// file; type and orientation default to the object block's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionBlock {
    pub depth: PathBuf,
    pub mask: PathBuf,
    pub camera: PathBuf,
    pub handle_px: [f64; 2],
    #[serde(default, rename = "type", skip_serializing_if = "Option::is_none")]
    pub atype: Option<ArticulationType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub handle_orientation: Option<HandleOrientation>,
    #[serde(default = "one")]
    pub score: f64,
    #[serde(default = "default_min_valid_depth")]
    pub min_valid_depth: usize,
}

fn one() -> f64 {
    1.0
}

fn default_min_valid_depth() -> usize {
    50
}

/// Overrides of the default robot. Angle limits are in degrees.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobotBlock {
    pub mast_offset: Option<[f64; 2]>,
    pub arm_side: Option<ArmSide>,
    pub arm_retracted: Option<f64>,
    pub tip_height: Option<f64>,
    pub fingertip_length: Option<f64>,
    pub closure_shrink: Option<f64>,
    pub wrist_pitch_enabled: Option<bool>,
    pub lift: Option<[f64; 2]>,
    pub arm_ext: Option<[f64; 2]>,
    pub wrist_yaw_deg: Option<[f64; 2]>,
    pub wrist_pitch_deg: Option<[f64; 2]>,
    pub links: Option<LinkDims>,
}

impl RobotBlock {
    pub fn apply(&self, base: &KinematicModel) -> Result<KinematicModel> {
        let mut m = base.clone();
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { m.$f = v; })* };
        }
        set!(mast_offset, arm_side, arm_retracted, tip_height, fingertip_length, closure_shrink, wrist_pitch_enabled, links);
        if let Some(v) = self.lift {
            m.limits.lift = v;
        }
        if let Some(v) = self.arm_ext {
            m.limits.arm_ext = v;
        }
        if let Some([a, b]) = self.wrist_yaw_deg {
            m.limits.wrist_yaw = [a.to_radians(), b.to_radians()];
        }
        if let Some([a, b]) = self.wrist_pitch_deg {
            m.limits.wrist_pitch = [a.to_radians(), b.to_radians()];
        }
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleDto {
    pub center: [f64; 3],
    pub half_extents: [f64; 3],
    /// Rotation about the vertical axis.
    #[serde(default)]
    pub yaw_deg: f64,
}

impl ObstacleDto {
    pub fn to_box(&self) -> Result<OrientedBox> {
        let h = Vec3::from(self.half_extents);
        if !h.iter().all(|v| *v > 0.0) {
            return Err(Error::Schema("obstacle half extents must be positive".into()));
        }
        let rot = UnitQuaternion::from_axis_angle(&Vec3::z_axis(), self.yaw_deg.to_radians());
        Ok(OrientedBox::new(Vec3::from(self.center), h, rot))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneBlock {
    pub obstacles: Vec<ObstacleDto>,
}

/// Uniform error half-widths.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ErrorsDto {
    pub depth: f64,
    pub lateral: f64,
    pub vertical: f64,
    pub base_xy: f64,
    pub base_yaw_deg: f64,
}

impl ErrorsDto {
    pub fn to_ranges(&self) -> Result<ErrorRanges> {
        let r = ErrorRanges {
            depth: self.depth,
            lateral: self.lateral,
            vertical: self.vertical,
            base_xy: self.base_xy,
            base_yaw: self.base_yaw_deg.to_radians(),
        };
        if [r.depth, r.lateral, r.vertical, r.base_xy, r.base_yaw].iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Schema("error half-widths must be non-negative".into()));
        }
        Ok(r)
    }
}

/// One explicit perturbation: handle offset (believed minus true) and the
/// base offset (dx, dy, dyaw in degrees).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InjectionDto {
    pub handle_offset: [f64; 3],
    pub base_offset: [f64; 3],
}

impl InjectionDto {
    pub fn from_injection(i: &ErrorInjection) -> Self {
        let [x, y, yaw] = i.base_offset;
        Self { handle_offset: i.handle_offset.into(), base_offset: [x, y, yaw.to_degrees()] }
    }

    pub fn to_injection(&self) -> ErrorInjection {
        let [x, y, yaw] = self.base_offset;
        ErrorInjection { handle_offset: Vec3::from(self.handle_offset), base_offset: [x, y, yaw.to_radians()] }
    }
}

/// Placement grid in the handle frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridDto {
    pub origin: [f64; 2],
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
    pub yaw_count: usize,
}

impl Default for GridDto {
    fn default() -> Self {
        let g = PlacementGrid::default();
        Self { origin: g.origin.into(), spacing: g.spacing, nx: g.nx, ny: g.ny, yaw_count: g.yaws.len() }
    }
}

impl GridDto {
    pub fn to_grid(&self) -> Result<PlacementGrid> {
        let g = PlacementGrid {
            origin: Vec2::from(self.origin),
            spacing: self.spacing,
            nx: self.nx,
            ny: self.ny,
            yaws: default_yaws(self.yaw_count),
        };
        g.validate()?;
        Ok(g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentBlock {
    pub seed: u64,
    pub waypoints: usize,
    pub trials: u64,
    pub errors: ErrorsDto,
    pub grasp: GraspModel,
    pub radius_deltas: Vec<f64>,
    pub retries: usize,
    pub warm_start: bool,
    pub replan_after_correction: bool,
    pub contact_correction: bool,
    /// Explicit perturbation for `simulate`; sampled from `errors` when absent.
    pub injection: Option<InjectionDto>,
    pub grid: GridDto,
    /// Depth noise standard deviation used by `render` (m).
    pub noise_sigma: f64,
}

impl Default for ExperimentBlock {
    fn default() -> Self {
        Self {
            seed: 0,
            waypoints: crate::articulation::DEFAULT_WAYPOINTS,
            trials: 200,
            errors: ErrorsDto::default(),
            grasp: GraspModel::default(),
            radius_deltas: DEFAULT_RADIUS_DELTAS.to_vec(),
            retries: 0,
            warm_start: true,
            replan_after_correction: false,
            contact_correction: true,
            injection: None,
            grid: GridDto::default(),
            noise_sigma: 0.0,
        }
    }
}

/// Top-level scenario file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<ParamsDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detection: Option<DetectionBlock>,
    #[serde(default)]
    pub robot: RobotBlock,
    #[serde(default)]
    pub scene: SceneBlock,
    #[serde(default)]
    pub experiment: ExperimentBlock,
}

/// Validated scenario with internal units.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    /// Directory that relative paths are resolved against.
    pub base_dir: PathBuf,
    pub object: Option<(ArticulationParams, ObjectGeometry)>,
    pub model: KinematicModel,
    pub obstacles: Vec<OrientedBox>,
    pub errors: ErrorRanges,
    pub grid: PlacementGrid,
}

impl Scenario {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        Self::from_file(file, base_dir)
    }

    pub fn from_file(file: ScenarioFile, base_dir: &Path) -> Result<Self> {
        let object = match &file.object {
            Some(dto) => {
                let p = dto.to_params()?;
                let g = dto.geometry.unwrap_or_else(|| ObjectGeometry::default_for(&p));
                Some((p, g))
            }
            None => None,
        };
        let model = file.robot.apply(&KinematicModel::default())?;
        let obstacles = file.scene.obstacles.iter().map(ObstacleDto::to_box).collect::<Result<_>>()?;
        let e = &file.experiment;
        if e.waypoints < 2 {
            return Err(Error::BadCount(e.waypoints));
        }
        e.grasp.validate()?;
        if !(e.noise_sigma >= 0.0) {
            return Err(Error::Schema("noise_sigma must be non-negative".into()));
        }
        let errors = e.errors.to_ranges()?;
        let grid = e.grid.to_grid()?;
        Ok(Self { base_dir: base_dir.to_path_buf(), object, model, obstacles, errors, grid, file })
    }

    /// Ground-truth object; commands that need one fail without it.
    pub fn require_object(&self) -> Result<&(ArticulationParams, ObjectGeometry)> {
        self.object.as_ref().ok_or_else(|| Error::Schema("scenario has no object block".into()))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn seq_ik_options(&self) -> SeqIkOptions {
        let e = &self.file.experiment;
        SeqIkOptions { warm_start: e.warm_start, retries: e.retries, ..SeqIkOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputEntry {
    pub path: String,
    pub sha256: String,
}

/// Provenance record written next to every command's outputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// SHA-256 over every input file, each prefixed by its byte length.
    pub input_sha256: String,
    pub seed: u64,
    /// Seconds since the Unix epoch: `SOURCE_DATE_EPOCH` when set, else the
    /// wall clock.
    pub timestamp: u64,
    pub outputs: Vec<OutputEntry>,
}

/// Hash of several input files, independent of their paths.
pub fn inputs_hash(inputs: &[Vec<u8>]) -> String {
    let mut all = Vec::new();
    for bytes in inputs {
        all.extend_from_slice(&(bytes.len() as u64).to_le_bytes());
        all.extend_from_slice(bytes);
    }
    crate::io::sha256_hex(&all)
}

pub fn manifest_timestamp() -> u64 {
    match std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.trim().parse().ok()) {
        Some(t) => t,
        None => std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs()),
    }
}
