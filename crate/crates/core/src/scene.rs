//! Collision scene: static obstacles, the object's carcass, and the moving
//! panel (door or drawer front) that follows the object's opening.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::articulation::{handle_at, up, ArticulationParams, ArticulationType};
use crate::error::Result;
use crate::geometry::{OrientedBox, Pose, Vec3};
use crate::robot::{link_shapes, KinematicModel, RobotConfig, GRIPPER_LINK};

/// Gripper-vs-panel contacts are ignored while the grasp point is this
/// close to the current handle position.
pub const GRASP_EXEMPTION_RADIUS: f64 = 0.05;

/// Face rectangle around the handle plus carcass dimensions. Extents are
/// measured from the handle in the face plane; "right" is as seen by a
/// robot facing the object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectGeometry {
    pub left: f64,
    pub right: f64,
    pub below: f64,
    pub above: f64,
    #[serde(default = "default_thickness")]
    pub panel_thickness: f64,
    #[serde(default = "default_depth")]
    pub body_depth: f64,
}

fn default_thickness() -> f64 {
    0.02
}

fn default_depth() -> f64 {
    0.5
}

/// Face panels never reach below this height.
const FLOOR_CLEARANCE: f64 = 0.02;
const BODY_GAP: f64 = 0.01;
const BODY_MARGIN: f64 = 0.05;

impl ObjectGeometry {
    /// Default face for each articulation type: hinged panels end at the
    /// hinge, handles sit 5 cm from the free edge.
    pub fn default_for(params: &ArticulationParams) -> Self {
        let r = params.radius.unwrap_or(0.0);
        let (left, right, below, above) = match params.atype {
            ArticulationType::Drawer => (0.25, 0.25, 0.10, 0.10),
            ArticulationType::CabinetRightHinge => (0.05, r, 0.30, 0.30),
            ArticulationType::CabinetLeftHinge => (r, 0.05, 0.30, 0.30),
            ArticulationType::BottomHinge => (0.20, 0.20, r, 0.04),
        };
        Self { left, right, below, above, panel_thickness: default_thickness(), body_depth: default_depth() }
    }

    pub fn mirrored(&self) -> Self {
        Self { left: self.right, right: self.left, ..*self }
    }
}

/// Rotation whose columns are (into-face, left, face-up) for an object with
/// outward `normal`.
pub fn face_frame(normal: &Vec3) -> UnitQuaternion<f64> {
    let f = -normal;
    let mut left = up().cross(&f);
    if left.norm() < 1e-9 {
        left = Vec3::y();
    }
    let left = left.normalize();
    let face_up = f.cross(&left);
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[f, left, face_up])))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub obstacles: Vec<OrientedBox>,
    pub body: OrientedBox,
    /// Moving panel at opening 0.
    pub panel: OrientedBox,
    /// Articulation that moves the panel.
    pub articulation: ArticulationParams,
}

impl Scene {
    pub fn for_object(params: &ArticulationParams, geometry: &ObjectGeometry, obstacles: Vec<OrientedBox>) -> Self {
        let rot = face_frame(&params.normal);
        let g = geometry;
        let h = params.handle;
        let bottom = (-g.below).max(FLOOR_CLEARANCE - h.z);
        let local = |lo: Vec3, hi: Vec3| {
            let b = OrientedBox::from_local_bounds(lo, hi, rot);
            OrientedBox { center: b.center + h, ..b }
        };
        let panel = local(
            Vec3::new(0.0, -g.right, bottom),
            Vec3::new(g.panel_thickness, g.left, g.above.max(bottom + 0.01)),
        );
        let back = g.panel_thickness + BODY_GAP;
        let body = local(
            Vec3::new(back, -g.right - BODY_MARGIN, -h.z),
            Vec3::new(back + g.body_depth, g.left + BODY_MARGIN, g.above + BODY_MARGIN),
        );
        Self { obstacles, body, panel, articulation: params.clone() }
    }

    pub fn panel_at(&self, opening: f64) -> Result<OrientedBox> {
        Ok(self.panel.transformed(&self.articulation.opening_transform(opening)?))
    }

    /// Static boxes (obstacles and carcass).
    pub fn static_boxes(&self) -> impl Iterator<Item = &OrientedBox> {
        self.obstacles.iter().chain(std::iter::once(&self.body))
    }

    /// The whole scene moved rigidly by `pose`.
    pub fn transformed(&self, pose: &Pose) -> Self {
        Self {
            obstacles: self.obstacles.iter().map(|b| b.transformed(pose)).collect(),
            body: self.body.transformed(pose),
            panel: self.panel.transformed(pose),
            articulation: self.articulation.transformed(pose),
        }
    }

    pub fn mirrored_y(&self) -> Self {
        let m = |b: &OrientedBox| {
            // Reflection conjugated into a proper rotation: negate y of the
            // center and mirror the rotation (x, -y, z) ~ (-qx, qy, -qz, qw).
            let q = b.rotation.quaternion();
            let rq = nalgebra::Quaternion::new(q.w, -q.i, q.j, -q.k);
            OrientedBox::new(Vec3::new(b.center.x, -b.center.y, b.center.z), b.half_extents, UnitQuaternion::new_normalize(rq))
        };
        Self {
            obstacles: self.obstacles.iter().map(m).collect(),
            body: m(&self.body),
            panel: m(&self.panel),
            articulation: self.articulation.mirrored_y(),
        }
    }
}

/// True iff any robot link overlaps any scene box with the object at
/// `opening`. Gripper-vs-panel overlaps near the current handle position
/// are grasp contact and do not count.
pub fn check_collision(config: &RobotConfig, scene: &Scene, opening: f64, model: &KinematicModel) -> bool {
    let links = link_shapes(config, model);
    let panel = scene.panel_at(opening).expect("scene articulation validated at construction");
    let handle_now = handle_at(&scene.articulation, opening).expect("scene articulation validated at construction");
    let (tip, _) = model.tip_and_heading(config);
    let exempt = (tip - handle_now).norm() <= GRASP_EXEMPTION_RADIUS;
    links.iter().enumerate().any(|(i, link)| {
        scene.static_boxes().any(|b| link.intersects(b)) || (!(exempt && i == GRIPPER_LINK) && link.intersects(&panel))
    })
}

/// Chassis-only check against the scene at opening 0, used to discard base
/// placements before running the planner.
pub fn chassis_collides(config: &RobotConfig, scene: &Scene, model: &KinematicModel) -> bool {
    let chassis = link_shapes(config, model)[0];
    scene.static_boxes().any(|b| chassis.intersects(b)) || chassis.intersects(&scene.panel)
}
