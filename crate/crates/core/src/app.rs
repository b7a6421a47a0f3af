//! Command-line front end. Every command reads a scenario, writes its
//! artifacts plus `manifest.json` into the output directory, and reports
//! failures as JSON on stderr.
//!
//! Exit codes: 0 success, 1 I/O or parse error, 2 violated precondition,
//! 3 no feasible plan (artifacts are still written).

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::articulation::{generate_waypoints, ArticulationParams, ArticulationType};
use crate::canonical;
use crate::error::{Error, Result};
use crate::execution::{ablate_contact_correction, plan_task, radius_sweep, run_trial, trial_rng, PlannedTask, TrialRecord};
use crate::io;
use crate::perception::{lift_detection_full, Detection2D, LiftOptions};
use crate::placement::{mine, navigation_target, NavigationTarget, PlacementGrid};
use crate::planner::{residual_mode_for, SeqIkOptions};
use crate::robot::KinematicModel;
use crate::scenario::{inputs_hash, manifest_timestamp, CameraDto, DetectionBlock, InjectionDto, OutputEntry, ParamsDto, RunManifest, Scenario};
use crate::scene::Scene;
use crate::synth;

#[derive(Debug, Parser)]
#[command(name = "artopen", version, about = "Perceive, plan and simulate opening drawers, cabinets and ovens")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Scenario JSON file.
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,
    /// Overrides the scenario's experiment seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Jittered IK retries per rejected waypoint.
    #[arg(long, global = true)]
    pub retries: Option<usize>,
    /// Regenerate the trajectory after contact correction instead of
    /// shifting it rigidly.
    #[arg(long, global = true)]
    pub replan_after_correction: bool,
    /// Refit the face plane after discarding outliers.
    #[arg(long, global = true)]
    pub robust_plane_fit: bool,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Lift a detection into articulation parameters (params.json, metrics.json).
    Perceive {
        #[arg(long)]
        depth: Option<PathBuf>,
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long)]
        camera: Option<PathBuf>,
    },
    /// Mine a base placement and decode the motion plan (plan.csv).
    Plan,
    /// Score every base placement (heatmap.csv, heatmap.pgm, target.json).
    Mine,
    /// Execute the plan against a perturbed object (result.json).
    Simulate,
    /// Final opening angle versus believed radius error (sweep.csv).
    SweepRadius,
    /// Paired trials with and without contact correction (ablation.json, histogram.csv).
    Ablate,
    /// Render a synthetic depth fixture of the object (depth.pgm, mask.pgm, camera.json, detection.json).
    Render,
    /// Mine the canonical objects and cache their navigation targets (targets.json).
    Targets,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Perceive { .. } => "perceive",
            Command::Plan => "plan",
            Command::Mine => "mine",
            Command::Simulate => "simulate",
            Command::SweepRadius => "sweep-radius",
            Command::Ablate => "ablate",
            Command::Render => "render",
            Command::Targets => "targets",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Infeasible(String),
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::Infeasible(_) => 3,
        }
    }

    /// Status line for stderr.
    pub fn status_json(&self) -> String {
        let (status, message) = match self {
            Outcome::Success => ("ok", ""),
            Outcome::Infeasible(m) => ("infeasible", m.as_str()),
        };
        serde_json::json!({ "status": status, "message": message, "exit_code": self.exit_code() }).to_string()
    }
}

/// Collects outputs and input bytes for the manifest.
struct Run {
    out: PathBuf,
    inputs: Vec<Vec<u8>>,
    outputs: Vec<OutputEntry>,
}

impl Run {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        io::write_bytes(&self.out.join(name), bytes)?;
        self.outputs.push(OutputEntry { path: name.into(), sha256: io::sha256_hex(bytes) });
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn read(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = io::read_bytes(path)?;
        self.inputs.push(bytes.clone());
        Ok(bytes)
    }
}

struct Ctx {
    scenario: Scenario,
    seed: u64,
    options: SeqIkOptions,
    replan: bool,
    robust_plane: bool,
}

fn load(common: &Common, run: &mut Run, required: bool) -> Result<Option<Ctx>> {
    let Some(path) = &common.scenario else {
        return if required { Err(Error::Schema("--scenario is required for this command".into())) } else { Ok(None) };
    };
    let bytes = run.read(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| Error::Parse(format!("scenario is not UTF-8: {e}")))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let scenario = Scenario::parse(text, &base)?;
    let e = &scenario.file.experiment;
    let mut options = scenario.seq_ik_options();
    if let Some(r) = common.retries {
        options.retries = r;
    }
    Ok(Some(Ctx {
        seed: common.seed.unwrap_or(e.seed),
        replan: common.replan_after_correction || e.replan_after_correction,
        robust_plane: common.robust_plane_fit,
        options,
        scenario,
    }))
}

/// Runs one command. Errors have not been reported yet.
pub fn run(cli: &Cli) -> Result<Outcome> {
    let mut run = Run { out: cli.common.out.clone(), inputs: Vec::new(), outputs: Vec::new() };
    let needs_scenario = !matches!(cli.command, Command::Targets);
    let ctx = load(&cli.common, &mut run, needs_scenario)?;
    let outcome = match (&cli.command, &ctx) {
        (Command::Targets, _) => cmd_targets(ctx.as_ref(), &mut run)?,
        (Command::Perceive { depth, mask, camera }, Some(c)) => cmd_perceive(c, &mut run, depth, mask, camera)?,
        (Command::Plan, Some(c)) => cmd_plan(c, &mut run)?,
        (Command::Mine, Some(c)) => cmd_mine(c, &mut run)?,
        (Command::Simulate, Some(c)) => cmd_simulate(c, &mut run)?,
        (Command::SweepRadius, Some(c)) => cmd_sweep(c, &mut run)?,
        (Command::Ablate, Some(c)) => cmd_ablate(c, &mut run)?,
        (Command::Render, Some(c)) => cmd_render(c, &mut run)?,
        (_, None) => unreachable!("scenario is loaded for every command but targets"),
    };
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cli.command.name().into(),
        input_sha256: inputs_hash(&run.inputs),
        seed: ctx.as_ref().map_or(0, |c| c.seed),
        timestamp: manifest_timestamp(),
        outputs: run.outputs.clone(),
    };
    run.write_json("manifest.json", &manifest)?;
    Ok(outcome)
}

/// Machine-readable error report for stderr.
pub fn error_json(e: &Error) -> String {
    serde_json::json!({ "error": e.kind(), "message": e.to_string(), "exit_code": e.exit_code() }).to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetDto {
    /// Handle-frame position (m) and heading (degrees).
    pub x: f64,
    pub y: f64,
    pub yaw_deg: f64,
    pub score: usize,
    pub ix: usize,
    pub iy: usize,
}

impl TargetDto {
    pub fn from_target(t: &NavigationTarget) -> Self {
        Self { x: t.x, y: t.y, yaw_deg: t.yaw.to_degrees(), score: t.score, ix: t.ix, iy: t.iy }
    }
}

fn object_scene(c: &Ctx) -> Result<(ArticulationParams, Scene)> {
    let (p, g) = c.scenario.require_object()?;
    Ok((p.clone(), Scene::for_object(p, g, c.scenario.obstacles.clone())))
}

fn task(c: &Ctx) -> Result<PlannedTask> {
    let (p, scene) = object_scene(c)?;
    let e = &c.scenario.file.experiment;
    plan_task(&p, &scene, &c.scenario.model, &c.scenario.grid, &c.options, e.waypoints)
}

fn infeasible_unless_complete(task: &PlannedTask) -> Outcome {
    let n = task.plan.trajectory.len();
    if task.plan.achieved == n {
        Outcome::Success
    } else {
        Outcome::Infeasible(format!("best placement decodes {} of {} waypoints", task.plan.achieved, n))
    }
}

#[derive(Serialize)]
struct Metrics {
    #[serde(skip_serializing_if = "Option::is_none")]
    radius_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    handle_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    normal_error_deg: Option<f64>,
    warnings: Vec<String>,
}

fn cmd_perceive(c: &Ctx, run: &mut Run, depth: &Option<PathBuf>, mask: &Option<PathBuf>, camera: &Option<PathBuf>) -> Result<Outcome> {
    let s = &c.scenario;
    let det: &DetectionBlock = s.file.detection.as_ref().ok_or_else(|| Error::Schema("scenario has no detection block".into()))?;
    let pick = |flag: &Option<PathBuf>, file: &PathBuf| flag.clone().unwrap_or_else(|| s.resolve(file));
    let depth_bytes = run.read(&pick(depth, &det.depth))?;
    let mask_bytes = run.read(&pick(mask, &det.mask))?;
    let cam_bytes = run.read(&pick(camera, &det.camera))?;
    let depth = {
        let p = io::parse_pgm(&depth_bytes)?;
        crate::geometry::DepthImage::new(p.width, p.height, p.data)?
    };
    let mask = {
        let p = io::parse_pgm(&mask_bytes)?;
        crate::perception::Mask2D::new(p.width, p.height, p.data.iter().map(|v| *v != 0).collect())?
    };
    let cam: CameraDto = serde_json::from_slice(&cam_bytes).map_err(|e| Error::Parse(format!("camera: {e}")))?;
    let camera = cam.to_camera()?;
    let truth = s.object.as_ref().map(|(p, _)| p);
    let atype = det.atype.or(truth.map(|p| p.atype)).ok_or_else(|| Error::Schema("detection type is missing".into()))?;
    let orientation = det
        .handle_orientation
        .or(truth.map(|p| p.handle_orientation))
        .ok_or_else(|| Error::Schema("detection handle_orientation is missing".into()))?;
    let detection = Detection2D { mask, atype, handle_px: (det.handle_px[0], det.handle_px[1]), handle_orientation: orientation, score: det.score };
    let options = LiftOptions { min_valid_depth: det.min_valid_depth, robust_plane: c.robust_plane, ..LiftOptions::default() };
    let out = lift_detection_full(&detection, &depth, &camera, &options)?;
    run.write_json("params.json", &ParamsDto::from_params(&out.params))?;
    let metrics = match truth {
        Some(t) => Metrics {
            radius_error: match (out.params.radius, t.radius) {
                (Some(a), Some(b)) => Some((a - b).abs()),
                _ => None,
            },
            handle_error: Some((out.params.handle - t.handle).norm()),
            normal_error_deg: Some(out.params.normal.dot(&t.normal).clamp(-1.0, 1.0).acos().to_degrees()),
            warnings: out.warnings,
        },
        None => Metrics { radius_error: None, handle_error: None, normal_error_deg: None, warnings: out.warnings },
    };
    run.write_json("metrics.json", &metrics)?;
    Ok(Outcome::Success)
}

fn cmd_plan(c: &Ctx, run: &mut Run) -> Result<Outcome> {
    let t = task(c)?;
    run.write("plan.csv", io::plan_csv(&t.plan).as_bytes())?;
    run.write_json("target.json", &TargetDto::from_target(&t.target))?;
    Ok(infeasible_unless_complete(&t))
}

fn mine_object(p: &ArticulationParams, scene: &Scene, model: &KinematicModel, grid: &PlacementGrid, options: &SeqIkOptions, n: usize) -> Result<crate::placement::Heatmap> {
    let model = model.for_articulation(p.atype);
    let traj = generate_waypoints(p, n, p.atype.default_target())?;
    mine(p, &traj, scene, &model, grid, residual_mode_for(p.atype), options)
}

fn cmd_mine(c: &Ctx, run: &mut Run) -> Result<Outcome> {
    let (p, scene) = object_scene(c)?;
    let n = c.scenario.file.experiment.waypoints;
    let h = mine_object(&p, &scene, &c.scenario.model, &c.scenario.grid, &c.options, n)?;
    run.write("heatmap.csv", io::heatmap_csv(&h).as_bytes())?;
    run.write("heatmap.pgm", &io::heatmap_pgm(&h)?)?;
    let target = navigation_target(&h)?;
    run.write_json("target.json", &TargetDto::from_target(&target))?;
    Ok(if h.max_score() == n {
        Outcome::Success
    } else {
        Outcome::Infeasible(format!("no placement decodes all {n} waypoints (best {})", h.max_score()))
    })
}

/// Openings in file units: degrees for hinges, meters for drawers.
fn file_opening(atype: ArticulationType, x: f64) -> f64 {
    if atype.is_hinged() {
        x.to_degrees()
    } else {
        x
    }
}

#[derive(Serialize)]
struct SimulationReport {
    #[serde(rename = "type")]
    atype: ArticulationType,
    target: TargetDto,
    planned_waypoints: usize,
    injection: InjectionDto,
    contact_correction: bool,
    replan_after_correction: bool,
    grasped: bool,
    corrections: usize,
    waypoints_executed: usize,
    slip_step: Option<usize>,
    opening_unit: &'static str,
    openings: Vec<f64>,
    final_opening: f64,
    success: bool,
}

fn cmd_simulate(c: &Ctx, run: &mut Run) -> Result<Outcome> {
    let t = task(c)?;
    let e = &c.scenario.file.experiment;
    if t.plan.configs.is_empty() {
        run.write("plan.csv", io::plan_csv(&t.plan).as_bytes())?;
        return Ok(Outcome::Infeasible("no waypoint is reachable from the best placement".into()));
    }
    let injection = match e.injection {
        Some(i) => i.to_injection(),
        None => c.scenario.errors.sample(&mut trial_rng(c.seed, 0), &t.believed.normal),
    };
    let truth = injection.true_in_robot_frame(&t.believed);
    let r = run_trial(&t, &truth, &c.scenario.model, &e.grasp, &c.options, e.contact_correction, c.replan)?;
    let atype = t.believed.atype;
    let report = SimulationReport {
        atype,
        target: TargetDto::from_target(&t.target),
        planned_waypoints: t.plan.achieved,
        injection: InjectionDto::from_injection(&injection),
        contact_correction: e.contact_correction,
        replan_after_correction: c.replan,
        grasped: r.grasped,
        corrections: r.corrections,
        waypoints_executed: r.waypoints_executed,
        slip_step: r.slip_step,
        opening_unit: if atype.is_hinged() { "deg" } else { "m" },
        openings: r.openings.iter().map(|x| file_opening(atype, *x)).collect(),
        final_opening: file_opening(atype, r.final_opening),
        success: r.success,
    };
    run.write_json("result.json", &report)?;
    Ok(infeasible_unless_complete(&t))
}

fn cmd_sweep(c: &Ctx, run: &mut Run) -> Result<Outcome> {
    let (p, _) = c.scenario.require_object()?;
    let e = &c.scenario.file.experiment;
    let points = radius_sweep(p, &e.radius_deltas, &e.grasp, &c.scenario.model, &c.scenario.obstacles, &c.scenario.grid, &c.options)?;
    run.write("sweep.csv", io::sweep_csv(&points).as_bytes())?;
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct TrialDto {
    trial: u64,
    injection: InjectionDto,
    with_success: bool,
    with_waypoints: usize,
    with_corrections: usize,
    without_success: bool,
    without_waypoints: usize,
}

impl TrialDto {
    fn from_record(r: &TrialRecord) -> Self {
        let inj = crate::execution::ErrorInjection { handle_offset: r.handle_offset.into(), base_offset: r.base_offset };
        Self {
            trial: r.trial,
            injection: InjectionDto::from_injection(&inj),
            with_success: r.with_success,
            with_waypoints: r.with_waypoints,
            with_corrections: r.with_corrections,
            without_success: r.without_success,
            without_waypoints: r.without_waypoints,
        }
    }
}

#[derive(Serialize)]
struct AblationReport {
    #[serde(rename = "type")]
    atype: ArticulationType,
    seed: u64,
    trials: u64,
    planned_waypoints: usize,
    with_rate: f64,
    without_rate: f64,
    histogram_with: Vec<usize>,
    histogram_without: Vec<usize>,
    records: Vec<TrialDto>,
}

fn cmd_ablate(c: &Ctx, run: &mut Run) -> Result<Outcome> {
    let t = task(c)?;
    let e = &c.scenario.file.experiment;
    if t.plan.configs.is_empty() {
        return Ok(Outcome::Infeasible("no waypoint is reachable from the best placement".into()));
    }
    let r = ablate_contact_correction(&t, &c.scenario.errors, e.trials, c.seed, &e.grasp, &c.scenario.model, &c.options, c.replan)?;
    let n = t.plan.trajectory.len();
    let (hw, hwo) = (r.waypoint_histogram(n, true), r.waypoint_histogram(n, false));
    run.write("histogram.csv", io::histogram_csv(&hw, &hwo).as_bytes())?;
    let report = AblationReport {
        atype: t.believed.atype,
        seed: c.seed,
        trials: e.trials,
        planned_waypoints: t.plan.achieved,
        with_rate: r.with_rate,
        without_rate: r.without_rate,
        histogram_with: hw,
        histogram_without: hwo,
        records: r.trials.iter().map(TrialDto::from_record).collect(),
    };
    run.write_json("ablation.json", &report)?;
    Ok(infeasible_unless_complete(&t))
}

fn cmd_render(c: &Ctx, run: &mut Run) -> Result<Outcome> {
    let (p, g) = c.scenario.require_object()?;
    let camera = synth::fixture_camera(p)?;
    let view = synth::render(p, g, &camera, c.scenario.file.experiment.noise_sigma, c.seed)?;
    run.write("depth.pgm", &io::encode_depth(&view.depth)?)?;
    run.write("mask.pgm", &io::encode_mask(&view.detection.mask)?)?;
    run.write_json("camera.json", &CameraDto::from_camera(&camera))?;
    let det = DetectionBlock {
        depth: "depth.pgm".into(),
        mask: "mask.pgm".into(),
        camera: "camera.json".into(),
        handle_px: [view.detection.handle_px.0, view.detection.handle_px.1],
        atype: Some(p.atype),
        handle_orientation: Some(p.handle_orientation),
        score: 1.0,
        min_valid_depth: LiftOptions::default().min_valid_depth,
    };
    run.write_json("detection.json", &det)?;
    Ok(Outcome::Success)
}

/// Canonical objects whose mined targets are cached.
pub fn canonical_objects() -> Vec<ArticulationParams> {
    use canonical::*;
    vec![
        drawer(CANONICAL_HANDLE_HEIGHT),
        right_cabinet(CANONICAL_HANDLE_HEIGHT, CANONICAL_RADIUS),
        left_cabinet(CANONICAL_HANDLE_HEIGHT, CANONICAL_RADIUS),
        oven(),
    ]
}

/// Navigation target per canonical articulation type, keyed by type name.
pub fn canonical_targets(model: &KinematicModel, grid: &PlacementGrid, options: &SeqIkOptions, n: usize) -> Result<std::collections::BTreeMap<String, TargetDto>> {
    canonical_objects()
        .iter()
        .map(|p| {
            let h = mine_object(p, &canonical::scene(p), model, grid, options, n)?;
            Ok((p.atype.name().to_string(), TargetDto::from_target(&navigation_target(&h)?)))
        })
        .collect()
}

fn cmd_targets(c: Option<&Ctx>, run: &mut Run) -> Result<Outcome> {
    let targets = match c {
        Some(c) => canonical_targets(&c.scenario.model, &c.scenario.grid, &c.options, c.scenario.file.experiment.waypoints)?,
        None => canonical_targets(&KinematicModel::default(), &PlacementGrid::default(), &SeqIkOptions::default(), crate::articulation::DEFAULT_WAYPOINTS)?,
    };
    run.write_json("targets.json", &targets)?;
    Ok(Outcome::Success)
}
