//! Raster and table serialization: binary PGM, plan/heatmap/sweep CSV, and
//! content hashing for run manifests.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::execution::SweepPoint;
use crate::geometry::{DepthImage, Vec2};
use crate::perception::Mask2D;
use crate::placement::Heatmap;
use crate::planner::MotionPlan;
use crate::robot::{Gripper, RobotConfig};

/// Decoded binary greymap. Samples are widened to 16 bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: u32,
    pub height: u32,
    pub maxval: u16,
    pub data: Vec<u16>,
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Parses a "P5" greymap: header tokens separated by whitespace, `#`
/// comments allowed, one whitespace byte before the raster. Samples wider
/// than 8 bits are big-endian.
pub fn parse_pgm(bytes: &[u8]) -> Result<Pgm> {
    let mut pos = 0;
    let mut token = || -> Result<String> {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|b| *b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(Error::Parse("truncated PGM header".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| !b.is_ascii_whitespace()) {
            pos += 1;
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token()? != "P5" {
        return Err(Error::Parse("not a binary PGM (missing P5 magic)".into()));
    }
    let mut num = |what: &str| -> Result<u32> {
        let t = token()?;
        t.parse().map_err(|_| Error::Parse(format!("bad PGM {what}: {t:?}")))
    };
    let (width, height, maxval) = (num("width")?, num("height")?, num("maxval")?);
    if width == 0 || height == 0 || !(1..=65535).contains(&maxval) {
        return Err(Error::Parse(format!("bad PGM header {width}x{height} maxval {maxval}")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    let start = pos + 1;
    let n = width as usize * height as usize;
    let wide = maxval > 255;
    let need = if wide { 2 * n } else { n };
    let raster = bytes.get(start..).filter(|r| r.len() >= need).ok_or_else(|| {
        Error::Parse(format!("PGM raster truncated: need {need} bytes"))
    })?;
    let data = if wide {
        raster[..need].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    } else {
        raster[..need].iter().map(|b| *b as u16).collect()
    };
    Ok(Pgm { width, height, maxval: maxval as u16, data })
}

pub fn encode_pgm(width: u32, height: u32, maxval: u16, data: &[u16]) -> Result<Vec<u8>> {
    if data.len() != width as usize * height as usize {
        return Err(Error::DimensionMismatch(format!("{} samples for a {width}x{height} PGM", data.len())));
    }
    if maxval == 0 || data.iter().any(|v| *v > maxval) {
        return Err(Error::DegenerateInput(format!("PGM samples must lie in 0..={maxval}")));
    }
    let mut out = format!("P5\n{width} {height}\n{maxval}\n").into_bytes();
    if maxval > 255 {
        out.extend(data.iter().flat_map(|v| v.to_be_bytes()));
    } else {
        out.extend(data.iter().map(|v| *v as u8));
    }
    Ok(out)
}

pub fn read_pgm(path: &Path) -> Result<Pgm> {
    parse_pgm(&read_bytes(path)?)
}

/// Depth raster in millimeters, 16-bit.
pub fn encode_depth(depth: &DepthImage) -> Result<Vec<u8>> {
    encode_pgm(depth.width, depth.height, u16::MAX, &depth.data)
}

pub fn read_depth(path: &Path) -> Result<DepthImage> {
    let p = read_pgm(path)?;
    DepthImage::new(p.width, p.height, p.data)
}

/// Mask as 8-bit PGM: 0 background, 255 mask.
pub fn encode_mask(mask: &Mask2D) -> Result<Vec<u8>> {
    let data: Vec<u16> = mask.bits.iter().map(|b| if *b { 255 } else { 0 }).collect();
    encode_pgm(mask.width, mask.height, 255, &data)
}

/// Any nonzero sample is part of the mask.
pub fn read_mask(path: &Path) -> Result<Mask2D> {
    let p = read_pgm(path)?;
    Mask2D::new(p.width, p.height, p.data.iter().map(|v| *v != 0).collect())
}

/// `x` rounded to `digits` significant digits, printed in shortest form.
pub fn sig(x: f64, digits: usize) -> String {
    let rounded: f64 = format!("{:.*e}", digits.saturating_sub(1), x).parse().expect("formatted float parses");
    if rounded == 0.0 {
        "0".into()
    } else {
        rounded.to_string()
    }
}

fn s9(x: f64) -> String {
    sig(x, 9)
}

pub const PLAN_HEADER: &str = "base_x,base_y,base_yaw,lift,arm_ext,wrist_yaw,wrist_pitch,gripper";

/// One row per configuration; angles in degrees, lengths in meters, 9
/// significant digits.
pub fn plan_csv(plan: &MotionPlan) -> String {
    let mut s = String::from(PLAN_HEADER);
    s.push('\n');
    for c in &plan.configs {
        let gripper = match c.gripper {
            Gripper::Open => "open",
            Gripper::Closed => "closed",
        };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{gripper}",
            s9(c.base_xy.x),
            s9(c.base_xy.y),
            s9(c.base_yaw.to_degrees()),
            s9(c.lift),
            s9(c.arm_ext),
            s9(c.wrist_yaw.to_degrees()),
            s9(c.wrist_pitch.to_degrees()),
        );
    }
    s
}

fn rows<'a>(text: &'a str, header: &str) -> Result<impl Iterator<Item = (usize, Vec<&'a str>)>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == header => {}
        other => return Err(Error::Parse(format!("expected header {header:?}, got {other:?}"))),
    }
    let width = header.split(',').count();
    let out: Vec<(usize, Vec<&str>)> = lines.enumerate().filter(|(_, l)| !l.trim().is_empty()).map(|(i, l)| (i + 2, l.split(',').collect())).collect();
    if let Some((line, f)) = out.iter().find(|(_, f)| f.len() != width) {
        return Err(Error::Parse(format!("line {line}: {} fields, expected {width}", f.len())));
    }
    Ok(out.into_iter())
}

fn field<T: std::str::FromStr>(line: usize, s: &str) -> Result<T> {
    s.trim().parse().map_err(|_| Error::Parse(format!("line {line}: cannot parse {s:?}")))
}

/// Inverse of [`plan_csv`], back to radians.
pub fn parse_plan_csv(text: &str) -> Result<Vec<RobotConfig>> {
    rows(text, PLAN_HEADER)?
        .map(|(line, f)| {
            let x: Vec<f64> = f[..7].iter().map(|s| field(line, s)).collect::<Result<_>>()?;
            let gripper = match f[7].trim() {
                "open" => Gripper::Open,
                "closed" => Gripper::Closed,
                other => return Err(Error::Parse(format!("line {line}: bad gripper {other:?}"))),
            };
            Ok(RobotConfig {
                base_xy: Vec2::new(x[0], x[1]),
                base_yaw: x[2].to_radians(),
                lift: x[3],
                arm_ext: x[4],
                wrist_yaw: x[5].to_radians(),
                wrist_pitch: x[6].to_radians(),
                gripper,
            })
        })
        .collect()
}

pub const HEATMAP_HEADER: &str = "ix,iy,x,y,best_yaw,score";

/// One row per cell in row-major order; x, y in the handle frame (meters),
/// best_yaw in degrees.
pub fn heatmap_csv(h: &Heatmap) -> String {
    let mut s = String::from(HEATMAP_HEADER);
    s.push('\n');
    for iy in 0..h.grid.ny {
        for ix in 0..h.grid.nx {
            let k = iy * h.grid.nx + ix;
            let p = h.grid.cell(ix, iy);
            let _ = writeln!(s, "{ix},{iy},{},{},{},{}", s9(p.x), s9(p.y), s9(h.best_yaw[k].to_degrees()), h.scores[k]);
        }
    }
    s
}

/// Parsed heatmap row: (ix, iy, x, y, best_yaw in degrees, score).
pub type HeatmapRow = (usize, usize, f64, f64, f64, usize);

pub fn parse_heatmap_csv(text: &str) -> Result<Vec<HeatmapRow>> {
    rows(text, HEATMAP_HEADER)?
        .map(|(line, f)| {
            Ok((field(line, f[0])?, field(line, f[1])?, field(line, f[2])?, field(line, f[3])?, field(line, f[4])?, field(line, f[5])?))
        })
        .collect()
}

/// 8-bit rendering: score scaled to 0..255, row 0 is the largest iy so the
/// handle frame's +y points up in the image.
pub fn heatmap_pgm(h: &Heatmap) -> Result<Vec<u8>> {
    let (nx, ny) = (h.grid.nx, h.grid.ny);
    let n = h.waypoints.max(1) as f64;
    let data: Vec<u16> = (0..ny)
        .rev()
        .flat_map(|iy| (0..nx).map(move |ix| (iy, ix)))
        .map(|(iy, ix)| (h.scores[iy * nx + ix] as f64 * 255.0 / n).round().min(255.0) as u16)
        .collect();
    encode_pgm(nx as u32, ny as u32, 255, &data)
}

pub const SWEEP_HEADER: &str = "delta_r,final_angle,waypoints_executed,planned_waypoints";

/// Radius sweep curve; final angle in degrees.
pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for p in points {
        let _ = writeln!(s, "{},{},{},{}", s9(p.delta_r), s9(p.final_angle.to_degrees()), p.waypoints_executed, p.planned_waypoints);
    }
    s
}

/// Parsed sweep row with the angle back in radians.
pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepPoint>> {
    rows(text, SWEEP_HEADER)?
        .map(|(line, f)| {
            Ok(SweepPoint {
                delta_r: field(line, f[0])?,
                final_angle: field::<f64>(line, f[1])?.to_radians(),
                waypoints_executed: field(line, f[2])?,
                planned_waypoints: field(line, f[3])?,
            })
        })
        .collect()
}

pub const HISTOGRAM_HEADER: &str = "waypoints,with_correction,without_correction";

pub fn histogram_csv(with: &[usize], without: &[usize]) -> String {
    let mut s = String::from(HISTOGRAM_HEADER);
    s.push('\n');
    for (i, (a, b)) in with.iter().zip(without).enumerate() {
        let _ = writeln!(s, "{i},{a},{b}");
    }
    s
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
