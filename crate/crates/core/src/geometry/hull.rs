use super::Vec2;
use crate::error::{Error, Result};

/// Convex polygon in pixel coordinates, counter-clockwise in a y-up sense
/// (positive shoelace area).
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon2D {
    pub vertices: Vec<Vec2>,
}

impl Polygon2D {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.vertices)
    }

    /// Point-in-convex-polygon test with slack `tol` (pixels).
    pub fn contains(&self, p: &Vec2, tol: f64) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let e = b - a;
            let len = e.norm();
            len == 0.0 || cross(&e, &(p - a)) / len >= -tol
        })
    }
}

fn cross(a: &Vec2, b: &Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

fn turn(o: &Vec2, a: &Vec2, b: &Vec2) -> f64 {
    cross(&(a - o), &(b - o))
}

/// Signed shoelace area, positive for counter-clockwise vertices.
pub fn polygon_area(v: &[Vec2]) -> f64 {
    let n = v.len();
    (0..n).map(|i| cross(&v[i], &v[(i + 1) % n])).sum::<f64>() * 0.5
}

/// Monotone-chain convex hull. Collinear boundary points are dropped.
pub fn convex_hull(points: &[Vec2]) -> Result<Polygon2D> {
    let mut pts: Vec<Vec2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return Err(Error::DegenerateInput(format!("hull needs >= 3 distinct points, got {}", pts.len())));
    }

    let mut hull: Vec<Vec2> = Vec::with_capacity(2 * pts.len());
    for p in pts.iter() {
        while hull.len() >= 2 && turn(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    let lower_len = hull.len() + 1;
    for p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && turn(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    hull.pop();

    if hull.len() < 3 {
        return Err(Error::DegenerateInput("all points are collinear".into()));
    }
    Ok(Polygon2D { vertices: hull })
}

/// Where collapsing edge (i, i+1) would put the merged vertex, with the
/// area that collapse adds. `None` if the neighbouring edges diverge.
fn edge_collapse(v: &[Vec2], i: usize) -> Option<(Vec2, f64)> {
    let n = v.len();
    let prev = v[(i + n - 1) % n];
    let a = v[i];
    let b = v[(i + 1) % n];
    let next = v[(i + 2) % n];
    let d1 = a - prev;
    let d2 = next - b;
    let denom = cross(&d1, &d2);
    if denom <= 1e-12 * d1.norm() * d2.norm() {
        return None;
    }
    // a + t d1 = b - s d2
    let t = cross(&(b - a), &d2) / denom;
    if t < 0.0 {
        return None;
    }
    let x = a + d1 * t;
    Some((x, turn(&a, &x, &b).abs() * 0.5))
}

/// Reduces a convex polygon to a quadrilateral by repeatedly collapsing the
/// edge whose removal (extending both neighbouring edges to their meeting
/// point) adds the least area. The result contains the input.
pub fn simplify_to_quad(hull: &Polygon2D) -> Result<[Vec2; 4]> {
    match hull.len() {
        0..=2 => return Err(Error::DegenerateInput("polygon has fewer than 3 vertices".into())),
        3 => return Err(Error::Triangle),
        _ => {}
    }
    let mut v = hull.vertices.clone();
    while v.len() > 4 {
        let best = (0..v.len())
            .filter_map(|i| edge_collapse(&v, i).map(|(x, area)| (i, x, area)))
            .min_by(|a, b| a.2.total_cmp(&b.2));
        let Some((i, x, _)) = best else {
            return Err(Error::DegenerateInput("no collapsible edge".into()));
        };
        let n = v.len();
        let j = (i + 1) % n;
        v[i] = x;
        v.remove(j);
    }
    Ok([v[0], v[1], v[2], v[3]])
}

/// Minimum-area enclosing rectangle (rotating calipers over hull edges),
/// counter-clockwise.
pub fn min_area_rect(points: &[Vec2]) -> Result<[Vec2; 4]> {
    let hull = convex_hull(points)?;
    let v = &hull.vertices;
    let n = v.len();
    let mut best: Option<(f64, [Vec2; 4])> = None;
    for i in 0..n {
        let e = v[(i + 1) % n] - v[i];
        let ux = e / e.norm();
        let uy = Vec2::new(-ux.y, ux.x);
        let (mut lo_x, mut hi_x, mut lo_y, mut hi_y) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in v {
            let (a, b) = (p.dot(&ux), p.dot(&uy));
            lo_x = lo_x.min(a);
            hi_x = hi_x.max(a);
            lo_y = lo_y.min(b);
            hi_y = hi_y.max(b);
        }
        let area = (hi_x - lo_x) * (hi_y - lo_y);
        if best.as_ref().is_none_or(|(a, _)| area < *a) {
            let c = |a: f64, b: f64| ux * a + uy * b;
            best = Some((area, [c(lo_x, lo_y), c(hi_x, lo_y), c(hi_x, hi_y), c(lo_x, hi_y)]));
        }
    }
    Ok(best.expect("hull has >= 3 edges").1)
}
