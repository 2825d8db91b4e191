// SPDX-License-Identifier: Apache-2.0

//! Planar polygon utilities for lasso selections: validation, even-odd
//! containment, convex hulls and hull dilation.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SessionError};

pub type Point = [f64; 2];

/// A validated simple polygon (at least 3 finite vertices, no crossing
/// edges). The closing edge from the last vertex back to the first is implied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point>", into = "Vec<Point>")]
pub struct SelectionRegion {
    vertices: Vec<Point>,
}

impl TryFrom<Vec<Point>> for SelectionRegion {
    type Error = SessionError;

    fn try_from(v: Vec<Point>) -> Result<Self> {
        SelectionRegion::new(v)
    }
}

impl From<SelectionRegion> for Vec<Point> {
    fn from(r: SelectionRegion) -> Self {
        r.vertices
    }
}

impl SelectionRegion {
    pub fn new(mut vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(SessionError::InvalidPolygon(format!(
                "polygon needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(SessionError::InvalidPolygon("polygon vertices must be finite".into()));
        }
        if let Some((a, b)) = first_crossing(&vertices) {
            return Err(SessionError::InvalidPolygon(format!("edges {a} and {b} intersect")));
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices).abs()
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        bounding_box(&self.vertices)
    }

    /// Even-odd containment; points on an edge or vertex count as inside.
    pub fn contains(&self, p: Point) -> bool {
        let v = &self.vertices;
        let (lo, hi) = self.bounding_box();
        if p[0] < lo[0] || p[0] > hi[0] || p[1] < lo[1] || p[1] > hi[1] {
            return false;
        }
        let m = v.len();
        let mut inside = false;
        for i in 0..m {
            let a = v[i];
            let b = v[(i + 1) % m];
            if on_segment(a, b, p) {
                return true;
            }
            // Half-open rule on y so a vertex touching the ray counts once.
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let t = (p[1] - a[1]) / (b[1] - a[1]);
                let x = a[0] + t * (b[0] - a[0]);
                if x > p[0] {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

pub fn signed_area(v: &[Point]) -> f64 {
    let m = v.len();
    let mut s = 0.0;
    for i in 0..m {
        let a = v[i];
        let b = v[(i + 1) % m];
        s += a[0] * b[1] - b[0] * a[1];
    }
    0.5 * s
}

pub fn bounding_box(v: &[Point]) -> (Point, Point) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in v {
        for c in 0..2 {
            lo[c] = lo[c].min(p[c]);
            hi[c] = hi[c].max(p[c]);
        }
    }
    (lo, hi)
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    if p[0] < a[0].min(b[0]) || p[0] > a[0].max(b[0]) || p[1] < a[1].min(b[1]) || p[1] > a[1].max(b[1]) {
        return false;
    }
    let scale = (b[0] - a[0]).abs().max((b[1] - a[1]).abs()).max(f64::MIN_POSITIVE);
    cross(a, b, p).abs() <= 1e-12 * scale * scale
}

fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// First pair of non-adjacent edges that touch, if any.
fn first_crossing(v: &[Point]) -> Option<(usize, usize)> {
    let m = v.len();
    for i in 0..m {
        let (a, b) = (v[i], v[(i + 1) % m]);
        for j in (i + 1)..m {
            let adjacent = j == i + 1 || (i == 0 && j == m - 1);
            if adjacent {
                continue;
            }
            let (c, d) = (v[j], v[(j + 1) % m]);
            if segments_intersect(a, b, c, d) {
                return Some((i, j));
            }
        }
    }
    // Adjacent edges folding back onto each other also make the polygon degenerate.
    for i in 0..m {
        let (a, b, c) = (v[i], v[(i + 1) % m], v[(i + 2) % m]);
        if cross(a, b, c) == 0.0 && (b[0] - a[0]) * (c[0] - b[0]) + (b[1] - a[1]) * (c[1] - b[1]) < 0.0 {
            return Some((i, (i + 1) % m));
        }
    }
    None
}

/// Counter-clockwise convex hull (monotone chain). Collinear points are
/// dropped; fewer than 3 distinct points yield the distinct points.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut p: Vec<Point> = points.to_vec();
    p.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let mut lower: Vec<Point> = Vec::new();
    for &q in &p {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], q) <= 0.0 {
            lower.pop();
        }
        lower.push(q);
    }
    let mut upper: Vec<Point> = Vec::new();
    for &q in p.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], q) <= 0.0 {
            upper.pop();
        }
        upper.push(q);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Convex hull of `points` grown outward by `radius` (Minkowski sum with a
/// circumscribed 16-gon, so every point within `radius` of the hull is covered).
pub fn dilated_hull(points: &[Point], radius: f64) -> Vec<Point> {
    const SIDES: usize = 16;
    let hull = convex_hull(points);
    if radius <= 0.0 {
        return hull;
    }
    let r = radius / (std::f64::consts::PI / SIDES as f64).cos();
    let mut grown = Vec::with_capacity(hull.len() * SIDES);
    for h in &hull {
        for k in 0..SIDES {
            let a = 2.0 * std::f64::consts::PI * k as f64 / SIDES as f64;
            grown.push([h[0] + r * a.cos(), h[1] + r * a.sin()]);
        }
    }
    convex_hull(&grown)
}

/// Moves every vertex `fraction` of the way toward the vertex centroid.
pub fn shrink_toward_centroid(v: &[Point], fraction: f64) -> Vec<Point> {
    let m = v.len() as f64;
    let cx = v.iter().map(|p| p[0]).sum::<f64>() / m;
    let cy = v.iter().map(|p| p[1]).sum::<f64>() / m;
    v.iter()
        .map(|p| [p[0] + fraction * (cx - p[0]), p[1] + fraction * (cy - p[1])])
        .collect()
}

/// Regular polygon approximating a circle.
pub fn circle_polygon(center: Point, radius: f64, sides: usize) -> Vec<Point> {
    (0..sides)
        .map(|k| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / sides as f64;
            [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
        })
        .collect()
}
