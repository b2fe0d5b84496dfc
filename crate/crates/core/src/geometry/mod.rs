//! Domains, holes, the axis half-line condition, and nested triangulations.

mod hole;
mod mesh;
mod property_star;

pub use hole::{build_hole, HoleGeometry, HoleShape, HoleSpec, SlitOrientation};
pub use mesh::{triangulate, BoundaryEdge, BoundaryTag, Grid, Locator, Mesh, Submesh};
pub use property_star::{cast_rays, check_property_star, PropertyStarReport, Ray, RayDirection, Witness};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A point in the plane. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn sub(self, other: Point) -> Point {
        Point::new(self.x - other.x, self.y - other.y)
    }

    pub fn add(self, other: Point) -> Point {
        Point::new(self.x + other.x, self.y + other.y)
    }

    pub fn scale(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl From<[f64; 2]> for Point {
    fn from(v: [f64; 2]) -> Self {
        Point::new(v[0], v[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn on_segment(p: Point, a: Point, b: Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test (touching counts).
pub fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(p1, q1, q2))
        || (d2 == 0.0 && on_segment(p2, q1, q2))
        || (d3 == 0.0 && on_segment(q1, p1, p2))
        || (d4 == 0.0 && on_segment(q2, p1, p2))
}

/// Euclidean distance from `p` to the closed segment `[a, b]`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.x * ab.x + ab.y * ab.y;
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = (((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / len2).clamp(0.0, 1.0);
    p.dist(a.add(ab.scale(t)))
}

/// A closed polygon; the closing edge from the last vertex back to the first is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub vertices: Vec<Point>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Self {
        Polygon { vertices }
    }

    /// Shoelace signed area, positive for counterclockwise orientation.
    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        let mut s = 0.0;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            s += a.x * b.y - b.x * a.y;
        }
        0.5 * s
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Even-odd point-in-polygon test. Points on the boundary count as inside.
    pub fn contains(&self, p: Point) -> bool {
        if self.edges().any(|(a, b)| point_segment_distance(p, a, b) == 0.0) {
            return true;
        }
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn boundary_distance(&self, p: Point) -> f64 {
        self.edges()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn bbox(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo.x = lo.x.min(v.x);
            lo.y = lo.y.min(v.y);
            hi.x = hi.x.max(v.x);
            hi.y = hi.y.max(v.y);
        }
        (lo, hi)
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                d = d.max(a.dist(*b));
            }
        }
        d
    }

    /// True when no two non-adjacent edges intersect.
    pub fn is_simple(&self) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        let e: Vec<_> = self.edges().collect();
        for i in 0..n {
            for j in i + 1..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if !adjacent && segments_intersect(e[i].0, e[i].1, e[j].0, e[j].1) {
                    return false;
                }
            }
        }
        true
    }

    pub fn is_convex(&self) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        let sign = self.signed_area().signum();
        (0..n).all(|i| {
            let c = cross(
                self.vertices[i],
                self.vertices[(i + 1) % n],
                self.vertices[(i + 2) % n],
            );
            c * sign >= 0.0
        })
    }
}

/// The unperturbed domain Ω.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainSpec {
    Rectangle {
        min: Point,
        max: Point,
    },
    Disk {
        center: Point,
        radius: f64,
        #[serde(default = "default_disk_segments")]
        segments: usize,
    },
}

fn default_disk_segments() -> usize {
    64
}

impl DomainSpec {
    pub fn unit_square() -> Self {
        DomainSpec::Rectangle {
            min: Point::new(0.0, 0.0),
            max: Point::new(1.0, 1.0),
        }
    }
}

/// Boundary polygon of Ω, counterclockwise.
pub fn build_domain(spec: &DomainSpec) -> Result<Polygon> {
    let poly = match *spec {
        DomainSpec::Rectangle { min, max } => {
            if !(max.x > min.x && max.y > min.y) || !(max.x - min.x).is_finite() || !(max.y - min.y).is_finite() {
                return Err(Error::InvalidSpec(format!(
                    "degenerate rectangle [{}, {}] x [{}, {}]",
                    min.x, max.x, min.y, max.y
                )));
            }
            Polygon::new(vec![
                min,
                Point::new(max.x, min.y),
                max,
                Point::new(min.x, max.y),
            ])
        }
        DomainSpec::Disk {
            center,
            radius,
            segments,
        } => {
            if !(radius > 0.0) || !radius.is_finite() {
                return Err(Error::InvalidSpec(format!("nonpositive disk radius {radius}")));
            }
            if segments < 16 {
                return Err(Error::InvalidSpec(format!(
                    "disk approximation needs at least 16 segments, got {segments}"
                )));
            }
            regular_polygon(center, radius, segments)
        }
    };
    Ok(poly)
}

pub(crate) fn regular_polygon(center: Point, radius: f64, segments: usize) -> Polygon {
    let verts = (0..segments)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / segments as f64;
            Point::new(center.x + radius * t.cos(), center.y + radius * t.sin())
        })
        .collect();
    Polygon::new(verts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn unit_square_polygon() {
        let p = build_domain(&DomainSpec::unit_square()).unwrap();
        assert_eq!(p.vertices.len(), 4);
        assert_eq!(p.signed_area(), 1.0);
    }

    #[test]
    fn disk_polygon_area() {
        let spec = DomainSpec::Disk {
            center: Point::new(0.0, 0.0),
            radius: 2.0,
            segments: 64,
        };
        let p = build_domain(&spec).unwrap();
        // n triangles of area r²/2 · sin(2π/n)
        let oracle = 0.5 * 64.0 * 4.0 * (2.0 * std::f64::consts::PI / 64.0).sin();
        assert_relative_eq!(p.signed_area(), oracle, max_relative = 1e-12);
        let exact = 4.0 * std::f64::consts::PI;
        assert!((p.signed_area() - exact).abs() / exact < 0.01);
        assert!(p.is_simple());
    }

    #[test]
    fn invalid_domains() {
        let zero = DomainSpec::Disk {
            center: Point::new(0.0, 0.0),
            radius: 0.0,
            segments: 64,
        };
        assert!(matches!(build_domain(&zero), Err(Error::InvalidSpec(_))));
        let coarse = DomainSpec::Disk {
            center: Point::new(0.0, 0.0),
            radius: 1.0,
            segments: 8,
        };
        assert!(matches!(build_domain(&coarse), Err(Error::InvalidSpec(_))));
        let flat = DomainSpec::Rectangle {
            min: Point::new(0.0, 0.0),
            max: Point::new(1.0, 0.0),
        };
        assert!(matches!(build_domain(&flat), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn segment_tests() {
        let o = Point::new(0.0, 0.0);
        assert!(segments_intersect(o, Point::new(1.0, 1.0), Point::new(0.0, 1.0), Point::new(1.0, 0.0)));
        assert!(!segments_intersect(o, Point::new(1.0, 0.0), Point::new(0.0, 1.0), Point::new(1.0, 1.0)));
        // touching endpoint
        assert!(segments_intersect(o, Point::new(1.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 1.0)));
        assert_eq!(point_segment_distance(Point::new(0.5, 1.0), o, Point::new(1.0, 0.0)), 1.0);
    }

    #[test]
    fn point_in_polygon() {
        let p = build_domain(&DomainSpec::unit_square()).unwrap();
        assert!(p.contains(Point::new(0.5, 0.5)));
        assert!(p.contains(Point::new(1.0, 0.5)));
        assert!(!p.contains(Point::new(1.5, 0.5)));
    }
}
