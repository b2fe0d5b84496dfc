use serde::{Deserialize, Serialize};

use super::{point_segment_distance, regular_polygon, segments_intersect, Point, Polygon};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlitOrientation {
    #[default]
    Horizontal,
    Vertical,
}

/// Shape of the hole, independent of its position and scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum HoleShape {
    /// No hole at all; Ω \ K = Ω.
    None,
    Disk {
        #[serde(default = "default_hole_segments")]
        segments: usize,
    },
    /// Convex polygon given in unit-ball coordinates, scaled by ε.
    ConvexPolygon { vertices: Vec<Point> },
    /// Straight slit of length 2ε through the center.
    SegmentSlit {
        #[serde(default)]
        orientation: SlitOrientation,
    },
    /// Two legs of length √2·ε meeting at a right angle.
    LSlit,
    /// Square ring inscribed in the ball with a gap centred on its lower side.
    /// `gap` is the fraction of the ring perimeter that is missing.
    SplitRing { gap: f64 },
}

fn default_hole_segments() -> usize {
    64
}

impl HoleShape {
    pub fn is_slit(&self) -> bool {
        matches!(
            self,
            HoleShape::SegmentSlit { .. } | HoleShape::LSlit | HoleShape::SplitRing { .. }
        )
    }
}

/// A hole `K ⊂ B_ε(p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoleSpec {
    pub shape: HoleShape,
    pub center: Point,
    pub epsilon: f64,
}

impl HoleSpec {
    pub fn new(shape: HoleShape, center: Point, epsilon: f64) -> Self {
        HoleSpec {
            shape,
            center,
            epsilon,
        }
    }

    /// Checks `B_{factor·ε}(p) ⊂ Ω` with positive clearance.
    pub fn check_clearance(&self, domain: &Polygon, factor: f64) -> Result<f64> {
        if !domain.contains(self.center) {
            return Err(Error::InvalidSpec(format!(
                "hole center ({}, {}) lies outside the domain",
                self.center.x, self.center.y
            )));
        }
        let clearance = domain.boundary_distance(self.center) - factor * self.epsilon;
        if clearance <= 0.0 {
            return Err(Error::InvalidSpec(format!(
                "ball of radius {}·ε = {} around the hole center touches the domain boundary",
                factor,
                factor * self.epsilon
            )));
        }
        Ok(clearance)
    }
}

/// Geometric realization of a hole.
#[derive(Debug, Clone, PartialEq)]
pub enum HoleGeometry {
    Empty,
    /// A region with positive area bounded by a polygon.
    Fat(Polygon),
    /// Zero-area curves (open or closed polylines).
    Curves(Vec<Vec<Point>>),
}

impl HoleGeometry {
    /// All boundary segments of the hole.
    pub fn segments(&self) -> Vec<(Point, Point)> {
        match self {
            HoleGeometry::Empty => Vec::new(),
            HoleGeometry::Fat(poly) => poly.edges().collect(),
            HoleGeometry::Curves(curves) => curves
                .iter()
                .flat_map(|c| c.windows(2).map(|w| (w[0], w[1])))
                .collect(),
        }
    }

    /// True when `p` belongs to the (closed) hole.
    pub fn contains(&self, p: Point) -> bool {
        match self {
            HoleGeometry::Empty => false,
            HoleGeometry::Fat(poly) => poly.contains(p),
            HoleGeometry::Curves(_) => self
                .segments()
                .iter()
                .any(|&(a, b)| point_segment_distance(p, a, b) == 0.0),
        }
    }

    /// True when the closed segment `[a, b]` meets the hole.
    pub fn hits_segment(&self, a: Point, b: Point) -> bool {
        if let HoleGeometry::Fat(poly) = self {
            if poly.contains(a) || poly.contains(b) {
                return true;
            }
        }
        self.segments()
            .iter()
            .any(|&(p, q)| segments_intersect(a, b, p, q))
    }

    pub fn vertices(&self) -> Vec<Point> {
        match self {
            HoleGeometry::Empty => Vec::new(),
            HoleGeometry::Fat(poly) => poly.vertices.clone(),
            HoleGeometry::Curves(c) => c.iter().flatten().copied().collect(),
        }
    }
}

/// Builds the hole curves and checks that they stay inside `B_ε(p)`.
pub fn build_hole(spec: &HoleSpec) -> Result<HoleGeometry> {
    let eps = spec.epsilon;
    let p = spec.center;
    if matches!(spec.shape, HoleShape::None) {
        return Ok(HoleGeometry::Empty);
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidSpec(format!("hole scale epsilon must be positive, got {eps}")));
    }
    let geom = match &spec.shape {
        HoleShape::None => unreachable!(),
        HoleShape::Disk { segments } => {
            if *segments < 32 {
                return Err(Error::InvalidSpec(format!(
                    "disk hole needs at least 32 segments, got {segments}"
                )));
            }
            HoleGeometry::Fat(regular_polygon(p, eps, *segments))
        }
        HoleShape::ConvexPolygon { vertices } => {
            let mut poly = Polygon::new(vertices.iter().map(|v| p.add(v.scale(eps))).collect());
            if !poly.is_convex() || poly.area() == 0.0 {
                return Err(Error::InvalidSpec("hole polygon is not convex".into()));
            }
            if poly.signed_area() < 0.0 {
                poly.vertices.reverse();
            }
            HoleGeometry::Fat(poly)
        }
        HoleShape::SegmentSlit { orientation } => {
            let d = match orientation {
                SlitOrientation::Horizontal => Point::new(eps, 0.0),
                SlitOrientation::Vertical => Point::new(0.0, eps),
            };
            HoleGeometry::Curves(vec![vec![p.sub(d), p.add(d)]])
        }
        HoleShape::LSlit => {
            let a = eps / std::f64::consts::SQRT_2;
            HoleGeometry::Curves(vec![vec![
                Point::new(p.x - a, p.y + a),
                Point::new(p.x - a, p.y - a),
                Point::new(p.x + a, p.y - a),
            ]])
        }
        HoleShape::SplitRing { gap } => {
            if !(*gap > 0.0 && *gap < 1.0) {
                return Err(Error::InvalidSpec(format!(
                    "split-ring gap fraction must lie in (0, 1), got {gap}"
                )));
            }
            HoleGeometry::Curves(vec![split_ring(p, eps / std::f64::consts::SQRT_2, *gap)])
        }
    };
    let tol = 1e-12 * eps;
    for v in geom.vertices() {
        if v.dist(p) > eps + tol {
            return Err(Error::InvalidSpec(format!(
                "hole vertex ({}, {}) escapes the ball of radius {eps}",
                v.x, v.y
            )));
        }
    }
    Ok(geom)
}

/// Open polyline along the square `[p - a, p + a]²`, starting right of the gap
/// and running counterclockwise. Arc length is measured from the midpoint of
/// the lower side.
fn split_ring(p: Point, a: f64, gap: f64) -> Vec<Point> {
    let perimeter = 8.0 * a;
    let start = 0.5 * gap * perimeter;
    let end = perimeter - start;
    // corners at arc lengths a, 3a, 5a, 7a
    let at = |s: f64| -> Point {
        if s <= a {
            Point::new(p.x + s, p.y - a)
        } else if s <= 3.0 * a {
            Point::new(p.x + a, p.y - a + (s - a))
        } else if s <= 5.0 * a {
            Point::new(p.x + a - (s - 3.0 * a), p.y + a)
        } else if s <= 7.0 * a {
            Point::new(p.x - a, p.y + a - (s - 5.0 * a))
        } else {
            Point::new(p.x - a + (s - 7.0 * a), p.y - a)
        }
    };
    let mut pts = vec![at(start)];
    for corner in [a, 3.0 * a, 5.0 * a, 7.0 * a] {
        if corner > start && corner < end {
            pts.push(at(corner));
        }
    }
    pts.push(at(end));
    pts
}
