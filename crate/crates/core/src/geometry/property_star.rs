use rayon::prelude::*;

use super::{HoleGeometry, Point, Polygon};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RayDirection {
    Up,
    Down,
    Left,
    Right,
}

impl RayDirection {
    pub const ALL: [RayDirection; 4] = [
        RayDirection::Up,
        RayDirection::Down,
        RayDirection::Left,
        RayDirection::Right,
    ];

    pub fn vector(self) -> Point {
        match self {
            RayDirection::Up => Point::new(0.0, 1.0),
            RayDirection::Down => Point::new(0.0, -1.0),
            RayDirection::Left => Point::new(-1.0, 0.0),
            RayDirection::Right => Point::new(1.0, 0.0),
        }
    }
}

/// An axis half-line from a sample point to its first exit through ∂Ω.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub direction: RayDirection,
    pub origin: Point,
    pub exit: Point,
    /// True when the half-line meets the hole.
    pub blocked: bool,
}

impl Ray {
    pub fn length(&self) -> f64 {
        self.origin.dist(self.exit)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub point: Point,
    /// Blocked flags in the order up, down, left, right.
    pub blocked: [bool; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyStarReport {
    pub compliant: bool,
    /// Lexicographically smallest violating sample, if any.
    pub witness: Option<Witness>,
    pub samples_tested: usize,
    pub violations: usize,
    pub grid_n: usize,
}

/// Distance along `dir` from `origin` to the first crossing of the polygon boundary.
fn exit_distance(domain: &Polygon, origin: Point, dir: Point) -> f64 {
    let mut best = f64::INFINITY;
    for (a, b) in domain.edges() {
        let e = b.sub(a);
        let denom = dir.x * e.y - dir.y * e.x;
        if denom == 0.0 {
            continue;
        }
        let w = a.sub(origin);
        let t = (w.x * e.y - w.y * e.x) / denom;
        let s = (w.x * dir.y - w.y * dir.x) / denom;
        if t > 0.0 && (0.0..=1.0).contains(&s) {
            best = best.min(t);
        }
    }
    if best.is_finite() {
        best
    } else {
        0.0
    }
}

/// Casts the four axis half-lines from `point` to ∂Ω and tests each against the hole.
pub fn cast_rays(domain: &Polygon, hole: &HoleGeometry, point: Point) -> [Ray; 4] {
    RayDirection::ALL.map(|direction| {
        let d = direction.vector();
        let t = exit_distance(domain, point, d);
        let exit = point.add(d.scale(t));
        Ray {
            direction,
            origin: point,
            exit,
            blocked: hole.hits_segment(point, exit),
        }
    })
}

/// Samples Ω on a `grid_n × grid_n` lattice of cell centres over its bounding
/// box and checks that each sample in Ω \ K sees at least one axis half-line
/// free of K. A reported witness is an exact certificate of non-compliance.
pub fn check_property_star(
    domain: &Polygon,
    hole: &HoleGeometry,
    grid_n: usize,
) -> Result<PropertyStarReport> {
    if grid_n < 16 {
        return Err(crate::Error::InvalidSpec(format!(
            "property* sampling needs grid_n >= 16, got {grid_n}"
        )));
    }
    let (lo, hi) = domain.bbox();
    let dx = (hi.x - lo.x) / grid_n as f64;
    let dy = (hi.y - lo.y) / grid_n as f64;

    // (tested, violations, first witness) per row, reduced in row order
    let rows: Vec<(usize, usize, Option<Witness>)> = (0..grid_n)
        .into_par_iter()
        .map(|i| {
            let x = lo.x + (i as f64 + 0.5) * dx;
            let mut tested = 0;
            let mut violations = 0;
            let mut witness = None;
            for j in 0..grid_n {
                let y = lo.y + (j as f64 + 0.5) * dy;
                let p = Point::new(x, y);
                if !domain.contains(p) || hole.contains(p) {
                    continue;
                }
                tested += 1;
                let rays = cast_rays(domain, hole, p);
                if rays.iter().all(|r| r.blocked) {
                    violations += 1;
                    if witness.is_none() {
                        witness = Some(Witness {
                            point: p,
                            blocked: [true; 4],
                        });
                    }
                }
            }
            (tested, violations, witness)
        })
        .collect();

    let samples_tested = rows.iter().map(|r| r.0).sum();
    let violations = rows.iter().map(|r| r.1).sum();
    // rows ascend in x, samples within a row ascend in y
    let witness = rows.into_iter().find_map(|r| r.2);
    Ok(PropertyStarReport {
        compliant: violations == 0,
        witness,
        samples_tested,
        violations,
        grid_n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, build_hole, DomainSpec, HoleShape, HoleSpec};

    fn square() -> Polygon {
        build_domain(&DomainSpec::unit_square()).unwrap()
    }

    fn hole(shape: HoleShape) -> HoleGeometry {
        build_hole(&HoleSpec::new(shape, Point::new(0.5, 0.5), 0.2)).unwrap()
    }

    #[test]
    fn empty_hole_is_compliant() {
        let r = check_property_star(&square(), &HoleGeometry::Empty, 16).unwrap();
        assert!(r.compliant);
        assert_eq!(r.samples_tested, 256);
        assert!(r.witness.is_none());
    }

    #[test]
    fn split_ring_witness_in_cavity() {
        let h = hole(HoleShape::SplitRing { gap: 0.1 });
        let r = check_property_star(&square(), &h, 64).unwrap();
        assert!(!r.compliant);
        let w = r.witness.unwrap();
        let a = 0.2 / std::f64::consts::SQRT_2;
        assert!((w.point.x - 0.5).abs() < a && (w.point.y - 0.5).abs() < a);
        assert!(!h.contains(w.point));
    }

    #[test]
    fn grid_too_small() {
        assert!(check_property_star(&square(), &HoleGeometry::Empty, 8).is_err());
    }

    #[test]
    fn rays_reach_boundary() {
        let rays = cast_rays(&square(), &HoleGeometry::Empty, Point::new(0.25, 0.75));
        assert_eq!(rays[0].exit, Point::new(0.25, 1.0));
        assert_eq!(rays[1].exit, Point::new(0.25, 0.0));
        assert_eq!(rays[2].exit, Point::new(0.0, 0.75));
        assert_eq!(rays[3].exit, Point::new(1.0, 0.75));
        assert!(rays.iter().all(|r| !r.blocked));
    }
}
