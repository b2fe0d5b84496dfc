use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::Write;

use super::{build_domain, build_hole, DomainSpec, HoleGeometry, HoleSpec, Point, Polygon};
use crate::{Error, Result, C64};

/// Structured background grid shared by Ω and every Ω \ K derived from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub origin: Point,
    pub hx: f64,
    pub hy: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn point(&self, i: usize, j: usize) -> Point {
        Point::new(
            self.origin.x + i as f64 * self.hx,
            self.origin.y + j as f64 * self.hy,
        )
    }

    fn index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    fn nearest(&self, p: Point) -> (i64, i64) {
        (
            ((p.x - self.origin.x) / self.hx).round() as i64,
            ((p.y - self.origin.y) / self.hy).round() as i64,
        )
    }

    fn cell(&self, p: Point) -> (usize, usize) {
        let i = ((p.x - self.origin.x) / self.hx).floor();
        let j = ((p.y - self.origin.y) / self.hy).floor();
        (
            (i.max(0.0) as usize).min(self.nx - 1),
            (j.max(0.0) as usize).min(self.ny - 1),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum BoundaryTag {
    Outer,
    Hole,
}

impl BoundaryTag {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::Outer => "outer",
            BoundaryTag::Hole => "hole",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub a: usize,
    pub b: usize,
    pub tag: BoundaryTag,
}

/// Link from an Ω \ K mesh back to the Ω mesh it was carved from.
#[derive(Debug, Clone)]
pub struct Submesh {
    /// Child node -> parent node. Duplicated crack nodes share a parent.
    pub node_map: Vec<usize>,
    /// Child element -> parent element.
    pub element_map: Vec<usize>,
    /// Parent elements removed by the hole, ascending.
    pub removed_elements: Vec<usize>,
    /// Child ids created by crack insertion.
    pub duplicated_nodes: Vec<usize>,
    pub hole_spec: HoleSpec,
    /// Hole as resolved by the mesh (slit vertices snapped to grid nodes).
    pub hole: HoleGeometry,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub nodes: Vec<Point>,
    /// Counterclockwise node triples.
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<BoundaryEdge>,
    pub h: f64,
    pub grid: Grid,
    pub domain: Polygon,
    pub parent: Option<Submesh>,
    grid_lookup: Vec<usize>,
}

const ABSENT: usize = usize::MAX;

/// Meshes Ω, and Ω \ K when a hole is given, on a structured grid of spacing ≈ h.
pub fn triangulate(domain: &DomainSpec, hole: Option<&HoleSpec>, h: f64) -> Result<Mesh> {
    let poly = build_domain(domain)?;
    let omega = Mesh::structured(poly, h)?;
    match hole {
        Some(spec) => omega.carve(spec),
        None => Ok(omega),
    }
}

impl Mesh {
    /// Right-triangle split of the bounding-box grid, keeping triangles whose
    /// centroid lies inside the domain polygon.
    pub fn structured(domain: Polygon, h: f64) -> Result<Mesh> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidSpec(format!("mesh size must be positive, got {h}")));
        }
        let (lo, hi) = domain.bbox();
        let nx = (((hi.x - lo.x) / h) - 1e-9).ceil().max(1.0) as usize;
        let ny = (((hi.y - lo.y) / h) - 1e-9).ceil().max(1.0) as usize;
        let grid = Grid {
            origin: lo,
            hx: (hi.x - lo.x) / nx as f64,
            hy: (hi.y - lo.y) / ny as f64,
            nx,
            ny,
        };
        let mut raw = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let n00 = grid.index(i, j);
                let n10 = grid.index(i + 1, j);
                let n11 = grid.index(i + 1, j + 1);
                let n01 = grid.index(i, j + 1);
                for tri in [[n00, n10, n11], [n00, n11, n01]] {
                    let c = centroid_of(tri.map(|k| {
                        let (ii, jj) = (k % (nx + 1), k / (nx + 1));
                        grid.point(ii, jj)
                    }));
                    if domain.contains(c) {
                        raw.push(tri);
                    }
                }
            }
        }
        if raw.is_empty() {
            return Err(Error::Resolution("no grid cell falls inside the domain".into()));
        }
        let mut used = vec![false; (nx + 1) * (ny + 1)];
        for t in &raw {
            for &k in t {
                used[k] = true;
            }
        }
        let mut grid_lookup = vec![ABSENT; used.len()];
        let mut nodes = Vec::new();
        for (k, &u) in used.iter().enumerate() {
            if u {
                grid_lookup[k] = nodes.len();
                nodes.push(grid.point(k % (nx + 1), k / (nx + 1)));
            }
        }
        let triangles: Vec<[usize; 3]> = raw.iter().map(|t| t.map(|k| grid_lookup[k])).collect();
        let boundary = boundary_edges(&triangles)
            .into_iter()
            .map(|(a, b)| BoundaryEdge {
                a,
                b,
                tag: BoundaryTag::Outer,
            })
            .collect();
        Ok(Mesh {
            nodes,
            triangles,
            boundary,
            h: grid.hx.max(grid.hy),
            grid,
            domain,
            parent: None,
            grid_lookup,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertices(&self, t: usize) -> [Point; 3] {
        self.triangles[t].map(|k| self.nodes[k])
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.vertices(t);
        0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.signed_area(t)).sum()
    }

    pub fn centroid(&self, t: usize) -> Point {
        centroid_of(self.vertices(t))
    }

    /// Constant gradients of the three P1 basis functions on element `t`.
    pub fn p1_gradients(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.vertices(t);
        let two_area = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
        [
            [(b.y - c.y) / two_area, (c.x - b.x) / two_area],
            [(c.y - a.y) / two_area, (a.x - c.x) / two_area],
            [(a.y - b.y) / two_area, (b.x - a.x) / two_area],
        ]
    }

    /// Local nodal values of a global field on element `t`.
    pub fn local<T: Copy>(&self, t: usize, u: &[T]) -> [T; 3] {
        self.triangles[t].map(|k| u[k])
    }

    /// Parent (Ω) nodes that have no counterpart in this Ω \ K mesh.
    pub fn hole_interior_nodes(&self, parent_nodes: usize) -> Vec<usize> {
        let Some(sub) = &self.parent else {
            return Vec::new();
        };
        let mut present = vec![false; parent_nodes];
        for &p in &sub.node_map {
            present[p] = true;
        }
        (0..parent_nodes).filter(|&k| !present[k]).collect()
    }

    /// Checks orientation and, for submeshes, the node-map coordinates.
    pub fn validate(&self, parent: Option<&Mesh>) -> Result<()> {
        for t in 0..self.num_triangles() {
            let a = self.signed_area(t);
            if !(a > 0.0) {
                return Err(Error::Assembly {
                    element: t,
                    reason: format!("nonpositive signed area {a:e}"),
                });
            }
        }
        if let (Some(sub), Some(par)) = (&self.parent, parent) {
            for (child, &p) in sub.node_map.iter().enumerate() {
                let (a, b) = (self.nodes[child], par.nodes[p]);
                if a.x.to_bits() != b.x.to_bits() || a.y.to_bits() != b.y.to_bits() {
                    return Err(Error::Internal(format!(
                        "node {child} does not coincide with parent node {p}"
                    )));
                }
            }
            for (child, &p) in sub.element_map.iter().enumerate() {
                let mapped = self.triangles[child].map(|k| sub.node_map[k]);
                if mapped != par.triangles[p] {
                    return Err(Error::Internal(format!(
                        "element {child} does not match parent element {p}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Derives the Ω \ K mesh from this Ω mesh: fat holes remove every element
    /// whose centroid lies in K, slits are snapped to grid lines and cut open
    /// by duplicating the nodes along them.
    pub fn carve(&self, spec: &HoleSpec) -> Result<Mesh> {
        if self.parent.is_some() {
            return Err(Error::Internal("can only carve a hole from an unperturbed mesh".into()));
        }
        let geom = build_hole(spec)?;
        if !matches!(geom, HoleGeometry::Empty) {
            let clearance = spec.check_clearance(&self.domain, 1.0)?;
            if self.h >= clearance {
                return Err(Error::Resolution(format!(
                    "mesh size {} is not below the hole clearance {clearance}",
                    self.h
                )));
            }
            if self.h >= spec.epsilon {
                return Err(Error::Resolution(format!(
                    "mesh size {} cannot resolve a hole of scale {}",
                    self.h, spec.epsilon
                )));
            }
        }

        let (kept, crack_edges, mesh_hole): (Vec<usize>, BTreeSet<(usize, usize)>, HoleGeometry) =
            match &geom {
                HoleGeometry::Empty => ((0..self.num_triangles()).collect(), BTreeSet::new(), HoleGeometry::Empty),
                HoleGeometry::Fat(poly) => {
                    let kept: Vec<usize> = (0..self.num_triangles())
                        .filter(|&t| !poly.contains(self.centroid(t)))
                        .collect();
                    if kept.len() == self.num_triangles() {
                        return Err(Error::Resolution(
                            "no element centroid falls inside the hole".into(),
                        ));
                    }
                    (kept, BTreeSet::new(), geom.clone())
                }
                HoleGeometry::Curves(curves) => {
                    let (edges, snapped) = self.snap_curves(curves)?;
                    ((0..self.num_triangles()).collect(), edges, HoleGeometry::Curves(snapped))
                }
            };

        // renumber surviving nodes in parent order
        let mut used = vec![false; self.num_nodes()];
        for &t in &kept {
            for &k in &self.triangles[t] {
                used[k] = true;
            }
        }
        let mut to_child = vec![ABSENT; self.num_nodes()];
        let mut node_map = Vec::new();
        for (k, &u) in used.iter().enumerate() {
            if u {
                to_child[k] = node_map.len();
                node_map.push(k);
            }
        }
        let mut triangles: Vec<[usize; 3]> =
            kept.iter().map(|&t| self.triangles[t].map(|k| to_child[k])).collect();

        let mut duplicated_nodes = Vec::new();
        if !crack_edges.is_empty() {
            let crack: HashSet<(usize, usize)> = crack_edges
                .iter()
                .map(|&(a, b)| (to_child[a], to_child[b]))
                .map(|(a, b)| (a.min(b), a.max(b)))
                .collect();
            let crack_nodes: BTreeSet<usize> = crack.iter().flat_map(|&(a, b)| [a, b]).collect();
            let original = triangles.clone();
            let mut incident: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (t, tri) in original.iter().enumerate() {
                for &k in tri {
                    if crack_nodes.contains(&k) {
                        incident.entry(k).or_default().push(t);
                    }
                }
            }
            for (&v, tris) in &incident {
                let sectors = fan_sectors(v, tris, &original, &crack);
                for sector in sectors.iter().skip(1) {
                    let id = node_map.len();
                    node_map.push(node_map[v]);
                    duplicated_nodes.push(id);
                    for &t in sector {
                        for k in triangles[t].iter_mut() {
                            if *k == v {
                                *k = id;
                            }
                        }
                    }
                }
            }
        }

        let nodes: Vec<Point> = node_map.iter().map(|&p| self.nodes[p]).collect();
        let parent_boundary: HashSet<(usize, usize)> = self
            .boundary
            .iter()
            .map(|e| (e.a.min(e.b), e.a.max(e.b)))
            .collect();
        let boundary = boundary_edges(&triangles)
            .into_iter()
            .map(|(a, b)| {
                let (pa, pb) = (node_map[a], node_map[b]);
                let tag = if parent_boundary.contains(&(pa.min(pb), pa.max(pb))) {
                    BoundaryTag::Outer
                } else {
                    BoundaryTag::Hole
                };
                BoundaryEdge { a, b, tag }
            })
            .collect();
        let kept_set: HashSet<usize> = kept.iter().copied().collect();
        let removed_elements = (0..self.num_triangles()).filter(|t| !kept_set.contains(t)).collect();

        Ok(Mesh {
            nodes,
            triangles,
            boundary,
            h: self.h,
            grid: self.grid,
            domain: self.domain.clone(),
            parent: Some(Submesh {
                node_map,
                element_map: kept,
                removed_elements,
                duplicated_nodes,
                hole_spec: spec.clone(),
                hole: mesh_hole,
            }),
            grid_lookup: Vec::new(),
        })
    }

    /// Snaps axis-aligned polylines to grid nodes and lists the mesh edges along them.
    #[allow(clippy::type_complexity)]
    fn snap_curves(
        &self,
        curves: &[Vec<Point>],
    ) -> Result<(BTreeSet<(usize, usize)>, Vec<Vec<Point>>)> {
        let mut edges = BTreeSet::new();
        let mut snapped = Vec::new();
        for curve in curves {
            let mut pts: Vec<(i64, i64)> = Vec::new();
            for &p in curve {
                let q = self.grid.nearest(p);
                if pts.last() != Some(&q) {
                    pts.push(q);
                }
            }
            if pts.len() < 2 {
                return Err(Error::Resolution(
                    "slit collapses to a single grid node at this mesh size".into(),
                ));
            }
            if curve.first() != curve.last() && pts.first() == pts.last() {
                return Err(Error::Resolution(
                    "split-ring gap closes when snapped to the grid".into(),
                ));
            }
            let node = |(i, j): (i64, i64)| -> Result<usize> {
                let ok = i >= 0 && j >= 0 && (i as usize) <= self.grid.nx && (j as usize) <= self.grid.ny;
                let id = if ok {
                    self.grid_lookup[self.grid.index(i as usize, j as usize)]
                } else {
                    ABSENT
                };
                if id == ABSENT {
                    Err(Error::Geometry(format!("slit node ({i}, {j}) is outside the mesh")))
                } else {
                    Ok(id)
                }
            };
            for w in pts.windows(2) {
                let ((i0, j0), (i1, j1)) = (w[0], w[1]);
                if i0 != i1 && j0 != j1 {
                    return Err(Error::Geometry("slit segments must be axis-aligned".into()));
                }
                let steps = (i1 - i0).abs().max((j1 - j0).abs());
                let (di, dj) = ((i1 - i0).signum(), (j1 - j0).signum());
                for s in 0..steps {
                    let a = node((i0 + s * di, j0 + s * dj))?;
                    let b = node((i0 + (s + 1) * di, j0 + (s + 1) * dj))?;
                    edges.insert((a.min(b), a.max(b)));
                }
            }
            snapped.push(
                pts.iter()
                    .map(|&(i, j)| self.grid.point(i as usize, j as usize))
                    .collect(),
            );
        }
        Ok((edges, snapped))
    }

    /// Plain-text export: node, triangle and boundary-edge sections.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# nodes {}", self.num_nodes())?;
        for (i, p) in self.nodes.iter().enumerate() {
            writeln!(w, "{i} {} {}", p.x, p.y)?;
        }
        writeln!(w, "# triangles {}", self.num_triangles())?;
        for (i, t) in self.triangles.iter().enumerate() {
            writeln!(w, "{i} {} {} {}", t[0], t[1], t[2])?;
        }
        writeln!(w, "# boundary {}", self.boundary.len())?;
        for e in &self.boundary {
            writeln!(w, "{} {} {}", e.a, e.b, e.tag.as_str())?;
        }
        Ok(())
    }
}

fn centroid_of(v: [Point; 3]) -> Point {
    Point::new((v[0].x + v[1].x + v[2].x) / 3.0, (v[0].y + v[1].y + v[2].y) / 3.0)
}

/// Edges used by exactly one triangle, oriented as in that triangle, in first-seen order.
fn boundary_edges(triangles: &[[usize; 3]]) -> Vec<(usize, usize)> {
    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for t in triangles {
        for e in 0..3 {
            let (a, b) = (t[e], t[(e + 1) % 3]);
            *count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let mut out = Vec::new();
    for t in triangles {
        for e in 0..3 {
            let (a, b) = (t[e], t[(e + 1) % 3]);
            if count[&(a.min(b), a.max(b))] == 1 {
                out.push((a, b));
            }
        }
    }
    out
}

/// Splits the triangles around node `v` into groups connected across non-crack edges.
fn fan_sectors(
    v: usize,
    tris: &[usize],
    triangles: &[[usize; 3]],
    crack: &HashSet<(usize, usize)>,
) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..tris.len()).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let others = |t: usize| -> Vec<usize> {
        triangles[t].iter().copied().filter(|&k| k != v).collect()
    };
    for a in 0..tris.len() {
        for b in a + 1..tris.len() {
            let oa = others(tris[a]);
            for w in others(tris[b]) {
                if oa.contains(&w) && !crack.contains(&(v.min(w), v.max(w))) {
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                    if ra != rb {
                        parent[ra.max(rb)] = ra.min(rb);
                    }
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..tris.len() {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(tris[i]);
    }
    // roots are the smallest member index, so groups come out ordered by first triangle
    groups.into_values().collect()
}

/// Bucketed point location on a mesh built over a structured grid.
pub struct Locator<'a> {
    mesh: &'a Mesh,
    buckets: Vec<Vec<usize>>,
}

impl<'a> Locator<'a> {
    pub fn new(mesh: &'a Mesh) -> Self {
        let g = mesh.grid;
        let mut buckets = vec![Vec::new(); g.nx * g.ny];
        for t in 0..mesh.num_triangles() {
            let v = mesh.vertices(t);
            let (mut lo, mut hi) = (v[0], v[0]);
            for p in &v[1..] {
                lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
                hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
            }
            let tol = 1e-9;
            let i0 = ((lo.x - g.origin.x) / g.hx - tol).floor().max(0.0) as usize;
            let j0 = ((lo.y - g.origin.y) / g.hy - tol).floor().max(0.0) as usize;
            let i1 = (((hi.x - g.origin.x) / g.hx + tol).floor() as usize).min(g.nx - 1);
            let j1 = (((hi.y - g.origin.y) / g.hy + tol).floor() as usize).min(g.ny - 1);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * g.nx + i].push(t);
                }
            }
        }
        Locator { mesh, buckets }
    }

    pub fn mesh(&self) -> &Mesh {
        self.mesh
    }

    /// Element containing `p` and the barycentric coordinates of `p` in it.
    pub fn locate(&self, p: Point) -> Option<(usize, [f64; 3])> {
        let (i, j) = self.mesh.grid.cell(p);
        for &t in &self.buckets[j * self.mesh.grid.nx + i] {
            let [a, b, c] = self.mesh.vertices(t);
            let det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
            let l0 = ((b.x - p.x) * (c.y - p.y) - (c.x - p.x) * (b.y - p.y)) / det;
            let l1 = ((c.x - p.x) * (a.y - p.y) - (a.x - p.x) * (c.y - p.y)) / det;
            let l2 = 1.0 - l0 - l1;
            let tol = -1e-12;
            if l0 >= tol && l1 >= tol && l2 >= tol {
                return Some((t, [l0, l1, l2]));
            }
        }
        None
    }

    /// P1 point evaluation; `None` outside the meshed region.
    pub fn eval(&self, u: &[C64], p: Point) -> Option<C64> {
        let (t, l) = self.locate(p)?;
        let loc = self.mesh.local(t, u);
        Some(loc[0] * l[0] + loc[1] * l[1] + loc[2] * l[2])
    }

    /// P1 value and (element-constant) gradient at `p`.
    pub fn eval_with_gradient(&self, u: &[C64], p: Point) -> Option<(C64, [C64; 2])> {
        let (t, l) = self.locate(p)?;
        let loc = self.mesh.local(t, u);
        let g = self.mesh.p1_gradients(t);
        let val = loc[0] * l[0] + loc[1] * l[1] + loc[2] * l[2];
        let mut grad = [C64::new(0.0, 0.0); 2];
        for k in 0..3 {
            grad[0] += loc[k] * g[k][0];
            grad[1] += loc[k] * g[k][1];
        }
        Some((val, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{HoleShape, SlitOrientation};
    use approx::assert_relative_eq;

    #[test]
    fn unit_square_counts() {
        let m = triangulate(&DomainSpec::unit_square(), None, 0.5).unwrap();
        assert_eq!(m.num_triangles(), 8);
        assert_eq!(m.num_nodes(), 9);
        m.validate(None).unwrap();
        assert_eq!(m.boundary.len(), 8);
        assert_relative_eq!(m.total_area(), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn disk_hole_area() {
        let spec = HoleSpec::new(HoleShape::Disk { segments: 64 }, Point::new(0.5, 0.5), 0.1);
        let m = triangulate(&DomainSpec::unit_square(), Some(&spec), 0.01).unwrap();
        let expected = 1.0 - std::f64::consts::PI * 0.01;
        assert!((m.total_area() - expected).abs() / expected < 0.02);
        assert!(m.boundary.iter().any(|e| e.tag == BoundaryTag::Hole));
        let omega = triangulate(&DomainSpec::unit_square(), None, 0.01).unwrap();
        m.validate(Some(&omega)).unwrap();
        let sub = m.parent.as_ref().unwrap();
        assert_eq!(
            sub.element_map.len() + sub.removed_elements.len(),
            omega.num_triangles()
        );
        assert!(!m.hole_interior_nodes(omega.num_nodes()).is_empty());
    }

    #[test]
    fn segment_slit_duplicates_interior_nodes() {
        let spec = HoleSpec::new(
            HoleShape::SegmentSlit {
                orientation: SlitOrientation::Horizontal,
            },
            Point::new(0.5, 0.5),
            0.1,
        );
        let omega = triangulate(&DomainSpec::unit_square(), None, 0.025).unwrap();
        let m = omega.carve(&spec).unwrap();
        m.validate(Some(&omega)).unwrap();
        let sub = m.parent.as_ref().unwrap();
        // slit from 0.4 to 0.6 spans 8 cells, 9 nodes, 7 interior
        assert_eq!(sub.duplicated_nodes.len(), 7);
        assert_eq!(m.num_nodes(), omega.num_nodes() + 7);
        assert_eq!(m.num_triangles(), omega.num_triangles());
        // both faces of the slit become hole boundary: 8 edges on each side
        let hole_edges = m.boundary.iter().filter(|e| e.tag == BoundaryTag::Hole).count();
        assert_eq!(hole_edges, 16);
        // away from the slit the connectivity is unchanged
        for (child, tri) in m.triangles.iter().enumerate() {
            let c = m.centroid(child);
            if c.dist(Point::new(0.5, 0.5)) > 0.15 {
                assert_eq!(*tri, omega.triangles[sub.element_map[child]]);
            }
        }
    }

    #[test]
    fn too_coarse_for_hole() {
        let spec = HoleSpec::new(HoleShape::Disk { segments: 64 }, Point::new(0.5, 0.5), 0.1);
        assert!(matches!(
            triangulate(&DomainSpec::unit_square(), Some(&spec), 0.2),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn locator_evaluates_linear_fields_exactly() {
        let m = triangulate(&DomainSpec::unit_square(), None, 0.1).unwrap();
        let u: Vec<C64> = m.nodes.iter().map(|p| C64::new(2.0 * p.x - p.y, p.x)).collect();
        let loc = Locator::new(&m);
        for p in [Point::new(0.33, 0.71), Point::new(1.0, 1.0), Point::new(0.0, 0.5)] {
            let (v, g) = loc.eval_with_gradient(&u, p).unwrap();
            assert!((v - C64::new(2.0 * p.x - p.y, p.x)).norm() < 1e-13);
            assert!((g[0] - C64::new(2.0, 1.0)).norm() < 1e-12);
            assert!((g[1] - C64::new(-1.0, 0.0)).norm() < 1e-12);
        }
        assert!(loc.locate(Point::new(1.5, 0.5)).is_none());
    }

    #[test]
    fn text_export_sections() {
        let m = triangulate(&DomainSpec::unit_square(), None, 0.5).unwrap();
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("# nodes 9\n0 0 0\n"));
        assert!(s.contains("# triangles 8\n0 0 1 4\n"));
        assert!(s.contains("outer"));
    }
}
