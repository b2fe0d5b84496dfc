//! Identification operators between the Ω and Ω \ K discretizations and
//! empirical closeness constants.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::assembly::{apply_hamiltonian, FormPair};
use crate::geometry::{HoleGeometry, Locator, Mesh, Point, Submesh};
use crate::linalg::inner;
use crate::{Error, Result, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Number of radii sampled in (ε, 2ε) and angular samples per circle.
pub const RADIUS_SAMPLES: usize = 32;
pub const ANGLE_SAMPLES: usize = 256;

/// The two discretizations on nested meshes, with the hole ball `B_ε(p)`.
pub struct CouplingPair {
    pub omega: Arc<FormPair>,
    pub hole: Arc<FormPair>,
    pub center: Point,
    pub epsilon: f64,
    /// Ω node → the Ω \ K nodes sitting on it (several along a slit).
    inverse: Vec<Vec<usize>>,
    /// Radii below this leave some outer Ω node without a unique counterpart.
    min_radius: f64,
}

impl CouplingPair {
    pub fn new(omega: Arc<FormPair>, hole: Arc<FormPair>) -> Result<CouplingPair> {
        let sub = hole
            .mesh()
            .parent
            .as_ref()
            .ok_or_else(|| Error::Internal("Ω \\ K mesh carries no parent map".into()))?;
        let parent = omega.mesh();
        hole.mesh().validate(Some(parent))?;
        if !matches!(sub.hole, HoleGeometry::Empty) {
            sub.hole_spec.check_clearance(&parent.domain, 2.0)?;
        }
        let mut inverse = vec![Vec::new(); parent.num_nodes()];
        for (child, &p) in sub.node_map.iter().enumerate() {
            inverse[p].push(child);
        }
        let center = sub.hole_spec.center;
        let min_radius = inverse
            .iter()
            .enumerate()
            .filter(|(_, c)| c.len() != 1)
            .map(|(k, _)| parent.nodes[k].dist(center))
            .fold(0.0, f64::max);
        Ok(CouplingPair {
            center,
            epsilon: sub.hole_spec.epsilon,
            omega,
            hole,
            inverse,
            min_radius,
        })
    }

    fn sub(&self) -> &Submesh {
        self.hole.mesh().parent.as_ref().expect("checked in new")
    }

    pub fn is_empty_hole(&self) -> bool {
        matches!(self.sub().hole, HoleGeometry::Empty)
    }

    fn omega_mesh(&self) -> &Mesh {
        self.omega.mesh()
    }

    fn check_omega(&self, f: &[C64]) -> Result<()> {
        if f.len() != self.omega.n() {
            return Err(Error::Size(format!("Ω vector has length {}, expected {}", f.len(), self.omega.n())));
        }
        Ok(())
    }

    fn check_hole(&self, u: &[C64]) -> Result<()> {
        if u.len() != self.hole.n() {
            return Err(Error::Size(format!("Ω \\ K vector has length {}, expected {}", u.len(), self.hole.n())));
        }
        Ok(())
    }

    /// `J f = J₁ f`: restriction through the node map.
    pub fn restrict_j(&self, f: &[C64]) -> Result<Vec<C64>> {
        self.check_omega(f)?;
        Ok(self.sub().node_map.iter().map(|&p| f[p]).collect())
    }

    /// `J′ u`: extension by zero into the hole.
    pub fn extend_zero_jprime(&self, u: &[C64]) -> Result<BrokenField> {
        self.check_hole(u)?;
        let sub = self.sub();
        let mut values = vec![[ZERO; 3]; self.omega_mesh().num_triangles()];
        for (t, &e) in sub.element_map.iter().enumerate() {
            values[e] = self.hole.mesh().local(t, u);
        }
        Ok(BrokenField { values })
    }

    /// Restriction of an element-wise field back to Ω \ K.
    pub fn restrict_broken(&self, field: &BrokenField) -> Vec<C64> {
        let mesh = self.hole.mesh();
        let mut out = vec![ZERO; mesh.num_nodes()];
        for (t, &e) in self.sub().element_map.iter().enumerate() {
            for (k, &node) in mesh.triangles[t].iter().enumerate() {
                out[node] = field.values[e][k];
            }
        }
        out
    }

    /// Angular-derivative energy `∫|∂_φ ũ(r, φ)|² dφ` on the circle of radius `r`,
    /// or `None` if the circle leaves the meshed Ω \ K.
    pub fn angular_energy(&self, locator: &Locator, u: &[C64], r: f64) -> Option<f64> {
        let vals = self.circle_values(locator, u, r)?;
        let dphi = 2.0 * PI / ANGLE_SAMPLES as f64;
        let n = vals.len();
        Some(
            (0..n)
                .map(|k| ((vals[(k + 1) % n] - vals[(k + n - 1) % n]) / (2.0 * dphi)).norm_sqr())
                .sum::<f64>()
                * dphi,
        )
    }

    fn circle_values(&self, locator: &Locator, u: &[C64], r: f64) -> Option<Vec<C64>> {
        (0..ANGLE_SAMPLES)
            .map(|k| {
                let phi = 2.0 * PI * k as f64 / ANGLE_SAMPLES as f64;
                locator.eval(u, self.center.add(Point::new(r * phi.cos(), r * phi.sin())))
            })
            .collect()
    }

    /// Candidate radii strictly inside (ε, 2ε).
    pub fn candidate_radii(&self) -> Vec<f64> {
        (1..=RADIUS_SAMPLES)
            .map(|j| self.epsilon * (1.0 + j as f64 / (RADIUS_SAMPLES + 1) as f64))
            .collect()
    }

    /// The sampled radius minimizing the angular-derivative energy of `u`.
    pub fn choose_radius(&self, u: &[C64]) -> Result<f64> {
        self.check_hole(u)?;
        let locator = Locator::new(self.hole.mesh());
        let mut best: Option<(f64, f64)> = None;
        for r in self.candidate_radii() {
            if r <= self.min_radius {
                continue;
            }
            let Some(e) = self.angular_energy(&locator, u, r) else {
                continue;
            };
            if best.is_none_or(|(_, b)| e < b) {
                best = Some((r, e));
            }
        }
        best.map(|(r, _)| r).ok_or_else(|| {
            Error::Internal(format!(
                "no circle in (ε, 2ε) around ({}, {}) lies in the meshed domain",
                self.center.x, self.center.y
            ))
        })
    }

    /// `∫(|∇u|² + |u|²)` over Ω \ K elements with centroid in the annulus ε < |x − p| < 2ε.
    pub fn annulus_energy(&self, u: &[C64]) -> Result<f64> {
        self.check_hole(u)?;
        let mesh = self.hole.mesh();
        let elements: Vec<usize> = (0..mesh.num_triangles())
            .filter(|&t| {
                let d = mesh.centroid(t).dist(self.center);
                d > self.epsilon && d < 2.0 * self.epsilon
            })
            .collect();
        Ok(h1_integral(mesh, u, &elements))
    }

    /// `J₁′ u`: copies `u` outside `B_ρ(p)` and extends `(r/ρ)·ũ(ρ, φ)` inside.
    pub fn extend_radial_j1prime(&self, u: &[C64], rho: f64) -> Result<Vec<C64>> {
        self.check_hole(u)?;
        let omega = self.omega_mesh();
        if self.is_empty_hole() {
            return Ok(self.sub().node_map.iter().zip(u).fold(vec![ZERO; omega.num_nodes()], |mut acc, (&p, &v)| {
                acc[p] = v;
                acc
            }));
        }
        if !(rho > self.epsilon && rho < 2.0 * self.epsilon) {
            return Err(Error::Internal(format!("extension radius {rho} outside (ε, 2ε)")));
        }
        let locator = Locator::new(self.hole.mesh());
        omega
            .nodes
            .iter()
            .enumerate()
            .map(|(k, &x)| {
                let d = x.sub(self.center);
                let r = d.x.hypot(d.y);
                if r >= rho {
                    match self.inverse[k].as_slice() {
                        [c] => Ok(u[*c]),
                        _ => Err(Error::Internal(format!("Ω node {k} outside the extension ball has no unique counterpart"))),
                    }
                } else if r == 0.0 {
                    Ok(ZERO)
                } else {
                    let on_circle = self.center.add(d.scale(rho / r));
                    locator
                        .eval(u, on_circle)
                        .map(|v| v * (r / rho))
                        .ok_or_else(|| Error::Internal(format!("extension circle leaves the mesh at Ω node {k}")))
                }
            })
            .collect()
    }

    /// `J₁′ u` with the radius chosen for `u`.
    pub fn extend_radial_auto(&self, u: &[C64]) -> Result<(Vec<C64>, f64)> {
        if self.is_empty_hole() {
            return Ok((self.extend_radial_j1prime(u, f64::NAN)?, f64::NAN));
        }
        let rho = self.choose_radius(u)?;
        Ok((self.extend_radial_j1prime(u, rho)?, rho))
    }

    /// `‖f − J′J f‖₀²`: the mass of `f` on the removed elements.
    pub fn removed_mass(&self, f: &[C64]) -> Result<f64> {
        self.check_omega(f)?;
        Ok(self.sub().removed_elements.iter().map(|&t| {
            let e = self.omega.element(t);
            e.mass(&self.omega_mesh().local(t, f))
        }).sum())
    }

    /// `‖J′u − g‖₀²` for a nodal Ω field `g`.
    pub fn broken_distance_sq(&self, field: &BrokenField, g: &[C64]) -> f64 {
        let mesh = self.omega_mesh();
        (0..mesh.num_triangles())
            .map(|t| {
                let gl = mesh.local(t, g);
                let d: [C64; 3] = std::array::from_fn(|k| field.values[t][k] - gl[k]);
                self.omega.element(t).mass(&d)
            })
            .sum()
    }

    /// `(f, J′u)` in Ω.
    pub fn broken_inner(&self, f: &[C64], field: &BrokenField) -> C64 {
        let mesh = self.omega_mesh();
        (0..mesh.num_triangles())
            .map(|t| {
                let e = self.omega.element(t);
                let fl = mesh.local(t, f);
                let mut s = ZERO;
                for i in 0..3 {
                    for j in 0..3 {
                        s += fl[i].conj() * e.m[i][j] * field.values[t][j];
                    }
                }
                s
            })
            .sum()
    }

    pub fn broken_norm_sq(&self, field: &BrokenField) -> f64 {
        (0..field.values.len()).map(|t| self.omega.element(t).mass(&field.values[t])).sum()
    }
}

/// Element-wise P1 field on Ω; may jump across element edges.
#[derive(Debug, Clone, PartialEq)]
pub struct BrokenField {
    pub values: Vec<[C64; 3]>,
}

impl BrokenField {
    /// Nodal view: each node takes its value from the first element containing
    /// it whose value there is nonzero, else 0.
    pub fn to_nodal(&self, mesh: &Mesh) -> Vec<C64> {
        let mut out = vec![ZERO; mesh.num_nodes()];
        let mut set = vec![false; mesh.num_nodes()];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            for (k, &node) in tri.iter().enumerate() {
                let v = self.values[t][k];
                if !set[node] && v != ZERO {
                    out[node] = v;
                    set[node] = true;
                }
            }
        }
        out
    }
}

/// Elements whose centroid lies in the open ball `B_r(c)`.
pub fn ball_elements(mesh: &Mesh, c: Point, r: f64) -> Vec<usize> {
    (0..mesh.num_triangles()).filter(|&t| mesh.centroid(t).dist(c) < r).collect()
}

/// `∫(|∇u|² + |u|²)` over the given elements.
pub fn h1_integral(mesh: &Mesh, u: &[C64], elements: &[usize]) -> f64 {
    let (g, m) = gradient_and_mass(mesh, u, elements);
    g + m
}

/// `(∫|∇u|², ∫|u|²)` over the given elements.
pub fn gradient_and_mass(mesh: &Mesh, u: &[C64], elements: &[usize]) -> (f64, f64) {
    elements.iter().fold((0.0, 0.0), |(g, m), &t| {
        let area = mesh.signed_area(t);
        let gr = mesh.p1_gradients(t);
        let ul = mesh.local(t, u);
        let gx: C64 = (0..3).map(|k| ul[k] * gr[k][0]).sum();
        let gy: C64 = (0..3).map(|k| ul[k] * gr[k][1]).sum();
        let s: C64 = ul.iter().sum();
        let mass = area / 12.0 * (ul.iter().map(|v| v.norm_sqr()).sum::<f64>() + s.norm_sqr());
        (g + area * (gx.norm_sqr() + gy.norm_sqr()), m + mass)
    })
}

/// Smooth complex test function: a sum of modulated Gaussians.
#[derive(Debug, Clone, Serialize)]
pub struct SmoothBump {
    pub terms: Vec<BumpTerm>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BumpTerm {
    pub center: Point,
    pub width: f64,
    pub amplitude: [f64; 2],
    pub wave: [f64; 2],
}

impl SmoothBump {
    pub fn random(rng: &mut ChaCha8Rng, lo: Point, hi: Point) -> SmoothBump {
        let size = (hi.x - lo.x).max(hi.y - lo.y);
        let terms = (0..3)
            .map(|_| BumpTerm {
                center: Point::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y)),
                width: size * rng.random_range(0.1..0.4),
                amplitude: [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                wave: [rng.random_range(-6.0..6.0) / size, rng.random_range(-6.0..6.0) / size],
            })
            .collect();
        SmoothBump { terms }
    }

    pub fn eval(&self, p: Point) -> C64 {
        self.terms
            .iter()
            .map(|t| {
                let d = p.sub(t.center);
                let g = (-(d.x * d.x + d.y * d.y) / (2.0 * t.width * t.width)).exp();
                let phase = t.wave[0] * p.x + t.wave[1] * p.y;
                C64::new(t.amplitude[0], t.amplitude[1]) * C64::from_polar(g, phase)
            })
            .sum()
    }

    pub fn on_nodes(&self, mesh: &Mesh) -> Vec<C64> {
        mesh.nodes.iter().map(|&p| self.eval(p)).collect()
    }
}

/// Functions on each side over which the closeness constants are maximized.
#[derive(Debug, Clone)]
pub struct TestSet {
    pub omega: Vec<Vec<C64>>,
    pub hole: Vec<Vec<C64>>,
    pub description: String,
    pub seed: u64,
}

pub const TEST_EIGENVECTORS: usize = 8;
pub const TEST_BUMPS: usize = 8;

impl TestSet {
    /// Leading eigenvectors of each side plus seeded smooth bumps, the same
    /// bumps evaluated on both meshes.
    pub fn standard(
        coupling: &CouplingPair,
        omega_vectors: &[Vec<C64>],
        hole_vectors: &[Vec<C64>],
        seed: u64,
    ) -> TestSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = coupling.omega_mesh().domain.bbox();
        let bumps: Vec<SmoothBump> = (0..TEST_BUMPS).map(|_| SmoothBump::random(&mut rng, lo, hi)).collect();
        let ne = omega_vectors.len().min(TEST_EIGENVECTORS);
        let nh = hole_vectors.len().min(TEST_EIGENVECTORS);
        let mut omega: Vec<Vec<C64>> = omega_vectors[..ne].to_vec();
        let mut hole: Vec<Vec<C64>> = hole_vectors[..nh].to_vec();
        for b in &bumps {
            omega.push(b.on_nodes(coupling.omega_mesh()));
            hole.push(b.on_nodes(coupling.hole.mesh()));
        }
        TestSet {
            omega,
            hole,
            description: format!("{ne}+{nh} eigenvectors, {TEST_BUMPS} smooth bumps (seed {seed})"),
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Condition {
    C1,
    C2,
    C3,
    C4,
    C5p,
    C6,
    C7,
}

impl Condition {
    pub const ALL: [Condition; 7] =
        [Condition::C1, Condition::C2, Condition::C3, Condition::C4, Condition::C5p, Condition::C6, Condition::C7];

    pub fn label(self) -> &'static str {
        match self {
            Condition::C1 => "1",
            Condition::C2 => "2",
            Condition::C3 => "3",
            Condition::C4 => "4",
            Condition::C5p => "5'",
            Condition::C6 => "6",
            Condition::C7 => "7",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosenessReport {
    pub epsilon: f64,
    pub h: f64,
    /// δ̂ for conditions 1, 2, 3, 4, 5′, 6, 7 in that order. These are maxima
    /// over a finite test set, hence lower bounds for the operator δ.
    pub delta: [f64; 7],
    pub test_set: String,
    pub seed: u64,
    /// Extension radius chosen for each Ω \ K test function.
    pub radii: Vec<f64>,
}

impl ClosenessReport {
    pub fn get(&self, c: Condition) -> f64 {
        self.delta[Condition::ALL.iter().position(|&x| x == c).unwrap()]
    }
}

struct Prepared {
    f_l2: Vec<f64>,
    f_h1: Vec<f64>,
    f_h2: Vec<f64>,
    jf: Vec<Vec<C64>>,
    u_l2: Vec<f64>,
    u_h1: Vec<f64>,
    j1p: Vec<Vec<C64>>,
    radii: Vec<f64>,
}

fn nonzero(v: f64, what: &str, i: usize) -> Result<f64> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(Error::DegenerateInput(format!("{what} test function {i} has zero norm")))
    }
}

fn prepare(c: &CouplingPair, ts: &TestSet, need_extension: bool) -> Result<Prepared> {
    if ts.omega.is_empty() || ts.hole.is_empty() {
        return Err(Error::DegenerateInput("empty test set".into()));
    }
    let om = &c.omega;
    let hm = &c.hole;
    let fs: Vec<(f64, f64, f64, Vec<C64>)> = ts
        .omega
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            c.check_omega(f)?;
            let l2 = nonzero(om.mass_norm_sq(f).max(0.0).sqrt(), "Ω", i)?;
            let h1 = (om.mass_norm_sq(f) + om.energy(f)).max(0.0).sqrt();
            let hf = apply_hamiltonian(om, f)?;
            let s: Vec<C64> = hf.iter().zip(f).map(|(a, b)| a + b).collect();
            let h2 = om.mass_norm_sq(&s).max(0.0).sqrt();
            Ok((l2, h1, h2, c.restrict_j(f)?))
        })
        .collect::<Result<_>>()?;
    let us: Vec<(f64, f64, Vec<C64>, f64)> = ts
        .hole
        .par_iter()
        .enumerate()
        .map(|(i, u)| {
            c.check_hole(u)?;
            let l2 = nonzero(hm.mass_norm_sq(u).max(0.0).sqrt(), "Ω \\ K", i)?;
            let h1 = (hm.mass_norm_sq(u) + hm.energy(u)).max(0.0).sqrt();
            let (ext, rho) = if need_extension { c.extend_radial_auto(u)? } else { (Vec::new(), f64::NAN) };
            Ok((l2, h1, ext, rho))
        })
        .collect::<Result<_>>()?;
    let mut p = Prepared {
        f_l2: Vec::new(),
        f_h1: Vec::new(),
        f_h2: Vec::new(),
        jf: Vec::new(),
        u_l2: Vec::new(),
        u_h1: Vec::new(),
        j1p: Vec::new(),
        radii: Vec::new(),
    };
    for (l2, h1, h2, jf) in fs {
        p.f_l2.push(l2);
        p.f_h1.push(h1);
        p.f_h2.push(h2);
        p.jf.push(jf);
    }
    for (l2, h1, ext, rho) in us {
        p.u_l2.push(l2);
        p.u_h1.push(h1);
        p.j1p.push(ext);
        p.radii.push(rho);
    }
    Ok(p)
}

fn max_of(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, f64::max)
}

fn delta_from(c: &CouplingPair, ts: &TestSet, p: &Prepared, cond: Condition) -> Result<f64> {
    let om = &c.omega;
    let hm = &c.hole;
    Ok(match cond {
        // J and J₁ are the same map
        Condition::C1 => max_of(ts.omega.iter().zip(&p.jf).zip(&p.f_h1).map(|((f, jf), n)| {
            let j1f = c.restrict_j(f).expect("length checked");
            let d: Vec<C64> = jf.iter().zip(&j1f).map(|(a, b)| a - b).collect();
            hm.mass_norm_sq(&d).max(0.0).sqrt() / n
        })),
        Condition::C2 => {
            let fields: Vec<BrokenField> = ts.hole.iter().map(|u| c.extend_zero_jprime(u)).collect::<Result<_>>()?;
            let rows: Vec<f64> = ts
                .omega
                .par_iter()
                .enumerate()
                .map(|(i, f)| {
                    max_of(fields.iter().zip(&ts.hole).enumerate().map(|(j, (jpu, u))| {
                        let lhs = hm.m.form(&p.jf[i], u) - c.broken_inner(f, jpu);
                        lhs.norm() / (p.f_l2[i] * p.u_l2[j])
                    }))
                })
                .collect();
            max_of(rows)
        }
        Condition::C3 => max_of(ts.hole.iter().zip(&p.u_h1).map(|(u, n)| {
            let back = c.restrict_broken(&c.extend_zero_jprime(u).expect("length checked"));
            let d: Vec<C64> = u.iter().zip(&back).map(|(a, b)| a - b).collect();
            hm.mass_norm_sq(&d).max(0.0).sqrt() / n
        })),
        Condition::C4 => {
            let a = max_of(p.jf.iter().zip(&p.f_l2).map(|(jf, n)| hm.mass_norm_sq(jf).max(0.0).sqrt() / n));
            let b = max_of(ts.hole.iter().zip(&p.u_l2).map(|(u, n)| {
                c.broken_norm_sq(&c.extend_zero_jprime(u).expect("length checked")).max(0.0).sqrt() / n
            }));
            a.max(b)
        }
        Condition::C5p => max_of(
            ts.omega
                .iter()
                .zip(&p.f_h1)
                .map(|(f, n)| c.removed_mass(f).map(|m| m.max(0.0).sqrt() / n))
                .collect::<Result<Vec<f64>>>()?,
        ),
        Condition::C6 => max_of(ts.hole.par_iter().zip(&p.j1p).zip(&p.u_h1).map(|((u, g), n)| {
            let jpu = c.extend_zero_jprime(u).expect("length checked");
            c.broken_distance_sq(&jpu, g).max(0.0).sqrt() / n
        }).collect::<Vec<f64>>()),
        Condition::C7 => {
            let kg: Vec<Vec<C64>> = p.j1p.iter().map(|g| om.k.mul_vec(g)).collect();
            let ku: Vec<Vec<C64>> = ts.hole.iter().map(|u| hm.k.mul_vec(u)).collect();
            let rows: Vec<f64> = ts
                .omega
                .par_iter()
                .enumerate()
                .map(|(i, f)| {
                    max_of((0..ts.hole.len()).map(|j| {
                        let lhs = inner(f, &kg[j]) - inner(&p.jf[i], &ku[j]);
                        lhs.norm() / (p.f_h2[i] * p.u_h1[j])
                    }))
                })
                .collect();
            max_of(rows)
        }
    })
}

/// δ̂ for one condition: the largest ratio of the condition's left side to
/// its norm product over the test set.
pub fn estimate_delta(c: &CouplingPair, cond: Condition, ts: &TestSet) -> Result<f64> {
    let p = prepare(c, ts, matches!(cond, Condition::C6 | Condition::C7))?;
    delta_from(c, ts, &p, cond)
}

/// All seven δ̂ at once, sharing the per-function work.
pub fn closeness_report(c: &CouplingPair, ts: &TestSet) -> Result<ClosenessReport> {
    let p = prepare(c, ts, true)?;
    let mut delta = [0.0; 7];
    for (k, cond) in Condition::ALL.into_iter().enumerate() {
        delta[k] = delta_from(c, ts, &p, cond)?;
    }
    Ok(ClosenessReport {
        epsilon: c.epsilon,
        h: c.omega.mesh().h,
        delta,
        test_set: ts.description.clone(),
        seed: ts.seed,
        radii: p.radii,
    })
}
