//! Numerical checks of the auxiliary inequalities, with implied constants.

use std::f64::consts::PI;
use std::io::Write;

use serde::Serialize;

use crate::assembly::{apply_hamiltonian, FormPair};
use crate::coupling::{ball_elements, gradient_and_mass, h1_integral, CouplingPair, ANGLE_SAMPLES};
use crate::geometry::{cast_rays, Locator, Mesh, Point};
use crate::{Error, Result, C64};

/// Relative slack for quadrature-based checks.
pub const QUADRATURE_SLACK: f64 = 1.1;
/// Implied constants count as bounded when none exceeds this multiple of their median.
pub const BOUNDED_FACTOR: f64 = 3.0;

#[derive(Debug, Clone, Serialize)]
pub struct LemmaSample {
    pub descriptor: String,
    pub left: f64,
    /// Right side without the constant.
    pub right: f64,
    /// `left / right`; NaN when the right side vanishes.
    pub implied: f64,
    pub pass: bool,
}

impl LemmaSample {
    pub fn new(descriptor: String, left: f64, right: f64, pass: bool) -> Self {
        let implied = if right > 0.0 { left / right } else { f64::NAN };
        LemmaSample {
            descriptor,
            left,
            right,
            implied,
            pass,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaReport {
    pub lemma: String,
    /// The explicit constant, when the inequality has one.
    pub constant: Option<f64>,
    /// How `pass` was decided.
    pub rule: String,
    pub samples: Vec<LemmaSample>,
    pub pass: bool,
}

impl LemmaReport {
    pub fn max_implied(&self) -> f64 {
        self.samples.iter().map(|s| s.implied).filter(|v| v.is_finite()).fold(f64::NAN, f64::max)
    }

    pub fn violations(&self) -> usize {
        self.samples.iter().filter(|s| !s.pass).count()
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "[{}] {}", self.lemma, if self.pass { "pass" } else { "FAIL" })?;
        if let Some(c) = self.constant {
            writeln!(w, "  constant {c}")?;
        }
        writeln!(w, "  rule: {}", self.rule)?;
        writeln!(w, "  max implied constant {}", self.max_implied())?;
        for s in &self.samples {
            writeln!(
                w,
                "  {} left={} right={} implied={} {}",
                s.descriptor,
                s.left,
                s.right,
                s.implied,
                if s.pass { "ok" } else { "violated" }
            )?;
        }
        Ok(())
    }
}

pub fn write_csv<W: Write>(reports: &[LemmaReport], mut w: W) -> std::io::Result<()> {
    writeln!(w, "lemma,sample,left,right,implied,pass")?;
    for r in reports {
        for s in &r.samples {
            writeln!(w, "{},{},{},{},{},{}", r.lemma, s.descriptor, s.left, s.right, s.implied, s.pass)?;
        }
    }
    Ok(())
}

fn require_samples<T>(samples: &[T]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::DegenerateInput("no samples given".into()));
    }
    Ok(())
}

/// `‖(H+1)z‖₀² ≥ ‖Hz‖₀² + ‖z‖₀²` for each sample.
pub fn verify_delta_inequality(fp: &FormPair, samples: &[Vec<C64>]) -> Result<LemmaReport> {
    require_samples(samples)?;
    let mut out = Vec::with_capacity(samples.len());
    for (i, z) in samples.iter().enumerate() {
        let hz = apply_hamiltonian(fp, z)?;
        let s: Vec<C64> = hz.iter().zip(z).map(|(a, b)| a + b).collect();
        let left = fp.mass_norm_sq(&s);
        let right = fp.mass_norm_sq(&hz) + fp.mass_norm_sq(z);
        let pass = left >= right - 1e-12 * left.abs().max(right.abs());
        // report as right/left so the implied factor is ≤ 1 when the inequality holds
        out.push(LemmaSample {
            descriptor: format!("z{i}"),
            left,
            right,
            implied: if left > 0.0 { right / left } else { f64::NAN },
            pass,
        });
    }
    Ok(finish("delta", None, "exact: every sample, 1e-12 relative".into(), out))
}

/// `max{2, 4‖A‖∞² + 1}` with the sup taken over nodes and edge midpoints.
pub fn comp_constant(fp: &FormPair) -> f64 {
    let mesh = fp.mesh();
    let mids = mesh.triangles.iter().flat_map(|t| {
        (0..3).map(move |e| mesh.nodes[t[e]].add(mesh.nodes[t[(e + 1) % 3]]).scale(0.5))
    });
    let a = fp.potential().sup_norm(mesh.nodes.iter().copied().chain(mids));
    f64::max(2.0, 4.0 * a * a + 1.0)
}

/// `∫(|∇v|² + |v|²) ≤ C₃ ∫(|i∇v + Av|² + |v|²)` with the explicit constant.
pub fn verify_comp_bound(fp: &FormPair, samples: &[Vec<C64>]) -> Result<LemmaReport> {
    require_samples(samples)?;
    let c3 = comp_constant(fp);
    let out = samples
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let m = fp.mass_norm_sq(v);
            let left = fp.k0.form(v, v).re + m;
            let right = fp.energy(v) + m;
            LemmaSample::new(format!("v{i}"), left, right, left <= c3 * right * (1.0 + 1e-12))
        })
        .collect();
    Ok(finish("comp", Some(c3), "explicit constant".into(), out))
}

fn finish(lemma: &str, constant: Option<f64>, rule: String, samples: Vec<LemmaSample>) -> LemmaReport {
    let pass = samples.iter().all(|s| s.pass);
    LemmaReport {
        lemma: lemma.into(),
        constant,
        rule,
        samples,
        pass,
    }
}

/// Bounded-constant rule: every group maximum is at most
/// `BOUNDED_FACTOR` times the median of the group maxima.
pub fn bounded_across(values: &[f64]) -> bool {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return true;
    }
    v.sort_by(f64::total_cmp);
    let median = if v.len() % 2 == 1 {
        v[v.len() / 2]
    } else {
        0.5 * (v[v.len() / 2 - 1] + v[v.len() / 2])
    };
    v.iter().all(|&x| x <= BOUNDED_FACTOR * median.max(0.0) || x <= 0.0)
}

fn group_max(samples: &[LemmaSample], groups: &[usize]) -> Vec<f64> {
    let mut out = Vec::new();
    let mut start = 0;
    for &len in groups {
        out.push(
            samples[start..start + len]
                .iter()
                .map(|s| s.implied)
                .filter(|v| v.is_finite())
                .fold(0.0, f64::max),
        );
        start += len;
    }
    out
}

/// One ε of a ball-bounds study: the coupling, Ω eigenvectors with their
/// eigenvalues, and Ω \ K eigenvectors.
pub struct BallCase<'a> {
    pub coupling: &'a CouplingPair,
    pub omega: &'a [(f64, Vec<C64>)],
    pub hole: &'a [Vec<C64>],
}

/// Ball-restricted bounds across an ε sweep:
/// `∫_{B∖Γ}|u|² ≤ C₁ ε (a′(u) + ‖u‖²)`, `∫_B|∇g|² ≤ C₅ ρ^{4/3} ‖g‖₂²`, `∫_B|g|² ≤ C₆ ρ^{4/3} ‖g‖₂²`.
/// Returns the three reports in that order.
pub fn verify_ball_bounds(cases: &[BallCase]) -> Result<[LemmaReport; 3]> {
    require_samples(cases)?;
    let (mut c1, mut c5, mut c6) = (Vec::new(), Vec::new(), Vec::new());
    let (mut g1, mut g56) = (Vec::new(), Vec::new());
    for case in cases {
        let c = case.coupling;
        let eps = c.epsilon;
        let hmesh = c.hole.mesh();
        for (k, u) in case.hole.iter().enumerate() {
            let rho = c.choose_radius(u)?;
            let ball = nonempty(ball_elements(hmesh, c.center, rho), rho)?;
            let (_, left) = gradient_and_mass(hmesh, u, &ball);
            let right = eps * (c.hole.energy(u) + c.hole.mass_norm_sq(u));
            c1.push(LemmaSample::new(format!("eps={eps} u{k}"), left, right, true));
        }
        g1.push(case.hole.len());
        let rho = 1.5 * eps;
        let omesh = c.omega.mesh();
        let ball = nonempty(ball_elements(omesh, c.center, rho), rho)?;
        for (k, (lambda, g)) in case.omega.iter().enumerate() {
            let (grad, mass) = gradient_and_mass(omesh, g, &ball);
            let h2 = (1.0 + lambda) * (1.0 + lambda) * c.omega.mass_norm_sq(g);
            let right = rho.powf(4.0 / 3.0) * h2;
            c5.push(LemmaSample::new(format!("eps={eps} g{k}"), grad, right, true));
            c6.push(LemmaSample::new(format!("eps={eps} g{k}"), mass, right, true));
        }
        g56.push(case.omega.len());
    }
    let rule = format!("bounded: per-ε maxima within {BOUNDED_FACTOR}x of their median");
    let report = |name: &str, samples: Vec<LemmaSample>, groups: &[usize]| {
        let pass = bounded_across(&group_max(&samples, groups));
        LemmaReport {
            lemma: name.into(),
            constant: None,
            rule: rule.clone(),
            samples,
            pass,
        }
    };
    Ok([report("ball-c1", c1, &g1), report("ball-c5", c5, &g56), report("ball-c6", c6, &g56)])
}

fn nonempty(v: Vec<usize>, r: f64) -> Result<Vec<usize>> {
    if v.is_empty() {
        return Err(Error::Resolution(format!("ball of radius {r} contains no element")));
    }
    Ok(v)
}

/// `(∫_{∂B_ρ}|v|² dμ, ∫_{Ω∖B_ρ}(|∇v|² + |v|²))` by the trapezoid rule on the
/// circle and element quadrature outside it.
pub fn trace_sides(mesh: &Mesh, v: &[C64], center: Point, rho: f64, angles: usize) -> Result<(f64, f64)> {
    if angles < 64 {
        return Err(Error::Resolution(format!("{angles} angular samples, need at least 64")));
    }
    let loc = Locator::new(mesh);
    let dphi = 2.0 * PI / angles as f64;
    let mut left = 0.0;
    for k in 0..angles {
        let phi = k as f64 * dphi;
        let p = center.add(Point::new(rho * phi.cos(), rho * phi.sin()));
        let val = loc
            .eval(v, p)
            .ok_or_else(|| Error::Geometry(format!("trace circle leaves the mesh at ({}, {})", p.x, p.y)))?;
        left += val.norm_sqr();
    }
    left *= rho * dphi;
    let outside: Vec<usize> = (0..mesh.num_triangles())
        .filter(|&t| mesh.centroid(t).dist(center) >= rho)
        .collect();
    Ok((left, h1_integral(mesh, v, &outside)))
}

/// Trace inequality on the circle of the chosen extension radius, per sample and ε.
pub fn verify_trace_bound(cases: &[(&CouplingPair, &[Vec<C64>])]) -> Result<LemmaReport> {
    require_samples(cases)?;
    let mut samples = Vec::new();
    let mut groups = Vec::new();
    for (c, vs) in cases {
        for (k, v) in vs.iter().enumerate() {
            let rho = c.choose_radius(v)?;
            let (left, right) = trace_sides(c.hole.mesh(), v, c.center, rho, ANGLE_SAMPLES)?;
            samples.push(LemmaSample::new(format!("eps={} v{k} rho={rho}", c.epsilon), left, right, true));
        }
        groups.push(vs.len());
    }
    let pass = bounded_across(&group_max(&samples, &groups));
    Ok(LemmaReport {
        lemma: "trace".into(),
        constant: None,
        rule: format!("bounded: per-ε maxima within {BOUNDED_FACTOR}x of their median"),
        samples,
        pass,
    })
}

/// Pointwise bound along a hole-free axis half-line:
/// `|u(x₀)|² ≤ C₈² (∫|∂u|² + ∫|u|²)` with `C₈² = max{2/dist(x₀, ∂Ω), 2 diam Ω}`.
pub fn verify_line_bound(mesh: &Mesh, points: &[Point], u: &[C64]) -> Result<LemmaReport> {
    require_samples(points)?;
    if u.len() != mesh.num_nodes() {
        return Err(Error::Size(format!("field has length {}, mesh has {} nodes", u.len(), mesh.num_nodes())));
    }
    let hole = mesh.parent.as_ref().map(|s| s.hole.clone()).unwrap_or(crate::geometry::HoleGeometry::Empty);
    let loc = Locator::new(mesh);
    let diam = mesh.domain.diameter();
    let mut out = Vec::new();
    for &p in points {
        let Some(u0) = loc.eval(u, p) else {
            return Err(Error::Geometry(format!("point ({}, {}) is not in the meshed domain", p.x, p.y)));
        };
        let rays = cast_rays(&mesh.domain, &hole, p);
        let mut chosen = None;
        for ray in rays.iter().filter(|r| !r.blocked) {
            if let Some(ints) = line_integrals(&loc, u, p, ray.exit, mesh.h) {
                chosen = Some((ray.direction, ints));
                break;
            }
        }
        let Some((dir, (grad, mass))) = chosen else {
            return Err(Error::PropertyStar { x: p.x, y: p.y });
        };
        let dist = mesh.domain.boundary_distance(p);
        let c8sq = f64::max(2.0 / dist, 2.0 * diam);
        let left = u0.norm_sqr();
        let right = grad + mass;
        let pass = left <= QUADRATURE_SLACK * c8sq * right || left == 0.0;
        let mut s = LemmaSample::new(format!("({}, {}) {:?}", p.x, p.y, dir), left, right, pass);
        s.descriptor.push_str(&format!(" C8^2={c8sq}"));
        out.push(s);
    }
    Ok(finish(
        "line",
        None,
        format!("explicit C8^2 = max(2/dist, 2 diam) per point, {QUADRATURE_SLACK}x quadrature slack"),
        out,
    ))
}

/// Composite trapezoid for `(∫|∂_z u|², ∫|u|²)` on the segment `a → b`;
/// `None` if any sample leaves the mesh.
fn line_integrals(loc: &Locator, u: &[C64], a: Point, b: Point, h: f64) -> Option<(f64, f64)> {
    let len = a.dist(b);
    if len == 0.0 {
        return None;
    }
    let dir = b.sub(a).scale(1.0 / len);
    let n = ((8.0 * len / h).ceil() as usize).max(64);
    let step = len / n as f64;
    let (mut g, mut m) = (0.0, 0.0);
    for k in 0..=n {
        // stay a hair inside the closed segment so boundary points locate
        let s = (k as f64 * step).clamp(1e-12 * len, len * (1.0 - 1e-12));
        let (v, grad) = loc.eval_with_gradient(u, a.add(dir.scale(s)))?;
        let w = if k == 0 || k == n { 0.5 * step } else { step };
        g += w * (grad[0] * dir.x + grad[1] * dir.y).norm_sqr();
        m += w * v.norm_sqr();
    }
    Some((g, m))
}

/// One refinement level of the Marchenko check.
pub struct MarchenkoLevel<'a> {
    pub form: &'a FormPair,
    pub q: Vec<usize>,
    pub g: Vec<usize>,
    pub samples: Vec<Vec<C64>>,
}

/// Implied constant of
/// `∫_Q|v|² ≤ 2μ(Q)/μ(G) ∫_G|v|² + C d³ μ(Q)^{1/2}/μ(G) ∫_Π|∇v|²`
/// with Π the whole (convex) domain and `d` its diameter.
pub fn marchenko_samples(level: &MarchenkoLevel, label: &str) -> Result<Vec<LemmaSample>> {
    require_samples(&level.samples)?;
    let mesh = level.form.mesh();
    if !mesh.domain.is_convex() {
        return Err(Error::Geometry("Marchenko check needs a convex domain".into()));
    }
    let area = |els: &[usize]| els.iter().map(|&t| mesh.signed_area(t)).sum::<f64>();
    let (mq, mg) = (area(&level.q), area(&level.g));
    if !(mg > 0.0) {
        return Err(Error::Measure("set G has zero measure".into()));
    }
    let d = mesh.domain.diameter();
    let all: Vec<usize> = (0..mesh.num_triangles()).collect();
    level
        .samples
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let (_, left) = gradient_and_mass(mesh, v, &level.q);
            let (_, on_g) = gradient_and_mass(mesh, v, &level.g);
            let (grad, _) = gradient_and_mass(mesh, v, &all);
            let base = 2.0 * mq / mg * on_g;
            let scale = d.powi(3) * mq.sqrt() / mg * grad;
            let mut s = LemmaSample::new(format!("{label} v{i}"), left - base, scale, true);
            if !(scale > 0.0) {
                // no gradient: the inequality must hold without the unknown term
                s.pass = left <= base * (1.0 + 1e-12);
            }
            Ok(s)
        })
        .collect()
}

/// Pass iff the largest implied constant is stable within `BOUNDED_FACTOR`
/// across refinement levels (or nonpositive on every level).
pub fn verify_marchenko(levels: &[MarchenkoLevel]) -> Result<LemmaReport> {
    require_samples(levels)?;
    let mut samples = Vec::new();
    let mut maxima = Vec::new();
    for (l, level) in levels.iter().enumerate() {
        let s = marchenko_samples(level, &format!("level{l} h={}", level.form.mesh().h))?;
        maxima.push(s.iter().map(|x| x.implied).filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max));
        samples.extend(s);
    }
    let hi = maxima.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = maxima.iter().copied().fold(f64::INFINITY, f64::min);
    let stable = hi <= 0.0 || hi <= BOUNDED_FACTOR * lo.max(0.0);
    let pass = stable && samples.iter().all(|s| s.pass);
    Ok(LemmaReport {
        lemma: "marchenko".into(),
        constant: None,
        rule: format!("maximum implied C(2) stable within {BOUNDED_FACTOR}x across refinement (d read as diameter)"),
        samples,
        pass,
    })
}
