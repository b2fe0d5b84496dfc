//! P1 discretization of the magnetic Neumann form and the discrete norm scale.

use std::io::Write;
use std::sync::{Arc, OnceLock};

use crate::geometry::Mesh;
use crate::linalg::{norm2, EnvelopeCholesky};
use crate::potential::PotentialModel;
use crate::sparse::CsrMatrix;
use crate::{Error, Result, C64};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Local element matrices: magnetic stiffness, field-free stiffness, mass.
#[derive(Debug, Clone, Copy)]
pub struct ElementMatrices {
    pub k: [[C64; 3]; 3],
    pub k0: [[f64; 3]; 3],
    pub m: [[f64; 3]; 3],
}

impl ElementMatrices {
    /// `uᴴ K_e u` for local values `u`.
    pub fn energy(&self, u: &[C64; 3]) -> f64 {
        quad(&self.k, u).re
    }

    pub fn mass(&self, u: &[C64; 3]) -> f64 {
        quad(&self.m.map(|r| r.map(|x| C64::new(x, 0.0))), u).re
    }

    /// `uᴴ K_e v`
    pub fn energy_form(&self, u: &[C64; 3], v: &[C64; 3]) -> C64 {
        let mut s = C64::new(0.0, 0.0);
        for i in 0..3 {
            for j in 0..3 {
                s += u[i].conj() * self.k[i][j] * v[j];
            }
        }
        s
    }
}

fn quad(a: &[[C64; 3]; 3], u: &[C64; 3]) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for i in 0..3 {
        for j in 0..3 {
            s += u[i].conj() * a[i][j] * u[j];
        }
    }
    s
}

/// Element matrices on triangle `t`. The A-dependent integrand is integrated
/// with the mid-edge rule, A sampled at the edge midpoints.
pub fn element_matrices(mesh: &Mesh, potential: &PotentialModel, t: usize) -> Result<ElementMatrices> {
    let area = mesh.signed_area(t);
    let [a, b, c] = mesh.vertices(t);
    let scale = a.dist(b).max(b.dist(c)).max(c.dist(a));
    if !(area > 1e-14 * scale * scale) {
        return Err(Error::Assembly {
            element: t,
            reason: format!("degenerate or inverted triangle (signed area {area:e})"),
        });
    }
    let g = mesh.p1_gradients(t);
    let verts = [a, b, c];
    let mut k = [[C64::new(0.0, 0.0); 3]; 3];
    let mut k0 = [[0.0; 3]; 3];
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k0[i][j] = area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
            m[i][j] = area / 12.0 * if i == j { 2.0 } else { 1.0 };
        }
    }
    let w = area / 3.0;
    for e in 0..3 {
        let (p, q) = (e, (e + 1) % 3);
        let mid = verts[p].add(verts[q]).scale(0.5);
        let (ax, ay) = potential.eval_at(mid);
        if !(ax.is_finite() && ay.is_finite()) {
            return Err(Error::Assembly {
                element: t,
                reason: "potential is not finite at a quadrature point".into(),
            });
        }
        let mut phi = [0.0; 3];
        phi[p] = 0.5;
        phi[q] = 0.5;
        // (i∇ + A) φ_j at the quadrature point
        let v: [[C64; 2]; 3] =
            std::array::from_fn(|j| [I * g[j][0] + ax * phi[j], I * g[j][1] + ay * phi[j]]);
        for i in 0..3 {
            for j in 0..3 {
                k[i][j] += w * (v[j][0] * v[i][0].conj() + v[j][1] * v[i][1].conj());
            }
        }
    }
    Ok(ElementMatrices { k, k0, m })
}

/// Assembled stiffness and mass on one mesh.
pub struct FormPair {
    pub k: CsrMatrix<C64>,
    pub m: CsrMatrix<f64>,
    /// Field-free stiffness, used where the pure gradient energy is needed.
    pub k0: CsrMatrix<f64>,
    mesh: Arc<Mesh>,
    potential: PotentialModel,
    mass_factor: OnceLock<std::result::Result<EnvelopeCholesky, String>>,
}

impl std::fmt::Debug for FormPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FormPair")
            .field("n", &self.n())
            .field("nnz", &self.k.nnz())
            .finish()
    }
}

pub fn assemble(mesh: Arc<Mesh>, potential: &PotentialModel) -> Result<FormPair> {
    let n = mesh.num_nodes();
    let nt = mesh.num_triangles();
    let mut tk = Vec::with_capacity(9 * nt);
    let mut tk0 = Vec::with_capacity(9 * nt);
    let mut tm = Vec::with_capacity(9 * nt);
    for t in 0..nt {
        let e = element_matrices(&mesh, potential, t)?;
        let tri = mesh.triangles[t];
        for i in 0..3 {
            for j in 0..3 {
                tk.push((tri[i], tri[j], e.k[i][j]));
                tk0.push((tri[i], tri[j], e.k0[i][j]));
                tm.push((tri[i], tri[j], e.m[i][j]));
            }
        }
    }
    Ok(FormPair {
        k: CsrMatrix::from_triplets(n, tk),
        m: CsrMatrix::from_triplets(n, tm),
        k0: CsrMatrix::from_triplets(n, tk0),
        mesh,
        potential: potential.clone(),
        mass_factor: OnceLock::new(),
    })
}

impl FormPair {
    pub fn n(&self) -> usize {
        self.m.n()
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn potential(&self) -> &PotentialModel {
        &self.potential
    }

    pub fn element(&self, t: usize) -> ElementMatrices {
        element_matrices(&self.mesh, &self.potential, t).expect("element assembled once already")
    }

    fn mass_factor(&self) -> Result<&EnvelopeCholesky> {
        self.mass_factor
            .get_or_init(|| EnvelopeCholesky::factor(&self.m).map_err(|e| e.to_string()))
            .as_ref()
            .map_err(|reason| Error::LinearSolve {
                residual: f64::NAN,
                reason: reason.clone(),
            })
    }

    /// Solves `M x = b`.
    pub fn solve_mass(&self, b: &[C64]) -> Result<Vec<C64>> {
        check_len(self.n(), b.len())?;
        let (x, rel) = self.mass_factor()?.solve_refined(&self.m, b);
        if rel > 1e-10 {
            return Err(Error::LinearSolve {
                residual: rel,
                reason: "mass solve".into(),
            });
        }
        Ok(x)
    }

    pub fn energy(&self, u: &[C64]) -> f64 {
        self.k.form(u, u).re
    }

    pub fn mass_norm_sq(&self, u: &[C64]) -> f64 {
        self.m.form(u, u).re
    }

    /// Sum over a subset of elements of the local energy and mass.
    pub fn restricted_integrals(&self, u: &[C64], elements: &[usize]) -> (f64, f64) {
        elements.iter().fold((0.0, 0.0), |(k, m), &t| {
            let e = self.element(t);
            let ul = self.mesh.local(t, u);
            (k + e.energy(&ul), m + e.mass(&ul))
        })
    }

    pub fn check_invariants(&self) -> Result<()> {
        let kmax = self.k.max_abs();
        let defect = self.k.hermitian_defect();
        if defect > 1e-12 * kmax.max(f64::MIN_POSITIVE) {
            return Err(Error::Internal(format!("stiffness not Hermitian: defect {defect:e}")));
        }
        if self.m.hermitian_defect() > 0.0 {
            return Err(Error::Internal("mass matrix not symmetric".into()));
        }
        if self.m.diagonal().iter().any(|&d| !(d > 0.0)) {
            return Err(Error::Internal("mass matrix has a nonpositive diagonal entry".into()));
        }
        let area = self.mesh.total_area();
        let total = self.m.sum_entries().re;
        if (total - area).abs() > 1e-10 * area {
            return Err(Error::Internal(format!("mass total {total} differs from area {area}")));
        }
        Ok(())
    }

    pub fn write_coo<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# stiffness")?;
        self.k.write_coo(&mut w)?;
        writeln!(w, "# mass")?;
        self.m.write_coo(&mut w)
    }
}

fn check_len(n: usize, len: usize) -> Result<()> {
    if n != len {
        return Err(Error::Size(format!("vector has length {len}, expected {n}")));
    }
    Ok(())
}

/// `H_disc u`, the solution of `M w = K u`.
pub fn apply_hamiltonian(fp: &FormPair, u: &[C64]) -> Result<Vec<C64>> {
    check_len(fp.n(), u.len())?;
    let ku = fp.k.mul_vec(u);
    let w = fp.solve_mass(&ku)?;
    let mw = fp.m.mul_vec(&w);
    let r: Vec<C64> = mw.iter().zip(&ku).map(|(a, b)| a - b).collect();
    let kn = norm2(&ku);
    if norm2(&r) > 1e-10 * kn {
        return Err(Error::LinearSolve {
            residual: norm2(&r) / kn,
            reason: "M w = K u".into(),
        });
    }
    Ok(w)
}

/// Discrete ‖·‖ₖ for k ∈ {0, 1, 2}.
pub fn norms(fp: &FormPair, u: &[C64], k: u8) -> Result<f64> {
    check_len(fp.n(), u.len())?;
    let m = fp.mass_norm_sq(u).max(0.0);
    match k {
        0 => Ok(m.sqrt()),
        1 => Ok((m + fp.energy(u)).max(0.0).sqrt()),
        2 => {
            let hu = apply_hamiltonian(fp, u)?;
            let v: Vec<C64> = hu.iter().zip(u).map(|(a, b)| a + b).collect();
            Ok(fp.mass_norm_sq(&v).max(0.0).sqrt())
        }
        _ => Err(Error::Size(format!("norm index {k} not in {{0, 1, 2}}"))),
    }
}

/// Norm handle bound to one form pair.
#[derive(Clone, Copy)]
pub struct ScaleNorms<'a> {
    pub form: &'a FormPair,
}

impl<'a> ScaleNorms<'a> {
    pub fn new(form: &'a FormPair) -> Self {
        ScaleNorms { form }
    }

    pub fn l2(&self, u: &[C64]) -> f64 {
        norms(self.form, u, 0).expect("length checked by caller")
    }

    pub fn h1(&self, u: &[C64]) -> f64 {
        norms(self.form, u, 1).expect("length checked by caller")
    }

    pub fn h2(&self, u: &[C64]) -> Result<f64> {
        norms(self.form, u, 2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, triangulate, DomainSpec, HoleShape, HoleSpec, Point};
    use crate::linalg::dense_generalized_eigen;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square(h: f64) -> Arc<Mesh> {
        Arc::new(triangulate(&DomainSpec::unit_square(), None, h).unwrap())
    }

    fn random_vec(n: usize, seed: u64) -> Vec<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn reference_triangle_stiffness() {
        let poly = build_domain(&DomainSpec::unit_square()).unwrap();
        let mut mesh = Mesh::structured(poly, 1.0).unwrap();
        mesh.nodes = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
        mesh.triangles = vec![[0, 1, 2]];
        let e = element_matrices(&mesh, &PotentialModel::zero(), 0).unwrap();
        let expect = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((e.k[i][j] - expect[i][j]).norm() < 1e-15);
                assert_eq!(e.k0[i][j], expect[i][j]);
            }
        }
    }

    #[test]
    fn degenerate_element_is_named() {
        let poly = build_domain(&DomainSpec::unit_square()).unwrap();
        let mut mesh = Mesh::structured(poly, 1.0).unwrap();
        mesh.nodes = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(2.0, 0.0)];
        mesh.triangles = vec![[0, 1, 2]];
        let err = assemble(Arc::new(mesh), &PotentialModel::zero()).unwrap_err();
        assert!(matches!(err, Error::Assembly { element: 0, .. }));
    }

    #[test]
    fn invariants_and_constants() {
        let mesh = square(1.0 / 8.0);
        let fp = assemble(mesh.clone(), &PotentialModel::zero()).unwrap();
        fp.check_invariants().unwrap();
        assert!((fp.m.sum_entries().re - 1.0).abs() < 1e-10);
        let ones = vec![C64::new(1.0, 0.0); fp.n()];
        assert!(fp.energy(&ones).abs() < 1e-12);

        let fb = assemble(mesh, &PotentialModel::uniform(3.0).gauge_shift_named("sinxcosy", 0.7).unwrap()).unwrap();
        fb.check_invariants().unwrap();
        assert!(fb.energy(&ones) > 0.0);
    }

    #[test]
    fn magnetic_pencil_is_psd() {
        let mesh = square(1.0 / 6.0);
        let fp = assemble(mesh, &PotentialModel::uniform(5.0)).unwrap();
        let n = fp.n();
        let mut k = DMatrix::zeros(n, n);
        let mut m = DMatrix::zeros(n, n);
        for (i, j, v) in fp.k.triplets() {
            k[(i, j)] = v;
        }
        for (i, j, v) in fp.m.triplets() {
            m[(i, j)] = C64::new(v, 0.0);
        }
        let (vals, _) = dense_generalized_eigen(&k, &m).unwrap();
        assert!(vals[0] >= -1e-9);
        // uniform field has no zero mode
        assert!(vals[0] > 0.1);
    }

    #[test]
    fn hamiltonian_self_adjointness() {
        let fp = assemble(square(1.0 / 10.0), &PotentialModel::uniform(1.0)).unwrap();
        for seed in 0..5 {
            let u = random_vec(fp.n(), seed);
            let w = apply_hamiltonian(&fp, &u).unwrap();
            let lhs = crate::linalg::inner(&u, &fp.m.mul_vec(&w));
            let rhs = fp.k.form(&u, &u);
            assert!((lhs - rhs).norm() <= 1e-10 * rhs.norm());
        }
        let zero = vec![C64::new(0.0, 0.0); fp.n()];
        assert!(apply_hamiltonian(&fp, &zero).unwrap().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn norm_ordering_and_homogeneity() {
        let fp = assemble(square(1.0 / 8.0), &PotentialModel::uniform(2.0)).unwrap();
        let sn = ScaleNorms::new(&fp);
        for seed in 0..100 {
            let u = random_vec(fp.n(), 100 + seed);
            let (a, b) = (sn.l2(&u), sn.h1(&u));
            assert!(a <= b);
            let s = C64::new(-1.5, 2.0);
            let su: Vec<C64> = u.iter().map(|z| s * z).collect();
            assert!((sn.h1(&su) - s.norm() * b).abs() < 1e-12 * b * s.norm());
        }
        let zero = vec![C64::new(0.0, 0.0); fp.n()];
        for k in 0..3 {
            assert_eq!(norms(&fp, &zero, k).unwrap(), 0.0);
        }
        assert!(matches!(norms(&fp, &zero[1..], 0), Err(Error::Size(_))));
    }

    #[test]
    fn delta_inequality_matrix_level() {
        let fp = assemble(square(1.0 / 8.0), &PotentialModel::uniform(1.0)).unwrap();
        for seed in 0..10 {
            let u = random_vec(fp.n(), 300 + seed);
            let hu = apply_hamiltonian(&fp, &u).unwrap();
            let s: Vec<C64> = hu.iter().zip(&u).map(|(a, b)| a + b).collect();
            let lhs = fp.mass_norm_sq(&s);
            let rhs = fp.mass_norm_sq(&hu) + fp.mass_norm_sq(&u);
            assert!(lhs >= rhs * (1.0 - 1e-12));
        }
    }

    #[test]
    fn restriction_to_hole_mesh_decreases_forms() {
        let spec = HoleSpec::new(HoleShape::Disk { segments: 64 }, Point::new(0.5, 0.5), 0.1);
        let omega = square(1.0 / 40.0);
        let hole = Arc::new(omega.carve(&spec).unwrap());
        let pot = PotentialModel::uniform(1.0);
        let fo = assemble(omega.clone(), &pot).unwrap();
        let fh = assemble(hole.clone(), &pot).unwrap();
        let map = &hole.parent.as_ref().unwrap().node_map;
        for seed in 0..5 {
            let u = random_vec(fo.n(), 500 + seed);
            let r: Vec<C64> = map.iter().map(|&p| u[p]).collect();
            assert!(fh.energy(&r) <= fo.energy(&u) * (1.0 + 1e-12));
            assert!(fh.mass_norm_sq(&r) <= fo.mass_norm_sq(&u) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn coo_has_both_sections() {
        let fp = assemble(square(0.5), &PotentialModel::zero()).unwrap();
        let mut buf = Vec::new();
        fp.write_coo(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("# stiffness\n# n 9 nnz"));
        assert!(s.contains("# mass\n"));
    }
}
