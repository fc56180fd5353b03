//! Continuous Lagrange spaces with homogeneous Dirichlet conditions.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::exec::Exec;
use crate::fem::quadrature::{triangle_rule, Rule};
use crate::fem::reference::{ElementMap, RefElement};
use crate::linalg::{CMatrix, CVector};
use crate::mesh::{Point, TriMesh};
use crate::sparse::{CsrMatrix, TripletBuilder};
use crate::{c64, Error, Result};

static NEXT_SPACE_ID: AtomicU64 = AtomicU64::new(1);

pub(crate) fn fresh_space_id() -> u64 {
    NEXT_SPACE_ID.fetch_add(1, Ordering::Relaxed)
}

const NONE: usize = usize::MAX;

#[derive(Debug)]
pub struct LagrangeSpace {
    id: u64,
    mesh: Arc<TriMesh>,
    element: RefElement,
    /// Global dofs of each element in local order, flattened.
    cell_dofs: Vec<usize>,
    /// Position of each global dof among the free dofs.
    free_of_global: Vec<usize>,
    n_free: usize,
    node_coords: Vec<Point>,
}

impl LagrangeSpace {
    /// Degree-`degree` space with boundary dofs eliminated.
    pub fn new(mesh: Arc<TriMesh>, degree: usize) -> Result<Arc<Self>> {
        Self::build(mesh, degree, true)
    }

    /// Same space without boundary conditions.
    pub fn unconstrained(mesh: Arc<TriMesh>, degree: usize) -> Result<Arc<Self>> {
        Self::build(mesh, degree, false)
    }

    fn build(mesh: Arc<TriMesh>, degree: usize, dirichlet: bool) -> Result<Arc<Self>> {
        if !(1..=3).contains(&degree) {
            return Err(Error::InvalidArgument(format!("Lagrange degree {degree} not in 1..=3")));
        }
        let element = RefElement::new(degree);
        let (nv, ne, nt) = (mesh.n_vertices(), mesh.n_edges(), mesh.n_triangles());
        let (pe, pc) = (element.dofs_per_edge(), element.dofs_per_cell());
        let n_global = nv + ne * pe + nt * pc;
        let nloc = element.ndofs();
        let mut cell_dofs = Vec::with_capacity(nt * nloc);
        let mut node_coords = vec![[0.0; 2]; n_global];
        for t in 0..nt {
            let tri = mesh.triangles()[t];
            let map = ElementMap::new(mesh.coords(t));
            let mut local = Vec::with_capacity(nloc);
            local.extend_from_slice(&tri);
            let te = mesh.triangle_edges(t);
            for k in 0..3 {
                let base = nv + te[k] * pe;
                let forward = tri[k] < tri[(k + 1) % 3];
                for i in 0..pe {
                    local.push(if forward { base + i } else { base + pe - 1 - i });
                }
            }
            for i in 0..pc {
                local.push(nv + ne * pe + t * pc + i);
            }
            for (i, &g) in local.iter().enumerate() {
                node_coords[g] = map.to_physical(element.nodes()[i]);
            }
            cell_dofs.extend(local);
        }
        let mut constrained = vec![false; n_global];
        if dirichlet {
            for (v, &on) in mesh.boundary_vertices().iter().enumerate() {
                constrained[v] = on;
            }
            for e in 0..ne {
                if mesh.is_boundary_edge(e) {
                    for i in 0..pe {
                        constrained[nv + e * pe + i] = true;
                    }
                }
            }
        }
        let mut free_of_global = vec![NONE; n_global];
        let mut n_free = 0;
        for g in 0..n_global {
            if !constrained[g] {
                free_of_global[g] = n_free;
                n_free += 1;
            }
        }
        Ok(Arc::new(Self {
            id: fresh_space_id(),
            mesh,
            element,
            cell_dofs,
            free_of_global,
            n_free,
            node_coords,
        }))
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.element.degree()
    }

    pub fn element(&self) -> &RefElement {
        &self.element
    }

    /// Number of free (unconstrained) dofs.
    pub fn ndofs(&self) -> usize {
        self.n_free
    }

    /// Free-dof index of each local dof of element `t` (`None` if constrained).
    pub fn local_dofs(&self, t: usize) -> impl Iterator<Item = Option<usize>> + '_ {
        let n = self.element.ndofs();
        self.cell_dofs[t * n..(t + 1) * n].iter().map(|&g| {
            let f = self.free_of_global[g];
            (f != NONE).then_some(f)
        })
    }

    /// Coordinates of the free dofs' nodes.
    pub fn free_nodes(&self) -> Vec<Point> {
        (0..self.free_of_global.len())
            .filter(|&g| self.free_of_global[g] != NONE)
            .map(|g| self.node_coords[g])
            .collect()
    }

    pub fn element_map(&self, t: usize) -> ElementMap {
        ElementMap::new(self.mesh.coords(t))
    }

    /// Local coefficient vector of `u` on element `t`, zeros at constrained dofs.
    pub fn local_coeffs(&self, t: usize, u: &[c64]) -> Vec<c64> {
        self.local_dofs(t).map(|d| d.map_or(c64::default(), |i| u[i])).collect()
    }

    pub fn zero(&self) -> FieldVector {
        FieldVector { space: self.id, coeffs: CVector::zeros(self.n_free) }
    }

    pub fn field(&self, coeffs: CVector) -> Result<FieldVector> {
        if coeffs.len() != self.n_free {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for a space with {} dofs",
                coeffs.len(),
                self.n_free
            )));
        }
        Ok(FieldVector { space: self.id, coeffs })
    }

    /// Nodal interpolant (free dofs only; boundary values are dropped).
    pub fn interpolate<F: Fn(Point) -> c64>(&self, f: F) -> FieldVector {
        let coeffs = CVector::from_iterator(self.n_free, self.free_nodes().into_iter().map(f));
        FieldVector { space: self.id, coeffs }
    }

    pub fn check(&self, u: &FieldVector) -> Result<()> {
        if u.space != self.id || u.coeffs.len() != self.n_free {
            return Err(Error::SpaceMismatch(format!(
                "field of space {} used with space {}",
                u.space, self.id
            )));
        }
        Ok(())
    }

    /// Value and physical gradient of `u` at reference point `xi` of element `t`.
    pub fn eval(&self, t: usize, u: &[c64], xi: Point) -> (c64, [c64; 2]) {
        let map = self.element_map(t);
        let loc = self.local_coeffs(t, u);
        let (v, g) = (self.element.values(xi), self.element.grads(xi));
        let mut val = c64::default();
        let mut grad = [c64::default(); 2];
        for i in 0..loc.len() {
            val += loc[i] * v[i];
            let gp = map.grad(g[i]);
            grad[0] += loc[i] * gp[0];
            grad[1] += loc[i] * gp[1];
        }
        (val, grad)
    }

    /// `Σ_K ∫_K g(x, u_h(x), ∇u_h(x))` with a rule of the given degree.
    pub fn integrate<G>(&self, u: &[c64], degree: usize, g: G) -> c64
    where
        G: Fn(Point, c64, [c64; 2]) -> c64,
    {
        let rule = triangle_rule(degree);
        let tab = Tabulation::new(&self.element, &rule);
        let mut total = c64::default();
        for t in 0..self.mesh.n_triangles() {
            let map = self.element_map(t);
            let loc = self.local_coeffs(t, u);
            for q in 0..rule.len() {
                let (val, grad) = tab.eval(&map, &loc, q);
                total += g(map.to_physical(rule.points[q]), val, grad) * (rule.weights[q] * map.det.abs());
            }
        }
        total
    }

    /// `(φᵢ, w)_V` for every free basis function, with `V = H¹`
    /// (`grad_w` supplies `∇w`).
    pub fn h1_functional<W, GW>(&self, w: W, grad_w: GW, degree: usize) -> CVector
    where
        W: Fn(Point) -> c64,
        GW: Fn(Point) -> [c64; 2],
    {
        let rule = triangle_rule(degree);
        let tab = Tabulation::new(&self.element, &rule);
        let mut b = CVector::zeros(self.n_free);
        for t in 0..self.mesh.n_triangles() {
            let map = self.element_map(t);
            let dofs: Vec<Option<usize>> = self.local_dofs(t).collect();
            for q in 0..rule.len() {
                let x = map.to_physical(rule.points[q]);
                let (wv, wg) = (w(x), grad_w(x));
                let jw = rule.weights[q] * map.det.abs();
                for (i, d) in dofs.iter().enumerate() {
                    if let Some(i_free) = *d {
                        let gp = map.grad(tab.grads[q][i]);
                        let term = wv.conj() * tab.values[q][i] + wg[0].conj() * gp[0] + wg[1].conj() * gp[1];
                        b[i_free] += term * jw;
                    }
                }
            }
        }
        b
    }

    /// Stiffness (Laplacian plus potential), pure Laplacian and mass matrices.
    pub fn assemble(&self, op: &OperatorSpec, exec: Exec) -> Forms {
        let rule = triangle_rule(2 * self.degree());
        let tab = Tabulation::new(&self.element, &rule);
        let nt = self.mesh.n_triangles();
        let n = self.element.ndofs();
        let chunk = 256;
        let parts = exec.map_range(nt.div_ceil(chunk), |c| {
            let mut lap = TripletBuilder::new(self.n_free, self.n_free);
            let mut pot = TripletBuilder::new(self.n_free, self.n_free);
            let mut mass = TripletBuilder::new(self.n_free, self.n_free);
            for t in c * chunk..((c + 1) * chunk).min(nt) {
                let map = self.element_map(t);
                let vk = op.potential_on(&self.mesh, t);
                let dofs: Vec<Option<usize>> = self.local_dofs(t).collect();
                let mut ke = vec![0.0; n * n];
                let mut me = vec![0.0; n * n];
                for q in 0..rule.len() {
                    let jw = rule.weights[q] * map.det.abs();
                    let g: Vec<[f64; 2]> = tab.grads[q].iter().map(|&g| map.grad(g)).collect();
                    let v = &tab.values[q];
                    for i in 0..n {
                        for j in 0..n {
                            ke[i * n + j] += (g[i][0] * g[j][0] + g[i][1] * g[j][1]) * jw;
                            me[i * n + j] += v[i] * v[j] * jw;
                        }
                    }
                }
                for i in 0..n {
                    let Some(fi) = dofs[i] else { continue };
                    for j in 0..n {
                        let Some(fj) = dofs[j] else { continue };
                        lap.push(fi, fj, c64::from(ke[i * n + j]));
                        mass.push(fi, fj, c64::from(me[i * n + j]));
                        if vk != c64::default() {
                            pot.push(fi, fj, vk * me[i * n + j]);
                        }
                    }
                }
            }
            (lap, pot, mass)
        });
        let mut lap = TripletBuilder::new(self.n_free, self.n_free);
        let mut pot = TripletBuilder::new(self.n_free, self.n_free);
        let mut mass = TripletBuilder::new(self.n_free, self.n_free);
        for (l, p, m) in parts {
            lap.extend(l);
            pot.extend(p);
            mass.extend(m);
        }
        let laplace = lap.build();
        let potential = pot.build();
        let mass = mass.build();
        let stiffness = CsrMatrix::linear_combination(&[(c64::from(1.0), &laplace), (c64::from(1.0), &potential)]);
        Forms { stiffness, laplace, mass }
    }
}

/// Basis values and reference gradients at the points of a rule.
#[derive(Debug, Clone)]
pub struct Tabulation {
    pub values: Vec<Vec<f64>>,
    pub grads: Vec<Vec<[f64; 2]>>,
}

impl Tabulation {
    pub fn new(element: &RefElement, rule: &Rule) -> Self {
        Self {
            values: rule.points.iter().map(|&p| element.values(p)).collect(),
            grads: rule.points.iter().map(|&p| element.grads(p)).collect(),
        }
    }

    pub fn eval(&self, map: &ElementMap, loc: &[c64], q: usize) -> (c64, [c64; 2]) {
        let mut val = c64::default();
        let mut grad = [c64::default(); 2];
        for (i, &c) in loc.iter().enumerate() {
            val += c * self.values[q][i];
            let g = map.grad(self.grads[q][i]);
            grad[0] += c * g[0];
            grad[1] += c * g[1];
        }
        (val, grad)
    }
}

/// Assembled sesquilinear forms on the free dofs.
#[derive(Debug, Clone)]
pub struct Forms {
    /// `(∇φⱼ, ∇φᵢ) + (V φⱼ, φᵢ)`
    pub stiffness: CsrMatrix,
    /// `(∇φⱼ, ∇φᵢ)`
    pub laplace: CsrMatrix,
    /// `(φⱼ, φᵢ)`
    pub mass: CsrMatrix,
}

impl Forms {
    /// Gram matrix of the full `H¹` inner product.
    pub fn h1_gram(&self) -> CsrMatrix {
        CsrMatrix::linear_combination(&[(c64::from(1.0), &self.laplace), (c64::from(1.0), &self.mass)])
    }
}

/// Coefficients of a finite element function on the free dofs of a space.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldVector {
    pub space: u64,
    pub coeffs: CVector,
}

impl FieldVector {
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn scaled(&self, a: c64) -> FieldVector {
        FieldVector { space: self.space, coeffs: &self.coeffs * a }
    }
}

/// Stacks fields of one space as matrix columns.
pub fn fields_to_block(fields: &[FieldVector]) -> Result<CMatrix> {
    let Some(first) = fields.first() else {
        return Ok(CMatrix::zeros(0, 0));
    };
    let mut m = CMatrix::zeros(first.len(), fields.len());
    for (j, f) in fields.iter().enumerate() {
        if f.space != first.space || f.len() != first.len() {
            return Err(Error::SpaceMismatch("fields from different spaces".into()));
        }
        m.set_column(j, &f.coeffs);
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerKind {
    L2,
    H1,
}

/// `(u, v)` in `L²` or in the full `H¹` inner product, linear in `u`.
pub fn inner_product(forms: &Forms, space: &LagrangeSpace, kind: InnerKind, u: &FieldVector, v: &FieldVector) -> Result<c64> {
    space.check(u)?;
    space.check(v)?;
    let uu: Vec<c64> = u.coeffs.iter().copied().collect();
    let mut mu = forms.mass.mul_vec(&uu);
    if kind == InnerKind::H1 {
        for (a, b) in mu.iter_mut().zip(forms.laplace.mul_vec(&uu)) {
            *a += b;
        }
    }
    Ok(v.coeffs.iter().zip(&mu).map(|(vi, mi)| vi.conj() * mi).sum())
}

/// Axis-aligned box carrying a constant potential value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialRegion {
    pub min: Point,
    pub max: Point,
    pub value: c64,
}

/// The operator `−Δ + V` with a piecewise constant complex potential `V`,
/// evaluated at element centroids (later regions take precedence).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OperatorSpec {
    pub regions: Vec<PotentialRegion>,
}

impl OperatorSpec {
    pub fn laplacian() -> Self {
        Self::default()
    }

    /// `V = value` on `{x < 1/2}` of the unit square.
    pub fn left_half(value: c64) -> Self {
        Self { regions: vec![PotentialRegion { min: [0.0, 0.0], max: [0.5, 1.0], value }] }
    }

    pub fn is_zero(&self) -> bool {
        self.regions.iter().all(|r| r.value == c64::default())
    }

    pub fn is_real(&self) -> bool {
        self.regions.iter().all(|r| r.value.im == 0.0)
    }

    pub fn potential_at(&self, x: Point) -> c64 {
        self.regions
            .iter()
            .rev()
            .find(|r| x[0] >= r.min[0] && x[0] <= r.max[0] && x[1] >= r.min[1] && x[1] <= r.max[1])
            .map_or(c64::default(), |r| r.value)
    }

    pub fn potential_on(&self, mesh: &TriMesh, t: usize) -> c64 {
        self.potential_at(mesh.centroid(t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_triangle() -> Arc<TriMesh> {
        Arc::new(TriMesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap())
    }

    #[test]
    fn p1_element_matrices() {
        let space = LagrangeSpace::unconstrained(unit_triangle(), 1).unwrap();
        let f = space.assemble(&OperatorSpec::laplacian(), Exec::Sequential);
        let k = [[2.0, -1.0, -1.0], [-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]];
        let m = [[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((f.laplace.get(i, j).re - 0.5 * k[i][j]).abs() < 1e-14);
                assert!((f.mass.get(i, j).re - 0.5 / 12.0 * m[i][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn dof_counts() {
        let mesh = Arc::new(TriMesh::structured_square(4));
        for (p, free) in [(1, 9), (2, 49), (3, 121)] {
            let s = LagrangeSpace::new(mesh.clone(), p).unwrap();
            assert_eq!(s.ndofs(), free);
        }
    }

    #[test]
    fn interpolation_reproduces_polynomials() {
        let mesh = Arc::new(TriMesh::structured_square(3));
        for p in 1..=3 {
            let s = LagrangeSpace::unconstrained(mesh.clone(), p).unwrap();
            let f = |x: Point| c64::from(x[0].powi(p as i32) + 2.0 * x[1] - 0.5);
            let u = s.interpolate(f);
            let uu: Vec<c64> = u.coeffs.iter().copied().collect();
            for t in [0, 5, 17] {
                let (v, _) = s.eval(t, &uu, [0.2, 0.3]);
                let x = s.element_map(t).to_physical([0.2, 0.3]);
                assert!((v - f(x)).norm() < 1e-13);
            }
        }
    }
}
