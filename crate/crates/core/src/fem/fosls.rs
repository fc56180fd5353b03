//! Least-squares resolvent on `RT₀ × P₁`: minimizes
//! `‖q + ∇u‖² + ‖−div q + z u − f‖²` for `A = −Δ` with homogeneous
//! Dirichlet conditions.

use std::sync::Arc;

use crate::exec::Exec;
use crate::fem::lagrange::{FieldVector, Forms, LagrangeSpace, OperatorSpec, Tabulation};
use crate::fem::quadrature::triangle_rule;
use crate::fem::resolvent::{guarded_factor, solve_columns, FactorCache};
use crate::linalg::CMatrix;
use crate::mesh::{Point, TriMesh};
use crate::sparse::{BandedLu, CsrMatrix, TripletBuilder};
use crate::{c64, Error, Result};

/// Lowest-order Raviart–Thomas basis: one function per edge,
/// `φₑ = ±|e| / (2|K|) (x − p)` on each neighbour `K`, with `p` the vertex
/// opposite `e`. The sign is `+` on the first neighbour of the edge, so the
/// normal flux is continuous.
#[derive(Debug, Clone)]
pub struct Rt0 {
    mesh: Arc<TriMesh>,
}

impl Rt0 {
    pub fn new(mesh: Arc<TriMesh>) -> Self {
        Self { mesh }
    }

    pub fn ndofs(&self) -> usize {
        self.mesh.n_edges()
    }

    /// `(edge, sign · |e| / (2|K|), opposite vertex)` for the three local edges of `t`.
    pub fn local(&self, t: usize) -> [(usize, f64, Point); 3] {
        let te = self.mesh.triangle_edges(t);
        let p = self.mesh.coords(t);
        let area = self.mesh.area(t);
        std::array::from_fn(|k| {
            let e = te[k];
            let s = if self.mesh.edge_triangles(e).0 == t { 1.0 } else { -1.0 };
            (e, s * self.mesh.edge_length(e) / (2.0 * area), p[(k + 2) % 3])
        })
    }

    /// Value and divergence of the flux with edge coefficients `q` at `x` in `t`.
    pub fn eval(&self, t: usize, q: &[c64], x: Point) -> ([c64; 2], c64) {
        let mut v = [c64::default(); 2];
        let mut div = c64::default();
        for (e, c, p) in self.local(t) {
            v[0] += q[e] * (c * (x[0] - p[0]));
            v[1] += q[e] * (c * (x[1] - p[1]));
            div += q[e] * (2.0 * c);
        }
        (v, div)
    }
}

#[derive(Debug)]
pub struct FoslsResolvent {
    rt: Rt0,
    scalar: Arc<LagrangeSpace>,
    source: Arc<LagrangeSpace>,
    scalar_forms: Forms,
    gram: CsrMatrix,
    /// `(φⱼ, φᵢ) + (div φⱼ, div φᵢ)`
    qq: CsrMatrix,
    /// `(∇ψⱼ, φᵢ)`
    grad_flux: CsrMatrix,
    /// `(ψⱼ, div φᵢ)`
    val_div: CsrMatrix,
    /// `(fⱼ, div φᵢ)` for basis functions `fⱼ` of the source space.
    src_div: CsrMatrix,
    /// `(fⱼ, ψᵢ)`
    src_val: CsrMatrix,
    exec: Exec,
    cache: FactorCache<BandedLu>,
}

impl FoslsResolvent {
    /// Resolvent whose data `f` lives in `P₁` on `mesh` (the setting used as
    /// a subspace-iteration backend).
    pub fn p1(mesh: Arc<TriMesh>, exec: Exec) -> Result<Self> {
        let scalar = LagrangeSpace::new(mesh, 1)?;
        Self::new(scalar.clone(), scalar, exec)
    }

    /// `scalar` must be the Dirichlet `P₁` space; `source` is any Lagrange
    /// space on the same mesh.
    pub fn new(scalar: Arc<LagrangeSpace>, source: Arc<LagrangeSpace>, exec: Exec) -> Result<Self> {
        if scalar.degree() != 1 {
            return Err(Error::InvalidArgument("the least-squares scalar space must be P1".into()));
        }
        if !Arc::ptr_eq(scalar.mesh(), source.mesh()) && scalar.mesh() != source.mesh() {
            return Err(Error::SpaceMismatch("scalar and source spaces live on different meshes".into()));
        }
        let mesh = scalar.mesh().clone();
        let rt = Rt0::new(mesh.clone());
        let scalar_forms = scalar.assemble(&OperatorSpec::laplacian(), exec);
        let gram = scalar_forms.h1_gram();
        let (nq, nu, nf) = (rt.ndofs(), scalar.ndofs(), source.ndofs());
        let rule = triangle_rule(4.max(source.degree() + 1));
        let tab_u = Tabulation::new(scalar.element(), &rule);
        let tab_f = Tabulation::new(source.element(), &rule);
        let mut qq = TripletBuilder::new(nq, nq);
        let mut grad_flux = TripletBuilder::new(nq, nu);
        let mut val_div = TripletBuilder::new(nq, nu);
        let mut src_div = TripletBuilder::new(nq, nf);
        let mut src_val = TripletBuilder::new(nu, nf);
        for t in 0..mesh.n_triangles() {
            let map = scalar.element_map(t);
            let loc = rt.local(t);
            let udofs: Vec<Option<usize>> = scalar.local_dofs(t).collect();
            let fdofs: Vec<Option<usize>> = source.local_dofs(t).collect();
            let mut e_qq = [[0.0; 3]; 3];
            let mut e_gf = [[0.0; 3]; 3];
            let mut e_vd = [[0.0; 3]; 3];
            let mut e_sd = vec![[0.0; 3]; fdofs.len()];
            let mut e_sv = vec![[0.0; 3]; fdofs.len()];
            for q in 0..rule.len() {
                let jw = rule.weights[q] * map.det.abs();
                let x = map.to_physical(rule.points[q]);
                let phi: [[f64; 2]; 3] = std::array::from_fn(|i| {
                    let (_, c, p) = loc[i];
                    [c * (x[0] - p[0]), c * (x[1] - p[1])]
                });
                let div: [f64; 3] = std::array::from_fn(|i| 2.0 * loc[i].1);
                let gu: Vec<[f64; 2]> = tab_u.grads[q].iter().map(|&g| map.grad(g)).collect();
                for i in 0..3 {
                    for j in 0..3 {
                        e_qq[i][j] += (phi[i][0] * phi[j][0] + phi[i][1] * phi[j][1] + div[i] * div[j]) * jw;
                        e_gf[i][j] += (gu[j][0] * phi[i][0] + gu[j][1] * phi[i][1]) * jw;
                        e_vd[i][j] += tab_u.values[q][j] * div[i] * jw;
                    }
                    for (j, fv) in tab_f.values[q].iter().enumerate() {
                        e_sd[j][i] += fv * div[i] * jw;
                        e_sv[j][i] += fv * tab_u.values[q][i] * jw;
                    }
                }
            }
            for i in 0..3 {
                let ei = loc[i].0;
                for j in 0..3 {
                    qq.push(ei, loc[j].0, c64::from(e_qq[i][j]));
                    if let Some(uj) = udofs[j] {
                        grad_flux.push(ei, uj, c64::from(e_gf[i][j]));
                        val_div.push(ei, uj, c64::from(e_vd[i][j]));
                    }
                }
                for (j, fd) in fdofs.iter().enumerate() {
                    if let Some(fj) = *fd {
                        src_div.push(ei, fj, c64::from(e_sd[j][i]));
                        if let Some(ui) = udofs[i] {
                            src_val.push(ui, fj, c64::from(e_sv[j][i]));
                        }
                    }
                }
            }
        }
        Ok(Self {
            rt,
            scalar,
            source,
            scalar_forms,
            gram,
            qq: qq.build(),
            grad_flux: grad_flux.build(),
            val_div: val_div.build(),
            src_div: src_div.build(),
            src_val: src_val.build(),
            exec,
            cache: FactorCache::default(),
        })
    }

    pub fn rt(&self) -> &Rt0 {
        &self.rt
    }

    pub fn scalar_space(&self) -> &Arc<LagrangeSpace> {
        &self.scalar
    }

    pub fn source_space(&self) -> &Arc<LagrangeSpace> {
        &self.source
    }

    /// Forms of the scalar `P₁` space.
    pub fn scalar_forms(&self) -> &Forms {
        &self.scalar_forms
    }

    pub fn gram(&self) -> &CsrMatrix {
        &self.gram
    }

    pub fn exec(&self) -> Exec {
        self.exec
    }

    pub fn n_flux(&self) -> usize {
        self.rt.ndofs()
    }

    /// Hermitian normal-equation matrix on `(q, u)`.
    pub fn normal_matrix(&self, z: c64) -> CsrMatrix {
        let (nq, nu) = (self.rt.ndofs(), self.scalar.ndofs());
        let n = nq + nu;
        let one = c64::from(1.0);
        let qu = CsrMatrix::linear_combination(&[(one, &self.grad_flux), (-z, &self.val_div)]);
        let uu = CsrMatrix::linear_combination(&[
            (one, &self.scalar_forms.laplace),
            (c64::from(z.norm_sqr()), &self.scalar_forms.mass),
        ]);
        let mut t = TripletBuilder::with_capacity(n, n, self.qq.nnz() + 2 * qu.nnz() + uu.nnz());
        for i in 0..nq {
            let (c, v) = self.qq.row(i);
            for (&j, &x) in c.iter().zip(v) {
                t.push(i, j, x);
            }
            let (c, v) = qu.row(i);
            for (&j, &x) in c.iter().zip(v) {
                t.push(i, nq + j, x);
                t.push(nq + j, i, x.conj());
            }
        }
        for i in 0..nu {
            let (c, v) = uu.row(i);
            for (&j, &x) in c.iter().zip(v) {
                t.push(nq + i, nq + j, x);
            }
        }
        t.build()
    }

    pub fn factor(&self, z: c64) -> Result<Arc<BandedLu>> {
        self.cache.get_or_try(z, || guarded_factor(&self.normal_matrix(z), z))
    }

    pub fn prepare(&self, zs: &[c64]) -> Result<()> {
        self.exec.try_map_range(zs.len(), |k| self.factor(zs[k]).map(|_| ()))?;
        Ok(())
    }

    /// Solves for the columns of `f` (coefficients in the source space);
    /// returns the flux and scalar blocks.
    pub fn solve_block(&self, z: c64, f: &CMatrix) -> Result<(CMatrix, CMatrix)> {
        if f.nrows() != self.source.ndofs() {
            return Err(Error::DimensionMismatch(format!(
                "block with {} rows for {} source dofs",
                f.nrows(),
                self.source.ndofs()
            )));
        }
        let (nq, nu) = (self.rt.ndofs(), self.scalar.ndofs());
        let lu = self.factor(z)?;
        let dq = self.src_div.mul_dense(f);
        let mu = self.src_val.mul_dense(f);
        let mut rhs = CMatrix::zeros(nq + nu, f.ncols());
        rhs.rows_mut(0, nq).copy_from(&(-dq));
        rhs.rows_mut(nq, nu).copy_from(&(mu * z.conj()));
        let x = solve_columns(&lu, &rhs, self.exec);
        Ok((x.rows(0, nq).into_owned(), x.rows(nq, nu).into_owned()))
    }

    /// `(q_h, u_h)` for a single right-hand side.
    pub fn solve(&self, z: c64, f: &FieldVector) -> Result<(CMatrix, FieldVector)> {
        self.source.check(f)?;
        let block = CMatrix::from_column_slice(f.len(), 1, f.coeffs.as_slice());
        let (q, u) = self.solve_block(z, &block)?;
        Ok((q, self.scalar.field(u.column(0).into_owned())?))
    }
}
