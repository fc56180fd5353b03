//! Source-problem error estimators. An estimator maps `v_h` to a field
//! `ℰ v_h = (ℰ₁ v_h, …, ℰ_N v_h)`, one component per filter pole, whose
//! `Y` norm is an integral that splits over elements.
//!
//! Fields are stored as samples at quadrature points of a shared layout:
//! every sample carries a weight and an owning element, so the `Y` inner
//! product is `Σₖ Σₛ wₛ aₖₛ conj(bₖₛ)` and is exact for the piecewise
//! polynomial payloads.

use std::sync::Arc;

use crate::exec::Exec;
use crate::fem::quadrature::{line_rule, triangle_rule};
use crate::fem::reference::ElementMap;
use crate::fem::{CgResolvent, FieldVector, FoslsResolvent, LagrangeSpace, Tabulation};
use crate::filters::RationalFilter;
use crate::linalg::CMatrix;
use crate::mesh::{Point, TriMesh};
use crate::{c64, Error, Result};

/// Quadrature samples shared by all fields of one estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleLayout {
    weights: Vec<f64>,
    owners: Vec<usize>,
    n_elements: usize,
}

impl SampleLayout {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn owners(&self) -> &[usize] {
        &self.owners
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorField {
    layout: Arc<SampleLayout>,
    values: Vec<Vec<c64>>,
}

impl EstimatorField {
    pub fn zeros(layout: Arc<SampleLayout>, n_poles: usize) -> Self {
        let values = vec![vec![c64::default(); layout.len()]; n_poles];
        Self { layout, values }
    }

    /// Builds a field from per-pole sample values.
    pub fn from_values(layout: Arc<SampleLayout>, values: Vec<Vec<c64>>) -> Result<Self> {
        if values.iter().any(|v| v.len() != layout.len()) {
            return Err(Error::EstimatorMismatch("sample count differs from layout".into()));
        }
        Ok(Self { layout, values })
    }

    pub fn layout(&self) -> &Arc<SampleLayout> {
        &self.layout
    }

    pub fn n_poles(&self) -> usize {
        self.values.len()
    }

    pub fn pole_values(&self, k: usize) -> &[c64] {
        &self.values[k]
    }

    fn compatible(&self, other: &Self) -> Result<()> {
        let same_layout = Arc::ptr_eq(&self.layout, &other.layout) || self.layout == other.layout;
        if !same_layout || self.values.len() != other.values.len() {
            return Err(Error::EstimatorMismatch(format!(
                "fields with {} and {} poles on {} and {} samples",
                self.values.len(),
                other.values.len(),
                self.layout.len(),
                other.layout.len()
            )));
        }
        Ok(())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values
            .iter()
            .map(|v| v.iter().zip(&self.layout.weights).map(|(a, w)| w * a.norm_sqr()).sum::<f64>())
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `Σ cᵢ fᵢ`.
    pub fn combine(fields: &[EstimatorField], coeffs: &[c64]) -> Result<EstimatorField> {
        let first = fields.first().ok_or(Error::EmptySet)?;
        if fields.len() != coeffs.len() {
            return Err(Error::DimensionMismatch("one coefficient per field".into()));
        }
        let mut out = EstimatorField::zeros(first.layout.clone(), first.n_poles());
        for (f, &c) in fields.iter().zip(coeffs) {
            first.compatible(f)?;
            for (dst, src) in out.values.iter_mut().zip(&f.values) {
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += c * s;
                }
            }
        }
        Ok(out)
    }
}

/// `(f₁, f₂)_Y`, linear in the first argument.
pub fn y_inner(f1: &EstimatorField, f2: &EstimatorField) -> Result<c64> {
    f1.compatible(f2)?;
    let w = &f1.layout.weights;
    Ok(f1
        .values
        .iter()
        .zip(&f2.values)
        .map(|(a, b)| a.iter().zip(b).zip(w).map(|((x, y), w)| x * y.conj() * *w).sum::<c64>())
        .sum())
}

/// `η_K = ‖f‖_{Y(K)}` for every element.
pub fn local_norms(f: &EstimatorField) -> Vec<f64> {
    let mut sq = vec![0.0; f.layout.n_elements];
    for v in &f.values {
        for ((a, w), &k) in v.iter().zip(&f.layout.weights).zip(&f.layout.owners) {
            sq[k] += w * a.norm_sqr();
        }
    }
    sq.into_iter().map(f64::sqrt).collect()
}

pub trait SourceEstimator: Send + Sync {
    fn name(&self) -> &'static str;

    /// Space of the functions `v_h` the estimator accepts.
    fn space(&self) -> &Arc<LagrangeSpace>;

    fn layout(&self) -> &Arc<SampleLayout>;

    fn n_poles(&self) -> usize;

    /// `ℰ` applied to each column of `v` (coefficients in [`space`](Self::space)).
    fn estimate_block(&self, v: &CMatrix) -> Result<Vec<EstimatorField>>;

    fn estimate(&self, v: &FieldVector) -> Result<EstimatorField> {
        self.space().check(v)?;
        let block = CMatrix::from_column_slice(v.len(), 1, v.coeffs.as_slice());
        Ok(self.estimate_block(&block)?.remove(0))
    }
}

fn check_rows(space: &LagrangeSpace, v: &CMatrix) -> Result<()> {
    if v.nrows() != space.ndofs() {
        return Err(Error::DimensionMismatch(format!("block with {} rows for {} dofs", v.nrows(), space.ndofs())));
    }
    Ok(())
}

/// Per pole fields to per column fields.
fn transpose_fields(layout: &Arc<SampleLayout>, per_pole: Vec<Vec<Vec<c64>>>, ncols: usize) -> Vec<EstimatorField> {
    let mut cols: Vec<Vec<Vec<c64>>> = (0..ncols).map(|_| Vec::with_capacity(per_pole.len())).collect();
    for pole in per_pole {
        for (j, v) in pole.into_iter().enumerate() {
            cols[j].push(v);
        }
    }
    cols.into_iter().map(|values| EstimatorField { layout: layout.clone(), values }).collect()
}

#[derive(Debug, Clone)]
struct EdgeSide {
    element: usize,
    /// Reference gradients of all local basis functions at each edge point.
    grads: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone)]
struct InteriorEdge {
    sides: [EdgeSide; 2],
    /// Unit normal pointing out of the first side.
    normal: [f64; 2],
    sqrt_h: f64,
}

/// Explicit residual estimator for the Galerkin resolvent: per pole `z`,
/// with `u_h = R_h(z) v_h`, the element term `h_K (v_h − z u_h − Δu_h + V u_h)`
/// and the edge term `h_e^{1/2} [∂u_h/∂n]`, the latter split evenly between
/// the two neighbours.
pub struct ResidualEstimator {
    resolvent: Arc<CgResolvent>,
    poles: Vec<c64>,
    layout: Arc<SampleLayout>,
    rule_pts: Vec<Point>,
    tab: Tabulation,
    hess: Vec<Vec<[f64; 3]>>,
    edges: Vec<InteriorEdge>,
    n_edge_pts: usize,
    exec: Exec,
}

impl ResidualEstimator {
    pub fn new(resolvent: Arc<CgResolvent>, filter: &RationalFilter) -> Self {
        let space = resolvent.space().clone();
        let mesh = space.mesh().clone();
        let p = space.degree();
        let rule = triangle_rule(2 * p);
        let tab = Tabulation::new(space.element(), &rule);
        let hess = rule.points.iter().map(|&x| space.element().hessians(x)).collect();
        let lrule = line_rule(2 * p);
        let mut weights = Vec::new();
        let mut owners = Vec::new();
        for t in 0..mesh.n_triangles() {
            let det = mesh.area(t) * 2.0;
            for &w in &rule.weights {
                weights.push(w * det);
                owners.push(t);
            }
        }
        let mut edges = Vec::new();
        for e in 0..mesh.n_edges() {
            let (k1, Some(k2)) = mesh.edge_triangles(e) else { continue };
            let [a, b] = mesh.edge(e);
            let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
            let len = mesh.edge_length(e);
            let pts: Vec<Point> = lrule
                .points
                .iter()
                .map(|s| [pa[0] + s[0] * (pb[0] - pa[0]), pa[1] + s[0] * (pb[1] - pa[1])])
                .collect();
            let side = |k: usize| {
                let map = ElementMap::new(mesh.coords(k));
                EdgeSide {
                    element: k,
                    grads: pts.iter().map(|&x| space.element().grads(map.to_reference(x))).collect(),
                }
            };
            let mut normal = [(pb[1] - pa[1]) / len, -(pb[0] - pa[0]) / len];
            let c = mesh.centroid(k1);
            if (c[0] - pa[0]) * normal[0] + (c[1] - pa[1]) * normal[1] > 0.0 {
                normal = [-normal[0], -normal[1]];
            }
            for &w in &lrule.weights {
                for k in [k1, k2] {
                    weights.push(0.5 * w * len);
                    owners.push(k);
                }
            }
            edges.push(InteriorEdge { sides: [side(k1), side(k2)], normal, sqrt_h: len.sqrt() });
        }
        let layout = Arc::new(SampleLayout { weights, owners, n_elements: mesh.n_triangles() });
        let exec = resolvent.exec();
        Self {
            poles: filter.poles().iter().map(|p| p.z).collect(),
            resolvent,
            layout,
            rule_pts: rule.points,
            tab,
            hess,
            edges,
            n_edge_pts: lrule.weights.len(),
            exec,
        }
    }

    fn samples(&self, z: c64, v: &[c64], u: &[c64]) -> Vec<c64> {
        let space = self.resolvent.space();
        let mesh: &TriMesh = space.mesh();
        let op = self.resolvent.op();
        let mut out = Vec::with_capacity(self.layout.len());
        for t in 0..mesh.n_triangles() {
            let map = space.element_map(t);
            let h = mesh.diameter(t);
            let pot = op.potential_on(mesh, t);
            let (lv, lu) = (space.local_coeffs(t, v), space.local_coeffs(t, u));
            for q in 0..self.rule_pts.len() {
                let vals = &self.tab.values[q];
                let mut vq = c64::default();
                let mut uq = c64::default();
                let mut lap = c64::default();
                for i in 0..vals.len() {
                    vq += lv[i] * vals[i];
                    uq += lu[i] * vals[i];
                    lap += lu[i] * map.laplacian(self.hess[q][i]);
                }
                out.push((vq - z * uq - lap + pot * uq) * h);
            }
        }
        for edge in &self.edges {
            let maps = edge.sides.each_ref().map(|s| space.element_map(s.element));
            let locs = edge.sides.each_ref().map(|s| space.local_coeffs(s.element, u));
            for q in 0..self.n_edge_pts {
                let mut dn = [c64::default(); 2];
                for s in 0..2 {
                    for (i, g) in edge.sides[s].grads[q].iter().enumerate() {
                        let gp = maps[s].grad(*g);
                        dn[s] += locs[s][i] * (gp[0] * edge.normal[0] + gp[1] * edge.normal[1]);
                    }
                }
                let jump = (dn[0] - dn[1]) * edge.sqrt_h;
                out.push(jump);
                out.push(jump);
            }
        }
        out
    }
}

impl SourceEstimator for ResidualEstimator {
    fn name(&self) -> &'static str {
        "residual"
    }

    fn space(&self) -> &Arc<LagrangeSpace> {
        self.resolvent.space()
    }

    fn layout(&self) -> &Arc<SampleLayout> {
        &self.layout
    }

    fn n_poles(&self) -> usize {
        self.poles.len()
    }

    fn estimate_block(&self, v: &CMatrix) -> Result<Vec<EstimatorField>> {
        check_rows(self.space(), v)?;
        let per_pole = self.exec.try_map_range(self.poles.len(), |k| {
            let z = self.poles[k];
            let u = self.resolvent.solve_block(z, v)?;
            Ok::<_, Error>(self.exec.map_range(v.ncols(), |j| {
                let vj: Vec<c64> = v.column(j).iter().copied().collect();
                let uj: Vec<c64> = u.column(j).iter().copied().collect();
                self.samples(z, &vj, &uj)
            }))
        })?;
        Ok(transpose_fields(&self.layout, per_pole, v.ncols()))
    }
}

/// Least-squares estimator: per pole `z`, with `(q_h, u_h)` the
/// least-squares solution for data `v_h`, the residual
/// `(0, v_h) − A_z(q_h, u_h) = (−q_h − ∇u_h, v_h + div q_h − z u_h)`.
pub struct FoslsEstimator {
    resolvent: Arc<FoslsResolvent>,
    poles: Vec<c64>,
    layout: Arc<SampleLayout>,
    rule_pts: Vec<Point>,
    tab_u: Tabulation,
    tab_v: Tabulation,
    exec: Exec,
}

impl FoslsEstimator {
    pub fn new(resolvent: Arc<FoslsResolvent>, filter: &RationalFilter) -> Self {
        let mesh = resolvent.scalar_space().mesh().clone();
        let p = resolvent.source_space().degree();
        let rule = triangle_rule(2 * p.max(1));
        let tab_u = Tabulation::new(resolvent.scalar_space().element(), &rule);
        let tab_v = Tabulation::new(resolvent.source_space().element(), &rule);
        let mut weights = Vec::new();
        let mut owners = Vec::new();
        for t in 0..mesh.n_triangles() {
            let det = mesh.area(t) * 2.0;
            for &w in &rule.weights {
                for _ in 0..3 {
                    weights.push(w * det);
                    owners.push(t);
                }
            }
        }
        let layout = Arc::new(SampleLayout { weights, owners, n_elements: mesh.n_triangles() });
        let exec = resolvent.exec();
        Self {
            poles: filter.poles().iter().map(|p| p.z).collect(),
            resolvent,
            layout,
            rule_pts: rule.points,
            tab_u,
            tab_v,
            exec,
        }
    }

    pub fn resolvent(&self) -> &Arc<FoslsResolvent> {
        &self.resolvent
    }

    fn samples(&self, z: c64, v: &[c64], q: &[c64], u: &[c64]) -> Vec<c64> {
        let scalar = self.resolvent.scalar_space();
        let source = self.resolvent.source_space();
        let rt = self.resolvent.rt();
        let mesh = scalar.mesh();
        let mut out = Vec::with_capacity(self.layout.len());
        for t in 0..mesh.n_triangles() {
            let map = scalar.element_map(t);
            let (lu, lv) = (scalar.local_coeffs(t, u), source.local_coeffs(t, v));
            for k in 0..self.rule_pts.len() {
                let x = map.to_physical(self.rule_pts[k]);
                let (uq, gu) = self.tab_u.eval(&map, &lu, k);
                let (vq, _) = self.tab_v.eval(&map, &lv, k);
                let (qv, div) = rt.eval(t, q, x);
                out.push(-qv[0] - gu[0]);
                out.push(-qv[1] - gu[1]);
                out.push(vq + div - z * uq);
            }
        }
        out
    }
}

impl SourceEstimator for FoslsEstimator {
    fn name(&self) -> &'static str {
        "fosls"
    }

    fn space(&self) -> &Arc<LagrangeSpace> {
        self.resolvent.source_space()
    }

    fn layout(&self) -> &Arc<SampleLayout> {
        &self.layout
    }

    fn n_poles(&self) -> usize {
        self.poles.len()
    }

    fn estimate_block(&self, v: &CMatrix) -> Result<Vec<EstimatorField>> {
        check_rows(self.space(), v)?;
        let per_pole = self.exec.try_map_range(self.poles.len(), |k| {
            let z = self.poles[k];
            let (q, u) = self.resolvent.solve_block(z, v)?;
            Ok::<_, Error>(self.exec.map_range(v.ncols(), |j| {
                let vj: Vec<c64> = v.column(j).iter().copied().collect();
                let qj: Vec<c64> = q.column(j).iter().copied().collect();
                let uj: Vec<c64> = u.column(j).iter().copied().collect();
                self.samples(z, &vj, &qj, &uj)
            }))
        })?;
        Ok(transpose_fields(&self.layout, per_pole, v.ncols()))
    }
}

/// `ℰ ≡ 0`, one unit-weight sample per element.
pub struct ZeroEstimator {
    space: Arc<LagrangeSpace>,
    layout: Arc<SampleLayout>,
    n_poles: usize,
}

impl ZeroEstimator {
    pub fn new(space: Arc<LagrangeSpace>, n_poles: usize) -> Self {
        let n = space.mesh().n_triangles();
        let layout = Arc::new(SampleLayout { weights: vec![1.0; n], owners: (0..n).collect(), n_elements: n });
        Self { space, layout, n_poles }
    }
}

impl SourceEstimator for ZeroEstimator {
    fn name(&self) -> &'static str {
        "zero"
    }

    fn space(&self) -> &Arc<LagrangeSpace> {
        &self.space
    }

    fn layout(&self) -> &Arc<SampleLayout> {
        &self.layout
    }

    fn n_poles(&self) -> usize {
        self.n_poles
    }

    fn estimate_block(&self, v: &CMatrix) -> Result<Vec<EstimatorField>> {
        check_rows(&self.space, v)?;
        Ok((0..v.ncols()).map(|_| EstimatorField::zeros(self.layout.clone(), self.n_poles)).collect())
    }
}
