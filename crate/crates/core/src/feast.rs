//! Filtered subspace iteration: `Y = S_{r,h} Q`, `V`-orthonormalize,
//! Rayleigh–Ritz with the operator form and the `L²` mass, accept Ritz
//! values inside the contour, stop when the accepted set settles.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cluster_gap::hausdorff;
use crate::exec::Exec;
use crate::fem::{CgResolvent, DenseResolvent, FieldVector, FoslsResolvent, LagrangeSpace};
use crate::filters::{ContourCircle, RationalFilter};
use crate::linalg::{self, CMatrix};
use crate::{c64, Error, Result};

/// Ritz values farther than `(1 + ACCEPT_MARGIN) R` from the center are discarded.
pub const ACCEPT_MARGIN: f64 = 0.05;
/// Iterations in a row without accepted Ritz values before giving up.
pub const EMPTY_LIMIT: usize = 3;
const ORTHO_TOL: f64 = 1e-13;

/// Discrete resolvent together with the forms needed for Rayleigh–Ritz.
pub trait ResolventBackend: Send + Sync {
    fn dim(&self) -> usize;

    /// `R_h(z)` applied column-wise.
    fn solve_block(&self, z: c64, f: &CMatrix) -> Result<CMatrix>;

    /// `A x`, the matrix of `a(u, v) = (∇u, ∇v) + (V u, v)`.
    fn apply_operator(&self, x: &CMatrix) -> CMatrix;

    /// `M x`, the `L²` mass.
    fn apply_mass(&self, x: &CMatrix) -> CMatrix;

    /// `G x`, the Gram matrix of the `V` inner product.
    fn apply_gram(&self, x: &CMatrix) -> CMatrix;

    /// Factors every shift up front.
    fn prepare(&self, _zs: &[c64]) -> Result<()> {
        Ok(())
    }

    fn exec(&self) -> Exec {
        Exec::default()
    }

    fn space(&self) -> Option<&Arc<LagrangeSpace>> {
        None
    }
}

impl ResolventBackend for CgResolvent {
    fn dim(&self) -> usize {
        self.space().ndofs()
    }

    fn solve_block(&self, z: c64, f: &CMatrix) -> Result<CMatrix> {
        CgResolvent::solve_block(self, z, f)
    }

    fn apply_operator(&self, x: &CMatrix) -> CMatrix {
        self.forms().stiffness.mul_dense(x)
    }

    fn apply_mass(&self, x: &CMatrix) -> CMatrix {
        self.forms().mass.mul_dense(x)
    }

    fn apply_gram(&self, x: &CMatrix) -> CMatrix {
        self.gram().mul_dense(x)
    }

    fn prepare(&self, zs: &[c64]) -> Result<()> {
        CgResolvent::prepare(self, zs)
    }

    fn exec(&self) -> Exec {
        CgResolvent::exec(self)
    }

    fn space(&self) -> Option<&Arc<LagrangeSpace>> {
        Some(CgResolvent::space(self))
    }
}

/// Iterates on the scalar component; requires the source space to be the
/// scalar `P₁` space.
impl ResolventBackend for FoslsResolvent {
    fn dim(&self) -> usize {
        self.scalar_space().ndofs()
    }

    fn solve_block(&self, z: c64, f: &CMatrix) -> Result<CMatrix> {
        if self.source_space().id() != self.scalar_space().id() {
            return Err(Error::SpaceMismatch("subspace iteration needs source space = scalar space".into()));
        }
        Ok(FoslsResolvent::solve_block(self, z, f)?.1)
    }

    fn apply_operator(&self, x: &CMatrix) -> CMatrix {
        self.scalar_forms().stiffness.mul_dense(x)
    }

    fn apply_mass(&self, x: &CMatrix) -> CMatrix {
        self.scalar_forms().mass.mul_dense(x)
    }

    fn apply_gram(&self, x: &CMatrix) -> CMatrix {
        self.gram().mul_dense(x)
    }

    fn prepare(&self, zs: &[c64]) -> Result<()> {
        FoslsResolvent::prepare(self, zs)
    }

    fn exec(&self) -> Exec {
        FoslsResolvent::exec(self)
    }

    fn space(&self) -> Option<&Arc<LagrangeSpace>> {
        Some(self.scalar_space())
    }
}

/// `ℂⁿ` with the Euclidean inner product, operator `A`, mass `I`.
impl ResolventBackend for DenseResolvent {
    fn dim(&self) -> usize {
        self.matrix().nrows()
    }

    fn solve_block(&self, z: c64, f: &CMatrix) -> Result<CMatrix> {
        DenseResolvent::solve_block(self, z, f)
    }

    fn apply_operator(&self, x: &CMatrix) -> CMatrix {
        self.matrix() * x
    }

    fn apply_mass(&self, x: &CMatrix) -> CMatrix {
        x.clone()
    }

    fn apply_gram(&self, x: &CMatrix) -> CMatrix {
        x.clone()
    }
}

/// `ω₀ Q + Σⱼ ωⱼ R_h(zⱼ) Q`, with the pole solves run under `exec`.
pub fn apply_filter_block<B: ResolventBackend + ?Sized>(
    backend: &B,
    filter: &RationalFilter,
    q: &CMatrix,
    exec: Exec,
) -> Result<CMatrix> {
    if q.nrows() != backend.dim() {
        return Err(Error::DimensionMismatch(format!("block with {} rows for dimension {}", q.nrows(), backend.dim())));
    }
    let poles = filter.poles();
    let parts = exec.try_map_range(poles.len(), |j| backend.solve_block(poles[j].z, q).map(|y| y * poles[j].weight))?;
    let mut y = q * filter.omega0();
    for p in parts {
        y += p;
    }
    Ok(y)
}

#[derive(Debug, Clone, Copy)]
pub struct FeastOptions {
    /// Block size.
    pub m: usize,
    pub seed: u64,
    pub tol: f64,
    pub maxit: usize,
    pub exec: Exec,
}

impl FeastOptions {
    /// Block size `expected + 2`, default tolerances.
    pub fn for_multiplicity(expected: usize) -> Self {
        Self { m: expected + 2, ..Self::default() }
    }
}

impl Default for FeastOptions {
    fn default() -> Self {
        Self { m: 4, seed: 0, tol: 1e-10, maxit: 50, exec: Exec::default() }
    }
}

#[derive(Debug, Clone)]
pub struct ClusterResult {
    /// `V`-orthonormal columns spanning `E_h`.
    pub basis: CMatrix,
    /// Accepted Ritz values, sorted by real then imaginary part.
    pub ritz_values: Vec<c64>,
    pub iterations: usize,
    /// Hausdorff distance between successive accepted Ritz sets.
    pub residual_history: Vec<f64>,
    /// `‖S_{r,h} X − X r(C_X)‖_V` of the accepted block from the previous
    /// iteration, `C_X` its Ritz matrix.
    pub invariance_history: Vec<f64>,
    pub seed: u64,
}

impl ClusterResult {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Basis columns as fields of `space`.
    pub fn fields(&self, space: &LagrangeSpace) -> Result<Vec<FieldVector>> {
        (0..self.basis.ncols()).map(|j| space.field(self.basis.column(j).into_owned())).collect()
    }
}

/// Seeded block with entries uniform in the unit square of `ℂ`.
pub fn initial_block(n: usize, m: usize, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    linalg::random_matrix(&mut rng, n, m)
}

fn v_norm<B: ResolventBackend + ?Sized>(backend: &B, x: &CMatrix) -> f64 {
    if x.ncols() == 0 {
        return 0.0;
    }
    let g = linalg::hermitian_part(&(x.adjoint() * backend.apply_gram(x)));
    g.symmetric_eigen().eigenvalues.max().max(0.0).sqrt()
}

fn sorted(mut zs: Vec<c64>) -> Vec<c64> {
    zs.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    zs
}

/// `r(C) = ω₀ I + Σ ωⱼ (zⱼ − C)⁻¹` for a small matrix.
fn filter_matrix(filter: &RationalFilter, c: &CMatrix) -> Result<CMatrix> {
    let k = c.nrows();
    let eye = CMatrix::identity(k, k);
    let mut out = &eye * filter.omega0();
    for p in filter.poles() {
        let inv = linalg::lu_solve(&(&eye * p.z - c), &eye)
            .ok_or_else(|| Error::SingularShift { z: p.z, reason: "Ritz value on a pole".into() })?;
        out += inv * p.weight;
    }
    Ok(out)
}

struct Extraction {
    accepted: Vec<c64>,
    /// Euclidean-orthonormal coefficients of the accepted invariant subspace of `C`.
    coeffs: CMatrix,
    /// Ritz matrix of `C` restricted to `coeffs`.
    ritz: CMatrix,
}

/// Rayleigh–Ritz on the `V`-orthonormal block `q`.
fn rayleigh_ritz<B: ResolventBackend + ?Sized>(
    backend: &B,
    q: &CMatrix,
    contour: &ContourCircle,
) -> Result<Extraction> {
    let a = q.adjoint() * backend.apply_operator(q);
    let b = linalg::hermitian_part(&(q.adjoint() * backend.apply_mass(q)));
    let c = linalg::lu_solve(&b, &a).ok_or_else(|| Error::NotPositiveDefinite("Ritz mass matrix".into()))?;
    let values = linalg::eigenvalues(&c)?;
    let accepted: Vec<c64> =
        sorted(values.into_iter().filter(|&l| contour.contains(l, ACCEPT_MARGIN)).collect());
    let k = accepted.len();
    if k == 0 {
        return Ok(Extraction { accepted, coeffs: CMatrix::zeros(q.ncols(), 0), ritz: CMatrix::zeros(0, 0) });
    }
    // Invariant subspace for the accepted values: the k right singular
    // vectors of Π(C − λᵢ) with the smallest singular values.
    let m = c.nrows();
    let scale = linalg::spectral_norm(&c).max(1.0);
    let mut prod = CMatrix::identity(m, m);
    for &l in &accepted {
        prod = (&c - CMatrix::identity(m, m) * l) * prod / c64::from(scale);
    }
    let (_, v) = linalg::svd_full(&prod);
    let coeffs = v.columns(m - k, k).into_owned();
    let ritz = coeffs.adjoint() * &c * &coeffs;
    Ok(Extraction { accepted, coeffs, ritz })
}

/// Filtered subspace iteration for the eigenvalues of the backend's
/// operator inside `contour`.
pub fn feast_iterate<B: ResolventBackend + ?Sized>(
    backend: &B,
    filter: &RationalFilter,
    contour: &ContourCircle,
    opts: &FeastOptions,
) -> Result<ClusterResult> {
    let n = backend.dim();
    if opts.m == 0 || opts.m > n {
        return Err(Error::InvalidArgument(format!("block size {} for dimension {n}", opts.m)));
    }
    if opts.maxit == 0 || !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("maxit and tol must be positive".into()));
    }
    let zs: Vec<c64> = filter.poles().iter().map(|p| p.z).collect();
    backend.prepare(&zs)?;
    let gram = |x: &CMatrix| backend.apply_gram(x);
    let mut q = linalg::orthonormalize_with(&initial_block(n, opts.m, opts.seed), gram, ORTHO_TOL)?;
    let threshold = opts.tol * (1.0 + contour.center.norm());
    let mut prev: Option<Extraction> = None;
    let mut prev_span: Option<CMatrix> = None;
    let mut residual_history = Vec::new();
    let mut invariance_history = Vec::new();
    let mut empty = 0;
    for it in 1..=opts.maxit {
        let y = apply_filter_block(backend, filter, &q, opts.exec)?;
        if let Some(p) = prev.as_ref().filter(|p| !p.accepted.is_empty()) {
            let x = &q * &p.coeffs;
            let z = &y * &p.coeffs - &x * filter_matrix(filter, &p.ritz)?;
            invariance_history.push(v_norm(backend, &z));
        }
        let qn = linalg::orthonormalize_with(&y, gram, ORTHO_TOL)?;
        if qn.ncols() == 0 {
            return Err(Error::DependentBasis("filtered block vanished".into()));
        }
        let ext = rayleigh_ritz(backend, &qn, contour)?;
        if ext.accepted.is_empty() {
            empty += 1;
            if empty >= EMPTY_LIMIT {
                return Err(Error::NoSpectrumInContour { center: contour.center, radius: contour.radius });
            }
            residual_history.push(f64::INFINITY);
            prev = Some(ext);
            prev_span = None;
            q = qn;
            continue;
        }
        empty = 0;
        let span = &qn * &ext.coeffs;
        let change = match prev.as_ref().filter(|p| !p.accepted.is_empty()) {
            Some(p) => hausdorff(&p.accepted, &ext.accepted)?,
            None => f64::INFINITY,
        };
        residual_history.push(change);
        // A span that no longer moves cannot improve its Ritz values; this
        // settles defective clusters whose Ritz values jitter at √ε.
        let stagnant = match &prev_span {
            Some(ps) if ps.ncols() == span.ncols() => v_norm(backend, &(&span - ps * (ps.adjoint() * gram(&span)))) < opts.tol,
            _ => false,
        };
        let done = change < threshold || stagnant;
        prev_span = Some(span.clone());
        if done {
            let basis = linalg::orthonormalize_with(&span, gram, ORTHO_TOL)?;
            return Ok(ClusterResult {
                basis,
                ritz_values: ext.accepted,
                iterations: it,
                residual_history,
                invariance_history,
                seed: opts.seed,
            });
        }
        prev = Some(ext);
        q = qn;
    }
    let last_change = residual_history.last().copied().unwrap_or(f64::INFINITY);
    Err(Error::NotConverged { iterations: opts.maxit, last_change, history: residual_history })
}
