//! Dense ground truth at small scale: generalized eigenspaces, `r(A)`,
//! contour-quadrature Riesz projectors and the brute-force check that
//! `E_μ(r(A)) = ⊕_{λ ∈ r⁻¹(μ)} E_λ^∞(A)`.

use rand::Rng;

use crate::filters::{ContourCircle, RationalFilter, DEFAULT_TOL_ROOT};
use crate::linalg::{self, CMatrix};
use crate::{c64, Error, Result};

pub const MAX_ORACLE_DIM: usize = 64;
/// Singular-value threshold (relative to `σ₁`) for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;
pub const DEFAULT_NQUAD: usize = 64;
/// Resolvent norm above which a contour is reported as too close to the
/// spectrum.
pub const NEAR_CONTOUR_RESOLVENT: f64 = 1e8;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    matrix: CMatrix,
}

impl DenseOperator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "operator must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.nrows() > MAX_ORACLE_DIM {
            return Err(Error::DimensionMismatch(format!(
                "oracle operators are capped at n = {MAX_ORACLE_DIM}, got {}",
                matrix.nrows()
            )));
        }
        if matrix.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::DimensionMismatch("non-finite entry".into()));
        }
        Ok(Self { matrix })
    }

    pub fn from_rows(n: usize, rows: &[c64]) -> Result<Self> {
        if rows.len() != n * n {
            return Err(Error::DimensionMismatch(format!("{} entries for n = {n}", rows.len())));
        }
        Self::new(CMatrix::from_row_slice(n, n, rows))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn eigenvalues(&self) -> Result<Vec<c64>> {
        linalg::eigenvalues(&self.matrix)
    }

    fn shifted(&self, z: c64) -> CMatrix {
        let mut m = -self.matrix.clone();
        for i in 0..self.dim() {
            m[(i, i)] += z;
        }
        m
    }
}

/// Column span with Euclidean-orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    vectors: CMatrix,
}

impl SubspaceBasis {
    /// Orthonormal basis for the span of `m`'s columns.
    pub fn span_of(m: &CMatrix, tol: f64) -> Self {
        Self { vectors: linalg::range_basis(m, tol) }
    }

    pub fn empty(n: usize) -> Self {
        Self { vectors: CMatrix::zeros(n, 0) }
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn vectors(&self) -> &CMatrix {
        &self.vectors
    }

    pub fn gap(&self, other: &SubspaceBasis) -> f64 {
        linalg::orthonormal_gap(&self.vectors, &other.vectors)
    }

    /// Direct sum (span of the union).
    pub fn sum(parts: &[SubspaceBasis], n: usize, tol: f64) -> Self {
        let total: usize = parts.iter().map(|p| p.dim()).sum();
        if total == 0 {
            return Self::empty(n);
        }
        let mut m = CMatrix::zeros(n, total);
        let mut col = 0;
        for p in parts {
            m.columns_mut(col, p.dim()).copy_from(&p.vectors);
            col += p.dim();
        }
        Self::span_of(&m, tol)
    }
}

/// `∪ₙ ker (A − λ)ⁿ`, grown one step at a time: given an orthonormal basis
/// `K` of `ker (A − λ)ʲ`, the next space is the kernel of `(I − KK^H)(A − λ)`.
pub fn generalized_eigenspace(a: &DenseOperator, lambda: c64, tol: f64) -> SubspaceBasis {
    let n = a.dim();
    let b = -a.shifted(lambda);
    // rank is judged against the size of A as well, so that a shift which
    // nearly annihilates A (A ≈ λI) yields the whole space
    let scale = linalg::spectral_norm(&b).max(linalg::spectral_norm(a.matrix()));
    if scale <= f64::MIN_POSITIVE {
        return SubspaceBasis { vectors: CMatrix::identity(n, n) };
    }
    let thresh = tol * scale;
    let mut k = linalg::kernel_basis_abs(&b, thresh);
    if k.ncols() == 0 {
        return SubspaceBasis::empty(n);
    }
    loop {
        let proj = CMatrix::identity(n, n) - &k * k.adjoint();
        let next = linalg::kernel_basis_abs(&(proj * &b), thresh);
        if next.ncols() <= k.ncols() {
            break;
        }
        k = next;
    }
    SubspaceBasis { vectors: k }
}

/// `r(A) = ω₀I + Σⱼ ωⱼ (zⱼI − A)⁻¹` by dense LU solves.
pub fn apply_filter(a: &DenseOperator, filter: &RationalFilter) -> Result<DenseOperator> {
    let n = a.dim();
    let mut out = CMatrix::identity(n, n) * filter.omega0();
    let eye = CMatrix::identity(n, n);
    for p in filter.poles() {
        let res = resolvent(a, p.z, &eye)?;
        out += res * p.weight;
    }
    DenseOperator::new(out)
}

fn resolvent(a: &DenseOperator, z: c64, rhs: &CMatrix) -> Result<CMatrix> {
    let shifted = a.shifted(z);
    let lu = shifted.clone().lu();
    let sol = lu.solve(rhs).ok_or_else(|| Error::SingularShift {
        z,
        reason: "zI − A is singular".into(),
    })?;
    // guard against pivots that are zero only up to rounding
    let smax = linalg::spectral_norm(&shifted);
    let inv_norm = linalg::spectral_norm(&sol) / linalg::spectral_norm(rhs).max(f64::MIN_POSITIVE);
    if !inv_norm.is_finite() || smax * inv_norm > 1e15 {
        return Err(Error::SingularShift { z, reason: format!("condition ≈ {:e}", smax * inv_norm) });
    }
    Ok(sol)
}

#[derive(Debug, Clone)]
pub struct RieszProjection {
    pub projector: CMatrix,
    pub max_resolvent_norm: f64,
    /// Set when some resolvent norm on the contour exceeds
    /// [`NEAR_CONTOUR_RESOLVENT`].
    pub near_contour: bool,
}

/// Trapezoidal approximation of `(2πi)⁻¹ ∮_Γ (z − A)⁻¹ dz` on a circle:
/// with `z(θ) = O + Rφe^{iθ}`, `dz = iRφe^{iθ}dθ`.
pub fn riesz_projector(a: &DenseOperator, contour: &ContourCircle) -> Result<RieszProjection> {
    let n = a.dim();
    let eye = CMatrix::identity(n, n);
    let nq = contour.nquad;
    let mut p = CMatrix::zeros(n, n);
    let mut max_norm: f64 = 0.0;
    for j in 0..nq {
        let theta = 2.0 * std::f64::consts::PI * j as f64 / nq as f64;
        let e = c64::from_polar(1.0, theta) * contour.phase * contour.radius;
        let z = contour.center + e;
        let res = resolvent(a, z, &eye)?;
        max_norm = max_norm.max(linalg::spectral_norm(&res));
        p += res * (e / nq as f64);
    }
    Ok(RieszProjection {
        projector: p,
        max_resolvent_norm: max_norm,
        near_contour: max_norm > NEAR_CONTOUR_RESOLVENT,
    })
}

#[derive(Debug, Clone)]
pub struct MappingCheck {
    pub mu: c64,
    /// Gap between `E_μ(r(A))` and the direct sum of `E_λ^∞(A)`.
    pub gap: f64,
    pub filtered_dim: usize,
    /// `(λ, dim E_λ^∞(A))` over the distinct inverse images of `μ`.
    pub preimage_dims: Vec<(c64, usize)>,
}

impl MappingCheck {
    pub fn multiplicities_match(&self) -> bool {
        self.filtered_dim == self.preimage_dims.iter().map(|&(_, d)| d).sum::<usize>()
    }
}

/// Computes both sides of `E_μ(r(A)) = ⊕_{λ ∈ r⁻¹(μ)} E_λ^∞(A)` independently
/// and reports their gap and dimensions.
pub fn verify_mapping_lemma(
    a: &DenseOperator,
    filter: &RationalFilter,
    mu: c64,
    tol: f64,
) -> Result<MappingCheck> {
    let n = a.dim();
    let ra = apply_filter(a, filter)?;
    let left = generalized_eigenspace(&ra, mu, tol);
    let inv = filter.inverse_image(mu, DEFAULT_TOL_ROOT)?;
    let mut parts = Vec::new();
    let mut preimage_dims = Vec::new();
    for lam in inv.distinct_roots(1e-6) {
        let e = generalized_eigenspace(a, lam, tol);
        preimage_dims.push((lam, e.dim()));
        parts.push(e);
    }
    let right = SubspaceBasis::sum(&parts, n, 1e-10);
    Ok(MappingCheck { mu, gap: left.gap(&right), filtered_dim: left.dim(), preimage_dims })
}

/// `m(μ, r(A)) = Σ_{λ ∈ r⁻¹(μ)} m(λ, A)`.
pub fn multiplicity_sum_check(
    a: &DenseOperator,
    filter: &RationalFilter,
    mu: c64,
    tol: f64,
) -> Result<bool> {
    Ok(verify_mapping_lemma(a, filter, mu, tol)?.multiplicities_match())
}

/// Matrices and filters used as fixed test cases.
pub mod examples {
    use super::*;
    use crate::filters::Pole;
    use crate::I;

    /// `diag(−1/2, J₂(1/2))`.
    pub fn jordan_3x3() -> DenseOperator {
        let z = c64::from(0.0);
        let h = c64::from(0.5);
        DenseOperator::from_rows(3, &[-h, z, z, z, h, c64::from(1.0), z, z, h]).unwrap()
    }

    /// `diag(10 − i, J₂(10 + i))`.
    pub fn cayley_3x3() -> DenseOperator {
        let z = c64::from(0.0);
        let a = c64::new(10.0, -1.0);
        let b = c64::new(10.0, 1.0);
        DenseOperator::from_rows(3, &[a, z, z, z, b, c64::from(1.0), z, z, b]).unwrap()
    }

    /// `r(z) = −1/(z² + 1) = (−i/2)/(i − z) + (i/2)/(−i − z)`.
    pub fn inverse_quadratic() -> RationalFilter {
        RationalFilter::new(c64::from(0.0), vec![Pole::new(I, -0.5 * I), Pole::new(-I, 0.5 * I)])
            .unwrap()
    }
}

/// A matrix with prescribed Jordan structure together with a filter and a
/// mapped eigenvalue.
#[derive(Debug, Clone)]
pub struct JordanInstance {
    pub operator: DenseOperator,
    pub eigenvalues: Vec<c64>,
    /// Jordan block sizes per eigenvalue.
    pub blocks: Vec<Vec<usize>>,
    pub filter: RationalFilter,
    pub lambda: c64,
    pub mu: c64,
}

impl JordanInstance {
    pub fn algebraic_multiplicity(&self, idx: usize) -> usize {
        self.blocks[idx].iter().sum()
    }
}

/// Random `A = P J P⁻¹` with `n ≤ max_n`, distinct eigenvalues at least 0.3
/// apart, Jordan blocks of size ≤ 3 and `cond(P) ≤ 4`; a random simple-pole
/// filter with poles at least 0.1 from the spectrum, and `μ = r(λ)` for a
/// random eigenvalue `λ`, resampled until the other eigenvalues map at least
/// `1e-3` away from `μ` and `μ` is away from `ω₀`.
pub fn random_jordan_instance<R: Rng>(rng: &mut R, max_n: usize) -> JordanInstance {
    use crate::filters::Pole;
    let max_n = max_n.clamp(2, MAX_ORACLE_DIM);
    loop {
        let n = rng.random_range(2..=max_n);
        let mut sizes = Vec::new();
        let mut left = n;
        while left > 0 {
            let s = rng.random_range(1..=left.min(3));
            sizes.push(s);
            left -= s;
        }
        // group blocks into eigenvalues: a block joins the previous
        // eigenvalue with probability 1/4
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for s in sizes {
            match blocks.last_mut() {
                Some(b) if rng.random_bool(0.25) => b.push(s),
                _ => blocks.push(vec![s]),
            }
        }
        let mut eigenvalues: Vec<c64> = Vec::new();
        while eigenvalues.len() < blocks.len() {
            let cand = c64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            if eigenvalues.iter().all(|&e| (e - cand).norm() >= 0.3) {
                eigenvalues.push(cand);
            }
        }
        let mut j = CMatrix::zeros(n, n);
        let mut pos = 0;
        for (lam, bs) in eigenvalues.iter().zip(&blocks) {
            for &s in bs {
                for k in 0..s {
                    j[(pos + k, pos + k)] = *lam;
                    if k + 1 < s {
                        j[(pos + k, pos + k + 1)] = c64::from(1.0);
                    }
                }
                pos += s;
            }
        }
        let u = linalg::random_unitary(rng, n);
        let v = linalg::random_unitary(rng, n);
        let s = CMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| {
            c64::from(rng.random_range(0.5..2.0))
        }));
        let p = &u * s * &v;
        let pinv = match p.clone().try_inverse() {
            Some(x) => x,
            None => continue,
        };
        let a = &p * j * pinv;

        let npoles = rng.random_range(1..=4);
        let mut poles: Vec<Pole> = Vec::new();
        while poles.len() < npoles {
            let z = c64::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            if eigenvalues.iter().all(|&e| (e - z).norm() >= 0.1)
                && poles.iter().all(|q| (q.z - z).norm() >= 0.1)
            {
                let w = c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                poles.push(Pole::new(z, w));
            }
        }
        let omega0 = c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let filter = RationalFilter::new(omega0, poles).expect("distinct poles");
        let k = rng.random_range(0..eigenvalues.len());
        let lambda = eigenvalues[k];
        let mu = filter.eval(lambda).expect("poles avoid the spectrum");
        if (mu - omega0).norm() < 1e-3 {
            continue;
        }
        let separated = eigenvalues.iter().enumerate().all(|(i, &e)| {
            i == k || (filter.eval(e).expect("poles avoid the spectrum") - mu).norm() >= 1e-3
        });
        if !separated {
            continue;
        }
        let operator = DenseOperator::new(a).expect("finite, small");
        return JordanInstance { operator, eigenvalues, blocks, filter, lambda, mu };
    }
}
