//! Small dense complex linear algebra shared by the oracle, the Ritz
//! extraction and the gap computations.

use nalgebra::{DMatrix, DVector, Schur};

use crate::{c64, Error, Result};

pub type CMatrix = DMatrix<c64>;
pub type CVector = DVector<c64>;

const SCHUR_MAX_ITER: usize = 10_000;

/// Eigenvalues of a general complex square matrix (Schur form).
pub fn eigenvalues(m: &CMatrix) -> Result<Vec<c64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "eigenvalues of a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let scale = m.iter().map(|c| c.norm()).fold(f64::MIN_POSITIVE, f64::max);
    let scaled = m / c64::from(scale);
    let schur = Schur::try_new(scaled, f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or_else(|| Error::Eigen("Schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    Ok((0..t.nrows()).map(|i| t[(i, i)] * scale).collect())
}

/// One-sided (Hestenes) Jacobi SVD of a tall matrix. Returns the rotated
/// columns `A V` (norms are the singular values) and the unitary `V`.
fn jacobi_columns(a: &CMatrix) -> (CMatrix, CMatrix) {
    let n = a.ncols();
    let mut u = a.clone();
    let mut v = CMatrix::identity(n, n);
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = u.column(p).norm_squared();
                let beta = u.column(q).norm_squared();
                let gamma = u.column(p).dotc(&u.column(q));
                let g = gamma.norm();
                if g <= f64::EPSILON * (alpha * beta).sqrt() || g <= f64::MIN_POSITIVE {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for m in [&mut u, &mut v] {
                    for i in 0..m.nrows() {
                        let xp = m[(i, p)];
                        let xq = m[(i, q)] * phase.conj();
                        m[(i, p)] = xp * c - xq * s;
                        m[(i, q)] = xp * s + xq * c;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    (u, v)
}

fn padded_tall(m: &CMatrix) -> CMatrix {
    let (r, c) = m.shape();
    if r >= c {
        return m.clone();
    }
    let mut p = CMatrix::zeros(c, c);
    p.view_mut((0, 0), (r, c)).copy_from(m);
    p
}

/// Singular values (descending) and the full set of right singular vectors
/// as columns, ordered to match.
pub fn svd_full(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let c = m.ncols();
    if c == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    let (u, v) = jacobi_columns(&padded_tall(m));
    let norms: Vec<f64> = (0..c).map(|j| u.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let sigma = order.iter().map(|&i| norms[i]).collect();
    let v = CMatrix::from_fn(c, c, |i, k| v[(i, order[k])]);
    (sigma, v)
}

/// Orthonormal basis of the numerical kernel: right singular vectors whose
/// singular value is at most `tol * sigma_max`. A zero matrix has a full
/// kernel.
pub fn kernel_basis(m: &CMatrix, tol: f64) -> CMatrix {
    let (sigma, _) = svd_full(m);
    let smax = sigma.first().copied().unwrap_or(0.0);
    kernel_basis_abs(m, tol * smax)
}

/// Kernel basis with an absolute singular value threshold.
pub fn kernel_basis_abs(m: &CMatrix, threshold: f64) -> CMatrix {
    let n = m.ncols();
    if n == 0 {
        return CMatrix::zeros(0, 0);
    }
    let (sigma, v) = svd_full(m);
    let rank = sigma.iter().filter(|&&s| s > threshold && s > f64::MIN_POSITIVE).count();
    v.columns(rank, n - rank).into_owned()
}

/// Orthonormal basis (Euclidean) of the column span, rank decided by
/// `tol * sigma_max`.
pub fn range_basis(m: &CMatrix, tol: f64) -> CMatrix {
    if m.ncols() == 0 || m.nrows() == 0 {
        return CMatrix::zeros(m.nrows(), 0);
    }
    // Jacobi on the Hermitian transpose keeps the left vectors exact: the
    // columns of V span the row space of m^H.
    let (sigma, v) = svd_full(&m.adjoint());
    let smax = sigma.first().copied().unwrap_or(0.0);
    if smax <= f64::MIN_POSITIVE {
        return CMatrix::zeros(m.nrows(), 0);
    }
    let rank = sigma.iter().filter(|&&s| s > tol * smax).count();
    v.columns(0, rank).into_owned()
}

/// Orthonormalizes the columns of `y` in the inner product `(x, y) = y^H G x`
/// where `gram` applies `G` to a block. Columns whose Gram eigenvalue falls
/// below `tol * max` are dropped. Runs two passes.
pub fn orthonormalize_with<F>(y: &CMatrix, gram: F, tol: f64) -> Result<CMatrix>
where
    F: Fn(&CMatrix) -> CMatrix,
{
    let mut q = y.clone();
    for _ in 0..2 {
        let g = q.adjoint() * gram(&q);
        let g = hermitian_part(&g);
        let eig = g.symmetric_eigen();
        let lmax = eig.eigenvalues.max();
        if !(lmax > 0.0) || !lmax.is_finite() {
            return Err(Error::DependentBasis("zero or non-finite Gram matrix".into()));
        }
        let keep: Vec<usize> = (0..eig.eigenvalues.len())
            .filter(|&i| eig.eigenvalues[i] > tol * lmax)
            .collect();
        let mut w = CMatrix::zeros(q.ncols(), keep.len());
        for (k, &i) in keep.iter().enumerate() {
            let s = 1.0 / eig.eigenvalues[i].sqrt();
            for r in 0..q.ncols() {
                w[(r, k)] = eig.eigenvectors[(r, i)] * s;
            }
        }
        q = &q * w;
    }
    Ok(q)
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c64::from(0.5)
}

/// Largest eigenpair of the Hermitian pencil `G x = λ M x` with `M`
/// positive definite, via `M = C C^H` and the Hermitian matrix
/// `C^{-1} G C^{-H}`.
pub fn hermitian_pencil_max(g: &CMatrix, m: &CMatrix) -> Result<(f64, CVector)> {
    let n = g.nrows();
    if n == 0 || g.shape() != m.shape() || n != g.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "pencil shapes {:?} and {:?}",
            g.shape(),
            m.shape()
        )));
    }
    let chol = hermitian_part(m)
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("pencil mass matrix".into()))?;
    let c = chol.l();
    let cinv = c
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NotPositiveDefinite("singular Cholesky factor".into()))?;
    let reduced = hermitian_part(&(&cinv * hermitian_part(g) * cinv.adjoint()));
    let eig = reduced.symmetric_eigen();
    let imax = eig.eigenvalues.imax();
    let y = eig.eigenvectors.column(imax).into_owned();
    let x = cinv.adjoint() * y;
    Ok((eig.eigenvalues[imax], x))
}

/// Largest singular value.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    svd_full(m).0.first().copied().unwrap_or(0.0)
}

/// Gap between the column spans of two matrices with Euclidean-orthonormal
/// columns: `max(‖(I − WW^H)U‖, ‖(I − UU^H)W‖)`. Spans of different
/// dimension are at gap 1.
pub fn orthonormal_gap(u: &CMatrix, w: &CMatrix) -> f64 {
    if u.ncols() != w.ncols() {
        return 1.0;
    }
    if u.ncols() == 0 {
        return 0.0;
    }
    let d_uw = spectral_norm(&(u - w * (w.adjoint() * u)));
    let d_wu = spectral_norm(&(w - u * (u.adjoint() * w)));
    d_uw.max(d_wu).min(1.0)
}

/// Solves `m x = b` by dense LU, erroring on exact singularity.
pub fn lu_solve(m: &CMatrix, b: &CMatrix) -> Option<CMatrix> {
    m.clone().lu().solve(b)
}

/// Entries uniform on `[-1, 1] + i[-1, 1]`.
pub fn random_matrix<R: rand::Rng>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

/// Random unitary matrix: left singular vectors of a random matrix.
pub fn random_unitary<R: rand::Rng>(rng: &mut R, n: usize) -> CMatrix {
    let a = random_matrix(rng, n, n);
    let q = range_basis(&a, 1e-12);
    debug_assert_eq!(q.ncols(), n);
    q
}
