//! The cluster gap estimator: with `G_ij = (ℰeʲ, ℰeⁱ)_Y` and
//! `M_ij = (eʲ, eⁱ)_V` over a basis of `E_h`, the largest eigenpair
//! `(λ̂, x̂)` of `G x = λ M x` gives the worst direction
//! `ê_h = Σ x̂ᵢ eⁱ / ‖Σ x̂ᵢ eⁱ‖_V`, and `‖ℰ ê_h‖_Y = √λ̂` bounds the gap
//! between `E_h` and the exact cluster eigenspace up to a constant.
//! Localizing `‖ℰ ê_h‖_Y` over elements gives the marking indicators `η_K`.
//!
//! Also: `V`-gaps between subspaces and Hausdorff distances between finite
//! sets, used for validation.

use std::fmt::Write as _;

use crate::estimators::{local_norms, y_inner, EstimatorField, SourceEstimator};
use crate::linalg::{self, CMatrix, CVector};
use crate::{c64, Error, Result};

const ORTHO_TOL: f64 = 1e-13;

/// `max(sup_{a∈S₁} inf_{b∈S₂} |a − b|, sup_{b∈S₂} inf_{a∈S₁} |a − b|)`.
pub fn hausdorff(s1: &[c64], s2: &[c64]) -> Result<f64> {
    if s1.is_empty() || s2.is_empty() {
        return Err(Error::EmptySet);
    }
    let directed = |a: &[c64], b: &[c64]| {
        a.iter()
            .map(|x| b.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    Ok(directed(s1, s2).max(directed(s2, s1)))
}

/// `G_ij = (ℰeʲ, ℰeⁱ)_Y` and `M_ij = (eʲ, eⁱ)_V` = `(Bᴴ Gram B)_ij`.
pub fn assemble_gm<F>(fields: &[EstimatorField], basis: &CMatrix, gram: F) -> Result<(CMatrix, CMatrix)>
where
    F: Fn(&CMatrix) -> CMatrix,
{
    let l = basis.ncols();
    if l == 0 {
        return Err(Error::EmptySet);
    }
    if fields.len() != l {
        return Err(Error::DimensionMismatch(format!("{} estimator fields for {l} basis vectors", fields.len())));
    }
    let mut g = CMatrix::zeros(l, l);
    for i in 0..l {
        for j in 0..=i {
            let v = y_inner(&fields[j], &fields[i])?;
            g[(i, j)] = v;
            g[(j, i)] = v.conj();
        }
    }
    let m = linalg::hermitian_part(&(basis.adjoint() * gram(basis)));
    Ok((g, m))
}

/// Largest eigenpair of `G x = λ M x`; `λ̂` is clamped at zero.
pub fn worst_direction(g: &CMatrix, m: &CMatrix) -> Result<(f64, CVector)> {
    let (lambda, x) = linalg::hermitian_pencil_max(g, m)?;
    Ok((lambda.max(0.0), x))
}

/// `Σ xᵢ eⁱ` normalized in `V`, as coefficients.
pub fn ehat<F>(basis: &CMatrix, xhat: &CVector, gram: F) -> Result<CVector>
where
    F: Fn(&CMatrix) -> CMatrix,
{
    if basis.ncols() != xhat.len() {
        return Err(Error::DimensionMismatch(format!("{} coefficients for {} basis vectors", xhat.len(), basis.ncols())));
    }
    let e = basis * xhat;
    let col = CMatrix::from_column_slice(e.len(), 1, e.as_slice());
    let norm = (col.adjoint() * gram(&col))[(0, 0)].re.max(0.0).sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::DependentBasis("worst direction combines to zero".into()));
    }
    Ok(e / c64::from(norm))
}

fn v_norm<F: Fn(&CMatrix) -> CMatrix>(x: &CMatrix, gram: &F) -> f64 {
    if x.ncols() == 0 {
        return 0.0;
    }
    let g = linalg::hermitian_part(&(x.adjoint() * gram(x)));
    g.symmetric_eigen().eigenvalues.max().max(0.0).sqrt()
}

/// `gap_V(U, W) = max(δ(U, W), δ(W, U))` with `δ(U, W) = ‖(I − Q_W) Q_U‖_V`,
/// for the column spans of `u` and `w`.
pub fn subspace_gap<F>(u: &CMatrix, w: &CMatrix, gram: F) -> Result<f64>
where
    F: Fn(&CMatrix) -> CMatrix,
{
    let qu = orthonormal(u, &gram)?;
    let qw = orthonormal(w, &gram)?;
    let delta = |a: &CMatrix, b: &CMatrix| v_norm(&(a - b * (b.adjoint() * gram(a))), &gram);
    Ok(delta(&qu, &qw).max(delta(&qw, &qu)).min(1.0))
}

fn orthonormal<F: Fn(&CMatrix) -> CMatrix>(x: &CMatrix, gram: &F) -> Result<CMatrix> {
    if x.ncols() == 0 {
        return Err(Error::EmptySet);
    }
    let q = linalg::orthonormalize_with(x, gram, ORTHO_TOL)?;
    if q.ncols() != x.ncols() {
        return Err(Error::DependentBasis(format!("{} of {} columns independent", q.ncols(), x.ncols())));
    }
    Ok(q)
}

/// Gap between the span of `u` and an exactly known space `W = span{w_k}`
/// that is not in the discrete space. `cross[(i, k)] = (φᵢ, w_k)_V` for the
/// discrete basis functions `φᵢ`, `w_gram[(k, l)] = (w_l, w_k)_V`.
pub fn analytic_gap<F>(u: &CMatrix, gram: F, cross: &CMatrix, w_gram: &CMatrix) -> Result<f64>
where
    F: Fn(&CMatrix) -> CMatrix,
{
    let qu = orthonormal(u, &gram)?;
    let k = w_gram.nrows();
    let l = qu.ncols();
    if cross.nrows() != u.nrows() || cross.ncols() != k || w_gram.ncols() != k {
        return Err(Error::DimensionMismatch("analytic gap data".into()));
    }
    // f[(k, j)] = (q_j, w_k)_V
    let f = cross.transpose() * &qu;
    let h = linalg::hermitian_part(w_gram);
    let hinv_f = linalg::lu_solve(&h, &f).ok_or_else(|| Error::NotPositiveDefinite("exact Gram".into()))?;
    // δ(U, W)² = λmax(I − Fᴴ H⁻¹ F)
    let proj = linalg::hermitian_part(&(f.adjoint() * hinv_f));
    let d_uw = (CMatrix::identity(l, l) - proj).symmetric_eigen().eigenvalues.max();
    // δ(W, U)² = max aᴴ(H − F Fᴴ)a / aᴴHa
    let (d_wu, _) = linalg::hermitian_pencil_max(&(&h - &f * f.adjoint()), &h)?;
    Ok(d_uw.max(d_wu).max(0.0).sqrt().min(1.0))
}

#[derive(Debug, Clone)]
pub struct GapEstimate {
    pub g: CMatrix,
    pub m: CMatrix,
    pub lambda_hat: f64,
    pub xhat: CVector,
    /// Coefficients of `ê_h`, unit `V` norm.
    pub ehat: CVector,
    /// `‖ℰ ê_h‖_Y`.
    pub eta_global: f64,
    /// `η_K` per element.
    pub eta_local: Vec<f64>,
    pub eta_max: f64,
    /// `(Σ_K η_K²)^{1/2}`.
    pub eta_l2: f64,
}

impl GapEstimate {
    /// Text summary; with `per_element` the `η_K` table is appended.
    pub fn report(&self, per_element: bool) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dim        = {}", self.g.nrows());
        let _ = writeln!(s, "lambda_hat = {:.12e}", self.lambda_hat);
        let _ = writeln!(s, "eta_global = {:.12e}", self.eta_global);
        let _ = writeln!(s, "eta_max    = {:.12e}", self.eta_max);
        let _ = writeln!(s, "eta_l2     = {:.12e}", self.eta_l2);
        if per_element {
            let _ = writeln!(s, "element eta");
            for (k, e) in self.eta_local.iter().enumerate() {
                let _ = writeln!(s, "{k} {e:.12e}");
            }
        }
        s
    }
}

/// Runs the estimator on each basis column, solves the small pencil,
/// and localizes `ℰ ê_h`.
pub fn estimate_cluster_gap<F>(basis: &CMatrix, gram: F, estimator: &dyn SourceEstimator) -> Result<GapEstimate>
where
    F: Fn(&CMatrix) -> CMatrix,
{
    if basis.ncols() == 0 {
        return Err(Error::EmptySet);
    }
    let fields = estimator.estimate_block(basis)?;
    let (g, m) = assemble_gm(&fields, basis, &gram)?;
    let (lambda_hat, xhat) = worst_direction(&g, &m)?;
    let e = ehat(basis, &xhat, &gram)?;
    let field = estimator.estimate_block(&CMatrix::from_column_slice(e.len(), 1, e.as_slice()))?.remove(0);
    let eta_local = local_norms(&field);
    let eta_l2 = eta_local.iter().map(|x| x * x).sum::<f64>().sqrt();
    let eta_max = eta_local.iter().copied().fold(0.0, f64::max);
    Ok(GapEstimate { g, m, lambda_hat, xhat, ehat: e, eta_global: field.norm(), eta_local, eta_max, eta_l2 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hausdorff_examples() {
        let a = [c64::from(0.0)];
        let b = [c64::from(3.0), c64::new(0.0, 4.0)];
        assert_eq!(hausdorff(&a, &b).unwrap(), 4.0);
        assert_eq!(hausdorff(&b, &b).unwrap(), 0.0);
        assert!(matches!(hausdorff(&[], &b), Err(Error::EmptySet)));
    }

    #[test]
    fn planar_rotation_gap() {
        let alpha: f64 = 0.3;
        let u = CMatrix::from_column_slice(2, 1, &[c64::from(1.0), c64::from(0.0)]);
        let w = CMatrix::from_column_slice(2, 1, &[c64::from(alpha.cos()), c64::from(alpha.sin())]);
        let gap = subspace_gap(&u, &w, |x: &CMatrix| x.clone()).unwrap();
        assert!((gap - alpha.sin()).abs() < 1e-14);
        assert!(subspace_gap(&u, &u, |x: &CMatrix| x.clone()).unwrap() < 1e-15);
    }

    #[test]
    fn diagonal_pencil() {
        let g = CMatrix::from_diagonal(&CVector::from_vec(vec![c64::from(1.0), c64::from(4.0)]));
        let (l, x) = worst_direction(&g, &CMatrix::identity(2, 2)).unwrap();
        assert!((l - 4.0).abs() < 1e-14);
        assert!(x[0].norm() < 1e-14 && (x[1].norm() - 1.0).abs() < 1e-14);
    }
}
