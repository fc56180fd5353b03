//! Discrete resolvents `R_h(z)` with per-shift factorization caches.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use crate::exec::Exec;
use crate::fem::lagrange::{FieldVector, Forms, LagrangeSpace, OperatorSpec};
use crate::linalg::CMatrix;
use crate::sparse::{BandedLu, CsrMatrix};
use crate::{c64, Error, Result};

/// Factorizations whose 1-norm condition estimate exceeds this are rejected.
pub const CONDITION_LIMIT: f64 = 1e12;

pub(crate) fn shift_key(z: c64) -> (u64, u64) {
    (z.re.to_bits(), z.im.to_bits())
}

/// Thread-safe cache of factorizations keyed by the shift.
#[derive(Debug)]
pub(crate) struct FactorCache<F> {
    map: RwLock<HashMap<(u64, u64), Arc<F>>>,
}

impl<F> Default for FactorCache<F> {
    fn default() -> Self {
        Self { map: RwLock::new(HashMap::new()) }
    }
}

impl<F> FactorCache<F> {
    pub(crate) fn get_or_try<B>(&self, z: c64, build: B) -> Result<Arc<F>>
    where
        B: FnOnce() -> Result<F>,
    {
        if let Some(f) = self.map.read().expect("cache lock").get(&shift_key(z)) {
            return Ok(f.clone());
        }
        let f = Arc::new(build()?);
        self.map.write().expect("cache lock").entry(shift_key(z)).or_insert(f.clone());
        Ok(f)
    }

    pub(crate) fn len(&self) -> usize {
        self.map.read().expect("cache lock").len()
    }
}

/// Factors `a` and rejects numerically singular or ill-conditioned shifts.
pub(crate) fn guarded_factor(a: &CsrMatrix, z: c64) -> Result<BandedLu> {
    let lu = BandedLu::factor(a).map_err(|e| match e {
        Error::SingularMatrix { pivot } => Error::SingularShift { z, reason: format!("zero pivot in column {pivot}") },
        other => other,
    })?;
    let condition = lu.condition_estimate();
    if !(condition <= CONDITION_LIMIT) {
        return Err(Error::IllConditioned { z, condition });
    }
    Ok(lu)
}

pub(crate) fn solve_columns(lu: &BandedLu, rhs: &CMatrix, exec: Exec) -> CMatrix {
    let cols = exec.map_range(rhs.ncols(), |j| {
        let b: Vec<c64> = rhs.column(j).iter().copied().collect();
        lu.solve(&b)
    });
    let mut out = CMatrix::zeros(rhs.nrows(), rhs.ncols());
    for (j, c) in cols.into_iter().enumerate() {
        out.column_mut(j).copy_from_slice(&c);
    }
    out
}

/// Galerkin resolvent: `u = R_h(z) f` solves `(z M − A) u = M f`, the
/// discrete form of `z (u, v) − (∇u, ∇v) − (V u, v) = (f, v)`.
#[derive(Debug)]
pub struct CgResolvent {
    space: Arc<LagrangeSpace>,
    op: OperatorSpec,
    forms: Forms,
    gram: CsrMatrix,
    exec: Exec,
    cache: FactorCache<BandedLu>,
}

impl CgResolvent {
    pub fn new(space: Arc<LagrangeSpace>, op: OperatorSpec, exec: Exec) -> Self {
        let forms = space.assemble(&op, exec);
        let gram = forms.h1_gram();
        Self { space, op, forms, gram, exec, cache: FactorCache::default() }
    }

    pub fn space(&self) -> &Arc<LagrangeSpace> {
        &self.space
    }

    pub fn op(&self) -> &OperatorSpec {
        &self.op
    }

    pub fn forms(&self) -> &Forms {
        &self.forms
    }

    /// `H¹` Gram matrix.
    pub fn gram(&self) -> &CsrMatrix {
        &self.gram
    }

    pub fn exec(&self) -> Exec {
        self.exec
    }

    pub fn cached_factorizations(&self) -> usize {
        self.cache.len()
    }

    /// Factorization of `z M − A`, cached.
    pub fn factor(&self, z: c64) -> Result<Arc<BandedLu>> {
        self.cache.get_or_try(z, || {
            let shifted = CsrMatrix::linear_combination(&[(z, &self.forms.mass), (c64::from(-1.0), &self.forms.stiffness)]);
            guarded_factor(&shifted, z)
        })
    }

    /// Factors all shifts up front, in parallel under `exec`.
    pub fn prepare(&self, zs: &[c64]) -> Result<()> {
        self.exec.try_map_range(zs.len(), |k| self.factor(zs[k]).map(|_| ()))?;
        Ok(())
    }

    /// `R_h(z)` applied to the columns of `f`.
    pub fn solve_block(&self, z: c64, f: &CMatrix) -> Result<CMatrix> {
        if f.nrows() != self.space.ndofs() {
            return Err(Error::DimensionMismatch(format!(
                "block with {} rows for {} dofs",
                f.nrows(),
                self.space.ndofs()
            )));
        }
        let lu = self.factor(z)?;
        let rhs = self.forms.mass.mul_dense(f);
        Ok(solve_columns(&lu, &rhs, self.exec))
    }

    pub fn solve(&self, z: c64, f: &FieldVector) -> Result<FieldVector> {
        self.space.check(f)?;
        let block = CMatrix::from_column_slice(f.len(), 1, f.coeffs.as_slice());
        let u = self.solve_block(z, &block)?;
        self.space.field(u.column(0).into_owned())
    }
}

/// `R(z) = (z − A)⁻¹` for a dense matrix, with cached LU factors.
#[derive(Debug)]
pub struct DenseResolvent {
    a: CMatrix,
    cache: FactorCache<nalgebra::LU<c64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl DenseResolvent {
    pub fn new(a: CMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch("dense resolvent needs a square matrix".into()));
        }
        Ok(Self { a, cache: FactorCache::default() })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.a
    }

    pub fn solve_block(&self, z: c64, f: &CMatrix) -> Result<CMatrix> {
        let n = self.a.nrows();
        let lu = self.cache.get_or_try(z, || {
            let shifted = CMatrix::identity(n, n) * z - &self.a;
            let lu = shifted.clone().lu();
            let inv = lu.try_inverse().ok_or_else(|| Error::SingularShift { z, reason: "singular LU".into() })?;
            let norm1 = |m: &CMatrix| {
                (0..m.ncols()).map(|j| m.column(j).iter().map(|v| v.norm()).sum::<f64>()).fold(0.0, f64::max)
            };
            let condition = norm1(&shifted) * norm1(&inv);
            if !(condition <= CONDITION_LIMIT) {
                return Err(Error::IllConditioned { z, condition });
            }
            Ok(shifted.lu())
        })?;
        lu.solve(f).ok_or_else(|| Error::SingularShift { z, reason: "singular LU".into() })
    }
}
