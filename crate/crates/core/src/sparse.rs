//! Complex sparse matrices (CSR) and a direct solver: reverse Cuthill–McKee
//! reordering followed by banded LU with partial pivoting.

use std::collections::VecDeque;

use crate::{c64, linalg::CMatrix, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<c64>,
}

/// Coordinate-format accumulator; duplicates are summed on [`build`](Self::build).
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, c64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, entries: Vec::new() }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self { nrows, ncols, entries: Vec::with_capacity(cap) }
    }

    pub fn push(&mut self, i: usize, j: usize, v: c64) {
        debug_assert!(i < self.nrows && j < self.ncols);
        self.entries.push((i, j, v));
    }

    pub fn extend(&mut self, other: TripletBuilder) {
        self.entries.extend(other.entries);
    }

    pub fn build(mut self) -> CsrMatrix {
        self.entries.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut indptr = vec![0; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.entries.len());
        let mut values: Vec<c64> = Vec::with_capacity(self.entries.len());
        let mut last = None;
        for (i, j, v) in self.entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(j);
                values.push(v);
                indptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..self.nrows {
            indptr[i + 1] += indptr[i];
        }
        CsrMatrix { nrows: self.nrows, ncols: self.ncols, indptr, indices, values }
    }
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        TripletBuilder::new(nrows, ncols).build()
    }

    pub fn identity(n: usize) -> Self {
        let mut t = TripletBuilder::new(n, n);
        for i in 0..n {
            t.push(i, i, c64::from(1.0));
        }
        t.build()
    }

    pub fn from_dense(m: &CMatrix) -> Self {
        let mut t = TripletBuilder::new(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != c64::from(0.0) {
                    t.push(i, j, m[(i, j)]);
                }
            }
        }
        t.build()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[c64]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> c64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map(|k| vals[k]).unwrap_or_default()
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m[(i, j)] += v;
            }
        }
        m
    }

    pub fn mul_vec(&self, x: &[c64]) -> Vec<c64> {
        assert_eq!(x.len(), self.ncols, "matrix-vector dimension mismatch");
        (0..self.nrows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum()
            })
            .collect()
    }

    pub fn mul_dense(&self, x: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.nrows, x.ncols());
        for c in 0..x.ncols() {
            let col: Vec<c64> = x.column(c).iter().copied().collect();
            let y = self.mul_vec(&col);
            out.column_mut(c).copy_from_slice(&y);
        }
        out
    }

    /// `Σ αₖ Aₖ` for matrices of equal shape.
    pub fn linear_combination(terms: &[(c64, &CsrMatrix)]) -> CsrMatrix {
        let (r, c) = terms.first().map(|(_, m)| (m.nrows, m.ncols)).unwrap_or((0, 0));
        let cap = terms.iter().map(|(_, m)| m.nnz()).sum();
        let mut t = TripletBuilder::with_capacity(r, c, cap);
        for &(alpha, m) in terms {
            assert_eq!((m.nrows, m.ncols), (r, c), "linear_combination shape mismatch");
            for i in 0..r {
                let (cols, vals) = m.row(i);
                for (&j, &v) in cols.iter().zip(vals) {
                    t.push(i, j, alpha * v);
                }
            }
        }
        t.build()
    }

    pub fn adjoint(&self) -> CsrMatrix {
        let mut t = TripletBuilder::with_capacity(self.ncols, self.nrows, self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                t.push(j, i, v.conj());
            }
        }
        t.build()
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> f64 {
        let mut s = vec![0.0; self.ncols];
        for (&j, v) in self.indices.iter().zip(&self.values) {
            s[j] += v.norm();
        }
        s.into_iter().fold(0.0, f64::max)
    }

    /// Submatrix on the given rows and columns, in the given order.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let mut map = vec![usize::MAX; self.ncols];
        for (k, &j) in cols.iter().enumerate() {
            map[j] = k;
        }
        let mut t = TripletBuilder::new(rows.len(), cols.len());
        for (r, &i) in rows.iter().enumerate() {
            let (cs, vs) = self.row(i);
            for (&j, &v) in cs.iter().zip(vs) {
                if map[j] != usize::MAX {
                    t.push(r, map[j], v);
                }
            }
        }
        t.build()
    }
}

/// Reverse Cuthill–McKee ordering of the symmetrized sparsity graph;
/// `perm[new] = old`.
pub fn rcm_ordering(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for &j in a.row(i).0 {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for l in &mut adj {
        l.sort_unstable();
        l.dedup();
    }
    let deg: Vec<usize> = adj.iter().map(|l| l.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    let bfs_levels = |start: usize, mark: &[bool]| -> (usize, Vec<usize>) {
        let mut dist = vec![usize::MAX; n];
        let mut q = VecDeque::from([start]);
        dist[start] = 0;
        let mut last = vec![start];
        let mut depth = 0;
        while let Some(v) = q.pop_front() {
            if dist[v] > depth {
                depth = dist[v];
                last.clear();
            }
            if dist[v] == depth {
                last.push(v);
            }
            for &w in &adj[v] {
                if !mark[w] && dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    q.push_back(w);
                }
            }
        }
        (depth, last)
    };

    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        // pseudo-peripheral start node
        let mut start = seed;
        let (mut ecc, mut last) = bfs_levels(start, &visited);
        loop {
            let cand = *last.iter().min_by_key(|&&v| deg[v]).unwrap();
            let (e2, l2) = bfs_levels(cand, &visited);
            if e2 > ecc {
                start = cand;
                ecc = e2;
                last = l2;
            } else {
                break;
            }
        }
        let mut q = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = q.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (deg[w], w));
            for w in next {
                visited[w] = true;
                q.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Lower and upper bandwidth of `a` after the symmetric permutation `perm`.
pub fn bandwidth(a: &CsrMatrix, perm: &[usize]) -> (usize, usize) {
    let mut inv = vec![0; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let (mut kl, mut ku) = (0, 0);
    for i in 0..a.nrows() {
        for &j in a.row(i).0 {
            let (pi, pj) = (inv[i], inv[j]);
            if pi > pj {
                kl = kl.max(pi - pj);
            } else {
                ku = ku.max(pj - pi);
            }
        }
    }
    (kl, ku)
}

/// Banded LU factorization `P A Pᵀ = L U` with row pivoting inside the
/// band, where `P` is the RCM permutation.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    perm: Vec<usize>,
    kl: usize,
    ku: usize,
    width: usize,
    /// Row `i` stores columns `i - kl ..= i + kl + ku`.
    rows: Vec<c64>,
    /// Multipliers of step `k`, rows `k+1 ..= k+kl`.
    lower: Vec<c64>,
    pivots: Vec<usize>,
    norm1: f64,
}

impl BandedLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(Error::DimensionMismatch(format!("factor of a {}x{} matrix", n, a.ncols())));
        }
        let perm = rcm_ordering(a);
        let (kl, ku) = bandwidth(a, &perm);
        let width = 2 * kl + ku + 1;
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut rows = vec![c64::default(); n * width];
        for old_i in 0..n {
            let i = inv[old_i];
            let (cols, vals) = a.row(old_i);
            for (&old_j, &v) in cols.iter().zip(vals) {
                let j = inv[old_j];
                rows[i * width + j + kl - i] += v;
            }
        }
        let mut lower = vec![c64::default(); n * kl.max(1)];
        let mut pivots = vec![0; n];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = rows[k * width + kl].norm();
            for i in k + 1..=last {
                let v = rows[i * width + k + kl - i].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::SingularMatrix { pivot: k });
            }
            pivots[k] = p;
            let hi = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=hi {
                    rows.swap(k * width + j + kl - k, p * width + j + kl - p);
                }
            }
            let (head, tail) = rows.split_at_mut((k + 1) * width);
            let pivot_row = &head[k * width + kl..k * width + kl + (hi - k) + 1];
            let inv_pivot = 1.0 / pivot_row[0];
            for i in k + 1..=last {
                let row = &mut tail[(i - k - 1) * width..(i - k) * width];
                let off = k + kl - i;
                let f = row[off] * inv_pivot;
                lower[k * kl + (i - k - 1)] = f;
                row[off] = c64::default();
                if f == c64::default() {
                    continue;
                }
                for (dst, &src) in row[off + 1..off + 1 + (hi - k)].iter_mut().zip(&pivot_row[1..]) {
                    *dst -= f * src;
                }
            }
        }
        Ok(Self { n, perm, kl, ku, width, rows, lower, pivots, norm1: a.norm1() })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    /// Smallest pivot modulus of `U`.
    pub fn min_pivot(&self) -> f64 {
        (0..self.n).map(|k| self.rows[k * self.width + self.kl].norm()).fold(f64::INFINITY, f64::min)
    }

    fn solve_permuted(&self, x: &mut [c64]) {
        let (n, kl, w) = (self.n, self.kl, self.width);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk == c64::default() {
                continue;
            }
            for i in k + 1..=(k + kl).min(n - 1) {
                x[i] -= self.lower[k * kl + (i - k - 1)] * xk;
            }
        }
        for k in (0..n).rev() {
            let hi = (k + kl + self.ku).min(n - 1);
            let row = &self.rows[k * w + kl..k * w + kl + (hi - k) + 1];
            let mut s = x[k];
            for (a, xj) in row[1..].iter().zip(&x[k + 1..=hi]) {
                s -= a * xj;
            }
            x[k] = s / row[0];
        }
    }

    fn solve_adjoint_permuted(&self, x: &mut [c64]) {
        let (n, kl, w) = (self.n, self.kl, self.width);
        // Uᴴ y = b, forward
        for k in 0..n {
            let hi = (k + kl + self.ku).min(n - 1);
            let row = &self.rows[k * w + kl..k * w + kl + (hi - k) + 1];
            x[k] /= row[0].conj();
            let xk = x[k];
            for (a, xj) in row[1..].iter().zip(&mut x[k + 1..=hi]) {
                *xj -= a.conj() * xk;
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                s -= self.lower[k * kl + (i - k - 1)].conj() * x[i];
            }
            x[k] = s;
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
        }
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[c64]) -> Vec<c64> {
        assert_eq!(b.len(), self.n, "right-hand side length");
        let mut x: Vec<c64> = self.perm.iter().map(|&o| b[o]).collect();
        self.solve_permuted(&mut x);
        let mut out = vec![c64::default(); self.n];
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }

    /// Solves `Aᴴ x = b`.
    pub fn solve_adjoint(&self, b: &[c64]) -> Vec<c64> {
        assert_eq!(b.len(), self.n, "right-hand side length");
        let mut x: Vec<c64> = self.perm.iter().map(|&o| b[o]).collect();
        self.solve_adjoint_permuted(&mut x);
        let mut out = vec![c64::default(); self.n];
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }

    /// Hager–Higham estimate of `‖A‖₁ ‖A⁻¹‖₁`.
    pub fn condition_estimate(&self) -> f64 {
        let n = self.n;
        if n == 0 {
            return 1.0;
        }
        let mut x = vec![c64::from(1.0 / n as f64); n];
        let mut est = 0.0;
        for iter in 0..5 {
            let y = self.solve(&x);
            let ynorm: f64 = y.iter().map(|v| v.norm()).sum();
            if !ynorm.is_finite() {
                return f64::INFINITY;
            }
            if iter > 0 && ynorm <= est {
                break;
            }
            est = ynorm;
            let xi: Vec<c64> = y
                .iter()
                .map(|v| if v.norm() > 0.0 { v / v.norm() } else { c64::from(1.0) })
                .collect();
            let z = self.solve_adjoint(&xi);
            let (j, zmax) = z
                .iter()
                .enumerate()
                .map(|(j, v)| (j, v.norm()))
                .fold((0, 0.0), |acc, c| if c.1 > acc.1 { c } else { acc });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| (a.conj() * b).re).sum();
            if zmax <= ztx {
                break;
            }
            x = vec![c64::default(); n];
            x[j] = c64::from(1.0);
        }
        est * self.norm1
    }
}
