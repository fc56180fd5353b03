//! Lagrange shape functions of degree 1–3 on the reference triangle with
//! vertices `(0,0)`, `(1,0)`, `(0,1)`.
//!
//! Local dof order: the three vertices, then the interior nodes of local
//! edges 0, 1, 2 (edge `k` runs from vertex `k` to vertex `k+1`), then
//! interior nodes of the cell.

use nalgebra::DMatrix;

use crate::mesh::Point;

pub const MAX_DEGREE: usize = 3;

#[derive(Debug, Clone)]
pub struct RefElement {
    degree: usize,
    exps: Vec<(i32, i32)>,
    /// `coeffs[(m, i)]`: coefficient of monomial `m` in shape function `i`.
    coeffs: DMatrix<f64>,
    nodes: Vec<Point>,
}

const VERTS: [Point; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

fn lerp(a: Point, b: Point, t: f64) -> Point {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

impl RefElement {
    pub fn new(degree: usize) -> Self {
        assert!((1..=MAX_DEGREE).contains(&degree), "degree {degree} not supported");
        let p = degree as i32;
        let exps: Vec<(i32, i32)> = (0..=p).flat_map(|s| (0..=s).map(move |b| (s - b, b))).collect();
        let mut nodes = VERTS.to_vec();
        for k in 0..3 {
            for i in 1..degree {
                nodes.push(lerp(VERTS[k], VERTS[(k + 1) % 3], i as f64 / degree as f64));
            }
        }
        if degree == 3 {
            nodes.push([1.0 / 3.0, 1.0 / 3.0]);
        }
        let n = nodes.len();
        debug_assert_eq!(n, exps.len());
        let vander = DMatrix::from_fn(n, n, |i, m| {
            let (a, b) = exps[m];
            nodes[i][0].powi(a) * nodes[i][1].powi(b)
        });
        let coeffs = vander.try_inverse().expect("unisolvent nodes");
        Self { degree, exps, coeffs, nodes }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn ndofs(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn dofs_per_edge(&self) -> usize {
        self.degree - 1
    }

    pub fn dofs_per_cell(&self) -> usize {
        if self.degree >= 3 {
            (self.degree - 1) * (self.degree - 2) / 2
        } else {
            0
        }
    }

    fn powers(x: f64, p: usize) -> [f64; MAX_DEGREE + 1] {
        let mut out = [1.0; MAX_DEGREE + 1];
        for k in 1..=p {
            out[k] = out[k - 1] * x;
        }
        out
    }

    pub fn values(&self, xi: Point) -> Vec<f64> {
        let (px, py) = (Self::powers(xi[0], self.degree), Self::powers(xi[1], self.degree));
        let mono: Vec<f64> = self.exps.iter().map(|&(a, b)| px[a as usize] * py[b as usize]).collect();
        (0..self.ndofs()).map(|i| (0..mono.len()).map(|m| self.coeffs[(m, i)] * mono[m]).sum()).collect()
    }

    /// Reference gradients `(∂ξ, ∂η)`.
    pub fn grads(&self, xi: Point) -> Vec<[f64; 2]> {
        let (px, py) = (Self::powers(xi[0], self.degree), Self::powers(xi[1], self.degree));
        let d: Vec<[f64; 2]> = self
            .exps
            .iter()
            .map(|&(a, b)| {
                let dx = if a > 0 { a as f64 * px[a as usize - 1] * py[b as usize] } else { 0.0 };
                let dy = if b > 0 { b as f64 * px[a as usize] * py[b as usize - 1] } else { 0.0 };
                [dx, dy]
            })
            .collect();
        (0..self.ndofs())
            .map(|i| {
                let mut g = [0.0; 2];
                for (m, dm) in d.iter().enumerate() {
                    g[0] += self.coeffs[(m, i)] * dm[0];
                    g[1] += self.coeffs[(m, i)] * dm[1];
                }
                g
            })
            .collect()
    }

    /// Reference second derivatives `(∂ξξ, ∂ξη, ∂ηη)`.
    pub fn hessians(&self, xi: Point) -> Vec<[f64; 3]> {
        let (px, py) = (Self::powers(xi[0], self.degree), Self::powers(xi[1], self.degree));
        let pw = |v: &[f64; MAX_DEGREE + 1], e: i32| if e >= 0 { v[e as usize] } else { 0.0 };
        let d: Vec<[f64; 3]> = self
            .exps
            .iter()
            .map(|&(a, b)| {
                let (af, bf) = (a as f64, b as f64);
                [
                    af * (af - 1.0) * pw(&px, a - 2) * pw(&py, b),
                    af * bf * pw(&px, a - 1) * pw(&py, b - 1),
                    bf * (bf - 1.0) * pw(&px, a) * pw(&py, b - 2),
                ]
            })
            .collect();
        (0..self.ndofs())
            .map(|i| {
                let mut h = [0.0; 3];
                for (m, dm) in d.iter().enumerate() {
                    for c in 0..3 {
                        h[c] += self.coeffs[(m, i)] * dm[c];
                    }
                }
                h
            })
            .collect()
    }
}

/// Affine map `x = a + J ξ` of a mesh triangle.
#[derive(Debug, Clone, Copy)]
pub struct ElementMap {
    pub origin: Point,
    pub jac: [[f64; 2]; 2],
    /// `J⁻¹`; physical gradients are `J⁻ᵀ ∇̂`.
    pub inv: [[f64; 2]; 2],
    pub det: f64,
}

impl ElementMap {
    pub fn new(p: [Point; 3]) -> Self {
        let jac = [[p[1][0] - p[0][0], p[2][0] - p[0][0]], [p[1][1] - p[0][1], p[2][1] - p[0][1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv = [[jac[1][1] / det, -jac[0][1] / det], [-jac[1][0] / det, jac[0][0] / det]];
        Self { origin: p[0], jac, inv, det }
    }

    pub fn to_physical(&self, xi: Point) -> Point {
        [
            self.origin[0] + self.jac[0][0] * xi[0] + self.jac[0][1] * xi[1],
            self.origin[1] + self.jac[1][0] * xi[0] + self.jac[1][1] * xi[1],
        ]
    }

    pub fn to_reference(&self, x: Point) -> Point {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        [self.inv[0][0] * d[0] + self.inv[0][1] * d[1], self.inv[1][0] * d[0] + self.inv[1][1] * d[1]]
    }

    pub fn grad(&self, g: [f64; 2]) -> [f64; 2] {
        [self.inv[0][0] * g[0] + self.inv[1][0] * g[1], self.inv[0][1] * g[0] + self.inv[1][1] * g[1]]
    }

    /// Physical Laplacian from reference second derivatives: `tr(J⁻ᵀ Ĥ J⁻¹)`.
    pub fn laplacian(&self, h: [f64; 3]) -> f64 {
        let hm = [[h[0], h[1]], [h[1], h[2]]];
        let g = self.inv;
        let mut s = 0.0;
        for d in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    s += g[a][d] * hm[a][b] * g[b][d];
                }
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_functions_are_nodal_and_partition_unity() {
        for p in 1..=3 {
            let e = RefElement::new(p);
            for (i, &x) in e.nodes().iter().enumerate() {
                let v = e.values(x);
                for (j, vj) in v.iter().enumerate() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((vj - want).abs() < 1e-12);
                }
            }
            let x = [0.21, 0.37];
            let s: f64 = e.values(x).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
            let g = e.grads(x).iter().fold([0.0, 0.0], |a, g| [a[0] + g[0], a[1] + g[1]]);
            assert!(g[0].abs() < 1e-11 && g[1].abs() < 1e-11);
        }
    }

    #[test]
    fn laplacian_of_quadratic() {
        // u = x² + 3y² interpolated exactly by P2 on a skewed triangle
        let e = RefElement::new(2);
        let map = ElementMap::new([[0.1, 0.2], [1.3, 0.4], [0.5, 1.1]]);
        let coeffs: Vec<f64> = e
            .nodes()
            .iter()
            .map(|&xi| {
                let x = map.to_physical(xi);
                x[0] * x[0] + 3.0 * x[1] * x[1]
            })
            .collect();
        let h = e.hessians([0.3, 0.3]);
        let lap: f64 = coeffs.iter().zip(&h).map(|(c, h)| c * map.laplacian(*h)).sum();
        assert!((lap - 8.0).abs() < 1e-10);
    }
}
