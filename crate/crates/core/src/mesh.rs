//! Conforming triangulations of polygonal domains, greedy marking and
//! longest-edge bisection.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use crate::{Error, Result};

pub type Point = [f64; 2];

/// Tag carried by boundary edges. All problems here are Dirichlet.
pub const DIRICHLET_TAG: u32 = 1;

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<(usize, usize, u32)>,
    edges: Vec<[usize; 2]>,
    tri_edges: Vec<[usize; 3]>,
    edge_tris: Vec<[usize; 2]>,
    parents: Vec<usize>,
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn dist2(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn midpoint(a: Point, b: Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

impl TriMesh {
    /// Builds a mesh, reorienting clockwise triangles. Boundary edges are
    /// the edges with a single neighbour and receive [`DIRICHLET_TAG`].
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let parents = (0..triangles.len()).collect();
        Self::build(vertices, triangles, &HashMap::new(), parents)
    }

    fn build(
        vertices: Vec<Point>,
        mut triangles: Vec<[usize; 3]>,
        tags: &HashMap<(usize, usize), u32>,
        parents: Vec<usize>,
    ) -> Result<Self> {
        let nv = vertices.len();
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("no triangles".into()));
        }
        if vertices.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::InvalidMesh("non-finite vertex coordinate".into()));
        }
        let scale = vertices
            .iter()
            .map(|p| p[0].abs().max(p[1].abs()))
            .fold(1e-300, f64::max);
        for (t, tri) in triangles.iter_mut().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidMesh(format!("triangle {t} references a missing vertex")));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidMesh(format!("triangle {t} repeats a vertex")));
            }
            let a = cross(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if a.abs() <= 1e-14 * scale * scale {
                return Err(Error::InvalidMesh(format!("triangle {t} is degenerate")));
            }
            if a < 0.0 {
                tri.swap(1, 2);
            }
        }
        let mut index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut edge_tris: Vec<[usize; 2]> = Vec::new();
        let mut tri_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut te = [0; 3];
            for k in 0..3 {
                let kk = key(tri[k], tri[(k + 1) % 3]);
                let e = *index.entry(kk).or_insert_with(|| {
                    edges.push([kk.0, kk.1]);
                    edge_tris.push([NONE, NONE]);
                    edges.len() - 1
                });
                if edge_tris[e][0] == NONE {
                    edge_tris[e][0] = t;
                } else if edge_tris[e][1] == NONE {
                    edge_tris[e][1] = t;
                } else {
                    return Err(Error::InvalidMesh(format!(
                        "edge {:?} is shared by more than two triangles",
                        kk
                    )));
                }
                te[k] = e;
            }
            tri_edges.push(te);
        }
        let mut boundary = Vec::new();
        for (e, et) in edge_tris.iter().enumerate() {
            if et[1] == NONE {
                let tri = triangles[et[0]];
                let k = tri_edges[et[0]].iter().position(|&x| x == e).unwrap();
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let tag = tags.get(&key(a, b)).copied().unwrap_or(DIRICHLET_TAG);
                boundary.push((a, b, tag));
            }
        }
        Ok(Self { vertices, triangles, boundary, edges, tri_edges, edge_tris, parents })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Boundary edges `(v0, v1, tag)`, directed counterclockwise.
    pub fn boundary_edges(&self) -> &[(usize, usize, u32)] {
        &self.boundary
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edge endpoints, lower index first.
    pub fn edge(&self, e: usize) -> [usize; 2] {
        self.edges[e]
    }

    /// Global edges of triangle `t`; local edge `k` joins vertices `k` and `k+1`.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.tri_edges[t]
    }

    /// Triangles adjacent to edge `e`; the second is `None` on the boundary.
    pub fn edge_triangles(&self, e: usize) -> (usize, Option<usize>) {
        let [a, b] = self.edge_tris[e];
        (a, (b != NONE).then_some(b))
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edge_tris[e][1] == NONE
    }

    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut on = vec![false; self.vertices.len()];
        for &(a, b, _) in &self.boundary {
            on[a] = true;
            on[b] = true;
        }
        on
    }

    /// Index of the parent triangle in the mesh this one was refined from
    /// (the identity for meshes that were not produced by refinement).
    pub fn parents(&self) -> &[usize] {
        &self.parents
    }

    pub fn coords(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.coords(t);
        0.5 * cross(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.area(t)).sum()
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.coords(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e];
        dist2(self.vertices[a], self.vertices[b]).sqrt()
    }

    /// `h_K`, the longest edge of triangle `t`.
    pub fn diameter(&self, t: usize) -> f64 {
        self.tri_edges[t].iter().map(|&e| self.edge_length(e)).fold(0.0, f64::max)
    }

    pub fn max_diameter(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.diameter(t)).fold(0.0, f64::max)
    }

    /// Smallest interior angle of triangle `t`, in radians.
    pub fn min_angle(&self, t: usize) -> f64 {
        let p = self.coords(t);
        (0..3)
            .map(|k| {
                let (o, a, b) = (p[k], p[(k + 1) % 3], p[(k + 2) % 3]);
                let u = [a[0] - o[0], a[1] - o[1]];
                let v = [b[0] - o[0], b[1] - o[1]];
                let c = (u[0] * v[0] + u[1] * v[1]) / (dist2(a, o) * dist2(b, o)).sqrt();
                c.clamp(-1.0, 1.0).acos()
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn mesh_min_angle(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.min_angle(t)).fold(f64::INFINITY, f64::min)
    }

    /// Whether `p` lies in the closed triangle `t`, up to `tol` in
    /// barycentric coordinates.
    pub fn triangle_contains(&self, t: usize, p: Point, tol: f64) -> bool {
        let [a, b, c] = self.coords(t);
        let area2 = cross(a, b, c);
        let l0 = cross(p, b, c) / area2;
        let l1 = cross(a, p, c) / area2;
        let l2 = 1.0 - l0 - l1;
        l0 >= -tol && l1 >= -tol && l2 >= -tol
    }

    /// Longest local edge of `t`; ties go to the smallest vertex pair.
    fn longest_edge(&self, t: usize) -> usize {
        let te = self.tri_edges[t];
        let mut best = 0;
        for k in 1..3 {
            let (lk, lb) = (self.edge_length(te[k]), self.edge_length(te[best]));
            if lk > lb || (lk == lb && self.edges[te[k]] < self.edges[te[best]]) {
                best = k;
            }
        }
        best
    }

    /// Verifies the mesh invariants: positive orientation, every edge shared
    /// by at most two triangles, and no vertex in the interior of a boundary
    /// edge (which is how a hanging node shows up).
    pub fn check_conforming(&self) -> Result<()> {
        for t in 0..self.n_triangles() {
            if self.area(t) <= 0.0 {
                return Err(Error::InvalidMesh(format!("triangle {t} is not positively oriented")));
            }
        }
        let on = self.boundary_vertices();
        let candidates: Vec<usize> = (0..self.n_vertices()).filter(|&v| on[v]).collect();
        for &(a, b, _) in &self.boundary {
            let (pa, pb) = (self.vertices[a], self.vertices[b]);
            let len2 = dist2(pa, pb);
            for &v in &candidates {
                if v == a || v == b {
                    continue;
                }
                let p = self.vertices[v];
                let s = ((p[0] - pa[0]) * (pb[0] - pa[0]) + (p[1] - pa[1]) * (pb[1] - pa[1])) / len2;
                if s > 1e-12 && s < 1.0 - 1e-12 && cross(pa, pb, p).abs() <= 1e-12 * len2 {
                    return Err(Error::InvalidMesh(format!(
                        "hanging node {v} on edge ({a}, {b})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Refines the marked triangles by longest-edge bisection. Neighbours are
    /// bisected recursively until the mesh is conforming again; every split
    /// triangle is first bisected across its own longest edge.
    pub fn refine(&self, marked: &[usize]) -> Result<TriMesh> {
        let nt = self.n_triangles();
        if let Some(&t) = marked.iter().find(|&&t| t >= nt) {
            return Err(Error::InvalidArgument(format!("marked triangle {t} out of range")));
        }
        let longest: Vec<usize> = (0..nt).map(|t| self.longest_edge(t)).collect();
        let mut split = vec![false; self.n_edges()];
        let mut stack: Vec<usize> = marked.iter().map(|&t| self.tri_edges[t][longest[t]]).collect();
        while let Some(e) = stack.pop() {
            if split[e] {
                continue;
            }
            split[e] = true;
            for &t in &self.edge_tris[e] {
                if t != NONE {
                    let l = self.tri_edges[t][longest[t]];
                    if !split[l] {
                        stack.push(l);
                    }
                }
            }
        }

        let mut vertices = self.vertices.clone();
        let mut mid = vec![NONE; self.n_edges()];
        for e in 0..self.n_edges() {
            if split[e] {
                let [a, b] = self.edges[e];
                mid[e] = vertices.len();
                vertices.push(midpoint(self.vertices[a], self.vertices[b]));
            }
        }
        let lookup: HashMap<(usize, usize), usize> =
            self.edges.iter().enumerate().map(|(e, &[a, b])| ((a, b), e)).collect();
        let mut tags = HashMap::new();
        for &(a, b, tag) in &self.boundary {
            let e = lookup[&key(a, b)];
            if split[e] {
                tags.insert(key(a, mid[e]), tag);
                tags.insert(key(mid[e], b), tag);
            } else {
                tags.insert(key(a, b), tag);
            }
        }

        let mut triangles = Vec::with_capacity(nt * 2);
        let mut parents = Vec::with_capacity(nt * 2);
        for t in 0..nt {
            let tri = self.triangles[t];
            let te = self.tri_edges[t];
            let k = longest[t];
            if !split[te[k]] {
                triangles.push(tri);
                parents.push(t);
                continue;
            }
            let (a, b, c) = (tri[(k + 2) % 3], tri[k], tri[(k + 1) % 3]);
            let m = mid[te[k]];
            let ab = te[(k + 2) % 3];
            let ca = te[(k + 1) % 3];
            let mut push = |x: [usize; 3]| {
                triangles.push(x);
                parents.push(t);
            };
            if split[ab] {
                push([m, a, mid[ab]]);
                push([m, mid[ab], b]);
            } else {
                push([a, b, m]);
            }
            if split[ca] {
                push([m, c, mid[ca]]);
                push([m, mid[ca], a]);
            } else {
                push([a, m, c]);
            }
        }
        Self::build(vertices, triangles, &tags, parents)
    }

    /// Applies [`refine`](Self::refine) to a [`MarkSet`].
    pub fn refine_marked(&self, marks: &MarkSet) -> Result<TriMesh> {
        self.refine(&marks.marked)
    }

    /// Refines uniformly: every triangle is bisected at least once.
    pub fn refine_uniform(&self) -> Result<TriMesh> {
        let all: Vec<usize> = (0..self.n_triangles()).collect();
        self.refine(&all)
    }

    fn reset_parents(mut self) -> Self {
        self.parents = (0..self.triangles.len()).collect();
        self
    }

    /// Unit square `[0,1]²` split into `2n²` right triangles.
    pub fn structured_square(n: usize) -> TriMesh {
        assert!(n >= 1, "structured_square needs n >= 1");
        let idx = |i: usize, j: usize| j * (n + 1) + i;
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([i as f64 / n as f64, j as f64 / n as f64]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (p00, p10, p01, p11) = (idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1));
                triangles.push([p00, p10, p11]);
                triangles.push([p00, p11, p01]);
            }
        }
        TriMesh::new(vertices, triangles).expect("structured mesh is valid")
    }

    /// L-shaped domain `[0,1]² \ (1/2,1]²` on a structured grid of `n × n`
    /// cells over the bounding square (`n` even). The re-entrant corner is
    /// [`LSHAPE_CORNER`].
    pub fn lshape(n: usize) -> TriMesh {
        assert!(n >= 2 && n % 2 == 0, "lshape needs an even n >= 2");
        let h = n / 2;
        let inside = |i: usize, j: usize| i < h || j < h;
        let mut id = vec![NONE; (n + 1) * (n + 1)];
        let mut vertices = Vec::new();
        for j in 0..=n {
            for i in 0..=n {
                if i <= h || j <= h {
                    id[j * (n + 1) + i] = vertices.len();
                    vertices.push([i as f64 / n as f64, j as f64 / n as f64]);
                }
            }
        }
        let v = |i: usize, j: usize| id[j * (n + 1) + i];
        let mut triangles = Vec::new();
        for j in 0..n {
            for i in 0..n {
                if !inside(i, j) {
                    continue;
                }
                // diagonals point away from the re-entrant corner
                if (i < h) == (j < h) {
                    triangles.push([v(i, j), v(i + 1, j), v(i, j + 1)]);
                    triangles.push([v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)]);
                } else {
                    triangles.push([v(i, j), v(i + 1, j), v(i + 1, j + 1)]);
                    triangles.push([v(i, j), v(i + 1, j + 1), v(i, j + 1)]);
                }
            }
        }
        TriMesh::new(vertices, triangles).expect("structured L-shape is valid")
    }

    /// Triangulates a simple polygon (ear clipping, then Delaunay edge flips)
    /// and bisects until no edge exceeds `hmax`.
    pub fn from_polygon(polygon: &[Point], hmax: f64) -> Result<TriMesh> {
        if !(hmax > 0.0) {
            return Err(Error::InvalidArgument(format!("hmax must be positive, got {hmax}")));
        }
        let mut pts = validate_polygon(polygon)?;
        if signed_area(&pts) < 0.0 {
            pts.reverse();
        }
        let mut tris = ear_clip(&pts)?;
        lawson_flips(&pts, &mut tris);
        let mut mesh = TriMesh::new(pts, tris)?;
        loop {
            let long: Vec<usize> = (0..mesh.n_triangles()).filter(|&t| mesh.diameter(t) > hmax).collect();
            if long.is_empty() {
                break;
            }
            mesh = mesh.refine(&long)?;
        }
        Ok(mesh.reset_parents())
    }

    /// Text form: `nv nt nb`, then vertex, triangle and boundary lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {} {}", self.n_vertices(), self.n_triangles(), self.boundary.len());
        for p in &self.vertices {
            let _ = writeln!(s, "{:.16e} {:.16e}", p[0], p[1]);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        for &(a, b, tag) in &self.boundary {
            let _ = writeln!(s, "{a} {b} {tag}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<TriMesh> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (ln, header) = lines.next().ok_or(Error::Parse { line: 1, message: "empty mesh file".into() })?;
        let counts: Vec<usize> = parse_fields(ln, header, 3)?;
        let (nv, nt, nb) = (counts[0], counts[1], counts[2]);
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| Error::Parse {
                line: ln,
                message: format!("unexpected end of file while reading {what}"),
            })
        };
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (l, s) = next("vertices")?;
            let xy: Vec<f64> = parse_fields(l, s, 2)?;
            vertices.push([xy[0], xy[1]]);
        }
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (l, s) = next("triangles")?;
            let t: Vec<usize> = parse_fields(l, s, 3)?;
            triangles.push([t[0], t[1], t[2]]);
        }
        let mut tags = HashMap::new();
        let mut listed = BTreeSet::new();
        for _ in 0..nb {
            let (l, s) = next("boundary edges")?;
            let b: Vec<usize> = parse_fields(l, s, 3)?;
            tags.insert(key(b[0], b[1]), b[2] as u32);
            listed.insert(key(b[0], b[1]));
        }
        if let Some((l, _)) = lines.next() {
            return Err(Error::Parse { line: l, message: "trailing data".into() });
        }
        let parents = (0..triangles.len()).collect();
        let mesh = Self::build(vertices, triangles, &tags, parents)?;
        let actual: BTreeSet<_> = mesh.boundary.iter().map(|&(a, b, _)| key(a, b)).collect();
        if actual != listed {
            return Err(Error::InvalidMesh("listed boundary edges do not match the triangulation".into()));
        }
        Ok(mesh)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<TriMesh> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

fn parse_fields<T: std::str::FromStr>(line: usize, s: &str, n: usize) -> Result<Vec<T>> {
    let v: Vec<&str> = s.split_whitespace().collect();
    if v.len() != n {
        return Err(Error::Parse { line, message: format!("expected {n} fields, found {}", v.len()) });
    }
    v.iter()
        .map(|f| f.parse().map_err(|_| Error::Parse { line, message: format!("cannot parse '{f}'") }))
        .collect()
}

/// Re-entrant corner of [`TriMesh::lshape`].
pub const LSHAPE_CORNER: Point = [0.5, 0.5];

/// Vertices of the L-shaped polygon, counterclockwise.
pub fn lshape_polygon() -> Vec<Point> {
    vec![[0.0, 0.0], [1.0, 0.0], [1.0, 0.5], [0.5, 0.5], [0.5, 1.0], [0.0, 1.0]]
}

pub fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - a[1] * b[0]
        })
        .sum::<f64>()
}

fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |a: Point, b: Point, p: Point, d: f64| {
        d == 0.0
            && p[0] >= a[0].min(b[0])
            && p[0] <= a[0].max(b[0])
            && p[1] >= a[1].min(b[1])
            && p[1] <= a[1].max(b[1])
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

fn validate_polygon(poly: &[Point]) -> Result<Vec<Point>> {
    let n = poly.len();
    if n < 3 {
        return Err(Error::InvalidPolygon(format!("{n} vertices")));
    }
    if poly.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::InvalidPolygon("non-finite coordinate".into()));
    }
    for i in 0..n {
        if poly[i] == poly[(i + 1) % n] {
            return Err(Error::InvalidPolygon(format!("repeated vertex {i}")));
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            let (c, d) = (poly[j], poly[(j + 1) % n]);
            if adjacent {
                // adjacent edges may only share their common endpoint
                let (shared, other_a, other_b) = if j == i + 1 { (b, a, d) } else { (a, b, c) };
                let folded = cross(shared, other_a, other_b) == 0.0
                    && (other_a[0] - shared[0]) * (other_b[0] - shared[0])
                        + (other_a[1] - shared[1]) * (other_b[1] - shared[1])
                        > 0.0;
                if folded {
                    return Err(Error::InvalidPolygon(format!("edges {i} and {j} overlap")));
                }
            } else if segments_intersect(a, b, c, d) {
                return Err(Error::InvalidPolygon(format!("edges {i} and {j} intersect")));
            }
        }
    }
    if signed_area(poly).abs() <= 1e-14 {
        return Err(Error::InvalidPolygon("zero area".into()));
    }
    Ok(poly.to_vec())
}

fn ear_clip(pts: &[Point]) -> Result<Vec<[usize; 3]>> {
    let mut ring: Vec<usize> = (0..pts.len()).collect();
    let mut tris = Vec::with_capacity(pts.len() - 2);
    while ring.len() > 3 {
        let m = ring.len();
        let ear = (0..m).find(|&k| {
            let (a, b, c) = (ring[(k + m - 1) % m], ring[k], ring[(k + 1) % m]);
            let area = cross(pts[a], pts[b], pts[c]);
            if area <= 1e-14 * dist2(pts[a], pts[c]) {
                return false;
            }
            ring.iter().all(|&v| {
                if v == a || v == b || v == c || pts[v] == pts[a] || pts[v] == pts[b] || pts[v] == pts[c] {
                    return true;
                }
                let p = pts[v];
                !(cross(pts[a], pts[b], p) >= 0.0 && cross(pts[b], pts[c], p) >= 0.0 && cross(pts[c], pts[a], p) >= 0.0)
            })
        });
        let Some(k) = ear else {
            return Err(Error::InvalidPolygon("no ear found; polygon is not simple".into()));
        };
        tris.push([ring[(k + m - 1) % m], ring[k], ring[(k + 1) % m]]);
        ring.remove(k);
    }
    if cross(pts[ring[0]], pts[ring[1]], pts[ring[2]]) <= 0.0 {
        return Err(Error::InvalidPolygon("degenerate final triangle".into()));
    }
    tris.push([ring[0], ring[1], ring[2]]);
    Ok(tris)
}

fn in_circumcircle(a: Point, b: Point, c: Point, d: Point) -> bool {
    let m = |p: Point| [p[0] - d[0], p[1] - d[1], (p[0] - d[0]).powi(2) + (p[1] - d[1]).powi(2)];
    let (a, b, c) = (m(a), m(b), m(c));
    let det = a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) + a[2] * (b[0] * c[1] - b[1] * c[0]);
    det > 1e-12 * (a[2] + b[2] + c[2]).powi(2)
}

fn lawson_flips(pts: &[Point], tris: &mut [[usize; 3]]) {
    for _ in 0..100 * tris.len().max(1) {
        let mut owner: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        let mut flip = None;
        'scan: for (t, tri) in tris.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                if let Some(&(s, _)) = owner.get(&(b, a)) {
                    let c = tri[(k + 2) % 3];
                    let d = *tris[s].iter().find(|&&v| v != a && v != b).unwrap();
                    let convex = cross(pts[c], pts[a], pts[d]) > 0.0 && cross(pts[d], pts[b], pts[c]) > 0.0;
                    if convex && in_circumcircle(pts[a], pts[b], pts[c], pts[d]) {
                        flip = Some((t, s, a, b, c, d));
                        break 'scan;
                    }
                }
                owner.insert((a, b), (t, k));
            }
        }
        let Some((t, s, a, b, c, d)) = flip else { return };
        tris[t] = [c, a, d];
        tris[s] = [d, b, c];
    }
}

/// Elements selected for refinement by the greedy rule `η_K ≥ θ η_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkSet {
    pub marked: Vec<usize>,
    pub theta: f64,
}

pub fn greedy_mark(eta: &[f64], theta: f64) -> Result<MarkSet> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidArgument(format!("theta must lie in (0, 1), got {theta}")));
    }
    if let Some(k) = eta.iter().position(|e| !(e.is_finite() && *e >= 0.0)) {
        return Err(Error::InvalidArgument(format!("indicator {k} is {}", eta[k])));
    }
    let emax = eta.iter().copied().fold(0.0, f64::max);
    if emax <= 0.0 {
        return Err(Error::NothingToMark);
    }
    let marked = (0..eta.len()).filter(|&k| eta[k] >= theta * emax).collect();
    Ok(MarkSet { marked, theta })
}
