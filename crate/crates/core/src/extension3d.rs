//! Apex-cone extension of a 3D crack surface.
//!
//! Each crack triangle `ABC` gets an apex `S` above its centroid `G`, at
//! distance `scale · √area` along its oriented normal. The tetrahedra
//! `(A, B, C, S)` together form the region `Ω⁻`; everything else is `Ω⁺`.
//! Triangle orientations are propagated from triangle 0 across shared edges,
//! so the apexes of a connected orientable surface all sit on the same side.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::sqrt;

pub type Point3 = [f64; 3];

/// Points closer than this (relative to the largest triangle size) to the
/// crack surface classify as [`Region::Boundary`].
pub const BOUNDARY_TOL: f64 = 1e-10;

// Barycentric slack of the tetrahedron membership test.
const INSIDE_TOL: f64 = 1e-12;

#[inline]
fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
fn dot(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn cross(a: Point3, b: Point3) -> Point3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
fn axpy(a: f64, x: Point3, y: Point3) -> Point3 {
    [y[0] + a * x[0], y[1] + a * x[1], y[2] + a * x[2]]
}

/// Six times the signed volume of the tetrahedron `(a, b, c, d)`.
#[inline]
pub fn orient3d(a: Point3, b: Point3, c: Point3, d: Point3) -> f64 {
    dot(cross(sub(b, a), sub(c, a)), sub(d, a))
}

fn check_sign(sign: i8) -> Result<f64> {
    match sign {
        1 => Ok(1.0),
        -1 => Ok(-1.0),
        s => Err(Error::InvalidArgument(format!("orientation sign must be +1 or -1 (got {s})"))),
    }
}

/// Area, centroid and unit normal (right-hand rule on the winding).
fn frame(tri: &[Point3; 3]) -> (f64, Point3, Point3) {
    let n = cross(sub(tri[1], tri[0]), sub(tri[2], tri[0]));
    let len = sqrt(dot(n, n));
    let g = [
        (tri[0][0] + tri[1][0] + tri[2][0]) / 3.0,
        (tri[0][1] + tri[1][1] + tri[2][1]) / 3.0,
        (tri[0][2] + tri[1][2] + tri[2][2]) / 3.0,
    ];
    let unit = if len > 0.0 { [n[0] / len, n[1] / len, n[2] / len] } else { [0.0; 3] };
    (0.5 * len, g, unit)
}

fn is_degenerate(tri: &[Point3; 3]) -> bool {
    let (area, _, _) = frame(tri);
    let e = [sub(tri[1], tri[0]), sub(tri[2], tri[1]), sub(tri[0], tri[2])];
    let longest = e.iter().map(|v| dot(*v, *v)).fold(0.0, f64::max);
    !(area > 1e-14 * longest) || !area.is_finite()
}

/// `S = G + sign · √area · n`.
pub fn triangle_apex(tri: &[Point3; 3], sign: i8) -> Result<Point3> {
    triangle_apex_scaled(tri, sign, 1.0)
}

/// `S = G + sign · scale · √area · n`.
pub fn triangle_apex_scaled(tri: &[Point3; 3], sign: i8, scale: f64) -> Result<Point3> {
    let s = check_sign(sign)?;
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidArgument(format!("apex scale must be positive (got {scale})")));
    }
    if is_degenerate(tri) {
        return Err(Error::DegenerateTriangle { index: 0 });
    }
    let (area, g, n) = frame(tri);
    Ok(axpy(s * scale * sqrt(area), n, g))
}

/// A crack surface given as a triangle soup.
#[derive(Debug, Clone, PartialEq)]
pub struct TriSurface {
    vertices: Vec<Point3>,
    triangles: Vec<[usize; 3]>,
}

impl TriSurface {
    /// Validates indices, non-degeneracy and edge-manifoldness.
    pub fn new(vertices: Vec<Point3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= vertices.len()) {
                return Err(Error::IndexOutOfRange { triangle: t });
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::DegenerateTriangle { index: t });
            }
            if is_degenerate(&[vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]]) {
                return Err(Error::DegenerateTriangle { index: t });
            }
        }
        let s = Self { vertices, triangles };
        for (&(a, b), users) in &s.edge_map() {
            if users.len() > 2 {
                return Err(Error::NonManifoldEdge { a, b });
            }
        }
        Ok(s)
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle(&self, t: usize) -> [Point3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        frame(&self.triangle(t)).0
    }

    /// Undirected edge → triangles using it, with `+1` when the triangle
    /// walks the edge from the smaller to the larger vertex index.
    fn edge_map(&self) -> BTreeMap<(usize, usize), Vec<(usize, i8)>> {
        let mut map: BTreeMap<(usize, usize), Vec<(usize, i8)>> = BTreeMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = if a < b { (a, b) } else { (b, a) };
                map.entry(key).or_default().push((t, if a < b { 1 } else { -1 }));
            }
        }
        map
    }

    /// Per-triangle signs relative to the input winding, propagated
    /// breadth-first from triangle 0 which gets `seed`.
    fn propagate(&self, seed: i8) -> Result<Vec<i8>> {
        let n = self.triangles.len();
        let mut nbrs: Vec<Vec<(usize, i8)>> = vec![Vec::new(); n];
        for users in self.edge_map().values() {
            if let [(t, dt), (u, du)] = users[..] {
                // Oriented traversals must oppose: o_t d_t = -o_u d_u.
                let rel = -dt * du;
                nbrs[t].push((u, rel));
                nbrs[u].push((t, rel));
            }
        }
        let mut sign = vec![0i8; n];
        sign[0] = seed;
        let mut queue = VecDeque::from([0usize]);
        while let Some(t) = queue.pop_front() {
            for &(u, rel) in &nbrs[t] {
                let want = sign[t] * rel;
                if sign[u] == 0 {
                    sign[u] = want;
                    queue.push_back(u);
                } else if sign[u] != want {
                    return Err(Error::NonOrientable { triangle: u });
                }
            }
        }
        let unreached = sign.iter().filter(|&&s| s == 0).count();
        if unreached > 0 {
            return Err(Error::Disconnected { unreached });
        }
        Ok(sign)
    }
}

/// Side of a point with respect to the extended crack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Plus,
    Minus,
    Boundary,
}

/// The crack surface with one apex per triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedCrack {
    surface: TriSurface,
    apexes: Vec<Point3>,
    signs: Vec<i8>,
    facets: Vec<[usize; 3]>,
    scale: f64,
}

/// Extension with apex distance `√area`.
pub fn build_extension(surface: TriSurface, seed_sign: i8) -> Result<ExtendedCrack> {
    build_extension_scaled(surface, seed_sign, 1.0)
}

/// Extension with apex distance `scale · √area`.
pub fn build_extension_scaled(surface: TriSurface, seed_sign: i8, scale: f64) -> Result<ExtendedCrack> {
    check_sign(seed_sign)?;
    if surface.triangles.is_empty() {
        return Err(Error::InvalidArgument("empty crack surface".into()));
    }
    let signs = surface.propagate(seed_sign)?;
    let nv = surface.vertices.len();
    let mut apexes = Vec::with_capacity(signs.len());
    let mut facets = Vec::with_capacity(3 * signs.len());
    for (t, &s) in signs.iter().enumerate() {
        apexes.push(triangle_apex_scaled(&surface.triangle(t), s, scale).map_err(|e| match e {
            Error::DegenerateTriangle { .. } => Error::DegenerateTriangle { index: t },
            e => e,
        })?);
        let [a, b, c] = surface.triangles[t];
        let (a, b) = if s > 0 { (a, b) } else { (b, a) };
        // Cone sides, wound so that they face away from the tetrahedron.
        let apex = nv + t;
        facets.extend([[a, b, apex], [b, c, apex], [c, a, apex]]);
    }
    Ok(ExtendedCrack { surface, apexes, signs, facets, scale })
}

impl ExtendedCrack {
    pub fn surface(&self) -> &TriSurface {
        &self.surface
    }

    pub fn apexes(&self) -> &[Point3] {
        &self.apexes
    }

    /// Orientation of each triangle relative to its input winding.
    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    /// Cone side triangles; index `n_vertices + t` refers to the apex of
    /// triangle `t`.
    pub fn facets(&self) -> &[[usize; 3]] {
        &self.facets
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Surface vertices followed by the apexes.
    pub fn all_vertices(&self) -> Vec<Point3> {
        let mut v = self.surface.vertices.clone();
        v.extend_from_slice(&self.apexes);
        v
    }

    /// Triangle `t` with the propagated winding.
    pub fn oriented_triangle(&self, t: usize) -> [Point3; 3] {
        let [a, b, c] = self.surface.triangle(t);
        if self.signs[t] > 0 {
            [a, b, c]
        } else {
            [b, a, c]
        }
    }

    /// Total volume of the tetrahedra `(A, B, C, S)`.
    pub fn region_volume(&self) -> f64 {
        (0..self.apexes.len())
            .map(|t| {
                let [a, b, c] = self.oriented_triangle(t);
                orient3d(a, b, c, self.apexes[t]).abs() / 6.0
            })
            .sum()
    }

    fn length_scale(&self) -> f64 {
        (0..self.surface.n_triangles()).map(|t| sqrt(self.surface.area(t))).fold(0.0, f64::max)
    }

    /// `Boundary` within `BOUNDARY_TOL` (relative) of a crack triangle,
    /// `Minus` inside one of the tetrahedra, `Plus` otherwise.
    pub fn classify_point(&self, p: Point3) -> Region {
        let eps = BOUNDARY_TOL * self.length_scale();
        for t in 0..self.surface.n_triangles() {
            if point_triangle_distance(p, &self.surface.triangle(t)) <= eps {
                return Region::Boundary;
            }
        }
        for t in 0..self.apexes.len() {
            let [a, b, c] = self.oriented_triangle(t);
            if in_tetrahedron(p, [a, b, c, self.apexes[t]]) {
                return Region::Minus;
            }
        }
        Region::Plus
    }
}

fn in_tetrahedron(p: Point3, v: [Point3; 4]) -> bool {
    let vol = orient3d(v[0], v[1], v[2], v[3]);
    if vol == 0.0 {
        return false;
    }
    let bary = [
        orient3d(p, v[1], v[2], v[3]) / vol,
        orient3d(v[0], p, v[2], v[3]) / vol,
        orient3d(v[0], v[1], p, v[3]) / vol,
        orient3d(v[0], v[1], v[2], p) / vol,
    ];
    bary.iter().all(|&l| l >= -INSIDE_TOL)
}

/// Euclidean distance from `p` to the closed triangle.
pub fn point_triangle_distance(p: Point3, tri: &[Point3; 3]) -> f64 {
    let q = closest_point_on_triangle(p, tri);
    let d = sub(p, q);
    sqrt(dot(d, d))
}

// Region-based closest point (Voronoi regions of vertices, edges, face).
fn closest_point_on_triangle(p: Point3, [a, b, c]: &[Point3; 3]) -> Point3 {
    let (a, b, c) = (*a, *b, *c);
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot(ab, ap);
    let d2 = dot(ac, ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = sub(p, b);
    let d3 = dot(ab, bp);
    let d4 = dot(ac, bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return axpy(d1 / (d1 - d3), ab, a);
    }
    let cp = sub(p, c);
    let d5 = dot(ab, cp);
    let d6 = dot(ac, cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return axpy(d2 / (d2 - d6), ac, a);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return axpy((d4 - d3) / ((d4 - d3) + (d5 - d6)), sub(c, b), b);
    }
    let denom = 1.0 / (va + vb + vc);
    let (v, w) = (vb * denom, vc * denom);
    axpy(w, ac, axpy(v, ab, a))
}
