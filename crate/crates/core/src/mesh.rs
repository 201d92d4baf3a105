//! Structured triangulations of a rectangle and Lagrange elements on them.
//!
//! Every square of the `nx × ny` grid is split along its lower-left to
//! upper-right diagonal. Because all cells are congruent to one of two
//! shapes, the Lagrange nodes of degree `k` coincide with a uniform lattice of
//! spacing `(dx / k, dy / k)`; global node numbers are lattice indices, which
//! makes inter-element continuity automatic.
//!
//! Vector-valued DOFs are numbered component-blocked: all x-components first,
//! then all y-components (`dof = component * n_nodes + node`).

use alloc::vec;
use alloc::vec::Vec;

use crate::math::sqrt;
use crate::{Error, Point, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectDomain {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl RectDomain {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        if !(x_min < x_max) {
            return Err(Error::InvalidDomain("x_min must be smaller than x_max"));
        }
        if !(y_min < y_max) {
            return Err(Error::InvalidDomain("y_min must be smaller than y_max"));
        }
        Ok(Self { x_min, x_max, y_min, y_max })
    }

    pub fn unit_square() -> Self {
        Self { x_min: 0.0, x_max: 1.0, y_min: 0.0, y_max: 1.0 }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

/// Which of the two congruent shapes a cell has.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellShape {
    /// `(x0,y0), (x1,y0), (x1,y1)`
    Lower,
    /// `(x0,y0), (x1,y1), (x0,y1)`
    Upper,
}

#[derive(Debug, Clone)]
pub struct BackgroundMesh {
    domain: RectDomain,
    nx: usize,
    ny: usize,
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
}

impl BackgroundMesh {
    pub fn build(domain: RectDomain, nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::ZeroSubdivisions);
        }
        let dx = domain.width() / nx as f64;
        let dy = domain.height() / ny as f64;
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                // Pin the last row/column to the exact domain bounds.
                let x = if i == nx { domain.x_max } else { domain.x_min + i as f64 * dx };
                let y = if j == ny { domain.y_max } else { domain.y_min + j as f64 * dy };
                vertices.push([x, y]);
            }
        }
        let vid = |i: usize, j: usize| j * (nx + 1) + i;
        let mut cells = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                cells.push([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)]);
                cells.push([vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)]);
            }
        }
        Ok(Self { domain, nx, ny, vertices, cells })
    }

    pub fn domain(&self) -> &RectDomain {
        &self.domain
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn dx(&self) -> f64 {
        self.domain.width() / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.domain.height() / self.ny as f64
    }

    /// Mesh parameter: the largest cell diameter (the square diagonal).
    pub fn h(&self) -> f64 {
        let (dx, dy) = (self.dx(), self.dy());
        sqrt(dx * dx + dy * dy)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn cell_vertices(&self, cell: usize) -> [Point; 3] {
        let c = self.cells[cell];
        [self.vertices[c[0]], self.vertices[c[1]], self.vertices[c[2]]]
    }

    pub fn cell_shape(&self, cell: usize) -> CellShape {
        if cell % 2 == 0 {
            CellShape::Lower
        } else {
            CellShape::Upper
        }
    }

    /// Grid square `(i, j)` containing the cell.
    pub fn cell_square(&self, cell: usize) -> (usize, usize) {
        let s = cell / 2;
        (s % self.nx, s / self.nx)
    }

    pub fn cell_area(&self, cell: usize) -> f64 {
        let [a, b, c] = self.cell_vertices(cell);
        crate::math::signed_area(a, b, c)
    }

    pub fn cell_map(&self, cell: usize) -> AffineMap {
        AffineMap::new(&self.cell_vertices(cell))
    }
}

/// Affine map from the reference triangle onto a physical triangle.
#[derive(Debug, Clone, Copy)]
pub struct AffineMap {
    pub origin: Point,
    /// Columns are the images of the reference unit vectors.
    pub jac: [[f64; 2]; 2],
    /// Inverse transpose of `jac`, used to map reference gradients.
    pub inv_t: [[f64; 2]; 2],
    pub det: f64,
}

impl AffineMap {
    pub fn new(tri: &[Point; 3]) -> Self {
        let e1 = [tri[1][0] - tri[0][0], tri[1][1] - tri[0][1]];
        let e2 = [tri[2][0] - tri[0][0], tri[2][1] - tri[0][1]];
        let jac = [[e1[0], e2[0]], [e1[1], e2[1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        // inv(J) = 1/det [[d, -b], [-c, a]]; its transpose:
        let inv_t = [
            [jac[1][1] / det, -jac[1][0] / det],
            [-jac[0][1] / det, jac[0][0] / det],
        ];
        Self { origin: tri[0], jac, inv_t, det }
    }

    pub fn to_physical(&self, r: [f64; 2]) -> Point {
        [
            self.origin[0] + self.jac[0][0] * r[0] + self.jac[0][1] * r[1],
            self.origin[1] + self.jac[1][0] * r[0] + self.jac[1][1] * r[1],
        ]
    }

    pub fn to_reference(&self, p: Point) -> [f64; 2] {
        let d = [p[0] - self.origin[0], p[1] - self.origin[1]];
        // inv(J) = inv_t^T
        [
            self.inv_t[0][0] * d[0] + self.inv_t[1][0] * d[1],
            self.inv_t[0][1] * d[0] + self.inv_t[1][1] * d[1],
        ]
    }

    pub fn grad_to_physical(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv_t[0][0] * g[0] + self.inv_t[0][1] * g[1],
            self.inv_t[1][0] * g[0] + self.inv_t[1][1] * g[1],
        ]
    }
}

/// Lagrange simplex element of degree 0 to 3. Degree 0 is discontinuous,
/// higher degrees are continuous.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ElementType {
    degree: u8,
}

impl ElementType {
    pub const MAX_DEGREE: u8 = 3;

    pub fn lagrange(degree: u8) -> Result<Self> {
        if degree > Self::MAX_DEGREE {
            return Err(Error::UnsupportedDegree(degree));
        }
        Ok(Self { degree })
    }

    pub fn degree(&self) -> u8 {
        self.degree
    }

    pub fn is_continuous(&self) -> bool {
        self.degree >= 1
    }

    /// `(k + 1)(k + 2) / 2`
    pub fn n_local(&self) -> usize {
        let k = self.degree as usize;
        (k + 1) * (k + 2) / 2
    }

    /// Barycentric multi-indices of the local nodes: the three vertices, then
    /// edge nodes along 0→1, 1→2, 2→0, then interior nodes.
    pub fn local_nodes(&self) -> &'static [[u8; 3]] {
        match self.degree {
            0 => &[[0, 0, 0]],
            1 => &[[1, 0, 0], [0, 1, 0], [0, 0, 1]],
            2 => &[[2, 0, 0], [0, 2, 0], [0, 0, 2], [1, 1, 0], [0, 1, 1], [1, 0, 1]],
            _ => &[
                [3, 0, 0],
                [0, 3, 0],
                [0, 0, 3],
                [2, 1, 0],
                [1, 2, 0],
                [0, 2, 1],
                [0, 1, 2],
                [1, 0, 2],
                [2, 0, 1],
                [1, 1, 1],
            ],
        }
    }

    /// Reference coordinates `(ξ, η)` of the local nodes.
    pub fn local_node_coords(&self) -> Vec<[f64; 2]> {
        if self.degree == 0 {
            return vec![[1.0 / 3.0, 1.0 / 3.0]];
        }
        let k = self.degree as f64;
        self.local_nodes().iter().map(|a| [a[1] as f64 / k, a[2] as f64 / k]).collect()
    }

    /// Evaluate all local basis functions and their reference gradients
    /// `(∂/∂ξ, ∂/∂η)` at reference point `(ξ, η)`.
    pub fn eval(&self, r: [f64; 2], values: &mut [f64], grads: &mut [[f64; 2]]) {
        let n = self.n_local();
        debug_assert!(values.len() >= n && grads.len() >= n);
        if self.degree == 0 {
            values[0] = 1.0;
            grads[0] = [0.0, 0.0];
            return;
        }
        let lam = [1.0 - r[0] - r[1], r[0], r[1]];
        let k = self.degree;
        for (i, a) in self.local_nodes().iter().enumerate() {
            let mut p = [0.0; 3];
            let mut dp = [0.0; 3];
            for s in 0..3 {
                let (v, d) = lagrange_factor(k, a[s], lam[s]);
                p[s] = v;
                dp[s] = d;
            }
            values[i] = p[0] * p[1] * p[2];
            let dl = [dp[0] * p[1] * p[2], p[0] * dp[1] * p[2], p[0] * p[1] * dp[2]];
            grads[i] = [dl[1] - dl[0], dl[2] - dl[0]];
        }
    }

    pub fn eval_values(&self, r: [f64; 2], values: &mut [f64]) {
        let mut grads = [[0.0; 2]; 10];
        self.eval(r, values, &mut grads);
    }
}

// P_a(t) = Π_{m<a} (k t - m) / (m + 1) and its derivative.
fn lagrange_factor(k: u8, a: u8, t: f64) -> (f64, f64) {
    let kf = k as f64;
    let mut value = 1.0;
    let mut deriv = 0.0;
    for m in 0..a {
        let f = (kf * t - m as f64) / (m as f64 + 1.0);
        let df = kf / (m as f64 + 1.0);
        deriv = deriv * f + value * df;
        value *= f;
    }
    (value, deriv)
}

/// Basis values and reference gradients at a point given in barycentric
/// coordinates `(λ₀, λ₁, λ₂)` with `λ₁ = ξ`, `λ₂ = η`.
pub fn reference_basis(elem: ElementType, bary: [f64; 3]) -> Result<(Vec<f64>, Vec<[f64; 2]>)> {
    const TOL: f64 = 1e-12;
    if bary.iter().any(|&l| l < -TOL) || ((bary[0] + bary[1] + bary[2]) - 1.0).abs() > TOL {
        return Err(Error::PointOutsideElement);
    }
    let n = elem.n_local();
    let mut values = vec![0.0; n];
    let mut grads = vec![[0.0; 2]; n];
    elem.eval([bary[1], bary[2]], &mut values, &mut grads);
    Ok((values, grads))
}

/// Global numbering of the nodes of an element type on a background mesh.
#[derive(Debug, Clone)]
pub struct DofMap {
    elem: ElementType,
    components: usize,
    n_nodes: usize,
    n_local: usize,
    cell_nodes: Vec<usize>,
    node_coords: Vec<Point>,
    /// Lattice indices of each node for continuous elements.
    lattice: Option<(usize, usize)>,
}

impl DofMap {
    pub fn element(&self) -> ElementType {
        self.elem
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_dofs(&self) -> usize {
        self.n_nodes * self.components
    }

    pub fn n_local(&self) -> usize {
        self.n_local
    }

    pub fn cell_nodes(&self, cell: usize) -> &[usize] {
        &self.cell_nodes[cell * self.n_local..(cell + 1) * self.n_local]
    }

    pub fn node_coords(&self) -> &[Point] {
        &self.node_coords
    }

    /// Component-blocked global DOF index.
    #[inline]
    pub fn dof(&self, node: usize, component: usize) -> usize {
        component * self.n_nodes + node
    }

    /// Lattice size `(columns, rows)` for continuous elements.
    pub fn lattice(&self) -> Option<(usize, usize)> {
        self.lattice
    }
}

pub fn global_dof_map(mesh: &BackgroundMesh, elem: ElementType, components: usize) -> DofMap {
    let n_local = elem.n_local();
    let mut cell_nodes = Vec::with_capacity(mesh.n_cells() * n_local);
    if !elem.is_continuous() {
        let node_coords = (0..mesh.n_cells())
            .map(|c| {
                let [a, b, d] = mesh.cell_vertices(c);
                [(a[0] + b[0] + d[0]) / 3.0, (a[1] + b[1] + d[1]) / 3.0]
            })
            .collect::<Vec<_>>();
        cell_nodes.extend(0..mesh.n_cells());
        return DofMap {
            elem,
            components,
            n_nodes: mesh.n_cells(),
            n_local,
            cell_nodes,
            node_coords,
            lattice: None,
        };
    }
    let k = elem.degree() as usize;
    let cols = k * mesh.nx() + 1;
    let rows = k * mesh.ny() + 1;
    let dom = mesh.domain();
    let sx = mesh.dx() / k as f64;
    let sy = mesh.dy() / k as f64;
    let mut node_coords = Vec::with_capacity(cols * rows);
    for j in 0..rows {
        for i in 0..cols {
            let x = if i == cols - 1 { dom.x_max } else { dom.x_min + i as f64 * sx };
            let y = if j == rows - 1 { dom.y_max } else { dom.y_min + j as f64 * sy };
            node_coords.push([x, y]);
        }
    }
    let local = elem.local_nodes();
    for c in 0..mesh.n_cells() {
        let (i, j) = mesh.cell_square(c);
        let (i0, j0) = (i * k, j * k);
        for a in local {
            let (a1, a2) = (a[1] as usize, a[2] as usize);
            let (li, lj) = match mesh.cell_shape(c) {
                CellShape::Lower => (i0 + a1 + a2, j0 + a2),
                CellShape::Upper => (i0 + a1, j0 + a1 + a2),
            };
            cell_nodes.push(lj * cols + li);
        }
    }
    DofMap {
        elem,
        components,
        n_nodes: cols * rows,
        n_local,
        cell_nodes,
        node_coords,
        lattice: Some((cols, rows)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(n: usize) -> BackgroundMesh {
        BackgroundMesh::build(RectDomain::unit_square(), n, n).unwrap()
    }

    #[test]
    fn minimal_mesh_counts() {
        let m = unit(1);
        assert_eq!(m.n_cells(), 2);
        assert_eq!(m.n_vertices(), 4);
    }

    #[test]
    fn ten_by_ten_counts_and_h() {
        let m = unit(10);
        assert_eq!(m.n_cells(), 200);
        assert_eq!(m.n_vertices(), 121);
        assert!((m.h() - 0.141_421_356_237_309_5).abs() < 1e-15);
    }

    #[test]
    fn zero_subdivisions_rejected() {
        assert_eq!(BackgroundMesh::build(RectDomain::unit_square(), 0, 3).unwrap_err(), Error::ZeroSubdivisions);
        assert!(RectDomain::new(1.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn cells_positive_and_cover_domain() {
        let m = BackgroundMesh::build(RectDomain::new(0.0, 100.0, 0.0, 50.0).unwrap(), 25, 12).unwrap();
        let mut total = 0.0;
        for c in 0..m.n_cells() {
            let a = m.cell_area(c);
            assert!(a > 0.0);
            total += a;
        }
        assert!((total - 5000.0).abs() < 1e-12 * 5000.0);
    }

    #[test]
    fn unsupported_degree() {
        assert_eq!(ElementType::lagrange(4).unwrap_err(), Error::UnsupportedDegree(4));
    }

    #[test]
    fn p1_nodal_and_centroid_values() {
        let p1 = ElementType::lagrange(1).unwrap();
        let (v, _) = reference_basis(p1, [1.0, 0.0, 0.0]).unwrap();
        assert_eq!(v, vec![1.0, 0.0, 0.0]);
        let (v, _) = reference_basis(p1, [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]).unwrap();
        for x in v {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn p2_edge_midpoint() {
        let p2 = ElementType::lagrange(2).unwrap();
        let (v, _) = reference_basis(p2, [0.5, 0.5, 0.0]).unwrap();
        assert_eq!(v[0], 0.0);
        assert_eq!(v[3], 1.0);
    }

    #[test]
    fn basis_is_nodal_for_all_degrees() {
        for k in 1..=3 {
            let e = ElementType::lagrange(k).unwrap();
            let coords = e.local_node_coords();
            let mut vals = vec![0.0; e.n_local()];
            for (i, &r) in coords.iter().enumerate() {
                e.eval_values(r, &mut vals);
                for (j, &v) in vals.iter().enumerate() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((v - expect).abs() < 1e-13, "k={k} node {i} basis {j}: {v}");
                }
            }
        }
    }

    #[test]
    fn point_outside_rejected() {
        let p1 = ElementType::lagrange(1).unwrap();
        assert_eq!(reference_basis(p1, [1.2, -0.2, 0.0]).unwrap_err(), Error::PointOutsideElement);
    }

    #[test]
    fn dof_counts_on_one_square() {
        let m = unit(1);
        let p1 = global_dof_map(&m, ElementType::lagrange(1).unwrap(), 2);
        assert_eq!(p1.n_dofs(), 8);
        let p2 = global_dof_map(&m, ElementType::lagrange(2).unwrap(), 2);
        assert_eq!(p2.n_dofs(), 18);
        let p0 = global_dof_map(&m, ElementType::lagrange(0).unwrap(), 2);
        assert_eq!(p0.n_dofs(), 4);
    }

    #[test]
    fn lattice_nodes_match_mapped_local_nodes() {
        let m = BackgroundMesh::build(RectDomain::new(-1.0, 2.0, 0.5, 1.5).unwrap(), 3, 2).unwrap();
        for k in 1..=3 {
            let e = ElementType::lagrange(k).unwrap();
            let dm = global_dof_map(&m, e, 2);
            assert_eq!(dm.n_nodes(), (3 * k as usize + 1) * (2 * k as usize + 1));
            let local = e.local_node_coords();
            for c in 0..m.n_cells() {
                let map = m.cell_map(c);
                for (a, &node) in dm.cell_nodes(c).iter().enumerate() {
                    let p = map.to_physical(local[a]);
                    let q = dm.node_coords()[node];
                    assert!((p[0] - q[0]).abs() < 1e-12 && (p[1] - q[1]).abs() < 1e-12);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn partition_of_unity_and_zero_gradient_sum(a in 0.0f64..1.0, b in 0.0f64..1.0, k in 1u8..=3) {
            let (xi, eta) = if a + b > 1.0 { (1.0 - a, 1.0 - b) } else { (a, b) };
            let e = ElementType::lagrange(k).unwrap();
            let (v, g) = reference_basis(e, [1.0 - xi - eta, xi, eta]).unwrap();
            let s: f64 = v.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            let gx: f64 = g.iter().map(|d| d[0]).sum();
            let gy: f64 = g.iter().map(|d| d[1]).sum();
            prop_assert!(gx.abs() < 1e-12 && gy.abs() < 1e-12);
        }

        #[test]
        fn gradients_match_central_differences(a in 0.05f64..0.9, b in 0.05f64..0.9, k in 0u8..=3) {
            let (xi, eta) = if a + b > 0.95 { (0.95 - b, 0.95 - a) } else { (a, b) };
            let e = ElementType::lagrange(k).unwrap();
            let n = e.n_local();
            let mut v = vec![0.0; n];
            let mut g = vec![[0.0; 2]; n];
            e.eval([xi, eta], &mut v, &mut g);
            let step = 1e-6;
            let (mut vp, mut vm) = (vec![0.0; n], vec![0.0; n]);
            for dir in 0..2 {
                let mut rp = [xi, eta];
                let mut rm = [xi, eta];
                rp[dir] += step;
                rm[dir] -= step;
                e.eval_values(rp, &mut vp);
                e.eval_values(rm, &mut vm);
                for i in 0..n {
                    let fd = (vp[i] - vm[i]) / (2.0 * step);
                    prop_assert!((fd - g[i][dir]).abs() < 1e-6);
                }
            }
        }

        #[test]
        fn mesh_measure(nx in 1usize..20, ny in 1usize..20, w in 0.1f64..10.0, hgt in 0.1f64..10.0) {
            let m = BackgroundMesh::build(RectDomain::new(0.0, w, 0.0, hgt).unwrap(), nx, ny).unwrap();
            let total: f64 = (0..m.n_cells()).map(|c| m.cell_area(c)).sum();
            prop_assert!((total - w * hgt).abs() < 1e-12 * (w * hgt).max(1.0));
        }
    }
}
