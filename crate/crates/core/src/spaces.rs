//! Displacement and multiplier spaces of the fictitious-domain method.
//!
//! Vector DOFs are component-blocked in every space: DOF `c * n_nodes + l`
//! is component `c` of node `l`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::levelset::{CutMesh, InterfaceQuadrature, InterfaceTag, Side};
use crate::mesh::{global_dof_map, BackgroundMesh, DofMap, ElementType};
use crate::sparse::CsrMatrix;
use crate::Point;

const NONE: usize = usize::MAX;

/// Default relative pivot threshold for multiplier elimination.
pub const EPS_RANK: f64 = 1e-8;

/// Edges of the rectangle carrying a Dirichlet condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DirichletBoundary {
    pub bottom: bool,
    pub right: bool,
    pub top: bool,
    pub left: bool,
}

impl DirichletBoundary {
    pub const ALL: Self = Self { bottom: true, right: true, top: true, left: true };
    pub const NONE: Self = Self { bottom: false, right: false, top: false, left: false };
    /// Bottom and lateral edges clamped, top edge free.
    pub const ALL_BUT_TOP: Self = Self { bottom: true, right: true, top: false, left: true };

    fn contains(&self, mesh: &BackgroundMesh, p: Point) -> bool {
        let d = mesh.domain();
        let tol = 1e-12 * (d.width() + d.height());
        (self.bottom && (p[1] - d.y_min).abs() <= tol)
            || (self.top && (p[1] - d.y_max).abs() <= tol)
            || (self.left && (p[0] - d.x_min).abs() <= tol)
            || (self.right && (p[0] - d.x_max).abs() <= tol)
    }
}

/// The uncut vector space on the whole background mesh.
#[derive(Debug, Clone)]
pub struct UncutSpace {
    dofmap: DofMap,
    boundary: DirichletBoundary,
    dirichlet_node: Vec<bool>,
}

impl UncutSpace {
    pub fn new(mesh: &BackgroundMesh, elem: ElementType, boundary: DirichletBoundary) -> Self {
        let dofmap = global_dof_map(mesh, elem, 2);
        let dirichlet_node = if elem.is_continuous() {
            dofmap.node_coords().iter().map(|&p| boundary.contains(mesh, p)).collect()
        } else {
            vec![false; dofmap.n_nodes()]
        };
        Self { dofmap, boundary, dirichlet_node }
    }

    pub fn dofmap(&self) -> &DofMap {
        &self.dofmap
    }

    pub fn element(&self) -> ElementType {
        self.dofmap.element()
    }

    pub fn boundary(&self) -> DirichletBoundary {
        self.boundary
    }

    pub fn n_nodes(&self) -> usize {
        self.dofmap.n_nodes()
    }

    pub fn n_dofs(&self) -> usize {
        self.dofmap.n_dofs()
    }

    pub fn is_dirichlet_node(&self, node: usize) -> bool {
        self.dirichlet_node[node]
    }

    /// Scalar DOF mask of the Dirichlet set.
    pub fn dirichlet_dofs(&self) -> Vec<bool> {
        let mut m = self.dirichlet_node.clone();
        m.extend_from_slice(&self.dirichlet_node);
        m
    }
}

/// `V⁺_h` or `V⁻_h`: the uncut nodes whose support meets the side.
#[derive(Debug, Clone)]
pub struct RestrictedSpace {
    side: Side,
    n_uncut_nodes: usize,
    kept: Vec<usize>,
    local: Vec<usize>,
    dirichlet: Vec<bool>,
}

impl RestrictedSpace {
    pub fn build(space: &UncutSpace, cutmesh: &CutMesh, side: Side) -> Result<Self> {
        if !cutmesh.has_side(side) {
            return Err(Error::InvalidCrack("the level set leaves one side of the domain empty"));
        }
        let dm = space.dofmap();
        let mut mark = vec![false; dm.n_nodes()];
        for c in 0..cutmesh.mesh().n_cells() {
            if cutmesh.geometry(c).touches(side) {
                for &n in dm.cell_nodes(c) {
                    mark[n] = true;
                }
            }
        }
        let mut local = vec![NONE; dm.n_nodes()];
        let mut kept = Vec::new();
        for (n, _) in mark.iter().enumerate().filter(|(_, &m)| m) {
            local[n] = kept.len();
            kept.push(n);
        }
        let dirichlet = kept.iter().map(|&n| space.is_dirichlet_node(n)).collect();
        Ok(Self { side, n_uncut_nodes: dm.n_nodes(), kept, local, dirichlet })
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn n_nodes(&self) -> usize {
        self.kept.len()
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.kept.len()
    }

    /// Uncut node indices of the kept nodes, ascending.
    pub fn kept_nodes(&self) -> &[usize] {
        &self.kept
    }

    pub fn local_node(&self, uncut_node: usize) -> Option<usize> {
        let l = self.local[uncut_node];
        (l != NONE).then_some(l)
    }

    #[inline]
    pub fn dof(&self, local_node: usize, component: usize) -> usize {
        component * self.kept.len() + local_node
    }

    /// Restricted DOF of an uncut node, panicking if the node is not kept.
    #[inline]
    pub(crate) fn dof_of_uncut(&self, uncut_node: usize, component: usize) -> usize {
        let l = self.local[uncut_node];
        debug_assert!(l != NONE);
        component * self.kept.len() + l
    }

    /// Mask over restricted DOFs of the Dirichlet set.
    pub fn dirichlet_dofs(&self) -> Vec<bool> {
        let mut m = self.dirichlet.clone();
        m.extend_from_slice(&self.dirichlet);
        m
    }

    /// `R`: uncut DOF vector to restricted DOF vector.
    pub fn reduction(&self) -> CsrMatrix {
        let n = self.kept.len();
        let entries: Vec<_> = (0..2)
            .flat_map(|c| self.kept.iter().enumerate().map(move |(l, &g)| (c * n + l, c * self.n_uncut_nodes + g, 1.0)))
            .collect();
        CsrMatrix::from_triplets(2 * n, 2 * self.n_uncut_nodes, &entries)
    }

    /// `E = Rᵀ`.
    pub fn extension(&self) -> CsrMatrix {
        self.reduction().transpose()
    }

    pub fn restrict(&self, uncut: &[f64]) -> Vec<f64> {
        assert_eq!(uncut.len(), 2 * self.n_uncut_nodes);
        (0..2).flat_map(|c| self.kept.iter().map(move |&g| uncut[c * self.n_uncut_nodes + g])).collect()
    }

    pub fn extend(&self, restricted: &[f64]) -> Vec<f64> {
        let n = self.kept.len();
        assert_eq!(restricted.len(), 2 * n);
        let mut out = vec![0.0; 2 * self.n_uncut_nodes];
        for c in 0..2 {
            for (l, &g) in self.kept.iter().enumerate() {
                out[c * self.n_uncut_nodes + g] = restricted[c * n + l];
            }
        }
        out
    }

    /// Nodal interpolant of `f` (evaluated at every kept node, including
    /// nodes lying on the other side of the interface).
    pub fn interpolate(&self, dofmap: &DofMap, f: &dyn Fn(Point) -> [f64; 2]) -> Vec<f64> {
        let n = self.kept.len();
        let mut out = vec![0.0; 2 * n];
        for (l, &g) in self.kept.iter().enumerate() {
            let v = f(dofmap.node_coords()[g]);
            out[l] = v[0];
            out[n + l] = v[1];
        }
        out
    }
}

/// `W_h`: traces on `Γ₀` of a background Lagrange space, with redundant
/// functions removed.
#[derive(Debug, Clone)]
pub struct MultiplierSpace {
    dofmap: DofMap,
    active: Vec<usize>,
    local: Vec<usize>,
}

impl MultiplierSpace {
    /// Candidates are the background nodes whose basis function does not
    /// vanish identically on the `Γ₀` quadrature points. They are visited in
    /// ascending order; a candidate is kept when its Cholesky pivot in the
    /// `Γ₀` mass matrix of the kept set exceeds `eps_rank` times the largest
    /// candidate diagonal.
    pub fn build(
        elem: ElementType,
        mesh: &BackgroundMesh,
        interface: &InterfaceQuadrature,
        eps_rank: f64,
    ) -> Result<Self> {
        let dofmap = global_dof_map(mesh, elem, 1);
        let n_loc = elem.n_local();
        let mut vals = vec![0.0; n_loc];

        // Trace values per Γ₀ point, on the candidate index set.
        let mut cand_of = vec![NONE; dofmap.n_nodes()];
        let mut candidates = Vec::new();
        let mut traces: Vec<(f64, Vec<(usize, f64)>)> = Vec::new();
        for q in interface.tagged(InterfaceTag::Gamma0) {
            if q.weight <= 0.0 {
                continue;
            }
            elem.eval_values(q.ref_point, &mut vals);
            let mut row = Vec::with_capacity(n_loc);
            for (i, &node) in dofmap.cell_nodes(q.cell).iter().enumerate() {
                if vals[i] != 0.0 {
                    if cand_of[node] == NONE {
                        cand_of[node] = 0;
                        candidates.push(node);
                    }
                    row.push((node, vals[i]));
                }
            }
            traces.push((q.weight, row));
        }
        if traces.is_empty() {
            return Err(Error::EmptyInterface);
        }
        candidates.sort_unstable();
        for (k, &n) in candidates.iter().enumerate() {
            cand_of[n] = k;
        }

        let m = candidates.len();
        let mut gram = vec![0.0; m * m];
        for (w, row) in &traces {
            for &(a, va) in row {
                for &(b, vb) in row {
                    gram[cand_of[a] * m + cand_of[b]] += w * va * vb;
                }
            }
        }
        let max_diag = (0..m).map(|i| gram[i * m + i]).fold(0.0f64, f64::max);
        if max_diag <= 0.0 {
            return Err(Error::EmptyInterface);
        }

        // Incremental Cholesky over the kept set; `l` holds rows of L.
        let mut kept: Vec<usize> = Vec::new();
        let mut l: Vec<Vec<f64>> = Vec::new();
        let mut y = Vec::with_capacity(m);
        for j in 0..m {
            y.clear();
            for (r, &kr) in kept.iter().enumerate() {
                let mut s = gram[kr * m + j];
                for t in 0..r {
                    s -= l[r][t] * y[t];
                }
                y.push(s / l[r][r]);
            }
            let d = gram[j * m + j] - y.iter().map(|v| v * v).sum::<f64>();
            if d > eps_rank * max_diag {
                let mut row = y.clone();
                row.push(crate::math::sqrt(d));
                l.push(row);
                kept.push(j);
            }
        }

        let active: Vec<usize> = kept.iter().map(|&j| candidates[j]).collect();
        let mut local = vec![NONE; dofmap.n_nodes()];
        for (k, &n) in active.iter().enumerate() {
            local[n] = k;
        }
        Ok(Self { dofmap, active, local })
    }

    pub fn element(&self) -> ElementType {
        self.dofmap.element()
    }

    /// Scalar background DOF map of the trace element.
    pub fn dofmap(&self) -> &DofMap {
        &self.dofmap
    }

    /// Background nodes kept as multiplier functions, ascending.
    pub fn active_nodes(&self) -> &[usize] {
        &self.active
    }

    pub fn n_nodes(&self) -> usize {
        self.active.len()
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.active.len()
    }

    pub fn local_node(&self, node: usize) -> Option<usize> {
        let l = self.local[node];
        (l != NONE).then_some(l)
    }

    #[inline]
    pub fn dof(&self, local_node: usize, component: usize) -> usize {
        component * self.active.len() + local_node
    }

    /// Nodal interpolant of `f` at the active nodes.
    pub fn interpolate(&self, f: &dyn Fn(Point) -> [f64; 2]) -> Vec<f64> {
        let n = self.active.len();
        let mut out = vec![0.0; 2 * n];
        for (l, &g) in self.active.iter().enumerate() {
            let v = f(self.dofmap.node_coords()[g]);
            out[l] = v[0];
            out[n + l] = v[1];
        }
        out
    }
}

/// The three spaces of one discretization.
#[derive(Debug, Clone)]
pub struct FdSpaces {
    pub uncut: UncutSpace,
    pub plus: RestrictedSpace,
    pub minus: RestrictedSpace,
    pub multiplier: MultiplierSpace,
}

impl FdSpaces {
    pub fn side(&self, side: Side) -> &RestrictedSpace {
        match side {
            Side::Plus => &self.plus,
            Side::Minus => &self.minus,
        }
    }

    /// Number of background nodes carried by both displacement spaces.
    pub fn doubled_nodes(&self) -> usize {
        self.plus.kept_nodes().iter().filter(|&&n| self.minus.local_node(n).is_some()).count()
    }
}
