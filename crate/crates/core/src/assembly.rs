//! Matrices and vectors of the fictitious-domain saddle-point system.
//!
//! With `γ = γ₀ h`, the unknowns `(U⁺, U⁻, Λ)` solve
//!
//! ```text
//! [ A⁺   0    B⁺ᵀ ] [U⁺]   [F⁺]
//! [ 0    A⁻  -B⁻ᵀ ] [U⁻] = [F⁻]
//! [ B⁺  -B⁻  -C   ] [Λ ]   [G ]
//! ```
//!
//! where `A± = A₀± - γ A±_uu`, `B± = B₀± - γ (A±_uλ)ᵀ` and `C = 2γ M`.
//! The multiplier approximates `λ = -σ(u⁺)n⁺ = σ(u⁻)n⁻` on `Γ₀`.
//! Dirichlet DOFs are eliminated symmetrically: their rows and columns are
//! replaced by the identity and the known values are lifted to the
//! right-hand side.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::levelset::{CutMesh, InterfaceQuadrature, InterfaceTag, Side, SubdomainQuadrature};
use crate::material::Material;
use crate::mesh::{AffineMap, BackgroundMesh, CellShape, DofMap, ElementType};
use crate::sparse::{block_matrix, CsrMatrix, Triplets};
use crate::spaces::{FdSpaces, RestrictedSpace, UncutSpace};
use crate::Point;

pub type VectorField = Arc<dyn Fn(Point) -> Point + Send + Sync>;
/// Crack-face traction as a function of position and outward normal.
pub type TractionField = Arc<dyn Fn(Point, Point) -> Point + Send + Sync>;

/// Load applied on the physical crack `Γ_T`.
#[derive(Clone, Default)]
pub enum CrackLoad {
    #[default]
    Free,
    /// Pressure `p` inside the crack: traction `-p n±` on each face.
    Pressure(f64),
    /// Traction `g(x, n±)` on each face.
    Traction(TractionField),
}

/// Data of one boundary value problem. `None` fields are zero.
#[derive(Clone, Default)]
pub struct ProblemData {
    pub body_force: Option<VectorField>,
    pub crack_load: CrackLoad,
    /// Prescribed jump `u⁺ - u⁻` on `Γ₀`.
    pub jump: Option<VectorField>,
    pub dirichlet_plus: Option<VectorField>,
    pub dirichlet_minus: Option<VectorField>,
}

impl core::fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("ProblemData").finish_non_exhaustive()
    }
}

/// Quadrature degrees for displacement degree `k`: `2k` on cells, `2k + 1`
/// on the interface.
pub fn quadrature_degrees(k: u8) -> (usize, usize) {
    (2 * k as usize, 2 * k as usize + 1)
}

/// Element stiffness on one cell. Local DOF `a * n + i` is component `a` of
/// local basis function `i`; the result is row-major.
pub fn element_stiffness(
    elem: ElementType,
    map: &AffineMap,
    rule: impl Iterator<Item = ([f64; 2], f64)>,
    material: &Material,
) -> Vec<f64> {
    let n = elem.n_local();
    let nd = 2 * n;
    let (lam, mu) = (material.lambda(), material.mu());
    let mut k = vec![0.0; nd * nd];
    let mut vals = vec![0.0; n];
    let mut grads = vec![[0.0; 2]; n];
    for (r, w) in rule {
        elem.eval(r, &mut vals, &mut grads);
        for g in grads.iter_mut() {
            *g = map.grad_to_physical(*g);
        }
        for i in 0..n {
            let gi = grads[i];
            for j in 0..n {
                let gj = grads[j];
                let dot = gi[0] * gj[0] + gi[1] * gj[1];
                for a in 0..2 {
                    for b in 0..2 {
                        let mut v = mu * gi[b] * gj[a] + lam * gi[a] * gj[b];
                        if a == b {
                            v += mu * dot;
                        }
                        k[(a * n + i) * nd + b * n + j] += w * v;
                    }
                }
            }
        }
    }
    k
}

/// `σ(φ_i e_a) n` for every local DOF `a * n + i`.
fn basis_tractions(grads: &[[f64; 2]], n: Point, material: &Material, out: &mut Vec<Point>) {
    let (lam, mu) = (material.lambda(), material.mu());
    let nl = grads.len();
    out.clear();
    out.resize(2 * nl, [0.0; 2]);
    for a in 0..2 {
        for (i, g) in grads.iter().enumerate() {
            let gn = g[0] * n[0] + g[1] * n[1];
            let mut t = [0.0; 2];
            for (k, tk) in t.iter_mut().enumerate() {
                *tk = mu * (g[k] * n[a]) + lam * g[a] * n[k];
                if k == a {
                    *tk += mu * gn;
                }
            }
            out[a * nl + i] = t;
        }
    }
}

fn whole_cell_matrices(mesh: &BackgroundMesh, elem: ElementType, material: &Material, degree: usize) -> [Vec<f64>; 2] {
    let rule = crate::quadrature::triangle_rule(degree);
    let mut out = [Vec::new(), Vec::new()];
    for (slot, cell) in [(0, 0), (1, 1)] {
        let map = mesh.cell_map(cell);
        let s = map.det.abs();
        out[slot] = element_stiffness(elem, &map, rule.points.iter().copied().zip(rule.weights.iter().map(|w| w * s)), material);
    }
    out
}

fn shape_slot(s: CellShape) -> usize {
    match s {
        CellShape::Lower => 0,
        CellShape::Upper => 1,
    }
}

/// Stiffness `A₀` of the uncut space, without boundary conditions.
pub fn assemble_base_stiffness(mesh: &BackgroundMesh, dofmap: &DofMap, material: &Material) -> CsrMatrix {
    let elem = dofmap.element();
    let cached = whole_cell_matrices(mesh, elem, material, 2 * elem.degree() as usize);
    let n = elem.n_local();
    let nd = 2 * n;
    let mut t = Triplets::with_capacity(dofmap.n_dofs(), dofmap.n_dofs(), mesh.n_cells() * nd * nd);
    let mut idx = vec![0usize; nd];
    for c in 0..mesh.n_cells() {
        let k = &cached[shape_slot(mesh.cell_shape(c))];
        for (i, &node) in dofmap.cell_nodes(c).iter().enumerate() {
            idx[i] = dofmap.dof(node, 0);
            idx[n + i] = dofmap.dof(node, 1);
        }
        for r in 0..nd {
            for s in 0..nd {
                t.push(idx[r], idx[s], k[r * nd + s]);
            }
        }
    }
    t.into_csr()
}

/// `A₀±` on a restricted space, without boundary conditions. Uncut cells
/// reuse the two cached whole-cell matrices; cut cells are integrated over
/// their sub-triangles on the space's side.
pub fn assemble_subdomain_stiffness(
    cutmesh: &CutMesh,
    volume: &SubdomainQuadrature,
    uncut: &UncutSpace,
    space: &RestrictedSpace,
    material: &Material,
) -> CsrMatrix {
    let mesh = cutmesh.mesh();
    let elem = uncut.element();
    let side = space.side();
    let cached = whole_cell_matrices(mesh, elem, material, volume.degree());
    let n = elem.n_local();
    let nd = 2 * n;
    let mut t = Triplets::with_capacity(space.n_dofs(), space.n_dofs(), mesh.n_cells() * nd * nd / 2);
    let mut idx = vec![0usize; nd];
    for c in 0..mesh.n_cells() {
        let Some(rule) = volume.rule(c, side) else { continue };
        let cut;
        let k = if volume.is_cut(c) {
            cut = element_stiffness(elem, &mesh.cell_map(c), rule.iter(), material);
            &cut
        } else {
            &cached[shape_slot(mesh.cell_shape(c))]
        };
        for (i, &node) in uncut.dofmap().cell_nodes(c).iter().enumerate() {
            idx[i] = space.dof_of_uncut(node, 0);
            idx[n + i] = space.dof_of_uncut(node, 1);
        }
        for r in 0..nd {
            for s in 0..nd {
                t.push(idx[r], idx[s], k[r * nd + s]);
            }
        }
    }
    t.into_csr()
}

/// Result of symmetric Dirichlet elimination.
#[derive(Debug, Clone)]
pub struct Eliminated {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
}

/// Replace the rows and columns flagged in `mask` by the identity, lifting
/// the prescribed `values` into the right-hand side.
pub fn eliminate_dirichlet(a: &CsrMatrix, rhs: &[f64], mask: &[bool], values: &[f64]) -> Eliminated {
    let n = a.nrows();
    assert!(mask.len() == n && values.len() == n && rhs.len() == n);
    let mut out = rhs.to_vec();
    let mut entries = Vec::with_capacity(a.nnz());
    for (i, j, v) in a.iter() {
        match (mask[i], mask[j]) {
            (false, false) => entries.push((i, j, v)),
            (false, true) => out[i] -= v * values[j],
            _ => {}
        }
    }
    for i in 0..n {
        if mask[i] {
            entries.push((i, i, 1.0));
            out[i] = values[i];
        }
    }
    Eliminated { matrix: CsrMatrix::from_triplets(n, n, &entries), rhs: out }
}

/// Zero the flagged columns of a coupling block and return `B_{:,D} g_D`.
fn eliminate_columns(b: &CsrMatrix, mask: &[bool], values: &[f64]) -> (CsrMatrix, Vec<f64>) {
    let mut moved = vec![0.0; b.nrows()];
    let mut entries = Vec::with_capacity(b.nnz());
    for (i, j, v) in b.iter() {
        if mask[j] {
            moved[i] += v * values[j];
        } else {
            entries.push((i, j, v));
        }
    }
    (CsrMatrix::from_triplets(b.nrows(), b.ncols(), &entries), moved)
}

/// Error-metric blocks on `Γ₀`: `A±_uu[i,j] = ∫(σ(φ_i)n±)·(σ(φ_j)n±)`,
/// `A±_uλ[i,j] = ∫(σ(φ_i)n±)·ψ_j` and `A_λλ[i,j] = ∫ψ_i·ψ_j`.
#[derive(Debug, Clone)]
pub struct ErrorMatrices {
    pub uu_plus: CsrMatrix,
    pub uu_minus: CsrMatrix,
    pub ul_plus: CsrMatrix,
    pub ul_minus: CsrMatrix,
    pub ll: CsrMatrix,
}

impl ErrorMatrices {
    pub fn uu(&self, side: Side) -> &CsrMatrix {
        match side {
            Side::Plus => &self.uu_plus,
            Side::Minus => &self.uu_minus,
        }
    }

    pub fn ul(&self, side: Side) -> &CsrMatrix {
        match side {
            Side::Plus => &self.ul_plus,
            Side::Minus => &self.ul_minus,
        }
    }
}

/// Unconstrained right-hand sides, before Dirichlet lifting.
#[derive(Debug, Clone)]
pub struct RawRhs {
    pub f_plus: Vec<f64>,
    pub f_minus: Vec<f64>,
    pub g: Vec<f64>,
}

/// The assembled block system.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub a_plus: CsrMatrix,
    pub a_minus: CsrMatrix,
    /// Multiplier rows by displacement columns.
    pub b_plus: CsrMatrix,
    pub b_minus: CsrMatrix,
    pub c: CsrMatrix,
    pub f_plus: Vec<f64>,
    pub f_minus: Vec<f64>,
    pub g: Vec<f64>,
    /// Stabilization weight `γ = γ₀ h`.
    pub gamma: f64,
    /// `Γ₀` mass matrix of the multiplier space (`A_λλ`).
    pub mass: CsrMatrix,
}

impl SaddleSystem {
    pub fn n_plus(&self) -> usize {
        self.a_plus.nrows()
    }

    pub fn n_minus(&self) -> usize {
        self.a_minus.nrows()
    }

    pub fn n_multiplier(&self) -> usize {
        self.c.nrows()
    }

    pub fn n_total(&self) -> usize {
        self.n_plus() + self.n_minus() + self.n_multiplier()
    }

    pub fn full_matrix(&self) -> CsrMatrix {
        let bpt = self.b_plus.transpose();
        let bmt = self.b_minus.transpose().scaled(-1.0);
        let bm = self.b_minus.scaled(-1.0);
        let c = self.c.scaled(-1.0);
        let sizes = [self.n_plus(), self.n_minus(), self.n_multiplier()];
        block_matrix(
            &[
                &[Some(&self.a_plus), None, Some(&bpt)],
                &[None, Some(&self.a_minus), Some(&bmt)],
                &[Some(&self.b_plus), Some(&bm), Some(&c)],
            ],
            &sizes,
            &sizes,
        )
    }

    pub fn full_rhs(&self) -> Vec<f64> {
        let mut r = self.f_plus.clone();
        r.extend_from_slice(&self.f_minus);
        r.extend_from_slice(&self.g);
        r
    }

    /// Block product with `(U⁺, U⁻, Λ)`.
    pub fn apply(&self, up: &[f64], um: &[f64], lam: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut rp = self.a_plus.mul_vec(up);
        self.b_plus.tr_mul_vec_add(1.0, lam, &mut rp);
        let mut rm = self.a_minus.mul_vec(um);
        self.b_minus.tr_mul_vec_add(-1.0, lam, &mut rm);
        let mut rl = self.b_plus.mul_vec(up);
        self.b_minus.mul_vec_add(-1.0, um, &mut rl);
        self.c.mul_vec_add(-1.0, lam, &mut rl);
        (rp, rm, rl)
    }
}

// Basis data at one interface point.
struct PointBasis {
    disp_vals: Vec<f64>,
    disp_grads: Vec<[f64; 2]>,
    mult_vals: Vec<f64>,
}

/// Assembles every operator of one discretization.
pub struct Assembler<'a> {
    cutmesh: &'a CutMesh,
    spaces: &'a FdSpaces,
    volume: &'a SubdomainQuadrature,
    interface: &'a InterfaceQuadrature,
    material: Material,
    basis: Vec<PointBasis>,
}

impl<'a> Assembler<'a> {
    pub fn new(
        cutmesh: &'a CutMesh,
        spaces: &'a FdSpaces,
        volume: &'a SubdomainQuadrature,
        interface: &'a InterfaceQuadrature,
        material: Material,
    ) -> Self {
        let elem = spaces.uncut.element();
        let melem = spaces.multiplier.element();
        let basis = interface
            .points
            .iter()
            .map(|q| {
                let map = cutmesh.mesh().cell_map(q.cell);
                let mut disp_vals = vec![0.0; elem.n_local()];
                let mut disp_grads = vec![[0.0; 2]; elem.n_local()];
                elem.eval(q.ref_point, &mut disp_vals, &mut disp_grads);
                for g in disp_grads.iter_mut() {
                    *g = map.grad_to_physical(*g);
                }
                let mut mult_vals = vec![0.0; melem.n_local()];
                melem.eval_values(q.ref_point, &mut mult_vals);
                PointBasis { disp_vals, disp_grads, mult_vals }
            })
            .collect();
        Self { cutmesh, spaces, volume, interface, material, basis }
    }

    pub fn material(&self) -> &Material {
        &self.material
    }

    fn disp_dofs(&self, side: Side, cell: usize, out: &mut Vec<usize>) {
        let space = self.spaces.side(side);
        let nodes = self.spaces.uncut.dofmap().cell_nodes(cell);
        out.clear();
        for a in 0..2 {
            out.extend(nodes.iter().map(|&nd| space.dof_of_uncut(nd, a)));
        }
    }

    // Multiplier DOFs of the cell, `None` for eliminated functions.
    fn mult_dofs(&self, cell: usize, out: &mut Vec<Option<usize>>) {
        let ms = &self.spaces.multiplier;
        let nodes = ms.dofmap().cell_nodes(cell);
        out.clear();
        for a in 0..2 {
            out.extend(nodes.iter().map(|&nd| ms.local_node(nd).map(|l| ms.dof(l, a))));
        }
    }

    pub fn base_stiffness(&self) -> CsrMatrix {
        assemble_base_stiffness(self.cutmesh.mesh(), self.spaces.uncut.dofmap(), &self.material)
    }

    /// `A₀±` on the restricted space, without boundary conditions.
    pub fn subdomain_stiffness(&self, side: Side) -> CsrMatrix {
        assemble_subdomain_stiffness(self.cutmesh, self.volume, &self.spaces.uncut, self.spaces.side(side), &self.material)
    }

    /// `B₀±[i, j] = ∫_{Γ₀} ψ_i · φ_j±`.
    pub fn coupling(&self, side: Side) -> CsrMatrix {
        let nl = self.spaces.multiplier.n_dofs();
        let space = self.spaces.side(side);
        let mut t = Triplets::new(nl, space.n_dofs());
        let (mut ui, mut li) = (Vec::new(), Vec::new());
        let n_u = self.spaces.uncut.element().n_local();
        let n_m = self.spaces.multiplier.element().n_local();
        for (q, pb) in self.interface.points.iter().zip(&self.basis) {
            if q.tag != InterfaceTag::Gamma0 {
                continue;
            }
            self.disp_dofs(side, q.cell, &mut ui);
            self.mult_dofs(q.cell, &mut li);
            for a in 0..2 {
                for (m, &psi) in pb.mult_vals.iter().enumerate() {
                    let Some(row) = li[a * n_m + m] else { continue };
                    for (i, &phi) in pb.disp_vals.iter().enumerate() {
                        t.push(row, ui[a * n_u + i], q.weight * psi * phi);
                    }
                }
            }
        }
        t.into_csr()
    }

    pub fn error_matrices(&self) -> ErrorMatrices {
        let nl = self.spaces.multiplier.n_dofs();
        let n_u = self.spaces.uncut.element().n_local();
        let n_m = self.spaces.multiplier.element().n_local();
        let mut ll = Triplets::new(nl, nl);
        let mut uu = [
            Triplets::new(self.spaces.plus.n_dofs(), self.spaces.plus.n_dofs()),
            Triplets::new(self.spaces.minus.n_dofs(), self.spaces.minus.n_dofs()),
        ];
        let mut ul = [
            Triplets::new(self.spaces.plus.n_dofs(), nl),
            Triplets::new(self.spaces.minus.n_dofs(), nl),
        ];
        let (mut ui, mut li, mut tr) = (Vec::new(), Vec::new(), Vec::new());
        for (q, pb) in self.interface.points.iter().zip(&self.basis) {
            if q.tag != InterfaceTag::Gamma0 {
                continue;
            }
            let w = q.weight;
            self.mult_dofs(q.cell, &mut li);
            for a in 0..2 {
                for (m, &pm) in pb.mult_vals.iter().enumerate() {
                    let Some(r) = li[a * n_m + m] else { continue };
                    for (k, &pk) in pb.mult_vals.iter().enumerate() {
                        if let Some(s) = li[a * n_m + k] {
                            ll.push(r, s, w * pm * pk);
                        }
                    }
                }
            }
            for (slot, side) in Side::BOTH.into_iter().enumerate() {
                basis_tractions(&pb.disp_grads, q.normal(side), &self.material, &mut tr);
                self.disp_dofs(side, q.cell, &mut ui);
                for r in 0..2 * n_u {
                    for s in 0..2 * n_u {
                        let v = tr[r][0] * tr[s][0] + tr[r][1] * tr[s][1];
                        uu[slot].push(ui[r], ui[s], w * v);
                    }
                    for a in 0..2 {
                        for (m, &pm) in pb.mult_vals.iter().enumerate() {
                            if let Some(col) = li[a * n_m + m] {
                                ul[slot].push(ui[r], col, w * tr[r][a] * pm);
                            }
                        }
                    }
                }
            }
        }
        let [uu_plus, uu_minus] = uu.map(Triplets::into_csr);
        let [ul_plus, ul_minus] = ul.map(Triplets::into_csr);
        ErrorMatrices { uu_plus, uu_minus, ul_plus, ul_minus, ll: ll.into_csr() }
    }

    /// Loads `F±` and jump data `G`, before boundary conditions.
    pub fn rhs(&self, data: &ProblemData) -> RawRhs {
        let mesh = self.cutmesh.mesh();
        let elem = self.spaces.uncut.element();
        let n_u = elem.n_local();
        let n_m = self.spaces.multiplier.element().n_local();
        let mut f = [vec![0.0; self.spaces.plus.n_dofs()], vec![0.0; self.spaces.minus.n_dofs()]];
        let mut idx = Vec::new();
        let mut vals = vec![0.0; n_u];
        if let Some(force) = &data.body_force {
            for (slot, side) in Side::BOTH.into_iter().enumerate() {
                for c in 0..mesh.n_cells() {
                    let Some(rule) = self.volume.rule(c, side) else { continue };
                    let map = mesh.cell_map(c);
                    self.disp_dofs(side, c, &mut idx);
                    for (r, w) in rule.iter() {
                        let fx = force(map.to_physical(r));
                        elem.eval_values(r, &mut vals);
                        for a in 0..2 {
                            for i in 0..n_u {
                                f[slot][idx[a * n_u + i]] += w * fx[a] * vals[i];
                            }
                        }
                    }
                }
            }
        }
        let mut g = vec![0.0; self.spaces.multiplier.n_dofs()];
        let mut li = Vec::new();
        for (q, pb) in self.interface.points.iter().zip(&self.basis) {
            match q.tag {
                InterfaceTag::GammaT => {
                    for (slot, side) in Side::BOTH.into_iter().enumerate() {
                        let n = q.normal(side);
                        let t = match &data.crack_load {
                            CrackLoad::Free => continue,
                            CrackLoad::Pressure(p) => [-p * n[0], -p * n[1]],
                            CrackLoad::Traction(gf) => gf(q.point, n),
                        };
                        self.disp_dofs(side, q.cell, &mut idx);
                        for a in 0..2 {
                            for (i, &phi) in pb.disp_vals.iter().enumerate() {
                                f[slot][idx[a * n_u + i]] += q.weight * t[a] * phi;
                            }
                        }
                    }
                }
                InterfaceTag::Gamma0 => {
                    let Some(jump) = &data.jump else { continue };
                    let d = jump(q.point);
                    self.mult_dofs(q.cell, &mut li);
                    for a in 0..2 {
                        for (m, &psi) in pb.mult_vals.iter().enumerate() {
                            if let Some(r) = li[a * n_m + m] {
                                g[r] += q.weight * d[a] * psi;
                            }
                        }
                    }
                }
            }
        }
        let [f_plus, f_minus] = f;
        RawRhs { f_plus, f_minus, g }
    }

    /// The block system with `γ = γ₀ h`, Dirichlet conditions eliminated.
    /// Also returns the error-metric blocks it was built from.
    pub fn stabilized(&self, gamma0: f64, data: &ProblemData) -> (SaddleSystem, ErrorMatrices) {
        let gamma = gamma0 * self.cutmesh.mesh().h();
        let err = self.error_matrices();
        let raw = self.rhs(data);
        let dofmap = self.spaces.uncut.dofmap();
        let zero: VectorField = Arc::new(|_| [0.0, 0.0]);

        let mut blocks = Vec::new();
        let mut g = raw.g.clone();
        for (side, f_raw) in [(Side::Plus, &raw.f_plus), (Side::Minus, &raw.f_minus)] {
            let space = self.spaces.side(side);
            let mut a = self.subdomain_stiffness(side);
            let mut b = self.coupling(side);
            if gamma != 0.0 {
                a = a.add_scaled(1.0, err.uu(side), -gamma);
                b = b.add_scaled(1.0, &err.ul(side).transpose(), -gamma);
            }
            let bc = match side {
                Side::Plus => data.dirichlet_plus.as_ref().unwrap_or(&zero),
                Side::Minus => data.dirichlet_minus.as_ref().unwrap_or(&zero),
            };
            let mask = space.dirichlet_dofs();
            let values = dirichlet_values(space, dofmap, &mask, bc.as_ref());
            let el = eliminate_dirichlet(&a, f_raw, &mask, &values);
            let (b, moved) = eliminate_columns(&b, &mask, &values);
            let sign = if side == Side::Plus { -1.0 } else { 1.0 };
            for (gi, m) in g.iter_mut().zip(&moved) {
                *gi += sign * m;
            }
            blocks.push((el, b));
        }
        let (el_minus, b_minus) = blocks.pop().expect("two sides");
        let (el_plus, b_plus) = blocks.pop().expect("two sides");
        let c = if gamma == 0.0 { CsrMatrix::zeros(err.ll.nrows(), err.ll.ncols()) } else { err.ll.scaled(2.0 * gamma) };
        let sys = SaddleSystem {
            a_plus: el_plus.matrix,
            a_minus: el_minus.matrix,
            b_plus,
            b_minus,
            c,
            f_plus: el_plus.rhs,
            f_minus: el_minus.rhs,
            g,
            gamma,
            mass: err.ll.clone(),
        };
        (sys, err)
    }
}

fn dirichlet_values(space: &RestrictedSpace, dofmap: &DofMap, mask: &[bool], f: &dyn Fn(Point) -> Point) -> Vec<f64> {
    let n = space.n_nodes();
    let mut v = vec![0.0; 2 * n];
    for (l, &node) in space.kept_nodes().iter().enumerate() {
        if mask[l] {
            let x = f(dofmap.node_coords()[node]);
            v[l] = x[0];
            v[n + l] = x[1];
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levelset::{interface_quadrature, subdomain_quadrature, CrackDescription};
    use crate::mesh::{global_dof_map, RectDomain};
    use crate::spaces::{DirichletBoundary, MultiplierSpace, EPS_RANK};

    struct Setup {
        cm: CutMesh,
        spaces: FdSpaces,
        sq: SubdomainQuadrature,
        iq: InterfaceQuadrature,
    }

    fn setup(n: usize, k: u8, km: u8, crack: CrackDescription, bc: DirichletBoundary) -> Setup {
        let mesh = BackgroundMesh::build(RectDomain::unit_square(), n, n).unwrap();
        let uncut = UncutSpace::new(&mesh, ElementType::lagrange(k).unwrap(), bc);
        let cm = CutMesh::new(mesh, crack);
        let (vd, id) = quadrature_degrees(k);
        let sq = subdomain_quadrature(&cm, vd);
        let iq = interface_quadrature(&cm, id);
        let plus = RestrictedSpace::build(&uncut, &cm, Side::Plus).unwrap();
        let minus = RestrictedSpace::build(&uncut, &cm, Side::Minus).unwrap();
        let multiplier = MultiplierSpace::build(ElementType::lagrange(km).unwrap(), cm.mesh(), &iq, EPS_RANK).unwrap();
        Setup { cm, spaces: FdSpaces { uncut, plus, minus, multiplier }, sq, iq }
    }

    fn reference(n: usize, k: u8, km: u8) -> Setup {
        setup(n, k, km, CrackDescription::inclined(0.317, 0.47, 0.52), DirichletBoundary::ALL)
    }

    fn unit() -> Material {
        Material::new(1.0, 1.0).unwrap()
    }

    // Independent P1 oracle: constant strain-displacement matrix on a triangle.
    fn p1_oracle(tri: [Point; 3], lam: f64, mu: f64) -> [[f64; 6]; 6] {
        let area = 0.5 * ((tri[1][0] - tri[0][0]) * (tri[2][1] - tri[0][1]) - (tri[2][0] - tri[0][0]) * (tri[1][1] - tri[0][1]));
        let b = [tri[1][1] - tri[2][1], tri[2][1] - tri[0][1], tri[0][1] - tri[1][1]];
        let c = [tri[2][0] - tri[1][0], tri[0][0] - tri[2][0], tri[1][0] - tri[0][0]];
        // Engineering strain (exx, eyy, gxy) from interleaved (u_i, v_i).
        let mut bm = [[0.0; 6]; 3];
        for i in 0..3 {
            bm[0][2 * i] = b[i] / (2.0 * area);
            bm[1][2 * i + 1] = c[i] / (2.0 * area);
            bm[2][2 * i] = c[i] / (2.0 * area);
            bm[2][2 * i + 1] = b[i] / (2.0 * area);
        }
        let d = [[lam + 2.0 * mu, lam, 0.0], [lam, lam + 2.0 * mu, 0.0], [0.0, 0.0, mu]];
        let mut k = [[0.0; 6]; 6];
        for r in 0..6 {
            for s in 0..6 {
                let mut v = 0.0;
                for p in 0..3 {
                    for q in 0..3 {
                        v += bm[p][r] * d[p][q] * bm[q][s];
                    }
                }
                k[r][s] = v * area;
            }
        }
        k
    }

    #[test]
    fn base_stiffness_matches_p1_oracle() {
        let mesh = BackgroundMesh::build(RectDomain::unit_square(), 1, 1).unwrap();
        let dm = global_dof_map(&mesh, ElementType::lagrange(1).unwrap(), 2);
        let a = assemble_base_stiffness(&mesh, &dm, &unit());
        let mut expected = [[0.0; 8]; 8];
        for c in 0..2 {
            let ko = p1_oracle(mesh.cell_vertices(c), 1.0, 1.0);
            let nodes = dm.cell_nodes(c);
            for r in 0..6 {
                for s in 0..6 {
                    let gr = dm.dof(nodes[r / 2], r % 2);
                    let gs = dm.dof(nodes[s / 2], s % 2);
                    expected[gr][gs] += ko[r][s];
                }
            }
        }
        for i in 0..8 {
            for j in 0..8 {
                assert!((a.get(i, j) - expected[i][j]).abs() < 1e-14, "({i},{j})");
            }
        }
    }

    #[test]
    fn base_stiffness_kills_translations_and_is_symmetric() {
        for k in 1..=3 {
            let mesh = BackgroundMesh::build(RectDomain::unit_square(), 3, 2).unwrap();
            let dm = global_dof_map(&mesh, ElementType::lagrange(k).unwrap(), 2);
            let a = assemble_base_stiffness(&mesh, &dm, &Material::new(2.0, 0.7).unwrap());
            assert!(a.asymmetry() < 1e-12);
            for comp in 0..2 {
                let t: Vec<f64> = (0..dm.n_dofs()).map(|i| if i / dm.n_nodes() == comp { 1.0 } else { 0.0 }).collect();
                assert!(a.mul_vec(&t).iter().all(|v| v.abs() < 1e-12));
            }
        }
    }

    #[test]
    fn uncut_subdomain_equals_reduced_base() {
        let mesh = BackgroundMesh::build(RectDomain::unit_square(), 4, 4).unwrap();
        let uncut = UncutSpace::new(&mesh, ElementType::lagrange(2).unwrap(), DirichletBoundary::ALL);
        let cm = CutMesh::new(mesh, CrackDescription::without_crack(Arc::new(|_| 1.0)));
        let sq = subdomain_quadrature(&cm, 4);
        let plus = RestrictedSpace::build(&uncut, &cm, Side::Plus).unwrap();
        let a0 = assemble_base_stiffness(cm.mesh(), uncut.dofmap(), &unit());
        let ap = assemble_subdomain_stiffness(&cm, &sq, &uncut, &plus, &unit());
        let (r, e) = (plus.reduction(), plus.extension());
        for j in 0..plus.n_dofs() {
            let mut x = vec![0.0; plus.n_dofs()];
            x[j] = 1.0;
            let col = r.mul_vec(&a0.mul_vec(&e.mul_vec(&x)));
            for (i, v) in col.iter().enumerate() {
                assert!((ap.get(i, j) - v).abs() < 1e-12);
            }
        }
        let mask = plus.dirichlet_dofs();
        let el = eliminate_dirichlet(&ap, &vec![0.0; plus.n_dofs()], &mask, &vec![0.0; plus.n_dofs()]);
        for (i, j, v) in el.matrix.iter() {
            if mask[i] || mask[j] {
                assert!(i == j && v == 1.0);
            } else {
                assert_eq!(v, ap.get(i, j));
            }
        }
    }

    #[test]
    fn subdomain_energies_add_up_to_uncut_energy() {
        let s = reference(6, 2, 0);
        let asm = Assembler::new(&s.cm, &s.spaces, &s.sq, &s.iq, unit());
        let a0 = asm.base_stiffness();
        let dm = s.spaces.uncut.dofmap();
        let field = |p: Point| [p[0] * p[0] - 0.3 * p[1], p[0] * p[1] + 0.2 * p[1] * p[1]];
        let mut u = vec![0.0; dm.n_dofs()];
        for (n, &p) in dm.node_coords().iter().enumerate() {
            let v = field(p);
            u[dm.dof(n, 0)] = v[0];
            u[dm.dof(n, 1)] = v[1];
        }
        let total = a0.bilinear(&u, &u);
        let mut parts = 0.0;
        for side in Side::BOTH {
            let us = s.spaces.side(side).restrict(&u);
            parts += asm.subdomain_stiffness(side).bilinear(&us, &us);
        }
        assert!((total - parts).abs() < 1e-12 * total);
    }

    #[test]
    fn subdomain_blocks_factor_after_elimination() {
        let s = reference(8, 2, 0);
        let asm = Assembler::new(&s.cm, &s.spaces, &s.sq, &s.iq, unit());
        let (sys, _) = asm.stabilized(0.0, &ProblemData::default());
        for a in [&sys.a_plus, &sys.a_minus] {
            assert!(a.asymmetry() < 1e-12);
            let m = a.to_faer().unwrap();
            assert!(m.sp_cholesky(faer::Side::Lower).is_ok());
        }
    }

    #[test]
    fn constant_coupling_equals_gamma0_length() {
        let s = reference(10, 1, 0);
        let asm = Assembler::new(&s.cm, &s.spaces, &s.sq, &s.iq, unit());
        let b = asm.coupling(Side::Plus);
        let np = s.spaces.plus.n_nodes();
        let ones: Vec<f64> = (0..2 * np).map(|i| if i < np { 1.0 } else { 0.0 }).collect();
        let nm = s.spaces.multiplier.n_nodes();
        let row_sum: f64 = b.mul_vec(&ones)[..nm].iter().sum();
        let expected = 1.25f64.sqrt() - 0.05 * 5f64.sqrt();
        assert!((row_sum - expected).abs() < 1e-10);
        assert!((expected - 1.006231).abs() < 1e-6);
    }

    #[test]
    fn coupling_columns_agree_on_undoubled_nodes() {
        let s = reference(8, 2, 1);
        let asm = Assembler::new(&s.cm, &s.spaces, &s.sq, &s.iq, unit());
        let (bp, bm) = (asm.coupling(Side::Plus), asm.coupling(Side::Minus));
        let (pt, mt) = (bp.transpose(), bm.transpose());
        for (lp, &node) in s.spaces.plus.kept_nodes().iter().enumerate() {
            let Some(lm) = s.spaces.minus.local_node(node) else { continue };
            for a in 0..2 {
                let rp: Vec<_> = pt.row(s.spaces.plus.dof(lp, a)).collect();
                let rm: Vec<_> = mt.row(s.spaces.minus.dof(lm, a)).collect();
                assert_eq!(rp, rm);
            }
        }
    }

    #[test]
    fn gamma0_coupling_vanishes_when_only_gamma_t() {
        let s = reference(6, 1, 0);
        let mut iq = s.iq.clone();
        iq.points.retain(|q| q.tag == InterfaceTag::GammaT);
        let asm = Assembler::new(&s.cm, &s.spaces, &s.sq, &iq, unit());
        assert_eq!(asm.coupling(Side::Plus).nnz(), 0);
    }

    #[test]
    fn stabilization_blocks() {
        let s = reference(10, 2, 0);
        let asm = Assembler::new(&s.cm, &s.spaces, &s.sq, &s.iq, unit());
        let (s0, err) = asm.stabilized(0.0, &ProblemData::default());
        assert_eq!(s0.c.nnz(), 0);
        assert_eq!(s0.b_plus.get(0, 0), {
            let b = asm.coupling(Side::Plus);
            let mask = s.spaces.plus.dirichlet_dofs();
            if mask[0] { 0.0 } else { b.get(0, 0) }
        });
        let (s3, _) = asm.stabilized(0.03, &ProblemData::default());
        assert!(s3.full_matrix().asymmetry() < 1e-12);
        assert!(s0.full_matrix().asymmetry() < 1e-12);
        let gamma = 0.03 * s.cm.mesh().h();
        for (i, j, v) in s3.c.iter() {
            assert!((v - 2.0 * gamma * err.ll.get(i, j)).abs() < 1e-15);
        }
        let mu: Vec<f64> = (0..err.ll.nrows()).map(|i| (i as f64 * 0.37).sin()).collect();
        assert!(err.ll.bilinear(&mu, &mu) > 0.0);
        // Dense Cholesky of the multiplier mass.
        let n = err.ll.nrows();
        let mut dense: Vec<f64> = err.ll.to_dense().into_iter().flatten().collect();
        assert!(crate::sparse::dense_cholesky(&mut dense, n).is_ok());
    }

    #[test]
    fn stabilization_mass_scales_with_h() {
        let mut masses = Vec::new();
        for n in [10, 20] {
            let s = reference(n, 1, 0);
            let asm = Assembler::new(&s.cm, &s.spaces, &s.sq, &s.iq, unit());
            let (sys, _) = asm.stabilized(0.03, &ProblemData::default());
            let ones = vec![1.0; sys.n_multiplier()];
            masses.push(sys.c.bilinear(&ones, &ones));
        }
        assert!((masses[1] / masses[0] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn pressure_resultants_cancel() {
        let s = reference(10, 1, 0);
        let asm = Assembler::new(&s.cm, &s.spaces, &s.sq, &s.iq, unit());
        let data = ProblemData { crack_load: CrackLoad::Pressure(1.0), ..Default::default() };
        let raw = asm.rhs(&data);
        let res = |f: &[f64], n: usize| [f[..n].iter().sum::<f64>(), f[n..].iter().sum::<f64>()];
        let rp = res(&raw.f_plus, s.spaces.plus.n_nodes());
        let rm = res(&raw.f_minus, s.spaces.minus.n_nodes());
        assert!((rp[0] + rm[0]).abs() < 1e-14 && (rp[1] + rm[1]).abs() < 1e-14);
        let len = 0.05 * 5f64.sqrt();
        assert!((rp[0] + 2.0 / 5f64.sqrt() * len).abs() < 1e-12);
        assert!((rp[1] - 1.0 / 5f64.sqrt() * len).abs() < 1e-12);
    }

    #[test]
    fn homogeneous_data_gives_zero_rhs() {
        let s = reference(6, 2, 1);
        let asm = Assembler::new(&s.cm, &s.spaces, &s.sq, &s.iq, unit());
        let (sys, _) = asm.stabilized(0.03, &ProblemData::default());
        assert!(sys.full_rhs().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_stress_error_form() {
        let s = reference(10, 1, 0);
        let mat = Material::new(1.5, 0.8).unwrap();
        let asm = Assembler::new(&s.cm, &s.spaces, &s.sq, &s.iq, mat);
        let err = asm.error_matrices();
        let grad = [[0.3, -0.2], [0.5, 0.1]];
        let field = |p: Point| [grad[0][0] * p[0] + grad[0][1] * p[1], grad[1][0] * p[0] + grad[1][1] * p[1]];
        let u = s.spaces.plus.interpolate(s.spaces.uncut.dofmap(), &field);
        let n = [2.0 / 5f64.sqrt(), -1.0 / 5f64.sqrt()];
        let t = mat.traction(&grad, n);
        let expected = (1.25f64.sqrt() - 0.05 * 5f64.sqrt()) * (t[0] * t[0] + t[1] * t[1]);
        assert!((err.uu_plus.bilinear(&u, &u) - expected).abs() < 1e-12);
    }
}
