//! Level-set description of the crack and the cut-cell geometry it induces.
//!
//! `ls1 = 0` is the whole interface `Γ = Γ_T ∪ Γ₀`, with `Ω⁺ = {ls1 > 0}` and
//! `Ω⁻ = {ls1 < 0}`. A point of `Γ` belongs to the physical crack `Γ_T` when
//! `ls2 < 0` and `ls3 < 0`, and to the artificial extension `Γ₀` otherwise.
//!
//! Geometry is computed from the cell-wise linear interpolant of `ls1`, so the
//! interface is a straight segment in every cut cell. Vertex values whose
//! magnitude falls below `SNAP_TOL` times the largest vertex value are moved
//! to `+SNAP_TOL` times that value, and cut pieces smaller than `AREA_TOL`
//! times the cell area are dropped (the cell becomes one-signed).
//!
//! Normal convention: `n⁺ = -∇ls1 / |∇ls1|` is the outward normal of `Ω⁺`; it
//! points from `Ω⁺` into `Ω⁻`. `n⁻ = -n⁺`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math::{norm, signed_area, sq, sqrt};
use crate::mesh::{AffineMap, BackgroundMesh};
use crate::quadrature::{map_rule_to_subtriangle, segment_rule, triangle_rule, TriangleRule};
use crate::Point;

pub const SNAP_TOL: f64 = 1e-12;
pub const AREA_TOL: f64 = 1e-10;

pub type ScalarField = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

/// The three level-set functions describing `Γ`, `Γ_T` and `Γ₀`.
#[derive(Clone)]
pub struct CrackDescription {
    ls1: ScalarField,
    ls2: ScalarField,
    ls3: ScalarField,
}

impl fmt::Debug for CrackDescription {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CrackDescription").finish_non_exhaustive()
    }
}

impl CrackDescription {
    pub fn new(ls1: ScalarField, ls2: ScalarField, ls3: ScalarField) -> Self {
        Self { ls1, ls2, ls3 }
    }

    /// The straight inclined crack of the unit-square tests:
    /// `ls1 = y - 2(x - x0)`, `ls2 = x_a - x`, `ls3 = x - x_b`.
    pub fn inclined(x0: f64, x_a: f64, x_b: f64) -> Self {
        Self::new(
            Arc::new(move |p: Point| p[1] - 2.0 * (p[0] - x0)),
            Arc::new(move |p: Point| x_a - p[0]),
            Arc::new(move |p: Point| p[0] - x_b),
        )
    }

    /// Interface `ls1 = 0` with no physical crack: all of it is `Γ₀`.
    pub fn without_crack(ls1: ScalarField) -> Self {
        Self::new(ls1, Arc::new(|_| 1.0), Arc::new(|_| 1.0))
    }

    pub fn ls1(&self, p: Point) -> f64 {
        (self.ls1)(p)
    }

    pub fn ls2(&self, p: Point) -> f64 {
        (self.ls2)(p)
    }

    pub fn ls3(&self, p: Point) -> f64 {
        (self.ls3)(p)
    }

    /// Tag of a point lying on `Γ`.
    pub fn tag(&self, p: Point) -> InterfaceTag {
        if self.ls2(p) < 0.0 && self.ls3(p) < 0.0 {
            InterfaceTag::GammaT
        } else {
            InterfaceTag::Gamma0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Plus, Side::Minus];

    /// `+1` for `Plus`, `-1` for `Minus`.
    pub fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Plus => Side::Minus,
            Side::Minus => Side::Plus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellClass {
    Plus,
    Minus,
    Cut,
}

impl From<Side> for CellClass {
    fn from(s: Side) -> Self {
        match s {
            Side::Plus => CellClass::Plus,
            Side::Minus => CellClass::Minus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InterfaceTag {
    GammaT,
    Gamma0,
}

/// Split of a cut triangle by the straight interface segment.
#[derive(Debug, Clone)]
pub struct CutCellPartition {
    /// Sub-triangles of the `ls1 > 0` part (one or two).
    pub plus: Vec<[Point; 3]>,
    /// Sub-triangles of the `ls1 < 0` part (one or two).
    pub minus: Vec<[Point; 3]>,
    pub segment: [Point; 2],
    /// Unit outward normal of `Ω⁺` on the segment.
    pub normal_plus: Point,
}

impl CutCellPartition {
    pub fn area(&self, side: Side) -> f64 {
        let pieces = match side {
            Side::Plus => &self.plus,
            Side::Minus => &self.minus,
        };
        pieces.iter().map(|t| signed_area(t[0], t[1], t[2])).sum()
    }

    pub fn segment_length(&self) -> f64 {
        norm(crate::math::sub(self.segment[1], self.segment[0]))
    }
}

#[derive(Debug, Clone)]
pub enum CellGeometry {
    Whole(Side),
    Cut(CutCellPartition),
}

impl CellGeometry {
    pub fn class(&self) -> CellClass {
        match self {
            CellGeometry::Whole(s) => (*s).into(),
            CellGeometry::Cut(_) => CellClass::Cut,
        }
    }

    /// Whether the cell carries a positive-area part of `side`.
    pub fn touches(&self, side: Side) -> bool {
        match self {
            CellGeometry::Whole(s) => *s == side,
            CellGeometry::Cut(_) => true,
        }
    }
}

fn snap(values: &mut [f64; 3], scale: f64) {
    let tol = SNAP_TOL * scale;
    for v in values.iter_mut() {
        if v.abs() <= tol {
            *v = if tol > 0.0 { tol } else { f64::MIN_POSITIVE };
        }
    }
}

fn classify_values(v: &[f64; 3]) -> CellClass {
    if v.iter().all(|&x| x > 0.0) {
        CellClass::Plus
    } else if v.iter().all(|&x| x < 0.0) {
        CellClass::Minus
    } else {
        CellClass::Cut
    }
}

fn vertex_values(crack: &CrackDescription, tri: &[Point; 3]) -> [f64; 3] {
    let mut v = [crack.ls1(tri[0]), crack.ls1(tri[1]), crack.ls1(tri[2])];
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    snap(&mut v, scale);
    v
}

/// Classify a triangle from the (snapped) vertex values of `ls1`.
pub fn classify_triangle(crack: &CrackDescription, tri: &[Point; 3]) -> CellClass {
    classify_values(&vertex_values(crack, tri))
}

/// Split a triangle by the zero line of the linear interpolant of `ls1`.
pub fn cut_triangle(crack: &CrackDescription, tri: &[Point; 3]) -> CellGeometry {
    cut_values(tri, &vertex_values(crack, tri))
}

pub fn classify_cell(crack: &CrackDescription, mesh: &BackgroundMesh, cell: usize) -> CellClass {
    classify_triangle(crack, &mesh.cell_vertices(cell))
}

pub fn cut_cell(crack: &CrackDescription, mesh: &BackgroundMesh, cell: usize) -> CellGeometry {
    cut_triangle(crack, &mesh.cell_vertices(cell))
}

// `values` must be free of exact zeros (snapped).
fn cut_values(tri: &[Point; 3], values: &[f64; 3]) -> CellGeometry {
    match classify_values(values) {
        CellClass::Plus => return CellGeometry::Whole(Side::Plus),
        CellClass::Minus => return CellGeometry::Whole(Side::Minus),
        CellClass::Cut => {}
    }
    let positive = values.iter().filter(|&&v| v > 0.0).count();
    // The lone vertex is the one whose sign is in the minority.
    let lone = (0..3)
        .find(|&i| (values[i] > 0.0) == (positive == 1))
        .expect("a cut cell has a lone vertex");
    let (i, j, k) = (lone, (lone + 1) % 3, (lone + 2) % 3);
    let crossing = |a: usize, b: usize| {
        let t = values[a] / (values[a] - values[b]);
        [tri[a][0] + t * (tri[b][0] - tri[a][0]), tri[a][1] + t * (tri[b][1] - tri[a][1])]
    };
    let pij = crossing(i, j);
    let pik = crossing(i, k);
    let lone_tri = [tri[i], pij, pik];
    let quad = [[pij, tri[j], tri[k]], [pij, tri[k], pik]];

    let cell_area = signed_area(tri[0], tri[1], tri[2]);
    let lone_area = signed_area(lone_tri[0], lone_tri[1], lone_tri[2]);
    let quad_area = cell_area - lone_area;
    let lone_side = if values[i] > 0.0 { Side::Plus } else { Side::Minus };
    if lone_area <= AREA_TOL * cell_area {
        return CellGeometry::Whole(lone_side.opposite());
    }
    if quad_area <= AREA_TOL * cell_area {
        return CellGeometry::Whole(lone_side);
    }

    let map = AffineMap::new(tri);
    let grad = map.grad_to_physical([values[1] - values[0], values[2] - values[0]]);
    let g = norm(grad);
    let normal_plus = [-grad[0] / g, -grad[1] / g];

    let (plus, minus) = match lone_side {
        Side::Plus => (vec![lone_tri], quad.to_vec()),
        Side::Minus => (quad.to_vec(), vec![lone_tri]),
    };
    CellGeometry::Cut(CutCellPartition { plus, minus, segment: [pij, pik], normal_plus })
}

/// Background mesh together with the per-cell geometry induced by the crack.
#[derive(Debug, Clone)]
pub struct CutMesh {
    mesh: BackgroundMesh,
    crack: CrackDescription,
    cells: Vec<CellGeometry>,
}

impl CutMesh {
    pub fn new(mesh: BackgroundMesh, crack: CrackDescription) -> Self {
        // Snap at the vertex level with one global scale so neighbouring
        // cells see identical vertex values and the interface stays closed.
        let mut values: Vec<f64> = mesh.vertices().iter().map(|&p| crack.ls1(p)).collect();
        let scale = values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let tol = SNAP_TOL * scale;
        for v in values.iter_mut() {
            if v.abs() <= tol {
                *v = if tol > 0.0 { tol } else { f64::MIN_POSITIVE };
            }
        }
        let cells = (0..mesh.n_cells())
            .map(|c| {
                let ids = mesh.cells()[c];
                cut_values(&mesh.cell_vertices(c), &[values[ids[0]], values[ids[1]], values[ids[2]]])
            })
            .collect();
        Self { mesh, crack, cells }
    }

    pub fn mesh(&self) -> &BackgroundMesh {
        &self.mesh
    }

    pub fn crack(&self) -> &CrackDescription {
        &self.crack
    }

    pub fn geometry(&self, cell: usize) -> &CellGeometry {
        &self.cells[cell]
    }

    pub fn class(&self, cell: usize) -> CellClass {
        self.cells[cell].class()
    }

    pub fn partition(&self, cell: usize) -> Option<&CutCellPartition> {
        match &self.cells[cell] {
            CellGeometry::Cut(p) => Some(p),
            CellGeometry::Whole(_) => None,
        }
    }

    pub fn cut_cells(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.cells.len()).filter(|&c| matches!(self.cells[c], CellGeometry::Cut(_)))
    }

    /// Whether some cell carries a positive-area part of `side`.
    pub fn has_side(&self, side: Side) -> bool {
        self.cells.iter().any(|g| g.touches(side))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct InterfacePoint {
    pub cell: usize,
    pub point: Point,
    /// Coordinates in the reference frame of the parent cell.
    pub ref_point: [f64; 2],
    pub weight: f64,
    pub normal_plus: Point,
    pub tag: InterfaceTag,
}

impl InterfacePoint {
    pub fn normal(&self, side: Side) -> Point {
        let s = side.sign();
        [s * self.normal_plus[0], s * self.normal_plus[1]]
    }
}

#[derive(Debug, Clone, Default)]
pub struct InterfaceQuadrature {
    pub points: Vec<InterfacePoint>,
}

impl InterfaceQuadrature {
    pub fn total_length(&self) -> f64 {
        self.points.iter().map(|q| q.weight).sum()
    }

    pub fn length(&self, tag: InterfaceTag) -> f64 {
        self.tagged(tag).map(|q| q.weight).sum()
    }

    pub fn tagged(&self, tag: InterfaceTag) -> impl Iterator<Item = &InterfacePoint> + '_ {
        self.points.iter().filter(move |q| q.tag == tag)
    }
}

// Parameter in (0, 1) where `f` changes sign along the segment, if it does.
fn sign_change(f: &dyn Fn(Point) -> f64, a: Point, b: Point) -> Option<f64> {
    let at = |t: f64| f([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
    let (mut lo, mut hi) = (0.0, 1.0);
    let (mut flo, mut fhi) = (at(lo), at(hi));
    if flo == 0.0 || fhi == 0.0 || (flo < 0.0) == (fhi < 0.0) {
        return None;
    }
    // Regula falsi (Illinois); exact in one step for affine functions.
    let mut side = 0i8;
    let mut t = lo;
    for _ in 0..100 {
        t = (lo * fhi - hi * flo) / (fhi - flo);
        let ft = at(t);
        if ft == 0.0 || (hi - lo) < 1e-15 {
            break;
        }
        if (ft < 0.0) == (fhi < 0.0) {
            hi = t;
            fhi = ft;
            if side == -1 {
                flo *= 0.5;
            }
            side = -1;
        } else {
            lo = t;
            flo = ft;
            if side == 1 {
                fhi *= 0.5;
            }
            side = 1;
        }
        if ft.abs() < 1e-15 {
            break;
        }
    }
    (t > 0.0 && t < 1.0).then_some(t)
}

/// Gauss points on every interface segment. Segments are split where `ls2`
/// or `ls3` change sign, then each point is tagged individually.
pub fn interface_quadrature(cutmesh: &CutMesh, order: usize) -> InterfaceQuadrature {
    let rule = segment_rule(order);
    let crack = cutmesh.crack();
    let mut points = Vec::new();
    for cell in cutmesh.cut_cells() {
        let part = cutmesh.partition(cell).expect("cut cell");
        let map = cutmesh.mesh().cell_map(cell);
        let [a, b] = part.segment;
        let mut breaks = vec![0.0, 1.0];
        let ls2 = |p: Point| crack.ls2(p);
        let ls3 = |p: Point| crack.ls3(p);
        breaks.extend(sign_change(&ls2, a, b));
        breaks.extend(sign_change(&ls3, a, b));
        breaks.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let len = part.segment_length();
        for w in breaks.windows(2) {
            let (t0, t1) = (w[0], w[1]);
            if t1 - t0 <= 0.0 {
                continue;
            }
            for (&s, &wt) in rule.points.iter().zip(&rule.weights) {
                let t = t0 + s * (t1 - t0);
                let p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                points.push(InterfacePoint {
                    cell,
                    point: p,
                    ref_point: map.to_reference(p),
                    weight: wt * (t1 - t0) * len,
                    normal_plus: part.normal_plus,
                    tag: crack.tag(p),
                });
            }
        }
    }
    InterfaceQuadrature { points }
}

/// Quadrature restricted to one side of a cut cell. Points are stored in the
/// reference frame of the parent cell, weights are physical.
#[derive(Debug, Clone, Default)]
pub struct PieceRule {
    pub ref_points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

/// Borrowed view of a cell rule: physical weight of point `q` is
/// `weights[q] * scale`.
#[derive(Debug, Clone, Copy)]
pub struct CellRule<'a> {
    pub ref_points: &'a [[f64; 2]],
    pub weights: &'a [f64],
    pub scale: f64,
}

impl CellRule<'_> {
    pub fn iter(&self) -> impl Iterator<Item = ([f64; 2], f64)> + '_ {
        self.ref_points.iter().copied().zip(self.weights.iter().map(move |w| w * self.scale))
    }
}

#[derive(Debug, Clone)]
enum CellRules {
    Whole(Side),
    Cut { plus: PieceRule, minus: PieceRule },
}

/// Per-cell quadrature over `Ω⁺` and `Ω⁻`.
#[derive(Debug, Clone)]
pub struct SubdomainQuadrature {
    degree: usize,
    reference: TriangleRule,
    dets: Vec<f64>,
    cells: Vec<CellRules>,
}

impl SubdomainQuadrature {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn reference_rule(&self) -> &TriangleRule {
        &self.reference
    }

    /// Rule of `cell` restricted to `side`, or `None` when the cell has no
    /// part on that side.
    pub fn rule(&self, cell: usize, side: Side) -> Option<CellRule<'_>> {
        match &self.cells[cell] {
            CellRules::Whole(s) if *s == side => Some(CellRule {
                ref_points: &self.reference.points,
                weights: &self.reference.weights,
                scale: self.dets[cell],
            }),
            CellRules::Whole(_) => None,
            CellRules::Cut { plus, minus } => {
                let r = if side == Side::Plus { plus } else { minus };
                Some(CellRule { ref_points: &r.ref_points, weights: &r.weights, scale: 1.0 })
            }
        }
    }

    pub fn is_cut(&self, cell: usize) -> bool {
        matches!(self.cells[cell], CellRules::Cut { .. })
    }

    pub fn total_weight(&self, side: Side) -> f64 {
        (0..self.cells.len())
            .filter_map(|c| self.rule(c, side))
            .map(|r| r.iter().map(|(_, w)| w).sum::<f64>())
            .sum()
    }
}

pub fn subdomain_quadrature(cutmesh: &CutMesh, degree: usize) -> SubdomainQuadrature {
    let reference = triangle_rule(degree);
    let mesh = cutmesh.mesh();
    let mut dets = Vec::with_capacity(mesh.n_cells());
    let mut cells = Vec::with_capacity(mesh.n_cells());
    for c in 0..mesh.n_cells() {
        let map = mesh.cell_map(c);
        dets.push(map.det.abs());
        cells.push(match cutmesh.geometry(c) {
            CellGeometry::Whole(s) => CellRules::Whole(*s),
            CellGeometry::Cut(part) => {
                let build = |tris: &[[Point; 3]]| {
                    let mut r = PieceRule::default();
                    for t in tris {
                        let rt = [map.to_reference(t[0]), map.to_reference(t[1]), map.to_reference(t[2])];
                        map_rule_to_subtriangle(&reference, &rt, map.det.abs(), &mut r.ref_points, &mut r.weights);
                    }
                    r
                };
                CellRules::Cut { plus: build(&part.plus), minus: build(&part.minus) }
            }
        });
    }
    SubdomainQuadrature { degree, reference, dets, cells }
}

/// Length of the part of the line `ls1 = 0` (assumed affine) inside the
/// rectangle, by clipping the line against the four edges.
pub fn clipped_line_length(ls1: &dyn Fn(Point) -> f64, rect: &crate::mesh::RectDomain) -> f64 {
    let corners = [
        [rect.x_min, rect.y_min],
        [rect.x_max, rect.y_min],
        [rect.x_max, rect.y_max],
        [rect.x_min, rect.y_max],
    ];
    let mut hits: Vec<Point> = Vec::new();
    for e in 0..4 {
        let (a, b) = (corners[e], corners[(e + 1) % 4]);
        let (fa, fb) = (ls1(a), ls1(b));
        if fa == 0.0 {
            hits.push(a);
        }
        if (fa < 0.0 && fb > 0.0) || (fa > 0.0 && fb < 0.0) {
            let t = fa / (fa - fb);
            hits.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    let mut best = 0.0f64;
    for p in &hits {
        for q in &hits {
            best = best.max(sqrt(sq(p[0] - q[0]) + sq(p[1] - q[1])));
        }
    }
    best
}
