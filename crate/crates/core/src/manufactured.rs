//! Manufactured solution of the unit-square test and the crack geometries of
//! the calibration and robustness sweeps.
//!
//! `u⁺(x, y) = ((x + y) cos x, (x - y) sin y)` on `{ls1 > 0}` and
//! `u⁻ = u⁺ - D` on `{ls1 ≤ 0}`, with a constant jump `D`.

use alloc::format;

use crate::error::{Error, Result};
use crate::levelset::{CrackDescription, Side};
use crate::material::{Gradient, Material};
use crate::math::{cos, sin, sqrt};
use crate::Point;

/// Default jump `D`.
pub const DEFAULT_JUMP: Point = [0.1, 0.05];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedCase {
    pub x0: f64,
    pub x_a: f64,
    pub x_b: f64,
    pub jump: Point,
    pub material: Material,
}

impl ManufacturedCase {
    /// The reference crack `(x0, x_A, x_B) = (0.317, 0.47, 0.52)`, `λ = μ = 1`.
    pub fn reference() -> Self {
        Self::new(0.317, 0.47, 0.52)
    }

    pub fn new(x0: f64, x_a: f64, x_b: f64) -> Self {
        Self { x0, x_a, x_b, jump: DEFAULT_JUMP, material: Material::new(1.0, 1.0).expect("valid") }
    }

    pub fn with_material(mut self, material: Material) -> Self {
        self.material = material;
        self
    }

    pub fn with_jump(mut self, jump: Point) -> Self {
        self.jump = jump;
        self
    }

    pub fn crack(&self) -> CrackDescription {
        CrackDescription::inclined(self.x0, self.x_a, self.x_b)
    }

    pub fn ls1(&self, p: Point) -> f64 {
        p[1] - 2.0 * (p[0] - self.x0)
    }

    /// Unit normal `n⁺ = -∇ls1 / |∇ls1| = (2, -1) / √5`.
    pub fn normal_plus(&self) -> Point {
        let s = sqrt(5.0);
        [2.0 / s, -1.0 / s]
    }

    /// Branch of `u_ex` belonging to `side`, evaluated anywhere.
    pub fn branch(&self, side: Side, p: Point) -> Point {
        let [x, y] = p;
        let u = [(x + y) * cos(x), (x - y) * sin(y)];
        match side {
            Side::Plus => u,
            Side::Minus => [u[0] - self.jump[0], u[1] - self.jump[1]],
        }
    }

    /// `u_ex` with the branch selected by the sign of `ls1`.
    pub fn exact_displacement(&self, p: Point) -> Point {
        let side = if self.ls1(p) > 0.0 { Side::Plus } else { Side::Minus };
        self.branch(side, p)
    }

    /// `∇u_ex`, identical on both branches.
    pub fn gradient(&self, p: Point) -> Gradient {
        let [x, y] = p;
        let (cx, sx, cy, sy) = (cos(x), sin(x), cos(y), sin(y));
        [[cx - (x + y) * sx, cx], [sy, -sy + (x - y) * cy]]
    }

    /// `f = -div σ(u_ex) = -[μ Δu + (λ + μ) ∇ div u]`.
    pub fn exact_body_force(&self, p: Point) -> Point {
        let [x, y] = p;
        let (cx, sx, cy, sy) = (cos(x), sin(x), cos(y), sin(y));
        let u1_xx = -2.0 * sx - (x + y) * cx;
        let u1_xy = -sx;
        let u1_yy = 0.0;
        let u2_xx = 0.0;
        let u2_xy = cy;
        let u2_yy = -2.0 * cy - (x - y) * sy;
        let (l, m) = (self.material.lambda(), self.material.mu());
        [
            -(m * (u1_xx + u1_yy) + (l + m) * (u1_xx + u2_xy)),
            -(m * (u2_xx + u2_yy) + (l + m) * (u1_xy + u2_yy)),
        ]
    }

    /// `σ(u_ex) n`.
    pub fn exact_traction(&self, p: Point, normal: Point) -> Point {
        self.material.traction(&self.gradient(p), normal)
    }

    /// `λ = -σ(u⁺) n⁺`.
    pub fn exact_multiplier(&self, p: Point) -> Point {
        let t = self.exact_traction(p, self.normal_plus());
        [-t[0], -t[1]]
    }
}

/// Crack geometry of the robustness sweep:
/// `(x0, x_A, x_B) = (x_A - 0.153, x_A, x_A + 0.05)`.
pub fn sweep_geometry(x_a: f64) -> Result<ManufacturedCase> {
    if !(0.0..=0.95 + 1e-12).contains(&x_a) {
        return Err(Error::InvalidArgument(format!("x_A = {x_a} outside [0, 0.95]")));
    }
    Ok(ManufacturedCase::new(x_a - 0.153, x_a, x_a + 0.05))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: Point, b: Point, tol: f64) -> bool {
        (a[0] - b[0]).abs() < tol && (a[1] - b[1]).abs() < tol
    }

    #[test]
    fn displacement_values() {
        let c = ManufacturedCase::reference();
        assert!((c.ls1([0.5, 0.9]) - 0.534).abs() < 1e-12);
        // Oracle: the same formula evaluated with std's float functions.
        let plus = [1.4 * 0.5f64.cos(), -0.4 * 0.9f64.sin()];
        assert!(close(c.exact_displacement([0.5, 0.9]), plus, 1e-15));
        assert!(close(plus, [1.228616, -0.313331], 5e-7));
        let minus = [0.7 * 0.5f64.cos() - 0.1, 0.3 * 0.2f64.sin() - 0.05];
        assert!(close(c.exact_displacement([0.5, 0.2]), minus, 1e-15));
        assert!(close(minus, [0.514308, 0.009601], 5e-7));
    }

    #[test]
    fn jump_is_constant() {
        let c = ManufacturedCase::reference();
        for t in [0.0, 0.3, 0.77, 1.0] {
            let p = [0.317 + 0.5 * t, t];
            let (a, b) = (c.branch(Side::Plus, p), c.branch(Side::Minus, p));
            assert!(close([a[0] - b[0], a[1] - b[1]], DEFAULT_JUMP, 1e-15));
        }
    }

    #[test]
    fn sweep_endpoints() {
        let r = sweep_geometry(0.47).unwrap();
        assert!((r.x0 - 0.317).abs() < 1e-15 && r.x_b == 0.52);
        let lo = sweep_geometry(0.0).unwrap();
        assert_eq!((lo.x0, lo.x_a, lo.x_b), (-0.153, 0.0, 0.05));
        let hi = sweep_geometry(0.95).unwrap();
        assert!((hi.x0 - 0.797).abs() < 1e-15 && (hi.x_b - 1.0).abs() < 1e-15);
        assert!(sweep_geometry(0.96).is_err() && sweep_geometry(-0.01).is_err());
    }

    #[test]
    fn multiplier_matches_both_tractions() {
        let c = ManufacturedCase::reference();
        let n = c.normal_plus();
        let p = [0.4, 0.166];
        let tp = c.exact_traction(p, n);
        let tm = c.exact_traction(p, [-n[0], -n[1]]);
        assert!(close([tp[0] + tm[0], tp[1] + tm[1]], [0.0, 0.0], 1e-15));
        assert!(close(c.exact_multiplier(p), tm, 1e-15));
    }

    // Central differences of the closed-form u_ex, independent of `gradient`.
    fn fd_grad(c: &ManufacturedCase, p: Point, h: f64) -> Gradient {
        let mut g = [[0.0; 2]; 2];
        for b in 0..2 {
            let (mut pp, mut pm) = (p, p);
            pp[b] += h;
            pm[b] -= h;
            let (up, um) = (c.branch(Side::Plus, pp), c.branch(Side::Plus, pm));
            for a in 0..2 {
                g[a][b] = (up[a] - um[a]) / (2.0 * h);
            }
        }
        g
    }

    proptest! {
        #[test]
        fn body_force_is_minus_div_stress(x in 0.0f64..1.0, y in 0.0f64..1.0, l in 0.0f64..3.0, m in 0.1f64..3.0) {
            let c = ManufacturedCase::reference().with_material(Material::new(l, m).unwrap());
            let h = 1e-5;
            let stress = |q: Point| c.material.stress(&fd_grad(&c, q, 1e-4));
            let mut div = [0.0; 2];
            for b in 0..2 {
                let (mut pp, mut pm) = (p_of(x, y), p_of(x, y));
                pp[b] += h;
                pm[b] -= h;
                let (sp, sm) = (stress(pp), stress(pm));
                for a in 0..2 {
                    div[a] += (sp[a][b] - sm[a][b]) / (2.0 * h);
                }
            }
            let f = c.exact_body_force([x, y]);
            prop_assert!((f[0] + div[0]).abs() < 1e-6 * (1.0 + l + m));
            prop_assert!((f[1] + div[1]).abs() < 1e-6 * (1.0 + l + m));
        }

        #[test]
        fn traction_matches_finite_differences(x in 0.0f64..1.0, y in 0.0f64..1.0, th in 0.0f64..6.28) {
            let c = ManufacturedCase::reference();
            let n = [th.cos(), th.sin()];
            let fd = c.material.traction(&fd_grad(&c, [x, y], 1e-5), n);
            let t = c.exact_traction([x, y], n);
            prop_assert!(close(t, fd, 1e-6));
            let tneg = c.exact_traction([x, y], [-n[0], -n[1]]);
            prop_assert!(close(tneg, [-t[0], -t[1]], 1e-15));
        }
    }

    fn p_of(x: f64, y: f64) -> Point {
        [x, y]
    }
}
