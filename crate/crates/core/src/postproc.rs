//! Error norms, the multiplier error metric and convergence rates.

use alloc::vec;
use alloc::vec::Vec;

use crate::assembly::ErrorMatrices;
use crate::error::{Error, Result};
use crate::levelset::{subdomain_quadrature, CutMesh, InterfaceQuadrature, InterfaceTag, Side};
use crate::material::{Gradient, Material};
use crate::math::{ln, sq, sqrt};
use crate::mesh::DofMap;
use crate::spaces::{FdSpaces, RestrictedSpace};
use crate::Point;

/// Value and gradient of a discrete field of `space` at a reference point of
/// `cell`. The cell must touch the space's side.
pub fn evaluate(
    dofmap: &DofMap,
    space: &RestrictedSpace,
    coeffs: &[f64],
    cutmesh: &CutMesh,
    cell: usize,
    r: [f64; 2],
) -> (Point, Gradient) {
    let elem = dofmap.element();
    let n = elem.n_local();
    let mut vals = [0.0; 10];
    let mut grads = [[0.0; 2]; 10];
    elem.eval(r, &mut vals[..n], &mut grads[..n]);
    let map = cutmesh.mesh().cell_map(cell);
    let mut u = [0.0; 2];
    let mut g = [[0.0; 2]; 2];
    for (i, &node) in dofmap.cell_nodes(cell).iter().enumerate() {
        let gp = map.grad_to_physical(grads[i]);
        for a in 0..2 {
            let c = coeffs[space.dof_of_uncut(node, a)];
            u[a] += c * vals[i];
            g[a][0] += c * gp[0];
            g[a][1] += c * gp[1];
        }
    }
    (u, g)
}

/// Relative displacement errors in percent, `(L2, H1)`, summed over both
/// sides against the matching branch of the exact solution. `exact` returns
/// value and gradient of the branch of `side` at a point.
pub fn displacement_errors(
    cutmesh: &CutMesh,
    spaces: &FdSpaces,
    u_plus: &[f64],
    u_minus: &[f64],
    exact: &dyn Fn(Side, Point) -> (Point, Gradient),
) -> Result<(f64, f64)> {
    let k = spaces.uncut.element().degree() as usize;
    let quad = subdomain_quadrature(cutmesh, 2 * k + 2);
    let dofmap = spaces.uncut.dofmap();
    let (mut e0, mut e1, mut n0, mut n1) = (0.0, 0.0, 0.0, 0.0);
    for (side, coeffs) in [(Side::Plus, u_plus), (Side::Minus, u_minus)] {
        let space = spaces.side(side);
        for c in 0..cutmesh.mesh().n_cells() {
            let Some(rule) = quad.rule(c, side) else { continue };
            let map = cutmesh.mesh().cell_map(c);
            for (r, w) in rule.iter() {
                let (uh, gh) = evaluate(dofmap, space, coeffs, cutmesh, c, r);
                let (ue, ge) = exact(side, map.to_physical(r));
                for a in 0..2 {
                    e0 += w * sq(uh[a] - ue[a]);
                    n0 += w * ue[a] * ue[a];
                    for b in 0..2 {
                        e1 += w * sq(gh[a][b] - ge[a][b]);
                        n1 += w * ge[a][b] * ge[a][b];
                    }
                }
            }
        }
    }
    if n0 == 0.0 {
        return Err(Error::ZeroNorm("exact displacement"));
    }
    Ok((100.0 * sqrt(e0 / n0), 100.0 * sqrt((e0 + e1) / (n0 + n1))))
}

/// Multiplier error in percent from the error-metric matrices:
///
/// ```text
/// num = ⟨A⁺uu U⁺,U⁺⟩ + ⟨A⁻uu U⁻,U⁻⟩ + 2⟨A⁺uλ U⁺,Λ⟩ - 2⟨A⁻uλ U⁻,Λ⟩ + 2⟨Aλλ Λ,Λ⟩
/// den = ⟨A⁺uu U⁺,U⁺⟩ + ⟨A⁻uu U⁻,U⁻⟩
/// ```
///
/// with `U±` the interpolants of the exact branches.
pub fn multiplier_error(err: &ErrorMatrices, u_plus_ex: &[f64], u_minus_ex: &[f64], lambda: &[f64]) -> Result<f64> {
    let (num, den) = multiplier_metric(err, u_plus_ex, u_minus_ex, lambda);
    ratio_percent(num, den)
}

/// Numerator and denominator of [`multiplier_error`] before the ratio.
pub fn multiplier_metric(err: &ErrorMatrices, u_plus_ex: &[f64], u_minus_ex: &[f64], lambda: &[f64]) -> (f64, f64) {
    let uu = err.uu_plus.bilinear(u_plus_ex, u_plus_ex) + err.uu_minus.bilinear(u_minus_ex, u_minus_ex);
    let num = uu + 2.0 * err.ul_plus.bilinear(lambda, u_plus_ex) - 2.0 * err.ul_minus.bilinear(lambda, u_minus_ex)
        + 2.0 * err.ll.bilinear(lambda, lambda);
    (num, uu)
}

fn ratio_percent(num: f64, den: f64) -> Result<f64> {
    if den <= 0.0 {
        return Err(Error::ZeroNorm("interface traction of the exact solution"));
    }
    let rel = num / den;
    if rel < -1e-12 {
        return Err(Error::NegativeMetric(num));
    }
    Ok(100.0 * sqrt(rel.max(0.0)))
}

fn multiplier_value(spaces: &FdSpaces, lambda: &[f64], cell: usize, r: [f64; 2]) -> Point {
    let ms = &spaces.multiplier;
    let elem = ms.element();
    let mut vals = [0.0; 10];
    elem.eval_values(r, &mut vals[..elem.n_local()]);
    let mut l = [0.0; 2];
    for (i, &node) in ms.dofmap().cell_nodes(cell).iter().enumerate() {
        if let Some(loc) = ms.local_node(node) {
            for (a, la) in l.iter_mut().enumerate() {
                *la += lambda[ms.dof(loc, a)] * vals[i];
            }
        }
    }
    l
}

/// The same metric by pointwise quadrature:
/// `∫|σ(U⁺)n⁺ + Λ|² + ∫|σ(U⁻)n⁻ - Λ|²` over `∫|σ(U⁺)n⁺|² + ∫|σ(U⁻)n⁻|²`.
pub fn multiplier_error_quadrature(
    cutmesh: &CutMesh,
    spaces: &FdSpaces,
    interface: &InterfaceQuadrature,
    material: &Material,
    u_plus_ex: &[f64],
    u_minus_ex: &[f64],
    lambda: &[f64],
) -> Result<f64> {
    let (num, den) = multiplier_metric_quadrature(cutmesh, spaces, interface, material, u_plus_ex, u_minus_ex, lambda);
    ratio_percent(num, den)
}

/// Numerator and denominator of [`multiplier_error_quadrature`].
pub fn multiplier_metric_quadrature(
    cutmesh: &CutMesh,
    spaces: &FdSpaces,
    interface: &InterfaceQuadrature,
    material: &Material,
    u_plus_ex: &[f64],
    u_minus_ex: &[f64],
    lambda: &[f64],
) -> (f64, f64) {
    let dofmap = spaces.uncut.dofmap();
    let (mut num, mut den) = (0.0, 0.0);
    for q in interface.tagged(InterfaceTag::Gamma0) {
        let l = multiplier_value(spaces, lambda, q.cell, q.ref_point);
        for (side, coeffs, sign) in [(Side::Plus, u_plus_ex, 1.0), (Side::Minus, u_minus_ex, -1.0)] {
            let (_, g) = evaluate(dofmap, spaces.side(side), coeffs, cutmesh, q.cell, q.ref_point);
            let t = material.traction(&g, q.normal(side));
            num += q.weight * (sq(t[0] + sign * l[0]) + sq(t[1] + sign * l[1]));
            den += q.weight * (t[0] * t[0] + t[1] * t[1]);
        }
    }
    (num, den)
}

/// `‖σ(U⁺)n⁺ + σ(U⁻)n⁻‖² / (‖σ(U⁺)n⁺‖² + ‖σ(U⁻)n⁻‖²)` on `Γ₀`.
pub fn jump_compatibility(
    cutmesh: &CutMesh,
    spaces: &FdSpaces,
    interface: &InterfaceQuadrature,
    material: &Material,
    u_plus_ex: &[f64],
    u_minus_ex: &[f64],
) -> Result<f64> {
    let dofmap = spaces.uncut.dofmap();
    let (mut num, mut den) = (0.0, 0.0);
    for q in interface.tagged(InterfaceTag::Gamma0) {
        let (_, gp) = evaluate(dofmap, &spaces.plus, u_plus_ex, cutmesh, q.cell, q.ref_point);
        let (_, gm) = evaluate(dofmap, &spaces.minus, u_minus_ex, cutmesh, q.cell, q.ref_point);
        let tp = material.traction(&gp, q.normal(Side::Plus));
        let tm = material.traction(&gm, q.normal(Side::Minus));
        num += q.weight * (sq(tp[0] + tm[0]) + sq(tp[1] + tm[1]));
        den += q.weight * (tp[0] * tp[0] + tp[1] * tp[1] + tm[0] * tm[0] + tm[1] * tm[1]);
    }
    if den == 0.0 {
        return Err(Error::ZeroNorm("interface traction"));
    }
    Ok(num / den)
}

/// Least-squares slope of `log(err)` against `log(h)`.
pub fn fit_rate(h: &[f64], err: &[f64]) -> Result<f64> {
    if h.len() != err.len() || h.len() < 2 {
        return Err(Error::InvalidArgument(alloc::format!("need ≥ 2 paired points (got {} and {})", h.len(), err.len())));
    }
    if h.iter().chain(err).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument("rate fit needs positive finite values".into()));
    }
    let x: Vec<f64> = h.iter().map(|&v| ln(v)).collect();
    let y: Vec<f64> = err.iter().map(|&v| ln(v)).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|v| sq(v - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("rate fit needs distinct h values".into()));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(sxy / sxx)
}

/// Interpolants of the two exact branches on `V⁺_h`, `V⁻_h`.
pub fn branch_interpolants(spaces: &FdSpaces, branch: &dyn Fn(Side, Point) -> Point) -> (Vec<f64>, Vec<f64>) {
    let dm = spaces.uncut.dofmap();
    (
        spaces.plus.interpolate(dm, &|p| branch(Side::Plus, p)),
        spaces.minus.interpolate(dm, &|p| branch(Side::Minus, p)),
    )
}

/// Zero vector of the multiplier space.
pub fn zero_multiplier(spaces: &FdSpaces) -> Vec<f64> {
    vec![0.0; spaces.multiplier.n_dofs()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_power_laws() {
        assert!((fit_rate(&[0.1, 0.05], &[1e-2, 2.5e-3]).unwrap() - 2.0).abs() < 1e-12);
        assert!(fit_rate(&[0.1, 0.05, 0.025], &[3.0, 3.0, 3.0]).unwrap().abs() < 1e-12);
        assert!((fit_rate(&[0.1, 0.05, 0.025], &[1e-1, 5e-2, 2.5e-2]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rate_fit_rejects_bad_input() {
        assert!(fit_rate(&[0.1], &[1.0]).is_err());
        assert!(fit_rate(&[0.1, -0.05], &[1.0, 2.0]).is_err());
        assert!(fit_rate(&[0.1, 0.05], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn metric_rounding_is_clamped() {
        assert_eq!(ratio_percent(-1e-14, 1.0).unwrap(), 0.0);
        assert!(matches!(ratio_percent(-1e-6, 1.0), Err(Error::NegativeMetric(_))));
        assert_eq!(ratio_percent(1.0, 1.0).unwrap(), 100.0);
    }

    proptest! {
        #[test]
        fn recovers_slope_of_power_law(p in -1.0f64..4.0, c in 0.01f64..100.0) {
            let h: [f64; 4] = [0.2, 0.1, 0.05, 0.025];
            let e: Vec<f64> = h.iter().map(|x| c * x.powf(p)).collect();
            prop_assert!((fit_rate(&h, &e).unwrap() - p).abs() < 1e-9);
        }
    }
}
