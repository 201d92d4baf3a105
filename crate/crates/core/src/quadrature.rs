//! Gauss rules on the unit interval and the reference triangle.
//!
//! Triangle rules are conical (collapsed) products of Gauss-Legendre rules.
//! They have positive weights and exist for every degree, which is what the
//! cut-cell integration needs; they are not the most economical rules.

use alloc::vec::Vec;

use crate::math::cos;

/// Quadrature on `[0, 1]`; weights sum to 1.
#[derive(Debug, Clone)]
pub struct SegmentRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Quadrature on the reference triangle `(0,0), (1,0), (0,1)`; weights sum to 1/2.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// `n`-point Gauss-Legendre rule mapped to `[0, 1]`.
pub fn gauss_legendre(n: usize) -> SegmentRule {
    assert!(n >= 1);
    let mut points = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        // Newton iteration on P_n from the Chebyshev-like initial guess.
        let mut x = cos(core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        points.push(0.5 * (1.0 - x));
        weights.push(0.5 * w);
    }
    SegmentRule { points, weights }
}

// (P_n(x), P_n'(x)) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss rule on `[0, 1]` exact for polynomials of the given degree.
pub fn segment_rule(degree: usize) -> SegmentRule {
    gauss_legendre(degree / 2 + 1)
}

/// Rule on the reference triangle exact for polynomials of the given total degree.
pub fn triangle_rule(degree: usize) -> TriangleRule {
    // The collapse (u, v) -> (u, (1 - u) v) adds one to the degree in u.
    let nu = degree.div_ceil(2) + 1;
    let nv = degree / 2 + 1;
    let gu = gauss_legendre(nu);
    let gv = gauss_legendre(nv);
    let mut points = Vec::with_capacity(nu * nv);
    let mut weights = Vec::with_capacity(nu * nv);
    for (&u, &wu) in gu.points.iter().zip(&gu.weights) {
        for (&v, &wv) in gv.points.iter().zip(&gv.weights) {
            points.push([u, (1.0 - u) * v]);
            weights.push(wu * wv * (1.0 - u));
        }
    }
    TriangleRule { points, weights }
}

/// Map a reference-triangle rule onto the triangle `tri` given in some parent
/// coordinate frame. Weights are multiplied by twice the area of `tri` in that
/// frame and by `weight_scale`.
pub(crate) fn map_rule_to_subtriangle(
    rule: &TriangleRule,
    tri: &[[f64; 2]; 3],
    weight_scale: f64,
    points_out: &mut Vec<[f64; 2]>,
    weights_out: &mut Vec<f64>,
) {
    let e1 = [tri[1][0] - tri[0][0], tri[1][1] - tri[0][1]];
    let e2 = [tri[2][0] - tri[0][0], tri[2][1] - tri[0][1]];
    let det = (e1[0] * e2[1] - e1[1] * e2[0]).abs();
    for (p, &w) in rule.points.iter().zip(&rule.weights) {
        points_out.push([
            tri[0][0] + p[0] * e1[0] + p[1] * e2[0],
            tri[0][1] + p[0] * e1[1] + p[1] * e2[1],
        ]);
        weights_out.push(w * det * weight_scale);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn monomial_integral(p: i32, q: i32) -> f64 {
        // ∫_T x^p y^q = p! q! / (p + q + 2)!
        let fact = |n: i32| (1..=n).map(|k| k as f64).product::<f64>();
        fact(p) * fact(q) / fact(p + q + 2)
    }

    #[test]
    fn gauss_legendre_integrates_monomials() {
        for n in 1..12 {
            let r = gauss_legendre(n);
            for d in 0..(2 * n) {
                let s: f64 = r.points.iter().zip(&r.weights).map(|(x, w)| w * x.powi(d as i32)).sum();
                assert!((s - 1.0 / (d as f64 + 1.0)).abs() < 1e-14, "n={n} d={d} s={s}");
            }
        }
    }

    #[test]
    fn triangle_rules_exact_up_to_degree() {
        for degree in 0..=12 {
            let r = triangle_rule(degree);
            assert!(r.weights.iter().all(|&w| w > 0.0));
            for p in 0..=degree as i32 {
                for q in 0..=(degree as i32 - p) {
                    let s: f64 = r
                        .points
                        .iter()
                        .zip(&r.weights)
                        .map(|(x, w)| w * x[0].powi(p) * x[1].powi(q))
                        .sum();
                    assert!((s - monomial_integral(p, q)).abs() < 1e-14, "deg {degree} x^{p} y^{q}");
                }
            }
        }
    }

    #[test]
    fn order_two_rule_integrates_x_plus_y() {
        let r = triangle_rule(2);
        let s: f64 = r.points.iter().zip(&r.weights).map(|(x, w)| w * (x[0] + x[1])).sum();
        assert!((s - 1.0 / 3.0).abs() < 1e-15);
    }
}
