//! Isotropic linear elastic material.

use alloc::format;

use crate::error::{Error, Result};
use crate::Point;

/// Lamé coefficients `(λ_L, μ_L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    lambda: f64,
    mu: f64,
}

/// Displacement gradient, `grad[a][b] = ∂_b u_a`.
pub type Gradient = [[f64; 2]; 2];

impl Material {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        if !(mu > 0.0) || !(lambda >= 0.0) || !lambda.is_finite() || !mu.is_finite() {
            return Err(Error::InvalidArgument(format!("Lamé coefficients need μ > 0, λ ≥ 0 (got λ={lambda}, μ={mu})")));
        }
        Ok(Self { lambda, mu })
    }

    /// From Young's modulus and Poisson's ratio:
    /// `λ = Eν / ((1+ν)(1-2ν))`, `μ = E / (2(1+ν))`.
    pub fn from_young_poisson(young: f64, poisson: f64) -> Result<Self> {
        if !(young > 0.0) || !(0.0..0.5).contains(&poisson) {
            return Err(Error::InvalidArgument(format!("need E > 0 and 0 ≤ ν < 0.5 (got E={young}, ν={poisson})")));
        }
        let lambda = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
        let mu = young / (2.0 * (1.0 + poisson));
        Self::new(lambda, mu)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `σ = μ(∇u + ∇uᵀ) + λ (div u) I`.
    pub fn stress(&self, g: &Gradient) -> [[f64; 2]; 2] {
        let div = g[0][0] + g[1][1];
        let off = self.mu * (g[0][1] + g[1][0]);
        [
            [2.0 * self.mu * g[0][0] + self.lambda * div, off],
            [off, 2.0 * self.mu * g[1][1] + self.lambda * div],
        ]
    }

    /// `σ n`.
    pub fn traction(&self, g: &Gradient, n: Point) -> Point {
        let s = self.stress(g);
        [s[0][0] * n[0] + s[0][1] * n[1], s[1][0] * n[0] + s[1][1] * n[1]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn young_poisson_conversion() {
        let m = Material::from_young_poisson(5000.0, 0.25).unwrap();
        assert_eq!((m.lambda(), m.mu()), (2000.0, 2000.0));
    }

    #[test]
    fn rejects_nonphysical_values() {
        assert!(Material::new(1.0, 0.0).is_err());
        assert!(Material::new(-1.0, 1.0).is_err());
        assert!(Material::from_young_poisson(1.0, 0.5).is_err());
    }

    #[test]
    fn stress_of_pure_shear() {
        let m = Material::new(3.0, 2.0).unwrap();
        let s = m.stress(&[[0.0, 1.0], [0.0, 0.0]]);
        assert_eq!(s, [[0.0, 2.0], [2.0, 0.0]]);
        assert_eq!(m.traction(&[[1.0, 0.0], [0.0, 0.0]], [1.0, 0.0]), [7.0, 0.0]);
    }
}
