//! Monolithic and Uzawa conjugate-gradient solution of the saddle system.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::Side as FaerSide;

use crate::assembly::SaddleSystem;
use crate::error::{Block, Error, Result};
use crate::math::{vec_dot, vec_norm};
use crate::sparse::{dense_cholesky_tol, CsrMatrix};

/// Relative residual accepted by the monolithic solve.
pub const MONOLITHIC_TOL: f64 = 1e-10;

/// One Uzawa iteration: `(g_k, g_k) / (g_0, g_0)` and the dual value `J*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub ratio: f64,
    pub dual: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub u_plus: Vec<f64>,
    pub u_minus: Vec<f64>,
    pub lambda: Vec<f64>,
    pub iterations: usize,
    /// Final `(g, g) / (g_0, g_0)` (Uzawa) or relative residual (monolithic).
    pub ratio: f64,
    pub converged: bool,
    /// Uzawa only: recurrence value of the last gradient `g = M⁻¹(B⁺U⁺ - B⁻U⁻ - G)`.
    pub gradient: Vec<f64>,
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone)]
pub struct UzawaConfig {
    pub eps: f64,
    pub k_max: usize,
    pub lambda0: Option<Vec<f64>>,
}

impl Default for UzawaConfig {
    fn default() -> Self {
        Self { eps: 1e-8, k_max: 500, lambda0: None }
    }
}

/// A reusable sparse factorization.
pub enum Factor {
    Cholesky(Llt<usize, f64>),
    Lu(Lu<usize, f64>),
}

impl Factor {
    pub fn cholesky(a: &CsrMatrix, block: Block) -> Result<Self> {
        let m = a.to_faer()?;
        m.sp_cholesky(FaerSide::Lower).map(Factor::Cholesky).map_err(|_| Error::NotPositiveDefinite(block))
    }

    pub fn lu(a: &CsrMatrix, block: Block) -> Result<Self> {
        if !a.empty_rows().is_empty() || !a.transpose().empty_rows().is_empty() {
            return Err(Error::SingularBlock(block));
        }
        let m = a.to_faer()?;
        m.sp_lu().map(Factor::Lu).map_err(|_| Error::SingularBlock(block))
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = Col::<f64>::from_fn(b.len(), |i| b[i]);
        match self {
            Factor::Cholesky(f) => f.solve_in_place(x.as_mut()),
            Factor::Lu(f) => f.solve_in_place(x.as_mut()),
        }
        (0..b.len()).map(|i| x[i]).collect()
    }
}

fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    let mut r = b.to_vec();
    a.mul_vec_add(-1.0, x, &mut r);
    r
}

// Locate the block responsible for a singular saddle matrix.
fn diagnose(sys: &SaddleSystem, full: &CsrMatrix) -> Error {
    let (np, nm) = (sys.n_plus(), sys.n_minus());
    let block_of = |i: usize| {
        if i < np {
            Block::DisplacementPlus
        } else if i < np + nm {
            Block::DisplacementMinus
        } else {
            Block::Multiplier
        }
    };
    if let Some(&i) = full.empty_rows().first() {
        return Error::SingularBlock(block_of(i));
    }
    for (a, b) in [(&sys.a_plus, Block::DisplacementPlus), (&sys.a_minus, Block::DisplacementMinus)] {
        if Factor::lu(a, b).is_err() {
            return Error::SingularBlock(b);
        }
    }
    // Both displacement blocks are invertible: the coupling is rank
    // deficient on the kept multipliers.
    Error::SingularBlock(Block::Multiplier)
}

// Pivot threshold, relative to the largest diagonal entry, below which the
// multiplier Gram matrix counts as singular.
const RANK_TOL: f64 = 1e-13;

// `B⁺B⁺ᵀ + B⁻B⁻ᵀ + C` is positive definite iff the saddle matrix is
// invertible (given invertible A±). Checked densely since the multiplier
// space is small; this also keeps an exactly singular matrix away from the
// sparse LU.
fn coupling_has_full_rank(sys: &SaddleSystem) -> bool {
    let nl = sys.n_multiplier();
    let mut k = vec![0.0; nl * nl];
    for b in [&sys.b_plus, &sys.b_minus] {
        let bt = b.transpose();
        for c in 0..bt.nrows() {
            let col: Vec<(usize, f64)> = bt.row(c).collect();
            for &(i, vi) in &col {
                for &(j, vj) in &col {
                    k[i * nl + j] += vi * vj;
                }
            }
        }
    }
    for (i, j, v) in sys.c.iter() {
        k[i * nl + j] += v;
    }
    let dmax = (0..nl).map(|i| k[i * nl + i]).fold(0.0, f64::max);
    dense_cholesky_tol(&mut k, nl, RANK_TOL * dmax).is_ok()
}

/// Sparse LU of the full block matrix, with residual check and up to three
/// steps of iterative refinement.
pub fn solve_monolithic(sys: &SaddleSystem) -> Result<Solution> {
    let (np, nm, nl) = (sys.n_plus(), sys.n_minus(), sys.n_multiplier());
    let rhs = sys.full_rhs();
    let rhs_norm = vec_norm(&rhs);
    let full = sys.full_matrix();
    if !full.empty_rows().is_empty() {
        return Err(diagnose(sys, &full));
    }
    if !coupling_has_full_rank(sys) {
        return Err(diagnose(sys, &full));
    }
    if rhs_norm == 0.0 {
        return Ok(split(vec![0.0; np + nm + nl], np, nm, 0.0));
    }
    let lu = match full.to_faer()?.sp_lu() {
        Ok(lu) => lu,
        Err(_) => return Err(diagnose(sys, &full)),
    };
    let f = Factor::Lu(lu);
    let mut x = f.solve(&rhs);
    let mut r = residual(&full, &x, &rhs);
    let mut rel = vec_norm(&r) / rhs_norm;
    for _ in 0..3 {
        if rel <= 1e-3 * MONOLITHIC_TOL || !rel.is_finite() {
            break;
        }
        let dx = f.solve(&r);
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi += d;
        }
        r = residual(&full, &x, &rhs);
        let next = vec_norm(&r) / rhs_norm;
        if next >= rel {
            rel = next;
            break;
        }
        rel = next;
    }
    if !(rel <= MONOLITHIC_TOL) {
        return Err(match diagnose(sys, &full) {
            Error::SingularBlock(Block::Multiplier) if rel.is_finite() && rel < 1e-2 => {
                Error::Factorization(format!("relative residual {rel:e} above {MONOLITHIC_TOL:e}"))
            }
            e => e,
        });
    }
    Ok(split(x, np, nm, rel))
}

fn split(mut x: Vec<f64>, np: usize, nm: usize, ratio: f64) -> Solution {
    let lambda = x.split_off(np + nm);
    let u_minus = x.split_off(np);
    Solution {
        u_plus: x,
        u_minus,
        lambda,
        iterations: 0,
        ratio,
        converged: true,
        gradient: Vec::new(),
        trace: Vec::new(),
    }
}

/// Dual functional `J*(λ) = ½U·AU - F·U + λ·(B⁺U⁺ - B⁻U⁻ - G)` at the
/// minimizing displacements.
pub fn dual_value(sys: &SaddleSystem, up: &[f64], um: &[f64], lam: &[f64]) -> f64 {
    let mut jump = sys.b_plus.mul_vec(up);
    sys.b_minus.mul_vec_add(-1.0, um, &mut jump);
    for (j, g) in jump.iter_mut().zip(&sys.g) {
        *j -= g;
    }
    0.5 * sys.a_plus.bilinear(up, up) - vec_dot(&sys.f_plus, up) + 0.5 * sys.a_minus.bilinear(um, um)
        - vec_dot(&sys.f_minus, um)
        + vec_dot(lam, &jump)
}

/// Uzawa conjugate gradient (Fletcher-Reeves) on the dual problem of the
/// unstabilized system. Inner products on multipliers use the `Γ₀` mass
/// matrix; `A±` and the mass matrix are factorized once.
pub fn uzawa_cg(sys: &SaddleSystem, config: &UzawaConfig) -> Result<Solution> {
    if sys.gamma != 0.0 {
        return Err(Error::Unsupported("Uzawa iterations for the stabilized system (γ > 0)"));
    }
    if !(config.eps > 0.0) || config.k_max == 0 {
        return Err(Error::InvalidArgument(format!("need eps > 0 and k_max ≥ 1 (got {}, {})", config.eps, config.k_max)));
    }
    let nl = sys.n_multiplier();
    let fp = Factor::cholesky(&sys.a_plus, Block::DisplacementPlus)?;
    let fm = Factor::cholesky(&sys.a_minus, Block::DisplacementMinus)?;
    let fmass = Factor::cholesky(&sys.mass, Block::Multiplier)?;

    let mut lam = match &config.lambda0 {
        Some(l) if l.len() == nl => l.clone(),
        Some(l) => return Err(Error::InvalidArgument(format!("λ₀ has {} entries, expected {nl}", l.len()))),
        None => vec![0.0; nl],
    };

    // u₀± from A⁺U⁺ = F⁺ - B⁺ᵀλ₀ and A⁻U⁻ = F⁻ + B⁻ᵀλ₀.
    let mut rhs_p = sys.f_plus.clone();
    sys.b_plus.tr_mul_vec_add(-1.0, &lam, &mut rhs_p);
    let mut rhs_m = sys.f_minus.clone();
    sys.b_minus.tr_mul_vec_add(1.0, &lam, &mut rhs_m);
    let mut up = fp.solve(&rhs_p);
    let mut um = fm.solve(&rhs_m);

    let bp_u = sys.b_plus.mul_vec(&up);
    let bm_u = sys.b_minus.mul_vec(&um);
    let r0: Vec<f64> = (0..nl).map(|i| bp_u[i] - bm_u[i] - sys.g[i]).collect();
    let scale = vec_norm(&bp_u) + vec_norm(&bm_u) + vec_norm(&sys.g);
    let mut g = fmass.solve(&r0);
    let gg0 = vec_dot(&g, &r0);

    let mut trace = vec![TraceRow { iteration: 0, ratio: 1.0, dual: dual_value(sys, &up, &um, &lam) }];
    if vec_norm(&r0) <= 1e-13 * scale || gg0 == 0.0 {
        return Ok(Solution {
            u_plus: up,
            u_minus: um,
            lambda: lam,
            iterations: 0,
            ratio: 0.0,
            converged: true,
            gradient: g,
            trace,
        });
    }

    let mut dir = g.clone();
    let mut gg = gg0;
    let mut converged = false;
    let mut k = 0;
    while k < config.k_max {
        k += 1;
        // Sensitivities: A⁺ω⁺ = -B⁺ᵀμ̄, A⁻ω⁻ = B⁻ᵀμ̄.
        let wp = fp.solve(&sys.b_plus.tr_mul_vec(&dir).iter().map(|v| -v).collect::<Vec<_>>());
        let wm = fm.solve(&sys.b_minus.tr_mul_vec(&dir));
        let mut s = sys.b_plus.mul_vec(&wp);
        sys.b_minus.mul_vec_add(-1.0, &wm, &mut s);
        let den = vec_dot(&dir, &s);
        if den == 0.0 || !den.is_finite() {
            return Err(Error::ZeroStepDenominator { iteration: k });
        }
        let dm = sys.mass.mul_vec(&dir);
        let t = -vec_dot(&dm, &g) / den;
        let sg = fmass.solve(&s);
        for i in 0..nl {
            lam[i] += t * dir[i];
            g[i] += t * sg[i];
        }
        for (u, w) in up.iter_mut().zip(&wp) {
            *u += t * w;
        }
        for (u, w) in um.iter_mut().zip(&wm) {
            *u += t * w;
        }
        let gg_new = sys.mass.bilinear(&g, &g);
        trace.push(TraceRow { iteration: k, ratio: gg_new / gg0, dual: dual_value(sys, &up, &um, &lam) });
        if gg_new < config.eps * gg0 {
            gg = gg_new;
            converged = true;
            break;
        }
        let beta = gg_new / gg;
        gg = gg_new;
        for i in 0..nl {
            dir[i] = g[i] + beta * dir[i];
        }
    }
    Ok(Solution {
        u_plus: up,
        u_minus: um,
        lambda: lam,
        iterations: k,
        ratio: gg / gg0,
        converged,
        gradient: g,
        trace,
    })
}
