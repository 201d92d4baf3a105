//! Discretization set-up and the manufactured-solution run.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::assembly::{quadrature_degrees, Assembler, CrackLoad, ErrorMatrices, ProblemData, SaddleSystem};
use crate::error::{Error, Result};
use crate::levelset::{
    interface_quadrature, subdomain_quadrature, CrackDescription, CutMesh, InterfaceQuadrature, Side,
    SubdomainQuadrature,
};
use crate::manufactured::ManufacturedCase;
use crate::material::Material;
use crate::mesh::{BackgroundMesh, ElementType, RectDomain};
use crate::postproc;
use crate::solver::{solve_monolithic, uzawa_cg, Solution, UzawaConfig};
use crate::spaces::{DirichletBoundary, FdSpaces, MultiplierSpace, RestrictedSpace, UncutSpace, EPS_RANK};

/// Displacement / multiplier element pair, written `P2/P0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ElementCouple {
    pub displacement: u8,
    pub multiplier: u8,
}

impl ElementCouple {
    pub fn new(displacement: u8, multiplier: u8) -> Result<Self> {
        if !(1..=3).contains(&displacement) {
            return Err(Error::InvalidCouple(format!("displacement degree {displacement} not in 1..=3")));
        }
        if multiplier > displacement {
            return Err(Error::InvalidCouple(format!(
                "multiplier degree {multiplier} exceeds displacement degree {displacement}"
            )));
        }
        Ok(Self { displacement, multiplier })
    }
}

impl FromStr for ElementCouple {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidCouple(String::from(s));
        let (u, l) = s.trim().split_once('/').ok_or_else(bad)?;
        let degree = |t: &str| -> Result<u8> {
            let t = t.trim();
            let d = t.strip_prefix('P').or_else(|| t.strip_prefix('p')).ok_or_else(bad)?;
            d.parse::<u8>().map_err(|_| bad())
        };
        Self::new(degree(u)?, degree(l)?)
    }
}

impl fmt::Display for ElementCouple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}/P{}", self.displacement, self.multiplier)
    }
}

/// Mesh, cut geometry, quadratures and spaces of one configuration.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub cutmesh: CutMesh,
    pub spaces: FdSpaces,
    pub volume: SubdomainQuadrature,
    pub interface: InterfaceQuadrature,
    pub couple: ElementCouple,
}

impl Discretization {
    pub fn new(
        domain: RectDomain,
        nx: usize,
        ny: usize,
        crack: CrackDescription,
        couple: ElementCouple,
        boundary: DirichletBoundary,
    ) -> Result<Self> {
        let mesh = BackgroundMesh::build(domain, nx, ny)?;
        let elem = ElementType::lagrange(couple.displacement)?;
        let uncut = UncutSpace::new(&mesh, elem, boundary);
        let cutmesh = CutMesh::new(mesh, crack);
        let (vd, id) = quadrature_degrees(couple.displacement);
        let volume = subdomain_quadrature(&cutmesh, vd);
        let interface = interface_quadrature(&cutmesh, id);
        let plus = RestrictedSpace::build(&uncut, &cutmesh, Side::Plus)?;
        let minus = RestrictedSpace::build(&uncut, &cutmesh, Side::Minus)?;
        let multiplier =
            MultiplierSpace::build(ElementType::lagrange(couple.multiplier)?, cutmesh.mesh(), &interface, EPS_RANK)?;
        Ok(Self { cutmesh, spaces: FdSpaces { uncut, plus, minus, multiplier }, volume, interface, couple })
    }

    pub fn h(&self) -> f64 {
        self.cutmesh.mesh().h()
    }

    pub fn assembler(&self, material: Material) -> Assembler<'_> {
        Assembler::new(&self.cutmesh, &self.spaces, &self.volume, &self.interface, material)
    }

    /// Size of the full block system.
    pub fn n_dofs(&self) -> usize {
        self.spaces.plus.n_dofs() + self.spaces.minus.n_dofs() + self.spaces.multiplier.n_dofs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolverChoice {
    Monolithic,
    Uzawa(UzawaConfig),
}

impl PartialEq for UzawaConfig {
    fn eq(&self, o: &Self) -> bool {
        self.eps == o.eps && self.k_max == o.k_max && self.lambda0 == o.lambda0
    }
}

impl SolverChoice {
    pub fn name(&self) -> &'static str {
        match self {
            SolverChoice::Monolithic => "monolithic",
            SolverChoice::Uzawa(_) => "uzawa",
        }
    }

    pub fn solve(&self, sys: &SaddleSystem) -> Result<Solution> {
        match self {
            SolverChoice::Monolithic => solve_monolithic(sys),
            SolverChoice::Uzawa(cfg) => uzawa_cg(sys, cfg),
        }
    }
}

/// Data of the manufactured test: body force, exact tractions on `Γ_T`,
/// jump `D` on `Γ₀` and the exact branches on `∂Ω`.
pub fn manufactured_data(case: &ManufacturedCase) -> ProblemData {
    let c = *case;
    ProblemData {
        body_force: Some(Arc::new(move |p| c.exact_body_force(p))),
        crack_load: CrackLoad::Traction(Arc::new(move |p, n| c.exact_traction(p, n))),
        jump: Some(Arc::new(move |_| c.jump)),
        dirichlet_plus: Some(Arc::new(move |p| c.branch(Side::Plus, p))),
        dirichlet_minus: Some(Arc::new(move |p| c.branch(Side::Minus, p))),
    }
}

/// One row of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub couple: ElementCouple,
    pub gamma0: f64,
    pub n: usize,
    pub h: f64,
    pub n_dofs: usize,
    pub rel_l2_pct: f64,
    pub rel_h1_pct: f64,
    pub rel_lambda_pct: f64,
    pub jump_ratio: f64,
    pub solver: &'static str,
    pub iterations: usize,
    pub converged: bool,
}

/// Everything produced by one manufactured solve, for callers that need more
/// than the summary.
#[derive(Debug, Clone)]
pub struct ManufacturedRun {
    pub disc: Discretization,
    pub system: SaddleSystem,
    pub errors: ErrorMatrices,
    pub solution: Solution,
    pub u_plus_ex: Vec<f64>,
    pub u_minus_ex: Vec<f64>,
    pub report: RunReport,
}

/// Solve the manufactured problem on an `n × n` mesh of the unit square.
pub fn run_manufactured(
    case: &ManufacturedCase,
    couple: ElementCouple,
    n: usize,
    gamma0: f64,
    solver: &SolverChoice,
) -> Result<ManufacturedRun> {
    if !(gamma0 >= 0.0) {
        return Err(Error::InvalidArgument(format!("γ₀ must be ≥ 0 (got {gamma0})")));
    }
    let disc = Discretization::new(RectDomain::unit_square(), n, n, case.crack(), couple, DirichletBoundary::ALL)?;
    let asm = disc.assembler(case.material);
    let (system, errors) = asm.stabilized(gamma0, &manufactured_data(case));
    let solution = solver.solve(&system)?;

    let c = *case;
    let exact = move |side: Side, p| (c.branch(side, p), c.gradient(p));
    let (l2, h1) =
        postproc::displacement_errors(&disc.cutmesh, &disc.spaces, &solution.u_plus, &solution.u_minus, &exact)?;
    let (u_plus_ex, u_minus_ex) = postproc::branch_interpolants(&disc.spaces, &|s, p| c.branch(s, p));
    let rel_lambda = postproc::multiplier_error(&errors, &u_plus_ex, &u_minus_ex, &solution.lambda)?;
    let jump_ratio =
        postproc::jump_compatibility(&disc.cutmesh, &disc.spaces, &disc.interface, &case.material, &u_plus_ex, &u_minus_ex)?;
    let report = RunReport {
        couple,
        gamma0,
        n,
        h: disc.h(),
        n_dofs: disc.n_dofs(),
        rel_l2_pct: l2,
        rel_h1_pct: h1,
        rel_lambda_pct: rel_lambda,
        jump_ratio,
        solver: solver.name(),
        iterations: solution.iterations,
        converged: solution.converged,
    };
    Ok(ManufacturedRun { disc, system, errors, solution, u_plus_ex, u_minus_ex, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn couple_parsing() {
        let c: ElementCouple = "P2/P0".parse().unwrap();
        assert_eq!((c.displacement, c.multiplier), (2, 0));
        assert_eq!(c.to_string(), "P2/P0");
        assert!(matches!("P1/P2".parse::<ElementCouple>(), Err(Error::InvalidCouple(_))));
        assert!("P2-P0".parse::<ElementCouple>().is_err());
        assert!("P4/P0".parse::<ElementCouple>().is_err());
        assert!("Px/P0".parse::<ElementCouple>().is_err());
    }

    #[test]
    fn reference_p1p0_run() {
        let run = run_manufactured(
            &ManufacturedCase::reference(),
            "P1/P0".parse().unwrap(),
            20,
            0.0,
            &SolverChoice::Monolithic,
        )
        .unwrap();
        assert!(run.solution.ratio <= 1e-10);
        let r = &run.report;
        assert!(r.rel_l2_pct.is_finite() && r.rel_l2_pct > 0.0 && r.rel_l2_pct < 5.0, "{r:?}");
        assert!(r.rel_h1_pct > r.rel_l2_pct);
    }
}
