//! The batch experiments: convergence study, γ₀ calibration sweep,
//! robustness sweep over the crack position, the rift-zone demo and the 3D
//! extension. Independent runs go through the rayon pool; results are sorted
//! before they are returned so output does not depend on scheduling.

use std::sync::Arc;

use fdcrack_core::assembly::{CrackLoad, ProblemData};
use fdcrack_core::levelset::{CrackDescription, Side};
use fdcrack_core::manufactured::{sweep_geometry, ManufacturedCase};
use fdcrack_core::material::Material;
use fdcrack_core::mesh::RectDomain;
use fdcrack_core::postproc::fit_rate;
use fdcrack_core::problem::{run_manufactured, Discretization, ElementCouple, RunReport, SolverChoice};
use fdcrack_core::solver::TraceRow;
use fdcrack_core::spaces::DirichletBoundary;
use rayon::prelude::*;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone)]
pub struct ConvergenceSettings {
    pub case: ManufacturedCase,
    pub couples: Vec<ElementCouple>,
    pub ns: Vec<usize>,
    pub gamma0: f64,
    pub solver: SolverChoice,
}

/// Least-squares slopes of one couple's error curves.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub couple: ElementCouple,
    pub gamma0: f64,
    pub solver: &'static str,
    pub l2: Option<f64>,
    pub h1: Option<f64>,
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ConvergenceResult {
    pub rows: Vec<RunReport>,
    pub rates: Vec<RateRow>,
    /// Uzawa traces per row (empty for the monolithic solver).
    pub traces: Vec<Vec<TraceRow>>,
}

pub fn convergence(s: &ConvergenceSettings) -> CliResult<ConvergenceResult> {
    if s.couples.is_empty() || s.ns.is_empty() {
        return Err(CliError::Config("need at least one couple and one mesh size".into()));
    }
    let jobs: Vec<(ElementCouple, usize)> =
        s.couples.iter().flat_map(|&c| s.ns.iter().map(move |&n| (c, n))).collect();
    let mut out: Vec<_> = jobs
        .par_iter()
        .map(|&(c, n)| {
            run_manufactured(&s.case, c, n, s.gamma0, &s.solver).map(|r| (r.report, r.solution.trace))
        })
        .collect::<Result<Vec<_>, _>>()?;
    out.sort_by_key(|r| (r.0.couple, r.0.n));
    let (rows, traces): (Vec<_>, Vec<_>) = out.into_iter().unzip();
    let rates = s
        .couples
        .iter()
        .map(|&c| {
            let sel: Vec<&RunReport> = rows.iter().filter(|r| r.couple == c).collect();
            let h: Vec<f64> = sel.iter().map(|r| r.h).collect();
            let fit = |f: fn(&RunReport) -> f64| fit_rate(&h, &sel.iter().map(|r| f(r)).collect::<Vec<_>>()).ok();
            RateRow {
                couple: c,
                gamma0: s.gamma0,
                solver: s.solver.name(),
                l2: fit(|r| r.rel_l2_pct),
                h1: fit(|r| r.rel_h1_pct),
                lambda: fit(|r| r.rel_lambda_pct),
            }
        })
        .collect();
    Ok(ConvergenceResult { rows, rates, traces })
}

/// 60 log-spaced values in `[1e-4, 1]`, the calibration values 0.0005,
/// 0.001, 0.03, 0.04 and the unstabilized `γ₀ = 0`, ascending.
pub fn default_gamma_grid() -> Vec<f64> {
    let mut g: Vec<f64> = (0..60).map(|i| 10f64.powf(-4.0 + 4.0 * i as f64 / 59.0)).collect();
    g.extend([0.0, 0.0005, 0.001, 0.03, 0.04]);
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

/// One sweep point; `Err` holds the message of a failed solve.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub x_a: f64,
    pub gamma0: f64,
    pub report: Result<RunReport, String>,
}

impl SweepRow {
    pub fn lambda_error(&self) -> Option<f64> {
        self.report.as_ref().ok().map(|r| r.rel_lambda_pct)
    }
}

fn sweep(
    couple: ElementCouple,
    n: usize,
    material: Material,
    jump: [f64; 2],
    points: &[(f64, f64)],
) -> CliResult<Vec<SweepRow>> {
    let cases = points
        .iter()
        .map(|&(x_a, g)| Ok((sweep_geometry(x_a)?.with_material(material).with_jump(jump), x_a, g)))
        .collect::<CliResult<Vec<_>>>()?;
    let mut rows: Vec<SweepRow> = cases
        .par_iter()
        .map(|(case, x_a, g)| {
            let report = match run_manufactured(case, couple, n, *g, &SolverChoice::Monolithic) {
                Ok(r) => Ok(r.report),
                Err(e) => match CliError::from(e) {
                    CliError::Numerical(e) => Err(e.to_string()),
                    other => return Err(other),
                },
            };
            Ok(SweepRow { x_a: *x_a, gamma0: *g, report })
        })
        .collect::<CliResult<Vec<_>>>()?;
    rows.sort_by(|a, b| a.x_a.total_cmp(&b.x_a).then(a.gamma0.total_cmp(&b.gamma0)));
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct GammaSweepSettings {
    pub couple: ElementCouple,
    pub n: usize,
    pub gammas: Vec<f64>,
    pub positions: Vec<f64>,
    pub material: Material,
    pub jump: [f64; 2],
}

/// Calibration check of one crack position: the error at `γ₀ = 0.03`
/// against the baseline at `γ₀ = 0.001`, and the largest error beyond
/// `γ₀ = 0.04` against three times the baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub x_a: f64,
    pub baseline: Option<f64>,
    pub at_003: Option<f64>,
    pub within_factor_2: bool,
    pub spike: Option<(f64, f64)>,
    pub spike_exceeds_3x: bool,
}

#[derive(Debug, Clone)]
pub struct GammaSweepResult {
    pub rows: Vec<SweepRow>,
    pub calibration: Vec<Calibration>,
}

pub fn gamma_sweep(s: &GammaSweepSettings) -> CliResult<GammaSweepResult> {
    if s.gammas.iter().any(|g| !(*g >= 0.0)) {
        return Err(CliError::Config("γ₀ values must be ≥ 0".into()));
    }
    let points: Vec<(f64, f64)> =
        s.positions.iter().flat_map(|&x| s.gammas.iter().map(move |&g| (x, g))).collect();
    let rows = sweep(s.couple, s.n, s.material, s.jump, &points)?;
    let calibration = s
        .positions
        .iter()
        .map(|&x| {
            let at = |g: f64| rows.iter().find(|r| r.x_a == x && r.gamma0 == g).and_then(SweepRow::lambda_error);
            let (baseline, at_003) = (at(0.001), at(0.03));
            let spike = rows
                .iter()
                .filter(|r| r.x_a == x && r.gamma0 > 0.04)
                .filter_map(|r| r.lambda_error().map(|e| (r.gamma0, e)))
                .max_by(|a, b| a.1.total_cmp(&b.1));
            let within_factor_2 = matches!((baseline, at_003), (Some(b), Some(v)) if v <= 2.0 * b && v >= 0.5 * b);
            let spike_exceeds_3x = matches!((baseline, spike), (Some(b), Some((_, e))) if e > 3.0 * b);
            Calibration { x_a: x, baseline, at_003, within_factor_2, spike, spike_exceeds_3x }
        })
        .collect();
    Ok(GammaSweepResult { rows, calibration })
}

#[derive(Debug, Clone)]
pub struct RobustnessSettings {
    pub couple: ElementCouple,
    pub n: usize,
    pub gammas: Vec<f64>,
    pub xa_min: f64,
    pub xa_max: f64,
    pub xa_step: f64,
    pub threshold: f64,
    pub material: Material,
    pub jump: [f64; 2],
}

impl RobustnessSettings {
    /// `x_min, x_min + step, …` up to `x_max` inclusive, rounded to 1e-9 so
    /// that the endpoints are hit exactly.
    pub fn positions(&self) -> CliResult<Vec<f64>> {
        if !(self.xa_step > 0.0) || self.xa_max < self.xa_min {
            return Err(CliError::Config("need xa_step > 0 and xa_max ≥ xa_min".into()));
        }
        let count = ((self.xa_max - self.xa_min) / self.xa_step + 1e-9).floor() as usize;
        Ok((0..=count).map(|i| ((self.xa_min + i as f64 * self.xa_step) * 1e9).round() / 1e9).collect())
    }
}

/// Failures per `γ₀`: solves above the threshold or that failed outright.
#[derive(Debug, Clone, PartialEq)]
pub struct FailureCount {
    pub gamma0: f64,
    pub above_threshold: usize,
    pub solver_failures: usize,
    pub total: usize,
}

impl FailureCount {
    pub fn failures(&self) -> usize {
        self.above_threshold + self.solver_failures
    }
}

#[derive(Debug, Clone)]
pub struct RobustnessResult {
    pub rows: Vec<SweepRow>,
    pub counts: Vec<FailureCount>,
    pub threshold: f64,
}

pub fn robustness(s: &RobustnessSettings) -> CliResult<RobustnessResult> {
    let xs = s.positions()?;
    let points: Vec<(f64, f64)> = xs.iter().flat_map(|&x| s.gammas.iter().map(move |&g| (x, g))).collect();
    let rows = sweep(s.couple, s.n, s.material, s.jump, &points)?;
    let counts = s
        .gammas
        .iter()
        .map(|&g| {
            let sel: Vec<&SweepRow> = rows.iter().filter(|r| r.gamma0 == g).collect();
            FailureCount {
                gamma0: g,
                above_threshold: sel.iter().filter(|r| r.lambda_error().is_some_and(|e| e > s.threshold)).count(),
                solver_failures: sel.iter().filter(|r| r.report.is_err()).count(),
                total: sel.len(),
            }
        })
        .collect();
    Ok(RobustnessResult { rows, counts, threshold: s.threshold })
}

#[derive(Debug, Clone)]
pub struct DemoSettings {
    pub nx: usize,
    pub ny: usize,
    pub pressure: f64,
    pub couple: ElementCouple,
    pub gamma0: f64,
    pub material: Material,
}

#[derive(Debug, Clone)]
pub struct DemoResult {
    /// `[x, y, ux, uy]` per background vertex, row by row from the bottom.
    pub rows: Vec<[f64; 4]>,
    pub max_magnitude: f64,
    pub argmax: [f64; 2],
}

/// The rift-zone crack `y = 2(x - 48) + 35`, `35 ≤ y ≤ 45`, in
/// `[0, 100] × [0, 50]`.
pub fn rift_crack() -> CrackDescription {
    CrackDescription::new(
        Arc::new(|p: [f64; 2]| p[1] - 2.0 * (p[0] - 48.0) - 35.0),
        Arc::new(|p: [f64; 2]| 35.0 - p[1]),
        Arc::new(|p: [f64; 2]| p[1] - 45.0),
    )
}

pub fn demo(s: &DemoSettings) -> CliResult<DemoResult> {
    let domain = RectDomain::new(0.0, 100.0, 0.0, 50.0)?;
    let disc = Discretization::new(domain, s.nx, s.ny, rift_crack(), s.couple, DirichletBoundary::ALL_BUT_TOP)?;
    let data = ProblemData { crack_load: CrackLoad::Pressure(s.pressure), ..Default::default() };
    let (sys, _) = disc.assembler(s.material).stabilized(s.gamma0, &data);
    let sol = SolverChoice::Monolithic.solve(&sys)?;

    let mesh = disc.cutmesh.mesh();
    let dm = disc.spaces.uncut.dofmap();
    // Background vertex → node of the displacement element.
    let mut node_of = vec![usize::MAX; mesh.n_vertices()];
    for c in 0..mesh.n_cells() {
        for (k, &v) in mesh.cells()[c].iter().enumerate() {
            node_of[v] = dm.cell_nodes(c)[k];
        }
    }
    let crack = disc.cutmesh.crack();
    let mut rows = Vec::with_capacity(mesh.n_vertices());
    let (mut max_magnitude, mut argmax) = (0.0, [0.0; 2]);
    for (v, &p) in mesh.vertices().iter().enumerate() {
        let node = node_of[v];
        let preferred = if crack.ls1(p) > 0.0 { Side::Plus } else { Side::Minus };
        let pick = [preferred, preferred.opposite()]
            .into_iter()
            .find_map(|side| {
                let space = disc.spaces.side(side);
                let coeffs = match side {
                    Side::Plus => &sol.u_plus,
                    Side::Minus => &sol.u_minus,
                };
                space.local_node(node).map(|l| [coeffs[space.dof(l, 0)], coeffs[space.dof(l, 1)]])
            })
            .expect("every vertex belongs to one of the sides");
        let mag = pick[0].hypot(pick[1]);
        if mag > max_magnitude {
            max_magnitude = mag;
            argmax = p;
        }
        rows.push([p[0], p[1], pick[0], pick[1]]);
    }
    Ok(DemoResult { rows, max_magnitude, argmax })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn robustness_settings(min: f64, max: f64, step: f64) -> RobustnessSettings {
        RobustnessSettings {
            couple: "P2/P0".parse().unwrap(),
            n: 4,
            gammas: vec![0.0],
            xa_min: min,
            xa_max: max,
            xa_step: step,
            threshold: 100.0,
            material: Material::new(1.0, 1.0).unwrap(),
            jump: [0.1, 0.05],
        }
    }

    #[test]
    fn gamma_grid_contains_calibration_points() {
        let g = default_gamma_grid();
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        for v in [0.0, 1e-4, 0.0005, 0.001, 0.03, 0.04, 1.0] {
            assert!(g.iter().any(|&x| (x - v).abs() <= 1e-15), "{v}");
        }
        assert!(g.len() >= 60);
    }

    #[test]
    fn positions_include_both_endpoints() {
        let p = robustness_settings(0.0, 0.95, 0.005).positions().unwrap();
        assert_eq!(p.len(), 191);
        assert_eq!(p[0], 0.0);
        assert_eq!(p[100], 0.5);
        assert_eq!(*p.last().unwrap(), 0.95);
        assert!(robustness_settings(0.0, 0.5, 0.0).positions().is_err());
        assert!(robustness_settings(0.6, 0.5, 0.1).positions().is_err());
    }

    #[test]
    fn rift_crack_opens_between_its_tips() {
        let c = rift_crack();
        assert_eq!(c.tag([50.0, 39.0]), fdcrack_core::levelset::InterfaceTag::GammaT);
        assert_eq!(c.tag([45.0, 29.0]), fdcrack_core::levelset::InterfaceTag::Gamma0);
        assert_eq!(c.ls1([50.0, 39.0]), 0.0);
    }

    #[test]
    fn failed_solves_count_as_failures() {
        let c = FailureCount { gamma0: 0.0, above_threshold: 2, solver_failures: 3, total: 10 };
        assert_eq!(c.failures(), 5);
    }
}
