//! CSV and text writers. Floats use Rust's shortest round-trip formatting,
//! so identical results give identical bytes.

use std::io::Write;

use fdcrack_core::problem::ElementCouple;

use crate::error::CliResult;
use crate::experiments::{ConvergenceResult, DemoResult, GammaSweepResult, RobustnessResult, SweepRow};

pub const CONVERGENCE_HEADER: [&str; 11] = [
    "elem_u",
    "elem_lambda",
    "gamma0",
    "h",
    "n_dofs",
    "rel_l2_pct",
    "rel_h1_pct",
    "rel_lambda_pct",
    "jump_ratio",
    "solver",
    "iters",
];

pub const SWEEP_HEADER: [&str; 10] =
    ["x_a", "elem_u", "elem_lambda", "gamma0", "h", "n_dofs", "rel_l2_pct", "rel_h1_pct", "rel_lambda_pct", "status"];

fn elems(c: ElementCouple) -> [String; 2] {
    [format!("P{}", c.displacement), format!("P{}", c.multiplier)]
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per run, then one `h = rate` row per couple carrying the fitted
/// slopes in the three error columns.
pub fn write_convergence<W: Write>(out: W, r: &ConvergenceResult) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CONVERGENCE_HEADER)?;
    for row in &r.rows {
        let [u, l] = elems(row.couple);
        w.write_record([
            u,
            l,
            row.gamma0.to_string(),
            row.h.to_string(),
            row.n_dofs.to_string(),
            row.rel_l2_pct.to_string(),
            row.rel_h1_pct.to_string(),
            row.rel_lambda_pct.to_string(),
            row.jump_ratio.to_string(),
            row.solver.to_string(),
            row.iterations.to_string(),
        ])?;
    }
    for rate in &r.rates {
        let [u, l] = elems(rate.couple);
        w.write_record([
            u,
            l,
            rate.gamma0.to_string(),
            "rate".into(),
            String::new(),
            opt(rate.l2),
            opt(rate.h1),
            opt(rate.lambda),
            String::new(),
            rate.solver.to_string(),
            String::new(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_sweep_rows<W: Write>(w: &mut csv::Writer<W>, rows: &[SweepRow], couple: ElementCouple) -> CliResult<()> {
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        let rec = match &r.report {
            Ok(rep) => {
                let [u, l] = elems(rep.couple);
                [
                    r.x_a.to_string(),
                    u,
                    l,
                    r.gamma0.to_string(),
                    rep.h.to_string(),
                    rep.n_dofs.to_string(),
                    rep.rel_l2_pct.to_string(),
                    rep.rel_h1_pct.to_string(),
                    rep.rel_lambda_pct.to_string(),
                    "ok".into(),
                ]
            }
            Err(msg) => {
                let [u, l] = elems(couple);
                let mut rec: [String; 10] = Default::default();
                rec[0] = r.x_a.to_string();
                rec[1] = u;
                rec[2] = l;
                rec[3] = r.gamma0.to_string();
                rec[9] = msg.clone();
                rec
            }
        };
        w.write_record(rec)?;
    }
    Ok(())
}

/// Gamma and robustness sweeps share this layout; failed solves keep their
/// coordinates and carry the error message in `status`.
pub fn write_sweep<W: Write>(out: W, rows: &[SweepRow], couple: ElementCouple) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    write_sweep_rows(&mut w, rows, couple)?;
    w.flush()?;
    Ok(())
}

pub fn gamma_summary(r: &GammaSweepResult) -> String {
    let mut s = String::new();
    let f = |v: Option<f64>| v.map(|x| format!("{x:.4e}")).unwrap_or_else(|| "n/a".into());
    for c in &r.calibration {
        s.push_str(&format!(
            "x_A = {}: err(γ₀=0.001) = {}, err(γ₀=0.03) = {} ({}within factor 2)",
            c.x_a,
            f(c.baseline),
            f(c.at_003),
            if c.within_factor_2 { "" } else { "NOT " }
        ));
        match c.spike {
            Some((g, e)) => s.push_str(&format!(
                "; max err over γ₀ > 0.04 = {e:.4e} at γ₀ = {g:.4e} ({})\n",
                if c.spike_exceeds_3x { "spike above 3x baseline" } else { "no spike above 3x baseline" }
            )),
            None => s.push_str("; no γ₀ > 0.04 point solved (no spike)\n"),
        }
    }
    s
}

pub fn robustness_summary(r: &RobustnessResult) -> String {
    let mut s = String::new();
    for c in &r.counts {
        s.push_str(&format!(
            "γ₀ = {}: {} of {} positions above {}% ({} solver failures)\n",
            c.gamma0,
            c.failures(),
            c.total,
            r.threshold,
            c.solver_failures
        ));
    }
    s
}

pub fn write_demo<W: Write>(mut out: W, r: &DemoResult) -> CliResult<()> {
    let mut text = String::from("# x y ux uy\n");
    for [x, y, ux, uy] in &r.rows {
        text.push_str(&format!("{x} {y} {ux} {uy}\n"));
    }
    out.write_all(text.as_bytes())?;
    Ok(())
}
