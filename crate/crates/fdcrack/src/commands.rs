//! Subcommands: configuration keys, defaults and output.

use std::io::Write;
use std::path::PathBuf;

use fdcrack_core::extension3d::build_extension_scaled;
use fdcrack_core::manufactured::{ManufacturedCase, DEFAULT_JUMP};
use fdcrack_core::material::Material;
use fdcrack_core::problem::{ElementCouple, SolverChoice};
use fdcrack_core::solver::UzawaConfig;

use crate::config::Config;
use crate::error::{CliError, CliResult};
use crate::experiments::{
    convergence, default_gamma_grid, demo, gamma_sweep, robustness, ConvergenceSettings, DemoSettings,
    GammaSweepSettings, RobustnessSettings,
};
use crate::output;
use crate::surface_io::{format_extension, locate, read_surface};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Convergence,
    GammaSweep,
    Robustness,
    Demo,
    Extend3d,
}

const MATERIAL_KEYS: [&str; 2] = ["lambda", "mu"];

impl Command {
    pub fn keys(self) -> &'static [&'static str] {
        match self {
            Command::Convergence => &[
                "couples", "n", "gamma0", "solver", "uzawa_eps", "uzawa_kmax", "x0", "x_a", "x_b", "jump", "lambda",
                "mu", "trace", "out", "threads",
            ],
            Command::GammaSweep => &["couple", "n", "gammas", "positions", "jump", "lambda", "mu", "out", "threads"],
            Command::Robustness => &[
                "couple", "n", "gammas", "xa_min", "xa_max", "xa_step", "threshold", "jump", "lambda", "mu", "out",
                "threads",
            ],
            Command::Demo => &["n", "pressure", "couple", "gamma0", "young", "poisson", "out"],
            Command::Extend3d => &["input", "seed_sign", "apex_scale", "out"],
        }
    }
}

fn couple(cfg: &Config, key: &str, default: &str) -> CliResult<ElementCouple> {
    Ok(cfg.get_string(key).unwrap_or_else(|| default.into()).parse()?)
}

fn material(cfg: &Config) -> CliResult<Material> {
    let [l, m] = MATERIAL_KEYS.map(|k| cfg.get(k, 1.0));
    Ok(Material::new(l?, m?)?)
}

fn jump(cfg: &Config) -> CliResult<[f64; 2]> {
    match cfg.get_list::<f64>("jump", DEFAULT_JUMP.to_vec())?[..] {
        [a, b] => Ok([a, b]),
        _ => Err(CliError::Config("key `jump` needs two values".into())),
    }
}

fn solver(cfg: &Config) -> CliResult<SolverChoice> {
    match cfg.get_string("solver").as_deref().unwrap_or("monolithic") {
        "monolithic" => Ok(SolverChoice::Monolithic),
        "uzawa" => {
            let d = UzawaConfig::default();
            Ok(SolverChoice::Uzawa(UzawaConfig {
                eps: cfg.get("uzawa_eps", d.eps)?,
                k_max: cfg.get("uzawa_kmax", d.k_max)?,
                lambda0: None,
            }))
        }
        other => Err(CliError::Config(format!("unknown solver `{other}` (monolithic or uzawa)"))),
    }
}

/// Size the rayon pool once, from the `threads` key.
fn configure_threads(cfg: &Config) -> CliResult<()> {
    let t: usize = cfg.get("threads", 0)?;
    if t > 0 {
        // A second call fails when a pool already exists; keeping it is fine.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    Ok(())
}

/// Run `cmd`; the main result goes to `out` (unless `out` is configured as a
/// file path), summaries go to `log`.
pub fn run(cmd: Command, cfg: &Config, out: &mut dyn Write, log: &mut dyn Write) -> CliResult<()> {
    cfg.check_keys(cmd.keys())?;
    configure_threads(cfg)?;
    let mut file;
    let out: &mut dyn Write = match cfg.get_string("out") {
        Some(p) => {
            file = std::fs::File::create(&p).map_err(|e| CliError::io(&p, e))?;
            &mut file
        }
        None => out,
    };
    match cmd {
        Command::Convergence => {
            let case = ManufacturedCase::new(cfg.get("x0", 0.317)?, cfg.get("x_a", 0.47)?, cfg.get("x_b", 0.52)?)
                .with_material(material(cfg)?)
                .with_jump(jump(cfg)?);
            let couples = cfg
                .get_list::<String>("couples", vec!["P1/P0".into(), "P2/P0".into(), "P2/P1".into()])?
                .iter()
                .map(|s| s.parse())
                .collect::<Result<Vec<ElementCouple>, _>>()?;
            let s = ConvergenceSettings {
                case,
                couples,
                ns: cfg.get_list("n", vec![10, 20, 40, 80, 160])?,
                gamma0: cfg.get("gamma0", 0.0)?,
                solver: solver(cfg)?,
            };
            let r = convergence(&s)?;
            output::write_convergence(&mut *out, &r)?;
            for rate in &r.rates {
                let f = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "n/a".into());
                writeln!(
                    log,
                    "{} γ₀ = {}: slopes L2 {}, H1 {}, multiplier {}",
                    rate.couple,
                    rate.gamma0,
                    f(rate.l2),
                    f(rate.h1),
                    f(rate.lambda)
                )?;
            }
            if let Some(path) = cfg.get_string("trace") {
                let mut w = csv::Writer::from_path(&path)?;
                w.write_record(["elem_u", "elem_lambda", "h", "iteration", "ratio", "dual"])?;
                for (row, trace) in r.rows.iter().zip(&r.traces) {
                    for t in trace {
                        w.write_record([
                            format!("P{}", row.couple.displacement),
                            format!("P{}", row.couple.multiplier),
                            row.h.to_string(),
                            t.iteration.to_string(),
                            t.ratio.to_string(),
                            t.dual.to_string(),
                        ])?;
                    }
                }
                w.flush()?;
            }
        }
        Command::GammaSweep => {
            let s = GammaSweepSettings {
                couple: couple(cfg, "couple", "P2/P0")?,
                n: cfg.get("n", 40)?,
                gammas: cfg.get_list("gammas", default_gamma_grid())?,
                positions: cfg.get_list("positions", vec![0.47])?,
                material: material(cfg)?,
                jump: jump(cfg)?,
            };
            let r = gamma_sweep(&s)?;
            output::write_sweep(&mut *out, &r.rows, s.couple)?;
            write!(log, "{}", output::gamma_summary(&r))?;
        }
        Command::Robustness => {
            let s = RobustnessSettings {
                couple: couple(cfg, "couple", "P2/P0")?,
                n: cfg.get("n", 40)?,
                gammas: cfg.get_list("gammas", vec![0.0, 0.0005, 0.03])?,
                xa_min: cfg.get("xa_min", 0.0)?,
                xa_max: cfg.get("xa_max", 0.95)?,
                xa_step: cfg.get("xa_step", 0.005)?,
                threshold: cfg.get("threshold", 100.0)?,
                material: material(cfg)?,
                jump: jump(cfg)?,
            };
            let r = robustness(&s)?;
            output::write_sweep(&mut *out, &r.rows, s.couple)?;
            write!(log, "{}", output::robustness_summary(&r))?;
        }
        Command::Demo => {
            let n: usize = cfg.get("n", 25)?;
            let s = DemoSettings {
                nx: n,
                ny: n / 2,
                pressure: cfg.get("pressure", 1.0)?,
                couple: couple(cfg, "couple", "P2/P0")?,
                gamma0: cfg.get("gamma0", 0.0)?,
                material: Material::from_young_poisson(cfg.get("young", 5000.0)?, cfg.get("poisson", 0.25)?)?,
            };
            let r = demo(&s)?;
            output::write_demo(&mut *out, &r)?;
            writeln!(
                log,
                "{}x{} mesh: max |u| = {:.6e} at ({}, {})",
                s.nx, s.ny, r.max_magnitude, r.argmax[0], r.argmax[1]
            )?;
        }
        Command::Extend3d => {
            let input: PathBuf = cfg
                .get_string("input")
                .ok_or_else(|| CliError::Config("extend3d needs `input = <surface file>`".into()))?
                .into();
            let parsed = read_surface(&input)?;
            let ext = build_extension_scaled(parsed.surface, cfg.get("seed_sign", 1i8)?, cfg.get("apex_scale", 1.0)?)
                .map_err(|e| locate(e, &parsed.triangle_lines, &input))?;
            out.write_all(format_extension(&ext).as_bytes())?;
            writeln!(
                log,
                "{} triangles: {} apexes, {} extension facets, region volume {:.6e}",
                ext.surface().n_triangles(),
                ext.apexes().len(),
                ext.facets().len(),
                ext.region_volume()
            )?;
        }
    }
    out.flush()?;
    Ok(())
}
