#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use flexohom::config::axis_index;
use flexohom::output::{self, Report, ReportTimings};
use flexohom::pipeline::{Mode, Model};
use flexohom::{AppError, ConfigError, Result, RunConfig, RunSpec};
use flexohom_core::post::sample_fields;

#[derive(Parser)]
#[command(name = "flexohom", version, about = "Homogenized response of periodic flexoelectric unit cells")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (JSON).
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; falls back to FLEXOHOM_THREADS.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Actuator,
    Sensor,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the configured loading and write report.json, macro.csv and fields.vtk.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Apparent coefficients over a range of loading-frame angles.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// start:step:stop in degrees, stop excluded.
        #[arg(long, default_value = "0:5:360")]
        angles: String,
        #[arg(long, value_enum, default_value = "actuator")]
        mode: ModeArg,
    },
    /// Check the configuration without solving.
    Validate { config: PathBuf },
    /// Boundary-traction versus volume-average stress under uniform refinement.
    Convergence {
        #[command(flatten)]
        common: Common,
        /// Number of grids, each twice as fine as the previous one.
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load(path: &Path) -> Result<RunSpec> {
    Ok(RunConfig::load(path)?.resolve()?)
}

fn threads(requested: Option<usize>) -> Result<()> {
    let n = match requested {
        Some(n) => Some(n),
        None => match std::env::var("FLEXOHOM_THREADS") {
            Ok(v) => Some(v.trim().parse().map_err(|_| ConfigError::field("FLEXOHOM_THREADS", format!("not a thread count: '{v}'")))?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(ConfigError::field("threads", "must be at least 1").into());
        }
        // a second initialization only happens in-process and is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn prepare_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Validate { config } => {
            let spec = load(&config)?;
            println!("ok: {} ({}D, {} cells, degree {})", spec.name, spec.dim, spec.cells.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("x"), spec.degree);
            Ok(())
        }
        Command::Run { common } => run(&common),
        Command::Sweep { common, angles, mode } => sweep(&common, &angles, mode),
        Command::Convergence { common, levels } => convergence(&common, levels),
    }
}

fn run(c: &Common) -> Result<()> {
    let spec = load(&c.config)?;
    threads(c.threads)?;
    let model = Model::build(&spec)?;
    let t = Instant::now();
    let outcome = model.solve(&spec.bc)?;
    let solve = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let boundary = if spec.boundary_oracle { model.boundary_stress(&outcome)? } else { None };
    let coefficients = match spec.coefficients {
        Some(cs) => Some(model.coefficients(cs.axis, spec.angle, cs.actuator, cs.sensor)?),
        None => None,
    };
    let fields = match &spec.field_resolution {
        Some(res) => Some(sample_fields(&model.disc, &model.material, &model.domain, &outcome.solution.x, res)?),
        None => None,
    };
    let post = t.elapsed().as_secs_f64();

    let report = Report::new(&model, &outcome, boundary, coefficients.as_ref(), ReportTimings { build: model.timings, solve, post });
    prepare_out(&c.out)?;
    output::write_report(&c.out.join("report.json"), &report)?;
    let coef = report.coefficients.unwrap_or_default();
    output::write_macro_csv(&c.out.join("macro.csv"), spec.dim, &[(spec.angle.to_degrees(), outcome.state, coef)])?;
    if let Some(f) = &fields {
        output::write_vtk(&c.out.join("fields.vtk"), f, &spec.name)?;
    }

    let m = &report.macro_state;
    println!("{}: {} dofs, residual {:.2e}, energy identity {:.2e}", spec.name, report.dofs.total, report.solver.residual, report.checks.energy_identity_relative);
    println!("  E [V/m]      {:?}", m.efield);
    println!("  strain       {:?}", m.strain);
    println!("  stress [GPa] {:?}", m.stress);
    if let Some(r) = report.checks.boundary_stress_relative {
        println!("  boundary-traction stress, relative difference {r:.3e}");
    }
    if let Some(c) = report.coefficients {
        if let (Some(h), Some(b)) = (c.d_hat, c.d_bar) {
            println!("  d_hat {h:.4} pm/V, d_bar {b:.4} pm/V");
        }
        if let Some(h) = c.h_bar {
            println!("  h_bar {h:.4e} V/m");
        }
    }
    println!("  wrote {}", c.out.display());
    Ok(())
}

fn parse_angles(s: &str) -> std::result::Result<Vec<f64>, ConfigError> {
    let bad = || ConfigError::field("--angles", format!("expected start:step:stop in degrees, got '{s}'"));
    let parts: Vec<f64> = s.split(':').map(|p| p.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
    let [a, step, b] = parts[..] else { return Err(bad()) };
    if !(step > 0.0) || !(b > a) {
        return Err(bad());
    }
    let n = ((b - a) / step - 1e-9).ceil() as usize;
    Ok((0..n).map(|k| a + k as f64 * step).collect())
}

fn sweep(c: &Common, angles: &str, mode: ModeArg) -> Result<()> {
    let spec = load(&c.config)?;
    let degrees = parse_angles(angles)?;
    threads(c.threads)?;
    let axis = spec.coefficients.map_or(axis_index("y", spec.dim).unwrap(), |cs| cs.axis);
    let model = Model::build(&spec)?;
    let mode = match mode {
        ModeArg::Actuator => Mode::Actuator,
        ModeArg::Sensor => Mode::Sensor,
    };
    let radians: Vec<f64> = degrees.iter().map(|d| d.to_radians()).collect();
    let rows = model.sweep(&radians, axis, mode)?;
    let table = output::sweep_rows(&model, &rows);
    prepare_out(&c.out)?;
    output::write_macro_csv(&c.out.join("macro.csv"), spec.dim, &table)?;
    for (angle, _, r) in &table {
        match mode {
            Mode::Actuator => println!("{angle:8.2}  d_hat {:>12.5e}  d_bar {:>12.5e}  normalized {:>12.5e}", r.d_hat.unwrap_or(f64::NAN), r.d_bar.unwrap_or(f64::NAN), r.d_bar_normalized.unwrap_or(f64::NAN)),
            Mode::Sensor => println!("{angle:8.2}  h_bar {:>12.5e}  normalized {:>12.5e}", r.h_bar.unwrap_or(f64::NAN), r.h_bar_normalized.unwrap_or(f64::NAN)),
        }
    }
    println!("wrote {}", c.out.join("macro.csv").display());
    Ok(())
}

fn convergence(c: &Common, levels: usize) -> Result<()> {
    let base = load(&c.config)?;
    threads(c.threads)?;
    if levels == 0 {
        return Err(ConfigError::field("--levels", "must be at least 1").into());
    }
    let mut text = String::from("level,cells,stress_relative_difference,energy_identity_relative\n");
    for level in 0..levels {
        let mut spec = base.clone();
        spec.cells = base.cells.iter().map(|n| n << level).collect();
        let model = Model::build(&spec)?;
        let outcome = model.solve(&spec.bc)?;
        let rel = model
            .boundary_stress(&outcome)?
            .map(|b| output::stress_distance(&b, &outcome.state.stress, spec.dim))
            .ok_or_else(|| AppError::Core(flexohom_core::Error::OracleUnavailable("the fictitious planes miss the material".into())))?;
        let cells = spec.cells.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("x");
        println!("{level}  {cells:>10}  stress difference {rel:.3e}  energy identity {:.2e}", outcome.energy.relative_error());
        text.push_str(&format!("{level},{cells},{rel:e},{:e}\n", outcome.energy.relative_error()));
    }
    prepare_out(&c.out)?;
    let path = c.out.join("convergence.csv");
    std::fs::write(&path, text).map_err(|e| AppError::io(&path, e))?;
    println!("wrote {}", path.display());
    Ok(())
}
