//! Command-line front end: `gen`, `simulate`, `verify`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::Vector2;
use serde_json::{json, Value};

use crate::analysis::{
    fit_bend_radius, helix_metrics, rows_to_csv, table_offenders, verify_tables, Table,
};
use crate::designs::{
    flower_design, grass_design, rect_design, seashell_design, Design, Model, SolverOverrides,
    SpiralUnits,
};
use crate::error::Error;
use crate::material::{nominal_speed_for_strain, speed_for_strain, strain_from_speed};
use crate::simulate::{simulate, Simulation};
use crate::solver::SolverConfig;

/// `println!` that ignores a closed stdout (e.g. piped into `head`).
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_NUMERICAL: u8 = 2;
pub const EXIT_ACCEPTANCE: u8 = 3;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "MORPHSIM_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "morphsim",
    version,
    about = "Bilayer self-morphing shell simulator"
)]
pub struct Cli {
    /// Print progress to stderr (repeat for more)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a design file
    Gen {
        #[command(subcommand)]
        design: GenDesign,
    },
    /// Relax a design to equilibrium
    Simulate(SimulateArgs),
    /// Reproduce a bending table (1, 2 or 3)
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Clone)]
pub struct GenCommon {
    /// Output design file
    #[arg(short, long, default_value = "design.json")]
    pub out: PathBuf,
    /// Total thickness (mm)
    #[arg(long = "t", default_value_t = 1.0)]
    pub thickness: f64,
    /// Element pitch (mm)
    #[arg(long, default_value_t = 1.0)]
    pub pitch: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelArg {
    PureBending,
    FiniteStrain,
}

impl From<ModelArg> for Model {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::PureBending => Model::PureBending,
            ModelArg::FiniteStrain => Model::FiniteStrain,
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum GenDesign {
    /// Rectangular strip with uniform mismatch
    Rect {
        #[command(flatten)]
        common: GenCommon,
        #[arg(long = "len", default_value_t = 50.0)]
        length: f64,
        #[arg(long = "wid", default_value_t = 10.0)]
        width: f64,
        /// Strain difference (top shrinks this much more than bottom)
        #[arg(long = "deps", default_value_t = 0.01)]
        delta_eps: f64,
        /// Mismatch direction, degrees from the long axis
        #[arg(long = "dir", default_value_t = 0.0)]
        direction_deg: f64,
        #[arg(long, value_enum, default_value_t = ModelArg::PureBending)]
        model: ModelArg,
    },
    /// Square plate with four petals around a strain-free center
    Flower {
        #[command(flatten)]
        common: GenCommon,
        #[arg(long = "side", default_value_t = 40.0)]
        total_side: f64,
        #[arg(long = "center", default_value_t = 16.0)]
        center_side: f64,
        #[arg(long = "deps", default_value_t = 0.03, conflicts_with = "speed")]
        delta_eps: f64,
        /// Top-layer print speed (mm/min); sets the strain difference
        #[arg(long)]
        speed: Option<f64>,
    },
    /// Strip printed at angle gamma to its long axis
    Grass {
        #[command(flatten)]
        common: GenCommon,
        #[arg(long = "len", default_value_t = 100.0)]
        length: f64,
        #[arg(long = "wid", default_value_t = 5.0)]
        width: f64,
        /// Printing angle in degrees
        #[arg(long, default_value_t = 45.0)]
        gamma: f64,
        #[arg(long = "deps", default_value_t = 0.06, conflicts_with = "speed")]
        delta_eps: f64,
        #[arg(long)]
        speed: Option<f64>,
    },
    /// Band between two Archimedes spirals r = alpha + beta * theta
    Seashell {
        #[command(flatten)]
        common: GenCommon,
        #[arg(long, default_value_t = 20.0)]
        alpha_in: f64,
        #[arg(long, default_value_t = 30.0)]
        alpha_out: f64,
        /// Radius growth per unit of theta (mm per degree by default)
        #[arg(long, default_value_t = 1.0 / 18.0)]
        beta: f64,
        /// Angular extent in degrees
        #[arg(long, default_value_t = 180.0)]
        theta_max: f64,
        #[arg(long = "deps", required_unless_present = "speed")]
        delta_eps: Option<f64>,
        #[arg(long)]
        speed: Option<f64>,
        /// Evaluate beta per radian instead of per degree
        #[arg(long)]
        radians: bool,
    },
}

#[derive(Args, Debug, Clone, Default)]
pub struct SolverArgs {
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub eps1: Option<f64>,
    #[arg(long)]
    pub eps2: Option<f64>,
    #[arg(long = "k-max")]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Out-of-plane perturbation amplitude (mm)
    #[arg(long)]
    pub perturb: Option<f64>,
}

impl SolverArgs {
    fn overrides(&self) -> SolverOverrides {
        SolverOverrides {
            tau: self.tau,
            eps1: self.eps1,
            eps2: self.eps2,
            k_max: self.k_max,
            perturb_amplitude: self.perturb,
            seed: self.seed,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct SimulateArgs {
    /// Design file
    pub design: PathBuf,
    /// Output directory
    #[arg(short, long, default_value = "out")]
    pub out: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub no_obj: bool,
    #[arg(long)]
    pub no_report: bool,
    #[arg(long)]
    pub no_energy: bool,
    /// Write zero wall times so repeated runs produce identical reports
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    /// Table id
    #[arg(value_parser = clap::value_parser!(u8).range(1..=3))]
    pub table: u8,
    /// Output directory for the CSV and JSON reports
    #[arg(short, long, default_value = ".")]
    pub out: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Run(Error),
    Acceptance(Vec<String>),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

fn exit_code(f: &Failure) -> u8 {
    match f {
        Failure::Usage(_) => EXIT_USAGE,
        Failure::Run(e) if e.is_numerical() => EXIT_NUMERICAL,
        Failure::Run(_) => EXIT_USAGE,
        Failure::Acceptance(_) => EXIT_ACCEPTANCE,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    configure_threads();
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            match &f {
                Failure::Usage(m) => eprintln!("error: {m}"),
                Failure::Run(e) => eprintln!("error: {e}"),
                Failure::Acceptance(rows) => {
                    eprintln!("acceptance failed for {} row(s):", rows.len());
                    for r in rows {
                        eprintln!("  {r}");
                    }
                }
            }
            exit_code(&f)
        }
    }
}

pub fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os()))
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        // a pool may already exist when called twice in one process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Gen { design } => cmd_gen(design),
        Command::Simulate(args) => cmd_simulate(args, cli.verbose),
        Command::Verify(args) => cmd_verify(args, cli.verbose),
    }
}

fn resolve_strain(delta_eps: f64, speed: Option<f64>) -> Result<f64, Failure> {
    match speed {
        Some(v) => Ok(strain_from_speed(v)?),
        None => Ok(delta_eps),
    }
}

fn cmd_gen(which: &GenDesign) -> Result<(), Failure> {
    let (design, common, delta_eps) = match which {
        GenDesign::Rect {
            common,
            length,
            width,
            delta_eps,
            direction_deg,
            model,
        } => {
            let a = direction_deg.to_radians();
            let d = rect_design(
                *length,
                *width,
                common.thickness,
                common.pitch,
                *delta_eps,
                Vector2::new(a.cos(), a.sin()),
                (*model).into(),
            )?;
            (d, common, *delta_eps)
        }
        GenDesign::Flower {
            common,
            total_side,
            center_side,
            delta_eps,
            speed,
        } => {
            let de = resolve_strain(*delta_eps, *speed)?;
            let d = flower_design(
                *total_side,
                *center_side,
                common.thickness,
                common.pitch,
                de,
            )?;
            (d, common, de)
        }
        GenDesign::Grass {
            common,
            length,
            width,
            gamma,
            delta_eps,
            speed,
        } => {
            let de = resolve_strain(*delta_eps, *speed)?;
            let d = grass_design(
                *length,
                *width,
                common.thickness,
                common.pitch,
                gamma.to_radians(),
                de,
            )?;
            (d, common, de)
        }
        GenDesign::Seashell {
            common,
            alpha_in,
            alpha_out,
            beta,
            theta_max,
            delta_eps,
            speed,
            radians,
        } => {
            let de = match (delta_eps, speed) {
                (_, Some(v)) => strain_from_speed(*v)?,
                (Some(de), None) => *de,
                (None, None) => return Err(Failure::Usage("--deps or --speed is required".into())),
            };
            let units = if *radians {
                SpiralUnits::Radians
            } else {
                SpiralUnits::Degrees
            };
            let d = seashell_design(
                *alpha_in,
                *alpha_out,
                *beta,
                *theta_max,
                common.thickness,
                common.pitch,
                de,
                units,
            )?;
            (d, common, de)
        }
    };
    design.save(&common.out)?;
    out!("design: {}", design.name);
    out!("faces: {}", design.mesh.num_faces());
    out!("vertices: {}", design.mesh.num_vertices());
    out!("delta_eps: {delta_eps}");
    out!(
        "top_speed_mm_min: {:.1}",
        nominal_speed_for_strain(delta_eps)
    );
    out!("top_speed_exact_mm_min: {:.1}", speed_for_strain(delta_eps));
    out!("written: {}", common.out.display());
    Ok(())
}

/// Fits reported for a converged design, keyed by what applies.
pub fn design_fits(design: &Design, sim: &Simulation) -> Value {
    let mut fits = serde_json::Map::new();
    let rest = design.mesh.rest_embedding();
    let max_disp = sim
        .mesh
        .vertices()
        .iter()
        .zip(&rest)
        .map(|(p, q)| (p - q).norm())
        .fold(0.0, f64::max);
    fits.insert("max_displacement_mm".into(), json!(max_disp));
    if matches!(design.name.as_str(), "rect" | "grass") {
        let uniform = design.strain.windows(2).all(|w| w[0] == w[1]);
        match fit_bend_radius(&sim.mesh, Vector2::x()) {
            Ok(mut b) => {
                if uniform && design.strain[0].delta() != 0.0 {
                    let dir = design.strain[0].direction;
                    // the theory radius applies along the strain direction only
                    if dir.y.abs() < 1e-12 {
                        b = b.with_theory(design.strain[0].delta(), design.thickness());
                    }
                }
                fits.insert("bend".into(), json!(b));
            }
            Err(e) => {
                fits.insert("bend_error".into(), json!(e.to_string()));
            }
        }
    }
    if design.name == "grass" {
        match helix_metrics(&sim.mesh, Vector2::x()) {
            Ok(h) => fits.insert("helix".into(), json!(h)),
            Err(e) => fits.insert("helix_error".into(), json!(e.to_string())),
        };
    }
    Value::Object(fits)
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Run(e.into()))
}

fn cmd_simulate(args: &SimulateArgs, verbose: u8) -> Result<(), Failure> {
    let mut design = Design::load(&args.design)?;
    design.solver = args.solver.overrides().or(design.solver);
    let base = SolverConfig::default();
    design
        .solver_config(&base)
        .validate()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    fs::create_dir_all(&args.out).map_err(|e| Failure::Run(e.into()))?;
    let mut sim = simulate(&design, &base)?;
    if args.no_timing {
        sim.report.wall_time_s = 0.0;
    }
    if verbose > 0 {
        eprintln!(
            "{}: {} iterations, termination {:?}, energy {:e} -> {:e}, |g| {:e}",
            design.name,
            sim.report.iterations,
            sim.report.termination,
            sim.report.initial_energy(),
            sim.report.final_energy(),
            sim.report.grad_inf_norm
        );
    }
    if !args.no_obj {
        crate::quadmesh::save_obj(&sim.mesh, &args.out.join("out.obj"))?;
    }
    if !args.no_report {
        let report = json!({
            "design": design.name,
            "seed": sim.config.seed,
            "solver_config": sim.config,
            "solver": sim.report,
            "fits": design_fits(&design, &sim),
        });
        let mut text = serde_json::to_string_pretty(&report).map_err(|e| Failure::Run(e.into()))?;
        text.push('\n');
        write_text(&args.out.join("report.json"), &text)?;
    }
    if !args.no_energy {
        let mut csv = String::from("step,energy\n");
        for (k, e) in sim.report.energy_history.iter().enumerate() {
            csv.push_str(&format!("{k},{e}\n"));
        }
        write_text(&args.out.join("energy.csv"), &csv)?;
    }
    out!("seed: {}", sim.config.seed);
    out!("iterations: {}", sim.report.iterations);
    out!("final_energy: {:e}", sim.report.final_energy());
    Ok(())
}

fn cmd_verify(args: &VerifyArgs, verbose: u8) -> Result<(), Failure> {
    let table = Table::from_id(args.table)
        .ok_or_else(|| Failure::Usage(format!("unknown table {}", args.table)))?;
    let config = args.solver.overrides().apply(&SolverConfig::default());
    config
        .validate()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    fs::create_dir_all(&args.out).map_err(|e| Failure::Run(e.into()))?;
    let rows = verify_tables(table, &config)?;
    let csv = rows_to_csv(&rows);
    print!("{csv}");
    let stem = format!("table{}", table.id());
    write_text(&args.out.join(format!("{stem}.csv")), &csv)?;
    let json = json!({ "table": table.id(), "seed": config.seed, "rows": rows });
    let mut text = serde_json::to_string_pretty(&json).map_err(|e| Failure::Run(e.into()))?;
    text.push('\n');
    write_text(&args.out.join(format!("{stem}.json")), &text)?;
    if verbose > 0 {
        eprintln!("seed: {}", config.seed);
    }
    let offenders = table_offenders(table, &rows);
    if offenders.is_empty() {
        Ok(())
    } else {
        Err(Failure::Acceptance(offenders))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["morphsim", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["morphsim", "verify", "4"]), EXIT_USAGE);
        assert_eq!(run(["morphsim", "gen", "seashell"]), EXIT_USAGE);
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(run(["morphsim", "--help"]), EXIT_OK);
    }

    #[test]
    fn gen_rect_writes_500_faces() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("d.json");
        let code = run([
            "morphsim",
            "gen",
            "rect",
            "--len",
            "50",
            "--wid",
            "10",
            "--t",
            "1",
            "--pitch",
            "1",
            "--deps",
            "0.01",
            "-o",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_OK);
        assert_eq!(Design::load(&out).unwrap().mesh.num_faces(), 500);
    }

    #[test]
    fn gen_grass_from_speed() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("g.json");
        assert_eq!(
            run([
                "morphsim",
                "gen",
                "grass",
                "--speed",
                "950",
                "-o",
                out.to_str().unwrap()
            ]),
            EXIT_OK
        );
        let d = Design::load(&out).unwrap();
        assert!((d.strain[0].delta() + 0.0603).abs() < 1e-3);
    }

    #[test]
    fn bad_pitch_is_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("d.json");
        let code = run([
            "morphsim",
            "gen",
            "rect",
            "--pitch",
            "3",
            "-o",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_USAGE);
    }
}
