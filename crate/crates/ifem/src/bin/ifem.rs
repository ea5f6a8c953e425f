//! Command-line experiment runner for the adaptive immersed finite element
//! solver. Exit codes: 0 success, 2 configuration error, 3 solver failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ifem::error::Error;
use ifem::interface_geometry::classify;
use ifem::report::{
    self, dump_with_cuts, export_convergence_svg, export_mesh_svg, history_curves, preset,
    RunConfig, RunMode,
};

#[derive(Parser)]
#[command(name = "ifem", about = "Adaptive immersed finite element benchmark runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one run (adaptive or uniform) and write its artifacts.
    Run(ConfigArgs),
    /// Run the adaptive and uniform drivers on the same problem and write a
    /// combined convergence plot.
    Convergence(ConfigArgs),
    /// Classify the initial mesh and export its SVG and text dump.
    ExportMesh(ConfigArgs),
}

/// Configuration sources, lowest to highest precedence: preset, config file,
/// individual flags.
#[derive(Args)]
struct ConfigArgs {
    /// Named benchmark preset (ex61 .. ex66).
    #[arg(long)]
    preset: Option<String>,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Problem name: `ellipse` or `petal`.
    #[arg(long)]
    problem: Option<String>,
    /// Coefficient contrast `alpha_plus / alpha_minus`.
    #[arg(long)]
    rho: Option<f64>,
    /// Regularity exponent of the ellipse solution.
    #[arg(long)]
    p: Option<f64>,
    /// Refinement mode: `adaptive` or `uniform`.
    #[arg(long)]
    mode: Option<String>,
    /// Marking threshold in [0, 1].
    #[arg(long)]
    theta: Option<f64>,
    /// Symmetrization sign: -1, 0, or 1.
    #[arg(long, allow_hyphen_values = true)]
    epsilon: Option<i8>,
    /// Edge penalty strength.
    #[arg(long)]
    gamma: Option<f64>,
    /// Marking indicator: `eta`, `xi`, or `true_error`.
    #[arg(long)]
    estimator: Option<String>,
    /// Initial n x n grid subdivision.
    #[arg(long)]
    initial_n: Option<usize>,
    /// Stop once the free-DOF count reaches this budget.
    #[arg(long)]
    max_dof: Option<usize>,
    /// Hard cap on the number of levels.
    #[arg(long)]
    max_levels: Option<usize>,
    /// Relative residual tolerance of the linear solver.
    #[arg(long)]
    solver_tol: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a plain-text dump of the final mesh.
    #[arg(long)]
    dump_mesh: bool,
    /// Skip SVG plot generation.
    #[arg(long)]
    no_plots: bool,
}

impl ConfigArgs {
    fn build(&self) -> Result<RunConfig<f64>, Error> {
        let mut cfg = match &self.preset {
            Some(name) => preset::<f64>(name)
                .ok_or_else(|| Error::Config(format!("unknown preset `{name}`")))?,
            None => RunConfig::default(),
        };
        if let Some(path) = &self.config {
            cfg.load_file(path)?;
        }
        let overrides: [(&str, Option<String>); 12] = [
            ("problem", self.problem.clone()),
            ("rho", self.rho.map(|v| v.to_string())),
            ("p", self.p.map(|v| v.to_string())),
            ("mode", self.mode.clone()),
            ("theta", self.theta.map(|v| v.to_string())),
            ("epsilon", self.epsilon.map(|v| v.to_string())),
            ("gamma", self.gamma.map(|v| v.to_string())),
            ("estimator", self.estimator.clone()),
            ("initial_n", self.initial_n.map(|v| v.to_string())),
            ("max_dof", self.max_dof.map(|v| v.to_string())),
            ("max_levels", self.max_levels.map(|v| v.to_string())),
            ("solver_tol", self.solver_tol.map(|v| v.to_string())),
        ];
        for (key, value) in overrides {
            if let Some(value) = value {
                cfg.apply(key, &value)?;
            }
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if self.dump_mesh {
            cfg.dump_mesh = true;
        }
        if self.no_plots {
            cfg.plots = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn cmd_run(args: &ConfigArgs) -> Result<(), Error> {
    let cfg = args.build()?;
    let artifacts = report::run(&cfg)?;
    print!("{}", artifacts.summary);
    println!("artifacts written to {}", cfg.out_dir.display());
    Ok(())
}

fn cmd_convergence(args: &ConfigArgs) -> Result<(), Error> {
    let base = args.build()?;
    let mut adaptive = base.clone();
    adaptive.mode = RunMode::Adaptive;
    adaptive.out_dir = base.out_dir.join("adaptive");
    let mut uniform = base.clone();
    uniform.mode = RunMode::Uniform;
    uniform.out_dir = base.out_dir.join("uniform");

    let ra = report::run(&adaptive)?;
    let ru = report::run(&uniform)?;

    let mut curves = history_curves(&ra.history, "adaptive ");
    curves.extend(history_curves(&ru.history, "uniform "));
    std::fs::create_dir_all(&base.out_dir)?;
    export_convergence_svg(&curves, &base.out_dir.join("convergence.svg"))?;

    println!("adaptive:");
    print!("{}", ra.summary);
    println!("uniform:");
    print!("{}", ru.summary);
    println!("artifacts written to {}", base.out_dir.display());
    Ok(())
}

fn cmd_export_mesh(args: &ConfigArgs) -> Result<(), Error> {
    let cfg = args.build()?;
    let problem = cfg.build_problem()?;
    let mesh = cfg.initial_mesh(&problem)?;
    let class = classify(&mesh, &*problem.level_set)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    export_mesh_svg(&mesh, &class, &cfg.out_dir.join("mesh.svg"))?;
    std::fs::write(cfg.out_dir.join("mesh.txt"), dump_with_cuts(&mesh, &class))?;
    println!(
        "mesh: {} vertices, {} triangles, {} interface elements",
        mesh.vertices.len(),
        mesh.triangles.len(),
        class.n_interface_elements()
    );
    Ok(())
}

/// Maps configuration problems to exit code 2 and runtime failures to 3.
fn exit_code(e: &Error) -> u8 {
    let mut inner = e;
    while let Error::AtLevel { source, .. } = inner {
        inner = source;
    }
    match inner {
        Error::Config(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Convergence(args) => cmd_convergence(args),
        Command::ExportMesh(args) => cmd_export_mesh(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
