use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use simcurv::geometry::Route;
use simcurv::grid::GridSpec;
use simcurv::systems::SlowFastSystem;
use simcurv_cli::{
    cmd_criteria_sweep, cmd_curvature_grid, cmd_integral, cmd_list_models, cmd_validate_necessary, finish,
    parse_params, with_jobs, CliError, CliResult, CriteriaRun, CriteriaSettings, GridRun, Status,
};

const TOLERANCE_NOTE: &str = "\
Tolerances: a curvature field is judged with --tol-closed (default 1e-7) when p has a \
closed form for the chosen model and lift, and with --tol-numeric (default 1e-4) when p \
comes from shooting solves and finite differences.

Exit codes: 0 success, 1 validation failed, 2 numerical failure, 3 bad input.";

#[derive(Parser, Debug)]
#[command(name = "simcurv", version, about = "Time-sectional curvature of slow-fast graph manifolds", after_help = TOLERANCE_NOTE)]
struct Cli {
    /// Worker threads (0 = all cores); SIMCURV_JOBS takes precedence.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List registered models with their default parameters.
    ListModels,
    /// Write the curvature field over a grid.
    CurvatureGrid(GridArgs),
    /// Check that all time-sectional curvatures vanish on a grid.
    ValidateNecessary(GridArgs),
    /// Curvature integrals of asymptotic truncations a_k.
    Integral {
        #[command(flatten)]
        grid: GridArgs,
        /// Comma-separated truncation orders.
        #[arg(long, default_value = "0,1,2,3,4,5")]
        orders: String,
    },
    /// Sweep the selection criteria over the Davis-Skodje family.
    CriteriaSweep(CriteriaArgs),
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Model name (see list-models).
    #[arg(long)]
    model: String,
    /// Model parameters as a JSON object, e.g. '{"gamma": 3.5}'.
    #[arg(long)]
    params: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

impl ModelArgs {
    fn system(&self) -> CliResult<SlowFastSystem> {
        Ok(SlowFastSystem::from_name(&self.model, &parse_params(self.params.as_deref())?)?)
    }
}

#[derive(Args, Debug)]
struct GridArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Initial-value function: h_eps, h0, asym:K, family:c=..., const:v, poly:c0,c1,...
    #[arg(long, default_value = "h_eps")]
    a: String,
    /// Grid, e.g. "t=0:2:10,x1=0:3:20".
    #[arg(long)]
    grid: String,
    /// Curvature route: gauss, christoffel or closed11.
    #[arg(long, default_value = "gauss")]
    route: String,
    #[arg(long, default_value_t = 1e-7)]
    tol_closed: f64,
    #[arg(long, default_value_t = 1e-4)]
    tol_numeric: f64,
}

impl GridArgs {
    fn run(&self) -> CliResult<GridRun> {
        for (name, v) in [("--tol-closed", self.tol_closed), ("--tol-numeric", self.tol_numeric)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Input(format!("{name} must be positive")));
            }
        }
        Ok(GridRun {
            system: self.model.system()?,
            lift: self.a.parse()?,
            grid: self.grid.parse::<GridSpec>()?,
            route: self.route.parse::<Route>()?,
            tol_closed: self.tol_closed,
            tol_numeric: self.tol_numeric,
            out: self.model.out.clone(),
        })
    }
}

#[derive(Args, Debug)]
struct CriteriaArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Evaluation point u.
    #[arg(long, default_value_t = 2.0)]
    u: f64,
    /// Kinetic weight of F3.
    #[arg(long, default_value_t = 1.0)]
    k1: f64,
    /// Potential weight of F3 (default gamma/(u+1)).
    #[arg(long)]
    k2: Option<f64>,
    /// Range of c as start:end.
    #[arg(long, default_value = "-0.05:0.05", allow_hyphen_values = true)]
    c_range: String,
    #[arg(long, default_value_t = 201)]
    samples: usize,
}

impl CriteriaArgs {
    fn run(&self) -> CliResult<CriteriaRun> {
        let system = self.model.system()?;
        let (a, b) = self
            .c_range
            .split_once(':')
            .ok_or_else(|| CliError::Input("--c-range must read start:end".into()))?;
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Input(format!("bad number `{s}` in --c-range")))
        };
        let k2 = match self.k2 {
            Some(k) => k,
            None => {
                let g = system
                    .param("gamma")
                    .ok_or_else(|| CliError::Input(format!("{} has no gamma; pass --k2", system.name())))?;
                g / (self.u + 1.0)
            }
        };
        Ok(CriteriaRun {
            system,
            settings: CriteriaSettings {
                u: self.u,
                k1: self.k1,
                k2,
                c_range: [num(a)?, num(b)?],
                samples: self.samples,
            },
            out: self.model.out.clone(),
        })
    }
}

fn parse_orders(s: &str) -> CliResult<Vec<usize>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| CliError::Input(format!("bad order `{v}` in --orders")))
        })
        .collect()
}

fn jobs(flag: usize) -> CliResult<usize> {
    match std::env::var("SIMCURV_JOBS") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Input(format!("SIMCURV_JOBS must be a count, got `{v}`"))),
        Err(_) => Ok(flag),
    }
}

fn dispatch(cli: Cli) -> CliResult<Status> {
    let jobs = jobs(cli.jobs)?;
    let command = cli.command;
    with_jobs(jobs, move || match command {
        Command::ListModels => cmd_list_models(),
        Command::CurvatureGrid(g) => cmd_curvature_grid(&g.run()?),
        Command::ValidateNecessary(g) => cmd_validate_necessary(&g.run()?),
        Command::Integral { grid, orders } => cmd_integral(&grid.run()?, &parse_orders(&orders)?),
        Command::CriteriaSweep(c) => cmd_criteria_sweep(&c.run()?),
    })?
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                Status::BadInput.into()
            } else {
                Status::Success.into()
            };
        }
    };
    finish(dispatch(cli)).into()
}
