//! Command-line front end: parse specs and run configurations, drive the
//! analysis pipelines, and emit CSV/JSON/PPM artifacts with deterministic
//! formatting.
//!
//! Exit codes: 0 all checks passed; 2 invalid configuration or map spec;
//! 3 compute or I/O failure; 4 checks failed.

mod config;
mod pipeline;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use infharm::{FlowSpec, FlowVariant, DEFAULT_EPS_STOP, DEFAULT_FLOW_DT};

use config::{build_grid, load_map, parse_direction, parse_domain, parse_point, CliError};
use pipeline::{ExportPaths, FieldParams, FlowTolerances, Outcome, VerifyParams};

/// Environment variable overriding the worker thread count.
const THREADS_ENV: &str = "INFHARM_THREADS";

#[derive(Parser)]
#[command(
    name = "infharm",
    version,
    about = "Numerical laboratory for infinity-harmonic mappings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GridArgs {
    /// Map specification (JSON file)
    #[arg(long, value_name = "FILE")]
    map: PathBuf,
    /// Domain box as comma-separated per-axis bounds: x0,x1,y0,y1
    #[arg(long, default_value = "-3.2,3.2,-3.2,3.2", allow_hyphen_values = true)]
    domain: String,
    /// Node counts per axis: NXxNY
    #[arg(long, default_value = "256x256")]
    grid: String,
    /// Absolute singular-value threshold for rank decisions
    #[arg(long, default_value_t = infharm::DEFAULT_TAU_ABS)]
    tau_abs: f64,
    /// Relative singular-value threshold for rank decisions
    #[arg(long, default_value_t = infharm::DEFAULT_TAU_REL)]
    tau_rel: f64,
    /// Margin floor below which rank decisions count as interface
    #[arg(long, default_value_t = infharm::DEFAULT_MARGIN_FLOOR)]
    margin_floor: f64,
}

impl GridArgs {
    fn field_params(&self) -> FieldParams {
        FieldParams {
            tau_abs: self.tau_abs,
            tau_rel: self.tau_rel,
            margin_floor: self.margin_floor,
        }
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Write a CSV artifact here
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
    /// Write a JSON report here
    #[arg(long, value_name = "FILE")]
    json: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the residual field on a grid; exit 0 iff its sup is within
    /// tolerance
    Residual {
        #[command(flatten)]
        grid: GridArgs,
        /// Pass/fail tolerance on the sup of the full residual
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Partition the grid into constant-rank phases with interfaces
    Classify {
        #[command(flatten)]
        grid: GridArgs,
        /// Write a plain-text P3 pixmap of the phases here
        #[arg(long, value_name = "FILE")]
        ppm: Option<PathBuf>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Integrate one gradient-flow trajectory and its diagnostics
    Flow {
        #[command(flatten)]
        grid: GridArgs,
        /// Flow variant
        #[arg(long, value_enum, default_value_t = VariantArg::Plain)]
        variant: VariantArg,
        /// Start point: x,y
        #[arg(long, allow_hyphen_values = true)]
        start: String,
        /// Target-space direction (normalized on input): a,b
        #[arg(long, allow_hyphen_values = true)]
        xi: String,
        #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
        t_min: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        t_max: f64,
        #[arg(long, default_value_t = DEFAULT_FLOW_DT)]
        dt: f64,
        #[arg(long, default_value_t = DEFAULT_EPS_STOP)]
        eps_stop: f64,
        /// Conservation tolerance on the |Du|^2 drift
        #[arg(long, default_value_t = pipeline::FLOW_DRIFT_TOL)]
        drift_tol: f64,
        /// Affinity tolerance on the slope second difference (modified flow)
        #[arg(long, default_value_t = pipeline::FLOW_AFFINITY_TOL)]
        affinity_tol: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Run the full verification battery; exit 0 iff every check passes
    Verify {
        #[command(flatten)]
        grid: GridArgs,
        /// Tolerance on the residual sup
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Number of seeded random flow starts (0 disables the flow battery)
        #[arg(long, default_value_t = 0)]
        flows: usize,
        /// Seed for the flow battery
        #[arg(long, default_value_t = 7)]
        flow_seed: u64,
        /// Write a plain-text P3 pixmap of the phases here
        #[arg(long, value_name = "FILE")]
        ppm: Option<PathBuf>,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum VariantArg {
    Plain,
    Modified,
}

fn init_threads() {
    if let Ok(text) = std::env::var(THREADS_ENV) {
        if let Ok(n) = text.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
        }
    }
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Residual { grid, tol, out } => {
            let (spec, map) = load_map(&grid.map)?;
            let g = build_grid(&grid.domain, &grid.grid)?;
            let params = grid.field_params();
            pipeline::run_residual(
                &spec,
                &map,
                &g,
                &params,
                tol,
                &ExportPaths {
                    csv: out.csv,
                    json: out.json,
                    ppm: None,
                },
            )
        }
        Command::Classify { grid, ppm, out } => {
            let (spec, map) = load_map(&grid.map)?;
            let g = build_grid(&grid.domain, &grid.grid)?;
            let params = grid.field_params();
            pipeline::run_classify(
                &spec,
                &map,
                &g,
                &params,
                &ExportPaths {
                    csv: out.csv,
                    json: out.json,
                    ppm,
                },
            )
        }
        Command::Flow {
            grid,
            variant,
            start,
            xi,
            t_min,
            t_max,
            dt,
            eps_stop,
            drift_tol,
            affinity_tol,
            out,
        } => {
            let (spec, map) = load_map(&grid.map)?;
            let domain = parse_domain(&grid.domain)?;
            let flow = FlowSpec {
                variant: match variant {
                    VariantArg::Plain => FlowVariant::Plain,
                    VariantArg::Modified => FlowVariant::Modified,
                },
                start: parse_point(&start)?,
                direction: parse_direction(&xi)?,
                t_min,
                t_max,
                dt,
                eps_stop,
            };
            pipeline::run_flow(
                &spec,
                &map,
                &domain,
                &flow,
                &FlowTolerances {
                    drift: drift_tol,
                    affinity: affinity_tol,
                },
                &ExportPaths {
                    csv: out.csv,
                    json: out.json,
                    ppm: None,
                },
            )
        }
        Command::Verify {
            grid,
            tol,
            flows,
            flow_seed,
            ppm,
            out,
        } => {
            let (spec, map) = load_map(&grid.map)?;
            let g = build_grid(&grid.domain, &grid.grid)?;
            let params = grid.field_params();
            pipeline::run_verify(
                &spec,
                &map,
                &g,
                &params,
                &VerifyParams {
                    residual_tol: tol,
                    flow_starts: flows,
                    flow_seed,
                },
                &ExportPaths {
                    csv: out.csv,
                    json: out.json,
                    ppm,
                },
            )
        }
    }
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            if outcome.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(config::EXIT_CHECKS_FAILED as u8)
            }
        }
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
