use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use graphwave::simulate::FieldSpec;
use graphwave::spectral::ResolventMethod;
use graphwave_cli::commands::simulate::parse_field;
use graphwave_cli::{
    cmd_report, cmd_resolvent, cmd_simulate, cmd_spectrum, cmd_validate, configure_threads,
    Outcome, ReportOptions, ResolventOptions, SimulateOptions, SpectrumOptions, ValidateOptions,
    DEFAULT_CELLS, EXIT_ERROR,
};

/// Wave equations with local Kelvin-Voigt damping on metric trees and graphs.
///
/// The environment variable GRAPHWAVE_THREADS caps the number of worker threads.
#[derive(Parser)]
#[command(name = "graphwave", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// network description (JSON)
    spec: PathBuf,
    /// cells per edge (edges with `cells` in the file keep their own count)
    #[arg(long, default_value_t = DEFAULT_CELLS)]
    cells: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Check the structure, the node condition and continuity; predict the decay regime
    Validate {
        spec: PathBuf,
        /// print the machine-readable report instead of text
        #[arg(long)]
        json: bool,
    },
    /// Integrate in time; write the energy trace and decay fits
    Simulate {
        #[command(flatten)]
        common: Common,
        /// time step (default: half the smallest cell width)
        #[arg(long)]
        dt: Option<f64>,
        /// final time
        #[arg(long = "T", default_value_t = 200.0)]
        t_end: f64,
        /// initial displacement: `zero`, `low-modes`, inline JSON or a JSON file
        #[arg(long, default_value = "low-modes")]
        u0: String,
        /// initial velocity, same forms as --u0
        #[arg(long, default_value = "zero")]
        v0: String,
        /// record every n-th step
        #[arg(long, default_value_t = 1)]
        sample_every: usize,
        /// exponential fit window `a,b`
        #[arg(long, value_parser = parse_window, default_value = "5,50")]
        exp_window: [f64; 2],
        /// power-law fit window `a,b`
        #[arg(long, value_parser = parse_window, default_value = "20,200")]
        power_window: [f64; 2],
        /// output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// All eigenvalues of the discrete generator
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Resolvent norms on a log grid along the imaginary axis
    Resolvent {
        #[command(flatten)]
        common: Common,
        /// lower end of the band (default: a decade below the upper end)
        #[arg(long)]
        beta_min: Option<f64>,
        /// upper end of the band (default: the resolved-band limit)
        #[arg(long)]
        beta_max: Option<f64>,
        #[arg(long, default_value_t = graphwave::spectral::DEFAULT_SCAN_POINTS)]
        points: usize,
        /// auto, dense or iterative
        #[arg(long, value_parser = parse_method, default_value = "auto")]
        method: ResolventMethod,
        /// output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Predicted regime against measured decay and resolvent growth
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = graphwave::spectral::DEFAULT_SCAN_POINTS)]
        points: usize,
        /// time step (default: half the smallest cell width)
        #[arg(long)]
        dt: Option<f64>,
        /// final time
        #[arg(long = "T", default_value_t = 200.0)]
        t_end: f64,
        /// auto, dense or iterative
        #[arg(long, value_parser = parse_method, default_value = "auto")]
        method: ResolventMethod,
        /// output directory
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn parse_window(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [a, b] = parts.as_slice() else {
        return Err(format!("expected `a,b`, got `{s}`"));
    };
    let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    Ok([a, b])
}

fn parse_method(s: &str) -> Result<ResolventMethod, String> {
    match s {
        "auto" => Ok(ResolventMethod::Auto),
        "dense" => Ok(ResolventMethod::Dense),
        "iterative" => Ok(ResolventMethod::Iterative),
        _ => Err(format!("unknown method `{s}` (auto, dense, iterative)")),
    }
}

fn field(arg: &str) -> Result<FieldSpec> {
    parse_field(arg)
}

fn dispatch(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Validate { spec, json } => cmd_validate(&ValidateOptions { spec, json }),
        Command::Simulate {
            common,
            dt,
            t_end,
            u0,
            v0,
            sample_every,
            exp_window,
            power_window,
            out,
        } => {
            if sample_every == 0 {
                bail!("--sample-every must be at least 1");
            }
            let mut o = SimulateOptions::new(common.spec, out);
            o.cells = common.cells;
            o.dt = dt;
            o.t_end = t_end;
            o.u0 = field(&u0)?;
            o.v0 = field(&v0)?;
            o.sample_every = sample_every;
            o.exponential_window = exp_window;
            o.power_window = power_window;
            cmd_simulate(&o)
        }
        Command::Spectrum { common, out } => {
            let mut o = SpectrumOptions::new(common.spec, out);
            o.cells = common.cells;
            cmd_spectrum(&o)
        }
        Command::Resolvent {
            common,
            beta_min,
            beta_max,
            points,
            method,
            out,
        } => {
            let mut o = ResolventOptions::new(common.spec, out);
            o.cells = common.cells;
            o.beta_min = beta_min;
            o.beta_max = beta_max;
            o.points = points;
            o.method = method;
            cmd_resolvent(&o)
        }
        Command::Report {
            common,
            points,
            dt,
            t_end,
            method,
            out_dir,
        } => {
            let mut o = ReportOptions::new(common.spec, out_dir);
            o.cells = common.cells;
            o.points = points;
            o.dt = dt;
            o.t_end = t_end;
            o.method = method;
            cmd_report(&o)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let result = configure_threads().and_then(|_| dispatch(cli));
    match result {
        Ok(outcome) => {
            print!("{}", outcome.stdout);
            ExitCode::from(outcome.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
