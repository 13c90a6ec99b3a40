use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ctstl_cli::gradcheck::{self, GradCheckOptions};
use ctstl_cli::monitor::{self, MonitorOptions};
use ctstl_cli::output::to_json;
use ctstl_cli::solve::{self, Overrides};
use ctstl_cli::CliError;

/// Trajectory optimization under dense-time temporal logic specifications.
///
/// Logging is controlled by CTSTL_LOG (off, info or debug).
#[derive(Parser)]
#[command(name = "ctstl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem file and write trajectory, reports and plots.
    Solve {
        problem: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        wdyn: Option<f64>,
        #[arg(long)]
        wstl: Option<f64>,
        /// Shift parameter of the smooth aggregators.
        #[arg(long)]
        c: Option<f64>,
    },
    /// Evaluate a formula on a CSV signal with smooth and min/max semantics.
    Monitor {
        signal: PathBuf,
        /// Formula text. Defaults to the formula of --problem.
        #[arg(long)]
        formula: Option<String>,
        /// Problem file supplying constants, named predicates and gmsr settings.
        #[arg(long)]
        problem: Option<PathBuf>,
        /// Named constant, as NAME=VALUE. Repeatable.
        #[arg(long = "const", value_parser = parse_constant)]
        constants: Vec<(String, f64)>,
        #[arg(long)]
        c: Option<f64>,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, hide = true)]
        flip_smooth_sign: bool,
    },
    /// Check analytic derivatives against finite differences.
    CheckGrad {
        problem: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of random decision vectors.
        #[arg(long, default_value_t = 3)]
        points: usize,
        /// Check at the initial guess with zero controls.
        #[arg(long)]
        zero_control: bool,
        #[arg(long, hide = true)]
        corrupt_jacobian: bool,
    },
}

fn parse_constant(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or("expected NAME=VALUE")?;
    let v: f64 = v.trim().parse().map_err(|_| format!("`{v}` is not a number"))?;
    Ok((k.trim().to_string(), v))
}

fn init_logging() {
    let level = match std::env::var("CTSTL_LOG").as_deref() {
        Ok("info") => log::LevelFilter::Info,
        Ok("debug") => log::LevelFilter::Debug,
        _ => log::LevelFilter::Off,
    };
    env_logger::Builder::new().filter_level(level).init();
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve {
            problem,
            out,
            max_iters,
            wdyn,
            wstl,
            c,
        } => {
            let overrides = Overrides {
                max_iters,
                w_dyn: wdyn,
                w_stl: wstl,
                c,
            };
            let summary = solve::run(&problem, &out, &overrides)?;
            println!("{}", solve::describe(&summary));
        }
        Command::Monitor {
            signal,
            formula,
            problem,
            constants,
            c,
            out,
            flip_smooth_sign,
        } => {
            let opts = MonitorOptions {
                signal,
                formula,
                problem,
                constants,
                c,
                out: out.clone(),
                flip_smooth_sign,
            };
            let report = monitor::run(&opts)?;
            if out.is_none() {
                print!("{}", to_json(&report).map_err(|e| CliError::Failed(e.to_string()))?);
            } else {
                println!(
                    "verdict {}: smooth {:e}, classical {:e}",
                    report.verdict, report.gamma, report.classical
                );
            }
        }
        Command::CheckGrad {
            problem,
            seed,
            points,
            zero_control,
            corrupt_jacobian,
        } => {
            let opts = GradCheckOptions {
                seed,
                points,
                zero_control,
                corrupt_jacobian,
            };
            let report = gradcheck::run(&problem, &opts)?;
            println!(
                "pass: max relative error {:.3e} over {} points (aggregators {:.3e}, robustness {}, flow maps {:.3e})",
                report.worst(),
                report.points,
                report.aggregators,
                report.robustness.map_or("n/a".into(), |r| format!("{r:.3e}")),
                report.flow_map
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
