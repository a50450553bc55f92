use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rom8t::dynamics::CaseCode;
use rom8t::protocol::Mode;
use rom8t_cli::commands::{self, Context, Figure, SimulateArgs, SweepParam};
use rom8t_cli::config::{RunConfig, CONFIG_ENV};
use rom8t_cli::units::{Time, Voltage};
use rom8t_cli::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "rom8t",
    version,
    about = "ROM-augmented 8T SRAM bit-cell simulator"
)]
struct Cli {
    /// Run configuration (TOML). Built-in defaults when absent.
    #[arg(long, short, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,

    /// Override one config leaf, e.g. `--set sim.vdd="0.9 V"`.
    #[arg(long = "set", global = true, value_name = "PATH=VALUE")]
    set: Vec<String>,

    /// Directory for output files; overrides `output_dir`.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Worker threads for Monte-Carlo batches.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Single nominal read event, written as a bit-line trace.
    Simulate {
        #[arg(long, value_parser = parse_case)]
        case: CaseCode,
        #[arg(long, default_value = "ram-only-reliability", value_parser = parse_mode)]
        mode: Mode,
        /// Plan of the mode whose SL level is used.
        #[arg(long, default_value = "phase1")]
        phase: String,
        /// SL level, e.g. "-0.10 V"; overrides the mode's plan.
        #[arg(long, allow_hyphen_values = true, value_parser = parse_voltage)]
        vsl: Option<f64>,
        /// RWL pulse width; the whole event when absent.
        #[arg(long, value_parser = parse_time)]
        rwl_pulse: Option<f64>,
        /// Event length; the calibration window when absent.
        #[arg(long, value_parser = parse_time)]
        duration: Option<f64>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Monte-Carlo yield of one mode.
    Mc {
        #[arg(long, value_parser = parse_mode)]
        mode: Mode,
    },
    /// Sense-reference and strobe calibration.
    Calibrate {
        /// Only this mode; all modes and the reference cell when absent.
        #[arg(long, value_parser = parse_mode)]
        mode: Option<Mode>,
    },
    /// Normalized delay, energy and leakage of every mode.
    Table1 {
        /// Normalize the reference cell against itself.
        #[arg(long)]
        baseline_only: bool,
    },
    /// Calibration and yield over a range of one parameter.
    Sweep {
        #[arg(long)]
        param: SweepParam,
        #[arg(long, value_parser = parse_mode)]
        mode: Mode,
        /// start:stop:count in SI base units, e.g. -0.05:-0.5:10.
        #[arg(long, allow_hyphen_values = true, value_parser = commands::parse_range)]
        range: std::vec::Vec<f64>,
        /// Plan whose SL level or reference is swept.
        #[arg(long, default_value = "phase1")]
        plan: String,
    },
    /// Data files behind the discharge and Monte-Carlo plots.
    Figures {
        /// Only these figures; all when absent.
        #[arg(long = "only")]
        only: Vec<Figure>,
    },
    /// Reads every row of the configured array.
    Array {
        #[arg(long, value_parser = parse_mode)]
        mode: Mode,
    },
}

fn parse_case(s: &str) -> Result<CaseCode, String> {
    s.parse().map_err(|e: rom8t::Error| e.to_string())
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: rom8t::Error| e.to_string())
}

fn parse_voltage(s: &str) -> Result<f64, String> {
    Voltage::parse(s).map(|v| v.0)
}

fn parse_time(s: &str) -> Result<f64, String> {
    Time::parse(s).map(|t| t.0)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let cfg = RunConfig::load(cli.config.as_deref(), &cli.set)?;
    let ctx = Context::new(cfg, cli.out_dir)?;
    match cli.command {
        Command::Simulate {
            case,
            mode,
            phase,
            vsl,
            rwl_pulse,
            duration,
            output,
        } => {
            let args = SimulateArgs {
                case,
                mode,
                phase,
                vsl,
                rwl_pulse,
                duration,
                output,
            };
            println!("{}", commands::simulate(&ctx, &args)?.display());
        }
        Command::Mc { mode } => {
            commands::mc(&ctx, mode)?;
        }
        Command::Calibrate { mode } => {
            println!("{}", commands::calibrate_cmd(&ctx, mode)?.display());
        }
        Command::Table1 { baseline_only } => {
            commands::table1(&ctx, baseline_only)?;
        }
        Command::Sweep {
            param,
            mode,
            range,
            plan,
        } => {
            println!(
                "{}",
                commands::sweep(&ctx, param, mode, &plan, &range)?.display()
            );
        }
        Command::Figures { only } => {
            let which = if only.is_empty() {
                Figure::ALL.to_vec()
            } else {
                only
            };
            commands::figures(&ctx, &which)?;
        }
        Command::Array { mode } => {
            println!("{}", commands::array(&ctx, mode)?.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
