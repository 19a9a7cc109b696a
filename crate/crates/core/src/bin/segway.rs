use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use segway_core::cli::{
    analyze_report, emit, exit, gains_report, metrics_report, run_gains, run_openloop,
    run_simulate, trajectory_csv, CliError, CliResult, Config, GainsRequest,
};

#[derive(Parser)]
#[command(name = "segway", version, about = "Two-wheeled inverted pendulum analysis and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Plant model source: derived | paper
    #[arg(long)]
    plant: Option<String>,
    /// Simulation model: linear | nonlinear
    #[arg(long)]
    model: Option<String>,
    /// Flat `key = value` config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override one config key, e.g. --param m=2.5 (repeatable)
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Constants, state space, transfer functions, controllability and stability
    Analyze(#[command(flatten)] Common),
    /// Pole-placement gains for a desired closed loop
    Gains {
        #[command(flatten)]
        common: Common,
        /// Desired characteristic polynomial, highest degree first (5 numbers)
        #[arg(long, allow_hyphen_values = true)]
        char: Option<String>,
        /// Canonical-form gains (4 numbers, constant term first)
        #[arg(long, allow_hyphen_values = true)]
        kcanon: Option<String>,
        /// Desired poles, e.g. -1,-2,-0.5+0.3i,-0.5-0.3i
        #[arg(long, allow_hyphen_values = true)]
        poles: Option<String>,
        /// Output format: text | csv
        #[arg(long, default_value = "text")]
        format: String,
    },
    /// Run the two-mode scenario and write the trajectory CSV
    Simulate(#[command(flatten)] Common),
    /// Open-loop step response CSV
    Openloop {
        #[command(flatten)]
        common: Common,
        /// Step torque (N m)
        #[arg(long, allow_hyphen_values = true)]
        torque: Option<f64>,
    },
}

fn build_config(c: &Common) -> CliResult<Config> {
    let mut cfg = match &c.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    for kv in &c.params {
        cfg.apply_override(kv)?;
    }
    if let Some(p) = &c.plant {
        cfg.set("plant", p)?;
    }
    if let Some(m) = &c.model {
        cfg.set("model", m)?;
    }
    if let Some(o) = &c.out {
        cfg.out = Some(o.clone());
    }
    Ok(cfg)
}

fn print(s: Option<String>) {
    if let Some(s) = s {
        print!("{s}");
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Analyze(c) => {
            let cfg = build_config(&c)?;
            print(emit(cfg.out.as_deref(), &analyze_report(&cfg)?)?);
        }
        Command::Gains {
            common,
            char,
            kcanon,
            poles,
            format,
        } => {
            let csv = match format.as_str() {
                "text" => false,
                "csv" => true,
                f => return Err(CliError::Usage(format!("--format: unknown '{f}'"))),
            };
            let req = GainsRequest::parse(char.as_deref(), kcanon.as_deref(), poles.as_deref())?;
            let cfg = build_config(&common)?;
            let res = run_gains(&cfg, &req)?;
            print(emit(cfg.out.as_deref(), &gains_report(&res, csv))?);
        }
        Command::Simulate(c) => {
            let cfg = build_config(&c)?;
            let outcome = run_simulate(&cfg)?;
            let csv = trajectory_csv(&outcome.trajectory);
            let report = metrics_report(&outcome);
            match &cfg.out {
                Some(p) => {
                    std::fs::write(p, csv)?;
                    print!("{report}");
                }
                None => {
                    print!("{csv}");
                    eprint!("{report}");
                }
            }
        }
        Command::Openloop { common, torque } => {
            let mut cfg = build_config(&common)?;
            if let Some(t) = torque {
                cfg.torque = t;
            }
            let traj = run_openloop(&cfg)?;
            print(emit(cfg.out.as_deref(), &trajectory_csv(&traj))?);
            eprintln!("diverged = {}", traj.meta.diverged);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
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
