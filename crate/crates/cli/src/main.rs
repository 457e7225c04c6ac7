use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qbcharge::models::{ModelKind, Params};
use qbcharge_cli::selftest::run_selftest;
use qbcharge_cli::{
    charging_time, check_thread_env, default_config_text, figure_command, format_report, simulate, sweep, ChargingTimeArgs,
    CliError,
};

/// Driven quantum battery charging under charger dephasing.
#[derive(Parser)]
#[command(name = "qbcharge", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its time series as CSV.
    Simulate {
        config: PathBuf,
        /// Output CSV; defaults to the [output] path, then CONFIG.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario file with a [sweep] section.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the charging time and its report.
    ChargingTime {
        /// two_tls, two_ho, tls_ho or star_tls
        #[arg(long, default_value = "two_tls")]
        model: String,
        /// Number of batteries for star_tls.
        #[arg(long)]
        n_batteries: Option<usize>,
        #[arg(long = "F", default_value_t = 0.5)]
        f: f64,
        #[arg(long, default_value_t = 1.0)]
        g: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        /// Threshold exponent: the deviation must fall below e^-n of its initial value.
        #[arg(long, default_value_t = 18)]
        n: u32,
        #[arg(long)]
        cutoff: Option<usize>,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        delta_cd: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        delta_bd: f64,
    },
    /// Write the data behind a named figure.
    Figure {
        name: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run the built-in consistency checks.
    Selftest,
    /// Print a scenario file with every default filled in.
    Template,
}

fn model_kind(name: &str, n_batteries: Option<usize>) -> Result<ModelKind, CliError> {
    match (name, n_batteries) {
        ("two_tls", None) => Ok(ModelKind::TwoTls),
        ("two_ho", None) => Ok(ModelKind::TwoHo),
        ("tls_ho", None) => Ok(ModelKind::TlsHo),
        ("star_tls", Some(n)) => Ok(ModelKind::StarTls(n)),
        ("star_tls", None) => Err(CliError::Usage("star_tls needs --n-batteries".into())),
        (_, Some(_)) => Err(CliError::Usage("--n-batteries only applies to star_tls".into())),
        (other, None) => Err(CliError::Usage(format!("unknown model '{other}'"))),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    check_thread_env()?;
    match cli.command {
        Command::Simulate { config, out } => {
            let path = simulate(&config, out.as_deref())?;
            eprintln!("wrote {}", path.display());
        }
        Command::Sweep { config, out } => {
            let path = sweep(&config, out.as_deref())?;
            eprintln!("wrote {}", path.display());
        }
        Command::ChargingTime {
            model,
            n_batteries,
            f,
            g,
            gamma,
            n,
            cutoff,
            delta_cd,
            delta_bd,
        } => {
            let args = ChargingTimeArgs {
                kind: model_kind(&model, n_batteries)?,
                params: Params::resonant(g, f, gamma).with_detunings(delta_cd, delta_bd),
                n,
                cutoff,
            };
            let (report, method) = charging_time(&args)?;
            if !report.converged {
                eprintln!("warning: threshold not reached within t = {}", report.horizon);
            }
            print!("{}", format_report(&report, method));
        }
        Command::Figure { name, out } => {
            for path in figure_command(&name, &out)? {
                println!("{}", path.display());
            }
        }
        Command::Selftest => {
            let checks = run_selftest()?;
            let failed = checks.iter().filter(|c| !c.pass).count();
            for c in &checks {
                println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if failed > 0 {
                return Err(CliError::SelftestFailed(failed));
            }
        }
        Command::Template => print!("{}", default_config_text()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qbcharge: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
