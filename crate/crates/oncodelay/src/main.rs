use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use oncodelay::{open, run_analyze, run_hopf, run_simulate, run_steady, run_sweep, CliError, Overrides};

#[derive(Parser)]
#[command(name = "oncodelay", version, about = "Nonlocal delayed tumor-therapy model: bifurcation, spectra, simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Principal pair, bifurcation coefficients, steady state and spectrum.
    Analyze(Common),
    /// Newton steady state at the configured treatment rate.
    Steady(Common),
    /// Time integration and behavior classification.
    Simulate(Common),
    /// Critical delays and the numerical Hopf crossing.
    Hopf(Common),
    /// Parameter sweep over dose, beta or tau.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Add the spectral abscissa column.
        #[arg(long)]
        max_re: bool,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: bool,
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
    #[arg(long, value_name = "N")]
    grid_n: Option<usize>,
    #[arg(long, value_name = "VALUE", allow_negative_numbers = true)]
    seed_history: Option<f64>,
}

impl Common {
    fn overrides(&self, max_re: bool) -> Overrides {
        Overrides {
            out: self.out.clone(),
            grid_n: self.grid_n,
            seed_history: self.seed_history,
            svg: self.svg,
            jobs: self.jobs,
            max_re,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Analyze(c) => {
            let s = run_analyze(&open(&c.config, &c.overrides(false))?)?;
            println!(
                "region {}  beta* = {:.6}  kappa(beta) = {:.6}  {}",
                s.region.value, s.beta_star.value, s.kappa_beta.value, s.stability_verdict.value
            );
            for n in &s.notes {
                eprintln!("note: {n}");
            }
        }
        Command::Steady(c) => {
            let r = run_steady(&open(&c.config, &c.overrides(false))?)?;
            println!("peak {:.6}  residual {:.2e}  iterations {}", r.peak, r.residual_norm, r.iterations);
        }
        Command::Simulate(c) => {
            let r = run_simulate(&open(&c.config, &c.overrides(false))?)?;
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
            match (r.amplitude, r.period) {
                (Some(a), Some(p)) => println!("{}  amplitude {a:.4}  period {p:.4}", r.verdict),
                _ => println!("{}", r.verdict),
            }
        }
        Command::Hopf(c) => {
            let r = run_hopf(&open(&c.config, &c.overrides(false))?)?;
            println!("region {}  tau_k {:?}  tau_c {:?}", r.region, r.tau_k, r.tau_c);
        }
        Command::Sweep { common, max_re } => {
            let rows = run_sweep(&open(&common.config, &common.overrides(max_re))?)?;
            println!("{} rows", rows.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
