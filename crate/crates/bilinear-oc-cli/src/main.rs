//! Command-line runner for the benchmark scenarios.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver non-convergence,
//! 4 state divergence.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bilinear_oc::scenario::{emit_plot_data, list_scenarios, load_config, run_scenario, Mode};
use bilinear_oc::Error;

#[derive(Parser)]
#[command(
    name = "bilinear-oc",
    about = "Endpoint-constrained optimal control of bilinear transport/heat systems",
    version
)]
struct Cli {
    /// Print the scenario registry and exit.
    #[arg(long)]
    list_scenarios: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario from a key = value config file.
    Run {
        /// Path to the config file.
        config: PathBuf,
        /// Override the solver mode: penalized, constrained, or feedback.
        #[arg(long)]
        mode: Option<String>,
        /// Override the first penalty weight ε₀.
        #[arg(long)]
        eps_start: Option<f64>,
        /// Override the number of continuation stages.
        #[arg(long)]
        stages: Option<usize>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the probe seed echoed into the report.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if cli.list_scenarios {
        println!("available scenarios:");
        for (name, blurb) in list_scenarios() {
            println!("  {name:<18} {blurb}");
        }
        return ExitCode::SUCCESS;
    }

    let Some(Command::Run {
        config,
        mode,
        eps_start,
        stages,
        out,
        seed,
    }) = cli.command
    else {
        eprintln!("nothing to do; try `bilinear-oc run <config>` or `--list-scenarios`");
        return ExitCode::from(2);
    };

    match execute(config, mode, eps_start, stages, out, seed) {
        Ok(converged) => {
            if converged {
                ExitCode::SUCCESS
            } else {
                eprintln!("run finished without reaching its convergence targets");
                ExitCode::from(3)
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Divergence { .. } => ExitCode::from(4),
                Error::Io(_) => ExitCode::from(2),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn execute(
    config_path: PathBuf,
    mode: Option<String>,
    eps_start: Option<f64>,
    stages: Option<usize>,
    out: Option<PathBuf>,
    seed: Option<u64>,
) -> bilinear_oc::Result<bool> {
    let mut cfg = load_config(&config_path)?;

    if let Some(mode) = mode {
        cfg.mode = Mode::from_name(&mode).ok_or_else(|| {
            Error::Config(format!(
                "unknown mode `{mode}`; expected penalized, constrained, or feedback"
            ))
        })?;
    }
    if let Some(eps) = eps_start {
        cfg.eps_start = eps;
    }
    if let Some(n) = stages {
        cfg.n_stages = n;
    }
    if let Some(dir) = out {
        cfg.out_dir = dir;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;

    let artifacts = run_scenario(&cfg)?;
    println!("{}", artifacts.summary);
    println!("control:    {}", artifacts.control_csv.display());
    println!("trajectory: {}", artifacts.trajectory_csv.display());
    println!("report:     {}", artifacts.report_json.display());
    let overlay = emit_plot_data(&artifacts)?;
    println!("overlay:    {}", overlay.display());

    Ok(artifacts.summary.converged)
}
