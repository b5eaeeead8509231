use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use specstab_cli::{reverify_report, run_scenario, CliError, Overrides, Report};

const EXIT_CODES: &str = "\
Exit codes:
  0  success (certificate verified, simulation written)
  1  model error (invalid plant, unreachable decay rate, bad argument)
  2  no verified certificate up to the order limit (artifacts still written)
  3  configuration or usage error (unknown preset, malformed scenario, bad flag)
  4  I/O error
  5  spectrum error (coefficient bounds, grid resolution)
  6  gain synthesis error (uncontrollable/unobservable pair, slow poles)
  7  certificate error (shifted closed loop not Hurwitz, singular solve)
  8  simulation error (incompatible initial condition, step rejected)

Presets: dirichlet-example, neumann-example";

#[derive(Parser)]
#[command(name = "specstab", version, about = "Observer-based boundary control of 1-D reaction-diffusion plants", after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize gains, certify stability and simulate a preset or scenario file.
    #[command(after_help = EXIT_CODES)]
    Run {
        /// Preset name or path to a TOML scenario.
        target: String,
        /// Largest observer order tried by the automatic order search.
        #[arg(long)]
        n_max: Option<usize>,
        /// Single alpha (> 1) replacing the scenario's alpha grid.
        #[arg(long)]
        alpha: Option<f64>,
        /// Tail exponent in (0, 1/2] for the Neumann measurement.
        #[arg(long)]
        eps: Option<f64>,
        /// Write the certificate conditions as an SDPA sparse problem.
        #[arg(long, value_name = "PATH")]
        export_sdpa: Option<PathBuf>,
        /// Output directory (overrides the scenario).
        #[arg(long, env = "SPECSTAB_OUT", value_name = "DIR")]
        out: Option<PathBuf>,
        /// Run the order search on all cores.
        #[arg(long)]
        parallel: bool,
        /// Suppress the summary.
        #[arg(long)]
        quiet: bool,
    },
    /// Re-verify the certificate embedded in a report.
    #[command(after_help = EXIT_CODES)]
    Verify {
        /// Preset name or scenario path the report was produced from.
        target: String,
        report: PathBuf,
    },
}

fn summarize(r: &Report) {
    println!("scenario      {}", r.scenario);
    println!("measurement   {:?}, delta = {}, q_c = {}", r.measurement, r.delta, r.q_c);
    println!("N0            {}", r.n0);
    println!("K             {:?}", r.gains.k);
    println!("L             {:?}", r.gains.l);
    for e in &r.order.sweep {
        println!(
            "N = {:<3} {} (alpha = {}, {:?}, worst violation {:.3e})",
            e.n,
            if e.feasible { "certified" } else { "not certified" },
            e.alpha,
            e.route,
            e.worst_violation
        );
    }
    match r.order.selected {
        Some(n) => println!("selected N    {n}"),
        None => println!("selected N    none (infeasible up to N = {})", r.order.n_max),
    }
    if let Some(sim) = &r.simulation {
        println!("decay rate    {:.6} on [{}, {}]", sim.decay_rate, sim.fit_window[0], sim.fit_window[1]);
    }
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Run {
            target,
            n_max,
            alpha,
            eps,
            export_sdpa,
            out,
            parallel,
            quiet,
        } => {
            let overrides = Overrides {
                n_max,
                alpha,
                eps,
                export_sdpa,
                out,
                parallel,
            };
            let outcome = run_scenario(&target, &overrides)?;
            if !quiet {
                summarize(&outcome.report);
                println!("report        {}", outcome.report_path.display());
            }
            Ok(outcome.exit_code())
        }
        Command::Verify { target, report } => {
            let text = std::fs::read_to_string(&report)?;
            let parsed: Report =
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", report.display())))?;
            match reverify_report(&target, &parsed)? {
                Some(c) if c.feasible => {
                    println!("certificate at N = {} re-verified", c.n);
                    Ok(specstab_cli::exit::SUCCESS)
                }
                Some(c) => {
                    println!("certificate at N = {} failed (worst violation {:e})", c.n, c.worst_violation());
                    Ok(specstab_cli::exit::INFEASIBLE)
                }
                None => {
                    println!("report has no certificate");
                    Ok(specstab_cli::exit::INFEASIBLE)
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { specstab_cli::exit::CONFIG as u8 } else { 0 });
        }
    };
    let code = match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
