use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mhecert::commands::{
    cmd_compare, cmd_horizon, cmd_simulate, cmd_synthesize, cmd_verify, CmdError, LogFormat,
};

/// Certified moving horizon estimation: detectability certificates via LMIs,
/// minimal stabilizing horizons, and monitored closed-loop simulation.
///
/// Flag overrides (e.g. --eta, --horizon, --seed) take precedence over values
/// stored in files; for the seed, --seed beats MHECERT_SEED beats the
/// scenario file. Exit codes: 0 success, 1 analytical failure (verification
/// failed, synthesis infeasible, monitor violated), 2 usage or i/o error.
#[derive(Parser)]
#[command(name = "mhecert", version, arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a certificate's matrix inequality over the model's domain.
    Verify {
        /// Model config JSON.
        #[arg(long)]
        model: PathBuf,
        /// Certificate JSON.
        #[arg(long)]
        cert: PathBuf,
        /// Grid sample counts per (x, u, w) coordinate instead of the
        /// automatic vertex plan.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<usize>>,
        /// Largest admissible LMI eigenvalue.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Override the certificate's decay rate.
        #[arg(long)]
        eta: Option<f64>,
    },
    /// Synthesize a certificate over a decay-rate grid.
    Synthesize {
        /// Model config JSON.
        #[arg(long)]
        model: PathBuf,
        /// Decay grid as a:b:step (inclusive) or a single value.
        #[arg(long = "eta-grid")]
        eta_grid: String,
        /// Constrain Q and R to diagonal matrices (pass --diag-qr=false for
        /// full symmetric parameterizations).
        #[arg(long = "diag-qr", default_value_t = true, num_args = 0..=1,
              default_missing_value = "true", action = clap::ArgAction::Set)]
        diag_qr: bool,
        /// Keep the decay rate with the largest margin instead of the
        /// smallest feasible one.
        #[arg(long, default_value_t = false)]
        maximize_margin: bool,
        /// Upper bound q_max in Q ⪯ q_max·I (default 1e4).
        #[arg(long = "q-max")]
        q_max: Option<f64>,
        /// Upper bound r_max in R ⪯ r_max·I (default 1e4).
        #[arg(long = "r-max")]
        r_max: Option<f64>,
        /// Write the certificate here as well as to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print minimal stabilizing horizons for all analysis methods.
    Horizon {
        /// Certificate JSON.
        #[arg(long)]
        cert: PathBuf,
        /// Override the certificate's decay rate.
        #[arg(long)]
        eta: Option<f64>,
    },
    /// Run a closed-loop scenario and export the monitored log.
    Simulate {
        /// Scenario JSON.
        #[arg(long)]
        scenario: PathBuf,
        /// Log output path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
        /// Override the scenario's horizon.
        #[arg(long)]
        horizon: Option<usize>,
        /// Override the scenario's seed (beats MHECERT_SEED).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write the horizon comparison as CSV.
    Compare {
        /// Certificate JSON.
        #[arg(long)]
        cert: PathBuf,
        /// CSV output path.
        #[arg(long)]
        out: PathBuf,
        /// Override the certificate's decay rate.
        #[arg(long)]
        eta: Option<f64>,
    },
}

/// Best-effort printing: a closed pipe (e.g. `mhecert ... | head`) must not
/// turn into a panic.
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout(), "{text}");
}

fn emit_err(text: &str) {
    let _ = writeln!(std::io::stderr(), "{text}");
}

fn run(cmd: Cmd) -> Result<bool, CmdError> {
    match cmd {
        Cmd::Verify {
            model,
            cert,
            grid,
            tol,
            eta,
        } => {
            let outcome = cmd_verify(&model, &cert, grid, tol, eta)?;
            emit(&outcome.render());
            Ok(outcome.report.pass)
        }
        Cmd::Synthesize {
            model,
            eta_grid,
            diag_qr,
            maximize_margin,
            q_max,
            r_max,
            out,
        } => {
            let outcome = cmd_synthesize(
                &model,
                &eta_grid,
                diag_qr,
                maximize_margin,
                q_max,
                r_max,
                out.as_deref(),
            )?;
            emit(&outcome.certificate_json);
            emit_err(&format!(
                "synthesized: eta = {}, margin = {:.6e}, elapsed = {:.3} ms",
                outcome.eta, outcome.margin, outcome.elapsed_ms
            ));
            Ok(true)
        }
        Cmd::Horizon { cert, eta } => {
            let outcome = cmd_horizon(&cert, eta)?;
            emit(&outcome.render());
            Ok(true)
        }
        Cmd::Simulate {
            scenario,
            out,
            format,
            horizon,
            seed,
        } => {
            let format = match format {
                FormatArg::Csv => LogFormat::Csv,
                FormatArg::Json => LogFormat::Json,
            };
            let outcome = cmd_simulate(&scenario, &out, format, seed, horizon)?;
            emit(&outcome.render_summary());
            Ok(!outcome.violated)
        }
        Cmd::Compare { cert, out, eta } => {
            cmd_compare(&cert, &out, eta)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CmdError::Analysis(msg)) => {
            emit_err(&format!("error: {msg}"));
            ExitCode::from(1)
        }
        Err(CmdError::Usage(msg)) => {
            emit_err(&format!("error: {msg}"));
            ExitCode::from(2)
        }
    }
}
