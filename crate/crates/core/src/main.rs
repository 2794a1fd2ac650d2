use chemorep::cli::{self, CliError};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Numerical laboratory for the parabolic chemorepulsion system.
///
/// Outputs go below $CHEMOREP_OUTPUT_ROOT (default: the working directory).
#[derive(Parser)]
#[command(name = "chemorep", version)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation described by a config file.
    Simulate { config: PathBuf },
    /// Run an inequality batch.
    Verify {
        spec: PathBuf,
        /// Multiply every inequality constant by this factor.
        #[arg(long)]
        constant_scale: Option<f64>,
    },
    /// Run a refinement study (cosine-1d, constant-1d, bochner).
    Convergence { case: String },
    /// Summarise a finished run directory into report.json.
    Report { run_dir: PathBuf },
}

fn execute(cmd: Command) -> Result<u8, CliError> {
    let root = cli::output_root();
    match cmd {
        Command::Simulate { config } => {
            let out = cli::simulate_file(&config, &root)?;
            let s = &out.summary;
            match (s.blowup_t, &s.fault) {
                (Some(t), _) => println!("blow-up detected at t = {t:e} after {} steps", s.steps),
                (_, Some(f)) => eprintln!("fault after {} steps: {f}", s.steps),
                _ => println!("completed {} steps to t = {:e}", s.steps, s.final_t),
            }
            println!("wrote {}", out.run_dir.display());
            Ok(out.exit_code())
        }
        Command::Verify { spec, constant_scale } => {
            let out = cli::verify_file(&spec, &root, constant_scale)?;
            for line in cli::verify_summary_lines(&out.rows) {
                println!("{line}");
            }
            println!("{} of {} samples failed; wrote {}", out.failures, out.rows.len(), out.csv_path.display());
            Ok(out.exit_code())
        }
        Command::Convergence { case } => {
            let out = cli::convergence(&case, &root)?;
            print!("{}", out.table);
            println!("wrote {}", out.csv_path.display());
            Ok(cli::EXIT_OK)
        }
        Command::Report { run_dir } => {
            let rep = cli::report(&run_dir)?;
            println!("{}", serde_json::to_string_pretty(&rep).expect("plain data serialises"));
            Ok(cli::EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { cli::EXIT_USAGE } else { cli::EXIT_OK });
        }
    };
    match execute(args.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
