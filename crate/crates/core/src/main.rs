use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use dilatest::cli::{emit, run, Command, Format, RunConfig};

/// Exit status for configuration and I/O errors.
const EXIT_ERROR: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "dilatest",
    version,
    about = "Numerical checks of dilation bounds in weighted Besov and Triebel-Lizorkin spaces"
)]
struct Args {
    /// norm, ap, xclass, dilate, maximal or equiv
    command: Command,
    /// JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// Output file; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    format: Format,
    /// Worker threads (all cores when omitted)
    #[arg(long)]
    threads: Option<usize>,
    /// Record wall-clock time in `meta` (breaks byte-identical reruns)
    #[arg(long)]
    timing: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("dilatest: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn execute(args: &Args) -> dilatest::Result<i32> {
    #[cfg(feature = "parallel")]
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| dilatest::Error::Io(e.to_string()))?;
    }
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| dilatest::Error::Io(format!("{}: {e}", args.config.display())))?;
    let config = RunConfig::from_json(&text)?;
    let start = Instant::now();
    let mut report = run(args.command, &config)?;
    if args.timing {
        report.meta.wall_clock_s = Some(start.elapsed().as_secs_f64());
    }
    for w in &report.meta.warnings {
        eprintln!("dilatest: warning: {w}");
    }
    emit(&report, args.format, args.out.as_deref())?;
    Ok(report.exit_code())
}
