use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use holonomy_lab::harness::{resolve_output_dir, run_and_write, summary_lines, ExperimentConfig, Selection, OUTPUT_DIR_ENV};

#[derive(Debug, Parser)]
#[command(name = "holonomy-lab", version, about = "Verification suites for holonomy-diffeomorphism algebras and Bott-Dirac operators")]
struct Cli {
    /// TOML experiment configuration; defaults are used when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Report directory; overrides the config and the environment.
    #[arg(long, value_name = "DIR", long_help = format!("Report directory. Precedence: this flag, then ${OUTPUT_DIR_ENV}, then output.dir from the config."))]
    out: Option<PathBuf>,

    /// spectrum, holonomy, sobolev, ccr, continuity, fock, commutator-profile or all.
    #[arg(long, value_name = "NAME", default_value = "all")]
    suite: String,

    /// Multiplies every upper-bound tolerance.
    #[arg(long, value_name = "FLOAT", default_value_t = 1.0)]
    tolerance_scale: f64,

    /// Print the effective configuration as TOML and exit.
    #[arg(long)]
    print_config: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> holonomy_lab::Result<bool> {
    let cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if cli.print_config {
        print!("{}", cfg.to_toml_string()?);
        return Ok(true);
    }
    let selection: Selection = cli.suite.parse()?;
    let dir = resolve_output_dir(cli.out.as_deref(), &cfg);
    let report = run_and_write(selection, &cfg, cli.tolerance_scale, &dir)?;
    for line in summary_lines(&report) {
        println!("{line}");
    }
    println!("reports written to {}", dir.display());
    Ok(report.pass())
}
