use clap::{Args, Parser, Subcommand};
use nts_lab::config::{parse_config, ExperimentKind, DEFAULTS_HELP};
use nts_lab::{run_experiment, LabError};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Natural type selection experiments.
///
/// Exit status: 0 success, 2 configuration error, 3 solver did not
/// converge, 4 encoder/decoder synchronization failure, 1 other failures.
#[derive(Parser)]
#[command(name = "nts-lab", version, after_help = DEFAULTS_HELP)]
struct Cli {
    /// Root directory for run outputs.
    #[arg(long, global = true, env = "NTS_LAB_OUT_DIR", default_value = "results")]
    out_dir: PathBuf,
    /// Also write a gnuplot script next to the CSV files.
    #[arg(long, global = true)]
    emit_plot_script: bool,
    /// Worker threads for independent seeds and cells (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Experiment document (TOML).
    #[arg(long)]
    config: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Rate-distortion point or curve (kind rdf_point or rdf_curve).
    Rdf(ConfigArg),
    /// NTS sessions over a list of seeds (kind nts_run).
    Nts(ConfigArg),
    /// Redundancy against word length at a frozen codebook (kind redundancy_sweep).
    SweepRedundancy(ConfigArg),
    /// Codebook model comparison (kind explore_compare).
    Explore(ConfigArg),
    /// Parse and validate a document without running it.
    Validate(ConfigArg),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nts-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), LabError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(LabError::invalid("--jobs", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| LabError::invalid("--jobs", e.to_string()))?;
    }
    let (arg, expected): (&ConfigArg, &[ExperimentKind]) = match &cli.command {
        Command::Rdf(a) => (a, &[ExperimentKind::RdfPoint, ExperimentKind::RdfCurve]),
        Command::Nts(a) => (a, &[ExperimentKind::NtsRun]),
        Command::SweepRedundancy(a) => (a, &[ExperimentKind::RedundancySweep]),
        Command::Explore(a) => (a, &[ExperimentKind::ExploreCompare]),
        Command::Validate(a) => (a, &[]),
    };
    let config = load(&arg.config)?;
    if expected.is_empty() {
        println!("{}: valid {} document, digest {}", arg.config.display(), config.kind.name(), config.digest);
        return Ok(());
    }
    if !expected.contains(&config.kind) {
        let names: Vec<&str> = expected.iter().map(|k| k.name()).collect();
        return Err(LabError::invalid(
            "kind",
            format!("{} given, this command runs {}", config.kind.name(), names.join(" or ")),
        ));
    }
    let (manifest, summary) = run_experiment(&config, &cli.out_dir, cli.emit_plot_script)?;
    for line in summary {
        println!("{line}");
    }
    let dir = cli.out_dir.join(&config.output);
    println!("wrote {} files to {}", manifest.outputs.len() + 1, dir.display());
    Ok(())
}

fn load(path: &Path) -> Result<nts_lab::ExperimentConfig, LabError> {
    let text = std::fs::read_to_string(path).map_err(|e| LabError::Parse(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}
