//! Command-line front end.
//!
//! Exit codes: 0 success, 2 invalid configuration, 3 blow-up or numeric
//! abort (artifacts are still written), 4 I/O failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use flockalign::config::{parse_config, RunConfig, System};
use flockalign::runner::{certify_config, monitor_run_dir, run, run_sweep, RunError};

#[derive(Parser)]
#[command(name = "flockalign", version, about = "Alignment dynamics simulator and threshold certifier")]
struct Cli {
    /// Log progress to stderr (RUST_LOG overrides).
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory (defaults to `output.dir` of the config).
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Cucker-Smale agent system.
    Agents(RunArgs),
    /// Euler alignment system on a periodic interval.
    Euler1d(RunArgs),
    /// Euler alignment system on a periodic rectangle.
    Euler2d(RunArgs),
    /// Kinetic alignment equation in 1D position, 1D velocity.
    Kinetic(RunArgs),
    /// Print the threshold certificate of the configured initial data as JSON.
    Certify {
        #[arg(short, long)]
        config: PathBuf,
        /// Also check a finished run directory against the certificate.
        #[arg(long)]
        monitor: Option<PathBuf>,
    },
    /// Run every member of the config's `[sweep]` section.
    Sweep(RunArgs),
}

fn load(path: &Path) -> Result<RunConfig, RunError> {
    let text = std::fs::read_to_string(path).map_err(|source| RunError::Io { path: path.to_path_buf(), source })?;
    Ok(parse_config(&text)?)
}

fn apply_overrides(cfg: &mut RunConfig, args: &RunArgs) -> PathBuf {
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    args.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output_dir))
}

fn simulate(args: &RunArgs, system: System) -> Result<i32, RunError> {
    let mut cfg = load(&args.config)?;
    if cfg.system != system {
        return Err(RunError::Setup(format!(
            "config describes the {} system but the {} subcommand was used",
            cfg.system.name(),
            system.name()
        )));
    }
    let out = apply_overrides(&mut cfg, args);
    let summary = run(&cfg, &out)?;
    log::info!("{} run finished at t = {} ({:?})", system.name(), summary.final_time, summary.outcome);
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    Ok(summary.exit_code())
}

fn execute(cmd: &Command) -> Result<i32, RunError> {
    match cmd {
        Command::Agents(a) => simulate(a, System::Agents),
        Command::Euler1d(a) => simulate(a, System::Euler1d),
        Command::Euler2d(a) => simulate(a, System::Euler2d),
        Command::Kinetic(a) => simulate(a, System::Kinetic),
        Command::Certify { config, monitor } => {
            let cfg = load(config)?;
            let json = match monitor {
                Some(dir) => serde_json::to_string_pretty(&monitor_run_dir(dir)?),
                None => serde_json::to_string_pretty(&certify_config(&cfg)?),
            };
            println!("{}", json.expect("report serializes"));
            Ok(0)
        }
        Command::Sweep(a) => {
            let mut cfg = load(&a.config)?;
            let sweep = cfg
                .sweep
                .clone()
                .ok_or_else(|| RunError::Setup("the config has no [sweep] section".into()))?;
            let out = apply_overrides(&mut cfg, a);
            let summary = run_sweep(&cfg, &sweep.axis, &sweep.values, &out)?;
            println!("{}", serde_json::to_string_pretty(&summary).expect("sweep serializes"));
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(&cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
