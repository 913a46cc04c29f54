use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qzeno::config::{preset, RunConfig};
use qzeno::Error;

mod commands;

use commands::{Artifact, Command};

/// Qubit + bosonic bath under frequent non-selective measurements.
#[derive(Parser)]
#[command(name = "qzeno", version)]
struct Cli {
    /// Worker threads for sweeps and scans (overrides QZENO_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args, Clone)]
struct Io {
    /// TOML run configuration.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Bundled configuration: fig1, fig_purity, fig2c.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory (overrides output.dir; default "out").
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Sub {
    /// Coupling-corrected equilibrium purity over the α grid.
    Equilibrium(Io),
    /// R_e, R_g, J_e, J_g table.
    Rates(Io),
    /// Rate-equation trace under the configured schedule.
    Evolve(Io),
    /// Exact truncated-bath trace and mode occupations.
    Exact(Io),
    /// Relative entropy to the bath Gibbs state and its rate σ.
    Entropy(Io),
    /// Cooling-condition margin scan.
    CoolingCheck(Io),
    /// Greedy heating/cooling schedule.
    Schedule(Io),
    /// Greedy heating and cooling versus common temperature.
    Sweep(Io),
    /// Regenerate all figure data from the bundled configurations.
    Figures {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Config(String),
    Numeric(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numeric(_) | Failure::Io(_) => 3,
        }
    }

    fn report(&self) {
        let (kind, message) = match self {
            Failure::Config(m) => ("config", m),
            Failure::Numeric(m) => ("numerical", m),
            Failure::Io(m) => ("io", m),
        };
        let line = serde_json::json!({ "error": kind, "message": message, "exit_code": self.code() });
        eprintln!("{line}");
    }
}

fn from_core(e: Error) -> Failure {
    match e {
        Error::Config(m) => Failure::Config(m),
        other => Failure::Numeric(other.to_string()),
    }
}

fn load(io: &Io) -> Result<RunConfig, Failure> {
    let text = match (&io.config, &io.preset) {
        (Some(path), None) => std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?,
        (None, Some(name)) => preset(name).ok_or_else(|| Failure::Config(format!("unknown preset {name:?}")))?.to_string(),
        _ => return Err(Failure::Config("pass exactly one of --config or --preset".into())),
    };
    RunConfig::from_toml_str(&text).map_err(from_core)
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, Failure> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var("QZENO_THREADS") {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| Failure::Config(format!("QZENO_THREADS={v:?} is not a count"))),
        Err(_) => Ok(None),
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = thread_count(cli.threads)? {
        if n == 0 {
            return Err(Failure::Config("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::Io(e.to_string()))?;
    }
    let (command, io) = match cli.command {
        Sub::Figures { out } => {
            let artifacts = commands::figures().map_err(from_core)?;
            return write_all(&out.unwrap_or_else(|| PathBuf::from("out")), &artifacts);
        }
        Sub::Equilibrium(io) => (Command::Equilibrium, io),
        Sub::Rates(io) => (Command::Rates, io),
        Sub::Evolve(io) => (Command::Evolve, io),
        Sub::Exact(io) => (Command::Exact, io),
        Sub::Entropy(io) => (Command::Entropy, io),
        Sub::CoolingCheck(io) => (Command::CoolingCheck, io),
        Sub::Schedule(io) => (Command::Schedule, io),
        Sub::Sweep(io) => (Command::Sweep, io),
    };
    let cfg = load(&io)?;
    commands::preflight(command, &cfg).map_err(from_core)?;
    let artifacts = commands::run(command, &cfg).map_err(from_core)?;
    let out = io.out.or_else(|| cfg.output.dir.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"));
    write_all(&out, &artifacts)
}

/// Everything is computed before the first write, so failures leave no
/// partial output behind.
fn write_all(dir: &std::path::Path, artifacts: &[Artifact]) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
    for a in artifacts {
        let path = dir.join(&a.name);
        std::fs::write(&path, &a.contents).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let f = Failure::Config(e.to_string().trim().to_string());
            f.report();
            return ExitCode::from(f.code());
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            f.report();
            ExitCode::from(f.code())
        }
    }
}
