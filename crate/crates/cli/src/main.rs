//! `kurzmani` command-line front-end.
//!
//! Exit codes: 0 success, 1 input or parse error, 2 certified failure or
//! mismatch, 3 numerical non-convergence. Errors are written to stderr as JSON.

mod commands;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use kurzmani::config::RunConfig;
use kurzmani::Error;

#[derive(Parser, Debug)]
#[command(
    name = "kurzmani",
    version,
    about = "Stable manifolds of generalized ODEs via a Lyapunov-Perron fixed point"
)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Overrides `solver.tol`.
    #[arg(long, global = true, value_name = "X")]
    tol: Option<f64>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Integral of a configured integrand by both evaluators.
    Integrate,
    /// Tabulate V(t, s) at `solver.fundamental_times`.
    Fundamental,
    /// Fit and certify the exponential dichotomy.
    Dichotomy,
    /// Sample the stable-manifold graph on `solver.grid`.
    Manifold,
    /// Classify `solver.classify_points` by forward escape.
    Classify,
    /// Evaluate the hypotheses of the application theorems.
    Check,
    /// Compare fast and reference evaluations.
    Crosscheck,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Integrate => "integrate",
            Command::Fundamental => "fundamental",
            Command::Dichotomy => "dichotomy",
            Command::Manifold => "manifold",
            Command::Classify => "classify",
            Command::Check => "check",
            Command::Crosscheck => "crosscheck",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub kind: String,
    pub message: String,
    pub details: Value,
}

impl CliError {
    pub fn new(code: u8, kind: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            code,
            kind: kind.into(),
            message: message.into(),
            details: Value::Null,
        }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = details;
        self
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self::new(1, "invalid_input", message)
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::new(1, "io", format!("{}: {e}", path.display()))
    }

    fn render(&self) -> String {
        let mut doc =
            json!({ "error": self.kind, "message": self.message, "exit_code": self.code });
        if !self.details.is_null() {
            doc["details"] = self.details.clone();
        }
        doc.to_string()
    }
}

/// Maps a library error onto the exit-code contract.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NotHyperbolic(_)
        | Error::Hypothesis { .. }
        | Error::SingularJump { .. }
        | Error::NoBracket { .. }
        | Error::ReferenceNotConverged { .. } => 2,
        e if e.is_non_convergence() => 3,
        _ => 1,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let details = match &e {
            Error::ReferenceNotConverged {
                rounds,
                previous,
                last,
                difference,
            } => {
                json!({ "rounds": rounds, "previous": previous, "last": last, "difference": difference })
            }
            Error::NotContracting { ratios } => json!({ "ratios": ratios }),
            Error::Hypothesis { condition, witness } => {
                json!({ "condition": condition, "witness": witness })
            }
            _ => Value::Null,
        };
        CliError::new(exit_code(&e), e.kind(), e.to_string()).with_details(details)
    }
}

/// Loaded configuration with the raw text for hashing.
pub struct Loaded {
    pub text: String,
    pub cfg: RunConfig,
}

fn load(path: Option<&Path>, tol: Option<f64>) -> Result<Loaded, CliError> {
    let path = path.ok_or_else(|| CliError::input("--config PATH is required"))?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut cfg = RunConfig::from_json(&text).map_err(|e| {
        CliError::new(
            1,
            "parse",
            format!("{}:{}:{}: {e}", path.display(), e.line(), e.column()),
        )
        .with_details(json!({ "line": e.line(), "column": e.column() }))
    })?;
    if let Some(t) = tol {
        cfg.solver.tol = t;
    }
    cfg.validate()?;
    Ok(Loaded { text, cfg })
}

fn run(cli: &Cli) -> Result<u8, CliError> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::input("--jobs must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::input(format!("thread pool: {e}")))?;
    }
    let loaded = load(cli.config.as_deref(), cli.tol)?;
    let name = cli.command.name();
    let dir = cli
        .out
        .clone()
        .or_else(|| loaded.cfg.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let prefix = match &loaded.cfg.output.prefix {
        Some(p) => format!("{p}_{name}"),
        None => name.to_string(),
    };
    let meta = output::Metadata::new(name, &loaded.text, &loaded.cfg);
    let mut sink = output::Sink::new(&dir, prefix, meta)?;
    log::info!("{name}: writing artifacts to {}", dir.display());
    let code = match cli.command {
        Command::Integrate => commands::integrate(&loaded, &mut sink)?,
        Command::Fundamental => commands::fundamental(&loaded, &mut sink)?,
        Command::Dichotomy => commands::dichotomy(&loaded, &mut sink)?,
        Command::Manifold => commands::manifold(&loaded, &mut sink)?,
        Command::Classify => commands::classify(&loaded, &mut sink)?,
        Command::Check => commands::check(&loaded, &mut sink)?,
        Command::Crosscheck => commands::crosscheck(&loaded, &mut sink)?,
    };
    for p in sink.written() {
        log::info!("wrote {}", p.display());
    }
    Ok(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("KURZMANI_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let err = CliError::new(1, "usage", e.to_string().trim_end().to_string());
            eprintln!("{}", err.render());
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{}", e.render());
            ExitCode::from(e.code)
        }
    }
}
