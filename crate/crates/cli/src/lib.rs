//! Command-line front end: configuration, run persistence and plot data.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod snapshot;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::Parser;

pub use commands::Command;
pub use config::RunConfig;
pub use error::CliError;
pub use output::Manifest;
pub use snapshot::Snapshot;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "ECODAMP_OUT";

#[derive(Debug, Parser)]
#[command(name = "ecodamp", version, about = "Invasive food-chain blow-up and damping experiments")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// TOML configuration file, merged over the preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Named base configuration.
    #[arg(long)]
    pub preset: Option<String>,
    /// Output directory; defaults to `$ECODAMP_OUT/<command>` or
    /// `runs/<command>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps and bisections.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Checkpoint to continue from (simulate only).
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// `dotted.key=value`, applied after the preset and the file.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl Cli {
    pub fn out_dir(&self) -> PathBuf {
        match (&self.out, std::env::var_os(OUT_ENV)) {
            (Some(out), _) => out.clone(),
            (None, Some(root)) => PathBuf::from(root).join(self.command.name()),
            (None, None) => PathBuf::from("runs").join(self.command.name()),
        }
    }
}

/// Executes a parsed command line.
pub fn execute(cli: &Cli, stdout: &mut (dyn Write + Send)) -> Result<Manifest, CliError> {
    let cfg = config::load(cli.preset.as_deref(), cli.config.as_deref(), &cli.overrides)?;
    let out = cli.out_dir();
    let go = |stdout: &mut (dyn Write + Send)| {
        commands::run(cli.command, &cfg, &out, cli.resume.as_deref(), stdout)
    };
    match cli.workers {
        Some(0) => Err(CliError::config("--workers must be positive")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(format!("cannot start {n} workers: {e}")))?
            .install(|| go(stdout)),
        None => go(stdout),
    }
}

/// Parses `args` and runs them, reporting errors on `stderr`. Returns the
/// process exit code.
pub fn main_with<I, T>(args: I, stdout: &mut (dyn Write + Send), stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli, stdout) {
        Ok(_) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "ecodamp: {e}");
            e.exit_code()
        }
    }
}
