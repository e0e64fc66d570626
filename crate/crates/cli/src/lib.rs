//! Command-line runner for symmetry-limited recovery experiments.
//!
//! Every subcommand writes rows in one fixed CSV schema (see [`output`]) and a
//! JSON summary of the same rows. Exit status is 0 when no row records a
//! violation, 1 otherwise, and 2 on configuration or input errors.

pub mod code_json;
pub mod commands;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use symrec::recovery::{CodeErrorOptions, SeesawOptions};

pub use error::{Error, Result};

use commands::{HpArgs, HpMode, Outcome, Suite};

#[derive(Debug, Parser)]
#[command(name = "symrec", version, about = "Recovery-error bounds under conserved charges")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Write PREFIX.csv and PREFIX.json instead of printing CSV to stdout and
    /// the summary to stderr.
    #[arg(long, global = true, value_name = "PREFIX")]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Seesaw iterations per recovery optimisation.
    #[arg(long, global = true, default_value_t = 500)]
    pub seesaw_iters: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a randomized invariant suite.
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Scrambling of k qubits into an N-qubit black hole with conserved number.
    Hp {
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long = "N", alias = "n")]
        n: usize,
        /// Output sizes to sweep (comma separated).
        #[arg(long, value_delimiter = ',', default_value = "1")]
        l: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// Keep black-hole charges in `s..=N−s`; 0 keeps the maximally entangled state.
        #[arg(long = "s-window", default_value_t = 0)]
        s_window: usize,
        /// `max` or `eigen:m=w,...` for the diary state.
        #[arg(long, default_value = "max")]
        probe: String,
        #[arg(long, value_enum, default_value_t = HpMode::Foggy)]
        mode: HpMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Coherence-alleviation example with M levels.
    Example {
        #[arg(long = "M", alias = "m", value_delimiter = ',', required = true)]
        m: Vec<u32>,
        /// Also run the seesaw optimiser (small M only).
        #[arg(long)]
        seesaw: bool,
    },
    /// Audit a covariant code under single-site erasure.
    Qec {
        /// Code description JSON.
        #[arg(long, conflicts_with = "builtin")]
        code: Option<PathBuf>,
        /// `dicke:ALPHA`, `dicke-family`, `four-qubit`, `repetition` or `trivial`.
        #[arg(long)]
        builtin: Option<String>,
        /// Random inputs in the worst-case search.
        #[arg(long, default_value_t = 32)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Evaluate one bound from raw terms.
    Bound {
        #[arg(long)]
        kind: String,
        /// JSON file, inline JSON, or `{name:value,...}`.
        #[arg(long)]
        inputs: String,
        /// Compare against this recovery error.
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Print the JSON description of a builtin code.
    ExportCode {
        #[arg(long)]
        builtin: String,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Verify { .. } => "verify",
            Command::Hp { .. } => "hp",
            Command::Example { .. } => "example",
            Command::Qec { .. } => "qec",
            Command::Bound { .. } => "bound",
            Command::ExportCode { .. } => "export-code",
        }
    }

    fn seed(&self) -> u64 {
        match self {
            Command::Verify { seed, .. } | Command::Hp { seed, .. } | Command::Qec { seed, .. } => *seed,
            _ => 0,
        }
    }
}

fn with_suffix(prefix: &std::path::Path, ext: &str) -> PathBuf {
    let mut p = prefix.as_os_str().to_owned();
    p.push(ext);
    PathBuf::from(p)
}

fn read_text(path: &PathBuf) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

fn execute(cli: &Cli) -> Result<Outcome> {
    let seesaw = SeesawOptions { max_iters: cli.seesaw_iters, ..Default::default() };
    match &cli.command {
        Command::Verify { suite, trials, seed } => commands::verify(*suite, *trials, *seed, &seesaw),
        Command::Hp { k, n, l, samples, s_window, probe, mode, seed } => {
            let args = HpArgs {
                k: *k,
                n: *n,
                ls: l.clone(),
                samples: *samples,
                s_window: *s_window,
                probe: commands::parse_probe(probe)?,
                seed: *seed,
                mode: *mode,
            };
            commands::hp(&args, &seesaw)
        }
        Command::Example { m, seesaw: run_seesaw } => {
            if m.contains(&0) {
                return Err(Error::Config("M must be positive".into()));
            }
            commands::example(m, run_seesaw.then_some(&seesaw))
        }
        Command::Qec { code, builtin, trials, seed } => {
            let codes = match (code, builtin) {
                (Some(path), None) => vec![code_json::parse_code(&read_text(path)?)?],
                (None, Some(name)) => commands::builtin_codes(name)?,
                _ => return Err(Error::Config("give exactly one of --code or --builtin".into())),
            };
            let opts = CodeErrorOptions { random_inputs: *trials, seed: *seed, seesaw, ..Default::default() };
            commands::qec(&codes, &opts)
        }
        Command::Bound { kind, inputs, delta } => {
            let kind = kind.parse().map_err(|e: symrec::Error| Error::Config(e.to_string()))?;
            let path = PathBuf::from(inputs);
            let text = if path.is_file() { read_text(&path)? } else { inputs.clone() };
            commands::bound(kind, &commands::parse_inputs(&text)?, *delta)
        }
        Command::ExportCode { .. } => unreachable!("handled before execution"),
    }
}

fn emit(cli: &Cli, outcome: &Outcome) -> Result<usize> {
    let name = cli.command.name();
    let seed = cli.command.seed();
    let summary = output::summarize(name, seed, &outcome.rows);
    let mut json = serde_json::to_value(&summary)?;
    if let Some(d) = &outcome.details {
        json["details"] = d.clone();
    }
    let json = serde_json::to_string_pretty(&json)? + "\n";
    match &cli.out {
        Some(prefix) => {
            output::write_csv(&outcome.rows, std::fs::File::create(with_suffix(prefix, ".csv"))?)?;
            std::fs::write(with_suffix(prefix, ".json"), json)?;
        }
        None => {
            output::write_csv(&outcome.rows, std::io::stdout().lock())?;
            std::io::stderr().write_all(json.as_bytes())?;
        }
    }
    Ok(summary.violations)
}

fn run_parsed(cli: &Cli) -> Result<usize> {
    if let Command::ExportCode { builtin } = &cli.command {
        let codes = commands::builtin_codes(builtin)?;
        let text = codes.iter().map(code_json::code_to_json).collect::<Result<Vec<_>>>()?.join("\n") + "\n";
        match &cli.out {
            Some(prefix) => std::fs::write(with_suffix(prefix, ".json"), text)?,
            None => std::io::stdout().write_all(text.as_bytes())?,
        }
        return Ok(0);
    }
    if cli.jobs == 0 {
        return Err(Error::Config("--jobs must be positive".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outcome = pool.install(|| execute(cli))?;
    emit(cli, &outcome)
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run_parsed(&cli) {
        Ok(0) => 0,
        Ok(_) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
