//! `punctum`: render escape classifications, print maximum modulus
//! sequences, classify single points and run the verification suite.
//!
//! Any config key can be overridden on the command line with
//! `--section.key value` or `--section.key=value`.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{RawConfig, RunConfig};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "punctum", version, about = "Dynamics of analytic self-maps of the punctured plane")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Args)]
struct Common {
    /// Config file.
    config: PathBuf,
    /// Worker threads, or `auto`.
    #[arg(long)]
    threads: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Classify the window; write the PPM, fate grid and sidecar.
    Render(Common),
    /// Print the maximum modulus sequence as CSV.
    Mmseq {
        #[command(flatten)]
        common: Common,
        /// Itinerary such as `(0)*`; defaults to the first configured one.
        #[arg(long)]
        itinerary: Option<String>,
        /// Start radius; defaults to `classify.r_start`.
        #[arg(long = "r")]
        r: Option<f64>,
        #[arg(long, default_value_t = 4)]
        depth: usize,
    },
    /// Run the configured checks; exit 1 if any fails.
    Verify(Common),
    /// Classify one point, given as a complex literal such as `-1 + 2i`.
    Classify {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        point: String,
    },
}

/// Splits `--section.key value` pairs off the argument list.
fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Vec<(String, String)>), CliError> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let Some(flag) = a.strip_prefix("--").filter(|f| f.split('=').next().is_some_and(|k| k.contains('.'))) else {
            rest.push(a);
            continue;
        };
        match flag.split_once('=') {
            Some((k, v)) => overrides.push((k.to_string(), v.to_string())),
            None => {
                let v = it.next().ok_or_else(|| CliError::Config(format!("--{flag} needs a value")))?;
                overrides.push((flag.to_string(), v));
            }
        }
    }
    Ok((rest, overrides))
}

fn load(common: &Common, overrides: &[(String, String)]) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", common.config.display())))?;
    let mut raw = RawConfig::parse(&text)?;
    for (k, v) in overrides {
        raw.set(k, v)?;
    }
    if let Some(t) = &common.threads {
        raw.set("threads", t)?;
    }
    if let Some(s) = common.seed {
        raw.set("seed", &s.to_string())?;
    }
    RunConfig::from_raw(raw)
}

fn run(cmd: Cmd, overrides: &[(String, String)]) -> Result<(), CliError> {
    match cmd {
        Cmd::Render(common) => {
            for p in commands::render(&load(&common, overrides)?)? {
                println!("wrote {}", p.display());
            }
        }
        Cmd::Mmseq { common, itinerary, r, depth } => {
            print!("{}", commands::mmseq(&load(&common, overrides)?, itinerary.as_deref(), r, depth)?);
        }
        Cmd::Verify(common) => {
            let (lines, failed) = commands::verify(&load(&common, overrides)?)?;
            for l in lines {
                println!("{l}");
            }
            if failed {
                return Err(CliError::VerificationFailed);
            }
        }
        Cmd::Classify { common, point } => {
            println!("{}", commands::classify(&load(&common, overrides)?, &point)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let result = split_overrides(std::env::args().collect()).and_then(|(args, overrides)| {
        let cli = Cli::parse_from(args);
        run(cli.cmd, &overrides)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !matches!(e, CliError::VerificationFailed) {
                eprintln!("punctum: {e}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
