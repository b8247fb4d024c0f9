use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use qtoroidal::toroidal::{PiConfig, RelationId};
use qtoroidal_cli::plan::{relation_job, SUITES};
use qtoroidal_cli::{parse, plan, run, Defaults, RunOptions};

const EXIT_MISMATCH: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

/// Exact checks of the toroidal relations in their Fock-space representation.
#[derive(Debug, Parser)]
#[command(name = "qtoroidal", version)]
struct Args {
    /// Check script to run.
    #[arg(long, value_name = "FILE", conflicts_with = "relation")]
    script: Option<PathBuf>,
    /// Run a single relation with the flag settings.
    #[arg(long, value_name = "ID")]
    relation: Option<String>,
    /// Default component window for checks that leave it out.
    #[arg(long, value_name = "N")]
    window: Option<i64>,
    /// Default largest basis-state degree.
    #[arg(long, value_name = "N")]
    max_degree: Option<u32>,
    /// Default largest |m| of Heisenberg modes.
    #[arg(long, value_name = "N")]
    modes: Option<i64>,
    /// Representation convention, e.g. uv=negated,flip=off.
    #[arg(long, value_name = "SPEC", default_value = "uv=asWritten,flip=on")]
    convention: String,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Worker threads for independent checks.
    #[arg(long, value_name = "N", default_value_t = 1)]
    jobs: usize,
    /// Seed for random state sampling and random test pairs.
    #[arg(long, value_name = "N", default_value_t = 0)]
    seed: u64,
    /// List relation ids and named checks, then exit.
    #[arg(long)]
    list: bool,
    /// Record per-check wall-clock time in the report.
    #[arg(long)]
    timing: bool,
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("qtoroidal: {msg}");
    ExitCode::from(EXIT_USAGE)
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.list {
        for id in RelationId::ALL {
            println!("{:<18} {}", id.to_string(), id.description());
        }
        for (name, what) in SUITES {
            println!("{name:<18} {what}");
        }
        return ExitCode::SUCCESS;
    }
    let config: PiConfig = match args.convention.parse() {
        Ok(c) => c,
        Err(e) => return usage(e),
    };
    let defaults = Defaults {
        window: args.window,
        max_degree: args.max_degree,
        modes: args.modes,
        config,
    };
    let jobs = if let Some(path) = &args.script {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("qtoroidal: cannot read {}: {e}", path.display());
                return ExitCode::from(EXIT_IO);
            }
        };
        match parse(&text).and_then(|s| plan(&s, &defaults)) {
            Ok(jobs) => jobs,
            Err(e) => return usage(format!("{}:{e}", path.display())),
        }
    } else if let Some(id) = &args.relation {
        match id.parse::<RelationId>() {
            Ok(id) => vec![relation_job(id, &defaults)],
            Err(e) => return usage(e),
        }
    } else {
        return usage("nothing to do: pass --script FILE, --relation ID or --list");
    };
    let opts = RunOptions {
        jobs: args.jobs,
        seed: args.seed,
        timing: args.timing,
    };
    let report = run(&jobs, &opts);
    match args.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&report).expect("reports serialize")),
        Format::Text => print!("{}", report.to_text()),
    }
    if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_MISMATCH)
    }
}
