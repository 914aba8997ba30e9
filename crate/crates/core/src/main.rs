use std::collections::BTreeMap;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lckit::cli::{self, Exit, Report, Settings};

#[derive(Parser)]
#[command(name = "lckit", version, about = "Numerical checks of locally conformal Kähler identities")]
struct Args {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a check suite. Tolerances are overridden with --tol.<check>=<value>.
    Verify {
        /// Flat key = value file; command-line flags take precedence.
        #[arg(long)]
        config: Option<String>,
        /// Structure id; repeat for several.
        #[arg(long)]
        structure: Vec<String>,
        #[arg(long)]
        suite: Option<String>,
        /// Check name; repeat to replace the suite's check list.
        #[arg(long)]
        check: Vec<String>,
        #[arg(long)]
        samples: Option<String>,
        #[arg(long)]
        seed: Option<String>,
        /// Report path; the JSON report goes to stdout otherwise.
        #[arg(long)]
        out: Option<String>,
        /// Worker threads (default from LCKIT_JOBS, else all cores).
        #[arg(long)]
        jobs: Option<String>,
    },
    /// List structures, suites and checks.
    List {
        #[arg(long)]
        json: bool,
    },
    /// Compare two reports, ignoring wall times.
    ReportDiff {
        first: String,
        second: String,
        /// Relative tolerance on residual differences.
        #[arg(long, default_value_t = 0.0)]
        rel_tol: f64,
    },
}

/// Removes `--tol.<check>=<v>` and `--tol.<check> <v>` from the argument list.
fn split_tolerances(raw: Vec<String>) -> Result<(Vec<String>, BTreeMap<String, String>), String> {
    let mut rest = Vec::new();
    let mut tols = BTreeMap::new();
    let mut it = raw.into_iter();
    while let Some(a) = it.next() {
        let Some(rest) = a.strip_prefix("--tol.") else {
            rest.push(a);
            continue;
        };
        let (name, value) = match rest.split_once('=') {
            Some((n, v)) => (n.to_string(), v.to_string()),
            None => (rest.to_string(), it.next().ok_or_else(|| format!("--tol.{rest} needs a value"))?),
        };
        tols.insert(name, value);
    }
    Ok((rest, tols))
}

fn config_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(Exit::ConfigError as u8)
}

fn main() -> ExitCode {
    let (argv, tolerances) = match split_tolerances(std::env::args().collect()) {
        Ok(x) => x,
        Err(e) => return config_error(e),
    };
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(Exit::ConfigError as u8);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match args.cmd {
        Cmd::Verify { config, structure, suite, check, samples, seed, out, jobs } => {
            let base = match config {
                Some(path) => match std::fs::read_to_string(&path) {
                    Ok(text) => match Settings::parse_file(&text) {
                        Ok(s) => s,
                        Err(e) => return config_error(format!("{path}: {e}")),
                    },
                    Err(e) => return config_error(format!("{path}: {e}")),
                },
                None => Settings::default(),
            };
            let over = Settings { structures: structure, suite, checks: check, samples, seed, tolerances, out, jobs };
            let cfg = match base.overlay(over).into_config(std::env::var(cli::JOBS_ENV).ok()) {
                Ok(c) => c,
                Err(e) => return config_error(e),
            };
            let report = match cli::run_suite(&cfg) {
                Ok(r) => r,
                Err(e) => return config_error(e),
            };
            match &cfg.out {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, report.to_json() + "\n") {
                        return config_error(format!("{}: {e}", path.display()));
                    }
                }
                None => println!("{}", report.to_json()),
            }
            eprintln!("{}", cli::summary(&report));
            ExitCode::from(report.exit() as u8)
        }
        Cmd::List { json } => {
            let listing = cli::list_gallery();
            if json {
                println!("{}", serde_json::to_string_pretty(&listing).expect("listing serializes"));
            } else {
                print!("{}", listing.text());
            }
            ExitCode::SUCCESS
        }
        Cmd::ReportDiff { first, second, rel_tol } => {
            let load = |p: &str| std::fs::read_to_string(p).map_err(|e| format!("{p}: {e}")).and_then(|t| Report::from_json(&t).map_err(|e| format!("{p}: {e}")));
            let (a, b) = match (load(&first), load(&second)) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(e), _) | (_, Err(e)) => return config_error(e),
            };
            let diffs = cli::report_diff(&a, &b, rel_tol);
            for d in &diffs {
                println!("{} {}: {}", d.structure, d.check, d.detail);
            }
            if diffs.is_empty() {
                println!("reports agree");
                ExitCode::SUCCESS
            } else {
                ExitCode::from(Exit::CheckFailure as u8)
            }
        }
    }
}
