use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use reflected_fb::harness::{execute, load_config, report, sweep, validate_config, RunSummary};
use reflected_fb::schedules::{AdmissibilityReport, Verdict};
use reflected_fb::solvers::Admissibility;
use reflected_fb::Error;

/// Reflected forward-backward experiments.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of a config and write CSVs and summary.json.
    Run {
        config: PathBuf,
        /// Run even when no convergence guarantee applies.
        #[arg(long)]
        force: bool,
    },
    /// Check a config and print which guarantees its schedule meets.
    Validate { config: PathBuf },
    /// Tabulate fitted slopes and write gnuplot data files.
    Report {
        #[arg(required = true)]
        summaries: Vec<PathBuf>,
    },
    /// Run a config once per value of a (dotted) key.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        param: String,
        /// Comma-separated values, each parsed as JSON when possible.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        force: bool,
    },
}

fn print_report(out: &mut String, title: &str, report: &AdmissibilityReport) {
    let status = if report.passed() { "holds" } else { "does not hold" };
    let _ = writeln!(out, "{title}: {status}");
    for c in &report.checks {
        let mark = match c.verdict {
            Verdict::Pass => "ok",
            Verdict::Fail => "FAIL",
            Verdict::Undecidable => "??",
        };
        let _ = writeln!(out, "  [{mark:>4}] {}: {}", c.name, c.reason);
    }
}

fn print_admissibility(out: &mut String, a: &Admissibility) {
    match a {
        Admissibility::Inclusion(i) => {
            print_report(out, "weak convergence", &i.weak_convergence);
            print_report(out, "strong convergence", &i.strong_convergence);
            print_report(out, "log rate", &i.log_rate);
        }
        Admissibility::PrimalDual(r) => print_report(out, "ergodic gap bound", r),
    }
}

fn print_summary(out: &mut String, s: &RunSummary) {
    let _ = writeln!(out, "digest {}", s.config_digest);
    for seed in &s.seeds {
        let last = seed.final_record.as_ref();
        let _ = writeln!(
            out,
            "seed {:>4}: {:?}, {} records, resid {}",
            seed.seed,
            seed.termination,
            seed.records,
            last.map_or("-".into(), |r| format!("{:.3e}", r.resid))
        );
    }
    for r in &s.rates {
        let _ = match r.fit {
            Some(f) => writeln!(out, "{} slope {:.3} over {:?}", r.metric.name(), f.slope, r.window),
            None => writeln!(out, "{} slope n/a: {}", r.metric.name(), r.note.as_deref().unwrap_or("")),
        };
    }
}

fn dispatch(cli: Cli, out: &mut String) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Run { config, force } => {
            let summary = execute(&load_config(&config)?, force)?;
            print_summary(out, &summary);
        }
        Command::Validate { config } => {
            let config = load_config(&config)?;
            let (schedule, verdict) = validate_config(&config)?;
            let _ = writeln!(out, "schedule {schedule:?}");
            print_admissibility(out, &verdict);
            if !verdict.passed() {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Report { summaries } => out.push_str(&report(&summaries)?),
        Command::Sweep { config, param, values, force } => {
            for (value, summary) in sweep(&config, &param, &values, force)? {
                let _ = writeln!(out, "== {param} = {value}");
                print_summary(out, &summary);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let mut out = String::new();
    let result = dispatch(Cli::parse(), &mut out);
    // a closed pipe is not an error worth reporting
    let _ = std::io::stdout().lock().write_all(out.as_bytes());
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
