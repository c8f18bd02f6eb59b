//! Seeded experiment execution and result persistence.
//!
//! A run directory holds one `run_<index>_seed_<seed>.csv` per seed,
//! `summary.json`, and `mean_curve.csv` when there are at least two seeds.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{
    load_config, parse_config, parse_matrix_csv, CsvRef, ExperimentConfig, MatrixSource, ProblemSpec, VectorSource,
};

use crate::diagnostics::{
    aggregate_expectation, check_lemma_main, check_lemma_qes, check_t_lower_bound, fit_rate, InequalityReport,
    MeanPoint, Metric, RateFit, RunRecord,
};
use crate::schedules::StepSchedule;
use crate::solvers::{admissibility, run, Admissibility, RunProblem, RunSettings, RunSpec, SolverKind, Termination};
use crate::{Error, Result};

pub const CSV_HEADER: &str = "n,gamma,dist_sq,resid,draw_err_sq,ergodic_gap,wall_ns";
pub const SUMMARY_FILE: &str = "summary.json";
pub const MEAN_CURVE_FILE: &str = "mean_curve.csv";

const CURVE_METRICS: [Metric; 4] = [Metric::DistSq, Metric::Resid, Metric::DrawErrSq, Metric::ErgodicGap];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaSummary {
    pub name: String,
    pub checked: usize,
    /// Iterations where the inequality is claimed.
    pub claimed: usize,
    pub violations: usize,
    pub min_slack: Option<f64>,
}

impl LemmaSummary {
    fn from_reports(name: &str, reports: &[InequalityReport]) -> Self {
        let claimed: Vec<&InequalityReport> = reports.iter().filter(|r| r.precondition_met).collect();
        LemmaSummary {
            name: name.into(),
            checked: reports.len(),
            claimed: claimed.len(),
            violations: claimed.iter().filter(|r| !r.pass).count(),
            min_slack: claimed.iter().map(|r| r.slack).reduce(f64::min),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub index: usize,
    pub seed: u64,
    pub csv: String,
    pub termination: Termination,
    pub records: usize,
    pub final_record: Option<RunRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lemmas: Vec<LemmaSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub metric: Metric,
    pub window: [f64; 2],
    pub fit: Option<RateFit>,
    /// Slope the theory predicts, when one applies.
    pub target: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_digest: String,
    pub problem: String,
    pub solver: SolverKind,
    pub schedule: StepSchedule,
    pub admissibility: Admissibility,
    pub forced: bool,
    pub seeds: Vec<SeedSummary>,
    pub mean_curve: Option<String>,
    pub rates: Vec<RateSummary>,
    pub wall_ns: u64,
}

impl RunSummary {
    pub fn all_lemmas_hold(&self) -> bool {
        self.seeds.iter().flat_map(|s| &s.lemmas).all(|l| l.violations == 0)
    }
}

/// Parses a `summary.json` document.
pub fn parse_summary(text: &str) -> Result<RunSummary> {
    Ok(serde_json::from_str(text)?)
}

fn base_spec<'a>(
    config: &ExperimentConfig,
    problem: &'a RunProblem,
    schedule: &'a StepSchedule,
    seed: u64,
    force: bool,
) -> Result<RunSpec<'a>> {
    let vec = |v: &Option<Vec<f64>>, what| v.as_deref().map(|v| config::vector_from(v, what)).transpose();
    Ok(RunSpec {
        solver: config.solver,
        problem,
        schedule,
        noise: config.noise,
        seed,
        x0: vec(&config.x0, "x0")?,
        x_prev: vec(&config.x_prev, "x_prev")?,
        v0: vec(&config.v0, "v0")?,
        v_prev: vec(&config.v_prev, "v_prev")?,
        settings: RunSettings {
            budget: config.budget,
            record_every: config.record_every,
            stop_tol: config.stop_tol,
            force,
            record_wall_time: config.record_wall_time,
            keep_trajectory: config.check_lemmas,
        },
    })
}

/// Builds the problem and evaluates which guarantees the configuration meets.
pub fn validate_config(config: &ExperimentConfig) -> Result<(StepSchedule, Admissibility)> {
    let problem = config.build_problem()?;
    let schedule = config.resolve_schedule(&problem)?;
    let verdict = admissibility(&base_spec(config, &problem, &schedule, 0, true)?)?;
    Ok((schedule, verdict))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Per-seed CSV body, header included.
pub fn records_csv(records: &[RunRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.n,
            r.gamma,
            fmt_opt(r.dist_sq),
            r.resid,
            fmt_opt(r.draw_err_sq),
            fmt_opt(r.ergodic_gap),
            r.wall_ns.map(|w| w.to_string()).unwrap_or_default()
        );
    }
    out
}

fn lemma_summaries(
    outcome: &crate::solvers::RunOutcome,
    problem: &RunProblem,
    schedule: &StepSchedule,
) -> Result<Vec<LemmaSummary>> {
    let Some(traj) = &outcome.trajectory else {
        return Ok(Vec::new());
    };
    let p = problem.inclusion()?;
    let x_ref = p
        .known_zero
        .clone()
        .ok_or_else(|| Error::NotComputable("lemma checks need a known zero".into()))?;
    Ok(vec![
        LemmaSummary::from_reports("energy estimate", &check_lemma_main(traj, &p, &x_ref)?),
        LemmaSummary::from_reports("lipschitz estimate", &check_lemma_qes(traj, p.b.as_ref(), p.mu)?),
        LemmaSummary::from_reports(
            "T_n lower bound",
            &check_t_lower_bound(traj, p.b.as_ref(), &x_ref, schedule, p.mu)?,
        ),
    ])
}

/// Longest prefix on which every run shares the same `n` grid.
fn common_prefix(runs: &[Vec<RunRecord>]) -> usize {
    let shortest = runs.iter().map(Vec::len).min().unwrap_or(0);
    (0..shortest).take_while(|&i| runs.iter().all(|r| r[i].n == runs[0][i].n)).count()
}

fn mean_curves(runs: &[Vec<RunRecord>]) -> Result<Vec<(Metric, Vec<MeanPoint>)>> {
    let len = common_prefix(runs);
    let slices: Vec<&[RunRecord]> = runs.iter().map(|r| &r[..len]).collect();
    let mut curves = Vec::new();
    for metric in CURVE_METRICS {
        match aggregate_expectation(&slices, metric) {
            Ok(points) => curves.push((metric, points)),
            Err(Error::NotComputable(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(curves)
}

fn mean_curve_csv(curves: &[(Metric, Vec<MeanPoint>)]) -> String {
    let mut out = String::from("n");
    for m in CURVE_METRICS {
        let _ = write!(out, ",{0}_mean,{0}_stderr", m.name());
    }
    out.push('\n');
    let len = curves.first().map_or(0, |c| c.1.len());
    for i in 0..len {
        let _ = write!(out, "{}", curves[0].1[i].n);
        for m in CURVE_METRICS {
            match curves.iter().find(|c| c.0 == m) {
                Some((_, pts)) => {
                    let _ = write!(out, ",{},{}", pts[i].mean, pts[i].stderr);
                }
                None => out.push_str(",,"),
            }
        }
        out.push('\n');
    }
    out
}

fn rate_target(metric: Metric, schedule: &StepSchedule) -> Option<f64> {
    match metric {
        Metric::DistSq if matches!(schedule, StepSchedule::StronglyMonotone { .. }) => Some(-1.0),
        Metric::ErgodicGap => Some(-1.0),
        _ => None,
    }
}

fn rates(
    series: &[(Metric, Vec<(f64, f64)>)],
    window: (f64, f64),
    schedule: &StepSchedule,
) -> Vec<RateSummary> {
    series
        .iter()
        .filter(|(m, _)| matches!(m, Metric::DistSq | Metric::ErgodicGap))
        .map(|(metric, pts)| {
            let (fit, note) = match fit_rate(pts, window) {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            };
            RateSummary { metric: *metric, window: [window.0, window.1], fit, target: rate_target(*metric, schedule), note }
        })
        .collect()
}

/// Runs every seed, writes the artifacts and returns the summary.
pub fn execute(config: &ExperimentConfig, force: bool) -> Result<RunSummary> {
    let started = Instant::now();
    let problem = config.build_problem()?;
    let schedule = config.resolve_schedule(&problem)?;
    let verdict = admissibility(&base_spec(config, &problem, &schedule, 0, true)?)?;
    if !verdict.passed() && !force {
        return Err(Error::Inadmissible(verdict.describe_failures()));
    }
    let out_dir = config.output_dir();
    fs::create_dir_all(&out_dir)?;

    let per_seed: Vec<(SeedSummary, Vec<RunRecord>)> = config
        .seeds
        .par_iter()
        .enumerate()
        .map(|(index, &seed)| {
            let spec = base_spec(config, &problem, &schedule, seed, true)?;
            let outcome = run(&spec)?;
            let csv = format!("run_{index}_seed_{seed}.csv");
            fs::write(out_dir.join(&csv), records_csv(&outcome.records))?;
            let lemmas = lemma_summaries(&outcome, &problem, &schedule)?;
            let summary = SeedSummary {
                index,
                seed,
                csv,
                termination: outcome.termination,
                records: outcome.records.len(),
                final_record: outcome.records.last().cloned(),
                lemmas,
            };
            Ok((summary, outcome.records))
        })
        .collect::<Result<_>>()?;
    let (seeds, runs): (Vec<SeedSummary>, Vec<Vec<RunRecord>>) = per_seed.into_iter().unzip();

    let (mean_curve, series): (Option<String>, Vec<(Metric, Vec<(f64, f64)>)>) = if runs.len() >= 2 {
        let curves = mean_curves(&runs)?;
        fs::write(out_dir.join(MEAN_CURVE_FILE), mean_curve_csv(&curves))?;
        let series = curves
            .into_iter()
            .map(|(m, pts)| (m, pts.iter().map(|p| (p.n as f64, p.mean)).collect()))
            .collect();
        (Some(MEAN_CURVE_FILE.to_string()), series)
    } else {
        let series = CURVE_METRICS
            .iter()
            .filter_map(|&m| {
                let pts: Option<Vec<(f64, f64)>> = runs[0].iter().map(|r| m.get(r).map(|v| (r.n as f64, v))).collect();
                pts.filter(|p| !p.is_empty()).map(|p| (m, p))
            })
            .collect();
        (None, series)
    };

    let summary = RunSummary {
        config_digest: config.digest()?,
        problem: config.problem.kind().to_string(),
        solver: config.solver,
        rates: rates(&series, config.fit_window(), &schedule),
        schedule,
        admissibility: verdict,
        forced: force,
        seeds,
        mean_curve,
        wall_ns: started.elapsed().as_nanos() as u64,
    };
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    fs::write(out_dir.join(SUMMARY_FILE), json)?;
    Ok(summary)
}

/// Reads one column of a CSV with a header row as `(n, value)` pairs,
/// skipping empty fields.
fn read_curve(path: &Path, column: &str) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let idx = headers
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| Error::Config(format!("{} has no column {column}", path.display())))?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let (n, v) = (record.get(0).unwrap_or(""), record.get(idx).unwrap_or(""));
        if v.is_empty() {
            continue;
        }
        let parse = |s: &str| s.parse::<f64>().map_err(|_| Error::Config(format!("{}: bad number {s:?}", path.display())));
        out.push((parse(n)?, parse(v)?));
    }
    Ok(out)
}

fn fmt_rate(rate: Option<&RateSummary>) -> String {
    match rate {
        None => "-".into(),
        Some(r) => {
            let slope = r.fit.map_or("n/a".to_string(), |f| format!("{:.3}", f.slope));
            match r.target {
                Some(t) => format!("{slope} (target {t})"),
                None => slope,
            }
        }
    }
}

fn termination_counts(seeds: &[SeedSummary]) -> String {
    let (mut budget, mut conv, mut div) = (0, 0, 0);
    for s in seeds {
        match s.termination {
            Termination::Budget => budget += 1,
            Termination::Converged { .. } => conv += 1,
            Termination::Diverged { .. } => div += 1,
        }
    }
    format!("{budget}/{conv}/{div}")
}

/// Formats a table of fitted slopes and writes `<metric>.dat` curve files
/// (`n value` per line) next to each summary.
pub fn report(paths: &[PathBuf]) -> Result<String> {
    if paths.is_empty() {
        return Err(Error::Config("report needs at least one summary file".into()));
    }
    let missing: Vec<PathBuf> = paths.iter().filter(|p| !p.is_file()).cloned().collect();
    if !missing.is_empty() {
        return Err(Error::MissingFiles(missing));
    }
    let mut table = format!(
        "{:<40} {:<6} {:>5} {:>11}  {:<24} {:<24}\n",
        "summary", "solver", "seeds", "bud/conv/div", "dist_sq slope", "ergodic_gap slope"
    );
    for path in paths {
        let summary = parse_summary(&fs::read_to_string(path)?)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let source = match (&summary.mean_curve, summary.seeds.first()) {
            (Some(mean), _) => Some((dir.join(mean), "_mean")),
            (None, Some(seed)) => Some((dir.join(&seed.csv), "")),
            (None, None) => None,
        };
        if let Some((csv, suffix)) = source {
            for metric in CURVE_METRICS {
                let curve = read_curve(&csv, &format!("{}{suffix}", metric.name()))?;
                if curve.is_empty() {
                    continue;
                }
                let mut dat = String::new();
                for (n, v) in curve {
                    let _ = writeln!(dat, "{n} {v}");
                }
                fs::write(dir.join(format!("{}.dat", metric.name())), dat)?;
            }
        }
        let rate = |m: Metric| summary.rates.iter().find(|r| r.metric == m);
        let _ = writeln!(
            table,
            "{:<40} {:<6} {:>5} {:>11}  {:<24} {:<24}",
            path.display(),
            summary.solver.name(),
            summary.seeds.len(),
            termination_counts(&summary.seeds),
            fmt_rate(rate(Metric::DistSq)),
            fmt_rate(rate(Metric::ErgodicGap)),
        );
    }
    Ok(table)
}

/// Sets `key` (dotted path) in a JSON document.
fn set_dotted(doc: &mut serde_json::Value, key: &str, value: serde_json::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| Error::Config(format!("bad key {key:?}")))?;
    let mut node = doc;
    for part in parts {
        node = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("{key}: {part} is not inside an object")))?
            .entry(part)
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    node.as_object_mut()
        .ok_or_else(|| Error::Config(format!("{key}: parent is not an object")))?
        .insert(last.to_string(), value);
    Ok(())
}

/// Executes the config once per value of `key`, each into
/// `<output>/<key>=<value>`.
pub fn sweep(config_path: &Path, key: &str, values: &[String], force: bool) -> Result<Vec<(String, RunSummary)>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let text = fs::read_to_string(config_path)?;
    let doc: serde_json::Value = serde_json::from_str(&text)?;
    let base_dir = config_path.parent().map(Path::to_path_buf);
    let output = doc.get("output").and_then(|o| o.as_str()).unwrap_or("out").to_string();
    let mut out = Vec::with_capacity(values.len());
    for raw in values {
        let value = serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.clone()));
        let mut doc = doc.clone();
        set_dotted(&mut doc, key, value)?;
        let label: String = format!("{key}={raw}")
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || "._=-".contains(c) { c } else { '_' })
            .collect();
        set_dotted(&mut doc, "output", serde_json::Value::String(format!("{output}/{label}")))?;
        let mut config = parse_config(&serde_json::to_string(&doc)?)?;
        config.base_dir = base_dir.clone();
        out.push((raw.clone(), execute(&config, force)?));
    }
    Ok(out)
}
