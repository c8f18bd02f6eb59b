//! Experiment configuration: JSON schema, validation and problem assembly.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::oracles::NoiseSpec;
use crate::problems::{
    make_affine_inclusion, make_lasso, make_matrix_game, make_random_lasso, make_smoothed_saddle,
    monotone_affine_inclusion,
};
use crate::schedules::StepSchedule;
use crate::solvers::{RunProblem, SolverKind};
use crate::{Error, Matrix, Result, Vector, SQRT2_MINUS_ONE};

/// `{"csv": "path"}`, resolved relative to the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvRef {
    pub csv: PathBuf,
}

/// A matrix given inline as rows, or as a CSV file reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSource {
    Inline(Vec<Vec<f64>>),
    Csv(CsvRef),
}

/// A vector given inline, or as a one-row or one-column CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VectorSource {
    Inline(Vec<f64>),
    Csv(CsvRef),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// `A = ν·Id`, `B = Sx + b` with a random skew `S` of norm `skew_scale`.
    RandomAffine { dim: usize, nu: f64, skew_scale: f64, seed: u64 },
    /// `A = ν·Id`, `B = (S + P)x + b` with a given skew-symmetric `S` and
    /// optional symmetric positive semidefinite `P`.
    Affine {
        nu: f64,
        skew: MatrixSource,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        psd: Option<MatrixSource>,
        offset: VectorSource,
    },
    Lasso { design: MatrixSource, targets: VectorSource, lambda: f64 },
    RandomLasso { rows: usize, cols: usize, lambda: f64, seed: u64 },
    MatrixGame { payoff: MatrixSource },
    SmoothedGame { payoff: MatrixSource, beta: f64 },
}

impl ProblemSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ProblemSpec::RandomAffine { .. } => "random_affine",
            ProblemSpec::Affine { .. } => "affine",
            ProblemSpec::Lasso { .. } => "lasso",
            ProblemSpec::RandomLasso { .. } => "random_lasso",
            ProblemSpec::MatrixGame { .. } => "matrix_game",
            ProblemSpec::SmoothedGame { .. } => "smoothed_game",
        }
    }

    fn is_saddle(&self) -> bool {
        matches!(self, ProblemSpec::MatrixGame { .. } | ProblemSpec::SmoothedGame { .. })
    }

    fn is_composite(&self) -> bool {
        matches!(self, ProblemSpec::Lasso { .. } | ProblemSpec::RandomLasso { .. })
    }
}

fn default_noise() -> NoiseSpec {
    NoiseSpec::Exact
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_record_every() -> u64 {
    1
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub solver: SolverKind,
    /// Defaults to half the largest admissible constant step.
    #[serde(default)]
    pub schedule: Option<StepSchedule>,
    #[serde(default = "default_noise")]
    pub noise: NoiseSpec,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub budget: u64,
    #[serde(default = "default_record_every")]
    pub record_every: u64,
    #[serde(default)]
    pub stop_tol: Option<f64>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub x_prev: Option<Vec<f64>>,
    #[serde(default)]
    pub v0: Option<Vec<f64>>,
    #[serde(default)]
    pub v_prev: Option<Vec<f64>>,
    /// `[n_lo, n_hi]` for slope fits; defaults to `[budget/100, budget]`.
    #[serde(default)]
    pub fit_window: Option<[f64; 2]>,
    #[serde(default)]
    pub record_wall_time: bool,
    /// Run the pathwise inequality checks (exact reflected runs only).
    #[serde(default)]
    pub check_lemmas: bool,
    /// Directory relative paths resolve against; not part of the document.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = serde_json::from_str(text)?;
    validate(&config)?;
    Ok(config)
}

/// Reads a config file; relative paths inside resolve against its directory.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    let mut config = parse_config(&text)?;
    config.base_dir = path.parent().map(Path::to_path_buf);
    Ok(config)
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn validate(c: &ExperimentConfig) -> Result<()> {
    if c.seeds.is_empty() {
        return Err(config_error("seeds must be nonempty"));
    }
    if c.record_every == 0 {
        return Err(config_error("record_every must be at least 1"));
    }
    if let Some(tol) = c.stop_tol {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(config_error(format!("stop_tol must be positive, got {tol}")));
        }
    }
    if let Some([lo, hi]) = c.fit_window {
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(config_error(format!("fit_window needs 0 < lo < hi, got [{lo}, {hi}]")));
        }
    }
    if let Some(s) = &c.schedule {
        s.validate().map_err(|e| config_error(format!("schedule: {e}")))?;
    }
    match c.noise {
        NoiseSpec::Gaussian { variance } => {
            variance.validate().map_err(|e| config_error(format!("noise: {e}")))?
        }
        NoiseSpec::Minibatch { batch: 0 } => return Err(config_error("minibatch batch must be at least 1")),
        _ => {}
    }

    let saddle = c.problem.is_saddle();
    let composite = c.problem.is_composite();
    let kind = c.problem.kind();
    match c.solver {
        SolverKind::Spd if !saddle => {
            return Err(config_error(format!("solver spd requires a saddle problem, got {kind}")));
        }
        SolverKind::Srpg if !composite => {
            return Err(config_error(format!("solver srpg requires a composite (lasso) problem, got {kind}")));
        }
        s if s != SolverKind::Spd && saddle => {
            return Err(config_error(format!("solver {} requires an inclusion problem, got {kind}", s.name())));
        }
        _ => {}
    }
    if c.solver.is_deterministic() && !c.noise.is_exact() {
        return Err(config_error(format!("solver {} is deterministic and requires exact noise", c.solver.name())));
    }
    if matches!(c.noise, NoiseSpec::Minibatch { .. }) && !composite {
        return Err(config_error("minibatch noise requires a finite-sum (lasso) problem"));
    }
    if !saddle && (c.v0.is_some() || c.v_prev.is_some()) {
        return Err(config_error("v0 and v_prev apply only to saddle problems"));
    }
    if c.check_lemmas {
        let reflected = matches!(c.solver, SolverKind::Srfb | SolverKind::Rfb);
        if !(reflected && c.noise.is_exact()) {
            return Err(config_error("check_lemmas requires solver srfb or rfb with exact noise"));
        }
    }
    Ok(())
}

impl ExperimentConfig {
    /// The document with defaults applied, keys in canonical order.
    pub fn canonical_json(&self) -> Result<String> {
        // serde_json's default map type is ordered, so this sorts keys.
        let value = serde_json::to_value(self)?;
        Ok(serde_json::to_string(&value)?)
    }

    /// SHA-256 of the canonical document.
    pub fn digest(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.canonical_json()?.as_bytes())))
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        match &self.base_dir {
            Some(base) if path.is_relative() => base.join(path),
            _ => path.to_path_buf(),
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output)
    }

    fn matrix(&self, source: &MatrixSource) -> Result<Matrix> {
        match source {
            MatrixSource::Inline(rows) => matrix_from_rows(rows),
            MatrixSource::Csv(r) => {
                let path = self.resolve(&r.csv);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| config_error(format!("reading {}: {e}", path.display())))?;
                parse_matrix_csv(&text)
            }
        }
    }

    fn vector(&self, source: &VectorSource) -> Result<Vector> {
        match source {
            VectorSource::Inline(v) => vector_from(v, "vector"),
            VectorSource::Csv(r) => {
                let m = self.matrix(&MatrixSource::Csv(r.clone()))?;
                if m.nrows() != 1 && m.ncols() != 1 {
                    return Err(config_error(format!(
                        "{} is {}x{}, expected a single row or column",
                        r.csv.display(),
                        m.nrows(),
                        m.ncols()
                    )));
                }
                Ok(Vector::from_iterator(m.len(), m.iter().copied()))
            }
        }
    }

    /// Instantiates the configured problem.
    pub fn build_problem(&self) -> Result<RunProblem> {
        Ok(match &self.problem {
            ProblemSpec::RandomAffine { dim, nu, skew_scale, seed } => {
                RunProblem::Inclusion(make_affine_inclusion(*dim, *nu, *skew_scale, *seed)?)
            }
            ProblemSpec::Affine { nu, skew, psd, offset } => {
                let psd = psd.as_ref().map(|m| self.matrix(m)).transpose()?;
                RunProblem::Inclusion(monotone_affine_inclusion(*nu, self.matrix(skew)?, psd, self.vector(offset)?)?)
            }
            ProblemSpec::Lasso { design, targets, lambda } => {
                RunProblem::Composite(make_lasso(self.matrix(design)?, self.vector(targets)?, *lambda)?)
            }
            ProblemSpec::RandomLasso { rows, cols, lambda, seed } => {
                RunProblem::Composite(make_random_lasso(*rows, *cols, *lambda, *seed)?)
            }
            ProblemSpec::MatrixGame { payoff } => RunProblem::Saddle(make_matrix_game(self.matrix(payoff)?)?),
            ProblemSpec::SmoothedGame { payoff, beta } => {
                RunProblem::Saddle(make_smoothed_saddle(self.matrix(payoff)?, *beta)?)
            }
        })
    }

    /// The configured schedule, or half the largest admissible constant step.
    pub fn resolve_schedule(&self, problem: &RunProblem) -> Result<StepSchedule> {
        if let Some(s) = &self.schedule {
            return Ok(s.clone());
        }
        let bound = match problem {
            RunProblem::Saddle(p) => {
                let mu = 2.0 * p.mu_h().max(p.mu_l()) + p.norm_k;
                if mu > 0.0 { 1.0 / (2.0 * mu) } else { 1.0 }
            }
            _ => {
                let mu = problem.inclusion()?.mu;
                if mu > 0.0 { SQRT2_MINUS_ONE / mu } else { 1.0 }
            }
        };
        StepSchedule::constant(0.5 * bound)
    }

    pub fn fit_window(&self) -> (f64, f64) {
        match self.fit_window {
            Some([lo, hi]) => (lo, hi),
            None => ((self.budget as f64 / 100.0).max(1.0), self.budget as f64),
        }
    }
}

pub(crate) fn vector_from(v: &[f64], what: &str) -> Result<Vector> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(config_error(format!("{what} has non-finite entries")));
    }
    Ok(Vector::from_column_slice(v))
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let Some(first) = rows.first() else {
        return Err(config_error("matrix has no rows"));
    };
    let cols = first.len();
    if cols == 0 {
        return Err(config_error("matrix has no columns"));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != cols {
            return Err(config_error(format!("matrix row {i} has {} entries, expected {cols}", r.len())));
        }
        if r.iter().any(|x| !x.is_finite()) {
            return Err(config_error(format!("matrix row {i} has non-finite entries")));
        }
    }
    Ok(Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// Parses a dense matrix: one row per line, comma-separated, no header.
pub fn parse_matrix_csv(text: &str) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|field| {
                field
                    .parse::<f64>()
                    .map_err(|_| config_error(format!("line {}: cannot parse {field:?} as a number", i + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    matrix_from_rows(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "problem": {"kind": "random_affine", "dim": 3, "nu": 1.0, "skew_scale": 2.0, "seed": 1},
        "solver": "srfb",
        "budget": 10
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.seeds, vec![0]);
        assert_eq!(c.record_every, 1);
        assert_eq!(c.noise, NoiseSpec::Exact);
        assert!(c.schedule.is_none() && c.x_prev.is_none());
        assert_eq!(c.output, PathBuf::from("out"));
    }

    #[test]
    fn unknown_key_is_named() {
        let text = MINIMAL.replace("\"budget\": 10", "\"budget\": 10, \"bugdet\": 3");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("bugdet"), "{err}");
        assert!(err.is_validation());
    }

    #[test]
    fn spd_on_inclusion_is_rejected() {
        let text = MINIMAL.replace("\"srfb\"", "\"spd\"");
        let err = parse_config(&text).unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("spd requires a saddle problem")), "{err}");
    }

    #[test]
    fn other_compatibility_rules() {
        let cases = [
            MINIMAL.replace("\"srfb\"", "\"srpg\""),
            MINIMAL.replace("\"budget\": 10", "\"budget\": 10, \"seeds\": []"),
            MINIMAL.replace("\"budget\": 10", "\"budget\": 10, \"record_every\": 0"),
            MINIMAL.replace("\"srfb\"", "\"rfb\"").replace(
                "\"budget\": 10",
                "\"budget\": 10, \"noise\": {\"kind\": \"gaussian\", \"variance\": {\"kind\": \"constant\", \"c\": 1}}",
            ),
            MINIMAL.replace("\"budget\": 10", "\"budget\": 10, \"noise\": {\"kind\": \"minibatch\", \"batch\": 2}"),
            MINIMAL.replace("\"budget\": 10", "\"budget\": 10, \"v0\": [1]"),
        ];
        for text in cases {
            assert!(matches!(parse_config(&text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn digest_ignores_key_order_and_round_trips() {
        let a = parse_config(MINIMAL).unwrap();
        let b = parse_config(
            r#"{"budget": 10, "solver": "srfb",
                "problem": {"seed": 1, "skew_scale": 2.0, "nu": 1.0, "dim": 3, "kind": "random_affine"}}"#,
        )
        .unwrap();
        assert_eq!(a.digest().unwrap(), b.digest().unwrap());
        let again = parse_config(&a.canonical_json().unwrap()).unwrap();
        assert_eq!(again.digest().unwrap(), a.digest().unwrap());
        assert_eq!(again, a);
    }

    #[test]
    fn matrix_csv_parsing() {
        let m = parse_matrix_csv("1,2,3\n4, 5 ,6\n").unwrap();
        assert_eq!(m, Matrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        assert!(parse_matrix_csv("1,2\n3\n").is_err());
        assert!(parse_matrix_csv("1,x\n").is_err());
        assert!(parse_matrix_csv("").is_err());
        assert!(parse_matrix_csv("1,inf\n").is_err());
    }

    #[test]
    fn inline_and_csv_matrices_agree() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("m.csv"), "1,-1\n-1,1\n").unwrap();
        let text = r#"{"problem": {"kind": "matrix_game", "payoff": {"csv": "m.csv"}}, "solver": "spd", "budget": 1}"#;
        std::fs::write(dir.path().join("c.json"), text).unwrap();
        let c = load_config(&dir.path().join("c.json")).unwrap();
        let RunProblem::Saddle(p) = c.build_problem().unwrap() else { panic!() };
        assert_eq!(p.known_saddle.unwrap().0, Vector::from_column_slice(&[0.5, 0.5]));
    }

    #[test]
    fn default_schedule_is_admissible_constant() {
        let c = parse_config(MINIMAL).unwrap();
        let p = c.build_problem().unwrap();
        let mu = p.inclusion().unwrap().mu;
        match c.resolve_schedule(&p).unwrap() {
            StepSchedule::Constant { gamma } => assert!((gamma * mu - 0.5 * SQRT2_MINUS_ONE).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }
}
