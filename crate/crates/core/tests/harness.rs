use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

use reflected_fb::harness::{execute, load_config, parse_config, parse_summary, validate_config, CSV_HEADER};
use reflected_fb::problems::make_affine_inclusion;
use reflected_fb::schedules::{assess_inclusion, InclusionConstants, StepSchedule};
use reflected_fb::solvers::Admissibility;

const SCALAR: &str = r#"{
  "problem": {"kind": "affine", "nu": 0.0, "skew": [[0.0]], "psd": [[1.0]], "offset": [0.0]},
  "solver": "rfb",
  "schedule": {"kind": "constant", "gamma": 0.4},
  "budget": 2,
  "x0": [1.0]
}"#;

fn rfb(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rfb")).args(args).current_dir(dir).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn with_key(base: &str, key: &str, value: serde_json::Value) -> String {
    let mut doc: serde_json::Value = serde_json::from_str(base).unwrap();
    doc[key] = value;
    doc.to_string()
}

#[test]
fn scalar_recursion_csv_bytes() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "c.json", SCALAR);
    let out = rfb(&["run", "c.json"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/run_0_seed_0.csv")).unwrap();
    // x₁ = 0.6, x₂ = 0.52 against x̄ = 0; resid is |x_n − x_{n−1}|
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').take(4).map(|f| f.parse().unwrap()).collect())
        .collect();
    assert_eq!(csv.lines().next().unwrap(), CSV_HEADER);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], 1.0);
    assert!((rows[0][2] - 0.36).abs() < 1e-15 && (rows[0][3] - 0.4).abs() < 1e-15);
    assert!((rows[1][2] - 0.2704).abs() < 1e-15 && (rows[1][3] - 0.08).abs() < 1e-15);
    assert!(csv.ends_with(",0,,\n") && !csv.contains('\r'));
}

#[test]
fn budget_zero_writes_header_and_summary() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "c.json", &with_key(SCALAR, "budget", 0.into()));
    assert!(rfb(&["run", "c.json"], dir.path()).status.success());
    assert_eq!(fs::read_to_string(dir.path().join("out/run_0_seed_0.csv")).unwrap(), format!("{CSV_HEADER}\n"));
    let summary = parse_summary(&fs::read_to_string(dir.path().join("out/summary.json")).unwrap()).unwrap();
    assert_eq!(summary.seeds[0].records, 0);
}

#[test]
fn reruns_and_repeated_seeds_are_bytewise_identical() {
    let dir = TempDir::new().unwrap();
    let text = r#"{
      "problem": {"kind": "random_affine", "dim": 6, "nu": 1.0, "skew_scale": 2.0, "seed": 4},
      "solver": "srfb",
      "schedule": {"kind": "strongly_monotone", "nu": 1.0},
      "noise": {"kind": "gaussian", "variance": {"kind": "constant", "c": 1.0}},
      "seeds": [7, 7, 8],
      "budget": 300,
      "record_every": 7
    }"#;
    let path = write(dir.path(), "c.json", text);
    let config = load_config(&path).unwrap();
    execute(&config, false).unwrap();
    let read = |name: &str| fs::read(dir.path().join("out").join(name)).unwrap();
    let first = (read("run_0_seed_7.csv"), read("run_2_seed_8.csv"));
    assert_eq!(first.0, read("run_1_seed_7.csv"));
    assert_ne!(first.0, first.1);
    // ⌈300/7⌉ = 43 rows plus header
    assert_eq!(String::from_utf8(first.0.clone()).unwrap().lines().count(), 44);
    assert!(dir.path().join("out/mean_curve.csv").is_file());

    execute(&config, false).unwrap();
    assert_eq!(first, (read("run_0_seed_7.csv"), read("run_2_seed_8.csv")));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    write(p, "ok.json", SCALAR);
    // 0.5 > √2 − 1 for μ = 1
    write(p, "big_step.json", &with_key(SCALAR, "schedule", serde_json::json!({"kind": "constant", "gamma": 0.5})));
    write(p, "unknown.json", &with_key(SCALAR, "bogus_key", 1.into()));
    write(p, "spd.json", &with_key(SCALAR, "solver", "spd".into()));
    write(p, "broken.json", "{\"problem\": ");

    assert_eq!(rfb(&["validate", "ok.json"], p).status.code(), Some(0));
    assert_eq!(rfb(&["validate", "big_step.json"], p).status.code(), Some(1));

    let refused = rfb(&["run", "big_step.json"], p);
    assert_eq!(refused.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&refused.stderr).contains("tau"));
    assert_eq!(rfb(&["run", "big_step.json", "--force"], p).status.code(), Some(0));

    let unknown = rfb(&["validate", "unknown.json"], p);
    assert_eq!(unknown.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("bogus_key"));
    assert_eq!(rfb(&["validate", "spd.json"], p).status.code(), Some(1));
    assert_eq!(rfb(&["validate", "broken.json"], p).status.code(), Some(1));

    assert_eq!(rfb(&["run", "missing.json"], p).status.code(), Some(2));
    assert_eq!(rfb(&["report", "missing/summary.json"], p).status.code(), Some(2));
}

#[test]
fn report_and_sweep() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    let text = with_key(SCALAR, "seeds", serde_json::json!([0, 1]));
    let text = with_key(&text, "budget", 50.into());
    write(p, "c.json", &text);

    let sweep = rfb(&["sweep", "c.json", "--param", "schedule.gamma", "--values", "0.1,0.2"], p);
    assert!(sweep.status.success(), "{}", String::from_utf8_lossy(&sweep.stderr));
    let a = p.join("out/schedule.gamma=0.1/summary.json");
    let b = p.join("out/schedule.gamma=0.2/summary.json");
    let gamma = |path: &Path| {
        let s = parse_summary(&fs::read_to_string(path).unwrap()).unwrap();
        s.schedule.gamma(0)
    };
    assert_eq!((gamma(&a), gamma(&b)), (0.1, 0.2));

    let report = rfb(&["report", a.to_str().unwrap(), b.to_str().unwrap()], p);
    assert!(report.status.success());
    let table = String::from_utf8(report.stdout).unwrap();
    assert_eq!(table.lines().count(), 3);
    let dat = fs::read_to_string(p.join("out/schedule.gamma=0.1/dist_sq.dat")).unwrap();
    assert_eq!(dat.lines().count(), 50);
    assert_eq!(dat.lines().next().unwrap().split_whitespace().count(), 2);
}

#[test]
fn summary_verdicts_match_direct_validation() {
    let text = r#"{
      "problem": {"kind": "random_affine", "dim": 5, "nu": 0.5, "skew_scale": 3.0, "seed": 2},
      "solver": "srfb",
      "schedule": {"kind": "band", "c": 0.97, "gamma": 0.1},
      "noise": {"kind": "gaussian", "variance": {"kind": "power", "c": 1.0, "p": 2.0}},
      "budget": 10
    }"#;
    let config = parse_config(text).unwrap();
    let (_, verdict) = validate_config(&config).unwrap();
    let p = make_affine_inclusion(5, 0.5, 3.0, 2).unwrap();
    let direct = assess_inclusion(
        &StepSchedule::band(0.97, 0.1).unwrap(),
        InclusionConstants { mu: p.mu, nu_a: p.nu, nu_b: p.b.strong_monotonicity(), domain_bounded: false },
        Some(&reflected_fb::oracles::VarianceSchedule::Power { c: 1.0, p: 2.0 }),
    );
    match verdict {
        Admissibility::Inclusion(v) => assert_eq!(serde_json::to_value(v).unwrap(), serde_json::to_value(direct).unwrap()),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn config_round_trip_keeps_digest() {
    let config = parse_config(SCALAR).unwrap();
    let again = parse_config(&config.canonical_json().unwrap()).unwrap();
    assert_eq!(config.digest().unwrap(), again.digest().unwrap());
}

#[test]
fn shipped_configs_validate() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "json") {
            continue;
        }
        let config = load_config(&path).unwrap();
        config.build_problem().unwrap();
        let (_, verdict) = validate_config(&config).unwrap();
        // minibatch variance depends on the iterates, so only --force runs it
        let needs_force = path.file_name().unwrap() == "lasso_minibatch.json";
        assert_eq!(verdict.passed(), !needs_force, "{}", path.display());
        seen += 1;
    }
    assert!(seen >= 5);
}
