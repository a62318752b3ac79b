use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sfpe_cli::{compare, run, ExperimentConfig, Report};

const BASE: &str = r#"
[grid]
dim = 1
n = 512

[exponents]
alpha = 0.25
beta = 0.3
"#;

fn sfpe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sfpe"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn zero_drift_linear_run_passes_and_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "heat.toml", &format!("experiment = \"solve-linear\"\n{BASE}"));
    let out = tmp.path().join("run");
    let o = sfpe(&["solve-linear", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("PASS   heat_flow_exactness"), "{stdout}");
    for f in ["config.toml", "report.json", "checks.json", "mass_trace.csv", "contraction.csv", "solution.bin", "drift.bin"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let echo = ExperimentConfig::load(&out.join("config.toml")).unwrap();
    assert_eq!(echo, ExperimentConfig::load(&cfg).unwrap());
}

#[test]
fn exponent_violation_is_a_configuration_error() {
    let tmp = tempfile::tempdir().unwrap();
    let body = format!("experiment = \"solve-linear\"\n{}", BASE.replace("alpha = 0.25", "alpha = 0.35"));
    let cfg = write_config(tmp.path(), "bad.toml", &body);
    let o = sfpe(&["solve-linear", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("r").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("0 < alpha < beta < 1/2"), "{}", stderr(&o));
}

#[test]
fn schema_violation_names_the_key_path() {
    let tmp = tempfile::tempdir().unwrap();
    let body = format!("experiment = \"solve-linear\"\n{BASE}\n[solver]\ntime_steps = \"many\"\n");
    let cfg = write_config(tmp.path(), "bad.toml", &body);
    let o = sfpe(&["solve-linear", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("solver.time_steps"), "{}", stderr(&o));
}

#[test]
fn subcommand_must_match_the_configured_experiment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "heat.toml", &format!("experiment = \"solve-linear\"\n{BASE}"));
    let o = sfpe(&["particles", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failing_check_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let body = format!(
        "experiment = \"particles\"\n{BASE}\n[solver]\ntime_steps = 20\n\n[particles]\ncounts = [50]\nsteps = 20\nmollification = 16\n"
    );
    let cfg = write_config(tmp.path(), "few.toml", &body);
    let o = sfpe(&["particles", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("r").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL   particle_l1"));
}

fn sampled(extra: &str) -> String {
    format!(
        "experiment = \"solve-nonlinear\"\nseed = 4\n{BASE}\n[drift]\nkind = \"sampled\"\nbeta = 0.3\nband_limit = 8.0\ncalibrate_to = 1.0\n{extra}\n[solver]\nuniqueness_probe = false\n"
    )
}

#[test]
fn compare_reports_zero_for_identical_runs_and_nonzero_otherwise() {
    let tmp = tempfile::tempdir().unwrap();
    let a = ExperimentConfig::from_toml(&sampled(""), Path::new("a")).unwrap();
    let mut b = a.clone();
    b.seed = 5;
    let (da, db, dc) = (tmp.path().join("a"), tmp.path().join("a2"), tmp.path().join("b"));
    run(&a, &da).unwrap();
    run(&a, &db).unwrap();
    run(&b, &dc).unwrap();
    let same = compare(&da, &db).unwrap();
    assert!(same.identical);
    assert!(same.files.iter().all(|f| f.holder_beta == Some(0.0) && f.l1 == Some(0.0)));
    let diff = compare(&da, &dc).unwrap();
    assert!(!diff.identical);
    assert!(diff.files.iter().all(|f| f.holder_beta.unwrap() > 0.0));

    let o = sfpe(&["compare", da.to_str().unwrap(), dc.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("identical=false"));
}

#[test]
fn compare_of_mollified_run_matches_continuity_entry() {
    let tmp = tempfile::tempdir().unwrap();
    let rough = ExperimentConfig::from_toml(&sampled(""), Path::new("r")).unwrap();
    let smooth = ExperimentConfig::from_toml(&sampled("mollify = 64"), Path::new("s")).unwrap();
    let mut cont = rough.clone();
    cont.experiment = sfpe_cli::ExperimentKind::ContinuityExperiment;
    cont.continuity.levels = vec![64];
    run(&rough, &tmp.path().join("rough")).unwrap();
    run(&smooth, &tmp.path().join("smooth")).unwrap();
    let entry = match run(&cont, &tmp.path().join("cont")).unwrap().report {
        Report::ContinuityExperiment(r) => r.solution_differences[0],
        other => panic!("{other:?}"),
    };
    let cmp = compare(&tmp.path().join("rough"), &tmp.path().join("smooth")).unwrap();
    let sol = cmp.files.iter().find(|f| f.name == "solution.bin").unwrap();
    let got = sol.holder_beta.unwrap();
    assert!((got - entry).abs() <= 1e-12 * entry, "{got} vs {entry}");
}

#[test]
fn seed_flag_overrides_configuration() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "s.toml", &sampled("").replace("solve-nonlinear", "solve-linear").replace("\n[solver]\nuniqueness_probe = false\n", ""));
    let out = tmp.path().join("r");
    let o = sfpe(&["solve-linear", "--config", cfg.to_str().unwrap(), "--seed", "99", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(ExperimentConfig::load(&out.join("config.toml")).unwrap().seed, 99);
}

#[test]
fn compare_handles_terminal_snapshots_and_raw_ensembles() {
    let tmp = tempfile::tempdir().unwrap();
    let body = format!(
        "experiment = \"particles\"\nseed = 2\n{BASE}\n[solver]\ntime_steps = 20\n\n[particles]\ncounts = [500]\nsteps = 20\nmollification = 16\nrecord_every = 10\npersist = true\n"
    );
    let cfg = ExperimentConfig::from_toml(&body, Path::new("p")).unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run(&cfg, &a).unwrap();
    run(&cfg, &b).unwrap();
    let r = compare(&a, &b).unwrap();
    assert!(r.identical);
    let names: Vec<&str> = r.files.iter().map(|f| f.name.as_str()).collect();
    assert!(names.contains(&"kde_n500.bin") && names.contains(&"ensemble_n500_step20.f64"), "{names:?}");
    assert!(r.files.iter().all(|f| f.l1 == Some(0.0) || f.max_abs == Some(0.0)));
}
