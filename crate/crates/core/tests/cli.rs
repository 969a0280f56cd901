use std::io::Write;
use std::process::Command;

use lqe_core::SimulationReport;

fn lqe() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lqe"));
    cmd.env_remove("LQE_SEED");
    cmd
}

fn write_csv(dir: &tempfile::TempDir, name: &str, rows: &[[f64; 3]]) -> std::path::PathBuf {
    let path = dir.path().join(name);
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "first,second,third").unwrap();
    for r in rows {
        writeln!(f, "{},{},{}", r[0], r[1], r[2]).unwrap();
    }
    path
}

fn null_rows(n: usize) -> Vec<[f64; 3]> {
    let spec =
        lqe_core::DependenceSpec::independent(lqe_core::Family::Normal { mean: 0.0, sd: 1.0 });
    let data = lqe_core::gen_c_sample(&spec, n, 77).unwrap();
    data.rows().map(|r| [r[0], r[1], r[2]]).collect()
}

#[test]
fn test_command_is_reproducible_with_env_seed() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_csv(&dir, "null.csv", &null_rows(120));
    let run = |seed_flag: bool| {
        let mut cmd = lqe();
        cmd.args(["test", path.to_str().unwrap(), "--format", "json"]);
        if seed_flag {
            cmd.args(["--seed", "42"]);
        } else {
            cmd.env("LQE_SEED", "42");
        }
        cmd.output().unwrap()
    };
    let a = run(true);
    let b = run(false);
    assert!(matches!(a.status.code(), Some(0) | Some(3)));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.status.code(), b.status.code());
    let report: lqe_core::TestReport = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(report.seed, 42);
    assert_eq!(report.permutations, 20);
    assert_eq!(report.burn_in, 5);
    assert_eq!(report.reject, a.status.code() == Some(3));
}

#[test]
fn shifted_data_rejects_with_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let rows: Vec<[f64; 3]> = null_rows(150)
        .into_iter()
        .map(|r| [r[0], r[1] + 2.0, r[2]])
        .collect();
    let path = write_csv(&dir, "shift.csv", &rows);
    let out = lqe()
        .args([
            "test",
            path.to_str().unwrap(),
            "--seed",
            "1",
            "--independent",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("decision               reject H0"), "{text}");
    assert!(text.contains("permutation per sample"));
}

#[test]
fn data_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "a,b,c\n1,2,3\n4,x,6\n").unwrap();
    let out = lqe()
        .args(["test", path.to_str().unwrap(), "--seed", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let out = lqe()
        .args(["test", path.to_str().unwrap(), "--no-such-flag"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    let out = lqe()
        .args(["test", "/nonexistent.csv", "--seed", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = lqe().arg("--version").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn quantile_command_lists_levels() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_csv(&dir, "null.csv", &null_rows(80));
    let out = lqe()
        .args([
            "quantile",
            path.to_str().unwrap(),
            "--alpha",
            "0.9",
            "--alpha",
            "0.5",
            "--seed",
            "3",
            "--format",
            "json",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let qs = v["quantiles"].as_array().unwrap();
    assert_eq!(qs.len(), 2);
    assert!(qs[0]["averaged"].as_f64().unwrap() >= qs[1]["averaged"].as_f64().unwrap());
    assert_eq!(qs[0]["per_permutation"].as_array().unwrap().len(), 20);
}

#[test]
fn simulate_writes_a_report_that_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sim.toml");
    std::fs::write(
        &config,
        r#"
study = "power"
n_values = [20, 30]
alphas = [0.05, 0.1]
replications = 6
permutations = 4
seed = 8
shift_rows = [[0.0, 0.7, 0.0]]

[[distributions]]
family = { kind = "exponential", rate = 2.0 }
coupling = { kind = "marshall_olkin", l1 = 1.0, l2 = 0.5, l3 = 0.5 }
"#,
    )
    .unwrap();
    let json = dir.path().join("report.json");
    let out = lqe()
        .args([
            "simulate",
            config.to_str().unwrap(),
            "--out",
            json.to_str().unwrap(),
            "--threads",
            "2",
        ])
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("wall time"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("Power"));

    let text = std::fs::read_to_string(&json).unwrap();
    let report = SimulationReport::from_json(&text).unwrap();
    assert_eq!(report.cells.len(), 4);
    let again = report.to_json().unwrap();
    assert_eq!(again.trim_end(), text.trim_end());
    for cell in &report.cells {
        let parsed = report
            .cell(&cell.dist, &cell.shifts, cell.n, cell.alpha)
            .unwrap();
        assert_eq!(parsed.value.to_bits(), cell.value.to_bits());
        assert_eq!(parsed.stderr.to_bits(), cell.stderr.to_bits());
    }

    // overrides and a single worker give the same bytes as the config run
    let json1 = dir.path().join("report1.json");
    let out = lqe()
        .args([
            "simulate",
            config.to_str().unwrap(),
            "--out",
            json1.to_str().unwrap(),
            "--threads",
            "1",
            "--seed",
            "8",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        std::fs::read(&json).unwrap(),
        std::fs::read(&json1).unwrap()
    );
}

#[test]
fn simulate_rejects_bad_configs() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "study = \"quantiles\"\nunknown_key = 3\n").unwrap();
    let out = lqe()
        .args(["simulate", config.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bundled_configs_parse() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg =
                lqe_core::SimulationConfig::from_toml_str(&std::fs::read_to_string(&path).unwrap())
                    .unwrap();
            cfg.validate().unwrap();
            cfg.clone().paper_scale().validate().unwrap();
            seen += 1;
        }
    }
    assert!(seen >= 3);
}

#[test]
fn diagnose_prints_distance() {
    let out = lqe()
        .args(["diagnose", "--n", "2000", "--seed", "4", "--format", "json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let d = v["kolmogorov_distance"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&d));
    assert_eq!(d, lqe_core::asclt_diagnostic_seeded(2000, 4).unwrap());
}
