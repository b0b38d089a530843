//! End-to-end runs of the `tamed-sde` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tamed-sde"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run_config(kind: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        kind,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    run(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn list_models() {
    let o = run(&["list-models"]);
    assert!(o.status.success());
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert_eq!(
        stdout.lines().collect::<Vec<_>>(),
        ["ginzburg-landau-unstable", "ginzburg-landau-stable"]
    );
}

#[test]
fn usage_and_config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["converge"]).status.code(), Some(2));
    assert_eq!(
        run(&["converge", "--config", "/does/not/exist.json"]).status.code(),
        Some(2)
    );

    let cases = [
        ("syntax.json", "{\n  \"model\": \"ginzburg-landau-stable\",\n  \"paths\": ,\n}", ":3:"),
        ("unknown.json", "{\n  \"model\": \"ginzburg-landau-stable\",\n  \"colour\": \"red\"\n}", ":3:"),
        ("model.json", "{\n  \"model\": \"lorenz\",\n  \"schemes\": [\"em\"],\n  \"stepsizes\": [0.5]\n}", ":2:"),
        ("scheme.json", "{\n  \"model\": \"ginzburg-landau-stable\",\n  \"schemes\": [\"rk4\"]\n}", ":3:"),
        ("grid.json", "{\n  \"model\": \"ginzburg-landau-stable\",\n  \"schemes\": [\"em\"],\n  \"stepsizes\": [0.3]\n}", ":4:"),
        ("paths.json", "{\n  \"model\": \"ginzburg-landau-stable\",\n  \"schemes\": [\"em\"],\n  \"stepsizes\": [0.5],\n  \"paths\": 0\n}", ":5:"),
    ];
    for (name, text, line) in cases {
        let cfg = write_config(dir.path(), name, text);
        let o = run_config("stability", &cfg, &dir.path().join("out"), &[]);
        assert_eq!(o.status.code(), Some(2), "{name}: {}", stderr(&o));
        let msg = stderr(&o);
        assert!(msg.contains(&format!("{name}{line}")), "{name}: {msg}");
    }

    let cfg = write_config(
        dir.path(),
        "kind.json",
        r#"{"kind": "converge", "model": "ginzburg-landau-stable"}"#,
    );
    assert_eq!(
        run_config("check", &cfg, &dir.path().join("out"), &[]).status.code(),
        Some(2)
    );
    let cfg = write_config(dir.path(), "ok.json", r#"{"model": "ginzburg-landau-stable"}"#);
    assert_eq!(
        run_config("check", &cfg, &dir.path().join("out"), &["--threads", "0"])
            .status
            .code(),
        Some(2)
    );
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn assert_numeric_columns_finite(rows: &[Vec<String>], skip: usize) {
    for row in rows {
        for cell in &row[skip..] {
            let v: f64 = cell.parse().unwrap_or_else(|_| panic!("non-numeric cell {cell}"));
            assert!(v.is_finite(), "non-finite cell {cell}");
        }
    }
}

#[test]
fn converge_writes_errors_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "converge.json",
        r#"{"kind": "converge", "model": "ginzburg-landau-unstable",
            "schemes": ["semi-tamed-milstein", "em"], "stepsizes": "2^-2..2^-5",
            "paths": 400, "seed": 3, "plot": true}"#,
    );
    let out = dir.path().join("out");
    let o = run_config("converge", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_csv(&out.join("convergence.csv"));
    assert_eq!(header, ["scheme", "h", "rms_error", "stderr", "excluded_paths"]);
    assert_eq!(rows.len(), 8);
    assert_eq!(rows[0][0], "semi-tamed-milstein");
    assert_eq!(rows[0][1], "0.25");
    assert_numeric_columns_finite(&rows, 1);
    let fit = std::fs::read_to_string(out.join("fit.txt")).unwrap();
    assert!(fit.contains("scheme,C,r,residual"));
    assert!(fit.lines().any(|l| l.starts_with("semi-tamed-milstein,")));
    assert!(out.join("convergence.gp").exists());
}

#[test]
fn stability_counts_blow_ups_without_nan() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "stability.json",
        r#"{"model": "ginzburg-landau-unstable", "horizon": 5.0,
            "schemes": ["em", "semi-tamed-euler"], "stepsizes": [0.25], "paths": 2000}"#,
    );
    let out = dir.path().join("out");
    let o = run_config("stability", &cfg, &out, &["--seed", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_csv(&out.join("stability.csv"));
    assert_eq!(header, ["scheme", "h", "t", "mean_square", "blown_up_count"]);
    assert_eq!(rows.len(), 2 * 21);
    assert_numeric_columns_finite(&rows, 1);
    let em_blown: usize = rows.iter().find(|r| r[0] == "em").unwrap()[4].parse().unwrap();
    let st_blown: usize = rows.iter().find(|r| r[0] == "semi-tamed-euler").unwrap()[4]
        .parse()
        .unwrap();
    assert!(em_blown > 0);
    assert_eq!(st_blown, 0);
}

#[test]
fn simulate_writes_trajectories_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "simulate.json",
        r#"{"model": "ginzburg-landau-stable", "schemes": ["semi-tamed-milstein"], "stepsizes": [0.5, 0.25]}"#,
    );
    let out = dir.path().join("out");
    let o = run_config("simulate", &cfg, &out, &["--paths", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_csv(&out.join("trajectory_semi-tamed-milstein_N20_path1.csv"));
    assert_eq!(header, ["t", "x_1"]);
    assert_eq!(rows.len(), 21);
    assert_eq!(rows[0], ["0.0", "1.0"]);
    assert_eq!(rows[20][0], "5.0");
    assert_numeric_columns_finite(&rows, 0);
    let (header, rows) = read_csv(&out.join("simulate_summary.csv"));
    assert_eq!(header, ["scheme", "h", "path", "blew_up", "steps_completed"]);
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r[3] == "0"));
}

#[test]
fn threshold_and_check_reports() {
    let dir = tempfile::tempdir().unwrap();
    let params = r#""stability_params": {"rho": 2.0, "theta": 1.4142135623730951, "K": 2.0, "beta": 2.0,
                                          "v": 1.0, "v_bar": 1.0, "alpha": 5.0, "m": 1}"#;
    let cfg = write_config(
        dir.path(),
        "threshold.json",
        &format!(r#"{{"model": "ginzburg-landau-stable", "stepsizes": [0.5, 0.0625], {params}}}"#),
    );
    let out = dir.path().join("out");
    let o = run_config("threshold", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("threshold.txt")).unwrap();
    assert!(text.contains("h1 = 0.25\n"), "{text}");
    assert!(text.contains("h_star = 0.25\n"), "{text}");
    assert!(text.contains("# h = 0.5 is not below h_star"), "{text}");
    let gamma_line = text.lines().find(|l| l.starts_with("0.0625,")).unwrap();
    let gamma: f64 = gamma_line[7..].parse().unwrap();
    assert!((gamma - 1.8125).abs() < 1e-12);

    let cfg = write_config(
        dir.path(),
        "check.json",
        &format!(r#"{{"model": "ginzburg-landau-stable", {params}}}"#),
    );
    let o = run_config("check", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("check.txt")).unwrap();
    assert!(text.contains("commutativity.passed = true"), "{text}");
    assert!(text.contains("dissipativity.passed = true"), "{text}");

    // The unstable example is not dissipative at rate 1.
    let cfg = write_config(
        dir.path(),
        "check2.json",
        r#"{"model": "ginzburg-landau-unstable", "gamma": 1.0, "sample_points": [[0.1], [0.5], [2.0]]}"#,
    );
    let o = run_config("check", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("check.txt")).unwrap();
    assert!(text.contains("sample_points = 3"));
    assert!(text.contains("dissipativity.passed = false"), "{text}");
}

#[test]
fn shipped_configs_parse() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let dir = tempfile::tempdir().unwrap();
    for (kind, file) in [("threshold", "threshold_stable.json"), ("check", "check_stable.json")] {
        let o = run_config(kind, &configs.join(file), dir.path(), &[]);
        assert!(o.status.success(), "{file}: {}", stderr(&o));
    }
    for (kind, file) in [
        ("converge", "converge_unstable.json"),
        ("stability", "stability_stable.json"),
        ("simulate", "simulate_unstable.json"),
    ] {
        let text = std::fs::read_to_string(configs.join(file)).unwrap();
        let parsed = tamed_sde::cli::parse_config(&text, file).unwrap();
        assert_eq!(parsed.kind.unwrap().name(), kind);
    }
}
