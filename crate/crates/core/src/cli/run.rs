use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::analysis::{
    check_dissipativity, decay_rate, for_each_path_ordered, stability_study, stability_threshold, steps_for,
    strong_error_studies, with_threads, Reference, StudyConfig, DEFAULT_PATHS,
};
use crate::model::{builtin_problem, SdeProblem};
use crate::paths::generate_paths;
use crate::schemes::{integrate, SchemeKind};

use super::config::{locate_key, parse_config, ExperimentConfig, ExperimentKind};
use super::CliError;

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

/// Shortest representation that parses back to the same f64.
pub fn format_float(x: f64) -> String {
    format!("{x:?}")
}

const DEFAULT_OUTPUT_DIR: &str = "out";
/// Reference grid is this many times finer than the finest study grid.
const DEFAULT_REFERENCE_REFINEMENT: usize = 8;

struct Source<'a> {
    text: &'a str,
    origin: &'a str,
}

impl Source<'_> {
    fn err(&self, key: &str, message: impl AsRef<str>) -> CliError {
        let message = message.as_ref();
        let message = match locate_key(self.text, key) {
            Some(line) => format!("{}:{line}: {message}", self.origin),
            None => format!("{}: {message}", self.origin),
        };
        CliError::Config { message }
    }
}

struct Resolved {
    kind: ExperimentKind,
    config: ExperimentConfig,
    problem: SdeProblem,
    seed: u64,
    paths: usize,
    out_dir: PathBuf,
    stepsizes: Vec<f64>,
}

/// Run one experiment from the config document `text` and return the files
/// written.
pub fn run_experiment(
    kind: ExperimentKind,
    text: &str,
    origin: &str,
    overrides: &Overrides,
) -> Result<Vec<PathBuf>, CliError> {
    let src = Source { text, origin };
    let r = resolve(kind, parse_config(text, origin)?, &src, overrides)?;
    fs::create_dir_all(&r.out_dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", r.out_dir.display())))?;
    with_threads(overrides.threads, || match r.kind {
        ExperimentKind::Converge => converge(&r),
        ExperimentKind::Stability => stability(&r),
        ExperimentKind::Simulate => simulate(&r),
        ExperimentKind::Threshold => threshold(&r),
        ExperimentKind::Check => check(&r),
    })?
}

fn resolve(
    kind: ExperimentKind,
    config: ExperimentConfig,
    src: &Source<'_>,
    ov: &Overrides,
) -> Result<Resolved, CliError> {
    if let Some(k) = config.kind {
        if k != kind {
            return Err(src.err(
                "kind",
                format!("config is for `{}` but `{}` was requested", k.name(), kind.name()),
            ));
        }
    }
    if ov.threads == Some(0) {
        return Err(CliError::Config {
            message: "--threads must be at least 1".into(),
        });
    }
    let mut problem = builtin_problem(&config.model).map_err(|e| src.err("model", e.to_string()))?;
    if let Some(t) = config.horizon {
        problem = problem.with_horizon(t).map_err(|e| src.err("horizon", e.to_string()))?;
    }
    let default_paths = if kind == ExperimentKind::Simulate {
        1
    } else {
        DEFAULT_PATHS
    };
    let paths = ov.paths.or(config.paths).unwrap_or(default_paths);
    if paths == 0 {
        return Err(src.err("paths", "paths must be at least 1"));
    }
    let seed = ov.seed.or(config.seed).unwrap_or(0);
    let out_dir = ov
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));

    let stepsizes = match &config.stepsizes {
        Some(s) => s.resolve().map_err(|e| src.err("stepsizes", e))?,
        None => Vec::new(),
    };
    for h in &stepsizes {
        steps_for(problem.horizon(), *h).map_err(|e| src.err("stepsizes", e.to_string()))?;
    }
    let needs_schemes = matches!(
        kind,
        ExperimentKind::Converge | ExperimentKind::Stability | ExperimentKind::Simulate
    );
    if needs_schemes {
        if config.schemes.is_empty() {
            return Err(src.err("schemes", format!("`{}` needs a nonempty `schemes` list", kind.name())));
        }
        if stepsizes.is_empty() {
            return Err(src.err("stepsizes", format!("`{}` needs `stepsizes`", kind.name())));
        }
        for s in config.schemes.iter().chain(config.reference_scheme.iter()) {
            if s.is_milstein() && !problem.is_commutative() {
                return Err(src.err("schemes", format!("{s} needs commutative noise")));
            }
        }
    }
    if kind == ExperimentKind::Threshold && config.stability_params.is_none() {
        return Err(src.err("kind", "`threshold` needs a `stability_params` block"));
    }
    if let Some(params) = &config.stability_params {
        params
            .validate()
            .map_err(|e| src.err("stability_params", e.to_string()))?;
    }
    if let Some(points) = &config.sample_points {
        if points.is_empty() || points.iter().any(|p| p.len() != problem.dim_state()) {
            return Err(src.err(
                "sample_points",
                format!(
                    "sample points must be a nonempty list of {}-vectors",
                    problem.dim_state()
                ),
            ));
        }
    }
    if let Some(tol) = config.tolerance {
        if !(tol >= 0.0) {
            return Err(src.err("tolerance", "tolerance must be nonnegative"));
        }
    }
    if let Some(n) = config.reference_steps {
        let bad = stepsizes
            .iter()
            .map(|h| steps_for(problem.horizon(), *h).unwrap())
            .find(|s| n == 0 || n % s != 0);
        if n == 0 || bad.is_some() {
            return Err(src.err(
                "reference_steps",
                format!("{n} reference steps is not a multiple of every study grid"),
            ));
        }
    }
    Ok(Resolved {
        kind,
        config,
        problem,
        seed,
        paths,
        out_dir,
        stepsizes,
    })
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    Ok(csv::Writer::from_path(path)?)
}

fn finite(x: f64, what: &str) -> Result<String, CliError> {
    if x.is_finite() {
        Ok(format_float(x))
    } else {
        Err(CliError::Runtime(format!("non-finite {what}")))
    }
}

fn converge(r: &Resolved) -> Result<Vec<PathBuf>, CliError> {
    let horizon = r.problem.horizon();
    let steps: Vec<usize> = r.stepsizes.iter().map(|h| steps_for(horizon, *h).unwrap()).collect();
    let reference_steps = r
        .config
        .reference_steps
        .unwrap_or_else(|| steps.iter().fold(1, |acc, &n| acc / gcd(acc, n) * n) * DEFAULT_REFERENCE_REFINEMENT);
    let reference = r.config.reference_scheme.unwrap_or(SchemeKind::SemiTamedMilstein);
    let mut study = StudyConfig::new(
        r.stepsizes.clone(),
        r.paths,
        reference_steps,
        Reference::Scheme(reference),
        r.seed,
    );
    study.norm = r.config.error_norm;
    let reports = strong_error_studies(&r.problem, &r.config.schemes, &study)?;

    let csv_path = r.out_dir.join("convergence.csv");
    let mut w = csv_writer(&csv_path)?;
    w.write_record(["scheme", "h", "rms_error", "stderr", "excluded_paths"])?;
    for rep in &reports {
        for i in 0..rep.stepsizes.len() {
            w.write_record([
                rep.scheme.name().to_string(),
                finite(rep.stepsizes[i], "stepsize")?,
                finite(rep.rms_errors[i], "rms error")?,
                finite(rep.std_errors[i], "standard error")?,
                (rep.excluded[i] + rep.reference_excluded).to_string(),
            ])?;
        }
    }
    w.flush()?;

    let mut fit = String::new();
    writeln!(fit, "# power-law fit e_h = C h^r, least squares in log-log space").unwrap();
    writeln!(
        fit,
        "# model {}, {} paths, seed {}, reference {} with {} steps, {} error",
        r.problem.label(),
        r.paths,
        r.seed,
        reference,
        reference_steps,
        format!("{:?}", r.config.error_norm).to_lowercase()
    )
    .unwrap();
    writeln!(fit, "scheme,C,r,residual").unwrap();
    for rep in &reports {
        match rep.fit {
            Some(f) => writeln!(
                fit,
                "{},{},{},{}",
                rep.scheme,
                format_float(f.constant),
                format_float(f.order),
                format_float(f.residual)
            )
            .unwrap(),
            None => writeln!(fit, "# {}: fewer than two positive errors, no fit", rep.scheme).unwrap(),
        }
    }
    let fit_path = r.out_dir.join("fit.txt");
    fs::write(&fit_path, fit)?;

    let mut written = vec![csv_path, fit_path];
    if r.config.plot {
        let mut gp = String::from(
            "set datafile separator ','\nset logscale xy\nset xlabel 'h'\nset ylabel 'RMS error at T'\nset key left top\nplot \\\n",
        );
        let lines: Vec<String> = r
            .config
            .schemes
            .iter()
            .map(|s| format!("  '< grep \"^{s},\" convergence.csv' using 2:3 with linespoints title '{s}'"))
            .collect();
        gp.push_str(&lines.join(", \\\n"));
        gp.push('\n');
        let gp_path = r.out_dir.join("convergence.gp");
        fs::write(&gp_path, gp)?;
        written.push(gp_path);
    }
    Ok(written)
}

fn stability(r: &Resolved) -> Result<Vec<PathBuf>, CliError> {
    let report = stability_study(
        &r.problem,
        &r.config.schemes,
        &r.stepsizes,
        r.paths,
        r.seed,
        r.config.stability_params.as_ref(),
    )?;
    let csv_path = r.out_dir.join("stability.csv");
    let mut w = csv_writer(&csv_path)?;
    w.write_record(["scheme", "h", "t", "mean_square", "blown_up_count"])?;
    for c in &report.curves {
        for (t, m) in c.times.iter().zip(&c.mean_square) {
            w.write_record([
                c.scheme.name().to_string(),
                format_float(c.h),
                format_float(*t),
                finite(*m, "mean square")?,
                c.blown_up.to_string(),
            ])?;
        }
    }
    w.flush()?;
    let mut written = vec![csv_path];
    if r.config.plot {
        let mut gp = String::from(
            "set datafile separator ','\nset logscale y\nset xlabel 't'\nset ylabel 'E|Y_n|^2'\nplot \\\n",
        );
        let lines: Vec<String> = report
            .curves
            .iter()
            .map(|c| {
                let h = format_float(c.h);
                format!(
                    "  '< grep \"^{s},{h},\" stability.csv' using 3:4 with lines title '{s} h={h}'",
                    s = c.scheme
                )
            })
            .collect();
        gp.push_str(&lines.join(", \\\n"));
        gp.push('\n');
        let gp_path = r.out_dir.join("stability.gp");
        fs::write(&gp_path, gp)?;
        written.push(gp_path);
    }
    Ok(written)
}

fn simulate(r: &Resolved) -> Result<Vec<PathBuf>, CliError> {
    let horizon = r.problem.horizon();
    let d = r.problem.dim_state();
    let mut written = Vec::new();
    let summary_path = r.out_dir.join("simulate_summary.csv");
    let mut summary = csv_writer(&summary_path)?;
    summary.write_record(["scheme", "h", "path", "blew_up", "steps_completed"])?;
    for &scheme in &r.config.schemes {
        for &h in &r.stepsizes {
            let steps = steps_for(horizon, h)?;
            let mut trajectories = Vec::with_capacity(r.paths);
            for_each_path_ordered(
                r.paths,
                |path| {
                    let bundle = generate_paths(r.seed, path, steps, r.problem.dim_noise(), horizon)?;
                    integrate(&r.problem, scheme, &bundle, true)
                },
                |t| trajectories.push(t),
            )?;
            for (path, traj) in trajectories.iter().enumerate() {
                let file = r.out_dir.join(format!("trajectory_{scheme}_N{steps}_path{path}.csv"));
                let mut w = csv_writer(&file)?;
                let mut header = vec!["t".to_string()];
                header.extend((1..=d).map(|i| format!("x_{i}")));
                w.write_record(&header)?;
                let finite_rows = traj.blow_up_step.unwrap_or(traj.rows());
                for row in 0..finite_rows {
                    let mut record = vec![format_float(traj.times[row])];
                    record.extend(traj.state(row).iter().map(|v| format_float(*v)));
                    w.write_record(&record)?;
                }
                w.flush()?;
                summary.write_record([
                    scheme.name().to_string(),
                    format_float(h),
                    path.to_string(),
                    u8::from(traj.blew_up).to_string(),
                    (finite_rows - 1).to_string(),
                ])?;
                written.push(file);
            }
        }
    }
    summary.flush()?;
    written.push(summary_path);
    Ok(written)
}

fn threshold(r: &Resolved) -> Result<Vec<PathBuf>, CliError> {
    let params = r.config.stability_params.as_ref().expect("validated in resolve");
    let t = stability_threshold(params)?;
    let mut text = String::new();
    writeln!(text, "h1 = {}", format_float(t.h1)).unwrap();
    writeln!(text, "h2 = {}", format_float(t.h2)).unwrap();
    writeln!(text, "h_star = {}", format_float(t.h_star)).unwrap();
    writeln!(text, "rate_limit = {}", format_float(params.exact_rate())).unwrap();
    if !r.stepsizes.is_empty() {
        writeln!(text, "\nh,gamma_h").unwrap();
        for &h in &r.stepsizes {
            match decay_rate(params, h) {
                Ok(g) => writeln!(text, "{},{}", format_float(h), format_float(g)).unwrap(),
                Err(_) => writeln!(text, "# h = {} is not below h_star", format_float(h)).unwrap(),
            }
        }
    }
    let path = r.out_dir.join("threshold.txt");
    fs::write(&path, text)?;
    Ok(vec![path])
}

fn check(r: &Resolved) -> Result<Vec<PathBuf>, CliError> {
    let p = &r.problem;
    let points = match &r.config.sample_points {
        Some(points) => points.clone(),
        None if p.dim_state() == 1 => (0..=60).map(|i| vec![-3.0 + i as f64 / 10.0]).collect(),
        None => p.default_sample_points(),
    };
    let tol = r
        .config
        .tolerance
        .unwrap_or_else(|| p.default_commutativity_tolerance());
    let comm = p.check_commutativity(&points, tol)?;
    let mut text = String::new();
    writeln!(text, "model = {}", p.label()).unwrap();
    writeln!(text, "sample_points = {}", points.len()).unwrap();
    writeln!(
        text,
        "commutativity.max_violation = {}",
        format_float(comm.max_violation)
    )
    .unwrap();
    writeln!(text, "commutativity.tolerance = {}", format_float(comm.tolerance)).unwrap();
    writeln!(text, "commutativity.passed = {}", comm.passed).unwrap();
    let gamma = r
        .config
        .gamma
        .or_else(|| r.config.stability_params.as_ref().map(|s| s.exact_rate()));
    match gamma {
        Some(gamma) => {
            let d = check_dissipativity(p, gamma, &points)?;
            writeln!(text, "dissipativity.gamma = {}", format_float(gamma)).unwrap();
            writeln!(text, "dissipativity.margin = {}", format_float(d.margin)).unwrap();
            let worst: Vec<String> = d.worst_point.iter().map(|v| format_float(*v)).collect();
            writeln!(text, "dissipativity.worst_point = {}", worst.join(" ")).unwrap();
            writeln!(text, "dissipativity.passed = {}", d.passed).unwrap();
        }
        None => writeln!(text, "# dissipativity skipped: no gamma or stability_params given").unwrap(),
    }
    let path = r.out_dir.join("check.txt");
    fs::write(&path, text)?;
    Ok(vec![path])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0, 1e-7, 2f64.powi(-11), 1.0 / 3.0, 123456.789, 6.02e23] {
            assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(format_float(0.25), "0.25");
    }

    fn run_text(kind: ExperimentKind, text: &str, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        let ov = Overrides {
            out: Some(dir.to_path_buf()),
            threads: Some(1),
            ..Default::default()
        };
        run_experiment(kind, text, "test.json", &ov)
    }

    #[test]
    fn semantic_errors_are_line_anchored() {
        let dir = tempfile::tempdir().unwrap();
        let text = "{\n  \"model\": \"ginzburg-landau-unstable\",\n  \"schemes\": [\"em\"],\n  \"stepsizes\": [0.3]\n}";
        match run_text(ExperimentKind::Converge, text, dir.path()) {
            Err(CliError::Config { message }) => assert!(message.starts_with("test.json:4:"), "{message}"),
            other => panic!("unexpected {other:?}"),
        }
        let text = "{\n  \"model\": \"nope\"\n}";
        match run_text(ExperimentKind::Check, text, dir.path()) {
            Err(CliError::Config { message }) => assert!(message.starts_with("test.json:2:"), "{message}"),
            other => panic!("unexpected {other:?}"),
        }
        let text = r#"{"kind": "check", "model": "ginzburg-landau-stable"}"#;
        assert!(matches!(
            run_text(ExperimentKind::Threshold, text, dir.path()),
            Err(CliError::Config { .. })
        ));
        let text = r#"{"model": "ginzburg-landau-stable"}"#;
        assert!(matches!(
            run_text(ExperimentKind::Threshold, text, dir.path()),
            Err(CliError::Config { .. })
        ));
        let text = r#"{"model": "ginzburg-landau-stable", "stepsizes": [0.25]}"#;
        assert!(matches!(
            run_text(ExperimentKind::Stability, text, dir.path()),
            Err(CliError::Config { .. })
        ));
    }

    #[test]
    fn default_reference_grid_is_eight_times_finer() {
        let dir = tempfile::tempdir().unwrap();
        let text = r#"{"model": "ginzburg-landau-unstable", "schemes": ["semi-tamed-euler"],
                      "stepsizes": "2^-2..2^-4", "paths": 20}"#;
        run_text(ExperimentKind::Converge, text, dir.path()).unwrap();
        let fit = fs::read_to_string(dir.path().join("fit.txt")).unwrap();
        assert!(fit.contains("with 128 steps"), "{fit}");
    }
}
