use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lssboost_cli::{cmd_fit, cmd_simulate, ModelFile, RunConfig, SimulateArgs};
use tempfile::TempDir;

fn lssboost(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lssboost"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn read_table(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let (header, rows) = read_table(path);
    let j = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[j].parse().unwrap()).collect()
}

fn error_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|_| panic!("stderr is not JSON: {text}"))
}

const TOY_CONFIG: &str = r#"
family = "gaussian"
response = "y"
mstop = 1
[step]
mode = "fixed"
nu = 0.1
[learners]
shared = [{ kind = "linear", covariate = "x" }]
"#;

#[test]
fn toy_coefficients_match_dense_solve() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    fs::write(p.join("toy.csv"), "x,y\n-1,-2\n-0.5,-1\n0.5,1\n1,2\n").unwrap();
    fs::write(p.join("toy.toml"), TOY_CONFIG).unwrap();
    let out = lssboost(&["fit", "--config", "toy.toml", "--data", "toy.csv", "--out", "fit"], p);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    // y has mean zero and variance 2.5, so the first μ-gradient is y / 2.5;
    // least squares of u on [1, x] by the 2×2 normal equations.
    let x = [-1.0, -0.5, 0.5, 1.0];
    let u: Vec<f64> = x.iter().map(|v| 2.0 * v / 2.5).collect();
    let (sx, sxx): (f64, f64) = (x.iter().sum(), x.iter().map(|v| v * v).sum());
    let sy: f64 = u.iter().sum();
    let sxy: f64 = x.iter().zip(&u).map(|(a, b)| a * b).sum();
    let det = 4.0 * sxx - sx * sx;
    let slope = (4.0 * sxy - sx * sy) / det;
    let icpt = (sy - slope * sx) / 4.0;

    let (_, rows) = read_table(&p.join("fit/coefficients.csv"));
    let value = |param: &str, learner: &str, idx: &str| -> f64 {
        rows.iter()
            .find(|r| r[0] == param && r[1] == learner && r[2] == idx)
            .unwrap()[3]
            .parse()
            .unwrap()
    };
    assert!((value("mu", "linear(x)", "0") - 0.1 * icpt).abs() < 1e-12);
    assert!((value("mu", "linear(x)", "1") - 0.1 * slope).abs() < 1e-12);
    assert_eq!(value("sigma", "linear(x)", "1"), 0.0);
    assert!((value("sigma", "offset", "0") - 2.5f64.sqrt().ln()).abs() < 1e-12);
}

#[test]
fn predictions_reproduce_fitted_predictors() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    let out = lssboost(
        &["simulate", "zinb-categorical", "--data-only", "--n", "400", "--out", "sim"],
        p,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut config = String::from(
        "family = \"zinb\"\nresponse = \"y\"\ncategorical = [\"z1\", \"z2\"]\nmstop = 60\n\
         [step]\nmode = \"optimal\"\n[learners]\nshared = [\n",
    );
    for j in 1..=6 {
        config.push_str(&format!("  {{ kind = \"linear\", covariate = \"x{j}\" }},\n"));
    }
    config.push_str("  { kind = \"categorical\", covariate = \"z1\" },\n]\n");
    config.push_str("pi = [{ kind = \"categorical\", covariate = \"z2\", df = 3 }]\n");
    fs::write(p.join("zinb.toml"), config).unwrap();

    let out = lssboost(&["fit", "--config", "zinb.toml", "--data", "sim/data.csv", "--out", "fit"], p);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = lssboost(
        &["predict", "--model", "fit/model.json", "--data", "sim/data.csv", "--out", "pred"],
        p,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["eta_mu", "eta_alpha", "eta_pi", "mean"] {
        let a = column(&p.join("fit/fitted.csv"), name);
        let b = column(&p.join("pred/predictions.csv"), name);
        assert_eq!(a.len(), 400);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-8 * x.abs().max(1.0), "{name}: {x} vs {y}");
        }
    }
}

#[test]
fn written_values_parse_back_exactly() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    let args = SimulateArgs {
        data_only: true,
        n: Some(150),
        ..SimulateArgs::new("gaussian-nonlinear", 1)
    };
    cmd_simulate(&args, &p.join("sim")).unwrap();
    let config = RunConfig::parse(
        r#"
        family = "gaussian"
        response = "y"
        mstop = 40
        [step]
        mode = "fixed"
        [learners]
        shared = [{ kind = "pspline", covariate = "z1" }, { kind = "linear", covariate = "x1" }]
        "#,
    )
    .unwrap();
    cmd_fit(&config, &p.join("sim/data.csv"), &p.join("fit")).unwrap();
    let model = ModelFile::load(&p.join("fit/model.json")).unwrap();
    let (_, rows) = read_table(&p.join("fit/coefficients.csv"));
    let mut values = rows.iter().filter(|r| r[1] != "offset").map(|r| r[3].parse::<f64>().unwrap());
    for blocks in &model.fit.coef {
        for c in blocks {
            for &v in c {
                assert_eq!(values.next().unwrap(), v);
            }
        }
    }
    let (_, trace) = read_table(&p.join("fit/trace.csv"));
    assert_eq!(trace.len(), 40);
    for (row, rec) in trace.iter().zip(&model.fit.trace) {
        assert_eq!(row[5].parse::<f64>().unwrap(), rec.inner_risk);
    }
}

#[test]
fn mrf_without_graph_fails_before_fitting() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    fs::write(p.join("d.csv"), "r,y\nNC,1\nNE,2\nSS,3\n").unwrap();
    let config = TOY_CONFIG
        .replace("kind = \"linear\", covariate = \"x\"", "kind = \"mrf\", covariate = \"r\"")
        .replace("response = \"y\"", "response = \"y\"\ncategorical = [\"r\"]");
    fs::write(p.join("c.toml"), config).unwrap();
    let out = lssboost(&["fit", "--config", "c.toml", "--data", "d.csv", "--out", "fit"], p);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"], "config");
    assert!(!p.join("fit").exists());
}

#[test]
fn data_problems_exit_with_code_three() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    fs::write(p.join("toy.toml"), TOY_CONFIG).unwrap();
    let cases = [
        ("x,y\n1,2\nNA,3\n0,1\n", "missing value"),
        ("x,y\n1,2\n,3\n0,1\n", "missing value"),
        ("x,y\n1,a\n2,3\n0,1\n", "not a finite number"),
        ("w,y\n1,2\n2,3\n0,1\n", "missing column 'x'"),
    ];
    for (text, needle) in cases {
        fs::write(p.join("bad.csv"), text).unwrap();
        let out = lssboost(&["fit", "--config", "toy.toml", "--data", "bad.csv"], p);
        assert_eq!(out.status.code(), Some(3), "{text}");
        let err = error_json(&out);
        assert_eq!(err["code"], 3);
        assert!(err["message"].as_str().unwrap().contains(needle), "{err}");
    }
}

#[test]
fn configuration_problems_exit_with_code_two() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    fs::write(p.join("toy.csv"), "x,y\n-1,-2\n-0.5,-1\n0.5,1\n1,2\n").unwrap();
    for bad in [
        TOY_CONFIG.replace("mstop = 1", "mstop = 1\nlearning_rate = 0.3"),
        TOY_CONFIG.replace("nu = 0.1", "nu = 0.0"),
        TOY_CONFIG.replace("family = \"gaussian\"", "family = \"poisson\""),
    ] {
        fs::write(p.join("bad.toml"), bad).unwrap();
        let out = lssboost(&["fit", "--config", "bad.toml", "--data", "toy.csv"], p);
        assert_eq!(out.status.code(), Some(2));
        assert_eq!(error_json(&out)["error"], "config");
    }
    let out = lssboost(&["simulate", "gaussian-smooth"], p);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cv_on_constant_risk_stops_at_zero() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    // a single-level factor can only fit a constant, which the offsets already carry
    fs::write(p.join("d.csv"), "g,y\na,1.0\na,2.5\na,0.3\na,4.0\na,1.1\na,2.2\n").unwrap();
    fs::write(
        p.join("c.toml"),
        r#"
        family = "gaussian"
        response = "y"
        categorical = ["g"]
        [step]
        mode = "fixed"
        [cv]
        folds = 3
        mstop_max = 20
        tol = 0.02
        rule = "range_relative"
        [learners]
        shared = [{ kind = "categorical", covariate = "g", unpenalized = true }]
        "#,
    )
    .unwrap();
    let out = lssboost(&["cv", "--config", "c.toml", "--data", "d.csv", "--out", "cv"], p);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(p.join("cv/mstop.txt")).unwrap(), "0\n");
    let risk = column(&p.join("cv/risk_curve.csv"), "risk");
    assert_eq!(risk.len(), 21);
    assert!(risk.iter().all(|&r| r == risk[0]));
}

#[test]
fn simulate_is_byte_reproducible() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    let args = [
        "simulate",
        "gaussian-categorical",
        "--runs",
        "2",
        "--seed",
        "9",
        "--n",
        "120",
        "--folds",
        "3",
        "--fixed-mstop-max",
        "80",
        "--optimal-mstop-max",
        "40",
    ];
    for out in ["a", "b"] {
        let mut v = args.to_vec();
        v.extend(["--out", out]);
        let o = lssboost(&v, p);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["mstop.csv", "summary.csv", "metrics.csv", "selection_counts.csv", "coefficients.csv", "balance.csv"] {
        let a = fs::read(p.join("a").join(f)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, fs::read(p.join("b").join(f)).unwrap(), "{f}");
    }
    let (header, rows) = read_table(&p.join("a/selection_counts.csv"));
    assert_eq!(header, ["parameter", "baselearner", "informative", "mode", "count", "runs"]);
    assert_eq!(rows.len(), 2 * 28 * 2);
    for r in &rows {
        assert!(r[4].parse::<usize>().unwrap() <= 2);
    }
    let z1 = rows.iter().find(|r| r[0] == "sigma" && r[1] == "categorical(z1)").unwrap();
    assert_eq!(z1[2], "true");
}
