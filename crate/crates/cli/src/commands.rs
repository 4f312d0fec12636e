//! The four batch commands. Each writes its outputs into a directory and
//! returns the paths written.

use std::path::{Path, PathBuf};

use lssboost::boost::run;
use lssboost::sim::{self, EffectVariant, ModeSpec, SettingSpec, StudyOptions, StudyReport};
use lssboost::{CvPlan, Dataset, FitState, ParamState, StopRule};
use serde::{Deserialize, Serialize};

use crate::config::{Interaction, RunConfig, StepKind};
use crate::error::{CliError, CliResult};
use crate::table::{num, read_dataset, write_csv, write_dataset, Schema};

/// Serialized model: the fit plus what is needed to read new data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub response: String,
    pub categorical: Vec<String>,
    pub interactions: Vec<Interaction>,
    pub fit: FitState,
}

impl ModelFile {
    pub fn load(path: &Path) -> CliResult<ModelFile> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read model {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("model {}: {e}", path.display())))
    }

    /// Covariate columns the terms read from a data file.
    fn required_columns(&self) -> Vec<String> {
        let derived: Vec<String> = self.interactions.iter().map(Interaction::name).collect();
        let mut cols: Vec<String> = Vec::new();
        let sources = self
            .fit
            .terms
            .iter()
            .flatten()
            .map(|t| t.covariate.clone())
            .filter(|c| !derived.contains(c))
            .chain(self.interactions.iter().flat_map(|i| i.columns.clone()));
        for c in sources {
            if !cols.contains(&c) {
                cols.push(c);
            }
        }
        cols
    }
}

fn prepare_out(out: &Path) -> CliResult<()> {
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::data(format!("cannot create {}: {e}", out.display())))
}

fn load_training(config: &RunConfig, data: &Path) -> CliResult<Dataset> {
    let columns = config.required_columns();
    read_dataset(
        data,
        &Schema {
            columns: &columns,
            categorical: &config.categorical,
            response: Some(&config.response),
            interactions: &config.interactions,
        },
    )
}

/// Fits the configured model for `config.mstop` iterations.
pub fn cmd_fit(config: &RunConfig, data: &Path, out: &Path) -> CliResult<Vec<PathBuf>> {
    let graph = config.load_graph()?;
    let model = config.model_config(graph.as_ref(), config.mstop)?;
    let dataset = load_training(config, data)?;
    let fit = run(&model, &dataset)?;
    prepare_out(out)?;

    let names = fit.family.param_names();
    let term = |k: usize, j: usize| fit.terms[k][j].name.clone();
    let mut written = Vec::new();

    let path = out.join("coefficients.csv");
    let mut rows = Vec::new();
    for (k, blocks) in fit.coef.iter().enumerate() {
        rows.push(vec![names[k].into(), "offset".into(), "0".into(), num(fit.offsets[k])]);
        for (j, c) in blocks.iter().enumerate() {
            for (i, v) in c.iter().enumerate() {
                rows.push(vec![names[k].into(), term(k, j), i.to_string(), num(*v)]);
            }
        }
    }
    write_csv(&path, &["parameter", "baselearner", "index", "value"], rows)?;
    written.push(path);

    let path = out.join("paths.csv");
    let counts = fit.selection_counts();
    let mut rows = Vec::new();
    for (k, blocks) in counts.iter().enumerate() {
        for (j, &count) in blocks.iter().enumerate() {
            if count == 0 {
                continue;
            }
            for (m, c) in fit.coefficient_path(k, j).iter().enumerate() {
                for (i, v) in c.iter().enumerate() {
                    rows.push(vec![m.to_string(), names[k].into(), term(k, j), i.to_string(), num(*v)]);
                }
            }
        }
    }
    write_csv(&path, &["iteration", "parameter", "baselearner", "index", "value"], rows)?;
    written.push(path);

    let path = out.join("steplengths.csv");
    let rows = fit.trace.iter().flat_map(|rec| {
        rec.candidates.iter().map(|c| {
            vec![
                rec.m.to_string(),
                names[c.k].into(),
                term(c.k, c.j),
                num(c.nu),
                c.nu_star.map(num).unwrap_or_default(),
                (c.k == rec.k_star).to_string(),
            ]
        })
    });
    write_csv(
        &path,
        &["iteration", "parameter", "baselearner", "value", "optimal", "selected"],
        rows.collect::<Vec<_>>(),
    )?;
    written.push(path);

    let path = out.join("trace.csv");
    let rows = fit.trace.iter().map(|rec| {
        vec![
            rec.m.to_string(),
            names[rec.k_star].into(),
            term(rec.k_star, rec.j_star),
            num(rec.nu),
            rec.nu_star.map(num).unwrap_or_default(),
            num(rec.inner_risk),
            rec.fallback_used.to_string(),
        ]
    });
    write_csv(
        &path,
        &["iteration", "parameter", "baselearner", "nu", "nu_star", "risk", "fallback"],
        rows.collect::<Vec<_>>(),
    )?;
    written.push(path);

    let path = out.join("fitted.csv");
    write_predictions(&path, &ParamState::new(fit.family, fit.eta.clone())?)?;
    written.push(path);

    let path = out.join("model.json");
    let file = ModelFile {
        response: config.response.clone(),
        categorical: config.categorical.clone(),
        interactions: config.interactions.clone(),
        fit,
    };
    let json = serde_json::to_string_pretty(&file)
        .map_err(|e| CliError::data(format!("model serialization: {e}")))?;
    std::fs::write(&path, json)?;
    written.push(path);
    Ok(written)
}

/// Rows of link-scale predictors, natural parameters and the mean.
fn write_predictions(path: &Path, state: &ParamState) -> CliResult<()> {
    let family = state.family;
    let names = family.param_names();
    let mut header: Vec<String> = vec!["row".into()];
    header.extend(names.iter().map(|p| format!("eta_{p}")));
    header.extend(names.iter().map(|p| p.to_string()));
    header.push("mean".into());
    let natural: Vec<Vec<f64>> = (0..names.len()).map(|k| state.natural(k)).collect();
    let rows = (0..state.n()).map(|i| {
        let mut row = vec![(i + 1).to_string()];
        row.extend(state.eta.iter().map(|e| num(e[i])));
        row.extend(natural.iter().map(|t| num(t[i])));
        row.push(num(family.dist_at(state, i).mean()));
        row
    });
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(path, &header, rows.collect::<Vec<_>>())
}

/// Cross-validated risk curve and the resulting stopping iteration.
pub fn cmd_cv(config: &RunConfig, data: &Path, out: &Path) -> CliResult<(usize, Vec<PathBuf>)> {
    let graph = config.load_graph()?;
    let model = config.model_config(graph.as_ref(), config.cv.mstop_max)?;
    let dataset = load_training(config, data)?;
    let plan = CvPlan::new(dataset.n(), config.cv.folds, config.seed)?;
    let curve = lssboost::cv_risk(&model, &dataset, &plan, config.cv.mstop_max)?;
    let mstop = lssboost::robust_mstop_with(&curve.mean, config.cv.tol, config.cv.rule);
    prepare_out(out)?;

    let path = out.join("risk_curve.csv");
    let mut header = vec!["iteration".to_string(), "risk".to_string()];
    header.extend((1..=plan.folds).map(|f| format!("fold_{f}")));
    let rows = curve.mean.iter().enumerate().map(|(m, r)| {
        let mut row = vec![m.to_string(), num(*r)];
        row.extend(curve.per_fold.iter().map(|f| num(f[m])));
        row
    });
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&path, &header, rows.collect::<Vec<_>>())?;
    let mpath = out.join("mstop.txt");
    std::fs::write(&mpath, format!("{mstop}\n"))?;
    Ok((mstop, vec![path, mpath]))
}

/// Predictions of a stored model on new data.
pub fn cmd_predict(model: &Path, data: &Path, out: &Path) -> CliResult<PathBuf> {
    let file = ModelFile::load(model)?;
    let columns = file.required_columns();
    let dataset = read_dataset(
        data,
        &Schema {
            columns: &columns,
            categorical: &file.categorical,
            response: None,
            interactions: &file.interactions,
        },
    )?;
    let eta = file.fit.predict_eta(&dataset)?;
    let state = ParamState::new(file.fit.family, eta)?;
    prepare_out(out)?;
    let path = out.join("predictions.csv");
    write_predictions(&path, &state)?;
    Ok(path)
}

/// Options of the `simulate` command.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulateArgs {
    pub setting: String,
    pub runs: usize,
    pub modes: Vec<StepKind>,
    pub seed: u64,
    pub n: Option<usize>,
    pub nu: f64,
    pub folds: usize,
    pub fixed_mstop_max: usize,
    pub optimal_mstop_max: usize,
    pub tol: f64,
    pub rule: StopRule,
    /// Write one generated dataset with its true predictors instead of
    /// running the study.
    pub data_only: bool,
}

impl SimulateArgs {
    pub fn new(setting: &str, runs: usize) -> SimulateArgs {
        let standard = StudyOptions::standard(runs);
        SimulateArgs {
            setting: setting.to_string(),
            runs,
            modes: vec![StepKind::Fixed, StepKind::Optimal],
            seed: 1,
            n: None,
            nu: 0.1,
            folds: standard.folds,
            fixed_mstop_max: standard.modes[0].mstop_max,
            optimal_mstop_max: standard.modes[1].mstop_max,
            tol: standard.tol,
            rule: standard.rule,
            data_only: false,
        }
    }

    pub fn spec(&self) -> CliResult<SettingSpec> {
        let mut spec = SettingSpec::parse(&self.setting)?.with_seed(self.seed);
        if let Some(n) = self.n {
            spec = spec.with_n(n);
        }
        Ok(spec)
    }

    pub fn options(&self) -> CliResult<StudyOptions> {
        if self.modes.is_empty() {
            return Err(CliError::config("no step modes selected"));
        }
        let mut options = StudyOptions::standard(self.runs);
        options.modes = self
            .modes
            .iter()
            .map(|m| match m {
                StepKind::Fixed => ModeSpec {
                    step: lssboost::StepMode::Fixed { nu: self.nu },
                    mstop_max: self.fixed_mstop_max,
                },
                StepKind::Optimal => ModeSpec {
                    step: lssboost::StepMode::ShrunkOptimal { shrinkage: self.nu },
                    mstop_max: self.optimal_mstop_max,
                },
            })
            .collect();
        options.folds = self.folds;
        options.tol = self.tol;
        options.rule = self.rule;
        Ok(options)
    }
}

/// Simulation study, or a single generated dataset with `data_only`.
pub fn cmd_simulate(args: &SimulateArgs, out: &Path) -> CliResult<Vec<PathBuf>> {
    let spec = args.spec()?;
    if args.data_only {
        return write_simulated_data(&spec, out);
    }
    let options = args.options()?;
    let report = sim::run_study(&spec, &options)?;
    prepare_out(out)?;
    write_report(&report, out)
}

fn write_simulated_data(spec: &SettingSpec, out: &Path) -> CliResult<Vec<PathBuf>> {
    let bundle = sim::generate(spec)?;
    prepare_out(out)?;
    let data = out.join("data.csv");
    write_dataset(&data, &bundle.data, "y")?;
    let truth = out.join("truth.csv");
    write_predictions(&truth, &bundle.truth)?;
    let mut written = vec![data, truth];
    if matches!(
        spec.variant,
        EffectVariant::SpatialInformative | EffectVariant::SpatialNoninformative | EffectVariant::All
    ) {
        let graph = out.join("zones.graph");
        std::fs::write(&graph, lssboost::graph::NIGERIA_ZONES)?;
        written.push(graph);
    }
    Ok(written)
}

fn covariate_of(learner: &str) -> &str {
    learner
        .split_once('(')
        .map(|(_, rest)| rest.trim_end_matches(')'))
        .unwrap_or(learner)
}

/// Study CSVs: mstop, summary, metrics, selection counts, coefficients
/// and update balance.
pub fn write_report(report: &StudyReport, out: &Path) -> CliResult<Vec<PathBuf>> {
    let modes: Vec<usize> = (0..report.options.modes.len()).collect();
    let mut written = Vec::new();

    let path = out.join("mstop.csv");
    let rows = report
        .records
        .iter()
        .map(|r| vec![(r.run + 1).to_string(), report.mode_name(r.mode).into(), r.mstop.to_string()]);
    write_csv(&path, &["run", "mode", "mstop"], rows.collect::<Vec<_>>())?;
    written.push(path);

    let path = out.join("summary.csv");
    let rows = modes.iter().map(|&mode| {
        let (mean, sd) = report.mstop_summary(mode);
        let recs: Vec<_> = report.records_for(mode).collect();
        let avg = |f: fn(&sim::Metrics) -> f64| {
            recs.iter().map(|r| f(&r.metrics)).sum::<f64>() / recs.len() as f64
        };
        vec![
            report.mode_name(mode).into(),
            recs.len().to_string(),
            num(mean),
            num(sd),
            num(avg(|m| m.crps)),
            num(avg(|m| m.cramer)),
            num(avg(|m| m.nll)),
            num(avg(|m| m.mse)),
        ]
    });
    write_csv(
        &path,
        &["mode", "runs", "mstop_mean", "mstop_sd", "crps", "cramer", "nll", "mse"],
        rows.collect::<Vec<_>>(),
    )?;
    written.push(path);

    let path = out.join("metrics.csv");
    let rows = report.records.iter().map(|r| {
        vec![
            (r.run + 1).to_string(),
            report.mode_name(r.mode).into(),
            num(r.metrics.crps),
            num(r.metrics.cramer),
            num(r.metrics.nll),
            num(r.metrics.mse),
        ]
    });
    write_csv(&path, &["run", "mode", "crps", "cramer", "nll", "mse"], rows.collect::<Vec<_>>())?;
    written.push(path);

    let path = out.join("selection_counts.csv");
    let runs = report.options.runs.to_string();
    let mut rows = Vec::new();
    for (k, list) in report.learners.iter().enumerate() {
        for (j, name) in list.iter().enumerate() {
            let informative = report.informative[k].iter().any(|c| c == covariate_of(name));
            for &mode in &modes {
                rows.push(vec![
                    report.parameters[k].clone(),
                    name.clone(),
                    informative.to_string(),
                    report.mode_name(mode).into(),
                    report.selection_count(mode, k, j).to_string(),
                    runs.clone(),
                ]);
            }
        }
    }
    write_csv(
        &path,
        &["parameter", "baselearner", "informative", "mode", "count", "runs"],
        rows,
    )?;
    written.push(path);

    let path = out.join("coefficients.csv");
    let mut rows = Vec::new();
    for r in &report.records {
        for (k, blocks) in r.coef.iter().enumerate() {
            for (j, c) in blocks.iter().enumerate() {
                for (i, v) in c.iter().enumerate() {
                    rows.push(vec![
                        (r.run + 1).to_string(),
                        report.mode_name(r.mode).into(),
                        report.parameters[k].clone(),
                        report.learners[k][j].clone(),
                        i.to_string(),
                        num(*v),
                    ]);
                }
            }
        }
    }
    write_csv(
        &path,
        &["run", "mode", "parameter", "baselearner", "index", "value"],
        rows,
    )?;
    written.push(path);

    let path = out.join("balance.csv");
    let mut rows = Vec::new();
    for r in &report.records {
        for (k, u) in r.updates.iter().enumerate() {
            rows.push(vec![
                (r.run + 1).to_string(),
                report.mode_name(r.mode).into(),
                report.parameters[k].clone(),
                u.to_string(),
            ]);
        }
    }
    write_csv(&path, &["run", "mode", "parameter", "updates"], rows)?;
    written.push(path);
    Ok(written)
}
