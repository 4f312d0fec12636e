//! Simulation settings (Gaussian location-scale and ZINB) with categorical,
//! non-linear and spatial add-on effects, metric evaluation and multi-run
//! studies.
//!
//! Covariates `x1..x26`: odd indices ~ U(−1, 1), even indices ~ Bernoulli(½);
//! only `x1..x6` enter the true predictors. Datasets are drawn column by
//! column (x1, …, x26, then the z columns in name order, then the
//! response) from a `ChaCha8Rng` seeded with the master seed and switched
//! to the stream of the run index.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselearners::BaseLearnerSpec;
use crate::boost::{Booster, FitState, ModelConfig, StepMode};
use crate::data::{Column, Dataset};
use crate::distributions::{cramer_dist, crps_obs, Family, ParamState};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::special::logistic;
use crate::tuning::{cv_risk, robust_mstop_with, CvPlan, StopRule};

pub const N_COVARIATES: usize = 26;
pub const GAUSSIAN_N: usize = 500;
pub const ZINB_N: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectVariant {
    Categorical,
    Nonlinear,
    SpatialInformative,
    SpatialNoninformative,
    All,
}

impl EffectVariant {
    pub const ALL_VARIANTS: [EffectVariant; 5] = [
        EffectVariant::Categorical,
        EffectVariant::Nonlinear,
        EffectVariant::SpatialInformative,
        EffectVariant::SpatialNoninformative,
        EffectVariant::All,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EffectVariant::Categorical => "categorical",
            EffectVariant::Nonlinear => "nonlinear",
            EffectVariant::SpatialInformative => "spatial-informative",
            EffectVariant::SpatialNoninformative => "spatial-noninformative",
            EffectVariant::All => "all",
        }
    }

    /// Add-on effect columns with their kind and whether they carry signal.
    fn effect_columns(self) -> Vec<(&'static str, EffectKind, bool)> {
        use EffectKind::*;
        match self {
            EffectVariant::Categorical => vec![("z1", Cat, true), ("z2", Cat, false)],
            EffectVariant::Nonlinear => vec![("z1", Smooth, true), ("z2", Smooth, false)],
            EffectVariant::SpatialInformative => vec![("z1", Spatial, true)],
            EffectVariant::SpatialNoninformative => vec![("z1", Spatial, false)],
            EffectVariant::All => vec![
                ("z1_cat", Cat, true),
                ("z1_nl", Smooth, true),
                ("z1_sp", Spatial, true),
                ("z2_cat", Cat, false),
                ("z2_nl", Smooth, false),
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EffectKind {
    Cat,
    Smooth,
    Spatial,
}

/// A named simulation scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SettingSpec {
    pub family: Family,
    pub variant: EffectVariant,
    pub n: usize,
    pub seed: u64,
}

impl SettingSpec {
    pub fn new(family: Family, variant: EffectVariant) -> SettingSpec {
        let n = match family {
            Family::GaussianLS => GAUSSIAN_N,
            Family::Zinb => ZINB_N,
        };
        SettingSpec {
            family,
            variant,
            n,
            seed: 1,
        }
    }

    pub fn with_seed(self, seed: u64) -> SettingSpec {
        SettingSpec { seed, ..self }
    }

    pub fn with_n(self, n: usize) -> SettingSpec {
        SettingSpec { n, ..self }
    }

    /// `gaussian-categorical`, `zinb-spatial-informative`, ...
    pub fn name(&self) -> String {
        let fam = match self.family {
            Family::GaussianLS => "gaussian",
            Family::Zinb => "zinb",
        };
        format!("{fam}-{}", self.variant.name())
    }

    pub fn parse(name: &str) -> Result<SettingSpec> {
        let (fam, rest) = name
            .split_once('-')
            .ok_or_else(|| Error::Config(format!("unknown setting '{name}'")))?;
        let family = match fam {
            "gaussian" => Family::GaussianLS,
            "zinb" => Family::Zinb,
            _ => return Err(Error::Config(format!("unknown setting family '{fam}'"))),
        };
        let variant = EffectVariant::ALL_VARIANTS
            .into_iter()
            .find(|v| v.name() == rest)
            .ok_or_else(|| Error::Config(format!("unknown effect variant '{rest}'")))?;
        Ok(SettingSpec::new(family, variant))
    }

    /// Base-learners used for every parameter: a linear learner with
    /// intercept per covariate, then one learner per add-on effect column.
    pub fn learner_list(&self, graph: &Arc<Graph>) -> Vec<BaseLearnerSpec> {
        let mut list: Vec<BaseLearnerSpec> = (1..=N_COVARIATES)
            .map(|j| BaseLearnerSpec::linear(&format!("x{j}")))
            .collect();
        for (name, kind, _) in self.variant.effect_columns() {
            list.push(match kind {
                EffectKind::Cat => BaseLearnerSpec::categorical(name),
                EffectKind::Smooth => BaseLearnerSpec::pspline(name),
                EffectKind::Spatial => BaseLearnerSpec::mrf(name, graph.clone()),
            });
        }
        list
    }

    pub fn model_config(&self, step: StepMode, mstop: usize) -> ModelConfig {
        let graph = Arc::new(Graph::nigeria_zones());
        let list = self.learner_list(&graph);
        ModelConfig {
            family: self.family,
            learners: vec![list; self.family.n_params()],
            step,
            mstop,
        }
    }
}

/// Intercept and coefficients of x1..x6 for each parameter.
fn linear_truth(family: Family) -> Vec<(f64, [f64; 6])> {
    match family {
        Family::GaussianLS => vec![
            (0.0, [-1.5, 2.5, 1.5, -2.5, 0.0, 0.0]),
            (2.0, [0.0, 0.0, 0.2, 0.5, -0.2, -0.5]),
        ],
        Family::Zinb => vec![
            (1.8, [0.2, -0.35, -0.2, 0.35, 0.0, 0.0]),
            (-1.1, [0.0, 0.6, 0.5, -0.6, -0.5, 0.0]),
            (-0.8, [0.0, 0.0, 1.0, -1.25, -1.0, 1.25]),
        ],
    }
}

/// Level effects of the informative categorical covariate (levels 1..5).
pub fn categorical_effect(family: Family, k: usize) -> [f64; 5] {
    match (family, k) {
        (Family::GaussianLS, 0) => [-2.0, -1.5, 0.0, 1.5, 2.0],
        (Family::GaussianLS, _) => [-0.4, -0.2, 0.0, 0.2, 0.4],
        (Family::Zinb, 0) => [0.2, 0.1, 0.0, -0.1, -0.2],
        (Family::Zinb, 1) => [0.25, 0.15, 0.0, -0.15, -0.25],
        (Family::Zinb, _) => [0.8, 0.6, 0.0, -0.6, -0.8],
    }
}

/// Non-linear effect of the informative continuous covariate.
pub fn nonlinear_effect(family: Family, k: usize, z: f64) -> f64 {
    match (family, k) {
        (Family::GaussianLS, 0) => 8.0 * (FRAC_PI_2 + z).sin() - 6.5,
        (Family::GaussianLS, _) => (2.85 * z).powi(3) / 6.0 - 2.85 * z,
        (Family::Zinb, 0) => -0.7 * ((z + 1.15).ln() - 0.9 * z) - 0.03,
        (Family::Zinb, 1) => 2.1 * (FRAC_PI_2 + z).sin() - 1.767,
        (Family::Zinb, _) => (2.0 * z).powi(3) / 3.0 - 2.0 * z,
    }
}

/// Region effects in the graph's region order (NC, NE, NW, SE, SS, SW),
/// recentered to an exact zero mean over the six regions.
pub fn spatial_effect(family: Family, k: usize) -> [f64; 6] {
    const LARGE: [f64; 6] = [-0.01, 3.0, 1.41, -1.03, -1.45, -1.91];
    const SMALL: [f64; 6] = [-0.001, 0.3, 0.141, -0.103, -0.145, -0.191];
    let raw = match (family, k) {
        (Family::GaussianLS, 0) => LARGE,
        (Family::Zinb, 0) => SMALL.map(|v| -v),
        _ => SMALL,
    };
    let mean = raw.iter().sum::<f64>() / 6.0;
    raw.map(|v| v - mean)
}

/// Simulated dataset with its true predictors and informative-effect
/// registry.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthBundle {
    pub spec: SettingSpec,
    pub data: Dataset,
    pub truth: ParamState,
    /// Covariate names with a nonzero true effect, per parameter.
    pub informative: Vec<Vec<String>>,
}

impl TruthBundle {
    pub fn is_informative(&self, k: usize, covariate: &str) -> bool {
        self.informative[k].iter().any(|c| c == covariate)
    }
}

/// Informative covariates per parameter.
pub fn informative_registry(spec: &SettingSpec) -> Vec<Vec<String>> {
    linear_truth(spec.family)
        .iter()
        .map(|(_, beta)| {
            let mut names: Vec<String> = beta
                .iter()
                .enumerate()
                .filter(|(_, b)| **b != 0.0)
                .map(|(j, _)| format!("x{}", j + 1))
                .collect();
            for (name, _, informative) in spec.variant.effect_columns() {
                if informative {
                    names.push(name.to_string());
                }
            }
            names
        })
        .collect()
}

/// Dataset for `spec` on run stream 0.
pub fn generate(spec: &SettingSpec) -> Result<TruthBundle> {
    let mut rng = run_rng(spec.seed, 0);
    draw(spec, &mut rng)
}

fn run_rng(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

/// Draws one dataset of `spec.n` observations from `rng`.
pub fn draw(spec: &SettingSpec, rng: &mut ChaCha8Rng) -> Result<TruthBundle> {
    let n = spec.n;
    let family = spec.family;
    let graph = Graph::nigeria_zones();
    let mut data = Dataset::new();
    let mut xs: Vec<Vec<f64>> = Vec::with_capacity(N_COVARIATES);
    for j in 1..=N_COVARIATES {
        let col: Vec<f64> = if j % 2 == 1 {
            (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
        } else {
            (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect()
        };
        xs.push(col);
    }

    let mut eta: Vec<Vec<f64>> = linear_truth(family)
        .iter()
        .map(|(icpt, beta)| {
            (0..n)
                .map(|i| icpt + (0..6).map(|j| beta[j] * xs[j][i]).sum::<f64>())
                .collect()
        })
        .collect();
    for (j, col) in xs.into_iter().enumerate() {
        data.push(format!("x{}", j + 1), Column::Numeric(col))?;
    }

    let mut effects = spec.variant.effect_columns();
    effects.sort_by_key(|e| e.0);
    for (name, kind, informative) in effects {
        match kind {
            EffectKind::Cat => {
                let codes: Vec<usize> = (0..n).map(|_| rng.random_range(0..5)).collect();
                if informative {
                    for (k, e) in eta.iter_mut().enumerate() {
                        let table = categorical_effect(family, k);
                        for (v, &c) in e.iter_mut().zip(&codes) {
                            *v += table[c];
                        }
                    }
                }
                let levels = (1..=5).map(|l| l.to_string()).collect();
                data.push(name, Column::Categorical { codes, levels })?;
            }
            EffectKind::Smooth => {
                let z: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                if informative {
                    for (k, e) in eta.iter_mut().enumerate() {
                        for (v, &zi) in e.iter_mut().zip(&z) {
                            *v += nonlinear_effect(family, k, zi);
                        }
                    }
                }
                data.push(name, Column::Numeric(z))?;
            }
            EffectKind::Spatial => {
                let codes: Vec<usize> = (0..n).map(|_| rng.random_range(0..graph.len())).collect();
                if informative {
                    for (k, e) in eta.iter_mut().enumerate() {
                        let table = spatial_effect(family, k);
                        for (v, &c) in e.iter_mut().zip(&codes) {
                            *v += table[c];
                        }
                    }
                }
                let levels = graph.regions().to_vec();
                data.push(name, Column::Categorical { codes, levels })?;
            }
        }
    }

    let y: Vec<f64> = (0..n)
        .map(|i| match family {
            Family::GaussianLS => {
                let (mu, sigma) = (eta[0][i], eta[1][i].exp());
                Normal::new(mu, sigma)
                    .map(|d| d.sample(rng))
                    .map_err(|e| Error::Numeric(format!("normal sampler: {e}")))
            }
            Family::Zinb => sample_zinb(rng, eta[0][i].exp(), eta[1][i].exp(), logistic(eta[2][i])),
        })
        .collect::<Result<_>>()?;
    let truth = ParamState::new(family, eta)?;
    Ok(TruthBundle {
        spec: *spec,
        data: data.with_response(y)?,
        truth,
        informative: informative_registry(spec),
    })
}

/// Zero with probability π, otherwise a negative binomial draw as a
/// Gamma(1/α, αμ)–Poisson mixture.
fn sample_zinb(rng: &mut ChaCha8Rng, mu: f64, alpha: f64, pi: f64) -> Result<f64> {
    if rng.random_bool(pi) {
        return Ok(0.0);
    }
    let rate = Gamma::new(1.0 / alpha, alpha * mu)
        .map_err(|e| Error::Numeric(format!("gamma sampler: {e}")))?
        .sample(rng);
    if rate <= 0.0 {
        return Ok(0.0);
    }
    Ok(Poisson::new(rate)
        .map_err(|e| Error::Numeric(format!("poisson sampler: {e}")))?
        .sample(rng))
}

/// Test-set scores of one fitted model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Mean CRPS against the observed test responses.
    pub crps: f64,
    /// Mean Cramér distance to the true test distributions.
    pub cramer: f64,
    /// Mean negative log-likelihood per test observation.
    pub nll: f64,
    /// Mean squared error of the predicted mean against the true mean.
    pub mse: f64,
}

/// Scores a predicted parameter state on the test bundle.
pub fn score(pred: &ParamState, test: &TruthBundle) -> Result<Metrics> {
    let y = test.data.response()?;
    let n = y.len();
    if pred.n() != n {
        return Err(Error::Data("prediction and test set differ in length".into()));
    }
    let family = pred.family;
    let mut m = Metrics {
        crps: 0.0,
        cramer: 0.0,
        nll: 0.0,
        mse: 0.0,
    };
    for (i, &yi) in y.iter().enumerate() {
        m.crps += crps_obs(pred, i, yi);
        m.cramer += cramer_dist(pred, &test.truth, i)?;
        m.nll += family.nll_obs(&pred.at(i), yi);
        let d = family.dist_at(pred, i).mean() - family.dist_at(&test.truth, i).mean();
        m.mse += d * d;
    }
    let nf = n as f64;
    m.crps /= nf;
    m.cramer /= nf;
    m.nll /= nf;
    m.mse /= nf;
    Ok(m)
}

/// Metrics and selection indicators of a fit.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub metrics: Metrics,
    /// `selected[k][j]`: block j of parameter k has a nonzero coefficient.
    pub selected: Vec<Vec<bool>>,
}

pub fn evaluate(fit: &FitState, test: &TruthBundle) -> Result<Evaluation> {
    let pred = ParamState::new(fit.family, fit.predict_eta(&test.data)?)?;
    Ok(Evaluation {
        metrics: score(&pred, test)?,
        selected: selection(fit),
    })
}

pub fn selection(fit: &FitState) -> Vec<Vec<bool>> {
    fit.coef
        .iter()
        .map(|blocks| blocks.iter().map(|c| c.iter().any(|&v| v != 0.0)).collect())
        .collect()
}

/// One step-length arm of a study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    pub step: StepMode,
    /// Length of the cross-validated risk curve.
    pub mstop_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyOptions {
    pub runs: usize,
    pub modes: Vec<ModeSpec>,
    pub folds: usize,
    pub tol: f64,
    pub rule: StopRule,
    /// Iterations over which parameter update counts are recorded.
    pub balance_window: usize,
}

impl StudyOptions {
    /// Fixed(0.1) and ShrunkOptimal(0.1) arms with 10-fold CV.
    pub fn standard(runs: usize) -> StudyOptions {
        StudyOptions {
            runs,
            modes: vec![
                ModeSpec {
                    step: StepMode::Fixed { nu: 0.1 },
                    mstop_max: 5000,
                },
                ModeSpec {
                    step: StepMode::ShrunkOptimal { shrinkage: 0.1 },
                    mstop_max: 1000,
                },
            ],
            folds: 10,
            tol: 0.02,
            rule: StopRule::RangeRelative,
            balance_window: 200,
        }
    }
}

/// Result of one (run, mode) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run: usize,
    pub mode: usize,
    pub mstop: usize,
    pub metrics: Metrics,
    pub selected: Vec<Vec<bool>>,
    /// Raw coefficients of the model stopped at `mstop`.
    pub coef: Vec<Vec<Vec<f64>>>,
    /// Updates per parameter within the first `balance_window` iterations.
    pub updates: Vec<usize>,
    pub fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub setting: SettingSpec,
    pub options: StudyOptions,
    pub parameters: Vec<String>,
    /// Base-learner names per parameter.
    pub learners: Vec<Vec<String>>,
    pub informative: Vec<Vec<String>>,
    /// Sorted by run, then mode.
    pub records: Vec<RunRecord>,
}

impl StudyReport {
    pub fn mode_name(&self, mode: usize) -> &'static str {
        self.options.modes[mode].step.name()
    }

    pub fn records_for(&self, mode: usize) -> impl Iterator<Item = &RunRecord> {
        self.records.iter().filter(move |r| r.mode == mode)
    }

    /// Mean and sample standard deviation of the stopping iterations.
    pub fn mstop_summary(&self, mode: usize) -> (f64, f64) {
        let v: Vec<f64> = self.records_for(mode).map(|r| r.mstop as f64).collect();
        mean_sd(&v)
    }

    /// Number of runs in which block `j` of parameter `k` was selected.
    pub fn selection_count(&self, mode: usize, k: usize, j: usize) -> usize {
        self.records_for(mode).filter(|r| r.selected[k][j]).count()
    }

    /// Index of the learner named `name` for parameter `k`.
    pub fn learner_index(&self, k: usize, name: &str) -> Option<usize> {
        self.learners[k].iter().position(|l| l == name)
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs the study: per run, one training and one test set drawn from the
/// run's stream, then every mode on the same data.
pub fn run_study(spec: &SettingSpec, options: &StudyOptions) -> Result<StudyReport> {
    if options.runs == 0 {
        return Err(Error::Config("a study needs at least one run".into()));
    }
    if options.modes.is_empty() {
        return Err(Error::Config("a study needs at least one step mode".into()));
    }
    let per_run: Vec<Vec<RunRecord>> = (0..options.runs)
        .into_par_iter()
        .map(|run| study_run(spec, options, run).map_err(|e| e.in_run(run)))
        .collect::<Result<_>>()?;
    let config = spec.model_config(options.modes[0].step, 0);
    let names = Booster::new(&config, &generate(spec)?.data)?
        .state()
        .terms
        .iter()
        .map(|list| list.iter().map(|t| t.name.clone()).collect())
        .collect();
    Ok(StudyReport {
        setting: *spec,
        options: options.clone(),
        parameters: spec.family.param_names().iter().map(|s| s.to_string()).collect(),
        learners: names,
        informative: informative_registry(spec),
        records: per_run.into_iter().flatten().collect(),
    })
}

fn study_run(spec: &SettingSpec, options: &StudyOptions, run: usize) -> Result<Vec<RunRecord>> {
    let mut rng = run_rng(spec.seed, run as u64);
    let train = draw(spec, &mut rng)?;
    let test = draw(spec, &mut rng)?;
    let fold_seed = spec.seed.wrapping_add(run as u64);
    let mut out = Vec::with_capacity(options.modes.len());
    for (mode_idx, mode) in options.modes.iter().enumerate() {
        let (mstop, mut booster) = {
            let config = spec.model_config(mode.step, mode.mstop_max);
            let plan = CvPlan::new(train.data.n(), options.folds, fold_seed)?;
            let curve = cv_risk(&config, &train.data, &plan, mode.mstop_max)?;
            (robust_mstop_with(&curve.mean, options.tol, options.rule), Booster::new(&config, &train.data)?)
        };
        booster.run_to(mstop.max(options.balance_window))?;
        let full = booster.into_state();
        let mut updates = vec![0; spec.family.n_params()];
        for rec in full.trace.iter().take(options.balance_window) {
            updates[rec.k_star] += 1;
        }
        let fit = full.truncated(mstop.min(full.iterations()));
        let eval = evaluate(&fit, &test)?;
        out.push(RunRecord {
            run,
            mode: mode_idx,
            mstop,
            metrics: eval.metrics,
            selected: eval.selected,
            fallbacks: fit.trace.iter().filter(|r| r.fallback_used).count(),
            coef: fit.coef,
            updates,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn setting_names_round_trip() {
        for family in [Family::GaussianLS, Family::Zinb] {
            for v in EffectVariant::ALL_VARIANTS {
                let s = SettingSpec::new(family, v);
                assert_eq!(SettingSpec::parse(&s.name()).unwrap(), s);
            }
        }
        assert!(SettingSpec::parse("poisson-categorical").is_err());
        assert!(SettingSpec::parse("gaussian-smooth").is_err());
    }

    #[test]
    fn spatial_tables_are_centered() {
        for family in [Family::GaussianLS, Family::Zinb] {
            for k in 0..family.n_params() {
                let t = spatial_effect(family, k);
                assert!(t.iter().sum::<f64>().abs() / 6.0 < 1e-10);
            }
        }
    }
}
