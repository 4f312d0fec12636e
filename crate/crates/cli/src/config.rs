//! Run configuration read from TOML.
//!
//! ```toml
//! family = "gaussian"
//! response = "y"
//! categorical = ["z1"]
//! mstop = 500
//!
//! [step]
//! mode = "optimal"
//! nu = 0.1
//!
//! [learners]
//! shared = [{ kind = "linear", covariate = "x1" }]
//! sigma = [{ kind = "categorical", covariate = "z1", df = 4 }]
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use lssboost::baselearners::PSplineOptions;
use lssboost::{BaseLearnerSpec, Family, Graph, LearnerKind, ModelConfig, StepMode, StopRule};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub family: Family,
    pub response: String,
    /// Columns read as categorical; everything else must be numeric.
    #[serde(default)]
    pub categorical: Vec<String>,
    #[serde(default)]
    pub interactions: Vec<Interaction>,
    /// Learners per parameter name; `shared` is prepended to every list.
    pub learners: BTreeMap<String, Vec<LearnerEntry>>,
    pub step: StepEntry,
    /// Iterations run by `fit`.
    #[serde(default = "default_mstop")]
    pub mstop: usize,
    #[serde(default)]
    pub cv: CvEntry,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Neighborhood file, relative to the config file.
    pub graph: Option<PathBuf>,
    /// Output directory, relative to the config file.
    pub out: Option<PathBuf>,
}

fn default_mstop() -> usize {
    100
}

fn default_seed() -> u64 {
    1
}

/// Product of two binary or categorical columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interaction {
    pub columns: [String; 2],
    /// Defaults to `a:b`.
    pub name: Option<String>,
}

impl Interaction {
    pub fn name(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| format!("{}:{}", self.columns[0], self.columns[1]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindEntry {
    Linear,
    Categorical,
    #[serde(alias = "p_spline")]
    Pspline,
    Mrf,
    LinearPlusSmooth,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerEntry {
    pub kind: KindEntry,
    pub covariate: String,
    /// Target degrees of freedom (default 2).
    pub df: Option<f64>,
    #[serde(default)]
    pub unpenalized: bool,
    pub degree: Option<usize>,
    pub inner_knots: Option<usize>,
    pub diff_order: Option<usize>,
    pub centered: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Fixed,
    #[serde(alias = "shrunk_optimal")]
    Optimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepEntry {
    pub mode: StepKind,
    /// Fixed step length, or the shrinkage factor of the optimal step.
    #[serde(default = "default_nu")]
    pub nu: f64,
}

fn default_nu() -> f64 {
    0.1
}

impl StepEntry {
    pub fn step_mode(&self) -> StepMode {
        match self.mode {
            StepKind::Fixed => StepMode::Fixed { nu: self.nu },
            StepKind::Optimal => StepMode::ShrunkOptimal { shrinkage: self.nu },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvEntry {
    pub folds: usize,
    pub mstop_max: usize,
    pub tol: f64,
    pub rule: StopRule,
}

impl Default for CvEntry {
    fn default() -> Self {
        CvEntry {
            folds: 10,
            mstop_max: 1000,
            tol: 0.02,
            rule: StopRule::RangeRelative,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<RunConfig> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| CliError::config(format!("config: {e}")))?;
        config.check()?;
        Ok(config)
    }

    /// Reads the file and resolves relative paths against its directory.
    pub fn load(path: &Path) -> CliResult<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let mut config = RunConfig::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.graph = config.graph.map(|g| base.join(g));
        config.out = config.out.map(|o| base.join(o));
        Ok(config)
    }

    fn check(&self) -> CliResult<()> {
        let params = self.family.param_names();
        for key in self.learners.keys() {
            if key != "shared" && !params.contains(&key.as_str()) {
                return Err(CliError::config(format!(
                    "learners: '{key}' is not a parameter of the {} family (expected one of {})",
                    self.family.name(),
                    params.join(", ")
                )));
            }
        }
        for entry in self.learners.values().flatten() {
            if entry.unpenalized && entry.df.is_some() {
                return Err(CliError::config(format!(
                    "learner on '{}': df and unpenalized are exclusive",
                    entry.covariate
                )));
            }
        }
        if self.cv.folds < 2 {
            return Err(CliError::config("cv.folds must be at least 2"));
        }
        if !(self.cv.tol >= 0.0) {
            return Err(CliError::config("cv.tol must be nonnegative"));
        }
        for i in &self.interactions {
            if i.columns[0] == i.columns[1] {
                return Err(CliError::config(format!(
                    "interaction of '{}' with itself",
                    i.columns[0]
                )));
            }
        }
        Ok(())
    }

    /// Entries for parameter `k`: shared ones first.
    pub fn entries(&self, k: usize) -> Vec<&LearnerEntry> {
        let name = self.family.param_names()[k];
        let shared = self.learners.get("shared").into_iter().flatten();
        shared.chain(self.learners.get(name).into_iter().flatten()).collect()
    }

    pub fn needs_graph(&self) -> bool {
        self.learners.values().flatten().any(|e| e.kind == KindEntry::Mrf)
    }

    /// Loads the graph when an MRF learner needs one.
    pub fn load_graph(&self) -> CliResult<Option<Arc<Graph>>> {
        if !self.needs_graph() {
            return Ok(None);
        }
        let path = self.graph.as_ref().ok_or_else(|| {
            CliError::config("an MRF base-learner is configured but no graph file was given")
        })?;
        let graph = Graph::load(path)
            .map_err(|e| CliError::config(format!("graph {}: {e}", path.display())))?;
        Ok(Some(Arc::new(graph)))
    }

    pub fn model_config(&self, graph: Option<&Arc<Graph>>, mstop: usize) -> CliResult<ModelConfig> {
        let mut learners = Vec::new();
        for k in 0..self.family.n_params() {
            let list = self
                .entries(k)
                .into_iter()
                .map(|e| learner_spec(e, graph))
                .collect::<CliResult<Vec<_>>>()?;
            if list.is_empty() {
                return Err(CliError::config(format!(
                    "no base-learners for parameter '{}'",
                    self.family.param_names()[k]
                )));
            }
            learners.push(list);
        }
        let config = ModelConfig {
            family: self.family,
            learners,
            step: self.step.step_mode(),
            mstop,
        };
        config.validate()?;
        Ok(config)
    }

    /// Columns the data file must provide.
    pub fn required_columns(&self) -> Vec<String> {
        let derived: Vec<String> = self.interactions.iter().map(Interaction::name).collect();
        let mut cols: Vec<String> = Vec::new();
        let mut add = |c: &str| {
            if !cols.iter().any(|x| x == c) {
                cols.push(c.to_string());
            }
        };
        for e in self.learners.values().flatten() {
            if !derived.contains(&e.covariate) {
                add(&e.covariate);
            }
        }
        for i in &self.interactions {
            add(&i.columns[0]);
            add(&i.columns[1]);
        }
        cols
    }
}

fn learner_spec(e: &LearnerEntry, graph: Option<&Arc<Graph>>) -> CliResult<BaseLearnerSpec> {
    let kind = match e.kind {
        KindEntry::Linear => LearnerKind::Linear,
        KindEntry::Categorical => LearnerKind::Categorical,
        KindEntry::Pspline => LearnerKind::PSpline,
        KindEntry::Mrf => LearnerKind::Mrf,
        KindEntry::LinearPlusSmooth => LearnerKind::LinearPlusSmooth,
    };
    let spec = match kind {
        LearnerKind::Linear => BaseLearnerSpec::linear(&e.covariate),
        LearnerKind::Categorical => BaseLearnerSpec::categorical(&e.covariate),
        LearnerKind::PSpline => BaseLearnerSpec::pspline(&e.covariate),
        LearnerKind::LinearPlusSmooth => BaseLearnerSpec::linear_plus_smooth(&e.covariate),
        LearnerKind::Mrf => {
            let g = graph.ok_or_else(|| {
                CliError::config("an MRF base-learner is configured but no graph file was given")
            })?;
            BaseLearnerSpec::mrf(&e.covariate, g.clone())
        }
    };
    let defaults = PSplineOptions::default();
    let opts = PSplineOptions {
        degree: e.degree.unwrap_or(defaults.degree),
        inner_knots: e.inner_knots.unwrap_or(defaults.inner_knots),
        diff_order: e.diff_order.unwrap_or(defaults.diff_order),
        centered: e.centered.unwrap_or(defaults.centered),
    };
    let df = if e.unpenalized { None } else { Some(e.df.unwrap_or(2.0)) };
    Ok(spec.with_df(df).with_pspline(opts))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        family = "gaussian"
        response = "y"
        [step]
        mode = "fixed"
        [learners]
        shared = [{ kind = "linear", covariate = "x" }]
        sigma = [{ kind = "pspline", covariate = "x", inner_knots = 10 }]
    "#;

    #[test]
    fn minimal_config_with_defaults() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.mstop, 100);
        assert_eq!(c.step.step_mode(), StepMode::Fixed { nu: 0.1 });
        assert_eq!(c.cv, CvEntry::default());
        assert_eq!(c.entries(0).len(), 1);
        assert_eq!(c.entries(1).len(), 2);
        let m = c.model_config(None, 5).unwrap();
        assert_eq!(m.learners[1][1].pspline.inner_knots, 10);
        assert_eq!(c.required_columns(), ["x"]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("response = \"y\"", "response = \"y\"\nshrinkage = 2");
        let e = RunConfig::parse(&text).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let text = MINIMAL.replace("inner_knots = 10", "knots = 10");
        assert!(RunConfig::parse(&text).is_err());
        let text = MINIMAL.replace("sigma =", "tau =");
        assert!(RunConfig::parse(&text).unwrap_err().message.contains("tau"));
    }

    #[test]
    fn mrf_without_graph_is_a_config_error() {
        let text = MINIMAL.replace("kind = \"pspline\"", "kind = \"mrf\"");
        let c = RunConfig::parse(&text).unwrap();
        let e = c.load_graph().unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(c.model_config(None, 1).is_err());
    }

    #[test]
    fn step_outside_unit_interval_is_rejected() {
        let text = MINIMAL.replace("mode = \"fixed\"", "mode = \"optimal\"\nnu = 1.5");
        let c = RunConfig::parse(&text).unwrap();
        assert_eq!(c.model_config(None, 1).unwrap_err().exit_code(), 2);
    }
}
