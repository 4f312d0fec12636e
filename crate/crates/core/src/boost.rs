//! Non-cyclical component-wise boosting.
//!
//! Every iteration builds one update candidate per distribution parameter
//! (best-fitting base-learner for that parameter's negative gradient,
//! scaled by the step length) and applies only the candidate with the
//! lowest negative log-likelihood.

use serde::{Deserialize, Serialize};

use crate::baselearners::{self, BaseLearnerSpec, Basis, DesignPenalty, LearnerKind, RawDesign};
use crate::data::Dataset;
use crate::distributions::{Family, ParamState, ZinbTerms};
use crate::error::{Error, Result};
use crate::special::logit;
use crate::steplength::{self, Line, StepContext, WarmStartTable};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum StepMode {
    /// Constant step length ν.
    Fixed { nu: f64 },
    /// Optimal step length along the direction times a shrinkage factor λ.
    ShrunkOptimal { shrinkage: f64 },
}

impl StepMode {
    pub fn name(&self) -> &'static str {
        match self {
            StepMode::Fixed { .. } => "fixed",
            StepMode::ShrunkOptimal { .. } => "optimal",
        }
    }

    fn factor(&self) -> f64 {
        match *self {
            StepMode::Fixed { nu } => nu,
            StepMode::ShrunkOptimal { shrinkage } => shrinkage,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub family: Family,
    /// Base-learner specifications, one list per distribution parameter.
    pub learners: Vec<Vec<BaseLearnerSpec>>,
    pub step: StepMode,
    pub mstop: usize,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let n = self.family.n_params();
        if self.learners.len() != n {
            return Err(Error::Config(format!(
                "{} family has {n} parameters but {} base-learner lists were given",
                self.family.name(),
                self.learners.len()
            )));
        }
        for (k, list) in self.learners.iter().enumerate() {
            if list.is_empty() {
                return Err(Error::Config(format!(
                    "no base-learners for parameter '{}'",
                    self.family.param_names()[k]
                )));
            }
        }
        let f = self.step.factor();
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::Config(format!(
                "step length / shrinkage {f} must lie in (0, 1]"
            )));
        }
        Ok(())
    }
}

/// One parameter's update candidate within an iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub k: usize,
    pub j: usize,
    pub nu: f64,
    pub nu_star: Option<f64>,
    /// NLL after applying this candidate; +∞ if non-improving.
    pub risk: f64,
    pub fallback: bool,
    pub improving: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// Iteration number, starting at 1.
    pub m: usize,
    pub k_star: usize,
    pub j_star: usize,
    /// Applied step length.
    pub nu: f64,
    /// Optimal step length before shrinkage.
    pub nu_star: Option<f64>,
    /// NLL on the training data after the update.
    pub inner_risk: f64,
    pub fallback_used: bool,
    /// Raw-basis coefficient change applied to block (k_star, j_star).
    pub increment: Vec<f64>,
    pub candidates: Vec<Candidate>,
}

/// What a fitted base-learner needs for prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnedTerm {
    pub name: String,
    pub covariate: String,
    pub kind: LearnerKind,
    pub basis: Basis,
    pub lambda: f64,
}

impl LearnedTerm {
    fn from_learner(dp: &DesignPenalty) -> Self {
        LearnedTerm {
            name: dp.name.clone(),
            covariate: dp.covariate.clone(),
            kind: dp.kind,
            basis: dp.basis.clone(),
            lambda: dp.lambda(),
        }
    }
}

/// Fitted model: offsets, accumulated raw-basis coefficients and the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitState {
    pub family: Family,
    pub step: StepMode,
    pub offsets: Vec<f64>,
    pub terms: Vec<Vec<LearnedTerm>>,
    pub coef: Vec<Vec<Vec<f64>>>,
    pub trace: Vec<TraceRecord>,
    pub stop_reason: Option<String>,
    /// Training predictors (not serialized).
    #[serde(skip)]
    pub eta: Vec<Vec<f64>>,
}

impl FitState {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    /// Accumulated coefficients after the first `m` iterations (replay).
    pub fn coefficients_at(&self, m: usize) -> Vec<Vec<Vec<f64>>> {
        let mut coef: Vec<Vec<Vec<f64>>> = self
            .coef
            .iter()
            .map(|blocks| blocks.iter().map(|c| vec![0.0; c.len()]).collect())
            .collect();
        for rec in self.trace.iter().take(m) {
            for (c, d) in coef[rec.k_star][rec.j_star].iter_mut().zip(&rec.increment) {
                *c += d;
            }
        }
        coef
    }

    /// Model truncated to its first `m` iterations.
    pub fn truncated(&self, m: usize) -> FitState {
        FitState {
            coef: self.coefficients_at(m),
            trace: self.trace.iter().take(m).cloned().collect(),
            stop_reason: None,
            eta: Vec::new(),
            ..self.clone()
        }
    }

    /// Cumulative coefficients of block `(k, j)` after each iteration
    /// `0..=iterations()`.
    pub fn coefficient_path(&self, k: usize, j: usize) -> Vec<Vec<f64>> {
        let mut current = vec![0.0; self.coef[k][j].len()];
        let mut path = vec![current.clone()];
        for rec in &self.trace {
            if rec.k_star == k && rec.j_star == j {
                for (c, d) in current.iter_mut().zip(&rec.increment) {
                    *c += d;
                }
            }
            path.push(current.clone());
        }
        path
    }

    /// Number of iterations in which each block was selected.
    pub fn selection_counts(&self) -> Vec<Vec<usize>> {
        let mut counts: Vec<Vec<usize>> =
            self.coef.iter().map(|b| vec![0; b.len()]).collect();
        for rec in &self.trace {
            counts[rec.k_star][rec.j_star] += 1;
        }
        counts
    }

    /// Raw designs of every term on `data`.
    pub fn designs(&self, data: &Dataset) -> Result<Vec<Vec<RawDesign>>> {
        self.terms
            .iter()
            .map(|list| {
                list.iter()
                    .map(|t| t.basis.design(data, &t.covariate))
                    .collect::<Result<Vec<_>>>()
            })
            .collect()
    }

    /// Link-scale predictors on new data.
    pub fn predict_eta(&self, data: &Dataset) -> Result<Vec<Vec<f64>>> {
        let n = data.n();
        let designs = self.designs(data)?;
        let mut eta: Vec<Vec<f64>> = self.offsets.iter().map(|&o| vec![o; n]).collect();
        for (k, list) in designs.iter().enumerate() {
            for (j, design) in list.iter().enumerate() {
                let c = &self.coef[k][j];
                if c.iter().any(|&v| v != 0.0) {
                    design.mul_add(c, 1.0, &mut eta[k]);
                }
            }
        }
        Ok(eta)
    }

    /// Natural-scale parameters on new data.
    pub fn predict(&self, data: &Dataset) -> Result<Vec<Vec<f64>>> {
        let state = ParamState::new(self.family, self.predict_eta(data)?)?;
        Ok((0..self.family.n_params()).map(|k| state.natural(k)).collect())
    }
}

/// Offsets: Gaussian mean and log population standard deviation; ZINB
/// intercept-only maximum likelihood.
pub fn init_offsets(family: Family, y: &[f64]) -> Result<Vec<f64>> {
    if y.is_empty() {
        return Err(Error::Data("empty response".into()));
    }
    family.validate_response(y)?;
    match family {
        Family::GaussianLS => {
            if y.len() < 2 {
                return Err(Error::Data(
                    "standard deviation undefined for a single observation".into(),
                ));
            }
            let n = y.len() as f64;
            let mean = y.iter().sum::<f64>() / n;
            let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            if !(var > 0.0) {
                return Err(Error::Data("constant response: standard deviation is zero".into()));
            }
            Ok(vec![mean, 0.5 * var.ln()])
        }
        Family::Zinb => zinb_intercepts(y).map(|t| t.to_vec()),
    }
}

fn zinb_intercepts(y: &[f64]) -> Result<[f64; 3]> {
    let n = y.len() as f64;
    let zeros = y.iter().filter(|&&v| v == 0.0).count() as f64;
    if zeros == n {
        return Err(Error::Data(
            "all counts are zero: zero-inflation is not identified".into(),
        ));
    }
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut groups: Vec<(f64, f64)> = Vec::new();
    for v in sorted {
        match groups.last_mut() {
            Some((value, count)) if *value == v => *count += 1.0,
            _ => groups.push((v, 1.0)),
        }
    }
    let objective = |t: &[f64; 3]| -> f64 {
        groups
            .iter()
            .map(|&(v, c)| c * Family::Zinb.nll_obs(t, v))
            .sum()
    };
    let gradient = |t: &[f64; 3]| -> [f64; 3] {
        let mut g = [0.0; 3];
        for &(v, c) in &groups {
            for (k, gk) in g.iter_mut().enumerate() {
                *gk -= c * Family::Zinb.neg_grad_obs(t, v, k);
            }
        }
        g
    };

    let mean = y.iter().sum::<f64>() / n;
    let frac0 = zeros / n;
    let p0 = 1.0 / (1.0 + mean);
    let start_pi = ((frac0 - p0) / (1.0 - p0)).max(0.01);
    let mut theta = [mean.max(0.1).ln(), 0.0, logit(start_pi.min(0.99))];
    let mut value = objective(&theta);
    if !value.is_finite() {
        theta[2] = logit((frac0 / 2.0).max(1e-3));
        value = objective(&theta);
    }
    for _ in 0..200 {
        let g = gradient(&theta);
        let mut hess = nalgebra::Matrix3::<f64>::zeros();
        for c in 0..3 {
            let h = 1e-5;
            let (mut up, mut down) = (theta, theta);
            up[c] += h;
            down[c] -= h;
            let (gu, gd) = (gradient(&up), gradient(&down));
            for r in 0..3 {
                hess[(r, c)] = (gu[r] - gd[r]) / (2.0 * h);
            }
        }
        let hess = 0.5 * (hess + hess.transpose());
        let gv = nalgebra::Vector3::from(g);
        let mut dir = match hess.cholesky() {
            Some(ch) => -ch.solve(&gv),
            None => -gv,
        };
        // keep single steps within a sane range on the link scale
        let largest = dir.amax();
        if largest > 2.0 {
            dir *= 2.0 / largest;
        }
        let slope = gv.dot(&dir);
        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-12 {
            let cand = [theta[0] + t * dir[0], theta[1] + t * dir[1], theta[2] + t * dir[2]];
            let v = objective(&cand);
            if v.is_finite() && v <= value + 1e-4 * t * slope {
                accepted = Some((cand, v));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, v)) = accepted else { break };
        let change = value - v;
        theta = cand;
        value = v;
        if change <= 1e-8 {
            break;
        }
    }
    if !theta.iter().all(|v| v.is_finite()) {
        return Err(Error::Numeric("intercept-only fit diverged".into()));
    }
    Ok(theta)
}

/// Boosting engine over realized base-learners.
#[derive(Debug, Clone)]
pub struct Booster {
    family: Family,
    step: StepMode,
    learners: Vec<Vec<DesignPenalty>>,
    y: Vec<f64>,
    state: FitState,
    warm: WarmStartTable,
    risk: f64,
    /// ZINB per-observation terms at the current predictors.
    zinb: Vec<ZinbTerms>,
}

impl Booster {
    /// Builds and calibrates all base-learners and initializes the offsets.
    pub fn new(config: &ModelConfig, data: &Dataset) -> Result<Booster> {
        config.validate()?;
        let y = data.response()?.to_vec();
        let offsets = init_offsets(config.family, &y)?;
        let mut learners = Vec::with_capacity(config.learners.len());
        for specs in &config.learners {
            let mut list = Vec::new();
            for spec in specs {
                list.extend(baselearners::build(spec, data)?);
            }
            learners.push(list);
        }
        Booster::from_parts(config.family, config.step, learners, y, offsets)
    }

    /// Assembles a booster from already realized base-learners.
    pub fn from_parts(
        family: Family,
        step: StepMode,
        learners: Vec<Vec<DesignPenalty>>,
        y: Vec<f64>,
        offsets: Vec<f64>,
    ) -> Result<Booster> {
        let n = y.len();
        family.validate_response(&y)?;
        if learners.len() != family.n_params() || offsets.len() != family.n_params() {
            return Err(Error::Config("one learner list and offset per parameter required".into()));
        }
        if learners.iter().flatten().any(|dp| dp.n() != n) {
            return Err(Error::Data("base-learner designs and response differ in length".into()));
        }
        let eta: Vec<Vec<f64>> = offsets.iter().map(|&o| vec![o; n]).collect();
        let state = FitState {
            family,
            step,
            offsets,
            terms: learners
                .iter()
                .map(|l| l.iter().map(LearnedTerm::from_learner).collect())
                .collect(),
            coef: learners
                .iter()
                .map(|l| l.iter().map(|dp| vec![0.0; dp.raw.ncols()]).collect())
                .collect(),
            trace: Vec::new(),
            stop_reason: None,
            eta,
        };
        let risk = total_nll(family, &state.eta, &y);
        if !risk.is_finite() {
            return Err(Error::Numeric("initial risk is not finite".into()));
        }
        let zinb = match family {
            Family::Zinb => steplength::zinb_terms(&state.eta, &y),
            Family::GaussianLS => Vec::new(),
        };
        Ok(Booster {
            family,
            step,
            learners,
            y,
            state,
            warm: WarmStartTable::new(),
            risk,
            zinb,
        })
    }

    pub fn state(&self) -> &FitState {
        &self.state
    }

    pub fn into_state(self) -> FitState {
        self.state
    }

    pub fn learners(&self) -> &[Vec<DesignPenalty>] {
        &self.learners
    }

    /// Current training NLL.
    pub fn risk(&self) -> f64 {
        self.risk
    }

    pub fn is_stopped(&self) -> bool {
        self.state.stop_reason.is_some()
    }

    /// One boosting iteration. Returns `None` once the run has stopped
    /// early because no candidate improves the fit.
    pub fn step(&mut self) -> Result<Option<&TraceRecord>> {
        if self.is_stopped() {
            return Ok(None);
        }
        let m = self.state.trace.len() + 1;
        let n = self.y.len();
        let mut candidates = Vec::with_capacity(self.learners.len());
        let mut directions = Vec::with_capacity(self.learners.len());
        for k in 0..self.learners.len() {
            let u: Vec<f64> = if self.zinb.is_empty() {
                (0..n)
                    .map(|i| {
                        let e = eta_at(&self.state.eta, i);
                        self.family.neg_grad_obs(&e, self.y[i], k)
                    })
                    .collect()
            } else {
                self.zinb.iter().zip(&self.y).map(|(t, &y)| t.neg_grad(y, k)).collect()
            };
            if u.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite negative gradient for '{}'",
                    self.family.param_names()[k]
                ))
                .at_iteration(m));
            }
            let (j, coef) = best_learner(&self.learners[k], &u);
            let dp = &self.learners[k][j];
            let coef_raw = dp.to_raw(&coef);
            let mut h = vec![0.0; n];
            dp.raw.mul_add(&coef_raw, 1.0, &mut h);
            let (cand, dir) = self.candidate(k, j, h, coef_raw);
            candidates.push(cand);
            directions.push(dir);
        }

        let mut best: Option<usize> = None;
        for (idx, c) in candidates.iter().enumerate() {
            if c.improving && best.is_none_or(|b| c.risk < candidates[b].risk) {
                best = Some(idx);
            }
        }
        let Some(best) = best else {
            self.state.stop_reason = Some(format!(
                "iteration {m}: no parameter has an improving update candidate"
            ));
            return Ok(None);
        };
        let chosen = candidates[best].clone();
        let (h, coef_raw) = directions.swap_remove(best);
        let (k, j, nu) = (chosen.k, chosen.j, chosen.nu);
        for (e, hv) in self.state.eta[k].iter_mut().zip(&h) {
            *e += nu * hv;
        }
        for ((t, &e), &y) in self.zinb.iter_mut().zip(&self.state.eta[k]).zip(&self.y) {
            t.set(k, e, y);
        }
        let increment: Vec<f64> = coef_raw.iter().map(|c| nu * c).collect();
        for (c, d) in self.state.coef[k][j].iter_mut().zip(&increment) {
            *c += d;
        }
        self.risk = chosen.risk;
        self.state.trace.push(TraceRecord {
            m,
            k_star: k,
            j_star: j,
            nu,
            nu_star: chosen.nu_star,
            inner_risk: chosen.risk,
            fallback_used: chosen.fallback,
            increment,
            candidates,
        });
        Ok(self.state.trace.last())
    }

    /// Builds the update candidate for parameter `k` along learner `j`.
    fn candidate(
        &mut self,
        k: usize,
        j: usize,
        h: Vec<f64>,
        coef_raw: Vec<f64>,
    ) -> (Candidate, (Vec<f64>, Vec<f64>)) {
        let mut cand = Candidate {
            k,
            j,
            nu: 0.0,
            nu_star: None,
            risk: f64::INFINITY,
            fallback: false,
            improving: false,
        };
        if h.iter().all(|&v| v == 0.0) {
            return (cand, (h, coef_raw));
        }
        let ctx = StepContext {
            family: self.family,
            k,
            eta: &self.state.eta,
            direction: &h,
            y: &self.y,
        };
        let line = if self.zinb.is_empty() {
            Line::new(ctx)
        } else {
            Line::with_terms(ctx, &self.zinb)
        };
        match self.step {
            StepMode::Fixed { nu } => {
                cand.nu = nu;
                cand.improving = true;
            }
            StepMode::ShrunkOptimal { shrinkage } => {
                match line.optimal_step(&mut self.warm, j) {
                    Ok(out) => {
                        cand.nu_star = Some(out.nu_star);
                        cand.nu = steplength::shrunk(out.nu_star, shrinkage);
                        cand.fallback = out.fallback;
                        cand.improving = out.improving;
                    }
                    Err(_) => {
                        cand.fallback = true;
                    }
                }
            }
        }
        if cand.improving {
            let risk = line.nll(cand.nu);
            if risk.is_finite() {
                cand.risk = risk;
            } else {
                cand.improving = false;
            }
        }
        (cand, (h, coef_raw))
    }

    /// Runs until `mstop` total iterations or an early stop.
    pub fn run_to(&mut self, mstop: usize) -> Result<()> {
        while self.state.trace.len() < mstop {
            if self.step()?.is_none() {
                break;
            }
        }
        Ok(())
    }
}

#[inline]
fn eta_at(eta: &[Vec<f64>], i: usize) -> [f64; 3] {
    let mut e = [0.0; 3];
    for (k, v) in eta.iter().enumerate() {
        e[k] = v[i];
    }
    e
}

fn total_nll(family: Family, eta: &[Vec<f64>], y: &[f64]) -> f64 {
    (0..y.len())
        .map(|i| family.nll_obs(&eta_at(eta, i), y[i]))
        .sum()
}

/// Base-learner with the smallest residual sum of squares; ties go to the
/// lowest index.
fn best_learner(learners: &[DesignPenalty], u: &[f64]) -> (usize, Vec<f64>) {
    let mut best = (0, Vec::new(), f64::NEG_INFINITY);
    for (j, dp) in learners.iter().enumerate() {
        let (coef, reduction) = dp.project(u);
        if reduction > best.2 || j == 0 {
            best = (j, coef, reduction);
        }
    }
    (best.0, best.1)
}

/// Fits the model: builds the base-learners, then boosts `config.mstop`
/// iterations (or until early stop).
pub fn run(config: &ModelConfig, data: &Dataset) -> Result<FitState> {
    let mut booster = Booster::new(config, data)?;
    booster.run_to(config.mstop)?;
    Ok(booster.into_state())
}
