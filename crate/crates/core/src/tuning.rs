//! Cross-validated risk curves and the robust stopping rule.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boost::{Booster, ModelConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};

/// Assignment of observations to folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CvPlan {
    pub folds: usize,
    pub assignment: Vec<usize>,
    pub seed: u64,
}

impl CvPlan {
    /// Seeded shuffle of the row indices, then round-robin assignment, so
    /// fold sizes differ by at most one.
    pub fn new(n: usize, folds: usize, seed: u64) -> Result<CvPlan> {
        if folds < 2 || folds > n {
            return Err(Error::Config(format!(
                "{folds} folds impossible for {n} observations"
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut assignment = vec![0; n];
        for (pos, &row) in order.iter().enumerate() {
            assignment[row] = pos % folds;
        }
        Ok(CvPlan {
            folds,
            assignment,
            seed,
        })
    }

    pub fn from_assignment(assignment: Vec<usize>, folds: usize) -> Result<CvPlan> {
        if assignment.iter().any(|&f| f >= folds) {
            return Err(Error::Config("fold id out of range".into()));
        }
        Ok(CvPlan {
            folds,
            assignment,
            seed: 0,
        })
    }

    /// Leave-one-out plan.
    pub fn leave_one_out(n: usize) -> CvPlan {
        CvPlan {
            folds: n,
            assignment: (0..n).collect(),
            seed: 0,
        }
    }

    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == fold)
            .collect()
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] != fold)
            .collect()
    }
}

/// Mean held-out negative log-likelihood per iteration `m = 0..=mstop_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskCurve {
    pub mean: Vec<f64>,
    pub per_fold: Vec<Vec<f64>>,
}

/// Held-out risk path of one fold: a single boosting pass on the training
/// part, with held-out predictors updated alongside.
pub fn fold_risk(
    config: &ModelConfig,
    train: &Dataset,
    test: &Dataset,
    mstop_max: usize,
) -> Result<Vec<f64>> {
    let y_test = test.response()?;
    if y_test.is_empty() {
        return Err(Error::Data("empty held-out fold".into()));
    }
    config.family.validate_response(y_test)?;
    let mut booster = Booster::new(config, train)?;
    let state = booster.state();
    let designs = state.designs(test)?;
    let mut eta: Vec<Vec<f64>> = state.offsets.iter().map(|&o| vec![o; y_test.len()]).collect();
    let family = config.family;
    let risk_of = |eta: &[Vec<f64>]| -> f64 {
        let mut e = [0.0; 3];
        let mut total = 0.0;
        for (i, &y) in y_test.iter().enumerate() {
            for (k, v) in eta.iter().enumerate() {
                e[k] = v[i];
            }
            total += family.nll_obs(&e, y);
        }
        total / y_test.len() as f64
    };
    let mut path = Vec::with_capacity(mstop_max + 1);
    path.push(risk_of(&eta));
    for _ in 0..mstop_max {
        match booster.step()? {
            Some(rec) => {
                designs[rec.k_star][rec.j_star].mul_add(&rec.increment, 1.0, &mut eta[rec.k_star]);
                path.push(risk_of(&eta));
            }
            None => {
                let last = *path.last().unwrap();
                path.push(last);
            }
        }
    }
    if path.iter().any(|r| !r.is_finite()) {
        return Err(Error::Numeric("non-finite held-out risk".into()));
    }
    Ok(path)
}

/// k-fold cross-validated risk curve; folds are fitted in parallel and
/// aggregated in fold order.
pub fn cv_risk(
    config: &ModelConfig,
    data: &Dataset,
    plan: &CvPlan,
    mstop_max: usize,
) -> Result<RiskCurve> {
    if plan.assignment.len() != data.n() {
        return Err(Error::Config(format!(
            "fold plan covers {} rows, data has {}",
            plan.assignment.len(),
            data.n()
        )));
    }
    let per_fold: Vec<Vec<f64>> = (0..plan.folds)
        .into_par_iter()
        .map(|fold| {
            let train = data.take(&plan.train_rows(fold));
            let test = data.take(&plan.test_rows(fold));
            fold_risk(config, &train, &test, mstop_max).map_err(|e| e.in_fold(fold))
        })
        .collect::<Result<_>>()?;
    let mean = (0..=mstop_max)
        .map(|m| per_fold.iter().map(|f| f[m]).sum::<f64>() / plan.folds as f64)
        .collect();
    Ok(RiskCurve { mean, per_fold })
}

/// How the tolerance of the stopping rule is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// `curve[m] ≤ min + tol·(curve[0] − min)`: within `tol` of the risk
    /// reduction achieved by boosting.
    #[default]
    RangeRelative,
    /// `curve[m] ≤ (1 + tol)·min`, or `min + tol·|min|` for nonpositive
    /// minima.
    MinRelative,
}

/// Earliest iteration whose risk lies within `tol` of the curve's minimum,
/// under the default [`StopRule::RangeRelative`].
pub fn robust_mstop(curve: &[f64], tol: f64) -> usize {
    robust_mstop_with(curve, tol, StopRule::RangeRelative)
}

pub fn robust_mstop_with(curve: &[f64], tol: f64, rule: StopRule) -> usize {
    let Some(&first) = curve.first() else {
        return 0;
    };
    let min = curve.iter().copied().fold(f64::INFINITY, f64::min);
    let threshold = match rule {
        StopRule::RangeRelative => min + tol * (first - min),
        StopRule::MinRelative if min > 0.0 => (1.0 + tol) * min,
        StopRule::MinRelative => min + tol * min.abs(),
    };
    curve.iter().position(|&r| r <= threshold).unwrap_or(0)
}
