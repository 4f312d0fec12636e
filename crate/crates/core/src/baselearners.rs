//! Penalized least-squares base-learners.
//!
//! Each base-learner is a design matrix `X`, a penalty matrix `K` and a
//! penalty scalar `λ`, fitted to a working response `u` by
//!
//! ```text
//! coef = (XᵀX + λK)⁻¹ Xᵀu,   fitted = X coef
//! ```
//!
//! Smooth and spatial effects are centered by absorbing the constraint
//! into the basis: a matrix `Z` whose columns span the orthogonal
//! complement of the constraint directions replaces `X` by `XZ` and `K`
//! by `ZᵀKZ`. Coefficients are reported back in the raw basis as `Z coef`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bspline;
use crate::data::{Column, Dataset};
use crate::error::{Error, Result};
use crate::graph::Graph;

const LAMBDA_LO: f64 = 1e-10;
const LAMBDA_HI: f64 = 1e10;
const DF_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    /// `[1, x]`, unpenalized.
    Linear,
    /// Full dummy coding of all levels with a ridge penalty.
    Categorical,
    /// Cubic B-splines with a difference penalty, centered.
    PSpline,
    /// Region indicators with a graph-Laplacian penalty, centered.
    Mrf,
    /// A linear effect plus a spline deviation orthogonal to `{1, x}`.
    LinearPlusSmooth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PSplineOptions {
    pub degree: usize,
    pub inner_knots: usize,
    pub diff_order: usize,
    pub centered: bool,
}

impl Default for PSplineOptions {
    fn default() -> Self {
        PSplineOptions {
            degree: 3,
            inner_knots: 20,
            diff_order: 2,
            centered: true,
        }
    }
}

/// Declarative base-learner specification.
#[derive(Debug, Clone)]
pub struct BaseLearnerSpec {
    pub kind: LearnerKind,
    pub covariate: String,
    /// Target equivalent degrees of freedom; `None` leaves the learner unpenalized.
    pub df: Option<f64>,
    pub pspline: PSplineOptions,
    pub graph: Option<Arc<Graph>>,
}

impl BaseLearnerSpec {
    fn new(kind: LearnerKind, covariate: &str) -> Self {
        BaseLearnerSpec {
            kind,
            covariate: covariate.to_string(),
            df: Some(2.0),
            pspline: PSplineOptions::default(),
            graph: None,
        }
    }

    pub fn linear(covariate: &str) -> Self {
        Self::new(LearnerKind::Linear, covariate)
    }

    pub fn categorical(covariate: &str) -> Self {
        Self::new(LearnerKind::Categorical, covariate)
    }

    pub fn pspline(covariate: &str) -> Self {
        Self::new(LearnerKind::PSpline, covariate)
    }

    pub fn mrf(covariate: &str, graph: Arc<Graph>) -> Self {
        BaseLearnerSpec {
            graph: Some(graph),
            ..Self::new(LearnerKind::Mrf, covariate)
        }
    }

    pub fn linear_plus_smooth(covariate: &str) -> Self {
        Self::new(LearnerKind::LinearPlusSmooth, covariate)
    }

    pub fn with_df(mut self, df: Option<f64>) -> Self {
        self.df = df;
        self
    }

    pub fn with_pspline(mut self, opts: PSplineOptions) -> Self {
        self.pspline = opts;
        self
    }
}

/// What is needed to rebuild a design for new data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Basis {
    Linear,
    Categorical { levels: Vec<String> },
    BSpline { knots: Vec<f64>, degree: usize },
    Regions { regions: Vec<String> },
    /// Arbitrary dense design supplied directly (no covariate).
    Dense,
}

impl Basis {
    /// Raw (untransformed) design rows for `data`.
    pub fn design(&self, data: &Dataset, covariate: &str) -> Result<RawDesign> {
        match self {
            Basis::Linear => Ok(RawDesign::Linear(data.numeric(covariate)?.to_vec())),
            Basis::BSpline { knots, degree } => {
                let x = data.numeric(covariate)?;
                Ok(RawDesign::banded(knots, *degree, x))
            }
            Basis::Categorical { levels } => {
                let codes = map_labels(data.column(covariate)?, covariate, levels)?;
                Ok(RawDesign::Indicator {
                    codes,
                    p: levels.len(),
                })
            }
            Basis::Regions { regions } => {
                let codes = map_labels(data.column(covariate)?, covariate, regions)?;
                Ok(RawDesign::Indicator {
                    codes,
                    p: regions.len(),
                })
            }
            Basis::Dense => Err(Error::Config(
                "a dense design cannot be rebuilt from covariates".into(),
            )),
        }
    }
}

fn map_labels(column: &Column, covariate: &str, targets: &[String]) -> Result<Vec<usize>> {
    let Column::Categorical { codes, levels } = column else {
        return Err(Error::Data(format!(
            "column '{covariate}' must be categorical"
        )));
    };
    let lookup: Vec<Option<usize>> = levels
        .iter()
        .map(|l| targets.iter().position(|t| t == l))
        .collect();
    codes
        .iter()
        .map(|&c| {
            lookup[c].ok_or_else(|| {
                Error::Data(format!(
                    "column '{covariate}': unknown level or region '{}'",
                    levels[c]
                ))
            })
        })
        .collect()
}

/// Design rows in the raw basis, stored by structure.
#[derive(Debug, Clone, PartialEq)]
pub enum RawDesign {
    /// Columns `[1, x]`.
    Linear(Vec<f64>),
    /// One indicator per row.
    Indicator { codes: Vec<usize>, p: usize },
    /// `width` consecutive nonzeros per row starting at `first[i]`.
    Banded {
        first: Vec<usize>,
        values: Vec<f64>,
        width: usize,
        p: usize,
    },
    Dense(DMatrix<f64>),
}

impl RawDesign {
    fn banded(knots: &[f64], degree: usize, x: &[f64]) -> RawDesign {
        let width = degree + 1;
        let mut first = Vec::with_capacity(x.len());
        let mut values = vec![0.0; x.len() * width];
        for (i, &xi) in x.iter().enumerate() {
            first.push(bspline::eval(knots, degree, xi, &mut values[i * width..(i + 1) * width]));
        }
        RawDesign::Banded {
            first,
            values,
            width,
            p: bspline::n_basis(knots, degree),
        }
    }

    pub fn nrows(&self) -> usize {
        match self {
            RawDesign::Linear(x) => x.len(),
            RawDesign::Indicator { codes, .. } => codes.len(),
            RawDesign::Banded { first, .. } => first.len(),
            RawDesign::Dense(m) => m.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            RawDesign::Linear(_) => 2,
            RawDesign::Indicator { p, .. } | RawDesign::Banded { p, .. } => *p,
            RawDesign::Dense(m) => m.ncols(),
        }
    }

    /// `out = Xᵀu`.
    pub fn xt_u(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        match self {
            RawDesign::Linear(x) => {
                let (mut s0, mut s1) = (0.0, 0.0);
                for (xi, ui) in x.iter().zip(u) {
                    s0 += ui;
                    s1 += xi * ui;
                }
                out[0] = s0;
                out[1] = s1;
            }
            RawDesign::Indicator { codes, .. } => {
                for (&c, ui) in codes.iter().zip(u) {
                    out[c] += ui;
                }
            }
            RawDesign::Banded {
                first,
                values,
                width,
                ..
            } => {
                for (i, (&f, ui)) in first.iter().zip(u).enumerate() {
                    let row = &values[i * width..(i + 1) * width];
                    for (r, v) in row.iter().enumerate() {
                        out[f + r] += v * ui;
                    }
                }
            }
            RawDesign::Dense(m) => {
                for c in 0..m.ncols() {
                    out[c] = m.column(c).iter().zip(u).map(|(a, b)| a * b).sum();
                }
            }
        }
    }

    /// `out += scale · X coef`.
    pub fn mul_add(&self, coef: &[f64], scale: f64, out: &mut [f64]) {
        match self {
            RawDesign::Linear(x) => {
                let (a, b) = (scale * coef[0], scale * coef[1]);
                for (o, xi) in out.iter_mut().zip(x) {
                    *o += a + b * xi;
                }
            }
            RawDesign::Indicator { codes, .. } => {
                for (o, &c) in out.iter_mut().zip(codes) {
                    *o += scale * coef[c];
                }
            }
            RawDesign::Banded {
                first,
                values,
                width,
                ..
            } => {
                for (i, (o, &f)) in out.iter_mut().zip(first).enumerate() {
                    let row = &values[i * width..(i + 1) * width];
                    let v: f64 = row.iter().zip(&coef[f..f + width]).map(|(a, b)| a * b).sum();
                    *o += scale * v;
                }
            }
            RawDesign::Dense(m) => {
                for (i, o) in out.iter_mut().enumerate() {
                    let v: f64 = (0..m.ncols()).map(|c| m[(i, c)] * coef[c]).sum();
                    *o += scale * v;
                }
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            RawDesign::Dense(m) => m.clone(),
            _ => {
                let (n, p) = (self.nrows(), self.ncols());
                let mut m = DMatrix::zeros(n, p);
                let mut e = vec![0.0; p];
                let mut col = vec![0.0; n];
                for j in 0..p {
                    e[j] = 1.0;
                    col.iter_mut().for_each(|c| *c = 0.0);
                    self.mul_add(&e, 1.0, &mut col);
                    m.set_column(j, &DVector::from_column_slice(&col));
                    e[j] = 0.0;
                }
                m
            }
        }
    }

    fn gram(&self) -> DMatrix<f64> {
        match self {
            RawDesign::Indicator { codes, p } => {
                let mut g = DMatrix::zeros(*p, *p);
                for &c in codes {
                    g[(c, c)] += 1.0;
                }
                g
            }
            _ => {
                let x = self.to_dense();
                x.transpose() * &x
            }
        }
    }
}

/// Orthonormal basis (columns) of the orthogonal complement of the column
/// space of `c`, built from Householder reflections.
fn complement_basis(c: &DMatrix<f64>) -> DMatrix<f64> {
    let (p, q) = c.shape();
    let mut a = c.clone();
    let mut qmat = DMatrix::<f64>::identity(p, p);
    for j in 0..q {
        let x: Vec<f64> = (j..p).map(|i| a[(i, j)]).collect();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let mut v = x.clone();
        v[0] += if x[0] >= 0.0 { norm } else { -norm };
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        // A ← H A on rows j..
        for col in 0..q {
            let dot: f64 = (j..p).map(|i| v[i - j] * a[(i, col)]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in j..p {
                a[(i, col)] -= f * v[i - j];
            }
        }
        // Q ← Q H on columns j..
        for row in 0..p {
            let dot: f64 = (j..p).map(|i| qmat[(row, i)] * v[i - j]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in j..p {
                qmat[(row, i)] -= f * v[i - j];
            }
        }
    }
    qmat.columns(q, p - q).into_owned()
}

/// Result of fitting one base-learner to a working response.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseFit {
    pub fitted: Vec<f64>,
    /// Coefficients in the (possibly centered) working basis.
    pub coef: Vec<f64>,
    /// Coefficients in the raw basis, `Z coef`.
    pub coef_raw: Vec<f64>,
}

/// Realized base-learner: design, penalty, penalty scalar and the cached
/// inverse of `XᵀX + λK`.
#[derive(Debug, Clone)]
pub struct DesignPenalty {
    pub name: String,
    pub covariate: String,
    pub kind: LearnerKind,
    pub basis: Basis,
    pub raw: RawDesign,
    /// Constraint-absorbing transformation `Z` (raw → working basis).
    pub transform: Option<DMatrix<f64>>,
    /// `XᵀX` in the working basis.
    pub gram: DMatrix<f64>,
    /// `K` in the working basis.
    pub penalty: DMatrix<f64>,
    lambda: f64,
    system_inv: DMatrix<f64>,
}

impl DesignPenalty {
    /// Assembles a base-learner from its parts; `lambda` starts at 0 and the
    /// system is not factorized until [`DesignPenalty::set_lambda`].
    pub fn from_parts(
        name: &str,
        covariate: &str,
        kind: LearnerKind,
        basis: Basis,
        raw: RawDesign,
        raw_penalty: DMatrix<f64>,
        constraint: Option<DMatrix<f64>>,
    ) -> DesignPenalty {
        let raw_gram = raw.gram();
        let transform = constraint.map(|c| complement_basis(&c));
        let (gram, penalty) = match &transform {
            Some(z) => (z.transpose() * raw_gram * z, z.transpose() * raw_penalty * z),
            None => (raw_gram, raw_penalty),
        };
        let p = gram.nrows();
        DesignPenalty {
            name: name.to_string(),
            covariate: covariate.to_string(),
            kind,
            basis,
            raw,
            transform,
            gram,
            penalty,
            lambda: 0.0,
            system_inv: DMatrix::zeros(p, p),
        }
    }

    /// Dense-design base-learner, mainly for checks on arbitrary systems.
    pub fn dense(x: DMatrix<f64>, k: DMatrix<f64>, lambda: f64) -> Result<DesignPenalty> {
        let mut dp = DesignPenalty::from_parts(
            "dense",
            "",
            LearnerKind::Linear,
            Basis::Dense,
            RawDesign::Dense(x),
            k,
            None,
        );
        dp.set_lambda(lambda)?;
        Ok(dp)
    }

    /// Working-basis dimension.
    pub fn p(&self) -> usize {
        self.gram.nrows()
    }

    pub fn n(&self) -> usize {
        self.raw.nrows()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Design matrix in the working basis, `X Z`.
    pub fn design_matrix(&self) -> DMatrix<f64> {
        let raw = self.raw.to_dense();
        match &self.transform {
            Some(z) => raw * z,
            None => raw,
        }
    }

    fn factor(&self, lambda: f64) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
        let system = &self.gram + lambda * &self.penalty;
        system.cholesky().ok_or_else(|| {
            Error::Singular(format!(
                "XᵀX + λK is not positive definite for '{}' at λ = {lambda}; \
                 the design is rank deficient (center it or drop redundant columns)",
                self.name
            ))
        })
    }

    /// Equivalent degrees of freedom `trace(X (XᵀX + λK)⁻¹ Xᵀ)`.
    pub fn effective_df(&self, lambda: f64) -> Result<f64> {
        if !(lambda >= 0.0) {
            return Err(Error::Config(format!("penalty scalar {lambda} must be nonnegative")));
        }
        let chol = self.factor(lambda)?;
        let solved = chol.solve(&self.gram);
        Ok(solved.trace())
    }

    fn is_unpenalized(&self) -> bool {
        self.penalty.iter().all(|&v| v == 0.0)
    }

    /// Penalty scalar that attains `target` degrees of freedom, by bisection
    /// on log λ over [1e-10, 1e10].
    pub fn solve_lambda_for_df(&self, target: f64) -> Result<f64> {
        let p = self.p() as f64;
        if self.is_unpenalized() {
            if (target - p).abs() <= DF_TOL {
                return Ok(0.0);
            }
            return Err(Error::DfOutOfRange {
                target,
                min: p,
                max: p,
            });
        }
        if let Ok(df0) = self.effective_df(0.0) {
            if (df0 - target).abs() <= DF_TOL {
                return Ok(0.0);
            }
        }
        let df_lo = self.effective_df(LAMBDA_LO)?;
        let df_hi = self.effective_df(LAMBDA_HI)?;
        if !(target < df_lo && target > df_hi) {
            return Err(Error::DfOutOfRange {
                target,
                min: df_hi,
                max: df_lo,
            });
        }
        let (mut a, mut b) = (LAMBDA_LO.ln(), LAMBDA_HI.ln());
        let mut mid = 0.5 * (a + b);
        for _ in 0..200 {
            mid = 0.5 * (a + b);
            let df = self.effective_df(mid.exp())?;
            if (df - target).abs() <= DF_TOL * 0.1 || b - a < 1e-15 {
                break;
            }
            if df > target {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok(mid.exp())
    }

    /// Fixes the penalty scalar and caches `(XᵀX + λK)⁻¹`.
    pub fn set_lambda(&mut self, lambda: f64) -> Result<()> {
        let chol = self.factor(lambda)?;
        self.system_inv = chol.inverse();
        self.lambda = lambda;
        Ok(())
    }

    /// Calibrates λ to the target df (or 0 when unpenalized) and caches the system.
    pub fn calibrate(&mut self, df: Option<f64>) -> Result<()> {
        let lambda = match df {
            Some(target) => self.solve_lambda_for_df(target)?,
            None => 0.0,
        };
        self.set_lambda(lambda)
    }

    /// Working-basis coefficients `(XᵀX + λK)⁻¹Xᵀu` together with the
    /// least-squares improvement `uᵀu − ‖u − Xc‖²`.
    pub(crate) fn project(&self, u: &[f64]) -> (Vec<f64>, f64) {
        let mut b = vec![0.0; self.raw.ncols()];
        self.raw.xt_u(u, &mut b);
        let b = match &self.transform {
            Some(z) => (z.transpose() * DVector::from_vec(b)).data.into(),
            None => b,
        };
        let p = b.len();
        let mut coef = vec![0.0; p];
        for (r, c) in coef.iter_mut().enumerate() {
            *c = (0..p).map(|j| self.system_inv[(r, j)] * b[j]).sum();
        }
        let cb: f64 = coef.iter().zip(&b).map(|(c, bb)| c * bb).sum();
        let mut cgc = 0.0;
        for r in 0..p {
            let row: f64 = (0..p).map(|j| self.gram[(r, j)] * coef[j]).sum();
            cgc += coef[r] * row;
        }
        (coef, 2.0 * cb - cgc)
    }

    /// Maps working-basis coefficients to the raw basis.
    pub fn to_raw(&self, coef: &[f64]) -> Vec<f64> {
        match &self.transform {
            Some(z) => (z * DVector::from_column_slice(coef)).data.into(),
            None => coef.to_vec(),
        }
    }

    /// Penalized least-squares fit of the working response `u`.
    pub fn fit(&self, u: &[f64]) -> Result<BaseFit> {
        if u.len() != self.n() {
            return Err(Error::Data(format!(
                "working response has {} entries, design has {} rows",
                u.len(),
                self.n()
            )));
        }
        let (coef, _) = self.project(u);
        if coef.iter().any(|c| !c.is_finite()) {
            return Err(Error::Singular(format!("non-finite fit for '{}'", self.name)));
        }
        let coef_raw = self.to_raw(&coef);
        let mut fitted = vec![0.0; self.n()];
        self.raw.mul_add(&coef_raw, 1.0, &mut fitted);
        Ok(BaseFit {
            fitted,
            coef,
            coef_raw,
        })
    }
}

/// Realizes a base-learner on `data`, calibrating its penalty scalar.
/// `LinearPlusSmooth` yields two learners (linear part, smooth deviation).
pub fn build(spec: &BaseLearnerSpec, data: &Dataset) -> Result<Vec<DesignPenalty>> {
    let cov = spec.covariate.as_str();
    match spec.kind {
        LearnerKind::Linear => {
            let x = data.numeric(cov)?.to_vec();
            let mut dp = DesignPenalty::from_parts(
                &format!("linear({cov})"),
                cov,
                LearnerKind::Linear,
                Basis::Linear,
                RawDesign::Linear(x),
                DMatrix::zeros(2, 2),
                None,
            );
            dp.calibrate(spec.df)?;
            Ok(vec![dp])
        }
        LearnerKind::Categorical => {
            let Column::Categorical { levels, .. } = data.column(cov)? else {
                return Err(Error::Data(format!("column '{cov}' must be categorical")));
            };
            let basis = Basis::Categorical {
                levels: levels.clone(),
            };
            let raw = basis.design(data, cov)?;
            let l = levels.len();
            let mut dp = DesignPenalty::from_parts(
                &format!("categorical({cov})"),
                cov,
                LearnerKind::Categorical,
                basis,
                raw,
                DMatrix::identity(l, l),
                None,
            );
            dp.calibrate(spec.df)?;
            Ok(vec![dp])
        }
        LearnerKind::Mrf => {
            let graph = spec.graph.as_ref().ok_or_else(|| {
                Error::Config(format!("MRF base-learner on '{cov}' needs a neighborhood graph"))
            })?;
            if !graph.is_connected() {
                return Err(Error::Config(
                    "MRF neighborhood graph is disconnected".into(),
                ));
            }
            let basis = Basis::Regions {
                regions: graph.regions().to_vec(),
            };
            let raw = basis.design(data, cov)?;
            let constraint = column_sums(&raw);
            let mut dp = DesignPenalty::from_parts(
                &format!("mrf({cov})"),
                cov,
                LearnerKind::Mrf,
                basis,
                raw,
                graph.laplacian(),
                Some(constraint),
            );
            dp.calibrate(spec.df)?;
            Ok(vec![dp])
        }
        LearnerKind::PSpline => {
            let mut dp = spline_learner(spec, data, &format!("pspline({cov})"), false)?;
            dp.calibrate(spec.df)?;
            Ok(vec![dp])
        }
        LearnerKind::LinearPlusSmooth => {
            let lin_spec = BaseLearnerSpec::linear(cov).with_df(None);
            let mut parts = build(&lin_spec, data)?;
            parts[0].kind = LearnerKind::LinearPlusSmooth;
            let mut smooth = spline_learner(spec, data, &format!("smooth({cov})"), true)?;
            smooth.calibrate(spec.df)?;
            parts.push(smooth);
            Ok(parts)
        }
    }
}

fn column_sums(raw: &RawDesign) -> DMatrix<f64> {
    let ones = vec![1.0; raw.nrows()];
    let mut s = vec![0.0; raw.ncols()];
    raw.xt_u(&ones, &mut s);
    DMatrix::from_column_slice(s.len(), 1, &s)
}

fn spline_learner(
    spec: &BaseLearnerSpec,
    data: &Dataset,
    name: &str,
    orthogonal_to_linear: bool,
) -> Result<DesignPenalty> {
    let cov = spec.covariate.as_str();
    let x = data.numeric(cov)?;
    let opts = spec.pspline;
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(hi > lo) {
        return Err(Error::Data(format!(
            "spline covariate '{cov}' is constant or empty"
        )));
    }
    let knots = bspline::equidistant_knots(lo, hi, opts.inner_knots, opts.degree);
    let raw = RawDesign::banded(&knots, opts.degree, x);
    let p = raw.ncols();
    if opts.diff_order >= p {
        return Err(Error::Config(format!(
            "difference order {} too large for {p} basis functions",
            opts.diff_order
        )));
    }
    let d = bspline::difference_matrix(p, opts.diff_order);
    let k = d.transpose() * d;
    let constraint = if orthogonal_to_linear {
        let mut c = DMatrix::zeros(p, 2);
        let mut col = vec![0.0; p];
        raw.xt_u(&vec![1.0; x.len()], &mut col);
        c.set_column(0, &DVector::from_column_slice(&col));
        raw.xt_u(x, &mut col);
        c.set_column(1, &DVector::from_column_slice(&col));
        Some(c)
    } else if opts.centered {
        Some(column_sums(&raw))
    } else {
        None
    };
    Ok(DesignPenalty::from_parts(
        name,
        cov,
        if orthogonal_to_linear {
            LearnerKind::LinearPlusSmooth
        } else {
            LearnerKind::PSpline
        },
        Basis::BSpline {
            knots,
            degree: opts.degree,
        },
        raw,
        k,
        constraint,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset() -> Dataset {
        let n = 60;
        let mut d = Dataset::new();
        let x: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * (i as f64 * 0.618).fract()).collect();
        let labels: Vec<String> = (0..n).map(|i| format!("L{}", i % 5)).collect();
        let zones = ["NC", "NE", "NW", "SE", "SS", "SW"];
        let regions: Vec<&str> = (0..n).map(|i| zones[(i * 7) % 6]).collect();
        d.push("x", Column::Numeric(x)).unwrap();
        d.push("g", Column::categorical_from_labels(&labels)).unwrap();
        d.push("r", Column::categorical_from_labels(&regions)).unwrap();
        d
    }

    #[test]
    fn categorical_design_is_full_dummy_with_identity_penalty() {
        let d = dataset();
        let dp = &build(&BaseLearnerSpec::categorical("g"), &d).unwrap()[0];
        let x = dp.design_matrix();
        assert_eq!(x.ncols(), 5);
        for i in 0..x.nrows() {
            assert_eq!(x.row(i).sum(), 1.0);
            assert_eq!(x.row(i).iter().filter(|&&v| v == 1.0).count(), 1);
        }
        assert_eq!(dp.penalty, DMatrix::identity(5, 5));
    }

    #[test]
    fn linear_learner_has_two_df_and_no_penalty() {
        let d = dataset();
        let dp = &build(&BaseLearnerSpec::linear("x"), &d).unwrap()[0];
        assert_eq!(dp.lambda(), 0.0);
        assert!((dp.effective_df(0.0).unwrap() - 2.0).abs() < 1e-10);
    }

    #[test]
    fn centered_designs_have_zero_column_sums() {
        let d = dataset();
        let graph = Arc::new(Graph::nigeria_zones());
        for spec in [
            BaseLearnerSpec::pspline("x"),
            BaseLearnerSpec::mrf("r", graph),
            BaseLearnerSpec::linear_plus_smooth("x"),
        ] {
            let dps = build(&spec, &d).unwrap();
            let dp = dps.last().unwrap();
            let x = dp.design_matrix();
            for c in 0..x.ncols() {
                assert!(x.column(c).sum().abs() < 1e-8);
            }
            assert!((dp.effective_df(dp.lambda()).unwrap() - 2.0).abs() < 1e-8);
        }
    }

    #[test]
    fn smooth_deviation_is_orthogonal_to_linear_part() {
        let d = dataset();
        let dps = build(&BaseLearnerSpec::linear_plus_smooth("x"), &d).unwrap();
        assert_eq!(dps.len(), 2);
        let xs = dps[1].design_matrix();
        let xl = dps[0].design_matrix();
        assert!((xl.transpose() * xs).amax() < 1e-8);
    }

    #[test]
    fn penalties_are_symmetric_psd() {
        let d = dataset();
        let graph = Arc::new(Graph::nigeria_zones());
        for spec in [BaseLearnerSpec::pspline("x"), BaseLearnerSpec::mrf("r", graph)] {
            let dp = &build(&spec, &d).unwrap()[0];
            let k = &dp.penalty;
            assert!((k - k.transpose()).amax() < 1e-12);
            let eig = k.clone().symmetric_eigen();
            assert!(eig.eigenvalues.min() >= -1e-10 * k.norm());
        }
    }

    #[test]
    fn unknown_region_and_bad_graph_are_errors() {
        let mut d = dataset();
        d.push("bad", Column::categorical_from_labels(&vec!["XX"; 60]))
            .unwrap();
        let graph = Arc::new(Graph::nigeria_zones());
        assert!(matches!(
            build(&BaseLearnerSpec::mrf("bad", graph), &d),
            Err(Error::Data(_))
        ));
        let split = Arc::new(Graph::parse("NC: NE\nNE: NC\nNW: SE\nSE: NW\nSS: SW\nSW: SS\n").unwrap());
        assert!(matches!(
            build(&BaseLearnerSpec::mrf("r", split), &d),
            Err(Error::Config(_))
        ));
        let mut spec = BaseLearnerSpec::linear("r");
        spec.kind = LearnerKind::Mrf;
        assert!(matches!(build(&spec, &d), Err(Error::Config(_))));
    }

    #[test]
    fn constant_spline_covariate_is_rejected() {
        let mut d = Dataset::new();
        d.push("c", Column::Numeric(vec![2.0; 10])).unwrap();
        assert!(build(&BaseLearnerSpec::pspline("c"), &d).is_err());
    }

    #[test]
    fn unattainable_df_reports_interval() {
        let d = dataset();
        let err = build(&BaseLearnerSpec::categorical("g").with_df(Some(5.5)), &d).unwrap_err();
        match err {
            Error::DfOutOfRange { max, .. } => assert!((max - 5.0).abs() < 1e-6),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn rank_deficient_unpenalized_system_is_singular() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        let dp = DesignPenalty::dense(x, DMatrix::zeros(2, 2), 0.0);
        assert!(matches!(dp, Err(Error::Singular(_))));
    }

    #[test]
    fn fit_reproduces_span_and_annihilates_orthogonal_responses() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, -1.0, 1.0, -0.5, 1.0, 0.5, 1.0, 1.0]);
        let dp = DesignPenalty::dense(x, DMatrix::zeros(2, 2), 0.0).unwrap();
        let u = [0.2 - 1.0, 0.2 - 0.5, 0.2 + 0.5, 0.2 + 1.0];
        let fit = dp.fit(&u).unwrap();
        for (f, v) in fit.fitted.iter().zip(&u) {
            assert!((f - v).abs() < 1e-8);
        }
        // orthogonal to [1, x]
        let fit = dp.fit(&[1.0, -2.0, 2.0, -1.0]).unwrap();
        assert!(fit.fitted.iter().all(|f| f.abs() < 1e-12));
    }
}
