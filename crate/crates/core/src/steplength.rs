//! Step lengths along a fitted base-learner direction.
//!
//! The optimal step length minimizes the negative log-likelihood along
//! `η_k + ν·h`. It is found by Newton's method on the first-order condition
//! `d/dν NLL(η_k + ν·h) = 0`, with golden-section line search as fallback.

use std::borrow::Cow;
use std::collections::HashMap;

use crate::distributions::{Family, ZinbTerms};
use crate::error::{Error, Result};
use crate::special::{digamma_ratio, ln_gamma_ratio, logistic, softplus};

pub const NEWTON_MAX_ITER: usize = 100;
pub const LINE_SEARCH_LO: f64 = 1e-8;
pub const LINE_SEARCH_HI: f64 = 1e4;
const LINE_SEARCH_LIMIT: f64 = 1e6;
const LINE_SEARCH_WIDTH: f64 = 1e-6;
const DIVERGENCE: f64 = 1e6;
const SCAN_START: f64 = 1e-4;

/// Everything needed to evaluate the likelihood along one update direction.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub family: Family,
    /// Index of the parameter being updated.
    pub k: usize,
    /// Current predictors, one vector per parameter.
    pub eta: &'a [Vec<f64>],
    /// Fitted base-learner values `h`.
    pub direction: &'a [f64],
    pub y: &'a [f64],
}

impl StepContext<'_> {
    #[inline]
    fn shifted(&self, i: usize, nu: f64) -> [f64; 3] {
        let mut e = [0.0; 3];
        for (p, v) in self.eta.iter().enumerate() {
            e[p] = v[i];
        }
        e[self.k] += nu * self.direction[i];
        e
    }

    fn is_degenerate(&self) -> bool {
        self.direction.iter().all(|&h| h == 0.0)
    }
}

/// Negative log-likelihood at `η_k + ν·h`.
pub fn nll_along(ctx: &StepContext, nu: f64) -> f64 {
    Line::new(*ctx).nll(nu)
}

/// First-order condition: derivative of the negative log-likelihood with
/// respect to the step length at `ν`.
pub fn foc(ctx: &StepContext, nu: f64) -> Result<f64> {
    Line::new(*ctx).foc(nu)
}

/// A direction prepared for repeated likelihood and first-order-condition
/// evaluations.
#[derive(Debug, Clone)]
pub struct Line<'a> {
    ctx: StepContext<'a>,
    zinb: Cow<'a, [ZinbTerms]>,
}

impl<'a> Line<'a> {
    pub fn new(ctx: StepContext<'a>) -> Line<'a> {
        let zinb = match ctx.family {
            Family::Zinb => Cow::Owned(zinb_terms(ctx.eta, ctx.y)),
            Family::GaussianLS => Cow::Borrowed(&[][..]),
        };
        Line { ctx, zinb }
    }

    /// Reuses ZINB terms already computed at `ctx.eta`.
    pub fn with_terms(ctx: StepContext<'a>, terms: &'a [ZinbTerms]) -> Line<'a> {
        Line {
            ctx,
            zinb: Cow::Borrowed(terms),
        }
    }

    pub fn context(&self) -> &StepContext<'a> {
        &self.ctx
    }

    /// Negative log-likelihood at step length `nu`.
    pub fn nll(&self, nu: f64) -> f64 {
        let ctx = &self.ctx;
        match ctx.family {
            Family::GaussianLS => (0..ctx.y.len())
                .map(|i| ctx.family.nll_obs(&ctx.shifted(i, nu), ctx.y[i]))
                .sum(),
            Family::Zinb => {
                let mut total = 0.0;
                for ((t, &y), &h) in self.zinb.iter().zip(ctx.y).zip(ctx.direction) {
                    total += zinb_nll_along(t, ctx.k, y, nu * h);
                }
                total
            }
        }
    }

    /// Derivative of [`Line::nll`] at `nu`.
    pub fn foc(&self, nu: f64) -> Result<f64> {
        let value = match self.ctx.family {
            Family::GaussianLS => chain_rule_foc(&self.ctx, nu),
            Family::Zinb => match self.ctx.k {
                0 => self.zinb_foc_mu(nu),
                1 => self.zinb_foc_alpha(nu),
                _ => self.zinb_foc_pi(nu),
            },
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::Numeric(format!(
                "update direction leaves the parameter domain at step length {nu}"
            )))
        }
    }

    fn zinb_foc_mu(&self, nu: f64) -> f64 {
        let (mut zeros, mut counts) = (0.0, 0.0);
        for ((t, &y), &h) in self.zinb.iter().zip(self.ctx.y).zip(self.ctx.direction) {
            let mu = (t.eta[0] + nu * h).exp();
            let alpha = t.alpha;
            let am1 = 1.0 + alpha * mu;
            if y == 0.0 {
                // 1 / (odds · (1+αμ)^{1/α} + 1)
                let w = logistic(-(t.eta[2] + (alpha * mu).ln_1p() / alpha));
                zeros += mu * h / am1 * w;
            } else {
                counts += h * (y - mu) / am1;
            }
        }
        zeros - counts
    }

    fn zinb_foc_alpha(&self, nu: f64) -> f64 {
        let (mut zeros, mut counts) = (0.0, 0.0);
        for ((t, &y), &h) in self.zinb.iter().zip(self.ctx.y).zip(self.ctx.direction) {
            let mu = t.mu;
            let alpha = (t.eta[1] + nu * h).exp();
            let inv_alpha = 1.0 / alpha;
            let am1 = 1.0 + alpha * mu;
            let l1p = (alpha * mu).ln_1p();
            if y == 0.0 {
                let w = logistic(-(t.eta[2] + l1p * inv_alpha));
                zeros += h * (l1p * inv_alpha - mu / am1) * w;
            } else {
                counts += h * (y - mu) / am1 + h * l1p * inv_alpha - h * digamma_ratio(y, alpha);
            }
        }
        -zeros - counts
    }

    fn zinb_foc_pi(&self, nu: f64) -> f64 {
        let (mut zeros, mut counts) = (0.0, 0.0);
        for ((t, &y), &h) in self.zinb.iter().zip(self.ctx.y).zip(self.ctx.direction) {
            let eta_pi = t.eta[2] + nu * h;
            if y == 0.0 {
                // ln[(e^{-η}+1) p0/(1-p0)] with p0 the count-part zero mass
                let ln_p0 = t.ln_p0();
                let ln_ratio = softplus(-eta_pi) + ln_p0 - (-ln_p0.exp()).ln_1p();
                zeros += logistic(-eta_pi) * h * logistic(-ln_ratio);
            } else {
                counts += (1.0 - logistic(-eta_pi)) * h;
            }
        }
        counts - zeros
    }
}

/// ZINB terms of every observation at predictors `eta`.
pub fn zinb_terms(eta: &[Vec<f64>], y: &[f64]) -> Vec<ZinbTerms> {
    (0..y.len())
        .map(|i| ZinbTerms::new([eta[0][i], eta[1][i], eta[2][i]], y[i]))
        .collect()
}

/// NLL of one observation with the `k`-th predictor shifted by `shift`.
#[inline]
fn zinb_nll_along(t: &ZinbTerms, k: usize, y: f64, shift: f64) -> f64 {
    if shift == 0.0 {
        return t.nll(y);
    }
    let mut moved = *t;
    match k {
        0 => {
            moved.eta[0] += shift;
            moved.mu = moved.eta[0].exp();
            moved.l1p = (moved.alpha * moved.mu).ln_1p();
        }
        1 => {
            moved.eta[1] += shift;
            moved.alpha = moved.eta[1].exp();
            moved.l1p = (moved.alpha * moved.mu).ln_1p();
            if y > 0.0 {
                moved.lgr = ln_gamma_ratio(y, moved.alpha);
            }
        }
        _ => {
            let eta_pi = t.eta[2] + shift;
            moved.ln_pi = -softplus(-eta_pi);
            moved.ln_1mpi = -softplus(eta_pi);
        }
    }
    moved.nll(y)
}

/// `−Σ u_k(η + ν h) · h`
fn chain_rule_foc(ctx: &StepContext, nu: f64) -> f64 {
    let mut s = 0.0;
    for (i, (&y, &h)) in ctx.y.iter().zip(ctx.direction).enumerate() {
        s -= ctx.family.neg_grad_obs(&ctx.shifted(i, nu), y, ctx.k) * h;
    }
    s
}

/// Last accepted optimal step length per (parameter, base-learner).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WarmStartTable {
    values: HashMap<(usize, usize), f64>,
}

impl WarmStartTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, k: usize, learner: usize) -> f64 {
        self.values.get(&(k, learner)).copied().unwrap_or(1.0)
    }

    /// Stores `nu` if it is finite and positive.
    pub fn store(&mut self, k: usize, learner: usize, nu: f64) {
        if nu.is_finite() && nu > 0.0 {
            self.values.insert((k, learner), nu);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub nu_star: f64,
    /// Newton failed and the line search supplied the result.
    pub fallback: bool,
    /// Newton iterations performed.
    pub iterations: usize,
    /// False when the line search settled on its lower bound.
    pub improving: bool,
}

/// Newton iteration on the first-order condition from `start`, safeguarded
/// by a bracket: `foc < 0` below the root and `foc > 0` above it. Steps that
/// leave the bracket or meet nonpositive curvature are replaced by bisection
/// (or doubling while no upper end is known). `None` on failure.
fn newton(line: &Line, start: f64) -> Option<(f64, usize)> {
    if line.foc(0.0).ok()? >= 0.0 {
        // not a descent direction
        return None;
    }
    let (mut below, mut above) = (0.0, f64::INFINITY);
    let mut nu = start;
    for it in 1..=NEWTON_MAX_ITER {
        let f = line.foc(nu).ok()?;
        let d = (1e-6 * nu.abs()).max(1e-6);
        let slope = (line.foc(nu + d).ok()? - line.foc(nu - d).ok()?) / (2.0 * d);
        if f.abs() <= 1e-10 && slope > 0.0 {
            return Some((nu, it));
        }
        if f < 0.0 {
            below = nu;
        } else {
            above = nu;
        }
        let newton_step = nu - f / slope;
        let next = if slope > 0.0 && newton_step > below && newton_step < above {
            newton_step
        } else if above.is_finite() {
            0.5 * (below + above)
        } else {
            2.0 * nu
        };
        let step = next - nu;
        nu = next;
        if !nu.is_finite() || nu > DIVERGENCE {
            return None;
        }
        if step.abs() <= 1e-8 * nu.max(1.0) {
            return Some((nu, it));
        }
    }
    None
}

/// Optimal step length by Newton's method on the first-order condition,
/// starting from the warm-start value of `(ctx.k, learner)`. Falls back to
/// [`line_search`] when Newton fails or produces a non-positive step.
pub fn optimal_step_newton(
    ctx: &StepContext,
    warm: &mut WarmStartTable,
    learner: usize,
) -> Result<StepOutcome> {
    Line::new(*ctx).optimal_step(warm, learner)
}

impl Line<'_> {
    /// See [`optimal_step_newton`].
    pub fn optimal_step(&self, warm: &mut WarmStartTable, learner: usize) -> Result<StepOutcome> {
        if self.ctx.is_degenerate() {
            return Err(Error::DegenerateDirection);
        }
        let k = self.ctx.k;
        if let Some((nu, iterations)) = newton(self, warm.get(k, learner)) {
            if nu > 0.0 {
                warm.store(k, learner, nu);
                return Ok(StepOutcome {
                    nu_star: nu,
                    fallback: false,
                    iterations,
                    improving: true,
                });
            }
        }
        let nu = self.line_search(LINE_SEARCH_LO, LINE_SEARCH_HI)?;
        Ok(StepOutcome {
            nu_star: nu,
            fallback: true,
            iterations: NEWTON_MAX_ITER,
            improving: nu > LINE_SEARCH_LO,
        })
    }

    /// See [`line_search`].
    pub fn line_search(&self, lo: f64, hi: f64) -> Result<f64> {
        if self.ctx.is_degenerate() {
            return Err(Error::DegenerateDirection);
        }
        let objective = |nu: f64| {
            let v = self.nll(nu);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };
        let mut grid = vec![lo];
        let mut point = SCAN_START.max(lo * 2.0);
        while point < hi {
            grid.push(point);
            point *= 2.0;
        }
        let mut upper = hi;
        while upper <= LINE_SEARCH_LIMIT {
            grid.push(upper);
            upper *= 10.0;
        }
        let mut values = vec![objective(lo)];
        for i in 1..grid.len() {
            values.push(objective(grid[i]));
            if values[i] >= values[i - 1] {
                let a = if i >= 2 { grid[i - 2] } else { lo };
                let (nu, at_lo, _) = golden_section(&objective, a, grid[i], LINE_SEARCH_WIDTH);
                return Ok(if at_lo && a == lo { lo } else { nu });
            }
        }
        Err(Error::UnboundedDirection(LINE_SEARCH_LIMIT))
    }
}

/// Minimizes the likelihood along the direction on `[lo, hi]`.
///
/// A geometric scan from `lo` brackets the first local minimum, which is
/// then refined by golden-section search to width 1e-6. If the objective
/// keeps decreasing up to `hi`, the bracket is widened tenfold at a time up
/// to 1e6 before the direction is declared unbounded. Returns exactly `lo` when the minimum
/// sits at the lower bound.
pub fn line_search(ctx: &StepContext, lo: f64, hi: f64) -> Result<f64> {
    Line::new(*ctx).line_search(lo, hi)
}

/// Returns the bracket midpoint and whether the bracket never moved off
/// the lower or upper end.
fn golden_section(f: &impl Fn(f64) -> f64, lo: f64, hi: f64, width: f64) -> (f64, bool, bool) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > width {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    (0.5 * (a + b), a == lo, b == hi)
}

/// Shrunk step length `λ·ν*`.
pub fn shrunk(nu_star: f64, shrinkage: f64) -> f64 {
    shrinkage * nu_star
}
