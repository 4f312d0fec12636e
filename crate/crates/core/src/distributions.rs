//! Response families: likelihoods, link functions, negative gradients,
//! probability functions and proper scoring rules.
//!
//! All per-observation quantities are expressed on the link scale. The
//! zero-inflation probability π is carried as its logit throughout so the
//! boundaries π = 0 and π = 1 are only ever approached as limits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{
    digamma_ratio, ln_factorial, ln_gamma_ratio, log_add_exp, logistic, softplus, std_normal_cdf,
    std_normal_pdf,
};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Upper-tail mass below which the count support is truncated.
pub const TAIL_MASS: f64 = 1e-12;
const MAX_SUPPORT: usize = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Link {
    Identity,
    Log,
    Logit,
}

impl Link {
    pub fn apply(self, theta: f64) -> f64 {
        match self {
            Link::Identity => theta,
            Link::Log => theta.ln(),
            Link::Logit => crate::special::logit(theta),
        }
    }

    pub fn inverse(self, eta: f64) -> f64 {
        match self {
            Link::Identity => eta,
            Link::Log => eta.exp(),
            Link::Logit => logistic(eta),
        }
    }
}

/// Response distribution family. Parameter order is fixed:
/// GaussianLS = (μ, σ), Zinb = (μ, α, π).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "gaussian")]
    GaussianLS,
    #[serde(rename = "zinb")]
    Zinb,
}

impl Family {
    pub fn n_params(self) -> usize {
        self.links().len()
    }

    pub fn links(self) -> &'static [Link] {
        match self {
            Family::GaussianLS => &[Link::Identity, Link::Log],
            Family::Zinb => &[Link::Log, Link::Log, Link::Logit],
        }
    }

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            Family::GaussianLS => &["mu", "sigma"],
            Family::Zinb => &["mu", "alpha", "pi"],
        }
    }

    pub fn param_index(self, name: &str) -> Option<usize> {
        self.param_names().iter().position(|p| *p == name)
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::GaussianLS => "gaussian",
            Family::Zinb => "zinb",
        }
    }

    /// Checks that every response value lies in the family's support.
    pub fn validate_response(self, y: &[f64]) -> Result<()> {
        for (i, &v) in y.iter().enumerate() {
            match self {
                Family::GaussianLS if !v.is_finite() => {
                    return Err(Error::domain(i, format!("response {v} is not finite")));
                }
                Family::Zinb if !(v >= 0.0 && v.fract() == 0.0 && v.is_finite()) => {
                    return Err(Error::domain(
                        i,
                        format!("response {v} is not a nonnegative integer count"),
                    ));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Negative log-likelihood of one observation, predictors on the link scale.
    #[inline]
    pub fn nll_obs(self, eta: &[f64], y: f64) -> f64 {
        match self {
            Family::GaussianLS => gaussian_nll(eta[0], eta[1], y),
            Family::Zinb => zinb_nll(eta[0], eta[1], eta[2], y),
        }
    }

    /// Negative gradient ∂ℓ/∂η_k of one observation.
    #[inline]
    pub fn neg_grad_obs(self, eta: &[f64], y: f64, k: usize) -> f64 {
        match self {
            Family::GaussianLS => gaussian_neg_grad(eta[0], eta[1], y, k),
            Family::Zinb => zinb_neg_grad(eta[0], eta[1], eta[2], y, k),
        }
    }

    /// Predictive distribution of observation `i`.
    pub fn dist_at(self, state: &ParamState, i: usize) -> Dist {
        let e = &state.eta;
        match self {
            Family::GaussianLS => Dist::Gaussian {
                mu: e[0][i],
                sigma: e[1][i].exp(),
            },
            Family::Zinb => Dist::Zinb {
                mu: e[0][i].exp(),
                alpha: e[1][i].exp(),
                eta_pi: e[2][i],
            },
        }
    }
}

#[inline]
fn gaussian_nll(mu: f64, eta_sigma: f64, y: f64) -> f64 {
    let r = (y - mu) * (-eta_sigma).exp();
    HALF_LN_2PI + eta_sigma + 0.5 * r * r
}

#[inline]
fn gaussian_neg_grad(mu: f64, eta_sigma: f64, y: f64, k: usize) -> f64 {
    let inv_var = (-2.0 * eta_sigma).exp();
    let r = y - mu;
    match k {
        0 => r * inv_var,
        _ => -1.0 + r * r * inv_var,
    }
}

#[inline]
fn zinb_nll(eta_mu: f64, eta_alpha: f64, eta_pi: f64, y: f64) -> f64 {
    ZinbTerms::new([eta_mu, eta_alpha, eta_pi], y).nll(y)
}

#[inline]
fn zinb_neg_grad(eta_mu: f64, eta_alpha: f64, eta_pi: f64, y: f64, k: usize) -> f64 {
    let mu = eta_mu.exp();
    let alpha = eta_alpha.exp();
    zinb_neg_grad_at(mu, alpha, (alpha * mu).ln_1p(), eta_pi, y, k)
}

fn zinb_neg_grad_at(mu: f64, alpha: f64, l1p: f64, eta_pi: f64, y: f64, k: usize) -> f64 {
    let am1 = 1.0 + alpha * mu;
    if y == 0.0 {
        // t = ln[ π/(1-π) · (1+αμ)^{1/α} ]
        let t = eta_pi + l1p / alpha;
        match k {
            0 => -mu / am1 * logistic(-t),
            1 => (l1p / alpha - mu / am1) * logistic(-t),
            _ => logistic(-eta_pi) * -(-l1p / alpha).exp_m1() * logistic(t),
        }
    } else {
        match k {
            0 => (y - mu) / am1,
            1 => (y - mu) / am1 + l1p / alpha - digamma_ratio(y, alpha),
            _ => -logistic(eta_pi),
        }
    }
}

/// ZINB quantities of one observation at fixed predictors, for loops that
/// evaluate many terms at the same state.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ZinbTerms {
    pub eta: [f64; 3],
    pub mu: f64,
    pub alpha: f64,
    /// ln(1 + αμ)
    pub l1p: f64,
    pub ln_pi: f64,
    pub ln_1mpi: f64,
    /// ln y!
    pub ln_fact: f64,
    /// ln Γ(y + 1/α) − ln Γ(1/α) + y ln α, zero for y = 0.
    pub lgr: f64,
}

impl ZinbTerms {
    pub fn new(eta: [f64; 3], y: f64) -> ZinbTerms {
        let mut t = ZinbTerms {
            eta,
            ln_fact: if y > 0.0 { ln_factorial(y) } else { 0.0 },
            ..ZinbTerms::default()
        };
        t.refresh_mu_alpha(y, true);
        t.set(2, eta[2], y);
        t
    }

    /// Updates the terms after predictor `k` changed to `eta_k`.
    pub fn set(&mut self, k: usize, eta_k: f64, y: f64) {
        self.eta[k] = eta_k;
        match k {
            0 => self.refresh_mu_alpha(y, false),
            1 => self.refresh_mu_alpha(y, true),
            _ => {
                self.ln_pi = -softplus(-eta_k);
                self.ln_1mpi = -softplus(eta_k);
            }
        }
    }

    fn refresh_mu_alpha(&mut self, y: f64, alpha_changed: bool) {
        self.mu = self.eta[0].exp();
        if alpha_changed {
            self.alpha = self.eta[1].exp();
            self.lgr = if y > 0.0 { ln_gamma_ratio(y, self.alpha) } else { 0.0 };
        }
        self.l1p = (self.alpha * self.mu).ln_1p();
    }

    /// Log zero mass of the negative binomial part.
    #[inline]
    pub fn ln_p0(&self) -> f64 {
        -self.l1p / self.alpha
    }

    /// Negative log mass of the negative binomial part at y > 0.
    #[inline]
    pub fn nb_nll(&self, y: f64) -> f64 {
        -(y * (self.eta[0] - self.l1p) - self.l1p / self.alpha + self.lgr - self.ln_fact)
    }

    #[inline]
    pub fn nll(&self, y: f64) -> f64 {
        if y == 0.0 {
            -log_add_exp(self.ln_pi, self.ln_1mpi + self.ln_p0())
        } else {
            -self.ln_1mpi + self.nb_nll(y)
        }
    }

    #[inline]
    pub fn neg_grad(&self, y: f64, k: usize) -> f64 {
        zinb_neg_grad_at(self.mu, self.alpha, self.l1p, self.eta[2], y, k)
    }
}

/// Per-parameter additive predictors on the link scale, one entry per
/// observation. Natural-scale values are materialized on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamState {
    pub family: Family,
    pub eta: Vec<Vec<f64>>,
}

impl ParamState {
    pub fn new(family: Family, eta: Vec<Vec<f64>>) -> Result<Self> {
        if eta.len() != family.n_params() {
            return Err(Error::Config(format!(
                "{} family needs {} predictors, got {}",
                family.name(),
                family.n_params(),
                eta.len()
            )));
        }
        let n = eta[0].len();
        if eta.iter().any(|e| e.len() != n) {
            return Err(Error::Data("predictor vectors differ in length".into()));
        }
        let state = ParamState { family, eta };
        state.validate()?;
        Ok(state)
    }

    /// Builds the state from natural-scale parameters, validating each domain.
    pub fn from_natural(family: Family, theta: &[Vec<f64>]) -> Result<Self> {
        let links = family.links();
        if theta.len() != links.len() {
            return Err(Error::Config(format!(
                "{} family needs {} parameters, got {}",
                family.name(),
                links.len(),
                theta.len()
            )));
        }
        for (k, values) in theta.iter().enumerate() {
            for (i, &v) in values.iter().enumerate() {
                let ok = match links[k] {
                    Link::Identity => v.is_finite(),
                    Link::Log => v > 0.0 && v.is_finite(),
                    Link::Logit => v > 0.0 && v < 1.0,
                };
                if !ok {
                    return Err(Error::domain(
                        i,
                        format!("{} = {v} outside its domain", family.param_names()[k]),
                    ));
                }
            }
        }
        let eta = theta
            .iter()
            .zip(links)
            .map(|(values, link)| values.iter().map(|&v| link.apply(v)).collect())
            .collect();
        ParamState::new(family, eta)
    }

    /// Constant predictors (e.g. offsets) replicated over `n` observations.
    pub fn constant(family: Family, eta: &[f64], n: usize) -> Result<Self> {
        ParamState::new(family, eta.iter().map(|&e| vec![e; n]).collect())
    }

    pub fn n(&self) -> usize {
        self.eta[0].len()
    }

    pub fn natural(&self, k: usize) -> Vec<f64> {
        let link = self.family.links()[k];
        self.eta[k].iter().map(|&e| link.inverse(e)).collect()
    }

    /// Predictor values of observation `i` across all parameters.
    pub fn at(&self, i: usize) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (k, e) in self.eta.iter().enumerate() {
            out[k] = e[i];
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let names = self.family.param_names();
        for (k, e) in self.eta.iter().enumerate() {
            let link = self.family.links()[k];
            for (i, &v) in e.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::domain(i, format!("predictor for {} is {v}", names[k])));
                }
                if link == Link::Log {
                    let theta = v.exp();
                    if !(theta > 0.0 && theta.is_finite()) {
                        return Err(Error::domain(
                            i,
                            format!("{} = exp({v}) leaves (0, inf)", names[k]),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_dims(state: &ParamState, y: &[f64]) -> Result<()> {
    if state.n() != y.len() {
        return Err(Error::Data(format!(
            "response has {} observations but the state has {}",
            y.len(),
            state.n()
        )));
    }
    Ok(())
}

/// Total negative log-likelihood Σᵢ −ℓ(θᵢ; yᵢ).
pub fn nll(state: &ParamState, y: &[f64]) -> Result<f64> {
    check_dims(state, y)?;
    state.validate()?;
    state.family.validate_response(y)?;
    let f = state.family;
    Ok((0..y.len()).map(|i| f.nll_obs(&state.at(i), y[i])).sum())
}

/// Negative gradient uₖ = ∂ℓ/∂ηₖ for every observation.
pub fn negative_gradient(state: &ParamState, y: &[f64], k: usize) -> Result<Vec<f64>> {
    check_dims(state, y)?;
    if k >= state.family.n_params() {
        return Err(Error::Config(format!("parameter index {k} out of range")));
    }
    state.validate()?;
    state.family.validate_response(y)?;
    let f = state.family;
    Ok((0..y.len()).map(|i| f.neg_grad_obs(&state.at(i), y[i], k)).collect())
}

/// Predictive distribution of a single observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dist {
    Gaussian { mu: f64, sigma: f64 },
    /// Zero-inflated negative binomial with π carried on the logit scale.
    Zinb { mu: f64, alpha: f64, eta_pi: f64 },
}

impl Dist {
    pub fn gaussian(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::domain(0, format!("mu = {mu} is not finite")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::domain(0, format!("sigma = {sigma} must be positive")));
        }
        Ok(Dist::Gaussian { mu, sigma })
    }

    pub fn zinb(mu: f64, alpha: f64, pi: f64) -> Result<Self> {
        if !(pi > 0.0 && pi < 1.0) {
            return Err(Error::domain(0, format!("pi = {pi} outside (0, 1)")));
        }
        Dist::zinb_logit(mu, alpha, crate::special::logit(pi))
    }

    pub fn zinb_logit(mu: f64, alpha: f64, eta_pi: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::domain(0, format!("mu = {mu} must be positive")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::domain(0, format!("alpha = {alpha} must be positive")));
        }
        if eta_pi.is_nan() {
            return Err(Error::domain(0, "logit(pi) is NaN"));
        }
        Ok(Dist::Zinb { mu, alpha, eta_pi })
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Dist::Gaussian { mu, .. } => mu,
            Dist::Zinb { mu, eta_pi, .. } => logistic(-eta_pi) * mu,
        }
    }

    /// Density (Gaussian) or probability mass (ZINB) at `y`.
    pub fn prob(&self, y: f64) -> f64 {
        match *self {
            Dist::Gaussian { mu, sigma } => std_normal_pdf((y - mu) / sigma) / sigma,
            Dist::Zinb { .. } => {
                if y < 0.0 || y.fract() != 0.0 {
                    0.0
                } else {
                    self.ln_mass(y).exp()
                }
            }
        }
    }

    /// Log mass of a ZINB count, computed directly from log-gamma terms.
    fn ln_mass(&self, y: f64) -> f64 {
        let Dist::Zinb { mu, alpha, eta_pi } = *self else {
            unreachable!("ln_mass is only defined for counts")
        };
        -zinb_nll(mu.ln(), alpha.ln(), eta_pi, y)
    }

    pub fn cdf(&self, y: f64) -> f64 {
        match *self {
            Dist::Gaussian { mu, sigma } => std_normal_cdf((y - mu) / sigma),
            Dist::Zinb { .. } => {
                if y < 0.0 {
                    return 0.0;
                }
                let upto = y.floor() as usize;
                let pmf = self.count_pmf(upto);
                let mut acc = Neumaier::default();
                for p in pmf.iter().take(upto + 1) {
                    acc.add(*p);
                }
                acc.sum().min(1.0)
            }
        }
    }

    /// Smallest T with upper-tail mass 1 − F(T) < 1e-12 (ZINB only).
    pub fn truncation_point(&self) -> usize {
        self.count_pmf(0).len() - 1
    }

    /// Probability masses 0..=max(T, min_len) where T is the truncation point.
    /// The buffer grows by doubling until the remaining tail mass drops
    /// below [`TAIL_MASS`].
    pub fn count_pmf(&self, min_len: usize) -> Vec<f64> {
        let Dist::Zinb { mu, alpha, eta_pi } = *self else {
            return Vec::new();
        };
        let inv_alpha = 1.0 / alpha;
        let l1p = (alpha * mu).ln_1p();
        let ln_q = (alpha * mu).ln() - l1p;
        let ln_1mpi = -softplus(eta_pi);
        // log NB mass at 0; subsequent masses by the ratio recursion
        let mut ln_nb = -l1p * inv_alpha;
        let mut pmf = Vec::with_capacity(64);
        pmf.push(log_add_exp(-softplus(-eta_pi), ln_1mpi + ln_nb).exp());
        let mut cum = Neumaier::default();
        cum.add(pmf[0]);
        let mut truncated: Option<usize> = None;
        let mut capacity = 64usize;
        loop {
            while pmf.len() < capacity {
                let k = (pmf.len() - 1) as f64;
                ln_nb += (k + inv_alpha).ln() - (k + 1.0).ln() + ln_q;
                let p = (ln_1mpi + ln_nb).exp();
                pmf.push(p);
                cum.add(p);
                if truncated.is_none() && 1.0 - cum.sum() < TAIL_MASS {
                    truncated = Some(pmf.len() - 1);
                }
                if let Some(t) = truncated {
                    if pmf.len() > t.max(min_len) {
                        return pmf;
                    }
                }
            }
            if capacity >= MAX_SUPPORT {
                return pmf;
            }
            capacity *= 2;
        }
    }

    /// Continuous ranked probability score of the forecast at outcome `y`.
    pub fn crps(&self, y: f64) -> f64 {
        match *self {
            Dist::Gaussian { mu, sigma } => {
                let z = (y - mu) / sigma;
                let v = sigma
                    * (z * (2.0 * std_normal_cdf(z) - 1.0) + 2.0 * std_normal_pdf(z)
                        - FRAC_1_SQRT_PI);
                v.max(0.0)
            }
            Dist::Zinb { .. } => {
                let upto = if y > 0.0 { y as usize } else { 0 };
                let pmf = self.count_pmf(upto);
                let mut cdf = 0.0;
                let mut acc = 0.0;
                for (k, p) in pmf.iter().enumerate() {
                    cdf += p;
                    let step = if y <= k as f64 { 1.0 } else { 0.0 };
                    let d = cdf.min(1.0) - step;
                    acc += d * d;
                }
                acc
            }
        }
    }

    /// Cramér distance ∫(F − G)² between two predictive distributions of
    /// the same family (a sum over the count support for ZINB).
    pub fn cramer(&self, other: &Dist) -> Result<f64> {
        match (*self, *other) {
            (Dist::Gaussian { mu: m1, sigma: s1 }, Dist::Gaussian { mu: m2, sigma: s2 }) => {
                if m1 == m2 && s1 == s2 {
                    return Ok(0.0);
                }
                // energy form: E|X−Y| − ½E|X−X′| − ½E|Y−Y′|
                let s = (s1 * s1 + s2 * s2).sqrt();
                let m = m1 - m2;
                let cross = s * (2.0 / std::f64::consts::PI).sqrt() * (-0.5 * (m / s).powi(2)).exp()
                    + m * (2.0 * std_normal_cdf(m / s) - 1.0);
                let d = cross - (s1 + s2) * FRAC_1_SQRT_PI;
                Ok(d.max(0.0))
            }
            (Dist::Zinb { .. }, Dist::Zinb { .. }) => {
                if self == other {
                    return Ok(0.0);
                }
                let a = self.count_pmf(0);
                let b = other.count_pmf(0);
                let len = a.len().max(b.len());
                let (mut fa, mut fb, mut acc) = (0.0, 0.0, 0.0);
                for k in 0..len {
                    fa += a.get(k).copied().unwrap_or(0.0);
                    fb += b.get(k).copied().unwrap_or(0.0);
                    let d = fa.min(1.0) - fb.min(1.0);
                    acc += d * d;
                }
                Ok(acc)
            }
            _ => Err(Error::Config("Cramér distance between different families".into())),
        }
    }
}

/// Compensated summation.
#[derive(Debug, Default, Clone, Copy)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn sum(&self) -> f64 {
        self.sum + self.comp
    }
}

/// CRPS of observation `i` under the family's predictive distribution.
pub fn crps_obs(state: &ParamState, i: usize, y: f64) -> f64 {
    state.family.dist_at(state, i).crps(y)
}

/// Cramér distance between predicted and true distributions of observation `i`.
pub fn cramer_dist(fitted: &ParamState, truth: &ParamState, i: usize) -> Result<f64> {
    fitted
        .family
        .dist_at(fitted, i)
        .cramer(&truth.family.dist_at(truth, i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::ln_gamma;

    #[test]
    fn zinb_terms_update_matches_fresh_terms() {
        let mut t = ZinbTerms::new([1.2, -0.7, -0.4], 3.0);
        t.set(0, 0.3, 3.0);
        t.set(1, 0.9, 3.0);
        t.set(2, 1.1, 3.0);
        let fresh = ZinbTerms::new([0.3, 0.9, 1.1], 3.0);
        assert_eq!(t, fresh);
        for y in [0.0, 1.0, 12.0] {
            let t = ZinbTerms::new([0.3, 0.9, 1.1], y);
            let (mu, alpha, pi) = (0.3f64.exp(), 0.9f64.exp(), logistic(1.1));
            let r = 1.0 / alpha;
            let nb = ln_gamma(y + r) - ln_gamma(r) - ln_gamma(y + 1.0)
                + r * (r / (r + mu)).ln()
                + y * (mu / (r + mu)).ln();
            let mass = if y == 0.0 { pi + (1.0 - pi) * nb.exp() } else { (1.0 - pi) * nb.exp() };
            assert!((t.nll(y) + mass.ln()).abs() < 1e-12);
        }
    }

    fn single(family: Family, eta: &[f64]) -> ParamState {
        ParamState::new(family, eta.iter().map(|&e| vec![e]).collect()).unwrap()
    }

    #[test]
    fn gaussian_nll_at_the_mean_is_half_log_two_pi() {
        let s = single(Family::GaussianLS, &[1.7, 0.0]);
        let v = nll(&s, &[1.7]).unwrap();
        assert!((v - 0.918_938_5).abs() < 1e-7);
    }

    #[test]
    fn zinb_zero_count_hand_value() {
        // y = 0, μ = 1, α = 1, π = 0.5 → −ln(0.5 + 0.5·2^{-1}) = −ln 0.75
        let s = ParamState::from_natural(Family::Zinb, &[vec![1.0], vec![1.0], vec![0.5]]).unwrap();
        let v = nll(&s, &[0.0]).unwrap();
        assert!((v - 0.287_682_1).abs() < 1e-7);
        assert!((v + 0.75f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn zinb_zero_count_degenerate_limit() {
        // π → 1 on the logit scale makes a zero certain
        let s = single(Family::Zinb, &[0.3, -0.2, 40.0]);
        assert!(nll(&s, &[0.0]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn zinb_matches_negative_binomial_without_inflation() {
        let (mu, alpha) = (3.2f64, 0.6f64);
        let s = single(Family::Zinb, &[mu.ln(), alpha.ln(), -40.0]);
        for y in 0..15 {
            let y = y as f64;
            let r = 1.0 / alpha;
            let nb = ln_gamma(y + r) - ln_gamma(r) - ln_gamma(y + 1.0)
                + r * (r / (r + mu)).ln()
                + y * (mu / (r + mu)).ln();
            let v = nll(&s, &[y]).unwrap();
            assert!((v + nb).abs() < 1e-8, "y={y}");
        }
    }

    #[test]
    fn domain_errors_name_the_observation() {
        let err = ParamState::from_natural(Family::GaussianLS, &[vec![0.0, 1.0], vec![1.0, -2.0]])
            .unwrap_err();
        assert!(matches!(err, Error::Domain { index: 1, .. }));
        let err = ParamState::from_natural(Family::Zinb, &[vec![1.0], vec![1.0], vec![1.0]])
            .unwrap_err();
        assert!(matches!(err, Error::Domain { index: 0, .. }));
        let s = single(Family::Zinb, &[0.0, 0.0, 0.0]);
        assert!(matches!(
            nll(&s, &[1.5]).unwrap_err(),
            Error::Domain { index: 0, .. }
        ));
        assert!(nll(&s, &[-1.0]).is_err());
    }

    #[test]
    fn gaussian_gradient_vanishes_at_the_mean() {
        let s = single(Family::GaussianLS, &[2.5, 0.4]);
        assert_eq!(negative_gradient(&s, &[2.5], 0).unwrap()[0], 0.0);
    }

    #[test]
    fn zinb_pi_gradient_for_positive_counts() {
        for &(m, a) in &[(0.1, -2.0), (2.0, 1.0), (-1.0, 0.5)] {
            let s = single(Family::Zinb, &[m, a, 0.0]);
            let u = negative_gradient(&s, &[3.0], 2).unwrap()[0];
            assert!((u + 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn zinb_zero_mass_hand_values() {
        let d = Dist::zinb_logit(1.0, 1.0, -800.0).unwrap();
        assert!((d.prob(0.0) - 0.5).abs() < 1e-15);
        let d = Dist::zinb_logit(4.0, 0.7, 60.0).unwrap();
        assert!((d.prob(0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gaussian_cdf_at_the_mean() {
        let d = Dist::gaussian(-3.0, 2.0).unwrap();
        assert!((d.cdf(-3.0) - 0.5).abs() < 1e-16);
    }

    #[test]
    fn zinb_cdf_monotone_and_reaches_one() {
        let d = Dist::zinb(6.0, 0.33, 0.31).unwrap();
        let t = d.truncation_point();
        let mut prev = 0.0;
        for k in 0..=t {
            let f = d.cdf(k as f64);
            assert!(f >= prev);
            prev = f;
        }
        assert!(1.0 - prev < TAIL_MASS);
    }

    #[test]
    fn crps_of_a_sharp_forecast_vanishes() {
        let d = Dist::gaussian(1.0, 1e-12).unwrap();
        assert!(d.crps(1.0) < 1e-12);
        let d = Dist::zinb_logit(2.0, 0.5, 60.0).unwrap();
        assert!(d.crps(0.0) < 1e-20);
    }

    #[test]
    fn cramer_identity_is_zero() {
        let g = Dist::gaussian(0.3, 1.4).unwrap();
        assert_eq!(g.cramer(&g).unwrap(), 0.0);
        let z = Dist::zinb(4.0, 0.5, 0.2).unwrap();
        assert_eq!(z.cramer(&z).unwrap(), 0.0);
        assert!(g.cramer(&z).is_err());
    }

    #[test]
    fn links_round_trip() {
        for link in [Link::Identity, Link::Log, Link::Logit] {
            for &theta in &[0.01, 0.3, 0.5, 0.97] {
                let back = link.inverse(link.apply(theta));
                assert!((back - theta).abs() <= 1e-12);
            }
        }
    }
}
