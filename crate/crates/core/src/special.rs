//! Special functions used by the likelihoods and their derivatives.
//!
//! `ln_gamma` and `digamma` shift small arguments upwards with the
//! recurrence relations and then apply the asymptotic (Stirling) series.
//! Both are accurate to well below 1e-12 on (0, 1e6].

use std::f64::consts::PI;
use std::sync::OnceLock;

const SHIFT_THRESHOLD: f64 = 16.0;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// Natural logarithm of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    if x.is_infinite() {
        return f64::INFINITY;
    }
    let mut z = x;
    let mut prod = 1.0;
    while z < SHIFT_THRESHOLD {
        prod *= z;
        z += 1.0;
    }
    let shift = if prod == 1.0 { 0.0 } else { prod.ln() };
    stirling_ln_gamma(z) - shift
}

fn stirling_ln_gamma(z: f64) -> f64 {
    let r = 1.0 / z;
    let r2 = r * r;
    // Bernoulli terms B_{2k} / (2k (2k-1) z^{2k-1})
    let series = r
        * (1.0 / 12.0
            + r2 * (-1.0 / 360.0
                + r2 * (1.0 / 1260.0
                    + r2 * (-1.0 / 1680.0
                        + r2 * (1.0 / 1188.0 + r2 * (-691.0 / 360_360.0 + r2 * (1.0 / 156.0)))))));
    (z - 0.5) * z.ln() - z + HALF_LN_2PI + series
}

/// Digamma function ψ(x) = d/dx ln Γ(x) for `x > 0`.
pub fn digamma(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    if x.is_infinite() {
        return f64::INFINITY;
    }
    let mut z = x;
    let mut acc = 0.0;
    while z < SHIFT_THRESHOLD {
        acc -= 1.0 / z;
        z += 1.0;
    }
    let r = 1.0 / z;
    let r2 = r * r;
    // B_{2k} / (2k z^{2k})
    let series = r2
        * (1.0 / 12.0
            + r2 * (-1.0 / 120.0
                + r2 * (1.0 / 252.0
                    + r2 * (-1.0 / 240.0
                        + r2 * (1.0 / 132.0 + r2 * (-691.0 / 32_760.0 + r2 * (1.0 / 12.0)))))));
    acc + z.ln() - 0.5 * r - series
}

/// Above this value of 1/α the gamma and digamma differences switch to
/// asymptotic expansions that avoid cancellation.
const RATIO_ASYMPTOTIC: f64 = 1e3;

/// Integer counts up to this value use finite sums in the gamma ratios.
const SMALL_COUNT: f64 = 64.0;

fn small_count(y: f64) -> Option<usize> {
    (y >= 0.0 && y <= SMALL_COUNT && y.fract() == 0.0).then_some(y as usize)
}

/// `ln y!` for integer counts, tabulated below 1024.
pub fn ln_factorial(y: f64) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    if y >= 0.0 && y < 1024.0 && y.fract() == 0.0 {
        let table = TABLE.get_or_init(|| {
            let mut t = vec![0.0; 1024];
            for k in 2..1024 {
                t[k] = ln_gamma(k as f64 + 1.0);
            }
            t
        });
        return table[y as usize];
    }
    ln_gamma(y + 1.0)
}

/// `ln Γ(y + 1/α) − ln Γ(1/α) + y·ln α`, accurate as α → 0.
pub fn ln_gamma_ratio(y: f64, alpha: f64) -> f64 {
    if let Some(count) = small_count(y) {
        // Σ_{j<y} ln(1 + jα)
        if count as f64 * alpha < 0.05 {
            return (1..count).map(|j| (j as f64 * alpha).ln_1p()).sum();
        }
        let (mut acc, mut prod) = (0.0, 1.0);
        for j in 1..count {
            prod *= 1.0 + j as f64 * alpha;
            if prod > 1e250 {
                acc += prod.ln();
                prod = 1.0;
            }
        }
        return acc + prod.ln();
    }
    let z = 1.0 / alpha;
    if z <= RATIO_ASYMPTOTIC {
        return ln_gamma(y + z) - ln_gamma(z) + y * alpha.ln();
    }
    let correction = |v: f64| {
        let r = 1.0 / v;
        let r2 = r * r;
        r * (1.0 / 12.0 - r2 * (1.0 / 360.0 - r2 / 1260.0))
    };
    let w = z + y;
    (w - 0.5) * (y * alpha).ln_1p() - y + correction(w) - correction(z)
}

/// `(ψ(y + 1/α) − ψ(1/α)) / α`, accurate as α → 0.
pub fn digamma_ratio(y: f64, alpha: f64) -> f64 {
    if let Some(count) = small_count(y) {
        // Σ_{j<y} 1 / (1 + jα)
        return (0..count).map(|j| 1.0 / (1.0 + j as f64 * alpha)).sum();
    }
    let z = 1.0 / alpha;
    if z <= RATIO_ASYMPTOTIC {
        return (digamma(y + z) - digamma(z)) * z;
    }
    let tail = |v: f64| {
        let r2 = 1.0 / (v * v);
        -0.5 / v - r2 * (1.0 / 12.0 - r2 * (1.0 / 120.0 - r2 / 252.0))
    };
    z * ((y * alpha).ln_1p() + tail(z + y) - tail(z))
}

/// ln(1 + e^x) without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 35.0 {
        x + (-x).exp()
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic function 1 / (1 + e^{-x}).
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// ln(e^a + e^b).
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

pub fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_ratios_match_reference_for_small_dispersion() {
        // (y, α, ln Γ(y+1/α) − ln Γ(1/α) + y ln α, (ψ(y+1/α) − ψ(1/α))/α), 50 digits
        let cases = [
            (5.0, 1e-4, 0.0009998500333244859325186004, 4.999000299900035387004888),
            (37.0, 1e-12, 6.659999999918970000001479e-10, 36.99999999933400000001621),
            (3.0, 2e-3, 0.005990023932210509017328889, 2.99401992827094814355353),
            (250.0, 1e-6, 0.03112241176037354189342617, 249.9688801761564276993885),
            (0.5, 1e-5, -0.000001249999999994791666666823, 0.500001249999999984375),
            (7.0, 0.5, 5.752572638825633062496603, 3.435714285714285714285714),
        ];
        for (y, a, lg, dg) in cases {
            assert!((ln_gamma_ratio(y, a) - lg).abs() < 1e-12 * y.max(1.0), "{y} {a}");
            assert!((digamma_ratio(y, a) - dg).abs() < 1e-10 * y.max(1.0), "{y} {a}");
        }
        // both branches agree at the switch point
        for y in [1.0, 4.0, 60.0] {
            let a = 1.0 / RATIO_ASYMPTOTIC;
            let z = RATIO_ASYMPTOTIC;
            let direct = ln_gamma(y + z) - ln_gamma(z) + y * a.ln();
            assert!((ln_gamma_ratio(y, a * (1.0 - 1e-12)) - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn count_sums_match_gamma_form() {
        for y in 0..=SMALL_COUNT as usize {
            let yf = y as f64;
            for a in [0.01, 0.3, 1.0, 4.0] {
                let z = 1.0 / a;
                let lg = ln_gamma(yf + z) - ln_gamma(z) + yf * a.ln();
                let dg = (digamma(yf + z) - digamma(z)) * z;
                assert!(close(ln_gamma_ratio(yf, a), lg, 1e-12), "{y} {a}");
                assert!(close(digamma_ratio(yf, a), dg, 1e-11), "{y} {a}");
            }
            assert!(close(ln_factorial(yf), ln_gamma(yf + 1.0), 1e-14));
        }
        // products beyond the f64 range are accumulated in pieces
        let direct: f64 = (1..64).map(|j| (1.0 + j as f64 * 1e6).ln()).sum();
        assert!(close(ln_gamma_ratio(64.0, 1e6), direct, 1e-14));
        assert!(close(ln_factorial(2000.0), ln_gamma(2001.0), 1e-15));
    }

    // (x, ln Γ(x), ψ(x)) from 50-digit arbitrary precision evaluation.
    const REFERENCE: &[(f64, f64, f64)] = &[
        (1e-10, 23.02585092988273527369799, -10000000000.57721566473704),
        (0.001, 6.907178885383853682512345, -1000.575571931810300471473),
        (0.5, 0.5723649429247000870717137, -1.963510026021423479440976),
        (1.0, 0.0, -0.5772156649015328606065121),
        (1.5, -0.1207822376352452223455184, 0.03648997397857652055902367),
        (2.0, 0.0, 0.4227843350984671393934879),
        (3.3, 0.9870985778947345878786793, 1.034822489059621749051113),
        (7.25, 7.052185450738539444925749, 1.910453526883736028382495),
        (15.9, 27.62549321516869080950382, 2.734543070175773857581772),
        (16.0, 27.89927138384089156608944, 2.741013328327460368386717),
        (100.5, 361.4355404677776215552519, 4.605174352581845211868679),
        (12345.6789, 103959.9283844648323949959, 9.421020893644716737526486),
        (999999.5, 12815497.66139270767796492, 13.81550955796381577052462),
    ];

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn ln_gamma_matches_high_precision_values() {
        for &(x, lg, _) in REFERENCE {
            assert!(close(ln_gamma(x), lg, 1e-13), "x={x}: {} vs {lg}", ln_gamma(x));
        }
    }

    #[test]
    fn digamma_matches_high_precision_values() {
        for &(x, _, psi) in REFERENCE {
            assert!(close(digamma(x), psi, 1e-13), "x={x}: {} vs {psi}", digamma(x));
        }
    }

    #[test]
    fn digamma_is_derivative_of_ln_gamma() {
        for &x in &[0.3, 1.7, 4.0, 22.5, 310.0] {
            let h = 1e-5 * x;
            let fd = (ln_gamma(x + h) - ln_gamma(x - h)) / (2.0 * h);
            assert!((fd - digamma(x)).abs() < 1e-7, "x={x}");
        }
    }

    #[test]
    fn invalid_arguments_yield_nan() {
        assert!(ln_gamma(0.0).is_nan());
        assert!(digamma(-1.0).is_nan());
    }

    #[test]
    fn logistic_helpers() {
        assert_eq!(logistic(0.0), 0.5);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((softplus(50.0) - 50.0).abs() < 1e-15);
        assert!((logit(logistic(1.3)) - 1.3).abs() < 1e-12);
        assert!((log_add_exp(1f64.ln(), 3f64.ln()) - 4f64.ln()).abs() < 1e-15);
        assert!((std_normal_cdf(0.0) - 0.5).abs() < 1e-16);
    }
}
