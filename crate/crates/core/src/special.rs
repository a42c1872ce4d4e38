//! Generalized exponential integral `E_a(x) = ∫_1^∞ e^{-xt} t^{-a} dt` for
//! real order `a ≥ 0` and `x > 0`.
//!
//! Two evaluation routes are used: the Lentz continued fraction for `x ≥ 1`
//! and the convergent power series for `x < 1`. The series has a removable
//! singularity at integer orders; near those orders the two singular pieces
//! are combined analytically (see [`series_near_integer`]).

use crate::error::{Error, Result};
use statrs::function::gamma::{gamma, ln_gamma};
use std::f64::consts::PI;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// ζ(2), ζ(3), …, ζ(20).
const ZETA: [f64; 19] = [
    1.644_934_066_848_226_4,
    1.202_056_903_159_594_3,
    1.082_323_233_711_138_2,
    1.036_927_755_143_369_9,
    1.017_343_061_984_449_1,
    1.008_349_277_381_922_8,
    1.004_077_356_197_944_3,
    1.002_008_392_826_082_2,
    1.000_994_575_127_818_1,
    1.000_494_188_604_119_5,
    1.000_246_086_553_308_0,
    1.000_122_713_347_578_5,
    1.000_061_248_135_058_7,
    1.000_030_588_236_307_0,
    1.000_015_282_259_408_7,
    1.000_007_637_197_637_9,
    1.000_003_817_293_265_0,
    1.000_001_908_212_716_6,
    1.000_000_953_962_033_9,
];

const MAX_ITER: usize = 100_000;
const CF_TINY: f64 = 1e-300;
/// Half-width of the band around integer orders that uses the combined form.
const NEAR_INTEGER: f64 = 0.1;

/// `E_a(x)`. Fails when the value underflows `f64`; use
/// [`exponential_integral_scaled`] for large `x`.
pub fn exponential_integral(a: f64, x: f64) -> Result<f64> {
    let scaled = exponential_integral_scaled(a, x)?;
    let value = scaled * (-x).exp();
    if value == 0.0 || !value.is_finite() {
        return Err(Error::Domain(format!(
            "E_{a}({x}) is not representable (scaled value {scaled:e})"
        )));
    }
    Ok(value)
}

/// `e^x · E_a(x)`, which stays representable for every admissible input.
pub fn exponential_integral_scaled(a: f64, x: f64) -> Result<f64> {
    if !(a.is_finite() && x.is_finite()) {
        return Err(Error::Domain(format!("E_a(x) needs finite a and x, got a={a}, x={x}")));
    }
    if a < 0.0 {
        return Err(Error::Domain(format!("E_a(x) order must be >= 0, got {a}")));
    }
    if x <= 0.0 {
        return Err(Error::Domain(format!("E_a(x) argument must be > 0, got {x}")));
    }
    if a == 0.0 {
        return Ok(1.0 / x);
    }
    if x >= 1.0 {
        continued_fraction_scaled(a, x)
    } else {
        Ok(series(a, x)? * x.exp())
    }
}

/// Modified Lentz evaluation of the continued fraction
/// `E_a(x) = e^{-x} / (x + a - 1·a / (x + a + 2 - 2(a+1) / (x + a + 4 - …)))`.
fn continued_fraction_scaled(a: f64, x: f64) -> Result<f64> {
    let mut b = x + a;
    let mut c = 1.0 / CF_TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let i = i as f64;
        let an = -i * (a - 1.0 + i);
        b += 2.0;
        d = an * d + b;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = b + an / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        h *= delta;
        if (delta - 1.0).abs() <= f64::EPSILON {
            return Ok(h);
        }
    }
    Err(Error::NonConvergent(format!("continued fraction for E_{a}({x})")))
}

fn series(a: f64, x: f64) -> Result<f64> {
    let n = a.round();
    let eps = a - n;
    if n >= 1.0 && eps.abs() < NEAR_INTEGER {
        series_near_integer(n as u64 - 1, eps, x)
    } else {
        series_general(a, x)
    }
}

/// `Σ_{k≥0, k≠skip} (-x)^k / (k! (1 - a + k))`.
fn alternating_sum(a: f64, x: f64, skip: Option<u64>) -> Result<f64> {
    let mut sum = 0.0;
    let mut power = 1.0; // (-x)^k / k!
    for k in 0..MAX_ITER as u64 {
        if k > 0 {
            power *= -x / k as f64;
        }
        if Some(k) == skip {
            continue;
        }
        let term = power / (1.0 - a + k as f64);
        sum += term;
        if k as f64 > a && term.abs() <= f64::EPSILON * 1e-2 * sum.abs() {
            return Ok(sum);
        }
        if power == 0.0 {
            return Ok(sum);
        }
    }
    Err(Error::NonConvergent(format!("power series for E_{a}({x})")))
}

/// `E_a(x) = Γ(1-a) x^{a-1} - Σ_k (-x)^k / (k!(1-a+k))`, away from integer `a ≥ 1`.
fn series_general(a: f64, x: f64) -> Result<f64> {
    let leading = if a < 1.0 {
        gamma(1.0 - a) * x.powf(a - 1.0)
    } else {
        // Γ(1-a) = π / (sin(πa) Γ(a)); sin(πa) = (-1)^n sin(π(a-n)).
        let n = a.round();
        let sign = if (n as i64) % 2 == 0 { 1.0 } else { -1.0 };
        let sin_pi_a = sign * (PI * (a - n)).sin();
        let log_mag = (a - 1.0) * x.ln() - ln_gamma(a);
        if log_mag < -745.0 {
            0.0
        } else {
            PI / sin_pi_a * log_mag.exp()
        }
    };
    Ok(leading - alternating_sum(a, x, None)?)
}

/// Order `a = m + 1 + eps` with `|eps| < 0.1`.
///
/// The pole of `Γ(1-a)` cancels the `k = m` series term. Writing
/// `F(eps) = Γ(1-eps) x^eps / Π_{j≤m}(1 + eps/j)`, their sum is
/// `(-1)^m x^m/m! · (1 - F(eps))/eps`, evaluated through `g = ln F` and
/// `g/eps` so that nothing cancels, including at `eps = 0`.
fn series_near_integer(m: u64, eps: f64, x: f64) -> Result<f64> {
    let a = m as f64 + 1.0 + eps;
    let rest = alternating_sum(a, x, Some(m))?;

    let log_lead = m as f64 * x.ln() - ln_gamma(m as f64 + 1.0);
    if log_lead < -745.0 {
        return Ok(-rest);
    }
    let mut g_over_eps = ln_gamma_one_minus_over(eps) + x.ln();
    for j in 1..=m {
        let j = j as f64;
        g_over_eps -= if eps == 0.0 { 1.0 / j } else { (eps / j).ln_1p() / eps };
    }
    let g = g_over_eps * eps;
    let expm1_ratio = if g == 0.0 { 1.0 } else { g.exp_m1() / g };
    let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    let singular = -sign * log_lead.exp() * expm1_ratio * g_over_eps;
    Ok(singular - rest)
}

/// `ln Γ(1-eps) / eps` for `|eps| < 0.1`, from the Taylor series
/// `ln Γ(1-eps) = γ eps + Σ_{k≥2} ζ(k) eps^k / k`.
fn ln_gamma_one_minus_over(eps: f64) -> f64 {
    let mut acc = 0.0;
    for (i, z) in ZETA.iter().enumerate().rev() {
        let k = (i + 2) as f64;
        acc = acc * eps + z / k;
    }
    EULER_GAMMA + acc * eps
}
