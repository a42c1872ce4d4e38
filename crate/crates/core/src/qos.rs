//! Statistical delay targets and the per-user constants derived from them.
//!
//! A target `Pr{delay > D} ≤ P` over a block-fading channel pins the product
//! of bandwidth and QoS exponent through
//! `E[(1+γ)^{-dT/ln 2}] = P^{1/D}`. The solver works on `dT` directly, so
//! the source spectral efficiency `ln(1/P) / (D·dT)` never depends on the
//! coherence time.

use crate::error::{Error, Result};
use crate::fading::{FadingDistribution, NU_CAP};
use crate::roots::bisect_decreasing;
use std::cell::RefCell;
use std::f64::consts::LN_2;

pub const DEFAULT_COHERENCE_TIME_S: f64 = 1e-3;

/// Relative residual accepted on `E[(1+γ)^{-ν}] = p`.
pub const ROOT_TOLERANCE: f64 = 1e-10;

/// Statistical delay requirement `Pr{delay > delay_bound_s} ≤ violation_prob`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QosTarget {
    pub delay_bound_s: f64,
    pub violation_prob: f64,
}

impl QosTarget {
    pub fn new(delay_bound_s: f64, violation_prob: f64) -> Result<Self> {
        if !(delay_bound_s.is_finite() && delay_bound_s > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "delay bound must be finite and > 0 s, got {delay_bound_s}"
            )));
        }
        if !(violation_prob > 0.0 && violation_prob < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "violation probability must lie in (0, 1), got {violation_prob}"
            )));
        }
        Ok(QosTarget { delay_bound_s, violation_prob })
    }

    /// `ln(1/P)`.
    pub fn log_inverse_prob(&self) -> f64 {
        -self.violation_prob.ln()
    }
}

/// Constants derived from a target and a fading distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QosDerived {
    /// `P^{1/D}`.
    pub p: f64,
    /// Bandwidth–QoS-exponent product times coherence time, `d·T`.
    pub d_times_t: f64,
    /// Source spectral efficiency `R*/B` in bit/s/Hz.
    pub sse: f64,
    pub coherence_time_s: f64,
}

impl QosDerived {
    /// Moment exponent `ν = dT / ln 2` at the solved point.
    pub fn nu(&self) -> f64 {
        self.d_times_t / LN_2
    }

    /// Bandwidth–QoS-exponent product `d` (Hz·1/bit).
    pub fn d(&self) -> f64 {
        self.d_times_t / self.coherence_time_s
    }

    /// Per-bit QoS exponent at bandwidth `bandwidth_hz`, `θ = d / B`.
    pub fn theta_for_bandwidth(&self, bandwidth_hz: f64) -> f64 {
        self.d() / bandwidth_hz
    }

    /// Bandwidth needed to carry `rate_bps` under the delay target.
    pub fn bandwidth_for_rate(&self, rate_bps: f64) -> f64 {
        rate_bps / self.sse
    }
}

pub fn compute_p(target: &QosTarget) -> f64 {
    target.violation_prob.powf(1.0 / target.delay_bound_s)
}

/// Solves `E[(1+γ)^{-dT/ln 2}] = P^{1/D}` for `dT` and fills in the
/// source spectral efficiency.
pub fn solve_d(target: &QosTarget, dist: &FadingDistribution, coherence_time_s: f64) -> Result<QosDerived> {
    if !(coherence_time_s.is_finite() && coherence_time_s > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "coherence time must be finite and > 0 s, got {coherence_time_s}"
        )));
    }
    if !dist.has_positive_mass() {
        return Err(Error::DegenerateChannel);
    }
    let p = compute_p(target);
    if p <= dist.zero_mass() {
        return Err(Error::QosInfeasible(format!(
            "p = {p:e} is not above the zero-SNR mass {}",
            dist.zero_mass()
        )));
    }

    let mut lo = 1e-12;
    if dist.moment(lo)? <= p {
        lo = 0.0;
    }
    let mut hi = 1.0;
    while dist.moment(hi)? > p {
        if hi >= NU_CAP {
            return Err(Error::QosInfeasible(format!(
                "p = {p:e} lies below E[(1+γ)^(-ν)] at the exponent cap ν = {NU_CAP:e}"
            )));
        }
        hi = (hi * 2.0).min(NU_CAP);
    }

    let failure = RefCell::new(None);
    let residual = |nu: f64| match dist.moment(nu) {
        Ok(m) => m - p,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            0.0
        }
    };
    let bracket = bisect_decreasing(residual, lo, hi, true, |_, r| r.abs() <= 1e-13 * p);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let nu = bracket.mid();
    let miss = (dist.moment(nu)? - p).abs();
    if miss > ROOT_TOLERANCE * p {
        return Err(Error::NonConvergent(format!(
            "QoS root residual {miss:e} exceeds {ROOT_TOLERANCE:e}·p at ν = {nu}"
        )));
    }
    let d_times_t = nu * LN_2;
    let sse = target.log_inverse_prob() / (target.delay_bound_s * d_times_t);
    Ok(QosDerived { p, d_times_t, sse, coherence_time_s })
}

/// Per-bit QoS exponent `θ = ln(1/P) / (T·R·D)`.
pub fn theta_for_rate(target: &QosTarget, rate_bps: f64, coherence_time_s: f64) -> Result<f64> {
    if !(rate_bps > 0.0 && rate_bps.is_finite()) {
        return Err(Error::InvalidArgument(format!("rate must be finite and > 0, got {rate_bps}")));
    }
    if !(coherence_time_s > 0.0 && coherence_time_s.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "coherence time must be finite and > 0, got {coherence_time_s}"
        )));
    }
    Ok(target.log_inverse_prob() / (coherence_time_s * rate_bps * target.delay_bound_s))
}

/// Largest source rate that meets the delay target with `bandwidth_hz`.
pub fn max_rate_for_bandwidth(derived: &QosDerived, bandwidth_hz: f64) -> Result<f64> {
    if !(bandwidth_hz >= 0.0 && bandwidth_hz.is_finite()) {
        return Err(Error::InvalidArgument(format!("bandwidth must be finite and >= 0, got {bandwidth_hz}")));
    }
    Ok(derived.sse * bandwidth_hz)
}
