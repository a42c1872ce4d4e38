//! Per-user SNR distributions and the fractional moment `E[(1+γ)^{-ν}]`
//! that every QoS computation reduces to.

use crate::error::{Error, Result};
use crate::quadrature::{self, Tolerance};
use crate::special::exponential_integral_scaled;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use std::f64::consts::LN_2;

/// Largest moment exponent accepted. Beyond this the moment underflows for
/// practical channels and the QoS point is treated as infeasible.
pub const NU_CAP: f64 = 1e6;

/// Tail mass left out when truncating the Rayleigh integral.
const TAIL_MASS: f64 = 1e-12;

/// Block-fading SNR distribution (linear scale).
#[derive(Debug, Clone, PartialEq)]
pub enum FadingDistribution {
    /// Exponentially distributed SNR with the given mean.
    Rayleigh { mean_snr: f64 },
    /// Equiprobable SNR samples, e.g. from a measured trace.
    Empirical { samples: Vec<f64> },
}

impl FadingDistribution {
    pub fn rayleigh(mean_snr: f64) -> Result<Self> {
        if !(mean_snr.is_finite() && mean_snr > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "Rayleigh mean SNR must be finite and > 0, got {mean_snr}"
            )));
        }
        Ok(FadingDistribution::Rayleigh { mean_snr })
    }

    pub fn rayleigh_db(mean_snr_db: f64) -> Result<Self> {
        Self::rayleigh(db_to_linear(mean_snr_db))
    }

    pub fn empirical(samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("empirical SNR sample list is empty".into()));
        }
        if let Some(bad) = samples.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(Error::InvalidArgument(format!("SNR samples must be finite and >= 0, got {bad}")));
        }
        Ok(FadingDistribution::Empirical { samples })
    }

    /// Deterministic channel with constant SNR.
    pub fn constant(snr: f64) -> Result<Self> {
        Self::empirical(vec![snr])
    }

    /// Mean SNR (linear).
    pub fn mean_snr(&self) -> f64 {
        match self {
            FadingDistribution::Rayleigh { mean_snr } => *mean_snr,
            FadingDistribution::Empirical { samples } => samples.iter().sum::<f64>() / samples.len() as f64,
        }
    }

    /// True when some SNR mass sits strictly above zero.
    pub fn has_positive_mass(&self) -> bool {
        match self {
            FadingDistribution::Rayleigh { .. } => true,
            FadingDistribution::Empirical { samples } => samples.iter().any(|&s| s > 0.0),
        }
    }

    /// Mass at `γ = 0`, the limit of the moment as `ν → ∞`.
    pub fn zero_mass(&self) -> f64 {
        match self {
            FadingDistribution::Rayleigh { .. } => 0.0,
            FadingDistribution::Empirical { samples } => {
                samples.iter().filter(|&&s| s == 0.0).count() as f64 / samples.len() as f64
            }
        }
    }

    /// `E[(1+γ)^{-ν}]` by generic integration against the density
    /// (adaptive quadrature for Rayleigh, exact average for samples).
    pub fn fractional_moment(&self, nu: f64) -> Result<f64> {
        check_nu(nu)?;
        if nu == 0.0 {
            return Ok(1.0);
        }
        match self {
            FadingDistribution::Rayleigh { mean_snr } => rayleigh_moment_quadrature(*mean_snr, nu),
            FadingDistribution::Empirical { samples } => Ok(empirical_moment(samples, nu)),
        }
    }

    /// Same quantity as [`fractional_moment`](Self::fractional_moment), but
    /// using the exponential-integral closed form for Rayleigh. This is the
    /// path the QoS solver iterates on.
    pub fn moment(&self, nu: f64) -> Result<f64> {
        check_nu(nu)?;
        if nu == 0.0 {
            return Ok(1.0);
        }
        match self {
            FadingDistribution::Rayleigh { mean_snr } => rayleigh_moment_closed_form(*mean_snr, nu),
            FadingDistribution::Empirical { samples } => Ok(empirical_moment(samples, nu)),
        }
    }

    /// Ergodic spectral efficiency `E[log2(1+γ)]` in bit/s/Hz.
    pub fn mean_spectral_efficiency(&self) -> Result<f64> {
        match self {
            FadingDistribution::Rayleigh { mean_snr } => {
                let x = 1.0 / mean_snr;
                Ok(exponential_integral_scaled(1.0, x)? / LN_2)
            }
            FadingDistribution::Empirical { samples } => {
                Ok(samples.iter().map(|g| g.ln_1p() / LN_2).sum::<f64>() / samples.len() as f64)
            }
        }
    }

    /// Draws one SNR realization.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            FadingDistribution::Rayleigh { mean_snr } => {
                let e: f64 = Exp1.sample(rng);
                mean_snr * e
            }
            FadingDistribution::Empirical { samples } => samples[rng.random_range(0..samples.len())],
        }
    }
}

fn check_nu(nu: f64) -> Result<()> {
    if !nu.is_finite() || nu < 0.0 {
        return Err(Error::Domain(format!("moment exponent must be finite and >= 0, got {nu}")));
    }
    if nu > NU_CAP {
        return Err(Error::ExponentCap { nu, cap: NU_CAP });
    }
    Ok(())
}

fn empirical_moment(samples: &[f64], nu: f64) -> f64 {
    samples.iter().map(|g| (-nu * g.ln_1p()).exp()).sum::<f64>() / samples.len() as f64
}

fn rayleigh_moment_quadrature(mean_snr: f64, nu: f64) -> Result<f64> {
    let upper = mean_snr * (1.0 / TAIL_MASS).ln();
    let density = |g: f64| (-nu * g.ln_1p() - g / mean_snr).exp() / mean_snr;
    let tol = Tolerance { abs: 0.0, rel: 1e-12, max_intervals: 20_000 };
    // The integrand decays on the scale 1/(ν + 1/γ̄); splitting there helps
    // the first subdivisions land where the mass is.
    let knee = (1.0 / (nu + 1.0 / mean_snr)).min(upper);
    let mut total = quadrature::integrate(density, 0.0, knee, tol)?;
    // Past the knee the mass can sit in a sliver of a very long interval, so
    // the tail is cut into decades.
    let mut a = knee;
    while a < upper {
        let b = (a * 10.0).min(upper);
        total += quadrature::integrate(density, a, b, tol)?;
        a = b;
    }
    Ok(total)
}

/// Rayleigh moment through the exponential integral:
/// `E[(1+γ)^{-ν}] = (1/γ̄) e^{1/γ̄} E_ν(1/γ̄)`.
pub fn rayleigh_moment_closed_form(mean_snr: f64, nu: f64) -> Result<f64> {
    if !(mean_snr.is_finite() && mean_snr > 0.0) {
        return Err(Error::Domain(format!("mean SNR must be finite and > 0, got {mean_snr}")));
    }
    check_nu(nu)?;
    let x = 1.0 / mean_snr;
    Ok(x * exponential_integral_scaled(nu, x)?)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}
