use crate::error::{Error, Result};
use crate::fading::FadingDistribution;
use crate::qos::{solve_d, QosDerived, QosTarget, ROOT_TOLERANCE};
use crate::rate_quality::RateQualityCurve;

/// One video user: delay target, channel statistics, rate-quality curve and
/// the constants derived from the first two.
#[derive(Debug, Clone, PartialEq)]
pub struct UserProfile {
    pub id: String,
    pub target: QosTarget,
    pub dist: FadingDistribution,
    pub curve: RateQualityCurve,
    pub derived: QosDerived,
}

impl UserProfile {
    /// Builds a profile, solving the QoS constants for `coherence_time_s`.
    pub fn new(
        id: impl Into<String>,
        target: QosTarget,
        dist: FadingDistribution,
        curve: RateQualityCurve,
        coherence_time_s: f64,
    ) -> Result<Self> {
        let derived = solve_d(&target, &dist, coherence_time_s)?;
        Ok(UserProfile { id: id.into(), target, dist, curve, derived })
    }

    /// Source spectral efficiency in bit/s/Hz.
    pub fn sse(&self) -> f64 {
        self.derived.sse
    }

    /// Bandwidth that carries exactly the minimum rate, `R_min / sse`.
    pub fn min_bandwidth_hz(&self) -> f64 {
        self.curve.min_rate_bps() / self.derived.sse
    }

    /// Re-checks that the stored constants solve the moment equation for
    /// this target and channel.
    pub fn check_consistency(&self) -> Result<()> {
        let expected_p = crate::qos::compute_p(&self.target);
        if ((self.derived.p - expected_p) / expected_p).abs() > 1e-12 {
            return Err(Error::InconsistentAllocation(format!(
                "user {}: stored p {} does not match target ({expected_p})",
                self.id, self.derived.p
            )));
        }
        let m = self.dist.moment(self.derived.nu())?;
        if (m - self.derived.p).abs() > 10.0 * ROOT_TOLERANCE * self.derived.p {
            return Err(Error::InconsistentAllocation(format!(
                "user {}: moment {m:e} at the stored exponent misses p = {:e}",
                self.id, self.derived.p
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_bandwidth_is_linear_in_min_rate() {
        let target = QosTarget::new(2.0, 0.1).unwrap();
        let dist = FadingDistribution::rayleigh_db(0.0).unwrap();
        let c1 = RateQualityCurve::logarithmic(1.0, 1e5, 185e3).unwrap();
        let u = UserProfile::new("a", target, dist.clone(), c1.clone(), 1e-3).unwrap();
        let v = UserProfile::new("b", target, dist, c1.with_min_rate(370e3).unwrap(), 1e-3).unwrap();
        assert_eq!(v.min_bandwidth_hz(), 2.0 * u.min_bandwidth_hz());
        let zero = UserProfile { curve: c1.with_min_rate(0.0).unwrap(), ..u.clone() };
        assert_eq!(zero.min_bandwidth_hz(), 0.0);
        u.check_consistency().unwrap();
    }

    #[test]
    fn stale_constants_are_detected() {
        let target = QosTarget::new(2.0, 0.1).unwrap();
        let dist = FadingDistribution::rayleigh_db(0.0).unwrap();
        let curve = RateQualityCurve::logarithmic(1.0, 1e5, 1e5).unwrap();
        let mut u = UserProfile::new("a", target, dist, curve, 1e-3).unwrap();
        u.derived.d_times_t *= 1.01;
        assert!(u.check_consistency().is_err());
    }
}
