//! Admission of one more user into a running allocation.
//!
//! The newcomer's operating point comes from re-solving the policy over all
//! `K + 1` users without minimum-rate constraints. Existing users are then
//! assumed to keep their spectral efficiency and lose bandwidth in
//! proportion, so each existing rate scales by `(B − B_new) / B`.

use crate::allocator::{
    allocate_fairness, allocate_sum_quality_unconstrained, AllocationResult, PolicyOutcome,
};
use crate::error::{Error, Result};
use crate::profile::UserProfile;

/// Relative slack on the budget consistency check of the running allocation.
const BUDGET_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum AdmissionFailure {
    /// These existing users would drop below their minimum rate.
    ExistingBelowMinimum { ids: Vec<String> },
    /// The newcomer's own rate would sit below its minimum representation.
    NewUserBelowMinimum { rate_bps: f64, min_rate_bps: f64 },
}

impl AdmissionFailure {
    pub fn describe(&self) -> String {
        match self {
            AdmissionFailure::ExistingBelowMinimum { ids } => {
                format!("existing users below minimum rate: {}", ids.join(" "))
            }
            AdmissionFailure::NewUserBelowMinimum { rate_bps, min_rate_bps } => {
                format!("new user below minimum representation ({rate_bps:.1} < {min_rate_bps:.1} bit/s)")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissionDecision {
    pub admit: bool,
    pub new_user_rate_bps: f64,
    pub new_user_bandwidth_hz: f64,
    /// `(id, post-admission rate)` for every existing user.
    pub post_rates: Vec<(String, f64)>,
    /// Common quality after admission (fairness policy only).
    pub final_quality: Option<f64>,
    /// Every violated condition; empty when admitted.
    pub failures: Vec<AdmissionFailure>,
}

fn check_existing(existing: &AllocationResult, profiles: &[UserProfile], total_bandwidth_hz: f64) -> Result<()> {
    if existing.users.len() != profiles.len() || existing.users.iter().zip(profiles).any(|(a, p)| a.id != p.id) {
        return Err(Error::InconsistentAllocation("allocation entries do not match the user profiles".into()));
    }
    if ((existing.total_bandwidth_hz - total_bandwidth_hz) / total_bandwidth_hz).abs() > BUDGET_SLACK {
        return Err(Error::InconsistentAllocation(format!(
            "allocation was made for {} Hz, admission asked for {total_bandwidth_hz} Hz",
            existing.total_bandwidth_hz
        )));
    }
    if existing.allocated_bandwidth_hz() > total_bandwidth_hz * (1.0 + BUDGET_SLACK) {
        return Err(Error::InconsistentAllocation(format!(
            "allocation uses {} Hz of a {total_bandwidth_hz} Hz budget",
            existing.allocated_bandwidth_hz()
        )));
    }
    Ok(())
}

/// Evaluates both admission conditions given the newcomer's bandwidth and
/// rate at the post-admission operating point.
fn decide(
    existing: &AllocationResult,
    profiles: &[UserProfile],
    new_user: &UserProfile,
    new_bandwidth_hz: f64,
    total_bandwidth_hz: f64,
) -> AdmissionDecision {
    let new_rate = new_user.sse() * new_bandwidth_hz;
    let keep = 1.0 - new_bandwidth_hz / total_bandwidth_hz;
    let mut starved = Vec::new();
    let mut post_rates = Vec::with_capacity(profiles.len());
    for (a, p) in existing.users.iter().zip(profiles) {
        let min_rate = p.curve.min_rate_bps();
        // R_min / R ≤ 1 − B_new / B, written multiplicatively so R = 0 is safe.
        if min_rate > a.rate_bps * keep {
            starved.push(a.id.clone());
        }
        post_rates.push((a.id.clone(), a.rate_bps * keep));
    }
    let mut failures = Vec::new();
    if !starved.is_empty() {
        failures.push(AdmissionFailure::ExistingBelowMinimum { ids: starved });
    }
    if new_user.curve.min_rate_bps() > new_rate {
        failures.push(AdmissionFailure::NewUserBelowMinimum {
            rate_bps: new_rate,
            min_rate_bps: new_user.curve.min_rate_bps(),
        });
    }
    AdmissionDecision {
        admit: failures.is_empty(),
        new_user_rate_bps: new_rate,
        new_user_bandwidth_hz: new_bandwidth_hz,
        post_rates,
        final_quality: None,
        failures,
    }
}

fn with_newcomer(profiles: &[UserProfile], new_user: &UserProfile) -> Vec<UserProfile> {
    let mut all = profiles.to_vec();
    all.push(new_user.clone());
    all
}

/// Admission under the sum-quality policy.
pub fn admit_sum_quality(
    existing: &AllocationResult,
    profiles: &[UserProfile],
    new_user: &UserProfile,
    total_bandwidth_hz: f64,
) -> Result<AdmissionDecision> {
    if !matches!(existing.outcome, PolicyOutcome::SumQuality { .. }) {
        return Err(Error::InvalidArgument("sum-quality admission needs a sum-quality allocation".into()));
    }
    check_existing(existing, profiles, total_bandwidth_hz)?;
    let resolved = allocate_sum_quality_unconstrained(&with_newcomer(profiles, new_user), total_bandwidth_hz)?;
    let new_bandwidth = resolved.users.last().expect("newcomer is present").bandwidth_hz;
    Ok(decide(existing, profiles, new_user, new_bandwidth, total_bandwidth_hz))
}

/// Admission under the fairness policy. The common quality is re-solved over
/// all `K + 1` users.
pub fn admit_fairness(
    existing: &AllocationResult,
    profiles: &[UserProfile],
    new_user: &UserProfile,
    total_bandwidth_hz: f64,
) -> Result<AdmissionDecision> {
    if !matches!(existing.outcome, PolicyOutcome::Fairness { .. }) {
        return Err(Error::InvalidArgument("fairness admission needs a fairness allocation".into()));
    }
    check_existing(existing, profiles, total_bandwidth_hz)?;
    let resolved = allocate_fairness(&with_newcomer(profiles, new_user), total_bandwidth_hz)?;
    let PolicyOutcome::Fairness { quality } = resolved.outcome else {
        unreachable!("fairness allocator returns a fairness outcome")
    };
    let new_bandwidth = resolved.users.last().expect("newcomer is present").bandwidth_hz;
    let mut decision = decide(existing, profiles, new_user, new_bandwidth, total_bandwidth_hz);
    decision.final_quality = Some(quality);
    Ok(decision)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocator::{allocate_sum_quality, UserStatus};
    use crate::fading::FadingDistribution;
    use crate::qos::QosTarget;
    use crate::rate_quality::RateQualityCurve;

    fn user(id: &str, snr_db: f64, scale: f64, min_rate: f64) -> UserProfile {
        UserProfile::new(
            id,
            QosTarget::new(1.0, 0.1).unwrap(),
            FadingDistribution::rayleigh_db(snr_db).unwrap(),
            RateQualityCurve::logarithmic(scale, 1e5, min_rate).unwrap(),
            1e-3,
        )
        .unwrap()
    }

    #[test]
    fn zero_floor_newcomer_is_admitted_when_others_have_slack() {
        let users = vec![user("a", 10.0, 1.0, 1e4), user("b", 15.0, 2.0, 1e4)];
        let running = allocate_sum_quality(&users, 1e7).unwrap();
        let d = admit_sum_quality(&running, &users, &user("n", 5.0, 1.0, 0.0), 1e7).unwrap();
        assert!(d.admit, "{d:?}");
        assert!(d.new_user_bandwidth_hz > 0.0);
        let kept: f64 = d.post_rates.iter().zip(&running.users).map(|(p, a)| p.1 / a.rate_bps).sum::<f64>() / 2.0;
        assert!((kept - (1.0 - d.new_user_bandwidth_hz / 1e7)).abs() < 1e-12);
    }

    #[test]
    fn user_at_its_floor_blocks_admission() {
        let users = vec![user("a", 10.0, 1.0, 1e4), user("b", 0.0, 1.0, 1e4)];
        let mut running = allocate_sum_quality(&users, 1e7).unwrap();
        running.users[1].rate_bps = users[1].curve.min_rate_bps();
        running.users[1].status = UserStatus::Clamped;
        let d = admit_sum_quality(&running, &users, &user("n", 5.0, 0.01, 1e3), 1e7).unwrap();
        assert!(!d.admit);
        assert_eq!(d.failures[0], AdmissionFailure::ExistingBelowMinimum { ids: vec!["b".into()] });
    }

    #[test]
    fn symmetric_fairness_admission() {
        let k = 3;
        let b = 6e6;
        let proto = user("p", 5.0, 1.0, 1.0);
        let sse = proto.sse();
        // Minimum rate at half the symmetric rate.
        let min_rate = 0.5 * sse * b / k as f64;
        let users: Vec<_> = (0..k).map(|i| user(&format!("u{i}"), 5.0, 1.0, min_rate)).collect();
        let running = allocate_fairness(&users, b).unwrap();
        let d = admit_fairness(&running, &users, &user("u9", 5.0, 1.0, min_rate), b).unwrap();
        assert!(d.admit, "{d:?}");
        let expected = users[0].curve.quality(sse * b / (k + 1) as f64).unwrap();
        assert!((d.final_quality.unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn newcomer_below_its_floor_is_rejected() {
        let users = vec![user("a", 10.0, 1.0, 1e4)];
        let running = allocate_fairness(&users, 1e6).unwrap();
        let d = admit_fairness(&running, &users, &user("n", -10.0, 1.0, 5e5), 1e6).unwrap();
        assert!(!d.admit);
        assert!(d.failures.iter().any(|f| matches!(f, AdmissionFailure::NewUserBelowMinimum { .. })));
        assert!(d.failures.iter().any(|f| f.describe().contains("new user below minimum representation")));
    }

    #[test]
    fn inconsistent_allocations_are_refused() {
        let users = vec![user("a", 10.0, 1.0, 1e4), user("b", 15.0, 2.0, 1e4)];
        let mut running = allocate_sum_quality(&users, 1e7).unwrap();
        running.users[0].bandwidth_hz *= 1.5;
        let n = user("n", 5.0, 1.0, 0.0);
        assert!(matches!(admit_sum_quality(&running, &users, &n, 1e7), Err(Error::InconsistentAllocation(_))));
        assert!(admit_fairness(&running, &users, &n, 1e7).is_err());
    }
}
