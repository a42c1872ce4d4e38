//! Bandwidth allocation across a fixed user set.
//!
//! Both policies reduce to a one-dimensional monotone search: a price `ρ` on
//! source spectral efficiency for the sum-quality policy, a common quality
//! level for the fairness policy. Each search is bisected down to adjacent
//! floats, and the last sliver of budget is then spread across users so the
//! bandwidths add up to the total exactly.

use crate::error::{Error, Result};
use crate::profile::UserProfile;
use crate::rate_quality::SlopeInverse;
use crate::roots::bisect_decreasing;
use std::fmt;

const MAX_EXPANSIONS: usize = 2_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Policy {
    SumQuality,
    Fairness,
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::SumQuality => "sum",
            Policy::Fairness => "fair",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UserStatus {
    /// Operating point satisfies the policy's optimality condition.
    Interior,
    /// Pinned at the minimum rate; excluded from the stationarity check.
    Clamped,
    /// Common quality falls below this user's minimum representation.
    BelowMinimum,
}

impl UserStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            UserStatus::Interior => "interior",
            UserStatus::Clamped => "clamped",
            UserStatus::BelowMinimum => "below_minimum",
        }
    }

    pub fn is_servable(&self) -> bool {
        !matches!(self, UserStatus::BelowMinimum)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserAllocation {
    pub id: String,
    pub bandwidth_hz: f64,
    pub rate_bps: f64,
    /// Per-bit QoS exponent at this bandwidth.
    pub theta: f64,
    pub quality: f64,
    pub status: UserStatus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyOutcome {
    SumQuality { rho: f64 },
    Fairness { quality: f64 },
}

impl PolicyOutcome {
    pub fn policy(&self) -> Policy {
        match self {
            PolicyOutcome::SumQuality { .. } => Policy::SumQuality,
            PolicyOutcome::Fairness { .. } => Policy::Fairness,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationResult {
    pub users: Vec<UserAllocation>,
    pub outcome: PolicyOutcome,
    pub total_bandwidth_hz: f64,
}

impl AllocationResult {
    pub fn allocated_bandwidth_hz(&self) -> f64 {
        self.users.iter().map(|u| u.bandwidth_hz).sum()
    }

    /// `|Σ B_k − B| / B`.
    pub fn budget_residual(&self) -> f64 {
        (self.allocated_bandwidth_hz() - self.total_bandwidth_hz).abs() / self.total_bandwidth_hz
    }

    /// Sum of qualities.
    pub fn objective(&self) -> f64 {
        self.users.iter().map(|u| u.quality).sum()
    }

    pub fn min_quality(&self) -> f64 {
        self.users.iter().map(|u| u.quality).fold(f64::INFINITY, f64::min)
    }

    pub fn all_servable(&self) -> bool {
        self.users.iter().all(|u| u.status.is_servable())
    }
}

fn check_inputs(users: &[UserProfile], total_bandwidth_hz: f64) -> Result<()> {
    if users.is_empty() {
        return Err(Error::InvalidArgument("allocation needs at least one user".into()));
    }
    if !(total_bandwidth_hz.is_finite() && total_bandwidth_hz > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "total bandwidth must be finite and > 0, got {total_bandwidth_hz}"
        )));
    }
    Ok(())
}

pub fn allocate(policy: Policy, users: &[UserProfile], total_bandwidth_hz: f64) -> Result<AllocationResult> {
    match policy {
        Policy::SumQuality => allocate_sum_quality(users, total_bandwidth_hz),
        Policy::Fairness => allocate_fairness(users, total_bandwidth_hz),
    }
}

/// Bandwidth range a user would accept at price `rho`.
#[derive(Debug, Clone, Copy)]
struct Demand {
    lo_hz: f64,
    hi_hz: f64,
    clamped: bool,
}

fn demand_at(user: &UserProfile, rho: f64, floor: MinRate) -> Result<Demand> {
    let sse = user.sse();
    if (rho / sse).is_infinite() {
        // Price beyond any finite slope: nothing above the floor is worth buying.
        let lo_hz = match floor {
            MinRate::Enforced => user.min_bandwidth_hz(),
            MinRate::Ignored => 0.0,
        };
        return Ok(Demand { lo_hz, hi_hz: lo_hz, clamped: floor == MinRate::Enforced });
    }
    let solved = match floor {
        MinRate::Enforced => user.curve.inverse_slope(rho / sse),
        MinRate::Ignored => user.curve.unconstrained_inverse_slope(rho / sse).map(|(lo, hi)| SlopeInverse {
            rate_bps: lo,
            upper_rate_bps: hi,
            clamped: false,
        }),
    };
    match solved {
        Ok(inv) => Ok(Demand { lo_hz: inv.rate_bps / sse, hi_hz: inv.upper_rate_bps / sse, clamped: inv.clamped }),
        // Cheaper than every segment of a tabulated curve: unbounded demand.
        Err(Error::SlopeBelowRange { .. }) => {
            Ok(Demand { lo_hz: f64::INFINITY, hi_hz: f64::INFINITY, clamped: false })
        }
        Err(e) => Err(e),
    }
}

fn demands(users: &[UserProfile], rho: f64, floor: MinRate) -> Result<Vec<Demand>> {
    users.iter().map(|u| demand_at(u, rho, floor)).collect()
}

fn lower_total(ds: &[Demand]) -> f64 {
    ds.iter().map(|d| d.lo_hz).sum()
}

/// Spreads `budget` over per-user ranges `[lo, hi]` with `Σ lo ≤ budget ≤ Σ hi`.
/// Finite ranges are filled at a common fraction; if any range is unbounded
/// the surplus goes to those users in equal shares.
fn fill(ranges: &[(f64, f64)], budget: f64) -> Vec<f64> {
    let base: f64 = ranges.iter().map(|r| r.0).sum();
    let surplus = (budget - base).max(0.0);
    let open = ranges.iter().filter(|r| r.1.is_infinite()).count();
    if open > 0 {
        let share = surplus / open as f64;
        return ranges.iter().map(|&(lo, hi)| if hi.is_infinite() { lo + share } else { lo }).collect();
    }
    let room: f64 = ranges.iter().map(|r| r.1 - r.0).sum();
    let w = if room > 0.0 { (surplus / room).min(1.0) } else { 0.0 };
    ranges.iter().map(|&(lo, hi)| lo + w * (hi - lo)).collect()
}

/// Removes the rounding left over after filling by scaling every entry.
fn normalize(bandwidths: &mut [f64], budget: f64) {
    let total: f64 = bandwidths.iter().sum();
    if total > 0.0 {
        let k = budget / total;
        bandwidths.iter_mut().for_each(|b| *b *= k);
    }
}

fn entry(user: &UserProfile, bandwidth_hz: f64, status: UserStatus) -> UserAllocation {
    let rate_bps = user.sse() * bandwidth_hz;
    UserAllocation {
        id: user.id.clone(),
        bandwidth_hz,
        rate_bps,
        theta: user.derived.theta_for_bandwidth(bandwidth_hz),
        quality: user.curve.quality_unchecked(rate_bps),
        status,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MinRate {
    Enforced,
    Ignored,
}

/// Maximizes `Σ Q_k(R_k)` subject to `Σ B_k = B`, `R_k = sse_k B_k` and
/// `R_k ≥ R_k^min`.
pub fn allocate_sum_quality(users: &[UserProfile], total_bandwidth_hz: f64) -> Result<AllocationResult> {
    sum_quality(users, total_bandwidth_hz, MinRate::Enforced)
}

/// Sum-quality stationary point with the minimum-rate constraints dropped.
/// Users that land below their minimum are flagged rather than pinned.
pub fn allocate_sum_quality_unconstrained(users: &[UserProfile], total_bandwidth_hz: f64) -> Result<AllocationResult> {
    sum_quality(users, total_bandwidth_hz, MinRate::Ignored)
}

fn sum_quality(users: &[UserProfile], total_bandwidth_hz: f64, floor_rule: MinRate) -> Result<AllocationResult> {
    check_inputs(users, total_bandwidth_hz)?;
    let budget = total_bandwidth_hz;
    let floor: f64 = users.iter().map(UserProfile::min_bandwidth_hz).sum();
    if floor_rule == MinRate::Enforced && floor > budget * (1.0 + 1e-12) {
        return Err(Error::AllocationInfeasible { deficit_hz: floor - budget });
    }

    // Upper price: steep enough that every user sits at its minimum rate.
    let mut rho_hi = users
        .iter()
        .map(|u| u.sse() * u.curve.left_slope(u.curve.min_rate_bps().max(f64::MIN_POSITIVE)))
        .filter(|v| v.is_finite() && *v > 0.0)
        .fold(f64::MIN_POSITIVE, f64::max);
    let mut expansions = 0;
    while lower_total(&demands(users, rho_hi, floor_rule)?) > budget {
        rho_hi *= 2.0;
        expansions += 1;
        if expansions > MAX_EXPANSIONS || !rho_hi.is_finite() {
            return Err(Error::NonConvergent("no upper price bracket for sum-quality allocation".into()));
        }
    }
    // Lower price: cheap enough that demand exceeds the budget.
    let mut rho_lo = users
        .iter()
        .map(|u| u.sse() * u.curve.right_slope(u.sse() * budget))
        .fold(rho_hi, f64::min)
        .min(rho_hi * 0.5);
    expansions = 0;
    while lower_total(&demands(users, rho_lo, floor_rule)?) <= budget {
        rho_lo *= 0.5;
        expansions += 1;
        if expansions > MAX_EXPANSIONS || rho_lo == 0.0 {
            return Err(Error::NonConvergent("no lower price bracket for sum-quality allocation".into()));
        }
    }

    let mut failure = None;
    let bracket = bisect_decreasing(
        |rho| match demands(users, rho, floor_rule) {
            Ok(ds) => lower_total(&ds) - budget,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        rho_lo,
        rho_hi,
        true,
        |_, _| false,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let (rho_a, rho_b) = (bracket.lo, bracket.hi);
    let at_a = demands(users, rho_a, floor_rule)?;
    let at_b = demands(users, rho_b, floor_rule)?;
    debug_assert!(lower_total(&at_a) > lower_total(&at_b), "aggregate demand must fall as the price rises");

    let ranges: Vec<(f64, f64)> = at_a.iter().zip(&at_b).map(|(a, b)| (b.lo_hz, b.hi_hz.max(a.lo_hz))).collect();
    let mut bandwidths = fill(&ranges, budget);
    normalize(&mut bandwidths, budget);

    let allocations = users
        .iter()
        .zip(bandwidths)
        .zip(&at_b)
        .map(|((u, b), d)| {
            let status = if d.clamped && b <= u.min_bandwidth_hz() * (1.0 + 1e-9) {
                UserStatus::Clamped
            } else if b < u.min_bandwidth_hz() * (1.0 - 1e-9) {
                UserStatus::BelowMinimum
            } else {
                UserStatus::Interior
            };
            entry(u, b, status)
        })
        .collect();
    Ok(AllocationResult {
        users: allocations,
        outcome: PolicyOutcome::SumQuality { rho: rho_b },
        total_bandwidth_hz: budget,
    })
}

fn quality_demand(users: &[UserProfile], q: f64) -> Result<Vec<f64>> {
    users.iter().map(|u| Ok(u.curve.rate_for_quality(q)? / u.sse())).collect()
}

/// Maximizes the minimum quality: every user ends at the same quality `q`
/// with `Σ Q_k⁻¹(q)/sse_k = B`. Users whose minimum quality exceeds `q` are
/// flagged, not dropped.
pub fn allocate_fairness(users: &[UserProfile], total_bandwidth_hz: f64) -> Result<AllocationResult> {
    check_inputs(users, total_bandwidth_hz)?;
    let budget = total_bandwidth_hz;
    let total = |q: f64| -> Result<f64> { Ok(quality_demand(users, q)?.iter().sum()) };

    // Any single user handed the whole band reaches at most this quality.
    let q_hi = users
        .iter()
        .map(|u| u.curve.quality_unchecked(u.sse() * budget))
        .fold(f64::INFINITY, f64::min);
    let mut span = q_hi.abs().max(1.0);
    let mut q_lo = users
        .iter()
        .map(|u| u.curve.min_quality())
        .filter(|q| q.is_finite())
        .fold(q_hi, f64::min);
    let mut expansions = 0;
    while total(q_lo)? > budget {
        q_lo = q_hi - span;
        span *= 2.0;
        expansions += 1;
        if expansions > MAX_EXPANSIONS || !q_lo.is_finite() {
            return Err(Error::NonConvergent("no lower quality bracket for fairness allocation".into()));
        }
    }

    let mut failure = None;
    let bracket = bisect_decreasing(
        |q| match total(q) {
            Ok(t) => budget - t,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        q_lo,
        q_hi,
        false,
        |_, _| false,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let q = bracket.mid();
    let lo = quality_demand(users, bracket.lo)?;
    let hi = quality_demand(users, bracket.hi)?;
    let ranges: Vec<(f64, f64)> = lo.into_iter().zip(hi).collect();
    let mut bandwidths = fill(&ranges, budget);
    normalize(&mut bandwidths, budget);

    let allocations = users
        .iter()
        .zip(bandwidths)
        .map(|(u, b)| {
            let below = u.sse() * b < u.curve.min_rate_bps() * (1.0 - 1e-9);
            entry(u, b, if below { UserStatus::BelowMinimum } else { UserStatus::Interior })
        })
        .collect();
    Ok(AllocationResult {
        users: allocations,
        outcome: PolicyOutcome::Fairness { quality: q },
        total_bandwidth_hz: budget,
    })
}

fn check_pairing(result: &AllocationResult, users: &[UserProfile]) -> Result<()> {
    if result.users.len() != users.len() || result.users.iter().zip(users).any(|(a, u)| a.id != u.id) {
        return Err(Error::InconsistentAllocation("allocation entries do not match the user list".into()));
    }
    Ok(())
}

/// Largest relative distance of `ρ` from the interval
/// `[sse·Q'(R+), sse·Q'(R−)]` over non-clamped users. For smooth curves this
/// is `|sse·Q'(R) − ρ| / ρ`.
pub fn kkt_residual(result: &AllocationResult, users: &[UserProfile]) -> Result<f64> {
    let PolicyOutcome::SumQuality { rho } = result.outcome else {
        return Err(Error::InvalidArgument("stationarity residual needs a sum-quality allocation".into()));
    };
    check_pairing(result, users)?;
    let mut worst: f64 = 0.0;
    for (a, u) in result.users.iter().zip(users) {
        if a.status == UserStatus::Clamped {
            continue;
        }
        let lo = u.sse() * u.curve.right_slope(a.rate_bps);
        let hi = u.sse() * u.curve.left_slope(a.rate_bps);
        let gap = if rho < lo {
            lo - rho
        } else if rho > hi {
            rho - hi
        } else {
            0.0
        };
        worst = worst.max(gap / rho);
    }
    Ok(worst)
}

/// Largest deviation from the common quality, each normalized by the
/// user's quality range `Q(sse·B) − q_min` (or by `max(|Q(sse·B)|, 1)` when
/// the minimum quality is unbounded).
pub fn fairness_spread(result: &AllocationResult, users: &[UserProfile]) -> Result<f64> {
    let PolicyOutcome::Fairness { quality } = result.outcome else {
        return Err(Error::InvalidArgument("quality spread needs a fairness allocation".into()));
    };
    check_pairing(result, users)?;
    let mut worst: f64 = 0.0;
    for (a, u) in result.users.iter().zip(users) {
        let top = u.curve.quality_unchecked(u.sse() * result.total_bandwidth_hz);
        let range = top - u.curve.min_quality();
        let scale = if range.is_finite() && range > 0.0 { range } else { top.abs().max(1.0) };
        worst = worst.max((a.quality - quality).abs() / scale);
    }
    Ok(worst)
}
