//! Maximal user-subset scheduling.
//!
//! Under the sum-quality policy each user costs a fixed minimum bandwidth,
//! so picking the most users is a unit-value knapsack solved exactly by
//! taking the cheapest first. Under the fairness policy every served user
//! must reach the largest minimum quality in the set, so the candidates are
//! the prefixes of the minimum-quality order.

use crate::allocator::Policy;
use crate::profile::UserProfile;

/// Bandwidth needed to carry the minimum rate, `R_min / sse`.
pub fn min_bandwidth(user: &UserProfile) -> f64 {
    user.min_bandwidth_hz()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub id: String,
    /// Extra bandwidth the selection would need to take this user too.
    pub deficit_hz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleResult {
    pub policy: Policy,
    /// Indices into the input slice, in scheduling order.
    pub selected: Vec<usize>,
    pub selected_ids: Vec<String>,
    /// Minimum bandwidth per input user (both policies).
    pub min_bandwidth_hz: Vec<f64>,
    /// Minimum quality per input user (both policies).
    pub min_quality: Vec<f64>,
    /// Bandwidth the selected set needs at its binding requirement.
    pub required_bandwidth_hz: f64,
    pub residual_bandwidth_hz: f64,
    pub rejected: Vec<Rejection>,
}

impl ScheduleResult {
    pub fn n_star(&self) -> usize {
        self.selected.len()
    }

    pub fn selected_profiles(&self, users: &[UserProfile]) -> Vec<UserProfile> {
        self.selected.iter().map(|&i| users[i].clone()).collect()
    }
}

pub fn schedule(policy: Policy, users: &[UserProfile], total_bandwidth_hz: f64) -> ScheduleResult {
    match policy {
        Policy::SumQuality => schedule_sum_quality(users, total_bandwidth_hz),
        Policy::Fairness => schedule_fairness(users, total_bandwidth_hz),
    }
}

/// Sorts by `key`, then `tie`, then user id, all ascending.
fn sorted_by(users: &[UserProfile], key: &[f64], tie: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..users.len()).collect();
    order.sort_by(|&a, &b| {
        key[a]
            .total_cmp(&key[b])
            .then(tie[a].total_cmp(&tie[b]))
            .then_with(|| users[a].id.cmp(&users[b].id))
    });
    order
}

fn base_result(policy: Policy, users: &[UserProfile]) -> ScheduleResult {
    ScheduleResult {
        policy,
        selected: Vec::new(),
        selected_ids: Vec::new(),
        min_bandwidth_hz: users.iter().map(min_bandwidth).collect(),
        min_quality: users.iter().map(|u| u.curve.min_quality()).collect(),
        required_bandwidth_hz: 0.0,
        residual_bandwidth_hz: 0.0,
        rejected: Vec::new(),
    }
}

/// Longest prefix of the minimum-bandwidth order that fits the budget.
pub fn schedule_sum_quality(users: &[UserProfile], total_bandwidth_hz: f64) -> ScheduleResult {
    let mut out = base_result(Policy::SumQuality, users);
    let order = sorted_by(users, &out.min_bandwidth_hz, &out.min_bandwidth_hz);
    let mut used = 0.0;
    let mut full = false;
    for i in order {
        let need = out.min_bandwidth_hz[i];
        if !full && used + need <= total_bandwidth_hz {
            used += need;
            out.selected.push(i);
        } else {
            full = true;
            out.rejected.push(Rejection { id: users[i].id.clone(), deficit_hz: used + need - total_bandwidth_hz });
        }
    }
    out.selected_ids = out.selected.iter().map(|&i| users[i].id.clone()).collect();
    out.required_bandwidth_hz = used;
    out.residual_bandwidth_hz = total_bandwidth_hz - used;
    out
}

/// Bandwidth user `u` needs to reach quality `q`, never less than its
/// minimum bandwidth.
pub fn bandwidth_for_quality(u: &UserProfile, q: f64) -> f64 {
    if q == f64::NEG_INFINITY {
        return min_bandwidth(u);
    }
    match u.curve.rate_for_quality(q) {
        Ok(r) => r.max(u.curve.min_rate_bps()) / u.sse(),
        Err(_) => f64::INFINITY,
    }
}

/// Bandwidth a prefix needs when all its members reach `q`.
pub fn prefix_cost(users: &[UserProfile], prefix: &[usize], q: f64) -> f64 {
    prefix.iter().map(|&i| bandwidth_for_quality(&users[i], q)).sum()
}

/// Largest prefix of the minimum-quality order whose members can all reach
/// the prefix's largest minimum quality within the budget.
///
/// Users with equal minimum quality are ordered by minimum bandwidth, which
/// is their cost when the prefix ends inside their group. Ordering such ties
/// by id alone can put an expensive user first and lose cardinality.
pub fn schedule_fairness(users: &[UserProfile], total_bandwidth_hz: f64) -> ScheduleResult {
    let mut out = base_result(Policy::Fairness, users);
    let order = sorted_by(users, &out.min_quality, &out.min_bandwidth_hz);
    let costs: Vec<f64> = (1..=order.len())
        .map(|n| prefix_cost(users, &order[..n], out.min_quality[order[n - 1]]))
        .collect();
    let n_star = costs.iter().rposition(|&c| c <= total_bandwidth_hz).map_or(0, |p| p + 1);
    out.selected = order[..n_star].to_vec();
    out.selected_ids = out.selected.iter().map(|&i| users[i].id.clone()).collect();
    out.required_bandwidth_hz = if n_star == 0 { 0.0 } else { costs[n_star - 1] };
    out.residual_bandwidth_hz = total_bandwidth_hz - out.required_bandwidth_hz;
    out.rejected = order[n_star..]
        .iter()
        .enumerate()
        .map(|(j, &i)| Rejection {
            id: users[i].id.clone(),
            deficit_hz: costs[n_star + j] - total_bandwidth_hz,
        })
        .collect();
    out
}
