//! Single-cell multiuser experiments: Poisson user drops, pathloss-derived
//! mean SNR, and a comparison of maximal-subset scheduling against
//! Max-SNR baselines.

use crate::allocator::{allocate_fairness, allocate_sum_quality, AllocationResult};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fading::{db_to_linear, FadingDistribution};
use crate::profile::UserProfile;
use crate::qos::{solve_d, QosTarget, DEFAULT_COHERENCE_TIME_S};
use crate::rate_quality::RateQualityCurve;
use crate::scheduler::{schedule_fairness, schedule_sum_quality};
use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use std::cmp::Ordering;
use std::f64::consts::PI;

pub const DEFAULT_PATHLOSS_CONST_DB: f64 = 21.36;
pub const DEFAULT_PATHLOSS_EXPONENT: f64 = 3.52;
pub const DEFAULT_NOISE_PSD_W_PER_HZ: f64 = 4e-21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PowerMode {
    /// Every user is received at the full transmit power.
    #[default]
    PerUser,
    /// Transmit power is split equally over the users in the drop.
    EqualSplit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QosClass {
    pub name: String,
    pub target: QosTarget,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry {
    pub name: String,
    pub curve: RateQualityCurve,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellScenario {
    pub cell_radius_m: f64,
    pub user_density_per_m2: f64,
    pub tx_power_w: f64,
    pub pathloss_const_db: f64,
    pub pathloss_exponent: f64,
    pub noise_psd_w_per_hz: f64,
    pub total_bandwidth_hz: f64,
    /// Bandwidth in the noise term of the link budget; defaults to the total.
    pub reference_bandwidth_hz: Option<f64>,
    /// Distances are floored here to keep the near-field out of the model.
    pub min_distance_m: f64,
    pub power_mode: PowerMode,
    pub coherence_time_s: f64,
    pub classes: Vec<QosClass>,
    pub catalog: Vec<CatalogEntry>,
    pub seed: u64,
}

/// Three shifted-power curves with minimum representations of 160, 185 and
/// 200 kbit/s, quality on a negated-distortion scale that tops out at 0.
pub fn default_catalog() -> Vec<CatalogEntry> {
    [("seq160", 160e3, 35.0), ("seq185", 185e3, 38.0), ("seq200", 200e3, 41.0)]
        .into_iter()
        .map(|(name, r_min, b)| CatalogEntry {
            name: name.into(),
            curve: RateQualityCurve::shifted_power(0.0, b, 0.2, r_min, r_min).expect("valid default curve"),
            weight: 1.0,
        })
        .collect()
}

/// Live streaming (2 s) and conferencing (0.3 s), half each, both at 10%
/// violation probability.
pub fn default_classes() -> Vec<QosClass> {
    vec![
        QosClass { name: "streaming".into(), target: QosTarget::new(2.0, 0.1).expect("valid"), fraction: 0.5 },
        QosClass { name: "conferencing".into(), target: QosTarget::new(0.3, 0.1).expect("valid"), fraction: 0.5 },
    ]
}

impl Default for CellScenario {
    fn default() -> Self {
        CellScenario {
            cell_radius_m: 3000.0,
            user_density_per_m2: 5e-6,
            tx_power_w: 1.0,
            pathloss_const_db: DEFAULT_PATHLOSS_CONST_DB,
            pathloss_exponent: DEFAULT_PATHLOSS_EXPONENT,
            noise_psd_w_per_hz: DEFAULT_NOISE_PSD_W_PER_HZ,
            total_bandwidth_hz: 20e6,
            reference_bandwidth_hz: None,
            min_distance_m: 10.0,
            power_mode: PowerMode::PerUser,
            coherence_time_s: DEFAULT_COHERENCE_TIME_S,
            classes: default_classes(),
            catalog: default_catalog(),
            seed: 1,
        }
    }
}

impl CellScenario {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("cell radius", self.cell_radius_m),
            ("transmit power", self.tx_power_w),
            ("noise PSD", self.noise_psd_w_per_hz),
            ("total bandwidth", self.total_bandwidth_hz),
            ("minimum distance", self.min_distance_m),
            ("coherence time", self.coherence_time_s),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if !(self.user_density_per_m2.is_finite() && self.user_density_per_m2 >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "user density must be finite and >= 0, got {}",
                self.user_density_per_m2
            )));
        }
        if !(self.pathloss_exponent > 2.0 && self.pathloss_exponent.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "pathloss exponent must exceed 2, got {}",
                self.pathloss_exponent
            )));
        }
        if !self.pathloss_const_db.is_finite() {
            return Err(Error::InvalidArgument("pathloss constant must be finite".into()));
        }
        if let Some(b) = self.reference_bandwidth_hz {
            if !(b.is_finite() && b > 0.0) {
                return Err(Error::InvalidArgument(format!("reference bandwidth must be > 0, got {b}")));
            }
        }
        if self.classes.is_empty() || self.catalog.is_empty() {
            return Err(Error::InvalidArgument("scenario needs at least one QoS class and one curve".into()));
        }
        let total: f64 = self.classes.iter().map(|c| c.fraction).sum();
        if self.classes.iter().any(|c| !(c.fraction >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("QoS class fractions must be >= 0 and sum to 1, got {total}")));
        }
        if self.catalog.iter().any(|c| !(c.weight >= 0.0 && c.weight.is_finite()))
            || self.catalog.iter().all(|c| c.weight == 0.0)
        {
            return Err(Error::InvalidArgument("curve weights must be >= 0 with a positive total".into()));
        }
        Ok(())
    }

    pub fn reference_bandwidth(&self) -> f64 {
        self.reference_bandwidth_hz.unwrap_or(self.total_bandwidth_hz)
    }

    /// Mean SNR in dB at `distance_m` for a received power budget `tx_power_w`:
    /// `10log10(P) − K − 10δ log10(d) − 10log10(N0·B_ref)`.
    pub fn mean_snr_db(&self, distance_m: f64, tx_power_w: f64) -> f64 {
        let d = distance_m.max(self.min_distance_m);
        10.0 * tx_power_w.log10()
            - self.pathloss_const_db
            - 10.0 * self.pathloss_exponent * d.log10()
            - 10.0 * (self.noise_psd_w_per_hz * self.reference_bandwidth()).log10()
    }

    pub fn expected_users(&self) -> f64 {
        self.user_density_per_m2 * PI * self.cell_radius_m * self.cell_radius_m
    }
}

/// One dropped user. `profile` is `None` when its delay target cannot be met
/// on its channel at any bandwidth.
#[derive(Debug, Clone, PartialEq)]
pub struct CellUser {
    pub id: String,
    pub x_m: f64,
    pub y_m: f64,
    pub distance_m: f64,
    pub class: usize,
    pub curve: usize,
    pub mean_snr_db: f64,
    pub profile: Option<UserProfile>,
}

fn realization_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws one Poisson user drop for realization `stream` of the scenario seed.
pub fn generate_scenario(scenario: &CellScenario, stream: u64) -> Result<Vec<CellUser>> {
    scenario.validate()?;
    let mut rng = realization_rng(scenario.seed, stream);
    let mean = scenario.expected_users();
    let count = if mean > 0.0 {
        let poisson = Poisson::new(mean).map_err(|e| Error::InvalidArgument(format!("user count law: {e}")))?;
        poisson.sample(&mut rng) as usize
    } else {
        0
    };
    let class_law = WeightedIndex::new(scenario.classes.iter().map(|c| c.fraction))
        .map_err(|e| Error::InvalidArgument(format!("class mix: {e}")))?;
    let curve_law = WeightedIndex::new(scenario.catalog.iter().map(|c| c.weight))
        .map_err(|e| Error::InvalidArgument(format!("curve mix: {e}")))?;
    let power = match scenario.power_mode {
        PowerMode::PerUser => scenario.tx_power_w,
        PowerMode::EqualSplit => scenario.tx_power_w / count.max(1) as f64,
    };

    let mut users = Vec::with_capacity(count);
    for k in 0..count {
        let radius = scenario.cell_radius_m * rng.random::<f64>().sqrt();
        let angle = 2.0 * PI * rng.random::<f64>();
        let class = class_law.sample(&mut rng);
        let curve = curve_law.sample(&mut rng);
        let mean_snr_db = scenario.mean_snr_db(radius, power);
        let target = scenario.classes[class].target;
        let dist = FadingDistribution::rayleigh_db(mean_snr_db)?;
        let id = format!("u{k:05}");
        let profile = match solve_d(&target, &dist, scenario.coherence_time_s) {
            Ok(derived) => Some(UserProfile {
                id: id.clone(),
                target,
                dist,
                curve: scenario.catalog[curve].curve.clone(),
                derived,
            }),
            Err(Error::QosInfeasible(_)) => None,
            Err(e) => return Err(e),
        };
        users.push(CellUser {
            id,
            x_m: radius * angle.cos(),
            y_m: radius * angle.sin(),
            distance_m: radius,
            class,
            curve,
            mean_snr_db,
            profile,
        });
    }
    Ok(users)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Maximal-subset scheduling with sum-quality allocation.
    SubsetSumQuality,
    /// Maximal-subset scheduling with fairness allocation.
    SubsetFairness,
    /// Max-SNR scheduling with an equal bandwidth split.
    MaxSnrEqual,
    /// Max-SNR scheduling with sum-quality allocation.
    MaxSnrSumQuality,
}

impl Method {
    pub const ALL: [Method; 4] =
        [Method::SubsetSumQuality, Method::SubsetFairness, Method::MaxSnrEqual, Method::MaxSnrSumQuality];

    pub fn label(&self) -> &'static str {
        match self {
            Method::SubsetSumQuality => "subset_sum",
            Method::SubsetFairness => "subset_fair",
            Method::MaxSnrEqual => "maxsnr_equal",
            Method::MaxSnrSumQuality => "maxsnr_sum",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServedUser {
    /// Index into the user drop.
    pub index: usize,
    pub bandwidth_hz: f64,
    pub rate_bps: f64,
    pub quality: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub method: Method,
    pub served: Vec<ServedUser>,
    pub quality_std: f64,
    pub dmos_std: f64,
    /// Farthest served user per QoS class (0 when the class has none).
    pub coverage_radius_m: Vec<f64>,
}

impl MethodOutcome {
    pub fn users_supported(&self) -> usize {
        self.served.len()
    }

    pub fn bandwidth_used_hz(&self) -> f64 {
        self.served.iter().map(|s| s.bandwidth_hz).sum()
    }

    pub fn serves(&self, index: usize) -> Option<&ServedUser> {
        self.served.iter().find(|s| s.index == index)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub outcomes: Vec<MethodOutcome>,
}

impl ComparisonReport {
    pub fn outcome(&self, method: Method) -> &MethodOutcome {
        self.outcomes.iter().find(|o| o.method == method).expect("every method is reported")
    }
}

/// Affine map from quality to an opinion-score scale. Illustrative only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmosMap {
    pub scale: f64,
    pub offset: f64,
}

impl DmosMap {
    /// Sends `best` to 0 and `worst` to 100.
    pub fn spanning(best: f64, worst: f64) -> Self {
        let scale = -100.0 / (best - worst);
        DmosMap { scale, offset: -scale * best }
    }

    /// Spans the catalog from the lowest minimum quality to the best
    /// reachable quality (the supremum, or the quality at 20× the minimum
    /// rate for unbounded curves).
    pub fn from_catalog(catalog: &[CatalogEntry]) -> Self {
        let worst = catalog
            .iter()
            .map(|c| c.curve.min_quality())
            .filter(|q| q.is_finite())
            .fold(f64::INFINITY, f64::min);
        let best = catalog
            .iter()
            .map(|c| {
                let sup = c.curve.sup_quality();
                if sup.is_finite() {
                    sup
                } else {
                    c.curve.quality_unchecked(20.0 * c.curve.min_rate_bps().max(1e4))
                }
            })
            .fold(f64::NEG_INFINITY, f64::max);
        if worst.is_finite() && best > worst {
            Self::spanning(best, worst)
        } else {
            DmosMap { scale: 1.0, offset: 0.0 }
        }
    }

    pub fn apply(&self, quality: f64) -> f64 {
        self.offset + self.scale * quality
    }
}

fn std_dev(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count();
    if n < 2 {
        return 0.0;
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    (values.map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt()
}

/// Indices of servable users in descending mean-SNR order (ties by id).
fn by_snr(users: &[CellUser]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..users.len()).filter(|&i| users[i].profile.is_some()).collect();
    order.sort_by(|&a, &b| match users[b].mean_snr_db.total_cmp(&users[a].mean_snr_db) {
        Ordering::Equal => users[a].id.cmp(&users[b].id),
        o => o,
    });
    order
}

/// Longest prefix of `order` for which `fits(prefix)` holds, given that
/// feasibility only shrinks as the prefix grows.
fn longest_prefix(order: &[usize], mut fits: impl FnMut(&[usize]) -> bool) -> usize {
    (1..=order.len()).take_while(|&n| fits(&order[..n])).last().unwrap_or(0)
}

fn served_from(indices: &[usize], alloc: &AllocationResult) -> Vec<ServedUser> {
    indices
        .iter()
        .zip(&alloc.users)
        .map(|(&index, a)| ServedUser { index, bandwidth_hz: a.bandwidth_hz, rate_bps: a.rate_bps, quality: a.quality })
        .collect()
}

fn profile(users: &[CellUser], i: usize) -> &UserProfile {
    users[i].profile.as_ref().expect("only servable users are scheduled")
}

fn profiles(users: &[CellUser], indices: &[usize]) -> Vec<UserProfile> {
    indices.iter().map(|&i| profile(users, i).clone()).collect()
}

/// Runs the four scheduling/allocation combinations over one user drop.
pub fn run_comparison(
    users: &[CellUser],
    total_bandwidth_hz: f64,
    n_classes: usize,
    dmos: &DmosMap,
) -> Result<ComparisonReport> {
    let feasible: Vec<usize> = (0..users.len()).filter(|&i| users[i].profile.is_some()).collect();
    let pool = profiles(users, &feasible);
    let snr_order = by_snr(users);

    let mut outcomes = Vec::with_capacity(4);
    for method in Method::ALL {
        let served = match method {
            Method::SubsetSumQuality | Method::SubsetFairness => {
                let sum = method == Method::SubsetSumQuality;
                let schedule = if sum {
                    schedule_sum_quality(&pool, total_bandwidth_hz)
                } else {
                    schedule_fairness(&pool, total_bandwidth_hz)
                };
                let chosen: Vec<usize> = schedule.selected.iter().map(|&j| feasible[j]).collect();
                if chosen.is_empty() {
                    Vec::new()
                } else {
                    let set = profiles(users, &chosen);
                    let alloc = if sum {
                        allocate_sum_quality(&set, total_bandwidth_hz)?
                    } else {
                        allocate_fairness(&set, total_bandwidth_hz)?
                    };
                    served_from(&chosen, &alloc)
                }
            }
            Method::MaxSnrEqual => {
                let n = longest_prefix(&snr_order, |prefix| {
                    let share = total_bandwidth_hz / prefix.len() as f64;
                    prefix.iter().all(|&i| profile(users, i).min_bandwidth_hz() <= share)
                });
                let share = total_bandwidth_hz / n.max(1) as f64;
                snr_order[..n]
                    .iter()
                    .map(|&i| {
                        let p = profile(users, i);
                        let rate = p.sse() * share;
                        ServedUser { index: i, bandwidth_hz: share, rate_bps: rate, quality: p.curve.quality_unchecked(rate) }
                    })
                    .collect()
            }
            Method::MaxSnrSumQuality => {
                let n = longest_prefix(&snr_order, |prefix| {
                    prefix.iter().map(|&i| profile(users, i).min_bandwidth_hz()).sum::<f64>() <= total_bandwidth_hz
                });
                let chosen = &snr_order[..n];
                if chosen.is_empty() {
                    Vec::new()
                } else {
                    let alloc = allocate_sum_quality(&profiles(users, chosen), total_bandwidth_hz)?;
                    served_from(chosen, &alloc)
                }
            }
        };
        let quality_std = std_dev(served.iter().map(|s| s.quality));
        let dmos_std = std_dev(served.iter().map(|s| dmos.apply(s.quality)));
        let mut coverage_radius_m = vec![0.0; n_classes];
        for s in &served {
            let u = &users[s.index];
            if let Some(r) = coverage_radius_m.get_mut(u.class) {
                *r = f64::max(*r, u.distance_m);
            }
        }
        outcomes.push(MethodOutcome { method, served, quality_std, dmos_std, coverage_radius_m });
    }
    Ok(ComparisonReport { outcomes })
}

/// Generates and evaluates one realization.
pub fn simulate_realization(scenario: &CellScenario, stream: u64) -> Result<(Vec<CellUser>, ComparisonReport)> {
    let users = generate_scenario(scenario, stream)?;
    let dmos = DmosMap::from_catalog(&scenario.catalog);
    let report = run_comparison(&users, scenario.total_bandwidth_hz, scenario.classes.len(), &dmos)?;
    Ok((users, report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityRow {
    pub density_per_m2: f64,
    pub method: Method,
    pub realizations: usize,
    pub mean_users_dropped: f64,
    pub mean_supported: f64,
    pub std_supported: f64,
    pub mean_quality_std: f64,
    pub mean_dmos_std: f64,
}

/// Monte-Carlo over user drops at each density. Realization `r` of density
/// index `i` uses RNG stream `i·2^32 + r`, so results do not depend on the
/// execution policy.
pub fn density_sweep(
    scenario: &CellScenario,
    densities: &[f64],
    realizations: usize,
    exec: Execution,
) -> Result<Vec<DensityRow>> {
    if realizations == 0 {
        return Err(Error::InvalidArgument("density sweep needs at least one realization".into()));
    }
    let jobs: Vec<(usize, usize)> =
        (0..densities.len()).flat_map(|i| (0..realizations).map(move |r| (i, r))).collect();
    let results = exec.map(&jobs, |&(i, r)| {
        let sc = CellScenario { user_density_per_m2: densities[i], ..scenario.clone() };
        simulate_realization(&sc, ((i as u64) << 32) | r as u64).map(|(users, report)| (users.len(), report))
    });
    let results: Vec<(usize, ComparisonReport)> = results.into_iter().collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (i, &density) in densities.iter().enumerate() {
        let chunk = &results[i * realizations..(i + 1) * realizations];
        let dropped = chunk.iter().map(|c| c.0 as f64).sum::<f64>() / realizations as f64;
        for method in Method::ALL {
            let counts = chunk.iter().map(|c| c.1.outcome(method).users_supported() as f64);
            let mean = counts.clone().sum::<f64>() / realizations as f64;
            rows.push(DensityRow {
                density_per_m2: density,
                method,
                realizations,
                mean_users_dropped: dropped,
                mean_supported: mean,
                std_supported: std_dev(counts),
                mean_quality_std: chunk.iter().map(|c| c.1.outcome(method).quality_std).sum::<f64>()
                    / realizations as f64,
                mean_dmos_std: chunk.iter().map(|c| c.1.outcome(method).dmos_std).sum::<f64>() / realizations as f64,
            });
        }
    }
    Ok(rows)
}

/// Where a user template becomes servable on a mean-SNR axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ServiceBoundary {
    /// Servable already at the low end of the searched range.
    BelowRange { low_db: f64 },
    /// Not servable anywhere in the searched range.
    AboveRange { high_db: f64 },
    /// Minimum servable mean SNR.
    At { snr_db: f64 },
}

impl ServiceBoundary {
    /// Boundary in dB, using the range end for out-of-range results.
    pub fn snr_db(&self) -> f64 {
        match *self {
            ServiceBoundary::BelowRange { low_db } => low_db,
            ServiceBoundary::AboveRange { high_db } => high_db,
            ServiceBoundary::At { snr_db } => snr_db,
        }
    }
}

/// Minimum bandwidth for `min_rate_bps` on a Rayleigh channel at `snr_db`;
/// infinite when the delay target is infeasible there.
pub fn min_bandwidth_at(target: &QosTarget, min_rate_bps: f64, snr_db: f64, coherence_time_s: f64) -> Result<f64> {
    let dist = FadingDistribution::rayleigh(db_to_linear(snr_db))?;
    match solve_d(target, &dist, coherence_time_s) {
        Ok(d) => Ok(min_rate_bps / d.sse),
        Err(Error::QosInfeasible(_)) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// Bisects on mean SNR for the smallest value at which
/// `sse(γ̄)·bandwidth ≥ min_rate`.
pub fn service_region(
    target: &QosTarget,
    min_rate_bps: f64,
    low_db: f64,
    high_db: f64,
    bandwidth_hz: f64,
    coherence_time_s: f64,
) -> Result<ServiceBoundary> {
    if !(low_db < high_db) {
        return Err(Error::InvalidArgument(format!("empty SNR range [{low_db}, {high_db}]")));
    }
    let servable =
        |db: f64| -> Result<bool> { Ok(min_bandwidth_at(target, min_rate_bps, db, coherence_time_s)? <= bandwidth_hz) };
    if servable(low_db)? {
        return Ok(ServiceBoundary::BelowRange { low_db });
    }
    if !servable(high_db)? {
        return Ok(ServiceBoundary::AboveRange { high_db });
    }
    let (mut lo, mut hi) = (low_db, high_db);
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if servable(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(ServiceBoundary::At { snr_db: hi })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Neither,
    OnlyFirst,
    OnlySecond,
    /// Each fits alone but not together.
    EitherAlone,
    Both,
}

impl Region {
    pub fn as_str(&self) -> &'static str {
        match self {
            Region::Neither => "none",
            Region::OnlyFirst => "first_only",
            Region::OnlySecond => "second_only",
            Region::EitherAlone => "either_alone",
            Region::Both => "both",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionCell {
    pub first_snr_db: f64,
    pub second_snr_db: f64,
    pub region: Region,
}

/// Classifies every `(γ̄_1, γ̄_2)` grid point for two users sharing a band.
pub fn two_user_regions(
    targets: [&QosTarget; 2],
    min_rates_bps: [f64; 2],
    snr_grid_db: &[f64],
    bandwidth_hz: f64,
    coherence_time_s: f64,
    exec: Execution,
) -> Result<Vec<RegionCell>> {
    let need = |k: usize| -> Result<Vec<f64>> {
        exec.map(snr_grid_db, |&db| min_bandwidth_at(targets[k], min_rates_bps[k], db, coherence_time_s))
            .into_iter()
            .collect()
    };
    let (first, second) = (need(0)?, need(1)?);
    let mut cells = Vec::with_capacity(snr_grid_db.len() * snr_grid_db.len());
    for (i, &g1) in snr_grid_db.iter().enumerate() {
        for (j, &g2) in snr_grid_db.iter().enumerate() {
            let (b1, b2) = (first[i], second[j]);
            let region = if b1 + b2 <= bandwidth_hz {
                Region::Both
            } else {
                match (b1 <= bandwidth_hz, b2 <= bandwidth_hz) {
                    (true, true) => Region::EitherAlone,
                    (true, false) => Region::OnlyFirst,
                    (false, true) => Region::OnlySecond,
                    (false, false) => Region::Neither,
                }
            };
            cells.push(RegionCell { first_snr_db: g1, second_snr_db: g2, region });
        }
    }
    Ok(cells)
}
