//! Discrete-time fluid queue over i.i.d. block fading.
//!
//! Each coherence block brings `R·T` bits and serves `B·T·log2(1+γ)` bits,
//! with the backlog following the Lindley recursion. The delay of the bits
//! that arrive in a block is read off the backlog left at its end.

use crate::allocator::AllocationResult;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fading::FadingDistribution;
use crate::profile::UserProfile;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const MIN_BLOCKS: usize = 100_000;
pub const DEFAULT_BLOCKS: usize = 1_000_000;
pub const WARMUP_FRACTION: f64 = 0.1;
/// Allowed ratio of measured violation to target before a user fails.
pub const TOLERANCE_FACTOR: f64 = 1.5;
const Z_95: f64 = 1.959_963_984_540_054;

/// How the waiting time `backlog / R` is compared with the delay bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DelayUnit {
    /// Waiting time counted in coherence blocks, `backlog / (R·T)`. The
    /// per-block decay rate `P^(1/D)` used by the QoS solver is calibrated
    /// in these units.
    #[default]
    CoherenceBlocks,
    /// Waiting time in seconds, `backlog / R`.
    Seconds,
}

impl DelayUnit {
    pub fn as_str(&self) -> &'static str {
        match self {
            DelayUnit::CoherenceBlocks => "blocks",
            DelayUnit::Seconds => "seconds",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueueSimConfig {
    pub coherence_time_s: f64,
    pub n_blocks: usize,
    pub arrival_rate_bps: f64,
    pub bandwidth_hz: f64,
    pub dist: FadingDistribution,
    pub delay_bound_s: f64,
    pub seed: u64,
    /// RNG stream, so several users can share one seed.
    pub stream: u64,
    pub delay_unit: DelayUnit,
}

impl QueueSimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_blocks < MIN_BLOCKS {
            return Err(Error::InvalidArgument(format!(
                "queue simulation needs at least {MIN_BLOCKS} blocks, got {}",
                self.n_blocks
            )));
        }
        let positive = [
            ("coherence time", self.coherence_time_s),
            ("bandwidth", self.bandwidth_hz),
            ("delay bound", self.delay_bound_s),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if !(self.arrival_rate_bps.is_finite() && self.arrival_rate_bps >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "arrival rate must be finite and >= 0, got {}",
                self.arrival_rate_bps
            )));
        }
        Ok(())
    }

    /// Backlog in bits above which the arriving bits miss the delay bound.
    fn backlog_threshold_bits(&self) -> f64 {
        match self.delay_unit {
            DelayUnit::CoherenceBlocks => self.delay_bound_s * self.arrival_rate_bps * self.coherence_time_s,
            DelayUnit::Seconds => self.delay_bound_s * self.arrival_rate_bps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub block: usize,
    pub snr: f64,
    pub service_bits: f64,
    pub queue_bits: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViolationEstimate {
    pub probability: f64,
    /// Normal-approximation 95% half-width.
    pub half_width: f64,
    pub blocks_counted: usize,
    /// Arrival rate below the ergodic service rate.
    pub stable: bool,
    pub mean_service_bps: f64,
}

/// Post-warm-up backlog samples plus the violation estimate.
#[derive(Debug, Clone)]
pub struct QueueRun {
    pub backlog_bits: Vec<f64>,
    pub estimate: ViolationEstimate,
}

/// Runs the queue and reports the fraction of post-warm-up blocks whose
/// arriving bits wait longer than the delay bound.
pub fn simulate_delay_violation(cfg: &QueueSimConfig) -> Result<ViolationEstimate> {
    simulate_with_trace(cfg, |_| {}).map(|run| run.estimate)
}

pub fn simulate_queue(cfg: &QueueSimConfig) -> Result<QueueRun> {
    simulate_with_trace(cfg, |_| {})
}

/// As [`simulate_queue`], calling `on_block` for every block including the
/// warm-up.
pub fn simulate_with_trace<F: FnMut(TraceRow)>(cfg: &QueueSimConfig, mut on_block: F) -> Result<QueueRun> {
    cfg.validate()?;
    let mean_service_bps = cfg.bandwidth_hz * cfg.dist.mean_spectral_efficiency()?;
    let stable = cfg.arrival_rate_bps < mean_service_bps;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(cfg.stream);

    let arrival_bits = cfg.arrival_rate_bps * cfg.coherence_time_s;
    let bits_per_log = cfg.bandwidth_hz * cfg.coherence_time_s;
    let threshold = cfg.backlog_threshold_bits();
    let warmup = (cfg.n_blocks as f64 * WARMUP_FRACTION) as usize;
    let mut backlog_bits = Vec::with_capacity(cfg.n_blocks - warmup);
    let mut queue = 0.0f64;
    let mut violations = 0usize;
    for block in 0..cfg.n_blocks {
        let snr = cfg.dist.sample(&mut rng);
        let service_bits = bits_per_log * snr.log2_1p();
        queue = (queue + arrival_bits - service_bits).max(0.0);
        on_block(TraceRow { block, snr, service_bits, queue_bits: queue });
        if block >= warmup {
            backlog_bits.push(queue);
            if cfg.arrival_rate_bps > 0.0 && queue > threshold {
                violations += 1;
            }
        }
    }
    let n = backlog_bits.len();
    let p = violations as f64 / n as f64;
    let estimate = ViolationEstimate {
        probability: p,
        half_width: Z_95 * (p * (1.0 - p) / n as f64).sqrt(),
        blocks_counted: n,
        stable,
        mean_service_bps,
    };
    Ok(QueueRun { backlog_bits, estimate })
}

trait Log2OnePlus {
    fn log2_1p(self) -> f64;
}

impl Log2OnePlus for f64 {
    fn log2_1p(self) -> f64 {
        self.ln_1p() * std::f64::consts::LOG2_E
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationSettings {
    pub n_blocks: usize,
    pub seed: u64,
    pub delay_unit: DelayUnit,
    /// Multiplier applied to every allocated rate before simulating.
    pub rate_scale: f64,
}

impl Default for ValidationSettings {
    fn default() -> Self {
        ValidationSettings { n_blocks: DEFAULT_BLOCKS, seed: 0, delay_unit: DelayUnit::default(), rate_scale: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRow {
    pub id: String,
    pub bandwidth_hz: f64,
    pub rate_bps: f64,
    pub target_prob: f64,
    pub estimate: ViolationEstimate,
    pub pass: bool,
}

/// Simulates every allocated user at its `(B_k, R_k)` and checks the
/// measured violation against `1.5·P + half-width`.
pub fn validate_allocation(
    result: &AllocationResult,
    users: &[UserProfile],
    settings: ValidationSettings,
    exec: Execution,
) -> Result<Vec<ValidationRow>> {
    if result.users.len() != users.len() || result.users.iter().zip(users).any(|(a, u)| a.id != u.id) {
        return Err(Error::InconsistentAllocation("allocation entries do not match the user list".into()));
    }
    let rows = exec.map_range(users.len(), |i| {
        let (a, u) = (&result.users[i], &users[i]);
        let cfg = QueueSimConfig {
            coherence_time_s: u.derived.coherence_time_s,
            n_blocks: settings.n_blocks,
            arrival_rate_bps: a.rate_bps * settings.rate_scale,
            bandwidth_hz: a.bandwidth_hz,
            dist: u.dist.clone(),
            delay_bound_s: u.target.delay_bound_s,
            seed: settings.seed,
            stream: i as u64,
            delay_unit: settings.delay_unit,
        };
        let estimate = simulate_delay_violation(&cfg)?;
        let target = u.target.violation_prob;
        let pass = estimate.probability <= TOLERANCE_FACTOR * target + estimate.half_width;
        Ok(ValidationRow {
            id: a.id.clone(),
            bandwidth_hz: a.bandwidth_hz,
            rate_bps: cfg.arrival_rate_bps,
            target_prob: target,
            estimate,
            pass,
        })
    });
    rows.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qos::{solve_d, QosTarget};

    fn config(dist: FadingDistribution, rate: f64, bandwidth: f64, delay: f64) -> QueueSimConfig {
        QueueSimConfig {
            coherence_time_s: 1e-3,
            n_blocks: MIN_BLOCKS,
            arrival_rate_bps: rate,
            bandwidth_hz: bandwidth,
            dist,
            delay_bound_s: delay,
            seed: 7,
            stream: 0,
            delay_unit: DelayUnit::CoherenceBlocks,
        }
    }

    #[test]
    fn backlog_never_builds_when_service_dominates() {
        let dist = FadingDistribution::constant(3.0).unwrap();
        // 2 bit/s/Hz · 1 MHz of service against 1.5 Mbit/s of arrivals.
        let cfg = config(dist, 1.5e6, 1e6, 0.1);
        let mut max_q: f64 = 0.0;
        let run = simulate_with_trace(&cfg, |row| max_q = max_q.max(row.queue_bits)).unwrap();
        assert_eq!(max_q, 0.0);
        assert_eq!(run.estimate.probability, 0.0);
        assert!(run.estimate.stable);
    }

    #[test]
    fn zero_arrivals_never_violate() {
        let cfg = config(FadingDistribution::rayleigh(1.0).unwrap(), 0.0, 1e6, 0.5);
        assert_eq!(simulate_delay_violation(&cfg).unwrap().probability, 0.0);
    }

    #[test]
    fn backlog_is_never_negative_and_runs_reproduce() {
        let cfg = config(FadingDistribution::rayleigh(2.0).unwrap(), 1.2e6, 1e6, 0.3);
        let a = simulate_queue(&cfg).unwrap();
        assert!(a.backlog_bits.iter().all(|&q| q >= 0.0));
        let b = simulate_queue(&cfg).unwrap();
        assert_eq!(a.estimate, b.estimate);
        assert_eq!(a.backlog_bits.len(), MIN_BLOCKS - MIN_BLOCKS / 10);
    }

    #[test]
    fn violation_grows_with_load() {
        let dist = FadingDistribution::rayleigh_db(10.0).unwrap();
        let mut prev = -1.0;
        for rate in [1.0e6, 1.6e6, 2.2e6] {
            let p = simulate_delay_violation(&config(dist.clone(), rate, 1e6, 0.05)).unwrap().probability;
            assert!(p >= prev);
            prev = p;
        }
        assert!(prev > 0.0);
    }

    #[test]
    fn overload_is_flagged_unstable() {
        let dist = FadingDistribution::rayleigh_db(0.0).unwrap();
        let mean = dist.mean_spectral_efficiency().unwrap() * 1e6;
        let est = simulate_delay_violation(&config(dist, 1.1 * mean, 1e6, 0.3)).unwrap();
        assert!(!est.stable);
        assert!(est.probability > 0.9);
    }

    #[test]
    fn rejects_short_runs_and_bad_inputs() {
        let mut cfg = config(FadingDistribution::rayleigh(1.0).unwrap(), 1e5, 1e6, 0.5);
        cfg.n_blocks = 1000;
        assert!(cfg.validate().is_err());
        cfg.n_blocks = MIN_BLOCKS;
        cfg.arrival_rate_bps = -1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn allocated_rate_meets_target() {
        let target = QosTarget::new(0.5, 0.1).unwrap();
        let dist = FadingDistribution::rayleigh_db(10.0).unwrap();
        let q = solve_d(&target, &dist, 1e-3).unwrap();
        let mut cfg = config(dist, q.sse * 1e6, 1e6, 0.5);
        cfg.n_blocks = DEFAULT_BLOCKS;
        let est = simulate_delay_violation(&cfg).unwrap();
        assert!(est.probability <= TOLERANCE_FACTOR * 0.1, "{est:?}");
    }

    #[test]
    fn backlog_tail_is_exponential() {
        let target = QosTarget::new(2.0, 0.1).unwrap();
        let dist = FadingDistribution::rayleigh_db(0.0).unwrap();
        let q = solve_d(&target, &dist, 1e-3).unwrap();
        let mut cfg = config(dist, q.sse * 1e6, 1e6, 2.0);
        cfg.n_blocks = DEFAULT_BLOCKS;
        let run = simulate_queue(&cfg).unwrap();
        let mut sorted = run.backlog_bits.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        // Upper decade of the tail: from Pr{q > x} = 1e-1 down to 1e-2.
        let pts: Vec<(f64, f64)> = (0..20)
            .map(|i| {
                let tail = 0.1 * 10f64.powf(-(i as f64) / 19.0);
                let x = sorted[((1.0 - tail) * n) as usize];
                (x, tail.ln())
            })
            .collect();
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
        let r2 = sxy * sxy / (sxx * syy);
        assert!(sxy < 0.0);
        assert!(r2 > 0.95, "R² = {r2}");
    }
}
