//! CSV exports with fixed headers, and the allocation reload used by
//! `admit --allocation` and the round-trip check.
//!
//! Floats are written in shortest round-trip form, so a reloaded allocation
//! is bit-identical to the one exported.

use super::CliError;
use crate::allocator::{AllocationResult, Policy, PolicyOutcome, UserAllocation, UserStatus};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const QOS_CSV: &str = "qos.csv";
pub const ALLOCATION_CSV: &str = "allocation.csv";
pub const ALLOCATION_SUMMARY_CSV: &str = "allocation_summary.csv";
pub const ADMISSION_CSV: &str = "admission.csv";
pub const VALIDATION_CSV: &str = "validation.csv";
pub const SSE_GRID_CSV: &str = "sse_grid.csv";
pub const SERVICE_REGION_CSV: &str = "service_region.csv";
pub const SERVICE_BOUNDARIES_CSV: &str = "service_boundaries.csv";
pub const DENSITY_SWEEP_CSV: &str = "density_sweep.csv";
pub const CELL_COVERAGE_CSV: &str = "cell_coverage.csv";
pub const CELL_METADATA_CSV: &str = "cell_metadata.csv";

pub fn cell_users_csv(density_index: usize) -> String {
    format!("cell_users_{density_index}.csv")
}

pub fn trace_csv(id: &str) -> String {
    format!("trace_{id}.csv")
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(source) => CliError::Io { path: path.to_path_buf(), source },
            _ => unreachable!("checked io kind"),
        }
    } else {
        CliError::Schema(format!("{}: {e}", path.display()))
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })
}

/// Writes `rows` under the header derived from `T`'s field names. An empty
/// slice still produces the header line.
pub fn write_rows<T: Serialize>(dir: &Path, name: &str, header: &[&str], rows: &[T]) -> Result<PathBuf, CliError> {
    ensure_dir(dir)?;
    let path = dir.join(name);
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(&path).map_err(|e| csv_err(&path, e))?;
    w.write_record(header).map_err(|e| csv_err(&path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|source| CliError::Io { path: path.clone(), source })?;
    Ok(path)
}

/// Raw records with an explicit header, for tables whose columns depend on
/// the method list.
pub fn write_records(dir: &Path, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<PathBuf, CliError> {
    ensure_dir(dir)?;
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    w.write_record(header).map_err(|e| csv_err(&path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|source| CliError::Io { path: path.clone(), source })?;
    Ok(path)
}

pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_err(path, e))).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct QosRow {
    pub id: String,
    pub delay_bound_s: f64,
    pub violation_prob: f64,
    pub mean_snr_db: f64,
    pub p: Option<f64>,
    pub d_times_t: Option<f64>,
    pub sse: Option<f64>,
    pub min_bandwidth_hz: Option<f64>,
    pub status: &'static str,
    pub reason: String,
}

pub const QOS_HEADER: &[&str] = &[
    "id",
    "delay_bound_s",
    "violation_prob",
    "mean_snr_db",
    "p",
    "d_times_t",
    "sse",
    "min_bandwidth_hz",
    "status",
    "reason",
];

/// Status values in `allocation.csv` beyond the allocator's own.
pub const UNSCHEDULED: &str = "unscheduled";
pub const QOS_INFEASIBLE: &str = "qos_infeasible";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AllocationRow {
    pub id: String,
    pub scheduled: bool,
    pub status: String,
    pub bandwidth_hz: f64,
    pub rate_bps: f64,
    pub theta: f64,
    pub quality: f64,
    pub sse: f64,
    pub min_rate_bps: f64,
    pub min_bandwidth_hz: f64,
}

pub const ALLOCATION_HEADER: &[&str] = &[
    "id",
    "scheduled",
    "status",
    "bandwidth_hz",
    "rate_bps",
    "theta",
    "quality",
    "sse",
    "min_rate_bps",
    "min_bandwidth_hz",
];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryRow {
    pub policy: String,
    pub total_bandwidth_hz: f64,
    pub users: usize,
    pub n_star: usize,
    /// Set for the sum-quality policy.
    pub dual_price: Option<f64>,
    /// Set for the fairness policy.
    pub common_quality: Option<f64>,
    pub objective: f64,
    pub allocated_bandwidth_hz: f64,
    pub budget_residual: f64,
    /// Smallest extra bandwidth that would admit one more user; empty when
    /// everyone is scheduled.
    pub min_deficit_hz: Option<f64>,
}

pub const SUMMARY_HEADER: &[&str] = &[
    "policy",
    "total_bandwidth_hz",
    "users",
    "n_star",
    "dual_price",
    "common_quality",
    "objective",
    "allocated_bandwidth_hz",
    "budget_residual",
    "min_deficit_hz",
];

fn parse_status(s: &str) -> Option<UserStatus> {
    [UserStatus::Interior, UserStatus::Clamped, UserStatus::BelowMinimum].into_iter().find(|st| st.as_str() == s)
}

fn parse_policy(s: &str) -> Option<Policy> {
    [Policy::SumQuality, Policy::Fairness].into_iter().find(|p| p.to_string() == s)
}

/// Rebuilds the allocation over the scheduled users from an output
/// directory written by `allocate`.
pub fn read_allocation(dir: &Path) -> Result<AllocationResult, CliError> {
    let summary_path = dir.join(ALLOCATION_SUMMARY_CSV);
    let summary: Vec<SummaryRow> = read_rows(&summary_path)?;
    let [summary] = summary.as_slice() else {
        return Err(CliError::Schema(format!("{}: expected exactly one summary row", summary_path.display())));
    };
    let bad = |what: &str| CliError::Schema(format!("{}: {what}", summary_path.display()));
    let outcome = match parse_policy(&summary.policy) {
        Some(Policy::SumQuality) => {
            PolicyOutcome::SumQuality { rho: summary.dual_price.ok_or_else(|| bad("sum policy without dual_price"))? }
        }
        Some(Policy::Fairness) => PolicyOutcome::Fairness {
            quality: summary.common_quality.ok_or_else(|| bad("fair policy without common_quality"))?,
        },
        None => return Err(bad(&format!("unknown policy '{}'", summary.policy))),
    };
    let rows_path = dir.join(ALLOCATION_CSV);
    let rows: Vec<AllocationRow> = read_rows(&rows_path)?;
    let mut users = Vec::new();
    for (line, r) in rows.into_iter().enumerate().filter(|(_, r)| r.scheduled) {
        let status = parse_status(&r.status).ok_or_else(|| {
            CliError::Schema(format!("{}: record {}: unknown status '{}'", rows_path.display(), line + 1, r.status))
        })?;
        users.push(UserAllocation {
            id: r.id,
            bandwidth_hz: r.bandwidth_hz,
            rate_bps: r.rate_bps,
            theta: r.theta,
            quality: r.quality,
            status,
        });
    }
    if users.len() != summary.n_star {
        return Err(bad(&format!("n_star is {} but {} users are scheduled", summary.n_star, users.len())));
    }
    Ok(AllocationResult { users, outcome, total_bandwidth_hz: summary.total_bandwidth_hz })
}
