//! The five commands. Each writes its CSVs to the output directory and a
//! short human-readable table to `out`.

use super::report::{self, AllocationRow, QosRow, SummaryRow};
use super::scenario::{parse_as, read_text, ScenarioFile, UserInput, UserSpec};
use super::{CliError, Options};
use crate::admission::{admit_fairness, admit_sum_quality, AdmissionDecision};
use crate::allocator::{allocate, AllocationResult, Policy, PolicyOutcome};
use crate::cell_sim::{
    density_sweep, min_bandwidth_at, service_region, simulate_realization, two_user_regions, CellScenario, DmosMap,
    Method, ServiceBoundary,
};
use crate::fading::{linear_to_db, FadingDistribution};
use crate::profile::UserProfile;
use crate::qos::{solve_d, QosTarget};
use crate::queue_sim::{simulate_with_trace, validate_allocation, QueueSimConfig, ValidationSettings};
use crate::scheduler::{schedule, ScheduleResult};
use serde::Serialize;
use std::io::Write;
use std::path::Path;

/// How a command finished when it did not hit an error.
#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Ok,
    /// Some users have unattainable QoS targets (`qos`).
    SomeInfeasible { count: usize },
    /// Users were listed but none fits the budget.
    NoneScheduled { min_deficit_hz: f64 },
    ValidationFailed { failed: usize, total: usize },
}

impl Status {
    pub fn exit_code(&self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::SomeInfeasible { .. } | Status::NoneScheduled { .. } => 3,
            Status::ValidationFailed { .. } => 4,
        }
    }

    pub fn message(&self) -> Option<String> {
        match self {
            Status::Ok => None,
            Status::SomeInfeasible { count } => Some(format!("infeasible: {count} user(s) cannot meet their QoS target")),
            Status::NoneScheduled { min_deficit_hz } => {
                Some(format!("infeasible: no user fits the budget; smallest deficit {min_deficit_hz:.1} Hz"))
            }
            Status::ValidationFailed { failed, total } => {
                Some(format!("validation failed for {failed} of {total} user(s)"))
            }
        }
    }
}

fn say(out: &mut dyn Write, line: std::fmt::Arguments) {
    // Report output is best effort; a closed stdout must not mask the exit code.
    let _ = out.write_fmt(line);
    let _ = out.write_all(b"\n");
}

fn solve_all(file: &ScenarioFile, opts: &Options) -> Result<Vec<(UserInput, crate::Result<UserProfile>)>, CliError> {
    let inputs = file.user_inputs()?;
    let t = file.system.coherence_time_s;
    let solved = opts.exec.map(&inputs, |u| u.solve(t));
    Ok(inputs.into_iter().zip(solved).collect())
}

fn mean_snr_db(dist: &FadingDistribution) -> f64 {
    linear_to_db(dist.mean_snr())
}

pub fn cmd_qos(file: &ScenarioFile, opts: &Options, out: &mut dyn Write) -> Result<Status, CliError> {
    let solved = solve_all(file, opts)?;
    let rows: Vec<QosRow> = solved
        .iter()
        .map(|(input, res)| {
            let base = QosRow {
                id: input.id.clone(),
                delay_bound_s: input.target.delay_bound_s,
                violation_prob: input.target.violation_prob,
                mean_snr_db: mean_snr_db(&input.dist),
                p: None,
                d_times_t: None,
                sse: None,
                min_bandwidth_hz: None,
                status: "ok",
                reason: String::new(),
            };
            match res {
                Ok(u) => QosRow {
                    p: Some(u.derived.p),
                    d_times_t: Some(u.derived.d_times_t),
                    sse: Some(u.sse()),
                    min_bandwidth_hz: Some(u.min_bandwidth_hz()),
                    ..base
                },
                Err(e) => QosRow { status: "infeasible", reason: e.to_string(), ..base },
            }
        })
        .collect();
    report::write_rows(&opts.out_dir, report::QOS_CSV, report::QOS_HEADER, &rows)?;
    say(out, format_args!("{:<16} {:>12} {:>12} {:>12} {:>14}", "user", "p", "d*T", "sse", "b_min_hz"));
    for r in &rows {
        match (r.p, r.d_times_t, r.sse, r.min_bandwidth_hz) {
            (Some(p), Some(d), Some(s), Some(b)) => {
                say(out, format_args!("{:<16} {:>12.6e} {:>12.6e} {:>12.6e} {:>14.1}", r.id, p, d, s, b))
            }
            _ => say(out, format_args!("{:<16} infeasible: {}", r.id, r.reason)),
        }
    }
    let count = rows.iter().filter(|r| r.status != "ok").count();
    Ok(if count == 0 { Status::Ok } else { Status::SomeInfeasible { count } })
}

/// Schedule plus allocation over the QoS-feasible users.
pub struct Plan {
    pub inputs: Vec<UserInput>,
    /// Solved profile per input, or the reason it failed.
    pub solved: Vec<Result<UserProfile, String>>,
    /// Indices of `inputs` that were solved, in input order.
    pub feasible: Vec<usize>,
    /// Schedule over the feasible users.
    pub schedule: ScheduleResult,
    /// Profiles of the scheduled users, in allocation order.
    pub selected: Vec<UserProfile>,
    pub allocation: Option<AllocationResult>,
}

impl Plan {
    pub fn min_deficit_hz(&self) -> Option<f64> {
        self.schedule.rejected.iter().map(|r| r.deficit_hz).reduce(f64::min)
    }
}

pub fn plan(file: &ScenarioFile, opts: &Options) -> Result<Plan, CliError> {
    let solved = solve_all(file, opts)?;
    let (inputs, solved): (Vec<_>, Vec<_>) =
        solved.into_iter().map(|(i, r)| (i, r.map_err(|e| e.to_string()))).unzip();
    let feasible: Vec<usize> = (0..solved.len()).filter(|&i| solved[i].is_ok()).collect();
    let pool: Vec<UserProfile> = feasible.iter().map(|&i| solved[i].clone().expect("feasible")).collect();
    let b = file.system.total_bandwidth_hz;
    let schedule = schedule(opts.policy, &pool, b);
    let selected = schedule.selected_profiles(&pool);
    let allocation = if selected.is_empty() { None } else { Some(allocate(opts.policy, &selected, b)?) };
    Ok(Plan { inputs, solved, feasible, schedule, selected, allocation })
}

fn summary_row(plan: &Plan, policy: Policy, total_bandwidth_hz: f64) -> SummaryRow {
    let (dual_price, common_quality) = match plan.allocation.as_ref().map(|a| a.outcome) {
        Some(PolicyOutcome::SumQuality { rho }) => (Some(rho), None),
        Some(PolicyOutcome::Fairness { quality }) => (None, Some(quality)),
        None => (None, None),
    };
    let (objective, allocated, residual) = match &plan.allocation {
        Some(a) => {
            let obj = if policy == Policy::Fairness { a.min_quality() } else { a.objective() };
            (obj, a.allocated_bandwidth_hz(), a.budget_residual())
        }
        None => (0.0, 0.0, 1.0),
    };
    SummaryRow {
        policy: policy.to_string(),
        total_bandwidth_hz,
        users: plan.inputs.len(),
        n_star: plan.selected.len(),
        dual_price,
        common_quality,
        objective,
        allocated_bandwidth_hz: allocated,
        budget_residual: residual,
        min_deficit_hz: plan.min_deficit_hz(),
    }
}

fn allocation_rows(plan: &Plan) -> Vec<AllocationRow> {
    let mut rows = Vec::with_capacity(plan.inputs.len());
    for (i, input) in plan.inputs.iter().enumerate() {
        let row = match &plan.solved[i] {
            Err(_) => AllocationRow {
                id: input.id.clone(),
                scheduled: false,
                status: report::QOS_INFEASIBLE.into(),
                bandwidth_hz: 0.0,
                rate_bps: 0.0,
                theta: f64::NAN,
                quality: f64::NAN,
                sse: f64::NAN,
                min_rate_bps: input.curve.min_rate_bps(),
                min_bandwidth_hz: f64::INFINITY,
            },
            Ok(profile) => {
                let alloc = plan.allocation.as_ref().and_then(|a| a.users.iter().find(|u| u.id == input.id));
                match alloc {
                    Some(a) => AllocationRow {
                        id: input.id.clone(),
                        scheduled: true,
                        status: a.status.as_str().into(),
                        bandwidth_hz: a.bandwidth_hz,
                        rate_bps: a.rate_bps,
                        theta: a.theta,
                        quality: a.quality,
                        sse: profile.sse(),
                        min_rate_bps: profile.curve.min_rate_bps(),
                        min_bandwidth_hz: profile.min_bandwidth_hz(),
                    },
                    None => AllocationRow {
                        id: input.id.clone(),
                        scheduled: false,
                        status: report::UNSCHEDULED.into(),
                        bandwidth_hz: 0.0,
                        rate_bps: 0.0,
                        theta: f64::NAN,
                        quality: f64::NAN,
                        sse: profile.sse(),
                        min_rate_bps: profile.curve.min_rate_bps(),
                        min_bandwidth_hz: profile.min_bandwidth_hz(),
                    },
                }
            }
        };
        rows.push(row);
    }
    rows
}

fn write_allocation(plan: &Plan, file: &ScenarioFile, opts: &Options, out: &mut dyn Write) -> Result<(), CliError> {
    let rows = allocation_rows(plan);
    let summary = summary_row(plan, opts.policy, file.system.total_bandwidth_hz);
    report::write_rows(&opts.out_dir, report::ALLOCATION_CSV, report::ALLOCATION_HEADER, &rows)?;
    report::write_rows(&opts.out_dir, report::ALLOCATION_SUMMARY_CSV, report::SUMMARY_HEADER, std::slice::from_ref(&summary))?;
    say(out, format_args!("{:<16} {:<14} {:>14} {:>14} {:>12}", "user", "status", "bandwidth_hz", "rate_bps", "quality"));
    for r in &rows {
        say(
            out,
            format_args!(
                "{:<16} {:<14} {:>14.1} {:>14.1} {:>12.4}",
                r.id, r.status, r.bandwidth_hz, r.rate_bps, r.quality
            ),
        );
    }
    say(out, format_args!("policy {}: N* = {} of {}", summary.policy, summary.n_star, summary.users));
    if let Some(rho) = summary.dual_price {
        say(out, format_args!("dual price {rho:.6e}"));
    }
    if let Some(q) = summary.common_quality {
        say(out, format_args!("common quality {q:.6}"));
    }
    say(out, format_args!("objective {:.6}, budget residual {:.3e}", summary.objective, summary.budget_residual));
    for (i, res) in plan.solved.iter().enumerate() {
        if let Err(reason) = res {
            say(out, format_args!("{}: not scheduled, {reason}", plan.inputs[i].id));
        }
    }
    for r in &plan.schedule.rejected {
        say(out, format_args!("{}: not scheduled, needs {:.1} Hz more", r.id, r.deficit_hz));
    }
    Ok(())
}

pub fn cmd_allocate(file: &ScenarioFile, opts: &Options, out: &mut dyn Write) -> Result<Status, CliError> {
    let plan = plan(file, opts)?;
    write_allocation(&plan, file, opts, out)?;
    match (plan.selected.is_empty(), plan.min_deficit_hz()) {
        (true, Some(min_deficit_hz)) => Ok(Status::NoneScheduled { min_deficit_hz }),
        _ => Ok(Status::Ok),
    }
}

#[derive(Debug, Serialize)]
struct AdmissionRow {
    id: String,
    role: &'static str,
    rate_before_bps: f64,
    rate_after_bps: f64,
    min_rate_bps: f64,
    meets_min_rate: bool,
}

const ADMISSION_HEADER: &[&str] =
    &["id", "role", "rate_before_bps", "rate_after_bps", "min_rate_bps", "meets_min_rate"];

pub fn cmd_admit(
    file: &ScenarioFile,
    opts: &Options,
    new_user_path: Option<&Path>,
    allocation_dir: Option<&Path>,
    out: &mut dyn Write,
) -> Result<Status, CliError> {
    let newcomer = match (new_user_path, &file.admit) {
        (Some(path), _) => {
            let spec: UserSpec = parse_as(path, &read_text(path)?)?;
            spec.to_input(&path.display().to_string())?
        }
        (None, Some(a)) => a.new_user.to_input("admit.new_user")?,
        (None, None) => {
            return Err(CliError::Schema("admit needs --new-user <path> or an [admit.new_user] table".into()))
        }
    };
    let t = file.system.coherence_time_s;
    let b = file.system.total_bandwidth_hz;
    let newcomer = newcomer.solve(t).map_err(|e| CliError::Infeasible(format!("new user '{}': {e}", newcomer.id)))?;

    let (existing, profiles) = match allocation_dir {
        Some(dir) => {
            let existing = report::read_allocation(dir)?;
            let solved = solve_all(file, opts)?;
            let profiles = existing
                .users
                .iter()
                .map(|a| match solved.iter().find(|(i, _)| i.id == a.id) {
                    Some((_, Ok(p))) => Ok(p.clone()),
                    Some((_, Err(e))) => Err(CliError::Infeasible(format!("user '{}': {e}", a.id))),
                    None => Err(CliError::Schema(format!("allocated user '{}' is not in the scenario", a.id))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            (existing, profiles)
        }
        None => {
            let plan = plan(file, opts)?;
            let existing = plan
                .allocation
                .ok_or_else(|| CliError::Infeasible("no scheduled users to admit against".into()))?;
            (existing, plan.selected)
        }
    };
    if profiles.iter().any(|p| p.id == newcomer.id) {
        return Err(CliError::Schema(format!("new user id '{}' is already allocated", newcomer.id)));
    }
    let decision = match existing.outcome.policy() {
        Policy::SumQuality => admit_sum_quality(&existing, &profiles, &newcomer, b)?,
        Policy::Fairness => admit_fairness(&existing, &profiles, &newcomer, b)?,
    };
    write_admission(&decision, &existing, &profiles, &newcomer, opts, out)?;
    Ok(Status::Ok)
}

fn write_admission(
    d: &AdmissionDecision,
    existing: &AllocationResult,
    profiles: &[UserProfile],
    newcomer: &UserProfile,
    opts: &Options,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let mut rows: Vec<AdmissionRow> = existing
        .users
        .iter()
        .zip(profiles)
        .zip(&d.post_rates)
        .map(|((a, p), (_, after))| AdmissionRow {
            id: a.id.clone(),
            role: "existing",
            rate_before_bps: a.rate_bps,
            rate_after_bps: *after,
            min_rate_bps: p.curve.min_rate_bps(),
            meets_min_rate: p.curve.min_rate_bps() <= *after,
        })
        .collect();
    rows.push(AdmissionRow {
        id: newcomer.id.clone(),
        role: "new",
        rate_before_bps: 0.0,
        rate_after_bps: d.new_user_rate_bps,
        min_rate_bps: newcomer.curve.min_rate_bps(),
        meets_min_rate: newcomer.curve.min_rate_bps() <= d.new_user_rate_bps,
    });
    report::write_rows(&opts.out_dir, report::ADMISSION_CSV, ADMISSION_HEADER, &rows)?;
    say(
        out,
        format_args!(
            "{} '{}' under the {} policy",
            if d.admit { "admit" } else { "reject" },
            newcomer.id,
            existing.outcome.policy()
        ),
    );
    say(out, format_args!("new user bandwidth {:.1} Hz, rate {:.1} bit/s", d.new_user_bandwidth_hz, d.new_user_rate_bps));
    if let Some(q) = d.final_quality {
        say(out, format_args!("common quality after admission {q:.6}"));
    }
    for r in &rows[..rows.len() - 1] {
        say(out, format_args!("{:<16} {:>14.1} -> {:>14.1} bit/s", r.id, r.rate_before_bps, r.rate_after_bps));
    }
    for f in &d.failures {
        say(out, format_args!("{}", f.describe()));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SseRow {
    mean_snr_db: f64,
    delay_bound_s: f64,
    violation_prob: f64,
    sse: Option<f64>,
    bandwidth_per_rate: Option<f64>,
    error: String,
}

const SSE_HEADER: &[&str] = &["mean_snr_db", "delay_bound_s", "violation_prob", "sse", "bandwidth_per_rate", "error"];

#[derive(Debug, Serialize)]
struct RegionRow {
    first_snr_db: f64,
    second_snr_db: f64,
    region: &'static str,
}

#[derive(Debug, Serialize)]
struct BoundaryRow {
    user: String,
    kind: &'static str,
    snr_db: f64,
    /// First grid point at which the user is servable alone.
    grid_snr_db: Option<f64>,
    grid_step_db: f64,
}

#[derive(Debug, Serialize)]
struct DensityCsvRow {
    density_per_m2: f64,
    method: &'static str,
    realizations: usize,
    mean_users_dropped: f64,
    mean_supported: f64,
    std_supported: f64,
    mean_quality_std: f64,
    mean_dmos_std: f64,
}

#[derive(Debug, Serialize)]
struct CoverageRow {
    density_per_m2: f64,
    method: &'static str,
    class: String,
    coverage_radius_m: f64,
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

pub fn cmd_sweep(file: &ScenarioFile, opts: &Options, out: &mut dyn Write) -> Result<Status, CliError> {
    let sweep = file.sweep.as_ref().ok_or_else(|| CliError::Schema("sweep needs a [sweep] section".into()))?;
    let t = file.system.coherence_time_s;
    let b = file.system.total_bandwidth_hz;
    let dir = &opts.out_dir;

    if let Some(g) = &sweep.sse_grid {
        let points: Vec<(f64, f64)> =
            g.delay_bounds_s.iter().flat_map(|&d| g.violation_probs.iter().map(move |&p| (d, p))).collect();
        let rows = opts.exec.map(&points, |&(delay, prob)| {
            let solved = QosTarget::new(delay, prob)
                .and_then(|target| solve_d(&target, &FadingDistribution::rayleigh_db(g.mean_snr_db)?, t));
            let (sse, error) = match solved {
                Ok(d) => (Some(d.sse), String::new()),
                Err(e) => (None, e.to_string()),
            };
            SseRow {
                mean_snr_db: g.mean_snr_db,
                delay_bound_s: delay,
                violation_prob: prob,
                sse,
                bandwidth_per_rate: sse.map(|s| 1.0 / s),
                error,
            }
        });
        let path = report::write_rows(dir, report::SSE_GRID_CSV, SSE_HEADER, &rows)?;
        say(out, format_args!("wrote {} ({} points)", path.display(), rows.len()));
    }

    if let Some(r) = &sweep.service_region {
        let inputs = file.user_inputs()?;
        let (first, second) = (&inputs[0], &inputs[1]);
        let snrs = grid(r.snr_min_db, r.snr_max_db, r.snr_step_db);
        let cells = two_user_regions(
            [&first.target, &second.target],
            [first.curve.min_rate_bps(), second.curve.min_rate_bps()],
            &snrs,
            b,
            t,
            opts.exec,
        )?;
        let rows: Vec<RegionRow> = cells
            .iter()
            .map(|c| RegionRow { first_snr_db: c.first_snr_db, second_snr_db: c.second_snr_db, region: c.region.as_str() })
            .collect();
        let path = report::write_rows(dir, report::SERVICE_REGION_CSV, &["first_snr_db", "second_snr_db", "region"], &rows)?;
        say(out, format_args!("wrote {} ({} cells)", path.display(), rows.len()));

        let mut bounds = Vec::new();
        for u in [first, second] {
            let boundary = service_region(&u.target, u.curve.min_rate_bps(), r.snr_min_db, r.snr_max_db, b, t)?;
            let mut grid_snr_db = None;
            for &s in &snrs {
                if min_bandwidth_at(&u.target, u.curve.min_rate_bps(), s, t)? <= b {
                    grid_snr_db = Some(s);
                    break;
                }
            }
            let kind = match boundary {
                ServiceBoundary::At { .. } => "at",
                ServiceBoundary::BelowRange { .. } => "below_range",
                ServiceBoundary::AboveRange { .. } => "above_range",
            };
            say(out, format_args!("{}: minimum serving SNR {kind} {:.3} dB", u.id, boundary.snr_db()));
            bounds.push(BoundaryRow {
                user: u.id.clone(),
                kind,
                snr_db: boundary.snr_db(),
                grid_snr_db,
                grid_step_db: r.snr_step_db,
            });
        }
        report::write_rows(
            dir,
            report::SERVICE_BOUNDARIES_CSV,
            &["user", "kind", "snr_db", "grid_snr_db", "grid_step_db"],
            &bounds,
        )?;
    }

    if let Some(d) = &sweep.density {
        let scenario = file.cell_scenario(opts.seed)?;
        let rows = density_sweep(&scenario, &d.densities_per_m2, d.realizations, opts.exec)?;
        let csv_rows: Vec<DensityCsvRow> = rows
            .iter()
            .map(|r| DensityCsvRow {
                density_per_m2: r.density_per_m2,
                method: r.method.label(),
                realizations: r.realizations,
                mean_users_dropped: r.mean_users_dropped,
                mean_supported: r.mean_supported,
                std_supported: r.std_supported,
                mean_quality_std: r.mean_quality_std,
                mean_dmos_std: r.mean_dmos_std,
            })
            .collect();
        let path = report::write_rows(
            dir,
            report::DENSITY_SWEEP_CSV,
            &[
                "density_per_m2",
                "method",
                "realizations",
                "mean_users_dropped",
                "mean_supported",
                "std_supported",
                "mean_quality_std",
                "mean_dmos_std",
            ],
            &csv_rows,
        )?;
        say(out, format_args!("wrote {}", path.display()));
        for r in &csv_rows {
            say(out, format_args!("{:>10.2e} {:<14} {:>8.2}", r.density_per_m2, r.method, r.mean_supported));
        }
        write_cell_details(&scenario, &d.densities_per_m2, dir)?;
    }
    Ok(Status::Ok)
}

/// Per-user table of the first realization at every density, its coverage
/// radii, and the link-budget settings behind the SNRs.
fn write_cell_details(scenario: &CellScenario, densities: &[f64], dir: &Path) -> Result<(), CliError> {
    let mut header: Vec<String> =
        ["id", "x_m", "y_m", "distance_m", "class", "curve", "snr_db", "sse"].map(String::from).to_vec();
    for m in Method::ALL {
        for col in ["served", "bandwidth_hz", "rate_bps", "quality"] {
            header.push(format!("{col}_{}", m.label()));
        }
    }
    let mut coverage = Vec::new();
    for (i, &density) in densities.iter().enumerate() {
        let sc = CellScenario { user_density_per_m2: density, ..scenario.clone() };
        // Stream of realization 0 at this density, as in the sweep.
        let (users, report) = simulate_realization(&sc, (i as u64) << 32)?;
        let mut records = Vec::with_capacity(users.len());
        for (k, u) in users.iter().enumerate() {
            let mut rec = vec![
                u.id.clone(),
                u.x_m.to_string(),
                u.y_m.to_string(),
                u.distance_m.to_string(),
                sc.classes[u.class].name.clone(),
                sc.catalog[u.curve].name.clone(),
                u.mean_snr_db.to_string(),
                u.profile.as_ref().map_or(String::new(), |p| p.sse().to_string()),
            ];
            for m in Method::ALL {
                match report.outcome(m).serves(k) {
                    Some(s) => rec.extend([
                        "true".into(),
                        s.bandwidth_hz.to_string(),
                        s.rate_bps.to_string(),
                        s.quality.to_string(),
                    ]),
                    None => rec.extend(["false".into(), "0".into(), "0".into(), String::new()]),
                }
            }
            records.push(rec);
        }
        report::write_records(dir, &report::cell_users_csv(i), &header, &records)?;
        for m in Method::ALL {
            for (c, r) in report.outcome(m).coverage_radius_m.iter().enumerate() {
                coverage.push(CoverageRow {
                    density_per_m2: density,
                    method: m.label(),
                    class: sc.classes[c].name.clone(),
                    coverage_radius_m: *r,
                });
            }
        }
    }
    report::write_rows(dir, report::CELL_COVERAGE_CSV, &["density_per_m2", "method", "class", "coverage_radius_m"], &coverage)?;
    let dmos = DmosMap::from_catalog(&scenario.catalog);
    let power_mode = match scenario.power_mode {
        crate::cell_sim::PowerMode::PerUser => "per_user",
        crate::cell_sim::PowerMode::EqualSplit => "equal_split",
    };
    let meta = [
        ("reference_bandwidth_hz", scenario.reference_bandwidth().to_string()),
        ("snr_note", "mean SNR uses the fixed reference bandwidth, not the allocated one".to_string()),
        ("tx_power_w", scenario.tx_power_w.to_string()),
        ("power_mode", power_mode.to_string()),
        ("pathloss_const_db", scenario.pathloss_const_db.to_string()),
        ("pathloss_exponent", scenario.pathloss_exponent.to_string()),
        ("noise_psd_w_per_hz", scenario.noise_psd_w_per_hz.to_string()),
        ("seed", scenario.seed.to_string()),
        ("dmos_scale", dmos.scale.to_string()),
        ("dmos_offset", dmos.offset.to_string()),
        ("dmos_note", "illustrative affine map of quality onto [0, 100]".to_string()),
    ];
    let records: Vec<Vec<String>> = meta.into_iter().map(|(k, v)| vec![k.to_string(), v]).collect();
    report::write_records(dir, report::CELL_METADATA_CSV, &["key".into(), "value".into()], &records)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct ValidationCsvRow {
    id: String,
    bandwidth_hz: f64,
    rate_bps: f64,
    target_prob: f64,
    violation_prob: f64,
    half_width: f64,
    blocks: usize,
    stable: bool,
    mean_service_bps: f64,
    pass: bool,
}

const VALIDATION_HEADER: &[&str] = &[
    "id",
    "bandwidth_hz",
    "rate_bps",
    "target_prob",
    "violation_prob",
    "half_width",
    "blocks",
    "stable",
    "mean_service_bps",
    "pass",
];

pub fn cmd_validate(file: &ScenarioFile, opts: &Options, out: &mut dyn Write) -> Result<Status, CliError> {
    let plan = plan(file, opts)?;
    let Some(allocation) = &plan.allocation else {
        return Err(CliError::Infeasible("no scheduled users to validate".into()));
    };
    let settings = ValidationSettings {
        n_blocks: file.validate.n_blocks,
        seed: opts.seed.unwrap_or(0),
        delay_unit: file.validate.delay_unit.into(),
        rate_scale: file.validate.rate_scale,
    };
    let rows = validate_allocation(allocation, &plan.selected, settings, opts.exec)?;
    let csv_rows: Vec<ValidationCsvRow> = rows
        .iter()
        .map(|r| ValidationCsvRow {
            id: r.id.clone(),
            bandwidth_hz: r.bandwidth_hz,
            rate_bps: r.rate_bps,
            target_prob: r.target_prob,
            violation_prob: r.estimate.probability,
            half_width: r.estimate.half_width,
            blocks: r.estimate.blocks_counted,
            stable: r.estimate.stable,
            mean_service_bps: r.estimate.mean_service_bps,
            pass: r.pass,
        })
        .collect();
    report::write_rows(&opts.out_dir, report::VALIDATION_CSV, VALIDATION_HEADER, &csv_rows)?;
    say(out, format_args!("{:<16} {:>10} {:>12} {:>10} {:>6}", "user", "target", "measured", "+/-", "pass"));
    for r in &csv_rows {
        say(
            out,
            format_args!(
                "{:<16} {:>10.4} {:>12.6} {:>10.6} {:>6}",
                r.id, r.target_prob, r.violation_prob, r.half_width, r.pass
            ),
        );
    }
    if opts.trace {
        write_traces(&plan, allocation, settings, file.validate.trace_blocks, opts)?;
    }
    let failed = rows.iter().filter(|r| !r.pass).count();
    Ok(if failed == 0 { Status::Ok } else { Status::ValidationFailed { failed, total: rows.len() } })
}

#[derive(Debug, Serialize)]
struct TraceCsvRow {
    block: usize,
    snr: f64,
    service_bits: f64,
    queue_bits: f64,
}

/// Re-runs each user's simulation on the same random stream and keeps the
/// first `limit` blocks.
fn write_traces(
    plan: &Plan,
    allocation: &AllocationResult,
    settings: ValidationSettings,
    limit: usize,
    opts: &Options,
) -> Result<(), CliError> {
    for (i, (a, u)) in allocation.users.iter().zip(&plan.selected).enumerate() {
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
        let mut rows = Vec::with_capacity(limit.min(settings.n_blocks));
        simulate_with_trace(&cfg, |t| {
            if t.block < limit {
                rows.push(TraceCsvRow { block: t.block, snr: t.snr, service_bits: t.service_bits, queue_bits: t.queue_bits });
            }
        })?;
        report::write_rows(&opts.out_dir, &report::trace_csv(&a.id), &["block", "snr", "service_bits", "queue_bits"], &rows)?;
    }
    Ok(())
}
