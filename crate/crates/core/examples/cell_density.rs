//! Users supported per method as the user density grows, default cell.

use vidqos::cell_sim::{density_sweep, CellScenario, Method};
use vidqos::exec::Execution;

fn main() -> anyhow::Result<()> {
    let scenario = CellScenario::default();
    let densities = [1e-6, 2e-6, 5e-6, 1e-5, 2e-5, 4e-5];
    let rows = density_sweep(&scenario, &densities, 20, Execution::Parallel)?;
    println!("{:>10} {:>8} {:>14} {:>10} {:>10}", "density", "dropped", "method", "supported", "dmos_std");
    for r in &rows {
        println!(
            "{:>10.1e} {:>8.1} {:>14} {:>10.1} {:>10.2}",
            r.density_per_m2,
            r.mean_users_dropped,
            r.method.label(),
            r.mean_supported,
            r.mean_dmos_std
        );
    }
    for &d in &densities {
        let get = |m: Method| rows.iter().find(|r| r.density_per_m2 == d && r.method == m).unwrap().mean_supported;
        println!(
            "density {d:.0e}: allocation gain {:.2}, scheduling gain {:.2}",
            get(Method::MaxSnrSumQuality) / get(Method::MaxSnrEqual),
            get(Method::SubsetSumQuality) / get(Method::MaxSnrSumQuality)
        );
    }
    Ok(())
}
