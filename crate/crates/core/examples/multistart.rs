//! Several stationary points for SCAD on a spiked design; one for the Lasso.

use ncreg::experiments::{run, ExperimentConfig};
use ncreg::Penalty;

fn main() -> ncreg::Result<()> {
    let cfg = ExperimentConfig { seed: 3, ..ExperimentConfig::multistart_spiked(0.7, vec![Penalty::L1, Penalty::Scad { a: 2.5 }]) };
    let out = run(&cfg)?;
    for row in &out.rows {
        println!(
            "{:>5}: {} runs, {} cluster(s), median l2 error {:.4}",
            row.regularizer,
            cfg.multistart_runs,
            row.cluster_count.unwrap_or(0),
            row.median_l2_error.unwrap_or(f64::NAN)
        );
    }
    println!("{} trace rows recorded in {:.1}s", out.traces.len(), out.wall_time_seconds);
    Ok(())
}
