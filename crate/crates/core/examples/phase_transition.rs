//! Support recovery rate against rescaled sample size; writes CSV to stdout.

use ncreg::experiments::{run, write_rows_csv, ExperimentConfig};

fn main() -> ncreg::Result<()> {
    let cfg = ExperimentConfig { trials: 20, ..ExperimentConfig::phase_transition_desk() };
    let out = run(&cfg)?;
    eprintln!("{:>5} {:>5} {:>8} {:>10}", "reg", "c", "success", "med l-inf");
    for r in &out.rows {
        eprintln!(
            "{:>5} {:>5.0} {:>8.2} {:>10.4}",
            r.regularizer,
            r.n_rescaled.unwrap_or(f64::NAN),
            r.success_rate,
            r.median_linf_error.unwrap_or(f64::NAN)
        );
    }
    write_rows_csv(std::io::stdout().lock(), &out.rows)
}
