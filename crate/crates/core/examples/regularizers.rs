//! Tabulate ρ, ρ' and q' for each penalty and run the amenability checks.

use ncreg::regularizers::{check_amenable, Side};
use ncreg::{Penalty, RegularizerSpec};

fn main() -> ncreg::Result<()> {
    let lambda = 0.5;
    let penalties = [Penalty::L1, Penalty::Scad { a: 3.7 }, Penalty::Mcp { b: 1.5 }, Penalty::Lsp];
    let grid: Vec<f64> = (-40..=40).map(|i| i as f64 * 0.1).collect();

    for pen in penalties {
        let spec = RegularizerSpec::new(pen, lambda)?;
        let am = spec.amenability();
        println!("{} (lambda = {lambda}): mu = {:.4}, gamma = {:?}", pen.name(), am.mu, am.gamma);
        println!("  {:>6} {:>10} {:>10} {:>10}", "t", "rho", "rho'", "q'");
        for t in [0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0] {
            println!(
                "  {t:>6.2} {:>10.5} {:>10.5} {:>10.5}",
                spec.rho(t),
                spec.rho_prime(t, Side::FromPositive)?,
                spec.q_prime(t)
            );
        }
        let report = check_amenable(&spec, &grid);
        println!("  amenable on grid: {}\n", report.all_pass());
    }
    Ok(())
}
