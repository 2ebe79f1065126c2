//! Primal-dual witness for the true support, then a multistart to see the
//! certificate borne out.

use ncreg::datagen::{default_k, make_design, sample_trial, BetaPattern, DesignFamily, DesignSpec, Response, TrialData, TrialSpec};
use ncreg::pdw::{construct_witness, incoherence_parameter};
use ncreg::solver::{multistart, support_of, SolverConfig};
use ncreg::{LossModel, RegularizerSpec};

fn main() -> ncreg::Result<()> {
    let p = 64;
    let k = default_k(p);
    let theta = 2.5 / k as f64;
    let n = (10.0 * k as f64 * (p as f64).ln()).round() as usize;
    let cov = make_design(&DesignSpec::new(DesignFamily::M1 { theta, k }, p))?;
    let support: Vec<usize> = (0..k).collect();
    println!("M1 design, p = {p}, k = {k}, incoherence {:.3} (above 1: the Lasso cannot recover S)", incoherence_parameter(&cov, &support)?);

    let trial = TrialSpec { p, k, n, pattern: BetaPattern::FlatPositive, sigma_eps: 0.1, sigma_w: 0.2, seed: 11 };
    let data = sample_trial(&cov, &trial, Response::Linear)?;
    let model = LossModel::corrupted(&data.z, &data.y, &TrialData::sigma_w(p, 0.2))?;
    let spec = RegularizerSpec::mcp(((p as f64).ln() / n as f64).sqrt(), 1.5)?;
    let cfg = SolverConfig::default().with_radius(1.1 * data.beta_star.lp_norm(1)).with_tol(1e-12).with_max_iters(50_000);

    let cert = construct_witness(&model, &spec, &cfg, &support, Some(&data.beta_star))?;
    println!("verdict {:?}", cert.verdict);
    println!("  dual margin {:.4}, interior {}, zero-subgradient residual {:.1e}", cert.dual_margin, cert.interior, cert.zero_subgradient_residual);
    if let Some(d) = cert.ellinf {
        println!("  l-inf bound {:.4} (oracle part {:.4}), beta-min ok: {}", d.bound, d.oracle_bound, d.betamin_ok);
    }
    println!("  actual l-inf error {:.4}", (cert.beta_hat() - &data.beta_star).amax());

    let ms = multistart(&model, &spec, &cfg, 20, 3)?;
    println!("20 starts -> {} cluster(s), support {:?}", ms.cluster_count(), support_of(&ms.clusters[0].representative, 0.0));
    Ok(())
}
