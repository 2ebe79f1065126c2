//! Errors-in-variables regression: the corrected quadratic loss is
//! indefinite when p > n, yet every start lands on the same estimate.

use ncreg::datagen::{default_k, make_design, sample_trial, BetaPattern, DesignFamily, DesignSpec, Response, TrialData, TrialSpec};
use ncreg::numerics::sym_eig;
use ncreg::solver::{multistart, support_of, SolverConfig, SUPPORT_TOL};
use ncreg::{LossModel, RegularizerSpec};

fn main() -> ncreg::Result<()> {
    let (p, n, sigma_w) = (128, 80, 0.2);
    let k = default_k(p);
    let design = make_design(&DesignSpec::new(DesignFamily::Identity { sigma_x: 1.0 }, p))?;
    let trial = TrialSpec { p, k, n, pattern: BetaPattern::FlatPositive, sigma_eps: 0.1, sigma_w, seed: 7 };
    let data = sample_trial(&design, &trial, Response::Linear)?;

    // only Z = X + W is observed
    let model = LossModel::corrupted(&data.z, &data.y, &TrialData::sigma_w(p, sigma_w))?;
    let (gamma, _) = model.quadratic_form().expect("corrected loss is quadratic");
    println!("p = {p}, n = {n}, min eig of the corrected Gram matrix: {:.4}", sym_eig(gamma)?.min());

    let spec = RegularizerSpec::l1(((p as f64).ln() / n as f64).sqrt())?;
    let cfg = SolverConfig::default().with_radius(1.1 * data.beta_star.lp_norm(1)).with_tol(1e-12).with_max_iters(50_000);
    let ms = multistart(&model, &spec, &cfg, 10, 1)?;
    let beta = &ms.clusters[0].representative;
    println!("10 random starts -> {} cluster(s), max pairwise distance {:.2e}", ms.cluster_count(), ms.max_pairwise_distance);
    println!("estimated support {:?}", support_of(beta, SUPPORT_TOL));
    println!("l2 error {:.4}, l-inf error {:.4}", (beta - &data.beta_star).norm(), (beta - &data.beta_star).amax());
    Ok(())
}
