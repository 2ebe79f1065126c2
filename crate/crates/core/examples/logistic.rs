//! Penalized logistic regression from a handful of random starts.

use ncreg::datagen::{default_k, make_design, sample_trial, BetaPattern, DesignFamily, DesignSpec, Response, TrialSpec};
use ncreg::solver::{multistart, support_of, SolverConfig, SUPPORT_TOL};
use ncreg::{LossModel, RegularizerSpec};

fn main() -> ncreg::Result<()> {
    let p = 32;
    let k = default_k(p);
    let n = (60.0 * k as f64 * (p as f64).ln()).round() as usize;
    let design = make_design(&DesignSpec::new(DesignFamily::Identity { sigma_x: 3.0 }, p))?;
    let trial = TrialSpec { p, k, n, pattern: BetaPattern::RandomSigns, sigma_eps: 0.0, sigma_w: 0.0, seed: 2 };
    let data = sample_trial(&design, &trial, Response::Logistic)?;
    let model = LossModel::logistic(data.x, data.y)?;

    let spec = RegularizerSpec::scad(((p as f64).ln() / n as f64).sqrt(), 2.5)?;
    let cfg = SolverConfig::default().with_radius(1.1 * data.beta_star.lp_norm(1)).with_tol(1e-12).with_max_iters(50_000);
    let ms = multistart(&model, &spec, &cfg, 8, 9)?;
    let beta = &ms.clusters[0].representative;
    println!("p = {p}, n = {n}: {} cluster(s) from 8 starts", ms.cluster_count());
    println!("true support {:?}", support_of(&data.beta_star, 0.0));
    println!("estimate     {:?}", support_of(beta, SUPPORT_TOL));
    println!("l-inf error {:.4}", (beta - &data.beta_star).amax());
    Ok(())
}
