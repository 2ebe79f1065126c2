//! Sparse precision estimation on a chain graph with the MCP penalty.

use ncreg::datagen::make_chain_precision;
use ncreg::experiments::sample_covariance;
use ncreg::glasso::{glasso_error_norms, glasso_oracle, glasso_solve, EdgeSet, GlassoConfig};
use ncreg::solver::SUPPORT_TOL;
use ncreg::{Matrix, RegularizerSpec};

fn main() -> ncreg::Result<()> {
    let (p, n, rho) = (16, 2000, 0.3);
    let theta_star = make_chain_precision(p, rho)?;
    let truth = EdgeSet::from_matrix(&theta_star, 0.0);
    let sigma = sample_covariance(&theta_star, n, 5)?;

    let lambda = 4.0 * ((p as f64).ln() / n as f64).sqrt();
    let spec = RegularizerSpec::mcp(lambda, 1.5)?;
    let res = glasso_solve(&sigma, &spec, &GlassoConfig::default(), &Matrix::identity(p, p))?;
    println!("{:?} after {} iterations, kappa = {:.4}", res.status, res.iterations, res.kappa);

    let found = EdgeSet::from_matrix(&res.theta, SUPPORT_TOL);
    println!("true edges {}, estimated edges {}, exact: {}", truth.nnz(), found.nnz(), found == truth);
    let err = glasso_error_norms(&res.theta, &theta_star, &truth)?;
    println!("error: max {:.4}, frobenius {:.4}, spectral {:.4}", err.max, err.frobenius, err.spectral);

    let oracle = glasso_oracle(&sigma, &truth)?;
    println!("distance to the support-restricted MLE {:.2e}", (&res.theta - &oracle).amax());
    Ok(())
}
