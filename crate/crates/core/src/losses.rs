//! Loss models `L_n` with value, gradient and Hessian.
//!
//! The vector-parameter losses act on `β ∈ R^p`. The graphical Lasso loss
//! acts on `Θ ∈ R^{p×p}`; through the [`LossModel`] interface it takes the
//! column-major vectorization `vec(Θ)` of length `p²`, and [`GlassoLoss`]
//! offers the same computations on matrices directly.

use crate::error::{Error, Result};
use crate::numerics::{
    ensure_finite, is_symmetric, power_iteration, spd_inverse_logdet, sym_eig, symmetrize, Matrix,
    Vector,
};

/// Largest `p` for which the `p² × p²` glasso Hessian is materialized.
pub const GLASSO_HESSIAN_MAX_P: usize = 32;

/// Default number of Simpson nodes for [`LossModel::integrated_hessian`].
pub const DEFAULT_QUADRATURE_NODES: usize = 33;

#[derive(Debug, Clone)]
pub enum LossModel {
    /// `½βᵀ(XᵀX/n)β − (Xᵀy/n)ᵀβ`.
    Ols { x: Matrix, y: Vector, gram: Matrix, xty: Vector },
    /// `½βᵀΓ̂β − γ̂ᵀβ` with a possibly indefinite `Γ̂`.
    CorruptedQuadratic { gamma: Matrix, gamma_vec: Vector },
    /// `(1/n)Σ ψ(x_iᵀβ) − y_i x_iᵀβ` with `ψ(t) = log(1 + eᵗ)`.
    Logistic { x: Matrix, y: Vector },
    /// `trace(Σ̂Θ) − log det Θ`.
    Glasso(GlassoLoss),
}

/// `(Γ̂, γ̂) = (ZᵀZ/n − Σ_w, Zᵀy/n)`, the bias-corrected moments for additive
/// covariate noise with known covariance `Σ_w`.
pub fn corrected_moments(z: &Matrix, y: &Vector, sigma_w: &Matrix) -> Result<(Matrix, Vector)> {
    let (n, p) = z.shape();
    if y.len() != n {
        return Err(Error::dims(format!("Z has {n} rows but y has {} entries", y.len())));
    }
    if sigma_w.shape() != (p, p) {
        return Err(Error::dims(format!("Sigma_w must be {p}x{p}, got {:?}", sigma_w.shape())));
    }
    if n == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let nf = n as f64;
    let gamma = symmetrize(&(z.tr_mul(z) / nf - sigma_w));
    let gamma_vec = z.tr_mul(y) / nf;
    Ok((gamma, gamma_vec))
}

#[inline]
fn log1pexp(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

#[inline]
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl LossModel {
    pub fn ols(x: Matrix, y: Vector) -> Result<Self> {
        let n = x.nrows();
        if y.len() != n {
            return Err(Error::dims(format!("X has {n} rows but y has {} entries", y.len())));
        }
        if n == 0 {
            return Err(Error::invalid("need at least one sample"));
        }
        ensure_finite(x.as_slice(), "X")?;
        ensure_finite(y.as_slice(), "y")?;
        let nf = n as f64;
        let gram = symmetrize(&(x.tr_mul(&x) / nf));
        let xty = x.tr_mul(&y) / nf;
        Ok(LossModel::Ols { x, y, gram, xty })
    }

    pub fn corrected(gamma: Matrix, gamma_vec: Vector) -> Result<Self> {
        let p = gamma_vec.len();
        if gamma.shape() != (p, p) {
            return Err(Error::dims(format!("Gamma must be {p}x{p}, got {:?}", gamma.shape())));
        }
        ensure_finite(gamma.as_slice(), "Gamma")?;
        ensure_finite(gamma_vec.as_slice(), "gamma")?;
        if !is_symmetric(&gamma) {
            return Err(Error::invalid("Gamma must be symmetric"));
        }
        Ok(LossModel::CorruptedQuadratic { gamma: symmetrize(&gamma), gamma_vec })
    }

    /// Corrected quadratic loss built from corrupted covariates `Z = X + W`.
    pub fn corrupted(z: &Matrix, y: &Vector, sigma_w: &Matrix) -> Result<Self> {
        ensure_finite(z.as_slice(), "Z")?;
        ensure_finite(y.as_slice(), "y")?;
        let (gamma, gamma_vec) = corrected_moments(z, y, sigma_w)?;
        Self::corrected(gamma, gamma_vec)
    }

    pub fn logistic(x: Matrix, y: Vector) -> Result<Self> {
        let n = x.nrows();
        if y.len() != n {
            return Err(Error::dims(format!("X has {n} rows but y has {} entries", y.len())));
        }
        if n == 0 {
            return Err(Error::invalid("need at least one sample"));
        }
        ensure_finite(x.as_slice(), "X")?;
        if !y.iter().all(|&v| v == 0.0 || v == 1.0) {
            return Err(Error::invalid("logistic responses must be 0 or 1"));
        }
        Ok(LossModel::Logistic { x, y })
    }

    pub fn glasso(sigma: Matrix) -> Result<Self> {
        Ok(LossModel::Glasso(GlassoLoss::new(sigma)?))
    }

    /// Number of parameters (`p`, or `p²` for the glasso loss).
    pub fn dim(&self) -> usize {
        match self {
            LossModel::Ols { gram, .. } => gram.nrows(),
            LossModel::CorruptedQuadratic { gamma, .. } => gamma.nrows(),
            LossModel::Logistic { x, .. } => x.ncols(),
            LossModel::Glasso(g) => g.p() * g.p(),
        }
    }

    pub fn n_samples(&self) -> Option<usize> {
        match self {
            LossModel::Ols { x, .. } | LossModel::Logistic { x, .. } => Some(x.nrows()),
            _ => None,
        }
    }

    /// `(Γ̂, γ̂)` for the two quadratic variants.
    pub fn quadratic_form(&self) -> Option<(&Matrix, &Vector)> {
        match self {
            LossModel::Ols { gram, xty, .. } => Some((gram, xty)),
            LossModel::CorruptedQuadratic { gamma, gamma_vec } => Some((gamma, gamma_vec)),
            _ => None,
        }
    }

    fn check_dim(&self, beta: &Vector) -> Result<()> {
        if beta.len() != self.dim() {
            return Err(Error::dims(format!(
                "parameter has length {} but the loss expects {}",
                beta.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    pub fn value(&self, beta: &Vector) -> Result<f64> {
        self.check_dim(beta)?;
        match self {
            LossModel::Glasso(g) => g.value(&g.unvec(beta)),
            LossModel::Logistic { x, y } => {
                let eta = x * beta;
                let n = x.nrows() as f64;
                Ok(eta.iter().zip(y.iter()).map(|(&t, &yi)| log1pexp(t) - yi * t).sum::<f64>() / n)
            }
            _ => {
                let (g, v) = self.quadratic_form().expect("quadratic variant");
                Ok(0.5 * beta.dot(&(g * beta)) - v.dot(beta))
            }
        }
    }

    pub fn gradient(&self, beta: &Vector) -> Result<Vector> {
        self.check_dim(beta)?;
        match self {
            LossModel::Glasso(g) => {
                let grad = g.gradient(&g.unvec(beta))?;
                Ok(Vector::from_column_slice(grad.as_slice()))
            }
            LossModel::Logistic { x, y } => {
                let eta = x * beta;
                let resid = Vector::from_fn(eta.len(), |i, _| sigmoid(eta[i]) - y[i]);
                Ok(x.tr_mul(&resid) / x.nrows() as f64)
            }
            _ => {
                let (g, v) = self.quadratic_form().expect("quadratic variant");
                Ok(g * beta - v)
            }
        }
    }

    pub fn hessian(&self, beta: &Vector) -> Result<Matrix> {
        self.check_dim(beta)?;
        match self {
            LossModel::Glasso(g) => g.hessian(&g.unvec(beta)),
            LossModel::Logistic { x, .. } => {
                let eta = x * beta;
                let n = x.nrows();
                let weighted = Matrix::from_fn(n, x.ncols(), |i, j| {
                    let s = sigmoid(eta[i]);
                    x[(i, j)] * s * (1.0 - s)
                });
                Ok(symmetrize(&(x.tr_mul(&weighted) / n as f64)))
            }
            _ => Ok(self.quadratic_form().expect("quadratic variant").0.clone()),
        }
    }

    /// `Q̂ = ∫₀¹ ∇²L_n(β* + t(β̂ − β*)) dt` by composite Simpson with `nodes`
    /// points (odd, ≥ 3). Quadratic losses return `Γ̂` exactly.
    pub fn integrated_hessian(&self, beta_star: &Vector, beta_hat: &Vector, nodes: usize) -> Result<Matrix> {
        if nodes < 3 || nodes.is_multiple_of(2) {
            return Err(Error::invalid(format!("Simpson rule needs an odd node count >= 3, got {nodes}")));
        }
        self.check_dim(beta_star)?;
        self.check_dim(beta_hat)?;
        if let Some((g, _)) = self.quadratic_form() {
            return Ok(g.clone());
        }
        let delta = beta_hat - beta_star;
        let intervals = (nodes - 1) as f64;
        let mut acc: Option<Matrix> = None;
        for i in 0..nodes {
            let t = i as f64 / intervals;
            let w = if i == 0 || i == nodes - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let h = self.hessian(&(beta_star + &delta * t))? * w;
            acc = Some(match acc {
                Some(a) => a + h,
                None => h,
            });
        }
        Ok(symmetrize(&(acc.expect("nodes >= 3") / (3.0 * intervals))))
    }

    /// Estimate of the largest curvature of `L_n`, used to pick the step size.
    ///
    /// Quadratic losses: dominant eigenvalue of `Γ̂`. Logistic: dominant
    /// eigenvalue of the global upper bound `XᵀX/(4n)`. Both by 30 power
    /// iterations. Glasso: `λ_min(Θ)^{-2}` at the probe `Θ`.
    pub fn curvature_estimate(&self, probe: &Vector) -> Result<f64> {
        const POWER_ITERS: usize = 30;
        match self {
            LossModel::Glasso(g) => {
                let eig = sym_eig(&symmetrize(&g.unvec(probe)))?;
                if eig.min() <= 0.0 {
                    return Err(Error::Domain("probe is not positive definite".into()));
                }
                Ok(eig.min().powi(-2))
            }
            LossModel::Logistic { x, .. } => {
                let n = x.nrows() as f64;
                Ok(power_iteration(|v| x.tr_mul(&(x * v)) * (0.25 / n), x.ncols(), POWER_ITERS))
            }
            _ => {
                let (g, _) = self.quadratic_form().expect("quadratic variant");
                Ok(power_iteration(|v| g * v, g.nrows(), POWER_ITERS))
            }
        }
    }
}

/// The graphical Lasso loss `trace(Σ̂Θ) − log det Θ` on matrices.
#[derive(Debug, Clone)]
pub struct GlassoLoss {
    sigma: Matrix,
}

impl GlassoLoss {
    pub fn new(sigma: Matrix) -> Result<Self> {
        if !sigma.is_square() {
            return Err(Error::dims("sample covariance must be square"));
        }
        ensure_finite(sigma.as_slice(), "Sigma")?;
        let eig = sym_eig(&sigma)?;
        let scale = eig.max().abs().max(1.0);
        if eig.min() < -1e-10 * scale {
            return Err(Error::invalid("sample covariance is not positive semidefinite"));
        }
        Ok(GlassoLoss { sigma: symmetrize(&sigma) })
    }

    pub fn p(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn sigma(&self) -> &Matrix {
        &self.sigma
    }

    pub(crate) fn unvec(&self, v: &Vector) -> Matrix {
        Matrix::from_column_slice(self.p(), self.p(), v.as_slice())
    }

    fn check(&self, theta: &Matrix) -> Result<()> {
        if theta.shape() != self.sigma.shape() {
            return Err(Error::dims(format!(
                "Theta is {:?} but Sigma is {:?}",
                theta.shape(),
                self.sigma.shape()
            )));
        }
        Ok(())
    }

    /// `Θ^{-1}` and `log det Θ` of the symmetric part of `Θ`.
    pub fn inverse_logdet(&self, theta: &Matrix) -> Result<(Matrix, f64)> {
        self.check(theta)?;
        spd_inverse_logdet(theta).ok_or_else(|| Error::Domain("Theta is not positive definite".into()))
    }

    pub fn value(&self, theta: &Matrix) -> Result<f64> {
        let (_, logdet) = self.inverse_logdet(theta)?;
        Ok(self.sigma.component_mul(theta).sum() - logdet)
    }

    /// `Σ̂ − Θ^{-1}`.
    pub fn gradient(&self, theta: &Matrix) -> Result<Matrix> {
        let (inv, _) = self.inverse_logdet(theta)?;
        Ok(&self.sigma - inv)
    }

    /// `Θ^{-1} ⊗ Θ^{-1}` acting on `vec(Θ)`; only for `p ≤ 32`.
    pub fn hessian(&self, theta: &Matrix) -> Result<Matrix> {
        if self.p() > GLASSO_HESSIAN_MAX_P {
            return Err(Error::Unsupported(format!(
                "dense glasso Hessian is capped at p = {GLASSO_HESSIAN_MAX_P}"
            )));
        }
        let (inv, _) = self.inverse_logdet(theta)?;
        Ok(inv.kronecker(&inv))
    }
}
