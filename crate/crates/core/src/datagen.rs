//! Synthetic designs, targets and trial data.
//!
//! Random draws use ChaCha8 streams of the trial seed (see [`crate::rng`]):
//!
//! | stream | use |
//! |---|---|
//! | 0 | standard normals for the rows of X |
//! | 1 | response noise ε |
//! | 2 | covariate corruption W |
//! | 3 | Bernoulli uniforms for logistic responses |
//! | 4 | signs of β* |
//!
//! Normals are consumed in row-major order, so row `i` of X depends only on
//! the seed and on rows `0..i`.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{cholesky_factor, sym_eig, Matrix, Vector};
use crate::rng;

const STREAM_X: u64 = 0;
const STREAM_EPS: u64 = 1;
const STREAM_W: u64 = 2;
const STREAM_BERNOULLI: u64 = 3;
const STREAM_SIGNS: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum DesignFamily {
    /// Identity plus `θ` in the first `k` entries of row and column `k+1`.
    /// Violates ℓ1 incoherence once `kθ ≥ 1`.
    M1 { theta: f64, k: usize },
    /// Spiked identity `θ11ᵀ + (1 − θ)I`.
    M2 { theta: f64 },
    /// `σ_x² I`.
    Identity { sigma_x: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    #[serde(flatten)]
    pub family: DesignFamily,
    pub p: usize,
}

impl DesignSpec {
    pub fn new(family: DesignFamily, p: usize) -> Self {
        DesignSpec { family, p }
    }
}

/// `k = round(√p)`.
pub fn default_k(p: usize) -> usize {
    ((p as f64).sqrt().round() as usize).max(1)
}

/// The symmetric matrix `M1(θ)` without the positive-definiteness check of
/// [`make_design`]; its spectrum is `1 ± θ√k` and 1 for any `θ`.
pub fn m1_matrix(p: usize, k: usize, theta: f64) -> Result<Matrix> {
    if k == 0 || k >= p {
        return Err(Error::invalid(format!("M1 needs 1 <= k < p, got k = {k}, p = {p}")));
    }
    if !theta.is_finite() {
        return Err(Error::invalid("theta must be finite"));
    }
    let mut m = Matrix::identity(p, p);
    for j in 0..k {
        m[(k, j)] = theta;
        m[(j, k)] = theta;
    }
    Ok(m)
}

pub fn make_design(spec: &DesignSpec) -> Result<Matrix> {
    let p = spec.p;
    if p == 0 {
        return Err(Error::invalid("p must be positive"));
    }
    match spec.family {
        DesignFamily::M1 { theta, k } => {
            if k == 0 || k >= p {
                return Err(Error::invalid(format!("M1 needs 1 <= k < p, got k = {k}, p = {p}")));
            }
            if !(theta.abs() * (k as f64).sqrt() < 1.0) {
                return Err(Error::invalid(format!("M1 is not positive definite: |theta|*sqrt(k) = {}", theta.abs() * (k as f64).sqrt())));
            }
            m1_matrix(p, k, theta)
        }
        DesignFamily::M2 { theta } => {
            if !(0.0..1.0).contains(&theta) {
                return Err(Error::invalid(format!("M2 needs theta in [0, 1), got {theta}")));
            }
            Ok(Matrix::from_element(p, p, theta) + Matrix::identity(p, p) * (1.0 - theta))
        }
        DesignFamily::Identity { sigma_x } => {
            if !(sigma_x > 0.0 && sigma_x.is_finite()) {
                return Err(Error::invalid("sigma_x must be positive"));
            }
            Ok(Matrix::identity(p, p) * (sigma_x * sigma_x))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaPattern {
    /// First `k` entries `1/√k`.
    FlatPositive,
    /// First `k` entries `±1/√k` with fair coin signs.
    RandomSigns,
}

pub fn make_beta_star(p: usize, k: usize, pattern: BetaPattern, seed: u64) -> Result<Vector> {
    if k == 0 || k > p {
        return Err(Error::invalid(format!("need 1 <= k <= p, got k = {k}, p = {p}")));
    }
    let mag = 1.0 / (k as f64).sqrt();
    let mut beta = Vector::zeros(p);
    match pattern {
        BetaPattern::FlatPositive => beta.rows_mut(0, k).fill(mag),
        BetaPattern::RandomSigns => {
            let mut r = rng::stream(seed, STREAM_SIGNS);
            for j in 0..k {
                beta[j] = if r.random::<bool>() { mag } else { -mag };
            }
        }
    }
    Ok(beta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub p: usize,
    pub k: usize,
    pub n: usize,
    pub pattern: BetaPattern,
    pub sigma_eps: f64,
    /// Standard deviation of the additive covariate noise; 0 means clean.
    pub sigma_w: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Response {
    Linear,
    Logistic,
}

#[derive(Debug, Clone)]
pub struct TrialData {
    pub x: Matrix,
    /// Observed covariates `X + W`; equal to `x` when `σ_w = 0`.
    pub z: Matrix,
    pub y: Vector,
    pub beta_star: Vector,
}

impl TrialData {
    /// `Σ_w = σ_w² I`.
    pub fn sigma_w(p: usize, sigma_w: f64) -> Matrix {
        Matrix::identity(p, p) * (sigma_w * sigma_w)
    }
}

/// `n` rows i.i.d. `N(0, Σ)` via `Σ = LLᵀ`, drawing normals row by row.
pub fn sample_gaussian(cov: &Matrix, n: usize, rng: &mut rng::Rng) -> Result<Matrix> {
    let l = cholesky_factor(cov)?;
    let p = cov.nrows();
    let mut g = Matrix::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            g[(i, j)] = rng.sample(StandardNormal);
        }
    }
    Ok(g * l.transpose())
}

fn normals(n: usize, sd: f64, rng: &mut rng::Rng) -> Vector {
    Vector::from_fn(n, |_, _| sd * rng.sample::<f64, _>(StandardNormal))
}

pub fn sample_trial(design: &Matrix, trial: &TrialSpec, response: Response) -> Result<TrialData> {
    let p = trial.p;
    if design.shape() != (p, p) {
        return Err(Error::dims(format!("design is {:?} but p = {p}", design.shape())));
    }
    if trial.n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    if !(trial.sigma_eps >= 0.0 && trial.sigma_w >= 0.0) {
        return Err(Error::invalid("noise levels must be nonnegative"));
    }
    let beta_star = make_beta_star(p, trial.k, trial.pattern, trial.seed)?;
    let n = trial.n;
    let x = sample_gaussian(design, n, &mut rng::stream(trial.seed, STREAM_X))?;
    let eta = &x * &beta_star;
    let y = match response {
        Response::Linear => {
            if trial.sigma_eps > 0.0 {
                &eta + normals(n, trial.sigma_eps, &mut rng::stream(trial.seed, STREAM_EPS))
            } else {
                eta
            }
        }
        Response::Logistic => {
            let mut r = rng::stream(trial.seed, STREAM_BERNOULLI);
            eta.map(|t| {
                let prob = 1.0 / (1.0 + (-t).exp());
                if r.random::<f64>() < prob { 1.0 } else { 0.0 }
            })
        }
    };
    let z = if trial.sigma_w > 0.0 {
        let mut r = rng::stream(trial.seed, STREAM_W);
        let w = Matrix::from_row_iterator(n, p, (0..n * p).map(|_| trial.sigma_w * r.sample::<f64, _>(StandardNormal)));
        &x + w
    } else {
        x.clone()
    };
    Ok(TrialData { x, z, y, beta_star })
}

/// Tridiagonal precision with unit diagonal and `ρ_off` on the first
/// off-diagonals (a chain graph).
pub fn make_chain_precision(p: usize, rho_off: f64) -> Result<Matrix> {
    if p == 0 {
        return Err(Error::invalid("p must be positive"));
    }
    let mut m = Matrix::identity(p, p);
    for j in 0..p.saturating_sub(1) {
        m[(j, j + 1)] = rho_off;
        m[(j + 1, j)] = rho_off;
    }
    if rho_off.abs() >= 0.5 && sym_eig(&m)?.min() <= 0.0 {
        return Err(Error::invalid(format!("chain precision with rho_off = {rho_off} is not positive definite")));
    }
    Ok(m)
}

/// Off-diagonal support `(j, k)`, `j < k`, of a symmetric matrix.
pub fn edge_support(m: &Matrix, tol: f64) -> Vec<(usize, usize)> {
    let p = m.nrows();
    let mut out = Vec::new();
    for j in 0..p {
        for k in j + 1..p {
            if m[(j, k)].abs() > tol {
                out.push((j, k));
            }
        }
    }
    out
}
