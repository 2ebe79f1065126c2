//! Primal-dual witness certificate for support recovery.
//!
//! Given a target support `S`, solve the program restricted to `S`, extend a
//! subgradient `ẑ` to all coordinates through the zero-subgradient equation
//! `∇L_n(β̂) − q'_λ(β̂) + λẑ = 0`, and check strict dual feasibility
//! `‖ẑ_{S^c}‖∞ < 1`. When it holds with an interior solution, the restricted
//! solution is the unique stationary point of the full program.

use rand::seq::index;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::losses::{LossModel, DEFAULT_QUADRATURE_NODES};
use crate::numerics::{complement, general_inverse, linf_operator_norm, submatrix, subvector, sym_eig, Matrix, Vector};
use crate::regularizers::RegularizerSpec;
use crate::rng;
use crate::solver::{solve_restricted, SolveStatus, SolverConfig};

pub use crate::solver::SUPPORT_TOL;

/// Zero-subgradient residual allowed for a certified verdict.
pub const ZERO_SUBGRADIENT_TOL: f64 = 1e-6;

/// Objective tolerance the restricted solve is tightened to, so that the
/// zero-subgradient residual is resolved well below [`ZERO_SUBGRADIENT_TOL`].
pub const WITNESS_SOLVE_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    /// Interior, zero-subgradient holds on `S`, strictly dual feasible.
    CertifiedUnique,
    /// Strictly dual feasible, but the restricted solution touches the ℓ1
    /// ball or the subgradient equation is not met on `S`.
    DualFeasibleOnly,
    Failed,
}

/// The ℓ∞ error bounds built from the integrated Hessian `Q̂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EllInfDiagnostics {
    /// `‖Q̂_SS⁻¹ ∇L_n(β*)_S‖∞`; also the bound once the beta-min condition holds.
    pub t1: f64,
    /// `λ|||Q̂_SS⁻¹|||∞`.
    pub t2: f64,
    /// `t1 + t2`.
    pub bound: f64,
    /// `t1`.
    pub oracle_bound: f64,
    /// `β*_min − λ(γ + |||Q̂_SS⁻¹|||∞) − t1`; `None` without a finite γ.
    pub betamin_slack: Option<f64>,
    pub betamin_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PdwCertificate {
    /// 0-based, sorted.
    pub support: Vec<usize>,
    pub beta_hat: Vec<f64>,
    pub z_hat: Vec<f64>,
    /// `1 − ‖ẑ_{S^c}‖∞`; 1 when `S` is everything.
    pub dual_margin: f64,
    /// `‖β̂_S‖₁ < R`.
    pub interior: bool,
    /// `‖∇L_n(β̂) − q'_λ(β̂) + λẑ‖∞` over `S`.
    pub zero_subgradient_residual: f64,
    /// `|||H_{S^cS}H_SS⁻¹|||∞` with `H = ∇²L_n(β̂)`; `None` when `H_SS` is singular.
    pub incoherence: Option<f64>,
    /// Present when the true `β*` was supplied.
    pub ellinf: Option<EllInfDiagnostics>,
    pub betamin_slack: Option<f64>,
    pub restricted_status: SolveStatus,
    pub restricted_iterations: usize,
    pub verdict: Verdict,
}

impl PdwCertificate {
    pub fn beta_hat(&self) -> Vector {
        Vector::from_column_slice(&self.beta_hat)
    }

    pub fn z_hat(&self) -> Vector {
        Vector::from_column_slice(&self.z_hat)
    }

    pub fn certified(&self) -> bool {
        self.verdict == Verdict::CertifiedUnique
    }
}

fn normalize_support(support: &[usize], p: usize) -> Result<Vec<usize>> {
    let mut s = support.to_vec();
    s.sort_unstable();
    s.dedup();
    if s.is_empty() {
        return Err(Error::invalid("support must be nonempty"));
    }
    if let Some(&j) = s.last() {
        if j >= p {
            return Err(Error::invalid(format!("support index {j} out of range for p = {p}")));
        }
    }
    Ok(s)
}

/// Build the witness for target support `S`. The restricted solve uses
/// `cfg` with its tolerance tightened to [`WITNESS_SOLVE_TOL`]. When `truth`
/// is given, the ℓ∞ and beta-min diagnostics are filled in.
pub fn construct_witness(
    model: &LossModel,
    spec: &RegularizerSpec,
    cfg: &SolverConfig,
    support: &[usize],
    truth: Option<&Vector>,
) -> Result<PdwCertificate> {
    let p = model.dim();
    let s = normalize_support(support, p)?;
    let mut cfg = cfg.clone();
    cfg.tol = cfg.tol.min(WITNESS_SOLVE_TOL);
    cfg.record_trace = false;
    cfg.reference = None;
    let res = solve_restricted(model, spec, &cfg, &s)?;
    let beta = res.beta;

    let lam = spec.lambda;
    let grad = model.gradient(&beta)?;
    let qp = spec.q_prime_vec(&beta);
    let mut z = (&qp - &grad) / lam;

    let mut residual = 0.0f64;
    for &j in &s {
        if beta[j] != 0.0 {
            let sign = beta[j].signum();
            residual = residual.max((grad[j] - qp[j] + lam * sign).abs());
            z[j] = sign;
        } else {
            residual = residual.max(lam * (z[j].abs() - 1.0).max(0.0));
            z[j] = z[j].clamp(-1.0, 1.0);
        }
    }

    let off = complement(&s, p);
    let dual_margin = 1.0 - off.iter().map(|&j| z[j].abs()).fold(0.0, f64::max);
    let interior = subvector(&beta, &s).lp_norm(1) < cfg.radius;

    let incoherence = incoherence_parameter(&model.hessian(&beta)?, &s).ok();

    let ellinf = match truth {
        Some(t) => Some(ellinf_diagnostics(model, spec, t, &beta, &s)?),
        None => None,
    };

    let verdict = if dual_margin > 0.0 && interior && residual <= ZERO_SUBGRADIENT_TOL {
        Verdict::CertifiedUnique
    } else if dual_margin > 0.0 {
        Verdict::DualFeasibleOnly
    } else {
        Verdict::Failed
    };

    Ok(PdwCertificate {
        support: s,
        beta_hat: beta.as_slice().to_vec(),
        z_hat: z.as_slice().to_vec(),
        dual_margin,
        interior,
        zero_subgradient_residual: residual,
        incoherence,
        betamin_slack: ellinf.and_then(|e| e.betamin_slack),
        ellinf,
        restricted_status: res.status,
        restricted_iterations: res.iterations,
        verdict,
    })
}

/// `|||Γ_{S^cS} Γ_SS⁻¹|||∞`; 0 when `S` covers every index.
pub fn incoherence_parameter(gamma: &Matrix, support: &[usize]) -> Result<f64> {
    let p = gamma.nrows();
    let s = normalize_support(support, p)?;
    let off = complement(&s, p);
    if off.is_empty() {
        return Ok(0.0);
    }
    let inv = general_inverse(&submatrix(gamma, &s, &s))?;
    Ok(linf_operator_norm(&(submatrix(gamma, &off, &s) * inv)))
}

/// Restricted strong convexity constants `(α₁, α₂, τ₁, τ₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct RscParams {
    pub alpha1: f64,
    pub alpha2: f64,
    pub tau1: f64,
    pub tau2: f64,
}

impl RscParams {
    pub fn new(alpha1: f64, alpha2: f64, tau1: f64, tau2: f64) -> Result<Self> {
        if !(alpha1 > 0.0 && alpha2 > 0.0 && tau1 >= 0.0 && tau2 >= 0.0) {
            return Err(Error::invalid("RSC needs alpha > 0 and tau >= 0"));
        }
        Ok(RscParams { alpha1, alpha2, tau1, tau2 })
    }

    /// Population values for a Gaussian design: `α₁ = α₂ = ½λ_min(Σ_x)`, `τ = 1`.
    pub fn for_design(sigma_x: &Matrix) -> Result<Self> {
        let half = 0.5 * sym_eig(sigma_x)?.min();
        Self::new(half, half, 1.0, 1.0)
    }
}

/// Sample quantities the parameter gates depend on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelStats {
    pub n: usize,
    pub p: usize,
    /// `|S|`.
    pub k: usize,
    /// `‖∇L_n(β*)‖∞`.
    pub grad_inf_at_truth: f64,
    /// `‖β*‖₁`.
    pub beta_star_l1: f64,
}

impl ModelStats {
    pub fn compute(model: &LossModel, beta_star: &Vector, n: usize, support: &[usize]) -> Result<Self> {
        Ok(ModelStats {
            n,
            p: model.dim(),
            k: support.len(),
            grad_inf_at_truth: model.gradient(beta_star)?.amax(),
            beta_star_l1: beta_star.lp_norm(1),
        })
    }
}

/// One inequality `lhs ≤ rhs`; `slack = rhs − lhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Gate {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
}

impl Gate {
    fn le(lhs: f64, rhs: f64) -> Self {
        Gate { lhs, rhs, slack: rhs - lhs, pass: lhs <= rhs }
    }

    fn lt(lhs: f64, rhs: f64) -> Self {
        Gate { lhs, rhs, slack: rhs - lhs, pass: lhs < rhs }
    }
}

/// The sufficient conditions on `(λ, R, μ, n)` for the witness argument.
/// These are theoretical gates with loose constants; failing one does not
/// mean recovery fails.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GateReport {
    /// `2·max(‖∇L_n(β*)‖∞, α₂√(log k / n)) ≤ λ`.
    pub lambda_lower: Gate,
    /// `λ ≤ √((2α₁ − μ)α₂ / (56k))`.
    pub lambda_upper: Gate,
    /// `max(2‖β*‖₁, 60kλ/(2α₁ − μ)) ≤ R`.
    pub radius_lower: Gate,
    /// `R ≤ min(α₂/(8λ), (α₂/τ₂)√(n / log p))`.
    pub radius_upper: Gate,
    /// `μ < 2α₁`.
    pub mu_below_two_alpha1: Gate,
    /// `μ < α₁`, the stricter range in the uniqueness statement.
    pub mu_below_alpha1: Gate,
    /// `2τ₁k log p / (2α₁ − μ) ≤ n`.
    pub sample_size: Gate,
    /// `4Rτ₁ log p / (nλ) ≤ 1`, so an admissible dual slack δ exists.
    pub delta_window: Gate,
}

impl GateReport {
    pub fn all_pass(&self) -> bool {
        [
            self.lambda_lower,
            self.lambda_upper,
            self.radius_lower,
            self.radius_upper,
            self.mu_below_two_alpha1,
            self.mu_below_alpha1,
            self.sample_size,
            self.delta_window,
        ]
        .iter()
        .all(|g| g.pass)
    }
}

pub fn check_parameter_gates(spec: &RegularizerSpec, stats: &ModelStats, radius: f64, rsc: &RscParams) -> GateReport {
    let lam = spec.lambda;
    let mu = spec.mu();
    let n = stats.n as f64;
    let k = stats.k as f64;
    let log_p = (stats.p as f64).ln();
    let log_k = k.ln();
    let curv = 2.0 * rsc.alpha1 - mu;
    // With 2α₁ ≤ μ the bounds that divide by 2α₁ − μ are unattainable.
    let pos = |num: f64| if curv > 0.0 { num / curv } else { f64::INFINITY };
    let tau2_term = if rsc.tau2 > 0.0 { rsc.alpha2 / rsc.tau2 * (n / log_p).sqrt() } else { f64::INFINITY };
    GateReport {
        lambda_lower: Gate::le(2.0 * stats.grad_inf_at_truth.max(rsc.alpha2 * (log_k / n).sqrt()), lam),
        lambda_upper: Gate::le(lam, (curv.max(0.0) * rsc.alpha2 / (56.0 * k)).sqrt()),
        radius_lower: Gate::le((2.0 * stats.beta_star_l1).max(pos(60.0 * k * lam)), radius),
        radius_upper: Gate::le(radius, (rsc.alpha2 / (8.0 * lam)).min(tau2_term)),
        mu_below_two_alpha1: Gate::lt(mu, 2.0 * rsc.alpha1),
        mu_below_alpha1: Gate::lt(mu, rsc.alpha1),
        sample_size: Gate::le(pos(2.0 * rsc.tau1 * k * log_p), n),
        delta_window: Gate::le(4.0 * radius * rsc.tau1 * log_p / (n * lam), 1.0),
    }
}

/// ℓ∞ error bounds with `Q̂` integrated along `β* → β̂` (33 Simpson nodes).
pub fn ellinf_diagnostics(
    model: &LossModel,
    spec: &RegularizerSpec,
    beta_star: &Vector,
    beta_hat: &Vector,
    support: &[usize],
) -> Result<EllInfDiagnostics> {
    let s = normalize_support(support, model.dim())?;
    let q = model.integrated_hessian(beta_star, beta_hat, DEFAULT_QUADRATURE_NODES)?;
    let inv = general_inverse(&submatrix(&q, &s, &s))?;
    let grad_s = subvector(&model.gradient(beta_star)?, &s);
    let t1 = (&inv * grad_s).amax();
    let inv_norm = linf_operator_norm(&inv);
    let t2 = spec.lambda * inv_norm;
    let beta_min = s.iter().map(|&j| beta_star[j].abs()).fold(f64::INFINITY, f64::min);
    let betamin_slack = spec
        .amenability()
        .gamma
        .map(|gamma| beta_min - spec.lambda * (gamma + inv_norm) - t1);
    Ok(EllInfDiagnostics {
        t1,
        t2,
        bound: t1 + t2,
        oracle_bound: t1,
        betamin_slack,
        betamin_ok: betamin_slack.is_some_and(|v| v >= 0.0),
    })
}

/// `{j : |β̂_j| > τ} = supp(β*)` and the signs agree on `supp(β*)`.
pub fn signed_support_match(beta_hat: &Vector, beta_star: &Vector, tau: f64) -> Result<bool> {
    if !(tau > 0.0) {
        return Err(Error::invalid("support threshold must be positive"));
    }
    if beta_hat.len() != beta_star.len() {
        return Err(Error::dims("beta_hat and beta_star differ in length"));
    }
    Ok(beta_hat.iter().zip(beta_star.iter()).all(|(&h, &s)| {
        if s != 0.0 {
            h.abs() > tau && h.signum() == s.signum()
        } else {
            h.abs() <= tau
        }
    }))
}

/// Empirical fit of the local RSC lower envelope
/// `⟨∇L(β*+Δ) − ∇L(β*), Δ⟩ ≥ α₁‖Δ‖₂² − τ₁(log p / n)‖Δ‖₁²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RscFit {
    pub alpha1: f64,
    pub tau1: f64,
}

/// Sample `trials` perturbations `Δ` with `‖Δ‖₂ ∈ (0, 1]` at random sparsity,
/// fit `(α, τ)` by least squares, clip `τ ≥ 0`, then lower `α` to the
/// envelope so the inequality holds at every sample. `n` is the sample size
/// entering `log p / n`.
pub fn rsc_probe(model: &LossModel, beta_star: &Vector, n: usize, trials: usize, seed: u64) -> Result<RscFit> {
    if trials < 10 {
        return Err(Error::invalid("rsc_probe needs at least 10 trials"));
    }
    if matches!(model, LossModel::Glasso(_)) {
        return Err(Error::Unsupported("rsc_probe works on vector losses".into()));
    }
    let p = model.dim();
    if beta_star.len() != p {
        return Err(Error::dims("beta_star has the wrong length"));
    }
    let scale = (p as f64).ln() / n as f64;
    let g0 = model.gradient(beta_star)?;
    let mut rows = Vec::with_capacity(trials);
    for t in 0..trials {
        let mut r = rng::stream(seed, t as u64);
        let s = r.random_range(1..=p);
        let mut delta = Vector::zeros(p);
        for j in index::sample(&mut r, p, s) {
            delta[j] = r.sample(StandardNormal);
        }
        let norm = delta.norm();
        if norm == 0.0 {
            continue;
        }
        let radius: f64 = r.random_range(0.05..=1.0);
        delta *= radius / norm;
        let y = (model.gradient(&(beta_star + &delta))? - &g0).dot(&delta);
        rows.push((delta.norm_squared(), scale * delta.lp_norm(1).powi(2), y));
    }
    // y ≈ α·a − τ·b
    let (mut saa, mut sab, mut sbb, mut say, mut sby) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(a, b, y) in &rows {
        saa += a * a;
        sab += a * b;
        sbb += b * b;
        say += a * y;
        sby += b * y;
    }
    let det = saa * sbb - sab * sab;
    let mut tau = if det.abs() > 1e-300 { (say * sab - saa * sby) / det } else { 0.0 };
    if !(tau > 0.0) {
        tau = 0.0;
    }
    let alpha = rows
        .iter()
        .map(|&(a, b, y)| (y + tau * b) / a)
        .fold(f64::INFINITY, f64::min)
        .max(0.0);
    Ok(RscFit { alpha1: alpha, tau1: tau })
}
