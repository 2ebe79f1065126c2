//! Nonconvex-penalized graphical Lasso with a spectral side constraint:
//!
//! ```text
//! minimize  trace(Σ̂Θ) − log det Θ + Σ_{j≠k} ρ_λ(Θ_jk)
//! subject to  ε_pd·I ⪯ Θ,  |||Θ|||₂ ≤ κ
//! ```
//!
//! Solved by composite gradient descent in matrix space. The prox of the
//! off-diagonal ℓ1 term plus the spectral constraint has no closed form, so
//! it is computed by proximal Dykstra iterations between the two pieces,
//! each of which is cheap on its own.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::losses::GlassoLoss;
use crate::numerics::{is_symmetric, soft_threshold_scalar, sym_eig, symmetrize, Matrix, Vector};
use crate::regularizers::RegularizerSpec;
use crate::solver::SolveStatus;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kappa {
    /// `√(2/μ)`, infinite for ℓ1.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct GlassoConfig {
    pub kappa: Kappa,
    /// Eigenvalue floor keeping iterates strictly positive definite.
    pub eps_pd: f64,
    pub max_iters: usize,
    pub tol: f64,
    /// Iterations between stepsize refreshes from the current `λ_min(Θ)`.
    pub refresh_every: usize,
    pub record_trace: bool,
}

impl Default for GlassoConfig {
    fn default() -> Self {
        GlassoConfig {
            kappa: Kappa::Auto,
            eps_pd: 1e-6,
            max_iters: 20_000,
            tol: 1e-12,
            refresh_every: 25,
            record_trace: true,
        }
    }
}

impl GlassoConfig {
    pub fn resolve_kappa(&self, spec: &RegularizerSpec) -> Result<f64> {
        let kappa = match self.kappa {
            Kappa::Auto => {
                let mu = spec.mu();
                if mu > 0.0 { (2.0 / mu).sqrt() } else { f64::INFINITY }
            }
            Kappa::Fixed(k) => k,
        };
        if !(kappa > self.eps_pd && self.eps_pd > 0.0) {
            return Err(Error::invalid(format!("need kappa > eps_pd > 0, got kappa = {kappa}, eps_pd = {}", self.eps_pd)));
        }
        Ok(kappa)
    }
}

/// Off-diagonal edges `(j, k)` with `j < k`, sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EdgeSet {
    p: usize,
    edges: Vec<(usize, usize)>,
}

impl EdgeSet {
    pub fn new(p: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut out = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a == b {
                return Err(Error::invalid(format!("edge ({a}, {b}) is on the diagonal")));
            }
            if a >= p || b >= p {
                return Err(Error::invalid(format!("edge ({a}, {b}) out of range for p = {p}")));
            }
            out.push((a.min(b), a.max(b)));
        }
        out.sort_unstable();
        let len = out.len();
        out.dedup();
        if out.len() != len {
            return Err(Error::invalid("edge set contains duplicates"));
        }
        Ok(EdgeSet { p, edges: out })
    }

    pub fn from_matrix(m: &Matrix, tol: f64) -> Self {
        EdgeSet { p: m.nrows(), edges: crate::datagen::edge_support(m, tol) }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn contains(&self, j: usize, k: usize) -> bool {
        self.edges.binary_search(&(j.min(k), j.max(k))).is_ok()
    }

    /// Largest number of nonzeros in a row, counting the diagonal.
    pub fn max_degree(&self) -> usize {
        let mut deg = vec![1usize; self.p];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg.into_iter().max().unwrap_or(0)
    }

    /// Nonzeros of a symmetric matrix with this pattern, counting the diagonal.
    pub fn nnz(&self) -> usize {
        self.p + 2 * self.edges.len()
    }
}

/// Clamp the eigenvalues of (the symmetric part of) `Θ` into `[ε_pd, κ]`.
/// The nearest such matrix in Frobenius norm.
pub fn project_pd_spectral(theta: &Matrix, eps_pd: f64, kappa: f64) -> Result<Matrix> {
    if !(kappa >= eps_pd) {
        return Err(Error::invalid("kappa must be at least eps_pd"));
    }
    let eig = sym_eig(&symmetrize(theta))?;
    if eig.min() >= eps_pd && eig.max() <= kappa {
        return Ok(symmetrize(theta));
    }
    Ok(symmetrize(&eig.reconstruct_with(|v| v.clamp(eps_pd, kappa))))
}

/// `trace(Σ̂Θ) − log det Θ + Σ_{j≠k} ρ_λ(Θ_jk)`.
pub fn glasso_objective(loss: &GlassoLoss, spec: &RegularizerSpec, theta: &Matrix) -> Result<f64> {
    Ok(loss.value(theta)? + off_diagonal_penalty(spec, theta))
}

fn off_diagonal_penalty(spec: &RegularizerSpec, theta: &Matrix) -> f64 {
    let p = theta.nrows();
    let mut total = 0.0;
    for k in 0..p {
        for j in 0..p {
            if j != k {
                total += spec.rho(theta[(j, k)]);
            }
        }
    }
    total
}

fn smooth_gradient(loss: &GlassoLoss, spec: &RegularizerSpec, theta: &Matrix) -> Result<Matrix> {
    let mut g = loss.gradient(theta)?;
    let p = theta.nrows();
    for k in 0..p {
        for j in 0..p {
            if j != k {
                g[(j, k)] -= spec.q_prime(theta[(j, k)]);
            }
        }
    }
    Ok(symmetrize(&g))
}

fn soft_threshold_off_diagonal(m: &Matrix, tau: f64) -> Matrix {
    Matrix::from_fn(m.nrows(), m.ncols(), |j, k| {
        if j == k { m[(j, k)] } else { soft_threshold_scalar(m[(j, k)], tau) }
    })
}

/// Prox of `τΣ_{j≠k}|X_jk| + 1{ε_pd ⪯ X, |||X|||₂ ≤ κ}` at `v` by proximal
/// Dykstra. `duals` carries the two correction terms between calls; the
/// iteration keeps `x + p + q = v`, so a warm start only needs the duals.
struct DykstraProx {
    p_dual: Matrix,
    q_dual: Matrix,
}

const DYKSTRA_TOL: f64 = 1e-12;
const DYKSTRA_MAX_ITERS: usize = 20_000;

impl DykstraProx {
    fn new(p: usize) -> Self {
        DykstraProx { p_dual: Matrix::zeros(p, p), q_dual: Matrix::zeros(p, p) }
    }

    fn reset(&mut self) {
        self.p_dual.fill(0.0);
        self.q_dual.fill(0.0);
    }

    fn apply(&mut self, v: &Matrix, tau: f64, eps_pd: f64, kappa: f64) -> Result<Matrix> {
        let mut x = v - &self.p_dual - &self.q_dual;
        for _ in 0..DYKSTRA_MAX_ITERS {
            let y = soft_threshold_off_diagonal(&(&x + &self.p_dual), tau);
            self.p_dual = &x + &self.p_dual - &y;
            let next = project_pd_spectral(&(&y + &self.q_dual), eps_pd, kappa)?;
            self.q_dual = &y + &self.q_dual - &next;
            let gap = (&next - &y).amax();
            let moved = (&next - &x).amax();
            x = next;
            if gap < DYKSTRA_TOL && moved < DYKSTRA_TOL {
                break;
            }
        }
        Ok(x)
    }
}

#[derive(Debug, Clone)]
pub struct GlassoResult {
    pub theta: Matrix,
    pub objective_trace: Vec<f64>,
    pub status: SolveStatus,
    pub iterations: usize,
    /// `‖Θ − prox(Θ − ∇L̄(Θ)/η)‖_max`.
    pub kkt_residual: f64,
    pub eta: f64,
    pub kappa: f64,
}

fn local_eta(theta: &Matrix, mu: f64) -> Result<f64> {
    let lo = sym_eig(theta)?.min();
    Ok(1.1 / (lo * lo) + mu)
}

pub fn glasso_solve(sigma: &Matrix, spec: &RegularizerSpec, cfg: &GlassoConfig, init: &Matrix) -> Result<GlassoResult> {
    let loss = GlassoLoss::new(sigma.clone())?;
    let p = loss.p();
    if init.shape() != (p, p) {
        return Err(Error::dims(format!("init is {:?} but Sigma is {p}x{p}", init.shape())));
    }
    if !is_symmetric(init) {
        return Err(Error::invalid("init must be symmetric"));
    }
    if !(cfg.tol > 0.0) || cfg.max_iters == 0 || cfg.refresh_every == 0 {
        return Err(Error::invalid("need tol > 0, max_iters >= 1 and refresh_every >= 1"));
    }
    let kappa = cfg.resolve_kappa(spec)?;
    let eig = sym_eig(init)?;
    if eig.min() <= 0.0 || eig.max() > kappa * (1.0 + 1e-10) {
        return Err(Error::invalid(format!(
            "init spectrum [{:.4}, {:.4}] is outside (0, kappa = {kappa:.4}]",
            eig.min(),
            eig.max()
        )));
    }

    let mu = spec.mu();
    let mut theta = symmetrize(init);
    let mut eta = local_eta(&theta, mu)?;
    let mut phi = glasso_objective(&loss, spec, &theta)?;
    let mut trace = Vec::new();
    if cfg.record_trace {
        trace.push(phi);
    }
    let mut prox = DykstraProx::new(p);
    let mut status = SolveStatus::MaxIters;
    let mut iterations = 0;
    let failure = |reason: &str, iteration: usize, t: &Matrix| Error::NumericalFailure {
        reason: reason.into(),
        iteration,
        snapshot: t.as_slice().to_vec(),
    };

    for t in 0..cfg.max_iters {
        if t > 0 && t % cfg.refresh_every == 0 {
            eta = local_eta(&theta, mu)?;
        }
        let grad = smooth_gradient(&loss, spec, &theta).map_err(|_| failure("iterate left the PD cone", t, &theta))?;
        let mut accepted = None;
        for _ in 0..60 {
            let v = &theta - &grad / eta;
            let cand = prox.apply(&v, spec.lambda / eta, cfg.eps_pd, kappa)?;
            match glasso_objective(&loss, spec, &cand) {
                Ok(f) if f <= phi + 1e-12 * phi.abs().max(1.0) => {
                    accepted = Some((cand, f));
                    break;
                }
                _ => {
                    eta *= 2.0;
                    prox.reset();
                }
            }
        }
        let Some((next, f)) = accepted else {
            return Err(failure("no descent step found", t, &theta));
        };
        iterations = t + 1;
        let change = (f - phi).abs();
        let scale = phi.abs().max(1.0);
        let step = (&next - &theta).amax();
        theta = next;
        phi = f;
        if cfg.record_trace {
            trace.push(phi);
        }
        if change <= cfg.tol * scale && step <= cfg.tol {
            status = SolveStatus::Converged;
            break;
        }
    }

    let grad = smooth_gradient(&loss, spec, &theta)?;
    let mut check = DykstraProx::new(p);
    let fixed = check.apply(&(&theta - &grad / eta), spec.lambda / eta, cfg.eps_pd, kappa)?;
    let kkt_residual = (&theta - fixed).amax();
    Ok(GlassoResult { theta, objective_trace: trace, status, iterations, kkt_residual, eta, kappa })
}

/// `‖(Σ̂ − Θ⁻¹)_{S ∪ diag}‖_max`, zero exactly at the oracle estimator.
pub fn fixed_point_residual(sigma: &Matrix, theta: &Matrix, support: &EdgeSet) -> Result<f64> {
    let loss = GlassoLoss::new(sigma.clone())?;
    let g = loss.gradient(theta)?;
    let mut worst = (0..support.p()).map(|j| g[(j, j)].abs()).fold(0.0, f64::max);
    for &(j, k) in support.edges() {
        worst = worst.max(g[(j, k)].abs());
    }
    Ok(worst)
}

/// Unit terms `(t, u)` making up the basis matrix of one free coordinate:
/// `e_t e_uᵀ` for a diagonal entry, `e_j e_kᵀ + e_k e_jᵀ` for an edge.
fn basis_terms(coord: (usize, usize)) -> Vec<(usize, usize)> {
    let (j, k) = coord;
    if j == k { vec![(j, j)] } else { vec![(j, k), (k, j)] }
}

/// Minimizer of `trace(Σ̂Θ) − log det Θ` over `Θ ≻ 0` with
/// `supp(Θ) ⊆ S ∪ diag`, by damped Newton on the free coordinates.
pub fn glasso_oracle(sigma: &Matrix, support: &EdgeSet) -> Result<Matrix> {
    let loss = GlassoLoss::new(sigma.clone())?;
    let p = loss.p();
    if support.p() != p {
        return Err(Error::dims("edge set and Sigma disagree on p"));
    }
    for j in 0..p {
        if !(sigma[(j, j)] > 0.0) {
            return Err(Error::invalid("Sigma needs a positive diagonal"));
        }
    }
    let coords: Vec<(usize, usize)> = (0..p).map(|j| (j, j)).chain(support.edges().iter().copied()).collect();
    let terms: Vec<Vec<(usize, usize)>> = coords.iter().map(|&c| basis_terms(c)).collect();
    let m = coords.len();
    let assemble = |x: &Vector| {
        let mut th = Matrix::zeros(p, p);
        for (a, &(j, k)) in coords.iter().enumerate() {
            th[(j, k)] = x[a];
            th[(k, j)] = x[a];
        }
        th
    };
    let mut x = Vector::from_fn(m, |a, _| {
        let (j, k) = coords[a];
        if j == k { 1.0 / sigma[(j, j)] } else { 0.0 }
    });

    for iter in 0..100 {
        let theta = assemble(&x);
        let (w, _) = loss.inverse_logdet(&theta).map_err(|_| Error::NumericalFailure {
            reason: "oracle iterate left the PD cone".into(),
            iteration: iter,
            snapshot: theta.as_slice().to_vec(),
        })?;
        let resid = Matrix::from_fn(p, p, |j, k| sigma[(j, k)] - w[(j, k)]);
        let worst = coords.iter().map(|&(j, k)| resid[(j, k)].abs()).fold(0.0, f64::max);
        if worst <= 1e-12 {
            return Ok(theta);
        }
        let grad = Vector::from_fn(m, |a, _| terms[a].iter().map(|&(t, u)| resid[(u, t)]).sum());
        let mut hess = Matrix::zeros(m, m);
        for a in 0..m {
            for b in a..m {
                let mut h = 0.0;
                for &(t, u) in &terms[a] {
                    for &(v, s) in &terms[b] {
                        h += w[(u, v)] * w[(s, t)];
                    }
                }
                hess[(a, b)] = h;
                hess[(b, a)] = h;
            }
        }
        let step = crate::numerics::spd_solve(&hess, &grad).map_err(|e| Error::NumericalFailure {
            reason: format!("oracle Newton system: {e}"),
            iteration: iter,
            snapshot: theta.as_slice().to_vec(),
        })?;
        let f0 = loss.value(&theta)?;
        let slope = grad.dot(&step);
        if slope < 1e-14 {
            // inside the quadratic region objective values differ only by roundoff
            x -= step;
            continue;
        }
        let mut t = 1.0;
        loop {
            let cand = &x - &step * t;
            if let Ok(f) = loss.value(&assemble(&cand)) {
                if f <= f0 - 1e-4 * t * slope || t < 1e-10 {
                    x = cand;
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-16 {
                return Err(Error::NumericalFailure {
                    reason: "oracle line search failed".into(),
                    iteration: iter,
                    snapshot: theta.as_slice().to_vec(),
                });
            }
        }
    }
    Err(Error::NumericalFailure {
        reason: "oracle Newton did not converge".into(),
        iteration: 100,
        snapshot: assemble(&x).as_slice().to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GlassoErrorNorms {
    pub max: f64,
    pub frobenius: f64,
    pub spectral: f64,
    /// `supp(Θ̂ − Θ*) ⊆ S ∪ diag`.
    pub support_contained: bool,
    /// Nonzeros and largest row count of `S ∪ diag ∪ supp(Θ̂ − Θ*)`.
    pub s: usize,
    pub d: usize,
    /// `|||Δ|||₂ ≤ |||Δ|||_F ≤ √s‖Δ‖_max` and `|||Δ|||₂ ≤ d‖Δ‖_max`.
    pub chain_ok: bool,
}

pub fn glasso_error_norms(theta_hat: &Matrix, theta_star: &Matrix, support: &EdgeSet) -> Result<GlassoErrorNorms> {
    if theta_hat.shape() != theta_star.shape() {
        return Err(Error::dims("Theta matrices differ in shape"));
    }
    let p = theta_hat.nrows();
    let diff = symmetrize(&(theta_hat - theta_star));
    let max = diff.amax();
    let frobenius = diff.norm();
    let eig = sym_eig(&diff)?;
    let spectral = eig.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));

    let mut contained = true;
    let mut nnz = 0usize;
    let mut d = 0usize;
    for j in 0..p {
        let mut row = 0usize;
        for k in 0..p {
            let in_pattern = j == k || support.contains(j, k);
            if diff[(j, k)] != 0.0 && !in_pattern {
                contained = false;
            }
            if in_pattern || diff[(j, k)] != 0.0 {
                row += 1;
            }
        }
        nnz += row;
        d = d.max(row);
    }
    let slack = 1.0 + 1e-12;
    let chain_ok = spectral <= frobenius * slack
        && frobenius <= (nnz as f64).sqrt() * max * slack
        && spectral <= d as f64 * max * slack;
    Ok(GlassoErrorNorms { max, frobenius, spectral, support_contained: contained, s: nnz, d, chain_ok })
}
