//! Composite gradient descent for
//! `min_{‖β‖₁ ≤ R} L_n(β) + Σ_j ρ_λ(β_j)`.
//!
//! The penalty is split as `ρ_λ = λ|·| − q_λ` and `q_λ` is moved into the
//! smooth part, `L̄_n = L_n − Σ_j q_λ(β_j)`. Each step takes a gradient step on
//! `L̄_n`, soft-thresholds by `λ/η` and projects onto the ℓ1 ball. The
//! threshold-then-project composition is the exact prox of
//! `λ‖·‖₁ + 1{‖·‖₁ ≤ R}`, since projecting onto the ball is itself a soft
//! threshold and two soft thresholds compose additively.

use rayon::prelude::*;
use rand::Rng as _;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::losses::LossModel;
use crate::numerics::{project_l1_ball, soft_threshold, spd_solve, submatrix, subvector, sym_eig, Vector};
use crate::regularizers::RegularizerSpec;
use crate::rng;

/// Entries with magnitude at or below this count as zero when reading off a
/// support.
pub const SUPPORT_TOL: f64 = 1e-4;

/// Final iterates closer than this (ℓ2) share a multistart cluster.
pub const CLUSTER_RADIUS: f64 = 1e-3;

/// Stepsize reciprocal `η`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    /// `1.1·λ_max(∇²L_n) + μ`, with doubling if an objective increase is seen.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub step: StepSize,
    /// ℓ1 radius `R`; `f64::INFINITY` drops the side constraint.
    pub radius: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub record_trace: bool,
    /// When set, `‖β^t − reference‖₂` is recorded at every iterate.
    pub reference: Option<Vector>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            step: StepSize::Auto,
            radius: f64::INFINITY,
            max_iters: 10_000,
            tol: 1e-9,
            record_trace: true,
            reference: None,
        }
    }
}

impl SolverConfig {
    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.radius > 0.0) {
            return Err(Error::invalid("radius must be positive"));
        }
        if let StepSize::Fixed(eta) = self.step {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::invalid("fixed eta must be positive and finite"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SolveStatus {
    Converged,
    MaxIters,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub beta: Vector,
    /// `φ(β^t)` for t = 0, 1, …, when tracing is on.
    pub objective_trace: Vec<f64>,
    /// `‖β^t − reference‖₂`, when a reference was supplied.
    pub error_trace: Vec<f64>,
    pub status: SolveStatus,
    pub iterations: usize,
    pub kkt_residual: f64,
    /// The `η` in force at termination.
    pub eta: f64,
}

impl SolveResult {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

/// `φ(β) = L_n(β) + Σ_j ρ_λ(β_j)`.
pub fn objective(model: &LossModel, spec: &RegularizerSpec, beta: &Vector) -> Result<f64> {
    Ok(model.value(beta)? + spec.penalty_sum(beta))
}

/// `∇L̄_n(β) = ∇L_n(β) − q'_λ(β)`.
pub fn smooth_gradient(model: &LossModel, spec: &RegularizerSpec, beta: &Vector) -> Result<Vector> {
    Ok(model.gradient(beta)? - spec.q_prime_vec(beta))
}

/// One prox-gradient map `Π_{ℓ1(R)}∘S_{λ/η}(β − ∇L̄_n(β)/η)`.
pub fn prox_step(spec: &RegularizerSpec, beta: &Vector, grad: &Vector, eta: f64, radius: f64) -> Result<Vector> {
    let shrunk = soft_threshold(&(beta - grad / eta), spec.lambda / eta)?;
    project_l1_ball(&shrunk, radius)
}

/// `η = 1.1·λ̂_max + μ` where `λ̂_max` is a 30-step power-iteration estimate of
/// the loss curvature at `probe` (the `XᵀX/(4n)` bound for logistic loss).
pub fn auto_stepsize(model: &LossModel, spec: &RegularizerSpec, probe: &Vector) -> Result<f64> {
    let curvature = model.curvature_estimate(probe)?;
    Ok(1.1 * curvature + spec.mu())
}

fn check_vector_model(model: &LossModel) -> Result<()> {
    if matches!(model, LossModel::Glasso(_)) {
        return Err(Error::Unsupported(
            "the glasso loss is solved by glasso::glasso_solve".into(),
        ));
    }
    Ok(())
}

pub fn composite_gd(model: &LossModel, spec: &RegularizerSpec, cfg: &SolverConfig, init: &Vector) -> Result<SolveResult> {
    check_vector_model(model)?;
    run(model, spec, cfg, init, None)
}

/// Composite gradient descent in the coordinate subspace of `support`, with
/// every other coordinate pinned to zero. Starts from 0.
pub fn solve_restricted(model: &LossModel, spec: &RegularizerSpec, cfg: &SolverConfig, support: &[usize]) -> Result<SolveResult> {
    check_vector_model(model)?;
    let mask = support_mask(support, model.dim())?;
    run(model, spec, cfg, &Vector::zeros(model.dim()), Some(&mask))
}

fn support_mask(support: &[usize], p: usize) -> Result<Vec<bool>> {
    if support.is_empty() {
        return Err(Error::invalid("support must be nonempty"));
    }
    let mut mask = vec![false; p];
    for &j in support {
        if j >= p {
            return Err(Error::invalid(format!("support index {j} out of range for p = {p}")));
        }
        mask[j] = true;
    }
    Ok(mask)
}

fn apply_mask(v: &mut Vector, mask: Option<&[bool]>) {
    if let Some(mask) = mask {
        for (x, &keep) in v.iter_mut().zip(mask) {
            if !keep {
                *x = 0.0;
            }
        }
    }
}

fn run(
    model: &LossModel,
    spec: &RegularizerSpec,
    cfg: &SolverConfig,
    init: &Vector,
    mask: Option<&[bool]>,
) -> Result<SolveResult> {
    cfg.validate()?;
    let p = model.dim();
    if init.len() != p {
        return Err(Error::dims(format!("init has length {} but p = {p}", init.len())));
    }
    crate::numerics::ensure_finite(init.as_slice(), "init")?;
    if init.lp_norm(1) > cfg.radius * (1.0 + 1e-10) {
        return Err(Error::invalid("init lies outside the l1 ball"));
    }
    if let Some(r) = &cfg.reference {
        if r.len() != p {
            return Err(Error::dims("reference has the wrong length"));
        }
    }

    let mut beta = init.clone();
    apply_mask(&mut beta, mask);
    let (mut eta, backtrack) = match cfg.step {
        StepSize::Auto => (auto_stepsize(model, spec, &beta)?, true),
        StepSize::Fixed(e) => (e, false),
    };

    let failure = |reason: String, iteration: usize, snapshot: &Vector| Error::NumericalFailure {
        reason,
        iteration,
        snapshot: snapshot.as_slice().to_vec(),
    };

    let mut phi = objective(model, spec, &beta)?;
    let mut objective_trace = Vec::new();
    let mut error_trace = Vec::new();
    let record = |b: &Vector, f: f64, ot: &mut Vec<f64>, et: &mut Vec<f64>| {
        if cfg.record_trace {
            ot.push(f);
        }
        if let Some(r) = &cfg.reference {
            et.push((b - r).norm());
        }
    };
    record(&beta, phi, &mut objective_trace, &mut error_trace);

    let mut status = SolveStatus::MaxIters;
    let mut iterations = 0;
    let mut grad = smooth_gradient(model, spec, &beta)?;
    apply_mask(&mut grad, mask);
    for t in 0..cfg.max_iters {
        if !grad.iter().all(|g| g.is_finite()) {
            return Err(failure("non-finite gradient".into(), t, &beta));
        }
        let mut next;
        let mut phi_next;
        let mut attempts = 0;
        loop {
            next = prox_step(spec, &beta, &grad, eta, cfg.radius)?;
            phi_next = objective(model, spec, &next)?;
            if !phi_next.is_finite() {
                return Err(failure("non-finite objective".into(), t, &beta));
            }
            let increased = phi_next > phi + 1e-12 * phi.abs().max(1.0);
            if !(backtrack && increased) || attempts >= 60 {
                break;
            }
            eta *= 2.0;
            attempts += 1;
        }
        iterations = t + 1;
        let change = (phi_next - phi).abs();
        let scale = phi.abs().max(1.0);
        // objective stagnation alone leaves the iterate only √tol-accurate
        let step = (&next - &beta).amax();
        beta = next;
        phi = phi_next;
        record(&beta, phi, &mut objective_trace, &mut error_trace);
        grad = smooth_gradient(model, spec, &beta)?;
        apply_mask(&mut grad, mask);
        if change <= cfg.tol * scale && step <= cfg.tol {
            status = SolveStatus::Converged;
            break;
        }
    }

    let fixed = prox_step(spec, &beta, &grad, eta, cfg.radius)?;
    let kkt_residual = (&beta - fixed).amax();
    Ok(SolveResult { beta, objective_trace, error_trace, status, iterations, kkt_residual, eta })
}

/// Prox-gradient residual `‖β − Π∘S_{λ/η}(β − ∇L̄_n(β)/η)‖∞`.
pub fn kkt_residual(model: &LossModel, spec: &RegularizerSpec, beta: &Vector, eta: f64, radius: f64) -> Result<f64> {
    let grad = smooth_gradient(model, spec, beta)?;
    Ok((beta - prox_step(spec, beta, &grad, eta, radius)?).amax())
}

/// Unpenalized minimizer of `L_n` over vectors supported on `support`,
/// embedded in `R^p`.
pub fn oracle_estimator(model: &LossModel, support: &[usize]) -> Result<Vector> {
    check_vector_model(model)?;
    let p = model.dim();
    support_mask(support, p)?;
    let embed = |sub: &Vector| {
        let mut full = Vector::zeros(p);
        for (i, &j) in support.iter().enumerate() {
            full[j] = sub[i];
        }
        full
    };
    let check_curvature = |h: &crate::numerics::Matrix| -> Result<()> {
        let lo = sym_eig(h)?.min();
        if lo <= 0.0 {
            return Err(Error::DegenerateDesign(format!(
                "restricted Hessian has minimum eigenvalue {lo:.3e}"
            )));
        }
        Ok(())
    };

    if let Some((gamma, gamma_vec)) = model.quadratic_form() {
        let g_ss = submatrix(gamma, support, support);
        check_curvature(&g_ss)?;
        let sol = spd_solve(&g_ss, &subvector(gamma_vec, support))?;
        return Ok(embed(&sol));
    }

    // Logistic: damped Newton on the restricted coordinates.
    let mut sub = Vector::zeros(support.len());
    for iter in 0..200 {
        let full = embed(&sub);
        let g = subvector(&model.gradient(&full)?, support);
        if g.amax() <= 1e-10 {
            let h = submatrix(&model.hessian(&full)?, support, support);
            check_curvature(&h)?;
            return Ok(full);
        }
        let h = submatrix(&model.hessian(&full)?, support, support);
        let step = spd_solve(&h, &g)?;
        let f0 = model.value(&full)?;
        let slope = g.dot(&step);
        let mut t = 1.0;
        loop {
            let cand = &sub - &step * t;
            let f = model.value(&embed(&cand))?;
            if f <= f0 - 1e-4 * t * slope || t < 1e-12 {
                sub = cand;
                break;
            }
            t *= 0.5;
        }
        if !sub.iter().all(|v| v.is_finite()) {
            return Err(Error::NumericalFailure {
                reason: "oracle Newton iterate diverged".into(),
                iteration: iter,
                snapshot: embed(&sub).as_slice().to_vec(),
            });
        }
    }
    Err(Error::NumericalFailure {
        reason: "oracle Newton did not reach gradient norm 1e-10".into(),
        iteration: 200,
        snapshot: embed(&sub).as_slice().to_vec(),
    })
}

/// Indices with `|β_j| > tol`.
pub fn support_of(beta: &Vector, tol: f64) -> Vec<usize> {
    beta.iter().enumerate().filter(|(_, v)| v.abs() > tol).map(|(j, _)| j).collect()
}

/// A uniform draw from the ℓ1 ball of the given radius.
///
/// With `E_1, …, E_{p+1}` i.i.d. Exp(1), `(E_1, …, E_p)/ΣE` is uniform on the
/// solid simplex; independent random signs spread it over the cross-polytope.
pub fn uniform_l1_ball(p: usize, radius: f64, rng: &mut rng::Rng) -> Vector {
    let e: Vec<f64> = (0..=p).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = e.iter().sum();
    Vector::from_fn(p, |j, _| {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        sign * radius * e[j] / total
    })
}

#[derive(Debug, Clone)]
pub struct Cluster {
    /// Run indices, ascending.
    pub members: Vec<usize>,
    /// Final iterate of the first member.
    pub representative: Vector,
    pub support: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct MultistartResult {
    pub runs: Vec<SolveResult>,
    pub inits: Vec<Vector>,
    pub clusters: Vec<Cluster>,
    /// Largest ℓ2 distance between any two final iterates.
    pub max_pairwise_distance: f64,
}

impl MultistartResult {
    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }
}

/// Greedy clustering in index order: each point joins the first cluster
/// whose representative lies within `radius`.
pub fn cluster_points(points: &[Vector], radius: f64) -> Vec<Cluster> {
    let mut clusters: Vec<Cluster> = Vec::new();
    for (i, b) in points.iter().enumerate() {
        match clusters.iter_mut().find(|c| (&c.representative - b).norm() <= radius) {
            Some(c) => c.members.push(i),
            None => clusters.push(Cluster {
                members: vec![i],
                representative: b.clone(),
                support: support_of(b, SUPPORT_TOL),
            }),
        }
    }
    clusters
}

pub fn max_pairwise_distance(points: &[Vector]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            worst = worst.max((&points[i] - &points[j]).norm());
        }
    }
    worst
}

/// `m` runs of [`composite_gd`] from inits drawn uniformly in the ℓ1 ball of
/// radius `cfg.radius`. Run `i` draws its init from ChaCha stream `i` of
/// `seed`. Runs execute in parallel and are collected in index order.
pub fn multistart(model: &LossModel, spec: &RegularizerSpec, cfg: &SolverConfig, m: usize, seed: u64) -> Result<MultistartResult> {
    if m == 0 {
        return Err(Error::invalid("multistart needs at least one run"));
    }
    if !cfg.radius.is_finite() {
        return Err(Error::invalid("multistart draws inits from the l1 ball and needs a finite radius"));
    }
    let p = model.dim();
    let inits: Vec<Vector> = (0..m)
        .map(|i| uniform_l1_ball(p, cfg.radius, &mut rng::stream(seed, i as u64)))
        .collect();
    let runs = inits
        .par_iter()
        .map(|init| composite_gd(model, spec, cfg, init))
        .collect::<Result<Vec<_>>>()?;
    let finals: Vec<Vector> = runs.iter().map(|r| r.beta.clone()).collect();
    Ok(MultistartResult {
        clusters: cluster_points(&finals, CLUSTER_RADIUS),
        max_pairwise_distance: max_pairwise_distance(&finals),
        runs,
        inits,
    })
}
