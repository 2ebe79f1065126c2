//! Declarative Monte Carlo studies with deterministic CSV output.
//!
//! A study is a grid over `(p, n, regularizer)` with a number of trials per
//! cell. Trial data depend only on `(seed, p, n, trial)`, so every
//! regularizer in a cell sees the same draws. Work is spread over the rayon
//! pool and reduced in grid order, which makes the CSV independent of the
//! thread count. Wall time goes to the JSON summary only.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{
    default_k, make_chain_precision, make_design, sample_gaussian, sample_trial, BetaPattern, DesignFamily, DesignSpec,
    Response, TrialData, TrialSpec,
};
use crate::error::{Error, Result};
use crate::glasso::{fixed_point_residual, glasso_error_norms, glasso_oracle, glasso_solve, EdgeSet, GlassoConfig, Kappa};
use crate::io::format_f64;
use crate::losses::LossModel;
use crate::numerics::{spd_inverse, symmetrize, Matrix, Vector};
use crate::pdw::signed_support_match;
use crate::regularizers::{Penalty, RegularizerSpec};
use crate::rng::mix;
use crate::solver::{composite_gd, multistart, SolverConfig, StepSize, SUPPORT_TOL};

/// Version of the CSV column layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Study {
    PhaseTransition,
    ErrorCurves,
    Multistart,
    #[serde(rename = "glasso")]
    GlassoStudy,
}

impl Study {
    pub fn name(&self) -> &'static str {
        match self {
            Study::PhaseTransition => "phase-transition",
            Study::ErrorCurves => "error-curves",
            Study::Multistart => "multistart",
            Study::GlassoStudy => "glasso",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum LambdaRule {
    /// `λ = √(log p / n)`.
    SqrtLogPOverN,
    /// `λ = c·√(log p / n)`.
    ScaledSqrtLogPOverN { c: f64 },
    Fixed { value: f64 },
}

impl LambdaRule {
    pub fn lambda(&self, p: usize, n: usize) -> f64 {
        let base = ((p as f64).ln() / n as f64).sqrt();
        match *self {
            LambdaRule::SqrtLogPOverN => base,
            LambdaRule::ScaledSqrtLogPOverN { c } => c * base,
            LambdaRule::Fixed { value } => value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum RadiusRule {
    /// `R = 1.1‖β*‖₁`.
    OnePointOneL1,
    Fixed { value: f64 },
    Unconstrained,
}

impl RadiusRule {
    pub fn radius(&self, beta_star: &Vector) -> f64 {
        match *self {
            RadiusRule::OnePointOneL1 => 1.1 * beta_star.lp_norm(1),
            RadiusRule::Fixed { value } => value,
            RadiusRule::Unconstrained => f64::INFINITY,
        }
    }
}

/// Sample sizes, either literal or rescaled by the sparsity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NGrid {
    Samples { values: Vec<usize> },
    /// `n = round(c·k·log p)`.
    KLogP { values: Vec<f64> },
    /// `n = round(c·k³·log p)`.
    K3LogP { values: Vec<f64> },
}

impl NGrid {
    /// `(n, c)` pairs for a given `(p, k)`; `c` is `None` for literal sizes.
    pub fn cells(&self, p: usize, k: usize) -> Vec<(usize, Option<f64>)> {
        let log_p = (p as f64).ln();
        let kf = k as f64;
        match self {
            NGrid::Samples { values } => values.iter().map(|&n| (n, None)).collect(),
            NGrid::KLogP { values } => values.iter().map(|&c| (((c * kf * log_p).round() as usize).max(1), Some(c))).collect(),
            NGrid::K3LogP { values } => values
                .iter()
                .map(|&c| (((c * kf.powi(3) * log_p).round() as usize).max(1), Some(c)))
                .collect(),
        }
    }

    fn is_empty(&self) -> bool {
        match self {
            NGrid::Samples { values } => values.is_empty(),
            NGrid::KLogP { values } | NGrid::K3LogP { values } => values.is_empty(),
        }
    }
}

/// Covariance of the covariates, possibly depending on `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DesignRule {
    /// `M1(c/k)`.
    M1 { theta_times_k: f64 },
    M2 { theta: f64 },
    Identity { sigma_x: f64 },
}

impl DesignRule {
    pub fn spec(&self, p: usize, k: usize) -> DesignSpec {
        let family = match *self {
            DesignRule::M1 { theta_times_k } => DesignFamily::M1 { theta: theta_times_k / k as f64, k },
            DesignRule::M2 { theta } => DesignFamily::M2 { theta },
            DesignRule::Identity { sigma_x } => DesignFamily::Identity { sigma_x },
        };
        DesignSpec::new(family, p)
    }

    /// The parameter reported in the `theta` column (σ_x for identity designs).
    pub fn parameter(&self, k: usize) -> f64 {
        match *self {
            DesignRule::M1 { theta_times_k } => theta_times_k / k as f64,
            DesignRule::M2 { theta } => theta,
            DesignRule::Identity { sigma_x } => sigma_x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { max_iters: 10_000, tol: 1e-9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlassoSettings {
    pub rho_off: f64,
    /// `None` for `√(2/μ)`.
    #[serde(default)]
    pub kappa: Option<f64>,
    pub eps_pd: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for GlassoSettings {
    fn default() -> Self {
        GlassoSettings { rho_off: 0.4, kappa: None, eps_pd: 1e-6, max_iters: 20_000, tol: 1e-12 }
    }
}

fn default_runs() -> usize {
    15
}

fn default_pattern() -> BetaPattern {
    BetaPattern::FlatPositive
}

fn default_response() -> Response {
    Response::Linear
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub study: Study,
    pub p_grid: Vec<usize>,
    pub n_grid: NGrid,
    pub trials: usize,
    /// Penalty shapes; `λ` comes from `lambda_rule`, shared across them.
    pub regularizers: Vec<Penalty>,
    pub design: DesignRule,
    /// Sparsity; `None` for `round(√p)`.
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default = "default_pattern")]
    pub beta_pattern: BetaPattern,
    #[serde(default = "default_response")]
    pub response: Response,
    #[serde(default)]
    pub sigma_eps: f64,
    #[serde(default)]
    pub sigma_w: f64,
    pub lambda_rule: LambdaRule,
    pub radius_rule: RadiusRule,
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverSettings,
    /// Inits per multistart trial.
    #[serde(default = "default_runs")]
    pub multistart_runs: usize,
    #[serde(default)]
    pub glasso: GlassoSettings,
}

fn scad() -> Penalty {
    Penalty::Scad { a: 2.5 }
}

fn mcp() -> Penalty {
    Penalty::Mcp { b: 1.5 }
}

impl ExperimentConfig {
    /// Support recovery on the non-incoherent design with corrupted
    /// covariates, `p = 64`, `n/(k log p) ∈ {2, 4, …, 14}`, 50 trials.
    pub fn phase_transition_desk() -> Self {
        ExperimentConfig {
            study: Study::PhaseTransition,
            p_grid: vec![64],
            n_grid: NGrid::KLogP { values: vec![2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0] },
            trials: 50,
            regularizers: vec![Penalty::L1, scad(), mcp(), Penalty::Lsp],
            design: DesignRule::M1 { theta_times_k: 2.5 },
            k: None,
            beta_pattern: BetaPattern::FlatPositive,
            response: Response::Linear,
            sigma_eps: 0.1,
            sigma_w: 0.2,
            lambda_rule: LambdaRule::SqrtLogPOverN,
            radius_rule: RadiusRule::OnePointOneL1,
            seed: 2015,
            solver: SolverSettings::default(),
            multistart_runs: default_runs(),
            glasso: GlassoSettings::default(),
        }
    }

    /// The same study at `p ∈ {128, 256, 512}`.
    pub fn phase_transition_full() -> Self {
        ExperimentConfig { p_grid: vec![128, 256, 512], ..Self::phase_transition_desk() }
    }

    pub fn error_curves_desk() -> Self {
        ExperimentConfig { study: Study::ErrorCurves, ..Self::phase_transition_desk() }
    }

    /// Fifteen random inits on the spiked design, `p = 128`, `n ≈ 20k log p`.
    pub fn multistart_spiked(theta: f64, regularizers: Vec<Penalty>) -> Self {
        ExperimentConfig {
            study: Study::Multistart,
            p_grid: vec![128],
            n_grid: NGrid::KLogP { values: vec![20.0] },
            trials: 1,
            regularizers,
            design: DesignRule::M2 { theta },
            k: None,
            beta_pattern: BetaPattern::RandomSigns,
            response: Response::Linear,
            sigma_eps: 0.1,
            sigma_w: 0.0,
            lambda_rule: LambdaRule::SqrtLogPOverN,
            radius_rule: RadiusRule::OnePointOneL1,
            seed: 0,
            solver: SolverSettings { max_iters: 20_000, tol: 1e-12 },
            multistart_runs: default_runs(),
            glasso: GlassoSettings::default(),
        }
    }

    /// Fifteen random inits for logistic regression with `x ~ N(0, σ_x² I)`,
    /// `n ≈ c·k³ log p`.
    pub fn multistart_logistic(sigma_x: f64, p: usize, c: f64, regularizers: Vec<Penalty>) -> Self {
        ExperimentConfig {
            p_grid: vec![p],
            n_grid: NGrid::K3LogP { values: vec![c] },
            design: DesignRule::Identity { sigma_x },
            response: Response::Logistic,
            sigma_eps: 0.0,
            ..Self::multistart_spiked(0.0, regularizers)
        }
    }

    /// Chain-graph precision, `p = 32`, `n = 4000`, MCP, 25 trials.
    pub fn glasso_desk() -> Self {
        ExperimentConfig {
            study: Study::GlassoStudy,
            p_grid: vec![32],
            n_grid: NGrid::Samples { values: vec![4000] },
            trials: 25,
            regularizers: vec![mcp()],
            design: DesignRule::Identity { sigma_x: 1.0 },
            k: None,
            beta_pattern: BetaPattern::FlatPositive,
            response: Response::Linear,
            sigma_eps: 0.0,
            sigma_w: 0.0,
            lambda_rule: LambdaRule::ScaledSqrtLogPOverN { c: 4.0 },
            radius_rule: RadiusRule::Unconstrained,
            seed: 4,
            solver: SolverSettings::default(),
            multistart_runs: default_runs(),
            glasso: GlassoSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p_grid.is_empty() || self.n_grid.is_empty() || self.regularizers.is_empty() {
            return Err(Error::invalid("p_grid, n_grid and regularizers must be nonempty"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if self.study == Study::Multistart && self.multistart_runs == 0 {
            return Err(Error::invalid("multistart_runs must be at least 1"));
        }
        for pen in &self.regularizers {
            pen.validate()?;
        }
        Ok(())
    }

    fn k_for(&self, p: usize) -> usize {
        self.k.unwrap_or_else(|| default_k(p))
    }

    fn solver_config(&self, radius: f64) -> SolverConfig {
        SolverConfig {
            step: StepSize::Auto,
            radius,
            max_iters: self.solver.max_iters,
            tol: self.solver.tol,
            record_trace: false,
            reference: None,
        }
    }

    /// Grid cells `(p, k, n, c)` in output order.
    fn grid(&self) -> Vec<(usize, usize, usize, Option<f64>)> {
        let mut out = Vec::new();
        for &p in &self.p_grid {
            let k = self.k_for(p);
            for (n, c) in self.n_grid.cells(p, k) {
                out.push((p, k, n, c));
            }
        }
        out
    }
}

/// One CSV record. Fields that do not apply to a study are left empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub study: String,
    pub p: usize,
    pub k: usize,
    pub n: usize,
    /// `n/(k log p)` or `n/(k³ log p)` when the grid is rescaled.
    pub n_rescaled: Option<f64>,
    pub regularizer: String,
    pub lambda: f64,
    pub radius: Option<f64>,
    pub theta: f64,
    pub trials: usize,
    pub success_rate: f64,
    pub median_linf_error: Option<f64>,
    pub median_l2_error: Option<f64>,
    pub cluster_count: Option<usize>,
    pub mean_iterations: Option<f64>,
    pub failures: usize,
    pub median_spectral_error: Option<f64>,
    pub chain_ok_rate: Option<f64>,
    pub max_fixed_point_residual: Option<f64>,
    pub median_oracle_distance: Option<f64>,
}

pub const CSV_COLUMNS: [&str; 20] = [
    "study",
    "p",
    "k",
    "n",
    "n_rescaled",
    "regularizer",
    "lambda",
    "radius",
    "theta",
    "trials",
    "success_rate",
    "median_linf_error",
    "median_l2_error",
    "cluster_count",
    "mean_iterations",
    "failures",
    "median_spectral_error",
    "chain_ok_rate",
    "max_fixed_point_residual",
    "median_oracle_distance",
];

fn opt(v: Option<f64>) -> String {
    v.map(format_f64).unwrap_or_default()
}

impl ExperimentRow {
    pub fn to_record(&self) -> Vec<String> {
        vec![
            self.study.clone(),
            self.p.to_string(),
            self.k.to_string(),
            self.n.to_string(),
            opt(self.n_rescaled),
            self.regularizer.clone(),
            format_f64(self.lambda),
            opt(self.radius),
            format_f64(self.theta),
            self.trials.to_string(),
            format_f64(self.success_rate),
            opt(self.median_linf_error),
            opt(self.median_l2_error),
            self.cluster_count.map(|c| c.to_string()).unwrap_or_default(),
            opt(self.mean_iterations),
            self.failures.to_string(),
            opt(self.median_spectral_error),
            opt(self.chain_ok_rate),
            opt(self.max_fixed_point_residual),
            opt(self.median_oracle_distance),
        ]
    }
}

/// One recorded iterate error of a multistart run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub p: usize,
    pub n: usize,
    pub regularizer: String,
    pub trial: usize,
    pub run: usize,
    pub iteration: usize,
    /// `log ‖β^t − β*‖₂`.
    pub log_l2_error: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub rows: Vec<ExperimentRow>,
    pub traces: Vec<TraceRow>,
    pub wall_time_seconds: f64,
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 { values[m] } else { 0.5 * (values[m - 1] + values[m]) })
}

fn trial_seed(seed: u64, p: usize, n: usize, trial: usize) -> u64 {
    mix(mix(mix(seed, p as u64), n as u64), trial as u64)
}

fn build_trial(cfg: &ExperimentConfig, p: usize, k: usize, n: usize, trial: usize) -> Result<(TrialData, LossModel)> {
    let design = make_design(&cfg.design.spec(p, k))?;
    let spec = TrialSpec {
        p,
        k,
        n,
        pattern: cfg.beta_pattern,
        sigma_eps: cfg.sigma_eps,
        sigma_w: cfg.sigma_w,
        seed: trial_seed(cfg.seed, p, n, trial),
    };
    let data = sample_trial(&design, &spec, cfg.response)?;
    let model = match cfg.response {
        Response::Linear => LossModel::corrupted(&data.z, &data.y, &TrialData::sigma_w(p, cfg.sigma_w))?,
        Response::Logistic => LossModel::logistic(data.z.clone(), data.y.clone())?,
    };
    Ok((data, model))
}

#[derive(Debug, Clone, Copy)]
struct SolveOutcome {
    success: bool,
    linf: f64,
    l2: f64,
    iterations: usize,
}

fn single_solve(cfg: &ExperimentConfig, pen: Penalty, data: &TrialData, model: &LossModel, lambda: f64) -> Result<SolveOutcome> {
    let spec = RegularizerSpec::new(pen, lambda)?;
    let radius = cfg.radius_rule.radius(&data.beta_star);
    let res = composite_gd(model, &spec, &cfg.solver_config(radius), &Vector::zeros(data.beta_star.len()))?;
    let err = &res.beta - &data.beta_star;
    Ok(SolveOutcome {
        success: signed_support_match(&res.beta, &data.beta_star, SUPPORT_TOL)?,
        linf: err.amax(),
        l2: err.norm(),
        iterations: res.iterations,
    })
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let start = Instant::now();
    let out = f()?;
    Ok((out, start.elapsed().as_secs_f64()))
}

fn base_row(cfg: &ExperimentConfig, p: usize, k: usize, n: usize, c: Option<f64>, pen: &Penalty, lambda: f64) -> ExperimentRow {
    ExperimentRow {
        study: cfg.study.name().to_string(),
        p,
        k,
        n,
        n_rescaled: c,
        regularizer: pen.name().to_string(),
        lambda,
        radius: None,
        theta: cfg.design.parameter(k),
        trials: cfg.trials,
        success_rate: 0.0,
        median_linf_error: None,
        median_l2_error: None,
        cluster_count: None,
        mean_iterations: None,
        failures: 0,
        median_spectral_error: None,
        chain_ok_rate: None,
        max_fixed_point_residual: None,
        median_oracle_distance: None,
    }
}

fn radius_column(cfg: &ExperimentConfig) -> Option<f64> {
    match cfg.radius_rule {
        RadiusRule::Fixed { value } => Some(value),
        // depends on β*, which is fixed per (p, k) for flat targets only
        _ => None,
    }
}

/// Single-start solves from zero; success is the signed-support match.
fn run_support_study(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let (rows, wall) = timed(|| {
        let grid = cfg.grid();
        let tasks: Vec<(usize, usize)> = (0..grid.len()).flat_map(|c| (0..cfg.trials).map(move |t| (c, t))).collect();
        // per task: one outcome per regularizer
        let outcomes: Vec<Vec<Option<SolveOutcome>>> = tasks
            .par_iter()
            .map(|&(cell, trial)| {
                let (p, k, n, _) = grid[cell];
                let lambda = cfg.lambda_rule.lambda(p, n);
                match build_trial(cfg, p, k, n, trial) {
                    Ok((data, model)) => cfg
                        .regularizers
                        .iter()
                        .map(|&pen| single_solve(cfg, pen, &data, &model, lambda).ok())
                        .collect(),
                    Err(_) => vec![None; cfg.regularizers.len()],
                }
            })
            .collect();

        let mut rows = Vec::new();
        for (cell, &(p, k, n, c)) in grid.iter().enumerate() {
            let lambda = cfg.lambda_rule.lambda(p, n);
            let cell_out = &outcomes[cell * cfg.trials..(cell + 1) * cfg.trials];
            for (r, pen) in cfg.regularizers.iter().enumerate() {
                let ok: Vec<SolveOutcome> = cell_out.iter().filter_map(|o| o[r]).collect();
                let mut row = base_row(cfg, p, k, n, c, pen, lambda);
                row.radius = radius_column(cfg);
                row.success_rate = ok.iter().filter(|o| o.success).count() as f64 / cfg.trials as f64;
                row.median_linf_error = median(&mut ok.iter().map(|o| o.linf).collect::<Vec<_>>());
                row.median_l2_error = median(&mut ok.iter().map(|o| o.l2).collect::<Vec<_>>());
                row.mean_iterations = (!ok.is_empty())
                    .then(|| ok.iter().map(|o| o.iterations as f64).sum::<f64>() / ok.len() as f64);
                row.failures = cfg.trials - ok.len();
                rows.push(row);
            }
        }
        Ok(rows)
    })?;
    Ok(ExperimentOutput { rows, traces: Vec::new(), wall_time_seconds: wall })
}

pub fn run_phase_transition(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    run_support_study(cfg)
}

pub fn run_error_curves(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    run_support_study(cfg)
}

/// Multistart per cell and regularizer. `cluster_count` is the largest
/// count over trials; `success_rate` is the fraction of all runs whose final
/// iterate has the correct signed support.
pub fn run_multistart(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let ((rows, traces), wall) = timed(|| {
        let grid = cfg.grid();
        let mut rows = Vec::new();
        let mut traces = Vec::new();
        for &(p, k, n, c) in &grid {
            let lambda = cfg.lambda_rule.lambda(p, n);
            let trials: Vec<(TrialData, LossModel)> =
                (0..cfg.trials).map(|t| build_trial(cfg, p, k, n, t)).collect::<Result<_>>()?;
            for pen in &cfg.regularizers {
                let spec = RegularizerSpec::new(*pen, lambda)?;
                let mut row = base_row(cfg, p, k, n, c, pen, lambda);
                row.radius = radius_column(cfg);
                let mut clusters = 0usize;
                let mut successes = 0usize;
                let mut linf = Vec::new();
                let mut l2 = Vec::new();
                let mut iters = Vec::new();
                for (t, (data, model)) in trials.iter().enumerate() {
                    let mut scfg = cfg.solver_config(cfg.radius_rule.radius(&data.beta_star));
                    scfg.reference = Some(data.beta_star.clone());
                    let ms = match multistart(model, &spec, &scfg, cfg.multistart_runs, trial_seed(cfg.seed, p, n, t)) {
                        Ok(ms) => ms,
                        Err(_) => {
                            row.failures += 1;
                            continue;
                        }
                    };
                    clusters = clusters.max(ms.cluster_count());
                    for (run, res) in ms.runs.iter().enumerate() {
                        if signed_support_match(&res.beta, &data.beta_star, SUPPORT_TOL)? {
                            successes += 1;
                        }
                        let err = &res.beta - &data.beta_star;
                        linf.push(err.amax());
                        l2.push(err.norm());
                        iters.push(res.iterations as f64);
                        for (iteration, e) in res.error_trace.iter().enumerate() {
                            traces.push(TraceRow {
                                p,
                                n,
                                regularizer: pen.name().to_string(),
                                trial: t,
                                run,
                                iteration,
                                log_l2_error: e.ln(),
                            });
                        }
                    }
                }
                let total = cfg.trials * cfg.multistart_runs;
                row.success_rate = successes as f64 / total as f64;
                row.cluster_count = Some(clusters);
                row.median_linf_error = median(&mut linf);
                row.median_l2_error = median(&mut l2);
                row.mean_iterations = (!iters.is_empty()).then(|| iters.iter().sum::<f64>() / iters.len() as f64);
                rows.push(row);
            }
        }
        Ok((rows, traces))
    })?;
    Ok(ExperimentOutput { rows, traces, wall_time_seconds: wall })
}

#[derive(Debug, Clone, Copy)]
struct GlassoOutcome {
    support_exact: bool,
    max: f64,
    frobenius: f64,
    spectral: f64,
    chain_ok: bool,
    fixed_point_residual: f64,
    oracle_distance: f64,
    iterations: usize,
}

/// Sample covariance of `n` draws from `N(0, Θ*⁻¹)`.
pub fn sample_covariance(theta_star: &Matrix, n: usize, seed: u64) -> Result<Matrix> {
    let cov = spd_inverse(theta_star)?;
    let x = sample_gaussian(&cov, n, &mut crate::rng::stream(seed, 0))?;
    Ok(symmetrize(&(x.tr_mul(&x) / n as f64)))
}

fn glasso_trial(cfg: &ExperimentConfig, pen: Penalty, theta_star: &Matrix, sigma: &Matrix, lambda: f64) -> Result<GlassoOutcome> {
    let spec = RegularizerSpec::new(pen, lambda)?;
    let g = &cfg.glasso;
    let gcfg = GlassoConfig {
        kappa: g.kappa.map_or(Kappa::Auto, Kappa::Fixed),
        eps_pd: g.eps_pd,
        max_iters: g.max_iters,
        tol: g.tol,
        record_trace: false,
        ..GlassoConfig::default()
    };
    let p = theta_star.nrows();
    let res = glasso_solve(sigma, &spec, &gcfg, &Matrix::identity(p, p))?;
    let truth = EdgeSet::from_matrix(theta_star, 0.0);
    let found = EdgeSet::from_matrix(&res.theta, SUPPORT_TOL);
    let oracle = glasso_oracle(sigma, &truth)?;
    let norms = glasso_error_norms(&res.theta, theta_star, &truth)?;
    Ok(GlassoOutcome {
        support_exact: found == truth,
        max: norms.max,
        frobenius: norms.frobenius,
        spectral: norms.spectral,
        chain_ok: norms.chain_ok,
        fixed_point_residual: fixed_point_residual(sigma, &res.theta, &truth)?,
        oracle_distance: (&res.theta - &oracle).amax(),
        iterations: res.iterations,
    })
}

/// Chain-graph precision `Θ*`, `Σ̂` from `n` samples, one solve from `I` per
/// trial and regularizer. `success_rate` is the exact-support fraction.
pub fn run_glasso_study(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let (rows, wall) = timed(|| {
        let grid = cfg.grid();
        let tasks: Vec<(usize, usize)> = (0..grid.len()).flat_map(|c| (0..cfg.trials).map(move |t| (c, t))).collect();
        let outcomes: Vec<Vec<Option<GlassoOutcome>>> = tasks
            .par_iter()
            .map(|&(cell, trial)| {
                let (p, _, n, _) = grid[cell];
                let lambda = cfg.lambda_rule.lambda(p, n);
                let setup = make_chain_precision(p, cfg.glasso.rho_off)
                    .and_then(|t| Ok((sample_covariance(&t, n, trial_seed(cfg.seed, p, n, trial))?, t)));
                match setup {
                    Ok((sigma, theta_star)) => cfg
                        .regularizers
                        .iter()
                        .map(|&pen| glasso_trial(cfg, pen, &theta_star, &sigma, lambda).ok())
                        .collect(),
                    Err(_) => vec![None; cfg.regularizers.len()],
                }
            })
            .collect();

        let mut rows = Vec::new();
        for (cell, &(p, k, n, c)) in grid.iter().enumerate() {
            let lambda = cfg.lambda_rule.lambda(p, n);
            let cell_out = &outcomes[cell * cfg.trials..(cell + 1) * cfg.trials];
            for (r, pen) in cfg.regularizers.iter().enumerate() {
                let ok: Vec<GlassoOutcome> = cell_out.iter().filter_map(|o| o[r]).collect();
                let mut row = base_row(cfg, p, k, n, c, pen, lambda);
                row.theta = cfg.glasso.rho_off;
                let trials = cfg.trials as f64;
                row.success_rate = ok.iter().filter(|o| o.support_exact).count() as f64 / trials;
                row.median_linf_error = median(&mut ok.iter().map(|o| o.max).collect::<Vec<_>>());
                row.median_l2_error = median(&mut ok.iter().map(|o| o.frobenius).collect::<Vec<_>>());
                row.median_spectral_error = median(&mut ok.iter().map(|o| o.spectral).collect::<Vec<_>>());
                row.chain_ok_rate = Some(ok.iter().filter(|o| o.chain_ok).count() as f64 / trials);
                row.max_fixed_point_residual = ok.iter().map(|o| o.fixed_point_residual).reduce(f64::max);
                row.median_oracle_distance = median(&mut ok.iter().map(|o| o.oracle_distance).collect::<Vec<_>>());
                row.mean_iterations = (!ok.is_empty())
                    .then(|| ok.iter().map(|o| o.iterations as f64).sum::<f64>() / ok.len() as f64);
                row.failures = cfg.trials - ok.len();
                rows.push(row);
            }
        }
        Ok(rows)
    })?;
    Ok(ExperimentOutput { rows, traces: Vec::new(), wall_time_seconds: wall })
}

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    match cfg.study {
        Study::PhaseTransition => run_phase_transition(cfg),
        Study::ErrorCurves => run_error_curves(cfg),
        Study::Multistart => run_multistart(cfg),
        Study::GlassoStudy => run_glasso_study(cfg),
    }
}

pub fn write_rows_csv<W: Write>(out: W, rows: &[ExperimentRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for row in rows {
        w.write_record(row.to_record())?;
    }
    w.flush()?;
    Ok(())
}

pub fn rows_to_csv_string(rows: &[ExperimentRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_rows_csv(&mut buf, rows)?;
    String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
}

pub fn write_trace_csv<W: Write>(out: W, traces: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["p", "n", "regularizer", "trial", "run", "iteration", "log_l2_error"])?;
    for t in traces {
        w.write_record([
            t.p.to_string(),
            t.n.to_string(),
            t.regularizer.clone(),
            t.trial.to_string(),
            t.run.to_string(),
            t.iteration.to_string(),
            format_f64(t.log_l2_error),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary<'a> {
    pub schema_version: u32,
    pub study: &'static str,
    pub config: &'a ExperimentConfig,
    pub rows: usize,
    pub trace_rows: usize,
    pub wall_time_seconds: f64,
    pub threads: usize,
}

pub fn write_summary(path: impl AsRef<Path>, cfg: &ExperimentConfig, out: &ExperimentOutput) -> Result<()> {
    crate::io::write_json(
        path,
        &Summary {
            schema_version: SCHEMA_VERSION,
            study: cfg.study.name(),
            config: cfg,
            rows: out.rows.len(),
            trace_rows: out.traces.len(),
            wall_time_seconds: out.wall_time_seconds,
            threads: rayon::current_num_threads(),
        },
    )
}
