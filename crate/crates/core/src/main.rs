use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ncreg::datagen::{make_design, sample_trial, BetaPattern, DesignFamily, DesignSpec, Response, TrialData, TrialSpec};
use ncreg::experiments::{self, ExperimentConfig, Study};
use ncreg::glasso::{glasso_solve, GlassoConfig, Kappa};
use ncreg::io;
use ncreg::pdw::construct_witness;
use ncreg::solver::{composite_gd, objective, SolverConfig};
use ncreg::{Error, LossModel, Penalty, RegularizerSpec, Result, SolveStatus, Vector};

#[derive(Parser)]
#[command(name = "ncreg", version, about = "Nonconvex-regularized sparse M-estimation")]
struct Cli {
    /// Worker threads for parallel work (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Composite gradient descent from zero (or --init).
    Solve(SolveArgs),
    /// Primal-dual witness certificate for a target support.
    PdwCheck(PdwArgs),
    /// Nonconvex graphical Lasso on a sample covariance.
    Glasso(GlassoArgs),
    /// Simulate one design/trial and write it as CSV.
    Gen(GenArgs),
    /// Run a Monte Carlo study from a JSON config.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum LossKind {
    Ols,
    Corrected,
    Logistic,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegKind {
    L1,
    Scad,
    Mcp,
    Lsp,
}

#[derive(Args)]
struct RegArgs {
    #[arg(long, value_enum)]
    reg: RegKind,
    #[arg(long)]
    lambda: f64,
    /// SCAD shape.
    #[arg(long, default_value_t = 2.5)]
    a: f64,
    /// MCP shape.
    #[arg(long, default_value_t = 1.5)]
    b: f64,
}

impl RegArgs {
    fn spec(&self) -> Result<RegularizerSpec> {
        let pen = match self.reg {
            RegKind::L1 => Penalty::L1,
            RegKind::Scad => Penalty::Scad { a: self.a },
            RegKind::Mcp => Penalty::Mcp { b: self.b },
            RegKind::Lsp => Penalty::Lsp,
        };
        RegularizerSpec::new(pen, self.lambda)
    }
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, value_enum)]
    loss: LossKind,
    /// Covariates and response, `X.csv,y.csv`.
    #[arg(long, value_delimiter = ',', required = true)]
    data: Vec<PathBuf>,
    /// Covariate noise level for the corrected loss (`Σ_w = σ_w² I`).
    #[arg(long = "sigma-w")]
    sigma_w: Option<f64>,
    #[command(flatten)]
    reg: RegArgs,
    /// ℓ1 side constraint (default: none).
    #[arg(long = "R")]
    radius: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

impl ModelArgs {
    fn model(&self) -> Result<LossModel> {
        if self.data.len() != 2 {
            return Err(Error::InvalidArgument("--data takes exactly two files, X.csv,y.csv".into()));
        }
        let x = io::read_matrix_csv(&self.data[0])?;
        let y = io::read_vector_csv(&self.data[1])?;
        match self.loss {
            LossKind::Ols => LossModel::ols(x, y),
            LossKind::Logistic => LossModel::logistic(x, y),
            LossKind::Corrected => {
                let s = self
                    .sigma_w
                    .ok_or_else(|| Error::InvalidArgument("--loss corrected needs --sigma-w".into()))?;
                LossModel::corrupted(&x, &y, &TrialData::sigma_w(x.ncols(), s))
            }
        }
    }

    fn solver(&self) -> SolverConfig {
        SolverConfig::default()
            .with_radius(self.radius.unwrap_or(f64::INFINITY))
            .with_max_iters(self.max_iters)
            .with_tol(self.tol)
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PdwArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// 0-based indices of the target support.
    #[arg(long)]
    support: PathBuf,
    /// True parameter, enables the ℓ∞ and beta-min diagnostics.
    #[arg(long)]
    beta_star: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GlassoArgs {
    #[arg(long)]
    sigma: PathBuf,
    #[command(flatten)]
    reg: RegArgs,
    /// Spectral bound on Θ: `auto` for √(2/μ), or a number.
    #[arg(long, default_value = "auto")]
    kappa: String,
    #[arg(long, default_value_t = 20_000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum DesignKind {
    M1,
    M2,
    Identity,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    design: DesignKind,
    /// Design parameter (σ_x for the identity design).
    #[arg(long, default_value_t = 1.0)]
    theta: f64,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    sigma_eps: f64,
    #[arg(long = "sigma-w", default_value_t = 0.0)]
    sigma_w: f64,
    #[arg(long, value_enum, default_value = "flat-positive")]
    pattern: PatternKind,
    #[arg(long)]
    logistic: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum PatternKind {
    FlatPositive,
    RandomSigns,
}

#[derive(Clone, Copy, ValueEnum)]
enum StudyKind {
    PhaseTransition,
    ErrorCurves,
    Multistart,
    Glasso,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(value_enum)]
    study: StudyKind,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Per-iteration error traces (multistart only).
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Serialize)]
struct SolveOutput {
    beta: Vec<f64>,
    status: SolveStatus,
    kkt_residual: f64,
    iterations: usize,
    objective: f64,
    eta: f64,
}

fn solve(args: &SolveArgs) -> Result<()> {
    let model = args.model.model()?;
    let spec = args.model.reg.spec()?;
    let init = match &args.init {
        Some(path) => io::read_vector_csv(path)?,
        None => Vector::zeros(model.dim()),
    };
    let mut cfg = args.model.solver();
    cfg.record_trace = false;
    let res = composite_gd(&model, &spec, &cfg, &init)?;
    let out = SolveOutput {
        beta: res.beta.iter().copied().collect(),
        status: res.status,
        kkt_residual: res.kkt_residual,
        iterations: res.iterations,
        objective: objective(&model, &spec, &res.beta)?,
        eta: res.eta,
    };
    io::write_json(&args.out, &out)
}

fn pdw_check(args: &PdwArgs) -> Result<()> {
    let model = args.model.model()?;
    let spec = args.model.reg.spec()?;
    let support = io::read_index_csv(&args.support)?;
    let truth = args.beta_star.as_ref().map(io::read_vector_csv).transpose()?;
    let cert = construct_witness(&model, &spec, &args.model.solver(), &support, truth.as_ref())?;
    eprintln!("verdict: {:?}, dual margin {:.3e}", cert.verdict, cert.dual_margin);
    io::write_json(&args.out, &cert)
}

fn glasso(args: &GlassoArgs) -> Result<()> {
    let sigma = io::read_matrix_csv(&args.sigma)?;
    let spec = args.reg.spec()?;
    let kappa = match args.kappa.as_str() {
        "auto" => Kappa::Auto,
        v => Kappa::Fixed(v.parse().map_err(|_| Error::InvalidArgument(format!("bad --kappa {v:?}")))?),
    };
    let cfg = GlassoConfig { kappa, max_iters: args.max_iters, tol: args.tol, record_trace: false, ..GlassoConfig::default() };
    let p = sigma.nrows();
    let res = glasso_solve(&sigma, &spec, &cfg, &ncreg::Matrix::identity(p, p))?;
    eprintln!("{:?} after {} iterations, kkt residual {:.3e}", res.status, res.iterations, res.kkt_residual);
    io::write_matrix_csv(&args.out, &res.theta)
}

fn gen(args: &GenArgs) -> Result<()> {
    let family = match args.design {
        DesignKind::M1 => DesignFamily::M1 { theta: args.theta, k: args.k },
        DesignKind::M2 => DesignFamily::M2 { theta: args.theta },
        DesignKind::Identity => DesignFamily::Identity { sigma_x: args.theta },
    };
    let design = make_design(&DesignSpec::new(family, args.p))?;
    let pattern = match args.pattern {
        PatternKind::FlatPositive => BetaPattern::FlatPositive,
        PatternKind::RandomSigns => BetaPattern::RandomSigns,
    };
    let trial = TrialSpec {
        p: args.p,
        k: args.k,
        n: args.n,
        pattern,
        sigma_eps: args.sigma_eps,
        sigma_w: args.sigma_w,
        seed: args.seed,
    };
    let response = if args.logistic { Response::Logistic } else { Response::Linear };
    let data = sample_trial(&design, &trial, response)?;
    std::fs::create_dir_all(&args.out)?;
    let dir = args.out.as_path();
    io::write_matrix_csv(dir.join("X.csv"), &data.x)?;
    io::write_matrix_csv(dir.join("Z.csv"), &data.z)?;
    io::write_vector_csv(dir.join("y.csv"), &data.y)?;
    io::write_vector_csv(dir.join("beta_star.csv"), &data.beta_star)
}

fn experiment(args: &ExperimentArgs) -> Result<()> {
    let mut cfg: ExperimentConfig = io::read_json(&args.config)?;
    cfg.study = match args.study {
        StudyKind::PhaseTransition => Study::PhaseTransition,
        StudyKind::ErrorCurves => Study::ErrorCurves,
        StudyKind::Multistart => Study::Multistart,
        StudyKind::Glasso => Study::GlassoStudy,
    };
    if let Ok(seed) = std::env::var("NCREG_SEED") {
        cfg.seed = seed
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("NCREG_SEED is not an integer: {seed:?}")))?;
    }
    let out = experiments::run(&cfg)?;
    experiments::write_rows_csv(BufWriter::new(File::create(&args.out)?), &out.rows)?;
    if let Some(path) = &args.trace {
        experiments::write_trace_csv(BufWriter::new(File::create(path)?), &out.traces)?;
    }
    if let Some(path) = &args.summary {
        experiments::write_summary(path, &cfg, &out)?;
    }
    eprintln!("{} rows in {:.1}s -> {}", out.rows.len(), out.wall_time_seconds, args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let result = match &cli.command {
        Command::Solve(a) => solve(a),
        Command::PdwCheck(a) => pdw_check(a),
        Command::Glasso(a) => glasso(a),
        Command::Gen(a) => gen(a),
        Command::Experiment(a) => experiment(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
