use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use decpep::experiments::config::parse_lambda_grid;
use decpep::experiments::sweep::SweepTable;
use decpep::experiments::{compare_methods, run_sweep, AlphaSpec, ClassKind, ExperimentConfig, InitKind};
use decpep::methods::MatrixMode;
use decpep::verification::audit::AuditingAdapter;
use decpep::verification::centralized::centralized_subgradient_pep;
use decpep::verification::oracle::{scalar_grid, scalar_oracle};
use decpep::verification::soundness::{soundness_sweep, SoundnessConfig};
use decpep::{solve, ClarabelAdapter, CriterionKind, Method, SolverSettings, SpectralRange};

/// Worst-case bounds for decentralized first-order methods.
#[derive(Parser, Debug)]
#[command(name = "decpep", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one problem per lambda and write a CSV table.
    Sweep(ExperimentArgs),
    /// Tune the step size at each lambda.
    OptimizeAlpha(ExperimentArgs),
    /// Sweep several methods or matrix modes over one grid.
    Compare {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Comma-separated `method:mode` pairs, e.g. `diging:constant,extra:time-varying`.
        #[arg(long, default_value = "diging:constant,extra:constant")]
        series: String,
    },
    /// Run the verification suites: soundness against simulated instances,
    /// scalar oracle, centralized reduction and reconstruction.
    Verify {
        /// Explicit instances in the soundness sweep.
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// Iterations used by every verification problem.
        #[arg(long = "K", default_value_t = 5)]
        k: usize,
        #[arg(long, env = "DECPEP_SOLVER_TOL")]
        solver_tol: Option<f64>,
    },
}

#[derive(Args, Debug, Clone)]
struct ExperimentArgs {
    /// JSON config; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    method: Option<Method>,
    /// Number of iterations.
    #[arg(long = "K")]
    k: Option<usize>,
    /// Single spectral radius; shorthand for a one-point grid.
    #[arg(long, conflicts_with = "lambda_grid")]
    lambda: Option<f64>,
    /// `start:step:stop` or a comma-separated list.
    #[arg(long)]
    lambda_grid: Option<String>,
    /// Function class: `bounded-subgradient` or `smooth-strongly-convex`.
    #[arg(long)]
    class: Option<ClassKind>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long = "L")]
    l: Option<f64>,
    #[arg(long = "R")]
    r: Option<f64>,
    #[arg(long = "D")]
    d: Option<f64>,
    /// A number, `1/sqrt(K)` or `optimize`.
    #[arg(long)]
    alpha: Option<AlphaSpec>,
    #[arg(long)]
    matrix_mode: Option<MatrixMode>,
    /// `fval-gap-avg` or `dist-k`.
    #[arg(long)]
    criterion: Option<CriterionKind>,
    /// `consensus` or `msd`.
    #[arg(long)]
    init: Option<InitKind>,
    /// Bound on the initial gradient disagreement.
    #[arg(long)]
    gradient_spread: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Plot `log10(1 + bound)`.
    #[arg(long)]
    log_shift: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, 0 for all cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Feasibility and gap tolerance of the solver.
    #[arg(long, env = "DECPEP_SOLVER_TOL")]
    solver_tol: Option<f64>,
    /// Leave out the wall time column so tables are reproducible byte for byte.
    #[arg(long)]
    no_timing: bool,
}

impl ExperimentArgs {
    /// Config file (or defaults), then flags. Without a config file,
    /// DIGing and EXTRA start from the smooth strongly convex setup.
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_json_file(p)?,
            None => match self.method {
                Some(m @ (Method::Diging | Method::Extra)) => ExperimentConfig::smooth_default(m),
                _ => ExperimentConfig::default(),
            },
        };
        if let Some(m) = self.method {
            cfg.method = m;
        }
        if let Some(k) = self.k {
            cfg.k = k;
        }
        if let Some(l) = self.lambda {
            cfg.lambda_grid = vec![l];
        }
        if let Some(g) = &self.lambda_grid {
            cfg.lambda_grid = parse_lambda_grid(g)?;
        }
        if self.mu.is_some() || self.l.is_some() {
            cfg.class = ClassKind::SmoothStronglyConvex;
        }
        if self.r.is_some() {
            cfg.class = ClassKind::BoundedSubgradient;
        }
        if let Some(c) = self.class {
            cfg.class = c;
        }
        if let Some(v) = self.mu {
            cfg.mu = v;
        }
        if let Some(v) = self.l {
            cfg.l = v;
        }
        if let Some(v) = self.r {
            cfg.r = v;
        }
        if let Some(v) = self.d {
            cfg.d = v;
        }
        if let Some(a) = self.alpha {
            cfg.alpha = a;
        }
        if let Some(m) = self.matrix_mode {
            cfg.matrix_mode = m;
        }
        if let Some(c) = self.criterion {
            cfg.criterion = c;
        }
        if let Some(i) = self.init {
            cfg.init = i;
        }
        if self.gradient_spread.is_some() {
            cfg.gradient_spread = self.gradient_spread;
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        if self.svg.is_some() {
            cfg.svg = self.svg.clone();
        }
        cfg.log_shift |= self.log_shift;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(j) = self.jobs {
            cfg.jobs = j;
        }
        if let Some(t) = self.solver_tol {
            cfg.solver = SolverSettings {
                max_iter: cfg.solver.max_iter,
                ..SolverSettings::with_tol(t)
            };
        }
        if self.no_timing {
            cfg.record_wall_time = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.8}")).unwrap_or_else(|| "-".into())
}

fn print_table(t: &SweepTable) {
    println!("{:>8} {:>12} {:>16} {:>14}", "lambda", "alpha", "bound", "status");
    for r in &t.rows {
        println!(
            "{:>8} {:>12.6} {:>16} {:>14}",
            r.lambda,
            r.point.alpha,
            fmt_opt(r.point.bound),
            r.point.status
        );
    }
}

fn sweep(args: &ExperimentArgs) -> Result<bool> {
    let cfg = args.resolve()?;
    let t = run_sweep(&cfg)?;
    match cfg.out {
        Some(_) => print_table(&t),
        None => print!("{}", t.to_csv_string(cfg.record_wall_time)?),
    }
    Ok(t.failures() == 0)
}

fn optimize(args: &ExperimentArgs) -> Result<bool> {
    let mut cfg = args.resolve()?;
    cfg.alpha = AlphaSpec::Optimize;
    let t = run_sweep(&cfg)?;
    println!("{:>8} {:>12} {:>16}", "lambda", "alpha*", "bound");
    for r in &t.rows {
        match r.point.bound {
            Some(b) => println!("{:>8} {:>12.6} {b:>16.8}", r.lambda, r.point.alpha),
            None => println!("{:>8} {:>12} {:>16}  {}", r.lambda, "-", "-", r.point.status),
        }
    }
    Ok(t.failures() == 0)
}

fn compare(args: &ExperimentArgs, series: &str) -> Result<bool> {
    let base = args.resolve()?;
    let mut configs = Vec::new();
    for item in series.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (m, mode) = item.split_once(':').unwrap_or((item, "constant"));
        let method: Method = m.parse()?;
        let mode: MatrixMode = mode.parse()?;
        let mut c = ExperimentConfig {
            method,
            matrix_mode: mode,
            ..base.clone()
        };
        if configs.is_empty() {
            c.out = base.out.clone();
            c.svg = base.svg.clone();
        }
        configs.push(c);
    }
    if configs.is_empty() {
        bail!("no series to compare");
    }
    let cmp = compare_methods(&configs)?;
    let csv = cmp.to_csv_string()?;
    if base.out.is_none() {
        print!("{csv}");
    }
    for (name, t) in &cmp.tables {
        println!("{name}: {} rows, {} failed", t.rows.len(), t.failures());
    }
    Ok(cmp.failures() == 0)
}

fn verify(instances: usize, seed: u64, k: usize, tol: Option<f64>) -> Result<bool> {
    let settings = tol.map(SolverSettings::with_tol).unwrap_or_default();
    let audit = AuditingAdapter::new(ClarabelAdapter::new(settings));
    let mut ok = true;

    let cfg = SoundnessConfig {
        instances,
        seed,
        k,
        ..SoundnessConfig::default()
    };
    let r = soundness_sweep(&audit, &cfg).context("soundness sweep")?;
    let pass = r.violations() == 0;
    ok &= pass;
    println!(
        "soundness: {} ({} instances, {} violations, max(simulated - bound) = {:.3e})",
        if pass { "ok" } else { "FAILED" },
        r.cases.len(),
        r.violations(),
        r.worst_margin()
    );

    for lam in [0.3, 0.6, 0.9] {
        let s = decpep::verification::soundness::soundness_scenario(Method::Dgd, k, MatrixMode::Constant, lam)?;
        let bound = solve(&audit, &s.build()?.problem)?.value;
        let range = SpectralRange::symmetric(lam)?;
        let o = scalar_oracle(&audit, &s, range, &scalar_grid(range, 41))?;
        let sound = o.best <= bound + 1e-6;
        ok &= sound;
        println!(
            "scalar oracle at lambda={lam}: {:.8} vs bound {:.8} (ratio {:.5}, argmax {:.3}){}",
            o.best,
            bound,
            o.best / bound,
            o.argmax,
            if sound { "" } else { "  EXCEEDS BOUND" }
        );
    }

    let alpha = 1.0 / (k.max(1) as f64).sqrt();
    let s = decpep::verification::soundness::soundness_scenario(Method::Dgd, k, MatrixMode::Constant, 0.0)?;
    let spectral = solve(&audit, &s.build()?.problem)?.value;
    let central = centralized_subgradient_pep(k, alpha, 1.0, 1.0)?;
    // exact averaging still lets local gradients differ, so this is a lower bound
    let below = central <= spectral + 1e-6;
    ok &= below;
    println!("centralized at lambda=0: {central:.8} vs spectral {spectral:.8}");

    let (n, bad) = audit.summary(1e-6);
    ok &= bad.is_empty();
    println!("reconstruction: {n} solutions checked, {} failures", bad.len());
    for c in bad.iter().take(5) {
        println!("  residual {:.3e} at `{}`", c.max_residual.max(c.objective_gap), c.worst);
    }
    Ok(ok)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Sweep(a) => sweep(a),
        Command::OptimizeAlpha(a) => optimize(a),
        Command::Compare { exp, series } => compare(exp, series),
        Command::Verify {
            instances,
            seed,
            k,
            solver_tol,
        } => verify(*instances, *seed, *k, *solver_tol),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            log::error!("some rows failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
