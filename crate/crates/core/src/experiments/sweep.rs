use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{PepError, Result};
use crate::experiments::config::ExperimentConfig;
use crate::experiments::plot::{write_svg, Series, YScale};
use crate::sdp::to_standard_form;
use crate::solver::{solve_form, ClarabelAdapter, SolverAdapter};

/// One solved (or failed) problem.
#[derive(Debug, Clone, Serialize)]
pub struct PointResult {
    pub alpha: f64,
    pub bound: Option<f64>,
    pub status: String,
    pub iterations: u32,
    pub primal_residual: Option<f64>,
    pub dual_residual: Option<f64>,
    pub gap_rel: Option<f64>,
    pub n_par: usize,
    pub n_perp: usize,
    pub n_vars: usize,
    pub n_equalities: usize,
    pub n_inequalities: usize,
    pub max_lmi_dim: usize,
    pub wall_time_s: f64,
    pub error: String,
}

impl PointResult {
    fn failed(alpha: f64, e: &PepError) -> Self {
        PointResult {
            alpha,
            bound: None,
            status: status_of(e).into(),
            iterations: 0,
            primal_residual: None,
            dual_residual: None,
            gap_rel: None,
            n_par: 0,
            n_perp: 0,
            n_vars: 0,
            n_equalities: 0,
            n_inequalities: 0,
            max_lmi_dim: 0,
            wall_time_s: 0.0,
            error: e.to_string(),
        }
    }

    pub fn ok(&self) -> bool {
        self.bound.is_some()
    }
}

fn status_of(e: &PepError) -> &'static str {
    match e {
        PepError::Infeasible(_) => "infeasible",
        PepError::Unbounded(_) => "unbounded",
        PepError::SolverFailure(_) => "solver-failure",
        _ => "error",
    }
}

/// Assemble and solve one problem; failures are folded into the result.
pub fn solve_point(cfg: &ExperimentConfig, adapter: &dyn SolverAdapter, lambda: f64, alpha: f64) -> PointResult {
    let start = Instant::now();
    let form = cfg
        .scenario(lambda, alpha)
        .and_then(|s| s.build())
        .and_then(|b| to_standard_form(&b.problem));
    let mut r = match form {
        Err(e) => PointResult::failed(alpha, &e),
        Ok(form) => {
            let st = form.stats();
            let mut r = match solve_form(adapter, &form) {
                Ok(sol) => PointResult {
                    bound: Some(sol.value),
                    status: sol.status.name().to_string(),
                    iterations: sol.iterations,
                    primal_residual: Some(sol.residuals.primal),
                    dual_residual: Some(sol.residuals.dual),
                    gap_rel: Some(sol.residuals.gap_rel),
                    error: String::new(),
                    ..PointResult::failed(alpha, &PepError::SolverFailure(String::new()))
                },
                Err(e) => PointResult::failed(alpha, &e),
            };
            r.n_par = st.n_par;
            r.n_perp = st.n_perp;
            r.n_vars = st.n_vars;
            r.n_equalities = st.n_equalities;
            r.n_inequalities = st.n_inequalities;
            r.max_lmi_dim = st.max_lmi_dim;
            r
        }
    };
    r.wall_time_s = start.elapsed().as_secs_f64();
    r
}

#[derive(Debug, Clone, Serialize)]
pub struct AlphaOptimum {
    pub alpha: f64,
    pub bound: f64,
    /// Every evaluated step size, grid first, in evaluation order.
    pub evaluations: Vec<(f64, Option<f64>)>,
    pub best: PointResult,
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Coarse log grid, then golden-section search in `log(alpha)` between the
/// neighbours of the best grid point, `refine_iterations` solves in all
/// (at least two). Failed solves count as `+inf`. The
/// returned step size is the best evaluated one, so it is never worse than
/// any grid point.
pub fn optimize_alpha(cfg: &ExperimentConfig, adapter: &dyn SolverAdapter, lambda: f64) -> Result<AlphaOptimum> {
    let (lo, hi) = cfg.alpha_bounds();
    let grid = log_grid(lo, hi, cfg.alpha_search.grid_points.max(2));
    let mut evals: Vec<PointResult> = grid.par_iter().map(|&a| solve_point(cfg, adapter, lambda, a)).collect();
    let score = |r: &PointResult| r.bound.unwrap_or(f64::INFINITY);
    let best_i = (0..evals.len())
        .min_by(|&i, &j| score(&evals[i]).total_cmp(&score(&evals[j])))
        .expect("grid is nonempty");
    if evals[best_i].bound.is_none() {
        return Err(PepError::SolverFailure(format!(
            "every step size on [{lo}, {hi}] failed at lambda = {lambda}: {}",
            evals[best_i].error
        )));
    }
    let mut a = grid[best_i.saturating_sub(1)].ln();
    let mut b = grid[(best_i + 1).min(grid.len() - 1)].ln();
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let eval = |t: f64, evals: &mut Vec<PointResult>| {
        let r = solve_point(cfg, adapter, lambda, t.exp());
        let s = score(&r);
        evals.push(r);
        s
    };
    if cfg.alpha_search.refine_iterations > 0 && b > a {
        let mut fc = eval(c, &mut evals);
        let mut fd = eval(d, &mut evals);
        for _ in 2..cfg.alpha_search.refine_iterations {
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = eval(c, &mut evals);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = eval(d, &mut evals);
            }
        }
    }
    let best = evals
        .iter()
        .min_by(|x, y| score(x).total_cmp(&score(y)))
        .expect("nonempty")
        .clone();
    Ok(AlphaOptimum {
        alpha: best.alpha,
        bound: best.bound.expect("best point solved"),
        evaluations: evals.iter().map(|r| (r.alpha, r.bound)).collect(),
        best,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub method: String,
    pub matrix_mode: String,
    pub lambda: f64,
    #[serde(flatten)]
    pub point: PointResult,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.point.ok()).count()
    }

    pub fn bounds(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.point.bound).collect()
    }

    /// Header plus one row per lambda, columns in a fixed order.
    pub fn write_csv(&self, path: &Path, wall_time: bool) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        self.write_records(&mut w, wall_time)?;
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self, wall_time: bool) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        self.write_records(&mut w, wall_time)?;
        let bytes = w.into_inner().map_err(|e| PepError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    fn write_records<W: std::io::Write>(&self, w: &mut csv::Writer<W>, wall_time: bool) -> Result<()> {
        let mut header = vec![
            "method",
            "matrix_mode",
            "lambda",
            "alpha",
            "bound",
            "status",
            "iterations",
            "primal_residual",
            "dual_residual",
            "gap_rel",
            "n_par",
            "n_perp",
            "n_vars",
            "n_equalities",
            "n_inequalities",
            "max_lmi_dim",
        ];
        if wall_time {
            header.push("wall_time_s");
        }
        header.push("error");
        w.write_record(&header)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            let p = &r.point;
            let mut rec = vec![
                r.method.clone(),
                r.matrix_mode.clone(),
                r.lambda.to_string(),
                p.alpha.to_string(),
                opt(p.bound),
                p.status.clone(),
                p.iterations.to_string(),
                opt(p.primal_residual),
                opt(p.dual_residual),
                opt(p.gap_rel),
                p.n_par.to_string(),
                p.n_perp.to_string(),
                p.n_vars.to_string(),
                p.n_equalities.to_string(),
                p.n_inequalities.to_string(),
                p.max_lmi_dim.to_string(),
            ];
            if wall_time {
                rec.push(format!("{:.6}", p.wall_time_s));
            }
            rec.push(p.error.clone());
            w.write_record(&rec)?;
        }
        Ok(())
    }

    pub fn series(&self, name: &str) -> Series {
        Series {
            name: name.to_string(),
            points: self.rows.iter().map(|r| (r.lambda, r.point.bound)).collect(),
        }
    }
}

pub(crate) fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| PepError::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

fn sweep_rows(cfg: &ExperimentConfig, adapter: &dyn SolverAdapter) -> Vec<SweepRow> {
    cfg.lambda_grid
        .par_iter()
        .map(|&lambda| {
            let point = match cfg.fixed_alpha() {
                Some(a) => solve_point(cfg, adapter, lambda, a),
                None => match optimize_alpha(cfg, adapter, lambda) {
                    Ok(o) => o.best,
                    Err(e) => PointResult::failed(f64::NAN, &e),
                },
            };
            SweepRow {
                method: cfg.method.to_string(),
                matrix_mode: cfg.matrix_mode.to_string(),
                lambda,
                point,
            }
        })
        .collect()
}

/// Solve every grid point (optimizing the step size when asked). Failures
/// are recorded per row and do not stop the sweep. Writes the CSV and SVG
/// outputs named in the config.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepTable> {
    cfg.validate()?;
    let adapter = ClarabelAdapter::new(cfg.solver);
    let rows = with_pool(cfg.jobs, || sweep_rows(cfg, &adapter))?;
    let table = SweepTable { rows };
    if let Some(out) = &cfg.out {
        table.write_csv(out, cfg.record_wall_time)?;
    }
    if let Some(svg) = &cfg.svg {
        let scale = if cfg.log_shift { YScale::LogShift } else { YScale::Linear };
        let title = format!("{} K={} ({})", cfg.method, cfg.k, cfg.criterion);
        write_svg(svg, &title, &[table.series("bound")], scale)?;
    }
    Ok(table)
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub lambda_grid: Vec<f64>,
    /// `(series name, table)` in config order.
    pub tables: Vec<(String, SweepTable)>,
}

impl Comparison {
    pub fn column(&self, name: &str) -> Option<&SweepTable> {
        self.tables.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn failures(&self) -> usize {
        self.tables.iter().map(|(_, t)| t.failures()).sum()
    }

    /// `lambda`, then `bound_<name>`, `alpha_<name>` and `status_<name>`
    /// per series.
    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["lambda".to_string()];
        for (n, _) in &self.tables {
            header.push(format!("bound_{n}"));
            header.push(format!("alpha_{n}"));
            header.push(format!("status_{n}"));
        }
        w.write_record(&header)?;
        for (i, l) in self.lambda_grid.iter().enumerate() {
            let mut rec = vec![l.to_string()];
            for (_, t) in &self.tables {
                let p = &t.rows[i].point;
                rec.push(p.bound.map(|b| b.to_string()).unwrap_or_default());
                rec.push(p.alpha.to_string());
                rec.push(p.status.clone());
            }
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| PepError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn series(&self) -> Vec<Series> {
        self.tables.iter().map(|(n, t)| t.series(n)).collect()
    }
}

/// Run several sweeps over one lambda grid and criterion. The first config
/// supplies the outputs, the pool size and the plot scale.
pub fn compare_methods(configs: &[ExperimentConfig]) -> Result<Comparison> {
    let first = configs.first().ok_or_else(|| PepError::Config("nothing to compare".into()))?;
    for c in configs {
        if c.lambda_grid != first.lambda_grid {
            return Err(PepError::Config("configs use different lambda grids".into()));
        }
        if c.criterion != first.criterion {
            return Err(PepError::Config("configs use different criteria".into()));
        }
        c.validate()?;
    }
    let mut names: Vec<String> = Vec::new();
    for c in configs {
        let base = c.series_name();
        let mut name = base.clone();
        let mut n = 2;
        while names.contains(&name) {
            name = format!("{base}-{n}");
            n += 1;
        }
        names.push(name);
    }
    let tables = with_pool(first.jobs, || {
        configs
            .par_iter()
            .map(|c| SweepTable {
                rows: sweep_rows(c, &ClarabelAdapter::new(c.solver)),
            })
            .collect::<Vec<_>>()
    })?;
    let cmp = Comparison {
        lambda_grid: first.lambda_grid.clone(),
        tables: names.into_iter().zip(tables).collect(),
    };
    if let Some(out) = &first.out {
        std::fs::write(out, cmp.to_csv_string()?)?;
    }
    if let Some(svg) = &first.svg {
        let scale = if first.log_shift { YScale::LogShift } else { YScale::Linear };
        let title = format!("K={} ({})", first.k, first.criterion);
        write_svg(svg, &title, &cmp.series(), scale)?;
    }
    Ok(cmp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::AlphaSpec;
    use crate::experiments::plot::{render_svg, series_from_csv};
    use crate::methods::{MatrixMode, Method};

    fn small_dgd() -> ExperimentConfig {
        ExperimentConfig {
            k: 3,
            lambda_grid: vec![0.0, 0.5, 0.9],
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn one_row_per_lambda_with_status() {
        let t = run_sweep(&small_dgd()).unwrap();
        assert_eq!(t.rows.len(), 3);
        assert_eq!(t.failures(), 0);
        assert!(t.rows.iter().all(|r| r.point.status == "optimal" || r.point.status == "near-optimal"));
        let b: Vec<f64> = t.bounds().into_iter().map(Option::unwrap).collect();
        assert!(b[0] <= b[1] + 1e-7 && b[1] <= b[2] + 1e-7, "{b:?}");
        let csv = t.to_csv_string(true).unwrap();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().next().unwrap().contains("wall_time_s"));
    }

    #[test]
    fn untimed_csv_is_deterministic() {
        let cfg = ExperimentConfig {
            lambda_grid: vec![0.4],
            ..small_dgd()
        };
        let a = run_sweep(&cfg).unwrap().to_csv_string(false).unwrap();
        let b = run_sweep(&cfg).unwrap().to_csv_string(false).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.lines().count(), 2);
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        let mut cfg = small_dgd();
        cfg.solver.max_iter = 1;
        let t = run_sweep(&cfg).unwrap();
        assert_eq!(t.rows.len(), 3);
        assert_eq!(t.failures(), 3);
        for r in &t.rows {
            assert_eq!(r.point.status, "solver-failure");
            assert!(r.point.n_par > 0 && !r.point.error.is_empty());
        }
        let csv = t.to_csv_string(false).unwrap();
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn optimizer_beats_every_grid_point() {
        let cfg = ExperimentConfig {
            k: 2,
            alpha: AlphaSpec::Optimize,
            alpha_search: crate::experiments::config::AlphaSearch {
                grid_points: 6,
                refine_iterations: 6,
                ..Default::default()
            },
            ..ExperimentConfig::smooth_default(Method::Diging)
        };
        let o = optimize_alpha(&cfg, &ClarabelAdapter::default(), 0.5).unwrap();
        assert_eq!(o.evaluations.len(), 12);
        for (_, b) in &o.evaluations {
            if let Some(b) = b {
                assert!(o.bound <= *b);
            }
        }
        let (lo, hi) = cfg.alpha_bounds();
        assert!(o.alpha >= lo && o.alpha <= hi);
    }

    #[test]
    fn comparison_merges_columns_and_checks_grids() {
        let base = small_dgd();
        let tv = ExperimentConfig {
            matrix_mode: MatrixMode::TimeVarying,
            ..base.clone()
        };
        let cmp = compare_methods(&[base.clone(), tv]).unwrap();
        let csv = cmp.to_csv_string().unwrap();
        let header = csv.lines().next().unwrap();
        assert!(header.contains("bound_dgd-constant") && header.contains("bound_dgd-time-varying"));
        let c = cmp.column("dgd-constant").unwrap().bounds();
        let t = cmp.column("dgd-time-varying").unwrap().bounds();
        for (a, b) in c.iter().zip(&t) {
            assert!(a.unwrap() <= b.unwrap() + 1e-6);
        }
        let other = ExperimentConfig {
            lambda_grid: vec![0.1],
            ..base
        };
        assert!(compare_methods(&[small_dgd(), other]).is_err());
    }

    #[test]
    fn svg_regenerates_from_csv() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            lambda_grid: vec![0.2, 0.6],
            out: Some(dir.path().join("s.csv")),
            svg: Some(dir.path().join("s.svg")),
            ..small_dgd()
        };
        run_sweep(&cfg).unwrap();
        let svg = std::fs::read_to_string(dir.path().join("s.svg")).unwrap();
        let series = series_from_csv(&dir.path().join("s.csv"), "lambda", &["bound"]).unwrap();
        let title = format!("{} K={} ({})", cfg.method, cfg.k, cfg.criterion);
        assert_eq!(render_svg(&title, &series, YScale::Linear), svg);
    }
}
