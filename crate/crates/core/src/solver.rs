//! Conic solver adapters.
//!
//! An adapter takes an [`SdpStandardForm`] and returns a variable vector
//! with a status. [`ClarabelAdapter`] is the built-in one; other solvers
//! plug in by implementing [`SolverAdapter`].

use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{PepError, Result};
use crate::gram::BlockTag;
use crate::problem::PepProblem;
use crate::sdp::{svec_index, to_standard_form, SdpStandardForm, SdpStats, SparseRow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub tol_feas: f64,
    pub tol_gap_abs: f64,
    pub tol_gap_rel: f64,
    pub max_iter: u32,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol_feas: 1e-8,
            tol_gap_abs: 1e-8,
            tol_gap_rel: 1e-8,
            max_iter: 200,
        }
    }
}

impl SolverSettings {
    /// Same tolerance for feasibility and both gaps.
    pub fn with_tol(tol: f64) -> Self {
        SolverSettings {
            tol_feas: tol,
            tol_gap_abs: tol,
            tol_gap_rel: tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    /// Residuals within ten times the requested tolerances.
    NearOptimal,
    Infeasible,
    Unbounded,
    SolverFailure,
}

impl SolveStatus {
    pub fn is_usable(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::NearOptimal)
    }

    pub fn name(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::NearOptimal => "near-optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::SolverFailure => "solver-failure",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap_abs: f64,
    pub gap_rel: f64,
}

/// What an adapter hands back.
#[derive(Debug, Clone)]
pub struct RawSolution {
    pub z: Vec<f64>,
    pub status: SolveStatus,
    pub residuals: Residuals,
    pub iterations: u32,
    pub detail: String,
}

/// A conic solver able to handle PSD cones plus linear constraints.
///
/// Implementations must be deterministic for identical inputs and safe to
/// call concurrently on independent forms.
pub trait SolverAdapter: Send + Sync {
    fn name(&self) -> &str;
    fn settings(&self) -> SolverSettings;
    fn solve_form(&self, form: &SdpStandardForm) -> Result<RawSolution>;
}

#[derive(Debug, Clone)]
pub struct Solution {
    /// Upper bound on the worst-case criterion.
    pub value: f64,
    pub g_par: DMatrix<f64>,
    pub g_perp: DMatrix<f64>,
    pub fvals: Vec<f64>,
    pub residuals: Residuals,
    pub status: SolveStatus,
    pub iterations: u32,
    pub solve_time: f64,
    pub stats: SdpStats,
}

#[derive(Debug, Clone, Default)]
pub struct ClarabelAdapter {
    pub settings: SolverSettings,
}

impl ClarabelAdapter {
    pub fn new(settings: SolverSettings) -> Self {
        ClarabelAdapter { settings }
    }
}

/// Scale of an svec entry in Clarabel's triangle convention.
fn tri_scale(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        std::f64::consts::SQRT_2
    }
}

struct Triplets {
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    b: Vec<f64>,
}

impl Triplets {
    /// Append the row `s = b - A z` for `s = scale * (r·z + c)`.
    fn push_affine(&mut self, r: &SparseRow, scale: f64) {
        let m = self.b.len();
        for &(j, c) in &r.coeffs {
            self.rows.push(m);
            self.cols.push(j);
            self.vals.push(-scale * c);
        }
        self.b.push(scale * r.constant);
    }
}

impl SolverAdapter for ClarabelAdapter {
    fn name(&self) -> &str {
        "clarabel"
    }

    fn settings(&self) -> SolverSettings {
        self.settings
    }

    fn solve_form(&self, form: &SdpStandardForm) -> Result<RawSolution> {
        let n = form.n_vars();
        let mut t = Triplets {
            rows: Vec::new(),
            cols: Vec::new(),
            vals: Vec::new(),
            b: Vec::new(),
        };
        let mut cones = Vec::new();

        // zero cone: s = -(a·z + c) = 0
        for (_, r) in &form.equalities {
            t.push_affine(r, -1.0);
        }
        if !form.equalities.is_empty() {
            cones.push(SupportedConeT::ZeroConeT(form.equalities.len()));
        }
        // nonnegative cone: s = -(a·z + c) >= 0
        for (_, r) in &form.inequalities {
            t.push_affine(r, -1.0);
        }
        if !form.inequalities.is_empty() {
            cones.push(SupportedConeT::NonnegativeConeT(form.inequalities.len()));
        }
        // Gram blocks
        for block in BlockTag::ALL {
            let dim = form.block_dim(block);
            if dim == 0 {
                continue;
            }
            let off = form.block_offset(block);
            for j in 0..dim {
                for i in 0..=j {
                    let r = SparseRow {
                        coeffs: vec![(off + svec_index(i, j), 1.0)],
                        constant: 0.0,
                    };
                    t.push_affine(&r, tri_scale(i, j));
                }
            }
            cones.push(if dim == 1 {
                SupportedConeT::NonnegativeConeT(1)
            } else {
                SupportedConeT::PSDTriangleConeT(dim)
            });
        }
        // LMIs
        for lmi in &form.lmis {
            for j in 0..lmi.dim {
                for i in 0..=j {
                    t.push_affine(&lmi.entries[svec_index(i, j)], tri_scale(i, j));
                }
            }
            cones.push(if lmi.dim == 1 {
                SupportedConeT::NonnegativeConeT(1)
            } else {
                SupportedConeT::PSDTriangleConeT(lmi.dim)
            });
        }

        let m = t.b.len();
        let a = CscMatrix::new_from_triplets(m, n, t.rows, t.cols, t.vals);
        let p = CscMatrix::zeros((n, n));
        let mut q = vec![0.0; n];
        for &(j, c) in &form.objective.coeffs {
            q[j] -= c;
        }
        let mut last = None;
        for &reg in &REGULARIZATION_LADDER {
            let raw = self.run(&p, &q, &a, &t.b, &cones, reg)?;
            // a singular KKT system shows up right away; later failures are
            // genuine and would fail again
            if raw.status != SolveStatus::SolverFailure || raw.iterations > 2 {
                return Ok(raw);
            }
            log::debug!("retrying with regularization above {reg:e}: {}", raw.detail);
            last = Some(raw);
        }
        Ok(last.expect("ladder is nonempty"))
    }
}

/// Static KKT regularization, tried in order while the solver fails
/// numerically. Large constant-matrix LMIs need more than Clarabel's
/// default.
const REGULARIZATION_LADDER: [f64; 3] = [1e-7, 1e-6, 1e-5];

impl ClarabelAdapter {
    fn run(
        &self,
        p: &CscMatrix<f64>,
        q: &[f64],
        a: &CscMatrix<f64>,
        b: &[f64],
        cones: &[SupportedConeT<f64>],
        reg: f64,
    ) -> Result<RawSolution> {
        let s = self.settings;
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .tol_feas(s.tol_feas)
            .tol_gap_abs(s.tol_gap_abs)
            .tol_gap_rel(s.tol_gap_rel)
            .max_iter(s.max_iter)
            .max_threads(1)
            .static_regularization_constant(reg)
            .direct_solve_method("faer".to_string())
            .build()
            .map_err(|e| PepError::SolverFailure(format!("invalid settings: {e:?}")))?;
        let mut solver = DefaultSolver::new(p, q, a, b, cones, settings)
            .map_err(|e| PepError::SolverFailure(format!("setup failed: {e}")))?;
        solver.solve();

        let info = &solver.info;
        let residuals = Residuals {
            primal: info.res_primal,
            dual: info.res_dual,
            gap_abs: info.gap_abs,
            gap_rel: info.gap_rel,
        };
        let within = |k: f64| {
            residuals.primal <= k * s.tol_feas
                && residuals.dual <= k * s.tol_feas
                && (residuals.gap_abs <= k * s.tol_gap_abs || residuals.gap_rel <= k * s.tol_gap_rel)
        };
        let raw = solver.solution.status;
        let status = match raw {
            SolverStatus::Solved => SolveStatus::Optimal,
            SolverStatus::AlmostSolved => SolveStatus::NearOptimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
            _ if within(10.0) => SolveStatus::NearOptimal,
            _ => SolveStatus::SolverFailure,
        };
        Ok(RawSolution {
            z: solver.solution.x.clone(),
            status,
            residuals,
            iterations: solver.solution.iterations,
            detail: format!("{raw:?}"),
        })
    }
}

/// Emit, solve and unpack. Infeasible, unbounded and failed solves are
/// returned as errors carrying the solver diagnostics.
pub fn solve(adapter: &dyn SolverAdapter, problem: &PepProblem) -> Result<Solution> {
    let form = to_standard_form(problem)?;
    solve_form(adapter, &form)
}

pub fn solve_form(adapter: &dyn SolverAdapter, form: &SdpStandardForm) -> Result<Solution> {
    let start = Instant::now();
    let raw = adapter.solve_form(form)?;
    let solve_time = start.elapsed().as_secs_f64();
    let diag = || {
        format!(
            "{} after {} iterations: {} (primal {:.2e}, dual {:.2e}, gap {:.2e})",
            adapter.name(),
            raw.iterations,
            raw.detail,
            raw.residuals.primal,
            raw.residuals.dual,
            raw.residuals.gap_abs
        )
    };
    match raw.status {
        SolveStatus::Infeasible => return Err(PepError::Infeasible(diag())),
        SolveStatus::Unbounded => return Err(PepError::Unbounded(diag())),
        SolveStatus::SolverFailure => return Err(PepError::SolverFailure(diag())),
        SolveStatus::NearOptimal => log::debug!("accepting near-optimal solve: {}", diag()),
        SolveStatus::Optimal => {}
    }
    let value = form.objective.evaluate(&raw.z);
    let (g_par, g_perp, fvals) = form.unpack(&raw.z);
    Ok(Solution {
        value,
        g_par,
        g_perp,
        fvals,
        residuals: raw.residuals,
        status: raw.status,
        iterations: raw.iterations,
        solve_time,
        stats: form.stats(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consensus::SpectralRange;
    use crate::function_class::FunctionClass;
    use crate::methods::{Method, MethodParams};
    use crate::pep::{apply_criterion, CriterionKind, InitialCondition, PerformanceCriterion, Scenario};
    use crate::problem::{ConsensusModel, PepBuilder};
    use crate::gram::ScalarExpr;

    fn adapter() -> ClarabelAdapter {
        ClarabelAdapter::default()
    }

    fn scenario(k: usize, crit: CriterionKind) -> Scenario {
        Scenario::new(
            Method::Diging,
            MethodParams::new(k, 0.5),
            FunctionClass::SmoothStronglyConvex { mu: 0.1, l: 1.0 },
            InitialCondition::ConsensusStart { d: 1.0 },
            crit,
            ConsensusModel::Spectral(SpectralRange::symmetric(0.5).unwrap()),
        )
    }

    #[test]
    fn zero_iterations_saturate_initial_condition() {
        let b = scenario(0, CriterionKind::DistanceAtK).build().unwrap();
        let s = solve(&adapter(), &b.problem).unwrap();
        assert!((s.value - 1.0).abs() < 1e-6, "{}", s.value);
    }

    #[test]
    fn zero_objective() {
        let mut pep = PepBuilder::new();
        pep.add_optimum().unwrap();
        let ic = InitialCondition::ConsensusStart { d: 1.0 };
        let x0 = ic.initial_point(&mut pep).unwrap();
        crate::pep::apply_initial_condition(&mut pep, &x0, ic).unwrap();
        let trace = Method::Dgd.build(&mut pep, x0, &MethodParams::new(2, 0.5)).unwrap();
        apply_criterion(&mut pep, &trace, &PerformanceCriterion::Custom(ScalarExpr::zero())).unwrap();
        let p = pep
            .finish(
                FunctionClass::BoundedSubgradientConvex { r: 1.0 },
                &ConsensusModel::Spectral(SpectralRange::symmetric(0.5).unwrap()),
                true,
            )
            .unwrap();
        let s = solve(&adapter(), &p).unwrap();
        assert!(s.value.abs() < 1e-7);
    }

    #[test]
    fn one_gradient_step_matches_closed_form() {
        // From a consensus start with lam = 0, one DIGing step is the full
        // gradient step x1 = x0 - alpha g0, whose worst contraction is max(|1 - alpha mu|, |1 - alpha L|)^2.
        let mut s = scenario(1, CriterionKind::DistanceAtK);
        s.consensus = ConsensusModel::Spectral(SpectralRange::symmetric(0.0).unwrap());
        // identical starting gradients keep the step on the consensus subspace
        s.gradient_spread = Some(0.0);
        for alpha in [0.5, 1.5] {
            let b = s.with_alpha(alpha).build().unwrap();
            let sol = solve(&adapter(), &b.problem).unwrap();
            let rate = f64::max((1.0 - alpha * 0.1_f64).abs(), (1.0 - alpha).abs()).powi(2);
            assert!((sol.value - rate).abs() < 1e-6, "alpha={alpha}: {} vs {rate}", sol.value);
        }
    }

    #[test]
    fn gram_blocks_are_psd_and_symmetric() {
        let b = scenario(3, CriterionKind::FvalGapAveraged).build().unwrap();
        let s = solve(&adapter(), &b.problem).unwrap();
        for g in [&s.g_par, &s.g_perp] {
            assert_eq!(g, &g.transpose());
            let min = nalgebra::SymmetricEigen::new(g.clone()).eigenvalues.min();
            assert!(min > -1e-7);
        }
        assert!(s.status.is_usable());
    }

    #[test]
    fn smooth_class_without_gradient_spread_is_unbounded() {
        // Only the average of the local gradients at the optimum is pinned.
        let mut s = scenario(2, CriterionKind::DistanceAtK);
        s.gradient_spread = None;
        let b = s.build().unwrap();
        assert!(matches!(solve(&adapter(), &b.problem), Err(PepError::Unbounded(_))));
    }

    #[test]
    fn deterministic() {
        let b = scenario(3, CriterionKind::DistanceAtK).build().unwrap();
        let a = solve(&adapter(), &b.problem).unwrap();
        let c = solve(&adapter(), &b.problem).unwrap();
        assert_eq!(a.value.to_bits(), c.value.to_bits());
    }
}
